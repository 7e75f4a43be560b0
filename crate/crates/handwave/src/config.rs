//! Flat key=value run configuration, resolved from defaults, then an
//! optional config file, then command-line overrides. Unknown keys are
//! rejected and every run logs the fully resolved configuration.

use std::fmt::Write as _;
use std::net::IpAddr;
use std::path::Path;

use crate::capture::InducerConfig;
use crate::dtw::{CostMetric, DtwConfig};
use crate::lstm::TrainConfig;
use crate::pipeline::{DecisionConfig, LogitThresholds, WindowingConfig, ZeroStdPolicy};
use crate::signal::{ChannelParams, GestureVariability, SamplingMode, SamplingProfile};
use crate::{Error, Result};

/// Variance-gate threshold setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateSetting {
    /// Minimum training-window variance, the initial estimate.
    Auto,
    /// Recall-preserving quantile of the training-window variances, the
    /// automated stand-in for hand-tuning the threshold online.
    Calibrate,
    Fixed(f64),
}

/// Logits-threshold setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSetting {
    /// Disabled (every prediction accepted).
    Off,
    /// Calibrated against a held-out synthetic noise recording.
    Calibrate,
    Fixed(LogitThresholds),
}

/// Training iteration setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationSetting {
    /// 600 for a single input session, 1000 for combined inputs.
    Auto,
    Fixed(usize),
}

/// Every tunable of the stack, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // channel
    pub l0_dbm: f64,
    pub path_loss_exp: f64,
    pub shadow_sigma_db: f64,
    pub nakagami_m: f64,
    pub nakagami_omega: f64,
    pub distance_m: f64,
    // sampling
    pub traffic: SamplingMode,
    pub beacon_interval_ms: f64,
    pub induced_rate_hz: f64,
    pub jitter_fraction: f64,
    pub quantize_dbm: bool,
    // synthesis
    pub per_class: usize,
    pub gap_s: f64,
    pub gesture_jitter_s: f64,
    pub gesture_scale: f64,
    // pipeline
    pub window_s: f64,
    pub hop_s: f64,
    pub tau: usize,
    pub variance_threshold: GateSetting,
    pub logit_thresholds: ThresholdSetting,
    pub min_gesture_recall: f64,
    pub pull_across_noise: bool,
    pub scaler_epsilon: Option<f64>,
    // training
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub init_range: f64,
    pub max_grad_norm: f64,
    pub iterations: IterationSetting,
    pub strict_init: bool,
    // evaluation
    pub train_ratio: f64,
    pub splits: usize,
    pub baseline_knn: bool,
    // k-NN DTW
    pub knn_k: usize,
    pub dtw_band: Option<usize>,
    pub dtw_cost: CostMetric,
    // false-positive soak
    pub soak_minutes: f64,
    pub bg_events: bool,
    pub bg_interval_s: f64,
    // live capture
    pub induce_target: IpAddr,
    pub induce_rate_hz: f64,
    pub induce_payload: usize,
    pub induce_seconds: Option<f64>,
    pub poll_path: String,
    pub poll_rate_hz: f64,
    pub interface: Option<String>,
    // general
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let channel = ChannelParams::default();
        let sampling = SamplingProfile::default();
        Self {
            l0_dbm: channel.l0_dbm,
            path_loss_exp: channel.path_loss_exp,
            shadow_sigma_db: channel.shadow_sigma_db,
            nakagami_m: channel.nakagami_m,
            nakagami_omega: channel.nakagami_omega,
            distance_m: channel.distance_m,
            traffic: sampling.mode,
            beacon_interval_ms: sampling.beacon_interval_ms,
            induced_rate_hz: sampling.induced_rate_hz,
            jitter_fraction: sampling.jitter_fraction,
            quantize_dbm: sampling.quantize_dbm,
            per_class: 300,
            gap_s: 10.0,
            gesture_jitter_s: 0.5,
            gesture_scale: 0.1,
            window_s: 4.0,
            hop_s: 1.0,
            tau: 50,
            variance_threshold: GateSetting::Auto,
            logit_thresholds: ThresholdSetting::Off,
            min_gesture_recall: 0.95,
            pull_across_noise: false,
            scaler_epsilon: None,
            hidden: 200,
            layers: 2,
            learning_rate: 0.001,
            batch_size: 50,
            dropout: 0.5,
            init_range: 0.08,
            max_grad_norm: 25.0,
            iterations: IterationSetting::Auto,
            strict_init: false,
            train_ratio: 0.75,
            splits: 10,
            baseline_knn: false,
            knn_k: 1,
            dtw_band: None,
            dtw_cost: CostMetric::L1,
            soak_minutes: 30.0,
            bg_events: true,
            bg_interval_s: 45.0,
            induce_target: IpAddr::V4(std::net::Ipv4Addr::LOCALHOST),
            induce_rate_hz: 700.0,
            induce_payload: 16,
            induce_seconds: None,
            poll_path: "/proc/net/wireless".into(),
            poll_rate_hz: 200.0,
            interface: None,
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParam(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidParam(format!("key `{key}`: expected a boolean, got `{value}`"))),
    }
}

impl RunConfig {
    /// Applies one `key=value` override; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "l0_dbm" => self.l0_dbm = parse_num(key, v)?,
            "path_loss_exp" => self.path_loss_exp = parse_num(key, v)?,
            "shadow_sigma_db" => self.shadow_sigma_db = parse_num(key, v)?,
            "nakagami_m" => {
                self.nakagami_m = if v == "inf" { f64::INFINITY } else { parse_num(key, v)? }
            }
            "nakagami_omega" => self.nakagami_omega = parse_num(key, v)?,
            "distance_m" => self.distance_m = parse_num(key, v)?,
            "traffic" => {
                self.traffic = match v.to_ascii_lowercase().as_str() {
                    "beacon" | "beacon-only" => SamplingMode::BeaconOnly,
                    "induced" => SamplingMode::Induced,
                    other => {
                        return Err(Error::InvalidParam(format!(
                            "key `traffic`: expected beacon|induced, got `{other}`"
                        )))
                    }
                }
            }
            "beacon_interval_ms" => self.beacon_interval_ms = parse_num(key, v)?,
            "induced_rate_hz" => self.induced_rate_hz = parse_num(key, v)?,
            "jitter_fraction" => self.jitter_fraction = parse_num(key, v)?,
            "quantize_dbm" => self.quantize_dbm = parse_bool(key, v)?,
            "per_class" => self.per_class = parse_num(key, v)?,
            "gap_s" => self.gap_s = parse_num(key, v)?,
            "gesture_jitter_s" => self.gesture_jitter_s = parse_num(key, v)?,
            "gesture_scale" => self.gesture_scale = parse_num(key, v)?,
            "window_s" => self.window_s = parse_num(key, v)?,
            "hop_s" => self.hop_s = parse_num(key, v)?,
            "tau" => self.tau = parse_num(key, v)?,
            "variance_threshold" => {
                self.variance_threshold = match v {
                    "auto" => GateSetting::Auto,
                    "calibrate" => GateSetting::Calibrate,
                    _ => GateSetting::Fixed(parse_num(key, v)?),
                }
            }
            "logit_thresholds" => {
                self.logit_thresholds = match v {
                    "off" => ThresholdSetting::Off,
                    "calibrate" => ThresholdSetting::Calibrate,
                    list => {
                        let parts: Vec<f64> = list
                            .split(',')
                            .map(|p| {
                                let p = p.trim();
                                if p == "-inf" {
                                    Ok(f64::NEG_INFINITY)
                                } else {
                                    parse_num(key, p)
                                }
                            })
                            .collect::<Result<_>>()?;
                        if parts.len() != 3 {
                            return Err(Error::InvalidParam(
                                "key `logit_thresholds`: expected off|calibrate|a,b,c".into(),
                            ));
                        }
                        ThresholdSetting::Fixed([parts[0], parts[1], parts[2]])
                    }
                }
            }
            "min_gesture_recall" => self.min_gesture_recall = parse_num(key, v)?,
            "pull_across_noise" => self.pull_across_noise = parse_bool(key, v)?,
            "scaler_epsilon" => {
                self.scaler_epsilon = if v == "off" { None } else { Some(parse_num(key, v)?) }
            }
            "hidden" => self.hidden = parse_num(key, v)?,
            "layers" => self.layers = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "init_range" => self.init_range = parse_num(key, v)?,
            "max_grad_norm" => {
                self.max_grad_norm = if v == "inf" { f64::INFINITY } else { parse_num(key, v)? }
            }
            "iterations" => {
                self.iterations = if v == "auto" {
                    IterationSetting::Auto
                } else {
                    IterationSetting::Fixed(parse_num(key, v)?)
                }
            }
            "strict_init" => self.strict_init = parse_bool(key, v)?,
            "train_ratio" => self.train_ratio = parse_num(key, v)?,
            "splits" => self.splits = parse_num(key, v)?,
            "baseline_knn" => self.baseline_knn = parse_bool(key, v)?,
            "knn_k" => self.knn_k = parse_num(key, v)?,
            "dtw_band" => {
                self.dtw_band = if v == "off" { None } else { Some(parse_num(key, v)?) }
            }
            "dtw_cost" => {
                self.dtw_cost = match v.to_ascii_lowercase().as_str() {
                    "l1" => CostMetric::L1,
                    "l2" => CostMetric::L2,
                    other => {
                        return Err(Error::InvalidParam(format!(
                            "key `dtw_cost`: expected l1|l2, got `{other}`"
                        )))
                    }
                }
            }
            "soak_minutes" => self.soak_minutes = parse_num(key, v)?,
            "bg_events" => self.bg_events = parse_bool(key, v)?,
            "bg_interval_s" => self.bg_interval_s = parse_num(key, v)?,
            "induce_target" => self.induce_target = parse_num(key, v)?,
            "induce_rate_hz" => self.induce_rate_hz = parse_num(key, v)?,
            "induce_payload" => self.induce_payload = parse_num(key, v)?,
            "induce_seconds" => {
                self.induce_seconds = if v == "off" { None } else { Some(parse_num(key, v)?) }
            }
            "poll_path" => self.poll_path = v.to_string(),
            "poll_rate_hz" => self.poll_rate_hz = parse_num(key, v)?,
            "interface" => {
                self.interface = if v == "off" { None } else { Some(v.to_string()) }
            }
            "seed" => self.seed = parse_num(key, v)?,
            other => return Err(Error::InvalidParam(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Loads `key = value` lines (with `#` comments) from a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParam(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    line_no + 1
                ))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Defaults, then the optional config file, then `key=value` overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::InvalidParam(format!("--set expects key=value, got `{item}`"))
            })?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    /// Full resolved configuration as `key=value` lines, the per-run log.
    pub fn to_kv_lines(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("l0_dbm", self.l0_dbm.to_string());
        kv("path_loss_exp", self.path_loss_exp.to_string());
        kv("shadow_sigma_db", self.shadow_sigma_db.to_string());
        kv(
            "nakagami_m",
            if self.nakagami_m.is_infinite() { "inf".into() } else { self.nakagami_m.to_string() },
        );
        kv("nakagami_omega", self.nakagami_omega.to_string());
        kv("distance_m", self.distance_m.to_string());
        kv(
            "traffic",
            match self.traffic {
                SamplingMode::BeaconOnly => "beacon".into(),
                SamplingMode::Induced => "induced".into(),
            },
        );
        kv("beacon_interval_ms", self.beacon_interval_ms.to_string());
        kv("induced_rate_hz", self.induced_rate_hz.to_string());
        kv("jitter_fraction", self.jitter_fraction.to_string());
        kv("quantize_dbm", self.quantize_dbm.to_string());
        kv("per_class", self.per_class.to_string());
        kv("gap_s", self.gap_s.to_string());
        kv("gesture_jitter_s", self.gesture_jitter_s.to_string());
        kv("gesture_scale", self.gesture_scale.to_string());
        kv("window_s", self.window_s.to_string());
        kv("hop_s", self.hop_s.to_string());
        kv("tau", self.tau.to_string());
        kv(
            "variance_threshold",
            match self.variance_threshold {
                GateSetting::Auto => "auto".into(),
                GateSetting::Calibrate => "calibrate".into(),
                GateSetting::Fixed(v) => v.to_string(),
            },
        );
        kv(
            "logit_thresholds",
            match self.logit_thresholds {
                ThresholdSetting::Off => "off".into(),
                ThresholdSetting::Calibrate => "calibrate".into(),
                ThresholdSetting::Fixed(t) => format!(
                    "{},{},{}",
                    fmt_threshold(t[0]),
                    fmt_threshold(t[1]),
                    fmt_threshold(t[2])
                ),
            },
        );
        kv("min_gesture_recall", self.min_gesture_recall.to_string());
        kv("pull_across_noise", self.pull_across_noise.to_string());
        kv(
            "scaler_epsilon",
            self.scaler_epsilon.map_or("off".into(), |v| v.to_string()),
        );
        kv("hidden", self.hidden.to_string());
        kv("layers", self.layers.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("dropout", self.dropout.to_string());
        kv("init_range", self.init_range.to_string());
        kv(
            "max_grad_norm",
            if self.max_grad_norm.is_infinite() {
                "inf".into()
            } else {
                self.max_grad_norm.to_string()
            },
        );
        kv(
            "iterations",
            match self.iterations {
                IterationSetting::Auto => "auto".into(),
                IterationSetting::Fixed(n) => n.to_string(),
            },
        );
        kv("strict_init", self.strict_init.to_string());
        kv("train_ratio", self.train_ratio.to_string());
        kv("splits", self.splits.to_string());
        kv("baseline_knn", self.baseline_knn.to_string());
        kv("knn_k", self.knn_k.to_string());
        kv("dtw_band", self.dtw_band.map_or("off".into(), |v| v.to_string()));
        kv(
            "dtw_cost",
            match self.dtw_cost {
                CostMetric::L1 => "l1".into(),
                CostMetric::L2 => "l2".into(),
            },
        );
        kv("soak_minutes", self.soak_minutes.to_string());
        kv("bg_events", self.bg_events.to_string());
        kv("bg_interval_s", self.bg_interval_s.to_string());
        kv("induce_target", self.induce_target.to_string());
        kv("induce_rate_hz", self.induce_rate_hz.to_string());
        kv("induce_payload", self.induce_payload.to_string());
        kv(
            "induce_seconds",
            self.induce_seconds.map_or("off".into(), |v| v.to_string()),
        );
        kv("poll_path", self.poll_path.clone());
        kv("poll_rate_hz", self.poll_rate_hz.to_string());
        kv("interface", self.interface.clone().unwrap_or_else(|| "off".into()));
        kv("seed", self.seed.to_string());
        out
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            l0_dbm: self.l0_dbm,
            path_loss_exp: self.path_loss_exp,
            shadow_sigma_db: self.shadow_sigma_db,
            nakagami_m: self.nakagami_m,
            nakagami_omega: self.nakagami_omega,
            distance_m: self.distance_m,
        }
    }

    pub fn gesture_variability(&self) -> GestureVariability {
        GestureVariability {
            placement_jitter_s: self.gesture_jitter_s,
            duration_scale: self.gesture_scale,
            amplitude_scale: self.gesture_scale,
        }
    }

    pub fn sampling_profile(&self) -> SamplingProfile {
        SamplingProfile {
            mode: self.traffic,
            beacon_interval_ms: self.beacon_interval_ms,
            induced_rate_hz: self.induced_rate_hz,
            jitter_fraction: self.jitter_fraction,
            quantize_dbm: self.quantize_dbm,
        }
    }

    pub fn windowing(&self) -> Result<WindowingConfig> {
        WindowingConfig::new(self.window_s, self.hop_s)
    }

    pub fn decision(&self) -> DecisionConfig {
        DecisionConfig { pull_across_noise: self.pull_across_noise }
    }

    pub fn zero_std_policy(&self) -> ZeroStdPolicy {
        match self.scaler_epsilon {
            Some(eps) => ZeroStdPolicy::Clamp(eps),
            None => ZeroStdPolicy::Error,
        }
    }

    /// Training configuration; `iterations` resolves against the number of
    /// input sessions (600 for one, 1000 for a combined dataset).
    pub fn train_config(&self, input_sessions: usize) -> TrainConfig {
        let iterations = match self.iterations {
            IterationSetting::Fixed(n) => n,
            IterationSetting::Auto => {
                if input_sessions > 1 {
                    1000
                } else {
                    600
                }
            }
        };
        TrainConfig {
            hidden: self.hidden,
            layers: self.layers,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            dropout: self.dropout,
            init_range: self.init_range,
            max_grad_norm: self.max_grad_norm,
            iterations,
            seed: self.seed,
            strict_init: self.strict_init,
        }
    }

    pub fn dtw_config(&self) -> DtwConfig {
        DtwConfig { band: self.dtw_band, k: self.knn_k, cost: self.dtw_cost }
    }

    pub fn inducer_config(&self) -> InducerConfig {
        InducerConfig {
            target: self.induce_target,
            rate_hz: self.induce_rate_hz,
            payload_size: self.induce_payload,
            duration: self.induce_seconds.map(std::time::Duration::from_secs_f64),
        }
    }
}

fn fmt_threshold(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("no_such_key", "1").is_err());
        assert!(cfg.set("tau", "abc").is_err());
    }

    #[test]
    fn kv_lines_round_trip_through_set() {
        let mut cfg = RunConfig::default();
        cfg.set("traffic", "beacon").unwrap();
        cfg.set("logit_thresholds", "1.5,-inf,0.25").unwrap();
        cfg.set("variance_threshold", "2.75").unwrap();
        cfg.set("dtw_band", "5").unwrap();
        cfg.set("iterations", "1234").unwrap();
        cfg.set("interface", "wlan0").unwrap();
        let lines = cfg.to_kv_lines();
        let mut rebuilt = RunConfig::default();
        for line in lines.lines() {
            let (k, v) = line.split_once('=').unwrap();
            rebuilt.set(k, v).unwrap();
        }
        assert_eq!(rebuilt, cfg);
    }

    #[test]
    fn resolution_order_is_defaults_file_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\ntau = 25\nhidden = 64\n").unwrap();
        let cfg = RunConfig::resolve(Some(&path), &["hidden=32".into()]).unwrap();
        assert_eq!(cfg.tau, 25);
        assert_eq!(cfg.hidden, 32);
        assert_eq!(cfg.layers, 2); // untouched default
    }

    #[test]
    fn auto_iterations_switch_for_combined_datasets() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train_config(1).iterations, 600);
        assert_eq!(cfg.train_config(3).iterations, 1000);
        let mut fixed = RunConfig::default();
        fixed.set("iterations", "50").unwrap();
        assert_eq!(fixed.train_config(3).iterations, 50);
    }

    #[test]
    fn bad_override_syntax_is_usage_error() {
        assert!(RunConfig::resolve(None, &["tau".into()]).is_err());
    }
}
