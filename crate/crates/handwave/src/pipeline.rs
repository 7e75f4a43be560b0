//! The online recognition chain: overlapping windowing, variance noise gate,
//! fixed-length feature preprocessing, logits thresholding and the prediction
//! decision rules.
//!
//! Preprocessing turns a variable-length raw window into exactly `tau`
//! features: subtract the window mean, pick the nearest raw sample at each of
//! `tau` equally spaced instants, then standardize and normalize each feature
//! with training-set statistics. Mean subtraction makes the features
//! invariant to constant RSSI offsets, so a device moved closer to or further
//! from the AP produces the same feature vector for the same gesture.

use std::collections::VecDeque;

use crate::lstm::LstmModel;
use crate::types::{GestureLabel, RssiSample};
use crate::{Error, Result};

/// Stream segmentation parameters: window length `T` and hop `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowingConfig {
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self { window_s: 4.0, hop_s: 1.0 }
    }
}

impl WindowingConfig {
    pub fn new(window_s: f64, hop_s: f64) -> Result<Self> {
        let cfg = Self { window_s, hop_s };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hop_s > 0.0 && self.hop_s <= self.window_s) {
            return Err(Error::InvalidParam(format!(
                "need 0 < hop_s <= window_s, got hop {} window {}",
                self.hop_s, self.window_s
            )));
        }
        Ok(())
    }

    pub fn window_ms(&self) -> i64 {
        (self.window_s * 1000.0).round() as i64
    }

    pub fn hop_ms(&self) -> i64 {
        (self.hop_s * 1000.0).round() as i64
    }
}

/// One raw stream window covering `[start_ms, start_ms + duration_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start_ms: i64,
    pub duration_ms: i64,
    pub samples: Vec<RssiSample>,
}

impl Window {
    pub fn start_s(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Population variance of the RSSI values; zero for empty windows.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let mean = self.samples.iter().map(|s| s.rssi_dbm).sum::<f64>() / n as f64;
        self.samples
            .iter()
            .map(|s| (s.rssi_dbm - mean).powi(2))
            .sum::<f64>()
            / n as f64
    }
}

/// Splits an ordered sample slice into overlapping windows starting every
/// `hop_s`, beginning at the first sample's timestamp. A window is emitted
/// once the stream reaches its end time; empty windows are emitted as empty
/// and left for the gate to reject.
pub fn window_stream(samples: &[RssiSample], cfg: &WindowingConfig) -> Result<Vec<Window>> {
    cfg.validate()?;
    if samples.windows(2).any(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
        return Err(Error::Data("window_stream input must be time-ordered".into()));
    }
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let last_ts = samples.last().unwrap().timestamp_ms;
    let window_ms = cfg.window_ms();
    let hop_ms = cfg.hop_ms();
    let mut windows = Vec::new();
    let mut ws = first.timestamp_ms;
    while ws + window_ms <= last_ts {
        let we = ws + window_ms;
        let lo = samples.partition_point(|s| s.timestamp_ms < ws);
        let hi = samples.partition_point(|s| s.timestamp_ms < we);
        windows.push(Window {
            start_ms: ws,
            duration_ms: window_ms,
            samples: samples[lo..hi].to_vec(),
        });
        ws += hop_ms;
    }
    Ok(windows)
}

/// Variance gate configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Windows with population variance below this (dB^2) are Noise.
    pub variance_threshold: f64,
}

impl GateConfig {
    pub fn new(variance_threshold: f64) -> Result<Self> {
        if !(variance_threshold >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "variance threshold must be >= 0, got {variance_threshold}"
            )));
        }
        Ok(Self { variance_threshold })
    }

    /// Threshold choice used before online tuning: the minimum window
    /// variance observed in the training gestures.
    pub fn from_training_windows<'a, I>(windows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Window>,
    {
        let min = windows
            .into_iter()
            .map(|w| w.variance())
            .fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::Data("no training windows to estimate the gate from".into()));
        }
        Self::new(min)
    }
}

/// Gate verdict for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Pass,
    Noise,
}

/// Windows whose variance falls below the threshold are Noise; empty windows
/// are always Noise.
pub fn variance_gate(window: &Window, cfg: &GateConfig) -> GateDecision {
    if window.is_empty() || window.variance() < cfg.variance_threshold {
        GateDecision::Noise
    } else {
        GateDecision::Pass
    }
}

/// A preprocessed window: exactly `tau` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, tau: usize) -> Result<Self> {
        if values.len() != tau {
            return Err(Error::Shape {
                expected: format!("{tau} features"),
                got: format!("{}", values.len()),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-feature standardization statistics fitted on the training set only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

/// What to do with zero-variance features at fit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroStdPolicy {
    /// Fail: a zero-variance feature means degenerate training data.
    Error,
    /// Clamp the standard deviation to the given epsilon.
    Clamp(f64),
}

impl Scaler {
    /// Per-feature mean and population standard deviation over the rows.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        Self::fit_with(rows, ZeroStdPolicy::Error)
    }

    pub fn fit_with(rows: &[Vec<f64>], policy: ZeroStdPolicy) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Data(format!(
                "scaler needs at least 2 training rows, got {}",
                rows.len()
            )));
        }
        let width = rows[0].len();
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape {
                expected: format!("{width} features per row"),
                got: "ragged rows".into(),
            });
        }
        let m = rows.len() as f64;
        let mut means = vec![0.0; width];
        for row in rows {
            for (acc, v) in means.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for mean in &mut means {
            *mean /= m;
        }
        let mut stds = vec![0.0; width];
        for row in rows {
            for ((acc, v), mean) in stds.iter_mut().zip(row).zip(&means) {
                *acc += (v - mean).powi(2);
            }
        }
        for (i, std) in stds.iter_mut().enumerate() {
            *std = (*std / m).sqrt();
            if *std <= 0.0 {
                match policy {
                    ZeroStdPolicy::Error => {
                        return Err(Error::Data(format!(
                            "feature {i} has zero variance in the training set"
                        )))
                    }
                    ZeroStdPolicy::Clamp(eps) => *std = eps,
                }
            }
        }
        Ok(Self { means, stds })
    }

    pub fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(Error::Shape {
                expected: format!("{} stds", means.len()),
                got: format!("{}", stds.len()),
            });
        }
        if stds.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParam("scaler stds must be positive".into()));
        }
        Ok(Self { means, stds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `(x - mean) / std` element-wise.
    pub fn apply(&self, values: &mut [f64]) -> Result<()> {
        if values.len() != self.means.len() {
            return Err(Error::Shape {
                expected: format!("{} features", self.means.len()),
                got: format!("{}", values.len()),
            });
        }
        for ((v, mean), std) in values.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - mean) / std;
        }
        Ok(())
    }
}

/// Steps 1-2 of preprocessing: subtract the window mean, then pick the
/// nearest sample at each of `tau` equally spaced instants across the
/// window's sample span. This is the representation the scaler is fitted on.
pub fn resample_centered(window: &Window, tau: usize) -> Result<Vec<f64>> {
    if tau == 0 {
        return Err(Error::InvalidParam("tau must be positive".into()));
    }
    if window.is_empty() {
        return Err(Error::Data("cannot preprocess an empty window".into()));
    }
    let n = window.samples.len();
    let mean = window.samples.iter().map(|s| s.rssi_dbm).sum::<f64>() / n as f64;
    let t0 = window.samples[0].timestamp_ms as f64;
    let span = window.samples[n - 1].timestamp_ms as f64 - t0;
    let mut out = Vec::with_capacity(tau);
    let mut cursor = 0usize;
    for k in 0..tau {
        let target = t0 + span * (k as f64 + 0.5) / tau as f64;
        // Targets are increasing, so the nearest sample never moves left.
        while cursor + 1 < n
            && (window.samples[cursor + 1].timestamp_ms as f64 - target).abs()
                <= (window.samples[cursor].timestamp_ms as f64 - target).abs()
        {
            cursor += 1;
        }
        out.push(window.samples[cursor].rssi_dbm - mean);
    }
    Ok(out)
}

/// Full preprocessing chain: mean subtraction, resampling to `tau` values,
/// then standardizing and normalizing with the training statistics.
pub fn preprocess(window: &Window, scaler: &Scaler, tau: usize) -> Result<FeatureVector> {
    let mut values = resample_centered(window, tau)?;
    scaler.apply(&mut values)?;
    FeatureVector::new(values, tau)
}

/// Per-class logit acceptance thresholds. `NEG_INFINITY` disables a class's
/// threshold.
pub type LogitThresholds = [f64; 3];

/// Thresholds that accept every prediction (uncalibrated state).
pub fn thresholds_disabled() -> LogitThresholds {
    [f64::NEG_INFINITY; 3]
}

/// Argmax over the logits with ties broken by class order; predictions whose
/// winning logit falls below that class's threshold become Noise.
pub fn threshold_logits(logits: [f64; 3], thresholds: LogitThresholds) -> GestureLabel {
    let mut best = 0usize;
    for k in 1..3 {
        if logits[k] > logits[best] {
            best = k;
        }
    }
    if logits[best] >= thresholds[best] {
        GestureLabel::from_class_index(best).unwrap()
    } else {
        GestureLabel::Noise
    }
}

/// Decision-rule options.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecisionConfig {
    /// Permit Pull after a Push even when Noise windows intervene. The
    /// default reading requires Push as the immediate predecessor.
    pub pull_across_noise: bool,
}

/// Pure (predecessor, candidate) decision table, the immediate-predecessor
/// reading of the rules:
/// - Noise is always accepted.
/// - Swipe and Push are accepted after Noise.
/// - A candidate equal to its predecessor is accepted.
/// - Pull is accepted only after Push (or a continuing Pull).
/// - Everything else is rejected and becomes Noise.
pub fn decide(predecessor: GestureLabel, candidate: GestureLabel) -> GestureLabel {
    use GestureLabel::*;
    match (predecessor, candidate) {
        (_, Noise) => Noise,
        (Noise, Swipe) | (Noise, Push) => candidate,
        (Noise, Pull) => Noise,
        (p, c) if p == c => c,
        (Push, Pull) => Pull,
        _ => Noise,
    }
}

/// Bounded history of recent accepted predictions plus the acceptance rules.
#[derive(Debug, Clone)]
pub struct DecisionState {
    history: VecDeque<GestureLabel>,
    last_non_noise: Option<GestureLabel>,
    cfg: DecisionConfig,
}

const HISTORY_LEN: usize = 2;

impl Default for DecisionState {
    fn default() -> Self {
        Self::new(DecisionConfig::default())
    }
}

impl DecisionState {
    pub fn new(cfg: DecisionConfig) -> Self {
        Self {
            history: VecDeque::with_capacity(HISTORY_LEN),
            last_non_noise: None,
            cfg,
        }
    }

    /// Most recent accepted output; Noise before any output exists.
    pub fn predecessor(&self) -> GestureLabel {
        self.history.back().copied().unwrap_or(GestureLabel::Noise)
    }

    pub fn history(&self) -> impl Iterator<Item = GestureLabel> + '_ {
        self.history.iter().copied()
    }

    /// Applies the decision rules to a candidate prediction. Rejected
    /// candidates become Noise; the accepted output is appended to history.
    pub fn step(&mut self, candidate: GestureLabel) -> GestureLabel {
        let predecessor = self.predecessor();
        let mut accepted = decide(predecessor, candidate);
        if accepted == GestureLabel::Noise
            && candidate == GestureLabel::Pull
            && self.cfg.pull_across_noise
            && predecessor == GestureLabel::Noise
            && matches!(
                self.last_non_noise,
                Some(GestureLabel::Push) | Some(GestureLabel::Pull)
            )
        {
            accepted = GestureLabel::Pull;
        }
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(accepted);
        if accepted.is_gesture() {
            self.last_non_noise = Some(accepted);
        }
        accepted
    }
}

/// A fully assembled recognizer: model, scaler and all stage configs.
///
/// Stage state other than the decision history is immutable, so one
/// recognizer per stream composes the full chain of gate, preprocessing,
/// inference, thresholding and decision rules.
pub struct Recognizer<'a> {
    model: &'a LstmModel,
    scaler: &'a Scaler,
    gate: GateConfig,
    windowing: WindowingConfig,
    thresholds: LogitThresholds,
    decision: DecisionState,
}

impl<'a> Recognizer<'a> {
    pub fn new(
        model: &'a LstmModel,
        scaler: &'a Scaler,
        gate: GateConfig,
        windowing: WindowingConfig,
        thresholds: LogitThresholds,
        decision_cfg: DecisionConfig,
    ) -> Result<Self> {
        windowing.validate()?;
        if scaler.len() != model.dims().tau {
            return Err(Error::Shape {
                expected: format!("scaler over {} features", model.dims().tau),
                got: format!("{}", scaler.len()),
            });
        }
        Ok(Self {
            model,
            scaler,
            gate,
            windowing,
            thresholds,
            decision: DecisionState::new(decision_cfg),
        })
    }

    /// Runs one window through gate, preprocessing, inference, thresholding
    /// and the decision rules.
    pub fn classify_window(&mut self, window: &Window) -> Result<GestureLabel> {
        let candidate = if variance_gate(window, &self.gate) == GateDecision::Noise {
            GestureLabel::Noise
        } else {
            let features = preprocess(window, self.scaler, self.model.dims().tau)?;
            let logits = self.model.forward(&features)?;
            threshold_logits(logits, self.thresholds)
        };
        Ok(self.decision.step(candidate))
    }

    /// Batch form over a complete sample slice: one `(window start time,
    /// accepted label)` pair per hop.
    pub fn run(&mut self, samples: &[RssiSample]) -> Result<Vec<(f64, GestureLabel)>> {
        let windows = window_stream(samples, &self.windowing)?;
        let mut out = Vec::with_capacity(windows.len());
        for window in &windows {
            let label = self.classify_window(window)?;
            out.push((window.start_s(), label));
        }
        Ok(out)
    }
}

/// End-to-end composition over a finished stream.
#[allow(clippy::too_many_arguments)]
pub fn recognize_stream(
    samples: &[RssiSample],
    model: &LstmModel,
    scaler: &Scaler,
    gate: GateConfig,
    windowing: WindowingConfig,
    thresholds: LogitThresholds,
    decision_cfg: DecisionConfig,
) -> Result<Vec<(f64, GestureLabel)>> {
    Recognizer::new(model, scaler, gate, windowing, thresholds, decision_cfg)?.run(samples)
}

/// Incremental recognizer for live sources: feed samples as they arrive and
/// collect decisions as window boundaries pass.
pub struct StreamRecognizer<'a> {
    recognizer: Recognizer<'a>,
    buffer: VecDeque<RssiSample>,
    window_start_ms: Option<i64>,
}

impl<'a> StreamRecognizer<'a> {
    pub fn new(recognizer: Recognizer<'a>) -> Self {
        Self { recognizer, buffer: VecDeque::new(), window_start_ms: None }
    }

    /// Pushes one sample; returns any decisions whose windows it completed.
    pub fn push(&mut self, sample: RssiSample) -> Result<Vec<(f64, GestureLabel)>> {
        let window_ms = self.recognizer.windowing.window_ms();
        let hop_ms = self.recognizer.windowing.hop_ms();
        let start = *self.window_start_ms.get_or_insert(sample.timestamp_ms);
        let mut decisions = Vec::new();
        let mut ws = start;
        while sample.timestamp_ms >= ws + window_ms {
            let we = ws + window_ms;
            let samples: Vec<RssiSample> = self
                .buffer
                .iter()
                .filter(|s| s.timestamp_ms >= ws && s.timestamp_ms < we)
                .copied()
                .collect();
            let window = Window { start_ms: ws, duration_ms: window_ms, samples };
            let label = self.recognizer.classify_window(&window)?;
            decisions.push((window.start_s(), label));
            ws += hop_ms;
            while self
                .buffer
                .front()
                .is_some_and(|s| s.timestamp_ms < ws)
            {
                self.buffer.pop_front();
            }
        }
        self.window_start_ms = Some(ws);
        self.buffer.push_back(sample);
        Ok(decisions)
    }
}
