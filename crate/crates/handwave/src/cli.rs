//! Batch command implementations behind the `handwave` binary: synthesis,
//! training, evaluation, grid search, false-positive soak, stream
//! recognition and traffic induction.
//!
//! Commands write their primary outputs (models, CSVs) deterministically:
//! rerunning with the same configuration and seed reproduces them byte for
//! byte. Wall-clock timings only ever appear in `summary.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use crate::capture::{induce, PolledSource, PollerConfig, ReplaySource, RssiSource};
use crate::config::{GateSetting, IterationSetting, RunConfig, ThresholdSetting};
use crate::dtw::knn_predict;
use crate::ingest::{
    extract_gesture_windows, parse_rssi_log, serialize_rssi_log, split_train_test, LabeledWindow,
    SessionLog,
};
use crate::lstm::{
    load_model, save_model, train, LstmModel, TrainConfig, TrainResult, TrainingSet,
};
use crate::pipeline::{
    preprocess, resample_centered, thresholds_disabled, DecisionConfig, FeatureVector, GateConfig,
    LogitThresholds, Recognizer, Scaler, StreamRecognizer, Window, WindowingConfig,
};
use crate::report::{mean_std, predictions_csv, ConfusionMatrix, EvalReport};
use crate::signal::{generate_dataset_with, generate_noise_stream, BackgroundEvents, GestureTemplate};
use crate::types::GestureLabel;
use crate::{Error, Result};

/// Converts an extracted training window into a pipeline window.
pub fn labeled_to_window(lw: &LabeledWindow, window_ms: i64) -> Window {
    Window { start_ms: lw.origin.start_ms, duration_ms: window_ms, samples: lw.samples.clone() }
}

/// Parses every input session log, reporting skipped lines on stderr.
pub fn load_sessions(paths: &[PathBuf]) -> Result<Vec<SessionLog>> {
    let mut sessions = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(path)?;
        let parsed = parse_rssi_log(&text)?;
        if parsed.skipped_lines > 0 {
            eprintln!(
                "{}: skipped {} malformed line(s)",
                path.display(),
                parsed.skipped_lines
            );
        }
        sessions.push(parsed.session);
    }
    Ok(sessions)
}

/// Extracts labeled gesture windows from every session.
pub fn sessions_to_windows(sessions: &[SessionLog], window_s: f64) -> Result<Vec<LabeledWindow>> {
    let mut windows = Vec::new();
    for (k, session) in sessions.iter().enumerate() {
        let extracted = extract_gesture_windows(session, window_s)?;
        if extracted.dropped > 0 {
            eprintln!("session {k}: dropped {} truncated window(s)", extracted.dropped);
        }
        windows.extend(extracted.windows);
    }
    if windows.is_empty() {
        return Err(Error::Data("no gesture windows extracted from the inputs".into()));
    }
    Ok(windows)
}

/// A trained recognition stack: everything `run` and `fp-soak` need.
pub struct FittedPipeline {
    pub model: LstmModel,
    pub scaler: Scaler,
    pub gate: GateConfig,
    pub thresholds: LogitThresholds,
    pub windowing: WindowingConfig,
    pub decision: DecisionConfig,
}

/// Per-class logit thresholds from training data: for each class, the
/// largest threshold that keeps at least `min_recall` of its correct
/// predictions, i.e. the low quantile of true-positive winning logits.
pub fn calibrate_thresholds(
    model: &LstmModel,
    features: &[FeatureVector],
    labels: &[usize],
    min_recall: f64,
) -> Result<LogitThresholds> {
    if !(0.0..=1.0).contains(&min_recall) {
        return Err(Error::InvalidParam(format!(
            "min_recall must lie in [0, 1], got {min_recall}"
        )));
    }
    let mut tp_logits: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (fv, &label) in features.iter().zip(labels) {
        let logits = model.forward(fv)?;
        let mut best = 0usize;
        for k in 1..3 {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        if best == label {
            tp_logits[label].push(logits[best]);
        }
    }
    let mut thresholds = thresholds_disabled();
    for (k, values) in tp_logits.iter_mut().enumerate() {
        if values.is_empty() {
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = (((1.0 - min_recall) * values.len() as f64).floor() as usize)
            .min(values.len() - 1);
        thresholds[k] = values[idx];
    }
    Ok(thresholds)
}

/// Preprocesses windows into standardized feature rows with a scaler fitted
/// on (and only on) `fit_windows`.
pub fn build_feature_set(
    fit_windows: &[LabeledWindow],
    apply_windows: &[LabeledWindow],
    cfg: &RunConfig,
) -> Result<(Scaler, Vec<FeatureVector>, Vec<usize>)> {
    let window_ms = cfg.windowing()?.window_ms();
    let fit_rows: Vec<Vec<f64>> = fit_windows
        .iter()
        .map(|lw| resample_centered(&labeled_to_window(lw, window_ms), cfg.tau))
        .collect::<Result<_>>()?;
    let scaler = Scaler::fit_with(&fit_rows, cfg.zero_std_policy())?;
    let mut features = Vec::with_capacity(apply_windows.len());
    let mut labels = Vec::with_capacity(apply_windows.len());
    for lw in apply_windows {
        let fv = preprocess(&labeled_to_window(lw, window_ms), &scaler, cfg.tau)?;
        features.push(fv);
        labels.push(lw.label.class_index().ok_or_else(|| {
            Error::Data("labeled windows must carry gesture labels".into())
        })?);
    }
    Ok((scaler, features, labels))
}

fn features_to_training_set(features: &[FeatureVector], labels: &[usize]) -> Result<TrainingSet> {
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.values().to_vec()).collect();
    let gesture_labels: Vec<GestureLabel> = labels
        .iter()
        .map(|&k| GestureLabel::from_class_index(k).unwrap())
        .collect();
    TrainingSet::from_rows(&rows, &gesture_labels)
}

/// Fits the full stack on training windows: scaler, model, variance gate and
/// logit thresholds.
pub fn fit_pipeline(
    cfg: &RunConfig,
    train_windows: &[LabeledWindow],
    train_cfg: &TrainConfig,
) -> Result<(FittedPipeline, TrainResult)> {
    let windowing = cfg.windowing()?;
    let (scaler, features, labels) = build_feature_set(train_windows, train_windows, cfg)?;
    let data = features_to_training_set(&features, &labels)?;
    let result = train(&data, train_cfg)?;

    let gate = match cfg.variance_threshold {
        GateSetting::Fixed(v) => GateConfig::new(v)?,
        GateSetting::Auto => {
            let windows: Vec<Window> = train_windows
                .iter()
                .map(|lw| labeled_to_window(lw, windowing.window_ms()))
                .collect();
            GateConfig::from_training_windows(windows.iter())?
        }
        GateSetting::Calibrate => {
            let mut variances: Vec<f64> = train_windows
                .iter()
                .map(|lw| labeled_to_window(lw, windowing.window_ms()).variance())
                .collect();
            variances.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = (((1.0 - cfg.min_gesture_recall) * variances.len() as f64).floor()
                as usize)
                .min(variances.len() - 1);
            GateConfig::new(variances[idx])?
        }
    };
    let thresholds = match cfg.logit_thresholds {
        ThresholdSetting::Off => thresholds_disabled(),
        ThresholdSetting::Fixed(t) => t,
        ThresholdSetting::Calibrate => {
            calibrate_thresholds(&result.model, &features, &labels, cfg.min_gesture_recall)?
        }
    };
    Ok((
        FittedPipeline {
            model: result.model.clone(),
            scaler,
            gate,
            thresholds,
            windowing,
            decision: cfg.decision(),
        },
        result,
    ))
}

// ---------------------------------------------------------------------------
// Pipeline parameter persistence (everything the model file does not carry).
// ---------------------------------------------------------------------------

const PIPELINE_FILE: &str = "pipeline.params";
const MODEL_FILE: &str = "model.bin";

fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn parse_f64(v: &str) -> Result<f64> {
    if v == "-inf" {
        return Ok(f64::NEG_INFINITY);
    }
    v.parse()
        .map_err(|_| Error::Parse(format!("bad float `{v}` in pipeline params")))
}

/// Serializes scaler, gate, thresholds and windowing as `key=value` lines.
pub fn save_pipeline_params(pipeline: &FittedPipeline, dir: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "window_s={}", pipeline.windowing.window_s);
    let _ = writeln!(out, "hop_s={}", pipeline.windowing.hop_s);
    let _ = writeln!(out, "variance_threshold={}", fmt_f64(pipeline.gate.variance_threshold));
    let _ = writeln!(
        out,
        "thresholds={},{},{}",
        fmt_f64(pipeline.thresholds[0]),
        fmt_f64(pipeline.thresholds[1]),
        fmt_f64(pipeline.thresholds[2])
    );
    let _ = writeln!(out, "pull_across_noise={}", pipeline.decision.pull_across_noise);
    let means: Vec<String> = pipeline.scaler.means().iter().map(|v| v.to_string()).collect();
    let stds: Vec<String> = pipeline.scaler.stds().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "means={}", means.join(","));
    let _ = writeln!(out, "stds={}", stds.join(","));
    std::fs::write(dir.join(PIPELINE_FILE), out)?;
    Ok(())
}

/// Loads a trained stack from a directory holding `model.bin` and
/// `pipeline.params`.
pub fn load_pipeline(dir: &Path) -> Result<FittedPipeline> {
    let model = load_model(&dir.join(MODEL_FILE))?;
    let text = std::fs::read_to_string(dir.join(PIPELINE_FILE))?;
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |key: &str| -> Result<&String> {
        kv.get(key)
            .ok_or_else(|| Error::Parse(format!("pipeline params missing `{key}`")))
    };
    let windowing = WindowingConfig::new(parse_f64(get("window_s")?)?, parse_f64(get("hop_s")?)?)?;
    let gate = GateConfig::new(parse_f64(get("variance_threshold")?)?)?;
    let thr: Vec<f64> = get("thresholds")?
        .split(',')
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if thr.len() != 3 {
        return Err(Error::Parse("pipeline params: thresholds must have 3 values".into()));
    }
    let parse_list = |key: &str| -> Result<Vec<f64>> {
        get(key)?.split(',').map(parse_f64).collect()
    };
    let scaler = Scaler::from_parts(parse_list("means")?, parse_list("stds")?)?;
    if scaler.len() != model.dims().tau {
        return Err(Error::Shape {
            expected: format!("scaler over {} features", model.dims().tau),
            got: format!("{}", scaler.len()),
        });
    }
    let decision = DecisionConfig {
        pull_across_noise: get("pull_across_noise")?.parse().map_err(|_| {
            Error::Parse("pipeline params: bad pull_across_noise".into())
        })?,
    };
    Ok(FittedPipeline {
        model,
        scaler,
        gate,
        thresholds: [thr[0], thr[1], thr[2]],
        windowing,
        decision,
    })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_resolved_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::write(out.join("config.resolved"), cfg.to_kv_lines())?;
    Ok(())
}

/// `synth`: writes one labeled session log for the configured scenario.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    ensure_out_dir(out)?;
    write_resolved_config(cfg, out)?;
    let templates = GestureTemplate::defaults();
    let session = generate_dataset_with(
        &cfg.channel_params(),
        &cfg.sampling_profile(),
        &templates,
        cfg.per_class,
        cfg.gap_s,
        &cfg.gesture_variability(),
        cfg.seed,
    )?;
    let mut log = session.to_session_log();
    log.metadata.insert(
        "traffic".into(),
        match cfg.traffic {
            crate::signal::SamplingMode::BeaconOnly => "beacon".into(),
            crate::signal::SamplingMode::Induced => "induced".into(),
        },
    );
    log.metadata
        .insert("session_id".into(), format!("synth-{}", cfg.seed));
    let name = match cfg.traffic {
        crate::signal::SamplingMode::BeaconOnly => "session_beacon.log",
        crate::signal::SamplingMode::Induced => "session_induced.log",
    };
    let path = out.join(name);
    std::fs::write(&path, serialize_rssi_log(&log))?;
    let duration_s = log.samples.last().map(|s| s.time_s()).unwrap_or(0.0);
    eprintln!(
        "wrote {}: {} samples, {} annotations, {:.2} samples/s",
        path.display(),
        log.samples.len(),
        session.annotations.len(),
        log.samples.len() as f64 / duration_s.max(1e-9)
    );
    Ok(path)
}

/// `train`: fits the full stack on a train split of the input sessions and
/// writes `model.bin`, `pipeline.params` and `loss.csv`.
pub fn cmd_train(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("train needs at least one session log".into()));
    }
    ensure_out_dir(out)?;
    write_resolved_config(cfg, out)?;
    let sessions = load_sessions(inputs)?;
    let windows = sessions_to_windows(&sessions, cfg.window_s)?;
    let (train_windows, test_windows) = split_train_test(&windows, cfg.train_ratio, cfg.seed)?;
    let train_cfg = cfg.train_config(inputs.len());
    eprintln!(
        "training on {} windows ({} held out), {} iterations",
        train_windows.len(),
        test_windows.len(),
        train_cfg.iterations
    );
    let started = Instant::now();
    let (pipeline, result) = fit_pipeline(cfg, &train_windows, &train_cfg)?;
    let train_seconds = started.elapsed().as_secs_f64();

    save_model(&pipeline.model, &out.join(MODEL_FILE))?;
    save_pipeline_params(&pipeline, out)?;
    let mut loss_csv = String::from("iteration,loss\n");
    for (k, loss) in result.loss_history.iter().enumerate() {
        let _ = writeln!(loss_csv, "{k},{loss:.6}");
    }
    std::fs::write(out.join("loss.csv"), loss_csv)?;

    // Held-out accuracy, reported but not persisted as a primary output.
    let (_, test_features, test_labels) =
        build_feature_set(&train_windows, &test_windows, cfg)?;
    let test_set = features_to_training_set(&test_features, &test_labels)?;
    let accuracy = crate::lstm::evaluate_accuracy(&pipeline.model, &test_set)?;
    eprintln!(
        "trained in {train_seconds:.2} s; held-out accuracy {accuracy:.2}% over {} windows",
        test_labels.len()
    );
    Ok(())
}

/// One split of the repeated evaluation protocol.
struct SplitOutcome {
    accuracy: f64,
    train_seconds: f64,
    predict_ms_per_sample: f64,
    baseline_accuracy: Option<f64>,
    baseline_ms_per_sample: Option<f64>,
}

fn eval_one_split(
    cfg: &RunConfig,
    windows: &[LabeledWindow],
    split_seed: u64,
    train_cfg: &TrainConfig,
    confusion: &mut ConfusionMatrix,
) -> Result<SplitOutcome> {
    let (train_windows, test_windows) = split_train_test(windows, cfg.train_ratio, split_seed)?;
    let (_, train_features, train_labels) =
        build_feature_set(&train_windows, &train_windows, cfg)?;
    let (_, test_features, test_labels) = build_feature_set(&train_windows, &test_windows, cfg)?;
    let train_set = features_to_training_set(&train_features, &train_labels)?;

    let mut split_train_cfg = train_cfg.clone();
    split_train_cfg.seed = split_seed;
    let started = Instant::now();
    let result = train(&train_set, &split_train_cfg)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut correct = 0usize;
    for (fv, &label) in test_features.iter().zip(&test_labels) {
        let predicted = result.model.predict_class(fv)?;
        if predicted == label {
            correct += 1;
        }
        confusion.record(
            GestureLabel::from_class_index(label).unwrap(),
            GestureLabel::from_class_index(predicted).unwrap(),
        );
    }
    let predict_ms_per_sample =
        started.elapsed().as_secs_f64() * 1000.0 / test_labels.len().max(1) as f64;
    let accuracy = 100.0 * correct as f64 / test_labels.len().max(1) as f64;

    let (baseline_accuracy, baseline_ms_per_sample) = if cfg.baseline_knn {
        let dtw_cfg = cfg.dtw_config();
        let train_rows: Vec<Vec<f64>> =
            train_features.iter().map(|f| f.values().to_vec()).collect();
        let train_glabels: Vec<GestureLabel> = train_labels
            .iter()
            .map(|&k| GestureLabel::from_class_index(k).unwrap())
            .collect();
        let started = Instant::now();
        let mut knn_correct = 0usize;
        for (fv, &label) in test_features.iter().zip(&test_labels) {
            let predicted = knn_predict(&train_rows, &train_glabels, fv.values(), &dtw_cfg)?;
            if predicted.class_index() == Some(label) {
                knn_correct += 1;
            }
        }
        let ms = started.elapsed().as_secs_f64() * 1000.0 / test_labels.len().max(1) as f64;
        (
            Some(100.0 * knn_correct as f64 / test_labels.len().max(1) as f64),
            Some(ms),
        )
    } else {
        (None, None)
    };

    Ok(SplitOutcome {
        accuracy,
        train_seconds,
        predict_ms_per_sample,
        baseline_accuracy,
        baseline_ms_per_sample,
    })
}

/// `eval`: repeated random-split evaluation; writes `eval.csv`,
/// `confusion.csv`, `summary.txt` and optionally `baseline.csv`.
pub fn cmd_eval(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<EvalReport> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("eval needs at least one session log".into()));
    }
    ensure_out_dir(out)?;
    write_resolved_config(cfg, out)?;
    let sessions = load_sessions(inputs)?;
    let windows = sessions_to_windows(&sessions, cfg.window_s)?;
    let train_cfg = cfg.train_config(inputs.len());

    let mut confusion = ConfusionMatrix::new();
    let mut accuracies = Vec::with_capacity(cfg.splits);
    let mut train_times = Vec::with_capacity(cfg.splits);
    let mut predict_times = Vec::with_capacity(cfg.splits);
    let mut baseline_accuracies = Vec::new();
    let mut baseline_times = Vec::new();
    for rep in 0..cfg.splits {
        let outcome = eval_one_split(
            cfg,
            &windows,
            cfg.seed + rep as u64,
            &train_cfg,
            &mut confusion,
        )?;
        eprintln!(
            "split {rep}: accuracy {:.2}% (train {:.2} s)",
            outcome.accuracy, outcome.train_seconds
        );
        accuracies.push(outcome.accuracy);
        train_times.push(outcome.train_seconds);
        predict_times.push(outcome.predict_ms_per_sample);
        if let (Some(acc), Some(ms)) = (outcome.baseline_accuracy, outcome.baseline_ms_per_sample)
        {
            baseline_accuracies.push(acc);
            baseline_times.push(ms);
        }
    }

    let report = EvalReport::from_splits(
        accuracies,
        confusion,
        mean_std(&train_times).0,
        mean_std(&predict_times).0,
    );
    std::fs::write(out.join("eval.csv"), report.accuracies_csv())?;
    std::fs::write(out.join("confusion.csv"), report.confusion.to_csv())?;
    let mut summary = report.summary_text("LSTM");
    if !baseline_accuracies.is_empty() {
        let (mean, std) = mean_std(&baseline_accuracies);
        let (ms, _) = mean_std(&baseline_times);
        let _ = writeln!(summary, "k-NN DTW accuracy: {mean:.2}% (+/-{std:.2})");
        let _ = writeln!(summary, "k-NN DTW prediction latency per sample: {ms:.3} ms");
        let mut csv = String::from("split,accuracy_percent\n");
        for (k, acc) in baseline_accuracies.iter().enumerate() {
            let _ = writeln!(csv, "{k},{acc:.4}");
        }
        let _ = writeln!(csv, "mean,{mean:.4}");
        let _ = writeln!(csv, "std,{std:.4}");
        std::fs::write(out.join("baseline.csv"), csv)?;
    }
    std::fs::write(out.join("summary.txt"), &summary)?;
    eprint!("{summary}");
    Ok(report)
}

/// One point of the gridsearch cross product.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub window_s: f64,
    pub tau: usize,
    pub hidden: usize,
    pub layers: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
}

/// Parses a sweep spec like `tau=13,25,50;layers=1,2`. Unlisted keys stay at
/// the run configuration's values.
pub fn parse_grid(spec: &str, cfg: &RunConfig) -> Result<Vec<GridPoint>> {
    let base_iterations = match cfg.iterations {
        IterationSetting::Fixed(n) => n,
        IterationSetting::Auto => 600,
    };
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for group in spec.split(';') {
        let group = group.trim();
        if group.is_empty() {
            continue;
        }
        let (key, values) = group.split_once('=').ok_or_else(|| {
            Error::InvalidParam(format!("grid group `{group}` is not key=v1,v2,..."))
        })?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::InvalidParam(format!("grid key `{key}` has no values")));
        }
        axes.push((key.trim().to_string(), values));
    }
    if axes.is_empty() {
        return Err(Error::InvalidParam("empty parameter grid".into()));
    }

    let mut points = vec![GridPoint {
        window_s: cfg.window_s,
        tau: cfg.tau,
        hidden: cfg.hidden,
        layers: cfg.layers,
        iterations: base_iterations,
        learning_rate: cfg.learning_rate,
        dropout: cfg.dropout,
        batch_size: cfg.batch_size,
    }];
    for (key, values) in &axes {
        let mut expanded = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for value in values {
                let mut next = point.clone();
                match key.as_str() {
                    "window_s" => next.window_s = parse_grid_num(key, value)?,
                    "tau" => next.tau = parse_grid_num(key, value)?,
                    "hidden" => next.hidden = parse_grid_num(key, value)?,
                    "layers" => next.layers = parse_grid_num(key, value)?,
                    "iterations" => next.iterations = parse_grid_num(key, value)?,
                    "learning_rate" => next.learning_rate = parse_grid_num(key, value)?,
                    "dropout" => next.dropout = parse_grid_num(key, value)?,
                    "batch_size" => next.batch_size = parse_grid_num(key, value)?,
                    other => {
                        return Err(Error::InvalidParam(format!(
                            "grid key `{other}` is not sweepable"
                        )))
                    }
                }
                expanded.push(next);
            }
        }
        points = expanded;
    }
    Ok(points)
}

fn parse_grid_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParam(format!("grid key `{key}`: cannot parse `{value}`")))
}

/// `gridsearch`: 4-fold cross-validated sweep over the requested axes;
/// writes one CSV row per configuration.
pub fn cmd_gridsearch(
    cfg: &RunConfig,
    inputs: &[PathBuf],
    grid_spec: &str,
    out: &Path,
) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("gridsearch needs at least one session log".into()));
    }
    let points = parse_grid(grid_spec, cfg)?;
    ensure_out_dir(out)?;
    write_resolved_config(cfg, out)?;
    let sessions = load_sessions(inputs)?;

    let mut csv = String::from(
        "window_s,tau,hidden,layers,iterations,learning_rate,dropout,batch_size,param_count,mean_accuracy,std_accuracy\n",
    );
    let mut best: Option<(f64, usize, usize)> = None; // (mean, param_count, row)
    for (row, point) in points.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        point_cfg.window_s = point.window_s;
        point_cfg.tau = point.tau;
        let windows = sessions_to_windows(&sessions, point.window_s)?;
        let (_, features, labels) = build_feature_set(&windows, &windows, &point_cfg)?;
        let data = features_to_training_set(&features, &labels)?;
        let candidate = TrainConfig {
            hidden: point.hidden,
            layers: point.layers,
            iterations: point.iterations,
            learning_rate: point.learning_rate,
            dropout: point.dropout,
            batch_size: point.batch_size,
            seed: cfg.seed,
            ..cfg.train_config(inputs.len())
        };
        let report = crate::lstm::grid_search_cv(&data, &[candidate], 4, cfg.seed)?;
        let score = &report.scores[0];
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{:.4},{:.4}",
            point.window_s,
            point.tau,
            point.hidden,
            point.layers,
            point.iterations,
            point.learning_rate,
            point.dropout,
            point.batch_size,
            score.param_count,
            score.mean_accuracy,
            score.std_accuracy
        );
        eprintln!(
            "grid[{row}] window_s={} tau={} hidden={} layers={} -> {:.2}% (+/-{:.2})",
            point.window_s, point.tau, point.hidden, point.layers, score.mean_accuracy,
            score.std_accuracy
        );
        let better = match best {
            None => true,
            Some((mean, params, _)) => {
                score.mean_accuracy > mean
                    || (score.mean_accuracy == mean && score.param_count < params)
            }
        };
        if better {
            best = Some((score.mean_accuracy, score.param_count, row));
        }
    }
    std::fs::write(out.join("gridsearch.csv"), csv)?;
    if let Some((mean, _, row)) = best {
        eprintln!("best configuration: row {row} at {mean:.2}% mean CV accuracy");
    }
    Ok(())
}

/// `fp-soak`: runs a trained stack over a gesture-free synthetic stream and
/// reports the per-label decision distribution.
pub fn cmd_fp_soak(cfg: &RunConfig, model_dir: &Path, out: &Path) -> Result<f64> {
    ensure_out_dir(out)?;
    write_resolved_config(cfg, out)?;
    let pipeline = load_pipeline(model_dir)?;
    let events = if cfg.bg_events {
        Some(BackgroundEvents {
            mean_interval_s: cfg.bg_interval_s,
            ..BackgroundEvents::default()
        })
    } else {
        None
    };
    let stream = generate_noise_stream(
        &cfg.channel_params(),
        &cfg.sampling_profile(),
        cfg.soak_minutes * 60.0,
        events.as_ref(),
        cfg.seed,
    )?;
    let mut recognizer = Recognizer::new(
        &pipeline.model,
        &pipeline.scaler,
        pipeline.gate,
        pipeline.windowing,
        pipeline.thresholds,
        pipeline.decision,
    )?;
    let decisions = recognizer.run(&stream.samples)?;
    std::fs::write(out.join("decisions.csv"), predictions_csv(&decisions))?;

    let mut counts: BTreeMap<GestureLabel, usize> = BTreeMap::new();
    for label in GestureLabel::ALL {
        counts.insert(label, 0);
    }
    for (_, label) in &decisions {
        *counts.get_mut(label).unwrap() += 1;
    }
    let total = decisions.len().max(1);
    let mut csv = String::from("label,count,percent\n");
    for label in GestureLabel::ALL {
        let count = counts[&label];
        let _ = writeln!(csv, "{label},{count},{:.4}", 100.0 * count as f64 / total as f64);
    }
    std::fs::write(out.join("fp_report.csv"), &csv)?;
    let noise_pct = 100.0 * counts[&GestureLabel::Noise] as f64 / total as f64;
    let summary = format!(
        "false-positive soak over {:.1} simulated minutes\nwindows: {}\ncorrect Noise: {} ({:.2}%)\n",
        cfg.soak_minutes,
        decisions.len(),
        counts[&GestureLabel::Noise],
        noise_pct
    );
    std::fs::write(out.join("summary.txt"), &summary)?;
    eprint!("{summary}");
    Ok(noise_pct)
}

/// Where `run` reads its samples from.
pub enum SourceSpec {
    Replay(PathBuf),
    Live,
}

impl SourceSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(path) = spec.strip_prefix("replay:") {
            return Ok(SourceSpec::Replay(PathBuf::from(path)));
        }
        if spec == "live" {
            return Ok(SourceSpec::Live);
        }
        Err(Error::InvalidParam(format!(
            "source must be `replay:<file>` or `live`, got `{spec}`"
        )))
    }
}

/// `run`: streams `time_s,label` decisions to the writer until the source
/// ends or the stop flag rises; always flushes what it has.
pub fn cmd_run(
    cfg: &RunConfig,
    model_dir: &Path,
    source: SourceSpec,
    output: &mut dyn std::io::Write,
    stop: &AtomicBool,
) -> Result<()> {
    let pipeline = load_pipeline(model_dir)?;
    let recognizer = Recognizer::new(
        &pipeline.model,
        &pipeline.scaler,
        pipeline.gate,
        pipeline.windowing,
        pipeline.thresholds,
        pipeline.decision,
    )?;
    let mut stream = StreamRecognizer::new(recognizer);

    let mut source: Box<dyn RssiSource> = match source {
        SourceSpec::Replay(path) => {
            let text = std::fs::read_to_string(&path)?;
            let parsed = parse_rssi_log(&text)?;
            if parsed.skipped_lines > 0 {
                eprintln!("{}: skipped {} malformed line(s)", path.display(), parsed.skipped_lines);
            }
            Box::new(ReplaySource::from_session(&parsed.session))
        }
        SourceSpec::Live => Box::new(PolledSource::start(PollerConfig {
            path: PathBuf::from(&cfg.poll_path),
            rate_hz: cfg.poll_rate_hz,
            interface: cfg.interface.clone(),
            capacity: 1024,
        })?),
    };

    writeln!(output, "time_s,label")?;
    while !stop.load(Ordering::Relaxed) {
        let Some(sample) = source.next_sample() else {
            break;
        };
        for (time_s, label) in stream.push(sample)? {
            writeln!(output, "{time_s:.3},{label}")?;
        }
    }
    output.flush()?;
    Ok(())
}

/// `induce`: paced echo-request traffic until the stop flag or the
/// configured duration; prints `key=value` statistics on termination.
pub fn cmd_induce(cfg: &RunConfig, stop: &AtomicBool) -> Result<()> {
    let stats = induce(&cfg.inducer_config(), stop)?;
    print!("{}", stats.to_kv_lines());
    Ok(())
}
