//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! Criteria 1 and 2 depend on the externally recorded gesture dataset; when
//! no dataset directory is available they print SKIP and assert nothing
//! beyond the machinery itself. Everything else runs unconditionally on
//! synthetic data with fixed seeds.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use handwave::cli::{build_feature_set, fit_pipeline, labeled_to_window, FittedPipeline};
use handwave::config::{GateSetting, RunConfig, ThresholdSetting};
use handwave::dtw::{dtw_distance, knn_predict, DtwConfig};
use handwave::ingest::{
    extract_gesture_windows, parse_proc_wireless, parse_rssi_log, serialize_rssi_log,
    split_train_test, SessionLog,
};
use handwave::lstm::{
    backward, loss_nll, train, LstmModel, ModelDims, TensorSet, TrainingSet,
};
use handwave::pipeline::{
    decide, resample_centered, threshold_logits, thresholds_disabled, variance_gate,
    DecisionState, GateConfig, GateDecision, Recognizer, Scaler, Window,
};
use handwave::report::mean_std;
use handwave::signal::{
    generate_dataset_with, generate_noise_stream, BackgroundEvents, GestureTemplate,
};
use handwave::types::{GestureLabel, RssiSample};

fn report(criterion: u32, name: &str, pass: bool, details: &str) -> bool {
    println!(
        "criterion {criterion} ({name}): {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn report_skip(criterion: u32, name: &str, details: &str) {
    println!("criterion {criterion} ({name}): SKIP — {details}");
}

// ---------------------------------------------------------------------------
// Shared synthetic fixture (criteria 3 and 8)
// ---------------------------------------------------------------------------

struct ProfileOutcome {
    /// End-to-end per-window accuracy: auto variance gate, preprocessing,
    /// model, thresholds at their disabled default.
    end_to_end_accuracy: f64,
    /// Per-class accuracies in class order (Swipe, Push, Pull).
    per_class: [f64; 3],
    /// Per-class accuracy of the classifier alone (gate bypassed).
    classifier_per_class: [f64; 3],
    /// Test windows rejected by the auto gate, per class.
    gated: [usize; 3],
    /// Fully calibrated stack (gate and logit thresholds) for the soak.
    pipeline: FittedPipeline,
    cfg: RunConfig,
}

fn acceptance_cfg(traffic: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    // Dataset per the criterion: default templates, 300 per class, 10 s gap.
    // Model sizing is free; this configuration trains in seconds and holds
    // the accuracy bar with margin.
    cfg.set("traffic", traffic).unwrap();
    cfg.set("hidden", "64").unwrap();
    cfg.set("iterations", "600").unwrap();
    cfg.set("dropout", "0.1").unwrap();
    cfg.set("seed", "11").unwrap();
    cfg.variance_threshold = GateSetting::Calibrate;
    cfg.logit_thresholds = ThresholdSetting::Calibrate;
    cfg
}

fn build_profile(traffic: &str) -> ProfileOutcome {
    let cfg = acceptance_cfg(traffic);
    let session = generate_dataset_with(
        &cfg.channel_params(),
        &cfg.sampling_profile(),
        &GestureTemplate::defaults(),
        cfg.per_class,
        cfg.gap_s,
        &cfg.gesture_variability(),
        cfg.seed,
    )
    .unwrap();
    let windows = extract_gesture_windows(&session.to_session_log(), cfg.window_s)
        .unwrap()
        .windows;
    assert_eq!(windows.len(), 3 * cfg.per_class);
    let (train_w, test_w) = split_train_test(&windows, cfg.train_ratio, cfg.seed).unwrap();
    let (pipeline, _) = fit_pipeline(&cfg, &train_w, &cfg.train_config(1)).unwrap();

    // Spec-default gate (minimum training-window variance), thresholds off.
    let window_ms = cfg.windowing().unwrap().window_ms();
    let auto_windows: Vec<Window> = train_w
        .iter()
        .map(|lw| labeled_to_window(lw, window_ms))
        .collect();
    let gate_auto = GateConfig::from_training_windows(auto_windows.iter()).unwrap();

    let (_, test_feats, test_labels) = build_feature_set(&train_w, &test_w, &cfg).unwrap();
    let mut correct = 0usize;
    let mut class_total = [0usize; 3];
    let mut class_correct = [0usize; 3];
    let mut cls_correct = [0usize; 3];
    let mut gated = [0usize; 3];
    for ((lw, fv), &label) in test_w.iter().zip(&test_feats).zip(&test_labels) {
        let window = labeled_to_window(lw, window_ms);
        let classifier_says =
            threshold_logits(pipeline.model.forward(fv).unwrap(), thresholds_disabled());
        if classifier_says.class_index() == Some(label) {
            cls_correct[label] += 1;
        }
        let predicted = if variance_gate(&window, &gate_auto) == GateDecision::Noise {
            gated[label] += 1;
            GestureLabel::Noise
        } else {
            classifier_says
        };
        class_total[label] += 1;
        if predicted.class_index() == Some(label) {
            correct += 1;
            class_correct[label] += 1;
        }
    }
    let mut per_class = [0.0; 3];
    let mut classifier_per_class = [0.0; 3];
    for k in 0..3 {
        per_class[k] = 100.0 * class_correct[k] as f64 / class_total[k].max(1) as f64;
        classifier_per_class[k] = 100.0 * cls_correct[k] as f64 / class_total[k].max(1) as f64;
    }
    ProfileOutcome {
        end_to_end_accuracy: 100.0 * correct as f64 / test_labels.len() as f64,
        per_class,
        classifier_per_class,
        gated,
        pipeline,
        cfg,
    }
}

fn induced_profile() -> &'static ProfileOutcome {
    static CELL: OnceLock<ProfileOutcome> = OnceLock::new();
    CELL.get_or_init(|| build_profile("induced"))
}

fn beacon_profile() -> &'static ProfileOutcome {
    static CELL: OnceLock<ProfileOutcome> = OnceLock::new();
    CELL.get_or_init(|| build_profile("beacon"))
}

// ---------------------------------------------------------------------------
// Criterion 1 — real-data reproduction (conditional on the dataset)
// ---------------------------------------------------------------------------

fn dataset_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("HANDWAVE_DATASET_DIR") {
        let path = PathBuf::from(dir);
        if path.is_dir() {
            return Some(path);
        }
    }
    let fallback = PathBuf::from("data/real");
    fallback.is_dir().then_some(fallback)
}

fn session_logs_in(dir: &PathBuf) -> Vec<PathBuf> {
    let mut logs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|ext| ext == "log"))
                .collect()
        })
        .unwrap_or_default();
    logs.sort();
    logs
}

/// Repeated-split evaluation at the reference training configuration.
fn real_data_eval(logs: &[PathBuf], splits: usize) -> (f64, f64, f64) {
    let cfg = RunConfig::default();
    let sessions: Vec<SessionLog> = logs
        .iter()
        .map(|p| {
            parse_rssi_log(&std::fs::read_to_string(p).unwrap())
                .unwrap()
                .session
        })
        .collect();
    let windows: Vec<_> = sessions
        .iter()
        .flat_map(|s| extract_gesture_windows(s, cfg.window_s).unwrap().windows)
        .collect();
    let train_cfg = cfg.train_config(logs.len());
    let started = Instant::now();
    let mut accuracies = Vec::with_capacity(splits);
    for rep in 0..splits {
        let (train_w, test_w) = split_train_test(&windows, cfg.train_ratio, rep as u64).unwrap();
        let (_, train_feats, train_labels) = build_feature_set(&train_w, &train_w, &cfg).unwrap();
        let (_, test_feats, test_labels) = build_feature_set(&train_w, &test_w, &cfg).unwrap();
        let data = to_training_set(&train_feats, &train_labels);
        let mut rep_cfg = train_cfg.clone();
        rep_cfg.seed = rep as u64;
        let result = train(&data, &rep_cfg).unwrap();
        let test_data = to_training_set(&test_feats, &test_labels);
        accuracies.push(handwave::lstm::evaluate_accuracy(&result.model, &test_data).unwrap());
    }
    let (mean, std) = mean_std(&accuracies);
    (mean, std, started.elapsed().as_secs_f64())
}

fn to_training_set(
    feats: &[handwave::pipeline::FeatureVector],
    labels: &[usize],
) -> TrainingSet {
    let rows: Vec<Vec<f64>> = feats.iter().map(|f| f.values().to_vec()).collect();
    let glabels: Vec<GestureLabel> = labels
        .iter()
        .map(|&k| GestureLabel::from_class_index(k).unwrap())
        .collect();
    TrainingSet::from_rows(&rows, &glabels).unwrap()
}

#[test]
fn criterion_1_real_data_reproduction() {
    let Some(dir) = dataset_dir() else {
        report_skip(
            1,
            "real-data reproduction",
            "released dataset not retrievable in this environment; set \
             HANDWAVE_DATASET_DIR to a directory with dataset1/ (and optionally \
             combined/) session logs to enable",
        );
        return;
    };
    let dataset1 = session_logs_in(&dir.join("dataset1"));
    assert!(!dataset1.is_empty(), "criterion 1: no dataset1/*.log under {dir:?}");
    let started = Instant::now();
    let (mean, std, _) = real_data_eval(&dataset1, 10);
    let mut pass = mean >= 85.0;
    let mut details = format!("Dataset1 mean {mean:.2}% (+/-{std:.2}) vs >= 85%");

    let combined = session_logs_in(&dir.join("combined"));
    if !combined.is_empty() {
        let (mean_c, std_c, _) = real_data_eval(&combined, 10);
        pass &= mean_c >= 88.0;
        details.push_str(&format!("; combined mean {mean_c:.2}% (+/-{std_c:.2}) vs >= 88%"));
    }
    let elapsed_min = started.elapsed().as_secs_f64() / 60.0;
    pass &= elapsed_min <= 30.0;
    details.push_str(&format!("; wall clock {elapsed_min:.1} min vs <= 30 min"));
    assert!(report(1, "real-data reproduction", pass, &details));
}

// ---------------------------------------------------------------------------
// Criterion 2 — k-NN DTW vs LSTM (accuracy conditional; latency measured)
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_baseline_comparison() {
    // Latency is measured on Dataset1-scale synthetic features regardless of
    // dataset availability: 330 training series, tau = 50, reference model
    // size 200 units x 2 layers.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tau = 50usize;
    let train_rows: Vec<Vec<f64>> = (0..330)
        .map(|_| (0..tau).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let train_labels: Vec<GestureLabel> = (0..330)
        .map(|k| GestureLabel::from_class_index(k % 3).unwrap())
        .collect();
    let queries: Vec<Vec<f64>> = (0..110)
        .map(|_| (0..tau).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();

    let model = LstmModel::init(
        ModelDims { tau, hidden: 200, layers: 2, classes: 3 },
        0.08,
        true,
        &mut rng,
    )
    .unwrap();
    let started = Instant::now();
    for q in &queries {
        let fv = handwave::pipeline::FeatureVector::new(q.clone(), tau).unwrap();
        model.forward(&fv).unwrap();
    }
    let lstm_ms = started.elapsed().as_secs_f64() * 1000.0 / queries.len() as f64;

    let dtw_cfg = DtwConfig::default();
    let started = Instant::now();
    for q in &queries {
        knn_predict(&train_rows, &train_labels, q, &dtw_cfg).unwrap();
    }
    let dtw_ms = started.elapsed().as_secs_f64() * 1000.0 / queries.len() as f64;
    let ratio = dtw_ms / lstm_ms;
    let latency_details = format!(
        "per-sample latency: LSTM {lstm_ms:.3} ms vs k-NN DTW {dtw_ms:.3} ms (ratio {ratio:.1}x; \
         paper stack: 7.04 ms vs 964.15 ms)"
    );

    let Some(dir) = dataset_dir() else {
        report_skip(
            2,
            "k-NN DTW vs LSTM",
            &format!(
                "accuracy clause needs the released dataset; {latency_details}. Both \
                 classifiers are native here, so the paper's 10x latency gap reflects its \
                 implementation stack, not the algorithms"
            ),
        );
        return;
    };
    // With real data present: one split comparison at the reference settings.
    let dataset1 = session_logs_in(&dir.join("dataset1"));
    assert!(!dataset1.is_empty(), "criterion 2: no dataset1/*.log under {dir:?}");
    let cfg = RunConfig::default();
    let sessions: Vec<SessionLog> = dataset1
        .iter()
        .map(|p| parse_rssi_log(&std::fs::read_to_string(p).unwrap()).unwrap().session)
        .collect();
    let windows: Vec<_> = sessions
        .iter()
        .flat_map(|s| extract_gesture_windows(s, cfg.window_s).unwrap().windows)
        .collect();
    let (train_w, test_w) = split_train_test(&windows, cfg.train_ratio, 0).unwrap();
    let (_, train_feats, train_labels_r) = build_feature_set(&train_w, &train_w, &cfg).unwrap();
    let (_, test_feats, test_labels) = build_feature_set(&train_w, &test_w, &cfg).unwrap();
    let data = to_training_set(&train_feats, &train_labels_r);
    let result = train(&data, &cfg.train_config(1)).unwrap();
    let test_data = to_training_set(&test_feats, &test_labels);
    let lstm_acc = handwave::lstm::evaluate_accuracy(&result.model, &test_data).unwrap();
    let rows: Vec<Vec<f64>> = train_feats.iter().map(|f| f.values().to_vec()).collect();
    let glabels: Vec<GestureLabel> = train_labels_r
        .iter()
        .map(|&k| GestureLabel::from_class_index(k).unwrap())
        .collect();
    let mut knn_correct = 0usize;
    for (fv, &label) in test_feats.iter().zip(&test_labels) {
        if knn_predict(&rows, &glabels, fv.values(), &dtw_cfg).unwrap().class_index()
            == Some(label)
        {
            knn_correct += 1;
        }
    }
    let knn_acc = 100.0 * knn_correct as f64 / test_labels.len() as f64;
    let pass = (lstm_acc - knn_acc).abs() <= 5.0 && ratio >= 10.0;
    assert!(report(
        2,
        "k-NN DTW vs LSTM",
        pass,
        &format!("LSTM {lstm_acc:.2}% vs k-NN DTW {knn_acc:.2}% (within 5 points); {latency_details}"),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 3 — synthetic fallback (unconditional)
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_synthetic_fallback() {
    let induced = induced_profile();
    let beacon = beacon_profile();
    let swipe = GestureLabel::Swipe.class_index().unwrap();
    println!(
        "  [diag] induced: classifier per class {:?}, gated {:?}",
        induced.classifier_per_class, induced.gated
    );
    println!(
        "  [diag] beacon:  classifier per class {:?}, gated {:?}",
        beacon.classifier_per_class, beacon.gated
    );
    let pass = induced.end_to_end_accuracy >= 90.0
        && beacon.per_class[swipe] < induced.per_class[swipe];
    assert!(report(
        3,
        "synthetic fallback",
        pass,
        &format!(
            "induced end-to-end {:.2}% (>= 90%); Swipe accuracy induced {:.2}% vs beacon {:.2}% \
             (strictly lower under beacon-only sampling)",
            induced.end_to_end_accuracy,
            induced.per_class[swipe],
            beacon.per_class[swipe]
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 4 — gradient correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_gradient_correctness() {
    let started = Instant::now();
    let dims = ModelDims { tau: 5, hidden: 4, layers: 2, classes: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let model = LstmModel::init(dims, 0.4, true, &mut rng).unwrap();
    let batch = 6usize;
    let inputs = ndarray::Array2::from_shape_fn((batch, dims.tau), |_| {
        rng.random_range(-1.5..1.5)
    });
    let labels: Vec<usize> = (0..batch).map(|k| k % 3).collect();

    let (_, cache) = model.forward_batch(inputs.view(), None).unwrap();
    let analytic = backward(&model, &cache, &labels).unwrap();

    // Central finite differences over every parameter.
    let h = 1e-5;
    let mut probe = model.clone();
    let mut fd = TensorSet::zeros(&dims);
    let n_tensors = fd.tensor_slices().len();
    let mut worst: f64 = 0.0;
    for tensor_idx in 0..n_tensors {
        let len = fd.tensor_slices()[tensor_idx].len();
        for k in 0..len {
            let original = probe.params().tensor_slices()[tensor_idx][k];
            probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original + h;
            let (logits, _) = probe.forward_batch(inputs.view(), None).unwrap();
            let up = loss_nll(&logits.view(), &labels).unwrap();
            probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original - h;
            let (logits, _) = probe.forward_batch(inputs.view(), None).unwrap();
            let down = loss_nll(&logits.view(), &labels).unwrap();
            probe.params_mut().tensor_slices_mut()[tensor_idx][k] = original;
            fd.tensor_slices_mut()[tensor_idx][k] = (up - down) / (2.0 * h);
        }
    }
    for (a, b) in analytic.tensor_slices().iter().zip(fd.tensor_slices().iter()) {
        let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let norm_a: f64 = a.iter().map(|x| x * x).sum();
        let norm_b: f64 = b.iter().map(|x| x * x).sum();
        let rel = diff.sqrt() / norm_a.sqrt().max(norm_b.sqrt()).max(1e-12);
        worst = worst.max(rel);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && elapsed < 10.0;
    assert!(report(
        4,
        "gradient correctness",
        pass,
        &format!(
            "worst per-tensor relative error {worst:.2e} (< 1e-4) over {} tensors in {elapsed:.2} s (< 10 s)",
            n_tensors
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 5 — DTW oracle equivalence
// ---------------------------------------------------------------------------

/// Exhaustive warping-path enumeration (DFS over all monotone paths with a
/// running-sum cutoff; costs are nonnegative so the cutoff never skips the
/// optimum).
fn dtw_brute_force(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if acc >= *best {
            return;
        }
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = acc;
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

#[test]
fn criterion_5_dtw_oracle_equivalence() {
    let started = Instant::now();
    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut frontier: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..6 {
        let mut next = Vec::with_capacity(frontier.len() * 3);
        for s in &frontier {
            for v in 0..3 {
                let mut t = s.clone();
                t.push(v as f64);
                next.push(t);
            }
        }
        series.extend(next.iter().cloned());
        frontier = next;
    }
    assert_eq!(series.len(), 3 + 9 + 27 + 81 + 243 + 729);

    let cfg = DtwConfig::default();
    let mut pairs = 0u64;
    for ai in 0..series.len() {
        for bi in ai..series.len() {
            let a = &series[ai];
            let b = &series[bi];
            let dp = dtw_distance(a, b, &cfg).unwrap();
            let brute = dtw_brute_force(a, b);
            assert_eq!(dp, brute, "criterion 5: DP != brute force for {a:?} vs {b:?}");
            let swapped = dtw_distance(b, a, &cfg).unwrap();
            assert_eq!(dp, swapped, "criterion 5: asymmetric for {a:?} vs {b:?}");
            pairs += 1;
        }
    }
    assert!(report(
        5,
        "DTW oracle equivalence",
        true,
        &format!(
            "exact equality on {pairs} unordered pairs (all ordered pairs via symmetry check) \
             of series up to length 6 over {{0,1,2}} in {:.2} s",
            started.elapsed().as_secs_f64()
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 6 — decision FSM table
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_decision_fsm() {
    use GestureLabel::*;
    // The rule table: predecessor consistency with the three exemptions
    // (Swipe/Push after Noise, Pull after Push, Noise always).
    let expected = [
        (Noise, Noise, Noise),
        (Noise, Swipe, Swipe),
        (Noise, Push, Push),
        (Noise, Pull, Noise),
        (Swipe, Noise, Noise),
        (Swipe, Swipe, Swipe),
        (Swipe, Push, Noise),
        (Swipe, Pull, Noise),
        (Push, Noise, Noise),
        (Push, Swipe, Noise),
        (Push, Push, Push),
        (Push, Pull, Pull),
        (Pull, Noise, Noise),
        (Pull, Swipe, Noise),
        (Pull, Push, Noise),
        (Pull, Pull, Pull),
    ];
    assert_eq!(expected.len(), 16);
    for (pred, cand, accepted) in expected {
        assert_eq!(
            decide(pred, cand),
            accepted,
            "criterion 6: predecessor {pred}, candidate {cand}"
        );
        // The stateful form agrees: seed history to the predecessor first.
        let mut state = DecisionState::default();
        if pred != Noise {
            if pred == Pull {
                state.step(Push);
            }
            assert_eq!(state.step(pred), pred);
        }
        assert_eq!(state.step(cand), accepted, "stateful: {pred} then {cand}");
    }
    assert!(report(
        6,
        "decision FSM",
        true,
        "all 16 (predecessor x candidate) cases match the rule table, exemptions included",
    ));
}

// ---------------------------------------------------------------------------
// Criterion 7 — preprocessing invariants
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_preprocessing_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Zero mean after mean subtraction, |mean| < 1e-9 * range.
    for _ in 0..50 {
        let n = rng.random_range(2..2000);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-90.0..-20.0)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let centered_mean = centered.iter().sum::<f64>() / n as f64;
        let range = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            centered_mean.abs() < 1e-9 * range.max(1.0),
            "criterion 7: window mean {centered_mean} after subtraction"
        );
    }

    // Constant-offset invariance of the full resampling path.
    for _ in 0..20 {
        let n = rng.random_range(3..500);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-80.0..-30.0)).collect();
        let offset = rng.random_range(-15.0..15.0);
        let make = |shift: f64| Window {
            start_ms: 0,
            duration_ms: n as i64 * 5,
            samples: values
                .iter()
                .enumerate()
                .map(|(k, &v)| RssiSample::new(k as i64 * 5, v + shift))
                .collect(),
        };
        let base = resample_centered(&make(0.0), 50).unwrap();
        let shifted = resample_centered(&make(offset), 50).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-9, "criterion 7: offset changed features");
        }
    }

    // Train-set self-standardization: per-feature mean 0 +/- 1e-9, std 1 +/- 1e-9.
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..50).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let scaler = Scaler::fit(&rows).unwrap();
    let mut transformed = rows.clone();
    for row in &mut transformed {
        scaler.apply(row).unwrap();
    }
    for j in 0..50 {
        let col: Vec<f64> = transformed.iter().map(|r| r[j]).collect();
        let (mean, std) = mean_std(&col);
        assert!(mean.abs() < 1e-9, "criterion 7: feature {j} mean {mean}");
        assert!((std - 1.0).abs() < 1e-9, "criterion 7: feature {j} std {std}");
    }

    // Output length is exactly tau from 1 to 10^4 samples.
    for n in [1usize, 2, 3, 17, 50, 99, 800, 4321, 10_000] {
        let samples: Vec<RssiSample> = (0..n)
            .map(|k| RssiSample::new(k as i64, -40.0 - (k % 9) as f64))
            .collect();
        let window = Window { start_ms: 0, duration_ms: n as i64, samples };
        for tau in [13usize, 50, 200] {
            assert_eq!(
                resample_centered(&window, tau).unwrap().len(),
                tau,
                "criterion 7: length for n={n}, tau={tau}"
            );
        }
    }

    assert!(report(
        7,
        "preprocessing invariants",
        true,
        "zero-mean, constant-offset invariance, self-standardization and fixed output length hold",
    ));
}

// ---------------------------------------------------------------------------
// Criterion 8 — noise soak
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_noise_soak() {
    let profile = induced_profile();
    let cfg = &profile.cfg;
    let events = BackgroundEvents { mean_interval_s: cfg.bg_interval_s, ..Default::default() };
    let stream = generate_noise_stream(
        &cfg.channel_params(),
        &cfg.sampling_profile(),
        30.0 * 60.0,
        Some(&events),
        cfg.seed + 1,
    )
    .unwrap();
    let pipeline = &profile.pipeline;
    let mut recognizer = Recognizer::new(
        &pipeline.model,
        &pipeline.scaler,
        pipeline.gate,
        pipeline.windowing,
        pipeline.thresholds,
        pipeline.decision,
    )
    .unwrap();
    let decisions = recognizer.run(&stream.samples).unwrap();
    let noise = decisions
        .iter()
        .filter(|(_, l)| *l == GestureLabel::Noise)
        .count();
    let pct = 100.0 * noise as f64 / decisions.len() as f64;
    let pass = pct >= 92.0;
    assert!(report(
        8,
        "noise soak",
        pass,
        &format!(
            "{noise}/{} decisions Noise ({pct:.2}%) over 30 simulated gesture-free minutes \
             with background perturbations (>= 92%; real-world reference 92.1%)",
            decisions.len()
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 9 — parsers
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_parsers() {
    // Wireless pseudo-file fixture.
    let fixture = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/proc_net_wireless.txt"),
    )
    .unwrap();
    let rows = parse_proc_wireless(&fixture).unwrap();
    assert_eq!(rows.len(), 2, "criterion 9: fixture rows");
    assert_eq!(rows[0].interface, "wlan0");
    assert_eq!(rows[0].level_dbm, -61.0);
    assert_eq!(rows[0].link_quality, 54.0);
    assert_eq!(rows[1].interface, "wlp2s0");
    assert_eq!(rows[1].level_dbm, -47.0);

    // RSSI log round trip is bit-exact.
    let mut session = SessionLog::new();
    session.metadata.insert("start_time_ms".into(), "10000".into());
    session.metadata.insert("gap_s".into(), "10".into());
    session.metadata.insert("labels".into(), "Swipe,Push,Pull".into());
    session.metadata.insert("session_id".into(), "fixture-1".into());
    session.samples = (0..500)
        .map(|k| RssiSample::new(k * 7, -40.0 - ((k * 13) % 47) as f64 / 8.0))
        .collect();
    let text = serialize_rssi_log(&session);
    let parsed = parse_rssi_log(&text).unwrap();
    assert_eq!(parsed.session, session, "criterion 9: round trip");
    assert_eq!(parsed.skipped_lines, 0);
    assert_eq!(serialize_rssi_log(&parsed.session), text, "criterion 9: canonical fixpoint");

    // Malformed lines are counted exactly.
    let dirty = format!("{text}garbage line\n123,not-a-number\n99999,-41\n5,-300\n");
    let parsed = parse_rssi_log(&dirty).unwrap();
    assert_eq!(parsed.skipped_lines, 3, "criterion 9: malformed count");
    assert_eq!(parsed.session.samples.len(), 501);

    assert!(report(
        9,
        "parsers",
        true,
        "wireless fixture parses, RSSI log round-trips bit-exactly, malformed lines counted",
    ));
}

// ---------------------------------------------------------------------------
// Criterion 10 — CLI determinism
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_handwave"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn handwave")
}

fn assert_same_files(a: &std::path::Path, b: &std::path::Path, names: &[&str]) {
    for name in names {
        let left = std::fs::read(a.join(name)).unwrap_or_else(|e| {
            panic!("criterion 10: missing {name} in {}: {e}", a.display())
        });
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "criterion 10: {name} differs between reruns");
    }
}

#[test]
fn criterion_10_cli_determinism() {
    let base = tempfile::tempdir().unwrap();
    let base = base.path();
    let tiny: Vec<String> = [
        "per_class=12",
        "tau=25",
        "hidden=8",
        "iterations=40",
        "batch_size=16",
        "dropout=0.2",
        "splits=2",
        "baseline_knn=true",
        "soak_minutes=2",
        "seed=5",
    ]
    .iter()
    .flat_map(|kv| ["--set".to_string(), kv.to_string()])
    .collect();
    let tiny_args: Vec<&str> = tiny.iter().map(|s| s.as_str()).collect();

    // synth twice
    for out in ["synth_a", "synth_b"] {
        let output = run_cli(&[&["synth", "--out", out], &tiny_args[..]].concat(), base);
        assert!(output.status.success(), "synth failed: {:?}", output);
    }
    assert_same_files(
        &base.join("synth_a"),
        &base.join("synth_b"),
        &["session_induced.log", "config.resolved"],
    );
    let log = base.join("synth_a/session_induced.log");
    let log = log.to_str().unwrap();

    // train twice
    for out in ["train_a", "train_b"] {
        let output = run_cli(&[&["train", "--out", out], &tiny_args[..], &[log]].concat(), base);
        assert!(output.status.success(), "train failed: {:?}", output);
    }
    assert_same_files(
        &base.join("train_a"),
        &base.join("train_b"),
        &["model.bin", "pipeline.params", "loss.csv"],
    );
    // Loss log has exactly `iterations` data rows.
    let loss = std::fs::read_to_string(base.join("train_a/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 41, "criterion 10: loss rows = iterations + header");

    // eval twice (with the k-NN baseline enabled)
    for out in ["eval_a", "eval_b"] {
        let output = run_cli(&[&["eval", "--out", out], &tiny_args[..], &[log]].concat(), base);
        assert!(output.status.success(), "eval failed: {:?}", output);
    }
    assert_same_files(
        &base.join("eval_a"),
        &base.join("eval_b"),
        &["eval.csv", "confusion.csv", "baseline.csv"],
    );

    // gridsearch twice
    for out in ["grid_a", "grid_b"] {
        let output = run_cli(
            &[&["gridsearch", "--grid", "hidden=6;iterations=20", "--out", out], &tiny_args[..], &[log]]
                .concat(),
            base,
        );
        assert!(output.status.success(), "gridsearch failed: {:?}", output);
    }
    assert_same_files(&base.join("grid_a"), &base.join("grid_b"), &["gridsearch.csv"]);

    // fp-soak twice against the trained model
    let model_dir = base.join("train_a");
    let model_dir = model_dir.to_str().unwrap();
    for out in ["soak_a", "soak_b"] {
        let output = run_cli(
            &[&["fp-soak", "--model", model_dir, "--out", out], &tiny_args[..]].concat(),
            base,
        );
        assert!(output.status.success(), "fp-soak failed: {:?}", output);
    }
    assert_same_files(
        &base.join("soak_a"),
        &base.join("soak_b"),
        &["decisions.csv", "fp_report.csv"],
    );
    // One decision row per hop: body rows = fp_report counts total.
    let decisions = std::fs::read_to_string(base.join("soak_a/decisions.csv")).unwrap();
    let fp_report = std::fs::read_to_string(base.join("soak_a/fp_report.csv")).unwrap();
    let total: u64 = fp_report
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(decisions.lines().count() as u64 - 1, total, "criterion 10: one row per hop");

    // run (replay) twice: stdout must match byte for byte
    let source = format!("replay:{log}");
    let run_a = run_cli(
        &[&["run", "--model", model_dir, "--source", &source], &tiny_args[..]].concat(),
        base,
    );
    let run_b = run_cli(
        &[&["run", "--model", model_dir, "--source", &source], &tiny_args[..]].concat(),
        base,
    );
    assert!(run_a.status.success(), "run failed: {:?}", run_a);
    assert_eq!(run_a.stdout, run_b.stdout, "criterion 10: run stdout differs");
    assert!(run_a.stdout.starts_with(b"time_s,label\n"));

    // induce twice: no primary file outputs; exit status must agree (stats
    // contain wall-clock rates and are not primary outputs).
    let induce_a = run_cli(
        &["induce", "--set", "induce_seconds=0.2", "--set", "induce_rate_hz=50"],
        base,
    );
    let induce_b = run_cli(
        &["induce", "--set", "induce_seconds=0.2", "--set", "induce_rate_hz=50"],
        base,
    );
    assert_eq!(
        induce_a.status.code(),
        induce_b.status.code(),
        "criterion 10: induce exit codes differ"
    );

    assert!(report(
        10,
        "CLI determinism",
        true,
        "synth/train/eval/gridsearch/fp-soak/run reruns are byte-identical on models and CSVs; \
         induce emits no primary outputs (exit status checked)",
    ));
}
