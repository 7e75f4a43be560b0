//! The k-NN DTW baseline against the LSTM on the same preprocessed features,
//! comparing accuracy and per-sample prediction latency.
//!
//! Run with: `cargo run --release --example dtw_baseline`

use std::time::Instant;

use handwave::cli::build_feature_set;
use handwave::config::RunConfig;
use handwave::dtw::{dtw_distance, knn_predict, DtwConfig};
use handwave::ingest::{extract_gesture_windows, split_train_test};
use handwave::lstm::{train, TrainingSet};
use handwave::signal::{generate_dataset_with, GestureTemplate};
use handwave::types::GestureLabel;

fn main() {
    let cfg_dtw = DtwConfig::default();
    println!(
        "dtw sanity: identical series -> {}, elastic repeat -> {}",
        dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &cfg_dtw).unwrap(),
        dtw_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0], &cfg_dtw).unwrap(),
    );

    let mut cfg = RunConfig::default();
    cfg.per_class = 30;
    cfg.hidden = 16;
    cfg.set("iterations", "150").unwrap();
    cfg.dropout = 0.3;

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
    let (train_w, test_w) = split_train_test(&windows, cfg.train_ratio, cfg.seed).unwrap();
    let (_, train_feats, train_labels) = build_feature_set(&train_w, &train_w, &cfg).unwrap();
    let (_, test_feats, test_labels) = build_feature_set(&train_w, &test_w, &cfg).unwrap();

    // k-NN DTW: no training, all the cost sits at prediction time.
    let train_rows: Vec<Vec<f64>> = train_feats.iter().map(|f| f.values().to_vec()).collect();
    let train_glabels: Vec<GestureLabel> = train_labels
        .iter()
        .map(|&k| GestureLabel::from_class_index(k).unwrap())
        .collect();
    for k in [1usize, 3, 5] {
        let dtw_cfg = DtwConfig { k, ..DtwConfig::default() };
        let started = Instant::now();
        let mut correct = 0usize;
        for (fv, &label) in test_feats.iter().zip(&test_labels) {
            let predicted = knn_predict(&train_rows, &train_glabels, fv.values(), &dtw_cfg).unwrap();
            if predicted.class_index() == Some(label) {
                correct += 1;
            }
        }
        let per_sample = started.elapsed().as_secs_f64() * 1000.0 / test_labels.len() as f64;
        println!(
            "k-NN DTW (k={k}): {:.2}% accuracy, {per_sample:.3} ms/sample over {} neighbors",
            100.0 * correct as f64 / test_labels.len() as f64,
            train_rows.len()
        );
    }

    // The LSTM for comparison on the same features.
    let rows_set = TrainingSet::from_rows(&train_rows, &train_glabels).unwrap();
    let result = train(&rows_set, &cfg.train_config(1)).unwrap();
    let started = Instant::now();
    let mut correct = 0usize;
    for (fv, &label) in test_feats.iter().zip(&test_labels) {
        if result.model.predict_class(fv).unwrap() == label {
            correct += 1;
        }
    }
    let per_sample = started.elapsed().as_secs_f64() * 1000.0 / test_labels.len() as f64;
    println!(
        "LSTM ({} units x {} layers): {:.2}% accuracy, {per_sample:.3} ms/sample",
        cfg.hidden,
        cfg.layers,
        100.0 * correct as f64 / test_labels.len() as f64
    );
}
