//! Offline training and evaluation on synthetic data: extract gesture
//! windows, preprocess, train the LSTM, report held-out accuracy and the
//! confusion matrix.
//!
//! Run with: `cargo run --release --example offline_training`

use handwave::cli::build_feature_set;
use handwave::config::RunConfig;
use handwave::ingest::{extract_gesture_windows, split_train_test};
use handwave::lstm::{train, TrainingSet};
use handwave::report::ConfusionMatrix;
use handwave::signal::{generate_dataset_with, GestureTemplate};
use handwave::types::GestureLabel;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.per_class = 40;
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
    let log = session.to_session_log();
    let windows = extract_gesture_windows(&log, cfg.window_s).unwrap().windows;
    let (train_w, test_w) = split_train_test(&windows, cfg.train_ratio, cfg.seed).unwrap();
    println!("{} training windows, {} test windows", train_w.len(), test_w.len());

    // Scaler fitted on training windows only, then applied to both sides.
    let (_, train_feats, train_labels) = build_feature_set(&train_w, &train_w, &cfg).unwrap();
    let (_, test_feats, test_labels) = build_feature_set(&train_w, &test_w, &cfg).unwrap();

    let rows: Vec<Vec<f64>> = train_feats.iter().map(|f| f.values().to_vec()).collect();
    let labels: Vec<GestureLabel> = train_labels
        .iter()
        .map(|&k| GestureLabel::from_class_index(k).unwrap())
        .collect();
    let data = TrainingSet::from_rows(&rows, &labels).unwrap();

    let train_cfg = cfg.train_config(1);
    println!(
        "training: {} hidden units x {} layers, {} iterations, batch {}",
        train_cfg.hidden, train_cfg.layers, train_cfg.iterations, train_cfg.batch_size
    );
    let result = train(&data, &train_cfg).unwrap();
    println!(
        "loss: {:.3} -> {:.3}",
        result.loss_history.first().unwrap(),
        result.loss_history.last().unwrap()
    );

    let mut confusion = ConfusionMatrix::new();
    let mut correct = 0usize;
    for (fv, &label) in test_feats.iter().zip(&test_labels) {
        let predicted = result.model.predict_class(fv).unwrap();
        if predicted == label {
            correct += 1;
        }
        confusion.record(
            GestureLabel::from_class_index(label).unwrap(),
            GestureLabel::from_class_index(predicted).unwrap(),
        );
    }
    println!(
        "held-out accuracy: {:.2}% over {} windows",
        100.0 * correct as f64 / test_labels.len() as f64,
        test_labels.len()
    );
    println!("\nconfusion (rows = truth):\n{}", confusion.to_csv());
}
