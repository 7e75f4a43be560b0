//! End-to-end online recognition: train on one synthetic session, then run
//! the full chain (windowing, variance gate, preprocessing, inference,
//! thresholding, decision rules) over a fresh stream with injected gestures.
//!
//! Run with: `cargo run --release --example streaming_recognition`

use handwave::cli::fit_pipeline;
use handwave::config::{GateSetting, RunConfig, ThresholdSetting};
use handwave::ingest::{extract_gesture_windows, split_train_test};
use handwave::pipeline::recognize_stream;
use handwave::signal::{generate_dataset_with, GestureTemplate};

fn main() {
    let mut cfg = RunConfig::default();
    cfg.per_class = 40;
    cfg.hidden = 16;
    cfg.set("iterations", "150").unwrap();
    cfg.dropout = 0.3;
    cfg.variance_threshold = GateSetting::Calibrate;
    cfg.logit_thresholds = ThresholdSetting::Calibrate;

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
    let (train_w, _) = split_train_test(&windows, cfg.train_ratio, cfg.seed).unwrap();
    let (pipeline, _) = fit_pipeline(&cfg, &train_w, &cfg.train_config(1)).unwrap();
    println!(
        "trained; gate threshold {:.2} dB^2, logit thresholds {:?}",
        pipeline.gate.variance_threshold, pipeline.thresholds
    );

    // A fresh stream the model has never seen.
    let live = generate_dataset_with(
        &cfg.channel_params(),
        &cfg.sampling_profile(),
        &GestureTemplate::defaults(),
        3,
        10.0,
        &cfg.gesture_variability(),
        cfg.seed + 1,
    )
    .unwrap();

    let decisions = recognize_stream(
        &live.samples,
        &pipeline.model,
        &pipeline.scaler,
        pipeline.gate,
        pipeline.windowing,
        pipeline.thresholds,
        pipeline.decision,
    )
    .unwrap();

    println!("\nground truth:");
    for a in &live.annotations {
        println!("  {:>6.1} s  {}", a.start_s, a.label);
    }
    println!("\naccepted non-Noise decisions (window start, label):");
    for (t, label) in decisions.iter().filter(|(_, l)| l.is_gesture()) {
        println!("  {t:>6.1} s  {label}");
    }
    let hits = live
        .annotations
        .iter()
        .filter(|a| {
            decisions.iter().any(|(t, l)| {
                *l == a.label && (*t - a.start_s).abs() <= cfg.window_s
            })
        })
        .count();
    println!(
        "\n{hits}/{} gestures detected within one window length of their onset",
        live.annotations.len()
    );
}
