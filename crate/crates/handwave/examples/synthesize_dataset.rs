//! Synthesizes a labeled gesture session and writes it in the session log
//! format, then parses it back to show the round trip.
//!
//! Run with: `cargo run --example synthesize_dataset`

use handwave::ingest::parse_rssi_log;
use handwave::ingest::serialize_rssi_log;
use handwave::signal::{
    generate_dataset_with, ChannelParams, GestureTemplate, GestureVariability, SamplingProfile,
};

fn main() {
    let params = ChannelParams::default();
    let profile = SamplingProfile::induced();
    let templates = GestureTemplate::defaults();

    // 10 instances per gesture, one slot every 10 s, human-like execution
    // variability.
    let session = generate_dataset_with(
        &params,
        &profile,
        &templates,
        10,
        10.0,
        &GestureVariability::default(),
        42,
    )
    .unwrap();
    println!(
        "synthesized {} samples, {} annotated gestures",
        session.samples.len(),
        session.annotations.len()
    );
    for annotation in session.annotations.iter().take(5) {
        println!(
            "  {} at {:>6.2} s for {:.2} s",
            annotation.label, annotation.start_s, annotation.duration_s
        );
    }

    let log = session.to_session_log();
    let text = serialize_rssi_log(&log);
    let path = std::env::temp_dir().join("handwave_session.log");
    std::fs::write(&path, &text).unwrap();
    println!("\nwrote {} ({} bytes)", path.display(), text.len());

    let parsed = parse_rssi_log(&text).unwrap();
    println!(
        "parsed back: {} samples, {} labels, {} skipped lines",
        parsed.session.samples.len(),
        parsed.session.labels().unwrap().len(),
        parsed.skipped_lines
    );
    assert_eq!(parsed.session, log);
    println!("round trip is exact");
}
