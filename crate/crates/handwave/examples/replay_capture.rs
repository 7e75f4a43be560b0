//! RSSI sources: replaying a recorded session exactly, and polling a
//! wireless-extensions pseudo-file from a background thread through the
//! bounded capture queue.
//!
//! Run with: `cargo run --example replay_capture`

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use handwave::capture::{PolledSource, PollerConfig, ReplaySource, RssiSource};
use handwave::signal::{generate_noise_stream, ChannelParams, SamplingProfile};

fn main() {
    // Replay: timestamps and values come back exactly as recorded.
    let recorded = generate_noise_stream(
        &ChannelParams::default(),
        &SamplingProfile::induced(),
        2.0,
        None,
        9,
    )
    .unwrap();
    let mut replay = ReplaySource::from_synthetic(&recorded);
    let mut replayed = Vec::new();
    while let Some(sample) = replay.next_sample() {
        replayed.push(sample);
    }
    assert_eq!(replayed, recorded.samples);
    println!("replayed {} samples bit-exactly", replayed.len());

    // Poller: a mock pseudo-file rewritten by a writer thread, read at 100 Hz.
    let dir = std::env::temp_dir();
    let path = dir.join("handwave_mock_wireless");
    let stop = Arc::new(AtomicBool::new(false));
    let writer_stop = Arc::clone(&stop);
    let writer_path = path.clone();
    std::fs::write(&path, wireless_body(-60)).unwrap();
    let writer = thread::spawn(move || {
        let mut level = -60;
        while !writer_stop.load(Ordering::Relaxed) {
            level = if level <= -75 { -60 } else { level - 1 };
            let tmp = writer_path.with_extension("tmp");
            std::fs::write(&tmp, wireless_body(level)).unwrap();
            std::fs::rename(&tmp, &writer_path).unwrap();
            thread::sleep(Duration::from_millis(10));
        }
    });

    let mut source = PolledSource::start(PollerConfig {
        path: path.clone(),
        rate_hz: 100.0,
        interface: Some("wlan0".into()),
        capacity: 256,
    })
    .unwrap();
    let mut polled = Vec::new();
    for _ in 0..100 {
        match source.next_sample() {
            Some(s) => polled.push(s),
            None => break,
        }
    }
    source.stop();
    stop.store(true, Ordering::Relaxed);
    writer.join().unwrap();
    let _ = std::fs::remove_file(&path);

    println!(
        "polled {} samples (queue drops: {}, parse failures: {})",
        polled.len(),
        source.dropped(),
        source.parse_failures()
    );
    if let (Some(first), Some(last)) = (polled.first(), polled.last()) {
        println!(
            "first {:.1} dBm @ {} ms, last {:.1} dBm @ {} ms",
            first.rssi_dbm, first.timestamp_ms, last.rssi_dbm, last.timestamp_ms
        );
    }
}

fn wireless_body(level: i32) -> String {
    format!(
        "Inter-| sta-|   Quality        |   Discarded packets               | Missed | WE\n face | tus | link level noise |  nwid  crypt   frag  retry   misc | beacon | 22\n wlan0: 0000   54.  {level}.  -256        0      0      0      0      0        0\n"
    )
}
