//! Paced echo-request traffic induction against localhost for two seconds,
//! using the best probe mechanism the host allows (ICMP datagram socket,
//! raw ICMP socket, or UDP as the degraded fallback).
//!
//! Run with: `cargo run --example traffic_induction`

use std::sync::atomic::AtomicBool;
use std::time::Duration;

use handwave::capture::{induce, InducerConfig};

fn main() {
    let cfg = InducerConfig {
        rate_hz: 100.0,
        duration: Some(Duration::from_secs(2)),
        ..InducerConfig::default()
    };
    println!(
        "inducing against {} at {} req/s for 2 s...",
        cfg.target, cfg.rate_hz
    );
    let stop = AtomicBool::new(false);
    match induce(&cfg, &stop) {
        Ok(stats) => print!("{}", stats.to_kv_lines()),
        Err(e) => println!("induction unavailable here: {e}"),
    }
}
