//! The propagation model behind the synthesizer: mean path loss over
//! distance, fading draws, and the sample rates of the two traffic regimes.
//!
//! Run with: `cargo run --example channel_model`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use handwave::signal::{
    generate_timestamps, path_loss_mean, sample_rssi, ChannelParams, SamplingProfile,
};

fn main() {
    let params = ChannelParams::default();
    println!("log-distance path loss (l0 = {} dBm, n = {}):", params.l0_dbm, params.path_loss_exp);
    for r in [0.5, 1.0, 2.0, 4.5, 9.0] {
        println!("  {r:>4.1} m -> {:>7.2} dBm", path_loss_mean(&params, r).unwrap());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!(
        "\nfading draws at {} m (shadow sigma {} dB, Nakagami m {}):",
        params.distance_m, params.shadow_sigma_db, params.nakagami_m
    );
    for _ in 0..8 {
        println!("  {:>7.2} dBm", sample_rssi(&params, &mut rng).unwrap());
    }

    let quiet = ChannelParams {
        shadow_sigma_db: 0.0,
        nakagami_m: f64::INFINITY,
        ..params.clone()
    };
    println!(
        "\nwith all noise disabled the draw is the mean exactly: {:.2} dBm",
        sample_rssi(&quiet, &mut rng).unwrap()
    );

    println!("\nsampling profiles over 60 s:");
    for profile in [SamplingProfile::beacon_only(), SamplingProfile::induced()] {
        let ts = generate_timestamps(&profile, 60.0, &mut rng).unwrap();
        println!(
            "  {:?}: {} samples ({:.1}/s)",
            profile.mode,
            ts.len(),
            ts.len() as f64 / 60.0
        );
    }
}
