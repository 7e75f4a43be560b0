//! Parses the kernel wireless-extensions status table, from a bundled
//! snapshot and from the live `/proc/net/wireless` when one exists.
//!
//! Run with: `cargo run --example parse_wireless`

use handwave::ingest::parse_proc_wireless;

const SNAPSHOT: &str = "\
Inter-| sta-|   Quality        |   Discarded packets               | Missed | WE
 face | tus | link level noise |  nwid  crypt   frag  retry   misc | beacon | 22
 wlan0: 0000   54.  -61.  -256        0      0      0      0      0        0
 wlan1: 0000   37   -73.  -256        0      0      0      0      0        0
";

fn main() {
    println!("snapshot:");
    for row in parse_proc_wireless(SNAPSHOT).unwrap() {
        println!(
            "  {}: link quality {}, level {} dBm, noise {} dBm",
            row.interface, row.link_quality, row.level_dbm, row.noise_dbm
        );
    }

    match std::fs::read_to_string("/proc/net/wireless") {
        Ok(text) => match parse_proc_wireless(&text) {
            Ok(rows) if rows.is_empty() => {
                println!("\n/proc/net/wireless: no wireless interfaces on this host");
            }
            Ok(rows) => {
                println!("\n/proc/net/wireless:");
                for row in rows {
                    println!("  {}: level {} dBm", row.interface, row.level_dbm);
                }
            }
            Err(e) => println!("\n/proc/net/wireless: parse error: {e}"),
        },
        Err(e) => println!("\n/proc/net/wireless not readable here: {e}"),
    }
}
