//! RSSI log parsing, the `/proc/net/wireless` table parser, gesture window
//! extraction and train/test splitting.
//!
//! The on-disk session format is UTF-8 text with LF line endings: `#`-prefixed
//! `key=value` metadata lines first, then one `timestamp_ms,rssi_dbm` row per
//! sample with `.` as decimal separator. Labeled sessions must carry the
//! metadata keys `start_time_ms`, `gap_s` and `labels` (comma-separated).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::types::{rssi_in_range, GestureLabel, RssiSample};
use crate::{Error, Result};

/// A recorded (or synthesized) measurement session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    /// Free-form metadata. `start_time_ms`, `gap_s` and `labels` are
    /// mandatory for labeled sessions; spatial tags, traffic scenario and
    /// seed are conventional extras.
    pub metadata: BTreeMap<String, String>,
    /// Samples sorted by timestamp.
    pub samples: Vec<RssiSample>,
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_time_ms(&self) -> Option<i64> {
        self.metadata.get("start_time_ms")?.trim().parse().ok()
    }

    pub fn gap_s(&self) -> Option<f64> {
        self.metadata.get("gap_s")?.trim().parse().ok()
    }

    pub fn has_labels(&self) -> bool {
        self.metadata.contains_key("labels")
    }

    /// Declared gesture sequence; errors if absent or unparseable.
    pub fn labels(&self) -> Result<Vec<GestureLabel>> {
        let raw = self
            .metadata
            .get("labels")
            .ok_or_else(|| Error::Data("session has no `labels` metadata".into()))?;
        raw.split(',')
            .map(|s| s.parse::<GestureLabel>())
            .collect()
    }
}

/// Parse result: the session plus the number of malformed lines skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub session: SessionLog,
    pub skipped_lines: usize,
}

/// Parses the RSSI log format. Malformed data rows (wrong field count,
/// unparseable numbers, out-of-range RSSI, regressing timestamps) are counted
/// and skipped rather than failing the whole file. Declaring `labels` without
/// `start_time_ms` or a positive `gap_s` is a hard parse error.
pub fn parse_rssi_log(text: &str) -> Result<ParsedLog> {
    let mut session = SessionLog::new();
    let mut skipped = 0usize;
    let mut last_ts: Option<i64> = None;

    for line in text.lines() {
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                session
                    .metadata
                    .insert(key.trim().to_string(), value.trim().to_string());
            }
            // '#' lines without '=' are plain comments.
            continue;
        }
        match parse_data_row(line, last_ts) {
            Some(sample) => {
                last_ts = Some(sample.timestamp_ms);
                session.samples.push(sample);
            }
            None => skipped += 1,
        }
    }

    if session.has_labels() {
        if session.start_time_ms().is_none() {
            return Err(Error::Parse(
                "labeled session is missing a parseable `start_time_ms`".into(),
            ));
        }
        match session.gap_s() {
            Some(gap) if gap > 0.0 => {}
            _ => {
                return Err(Error::Parse(
                    "labeled session is missing a positive `gap_s`".into(),
                ))
            }
        }
        session.labels()?;
    }

    Ok(ParsedLog { session, skipped_lines: skipped })
}

fn parse_data_row(line: &str, last_ts: Option<i64>) -> Option<RssiSample> {
    let (ts_str, rssi_str) = line.split_once(',')?;
    if rssi_str.contains(',') {
        return None;
    }
    let timestamp_ms: i64 = ts_str.trim().parse().ok()?;
    let rssi_dbm: f64 = rssi_str.trim().parse().ok()?;
    if !rssi_in_range(rssi_dbm) {
        return None;
    }
    if let Some(prev) = last_ts {
        if timestamp_ms < prev {
            return None;
        }
    }
    Some(RssiSample::new(timestamp_ms, rssi_dbm))
}

/// Canonical serialization of a session: metadata in key order, then data
/// rows. `parse_rssi_log(serialize_rssi_log(s))` reproduces `s` exactly.
pub fn serialize_rssi_log(session: &SessionLog) -> String {
    let mut out = String::new();
    for (key, value) in &session.metadata {
        out.push_str(&format!("# {key}={value}\n"));
    }
    for sample in &session.samples {
        out.push_str(&format!("{},{}\n", sample.timestamp_ms, sample.rssi_dbm));
    }
    out
}

/// One row of the kernel wireless-extensions status table.
#[derive(Debug, Clone, PartialEq)]
pub struct WirelessStatus {
    pub interface: String,
    pub link_quality: f64,
    pub level_dbm: f64,
    pub noise_dbm: f64,
}

/// Parses `/proc/net/wireless` content: two header lines, then one row per
/// interface. The kernel appends `.` to quality values that were updated
/// since the last read; trailing periods are stripped.
pub fn parse_proc_wireless(text: &str) -> Result<Vec<WirelessStatus>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().unwrap();
        // Interface rows are `name:`; everything else is header material.
        let Some(interface) = first.strip_suffix(':') else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();
        if rest.len() < 4 {
            return Err(Error::Parse(format!(
                "wireless row for `{interface}` has {} columns, need at least 4 \
                 (status, link, level, noise)",
                rest.len()
            )));
        }
        u32::from_str_radix(rest[0], 16).map_err(|_| {
            Error::Parse(format!(
                "wireless row for `{interface}`: bad status field `{}`",
                rest[0]
            ))
        })?;
        let link_quality = parse_qual_field(rest[1], interface, "link quality")?;
        let level_dbm = parse_qual_field(rest[2], interface, "level")?;
        let noise_dbm = parse_qual_field(rest[3], interface, "noise")?;
        rows.push(WirelessStatus {
            interface: interface.to_string(),
            link_quality,
            level_dbm,
            noise_dbm,
        });
    }
    Ok(rows)
}

fn parse_qual_field(token: &str, interface: &str, what: &str) -> Result<f64> {
    token
        .strip_suffix('.')
        .unwrap_or(token)
        .parse::<f64>()
        .map_err(|_| {
            Error::Parse(format!(
                "wireless row for `{interface}`: bad {what} field `{token}`"
            ))
        })
}

/// Where a training window came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOrigin {
    pub session_id: String,
    pub start_ms: i64,
}

/// A variable-length raw window with its gesture label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub label: GestureLabel,
    pub samples: Vec<RssiSample>,
    pub origin: WindowOrigin,
}

/// Extraction result plus the number of windows dropped because the stream
/// ended before they did.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedWindows {
    pub windows: Vec<LabeledWindow>,
    pub dropped: usize,
}

/// Slices a labeled session into gesture windows: the k-th window covers
/// `[start + k*gap, start + k*gap + T)` and carries the k-th declared label.
/// A window is kept only if the stream extends to its end time.
pub fn extract_gesture_windows(session: &SessionLog, window_s: f64) -> Result<ExtractedWindows> {
    if !(window_s > 0.0) {
        return Err(Error::InvalidParam(format!(
            "window length must be positive, got {window_s}"
        )));
    }
    let start_ms = session
        .start_time_ms()
        .ok_or_else(|| Error::Data("session has no `start_time_ms` metadata".into()))?;
    let gap_s = session
        .gap_s()
        .ok_or_else(|| Error::Data("session has no `gap_s` metadata".into()))?;
    if !(gap_s > 0.0) {
        return Err(Error::Data(format!("gap_s must be positive, got {gap_s}")));
    }
    let labels = session.labels()?;
    let session_id = session
        .metadata
        .get("session_id")
        .cloned()
        .unwrap_or_default();

    let last_ts = match session.samples.last() {
        Some(s) => s.timestamp_ms,
        None => {
            return Ok(ExtractedWindows { windows: Vec::new(), dropped: labels.len() });
        }
    };
    let window_ms = (window_s * 1000.0).round() as i64;
    let mut windows = Vec::with_capacity(labels.len());
    let mut dropped = 0usize;
    for (k, &label) in labels.iter().enumerate() {
        let ws = start_ms + (k as f64 * gap_s * 1000.0).round() as i64;
        let we = ws + window_ms;
        if we > last_ts {
            dropped += 1;
            continue;
        }
        let lo = session.samples.partition_point(|s| s.timestamp_ms < ws);
        let hi = session.samples.partition_point(|s| s.timestamp_ms < we);
        windows.push(LabeledWindow {
            label,
            samples: session.samples[lo..hi].to_vec(),
            origin: WindowOrigin { session_id: session_id.clone(), start_ms: ws },
        });
    }
    Ok(ExtractedWindows { windows, dropped })
}

/// Stratified train/test split: per-class shuffling with `round(ratio * n)`
/// training members per class (clamped so both sides stay non-empty).
/// Deterministic under `seed`; classes with fewer than two members error.
pub fn split_train_test(
    windows: &[LabeledWindow],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<LabeledWindow>, Vec<LabeledWindow>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParam(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut by_class: BTreeMap<GestureLabel, Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        by_class.entry(w.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (label, mut indices) in by_class {
        if indices.len() < 2 {
            return Err(Error::Data(format!(
                "class {label} has {} member(s); need at least 2 to stratify",
                indices.len()
            )));
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&indices[..n_train]);
        test_idx.extend_from_slice(&indices[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = train_idx.iter().map(|&i| windows[i].clone()).collect();
    let test = test_idx.iter().map(|&i| windows[i].clone()).collect();
    Ok((train, test))
}
