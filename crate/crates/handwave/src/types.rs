//! Core domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Number of gesture classes the classifier distinguishes. `Noise` is not a
/// class of its own: it is produced by the gate, the logits thresholds and
/// the decision rules, never by the classifier head.
pub const GESTURE_CLASSES: usize = 3;

/// Classification target. The declaration order fixes the class order used
/// for logits indexing and for deterministic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GestureLabel {
    /// Hand crosses the device and returns: two short dips in RSSI.
    Swipe,
    /// Hand moves down and holds: drop followed by a low plateau.
    Push,
    /// Hand held low then lifted: low plateau followed by a rise.
    Pull,
    /// No gesture.
    Noise,
}

impl GestureLabel {
    /// All labels in class order, `Noise` last.
    pub const ALL: [GestureLabel; 4] = [
        GestureLabel::Swipe,
        GestureLabel::Push,
        GestureLabel::Pull,
        GestureLabel::Noise,
    ];

    /// The three trainable gesture classes.
    pub const GESTURES: [GestureLabel; GESTURE_CLASSES] = [
        GestureLabel::Swipe,
        GestureLabel::Push,
        GestureLabel::Pull,
    ];

    /// Logit index of this label, `None` for `Noise`.
    pub fn class_index(self) -> Option<usize> {
        match self {
            GestureLabel::Swipe => Some(0),
            GestureLabel::Push => Some(1),
            GestureLabel::Pull => Some(2),
            GestureLabel::Noise => None,
        }
    }

    /// Inverse of [`class_index`](Self::class_index).
    pub fn from_class_index(index: usize) -> Option<GestureLabel> {
        GestureLabel::GESTURES.get(index).copied()
    }

    pub fn is_gesture(self) -> bool {
        self != GestureLabel::Noise
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureLabel::Swipe => "Swipe",
            GestureLabel::Push => "Push",
            GestureLabel::Pull => "Pull",
            GestureLabel::Noise => "Noise",
        }
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "swipe" => Ok(GestureLabel::Swipe),
            "push" => Ok(GestureLabel::Push),
            "pull" => Ok(GestureLabel::Pull),
            "noise" => Ok(GestureLabel::Noise),
            other => Err(Error::Parse(format!("unknown gesture label `{other}`"))),
        }
    }
}

/// One timestamped signal-strength reading, the pipeline's atomic input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiSample {
    /// Integer milliseconds since session start (or epoch for live capture).
    pub timestamp_ms: i64,
    /// Received signal strength in dBm. Accepted samples lie in [-120, 0].
    pub rssi_dbm: f64,
}

impl RssiSample {
    pub fn new(timestamp_ms: i64, rssi_dbm: f64) -> Self {
        Self { timestamp_ms, rssi_dbm }
    }

    pub fn time_s(&self) -> f64 {
        self.timestamp_ms as f64 / 1000.0
    }
}

/// Range check applied by parsers and capture sources.
pub fn rssi_in_range(rssi_dbm: f64) -> bool {
    rssi_dbm.is_finite() && (-120.0..=0.0).contains(&rssi_dbm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_indices_round_trip() {
        for label in GestureLabel::GESTURES {
            let idx = label.class_index().unwrap();
            assert_eq!(GestureLabel::from_class_index(idx), Some(label));
        }
        assert_eq!(GestureLabel::Noise.class_index(), None);
        assert_eq!(GestureLabel::from_class_index(3), None);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Swipe".parse::<GestureLabel>().unwrap(), GestureLabel::Swipe);
        assert_eq!("push".parse::<GestureLabel>().unwrap(), GestureLabel::Push);
        assert_eq!(" Pull ".parse::<GestureLabel>().unwrap(), GestureLabel::Pull);
        assert!("wave".parse::<GestureLabel>().is_err());
    }

    #[test]
    fn tie_break_order_is_declaration_order() {
        assert!(GestureLabel::Swipe < GestureLabel::Push);
        assert!(GestureLabel::Push < GestureLabel::Pull);
        assert!(GestureLabel::Pull < GestureLabel::Noise);
    }

    #[test]
    fn rssi_range_check() {
        assert!(rssi_in_range(-40.0));
        assert!(rssi_in_range(0.0));
        assert!(rssi_in_range(-120.0));
        assert!(!rssi_in_range(1.0));
        assert!(!rssi_in_range(-121.0));
        assert!(!rssi_in_range(f64::NAN));
    }
}
