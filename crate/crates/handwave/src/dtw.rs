//! k-nearest-neighbor classifier under dynamic time warping distance, the
//! classical time-series baseline the LSTM is compared against.
//!
//! The DP uses the standard step pattern (insert, delete, match) with an
//! optional Sakoe-Chiba band. Queries and training series are the same
//! preprocessed feature vectors the LSTM consumes, so the accuracy
//! comparison is like-for-like.

use crate::types::GestureLabel;
use crate::{Error, Result};

/// Local cost between two aligned values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostMetric {
    /// Absolute difference.
    #[default]
    L1,
    /// Squared difference.
    L2,
}

impl CostMetric {
    fn cost(self, a: f64, b: f64) -> f64 {
        match self {
            CostMetric::L1 => (a - b).abs(),
            CostMetric::L2 => (a - b) * (a - b),
        }
    }
}

/// DTW and k-NN configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwConfig {
    /// Sakoe-Chiba band half-width in samples; `None` runs unconstrained.
    pub band: Option<usize>,
    /// Neighbor count; odd values avoid most voting ties.
    pub k: usize,
    pub cost: CostMetric,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self { band: None, k: 1, cost: CostMetric::L1 }
    }
}

impl DtwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dynamic-time-warping distance between two non-empty series.
pub fn dtw_distance(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    cfg.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("DTW requires non-empty series".into()));
    }
    let n = a.len();
    let m = b.len();
    // A band narrower than the length difference leaves no feasible path.
    let band = cfg
        .band
        .map(|w| w.max(n.abs_diff(m)))
        .unwrap_or(usize::MAX);

    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = if band == usize::MAX { 1 } else { i.saturating_sub(band).max(1) };
        let hi = if band == usize::MAX { m } else { (i + band).min(m) };
        for j in lo..=hi {
            let cost = cfg.cost.cost(a[i - 1], b[j - 1]);
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Majority vote among the k nearest training series. Ties between labels go
/// to the smaller mean distance among the tied labels' voters, then to class
/// order.
pub fn knn_predict(
    train: &[Vec<f64>],
    labels: &[GestureLabel],
    query: &[f64],
    cfg: &DtwConfig,
) -> Result<GestureLabel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("k-NN needs a non-empty training set".into()));
    }
    if train.len() != labels.len() {
        return Err(Error::Shape {
            expected: format!("{} labels", train.len()),
            got: format!("{}", labels.len()),
        });
    }
    let mut neighbors: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(idx, series)| Ok((dtw_distance(series, query, cfg)?, idx)))
        .collect::<Result<_>>()?;
    neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let k = cfg.k.min(neighbors.len());
    let voters = &neighbors[..k];

    let mut votes: Vec<(GestureLabel, usize, f64)> = Vec::new(); // (label, count, distance sum)
    for &(dist, idx) in voters {
        let label = labels[idx];
        match votes.iter_mut().find(|(l, _, _)| *l == label) {
            Some(entry) => {
                entry.1 += 1;
                entry.2 += dist;
            }
            None => votes.push((label, 1, dist)),
        }
    }
    votes.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then((a.2 / a.1 as f64).partial_cmp(&(b.2 / b.1 as f64)).unwrap())
            .then(a.0.cmp(&b.0))
    });
    Ok(votes[0].0)
}
