//! Synthetic RSSI stream generation.
//!
//! The mean received signal strength follows a log-distance path loss model,
//! `L0 - 10 n log10(R)`, perturbed by zero-mean Gaussian shadow fading and a
//! Nakagami-distributed multipath term. Hand gestures are modeled as additive
//! attenuation profiles (piecewise-linear dB offsets over the gesture
//! duration), which reproduces the qualitative RSSI signatures of swiping
//! (two short dips), pushing (drop then plateau) and pulling (plateau then
//! rise).
//!
//! The multipath term converts a Nakagami(m, Ω) amplitude draw `a` into a dB
//! offset `20 log10(a / sqrt(Ω))`, which is approximately zero-mean and
//! vanishes in the m → ∞ limit (`nakagami_m = f64::INFINITY` disables it).
//!
//! Sampling timestamps mimic the two traffic regimes a phone sees: beacon
//! frames only (one sample per beacon interval, 102 ms by default) or induced
//! traffic (default 200 samples/s), with uniform per-interval timing jitter.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::ingest::SessionLog;
use crate::types::{GestureLabel, RssiSample};
use crate::{Error, Result};

/// Propagation parameters of the simulated channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Reference RSS at 1 m from the transmitter (dBm).
    pub l0_dbm: f64,
    /// Path-loss decay exponent.
    pub path_loss_exp: f64,
    /// Shadow-fading standard deviation (dB), >= 0.
    pub shadow_sigma_db: f64,
    /// Nakagami multipath shape, >= 0.5. `INFINITY` disables multipath.
    pub nakagami_m: f64,
    /// Nakagami multipath spread, > 0.
    pub nakagami_omega: f64,
    /// Transmitter-receiver distance (m), > 0.
    pub distance_m: f64,
}

impl Default for ChannelParams {
    /// Line-of-sight desk setup: AP two meters away, mild fading.
    fn default() -> Self {
        Self {
            l0_dbm: -40.0,
            path_loss_exp: 2.0,
            shadow_sigma_db: 1.0,
            nakagami_m: 4.0,
            nakagami_omega: 1.0,
            distance_m: 2.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0) {
            return Err(Error::InvalidParam(format!(
                "distance_m must be positive, got {}",
                self.distance_m
            )));
        }
        if !(self.nakagami_m >= 0.5) {
            return Err(Error::InvalidParam(format!(
                "nakagami_m must be >= 0.5, got {}",
                self.nakagami_m
            )));
        }
        if !(self.nakagami_omega > 0.0) {
            return Err(Error::InvalidParam(format!(
                "nakagami_omega must be positive, got {}",
                self.nakagami_omega
            )));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "shadow_sigma_db must be >= 0, got {}",
                self.shadow_sigma_db
            )));
        }
        if !self.l0_dbm.is_finite() || !self.path_loss_exp.is_finite() {
            return Err(Error::InvalidParam(
                "l0_dbm and path_loss_exp must be finite".into(),
            ));
        }
        Ok(())
    }

    /// True when the multipath term is disabled (m → ∞ limit).
    pub fn multipath_disabled(&self) -> bool {
        self.nakagami_m.is_infinite()
    }
}

/// Mean RSS at distance `r`: the deterministic part of the channel model.
pub fn path_loss_mean(params: &ChannelParams, r: f64) -> Result<f64> {
    params.validate()?;
    if !(r > 0.0) {
        return Err(Error::InvalidParam(format!(
            "distance must be positive, got {r}"
        )));
    }
    Ok(params.l0_dbm - 10.0 * params.path_loss_exp * r.log10())
}

/// Draws RSS values for fixed channel parameters.
///
/// Construction validates the parameters and precomputes the fading
/// distributions so that per-sample draws are cheap.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    mean_dbm: f64,
    shadow: Option<Normal<f64>>,
    multipath: Option<(Gamma<f64>, f64)>,
}

impl ChannelSampler {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        let mean_dbm = path_loss_mean(params, params.distance_m)?;
        let shadow = if params.shadow_sigma_db > 0.0 {
            Some(
                Normal::new(0.0, params.shadow_sigma_db)
                    .map_err(|e| Error::InvalidParam(e.to_string()))?,
            )
        } else {
            None
        };
        // Nakagami(m, Ω) amplitude: a = sqrt(g) with g ~ Gamma(shape=m, scale=Ω/m).
        let multipath = if params.multipath_disabled() {
            None
        } else {
            let gamma = Gamma::new(params.nakagami_m, params.nakagami_omega / params.nakagami_m)
                .map_err(|e| Error::InvalidParam(e.to_string()))?;
            Some((gamma, params.nakagami_omega))
        };
        Ok(Self { mean_dbm, shadow, multipath })
    }

    pub fn mean_dbm(&self) -> f64 {
        self.mean_dbm
    }

    /// One RSS draw: mean + shadowing + multipath, deterministic given `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut rss = self.mean_dbm;
        if let Some(shadow) = &self.shadow {
            rss += shadow.sample(rng);
        }
        if let Some((gamma, omega)) = &self.multipath {
            let amplitude = gamma.sample(rng).max(f64::MIN_POSITIVE).sqrt();
            rss += 20.0 * (amplitude / omega.sqrt()).log10();
        }
        rss
    }
}

/// One RSS draw with fresh distribution setup; see [`ChannelSampler`] for the
/// loop-friendly form.
pub fn sample_rssi<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Result<f64> {
    Ok(ChannelSampler::new(params)?.sample(rng))
}

/// Coherence times of the fading components used by the session generators.
///
/// Fading is not white: the multipath state persists for tens of
/// milliseconds and body shadowing for hundreds. Each component holds a
/// fresh draw for its coherence interval (sample-and-hold), which keeps the
/// per-sample marginal distribution identical to [`sample_rssi`] while
/// making fade excursions extend over neighboring samples, as they do on a
/// real interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDynamics {
    pub multipath_coherence_ms: f64,
    pub shadow_coherence_ms: f64,
}

impl Default for FadingDynamics {
    fn default() -> Self {
        Self { multipath_coherence_ms: 60.0, shadow_coherence_ms: 400.0 }
    }
}

impl FadingDynamics {
    /// Every sample independent, matching [`sample_rssi`] exactly.
    pub fn white() -> Self {
        Self { multipath_coherence_ms: 0.0, shadow_coherence_ms: 0.0 }
    }
}

/// Sample-and-hold state for one fading component.
struct HeldDraw {
    coherence_ms: f64,
    until_ms: f64,
    value: f64,
}

impl HeldDraw {
    fn new(coherence_ms: f64) -> Self {
        Self { coherence_ms, until_ms: f64::NEG_INFINITY, value: 0.0 }
    }

    fn value_at<R: Rng + ?Sized>(
        &mut self,
        t_ms: f64,
        rng: &mut R,
        draw: impl Fn(&mut R) -> f64,
    ) -> f64 {
        if self.coherence_ms <= 0.0 {
            return draw(rng);
        }
        if t_ms >= self.until_ms {
            self.value = draw(rng);
            let intervals = ((t_ms - self.until_ms) / self.coherence_ms).floor().max(0.0);
            self.until_ms = if self.until_ms.is_finite() {
                self.until_ms + (intervals + 1.0) * self.coherence_ms
            } else {
                t_ms + self.coherence_ms
            };
        }
        self.value
    }
}

/// Time-aware channel sampler for monotone timestamps; the generator-side
/// counterpart of [`ChannelSampler`] with coherent fading.
pub struct ChannelTrack {
    sampler: ChannelSampler,
    shadow: HeldDraw,
    multipath: HeldDraw,
}

impl ChannelTrack {
    pub fn new(params: &ChannelParams, dynamics: &FadingDynamics) -> Result<Self> {
        Ok(Self {
            sampler: ChannelSampler::new(params)?,
            shadow: HeldDraw::new(dynamics.shadow_coherence_ms),
            multipath: HeldDraw::new(dynamics.multipath_coherence_ms),
        })
    }

    /// RSS at time `t_ms`; calls must use nondecreasing timestamps.
    pub fn value_at<R: Rng + ?Sized>(&mut self, t_ms: f64, rng: &mut R) -> f64 {
        let sampler = &self.sampler;
        let mut rss = sampler.mean_dbm;
        if let Some(shadow) = sampler.shadow {
            rss += self.shadow.value_at(t_ms, rng, move |r| shadow.sample(r));
        }
        if let Some((gamma, omega)) = sampler.multipath {
            rss += self.multipath.value_at(t_ms, rng, move |r| {
                let amplitude = gamma.sample(r).max(f64::MIN_POSITIVE).sqrt();
                20.0 * (amplitude / omega.sqrt()).log10()
            });
        }
        rss
    }
}

/// Traffic regime that drives the sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Idle network: one sample per AP beacon frame.
    BeaconOnly,
    /// Artificially induced traffic at `induced_rate_hz`.
    Induced,
}

/// How measurement timestamps are generated.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingProfile {
    pub mode: SamplingMode,
    /// Beacon period in ms (102 ms is the common AP default).
    pub beacon_interval_ms: f64,
    /// Sample rate under induced traffic (samples/s).
    pub induced_rate_hz: f64,
    /// Uniform per-interval timing jitter, fraction of the nominal interval
    /// in [0, 1).
    pub jitter_fraction: f64,
    /// Round synthesized RSSI to integer dBm, as most adapters report.
    pub quantize_dbm: bool,
}

impl SamplingProfile {
    pub fn beacon_only() -> Self {
        Self {
            mode: SamplingMode::BeaconOnly,
            ..Self::default()
        }
    }

    pub fn induced() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beacon_interval_ms > 0.0) {
            return Err(Error::InvalidParam(format!(
                "beacon_interval_ms must be positive, got {}",
                self.beacon_interval_ms
            )));
        }
        if !(self.induced_rate_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "induced_rate_hz must be positive, got {}",
                self.induced_rate_hz
            )));
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return Err(Error::InvalidParam(format!(
                "jitter_fraction must lie in [0, 1), got {}",
                self.jitter_fraction
            )));
        }
        Ok(())
    }

    /// Nominal time between samples in ms.
    pub fn nominal_interval_ms(&self) -> f64 {
        match self.mode {
            SamplingMode::BeaconOnly => self.beacon_interval_ms,
            SamplingMode::Induced => 1000.0 / self.induced_rate_hz,
        }
    }
}

impl Default for SamplingProfile {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Induced,
            beacon_interval_ms: 102.0,
            induced_rate_hz: 200.0,
            jitter_fraction: 0.2,
            quantize_dbm: false,
        }
    }
}

/// Jittered measurement timestamps covering `[0, duration_s]`.
///
/// Intervals are `nominal * (1 + U(-j, +j))`, so timestamps are strictly
/// increasing for any jitter fraction below one.
pub fn generate_timestamps<R: Rng + ?Sized>(
    profile: &SamplingProfile,
    duration_s: f64,
    rng: &mut R,
) -> Result<Vec<i64>> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::InvalidParam(format!(
            "duration_s must be positive, got {duration_s}"
        )));
    }
    let nominal = profile.nominal_interval_ms();
    let jitter = profile.jitter_fraction;
    let end_ms = duration_s * 1000.0;
    let mut timestamps = Vec::with_capacity((end_ms / nominal) as usize + 2);
    let mut t = 0.0f64;
    let mut prev: i64 = -1;
    while t <= end_ms {
        let ts = (t.round() as i64).max(prev + 1);
        timestamps.push(ts);
        prev = ts;
        let scale = if jitter > 0.0 {
            1.0 + rng.random_range(-jitter..jitter)
        } else {
            1.0
        };
        t += nominal * scale;
    }
    Ok(timestamps)
}

/// Additive attenuation profile of one hand gesture.
///
/// The profile maps normalized gesture time in [0, 1] to a dB offset via
/// piecewise-linear interpolation over its control points.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureTemplate {
    pub label: GestureLabel,
    pub duration_s: f64,
    control_points: Vec<(f64, f64)>,
}

impl GestureTemplate {
    pub fn new(
        label: GestureLabel,
        duration_s: f64,
        control_points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if !label.is_gesture() {
            return Err(Error::InvalidParam(
                "gesture template label must not be Noise".into(),
            ));
        }
        if !(duration_s > 0.0) {
            return Err(Error::InvalidParam(format!(
                "template duration must be positive, got {duration_s}"
            )));
        }
        if control_points.len() < 2 {
            return Err(Error::InvalidParam(
                "template needs at least two control points".into(),
            ));
        }
        for pair in control_points.windows(2) {
            if pair[1].0 < pair[0].0 {
                return Err(Error::InvalidParam(
                    "template control points must be sorted by time".into(),
                ));
            }
        }
        let first = control_points.first().unwrap().0;
        let last = control_points.last().unwrap().0;
        if first != 0.0 || last != 1.0 {
            return Err(Error::InvalidParam(
                "template control points must span [0, 1]".into(),
            ));
        }
        Ok(Self { label, duration_s, control_points })
    }

    /// Swipe: the crossing hand shadows the path in bursts — a -6 dB
    /// plateau interrupted by two ~120 ms recoveries to baseline, 2.5 s
    /// total with a 0.5 s release. Its value histogram is nearly Pull's
    /// (same depth, same hold time, same release); what separates the two
    /// is the arrangement, and the notches are only resolved at
    /// induced-traffic sampling rates — beacon-rate sampling rarely lands a
    /// sample inside them.
    pub fn swipe() -> Self {
        Self::new(
            GestureLabel::Swipe,
            2.5,
            vec![
                (0.0, 0.0),
                (0.024, -6.0),
                (0.22, -6.0),
                (0.244, 0.0),
                (0.292, 0.0),
                (0.316, -6.0),
                (0.52, -6.0),
                (0.544, 0.0),
                (0.592, 0.0),
                (0.616, -6.0),
                (0.8, -6.0),
                (1.0, 0.0),
            ],
        )
        .expect("builtin template")
    }

    /// Push: ramp down to -6 dB over 0.5 s, then hold. The hold outlasts the
    /// default 4 s analysis window so the window never sees the hand leave.
    pub fn push() -> Self {
        Self::new(
            GestureLabel::Push,
            5.0,
            vec![(0.0, 0.0), (0.1, -6.0), (1.0, -6.0)],
        )
        .expect("builtin template")
    }

    /// Pull: hold at -6 dB for 2 s, then ramp back to 0 over 0.5 s.
    pub fn pull() -> Self {
        Self::new(
            GestureLabel::Pull,
            2.5,
            vec![(0.0, -6.0), (0.8, -6.0), (1.0, 0.0)],
        )
        .expect("builtin template")
    }

    /// The three built-in templates in class order.
    pub fn defaults() -> Vec<Self> {
        vec![Self::swipe(), Self::push(), Self::pull()]
    }

    /// A copy with the duration and attenuation depths scaled, one realized
    /// execution of the gesture.
    pub fn scaled(&self, duration_factor: f64, amplitude_factor: f64) -> Self {
        Self {
            label: self.label,
            duration_s: self.duration_s * duration_factor,
            control_points: self
                .control_points
                .iter()
                .map(|&(t, v)| (t, v * amplitude_factor))
                .collect(),
        }
    }

    /// dB offset at normalized gesture time `u`; zero outside [0, 1].
    pub fn attenuation_db(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let points = &self.control_points;
        let idx = points.partition_point(|p| p.0 <= u);
        if idx == 0 {
            return points[0].1;
        }
        if idx >= points.len() {
            return points[points.len() - 1].1;
        }
        let (t0, v0) = points[idx - 1];
        let (t1, v1) = points[idx];
        if t1 == t0 {
            return v1;
        }
        v0 + (v1 - v0) * (u - t0) / (t1 - t0)
    }

    pub fn control_points(&self) -> &[(f64, f64)] {
        &self.control_points
    }
}

/// Ground-truth gesture placement inside a synthetic session.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub label: GestureLabel,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Annotation {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    fn overlaps(&self, other: &Annotation) -> bool {
        self.start_s < other.end_s() && other.start_s < self.end_s()
    }
}

/// A synthesized RSSI stream with its ground-truth annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub samples: Vec<RssiSample>,
    pub annotations: Vec<Annotation>,
    pub seed: u64,
    /// Uniform gesture spacing when the session was built by
    /// [`generate_dataset`]; hand-built sessions leave it unset.
    pub gap_s: Option<f64>,
}

impl SyntheticSession {
    /// Serializable session log with the metadata keys the ingest side
    /// expects (`start_time_ms`, `gap_s`, `labels` when annotated).
    pub fn to_session_log(&self) -> SessionLog {
        let mut log = SessionLog::new();
        log.metadata.insert("seed".into(), self.seed.to_string());
        if let (Some(gap), false) = (self.gap_s, self.annotations.is_empty()) {
            // Nominal slot times: gesture k was scheduled at gap * (k + 1),
            // whatever its realized placement inside the slot.
            log.metadata
                .insert("start_time_ms".into(), ((gap * 1000.0).round() as i64).to_string());
            log.metadata.insert("gap_s".into(), format!("{gap}"));
            let labels: Vec<&str> = self.annotations.iter().map(|a| a.label.as_str()).collect();
            log.metadata.insert("labels".into(), labels.join(","));
        }
        log.samples = self.samples.clone();
        log
    }

    fn last_time_s(&self) -> f64 {
        self.samples.last().map(|s| s.time_s()).unwrap_or(0.0)
    }
}

/// Offsets every sample inside `[start_s, start_s + duration]` by the
/// template profile and records the annotation.
///
/// Rejects placements that fall outside the stream or overlap an existing
/// annotation.
pub fn inject_gesture(
    session: &mut SyntheticSession,
    template: &GestureTemplate,
    start_s: f64,
) -> Result<()> {
    let annotation = Annotation {
        label: template.label,
        start_s,
        duration_s: template.duration_s,
    };
    if start_s < 0.0 || annotation.end_s() > session.last_time_s() {
        return Err(Error::InvalidParam(format!(
            "gesture [{:.3}, {:.3}] s does not fit inside the stream (ends {:.3} s)",
            start_s,
            annotation.end_s(),
            session.last_time_s()
        )));
    }
    if let Some(existing) = session.annotations.iter().find(|a| a.overlaps(&annotation)) {
        return Err(Error::InvalidParam(format!(
            "gesture at {:.3} s overlaps existing {} at {:.3} s",
            start_s, existing.label, existing.start_s
        )));
    }
    apply_profile(&mut session.samples, template, start_s, 1.0);
    session.annotations.push(annotation);
    session
        .annotations
        .sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).unwrap());
    Ok(())
}

fn apply_profile(samples: &mut [RssiSample], template: &GestureTemplate, start_s: f64, sign: f64) {
    let end_s = start_s + template.duration_s;
    for sample in samples.iter_mut() {
        let t = sample.time_s();
        if t >= start_s && t <= end_s {
            let u = (t - start_s) / template.duration_s;
            sample.rssi_dbm += sign * template.attenuation_db(u);
        }
    }
}

/// Removes a previously injected profile; used by tests to verify the
/// injection is a pure additive offset.
pub fn subtract_gesture(session: &mut SyntheticSession, template: &GestureTemplate, start_s: f64) {
    apply_profile(&mut session.samples, template, start_s, -1.0);
    session
        .annotations
        .retain(|a| !(a.label == template.label && a.start_s == start_s));
}

/// Per-instance gesture execution variability: humans neither start on the
/// metronome nor move identically twice.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureVariability {
    /// Uniform forward shift of each gesture inside its slot (s).
    pub placement_jitter_s: f64,
    /// Duration scaled by `U(1 - x, 1 + x)`.
    pub duration_scale: f64,
    /// Attenuation depths scaled by `U(1 - x, 1 + x)`.
    pub amplitude_scale: f64,
}

impl GestureVariability {
    /// Exact placement, identical executions.
    pub fn none() -> Self {
        Self { placement_jitter_s: 0.0, duration_scale: 0.0, amplitude_scale: 0.0 }
    }
}

impl Default for GestureVariability {
    fn default() -> Self {
        Self { placement_jitter_s: 0.5, duration_scale: 0.1, amplitude_scale: 0.1 }
    }
}

/// Builds a labeled session: `per_class_count` instances of every template in
/// randomized order, one gesture slot every `gap_s` seconds starting at
/// `gap_s`. Gestures land exactly on their slots; see
/// [`generate_dataset_with`] for realized execution variability.
pub fn generate_dataset(
    params: &ChannelParams,
    profile: &SamplingProfile,
    templates: &[GestureTemplate],
    per_class_count: usize,
    gap_s: f64,
    seed: u64,
) -> Result<SyntheticSession> {
    generate_dataset_with(
        params,
        profile,
        templates,
        per_class_count,
        gap_s,
        &GestureVariability::none(),
        seed,
    )
}

/// [`generate_dataset`] with per-instance execution variability. Annotations
/// record the realized placements and durations.
pub fn generate_dataset_with(
    params: &ChannelParams,
    profile: &SamplingProfile,
    templates: &[GestureTemplate],
    per_class_count: usize,
    gap_s: f64,
    variability: &GestureVariability,
    seed: u64,
) -> Result<SyntheticSession> {
    if templates.is_empty() {
        return Err(Error::InvalidParam("no gesture templates supplied".into()));
    }
    if per_class_count == 0 {
        return Err(Error::InvalidParam("per_class_count must be positive".into()));
    }
    if !(0.0..1.0).contains(&variability.duration_scale)
        || !(0.0..1.0).contains(&variability.amplitude_scale)
        || !(variability.placement_jitter_s >= 0.0)
    {
        return Err(Error::InvalidParam("invalid gesture variability".into()));
    }
    let max_duration = templates
        .iter()
        .map(|t| t.duration_s)
        .fold(0.0f64, f64::max)
        * (1.0 + variability.duration_scale)
        + variability.placement_jitter_s;
    if !(gap_s >= max_duration) {
        return Err(Error::InvalidParam(format!(
            "gap_s ({gap_s}) must cover the longest realized gesture ({max_duration:.2} s)"
        )));
    }

    let mut track = ChannelTrack::new(params, &FadingDynamics::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let total = templates.len() * per_class_count;
    let mut order: Vec<usize> = (0..templates.len())
        .flat_map(|i| std::iter::repeat(i).take(per_class_count))
        .collect();
    order.shuffle(&mut rng);

    let duration_s = gap_s * (total as f64 + 1.0);
    let timestamps = generate_timestamps(profile, duration_s, &mut rng)?;
    let samples: Vec<RssiSample> = timestamps
        .into_iter()
        .map(|ts| RssiSample::new(ts, track.value_at(ts as f64, &mut rng)))
        .collect();

    let mut session = SyntheticSession {
        samples,
        annotations: Vec::new(),
        seed,
        gap_s: Some(gap_s),
    };
    let exact = variability == &GestureVariability::none();
    for (k, &template_idx) in order.iter().enumerate() {
        let slot = gap_s * (k as f64 + 1.0);
        if exact {
            inject_gesture(&mut session, &templates[template_idx], slot)?;
        } else {
            let jitter = if variability.placement_jitter_s > 0.0 {
                rng.random_range(0.0..variability.placement_jitter_s)
            } else {
                0.0
            };
            let ds = variability.duration_scale;
            let dur = if ds > 0.0 { rng.random_range(1.0 - ds..1.0 + ds) } else { 1.0 };
            let amp_s = variability.amplitude_scale;
            let amp = if amp_s > 0.0 { rng.random_range(1.0 - amp_s..1.0 + amp_s) } else { 1.0 };
            let realized = templates[template_idx].scaled(dur, amp);
            inject_gesture(&mut session, &realized, slot + jitter)?;
        }
    }
    if profile.quantize_dbm {
        for sample in &mut session.samples {
            sample.rssi_dbm = sample.rssi_dbm.round();
        }
    }
    Ok(session)
}

/// Sporadic non-gesture RSSI disturbances for false-positive soak streams:
/// slow ramps and shallow dips of the kind produced by people moving in the
/// room or an AP adjusting transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundEvents {
    /// Mean spacing between events (s).
    pub mean_interval_s: f64,
    /// Event duration range (s).
    pub duration_range_s: (f64, f64),
    /// Event depth range (dB, positive values attenuate).
    pub depth_range_db: (f64, f64),
}

impl Default for BackgroundEvents {
    fn default() -> Self {
        Self {
            mean_interval_s: 45.0,
            duration_range_s: (3.0, 8.0),
            depth_range_db: (1.5, 4.0),
        }
    }
}

/// A gesture-free stream with background perturbations, for noise soaks.
pub fn generate_noise_stream(
    params: &ChannelParams,
    profile: &SamplingProfile,
    duration_s: f64,
    events: Option<&BackgroundEvents>,
    seed: u64,
) -> Result<SyntheticSession> {
    let mut track = ChannelTrack::new(params, &FadingDynamics::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timestamps = generate_timestamps(profile, duration_s, &mut rng)?;
    let mut samples: Vec<RssiSample> = timestamps
        .into_iter()
        .map(|ts| RssiSample::new(ts, track.value_at(ts as f64, &mut rng)))
        .collect();

    if let Some(events) = events {
        let mut t = events.mean_interval_s * rng.random_range(0.5..1.5);
        while t < duration_s {
            let dur = rng.random_range(events.duration_range_s.0..events.duration_range_s.1);
            let depth = rng.random_range(events.depth_range_db.0..events.depth_range_db.1);
            // Slow curves, not gesture-sharp edges: a gradual dip (person
            // passing), a gradual rise (AP raising output power), or a short
            // shallow flutter (typing near the device).
            let shape = rng.random_range(0..3u32);
            let end = (t + dur).min(duration_s);
            for sample in samples.iter_mut() {
                let ts = sample.time_s();
                if ts >= t && ts <= end {
                    let u = (ts - t) / dur;
                    let offset = match shape {
                        0 => -depth * (std::f64::consts::PI * u).sin(),
                        1 => depth * (std::f64::consts::PI * u).sin(),
                        _ => {
                            0.4 * depth
                                * (std::f64::consts::PI * u).sin()
                                * (6.0 * std::f64::consts::PI * u).sin()
                        }
                    };
                    sample.rssi_dbm += offset;
                }
            }
            t += events.mean_interval_s * rng.random_range(0.5..1.5);
        }
    }
    if profile.quantize_dbm {
        for sample in &mut samples {
            sample.rssi_dbm = sample.rssi_dbm.round();
        }
    }
    Ok(SyntheticSession { samples, annotations: Vec::new(), seed, gap_s: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet_params() -> ChannelParams {
        ChannelParams {
            shadow_sigma_db: 0.0,
            nakagami_m: f64::INFINITY,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn path_loss_at_one_meter_is_reference() {
        let p = ChannelParams { l0_dbm: -40.0, path_loss_exp: 2.0, ..quiet_params() };
        assert_eq!(path_loss_mean(&p, 1.0).unwrap(), -40.0);
    }

    #[test]
    fn path_loss_decade() {
        let p = ChannelParams { l0_dbm: -40.0, path_loss_exp: 2.0, ..quiet_params() };
        assert_eq!(path_loss_mean(&p, 10.0).unwrap(), -60.0);
    }

    #[test]
    fn path_loss_room_separation() {
        // -40 - 30 log10(4.5), the two-room AP separation.
        let p = ChannelParams { l0_dbm: -40.0, path_loss_exp: 3.0, ..quiet_params() };
        let rss = path_loss_mean(&p, 4.5).unwrap();
        assert!((rss - -59.60).abs() < 0.01, "got {rss}");
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        let p = quiet_params();
        assert!(path_loss_mean(&p, 0.0).is_err());
        assert!(path_loss_mean(&p, -3.0).is_err());
    }

    #[test]
    fn noiseless_sample_equals_mean() {
        let p = quiet_params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let expected = path_loss_mean(&p, p.distance_m).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_rssi(&p, &mut rng).unwrap(), expected);
        }
    }

    #[test]
    fn shadowing_moments_match() {
        let p = ChannelParams { shadow_sigma_db: 2.0, ..quiet_params() };
        let sampler = ChannelSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let expected_mean = path_loss_mean(&p, p.distance_m).unwrap();
        assert!((mean - expected_mean).abs() < 0.05, "mean {mean} vs {expected_mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.05, "std {} vs 2.0", var.sqrt());
    }

    #[test]
    fn multipath_is_roughly_zero_mean_and_vanishes_for_large_m() {
        let p = ChannelParams { shadow_sigma_db: 0.0, nakagami_m: 4.0, ..ChannelParams::default() };
        let sampler = ChannelSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean_offset: f64 = (0..n)
            .map(|_| sampler.sample(&mut rng) - sampler.mean_dbm())
            .sum::<f64>()
            / n as f64;
        assert!(mean_offset.abs() < 0.8, "multipath mean offset {mean_offset}");

        let tight = ChannelParams { nakagami_m: 1e6, ..p };
        let tight_sampler = ChannelSampler::new(&tight).unwrap();
        let spread: f64 = (0..1000)
            .map(|_| (tight_sampler.sample(&mut rng) - tight_sampler.mean_dbm()).abs())
            .fold(0.0, f64::max);
        assert!(spread < 0.1, "large-m multipath spread {spread}");
    }

    #[test]
    fn beacon_profile_rate() {
        let profile = SamplingProfile::beacon_only();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = generate_timestamps(&profile, 600.0, &mut rng).unwrap();
        let rate = ts.len() as f64 / 600.0;
        assert!((9.0..=10.0).contains(&rate), "beacon rate {rate}");
    }

    #[test]
    fn induced_profile_rate() {
        let profile = SamplingProfile::induced();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = generate_timestamps(&profile, 60.0, &mut rng).unwrap();
        let rate = ts.len() as f64 / 60.0;
        assert!((rate - 200.0).abs() < 5.0, "induced rate {rate}");
    }

    #[test]
    fn timestamps_strictly_increase() {
        for seed in 0..5u64 {
            let profile = SamplingProfile {
                jitter_fraction: 0.9,
                ..SamplingProfile::induced()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ts = generate_timestamps(&profile, 30.0, &mut rng).unwrap();
            assert!(ts.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn swipe_template_returns_to_baseline() {
        let t = GestureTemplate::swipe();
        assert_eq!(t.attenuation_db(0.0), 0.0);
        assert_eq!(t.attenuation_db(1.0), 0.0);
        // Interrupted plateau: deep holds and full recoveries alternate in
        // the middle half.
        let depths: Vec<f64> = (0..=100)
            .map(|k| t.attenuation_db(0.25 + 0.5 * k as f64 / 100.0))
            .collect();
        assert!(depths.iter().any(|&d| d <= -5.9));
        assert!(depths.iter().any(|&d| d >= -0.1));
    }

    #[test]
    fn push_ends_at_plateau_pull_starts_at_plateau() {
        let push = GestureTemplate::push();
        assert_eq!(push.attenuation_db(1.0), -6.0);
        assert_eq!(push.attenuation_db(0.0), 0.0);
        let pull = GestureTemplate::pull();
        assert_eq!(pull.attenuation_db(0.0), -6.0);
        assert_eq!(pull.attenuation_db(1.0), 0.0);
    }

    fn flat_session(duration_s: f64, level: f64) -> SyntheticSession {
        let samples = (0..=(duration_s * 100.0) as i64)
            .map(|k| RssiSample::new(k * 10, level))
            .collect();
        SyntheticSession { samples, annotations: Vec::new(), seed: 0, gap_s: None }
    }

    #[test]
    fn push_hold_phase_shifts_by_plateau() {
        let mut session = flat_session(10.0, -40.0);
        let template = GestureTemplate::push();
        inject_gesture(&mut session, &template, 2.0).unwrap();
        // Hold phase: normalized time in [0.1, 1.0] -> [2.5 s, 7.0 s].
        for s in &session.samples {
            let t = s.time_s();
            if t >= 2.6 && t <= 7.0 {
                assert_eq!(s.rssi_dbm, -46.0, "at {t}");
            }
            if t < 1.9 || t > 7.1 {
                assert_eq!(s.rssi_dbm, -40.0, "at {t}");
            }
        }
    }

    #[test]
    fn zero_amplitude_template_is_identity() {
        let mut session = flat_session(10.0, -50.0);
        let original = session.samples.clone();
        let template = GestureTemplate::new(
            GestureLabel::Swipe,
            1.0,
            vec![(0.0, 0.0), (1.0, 0.0)],
        )
        .unwrap();
        inject_gesture(&mut session, &template, 3.0).unwrap();
        assert_eq!(session.samples, original);
    }

    #[test]
    fn inject_then_subtract_recovers_stream() {
        let params = ChannelParams::default();
        let profile = SamplingProfile::induced();
        let sampler = ChannelSampler::new(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ts = generate_timestamps(&profile, 20.0, &mut rng).unwrap();
        let samples: Vec<RssiSample> = ts
            .into_iter()
            .map(|t| RssiSample::new(t, sampler.sample(&mut rng)))
            .collect();
        let mut session = SyntheticSession {
            samples: samples.clone(),
            annotations: Vec::new(),
            seed: 11,
            gap_s: None,
        };
        let template = GestureTemplate::swipe();
        inject_gesture(&mut session, &template, 5.0).unwrap();
        subtract_gesture(&mut session, &template, 5.0);
        for (a, b) in session.samples.iter().zip(&samples) {
            assert_eq!(a.timestamp_ms, b.timestamp_ms);
            assert!((a.rssi_dbm - b.rssi_dbm).abs() < 1e-12);
        }
        assert!(session.annotations.is_empty());
    }

    #[test]
    fn inject_rejects_overlap_and_out_of_range() {
        let mut session = flat_session(10.0, -40.0);
        let template = GestureTemplate::push();
        inject_gesture(&mut session, &template, 2.0).unwrap();
        assert!(inject_gesture(&mut session, &template, 3.0).is_err());
        assert!(inject_gesture(&mut session, &template, 9.0).is_err());
        assert!(inject_gesture(&mut session, &template, -1.0).is_err());
    }

    #[test]
    fn dataset_annotation_count_and_spacing() {
        let params = quiet_params();
        let profile = SamplingProfile::induced();
        let templates = GestureTemplate::defaults();
        let session = generate_dataset(&params, &profile, &templates, 4, 10.0, 5).unwrap();
        assert_eq!(session.annotations.len(), 12);
        for (k, a) in session.annotations.iter().enumerate() {
            assert!((a.start_s - (10.0 + 10.0 * k as f64)).abs() < 1e-9);
        }
        let mut counts = std::collections::BTreeMap::new();
        for a in &session.annotations {
            *counts.entry(a.label).or_insert(0usize) += 1;
        }
        assert!(counts.values().all(|&c| c == 4));
    }

    #[test]
    fn dataset_is_deterministic_under_seed() {
        let params = ChannelParams::default();
        let profile = SamplingProfile::induced();
        let templates = GestureTemplate::defaults();
        let a = generate_dataset(&params, &profile, &templates, 2, 10.0, 9).unwrap();
        let b = generate_dataset(&params, &profile, &templates, 2, 10.0, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&params, &profile, &templates, 2, 10.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_rejects_small_gap() {
        let params = quiet_params();
        let profile = SamplingProfile::induced();
        let templates = GestureTemplate::defaults();
        assert!(generate_dataset(&params, &profile, &templates, 1, 1.0, 0).is_err());
        assert!(generate_dataset(&params, &profile, &templates, 0, 10.0, 0).is_err());
    }

    #[test]
    fn quantized_dataset_reports_integer_dbm() {
        let params = ChannelParams::default();
        let profile = SamplingProfile { quantize_dbm: true, ..SamplingProfile::induced() };
        let session =
            generate_dataset(&params, &profile, &GestureTemplate::defaults(), 1, 10.0, 3).unwrap();
        assert!(session.samples.iter().all(|s| s.rssi_dbm.fract() == 0.0));
    }

    #[test]
    fn noise_stream_has_no_annotations() {
        let params = ChannelParams::default();
        let profile = SamplingProfile::induced();
        let session = generate_noise_stream(
            &params,
            &profile,
            120.0,
            Some(&BackgroundEvents::default()),
            4,
        )
        .unwrap();
        assert!(session.annotations.is_empty());
        assert!(session.samples.len() > 20_000);
    }

    proptest! {
        #[test]
        fn path_loss_strictly_decreasing(r1 in 0.1f64..100.0, delta in 0.01f64..50.0) {
            let p = ChannelParams { path_loss_exp: 2.5, ..quiet_params() };
            let near = path_loss_mean(&p, r1).unwrap();
            let far = path_loss_mean(&p, r1 + delta).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn template_profile_bounded_by_control_points(u in 0.0f64..=1.0) {
            for template in GestureTemplate::defaults() {
                let lo = template
                    .control_points()
                    .iter()
                    .map(|p| p.1)
                    .fold(f64::INFINITY, f64::min);
                let v = template.attenuation_db(u);
                prop_assert!(v <= 0.0 + 1e-12 && v >= lo - 1e-12);
            }
        }

        #[test]
        fn dataset_annotations_never_overlap(seed in 0u64..20) {
            let params = quiet_params();
            let profile = SamplingProfile { induced_rate_hz: 50.0, ..SamplingProfile::induced() };
            let session = generate_dataset(
                &params,
                &profile,
                &GestureTemplate::defaults(),
                2,
                10.0,
                seed,
            ).unwrap();
            for pair in session.annotations.windows(2) {
                prop_assert!(pair[0].end_s() <= pair[1].start_s);
            }
        }
    }
}
