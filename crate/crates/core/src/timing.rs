//! Camera and stage timelines.
//!
//! Camera frame `i` is exposed at `offset + i * dt_camera` on the stage clock,
//! stage sample `j` at `j * dt_stage`. Stage angles at camera times come from
//! linear interpolation between the two bracketing stage samples.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Pixel;

pub const DEFAULT_CAMERA_FPS: f64 = 155.0;
pub const DEFAULT_STAGE_HZ: f64 = 1000.0;

/// Minimum number of still frames used to define a target's home position.
pub const MIN_HOME_FRAMES: usize = 10;

const STILL_TOLERANCE_RAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub dt_camera: f64,
    pub dt_stage: f64,
    /// Camera delay with respect to the stages, s.
    pub offset: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            dt_camera: 1.0 / DEFAULT_CAMERA_FPS,
            dt_stage: 1.0 / DEFAULT_STAGE_HZ,
            offset: 0.0,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_camera > 0.0 && self.dt_camera.is_finite()) {
            return Err(Error::InvalidInput("camera period must be positive".into()));
        }
        if !(self.dt_stage > 0.0 && self.dt_stage.is_finite()) {
            return Err(Error::InvalidInput("stage period must be positive".into()));
        }
        if !(self.offset.abs() < 1.0) {
            return Err(Error::InvalidInput(format!(
                "camera-stage offset {} s must be below 1 s in magnitude",
                self.offset
            )));
        }
        Ok(())
    }
}

/// `t_i = offset + i * dt_camera`.
pub fn camera_time(frame: usize, cfg: &TimingConfig) -> f64 {
    cfg.offset + frame as f64 * cfg.dt_camera
}

/// Uniformly sampled stage angles. Sample `first_index + k` holds `angles[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub stage_id: String,
    pub first_index: i64,
    pub angles: Vec<f64>,
    pub rate_hz: f64,
}

impl StageLog {
    pub fn new(stage_id: impl Into<String>, first_index: i64, angles: Vec<f64>, rate_hz: f64) -> Result<Self> {
        let log = StageLog {
            stage_id: stage_id.into(),
            first_index,
            angles,
            rate_hz,
        };
        log.validate()?;
        Ok(log)
    }

    /// Build from `(index, angle)` pairs, which must be gapless and increasing.
    pub fn from_samples(stage_id: impl Into<String>, samples: &[(i64, f64)], rate_hz: f64) -> Result<Self> {
        let stage_id = stage_id.into();
        let Some(&(first, _)) = samples.first() else {
            return Err(Error::InvalidInput(format!("stage log '{stage_id}' is empty")));
        };
        for (k, &(j, _)) in samples.iter().enumerate() {
            if j != first + k as i64 {
                return Err(Error::InvalidInput(format!(
                    "stage log '{stage_id}': sample index {j} breaks the gapless sequence at position {k}"
                )));
            }
        }
        StageLog::new(stage_id, first, samples.iter().map(|s| s.1).collect(), rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() {
            return Err(Error::InvalidInput(format!("stage log '{}' is empty", self.stage_id)));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidInput("stage rate must be positive".into()));
        }
        if let Some(k) = self.angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "stage log '{}': non-finite angle at sample {}",
                self.stage_id,
                self.first_index + k as i64
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        (self.first_index + k as i64) as f64 / self.rate_hz
    }

    pub fn start_time(&self) -> f64 {
        self.sample_time(0)
    }

    pub fn end_time(&self) -> f64 {
        self.sample_time(self.len() - 1)
    }

    pub fn samples(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.angles
            .iter()
            .enumerate()
            .map(move |(k, &a)| (self.first_index + k as i64, a))
    }

    /// Number of leading samples identical to the first one.
    pub fn leading_still_samples(&self) -> usize {
        let home = self.angles[0];
        self.angles
            .iter()
            .take_while(|a| (*a - home).abs() <= STILL_TOLERANCE_RAD)
            .count()
    }

    /// Mean angular rate over the whole log, rad/s.
    pub fn mean_rate(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        (self.angles[self.len() - 1] - self.angles[0]) / (self.end_time() - self.start_time())
    }

    pub fn angle_span(&self) -> f64 {
        let (lo, hi) = self
            .angles
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        hi - lo
    }
}

/// Linear interpolation of the stage angle at time `t` (stage clock).
pub fn stage_angle_at(log: &StageLog, t: f64) -> Result<f64> {
    let pos = t * log.rate_hz - log.first_index as f64;
    let last = (log.len() - 1) as f64;
    // Half a nanosample of slack absorbs rounding of t on exact sample times.
    const SLACK: f64 = 1e-9;
    if !(pos >= -SLACK && pos <= last + SLACK) {
        return Err(Error::OutOfRange {
            t,
            start: log.start_time(),
            end: log.end_time(),
        });
    }
    let pos = pos.clamp(0.0, last);
    let k = (pos.floor() as usize).min(log.len().saturating_sub(2));
    if log.len() == 1 {
        return Ok(log.angles[0]);
    }
    let frac = pos - k as f64;
    Ok(log.angles[k] + frac * (log.angles[k + 1] - log.angles[k]))
}

/// Pixel positions of one target over frames sampled every `period_s`
/// (sample `i` sits at `i * period_s` on the track's own clock).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrack {
    pub target_id: u32,
    pub samples: Vec<(i64, Pixel)>,
    pub period_s: f64,
    pub home_position: Pixel,
}

impl TargetTrack {
    pub fn new(target_id: u32, samples: Vec<(i64, Pixel)>, period_s: f64) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput(format!(
                "track {target_id}: frame indices must be strictly increasing"
            )));
        }
        let home_position = samples.first().map(|s| s.1).unwrap_or_else(Pixel::zeros);
        Ok(TargetTrack {
            target_id,
            samples,
            period_s,
            home_position,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.samples[k].0 as f64 * self.period_s
    }

    /// Linearly interpolated position at time `t` (track clock), if inside the track span.
    pub fn position_at(&self, t: f64) -> Option<Pixel> {
        let n = self.samples.len();
        if n == 0 {
            return None;
        }
        let (t0, t1) = (self.time(0), self.time(n - 1));
        let eps = 1e-9 * self.period_s;
        if t < t0 - eps || t > t1 + eps {
            return None;
        }
        if n == 1 {
            return Some(self.samples[0].1);
        }
        let k = self
            .samples
            .partition_point(|s| (s.0 as f64 * self.period_s) <= t)
            .clamp(1, n - 1);
        let (ta, tb) = (self.time(k - 1), self.time(k));
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        Some(self.samples[k - 1].1 + w * (self.samples[k].1 - self.samples[k - 1].1))
    }
}

/// Resample a track onto the grid `k / rate_hz` covered by its time span.
pub fn resample_track(track: &TargetTrack, rate_hz: f64) -> Result<TargetTrack> {
    if track.samples.len() < 2 {
        return Err(Error::EmptyTrack);
    }
    let t0 = track.time(0);
    let t1 = track.time(track.samples.len() - 1);
    let first = (t0 * rate_hz - 1e-9).ceil() as i64;
    let last = (t1 * rate_hz + 1e-9).floor() as i64;
    let period = 1.0 / rate_hz;
    let samples = (first..=last)
        .filter_map(|k| track.position_at(k as f64 * period).map(|p| (k, p)))
        .collect();
    Ok(TargetTrack {
        target_id: track.target_id,
        samples,
        period_s: period,
        home_position: track.home_position,
    })
}

/// Expected sign relation between stage angle and apparent target motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Targets move opposite to the camera rotation (a still scene seen by a rotating camera).
    #[default]
    Opposite,
    Same,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Opposite => -1.0,
            Polarity::Same => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OffsetOptions {
    pub polarity: Polarity,
    pub min_home_frames: usize,
}

impl Default for OffsetOptions {
    fn default() -> Self {
        OffsetOptions {
            polarity: Polarity::Opposite,
            min_home_frames: MIN_HOME_FRAMES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCorrelation {
    pub target_id: u32,
    pub lag_s: f64,
    /// `C(tau)` for `tau = m * dt_stage`, `m = 0..curve.len()`.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetEstimate {
    pub offset_s: f64,
    pub resolution_s: f64,
    /// Stage sample range (inclusive) of the restricted period.
    pub window: (i64, i64),
    pub targets: Vec<TargetCorrelation>,
}

/// Indices (into `angles`) of the first two crests of a periodic signal.
fn first_two_maxima(angles: &[f64]) -> Option<(usize, usize)> {
    let (lo, hi) = angles
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    let span = hi - lo;
    if !(span > 0.0) {
        return None;
    }
    let crest = hi - 0.05 * span;
    let mid = lo + 0.5 * span;
    let mut peaks = Vec::with_capacity(2);
    let mut armed = true;
    let mut best: Option<usize> = None;
    for (k, &a) in angles.iter().enumerate() {
        if armed && a >= crest {
            if best.is_none_or(|b| a > angles[b]) {
                best = Some(k);
            }
        } else if armed {
            if let Some(b) = best.take() {
                peaks.push(b);
                armed = false;
                if peaks.len() == 2 {
                    break;
                }
            }
        }
        if !armed && a < mid {
            armed = true;
        }
    }
    // A crest still open at the end of the log is not a complete maximum.
    match peaks[..] {
        [a, b, ..] => Some((a, b)),
        _ => None,
    }
}

/// Camera-stage offset from the cross-correlation of stage angle and target motion.
///
/// Each track is expressed on the camera clock (frame `i` at `i * dt_camera`),
/// normalized by its home position (mean over the still lead-in), resampled to
/// the stage rate, and correlated against one stage period:
/// `C(tau) = mean_j phi(t_j) * u(t_j - tau)` for `tau` in `[0, period / 2]`.
pub fn estimate_offset(
    log: &StageLog,
    tracks: &[TargetTrack],
    opts: &OffsetOptions,
) -> Result<OffsetEstimate> {
    log.validate()?;
    if tracks.is_empty() {
        return Err(Error::InsufficientData("no target tracks".into()));
    }
    let (p1, p2) = first_two_maxima(&log.angles).ok_or(Error::NoPeriodFound)?;
    let max_lag = (p2 - p1) / 2;
    let dt = log.dt();
    let still_end = log.sample_time(log.leading_still_samples() - 1);
    let home_until = still_end - max_lag as f64 * dt;
    let window: Vec<(f64, f64)> = (p1..=p2).map(|k| (log.sample_time(k), log.angles[k])).collect();

    let mut per_target: Vec<TargetCorrelation> = tracks
        .par_iter()
        .map(|track| {
            let home: Vec<Pixel> = track
                .samples
                .iter()
                .enumerate()
                .filter(|(k, _)| track.time(*k) <= home_until)
                .map(|(_, s)| s.1)
                .collect();
            if home.len() < opts.min_home_frames {
                return Err(Error::NoHomeSegment {
                    frames: home.len(),
                    required: opts.min_home_frames,
                });
            }
            let home_u = home.iter().map(|p| p.x).sum::<f64>() / home.len() as f64;
            let mut normalized = track.clone();
            normalized.home_position = Pixel::new(home_u, home.iter().map(|p| p.y).sum::<f64>() / home.len() as f64);
            let resampled = resample_track(&normalized, log.rate_hz)?;
            let sign = opts.polarity.sign();
            let first_k = resampled.samples[0].0;
            let values: Vec<f64> = resampled.samples.iter().map(|s| sign * (s.1.x - home_u)).collect();

            let mut curve = Vec::with_capacity(max_lag + 1);
            for m in 0..=max_lag {
                let mut sum = 0.0;
                let mut count = 0usize;
                for &(t, phi) in &window {
                    let k = ((t - m as f64 * dt) * log.rate_hz).round() as i64 - first_k;
                    if k >= 0 && (k as usize) < values.len() {
                        sum += phi * values[k as usize];
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(Error::InsufficientData(format!(
                        "track {} does not overlap the stage period at lag {m}",
                        track.target_id
                    )));
                }
                curve.push(sum / count as f64);
            }
            let best = curve
                .iter()
                .enumerate()
                .fold(0usize, |best, (m, &c)| if c > curve[best] { m } else { best });
            Ok(TargetCorrelation {
                target_id: track.target_id,
                lag_s: best as f64 * dt,
                curve,
            })
        })
        .collect::<Result<_>>()?;
    per_target.sort_by_key(|c| c.target_id);

    let mut lags: Vec<f64> = per_target.iter().map(|c| c.lag_s).collect();
    lags.sort_by(f64::total_cmp);
    if lags[lags.len() - 1] - lags[0] > 2.0 * dt + 1e-12 {
        return Err(Error::InconsistentTargets {
            lags_s: per_target.iter().map(|c| c.lag_s).collect(),
        });
    }
    let offset_s = lags[(lags.len() - 1) / 2];
    Ok(OffsetEstimate {
        offset_s,
        resolution_s: dt,
        window: (log.first_index + p1 as i64, log.first_index + p2 as i64),
        targets: per_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn camera_times() {
        let mut cfg = TimingConfig::default();
        assert_eq!(camera_time(0, &cfg), 0.0);
        assert_relative_eq!(camera_time(155, &cfg), 1.0, epsilon = 1e-12);
        cfg.offset = 0.003;
        assert_eq!(camera_time(1, &cfg), 0.003 + 1.0 / 155.0);
    }

    #[test]
    fn timing_validation() {
        let cfg = TimingConfig {
            offset: 1.5,
            ..TimingConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TimingConfig::default().validate().is_ok());
    }

    #[test]
    fn stage_log_must_be_gapless() {
        let err = StageLog::from_samples("L", &[(0, 0.0), (1, 0.1), (3, 0.2)], 1000.0).unwrap_err();
        assert!(err.to_string().contains("gapless"));
    }

    #[test]
    fn interpolation_on_samples_and_lines() {
        let angles: Vec<f64> = (0..100).map(|j| 0.002 * j as f64 - 0.05).collect();
        let log = StageLog::new("L", 0, angles.clone(), 1000.0).unwrap();
        assert_eq!(stage_angle_at(&log, 0.017).unwrap(), angles[17]);
        for k in 0..500 {
            let t = 0.000_193 * k as f64;
            if t > log.end_time() {
                break;
            }
            let expected = 2.0 * t - 0.05;
            assert!((stage_angle_at(&log, t).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_error_bound_on_sinusoid() {
        let omega = 2.0 * std::f64::consts::PI * 0.5;
        let amp = 0.1;
        let angles: Vec<f64> = (0..3000).map(|j| amp * (omega * j as f64 * 1e-3).sin()).collect();
        let log = StageLog::new("L", 0, angles, 1000.0).unwrap();
        let bound = amp * omega * omega / 8.0 * 1e-6;
        for j in 0..2999 {
            let t = (j as f64 + 0.5) * 1e-3;
            let err = (stage_angle_at(&log, t).unwrap() - amp * (omega * t).sin()).abs();
            assert!(err < bound, "t={t} err={err} bound={bound}");
        }
    }

    #[test]
    fn interpolation_refuses_extrapolation() {
        let log = StageLog::new("L", 10, vec![0.0; 20], 1000.0).unwrap();
        assert!(matches!(stage_angle_at(&log, 0.0095), Err(Error::OutOfRange { .. })));
        assert!(matches!(stage_angle_at(&log, 0.0295), Err(Error::OutOfRange { .. })));
        assert!(stage_angle_at(&log, 0.029).is_ok());
    }

    #[test]
    fn resample_identity_and_midpoint() {
        let samples: Vec<(i64, Pixel)> = (0..20).map(|i| (i, Pixel::new(i as f64 * 3.0, 1.0))).collect();
        let track = TargetTrack::new(4, samples.clone(), 1.0 / 155.0).unwrap();
        let same = resample_track(&track, 155.0).unwrap();
        assert_eq!(same.samples.len(), samples.len());
        for (a, b) in same.samples.iter().zip(&samples) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).norm() < 1e-9);
        }

        let two = TargetTrack::new(1, vec![(0, Pixel::zeros()), (1, Pixel::new(10.0, 0.0))], 1.0).unwrap();
        let r = resample_track(&two, 1000.0).unwrap();
        assert_eq!(r.samples.len(), 1001);
        assert!((r.samples[500].1.x - 5.0).abs() < 1e-12);
    }

    #[test]
    fn resample_ramp_is_exact() {
        let speed = 37.5;
        let samples: Vec<(i64, Pixel)> =
            (0..155).map(|i| (i, Pixel::new(speed * i as f64 / 155.0 + 3.0, 0.0))).collect();
        let r = resample_track(&TargetTrack::new(0, samples, 1.0 / 155.0).unwrap(), 1000.0).unwrap();
        for (k, p) in &r.samples {
            let t = *k as f64 * 1e-3;
            assert!((p.x - (speed * t + 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_needs_two_frames() {
        let one = TargetTrack::new(0, vec![(0, Pixel::zeros())], 0.01).unwrap();
        assert!(matches!(resample_track(&one, 1000.0), Err(Error::EmptyTrack)));
    }

    #[test]
    fn maxima_of_periodic_signal() {
        let angles: Vec<f64> = (0..5000).map(|j| (j as f64 * 0.002).sin()).collect();
        let (a, b) = first_two_maxima(&angles).unwrap();
        let period = 2.0 * std::f64::consts::PI / 0.002;
        assert!((b as f64 - a as f64 - period).abs() <= 1.0);
        assert!(first_two_maxima(&vec![0.3; 100]).is_none());
    }

    // Sinusoidal stage, targets read the angle with a known camera delay.
    fn sinusoid_case(delay: f64, gains: &[f64]) -> (StageLog, Vec<TargetTrack>) {
        let rate = 1000.0;
        let hold = 0.5;
        let omega = 2.0 * std::f64::consts::PI * 1.5;
        let amp = 1f64.to_radians();
        let phi = |t: f64| if t < hold { 0.0 } else { amp * (omega * (t - hold)).sin() };
        let angles: Vec<f64> = (0..3000).map(|j| phi(j as f64 / rate)).collect();
        let log = StageLog::new("L", 0, angles, rate).unwrap();
        let dt_c = 1.0 / 155.0;
        let tracks = gains
            .iter()
            .enumerate()
            .map(|(id, g)| {
                let samples = (0..440)
                    .map(|i| {
                        let t = delay + i as f64 * dt_c;
                        (i as i64, Pixel::new(200.0 - g * phi(t) * 6300.0, 40.0))
                    })
                    .collect();
                TargetTrack::new(id as u32, samples, dt_c).unwrap()
            })
            .collect();
        (log, tracks)
    }

    #[test]
    fn offset_of_sinusoidal_motion() {
        let (log, tracks) = sinusoid_case(0.003, &[1.0, 0.8, 1.3]);
        let est = estimate_offset(&log, &tracks, &OffsetOptions::default()).unwrap();
        assert!((est.offset_s - 0.003).abs() < 0.5e-3, "{}", est.offset_s);
        let (log, tracks) = sinusoid_case(0.0, &[1.0]);
        let est = estimate_offset(&log, &tracks, &OffsetOptions::default()).unwrap();
        assert!(est.offset_s.abs() <= 1e-3);
    }

    #[test]
    fn offset_invariant_under_amplitude_scaling() {
        let (log, a) = sinusoid_case(0.004, &[1.0]);
        let (_, b) = sinusoid_case(0.004, &[7.5]);
        let ea = estimate_offset(&log, &a, &OffsetOptions::default()).unwrap();
        let eb = estimate_offset(&log, &b, &OffsetOptions::default()).unwrap();
        assert_eq!(ea.offset_s, eb.offset_s);
    }

    #[test]
    fn offset_detects_inconsistent_targets() {
        let (log, mut tracks) = sinusoid_case(0.003, &[1.0, 1.0]);
        let (_, late) = sinusoid_case(0.030, &[1.0]);
        tracks[1] = TargetTrack { target_id: 1, ..late[0].clone() };
        assert!(matches!(
            estimate_offset(&log, &tracks, &OffsetOptions::default()),
            Err(Error::InconsistentTargets { .. })
        ));
    }

    #[test]
    fn offset_needs_a_period() {
        let log = StageLog::new("L", 0, (0..2000).map(|j| j as f64 * 1e-4).collect(), 1000.0).unwrap();
        let (_, tracks) = sinusoid_case(0.0, &[1.0]);
        assert!(matches!(
            estimate_offset(&log, &tracks, &OffsetOptions::default()),
            Err(Error::NoPeriodFound)
        ));
    }
}
