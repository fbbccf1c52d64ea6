//! Dynamic focal calibration.
//!
//! With one camera rotating at constant speed `v` and the other still, an
//! error `dOmega` on the rotating camera's focal length makes the
//! reconstructed depth of a still target drift linearly in time:
//! `dZ/dt = -v Z^2 dOmega / (Omega d)`. The drift is recovered either from a
//! line fit of per-target slopes against `<Z^2>`, or by sweeping the focal
//! length and keeping the value where the drift vanishes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::geometry::{RigConfig, Side};
use crate::reconstruct::{reconstruct_sequence, DetectionSet, ReconstructOptions, Trajectory3D};
use crate::timing::{StageLog, TimingConfig};

pub const MIN_SLOPE_FRAMES: usize = 10;
pub const MIN_DOMEGA_R_SQUARED: f64 = 0.9;

/// Below this angular span a stage counts as still.
const STILL_SPAN_RAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZSlope {
    pub target_id: u32,
    /// Least-squares `dZ_3D/dt`, m/s.
    pub slope_m_s: f64,
    /// Time mean of `Z_3D^2`, m^2.
    pub mean_z2_m2: f64,
    pub n_frames: usize,
    pub r_squared: f64,
}

/// Per-target depth drift: OLS slope of `Z_3D(t)` with `t = frame * dt`.
pub fn fit_z_slopes(trajs: &[Trajectory3D], dt: f64) -> Result<Vec<ZSlope>> {
    trajs
        .iter()
        .map(|tr| {
            if tr.points.len() < MIN_SLOPE_FRAMES {
                return Err(Error::TooFewFrames {
                    target: tr.target_id,
                    frames: tr.points.len(),
                    required: MIN_SLOPE_FRAMES,
                });
            }
            let t: Vec<f64> = tr.points.iter().map(|(f, _)| *f as f64 * dt).collect();
            let z: Vec<f64> = tr.points.iter().map(|(_, q)| q.z).collect();
            let fit = fit_line(&t, &z)?;
            Ok(ZSlope {
                target_id: tr.target_id,
                slope_m_s: fit.slope,
                mean_z2_m2: z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64,
                n_frames: z.len(),
                r_squared: fit.r_squared,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomegaEstimate {
    /// Believed minus true focal length, px.
    pub delta_focal_px: f64,
    /// Believed focal length with the estimated error removed.
    pub corrected_focal_px: f64,
    /// Line fit of `dZ_3D/dt` against `<Z_3D^2>`.
    pub fit: LineFit,
}

/// `dOmega = -k Omega d / v`, with `k` the slope of `dZ_3D/dt` against `<Z_3D^2>`.
///
/// `v` is the speed of the single rotating camera in the sign convention where
/// the relative rotation `d(phi_R - phi_L)/dt` equals `-v`.
///
/// A trend the line cannot explain (`R^2` below 0.9 while the slope is
/// significant) is rejected. A slope consistent with zero is accepted whatever
/// its `R^2`, since it just means there is no focal error to find.
pub fn estimate_domega(slopes: &[ZSlope], v: f64, focal_px: f64, baseline_m: f64) -> Result<DomegaEstimate> {
    if slopes.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "focal fit needs at least 3 targets, got {}",
            slopes.len()
        )));
    }
    if v == 0.0 || !v.is_finite() {
        return Err(Error::InvalidInput("rotation speed must be non-zero".into()));
    }
    let x: Vec<f64> = slopes.iter().map(|s| s.mean_z2_m2).collect();
    let y: Vec<f64> = slopes.iter().map(|s| s.slope_m_s).collect();
    let fit = fit_line(&x, &y)?;
    let significant = fit.slope.abs() > 3.0 * fit.slope_se;
    if significant && fit.r_squared < MIN_DOMEGA_R_SQUARED {
        return Err(Error::BadFit {
            r_squared: fit.r_squared,
            threshold: MIN_DOMEGA_R_SQUARED,
        });
    }
    let delta_focal_px = -fit.slope * focal_px * baseline_m / v;
    Ok(DomegaEstimate {
        delta_focal_px,
        corrected_focal_px: focal_px - delta_focal_px,
        fit,
    })
}

/// The single camera whose stage moves; errors unless exactly one does.
pub fn rotating_camera(left: &StageLog, right: &StageLog) -> Result<Side> {
    match (left.angle_span() > STILL_SPAN_RAD, right.angle_span() > STILL_SPAN_RAD) {
        (true, false) => Ok(Side::Left),
        (false, true) => Ok(Side::Right),
        (true, true) => Err(Error::InvalidInput(
            "both stages move; focal calibration needs a single rotating camera".into(),
        )),
        (false, false) => Err(Error::InvalidInput(
            "no stage moves; focal calibration needs a rotating camera".into(),
        )),
    }
}

/// The `v` of [`estimate_domega`] for a single-camera rotation run.
pub fn single_camera_speed(left: &StageLog, right: &StageLog) -> f64 {
    left.mean_rate() - right.mean_rate()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub camera: Side,
    pub min_px: f64,
    pub max_px: f64,
    pub step_px: f64,
    pub reconstruct: ReconstructOptions,
}

impl SweepConfig {
    pub fn new(camera: Side) -> Self {
        SweepConfig {
            camera,
            min_px: 5900.0,
            max_px: 6700.0,
            step_px: 1.0,
            reconstruct: ReconstructOptions::default(),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.max_px - self.min_px) / self.step_px + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.min_px + k as f64 * self.step_px).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSweep {
    pub target_id: u32,
    pub abs_slope_m_s: Vec<f64>,
    pub argmin_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalCalibrationResult {
    pub camera: Side,
    pub believed_focal_px: f64,
    pub grid_px: Vec<f64>,
    /// Mean over targets of `|dZ_3D/dt|` at each grid value.
    pub mean_abs_slope_m_s: Vec<f64>,
    pub targets: Vec<TargetSweep>,
    /// Grid argmin refined by a parabola through the three bracketing samples.
    pub omega_star_px: f64,
    /// Believed minus calibrated focal length.
    pub delta_focal_px: f64,
}

fn parabolic_vertex(y0: f64, y1: f64, y2: f64) -> f64 {
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    }
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v < values[best] { k } else { best })
}

/// Re-run the reconstruction over a grid of focal lengths for the rotating
/// camera and keep the value where depth drift is smallest.
pub fn focal_sweep(
    det: &DetectionSet,
    rig: &RigConfig,
    left_log: &StageLog,
    right_log: &StageLog,
    timing: &TimingConfig,
    cfg: &SweepConfig,
) -> Result<FocalCalibrationResult> {
    if !(cfg.step_px > 0.0 && cfg.max_px > cfg.min_px && cfg.min_px > 0.0) {
        return Err(Error::InvalidInput("invalid focal sweep range".into()));
    }
    let grid = cfg.grid();
    if grid.len() < 3 {
        return Err(Error::InvalidInput("focal sweep needs at least 3 grid values".into()));
    }
    let per_omega: Vec<Vec<ZSlope>> = grid
        .par_iter()
        .map(|&omega| {
            let mut trial = *rig;
            trial.camera_mut(cfg.camera).intrinsics.focal_px = omega;
            let trajs = reconstruct_sequence(det, &trial, left_log, right_log, timing, &cfg.reconstruct)?;
            fit_z_slopes(&trajs, timing.dt_camera)
        })
        .collect::<Result<_>>()?;

    let ids: Vec<u32> = per_omega[0].iter().map(|s| s.target_id).collect();
    if ids.is_empty() {
        return Err(Error::InsufficientData("no target reconstructed".into()));
    }
    let mean_abs: Vec<f64> = per_omega
        .iter()
        .map(|s| s.iter().map(|z| z.slope_m_s.abs()).sum::<f64>() / s.len() as f64)
        .collect();
    let targets: Vec<TargetSweep> = ids
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let abs_slope: Vec<f64> = per_omega.iter().map(|s| s[k].slope_m_s.abs()).collect();
            TargetSweep {
                target_id: id,
                argmin_px: grid[argmin(&abs_slope)],
                abs_slope_m_s: abs_slope,
            }
        })
        .collect();

    let k = argmin(&mean_abs);
    if k == 0 || k == grid.len() - 1 {
        return Err(Error::NoInteriorMinimum { omega_px: grid[k] });
    }
    let minima: Vec<f64> = targets.iter().map(|t| t.argmin_px).collect();
    let (lo, hi) = minima
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)));
    if hi - lo > 2.0 * cfg.step_px + 1e-9 {
        return Err(Error::InconsistentMinima { minima_px: minima });
    }
    let omega_star_px = grid[k] + cfg.step_px * parabolic_vertex(mean_abs[k - 1], mean_abs[k], mean_abs[k + 1]);
    let believed = rig.camera(cfg.camera).intrinsics.focal_px;
    Ok(FocalCalibrationResult {
        camera: cfg.camera,
        believed_focal_px: believed,
        grid_px: grid,
        mean_abs_slope_m_s: mean_abs,
        targets,
        omega_star_px,
        delta_focal_px: believed - omega_star_px,
    })
}
