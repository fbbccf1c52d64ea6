//! Frame-by-frame stereo triangulation with time-dependent extrinsics.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Matrix4, RowVector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{depth, Pixel, Point3, ProjectionMatrix, RigConfig, Side};
use crate::timing::{camera_time, stage_angle_at, StageLog, TargetTrack, TimingConfig};

/// Detections of one camera frame, keyed by target id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame: usize,
    pub left: BTreeMap<u32, Pixel>,
    pub right: BTreeMap<u32, Pixel>,
}

impl FrameDetections {
    pub fn new(frame: usize) -> Self {
        FrameDetections {
            frame,
            ..Default::default()
        }
    }

    pub fn camera(&self, side: Side) -> &BTreeMap<u32, Pixel> {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn insert(&mut self, side: Side, target: u32, px: Pixel) {
        match side {
            Side::Left => self.left.insert(target, px),
            Side::Right => self.right.insert(target, px),
        };
    }

    /// Targets seen by both cameras in this frame.
    pub fn matched(&self) -> impl Iterator<Item = (u32, Pixel, Pixel)> + '_ {
        self.left
            .iter()
            .filter_map(|(id, l)| self.right.get(id).map(|r| (*id, *l, *r)))
    }
}

/// Matched image points of the two cameras, frames in increasing order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub frames: Vec<FrameDetections>,
}

impl DetectionSet {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn target_ids(&self) -> Vec<u32> {
        let ids: BTreeSet<u32> = self
            .frames
            .iter()
            .flat_map(|f| f.left.keys().chain(f.right.keys()).copied())
            .collect();
        ids.into_iter().collect()
    }

    /// Pixel track of one target in one camera on the camera clock.
    pub fn track(&self, side: Side, target: u32, frame_period_s: f64) -> Result<TargetTrack> {
        let samples = self
            .frames
            .iter()
            .filter_map(|f| f.camera(side).get(&target).map(|p| (f.frame as i64, *p)))
            .collect();
        TargetTrack::new(target, samples, frame_period_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory3D {
    pub target_id: u32,
    pub points: Vec<(usize, Point3)>,
}

impl Trajectory3D {
    pub fn mean(&self) -> Point3 {
        let sum = self.points.iter().fold(Point3::zeros(), |acc, (_, p)| acc + p);
        sum / self.points.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DltOptions {
    /// Condition each camera's equations around the observed pixel before solving.
    pub normalize: bool,
}

fn ray_direction(p: &ProjectionMatrix, q: &Pixel) -> Option<nalgebra::Vector3<f64>> {
    let m: Matrix3<f64> = p.left_block();
    m.try_inverse().map(|inv| inv * q.push(1.0))
}

/// Two-view linear triangulation: smallest right singular vector of the stacked system.
pub fn triangulate_dlt(
    p_left: &ProjectionMatrix,
    p_right: &ProjectionMatrix,
    q_left: &Pixel,
    q_right: &Pixel,
) -> Result<Point3> {
    triangulate_dlt_with(p_left, p_right, q_left, q_right, DltOptions::default())
}

pub fn triangulate_dlt_with(
    p_left: &ProjectionMatrix,
    p_right: &ProjectionMatrix,
    q_left: &Pixel,
    q_right: &Pixel,
    opts: DltOptions,
) -> Result<Point3> {
    let (Some(ray_l), Some(ray_r)) = (ray_direction(p_left, q_left), ray_direction(p_right, q_right)) else {
        return Err(Error::DegenerateGeometry);
    };
    let angle = ray_l.cross(&ray_r).norm().atan2(ray_l.dot(&ray_r));
    if angle.abs() < 1e-10 {
        return Err(Error::DegenerateGeometry);
    }

    let mut a = Matrix4::<f64>::zeros();
    for (k, (p, q)) in [(p_left, q_left), (p_right, q_right)].into_iter().enumerate() {
        let m = p.matrix();
        let (row0, row1, row2) = (m.row(0), m.row(1), m.row(2));
        let (mut r0, mut r1): (RowVector4<f64>, RowVector4<f64>) = (q.x * row2 - row0, q.y * row2 - row1);
        if opts.normalize {
            let scale = 0.5 * (row0.fixed_columns::<3>(0).norm() + row1.fixed_columns::<3>(0).norm());
            r0 /= scale;
            r1 /= scale;
        }
        a.set_row(2 * k, &r0);
        a.set_row(2 * k + 1, &r1);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateGeometry)?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("four singular values");
    let x = v_t.row(idx);
    if x[3].abs() < 1e-15 * x.norm() {
        return Err(Error::DegenerateGeometry);
    }
    let point = Point3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]);
    for (side, p) in [(Side::Left, p_left), (Side::Right, p_right)] {
        if depth(p, &point) <= 0.0 {
            return Err(Error::BehindCamera { camera: side });
        }
    }
    Ok(point)
}

/// Depth of a target for a rig with zero pitch and roll:
/// `Z = Omega d / (s - (alpha + phi) Omega)`, with `s = u_L - u_R`,
/// `alpha = alpha_R - alpha_L`, `phi = phi_R - phi_L`.
pub fn z_closed_form(focal_px: f64, baseline_m: f64, disparity_px: f64, alpha: f64, phi: f64) -> Result<f64> {
    let denominator = disparity_px - (alpha + phi) * focal_px;
    if denominator.abs() < 1e-9 {
        return Err(Error::DivergentDepth { denominator });
    }
    Ok(focal_px * baseline_m / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Remove radial distortion from detections before triangulating.
    pub undistort: bool,
    pub dlt: DltOptions,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            undistort: true,
            dlt: DltOptions::default(),
        }
    }
}

type FrameResult = Result<Vec<(u32, Point3)>>;

fn reconstruct_frame(
    frame: &FrameDetections,
    rig: &RigConfig,
    logs: [&StageLog; 2],
    timing: &TimingConfig,
    opts: &ReconstructOptions,
) -> FrameResult {
    let t = camera_time(frame.frame, timing);
    let ctx = |e: Error, target: Option<u32>| e.at_frame(frame.frame, target);
    let phi_l = stage_angle_at(logs[0], t).map_err(|e| ctx(e, None))?;
    let phi_r = stage_angle_at(logs[1], t).map_err(|e| ctx(e, None))?;
    let p_l = rig.projection(Side::Left, phi_l);
    let p_r = rig.projection(Side::Right, phi_r);
    frame
        .matched()
        .map(|(id, ql, qr)| {
            let (ql, qr) = if opts.undistort {
                (
                    rig.left.intrinsics.undistort(&ql).map_err(|e| ctx(e, Some(id)))?,
                    rig.right.intrinsics.undistort(&qr).map_err(|e| ctx(e, Some(id)))?,
                )
            } else {
                (ql, qr)
            };
            triangulate_dlt_with(&p_l, &p_r, &ql, &qr, opts.dlt)
                .map(|q| (id, q))
                .map_err(|e| ctx(e, Some(id)))
        })
        .collect()
}

/// Triangulate every matched target in every frame with the stage angles at the frame time.
pub fn reconstruct_sequence(
    det: &DetectionSet,
    rig: &RigConfig,
    left_log: &StageLog,
    right_log: &StageLog,
    timing: &TimingConfig,
    opts: &ReconstructOptions,
) -> Result<Vec<Trajectory3D>> {
    rig.validate()?;
    timing.validate()?;
    let per_frame: Vec<FrameResult> = det
        .frames
        .par_iter()
        .map(|f| reconstruct_frame(f, rig, [left_log, right_log], timing, opts))
        .collect();

    let mut tracks: BTreeMap<u32, Vec<(usize, Point3)>> = BTreeMap::new();
    for (frame, result) in det.frames.iter().zip(per_frame) {
        for (id, q) in result? {
            tracks.entry(id).or_default().push((frame.frame, q));
        }
    }
    Ok(tracks
        .into_iter()
        .map(|(target_id, points)| Trajectory3D { target_id, points })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub target_a: u32,
    pub target_b: u32,
    pub measured_m: f64,
    pub frames: Vec<usize>,
    pub reconstructed_m: Vec<f64>,
    /// `(reconstructed - measured) / measured` per frame.
    pub rel_err: Vec<f64>,
    pub zbar_m: f64,
    pub mean_rel_err: f64,
    pub mean_abs_rel_err: f64,
    /// Sample standard deviation of the per-frame relative error (0 for a single frame).
    pub std_rel_err: f64,
}

impl PairReport {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceReport {
    pub pairs: Vec<PairReport>,
}

impl DistanceReport {
    pub fn max_abs_mean_rel_err(&self) -> f64 {
        self.pairs.iter().map(|p| p.mean_rel_err.abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Reconstructed target-to-target distances against measured ones, for all unordered pairs.
pub fn pairwise_report(
    trajs: &[Trajectory3D],
    measured: &BTreeMap<(u32, u32), f64>,
) -> Result<DistanceReport> {
    if trajs.len() < 2 {
        return Err(Error::InsufficientData("at least two trajectories are needed".into()));
    }
    let mut sorted: Vec<&Trajectory3D> = trajs.iter().collect();
    sorted.sort_by_key(|t| t.target_id);
    let lookup = |a: u32, b: u32| measured.get(&(a.min(b), a.max(b))).copied();

    let mut pairs = Vec::new();
    for (i, ta) in sorted.iter().enumerate() {
        let by_frame: BTreeMap<usize, Point3> = ta.points.iter().copied().collect();
        for tb in &sorted[i + 1..] {
            let (a, b) = (ta.target_id, tb.target_id);
            let measured_m = lookup(a, b).ok_or(Error::MissingTruth { a, b })?;
            let mut frames = Vec::new();
            let mut reconstructed = Vec::new();
            let mut zsum = 0.0;
            for (frame, qb) in &tb.points {
                if let Some(qa) = by_frame.get(frame) {
                    frames.push(*frame);
                    reconstructed.push((qa - qb).norm());
                    zsum += 0.5 * (qa.z + qb.z);
                }
            }
            if frames.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "targets {a} and {b} share no reconstructed frame"
                )));
            }
            let rel_err: Vec<f64> = reconstructed.iter().map(|r| (r - measured_m) / measured_m).collect();
            let (mean_rel_err, std_rel_err) = mean_std(&rel_err);
            let mean_abs_rel_err = rel_err.iter().map(|e| e.abs()).sum::<f64>() / rel_err.len() as f64;
            pairs.push(PairReport {
                target_a: a,
                target_b: b,
                measured_m,
                zbar_m: zsum / frames.len() as f64,
                frames,
                reconstructed_m: reconstructed,
                rel_err,
                mean_rel_err,
                mean_abs_rel_err,
                std_rel_err,
            });
        }
    }
    Ok(DistanceReport { pairs })
}
