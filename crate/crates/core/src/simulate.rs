//! Synthetic acquisitions with known ground truth.
//!
//! Every generator is deterministic in its seed. Per-frame noise draws come
//! from their own ChaCha stream, so frames can be produced in parallel and
//! still match a serial run bit for bit.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    project, projection_matrix, CameraIntrinsics, CameraStaticPose, Pixel, Point3,
    RigConfig, RotationMatrix, Side,
};
use crate::reconstruct::{DetectionSet, FrameDetections};
use crate::timing::{camera_time, StageLog, TimingConfig};

pub const DEFAULT_NOISE_SIGMA_PX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileMode {
    /// Rest-to-rest trapezoidal strokes between `+amplitude` and `-amplitude`.
    Periodic,
    /// `amplitude * sin(v_max / amplitude * t)`.
    Sinusoidal,
    /// `phi(t) = speed * t`.
    ConstantSpeed(f64),
    Still,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProfile {
    pub amplitude_rad: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub mode: ProfileMode,
    /// Still lead-in at the home angle before the motion starts, s.
    pub hold_s: f64,
}

/// Rest-to-rest move over `distance` with bounded speed and acceleration.
#[derive(Debug, Clone, Copy)]
struct Stroke {
    distance: f64,
    accel: f64,
    accel_time: f64,
    cruise_time: f64,
}

impl Stroke {
    fn new(distance: f64, v: f64, a: f64) -> Self {
        if v * v / a <= distance {
            Stroke {
                distance,
                accel: a,
                accel_time: v / a,
                cruise_time: (distance - v * v / a) / v,
            }
        } else {
            Stroke {
                distance,
                accel: a,
                accel_time: (distance / a).sqrt(),
                cruise_time: 0.0,
            }
        }
    }

    fn duration(&self) -> f64 {
        2.0 * self.accel_time + self.cruise_time
    }

    fn position(&self, t: f64) -> f64 {
        let (a, ta, tc) = (self.accel, self.accel_time, self.cruise_time);
        let vpeak = a * ta;
        if t <= 0.0 {
            0.0
        } else if t <= ta {
            0.5 * a * t * t
        } else if t <= ta + tc {
            0.5 * a * ta * ta + vpeak * (t - ta)
        } else if t < self.duration() {
            let rem = self.duration() - t;
            self.distance - 0.5 * a * rem * rem
        } else {
            self.distance
        }
    }
}

impl MotionProfile {
    pub fn still() -> Self {
        MotionProfile {
            amplitude_rad: 0.0,
            max_speed: 1.0,
            max_accel: 1.0,
            mode: ProfileMode::Still,
            hold_s: 0.0,
        }
    }

    pub fn constant_speed(speed_rad_s: f64) -> Self {
        MotionProfile {
            amplitude_rad: 0.0,
            max_speed: speed_rad_s.abs().max(f64::MIN_POSITIVE),
            max_accel: 1.0,
            mode: ProfileMode::ConstantSpeed(speed_rad_s),
            hold_s: 0.0,
        }
    }

    pub fn periodic(amplitude_rad: f64, max_speed: f64, max_accel: f64) -> Self {
        MotionProfile {
            amplitude_rad,
            max_speed,
            max_accel,
            mode: ProfileMode::Periodic,
            hold_s: 0.0,
        }
    }

    /// 2 deg, 1 deg/s, 0.5 deg/s^2.
    pub fn slow() -> Self {
        Self::periodic(2f64.to_radians(), 1f64.to_radians(), 0.5f64.to_radians())
    }

    /// 10 deg, 10 deg/s, 10 deg/s^2.
    pub fn moderate() -> Self {
        Self::periodic(10f64.to_radians(), 10f64.to_radians(), 10f64.to_radians())
    }

    /// 18 deg, 36 deg/s, 72 deg/s^2.
    pub fn fast() -> Self {
        Self::periodic(18f64.to_radians(), 36f64.to_radians(), 72f64.to_radians())
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "slow" => Some(Self::slow()),
            "moderate" => Some(Self::moderate()),
            "fast" => Some(Self::fast()),
            _ => None,
        }
    }

    pub fn with_hold(mut self, hold_s: f64) -> Self {
        self.hold_s = hold_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.amplitude_rad, self.max_speed, self.max_accel, self.hold_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.amplitude_rad < 0.0 || self.hold_s < 0.0 || !(self.max_speed > 0.0) {
            return Err(Error::InvalidInput(format!("invalid motion profile {self:?}")));
        }
        match self.mode {
            ProfileMode::Periodic => {
                if !(self.max_accel > 0.0 && self.amplitude_rad > 0.0) {
                    return Err(Error::InvalidInput(
                        "periodic profile needs positive amplitude and acceleration".into(),
                    ));
                }
                let turn = self.max_speed * self.max_speed / self.max_accel;
                let stroke = 2.0 * self.amplitude_rad;
                if turn > stroke {
                    return Err(Error::InfeasibleProfile {
                        turn_rad: turn,
                        stroke_rad: stroke,
                    });
                }
            }
            ProfileMode::Sinusoidal => {
                if !(self.amplitude_rad > 0.0) {
                    return Err(Error::InvalidInput("sinusoidal profile needs positive amplitude".into()));
                }
                let accel = self.max_speed * self.max_speed / self.amplitude_rad;
                if self.max_accel > 0.0 && accel > self.max_accel * (1.0 + 1e-12) {
                    return Err(Error::InfeasibleProfile {
                        turn_rad: self.max_speed * self.max_speed / self.max_accel,
                        stroke_rad: self.amplitude_rad,
                    });
                }
            }
            ProfileMode::ConstantSpeed(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidInput("constant speed must be finite".into()));
                }
            }
            ProfileMode::Still => {}
        }
        Ok(())
    }

    fn strokes(&self) -> (Stroke, Stroke) {
        (
            Stroke::new(self.amplitude_rad, self.max_speed, self.max_accel),
            Stroke::new(2.0 * self.amplitude_rad, self.max_speed, self.max_accel),
        )
    }

    /// Duration of one full oscillation, if the profile is periodic.
    pub fn period(&self) -> Option<f64> {
        match self.mode {
            ProfileMode::Periodic => Some(2.0 * self.strokes().1.duration()),
            ProfileMode::Sinusoidal => {
                Some(2.0 * std::f64::consts::PI * self.amplitude_rad / self.max_speed)
            }
            _ => None,
        }
    }

    /// Exact stage angle at time `t` (stage clock).
    pub fn angle_at(&self, t: f64) -> f64 {
        let t = t - self.hold_s;
        if t <= 0.0 {
            return 0.0;
        }
        match self.mode {
            ProfileMode::Still => 0.0,
            ProfileMode::ConstantSpeed(v) => v * t,
            ProfileMode::Sinusoidal => {
                self.amplitude_rad * (self.max_speed / self.amplitude_rad * t).sin()
            }
            ProfileMode::Periodic => {
                let (half, full) = self.strokes();
                if t <= half.duration() {
                    return half.position(t);
                }
                let rest = t - half.duration();
                let n = (rest / full.duration()).floor();
                let within = rest - n * full.duration();
                let travelled = full.position(within);
                if (n as i64) % 2 == 0 {
                    self.amplitude_rad - travelled
                } else {
                    -self.amplitude_rad + travelled
                }
            }
        }
    }
}

/// Sample a profile at `rate_hz` over `[0, duration_s]`.
pub fn generate_profile(
    stage_id: &str,
    profile: &MotionProfile,
    rate_hz: f64,
    duration_s: f64,
) -> Result<StageLog> {
    profile.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::InvalidInput("duration must be positive".into()));
    }
    if let Some(period) = profile.period() {
        if duration_s + 1e-12 < period {
            return Err(Error::InvalidInput(format!(
                "duration {duration_s} s shorter than one period ({period} s)"
            )));
        }
    }
    let n = (duration_s * rate_hz + 1e-9).floor() as usize + 1;
    let angles = (0..n).map(|j| profile.angle_at(j as f64 / rate_hz)).collect();
    StageLog::new(stage_id, 0, angles, rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub id: u32,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub targets: Vec<Target>,
    pub rig: RigConfig,
    pub timing: TimingConfig,
    pub left_profile: MotionProfile,
    pub right_profile: MotionProfile,
    pub noise_sigma: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Scene {
    pub fn profile(&self, side: Side) -> &MotionProfile {
        match side {
            Side::Left => &self.left_profile,
            Side::Right => &self.right_profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rig.validate()?;
        self.timing.validate()?;
        self.left_profile.validate()?;
        self.right_profile.validate()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput("noise sigma must be non-negative".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidInput("duration must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidInput("scene has no targets".into()));
        }
        let mut ids: Vec<u32> = self.targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate target id".into()));
        }
        Ok(())
    }

    /// Camera frames whose exposure time falls within `[0, duration]` of the stage clock.
    pub fn frame_range(&self) -> std::ops::RangeInclusive<usize> {
        let dt = self.timing.dt_camera;
        let first = if self.timing.offset < 0.0 {
            (-self.timing.offset / dt - 1e-9).ceil() as usize
        } else {
            0
        };
        let last = ((self.duration_s - self.timing.offset) / dt + 1e-9).floor().max(0.0) as usize;
        first..=last
    }

    /// Set each camera's home yaw so the targets' mean bearing sits on the
    /// optical axis at the midpoint of that camera's motion.
    pub fn center_yaws(&mut self) {
        for side in Side::BOTH {
            let mid = 0.5
                * (self.profile(side).angle_at(0.0) + self.profile(side).angle_at(self.duration_s));
            let c = self.rig.camera_center(side);
            let bearing = self
                .targets
                .iter()
                .map(|t| (t.position.x - c.x).atan2(t.position.z - c.z))
                .sum::<f64>()
                / self.targets.len() as f64;
            self.rig.camera_mut(side).pose.yaw = bearing - mid;
        }
    }
}

/// Calibration errors applied to the parameters the reconstruction believes in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorInjection {
    pub delta_baseline_m: f64,
    /// Added to the right camera's yaw.
    pub delta_yaw_rad: f64,
    pub delta_focal_left_px: f64,
    pub delta_focal_right_px: f64,
    /// Added to the believed camera-stage offset.
    pub delta_offset_s: f64,
    /// Standard deviation of the stage home position at each acquisition.
    pub home_jitter_sigma_rad: f64,
}

impl ErrorInjection {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.delta_baseline_m,
            self.delta_yaw_rad,
            self.delta_focal_left_px,
            self.delta_focal_right_px,
            self.delta_offset_s,
            self.home_jitter_sigma_rad,
        ];
        if all.iter().any(|v| !v.is_finite()) || self.home_jitter_sigma_rad < 0.0 {
            return Err(Error::InvalidInput("injection values must be finite".into()));
        }
        Ok(())
    }

    pub fn delta_focal(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.delta_focal_left_px,
            Side::Right => self.delta_focal_right_px,
        }
    }
}

/// Believed rig and timing: the true ones with the injected errors added.
pub fn apply_injection(
    rig: &RigConfig,
    timing: &TimingConfig,
    inject: &ErrorInjection,
) -> (RigConfig, TimingConfig) {
    let mut rig = *rig;
    rig.baseline_m += inject.delta_baseline_m;
    rig.right.pose.yaw += inject.delta_yaw_rad;
    rig.left.intrinsics.focal_px += inject.delta_focal_left_px;
    rig.right.intrinsics.focal_px += inject.delta_focal_right_px;
    let mut timing = *timing;
    timing.offset += inject.delta_offset_s;
    (rig, timing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub positions: BTreeMap<u32, Point3>,
    /// Laser-style pairwise distances, quantized to 1 mm, keyed `(a, b)` with `a < b`.
    pub distances: BTreeMap<(u32, u32), f64>,
    /// Home-position error of each stage during this acquisition, rad.
    pub home_offsets: [f64; 2],
}

impl GroundTruth {
    pub fn from_positions(positions: BTreeMap<u32, Point3>) -> Self {
        let ids: Vec<u32> = positions.keys().copied().collect();
        let mut distances = BTreeMap::new();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let d = (positions[&a] - positions[&b]).norm();
                distances.insert((a, b), quantize_mm(d));
            }
        }
        GroundTruth {
            positions,
            distances,
            home_offsets: [0.0; 2],
        }
    }

    pub fn distance(&self, a: u32, b: u32) -> Option<f64> {
        self.distances.get(&(a.min(b), a.max(b))).copied()
    }
}

fn quantize_mm(d: f64) -> f64 {
    (d * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone)]
pub struct Acquisition {
    pub detections: DetectionSet,
    pub left_log: StageLog,
    pub right_log: StageLog,
    pub truth: GroundTruth,
}

impl Acquisition {
    pub fn log(&self, side: Side) -> &StageLog {
        match side {
            Side::Left => &self.left_log,
            Side::Right => &self.right_log,
        }
    }
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma is validated non-negative")
}

/// Render detections of the still targets as seen by the true rig.
pub fn synth_detections(scene: &Scene, inject: &ErrorInjection) -> Result<Acquisition> {
    scene.validate()?;
    inject.validate()?;
    let rate = 1.0 / scene.timing.dt_stage;
    let left_log = generate_profile("left", &scene.left_profile, rate, scene.duration_s)?;
    let right_log = generate_profile("right", &scene.right_profile, rate, scene.duration_s)?;

    let mut jitter_rng = frame_rng(scene.seed, 0);
    let jitter = normal(inject.home_jitter_sigma_rad);
    let home_offsets = [jitter.sample(&mut jitter_rng), jitter.sample(&mut jitter_rng)];
    let noise = normal(scene.noise_sigma);

    let frames: Vec<FrameDetections> = scene
        .frame_range()
        .into_par_iter()
        .map(|frame| {
            let t = camera_time(frame, &scene.timing);
            let mut rng = frame_rng(scene.seed, frame as u64 + 1);
            let mut out = FrameDetections::new(frame);
            for (k, side) in Side::BOTH.into_iter().enumerate() {
                let phi = scene.profile(side).angle_at(t) + home_offsets[k];
                let p = scene.rig.projection(side, phi);
                let intr = &scene.rig.camera(side).intrinsics;
                for target in &scene.targets {
                    let out_of_view = Error::TargetOutOfView {
                        frame,
                        target: target.id,
                        camera: side,
                    };
                    if crate::geometry::depth(&p, &target.position) <= 0.0 {
                        return Err(out_of_view);
                    }
                    let ideal = project(&p, &target.position)?;
                    let observed = intr.distort(&ideal)
                        + Pixel::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    if !intr.in_sensor(&observed) {
                        return Err(out_of_view);
                    }
                    out.insert(side, target.id, observed);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let positions = scene.targets.iter().map(|t| (t.id, t.position)).collect();
    let mut truth = GroundTruth::from_positions(positions);
    truth.home_offsets = home_offsets;
    Ok(Acquisition {
        detections: DetectionSet { frames },
        left_log,
        right_log,
        truth,
    })
}

/// Targets spread in depth along the rig's midline, raised to sit in front
/// of cameras pitched up by `pitch_rad`.
///
/// Lateral and vertical offsets alternate in sign so the layout is not
/// degenerate, but pair separations stay dominated by depth.
pub fn depth_ladder(count: usize, z_min: f64, z_max: f64, pitch_rad: f64) -> Vec<Target> {
    (0..count)
        .map(|k| {
            let f = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            let z = z_min + f * (z_max - z_min);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let x = sign * 0.6 + 0.1 * k as f64;
            let y = -z * pitch_rad.tan() + sign * 0.4;
            Target {
                id: k as u32 + 1,
                position: Point3::new(x, y, z),
            }
        })
        .collect()
}

/// Stage-mounted checkerboard seen by a still camera, rotating in the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BoardScene {
    pub intrinsics: CameraIntrinsics,
    pub cols: usize,
    pub rows: usize,
    /// Corner spacing in pixels at the board's distance.
    pub spacing_px: f64,
    pub profile: MotionProfile,
    pub timing: TimingConfig,
    pub duration_s: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl BoardScene {
    /// 13x19 corner board, 100 px spacing, centered on the principal point.
    pub fn standard(profile: MotionProfile, timing: TimingConfig, duration_s: f64) -> Self {
        BoardScene {
            intrinsics: CameraIntrinsics::ideal(6300.0),
            cols: 19,
            rows: 13,
            spacing_px: 100.0,
            profile,
            timing,
            duration_s,
            noise_sigma: DEFAULT_NOISE_SIGMA_PX,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoardAcquisition {
    /// Corner pixels per frame, corner order fixed across frames.
    pub frames: Vec<(usize, Vec<Pixel>)>,
    pub log: StageLog,
}

pub fn synth_board_sequence(scene: &BoardScene) -> Result<BoardAcquisition> {
    scene.intrinsics.validate()?;
    scene.timing.validate()?;
    let rate = 1.0 / scene.timing.dt_stage;
    let log = generate_profile("stage", &scene.profile, rate, scene.duration_s)?;
    let depth = 2.0;
    let f = scene.intrinsics.focal_px;
    // Board corners in the camera frame; the stage axis is the optical axis.
    let corners: Vec<Point3> = (0..scene.rows)
        .flat_map(|r| (0..scene.cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let x = (c as f64 - 0.5 * (scene.cols - 1) as f64) * scene.spacing_px;
            let y = (r as f64 - 0.5 * (scene.rows - 1) as f64) * scene.spacing_px;
            Point3::new(x * depth / f, y * depth / f, depth)
        })
        .collect();
    let camera = CameraStaticPose::new(Side::Left, 0.0, 0.0, 0.0);
    let p = projection_matrix(&scene.intrinsics, &camera, 0.0, &Point3::zeros());
    let noise = normal(scene.noise_sigma);
    let last = ((scene.duration_s - scene.timing.offset) / scene.timing.dt_camera + 1e-9).floor() as usize;
    let frames = (0..=last)
        .into_par_iter()
        .map(|frame| {
            let t = camera_time(frame, &scene.timing);
            let board = *RotationMatrix::about_z(scene.profile.angle_at(t)).matrix();
            let mut rng = frame_rng(scene.seed, frame as u64 + 1);
            let pixels = corners
                .iter()
                .map(|q| {
                    let ideal = project(&p, &(board * q))?;
                    let obs = scene.intrinsics.distort(&ideal)
                        + Pixel::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    if !scene.intrinsics.in_sensor(&obs) {
                        return Err(Error::InvalidInput(format!(
                            "board corner leaves the sensor at frame {frame}"
                        )));
                    }
                    Ok(obs)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((frame, pixels))
        })
        .collect::<Result<_>>()?;
    Ok(BoardAcquisition { frames, log })
}

/// Repeated homing of one stage-mounted camera looking at still targets.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeScene {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraStaticPose,
    pub center: Point3,
    pub targets: Vec<Target>,
    pub snapshots: usize,
    pub jitter_sigma_rad: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// One map of corner pixels per home return.
pub type Snapshots = Vec<BTreeMap<u32, Pixel>>;

/// One detection snapshot per homing; returns the snapshots and the true home angles.
pub fn synth_home_snapshots(scene: &HomeScene) -> Result<(Snapshots, Vec<f64>)> {
    scene.intrinsics.validate()?;
    let jitter = normal(scene.jitter_sigma_rad);
    let noise = normal(scene.noise_sigma);
    let mut homes = Vec::with_capacity(scene.snapshots);
    let mut snaps = Vec::with_capacity(scene.snapshots);
    for s in 0..scene.snapshots {
        let mut rng = frame_rng(scene.seed, s as u64 + 1);
        let phi0 = jitter.sample(&mut rng);
        let p = projection_matrix(&scene.intrinsics, &scene.pose, phi0, &scene.center);
        let mut snap = BTreeMap::new();
        for t in &scene.targets {
            let px = scene.intrinsics.distort(&project(&p, &t.position)?)
                + Pixel::new(noise.sample(&mut rng), noise.sample(&mut rng));
            snap.insert(t.id, px);
        }
        homes.push(phi0);
        snaps.push(snap);
    }
    Ok((snaps, homes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraConfig, CameraIntrinsics, CameraStaticPose};

    // Closed-form trapezoid written independently of `Stroke`: position after
    // time t of a rest-to-rest move with accel a, cruise speed v, distance D.
    fn trapezoid_oracle(d: f64, v: f64, a: f64, t: f64) -> f64 {
        let ta = v / a;
        let tt = d / v + ta;
        if t < ta {
            a * t * t / 2.0
        } else if t < tt - ta {
            v * (t - ta / 2.0)
        } else if t < tt {
            d - a * (tt - t) * (tt - t) / 2.0
        } else {
            d
        }
    }

    #[test]
    fn still_profile_is_zero() {
        let log = generate_profile("s", &MotionProfile::still(), 1000.0, 1.0).unwrap();
        assert!(log.angles.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn constant_speed_ramp() {
        let v = 6f64.to_radians();
        let log = generate_profile("s", &MotionProfile::constant_speed(v), 1000.0, 2.0).unwrap();
        assert_eq!(log.len(), 2001);
        for (j, &a) in log.angles.iter().enumerate() {
            let t = j as f64 / 1000.0;
            assert!((a - 0.10471975511965977 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn slow_preset_bounds() {
        let p = MotionProfile::slow();
        let period = p.period().unwrap();
        let log = generate_profile("s", &p, 1000.0, period).unwrap();
        let peak = log.angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - 2f64.to_radians()).abs() < 1e-9);
        let dt = 1e-3;
        let vmax = 1f64.to_radians();
        let amax = 0.5f64.to_radians();
        for w in log.angles.windows(2) {
            assert!(((w[1] - w[0]) / dt).abs() <= vmax + 1e-9);
        }
        for w in log.angles.windows(3) {
            assert!(((w[2] - 2.0 * w[1] + w[0]) / (dt * dt)).abs() <= amax + 1e-9);
        }
        // First full stroke against the independent closed form.
        let half = Stroke::new(p.amplitude_rad, p.max_speed, p.max_accel).duration();
        for j in 0..6000 {
            let t = j as f64 * 1e-3;
            let expected = p.amplitude_rad - trapezoid_oracle(2.0 * p.amplitude_rad, vmax, amax, t);
            assert!((p.angle_at(half + t) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_respect_limits() {
        for p in [MotionProfile::slow(), MotionProfile::moderate(), MotionProfile::fast()] {
            let log = generate_profile("s", &p, 1000.0, p.period().unwrap() * 1.5).unwrap();
            assert!(log.angles.iter().all(|a| a.abs() <= p.amplitude_rad + 1e-12));
            for w in log.angles.windows(3) {
                let acc = (w[2] - 2.0 * w[1] + w[0]) * 1e6;
                assert!(acc.abs() <= p.max_accel + 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_profile_is_reported() {
        let p = MotionProfile::periodic(0.01, 1.0, 1.0);
        assert!(matches!(
            generate_profile("s", &p, 1000.0, 10.0),
            Err(Error::InfeasibleProfile { .. })
        ));
    }

    #[test]
    fn duration_must_cover_a_period() {
        assert!(generate_profile("s", &MotionProfile::slow(), 1000.0, 1.0).is_err());
    }

    fn small_scene() -> Scene {
        let cam = |side, yaw| CameraConfig {
            pose: CameraStaticPose::new(side, yaw, 0.0, 0.0),
            intrinsics: CameraIntrinsics::ideal(6300.0),
        };
        Scene {
            targets: depth_ladder(7, 20.0, 40.0, 0.0),
            rig: RigConfig {
                baseline_m: 10.7,
                left: cam(Side::Left, 0.18),
                right: cam(Side::Right, -0.18),
            },
            timing: TimingConfig::default(),
            left_profile: MotionProfile::still(),
            right_profile: MotionProfile::still(),
            noise_sigma: 0.0,
            duration_s: 0.2,
            seed: 3,
        }
    }

    #[test]
    fn still_noiseless_frames_repeat_projection() {
        let scene = small_scene();
        let acq = synth_detections(&scene, &ErrorInjection::default()).unwrap();
        let p = scene.rig.projection(Side::Left, 0.0);
        let expected = project(&p, &scene.targets[2].position).unwrap();
        for f in &acq.detections.frames {
            assert_eq!(f.left[&3], expected);
        }
    }

    #[test]
    fn rotation_moves_targets_the_other_way() {
        let mut scene = small_scene();
        scene.left_profile = MotionProfile::constant_speed(6f64.to_radians());
        let acq = synth_detections(&scene, &ErrorInjection::default()).unwrap();
        let frames = &acq.detections.frames;
        for id in 1..=7 {
            let u0 = frames[0].left[&id].x;
            let u1 = frames[frames.len() - 1].left[&id].x;
            assert!(u1 < u0, "target {id}: {u0} -> {u1}");
            assert_eq!(frames[0].right[&id], frames[frames.len() - 1].right[&id]);
        }
    }

    #[test]
    fn out_of_view_fails_fast() {
        let mut scene = small_scene();
        scene.left_profile = MotionProfile::constant_speed(1.0);
        scene.duration_s = 1.0;
        let err = synth_detections(&scene, &ErrorInjection::default()).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfView { camera: Side::Left, .. }), "{err}");
    }

    #[test]
    fn deterministic_in_seed() {
        let mut scene = small_scene();
        scene.noise_sigma = 0.1;
        let a = synth_detections(&scene, &ErrorInjection::default()).unwrap();
        let b = synth_detections(&scene, &ErrorInjection::default()).unwrap();
        assert_eq!(a.detections, b.detections);
        scene.seed += 1;
        let c = synth_detections(&scene, &ErrorInjection::default()).unwrap();
        assert_ne!(a.detections, c.detections);
    }

    #[test]
    fn injection_perturbs_believed_parameters() {
        let scene = small_scene();
        let (rig, timing) = apply_injection(&scene.rig, &scene.timing, &ErrorInjection::default());
        assert_eq!(rig, scene.rig);
        assert_eq!(timing, scene.timing);

        let inject = ErrorInjection {
            delta_baseline_m: 0.1605,
            delta_yaw_rad: 0.003,
            ..Default::default()
        };
        let (rig, _) = apply_injection(&scene.rig, &scene.timing, &inject);
        assert!((rig.baseline_m - 10.8605).abs() < 1e-12);
        assert!((inject.delta_baseline_m / scene.rig.baseline_m - 0.015).abs() < 1e-12);
        assert_eq!(rig.right.pose.yaw, scene.rig.right.pose.yaw + 0.003);
        assert_eq!(rig.left.pose.yaw, scene.rig.left.pose.yaw);
    }

    #[test]
    fn truth_distances_are_a_metric() {
        let truth = GroundTruth::from_positions(
            depth_ladder(7, 20.0, 40.0, 0.1).into_iter().map(|t| (t.id, t.position)).collect(),
        );
        for a in 1..=7u32 {
            for b in 1..=7u32 {
                if a == b {
                    continue;
                }
                assert_eq!(truth.distance(a, b), truth.distance(b, a));
                for c in 1..=7u32 {
                    if c == a || c == b {
                        continue;
                    }
                    let (ab, bc, ac) = (
                        truth.distance(a, b).unwrap(),
                        truth.distance(b, c).unwrap(),
                        truth.distance(a, c).unwrap(),
                    );
                    // Quantization can cost up to 1 mm per edge.
                    assert!(ac <= ab + bc + 1e-3);
                }
            }
        }
    }

    #[test]
    fn centered_yaws_keep_motion_in_view() {
        let mut scene = small_scene();
        scene.left_profile = MotionProfile::constant_speed(6f64.to_radians());
        scene.right_profile = MotionProfile::constant_speed(6f64.to_radians());
        scene.duration_s = 2.0;
        scene.center_yaws();
        synth_detections(&scene, &ErrorInjection::default()).unwrap();
    }
}
