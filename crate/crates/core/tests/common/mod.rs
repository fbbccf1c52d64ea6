#![allow(dead_code)]

use comove::simulate::{depth_ladder, synth_detections, Acquisition, ErrorInjection, MotionProfile, Scene, Target};
use comove::{
    reconstruct_sequence, CameraConfig, CameraIntrinsics, CameraStaticPose, Pixel, Point3, RigConfig, Side,
    TimingConfig, Trajectory3D,
};

pub const BASELINE_M: f64 = 10.7;
pub const FOCAL_LEFT_PX: f64 = 6314.8;
pub const FOCAL_RIGHT_PX: f64 = 6300.29;

pub fn intrinsics(focal_px: f64) -> CameraIntrinsics {
    CameraIntrinsics::new(focal_px, Pixel::zeros(), 0.0, Pixel::new(3840.0, 2400.0)).unwrap()
}

/// True rig: both cameras pitched up by `pitch`, yaws set later from the targets.
pub fn rig(pitch: f64) -> RigConfig {
    RigConfig {
        baseline_m: BASELINE_M,
        left: CameraConfig {
            pose: CameraStaticPose::new(Side::Left, 0.0, pitch, 0.0),
            intrinsics: intrinsics(FOCAL_LEFT_PX),
        },
        right: CameraConfig {
            pose: CameraStaticPose::new(Side::Right, 0.0, pitch, 0.0),
            intrinsics: intrinsics(FOCAL_RIGHT_PX),
        },
    }
}

pub fn scene(
    targets: Vec<Target>,
    pitch: f64,
    left: MotionProfile,
    right: MotionProfile,
    duration_s: f64,
    seed: u64,
) -> Scene {
    let mut s = Scene {
        targets,
        rig: rig(pitch),
        timing: TimingConfig::default(),
        left_profile: left,
        right_profile: right,
        noise_sigma: 0.1,
        duration_s,
        seed,
    };
    s.center_yaws();
    s
}

/// Still cameras, seven targets spread in depth over `[z_min, z_max]`.
pub fn static_scene(z_min: f64, z_max: f64, pitch: f64, seed: u64) -> Scene {
    scene(
        depth_ladder(7, z_min, z_max, pitch),
        pitch,
        MotionProfile::still(),
        MotionProfile::still(),
        1.0,
        seed,
    )
}

/// Only `side` rotates, at `speed` rad/s; seven targets at 20-40 m.
pub fn single_rotation_scene(side: Side, speed: f64, seed: u64) -> Scene {
    single_rotation_scene_at(side, speed, 20.0, 40.0, seed)
}

pub fn single_rotation_scene_at(side: Side, speed: f64, z_min: f64, z_max: f64, seed: u64) -> Scene {
    let moving = MotionProfile::constant_speed(speed);
    let (l, r) = match side {
        Side::Left => (moving, MotionProfile::still()),
        Side::Right => (MotionProfile::still(), moving),
    };
    scene(depth_ladder(7, z_min, z_max, 0.0), 0.0, l, r, 2.0, seed)
}

pub fn believed(scene: &Scene, inject: &ErrorInjection) -> (RigConfig, TimingConfig) {
    comove::simulate::apply_injection(&scene.rig, &scene.timing, inject)
}

/// Simulate with `inject`, then reconstruct with the believed parameters.
pub fn run(scene: &Scene, inject: &ErrorInjection) -> (Acquisition, Vec<Trajectory3D>) {
    let acq = synth_detections(scene, inject).unwrap();
    let (rig, timing) = believed(scene, inject);
    let trajs = reconstruct_sequence(
        &acq.detections,
        &rig,
        &acq.left_log,
        &acq.right_log,
        &timing,
        &Default::default(),
    )
    .unwrap();
    (acq, trajs)
}

pub fn point(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}
