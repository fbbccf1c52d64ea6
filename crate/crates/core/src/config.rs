//! JSON configuration files.
//!
//! Every angle-valued key carries its unit as a suffix, `_deg` or `_rad`
//! (`_deg_s`/`_rad_s` for speeds, `_deg_s2`/`_rad_s2` for accelerations).
//! Exactly one of the two spellings may be given. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::ErrorModelInput;
use crate::error::{Error, Result};
use crate::geometry::{CameraConfig, CameraIntrinsics, CameraStaticPose, Pixel, Point3, RigConfig, Side, DEFAULT_SENSOR_PX};
use crate::simulate::{depth_ladder, ErrorInjection, MotionProfile, ProfileMode, Scene, Target, DEFAULT_NOISE_SIGMA_PX};
use crate::timing::{TimingConfig, DEFAULT_CAMERA_FPS, DEFAULT_STAGE_HZ};

/// Resolve a value given in degrees or radians; `None` when neither is present.
fn angle(name: &str, deg: Option<f64>, rad: Option<f64>) -> Result<Option<f64>> {
    match (deg, rad) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{name}_deg` and `{name}_rad` given; use one"
        ))),
        (Some(d), None) => Ok(Some(d.to_radians())),
        (None, r) => Ok(r),
    }
}

fn required_angle(name: &str, deg: Option<f64>, rad: Option<f64>) -> Result<f64> {
    angle(name, deg, rad)?.ok_or_else(|| Error::Config(format!("missing `{name}_deg` or `{name}_rad`")))
}

fn optional_angle(name: &str, deg: Option<f64>, rad: Option<f64>) -> Result<f64> {
    Ok(angle(name, deg, rad)?.unwrap_or(0.0))
}

/// Parse a JSON document, reporting the file, line and field on failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub focal_px: f64,
    #[serde(default)]
    pub center_px: [f64; 2],
    #[serde(default)]
    pub k1: f64,
    #[serde(default = "default_sensor")]
    pub sensor_px: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll_rad: Option<f64>,
}

fn default_sensor() -> [f64; 2] {
    DEFAULT_SENSOR_PX
}

impl CameraSpec {
    pub fn to_camera(&self, side: Side) -> Result<CameraConfig> {
        let intrinsics = CameraIntrinsics::new(
            self.focal_px,
            Pixel::new(self.center_px[0], self.center_px[1]),
            self.k1,
            Pixel::new(self.sensor_px[0], self.sensor_px[1]),
        )
        .map_err(|e| Error::Config(format!("{side} camera: {e}")))?;
        let pose = CameraStaticPose::new(
            side,
            optional_angle("yaw", self.yaw_deg, self.yaw_rad)?,
            optional_angle("pitch", self.pitch_deg, self.pitch_rad)?,
            optional_angle("roll", self.roll_deg, self.roll_rad)?,
        );
        Ok(CameraConfig { pose, intrinsics })
    }

    pub fn from_camera(cam: &CameraConfig) -> Self {
        let i = &cam.intrinsics;
        CameraSpec {
            focal_px: i.focal_px,
            center_px: [i.center.x, i.center.y],
            k1: i.k1,
            sensor_px: [i.sensor_size.x, i.sensor_size.y],
            yaw_deg: None,
            yaw_rad: Some(cam.pose.yaw),
            pitch_deg: None,
            pitch_rad: Some(cam.pose.pitch),
            roll_deg: None,
            roll_rad: Some(cam.pose.roll),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub baseline_m: f64,
    pub left: CameraSpec,
    pub right: CameraSpec,
}

impl RigSpec {
    pub fn to_rig(&self) -> Result<RigConfig> {
        let rig = RigConfig {
            baseline_m: self.baseline_m,
            left: self.left.to_camera(Side::Left)?,
            right: self.right.to_camera(Side::Right)?,
        };
        rig.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(rig)
    }

    pub fn from_rig(rig: &RigConfig) -> Self {
        RigSpec {
            baseline_m: rig.baseline_m,
            left: CameraSpec::from_camera(&rig.left),
            right: CameraSpec::from_camera(&rig.right),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    #[serde(default = "default_fps")]
    pub camera_fps: f64,
    #[serde(default = "default_stage_hz")]
    pub stage_hz: f64,
    /// Stage-clock time of camera frame 0.
    #[serde(default)]
    pub offset_s: f64,
}

fn default_fps() -> f64 {
    DEFAULT_CAMERA_FPS
}

fn default_stage_hz() -> f64 {
    DEFAULT_STAGE_HZ
}

impl Default for TimingSpec {
    fn default() -> Self {
        TimingSpec {
            camera_fps: DEFAULT_CAMERA_FPS,
            stage_hz: DEFAULT_STAGE_HZ,
            offset_s: 0.0,
        }
    }
}

impl TimingSpec {
    pub fn to_timing(&self) -> Result<TimingConfig> {
        let t = TimingConfig {
            dt_camera: 1.0 / self.camera_fps,
            dt_stage: 1.0 / self.stage_hz,
            offset: self.offset_s,
        };
        t.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(t)
    }

    pub fn from_timing(t: &TimingConfig) -> Self {
        TimingSpec {
            camera_fps: 1.0 / t.dt_camera,
            stage_hz: 1.0 / t.dt_stage,
            offset_s: t.offset,
        }
    }
}

/// Rig and timing believed by the reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub rig: RigSpec,
    #[serde(default)]
    pub timing: TimingSpec,
    /// Provenance of generated files; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl RigFile {
    pub fn resolve(&self) -> Result<(RigConfig, TimingConfig)> {
        Ok((self.rig.to_rig()?, self.timing.to_timing()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Still {
        #[serde(default)]
        hold_s: f64,
    },
    ConstantSpeed {
        speed_deg_s: Option<f64>,
        speed_rad_s: Option<f64>,
        #[serde(default)]
        hold_s: f64,
    },
    Periodic {
        amplitude_deg: Option<f64>,
        amplitude_rad: Option<f64>,
        max_speed_deg_s: Option<f64>,
        max_speed_rad_s: Option<f64>,
        max_accel_deg_s2: Option<f64>,
        max_accel_rad_s2: Option<f64>,
        #[serde(default)]
        hold_s: f64,
    },
    Sinusoidal {
        amplitude_deg: Option<f64>,
        amplitude_rad: Option<f64>,
        max_speed_deg_s: Option<f64>,
        max_speed_rad_s: Option<f64>,
        #[serde(default)]
        hold_s: f64,
    },
    /// `slow`, `moderate` or `fast`.
    Preset {
        name: String,
        #[serde(default)]
        hold_s: f64,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Still { hold_s: 0.0 }
    }
}

impl ProfileSpec {
    pub fn to_profile(&self) -> Result<MotionProfile> {
        let profile = match self {
            ProfileSpec::Still { hold_s } => MotionProfile::still().with_hold(*hold_s),
            ProfileSpec::ConstantSpeed {
                speed_deg_s,
                speed_rad_s,
                hold_s,
            } => MotionProfile::constant_speed(required_angle("speed", *speed_deg_s, *speed_rad_s)?).with_hold(*hold_s),
            ProfileSpec::Periodic {
                amplitude_deg,
                amplitude_rad,
                max_speed_deg_s,
                max_speed_rad_s,
                max_accel_deg_s2,
                max_accel_rad_s2,
                hold_s,
            } => MotionProfile::periodic(
                required_angle("amplitude", *amplitude_deg, *amplitude_rad)?,
                required_angle("max_speed", *max_speed_deg_s, *max_speed_rad_s)?,
                required_angle("max_accel", *max_accel_deg_s2, *max_accel_rad_s2)?,
            )
            .with_hold(*hold_s),
            ProfileSpec::Sinusoidal {
                amplitude_deg,
                amplitude_rad,
                max_speed_deg_s,
                max_speed_rad_s,
                hold_s,
            } => MotionProfile {
                mode: ProfileMode::Sinusoidal,
                ..MotionProfile::periodic(
                    required_angle("amplitude", *amplitude_deg, *amplitude_rad)?,
                    required_angle("max_speed", *max_speed_deg_s, *max_speed_rad_s)?,
                    1.0,
                )
            }
            .with_hold(*hold_s),
            ProfileSpec::Preset { name, hold_s } => MotionProfile::preset(name)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`; expected slow, moderate or fast")))?
                .with_hold(*hold_s),
        };
        profile.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

/// Evenly spaced targets along the rig's midline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub count: usize,
    pub z_min_m: f64,
    pub z_max_m: f64,
    pub pitch_deg: Option<f64>,
    pub pitch_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub rig: RigSpec,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    pub target_ladder: Option<LadderSpec>,
    #[serde(default)]
    pub left_profile: ProfileSpec,
    #[serde(default)]
    pub right_profile: ProfileSpec,
    #[serde(default = "default_noise")]
    pub noise_sigma_px: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Aim each camera at the targets' mean bearing at the middle of its motion,
    /// replacing the configured yaws.
    #[serde(default)]
    pub center_yaws: bool,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_SIGMA_PX
}

impl SceneFile {
    pub fn to_scene(&self) -> Result<Scene> {
        let mut targets: Vec<Target> = self
            .targets
            .iter()
            .map(|t| Target {
                id: t.id,
                position: Point3::new(t.x_m, t.y_m, t.z_m),
            })
            .collect();
        if let Some(l) = &self.target_ladder {
            if !targets.is_empty() {
                return Err(Error::Config("give either `targets` or `target_ladder`, not both".into()));
            }
            targets = depth_ladder(l.count, l.z_min_m, l.z_max_m, optional_angle("pitch", l.pitch_deg, l.pitch_rad)?);
        }
        let mut scene = Scene {
            targets,
            rig: self.rig.to_rig()?,
            timing: self.timing.to_timing()?,
            left_profile: self.left_profile.to_profile()?,
            right_profile: self.right_profile.to_profile()?,
            noise_sigma: self.noise_sigma_px,
            duration_s: self.duration_s,
            seed: self.seed,
        };
        if self.center_yaws {
            scene.center_yaws();
        }
        scene.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(scene)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionFile {
    #[serde(default)]
    pub delta_baseline_m: f64,
    pub delta_yaw_deg: Option<f64>,
    pub delta_yaw_rad: Option<f64>,
    #[serde(default)]
    pub delta_focal_left_px: f64,
    #[serde(default)]
    pub delta_focal_right_px: f64,
    #[serde(default)]
    pub delta_offset_s: f64,
    pub home_jitter_deg: Option<f64>,
    pub home_jitter_rad: Option<f64>,
}

impl InjectionFile {
    pub fn to_injection(&self) -> Result<ErrorInjection> {
        let inj = ErrorInjection {
            delta_baseline_m: self.delta_baseline_m,
            delta_yaw_rad: optional_angle("delta_yaw", self.delta_yaw_deg, self.delta_yaw_rad)?,
            delta_focal_left_px: self.delta_focal_left_px,
            delta_focal_right_px: self.delta_focal_right_px,
            delta_offset_s: self.delta_offset_s,
            home_jitter_sigma_rad: optional_angle("home_jitter", self.home_jitter_deg, self.home_jitter_rad)?,
        };
        inj.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(inj)
    }
}

/// Parameters of the error model and the mean-depth range to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelFile {
    pub focal_px: f64,
    pub baseline_m: f64,
    pub psi_deg: Option<f64>,
    pub psi_rad: Option<f64>,
    #[serde(default)]
    pub delta_baseline_m: f64,
    #[serde(default)]
    pub delta_focal_px: f64,
    pub delta_psi_deg: Option<f64>,
    pub delta_psi_rad: Option<f64>,
    pub speed_deg_s: Option<f64>,
    pub speed_rad_s: Option<f64>,
    #[serde(default = "default_zbar_min")]
    pub zbar_min_m: f64,
    #[serde(default = "default_zbar_max")]
    pub zbar_max_m: f64,
    #[serde(default = "default_zbar_step")]
    pub zbar_step_m: f64,
}

fn default_zbar_min() -> f64 {
    20.0
}

fn default_zbar_max() -> f64 {
    40.0
}

fn default_zbar_step() -> f64 {
    1.0
}

impl ErrorModelFile {
    pub fn to_input(&self) -> Result<ErrorModelInput> {
        if !(self.focal_px > 0.0 && self.baseline_m > 0.0) {
            return Err(Error::Config("focal_px and baseline_m must be positive".into()));
        }
        Ok(ErrorModelInput {
            focal_px: self.focal_px,
            baseline_m: self.baseline_m,
            psi_rad: optional_angle("psi", self.psi_deg, self.psi_rad)?,
            delta_baseline_m: self.delta_baseline_m,
            delta_focal_px: self.delta_focal_px,
            delta_psi_rad: optional_angle("delta_psi", self.delta_psi_deg, self.delta_psi_rad)?,
            zbar_m: self.zbar_min_m,
            speed_rad_s: optional_angle("speed", self.speed_deg_s, self.speed_rad_s)?,
        })
    }

    pub fn zbar_grid(&self) -> Result<Vec<f64>> {
        if !(self.zbar_step_m > 0.0 && self.zbar_max_m >= self.zbar_min_m && self.zbar_min_m > 0.0) {
            return Err(Error::Config("invalid mean-depth range".into()));
        }
        let n = ((self.zbar_max_m - self.zbar_min_m) / self.zbar_step_m + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.zbar_min_m + k as f64 * self.zbar_step_m).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> &'static Path {
        Path::new("test.json")
    }

    const RIG: &str = r#"{"baseline_m": 10.7,
        "left": {"focal_px": 6314.8, "yaw_deg": 10.0},
        "right": {"focal_px": 6300.29, "yaw_rad": -0.17, "pitch_rad": 0.08}}"#;

    #[test]
    fn rig_units_are_converted() {
        let spec: RigSpec = parse_json(path(), RIG).unwrap();
        let rig = spec.to_rig().unwrap();
        assert!((rig.left.pose.yaw - 10f64.to_radians()).abs() < 1e-15);
        assert_eq!(rig.right.pose.yaw, -0.17);
        assert_eq!(rig.right.pose.pitch, 0.08);
        assert_eq!(rig.left.intrinsics.sensor_size, Pixel::new(3840.0, 2400.0));
    }

    #[test]
    fn both_units_is_an_error() {
        let text = RIG.replace(r#""yaw_deg": 10.0"#, r#""yaw_deg": 10.0, "yaw_rad": 0.1"#);
        let spec: RigSpec = parse_json(path(), &text).unwrap();
        assert!(matches!(spec.to_rig(), Err(Error::Config(m)) if m.contains("yaw")));
    }

    #[test]
    fn unknown_field_is_named() {
        let text = RIG.replace(r#""yaw_deg": 10.0"#, r#""yaw": 10.0"#);
        let err = parse_json::<RigSpec>(path(), &text).unwrap_err();
        assert!(err.to_string().contains("unknown field `yaw`"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn profiles_parse() {
        let p: ProfileSpec = parse_json(path(), r#"{"mode": "constant_speed", "speed_deg_s": 6}"#).unwrap();
        assert!(matches!(p.to_profile().unwrap().mode, ProfileMode::ConstantSpeed(v) if (v - 0.10471975511965977).abs() < 1e-15));
        let p: ProfileSpec = parse_json(path(), r#"{"mode": "preset", "name": "slow", "hold_s": 0.5}"#).unwrap();
        let prof = p.to_profile().unwrap();
        assert_eq!(prof.hold_s, 0.5);
        assert_eq!(prof.amplitude_rad, 2f64.to_radians());
        let bad = parse_json::<ProfileSpec>(path(), r#"{"mode": "still", "speed_deg_s": 6}"#);
        assert!(bad.is_err());
        let infeasible: ProfileSpec = parse_json(
            path(),
            r#"{"mode": "periodic", "amplitude_deg": 1, "max_speed_deg_s": 100, "max_accel_deg_s2": 1}"#,
        )
        .unwrap();
        assert!(infeasible.to_profile().is_err());
    }

    #[test]
    fn scene_with_ladder() {
        let text = format!(
            r#"{{"rig": {RIG}, "target_ladder": {{"count": 7, "z_min_m": 20, "z_max_m": 40}},
                "left_profile": {{"mode": "constant_speed", "speed_deg_s": 6}},
                "duration_s": 2, "center_yaws": true}}"#
        );
        let scene = parse_json::<SceneFile>(path(), &text).unwrap().to_scene().unwrap();
        assert_eq!(scene.targets.len(), 7);
        assert_eq!(scene.noise_sigma, 0.1);
        assert!(scene.rig.left.pose.yaw > 0.0 && scene.rig.right.pose.yaw < 0.0);
    }

    #[test]
    fn rig_file_round_trip() {
        let spec: RigSpec = parse_json(path(), RIG).unwrap();
        let rig = spec.to_rig().unwrap();
        let file = RigFile {
            rig: RigSpec::from_rig(&rig),
            timing: TimingSpec::default(),
            manifest: None,
        };
        let text = serde_json::to_string(&file).unwrap();
        let back: RigFile = parse_json(path(), &text).unwrap();
        assert_eq!(back.resolve().unwrap().0, rig);
    }

    #[test]
    fn injection_defaults_to_zero() {
        let inj = parse_json::<InjectionFile>(path(), "{}").unwrap().to_injection().unwrap();
        assert_eq!(inj, ErrorInjection::default());
        let inj = parse_json::<InjectionFile>(path(), r#"{"delta_yaw_rad": 0.003}"#)
            .unwrap()
            .to_injection()
            .unwrap();
        assert_eq!(inj.delta_yaw_rad, 0.003);
    }
}
