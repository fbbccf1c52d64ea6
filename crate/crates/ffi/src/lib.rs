//! C ABI for the comove toolkit.
//!
//! Every fallible function returns a [`ComoveStatus`] and writes results
//! through caller-provided pointers, which are left untouched on failure.
//! After a non-`Ok` status, `comove_last_error_message` describes the
//! failure on the calling thread. Rigs and stage logs are opaque handles
//! owned by the caller and released with their `_free` function.
//!
//! Pixel coordinates are center-origin (x right, y down). Angles are radians.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use comove::calibrate::{kabsch_angle, predict_rel_error, predict_z_drift, ErrorModelInput};
use comove::{
    project, stage_angle_at, triangulate_dlt, z_closed_form, CameraConfig, CameraIntrinsics, CameraStaticPose, Error,
    Pixel, Point3, RigConfig, Side, StageLog,
};

pub const COMOVE_SIDE_LEFT: u32 = 0;
pub const COMOVE_SIDE_RIGHT: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComoveStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Degenerate geometry: point on the principal plane, parallel rays,
    /// vanishing depth denominator.
    Degenerate = 3,
    /// Time outside the stage log span.
    OutOfRange = 4,
    NoConvergence = 5,
    /// Any other computation failure.
    Failed = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 99,
}

/// Intrinsics and home pose of one camera.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ComoveCameraParams {
    pub focal_px: f64,
    /// Principal point offset from the image center.
    pub center_x_px: f64,
    pub center_y_px: f64,
    pub k1: f64,
    pub sensor_width_px: f64,
    pub sensor_height_px: f64,
    pub yaw_rad: f64,
    pub pitch_rad: f64,
    pub roll_rad: f64,
}

/// Inputs of the first-order error model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ComoveErrorModel {
    pub focal_px: f64,
    pub baseline_m: f64,
    /// Relative yaw of the cameras, right minus left.
    pub psi_rad: f64,
    pub delta_baseline_m: f64,
    pub delta_focal_px: f64,
    pub delta_psi_rad: f64,
    pub zbar_m: f64,
    /// Relative rotational speed, rad/s.
    pub speed_rad_s: f64,
}

impl From<&ComoveErrorModel> for ErrorModelInput {
    fn from(m: &ComoveErrorModel) -> Self {
        ErrorModelInput {
            focal_px: m.focal_px,
            baseline_m: m.baseline_m,
            psi_rad: m.psi_rad,
            delta_baseline_m: m.delta_baseline_m,
            delta_focal_px: m.delta_focal_px,
            delta_psi_rad: m.delta_psi_rad,
            zbar_m: m.zbar_m,
            speed_rad_s: m.speed_rad_s,
        }
    }
}

/// Opaque stereo rig.
pub struct ComoveRig(RigConfig);

/// Opaque stage angle log.
pub struct ComoveStageLog(StageLog);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ComoveStatus {
    match e.root() {
        Error::OutOfRange { .. } => ComoveStatus::OutOfRange,
        Error::NoConvergence { .. } => ComoveStatus::NoConvergence,
        Error::DegenerateProjection { .. }
        | Error::DegenerateGeometry
        | Error::DivergentDepth { .. }
        | Error::BehindCamera { .. }
        | Error::DegenerateConfiguration(_) => ComoveStatus::Degenerate,
        Error::InvalidInput(_) | Error::Config(_) | Error::InsufficientData(_) => ComoveStatus::InvalidArgument,
        _ => ComoveStatus::Failed,
    }
}

struct Failure(ComoveStatus, String);

type Outcome = Result<(), Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ComoveStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ComoveStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Outcome) -> ComoveStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ComoveStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            ComoveStatus::Internal
        }
    }
}

unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, what: &str) -> Result<&'static mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn side(s: u32) -> Result<Side, Failure> {
    match s {
        COMOVE_SIDE_LEFT => Ok(Side::Left),
        COMOVE_SIDE_RIGHT => Ok(Side::Right),
        other => Err(invalid(format!("side must be 0 (left) or 1 (right), got {other}"))),
    }
}

fn camera(p: &ComoveCameraParams, side: Side) -> Result<CameraConfig, Failure> {
    let intrinsics = CameraIntrinsics::new(
        p.focal_px,
        Pixel::new(p.center_x_px, p.center_y_px),
        p.k1,
        Pixel::new(p.sensor_width_px, p.sensor_height_px),
    )?;
    Ok(CameraConfig {
        pose: CameraStaticPose::new(side, p.yaw_rad, p.pitch_rad, p.roll_rad),
        intrinsics,
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn comove_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `comove_*` call on the same thread.
#[no_mangle]
pub extern "C" fn comove_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a rig. Camera centers are at `(-d/2, 0, 0)` and `(d/2, 0, 0)`.
///
/// # Safety
/// `left`, `right` and `out` must be null or valid for reads/writes.
#[no_mangle]
pub unsafe extern "C" fn comove_rig_new(
    baseline_m: f64,
    left: *const ComoveCameraParams,
    right: *const ComoveCameraParams,
    out: *mut *mut ComoveRig,
) -> ComoveStatus {
    guard(|| {
        let out = write(out, "out")?;
        let rig = RigConfig {
            baseline_m,
            left: camera(read(left, "left")?, Side::Left)?,
            right: camera(read(right, "right")?, Side::Right)?,
        };
        rig.validate()?;
        *out = Box::into_raw(Box::new(ComoveRig(rig)));
        Ok(())
    })
}

/// # Safety
/// `rig` must be null or a handle from `comove_rig_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn comove_rig_free(rig: *mut ComoveRig) {
    if !rig.is_null() {
        drop(Box::from_raw(rig));
    }
}

/// Project a world point with camera `side` at stage angle `stage_angle_rad`.
/// Distortion is not applied.
///
/// # Safety
/// `point` must point to 3 doubles and `out_px` to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn comove_rig_project(
    rig: *const ComoveRig,
    side: u32,
    stage_angle_rad: f64,
    point: *const f64,
    out_px: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let rig = &read(rig, "rig")?.0;
        let side = self::side(side)?;
        let q = std::slice::from_raw_parts(read(point, "point")?, 3);
        write(out_px, "out_px")?;
        let px = project(&rig.projection(side, stage_angle_rad), &Point3::new(q[0], q[1], q[2]))?;
        std::slice::from_raw_parts_mut(out_px, 2).copy_from_slice(px.as_slice());
        Ok(())
    })
}

/// Triangulate one target from undistorted pixels in both cameras.
///
/// # Safety
/// `left_px` and `right_px` must point to 2 doubles, `out_point` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn comove_rig_triangulate(
    rig: *const ComoveRig,
    stage_angle_left_rad: f64,
    stage_angle_right_rad: f64,
    left_px: *const f64,
    right_px: *const f64,
    out_point: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let rig = &read(rig, "rig")?.0;
        let l = std::slice::from_raw_parts(read(left_px, "left_px")?, 2);
        let r = std::slice::from_raw_parts(read(right_px, "right_px")?, 2);
        write(out_point, "out_point")?;
        let q = triangulate_dlt(
            &rig.projection(Side::Left, stage_angle_left_rad),
            &rig.projection(Side::Right, stage_angle_right_rad),
            &Pixel::new(l[0], l[1]),
            &Pixel::new(r[0], r[1]),
        )?;
        std::slice::from_raw_parts_mut(out_point, 3).copy_from_slice(q.as_slice());
        Ok(())
    })
}

/// Create a stage log; sample `k` of `angles` has index `first_index + k`
/// and time `(first_index + k) / rate_hz` on the stage clock.
///
/// # Safety
/// `angles` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comove_stage_log_new(
    first_index: i64,
    angles: *const f64,
    len: usize,
    rate_hz: f64,
    out: *mut *mut ComoveStageLog,
) -> ComoveStatus {
    guard(|| {
        let out = write(out, "out")?;
        let angles = std::slice::from_raw_parts(read(angles, "angles")?, len).to_vec();
        let log = StageLog::new("stage", first_index, angles, rate_hz)?;
        *out = Box::into_raw(Box::new(ComoveStageLog(log)));
        Ok(())
    })
}

/// # Safety
/// `log` must be null or a handle from `comove_stage_log_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn comove_stage_log_free(log: *mut ComoveStageLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Linearly interpolated stage angle at stage-clock time `t_s`.
///
/// # Safety
/// `log` must be a live handle; `out_angle_rad` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comove_stage_log_angle_at(
    log: *const ComoveStageLog,
    t_s: f64,
    out_angle_rad: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let log = &read(log, "log")?.0;
        let out = write(out_angle_rad, "out_angle_rad")?;
        *out = stage_angle_at(log, t_s)?;
        Ok(())
    })
}

/// Closed-form depth `Z = Omega d / (s - (alpha + phi) Omega)` for a rig
/// with zero pitch and roll.
///
/// # Safety
/// `out_z_m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn comove_z_closed_form(
    focal_px: f64,
    baseline_m: f64,
    disparity_px: f64,
    alpha_rad: f64,
    phi_rad: f64,
    out_z_m: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let out = write(out_z_m, "out_z_m")?;
        *out = z_closed_form(focal_px, baseline_m, disparity_px, alpha_rad, phi_rad)?;
        Ok(())
    })
}

fn check_model(m: &ComoveErrorModel) -> Result<(), Failure> {
    if !(m.focal_px > 0.0 && m.baseline_m > 0.0) {
        return Err(invalid("focal_px and baseline_m must be positive"));
    }
    Ok(())
}

/// Predicted relative distance error at mean depth `model.zbar_m`.
///
/// # Safety
/// `model` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn comove_predict_rel_error(model: *const ComoveErrorModel, out: *mut f64) -> ComoveStatus {
    guard(|| {
        let m = read(model, "model")?;
        check_model(m)?;
        *write(out, "out")? = predict_rel_error(&m.into());
        Ok(())
    })
}

/// Predicted depth drift rate, m/s, of a still target at depth `z_m`.
///
/// # Safety
/// `model` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn comove_predict_z_drift(
    model: *const ComoveErrorModel,
    z_m: f64,
    out: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let m = read(model, "model")?;
        check_model(m)?;
        *write(out, "out")? = predict_z_drift(&m.into(), z_m);
        Ok(())
    })
}

/// Best rotation angle taking `reference` onto `current` after centering.
/// Both arrays hold `n` interleaved `(x, y)` pairs.
///
/// # Safety
/// `reference` and `current` must point to `2 n` doubles; outputs must be
/// writable (`out_rmsd` may be null).
#[no_mangle]
pub unsafe extern "C" fn comove_kabsch_angle(
    reference: *const f64,
    current: *const f64,
    n: usize,
    out_angle_rad: *mut f64,
    out_rmsd: *mut f64,
) -> ComoveStatus {
    guard(|| {
        let to_pixels = |p: &f64| {
            std::slice::from_raw_parts(p, 2 * n)
                .chunks_exact(2)
                .map(|c| Pixel::new(c[0], c[1]))
                .collect::<Vec<_>>()
        };
        let a = to_pixels(read(reference, "reference")?);
        let b = to_pixels(read(current, "current")?);
        let out = write(out_angle_rad, "out_angle_rad")?;
        let res = kabsch_angle(&a, &b)?;
        *out = res.angle;
        if let Some(r) = out_rmsd.as_mut() {
            *r = res.rmsd;
        }
        Ok(())
    })
}
