//! Calibration diagnosis and correction.
//!
//! * [`error_model`]: first-order relative error of target-to-target
//!   distances and the time drift of reconstructed depth.
//! * [`diagnose`]: tells baseline errors (flat in mean depth) from
//!   orientation errors (linear in mean depth) in a static 3D test.
//! * [`focal`]: dynamic focal calibration from single-camera rotation runs,
//!   by slope fit and by sweep.
//! * [`kabsch`]: in-image rotation of a stage-mounted board, to check
//!   interpolated stage angles.
//! * [`home`]: stage home repeatability.

pub mod diagnose;
pub mod error_model;
pub mod focal;
pub mod home;
pub mod kabsch;

pub use diagnose::{diagnose, diagnose_points, Classification, DiagnoseOptions, DiagnosisResult};
pub use error_model::{predict_rel_error, predict_z_drift, ErrorModelInput};
pub use focal::{
    estimate_domega, fit_z_slopes, focal_sweep, rotating_camera, DomegaEstimate,
    FocalCalibrationResult, SweepConfig, ZSlope,
};
pub use home::{home_repeatability, HomeStats};
pub use kabsch::{kabsch_angle, verify_stage_angles, AngleVerification, KabschResult};
