//! Toolkit for a stereo rig whose cameras ride on rotational stages.
//!
//! The crate covers the full measurement chain:
//!
//! * [`geometry`]: time-dependent pinhole projection, `P(t) = K R(t) [I | -C]`.
//! * [`timing`]: camera/stage clock alignment and offset estimation.
//! * [`reconstruct`]: per-frame DLT triangulation and distance reports.
//! * [`calibrate`]: error-model prediction, error-source diagnosis, dynamic
//!   focal calibration, stage angle verification and home repeatability.
//! * [`simulate`]: synthetic acquisitions with ground truth.
//! * [`io`] and [`cli`]: file formats and the `comove` command line.
//!
//! ```no_run
//! use std::path::Path;
//! use comove::config::{load_json, RigFile};
//! use comove::{io, reconstruct_sequence};
//!
//! let (rig, timing) = load_json::<RigFile>(Path::new("rig.json"))?.resolve()?;
//! let det = io::read_detections(Path::new("detections.csv"), &rig)?;
//! let logs = io::read_stage_logs(Path::new("stage_logs.csv"), 1.0 / timing.dt_stage)?;
//! let (left, right) = io::camera_logs(logs)?;
//! let tracks = reconstruct_sequence(&det, &rig, &left, &right, &timing, &Default::default())?;
//! # Ok::<(), comove::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod reconstruct;
pub mod simulate;
pub mod timing;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{
    project, projection_matrix, rotation_at, rotation_static, CameraConfig, CameraIntrinsics,
    CameraStaticPose, Pixel, Point3, ProjectionMatrix, RigConfig, RotationMatrix, Side,
};
pub use reconstruct::{
    pairwise_report, reconstruct_sequence, triangulate_dlt, z_closed_form, DetectionSet,
    DistanceReport, Trajectory3D,
};
pub use timing::{camera_time, estimate_offset, stage_angle_at, StageLog, TargetTrack, TimingConfig};
