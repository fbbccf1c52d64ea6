//! The `comove` command-line tool.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibrate::{
    diagnose_points, estimate_domega, fit_z_slopes, focal::single_camera_speed, focal_sweep, home_repeatability,
    predict_rel_error, predict_z_drift, rotating_camera, verify_stage_angles, DiagnoseOptions, SweepConfig,
};
use crate::config::{load_json, ErrorModelFile, InjectionFile, RigFile, RigSpec, SceneFile, TimingSpec};
use crate::error::{Error, ErrorKind, Result};
use crate::geometry::{CameraIntrinsics, CameraStaticPose, Pixel, Point3, RigConfig, Side};
use crate::io::{self, CsvOut, Manifest, TruthFile};
use crate::reconstruct::{pairwise_report, reconstruct_sequence, ReconstructOptions};
use crate::simulate::{
    apply_injection, synth_board_sequence, synth_detections, synth_home_snapshots, BoardScene, ErrorInjection,
    HomeScene, MotionProfile, Target,
};
use crate::timing::{estimate_offset, OffsetOptions, Polarity, StageLog, TimingConfig};

#[derive(Debug, Parser)]
#[command(name = "comove", version, about = "Stereo reconstruction with co-moving rotating cameras")]
pub struct Cli {
    /// Override the random seed of simulated data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for parallel stages; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CameraArg {
    Left,
    Right,
}

impl From<CameraArg> for Side {
    fn from(c: CameraArg) -> Side {
        match c {
            CameraArg::Left => Side::Left,
            CameraArg::Right => Side::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Opposite,
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FocalMode {
    /// Closed-form estimate from depth drift against mean square depth.
    Fit,
    /// Grid search for the focal length that minimizes depth drift.
    Sweep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic detections and stage logs from a scene.
    Simulate {
        /// Scene JSON: rig, timing, targets and motion profiles.
        #[arg(long)]
        scene: PathBuf,
        /// Calibration errors; the simulation uses the true scene, the
        /// emitted rig file carries the believed values.
        #[arg(long)]
        injection: Option<PathBuf>,
        /// Also write rig.json with the believed rig and timing.
        #[arg(long)]
        emit_rig: bool,
    },
    /// Triangulate targets frame by frame and compare distances with ground truth.
    Reconstruct {
        /// Detections CSV, as written by `simulate`.
        #[arg(long)]
        detections: PathBuf,
        /// Stage log CSV holding the left and right stages.
        #[arg(long)]
        stage_logs: PathBuf,
        /// Rig JSON with the believed calibration and timing.
        #[arg(long)]
        rig: PathBuf,
        /// truth.json; enables report.csv.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write per-frame distances (report_frames.csv).
        #[arg(long)]
        per_frame: bool,
        /// Triangulate raw detections without removing lens distortion.
        #[arg(long)]
        no_undistort: bool,
    },
    /// Estimate the camera-to-stage clock offset by correlation.
    Offset {
        /// Detections CSV, as written by `simulate`.
        #[arg(long)]
        detections: PathBuf,
        /// Stage log CSV holding the left and right stages.
        #[arg(long)]
        stage_logs: PathBuf,
        /// Rig JSON with the believed calibration and timing.
        #[arg(long)]
        rig: PathBuf,
        /// Camera whose track is correlated.
        #[arg(long, value_enum, default_value = "left")]
        camera: CameraArg,
        /// Stage log to correlate against; defaults to the camera's stage.
        #[arg(long)]
        stage_id: Option<String>,
        #[arg(long, value_enum, default_value = "opposite")]
        polarity: PolarityArg,
    },
    /// Estimate the focal length of the rotating camera.
    Focal {
        /// Detections CSV, as written by `simulate`.
        #[arg(long)]
        detections: PathBuf,
        /// Stage log CSV holding the left and right stages.
        #[arg(long)]
        stage_logs: PathBuf,
        /// Rig JSON with the believed calibration and timing.
        #[arg(long)]
        rig: PathBuf,
        #[arg(long, value_enum, default_value = "fit")]
        mode: FocalMode,
        /// Defaults to the single camera whose stage moves.
        #[arg(long, value_enum)]
        camera: Option<CameraArg>,
        /// Sweep lower bound, px.
        #[arg(long, default_value_t = 5900.0)]
        min_px: f64,
        /// Sweep upper bound, px.
        #[arg(long, default_value_t = 6700.0)]
        max_px: f64,
        /// Sweep step, px.
        #[arg(long, default_value_t = 1.0)]
        step_px: f64,
    },
    /// Classify the dominant calibration error from a distance report.
    Diagnose {
        /// report.csv from `reconstruct`.
        #[arg(long)]
        report: PathBuf,
        /// Rig file supplying the baseline.
        #[arg(long, conflicts_with = "baseline_m", required_unless_present = "baseline_m")]
        rig: Option<PathBuf>,
        /// Baseline, m, when no rig file is given.
        #[arg(long)]
        baseline_m: Option<f64>,
    },
    /// Tabulate the predicted relative error and depth drift over mean depth.
    Predict {
        /// Error-model JSON.
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare interpolated stage angles with angles measured from a rotating board.
    KabschVerify {
        /// Simulate a board on the `slow`, `moderate` or `fast` profile.
        #[arg(long, conflicts_with_all = ["corners", "stage_log"], required_unless_present = "corners")]
        preset: Option<String>,
        /// Simulated clock offset; defaults to `--offset-s`.
        #[arg(long, requires = "preset")]
        true_offset_s: Option<f64>,
        /// CSV `frame,corner,u_px,v_px`.
        #[arg(long, requires = "stage_log")]
        corners: Option<PathBuf>,
        /// Stage log CSV matching `--corners`.
        #[arg(long)]
        stage_log: Option<PathBuf>,
        /// Stage to use when the log file holds several.
        #[arg(long)]
        stage_id: Option<String>,
        /// Camera frame rate, Hz.
        #[arg(long, default_value_t = crate::timing::DEFAULT_CAMERA_FPS)]
        camera_fps: f64,
        /// Stage log sample rate, Hz.
        #[arg(long, default_value_t = crate::timing::DEFAULT_STAGE_HZ)]
        stage_hz: f64,
        /// Believed stage-clock time of camera frame 0.
        #[arg(long, default_value_t = 0.0)]
        offset_s: f64,
    },
    /// Home-position repeatability from still-target snapshots.
    HomeTest {
        /// CSV `snapshot,target_id,u_px,v_px`; without it, snapshots are simulated.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Focal length, px.
        #[arg(long, default_value_t = 6300.0)]
        focal_px: f64,
        /// Radial distortion coefficient.
        #[arg(long, default_value_t = 0.0)]
        k1: f64,
        /// Sensor size, px.
        #[arg(long, num_args = 2, value_names = ["W", "H"], default_values_t = [3840.0, 2400.0])]
        sensor_px: Vec<f64>,
        /// Number of simulated homings.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Simulated home jitter, rad (standard deviation).
        #[arg(long, default_value_t = 2e-5)]
        jitter_rad: f64,
        /// Simulated detection noise, px.
        #[arg(long, default_value_t = 0.1)]
        noise_px: f64,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

/// Concatenated bytes of the configuration inputs, for the manifest digest.
fn digest_inputs(paths: &[&Path]) -> Result<Vec<u8>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(io::read_bytes(p)?);
    }
    Ok(all)
}

struct Ctx {
    out_dir: PathBuf,
    seed: Option<u64>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_csv(&self, name: &str, csv: CsvOut) -> Result<()> {
        csv.write(&self.path(name))?;
        println!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T, manifest: &Manifest) -> Result<()> {
        io::write_json(&self.path(name), value, manifest)?;
        println!("wrote {}", self.path(name).display());
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|source| Error::Io {
        path: cli.out_dir.display().to_string(),
        source,
    })?;
    let ctx = Ctx {
        out_dir: cli.out_dir,
        seed: cli.seed,
    };
    match cli.command {
        Command::Simulate {
            scene,
            injection,
            emit_rig,
        } => simulate(&ctx, &scene, injection.as_deref(), emit_rig),
        Command::Reconstruct {
            detections,
            stage_logs,
            rig,
            truth,
            per_frame,
            no_undistort,
        } => reconstruct(&ctx, &detections, &stage_logs, &rig, truth.as_deref(), per_frame, !no_undistort),
        Command::Offset {
            detections,
            stage_logs,
            rig,
            camera,
            stage_id,
            polarity,
        } => offset(&ctx, &detections, &stage_logs, &rig, camera.into(), stage_id, polarity),
        Command::Focal {
            detections,
            stage_logs,
            rig,
            mode,
            camera,
            min_px,
            max_px,
            step_px,
        } => focal(
            &ctx,
            &detections,
            &stage_logs,
            &rig,
            mode,
            camera.map(Side::from),
            [min_px, max_px, step_px],
        ),
        Command::Diagnose { report, rig, baseline_m } => diagnose_cmd(&ctx, &report, rig.as_deref(), baseline_m),
        Command::Predict { model } => predict(&ctx, &model),
        Command::KabschVerify {
            preset,
            true_offset_s,
            corners,
            stage_log,
            stage_id,
            camera_fps,
            stage_hz,
            offset_s,
        } => {
            let believed = TimingSpec {
                camera_fps,
                stage_hz,
                offset_s,
            }
            .to_timing()?;
            match (preset, corners, stage_log) {
                (Some(name), _, _) => kabsch_preset(&ctx, &name, believed, true_offset_s.unwrap_or(offset_s)),
                (None, Some(c), Some(s)) => kabsch_files(&ctx, &c, &s, stage_id, believed),
                _ => Err(Error::Config("give --preset, or --corners with --stage-log".into())),
            }
        }
        Command::HomeTest {
            snapshots,
            focal_px,
            k1,
            sensor_px,
            count,
            jitter_rad,
            noise_px,
        } => {
            let intr = CameraIntrinsics::new(focal_px, Pixel::zeros(), k1, Pixel::new(sensor_px[0], sensor_px[1]))
                .map_err(|e| Error::Config(e.to_string()))?;
            home_test(&ctx, snapshots.as_deref(), intr, count, jitter_rad, noise_px)
        }
    }
}

fn simulate(ctx: &Ctx, scene_path: &Path, injection: Option<&Path>, emit_rig: bool) -> Result<()> {
    let file: SceneFile = load_json(scene_path)?;
    let mut scene = file.to_scene()?;
    if let Some(seed) = ctx.seed {
        scene.seed = seed;
    }
    let inject = match injection {
        Some(p) => load_json::<InjectionFile>(p)?.to_injection()?,
        None => ErrorInjection::default(),
    };
    let mut inputs = vec![scene_path];
    inputs.extend(injection);
    let manifest = Manifest::new("simulate", &digest_inputs(&inputs)?, Some(scene.seed));

    let acq = synth_detections(&scene, &inject)?;
    ctx.write_csv("detections.csv", io::detections_csv(&acq.detections, &scene.rig, &manifest))?;
    ctx.write_csv(
        "stage_logs.csv",
        io::stage_logs_csv(&[&acq.left_log, &acq.right_log], &manifest),
    )?;
    ctx.write_json("truth.json", &TruthFile::from_truth(&acq.truth), &manifest)?;
    if emit_rig {
        let (rig, timing) = apply_injection(&scene.rig, &scene.timing, &inject);
        let file = RigFile {
            rig: RigSpec::from_rig(&rig),
            timing: TimingSpec::from_timing(&timing),
            manifest: None,
        };
        ctx.write_json("rig.json", &file, &manifest)?;
    }
    println!(
        "simulated {} frames, {} targets",
        acq.detections.frame_count(),
        acq.truth.positions.len()
    );
    Ok(())
}

struct Inputs {
    rig: RigConfig,
    timing: TimingConfig,
    detections: crate::reconstruct::DetectionSet,
    left_log: StageLog,
    right_log: StageLog,
    manifest_bytes: Vec<u8>,
}

fn load_inputs(detections: &Path, stage_logs: &Path, rig_path: &Path) -> Result<(Inputs, std::collections::BTreeMap<String, StageLog>)> {
    let (rig, timing) = load_json::<RigFile>(rig_path)?.resolve()?;
    let det = io::read_detections(detections, &rig)?;
    let logs = io::read_stage_logs(stage_logs, 1.0 / timing.dt_stage)?;
    let (left_log, right_log) = io::camera_logs(logs.clone())?;
    Ok((
        Inputs {
            rig,
            timing,
            detections: det,
            left_log,
            right_log,
            manifest_bytes: digest_inputs(&[rig_path])?,
        },
        logs,
    ))
}

fn reconstruct(
    ctx: &Ctx,
    detections: &Path,
    stage_logs: &Path,
    rig_path: &Path,
    truth: Option<&Path>,
    per_frame: bool,
    undistort: bool,
) -> Result<()> {
    let (inp, _) = load_inputs(detections, stage_logs, rig_path)?;
    let manifest = Manifest::new("reconstruct", &inp.manifest_bytes, None);
    let opts = ReconstructOptions {
        undistort,
        ..Default::default()
    };
    let trajs = reconstruct_sequence(&inp.detections, &inp.rig, &inp.left_log, &inp.right_log, &inp.timing, &opts)?;
    ctx.write_csv("trajectories.csv", io::trajectories_csv(&trajs, &manifest))?;
    if let Some(truth) = truth {
        let t: TruthFile = load_json(truth)?;
        let report = pairwise_report(&trajs, &t.distance_map())?;
        ctx.write_csv("report.csv", io::report_csv(&report, &manifest))?;
        if per_frame {
            ctx.write_csv("report_frames.csv", io::per_frame_csv(&report, &manifest))?;
        }
        println!(
            "{} pairs, max |mean relative error| {:.3e}",
            report.pairs.len(),
            report.max_abs_mean_rel_err()
        );
    } else if per_frame {
        return Err(Error::Config("--per-frame needs --truth".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct TargetLag {
    target_id: u32,
    lag_s: f64,
}

#[derive(Serialize)]
struct OffsetOut {
    camera: &'static str,
    stage_id: String,
    offset_s: f64,
    resolution_s: f64,
    window_samples: (i64, i64),
    targets: Vec<TargetLag>,
}

fn offset(
    ctx: &Ctx,
    detections: &Path,
    stage_logs: &Path,
    rig_path: &Path,
    side: Side,
    stage_id: Option<String>,
    polarity: PolarityArg,
) -> Result<()> {
    let (rig, timing) = load_json::<RigFile>(rig_path)?.resolve()?;
    let det = io::read_detections(detections, &rig)?;
    let mut logs = io::read_stage_logs(stage_logs, 1.0 / timing.dt_stage)?;
    let log = match &stage_id {
        Some(id) => logs
            .remove(id)
            .ok_or_else(|| Error::Config(format!("no stage `{id}` in {}", stage_logs.display())))?,
        None => {
            let (l, r) = io::camera_logs(logs)?;
            match side {
                Side::Left => l,
                Side::Right => r,
            }
        }
    };
    let tracks = det
        .target_ids()
        .into_iter()
        .map(|id| det.track(side, id, timing.dt_camera))
        .collect::<Result<Vec<_>>>()?;
    let opts = OffsetOptions {
        polarity: match polarity {
            PolarityArg::Opposite => Polarity::Opposite,
            PolarityArg::Same => Polarity::Same,
        },
        ..Default::default()
    };
    let est = estimate_offset(&log, &tracks, &opts)?;
    let manifest = Manifest::new("offset", &digest_inputs(&[rig_path])?, None);
    let mut csv = CsvOut::new(&manifest, &["target_id", "lag_s", "correlation"]);
    for t in &est.targets {
        for (m, c) in t.curve.iter().enumerate() {
            csv.row([t.target_id.to_string(), format!("{:.16e}", m as f64 * log.dt()), format!("{c:.16e}")]);
        }
    }
    ctx.write_csv("correlation.csv", csv)?;
    let out = OffsetOut {
        camera: side.as_str(),
        stage_id: log.stage_id.clone(),
        offset_s: est.offset_s,
        resolution_s: est.resolution_s,
        window_samples: est.window,
        targets: est
            .targets
            .iter()
            .map(|t| TargetLag {
                target_id: t.target_id,
                lag_s: t.lag_s,
            })
            .collect(),
    };
    ctx.write_json("offset.json", &out, &manifest)?;
    println!("offset {:.6} s (resolution {:.1e} s)", est.offset_s, est.resolution_s);
    Ok(())
}

#[derive(Serialize)]
struct FocalFitOut {
    camera: &'static str,
    mode: &'static str,
    believed_focal_px: f64,
    delta_focal_px: f64,
    corrected_focal_px: f64,
    speed_rad_s: f64,
    slope_vs_mean_z2: f64,
    slope_se: f64,
    r_squared: f64,
}

#[derive(Serialize)]
struct FocalSweepOut {
    camera: &'static str,
    mode: &'static str,
    believed_focal_px: f64,
    omega_star_px: f64,
    delta_focal_px: f64,
    target_argmin_px: Vec<(u32, f64)>,
}

fn focal(
    ctx: &Ctx,
    detections: &Path,
    stage_logs: &Path,
    rig_path: &Path,
    mode: FocalMode,
    camera: Option<Side>,
    [min_px, max_px, step_px]: [f64; 3],
) -> Result<()> {
    let (inp, _) = load_inputs(detections, stage_logs, rig_path)?;
    let side = match camera {
        Some(s) => s,
        None => rotating_camera(&inp.left_log, &inp.right_log)?,
    };
    let manifest = Manifest::new("focal", &inp.manifest_bytes, None);
    let believed = inp.rig.camera(side).intrinsics.focal_px;
    match mode {
        FocalMode::Fit => {
            let trajs = reconstruct_sequence(
                &inp.detections,
                &inp.rig,
                &inp.left_log,
                &inp.right_log,
                &inp.timing,
                &Default::default(),
            )?;
            let slopes = fit_z_slopes(&trajs, inp.timing.dt_camera)?;
            let v = single_camera_speed(&inp.left_log, &inp.right_log);
            let est = estimate_domega(&slopes, v, believed, inp.rig.baseline_m)?;
            let mut csv = CsvOut::new(
                &manifest,
                &["target_id", "slope_m_s", "mean_z2_m2", "n_frames", "r_squared"],
            );
            for s in &slopes {
                csv.row([
                    s.target_id.to_string(),
                    format!("{:.16e}", s.slope_m_s),
                    format!("{:.16e}", s.mean_z2_m2),
                    s.n_frames.to_string(),
                    format!("{:.16e}", s.r_squared),
                ]);
            }
            ctx.write_csv("slopes.csv", csv)?;
            let out = FocalFitOut {
                camera: side.as_str(),
                mode: "fit",
                believed_focal_px: believed,
                delta_focal_px: est.delta_focal_px,
                corrected_focal_px: est.corrected_focal_px,
                speed_rad_s: v,
                slope_vs_mean_z2: est.fit.slope,
                slope_se: est.fit.slope_se,
                r_squared: est.fit.r_squared,
            };
            ctx.write_json("focal.json", &out, &manifest)?;
            println!(
                "{side} camera: focal error {:.2} px, corrected focal {:.2} px",
                est.delta_focal_px, est.corrected_focal_px
            );
        }
        FocalMode::Sweep => {
            let cfg = SweepConfig {
                min_px,
                max_px,
                step_px,
                ..SweepConfig::new(side)
            };
            let res = focal_sweep(&inp.detections, &inp.rig, &inp.left_log, &inp.right_log, &inp.timing, &cfg)?;
            let mut header = vec!["focal_px".to_string(), "mean_abs_slope_m_s".to_string()];
            header.extend(res.targets.iter().map(|t| format!("target_{}", t.target_id)));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut csv = CsvOut::new(&manifest, &header);
            for (k, (omega, mean)) in res.grid_px.iter().zip(&res.mean_abs_slope_m_s).enumerate() {
                let mut row = vec![format!("{omega:.16e}"), format!("{mean:.16e}")];
                row.extend(res.targets.iter().map(|t| format!("{:.16e}", t.abs_slope_m_s[k])));
                csv.row(row);
            }
            ctx.write_csv("sweep.csv", csv)?;
            let out = FocalSweepOut {
                camera: side.as_str(),
                mode: "sweep",
                believed_focal_px: res.believed_focal_px,
                omega_star_px: res.omega_star_px,
                delta_focal_px: res.delta_focal_px,
                target_argmin_px: res.targets.iter().map(|t| (t.target_id, t.argmin_px)).collect(),
            };
            ctx.write_json("focal.json", &out, &manifest)?;
            println!(
                "{side} camera: drift-free focal {:.2} px (error {:.2} px)",
                res.omega_star_px, res.delta_focal_px
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnosisOut {
    classification: &'static str,
    constant_term: f64,
    slope_per_m: f64,
    implied_delta_alpha_rad: f64,
    variance_ratio: f64,
    zbar_span_fraction: f64,
    constant_rss: f64,
    linear_rss: f64,
    linear_r_squared: f64,
}

fn diagnose_cmd(ctx: &Ctx, report: &Path, rig: Option<&Path>, baseline_m: Option<f64>) -> Result<()> {
    let (baseline, digest) = match (rig, baseline_m) {
        (Some(p), _) => (load_json::<RigFile>(p)?.rig.to_rig()?.baseline_m, digest_inputs(&[p])?),
        (None, Some(b)) => (b, b.to_le_bytes().to_vec()),
        (None, None) => return Err(Error::Config("give --rig or --baseline-m".into())),
    };
    let rows = io::read_report(report)?;
    let d = diagnose_points(
        rows.iter().map(|r| r.zbar_m).collect(),
        rows.iter().map(|r| r.mean_rel_err).collect(),
        baseline,
        &DiagnoseOptions::default(),
    )?;
    let manifest = Manifest::new("diagnose", &digest, None);
    let mut csv = CsvOut::new(
        &manifest,
        &["zbar_m", "mean_rel_err", "residual_constant", "residual_linear"],
    );
    for k in 0..d.zbar_m.len() {
        csv.row([d.zbar_m[k], d.rel_err[k], d.residuals_constant[k], d.residuals_linear[k]].map(|x| format!("{x:.16e}")));
    }
    ctx.write_csv("diagnosis.csv", csv)?;
    let out = DiagnosisOut {
        classification: d.classification.as_str(),
        constant_term: d.constant_term,
        slope_per_m: d.slope,
        implied_delta_alpha_rad: d.implied_delta_alpha_rad,
        variance_ratio: d.variance_ratio,
        zbar_span_fraction: d.zbar_span_fraction,
        constant_rss: d.constant_fit.rss,
        linear_rss: d.linear_fit.rss,
        linear_r_squared: d.linear_fit.r_squared,
    };
    ctx.write_json("diagnosis.json", &out, &manifest)?;
    println!("{}", d.classification.as_str());
    Ok(())
}

fn predict(ctx: &Ctx, model: &Path) -> Result<()> {
    let file: ErrorModelFile = load_json(model)?;
    let base = file.to_input()?;
    let manifest = Manifest::new("predict", &digest_inputs(&[model])?, None);
    let mut csv = CsvOut::new(&manifest, &["zbar_m", "rel_err", "z_drift_m_s"]);
    for z in file.zbar_grid()? {
        let m = crate::calibrate::ErrorModelInput { zbar_m: z, ..base };
        csv.row([z, predict_rel_error(&m), predict_z_drift(&m, z)].map(|x| format!("{x:.16e}")));
    }
    ctx.write_csv("prediction.csv", csv)
}

#[derive(Serialize)]
struct KabschOut {
    frames: usize,
    reference_frames: usize,
    max_abs_error_rad: f64,
    rms_error_rad: f64,
}

fn write_kabsch(ctx: &Ctx, v: &crate::calibrate::AngleVerification, manifest: &Manifest) -> Result<()> {
    let mut csv = CsvOut::new(manifest, &["frame", "measured_rad", "interpolated_rad", "error_rad"]);
    for k in 0..v.frames.len() {
        csv.row([
            v.frames[k].to_string(),
            format!("{:.16e}", v.measured_rad[k]),
            format!("{:.16e}", v.interpolated_rad[k]),
            format!("{:.16e}", v.error_rad[k]),
        ]);
    }
    ctx.write_csv("kabsch.csv", csv)?;
    let out = KabschOut {
        frames: v.frames.len(),
        reference_frames: v.reference_frames,
        max_abs_error_rad: v.max_abs_error_rad,
        rms_error_rad: v.rms_error_rad,
    };
    ctx.write_json("kabsch.json", &out, manifest)?;
    println!(
        "max |error| {:.3e} rad, rms {:.3e} rad over {} frames",
        v.max_abs_error_rad,
        v.rms_error_rad,
        v.frames.len()
    );
    Ok(())
}

fn kabsch_preset(ctx: &Ctx, name: &str, believed: TimingConfig, true_offset_s: f64) -> Result<()> {
    let profile = MotionProfile::preset(name)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`; expected slow, moderate or fast")))?
        .with_hold(0.5);
    let duration = profile.period().unwrap_or(2.0) + 0.6;
    let truth = TimingConfig {
        offset: true_offset_s,
        ..believed
    };
    let mut board = BoardScene::standard(profile, truth, duration);
    board.seed = ctx.seed.unwrap_or(0);
    let acq = synth_board_sequence(&board)?;
    let manifest = Manifest::new("kabsch-verify", name.as_bytes(), Some(board.seed));
    ctx.write_csv("corners.csv", io::corners_csv(&acq.frames, &manifest))?;
    ctx.write_csv("stage_log.csv", io::stage_logs_csv(&[&acq.log], &manifest))?;
    let v = verify_stage_angles(&acq.frames, &acq.log, &believed)?;
    write_kabsch(ctx, &v, &manifest)
}

fn kabsch_files(ctx: &Ctx, corners: &Path, stage_log: &Path, stage_id: Option<String>, believed: TimingConfig) -> Result<()> {
    let frames = io::read_corners(corners)?;
    let mut logs = io::read_stage_logs(stage_log, 1.0 / believed.dt_stage)?;
    let log = match stage_id {
        Some(id) => logs
            .remove(&id)
            .ok_or_else(|| Error::Config(format!("no stage `{id}` in {}", stage_log.display())))?,
        None if logs.len() == 1 => logs.into_values().next().unwrap(),
        None => return Err(Error::Config("stage log holds several stages; pick one with --stage-id".into())),
    };
    let manifest = Manifest::new("kabsch-verify", &digest_inputs(&[corners, stage_log])?, None);
    let v = verify_stage_angles(&frames, &log, &believed)?;
    write_kabsch(ctx, &v, &manifest)
}

#[derive(Serialize)]
struct HomeOut {
    snapshots: usize,
    samples: usize,
    mean_rad: f64,
    median_rad: f64,
    max_abs_rad: f64,
    std_rad: f64,
}

fn home_test(
    ctx: &Ctx,
    snapshots: Option<&Path>,
    intr: CameraIntrinsics,
    count: usize,
    jitter_rad: f64,
    noise_px: f64,
) -> Result<()> {
    let (snaps, manifest) = match snapshots {
        Some(p) => (
            io::read_snapshots(p, &intr.sensor_size)?,
            Manifest::new("home-test", &digest_inputs(&[p])?, None),
        ),
        None => {
            let scene = HomeScene {
                intrinsics: intr,
                pose: CameraStaticPose::new(Side::Left, 0.0, 0.0, 0.0),
                center: Point3::zeros(),
                targets: (0..7)
                    .map(|k| Target {
                        id: k + 1,
                        position: Point3::new(-3.0 + k as f64, 0.5 * (k % 3) as f64 - 0.5, 20.0 + 3.0 * k as f64),
                    })
                    .collect(),
                snapshots: count,
                jitter_sigma_rad: jitter_rad,
                noise_sigma: noise_px,
                seed: ctx.seed.unwrap_or(0),
            };
            let digest = format!("{count} {jitter_rad:e} {noise_px:e}");
            let manifest = Manifest::new("home-test", digest.as_bytes(), Some(scene.seed));
            let (snaps, _) = synth_home_snapshots(&scene)?;
            ctx.write_csv("snapshots.csv", io::snapshots_csv(&snaps, &intr.sensor_size, &manifest))?;
            (snaps, manifest)
        }
    };
    let h = home_repeatability(&snaps, &intr)?;
    let ids: Vec<u32> = snaps[0].keys().copied().collect();
    let mut csv = CsvOut::new(&manifest, &["pair", "target_id", "delta_rad"]);
    for (k, d) in h.deltas_rad.iter().enumerate() {
        csv.row([(k / ids.len()).to_string(), ids[k % ids.len()].to_string(), format!("{d:.16e}")]);
    }
    ctx.write_csv("home.csv", csv)?;
    let out = HomeOut {
        snapshots: snaps.len(),
        samples: h.deltas_rad.len(),
        mean_rad: h.mean_rad,
        median_rad: h.median_rad,
        max_abs_rad: h.max_abs_rad,
        std_rad: h.std_rad,
    };
    ctx.write_json("home.json", &out, &manifest)?;
    println!(
        "home change: median {:.2e} rad, max |.| {:.2e} rad, std {:.2e} rad",
        h.median_rad, h.max_abs_rad, h.std_rad
    );
    Ok(())
}
