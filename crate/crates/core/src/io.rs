//! CSV and JSON files read and written by the command-line tool.
//!
//! Every CSV starts with one `#` manifest comment line, then a header row.
//! Readers skip `#` lines. Floats are written in `{:.16e}` form, which
//! round-trips an `f64` exactly.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{from_top_left, to_top_left, Pixel, RigConfig, Side};
use crate::reconstruct::{DetectionSet, DistanceReport, FrameDetections, Trajectory3D};
use crate::simulate::GroundTruth;
use crate::timing::StageLog;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| format!(" line {}", p.line())).unwrap_or_default();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        kind => Error::Config(format!("{}{line}: {kind:?}", path.display())),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of one output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the input configuration bytes, concatenated in argument order.
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp_unix: u64,
}

impl Manifest {
    /// `timestamp_unix` honours `SOURCE_DATE_EPOCH` for reproducible output.
    pub fn new(command: &str, config_bytes: &[u8], seed: Option<u64>) -> Self {
        let timestamp_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            timestamp_unix,
        }
    }

    pub fn comment_line(&self) -> String {
        let mut line = format!(
            "# comove {} version={} config_sha256={}",
            self.command, self.version, self.config_sha256
        );
        if let Some(seed) = self.seed {
            line += &format!(" seed={seed}");
        }
        line + &format!(" timestamp={}\n", self.timestamp_unix)
    }
}

/// Write `bytes` to a temporary file beside `path`, then rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

/// Serialize `value` as pretty JSON with a `manifest` member added.
pub fn write_json<T: Serialize>(path: &Path, value: &T, manifest: &Manifest) -> Result<()> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert(
            "manifest".into(),
            serde_json::to_value(manifest).map_err(|e| Error::InvalidInput(e.to_string()))?,
        );
    }
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Build a CSV in memory: manifest line, header, rows.
pub struct CsvOut {
    wtr: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(manifest: &Manifest, header: &[&str]) -> Self {
        let mut buf = manifest.comment_line().into_bytes();
        buf.reserve(1 << 16);
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(header).expect("in-memory write");
        CsvOut { wtr }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.wtr.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.wtr.into_inner().expect("in-memory flush")
    }

    pub fn write(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.into_bytes())
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

/// Strip the manifest line, leaving header and rows.
pub fn csv_body(bytes: &[u8]) -> &[u8] {
    match bytes.first() {
        Some(b'#') => bytes.iter().position(|&b| b == b'\n').map_or(&[][..], |i| &bytes[i + 1..]),
        _ => bytes,
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "left" | "L" => Some(Side::Left),
        "right" | "R" => Some(Side::Right),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
struct DetectionRow {
    camera: String,
    frame: usize,
    target_id: u32,
    u_px: f64,
    v_px: f64,
}

pub const DETECTIONS_HEADER: [&str; 5] = ["camera", "frame", "target_id", "u_px", "v_px"];

/// Detections in top-left pixel coordinates, converted with each camera's sensor size.
pub fn detections_csv(det: &DetectionSet, rig: &RigConfig, manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(manifest, &DETECTIONS_HEADER);
    for fd in &det.frames {
        for side in Side::BOTH {
            let sensor = rig.camera(side).intrinsics.sensor_size;
            for (id, px) in fd.camera(side) {
                let p = to_top_left(px, &sensor);
                out.row([side.to_string(), fd.frame.to_string(), id.to_string(), f(p.x), f(p.y)]);
            }
        }
    }
    out
}

pub fn read_detections(path: &Path, rig: &RigConfig) -> Result<DetectionSet> {
    let mut frames: BTreeMap<usize, FrameDetections> = BTreeMap::new();
    for (k, row) in read_rows::<DetectionRow>(path)?.into_iter().enumerate() {
        let side = parse_side(&row.camera).ok_or_else(|| {
            Error::Config(format!(
                "{} row {}: camera `{}` is not `left` or `right`",
                path.display(),
                k + 1,
                row.camera
            ))
        })?;
        let px = from_top_left(&Pixel::new(row.u_px, row.v_px), &rig.camera(side).intrinsics.sensor_size);
        frames
            .entry(row.frame)
            .or_insert_with(|| FrameDetections::new(row.frame))
            .insert(side, row.target_id, px);
    }
    if frames.is_empty() {
        return Err(Error::InsufficientData(format!("{}: no detections", path.display())));
    }
    Ok(DetectionSet {
        frames: frames.into_values().collect(),
    })
}

#[derive(Debug, Deserialize)]
struct StageRow {
    stage_id: String,
    sample_index: i64,
    angle_rad: f64,
}

pub fn stage_logs_csv(logs: &[&StageLog], manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(manifest, &["stage_id", "sample_index", "angle_rad"]);
    for log in logs {
        for (k, a) in log.samples() {
            out.row([log.stage_id.clone(), k.to_string(), f(a)]);
        }
    }
    out
}

/// Stage logs keyed by `stage_id`, all sampled at `rate_hz`.
pub fn read_stage_logs(path: &Path, rate_hz: f64) -> Result<BTreeMap<String, StageLog>> {
    let mut samples: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for row in read_rows::<StageRow>(path)? {
        samples.entry(row.stage_id).or_default().push((row.sample_index, row.angle_rad));
    }
    samples
        .into_iter()
        .map(|(id, s)| {
            let log = StageLog::from_samples(id.clone(), &s, rate_hz)
                .map_err(|e| Error::Config(format!("{}: stage `{id}`: {e}", path.display())))?;
            Ok((id, log))
        })
        .collect()
}

/// Pick the logs for the two cameras: ids `left`/`right`, or exactly two logs in id order.
pub fn camera_logs(mut logs: BTreeMap<String, StageLog>) -> Result<(StageLog, StageLog)> {
    if let (Some(l), Some(r)) = (logs.remove("left"), logs.remove("right")) {
        return Ok((l, r));
    }
    if logs.len() == 2 {
        let mut it = logs.into_values();
        return Ok((it.next().unwrap(), it.next().unwrap()));
    }
    Err(Error::Config(
        "stage log file must hold stages `left` and `right`, or exactly two stages".into(),
    ))
}

pub fn trajectories_csv(trajs: &[Trajectory3D], manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(manifest, &["target_id", "frame", "x_m", "y_m", "z_m"]);
    for t in trajs {
        for (frame, p) in &t.points {
            out.row([t.target_id.to_string(), frame.to_string(), f(p.x), f(p.y), f(p.z)]);
        }
    }
    out
}

/// One row of the pairwise distance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub target_a: u32,
    pub target_b: u32,
    pub zbar_m: f64,
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    pub n_frames: usize,
}

pub fn report_csv(report: &DistanceReport, manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(
        manifest,
        &["target_a", "target_b", "zbar_m", "mean_rel_err", "std_rel_err", "n_frames"],
    );
    for p in &report.pairs {
        out.row([
            p.target_a.to_string(),
            p.target_b.to_string(),
            f(p.zbar_m),
            f(p.mean_rel_err),
            f(p.std_rel_err),
            p.n_frames().to_string(),
        ]);
    }
    out
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    read_rows(path)
}

/// Per-frame distances and relative errors, one row per pair and frame.
pub fn per_frame_csv(report: &DistanceReport, manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(
        manifest,
        &["target_a", "target_b", "frame", "measured_m", "reconstructed_m", "rel_err"],
    );
    for p in &report.pairs {
        for ((frame, d), e) in p.frames.iter().zip(&p.reconstructed_m).zip(&p.rel_err) {
            out.row([
                p.target_a.to_string(),
                p.target_b.to_string(),
                frame.to_string(),
                f(p.measured_m),
                f(*d),
                f(*e),
            ]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTarget {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDistance {
    pub target_a: u32,
    pub target_b: u32,
    pub distance_m: f64,
}

/// Ground truth of a simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub targets: Vec<TruthTarget>,
    /// Measured pairwise distances, `target_a < target_b`.
    pub distances: Vec<TruthDistance>,
    pub home_offsets_rad: [f64; 2],
    #[serde(default, skip_serializing)]
    pub manifest: Option<serde_json::Value>,
}

impl TruthFile {
    pub fn from_truth(t: &GroundTruth) -> Self {
        TruthFile {
            targets: t
                .positions
                .iter()
                .map(|(&id, p)| TruthTarget {
                    id,
                    x_m: p.x,
                    y_m: p.y,
                    z_m: p.z,
                })
                .collect(),
            distances: t
                .distances
                .iter()
                .map(|(&(a, b), &d)| TruthDistance {
                    target_a: a,
                    target_b: b,
                    distance_m: d,
                })
                .collect(),
            home_offsets_rad: t.home_offsets,
            manifest: None,
        }
    }

    /// Distances keyed `(a, b)` with `a < b`.
    pub fn distance_map(&self) -> BTreeMap<(u32, u32), f64> {
        self.distances
            .iter()
            .map(|d| ((d.target_a.min(d.target_b), d.target_a.max(d.target_b)), d.distance_m))
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct SnapshotRow {
    snapshot: usize,
    target_id: u32,
    u_px: f64,
    v_px: f64,
}

/// Still-target snapshots in top-left pixels, converted with `sensor`.
pub fn read_snapshots(path: &Path, sensor: &Pixel) -> Result<Vec<BTreeMap<u32, Pixel>>> {
    let mut by_snap: BTreeMap<usize, BTreeMap<u32, Pixel>> = BTreeMap::new();
    for row in read_rows::<SnapshotRow>(path)? {
        by_snap
            .entry(row.snapshot)
            .or_default()
            .insert(row.target_id, from_top_left(&Pixel::new(row.u_px, row.v_px), sensor));
    }
    Ok(by_snap.into_values().collect())
}

pub fn snapshots_csv(snaps: &[BTreeMap<u32, Pixel>], sensor: &Pixel, manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(manifest, &["snapshot", "target_id", "u_px", "v_px"]);
    for (k, s) in snaps.iter().enumerate() {
        for (id, px) in s {
            let p = to_top_left(px, sensor);
            out.row([k.to_string(), id.to_string(), f(p.x), f(p.y)]);
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct CornerRow {
    frame: usize,
    corner: usize,
    u_px: f64,
    v_px: f64,
}

/// Board corners per frame; every frame must list the same corner indices.
/// Any fixed pixel origin works, since the fitted rotation ignores translation.
pub fn read_corners(path: &Path) -> Result<Vec<(usize, Vec<Pixel>)>> {
    let mut by_frame: BTreeMap<usize, BTreeMap<usize, Pixel>> = BTreeMap::new();
    for row in read_rows::<CornerRow>(path)? {
        by_frame
            .entry(row.frame)
            .or_default()
            .insert(row.corner, Pixel::new(row.u_px, row.v_px));
    }
    let first: Option<Vec<usize>> = by_frame.values().next().map(|m| m.keys().copied().collect());
    let mut out = Vec::with_capacity(by_frame.len());
    for (frame, corners) in by_frame {
        if Some(corners.keys().copied().collect::<Vec<_>>()) != first {
            return Err(Error::Config(format!(
                "{}: frame {frame} lists a different corner set",
                path.display()
            )));
        }
        out.push((frame, corners.into_values().collect()));
    }
    Ok(out)
}

pub fn corners_csv(frames: &[(usize, Vec<Pixel>)], manifest: &Manifest) -> CsvOut {
    let mut out = CsvOut::new(manifest, &["frame", "corner", "u_px", "v_px"]);
    for (frame, corners) in frames {
        for (k, p) in corners.iter().enumerate() {
            out.row([frame.to_string(), k.to_string(), f(p.x), f(p.y)]);
        }
    }
    out
}
