//! In-image rotation of a stage-mounted board.
//!
//! A camera looking along the stage axis sees the board rotate rigidly in the
//! image plane. The 2D Kabsch rotation between a reference corner set and the
//! current one measures the stage angle independently of the stage log.

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::timing::{camera_time, stage_angle_at, StageLog, TimingConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KabschResult {
    /// Rotation taking `reference` onto `current`, rad, counter-clockwise in
    /// image axes (x right, y down).
    pub angle: f64,
    /// Root-mean-square residual after the optimal rotation and translation, px.
    pub rmsd: f64,
}

fn centroid(pts: &[Pixel]) -> Pixel {
    pts.iter().fold(Pixel::zeros(), |acc, p| acc + p) / pts.len() as f64
}

/// Optimal 2D rotation between two corresponding point sets.
///
/// Both sets are centered first, so a common translation has no effect.
pub fn kabsch_angle(reference: &[Pixel], current: &[Pixel]) -> Result<KabschResult> {
    if reference.len() != current.len() {
        return Err(Error::InvalidInput(format!(
            "point sets differ in size: {} vs {}",
            reference.len(),
            current.len()
        )));
    }
    if reference.len() < 2 {
        return Err(Error::InsufficientData("Kabsch needs at least two points".into()));
    }
    let (cr, cc) = (centroid(reference), centroid(current));
    let (mut cross, mut dot) = (0.0, 0.0);
    for (r, c) in reference.iter().zip(current) {
        let (a, b) = (r - cr, c - cc);
        cross += a.x * b.y - a.y * b.x;
        dot += a.x * b.x + a.y * b.y;
    }
    if cross == 0.0 && dot == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    let angle = cross.atan2(dot);
    let (s, c) = angle.sin_cos();
    let sq: f64 = reference
        .iter()
        .zip(current)
        .map(|(r, q)| {
            let a = r - cr;
            let rotated = Pixel::new(c * a.x - s * a.y, s * a.x + c * a.y);
            (q - cc - rotated).norm_squared()
        })
        .sum();
    Ok(KabschResult {
        angle,
        rmsd: (sq / reference.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleVerification {
    pub frames: Vec<usize>,
    /// Board rotation measured in the image, plus the reference stage angle.
    pub measured_rad: Vec<f64>,
    /// Stage log interpolated at each frame time.
    pub interpolated_rad: Vec<f64>,
    /// `interpolated - measured`.
    pub error_rad: Vec<f64>,
    pub max_abs_error_rad: f64,
    pub rms_error_rad: f64,
    /// Frames averaged into the reference corner set.
    pub reference_frames: usize,
}

/// Compare interpolated stage angles to Kabsch angles of a board sequence.
///
/// The reference corner set is the average over frames taken while the stage
/// still sits at its first logged angle. Frames outside the log are skipped.
pub fn verify_stage_angles(
    frames: &[(usize, Vec<Pixel>)],
    log: &StageLog,
    timing: &TimingConfig,
) -> Result<AngleVerification> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("no board frames".into()));
    }
    let n_corners = frames[0].1.len();
    if frames.iter().any(|(_, c)| c.len() != n_corners) {
        return Err(Error::InvalidInput("corner count varies between frames".into()));
    }
    let still_end = log.sample_time(log.leading_still_samples() - 1);
    let still: Vec<&Vec<Pixel>> = frames
        .iter()
        .filter(|(f, _)| {
            let t = camera_time(*f, timing);
            t >= log.start_time() && t <= still_end
        })
        .map(|(_, c)| c)
        .collect();
    if still.is_empty() {
        return Err(Error::NoHomeSegment { frames: 0, required: 1 });
    }
    let reference: Vec<Pixel> = (0..n_corners)
        .map(|k| still.iter().fold(Pixel::zeros(), |acc, c| acc + c[k]) / still.len() as f64)
        .collect();
    let reference_angle = log.angles[0];

    let mut out = AngleVerification {
        frames: Vec::new(),
        measured_rad: Vec::new(),
        interpolated_rad: Vec::new(),
        error_rad: Vec::new(),
        max_abs_error_rad: 0.0,
        rms_error_rad: 0.0,
        reference_frames: still.len(),
    };
    for (frame, corners) in frames {
        let interpolated = match stage_angle_at(log, camera_time(*frame, timing)) {
            Ok(a) => a,
            Err(Error::OutOfRange { .. }) => continue,
            Err(e) => return Err(e.at_frame(*frame, None)),
        };
        let measured = reference_angle + kabsch_angle(&reference, corners)?.angle;
        out.frames.push(*frame);
        out.measured_rad.push(measured);
        out.interpolated_rad.push(interpolated);
        out.error_rad.push(interpolated - measured);
    }
    if out.frames.is_empty() {
        return Err(Error::InsufficientData("no board frame falls inside the stage log".into()));
    }
    out.max_abs_error_rad = out.error_rad.iter().fold(0.0, |m, e| m.max(e.abs()));
    out.rms_error_rad = (out.error_rad.iter().map(|e| e * e).sum::<f64>() / out.error_rad.len() as f64).sqrt();
    Ok(out)
}
