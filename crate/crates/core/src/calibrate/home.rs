use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel};

#[derive(Debug, Clone, PartialEq)]
pub struct HomeStats {
    /// Home angle change between consecutive snapshots, one value per target
    /// and snapshot pair, rad.
    pub deltas_rad: Vec<f64>,
    pub mean_rad: f64,
    pub median_rad: f64,
    pub max_abs_rad: f64,
    /// Sample standard deviation.
    pub std_rad: f64,
}

/// Home repeatability from still-target snapshots taken after each homing.
///
/// Each target's horizontal image shift between consecutive snapshots,
/// divided by the focal length, is one sample of the home angle change.
/// Every snapshot must see the same target set.
pub fn home_repeatability(snapshots: &[BTreeMap<u32, Pixel>], intrinsics: &CameraIntrinsics) -> Result<HomeStats> {
    if snapshots.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "home repeatability needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    let ids: Vec<u32> = snapshots[0].keys().copied().collect();
    if ids.is_empty() {
        return Err(Error::InsufficientData("snapshots contain no targets".into()));
    }
    if snapshots.iter().any(|s| !s.keys().eq(ids.iter())) {
        return Err(Error::MismatchedTargets);
    }
    let undistorted = snapshots
        .iter()
        .map(|s| {
            s.values()
                .map(|p| intrinsics.undistort(p).map(|q| q.x))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let deltas_rad: Vec<f64> = undistorted
        .windows(2)
        .flat_map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(b, a)| (b - a) / intrinsics.focal_px)
                .collect::<Vec<_>>()
        })
        .collect();
    let n = deltas_rad.len() as f64;
    let mean_rad = deltas_rad.iter().sum::<f64>() / n;
    let std_rad = if deltas_rad.len() > 1 {
        (deltas_rad.iter().map(|d| (d - mean_rad).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = deltas_rad.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_rad = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    Ok(HomeStats {
        max_abs_rad: deltas_rad.iter().fold(0.0, |m, d| m.max(d.abs())),
        deltas_rad,
        mean_rad,
        median_rad,
        std_rad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(shift: f64) -> BTreeMap<u32, Pixel> {
        (1..=4).map(|id| (id, Pixel::new(100.0 * id as f64 + shift, 10.0))).collect()
    }

    #[test]
    fn identical_snapshots_have_zero_spread() {
        let s = vec![snap(0.0); 5];
        let h = home_repeatability(&s, &CameraIntrinsics::ideal(6300.0)).unwrap();
        assert_eq!(h.max_abs_rad, 0.0);
        assert_eq!(h.deltas_rad.len(), 4 * 4);
    }

    #[test]
    fn shift_over_focal() {
        let s = vec![snap(0.0), snap(0.63), snap(0.0)];
        let h = home_repeatability(&s, &CameraIntrinsics::ideal(6300.0)).unwrap();
        assert!(h.deltas_rad[..4].iter().all(|d| (d - 1e-4).abs() < 1e-15));
        assert!(h.deltas_rad[4..].iter().all(|d| (d + 1e-4).abs() < 1e-15));
        assert!((h.max_abs_rad - 1e-4).abs() < 1e-15);
        assert!(h.median_rad.abs() < 1e-15);
    }

    #[test]
    fn mismatched_targets() {
        let mut s = vec![snap(0.0); 3];
        s[1].remove(&2);
        assert!(matches!(
            home_repeatability(&s, &CameraIntrinsics::ideal(6300.0)),
            Err(Error::MismatchedTargets)
        ));
    }
}
