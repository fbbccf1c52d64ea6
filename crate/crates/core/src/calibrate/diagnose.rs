use crate::error::{Error, Result};
use crate::fit::{fit_constant, fit_line, ConstantFit, LineFit};
use crate::reconstruct::DistanceReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Relative error flat in mean depth: baseline (or focal scale) error.
    BaselineDominated,
    /// Relative error linear in mean depth: relative yaw error.
    OrientationDominated,
    /// Mean-depth span too short to tell the two apart.
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::BaselineDominated => "baseline_dominated",
            Classification::OrientationDominated => "orientation_dominated",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnoseOptions {
    /// Residual-variance reduction the linear model must achieve over the constant one.
    pub variance_ratio_threshold: f64,
    /// Minimum mean-depth span, as a fraction of the mean of the mean depths.
    pub min_span_fraction: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            variance_ratio_threshold: 4.0,
            min_span_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosisResult {
    pub classification: Classification,
    /// Estimate of `dd/d + dOmega/Omega`: the constant fit, or the intercept
    /// of the linear fit when the orientation model is selected.
    pub constant_term: f64,
    /// Slope of the linear fit, 1/m.
    pub slope: f64,
    /// `slope * d / 2`, attributed to the right camera's yaw.
    pub implied_delta_alpha_rad: f64,
    pub constant_fit: ConstantFit,
    pub linear_fit: LineFit,
    /// Constant-model RSS over linear-model RSS.
    pub variance_ratio: f64,
    pub zbar_span_fraction: f64,
    pub zbar_m: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub residuals_constant: Vec<f64>,
    pub residuals_linear: Vec<f64>,
}

/// Classify the dominant calibration error from pair mean relative errors vs mean depth.
pub fn diagnose(report: &DistanceReport, baseline_m: f64, opts: &DiagnoseOptions) -> Result<DiagnosisResult> {
    let zbar: Vec<f64> = report.pairs.iter().map(|p| p.zbar_m).collect();
    let rel: Vec<f64> = report.pairs.iter().map(|p| p.mean_rel_err).collect();
    diagnose_points(zbar, rel, baseline_m, opts)
}

/// [`diagnose`] on bare `(zbar, mean relative error)` columns.
pub fn diagnose_points(zbar: Vec<f64>, rel: Vec<f64>, baseline_m: f64, opts: &DiagnoseOptions) -> Result<DiagnosisResult> {
    if zbar.len() != rel.len() {
        return Err(Error::InvalidInput("zbar and error columns differ in length".into()));
    }
    if zbar.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "diagnosis needs at least 3 target pairs, got {}",
            zbar.len()
        )));
    }
    if !(baseline_m > 0.0) {
        return Err(Error::InvalidInput("baseline must be positive".into()));
    }
    let constant_fit = fit_constant(&rel)?;
    let linear_fit = fit_line(&zbar, &rel)?;

    let (lo, hi) = zbar
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
    let mean_z = zbar.iter().sum::<f64>() / zbar.len() as f64;
    let zbar_span_fraction = (hi - lo) / mean_z;

    let variance_ratio = if constant_fit.rss == 0.0 {
        1.0
    } else if linear_fit.rss == 0.0 {
        f64::INFINITY
    } else {
        constant_fit.rss / linear_fit.rss
    };

    let classification = if zbar_span_fraction < opts.min_span_fraction {
        Classification::Inconclusive
    } else if variance_ratio >= opts.variance_ratio_threshold {
        Classification::OrientationDominated
    } else {
        Classification::BaselineDominated
    };
    let constant_term = match classification {
        Classification::OrientationDominated => linear_fit.intercept,
        _ => constant_fit.value,
    };

    Ok(DiagnosisResult {
        classification,
        constant_term,
        slope: linear_fit.slope,
        implied_delta_alpha_rad: linear_fit.slope * baseline_m / 2.0,
        residuals_constant: rel.iter().map(|r| r - constant_fit.value).collect(),
        residuals_linear: zbar.iter().zip(&rel).map(|(z, r)| r - linear_fit.predict(*z)).collect(),
        constant_fit,
        linear_fit,
        variance_ratio,
        zbar_span_fraction,
        zbar_m: zbar,
        rel_err: rel,
    })
}
