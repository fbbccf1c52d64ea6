//! Ordinary least-squares fits used by the calibration procedures.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Mean of the abscissae.
    pub x_mean: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Standard error of the fitted line at `x`.
    pub fn predict_se(&self, x: f64) -> f64 {
        let var = self.intercept_se.powi(2) + self.slope_se.powi(2) * (x * x - 2.0 * x * self.x_mean);
        var.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFit {
    pub value: f64,
    pub value_se: f64,
    pub rss: f64,
    pub n: usize,
}

pub fn fit_constant(y: &[f64]) -> Result<ConstantFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InsufficientData("constant fit needs at least one point".into()));
    }
    let value = y.iter().sum::<f64>() / n as f64;
    let rss = y.iter().map(|v| (v - value).powi(2)).sum::<f64>();
    let value_se = if n > 1 {
        (rss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(ConstantFit {
        value,
        value_se,
        rss,
        n,
    })
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData("line fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("line fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = rss / (n - 2) as f64;
        (
            (s2 / sxx).sqrt(),
            (s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        intercept,
        slope,
        slope_se,
        intercept_se,
        rss,
        r_squared,
        n,
        x_mean: mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.05 * v + 3.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 0.05).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!(f.rss < 1e-20);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn slope_standard_error_matches_textbook() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        let f = fit_line(&x, &y).unwrap();
        // slope 0.8, residuals (-0.3, 0.9, -0.9, 0.3), rss 1.8, sxx 5
        assert!((f.slope - 0.8).abs() < 1e-12);
        assert!((f.rss - 1.8).abs() < 1e-12);
        assert!((f.slope_se - (0.9f64 / 5.0).sqrt()).abs() < 1e-12);
        // At the mean abscissa the line's standard error is s / sqrt(n).
        assert!((f.predict_se(2.5) - (0.9f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fit_line(&[1.0], &[0.0]).is_err());
        assert!(fit_constant(&[]).is_err());
        let c = fit_constant(&[1.0, 3.0]).unwrap();
        assert_eq!(c.value, 2.0);
        assert_eq!(c.rss, 2.0);
    }
}
