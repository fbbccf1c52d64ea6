/// Parameters and parameter errors of the first-order stereo error model.
///
/// `psi = alpha + phi` is the relative yaw of the cameras
/// (`alpha = alpha_R - alpha_L`, `phi = phi_R - phi_L`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorModelInput {
    pub focal_px: f64,
    pub baseline_m: f64,
    pub psi_rad: f64,
    pub delta_baseline_m: f64,
    pub delta_focal_px: f64,
    pub delta_psi_rad: f64,
    pub zbar_m: f64,
    /// Relative rotational speed `d(phi_R - phi_L)/dt`, rad/s.
    pub speed_rad_s: f64,
}

/// `dd/d + dOmega/Omega + 2 Zbar/(Omega d) (psi dOmega + Omega dpsi)`.
pub fn predict_rel_error(m: &ErrorModelInput) -> f64 {
    let (f, d) = (m.focal_px, m.baseline_m);
    m.delta_baseline_m / d
        + m.delta_focal_px / f
        + 2.0 * m.zbar_m / (f * d) * (m.psi_rad * m.delta_focal_px + f * m.delta_psi_rad)
}

/// Time drift of the depth error of a still target at depth `z`:
/// `Z^2/(Omega d) * dphi/dt * dOmega`.
pub fn predict_z_drift(m: &ErrorModelInput, z: f64) -> f64 {
    z * z / (m.focal_px * m.baseline_m) * m.speed_rad_s * m.delta_focal_px
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ErrorModelInput {
        ErrorModelInput {
            focal_px: 6314.8,
            baseline_m: 10.7,
            zbar_m: 30.0,
            ..Default::default()
        }
    }

    #[test]
    fn no_errors_no_prediction() {
        assert_eq!(predict_rel_error(&base()), 0.0);
        assert_eq!(predict_z_drift(&base(), 30.0), 0.0);
    }

    #[test]
    fn baseline_error_is_flat_in_depth() {
        let mut m = base();
        m.delta_baseline_m = 0.1605;
        for z in [20.0, 30.0, 40.0] {
            m.zbar_m = z;
            assert!((predict_rel_error(&m) - 0.015).abs() < 1e-12);
        }
    }

    #[test]
    fn yaw_error_slope() {
        let mut m = base();
        m.delta_psi_rad = 0.003;
        m.zbar_m = 20.0;
        let a = predict_rel_error(&m);
        m.zbar_m = 40.0;
        let b = predict_rel_error(&m);
        let slope = (b - a) / 20.0;
        assert!((slope - 2.0 * 0.003 / 10.7).abs() < 1e-15);
        assert!((slope - 5.61e-4).abs() < 1e-6);
    }

    #[test]
    fn depth_drift_example_and_quadratic_law() {
        let mut m = base();
        m.speed_rad_s = -6f64.to_radians();
        m.delta_focal_px = 41.61;
        let drift = predict_z_drift(&m, 30.0);
        assert!((drift.abs() - 0.10472 * 900.0 * 41.61 / (6314.8 * 10.7)).abs() < 1e-5);
        assert!((drift.abs() - 0.058).abs() < 5e-4);
        assert!((predict_z_drift(&m, 60.0) / drift - 4.0).abs() < 1e-12);
    }
}
