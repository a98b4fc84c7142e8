//! Standardized (unit-variance) error densities for the variance-equation
//! likelihood: Normal, Student-t rescaled to unit variance, and the
//! generalized error distribution with shape-dependent normalizer
//! λ = sqrt(2^(-2/v)·Γ(1/v)/Γ(3/v)). At shape v = 2 the GED collapses to
//! the standard normal exactly.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorDist {
    Normal,
    StudentT,
    Ged,
}

impl ErrorDist {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorDist::Normal => "normal",
            ErrorDist::StudentT => "student-t",
            ErrorDist::Ged => "ged",
        }
    }

    /// Whether the distribution carries a shape parameter (t: ν, GED: v).
    pub fn has_param(&self) -> bool {
        !matches!(self, ErrorDist::Normal)
    }

    /// Default optimizer starting value for the shape parameter.
    pub fn param_start(&self) -> Option<f64> {
        match self {
            ErrorDist::Normal => None,
            ErrorDist::StudentT => Some(8.0),
            ErrorDist::Ged => Some(1.5),
        }
    }

    pub fn validate_param(&self, param: Option<f64>) -> Result<()> {
        match (self, param) {
            (ErrorDist::Normal, None) => Ok(()),
            (ErrorDist::Normal, Some(_)) => Err(Error::BadParameter(
                "normal errors take no shape parameter".into(),
            )),
            (ErrorDist::StudentT, Some(nu)) if nu > 2.0 => Ok(()),
            (ErrorDist::StudentT, _) => Err(Error::BadParameter(
                "Student-t needs degrees of freedom > 2".into(),
            )),
            (ErrorDist::Ged, Some(v)) if v > 0.0 => Ok(()),
            (ErrorDist::Ged, _) => Err(Error::BadParameter("GED needs shape > 0".into())),
        }
    }
}

/// GED normalizer λ for shape `v`, computed in log space.
pub fn ged_lambda(v: f64) -> f64 {
    (0.5 * (-(2.0 / v) * std::f64::consts::LN_2 + ln_gamma(1.0 / v) - ln_gamma(3.0 / v))).exp()
}

/// Precomputed log-density evaluator for a fixed distribution and shape,
/// used inside the likelihood recursion.
#[derive(Debug, Clone, Copy)]
pub enum DistEval {
    Normal,
    StudentT {
        nu: f64,
        /// lnΓ((ν+1)/2) - lnΓ(ν/2) - ½ln((ν-2)π)
        norm: f64,
    },
    Ged {
        v: f64,
        lambda: f64,
        /// ln v - ln λ - (1 + 1/v)·ln 2 - lnΓ(1/v)
        norm: f64,
    },
}

impl DistEval {
    pub fn new(dist: ErrorDist, param: Option<f64>) -> Result<Self> {
        dist.validate_param(param)?;
        Ok(match dist {
            ErrorDist::Normal => DistEval::Normal,
            ErrorDist::StudentT => {
                let nu = param.expect("validated");
                let norm = ln_gamma((nu + 1.0) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * ((nu - 2.0) * std::f64::consts::PI).ln();
                DistEval::StudentT { nu, norm }
            }
            ErrorDist::Ged => {
                let v = param.expect("validated");
                let lambda = ged_lambda(v);
                let norm = v.ln()
                    - lambda.ln()
                    - (1.0 + 1.0 / v) * std::f64::consts::LN_2
                    - ln_gamma(1.0 / v);
                DistEval::Ged { v, lambda, norm }
            }
        })
    }

    /// Log-density of the standardized (unit-variance) distribution at `z`.
    pub fn logpdf(&self, z: f64) -> f64 {
        match *self {
            DistEval::Normal => -HALF_LN_2PI - 0.5 * z * z,
            DistEval::StudentT { nu, norm } => {
                norm - 0.5 * (nu + 1.0) * (z * z / (nu - 2.0)).ln_1p()
            }
            DistEval::Ged { v, lambda, norm } => norm - 0.5 * (z / lambda).abs().powf(v),
        }
    }

    /// d logpdf / dz.
    pub fn dlogpdf_dz(&self, z: f64) -> f64 {
        match *self {
            DistEval::Normal => -z,
            DistEval::StudentT { nu, .. } => -(nu + 1.0) * z / (nu - 2.0 + z * z),
            DistEval::Ged { v, lambda, .. } => {
                if z == 0.0 {
                    0.0
                } else {
                    -0.5 * v * (z / lambda).abs().powf(v - 1.0) * z.signum() / lambda
                }
            }
        }
    }
}

/// Log-density of the standardized error distribution at `z`, with the
/// shape parameter validated against its domain.
pub fn dist_logpdf(z: f64, dist: ErrorDist, param: Option<f64>) -> Result<f64> {
    Ok(DistEval::new(dist, param)?.logpdf(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ged_shape_two_is_standard_normal() {
        assert_abs_diff_eq!(ged_lambda(2.0), 1.0, epsilon = 1e-12);
        let d0 = dist_logpdf(0.0, ErrorDist::Ged, Some(2.0)).unwrap();
        assert_abs_diff_eq!(d0.exp(), 0.39894228040143265, epsilon = 1e-12);
        let mut z = -5.0;
        while z <= 5.0 {
            let g = dist_logpdf(z, ErrorDist::Ged, Some(2.0)).unwrap();
            let n = dist_logpdf(z, ErrorDist::Normal, None).unwrap();
            assert_abs_diff_eq!(g, n, epsilon = 1e-10);
            z += 0.125;
        }
    }

    #[test]
    fn huge_dof_student_t_approaches_normal() {
        for z in [0.0, 1.0, 2.0] {
            let t = dist_logpdf(z, ErrorDist::StudentT, Some(1e6)).unwrap();
            let n = dist_logpdf(z, ErrorDist::Normal, None).unwrap();
            assert_abs_diff_eq!(t, n, epsilon = 1e-4);
        }
    }

    #[test]
    fn pinned_reference_values() {
        // Pinned from an independent evaluation of the closed forms.
        let cases_t = [
            (0.0, -0.6979278851182101),
            (0.7, -1.1693485872297646),
            (-2.3, -3.7823088782163454),
        ];
        for (z, want) in cases_t {
            let got = dist_logpdf(z, ErrorDist::StudentT, Some(4.75)).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
        let cases_g = [
            (0.0, -0.5158152299598984),
            (0.7, -1.2804532460834164),
            (-2.3, -3.5549254411711093),
        ];
        for (z, want) in cases_g {
            let got = dist_logpdf(z, ErrorDist::Ged, Some(1.16)).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(ged_lambda(1.3), 0.5938257828211388, epsilon = 1e-12);
        assert_abs_diff_eq!(ged_lambda(1.16), 0.4853538584583188, epsilon = 1e-12);
    }

    #[test]
    fn parameter_domains_enforced() {
        assert!(dist_logpdf(0.0, ErrorDist::StudentT, Some(2.0)).is_err());
        assert!(dist_logpdf(0.0, ErrorDist::StudentT, None).is_err());
        assert!(dist_logpdf(0.0, ErrorDist::Ged, Some(0.0)).is_err());
        assert!(dist_logpdf(0.0, ErrorDist::Ged, Some(-1.0)).is_err());
        assert!(dist_logpdf(0.0, ErrorDist::Normal, Some(3.0)).is_err());
        assert!(dist_logpdf(0.0, ErrorDist::Normal, None).is_ok());
    }

    /// Composite Simpson quadrature oracle: a fine grid on [-60, 60] plus
    /// log-substituted tails out to 1e9, which the polynomially decaying
    /// t densities need for 1e-6 accuracy on the second moment.
    fn simpson_moment2(eval: &DistEval) -> (f64, f64) {
        let simpson = |f: &dyn Fn(f64) -> (f64, f64), a: f64, b: f64, steps: usize| {
            let h = (b - a) / steps as f64;
            let mut acc = (0.0, 0.0);
            for i in 0..=steps {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == steps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let (m, v) = f(x);
                acc.0 += w * m;
                acc.1 += w * v;
            }
            (acc.0 * h / 3.0, acc.1 * h / 3.0)
        };
        let core = |z: f64| {
            let pdf = eval.logpdf(z).exp();
            (pdf, z * z * pdf)
        };
        // Tail substitution z = ±60·e^w turns the integrand into
        // z·p(z) and z³·p(z) in w, smooth on a uniform w grid.
        let tail = |w: f64| {
            let z = 60.0 * w.exp();
            let pdf = eval.logpdf(z).exp();
            (z * pdf, z * z * z * pdf)
        };
        let (m0, v0) = simpson(&core, -60.0, 60.0, 120_000);
        let (mt, vt) = simpson(&tail, 0.0, (1e9f64 / 60.0).ln(), 40_000);
        // Both densities here are symmetric, so double one tail.
        (m0 + 2.0 * mt, v0 + 2.0 * vt)
    }

    #[test]
    fn standardized_densities_have_unit_variance() {
        for (dist, param) in [
            (ErrorDist::StudentT, Some(5.0)),
            (ErrorDist::Ged, Some(1.3)),
        ] {
            let eval = DistEval::new(dist, param).unwrap();
            let (mass, var) = simpson_moment2(&eval);
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn z_derivative_matches_finite_differences() {
        let evals = [
            DistEval::new(ErrorDist::Normal, None).unwrap(),
            DistEval::new(ErrorDist::StudentT, Some(4.5)).unwrap(),
            DistEval::new(ErrorDist::Ged, Some(1.3)).unwrap(),
            DistEval::new(ErrorDist::Ged, Some(2.4)).unwrap(),
        ];
        for eval in evals {
            for z in [-3.0, -0.9, -0.1, 0.2, 1.4, 4.0] {
                let h = 1e-6;
                let fd = (eval.logpdf(z + h) - eval.logpdf(z - h)) / (2.0 * h);
                assert_abs_diff_eq!(eval.dlogpdf_dz(z), fd, epsilon = 1e-5);
            }
        }
    }
}
