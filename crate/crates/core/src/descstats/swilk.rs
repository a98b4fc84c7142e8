//! Shapiro-Wilk W test via the Royston (1995) AS R94 approximation,
//! valid for sample sizes 3..=5000. The coefficients come from normal
//! order-statistic quantiles with Royston's polynomial corrections to the
//! two largest weights; the p-value uses his normalizing transformation of
//! ln(1 - W).

use crate::error::{Error, Result};
use crate::prob::{normal_cdf, normal_quantile};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5000;

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Antisymmetric weight vector half: a[0] pairs the extreme order
/// statistics, a[nn2-1] the innermost pair.
fn weights(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let mut a: Vec<f64> = (1..=nn2)
        .map(|i| normal_quantile((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let a1 = poly(&C1, rsn) - a[0] / ssumm2;
    let (start, fac) = if n > 5 {
        let a2 = poly(&C2, rsn) - a[1] / ssumm2;
        let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for v in a.iter_mut().skip(start) {
        *v /= -fac;
    }
    // a[i] is now the weight of the (i+1)-th smallest order statistic; the
    // matching largest one gets -a[i].
    a
}

fn p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    let an = n as f64;
    if n == 3 {
        // Exact small-sample distribution.
        const PI6: f64 = 1.909_859_317_102_744; // 6/pi
        let stqr = (0.75_f64).sqrt().asin();
        return (PI6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    let y = (1.0 - w).ln();
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -0.0006714];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    let (z, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        (-(gamma - y).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let log_n = an.ln();
        (y, poly(&C5, log_n), poly(&C6, log_n).exp())
    };
    1.0 - normal_cdf((z - m) / s)
}

/// Shapiro-Wilk statistic and p-value for `sample`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::SampleSize {
            got: n,
            min: MIN_N,
            max: MAX_N,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    if sorted[n - 1] - sorted[0] <= 0.0 {
        return Err(Error::ZeroVariance("Shapiro-Wilk W"));
    }

    let a = weights(n);
    // W as the squared correlation between the antisymmetric weights and
    // the order statistics; the weights sum to zero by construction.
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ssx: f64 = sorted.iter().map(|x| (x - mean) * (x - mean)).sum();
    let mut sax = 0.0;
    let mut ssa = 0.0;
    for (i, &w) in a.iter().enumerate() {
        sax += w * (sorted[n - 1 - i] - sorted[i]);
        ssa += 2.0 * w * w;
    }
    let w = ((sax * sax) / (ssa * ssx)).clamp(0.0, 1.0);
    Ok((w, p_value(w, n)))
}

#[cfg(test)]
pub(super) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matches_reference_implementation_n30() {
        // LCG-generated uniforms, x_{k+1} = (1103515245 x + 12345) mod 2^31,
        // x_0 = 42; expected values pinned from an independent reference
        // implementation of AS R94.
        let sample = lcg_uniforms(42, 30);
        let (w, p) = shapiro_wilk(&sample).unwrap();
        assert_abs_diff_eq!(w, 0.9513324903444182, epsilon = 1e-4);
        assert_abs_diff_eq!(p, 0.18351941990851556, epsilon = 1e-4);
    }

    #[test]
    fn matches_reference_implementation_n12() {
        let sample = [
            0.1, -0.5, 0.3, 1.2, -0.8, 0.4, -0.2, 0.9, -0.3, 0.6, -0.1, 0.7,
        ];
        let (w, p) = shapiro_wilk(&sample).unwrap();
        assert_abs_diff_eq!(w, 0.9870932286316234, epsilon = 1e-4);
        assert_abs_diff_eq!(p, 0.9986011455761091, epsilon = 1e-4);
    }

    #[test]
    fn near_perfect_normal_ordering_scores_high() {
        let sample: Vec<f64> = (1..=50)
            .map(|i| normal_quantile((i as f64 - 0.5) / 50.0))
            .collect();
        let (w, _) = shapiro_wilk(&sample).unwrap();
        assert!(w > 0.99, "W = {w}");
    }

    #[test]
    fn sample_size_limits() {
        assert!(matches!(
            shapiro_wilk(&[1.0, 2.0]),
            Err(Error::SampleSize { got: 2, .. })
        ));
        let big = vec![0.0; 5001];
        assert!(matches!(
            shapiro_wilk(&big),
            Err(Error::SampleSize { got: 5001, .. })
        ));
        // n = 3 exact branch.
        let (w, p) = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!(w > 0.99 && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn constant_sample_rejected() {
        assert!(matches!(
            shapiro_wilk(&[5.0; 40]),
            Err(Error::ZeroVariance(_))
        ));
    }

    pub fn lcg_uniforms(seed: u64, n: usize) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = (1103515245 * state + 12345) % (1 << 31);
                state as f64 / (1u64 << 31) as f64
            })
            .collect()
    }
}
