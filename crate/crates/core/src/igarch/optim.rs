//! Minimizers used by the variance-equation MLE: a Nelder-Mead simplex for
//! the derivative-free warm-up and BFGS with a backtracking line search for
//! the quasi-Newton refinement. Objectives may return non-finite values for
//! infeasible points; both methods treat those as very bad.

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

fn guard(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        1e300
    }
}

/// Nelder-Mead simplex minimization with a fixed evaluation budget.
/// Returns the best vertex found; convergence is left to the quasi-Newton
/// stage that follows.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    max_evals: usize,
) -> OptimResult {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        guard(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for j in 0..dim {
        let mut x = x0.to_vec();
        x[j] += step[j];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("guarded values"));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() < 1e-12 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let reflect: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + alpha * (centroid[j] - simplex[dim].0[j]))
            .collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[dim] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + rho * (simplex[dim].0[j] - centroid[j]))
                .collect();
            let fc = eval(&contract, &mut evals);
            if fc < simplex[dim].1 {
                simplex[dim] = (contract, fc);
            } else {
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = (0..dim)
                        .map(|j| best_x[j] + sigma * (vertex.0[j] - best_x[j]))
                        .collect();
                    let fs = eval(&shrunk, &mut evals);
                    *vertex = (shrunk, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("guarded values"));
    OptimResult {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        converged: false,
    }
}

/// BFGS minimization with an Armijo backtracking line search.
///
/// Converges when the gradient norm drops below `gtol` or two consecutive
/// iterations improve the objective by less than `ftol`. A failed line
/// search first resets the curvature estimate and retries with steepest
/// descent; a second consecutive failure stops, reporting convergence only
/// if the gradient is already small (a hard infeasibility wall leaves a
/// large gradient and is reported as non-convergence).
pub fn bfgs<F, G>(
    mut f: F,
    mut grad: G,
    x0: &[f64],
    ftol: f64,
    gtol: f64,
    max_iterations: usize,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut fx = guard(f(&x));
    let mut g = grad(&x);
    // Inverse Hessian approximation, dense row-major.
    let mut h = vec![0.0; dim * dim];
    let reset = |h: &mut [f64]| {
        h.fill(0.0);
        for j in 0..dim {
            h[j * dim + j] = 1.0;
        }
    };
    reset(&mut h);

    let mut converged = false;
    let mut ls_failures = 0usize;
    let mut small_improvements = 0usize;
    for _ in 0..max_iterations {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < gtol {
            converged = true;
            break;
        }
        // d = -H g
        let mut d = vec![0.0; dim];
        for r in 0..dim {
            let mut acc = 0.0;
            for c in 0..dim {
                acc += h[r * dim + c] * g[c];
            }
            d[r] = -acc;
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        if slope >= 0.0 {
            reset(&mut h);
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        // Backtracking Armijo search.
        let mut step = 1.0;
        let mut x_new;
        let mut f_new;
        let mut tries = 0;
        loop {
            x_new = (0..dim).map(|j| x[j] + step * d[j]).collect::<Vec<_>>();
            f_new = guard(f(&x_new));
            if f_new <= fx + 1e-4 * step * slope {
                break;
            }
            step *= 0.5;
            tries += 1;
            if tries > 40 {
                break;
            }
        }
        if tries > 40 {
            ls_failures += 1;
            if ls_failures == 1 {
                reset(&mut h);
                continue;
            }
            converged = gnorm < 1e-3;
            break;
        }
        ls_failures = 0;

        let g_new = grad(&x_new);
        let s: Vec<f64> = (0..dim).map(|j| x_new[j] - x[j]).collect();
        let yv: Vec<f64> = (0..dim).map(|j| g_new[j] - g[j]).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if sy > 1e-12 {
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; dim];
            for r in 0..dim {
                let mut acc = 0.0;
                for c in 0..dim {
                    acc += h[r * dim + c] * yv[c];
                }
                hy[r] = acc;
            }
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for r in 0..dim {
                for c in 0..dim {
                    h[r * dim + c] += rho * rho * yhy * s[r] * s[c]
                        - rho * (hy[r] * s[c] + s[r] * hy[c])
                        + rho * s[r] * s[c];
                }
            }
        }
        if improvement.abs() < ftol {
            small_improvements += 1;
            if small_improvements >= 2 {
                converged = true;
                break;
            }
        } else {
            small_improvements = 0;
        }
    }
    OptimResult {
        x,
        f: fx,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    }

    #[test]
    fn bfgs_minimizes_rosenbrock() {
        let r = bfgs(rosenbrock, rosenbrock_grad, &[-1.2, 1.0], 1e-12, 1e-9, 500);
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + 5.0;
        let r = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 400);
        assert_abs_diff_eq!(r.x[0], 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.x[1], -1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.f, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn optimizers_survive_infeasible_regions() {
        // Objective undefined left of x = 0.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                (x[0].ln()).powi(2) + x[1] * x[1]
            }
        };
        let g = |x: &[f64]| {
            if x[0] <= 0.0 {
                vec![0.0, 0.0]
            } else {
                vec![2.0 * x[0].ln() / x[0], 2.0 * x[1]]
            }
        };
        let nm = nelder_mead(f, &[0.5, 0.3], &[0.2, 0.2], 300);
        let r = bfgs(f, g, &nm.x, 1e-10, 1e-8, 200);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.x[1], 0.0, epsilon = 1e-6);
    }
}
