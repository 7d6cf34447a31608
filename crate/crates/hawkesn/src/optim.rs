//! Unconstrained quasi-Newton minimization (BFGS) with finite-difference
//! gradients and a backtracking line search.
//!
//! The fitting layer maps every constrained model parameter onto an
//! unconstrained coordinate before calling in here, so the objective is
//! evaluated at feasible points only. Non-finite objective values are
//! treated as infinitely bad and simply rejected by the line search.

/// Convergence thresholds and iteration limits.
#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    /// Stop when the relative objective decrease falls below this.
    pub f_tol: f64,
    /// Stop when the gradient sup-norm falls below this.
    pub g_tol: f64,
    pub max_iters: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { f_tol: 1e-8, g_tol: 1e-6, max_iters: 1000 }
    }
}

/// Result of one local minimization.
#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
    let p = x.len();
    let mut g = vec![0.0; p];
    scratch.clear();
    scratch.extend_from_slice(x);
    for i in 0..p {
        let h = 6e-6 * (1.0 + x[i].abs());
        scratch[i] = x[i] + h;
        let fp = finite_or_inf(f(scratch));
        scratch[i] = x[i] - h;
        let fm = finite_or_inf(f(scratch));
        scratch[i] = x[i];
        g[i] = if fp.is_finite() && fm.is_finite() { (fp - fm) / (2.0 * h) } else { 0.0 };
    }
    g
}

/// Minimize `f` starting from `x0`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut fx = finite_or_inf(f(&x));
    if p == 0 {
        return BfgsOutcome { x, f: fx, iters: 0, converged: true };
    }
    let mut scratch = Vec::with_capacity(p);
    let mut g = gradient(&f, &x, &mut scratch);

    // inverse Hessian approximation, dense row-major
    let mut h_inv = vec![0.0; p * p];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p {
            h[i * p + i] = 1.0;
        }
    };
    reset(&mut h_inv);

    let mut converged = false;
    let mut iters = 0;
    for iter in 0..opts.max_iters {
        iters = iter + 1;
        if g.iter().all(|v| v.abs() <= opts.g_tol) {
            converged = true;
            break;
        }

        // direction d = -H g
        let mut d = vec![0.0; p];
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += h_inv[i * p + j] * g[j];
            }
            d[i] = -acc;
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            // not a descent direction; fall back to steepest descent
            reset(&mut h_inv);
            for i in 0..p {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
            if !(slope < 0.0) {
                converged = true;
                break;
            }
        }

        // backtracking Armijo line search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let ft = finite_or_inf(f(&trial));
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break; // no admissible step: treat the current point as final
        };

        let g_new = gradient(&f, &x_new, &mut scratch);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
            let mut hy = vec![0.0; p];
            for i in 0..p {
                hy[i] = (0..p).map(|j| h_inv[i * p + j] * y[j]).sum();
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..p {
                for j in 0..p {
                    h_inv[i * p + j] += (sy + yhy) * s[i] * s[j] / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }

        let f_prev = fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (f_prev - fx).abs() <= opts.f_tol * (fx.abs() + 1e-12) {
            converged = true;
            break;
        }
    }

    BfgsOutcome { x, f: fx, iters, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
        let out = minimize(f, &[0.0, 0.0], &BfgsOptions::default());
        assert!(out.converged);
        assert_relative_eq!(out.x[0], 3.0, epsilon = 1e-5);
        assert_relative_eq!(out.x[1], -1.0, epsilon = 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let out = minimize(f, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(out.f < 1e-8, "f = {}", out.f);
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn infeasible_regions_are_avoided() {
        // objective is +inf on the left half-plane
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.5).powi(2) + x[1] * x[1]
            }
        };
        let out = minimize(f, &[2.0, 2.0], &BfgsOptions::default());
        assert!(out.f < 1e-6);
        assert!(out.x[0] >= 0.0);
    }

    #[test]
    fn zero_dimensional_problem_is_trivial() {
        let out = minimize(|_: &[f64]| 7.0, &[], &BfgsOptions::default());
        assert!(out.converged);
        assert_eq!(out.f, 7.0);
    }

    #[test]
    fn one_dimensional_exponential_coordinates() {
        // minimize (e^x - 2)^2 over the log coordinate
        let f = |x: &[f64]| (x[0].exp() - 2.0).powi(2);
        let out = minimize(f, &[0.0], &BfgsOptions::default());
        assert_relative_eq!(out.x[0].exp(), 2.0, epsilon = 1e-5);
    }
}
