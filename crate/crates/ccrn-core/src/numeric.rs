//! Small numerical kernels shared by the coverage analysis.
//!
//! Regularized incomplete gamma functions with integer-shape fast paths,
//! Poisson/negative-binomial probability weights, and an adaptive Simpson
//! rule for semi-infinite integrals.

use statrs::function::gamma::{gamma_lr, gamma_ur};

/// Regularized upper incomplete gamma `Q(m, x) = Gamma(m, x) / Gamma(m)` for
/// a positive integer shape.
///
/// Uses the finite-sum identity `Q(m, x) = exp(-x) * sum_{i<m} x^i / i!`;
/// falls back to the continued-fraction implementation once the series
/// underflows.
pub fn upper_gamma_reg_int(m: u32, x: f64) -> f64 {
    assert!(m >= 1, "shape must be a positive integer");
    if x <= 0.0 {
        return 1.0;
    }
    if x > 700.0 {
        // exp(-x) underflows; the library routine works in log space.
        return gamma_ur(m as f64, x);
    }
    let mut term = (-x).exp();
    let mut sum = term;
    for i in 1..m {
        term *= x / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Regularized lower incomplete gamma `P(m, x)` for a positive integer shape.
pub fn lower_gamma_reg_int(m: u32, x: f64) -> f64 {
    1.0 - upper_gamma_reg_int(m, x)
}

/// Regularized lower incomplete gamma for a real shape.
pub fn lower_gamma_reg(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(a, x)
}

/// CDF of a unit-mean Gamma(shape `m`, rate `m`) variable at `x`.
pub fn gamma_unit_mean_cdf(m: u32, x: f64) -> f64 {
    lower_gamma_reg_int(m, m as f64 * x)
}

/// Poisson probabilities `pmf(i; mu)` for `i = 0..len`.
///
/// Computed iteratively; for large `mu` the leading `exp(-mu)` underflows to
/// zero, which is the correct limit for every fixed `i`.
pub fn poisson_weights(mu: f64, len: usize) -> Vec<f64> {
    debug_assert!(mu >= 0.0);
    let mut w = Vec::with_capacity(len);
    let mut term = (-mu).exp();
    for i in 0..len {
        if i > 0 {
            term *= mu / i as f64;
        }
        w.push(term);
    }
    w
}

/// Negative-binomial probabilities `pmf(j; r, p) = C(r+j-1, j) (1-p)^r p^j`
/// for `j = 0..len`, with integer `r >= 1` and `p` in `[0, 1)`.
pub fn negative_binomial_weights(r: u32, p: f64, len: usize) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&p));
    let mut w = Vec::with_capacity(len);
    let mut term = (1.0 - p).powi(r as i32);
    for j in 0..len {
        if j > 0 {
            term *= (r as f64 + j as f64 - 1.0) / j as f64 * p;
        }
        w.push(term);
    }
    w
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Achieved absolute error bound estimate.
    pub error_bound: f64,
    pub converged: bool,
}

const MAX_DEPTH: u32 = 48;

/// Integrate `f` over `[0, inf)` to absolute tolerance `abs_tol` using the
/// substitution `z = t / (1 - t)` on `[0, 1)` and adaptive Simpson refinement.
///
/// The integrand must decay at infinity; the transformed integrand is
/// evaluated as zero at `t = 1`.
pub fn integrate_zero_to_inf<F: Fn(f64) -> f64>(f: F, abs_tol: f64) -> QuadResult {
    let g = |t: f64| -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - t;
        let z = t / one_minus;
        let v = f(z) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_adaptive(&g, 0.0, 1.0, abs_tol)
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> QuadResult {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut achieved = 0.0;
    let mut converged = true;
    let value = simpson_step(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        abs_tol,
        MAX_DEPTH,
        &mut achieved,
        &mut converged,
    );
    QuadResult { value, error_bound: achieved, converged }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    achieved: &mut f64,
    converged: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = (left + right - whole) / 15.0;
    if err.abs() <= tol || depth == 0 {
        if depth == 0 && err.abs() > tol {
            *converged = false;
        }
        *achieved += err.abs();
        return left + right + err;
    }
    let half = 0.5 * tol;
    simpson_step(f, a, m, fa, flm, fm, left, half, depth - 1, achieved, converged)
        + simpson_step(f, m, b, fm, frm, fb, right, half, depth - 1, achieved, converged)
}
