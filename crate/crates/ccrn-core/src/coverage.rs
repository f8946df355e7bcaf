//! Coverage probability analysis.
//!
//! For each phase the SIDNR outage event splits on whether the fading
//! toward the protected primary user keeps the transmitter under its ITC
//! budget. With unit-mean Gamma variables `X` (serving link), `Y` (link to
//! the PU), and `Z` (PBS interference link), the phase CDF is
//!
//! ```text
//! F = Pr[X < Z*I + E + S, Y < L]          (delta term, full power)
//!   + Pr[X < Z*Y*U + Y*V + E, Y > L]      (upsilon term, power capped)
//! ```
//!
//! where the calligraphic ratios are threshold-scaled interference and
//! noise terms and `L` is the ITC margin. Both terms reduce to finite
//! Poisson / negative-binomial mixtures for integer fading shapes; the
//! upsilon term keeps one smooth semi-infinite integral over `Z`, evaluated
//! by adaptive quadrature instead of its special-function closed form.
//!
//! The Monte Carlo estimator simulates the same per-trial physics (fading
//! draws, the ITC cap event, and the end-to-end rate test) and serves as
//! the independent oracle for the analytic path.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::link::{user_rate, ClusterLinkState, PhaseLinkState};
use crate::numeric::{
    integrate_zero_to_inf, lower_gamma_reg_int, negative_binomial_weights, poisson_weights,
    upper_gamma_reg_int,
};
use crate::ra::AllocationResult;
use crate::scenario::{derive_rng, streams};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("upsilon quadrature did not converge; achieved error bound {achieved:e}")]
    Quadrature { achieved: f64 },
    #[error("coverage domain error: {0}")]
    Domain(String),
}

/// Absolute tolerance of the upsilon-term quadrature.
pub const UPSILON_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// CDF parameters
// ---------------------------------------------------------------------------

/// Dimensionless parameters of one phase's SIDNR CDF, all in the unit-mean
/// fading domain.
#[derive(Debug, Clone, Copy)]
pub struct CdfParams {
    /// Serving-link fading shape.
    pub x_m: u32,
    /// ITC-link fading shape.
    pub y_m: u32,
    /// PBS-link fading shape.
    pub z_m: u32,
    /// Margin `A = v - gamma_bar (sic + s_phi)`; the threshold is
    /// unreachable when `A <= 0` and the CDF saturates at 1.
    pub a_margin: f64,
    /// Threshold-scaled channel error power.
    pub cal_e: f64,
    /// Threshold-scaled thermal noise.
    pub cal_s: f64,
    /// Threshold-scaled PBS interference.
    pub cal_i: f64,
    /// Power-capped counterpart of `cal_s` (per unit of `Y`).
    pub cal_v: f64,
    /// Power-capped counterpart of `cal_i` (per unit of `Y Z`).
    pub cal_u: f64,
    /// ITC margin `Lambda = ITC / P_per_channel`; infinite disables the cap.
    pub lambda: f64,
}

/// Phase SIDNR thresholds `(2^(rbar / (lambda W)) - 1, 2^(rbar / ((1-lambda) W)) - 1)`.
///
/// A degenerate time split (`lambda` of 0 or 1) starves one phase; its
/// threshold is reported as infinity, which the CDF treats as certain
/// outage. A zero rate threshold is met by any allocation.
pub fn sidnr_thresholds(rbar: f64, lambda: f64, w_hz: f64) -> (f64, f64) {
    debug_assert!(w_hz > 0.0 && (0.0..=1.0).contains(&lambda));
    if rbar <= 0.0 {
        return (0.0, 0.0);
    }
    let thr = |frac: f64| {
        if frac <= 0.0 {
            f64::INFINITY
        } else {
            (rbar / (frac * w_hz)).exp2() - 1.0
        }
    };
    (thr(lambda), thr(1.0 - lambda))
}

/// Build the CDF parameters of one phase for the `n`-th ordered user under
/// the given power fractions.
///
/// The estimated serving power is `(1 - zeta)` times a unit-mean Gamma
/// draw, so every ratio carries that scale in its denominator.
pub fn phase_cdf_params(
    phase: &PhaseLinkState,
    fractions: &[f64],
    n: usize,
    gamma_bar: f64,
) -> CdfParams {
    let v = fractions[n];
    let sic: f64 = fractions[n + 1..].iter().sum();
    let a_margin = if gamma_bar.is_infinite() {
        f64::NEG_INFINITY
    } else {
        v - gamma_bar * (sic + phase.hi_var)
    };
    let scale = (1.0 - phase.zeta).max(crate::channel::EST_POWER_FLOOR);
    let denom = scale * a_margin;
    let (cal_e, cal_s, cal_i) = if a_margin > 0.0 {
        (
            gamma_bar * phase.err_power_e / denom,
            gamma_bar * phase.norm_noise / denom,
            gamma_bar * phase.pbs_interf_i / denom,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let (cal_v, cal_u) = if phase.lambda_itc.is_finite() {
        (cal_s / phase.lambda_itc, cal_i / phase.lambda_itc)
    } else {
        (0.0, 0.0)
    };
    CdfParams {
        x_m: phase.serving_shape,
        y_m: phase.itc_shape,
        z_m: phase.pbs_shape,
        a_margin,
        cal_e,
        cal_s,
        cal_i,
        cal_v,
        cal_u,
        lambda: phase.lambda_itc,
    }
}

// ---------------------------------------------------------------------------
// Analytic CDF
// ---------------------------------------------------------------------------

/// Full-power outage term `Pr[X < Z*I + E + S, Y < L]`.
///
/// The double finite sum over the serving-shape series and the binomial
/// expansion regroups into Poisson and negative-binomial weights, which is
/// numerically stable for any parameter magnitudes. Requires `a_margin > 0`.
pub fn cdf_delta_term(p: &CdfParams) -> f64 {
    debug_assert!(p.a_margin > 0.0);
    let pr_y_below = if p.lambda.is_infinite() {
        1.0
    } else {
        lower_gamma_reg_int(p.y_m, p.y_m as f64 * p.lambda)
    };
    if pr_y_below == 0.0 {
        return 0.0;
    }
    pr_y_below * prob_x_below_affine(p.x_m, p.z_m, p.cal_i, p.cal_e + p.cal_s)
}

/// `Pr[X < Z*coef + shift]` for unit-mean Gamma `X` (shape `x_m`) and `Z`
/// (shape `z_m`): `1 - Pr[U + L <= x_m - 1]` with `U ~ Poisson(x_m * shift)`
/// and `L ~ NegBin(z_m, x_m coef / (z_m + x_m coef))`.
fn prob_x_below_affine(x_m: u32, z_m: u32, coef: f64, shift: f64) -> f64 {
    debug_assert!(coef >= 0.0 && shift >= 0.0);
    let x = x_m as f64;
    let p_nb = x * coef / (z_m as f64 + x * coef);
    let pois = poisson_weights(x * shift, x_m as usize);
    let negb = negative_binomial_weights(z_m, p_nb, x_m as usize);
    let mut tail = 0.0;
    for (u, pw) in pois.iter().enumerate() {
        for nw in &negb[..x_m as usize - u] {
            tail += pw * nw;
        }
    }
    (1.0 - tail).clamp(0.0, 1.0)
}

/// Inner capped-power term `Pr[X < y w + E | Y = y, Y > L]` integrated over
/// `Y`, for a fixed PBS draw `z` (so `w = z U + V`).
fn upsilon1(p: &CdfParams, z: f64) -> f64 {
    let y = p.y_m as f64;
    let x = p.x_m as f64;
    let q_tail = upper_gamma_reg_int(p.y_m, y * p.lambda);
    if q_tail == 0.0 {
        return 0.0;
    }
    let w = z * p.cal_u + p.cal_v;
    let pois = poisson_weights(x * p.cal_e, p.x_m as usize);
    let p_nb = x * w / (y + x * w);
    let negb = negative_binomial_weights(p.y_m, p_nb, p.x_m as usize);
    let c = p.lambda * (y + x * w);
    let mut covered = 0.0;
    for (u, pw) in pois.iter().enumerate() {
        for (j, nw) in negb[..p.x_m as usize - u].iter().enumerate() {
            covered += pw * nw * upper_gamma_reg_int(p.y_m + j as u32, c);
        }
    }
    (q_tail - covered).clamp(0.0, 1.0)
}

/// Capped-power outage term `Pr[X < Z Y U + Y V + E, Y > L]`, by adaptive
/// quadrature of the PBS fading density against [`upsilon1`].
pub fn cdf_upsilon_term(p: &CdfParams) -> Result<f64, CoverageError> {
    debug_assert!(p.a_margin > 0.0);
    if p.lambda.is_infinite() {
        return Ok(0.0);
    }
    if upper_gamma_reg_int(p.y_m, p.y_m as f64 * p.lambda) == 0.0 {
        return Ok(0.0);
    }
    let zm = p.z_m as f64;
    let log_norm = zm * zm.ln() - statrs::function::gamma::ln_gamma(zm);
    let integrand = |z: f64| -> f64 {
        let u1 = upsilon1(p, z);
        if u1 == 0.0 {
            return 0.0;
        }
        let log_pdf = if z > 0.0 {
            log_norm + (zm - 1.0) * z.ln() - zm * z
        } else if p.z_m == 1 {
            0.0
        } else {
            return 0.0;
        };
        log_pdf.exp() * u1
    };
    let quad = integrate_zero_to_inf(integrand, UPSILON_TOL);
    if !quad.converged {
        return Err(CoverageError::Quadrature { achieved: quad.error_bound });
    }
    Ok(quad.value.clamp(0.0, 1.0))
}

/// Phase SIDNR CDF at its threshold: `delta + upsilon`, clipped to [0, 1];
/// an unreachable threshold (`a_margin <= 0`) saturates at 1.
pub fn sidnr_cdf(p: &CdfParams) -> Result<f64, CoverageError> {
    if !(p.a_margin > 0.0) {
        return Ok(1.0);
    }
    let f = cdf_delta_term(p) + cdf_upsilon_term(p)?;
    Ok(f.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// End-to-end coverage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMethod {
    Analytic,
    MonteCarlo,
}

/// Per-user coverage outcome.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverageResult {
    /// Probability the broadcasting phase meets its SIDNR threshold.
    pub p_phase1: f64,
    /// Probability the relaying phase meets its SIDNR threshold.
    pub p_phase2: f64,
    /// End-to-end coverage. Equals `p_phase1 * p_phase2` analytically;
    /// the Monte Carlo field is the empirical joint fraction.
    pub p_e2e: f64,
    pub method: CoverageMethod,
    /// Binomial standard error of `p_e2e` (Monte Carlo only).
    pub mc_stderr: Option<f64>,
}

/// Analytic end-to-end coverage of the `user`-th ordered cluster member.
pub fn coverage_probability(
    state: &ClusterLinkState,
    alloc: &AllocationResult,
    user: usize,
    rbar: f64,
    w_hz: f64,
) -> Result<CoverageResult, CoverageError> {
    if user >= state.cluster_size() {
        return Err(CoverageError::Domain(format!("user index {user} out of range")));
    }
    let (g1, g2) = sidnr_thresholds(rbar, alloc.lambda, w_hz);
    let f1 = sidnr_cdf(&phase_cdf_params(&state.broadcast, &alloc.alpha, user, g1))?;
    let f2 = sidnr_cdf(&phase_cdf_params(&state.relay[user], &alloc.beta, user, g2))?;
    let p1 = 1.0 - f1;
    let p2 = 1.0 - f2;
    Ok(CoverageResult {
        p_phase1: p1,
        p_phase2: p2,
        p_e2e: p1 * p2,
        method: CoverageMethod::Analytic,
        mc_stderr: None,
    })
}

/// Worst-member analytic coverage of the whole cluster.
pub fn min_coverage(
    state: &ClusterLinkState,
    alloc: &AllocationResult,
    rbar: f64,
    w_hz: f64,
) -> Result<f64, CoverageError> {
    let mut min = 1.0f64;
    for user in 0..state.cluster_size() {
        min = min.min(coverage_probability(state, alloc, user, rbar, w_hz)?.p_e2e);
    }
    Ok(min)
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle
// ---------------------------------------------------------------------------

struct PhaseTrialConstants {
    scale: f64,
    v: f64,
    sic: f64,
    hi_var: f64,
    err_e: f64,
    i_p: f64,
    noise: f64,
    lambda: f64,
    gx: Gamma<f64>,
    gy: Gamma<f64>,
    gz: Gamma<f64>,
}

impl PhaseTrialConstants {
    fn new(phase: &PhaseLinkState, fractions: &[f64], n: usize) -> Self {
        let unit = |m: u32| Gamma::new(m as f64, 1.0 / m as f64).expect("valid gamma");
        Self {
            scale: (1.0 - phase.zeta).max(crate::channel::EST_POWER_FLOOR),
            v: fractions[n],
            sic: fractions[n + 1..].iter().sum(),
            hi_var: phase.hi_var,
            err_e: phase.err_power_e,
            i_p: phase.pbs_interf_i,
            noise: phase.norm_noise,
            lambda: phase.lambda_itc,
            gx: unit(phase.serving_shape),
            gy: unit(phase.itc_shape),
            gz: unit(phase.pbs_shape),
        }
    }

    /// One realized phase SIDNR: fading draws plus the ITC cap event.
    fn draw_sidnr<R: Rng>(&self, rng: &mut R) -> f64 {
        let x = self.scale * self.gx.sample(rng);
        let z = self.gz.sample(rng);
        let (i_p, noise) = if self.lambda.is_finite() {
            let y = self.gy.sample(rng);
            if y > self.lambda {
                // Transmit power is scaled down to meet the ITC, which
                // inflates everything that does not ride the serving signal.
                let boost = y / self.lambda;
                (self.i_p * boost, self.noise * boost)
            } else {
                (self.i_p, self.noise)
            }
        } else {
            (self.i_p, self.noise)
        };
        x * self.v / (x * (self.sic + self.hi_var) + self.err_e + z * i_p + noise)
    }
}

const MC_BLOCK: u64 = 1 << 14;

/// Monte Carlo end-to-end coverage of the `user`-th ordered member.
///
/// Trials are split into fixed blocks, each drawing from its own derived
/// stream (`MONTE_CARLO_BASE + mc_run * 2^16 + block`), so the estimate is
/// identical for any worker count. `mc_run` distinguishes independent
/// estimates under one scenario seed.
pub fn monte_carlo_coverage(
    state: &ClusterLinkState,
    alloc: &AllocationResult,
    user: usize,
    rbar: f64,
    w_hz: f64,
    trials: u64,
    seed: u64,
    mc_run: u64,
) -> CoverageResult {
    assert!(trials >= 1);
    assert!(user < state.cluster_size());
    let phase1 = PhaseTrialConstants::new(&state.broadcast, &alloc.alpha, user);
    let phase2 = PhaseTrialConstants::new(&state.relay[user], &alloc.beta, user);
    let (g1_thr, g2_thr) = sidnr_thresholds(rbar, alloc.lambda, w_hz);

    let blocks = trials.div_ceil(MC_BLOCK);
    let (c1, c2, ce) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng =
                derive_rng(seed, streams::MONTE_CARLO_BASE + mc_run * (1 << 16) + b);
            let n = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut c1 = 0u64;
            let mut c2 = 0u64;
            let mut ce = 0u64;
            for _ in 0..n {
                let g1 = phase1.draw_sidnr(&mut rng);
                let g2 = phase2.draw_sidnr(&mut rng);
                if g1 >= g1_thr {
                    c1 += 1;
                }
                if g2 >= g2_thr {
                    c2 += 1;
                }
                if user_rate(g1, g2, alloc.lambda, w_hz) >= rbar {
                    ce += 1;
                }
            }
            (c1, c2, ce)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let n = trials as f64;
    let p_e2e = ce as f64 / n;
    CoverageResult {
        p_phase1: c1 as f64 / n,
        p_phase2: c2 as f64 / n,
        p_e2e,
        method: CoverageMethod::MonteCarlo,
        mc_stderr: Some((p_e2e * (1.0 - p_e2e) / n).sqrt()),
    }
}

/// Direct Monte Carlo estimate of the raw CDF events in [`CdfParams`]
/// space: used as the independent oracle for the delta and upsilon terms.
pub fn monte_carlo_cdf<R: Rng>(p: &CdfParams, trials: u64, rng: &mut R) -> f64 {
    if !(p.a_margin > 0.0) {
        return 1.0;
    }
    let unit = |m: u32| Gamma::new(m as f64, 1.0 / m as f64).expect("valid gamma");
    let gx = unit(p.x_m);
    let gy = unit(p.y_m);
    let gz = unit(p.z_m);
    let mut hits = 0u64;
    for _ in 0..trials {
        let x = gx.sample(rng);
        let z = gz.sample(rng);
        let outage = if p.lambda.is_finite() {
            let y = gy.sample(rng);
            if y < p.lambda {
                x < z * p.cal_i + p.cal_e + p.cal_s
            } else {
                x < z * y * p.cal_u + y * p.cal_v + p.cal_e
            }
        } else {
            x < z * p.cal_i + p.cal_e + p.cal_s
        };
        if outage {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_zero_to_inf;
    use statrs::function::gamma::{gamma, ln_gamma};

    fn params(
        shapes: (u32, u32, u32),
        a: f64,
        e: f64,
        s: f64,
        i: f64,
        lambda: f64,
    ) -> CdfParams {
        let (v, u) = if lambda.is_finite() { (s / lambda, i / lambda) } else { (0.0, 0.0) };
        CdfParams {
            x_m: shapes.0,
            y_m: shapes.1,
            z_m: shapes.2,
            a_margin: a,
            cal_e: e,
            cal_s: s,
            cal_i: i,
            cal_v: v,
            cal_u: u,
            lambda,
        }
    }

    #[test]
    fn thresholds_reference_points() {
        assert_eq!(sidnr_thresholds(0.0, 0.5, 180e3), (0.0, 0.0));
        let (a, b) = sidnr_thresholds(90e3, 0.5, 180e3);
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        // 1.3 Mbit/s over 180 kHz at an even split.
        let (a, b) = sidnr_thresholds(1.3e6, 0.5, 180e3);
        assert!((a - (2f64.powf(1.3e6 / 9e4) - 1.0)).abs() < 1e-6);
        assert!((a - 22288.93).abs() < 0.01, "threshold {a}");
        assert_eq!(a, b);
        // Degenerate splits starve a phase.
        let (a, b) = sidnr_thresholds(1e5, 0.0, 180e3);
        assert!(a.is_infinite() && b.is_finite());
    }

    /// Literal transcription of the delta term's double finite sum, with
    /// the binomial exponent on `(E + S)` corrected to `q - l` so the sum
    /// matches its own defining integral.
    fn delta_literal(p: &CdfParams) -> f64 {
        let x = p.x_m as f64;
        let z = p.z_m as f64;
        let s = p.cal_e + p.cal_s;
        let pr_y = if p.lambda.is_infinite() {
            1.0
        } else {
            lower_gamma_reg_int(p.y_m, p.y_m as f64 * p.lambda)
        };
        let mut series = 0.0;
        let mut q_fact = 1.0;
        for q in 0..p.x_m {
            if q > 0 {
                q_fact *= q as f64;
            }
            for l in 0..=q {
                let binom = gamma(q as f64 + 1.0)
                    / (gamma(l as f64 + 1.0) * gamma((q - l) as f64 + 1.0));
                series += x.powi(q as i32) / q_fact
                    * binom
                    * s.powi((q - l) as i32)
                    * p.cal_i.powi(l as i32)
                    * gamma(z + l as f64)
                    / (z + x * p.cal_i).powf(z + l as f64);
            }
        }
        pr_y * (1.0 - z.powf(z) * (-x * s).exp() / gamma(z) * series)
    }

    /// Literal transcription of the capped-power inner term.
    fn upsilon1_literal(p: &CdfParams, zv: f64) -> f64 {
        let x = p.x_m as f64;
        let y = p.y_m as f64;
        let q_tail = upper_gamma_reg_int(p.y_m, y * p.lambda);
        let w = zv * p.cal_u + p.cal_v;
        let mut series = 0.0;
        for k in 0..p.x_m {
            for j in 0..=k {
                let binom = gamma(k as f64 + 1.0)
                    / (gamma(j as f64 + 1.0) * gamma((k - j) as f64 + 1.0));
                let arg = p.lambda * (y + x * w);
                let upper = upper_gamma_reg_int(p.y_m + j, arg) * gamma(y + j as f64);
                series += x.powi(k as i32) / gamma(k as f64 + 1.0)
                    * binom
                    * p.cal_e.powi((k - j) as i32)
                    * w.powi(j as i32)
                    * upper
                    / (y + x * w).powf(y + j as f64);
            }
        }
        q_tail - y.powf(y) * (-x * p.cal_e).exp() / gamma(y) * series
    }

    #[test]
    fn delta_stable_form_matches_literal() {
        for shapes in [(1, 1, 1), (2, 2, 2), (3, 1, 2), (4, 2, 3)] {
            for (e, s, i, l) in
                [(0.1, 0.2, 0.3, 1.5), (0.0, 0.5, 0.0, 0.7), (1.2, 0.01, 2.0, 3.0)]
            {
                let p = params(shapes, 1.0, e, s, i, l);
                let stable = cdf_delta_term(&p);
                let literal = delta_literal(&p);
                assert!(
                    (stable - literal).abs() < 1e-12,
                    "shapes {shapes:?}: stable {stable} vs literal {literal}"
                );
            }
        }
    }

    #[test]
    fn upsilon1_stable_form_matches_literal() {
        for shapes in [(1, 1, 1), (2, 2, 2), (3, 2, 1), (4, 3, 2)] {
            let p = params(shapes, 1.0, 0.15, 0.4, 0.6, 0.8);
            for zv in [0.0, 0.3, 1.0, 4.2] {
                let stable = upsilon1(&p, zv);
                let literal = upsilon1_literal(&p, zv);
                assert!(
                    (stable - literal).abs() < 1e-12,
                    "z={zv}: stable {stable} vs literal {literal}"
                );
            }
        }
    }

    #[test]
    fn delta_no_interference_limit() {
        // ITC never binds and no PBS: delta is the plain Gamma CDF of the
        // threshold shift.
        let p = params((3, 2, 2), 1.0, 0.2, 0.3, 0.0, f64::INFINITY);
        let x = 3.0f64;
        let s = 0.5f64;
        let direct = 1.0
            - (-x * s).exp() * (0..3).map(|q| (x * s).powi(q) / gamma(q as f64 + 1.0)).sum::<f64>();
        assert!((cdf_delta_term(&p) - direct).abs() < 1e-14);
    }

    #[test]
    fn delta_zero_thresholds() {
        let p = params((2, 2, 2), 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(cdf_delta_term(&p), 0.0);
    }

    #[test]
    fn delta_matches_quadrature_of_defining_integral() {
        // Independent route: integrate the Gamma density of Z against the
        // closed Gamma CDF of X, times Pr[Y < Lambda].
        let p = params((2, 2, 3), 1.0, 0.3, 0.45, 0.8, 1.3);
        let zm = p.z_m as f64;
        let xm = p.x_m;
        let log_norm = zm * zm.ln() - ln_gamma(zm);
        let quad = integrate_zero_to_inf(
            |z| {
                let pdf = if z > 0.0 {
                    (log_norm + (zm - 1.0) * z.ln() - zm * z).exp()
                } else {
                    0.0
                };
                pdf * lower_gamma_reg_int(xm, xm as f64 * (z * p.cal_i + p.cal_e + p.cal_s))
            },
            1e-10,
        );
        let expect = quad.value * lower_gamma_reg_int(p.y_m, p.y_m as f64 * p.lambda);
        let got = cdf_delta_term(&p);
        assert!((got - expect).abs() < 1e-8, "delta {got} vs quadrature {expect}");
    }

    #[test]
    fn upsilon_vanishes_without_cap_or_thresholds() {
        // Lambda -> infinity: the capped region is never entered.
        let p = params((2, 2, 2), 1.0, 0.1, 0.2, 0.3, f64::INFINITY);
        assert_eq!(cdf_upsilon_term(&p).unwrap(), 0.0);
        // All capped thresholds zero: X < 0 is impossible.
        let p = params((2, 2, 2), 1.0, 0.0, 0.0, 0.0, 0.5);
        assert_eq!(cdf_upsilon_term(&p).unwrap(), 0.0);
    }

    #[test]
    fn upsilon_matches_monte_carlo() {
        let p = params((2, 2, 2), 1.0, 0.12, 0.5, 0.9, 0.8);
        let ups = cdf_upsilon_term(&p).unwrap();
        // Oracle: direct draws of the capped event only.
        let unit = |m: u32| Gamma::new(m as f64, 1.0 / m as f64).unwrap();
        let (gx, gy, gz) = (unit(2), unit(2), unit(2));
        let mut rng = derive_rng(42, 900);
        let trials = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..trials {
            let x = gx.sample(&mut rng);
            let y = gy.sample(&mut rng);
            let z = gz.sample(&mut rng);
            if y > p.lambda && x < z * y * p.cal_u + y * p.cal_v + p.cal_e {
                hits += 1;
            }
        }
        let mc = hits as f64 / trials as f64;
        let stderr = (mc * (1.0 - mc) / trials as f64).sqrt();
        assert!(
            (ups - mc).abs() < 3.0 * stderr + 1e-6,
            "upsilon {ups} vs MC {mc} (stderr {stderr:e})"
        );
    }

    #[test]
    fn cdf_saturates_when_threshold_unreachable() {
        let p = params((2, 2, 2), -0.1, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(sidnr_cdf(&p).unwrap(), 1.0);
    }

    #[test]
    fn cdf_monotone_in_threshold_scale() {
        // Scaling every threshold ratio up (same gamma_bar direction) can
        // only increase the outage probability.
        let mut last = 0.0;
        for scale in [0.1, 0.3, 1.0, 3.0, 10.0] {
            let p = params((2, 2, 2), 1.0, 0.05 * scale, 0.2 * scale, 0.4 * scale, 1.0);
            let f = sidnr_cdf(&p).unwrap();
            assert!(f >= last - 1e-12, "CDF not monotone at scale {scale}");
            assert!((0.0..=1.0).contains(&f));
            last = f;
        }
    }

    #[test]
    fn full_cdf_matches_event_monte_carlo() {
        for (shapes, e, s, i, l) in [
            ((1, 1, 1), 0.2, 0.4, 0.5, 0.9),
            ((2, 2, 2), 0.05, 0.3, 1.1, 0.5),
            ((3, 2, 1), 0.0, 0.8, 0.2, 2.0),
            ((2, 1, 3), 0.4, 0.1, 0.0, f64::INFINITY),
        ] {
            let p = params(shapes, 1.0, e, s, i, l);
            let analytic = sidnr_cdf(&p).unwrap();
            let mc = monte_carlo_cdf(&p, 2_000_000, &mut derive_rng(7, 901));
            let stderr = (mc * (1.0 - mc) / 2e6).sqrt();
            assert!(
                (analytic - mc).abs() < 3.0 * stderr + 2e-4,
                "shapes {shapes:?}: analytic {analytic} vs MC {mc}"
            );
        }
    }
}
