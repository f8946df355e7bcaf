//! Closed-form max-min fair power and phase-time allocation per cluster.
//!
//! With all per-user per-phase SIDNRs forced equal to a common value
//! `gamma`, the power fractions follow in closed form:
//!
//! * broadcasting phase: `alpha_n = I_r gamma (1 + gamma)^(N - n)`, whose
//!   sum telescopes to `I_r ((1 + gamma)^N - 1)`;
//! * relaying phase: `beta_n = I_n gamma + gamma^2 sum_{j>n} I_j
//!   (1 + gamma)^(j - n - 1)`, whose sum telescopes to
//!   `gamma sum_n I_n (1 + gamma)^(n - 1)`.
//!
//! Each phase's optimal SIDNR exhausts its own power cap; the cluster
//! optimum is the smaller of the two, with the non-binding phase
//! re-evaluated at the global value so the equalization survives and no
//! energy is wasted. Splitting the slot evenly between the phases is then
//! rate-optimal because both phases carry the same SIDNR.

use thiserror::Error;

use crate::link::ClusterLinkState;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("allocation domain error: {0}")]
    Domain(String),
    #[error("grid oracle limited to clusters of size <= {max}, got {got}")]
    OracleSize { max: usize, got: usize },
}

// ---------------------------------------------------------------------------
// Power caps
// ---------------------------------------------------------------------------

/// Per-phase fraction budgets from the unit power constraint and the ITC.
#[derive(Debug, Clone, Copy)]
pub struct PowerCaps {
    /// Broadcasting-phase budget.
    pub phi1: f64,
    /// Relaying-phase budget.
    pub phi2: f64,
}

/// One cap component: `min(1, itc / (p * g))`, where `g` is the mean
/// composite gain toward the protected primary user. A disabled ITC or a
/// vanishing coupling gain leaves the unit power constraint.
pub fn power_cap(p_per_channel: f64, mean_gain_to_pu: f64, itc: Option<f64>) -> f64 {
    match itc {
        None => 1.0,
        Some(t) => {
            let coupled = p_per_channel * mean_gain_to_pu;
            if coupled <= 0.0 {
                1.0
            } else {
                (t / coupled).min(1.0)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Broadcast fractions at a given equalized SIDNR.
pub fn alpha_at_gamma(i_r: f64, gamma: f64, n_users: usize) -> Vec<f64> {
    (1..=n_users)
        .map(|n| i_r * gamma * (1.0 + gamma).powi((n_users - n) as i32))
        .collect()
}

/// Relay fractions at a given equalized SIDNR.
pub fn beta_at_gamma(i_list: &[f64], gamma: f64) -> Vec<f64> {
    let n_users = i_list.len();
    (0..n_users)
        .map(|n| {
            let tail: f64 = (n + 1..n_users)
                .map(|j| i_list[j] * (1.0 + gamma).powi((j - n - 1) as i32))
                .sum();
            i_list[n] * gamma + gamma * gamma * tail
        })
        .collect()
}

/// Total relay budget consumed at a given equalized SIDNR:
/// `gamma * sum_n I_n (1 + gamma)^(n-1)`.
pub fn beta_sum(i_list: &[f64], gamma: f64) -> f64 {
    gamma
        * i_list
            .iter()
            .enumerate()
            .map(|(idx, i_n)| i_n * (1.0 + gamma).powi(idx as i32))
            .sum::<f64>()
}

/// Optimal broadcasting-phase SIDNR and fractions:
/// `gamma = (phi1 / I_r + 1)^(1/N) - 1`, budget exhausted exactly.
pub fn phase1_allocation(
    i_r: f64,
    phi1: f64,
    n_users: usize,
) -> Result<(f64, Vec<f64>), AllocError> {
    if i_r <= 0.0 {
        return Err(AllocError::Domain(format!("I_r must be > 0 (got {i_r})")));
    }
    if !(phi1 > 0.0 && phi1.is_finite()) {
        return Err(AllocError::Domain(format!("phi1 must be > 0 (got {phi1})")));
    }
    if n_users == 0 {
        return Err(AllocError::Domain("cluster must be non-empty".into()));
    }
    let gamma = (phi1 / i_r + 1.0).powf(1.0 / n_users as f64) - 1.0;
    Ok((gamma, alpha_at_gamma(i_r, gamma, n_users)))
}

/// Optimal relaying-phase SIDNR and fractions.
///
/// Closed forms exist for one and two users; larger clusters solve the
/// strictly increasing budget polynomial `beta_sum(gamma) = phi2` by
/// bisection (absolute tolerance 1e-12, down to f64 spacing).
pub fn phase2_allocation(i_list: &[f64], phi2: f64) -> Result<(f64, Vec<f64>), AllocError> {
    if i_list.is_empty() {
        return Err(AllocError::Domain("cluster must be non-empty".into()));
    }
    if let Some(bad) = i_list.iter().find(|i| **i <= 0.0) {
        return Err(AllocError::Domain(format!("all I_n must be > 0 (got {bad})")));
    }
    if !(phi2 > 0.0 && phi2.is_finite()) {
        return Err(AllocError::Domain(format!("phi2 must be > 0 (got {phi2})")));
    }
    let gamma = match i_list.len() {
        1 => phi2 / i_list[0],
        2 => {
            let (i1, i2) = (i_list[0], i_list[1]);
            ((4.0 * i2 * phi2 + (i1 + i2).powi(2)).sqrt() - i1 - i2) / (2.0 * i2)
        }
        _ => {
            let i_min = i_list.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut lo = 0.0f64;
            let mut hi = phi2 / i_min;
            debug_assert!(beta_sum(i_list, hi) >= phi2);
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if beta_sum(i_list, mid) < phi2 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 {
                    break;
                }
            }
            0.5 * (lo + hi)
        }
    };
    Ok((gamma, beta_at_gamma(i_list, gamma)))
}

// ---------------------------------------------------------------------------
// Cluster allocation
// ---------------------------------------------------------------------------

/// Optimal per-cluster allocation. Users are in decoding order (weakest
/// first), matching [`ClusterLinkState`].
#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Broadcasting-phase power fractions.
    pub alpha: Vec<f64>,
    /// Relaying-phase power fractions.
    pub beta: Vec<f64>,
    /// Phase-time fraction of the broadcasting phase.
    pub lambda: f64,
    /// Common equalized SIDNR.
    pub gamma_star: f64,
    /// Max-min per-user rate `(W/2) log2(1 + gamma_star)` in bits/s.
    pub maxmin_rate: f64,
    /// Total consumed power fractions `sum(alpha) + sum(beta)`.
    pub energy: f64,
}

impl AllocationResult {
    fn at_gamma(i_r: f64, i_list: &[f64], gamma: f64, w_hz: f64) -> Self {
        let alpha = alpha_at_gamma(i_r, gamma, i_list.len());
        let beta = beta_at_gamma(i_list, gamma);
        let energy = alpha.iter().sum::<f64>() + beta.iter().sum::<f64>();
        AllocationResult {
            alpha,
            beta,
            lambda: 0.5,
            gamma_star: gamma,
            maxmin_rate: 0.5 * w_hz * (1.0 + gamma).log2(),
            energy,
        }
    }
}

/// Max-min fair allocation for one cluster.
///
/// The equalized SIDNR is the smaller of the two per-phase optima; the
/// binding phase exhausts its budget while the other is re-evaluated at
/// the common value and underspends.
pub fn allocate_cluster(
    state: &ClusterLinkState,
    caps: PowerCaps,
    w_hz: f64,
) -> Result<AllocationResult, AllocError> {
    let n = state.cluster_size();
    if n == 0 {
        return Err(AllocError::Domain("cluster must be non-empty".into()));
    }
    let (g1, _) = phase1_allocation(state.agg_i_r, caps.phi1, n)?;
    let (g2, _) = phase2_allocation(&state.agg_i_n, caps.phi2)?;
    Ok(AllocationResult::at_gamma(state.agg_i_r, &state.agg_i_n, g1.min(g2), w_hz))
}

/// Re-evaluate the closed-form allocation at an externally chosen SIDNR.
pub fn allocation_at_gamma(
    state: &ClusterLinkState,
    gamma: f64,
    w_hz: f64,
) -> AllocationResult {
    AllocationResult::at_gamma(state.agg_i_r, &state.agg_i_n, gamma, w_hz)
}

// ---------------------------------------------------------------------------
// Grid oracle
// ---------------------------------------------------------------------------

/// Independent validation oracle: multi-resolution exhaustive search over
/// each phase's fraction simplex, maximizing the minimum user SIDNR through
/// the raw per-user SIDNR expressions (no equalization or budget-exhaustion
/// assumptions). Because the end-to-end objective splits as
/// `min(min_n gamma1_n, min_n gamma2_n)`, the phases search independently.
///
/// `grid_step` is relative to each phase budget. Intended for tests; cost
/// grows as `(1/step)^C` per phase, so cluster size is capped at 3.
pub fn grid_oracle_allocate(
    state: &ClusterLinkState,
    caps: PowerCaps,
    grid_step: f64,
    w_hz: f64,
) -> Result<AllocationResult, AllocError> {
    let n = state.cluster_size();
    if n == 0 {
        return Err(AllocError::Domain("cluster must be non-empty".into()));
    }
    if n > 3 {
        return Err(AllocError::OracleSize { max: 3, got: n });
    }
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(AllocError::Domain(format!("grid step must be in (0,1), got {grid_step}")));
    }

    // Allocation-free SIDNR evaluation: gamma_n = X v_n / (X (sic + s_phi) + c)
    // with c the constant error + interference + noise part, scanning the
    // SIC suffix sums from the strongest user down.
    let min_sidnr = |params: &dyn Fn(usize) -> (f64, f64, f64), fracs: &[f64]| -> f64 {
        let mut min = f64::INFINITY;
        let mut sic = 0.0;
        for u in (0..fracs.len()).rev() {
            let (x, c, s_phi) = params(u);
            min = min.min(x * fracs[u] / (x * (sic + s_phi) + c));
            sic += fracs[u];
        }
        min
    };
    let b = &state.broadcast;
    let b_params =
        (b.est_gain_power, b.err_power_e + b.pbs_gain_power * b.pbs_interf_i + b.norm_noise, b.hi_var);
    let r_params: Vec<(f64, f64, f64)> = state
        .relay
        .iter()
        .map(|p| {
            (p.est_gain_power, p.err_power_e + p.pbs_gain_power * p.pbs_interf_i + p.norm_noise, p.hi_var)
        })
        .collect();
    let eval_phase1 = |fracs: &[f64]| min_sidnr(&|_| b_params, fracs);
    let eval_phase2 = |fracs: &[f64]| min_sidnr(&|u| r_params[u], fracs);

    let (g1, alpha) = simplex_search(n, caps.phi1, grid_step, &eval_phase1);
    let (g2, beta) = simplex_search(n, caps.phi2, grid_step, &eval_phase2);
    let gamma = g1.min(g2);
    let energy = alpha.iter().sum::<f64>() + beta.iter().sum::<f64>();
    Ok(AllocationResult {
        alpha,
        beta,
        lambda: 0.5,
        gamma_star: gamma,
        maxmin_rate: 0.5 * w_hz * (1.0 + gamma).log2(),
        energy,
    })
}

/// Exhaustive search over `{v : sum v <= phi, v >= 0}` on a regular grid,
/// refined around the best coarse cells until the target resolution.
fn simplex_search<F: Fn(&[f64]) -> f64>(
    dims: usize,
    phi: f64,
    rel_step: f64,
    eval: &F,
) -> (f64, Vec<f64>) {
    // Stage resolutions: coarse sweep, then local refinement around the
    // best candidates. A direct sweep at the target step is used when
    // cheap enough to stay fully exhaustive.
    let target = rel_step * phi;
    let direct = match dims {
        1 => true,
        2 => 1.0 / rel_step <= 2000.0,
        _ => 1.0 / rel_step <= 120.0,
    };
    if direct {
        return sweep_box(dims, &vec![(0.0, phi); dims], target, phi, eval, None).0;
    }

    // Coarse stage.
    let coarse = phi / 60.0;
    let (_, mut candidates) =
        sweep_box(dims, &vec![(0.0, phi); dims], coarse, phi, eval, Some(12));
    // Refine a window of two coarse cells around each candidate.
    let mut best = (f64::NEG_INFINITY, vec![0.0; dims]);
    candidates.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for (_, point) in candidates.into_iter().take(12) {
        let bounds: Vec<(f64, f64)> = point
            .iter()
            .map(|&v| ((v - 2.0 * coarse).max(0.0), (v + 2.0 * coarse).min(phi)))
            .collect();
        let ((val, fracs), _) = sweep_box(dims, &bounds, target, phi, eval, None);
        if val > best.0 {
            best = (val, fracs);
        }
    }
    best
}

/// Evaluate `eval` on every grid point of `bounds` with `sum <= phi`.
/// Returns the best point and, when `keep` is set, the `keep` best points
/// for later refinement.
#[allow(clippy::type_complexity)]
fn sweep_box<F: Fn(&[f64]) -> f64>(
    dims: usize,
    bounds: &[(f64, f64)],
    step: f64,
    phi: f64,
    eval: &F,
    keep: Option<usize>,
) -> ((f64, Vec<f64>), Vec<(f64, Vec<f64>)>) {
    let mut best = (f64::NEG_INFINITY, vec![0.0; dims]);
    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut point = vec![0.0; dims];
    let mut counts: Vec<usize> = bounds
        .iter()
        .map(|(lo, hi)| ((hi - lo) / step).floor() as usize + 1)
        .collect();
    // Make sure the upper bound itself is on the grid.
    for (c, (lo, hi)) in counts.iter_mut().zip(bounds) {
        if *lo + (*c - 1) as f64 * step < *hi - 1e-12 {
            *c += 1;
        }
    }
    let mut idx = vec![0usize; dims];
    'outer: loop {
        let mut sum = 0.0;
        for d in 0..dims {
            point[d] = (bounds[d].0 + idx[d] as f64 * step).min(bounds[d].1);
            sum += point[d];
        }
        if sum <= phi + 1e-12 {
            let val = eval(&point);
            if val > best.0 {
                best = (val, point.clone());
            }
            if let Some(k) = keep {
                if top.len() < k {
                    top.push((val, point.clone()));
                    top.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
                } else if val > top.last().unwrap().0 {
                    *top.last_mut().unwrap() = (val, point.clone());
                    top.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
                }
            }
        }
        // Odometer increment.
        for d in 0..dims {
            idx[d] += 1;
            if idx[d] < counts[d] {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    (best, top)
}
