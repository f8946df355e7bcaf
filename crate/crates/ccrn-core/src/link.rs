//! Per-user SIDNRs and end-to-end rates.
//!
//! The broadcasting phase superposes all cluster messages on the SBS -> UAV
//! backhaul; the relaying phase superposes them on the UAV -> user access
//! links. Each phase SIDNR has the same shape,
//!
//! ```text
//!           X v_n
//! ---------------------------------------
//! X (sum_{j>n} v_j + s_phi) + E + Z I_p + s2
//! ```
//!
//! with `X` the estimated serving-link power, `v` the power fractions in
//! decoding order, `s_phi` the hardware distortion power, `E` the channel
//! estimation error power, `Z I_p` the (normalized) PBS interference, and
//! `s2` the normalized thermal noise. Users are ordered by ascending mean
//! access-link gain, so the weakest user decodes first and receives the
//! largest fraction.

use rand::Rng;
use thiserror::Error;

use crate::channel::{
    sample_channel, ChannelError, ChannelRealization, LinkClass, LinkGeometry,
};
use crate::scenario::{Position, ScenarioConfig};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("cluster must be non-empty")]
    EmptyCluster,
    #[error("missing realization for user index {0}")]
    MissingRealization(usize),
}

// ---------------------------------------------------------------------------
// Phase state
// ---------------------------------------------------------------------------

/// Everything needed to evaluate one phase's SIDNR for a cluster member.
#[derive(Debug, Clone)]
pub struct PhaseLinkState {
    /// Estimated serving-link small-scale power `|h_est|^2`.
    pub est_gain_power: f64,
    /// Channel error power term `E = zeta (1 + s_phi)`.
    pub err_power_e: f64,
    /// Hardware distortion power `s_phi = phi^2`.
    pub hi_var: f64,
    /// Normalized PBS interference coefficient
    /// `I_p = (rho_p / rho_serving)(1 + s_phi_p)`.
    pub pbs_interf_i: f64,
    /// Realized PBS small-scale power multiplying `I_p` (1 in deterministic
    /// mode). PBS links are unestimated, so the estimated and true powers
    /// coincide.
    pub pbs_gain_power: f64,
    /// Normalized thermal noise `s2 = sigma^2 / rho_serving`.
    pub norm_noise: f64,
    /// Power fractions (alpha or beta) in decoding order; set by the
    /// allocator.
    pub power_fractions: Vec<f64>,
    /// CSI error variance of the serving link.
    pub zeta: f64,
    /// ITC margin `Lambda = ITC / P_per_channel` of this phase's
    /// transmitter; infinite when the ITC is disabled.
    pub lambda_itc: f64,
    /// Nakagami shape of the serving link.
    pub serving_shape: u32,
    /// Nakagami shape of the transmitter -> PU link (ITC event).
    pub itc_shape: u32,
    /// Nakagami shape of the PBS interference link.
    pub pbs_shape: u32,
}

impl PhaseLinkState {
    /// SIDNR of the `n`-th ordered user (0-based) under the stored power
    /// fractions. The thermal noise keeps the denominator strictly
    /// positive.
    pub fn sidnr(&self, n: usize) -> f64 {
        let v = &self.power_fractions;
        assert!(n < v.len(), "user index {n} out of range for {} fractions", v.len());
        let sic: f64 = v[n + 1..].iter().sum();
        let x = self.est_gain_power;
        x * v[n]
            / (x * (sic + self.hi_var)
                + self.err_power_e
                + self.pbs_gain_power * self.pbs_interf_i
                + self.norm_noise)
    }

    /// Aggregated interference-plus-noise term
    /// `I = s_phi + (E + |h_p|^2 I_p + s2) / X`.
    pub fn aggregate_interference(&self) -> f64 {
        self.hi_var
            + (self.err_power_e + self.pbs_gain_power * self.pbs_interf_i + self.norm_noise)
                / self.est_gain_power
    }
}

/// Link state of a whole cluster: one broadcast phase plus one relay phase
/// per member, in decoding order.
#[derive(Debug, Clone)]
pub struct ClusterLinkState {
    /// SBS -> UAV phase, shared by every member.
    pub broadcast: PhaseLinkState,
    /// UAV -> SU phase per ordered member.
    pub relay: Vec<PhaseLinkState>,
    /// `user_order[i]` is the caller-side index of the `i`-th ordered user
    /// (ascending access gain: weakest first).
    pub user_order: Vec<usize>,
    /// Broadcast-phase aggregate `I_r`.
    pub agg_i_r: f64,
    /// Relay-phase aggregates `I_n` per ordered member.
    pub agg_i_n: Vec<f64>,
}

impl ClusterLinkState {
    pub fn cluster_size(&self) -> usize {
        self.relay.len()
    }

    /// Broadcast-phase SIDNR for the `n`-th ordered user.
    pub fn broadcast_sidnr(&self, n: usize) -> f64 {
        self.broadcast.sidnr(n)
    }

    /// Relay-phase SIDNR for the `n`-th ordered user.
    pub fn relay_sidnr(&self, n: usize) -> f64 {
        self.relay[n].sidnr(n)
    }

    /// Install the allocator's power fractions on both phases.
    pub fn set_power_fractions(&mut self, alpha: &[f64], beta: &[f64]) {
        assert_eq!(alpha.len(), self.cluster_size());
        assert_eq!(beta.len(), self.cluster_size());
        self.broadcast.power_fractions = alpha.to_vec();
        for phase in &mut self.relay {
            phase.power_fractions = beta.to_vec();
        }
    }
}

/// End-to-end SIDNR: the decode-and-forward bottleneck of the two phases.
pub fn e2e_sidnr(gamma_broadcast: f64, gamma_relay: f64) -> f64 {
    gamma_broadcast.min(gamma_relay)
}

/// End-to-end rate in bits/s under phase-time split `lambda`.
pub fn user_rate(gamma1: f64, gamma2: f64, lambda: f64, w_hz: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&lambda) && w_hz > 0.0);
    let r1 = lambda * w_hz * (1.0 + gamma1).log2();
    let r2 = (1.0 - lambda) * w_hz * (1.0 + gamma2).log2();
    r1.min(r2)
}

// ---------------------------------------------------------------------------
// Realization sets
// ---------------------------------------------------------------------------

/// Channel realizations for every link a cluster touches on channel `k`.
#[derive(Debug, Clone)]
pub struct ClusterRealizations {
    pub backhaul: ChannelRealization,
    pub pbs_to_uav: ChannelRealization,
    /// Per cluster member, in the caller's member order.
    pub access: Vec<ChannelRealization>,
    pub pbs_to_user: Vec<ChannelRealization>,
    pub sbs_to_pu: ChannelRealization,
    pub uav_to_pu: ChannelRealization,
}

fn deterministic_realization(
    scenario: &ScenarioConfig,
    geometry: &LinkGeometry,
    class: LinkClass,
    tx_power_per_channel: f64,
) -> Result<ChannelRealization, ChannelError> {
    let ell = crate::channel::mean_attenuation(
        geometry,
        class.los_params(scenario.los_params_backhaul, scenario.los_params_access),
        scenario.attenuation_db,
        scenario.carrier_fc,
    )?;
    let zeta = if class.is_estimated() {
        crate::channel::csi_error_variance(
            scenario.impairments.csi_theta,
            scenario.impairments.csi_mu,
            tx_power_per_channel / scenario.noise_power_w(),
        )
    } else {
        0.0
    };
    if zeta >= 1.0 {
        return Err(ChannelError::Config(format!(
            "CSI error variance {zeta} >= 1: estimation noise exceeds the channel power"
        )));
    }
    Ok(ChannelRealization {
        ell,
        h_true_power: 1.0,
        h_est: (1.0, 0.0),
        err_var: zeta,
        est_power: 1.0,
    })
}

/// Geometry of every link the cluster uses for a UAV at `c` and the PU of
/// channel `k`.
fn cluster_geometries(
    scenario: &ScenarioConfig,
    c: Position,
    members: &[usize],
    k: usize,
) -> (LinkGeometry, LinkGeometry, Vec<LinkGeometry>, Vec<LinkGeometry>, LinkGeometry, LinkGeometry)
{
    let nodes = &scenario.nodes;
    let pu = nodes.primary_users[k % nodes.primary_users.len()];
    let backhaul = LinkGeometry::bs_to_uav(nodes.sbs, c);
    let pbs_to_uav = LinkGeometry::bs_to_uav(nodes.pbs, c);
    let access: Vec<_> = members
        .iter()
        .map(|&n| LinkGeometry::to_ground(c, nodes.secondary_users[n]))
        .collect();
    let pbs_to_user: Vec<_> = members
        .iter()
        .map(|&n| LinkGeometry::to_ground(nodes.pbs, nodes.secondary_users[n]))
        .collect();
    let sbs_to_pu = LinkGeometry::to_ground(nodes.sbs, pu);
    let uav_to_pu = LinkGeometry::to_ground(c, pu);
    (backhaul, pbs_to_uav, access, pbs_to_user, sbs_to_pu, uav_to_pu)
}

/// Expected-channel realizations: every small-scale power at its mean of 1.
/// This is the reproducible mode used for throughput maps and deployment
/// fitness.
pub fn deterministic_realizations(
    scenario: &ScenarioConfig,
    c: Position,
    members: &[usize],
    k: usize,
) -> Result<ClusterRealizations, LinkError> {
    if members.is_empty() {
        return Err(LinkError::EmptyCluster);
    }
    let (bh, p2u, access, p2n, s2k, r2k) = cluster_geometries(scenario, c, members, k);
    let p_s = scenario.budget.sbs_per_channel();
    let p_r = scenario.budget.uav_per_channel();
    Ok(ClusterRealizations {
        backhaul: deterministic_realization(scenario, &bh, LinkClass::Backhaul, p_s)?,
        pbs_to_uav: deterministic_realization(scenario, &p2u, LinkClass::PbsToUav, p_s)?,
        access: access
            .iter()
            .map(|g| deterministic_realization(scenario, g, LinkClass::Access, p_r))
            .collect::<Result<_, _>>()?,
        pbs_to_user: p2n
            .iter()
            .map(|g| deterministic_realization(scenario, g, LinkClass::PbsToUser, p_r))
            .collect::<Result<_, _>>()?,
        sbs_to_pu: deterministic_realization(scenario, &s2k, LinkClass::ToPrimary, p_s)?,
        uav_to_pu: deterministic_realization(scenario, &r2k, LinkClass::ToPrimary, p_r)?,
    })
}

/// Sampled realizations for stochastic (Monte Carlo) evaluation.
pub fn sampled_realizations<R: Rng>(
    scenario: &ScenarioConfig,
    c: Position,
    members: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<ClusterRealizations, LinkError> {
    if members.is_empty() {
        return Err(LinkError::EmptyCluster);
    }
    let (bh, p2u, access, p2n, s2k, r2k) = cluster_geometries(scenario, c, members, k);
    let noise = scenario.noise_power_w();
    let p_s = scenario.budget.sbs_per_channel();
    let p_r = scenario.budget.uav_per_channel();
    let imp = &scenario.impairments;
    let draw = |g: &LinkGeometry, class: LinkClass, p: f64, rng: &mut R| {
        sample_channel(
            g,
            class,
            scenario.los_params_backhaul,
            scenario.los_params_access,
            scenario.attenuation_db,
            scenario.carrier_fc,
            imp,
            p / noise,
            rng,
        )
    };
    Ok(ClusterRealizations {
        backhaul: draw(&bh, LinkClass::Backhaul, p_s, rng)?,
        pbs_to_uav: draw(&p2u, LinkClass::PbsToUav, p_s, rng)?,
        access: access
            .iter()
            .map(|g| draw(g, LinkClass::Access, p_r, rng))
            .collect::<Result<_, _>>()?,
        pbs_to_user: p2n
            .iter()
            .map(|g| draw(g, LinkClass::PbsToUser, p_r, rng))
            .collect::<Result<_, _>>()?,
        sbs_to_pu: draw(&s2k, LinkClass::ToPrimary, p_s, rng)?,
        uav_to_pu: draw(&r2k, LinkClass::ToPrimary, p_r, rng)?,
    })
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Assemble the per-cluster link state from a realization set.
///
/// `members` are caller-side user indices; the returned state is in
/// decoding order (ascending mean access gain `ell * |h_est|^2`), with
/// `user_order` mapping ordered slots back to `members` entries.
pub fn interference_noise_terms(
    scenario: &ScenarioConfig,
    _c: Position,
    members: &[usize],
    _k: usize,
    real: &ClusterRealizations,
) -> Result<ClusterLinkState, LinkError> {
    if members.is_empty() {
        return Err(LinkError::EmptyCluster);
    }
    if real.access.len() != members.len() || real.pbs_to_user.len() != members.len() {
        return Err(LinkError::MissingRealization(members.len().min(real.access.len())));
    }
    let s_phi = scenario.impairments.hi_distortion_power();
    let noise = scenario.noise_power_w();
    let p_s = scenario.budget.sbs_per_channel();
    let p_p = scenario.budget.pbs_per_channel();
    let p_r = scenario.budget.uav_per_channel();
    let shapes = scenario.impairments.fading_m;
    let itc = scenario.itc_watts();
    let lambda_of = |p_tx: f64| itc.map_or(f64::INFINITY, |t| t / p_tx);

    // Broadcasting phase: SBS -> UAV with PBS -> UAV interference.
    let rho_s = p_s * real.backhaul.ell;
    let rho_p_r = p_p * real.pbs_to_uav.ell;
    let broadcast = PhaseLinkState {
        est_gain_power: real.backhaul.est_power,
        err_power_e: real.backhaul.err_var * (1.0 + s_phi),
        hi_var: s_phi,
        pbs_interf_i: rho_p_r / rho_s * (1.0 + s_phi),
        pbs_gain_power: real.pbs_to_uav.h_true_power,
        norm_noise: noise / rho_s,
        power_fractions: Vec::new(),
        zeta: real.backhaul.err_var,
        lambda_itc: lambda_of(p_s),
        serving_shape: shapes.serving,
        itc_shape: shapes.to_primary,
        pbs_shape: shapes.pbs_interference,
    };
    let agg_i_r = broadcast.aggregate_interference();

    // Relaying phase: UAV -> SU_n with PBS -> SU_n interference, ordered by
    // ascending mean access gain (weakest member first).
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        let ga = real.access[a].ell * real.access[a].est_power;
        let gb = real.access[b].ell * real.access[b].est_power;
        ga.partial_cmp(&gb).unwrap().then(members[a].cmp(&members[b]))
    });

    let mut relay = Vec::with_capacity(members.len());
    let mut agg_i_n = Vec::with_capacity(members.len());
    for &slot in &order {
        let acc = &real.access[slot];
        let pbs = &real.pbs_to_user[slot];
        let rho_r = p_r * acc.ell;
        let rho_p_n = p_p * pbs.ell;
        let phase = PhaseLinkState {
            est_gain_power: acc.est_power,
            err_power_e: acc.err_var * (1.0 + s_phi),
            hi_var: s_phi,
            pbs_interf_i: rho_p_n / rho_r * (1.0 + s_phi),
            pbs_gain_power: pbs.h_true_power,
            norm_noise: noise / rho_r,
            power_fractions: Vec::new(),
            zeta: acc.err_var,
            lambda_itc: lambda_of(p_r),
            serving_shape: shapes.serving,
            itc_shape: shapes.to_primary,
            pbs_shape: shapes.pbs_interference,
        };
        agg_i_n.push(phase.aggregate_interference());
        relay.push(phase);
    }

    Ok(ClusterLinkState {
        broadcast,
        relay,
        user_order: order.iter().map(|&slot| members[slot]).collect(),
        agg_i_r,
        agg_i_n,
    })
}

/// Deterministic-mode cluster state in one call.
pub fn deterministic_cluster_state(
    scenario: &ScenarioConfig,
    c: Position,
    members: &[usize],
    k: usize,
) -> Result<ClusterLinkState, LinkError> {
    let real = deterministic_realizations(scenario, c, members, k)?;
    interference_noise_terms(scenario, c, members, k, &real)
}

/// Mean composite gains toward the PU of channel `k` for the two secondary
/// transmitters, used by the ITC power caps.
pub fn mean_gains_to_pu(
    scenario: &ScenarioConfig,
    c: Position,
    k: usize,
) -> Result<(f64, f64), LinkError> {
    let nodes = &scenario.nodes;
    let pu = nodes.primary_users[k % nodes.primary_users.len()];
    let sbs = crate::channel::mean_attenuation(
        &LinkGeometry::to_ground(nodes.sbs, pu),
        scenario.los_params_access,
        scenario.attenuation_db,
        scenario.carrier_fc,
    )?;
    let uav = crate::channel::mean_attenuation(
        &LinkGeometry::to_ground(c, pu),
        scenario.los_params_access,
        scenario.attenuation_db,
        scenario.carrier_fc,
    )?;
    Ok((sbs, uav))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario_str;

    fn phase(fractions: &[f64], i_extra: f64) -> PhaseLinkState {
        PhaseLinkState {
            est_gain_power: 1.0,
            err_power_e: 0.0,
            hi_var: 0.0,
            pbs_interf_i: 0.0,
            pbs_gain_power: 1.0,
            norm_noise: i_extra,
            power_fractions: fractions.to_vec(),
            zeta: 0.0,
            lambda_itc: f64::INFINITY,
            serving_shape: 2,
            itc_shape: 2,
            pbs_shape: 2,
        }
    }

    #[test]
    fn single_user_sidnr_is_snr() {
        let p = phase(&[1.0], 0.25);
        assert!((p.sidnr(0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_fraction_gives_zero_sidnr() {
        let p = phase(&[0.0, 0.7], 0.1);
        assert_eq!(p.sidnr(0), 0.0);
    }

    #[test]
    fn two_user_hand_evaluation() {
        // alpha = (2/3, 1/3), noise chosen so I = 1/3: user 1 sees
        // (2/3) / (1/3 + 1/3) = 1.
        let p = phase(&[2.0 / 3.0, 1.0 / 3.0], 1.0 / 3.0);
        assert!((p.sidnr(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn e2e_is_min_and_monotone() {
        assert_eq!(e2e_sidnr(2.0, 3.0), 2.0);
        assert_eq!(e2e_sidnr(5.0, 5.0), 5.0);
        assert!(e2e_sidnr(2.5, 3.0) >= e2e_sidnr(2.0, 3.0));
        assert!(e2e_sidnr(2.0, 3.5) >= e2e_sidnr(2.0, 3.0));
    }

    #[test]
    fn rate_reference_points() {
        // Equal SIDNRs of 3 at lambda = 1/2 and W = 180 kHz: 180 kbit/s.
        assert!((user_rate(3.0, 3.0, 0.5, 180e3) - 180e3).abs() < 1e-9);
        assert_eq!(user_rate(3.0, 3.0, 0.0, 180e3), 0.0);
        let g = 7.0;
        assert!((user_rate(g, g, 0.5, 1.0) - 0.5 * (1.0 + g).log2()).abs() < 1e-15);
    }

    fn reference_scenario() -> ScenarioConfig {
        load_scenario_str(r#"{"rng_seed": 1}"#).unwrap()
    }

    #[test]
    fn deterministic_terms_reduce_to_noise_without_interference() {
        // Strip impairments and the PBS: I_r must equal the normalized
        // thermal noise.
        let mut cfg = reference_scenario();
        cfg.nodes.pbs = Position::new(400.0, -1e9, 20.0);
        cfg.validate().unwrap();
        let state =
            deterministic_cluster_state(&cfg, Position::new(400.0, 400.0, 100.0), &[0], 0).unwrap();
        let i_r = state.agg_i_r;
        let direct = state.broadcast.norm_noise;
        assert!(
            (i_r - direct) / direct < 1e-6,
            "I_r {i_r} should collapse to normalized noise {direct}"
        );
    }

    #[test]
    fn relay_interference_decreases_toward_uav() {
        // Deterministic mode: I_n strictly decreases as the user moves
        // toward the UAV ground projection.
        let cfg = reference_scenario();
        let c = Position::new(400.0, 400.0, 100.0);
        let mut last = f64::INFINITY;
        for x in [490.0, 470.0, 450.0, 430.0, 410.0] {
            let mut cfg = cfg.clone();
            cfg.nodes.secondary_users = vec![Position::new(x, 400.0, 0.0)];
            let state = deterministic_cluster_state(&cfg, c, &[0], 0).unwrap();
            assert!(state.agg_i_n[0] < last, "I_n not decreasing at x={x}");
            last = state.agg_i_n[0];
        }
    }

    #[test]
    fn weakest_user_is_ordered_first() {
        let mut cfg = reference_scenario();
        cfg.nodes.secondary_users =
            vec![Position::new(350.0, 400.0, 0.0), Position::new(500.0, 400.0, 0.0)];
        // UAV between the users: the farther one (index 1 here) is weakest.
        let c = Position::new(400.0, 400.0, 120.0);
        let state = deterministic_cluster_state(&cfg, c, &[0, 1], 0).unwrap();
        assert_eq!(state.user_order, vec![1, 0]);
        assert!(state.agg_i_n[0] > state.agg_i_n[1]);
    }

    #[test]
    fn sidnrs_finite_and_nonnegative() {
        let cfg = reference_scenario();
        let mut state =
            deterministic_cluster_state(&cfg, Position::new(380.0, 400.0, 80.0), &[0, 1, 2, 3], 0)
                .unwrap();
        state.set_power_fractions(&[0.4, 0.3, 0.2, 0.1], &[0.7, 0.2, 0.07, 0.03]);
        for n in 0..4 {
            let g1 = state.broadcast_sidnr(n);
            let g2 = state.relay_sidnr(n);
            assert!(g1.is_finite() && g1 >= 0.0);
            assert!(g2.is_finite() && g2 >= 0.0);
        }
    }
}
