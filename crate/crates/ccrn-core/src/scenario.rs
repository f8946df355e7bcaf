//! Scenario data model and configuration ingestion.
//!
//! A [`ScenarioConfig`] fully describes the network environment: node
//! positions and heights, power budgets, channel parameters, impairments,
//! the interference temperature constraint (ITC), and the RNG seed. All
//! fields except `rng_seed` are optional in the JSON file and fall back to
//! the default system parameters.
//!
//! Reproducibility contract: a single 64-bit seed drives the whole pipeline.
//! Each consumer (user generation, fading, Monte Carlo, annealing) derives an
//! independent ChaCha stream via [`derive_rng`], so module results do not
//! depend on evaluation order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    /// A named invariant of the configuration is violated.
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// A point in the deployment region; `z` is height above ground in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Ground-projected distance to `other` in meters.
    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// 3D (slant) distance to `other` in meters.
    pub fn slant_distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    fn validate(&self, name: &str) -> Result<(), ScenarioError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "{name}: coordinates must be finite"
            )));
        }
        if self.z < 0.0 {
            return Err(ScenarioError::Invalid(format!(
                "{name}: height z must be >= 0 (got {})",
                self.z
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration blocks
// ---------------------------------------------------------------------------

/// Positions of every node class in the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNodes {
    /// Primary base station (height `H_p`).
    pub pbs: Position,
    /// Secondary base station (height `H_s`).
    pub sbs: Position,
    /// Initial/current UAV relay location (height `H_r`).
    pub uav: Position,
    /// Primary users, one per primary channel region.
    pub primary_users: Vec<Position>,
    /// Secondary users inside the hot-spot (height `H_n = 0`).
    pub secondary_users: Vec<Position>,
}

/// Total transmit power budgets in watts, split evenly over `k_channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// PBS total transmit power in watts.
    pub p_pbs_total: f64,
    /// SBS total transmit power in watts.
    pub p_sbs_total: f64,
    /// UAV total transmit power in watts.
    pub p_uav_total: f64,
    /// Number of primary channels (= number of clusters).
    pub k_channels: usize,
}

impl PowerBudget {
    /// Per-channel PBS power `P_p / K` in watts.
    pub fn pbs_per_channel(&self) -> f64 {
        self.p_pbs_total / self.k_channels as f64
    }

    /// Per-channel SBS power `P_s / K` in watts.
    pub fn sbs_per_channel(&self) -> f64 {
        self.p_sbs_total / self.k_channels as f64
    }

    /// Per-channel UAV power `P_r / K` in watts.
    pub fn uav_per_channel(&self) -> f64 {
        self.p_uav_total / self.k_channels as f64
    }
}

/// Integer Nakagami-m shape per link class.
///
/// Integer shapes are required: the analytic coverage expressions expand
/// incomplete gamma functions into finite sums that only exist for
/// positive-integer fading parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FadingShapes {
    /// Shape of the serving (estimated) link in each phase.
    pub serving: u32,
    /// Shape of the secondary-transmitter-to-primary-user link (ITC event).
    pub to_primary: u32,
    /// Shape of the PBS interference link.
    pub pbs_interference: u32,
}

/// Transceiver and estimation impairments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentConfig {
    /// Aggregate hardware impairment level `phi = sqrt(phi_t^2 + phi_r^2)`
    /// per transceiver pair; the distortion noise power is `phi^2`.
    pub hi_level_phi: f64,
    /// CSI error scale `theta` (0 disables estimation error).
    pub csi_theta: f64,
    /// CSI error SNR exponent `mu >= 0`; the error variance is
    /// `theta * rho^(-mu)` with `rho` the transmit SNR.
    pub csi_mu: f64,
    /// Nakagami shapes per link class.
    pub fading_m: FadingShapes,
}

impl ImpairmentConfig {
    /// Hardware distortion noise power `sigma_phi^2`.
    pub fn hi_distortion_power(&self) -> f64 {
        self.hi_level_phi * self.hi_level_phi
    }
}

/// LoS probability sigmoid parameters `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosParams {
    pub a: f64,
    pub b: f64,
}

/// Excess attenuation on top of free-space loss, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationDb {
    pub los: f64,
    pub nlos: f64,
}

/// High-density region served by the UAV relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotSpot {
    pub center: Position,
    pub radius: f64,
}

impl HotSpot {
    pub fn contains(&self, p: &Position) -> bool {
        self.center.horizontal_distance(p) <= self.radius + 1e-9
    }
}

// ---------------------------------------------------------------------------
// Top-level scenario
// ---------------------------------------------------------------------------

/// Full environment description consumed by every other module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub nodes: NetworkNodes,
    pub budget: PowerBudget,
    /// Channel bandwidth `W` in Hz.
    pub bandwidth_w: f64,
    /// Carrier frequency in Hz.
    pub carrier_fc: f64,
    /// Per-channel interference temperature threshold in dBm.
    /// `null` disables the constraint entirely.
    pub itc_dbm: Option<f64>,
    /// LoS sigmoid parameters for links terminating at the UAV.
    pub los_params_backhaul: LosParams,
    /// LoS sigmoid parameters for links terminating at a ground user.
    pub los_params_access: LosParams,
    /// Excess LoS/NLoS attenuation in dB.
    pub attenuation_db: AttenuationDb,
    pub impairments: ImpairmentConfig,
    /// Thermal noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Target end-to-end rate threshold in bits/s (coverage metric).
    pub rate_threshold_rbar: f64,
    pub hotspot: HotSpot,
    /// Maximum cluster size; defaults to `ceil(N / K)`.
    pub max_cluster_size: usize,
    /// Global 64-bit seed; every random consumer derives its own stream.
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Thermal noise power `sigma^2` in watts over the configured bandwidth.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_w
    }

    /// ITC threshold in watts, `None` when the constraint is disabled.
    pub fn itc_watts(&self) -> Option<f64> {
        self.itc_dbm.map(dbm_to_watts)
    }

    /// Number of secondary users `N`.
    pub fn n_users(&self) -> usize {
        self.nodes.secondary_users.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.nodes.pbs.validate("nodes.pbs")?;
        self.nodes.sbs.validate("nodes.sbs")?;
        self.nodes.uav.validate("nodes.uav")?;
        for (i, p) in self.nodes.primary_users.iter().enumerate() {
            p.validate(&format!("nodes.primary_users[{i}]"))?;
        }
        for (i, p) in self.nodes.secondary_users.iter().enumerate() {
            p.validate(&format!("nodes.secondary_users[{i}]"))?;
            if !self.hotspot.contains(p) {
                return Err(ScenarioError::Invalid(format!(
                    "nodes.secondary_users[{i}] lies outside the hot-spot disc"
                )));
            }
        }
        if self.nodes.primary_users.is_empty() {
            return Err(ScenarioError::Invalid(
                "nodes.primary_users must be non-empty".into(),
            ));
        }
        if self.nodes.secondary_users.is_empty() {
            return Err(ScenarioError::Invalid(
                "nodes.secondary_users must be non-empty".into(),
            ));
        }
        if !(self.budget.p_pbs_total > 0.0
            && self.budget.p_sbs_total > 0.0
            && self.budget.p_uav_total > 0.0)
        {
            return Err(ScenarioError::Invalid(
                "budget: all total powers must be > 0".into(),
            ));
        }
        if self.budget.k_channels == 0 {
            return Err(ScenarioError::Invalid("budget.k_channels must be >= 1".into()));
        }
        if !(self.bandwidth_w > 0.0) {
            return Err(ScenarioError::Invalid("bandwidth_w must be > 0".into()));
        }
        if !(self.carrier_fc > 0.0) {
            return Err(ScenarioError::Invalid("carrier_fc must be > 0".into()));
        }
        if !(self.hotspot.radius > 0.0) {
            return Err(ScenarioError::Invalid("hotspot.radius must be > 0".into()));
        }
        let imp = &self.impairments;
        if imp.hi_level_phi < 0.0 {
            return Err(ScenarioError::Invalid("impairments.hi_level_phi must be >= 0".into()));
        }
        if imp.csi_theta < 0.0 {
            return Err(ScenarioError::Invalid("impairments.csi_theta must be >= 0".into()));
        }
        if imp.csi_mu < 0.0 {
            return Err(ScenarioError::Invalid("impairments.csi_mu must be >= 0".into()));
        }
        let m = &imp.fading_m;
        if m.serving == 0 || m.to_primary == 0 || m.pbs_interference == 0 {
            return Err(ScenarioError::Invalid(
                "impairments.fading_m: all shapes must be positive integers".into(),
            ));
        }
        for lp in [&self.los_params_backhaul, &self.los_params_access] {
            if !(lp.a > 0.0 && lp.b > 0.0) {
                return Err(ScenarioError::Invalid(
                    "los_params: a and b must be > 0".into(),
                ));
            }
        }
        if !(self.rate_threshold_rbar >= 0.0) {
            return Err(ScenarioError::Invalid("rate_threshold_rbar must be >= 0".into()));
        }
        if self.max_cluster_size == 0 {
            return Err(ScenarioError::Invalid("max_cluster_size must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format with defaults
// ---------------------------------------------------------------------------

/// On-disk form of [`ScenarioConfig`]: every field optional except
/// `rng_seed`. Missing fields take the default system parameters below.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    nodes: Option<NetworkNodes>,
    budget: Option<PowerBudget>,
    bandwidth_w: Option<f64>,
    carrier_fc: Option<f64>,
    #[serde(default = "default_itc_field")]
    itc_dbm: Option<f64>,
    los_params_backhaul: Option<LosParams>,
    los_params_access: Option<LosParams>,
    attenuation_db: Option<AttenuationDb>,
    impairments: Option<ImpairmentConfig>,
    noise_psd_dbm_hz: Option<f64>,
    rate_threshold_rbar: Option<f64>,
    hotspot: Option<HotSpot>,
    max_cluster_size: Option<usize>,
    rng_seed: Option<u64>,
}

/// Absent `itc_dbm` means the default 0 dBm cap; an explicit `null`
/// disables the ITC.
fn default_itc_field() -> Option<f64> {
    Some(DEFAULT_ITC_DBM)
}

/// Default bandwidth, 180 kHz.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 180e3;
/// Default carrier frequency, 1.8 GHz.
pub const DEFAULT_CARRIER_HZ: f64 = 1.8e9;
/// Default per-channel ITC threshold in dBm.
pub const DEFAULT_ITC_DBM: f64 = 0.0;
/// Default thermal noise density (kT at 290 K plus nothing), dBm/Hz.
pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -174.0;
/// Default coverage rate threshold in bits/s.
pub const DEFAULT_RATE_THRESHOLD: f64 = 1.3e6;

impl ScenarioFile {
    /// Fill defaults and produce a validated config.
    fn into_config(self) -> Result<ScenarioConfig, ScenarioError> {
        let rng_seed = self
            .rng_seed
            .ok_or_else(|| ScenarioError::Invalid("rng_seed is required".into()))?;
        let hotspot = self.hotspot.unwrap_or(HotSpot {
            center: Position::new(400.0, 400.0, 0.0),
            radius: 100.0,
        });
        let nodes = self.nodes.unwrap_or_else(|| default_nodes());
        let budget = self.budget.unwrap_or(PowerBudget {
            p_pbs_total: dbm_to_watts(46.0),
            p_sbs_total: dbm_to_watts(46.0),
            p_uav_total: dbm_to_watts(30.0),
            k_channels: 1,
        });
        let n = nodes.secondary_users.len().max(1);
        let k = budget.k_channels.max(1);
        let cfg = ScenarioConfig {
            max_cluster_size: self.max_cluster_size.unwrap_or(n.div_ceil(k)),
            nodes,
            budget,
            bandwidth_w: self.bandwidth_w.unwrap_or(DEFAULT_BANDWIDTH_HZ),
            carrier_fc: self.carrier_fc.unwrap_or(DEFAULT_CARRIER_HZ),
            itc_dbm: self.itc_dbm,
            los_params_backhaul: self.los_params_backhaul.unwrap_or(LosParams { a: 7.0, b: 0.2 }),
            los_params_access: self.los_params_access.unwrap_or(LosParams { a: 13.0, b: 0.22 }),
            attenuation_db: self.attenuation_db.unwrap_or(AttenuationDb { los: 1.6, nlos: 20.0 }),
            impairments: self.impairments.unwrap_or(ImpairmentConfig {
                hi_level_phi: 0.0,
                csi_theta: 0.0,
                csi_mu: 0.0,
                fading_m: FadingShapes { serving: 2, to_primary: 2, pbs_interference: 2 },
            }),
            noise_psd_dbm_hz: self.noise_psd_dbm_hz.unwrap_or(DEFAULT_NOISE_PSD_DBM_HZ),
            rate_threshold_rbar: self.rate_threshold_rbar.unwrap_or(DEFAULT_RATE_THRESHOLD),
            hotspot,
            rng_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Default reference geometry. The SBS sits at the origin of the sweep axis
/// with the hot-spot centered 400 m away; the four default secondary users
/// are spread along that axis inside the hot-spot. The primary network is
/// placed well off-axis so its interference shapes but does not dominate
/// the landscape.
fn default_nodes() -> NetworkNodes {
    NetworkNodes {
        pbs: Position::new(400.0, -1100.0, 20.0),
        sbs: Position::new(0.0, 400.0, 20.0),
        uav: Position::new(400.0, 400.0, 100.0),
        primary_users: vec![Position::new(400.0, -1000.0, 0.0)],
        secondary_users: vec![
            Position::new(500.0, 400.0, 0.0),
            Position::new(450.0, 400.0, 0.0),
            Position::new(350.0, 400.0, 0.0),
            Position::new(300.0, 400.0, 0.0),
        ],
    }
}

/// Load, default-fill, and validate a scenario file.
///
/// The `CCR_SEED` environment variable, when set to a valid `u64`,
/// overrides the file's `rng_seed`.
pub fn load_scenario<P: AsRef<Path>>(path: P) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

/// Same as [`load_scenario`] but from an in-memory JSON string.
pub fn load_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut file: ScenarioFile = serde_json::from_str(text)?;
    if let Ok(seed) = std::env::var("CCR_SEED") {
        match seed.parse::<u64>() {
            Ok(s) => file.rng_seed = Some(s),
            Err(_) => {
                return Err(ScenarioError::Invalid(format!(
                    "CCR_SEED must be a 64-bit unsigned integer (got {seed:?})"
                )))
            }
        }
    }
    file.into_config()
}

// ---------------------------------------------------------------------------
// Unit conversions
// ---------------------------------------------------------------------------

/// Convert dBm to watts: `10^((p - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    30.0 + 10.0 * w.log10()
}

// ---------------------------------------------------------------------------
// RNG stream derivation
// ---------------------------------------------------------------------------

/// Named stream counters for [`derive_rng`]. Monte Carlo workers use
/// `MONTE_CARLO_BASE + block_index` so trial blocks are independent of the
/// worker count; deployment restarts use `ANNEAL_BASE + restart_index`.
pub mod streams {
    pub const USER_GEN: u64 = 0;
    pub const CHANNEL: u64 = 1;
    pub const ANNEAL_BASE: u64 = 1 << 16;
    pub const MONTE_CARLO_BASE: u64 = 1 << 32;
}

/// Derive an independent ChaCha12 stream from the global seed.
///
/// The same `(seed, stream)` pair always yields the same byte sequence on
/// every platform, and distinct stream counters never collide.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Hot-spot user generation
// ---------------------------------------------------------------------------

/// Draw `n` user positions uniformly over the hot-spot disc at ground level.
///
/// Radius is sampled by inverse CDF (`r = R * sqrt(u)`), which is exactly
/// uniform over the disc and keeps the draw count per user fixed at two.
pub fn generate_hotspot_users<R: Rng>(hotspot: &HotSpot, n: usize, rng: &mut R) -> Vec<Position> {
    assert!(n >= 1, "need at least one user");
    (0..n)
        .map(|_| {
            let r = hotspot.radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            Position::new(
                hotspot.center.x + r * phi.cos(),
                hotspot.center.y + r * phi.sin(),
                0.0,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        // 46 dBm = 10^1.6 W
        assert!((dbm_to_watts(46.0) - 39.810717055349734).abs() < 1e-12);
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-12);
    }

    #[test]
    fn minimal_file_gets_table_defaults() {
        let cfg = load_scenario_str(r#"{"rng_seed": 7}"#).unwrap();
        assert_eq!(cfg.bandwidth_w, 180e3);
        assert_eq!(cfg.carrier_fc, 1.8e9);
        assert!((cfg.budget.p_sbs_total - dbm_to_watts(46.0)).abs() < 1e-12);
        assert!((cfg.budget.p_pbs_total - dbm_to_watts(46.0)).abs() < 1e-12);
        assert!((cfg.budget.p_uav_total - dbm_to_watts(30.0)).abs() < 1e-12);
        assert_eq!(cfg.los_params_backhaul, LosParams { a: 7.0, b: 0.2 });
        assert_eq!(cfg.los_params_access, LosParams { a: 13.0, b: 0.22 });
        assert_eq!(cfg.attenuation_db, AttenuationDb { los: 1.6, nlos: 20.0 });
        assert_eq!(cfg.nodes.pbs.z, 20.0);
        assert_eq!(cfg.nodes.sbs.z, 20.0);
        assert_eq!(cfg.impairments.fading_m.serving, 2);
        assert_eq!(cfg.hotspot.radius, 100.0);
        assert_eq!(cfg.itc_dbm, Some(0.0));
        assert_eq!(cfg.max_cluster_size, 4); // ceil(4 users / 1 channel)
        assert_eq!(cfg.rng_seed, 7);
    }

    #[test]
    fn zero_radius_is_rejected() {
        let err = load_scenario_str(r#"{"rng_seed": 1, "hotspot": {"center": {"x": 0, "y": 0, "z": 0}, "radius": 0.0}}"#)
            .unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(ref m) if m.contains("radius")));
    }

    #[test]
    fn snr_independent_csi_config_accepted() {
        let cfg = load_scenario_str(
            r#"{"rng_seed": 1, "impairments": {"hi_level_phi": 0.0, "csi_theta": 0.01,
                "csi_mu": 0.0, "fading_m": {"serving": 2, "to_primary": 2, "pbs_interference": 2}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.impairments.csi_theta, 0.01);
        assert_eq!(cfg.impairments.csi_mu, 0.0);
    }

    #[test]
    fn null_itc_disables_cap() {
        let cfg = load_scenario_str(r#"{"rng_seed": 1, "itc_dbm": null}"#).unwrap();
        assert_eq!(cfg.itc_dbm, None);
        assert_eq!(cfg.itc_watts(), None);
    }

    #[test]
    fn serialize_round_trip() {
        let cfg = load_scenario_str(r#"{"rng_seed": 99, "bandwidth_w": 2e5}"#).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = load_scenario_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hotspot_users_are_deterministic_and_centered() {
        let hs = HotSpot { center: Position::new(400.0, 400.0, 0.0), radius: 100.0 };
        let a = generate_hotspot_users(&hs, 64, &mut derive_rng(5, streams::USER_GEN));
        let b = generate_hotspot_users(&hs, 64, &mut derive_rng(5, streams::USER_GEN));
        assert_eq!(a, b);

        // Degenerate disc collapses to the center.
        let tiny = HotSpot { center: hs.center, radius: 1e-300 };
        let p = generate_hotspot_users(&tiny, 1, &mut derive_rng(5, 0));
        assert!((p[0].x - 400.0).abs() < 1e-9 && (p[0].y - 400.0).abs() < 1e-9);
    }

    #[test]
    fn hotspot_users_mean_distance_matches_uniform_disc() {
        // E[r] over a uniform disc of radius R is 2R/3.
        let hs = HotSpot { center: Position::new(0.0, 0.0, 0.0), radius: 100.0 };
        let users = generate_hotspot_users(&hs, 10_000, &mut derive_rng(11, streams::USER_GEN));
        let mean: f64 = users
            .iter()
            .map(|u| hs.center.horizontal_distance(u))
            .sum::<f64>()
            / users.len() as f64;
        let expect = 2.0 / 3.0 * 100.0;
        assert!(
            (mean - expect).abs() / expect < 0.02,
            "mean distance {mean} deviates from {expect}"
        );
    }

    #[test]
    fn hotspot_users_inner_disc_fraction() {
        // A quarter of the points fall within radius/2; chi-square test with
        // one degree of freedom at the 1% level (critical value 6.635).
        let hs = HotSpot { center: Position::new(0.0, 0.0, 0.0), radius: 100.0 };
        let n = 100_000usize;
        let users = generate_hotspot_users(&hs, n, &mut derive_rng(13, streams::USER_GEN));
        let inner = users
            .iter()
            .filter(|u| hs.center.horizontal_distance(u) <= 50.0)
            .count() as f64;
        let expected = n as f64 / 4.0;
        let chi2 = (inner - expected).powi(2) / expected
            + ((n as f64 - inner) - 3.0 * expected).powi(2) / (3.0 * expected);
        assert!(chi2 < 6.635, "chi-square statistic too large: {chi2}");
    }

    #[test]
    fn rng_streams_are_independent() {
        let mut a = derive_rng(1, 0);
        let mut b = derive_rng(1, 1);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn users_outside_hotspot_rejected() {
        let err = load_scenario_str(
            r#"{"rng_seed": 1, "nodes": {
                "pbs": {"x": 400, "y": -1100, "z": 20},
                "sbs": {"x": 0, "y": 400, "z": 20},
                "uav": {"x": 400, "y": 400, "z": 100},
                "primary_users": [{"x": 400, "y": -1000, "z": 0}],
                "secondary_users": [{"x": 900, "y": 400, "z": 0}]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(ref m) if m.contains("hot-spot")));
    }
}
