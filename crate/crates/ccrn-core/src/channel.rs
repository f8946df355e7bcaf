//! Air-to-ground channel model.
//!
//! Composite link gain `g = sqrt(ell) * h`: `ell` is the LoS/NLoS-weighted
//! mean attenuation set by geometry, and `h` is unit-mean Nakagami-m small
//! scale fading, optionally split into an estimated part and an estimation
//! error for imperfect CSI.
//!
//! Angle conventions (the elevation sigmoid is calibrated in degrees):
//! * links between a base station and the UAV use the elevation of the UAV
//!   as seen from the base station, `arctan((H_r - H_i) / d)`, which is
//!   negative when the UAV flies below the station height;
//! * links towards a ground node use the elevation of the transmitter as
//!   seen from the ground node, `arctan(H_tx / d)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use thiserror::Error;

use crate::scenario::{
    AttenuationDb, FadingShapes, ImpairmentConfig, LosParams, Position, SPEED_OF_LIGHT,
};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel domain error: {0}")]
    Domain(String),
    #[error("channel configuration error: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Geometry of one directed link.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeometry {
    pub tx: Position,
    pub rx: Position,
    /// Ground-projected distance in meters.
    pub horizontal_distance: f64,
    /// 3D distance in meters, used by the free-space path loss.
    pub slant_distance: f64,
    /// Elevation angle in degrees, used by the LoS probability.
    pub elevation_deg: f64,
}

impl LinkGeometry {
    /// Link between a base station (PBS or SBS) and the UAV, either
    /// direction. Elevation is that of the UAV seen from the station.
    pub fn bs_to_uav(bs: Position, uav: Position) -> Self {
        let d = bs.horizontal_distance(&uav);
        Self {
            tx: bs,
            rx: uav,
            horizontal_distance: d,
            slant_distance: bs.slant_distance(&uav),
            elevation_deg: (uav.z - bs.z).atan2(d).to_degrees(),
        }
    }

    /// Link from an elevated transmitter down to a ground node (secondary
    /// or primary user). Elevation is that of the transmitter seen from
    /// the ground node.
    pub fn to_ground(tx: Position, ground: Position) -> Self {
        let d = tx.horizontal_distance(&ground);
        Self {
            tx,
            rx: ground,
            horizontal_distance: d,
            slant_distance: tx.slant_distance(&ground),
            elevation_deg: (tx.z - ground.z).atan2(d).to_degrees(),
        }
    }
}

/// Which role a link plays; selects its LoS parameter set, Nakagami shape,
/// and whether the receiver estimates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    /// SBS -> UAV serving link (broadcasting phase).
    Backhaul,
    /// UAV -> SU serving link (relaying phase).
    Access,
    /// PBS -> UAV interference link.
    PbsToUav,
    /// PBS -> SU interference link.
    PbsToUser,
    /// SBS or UAV -> PU coupling link (interference temperature).
    ToPrimary,
}

impl LinkClass {
    /// Serving links are estimated at the receiver; interference and
    /// ITC-coupling links are not.
    pub fn is_estimated(self) -> bool {
        matches!(self, LinkClass::Backhaul | LinkClass::Access)
    }

    /// Links terminating at the UAV follow the backhaul sigmoid; links
    /// terminating at a ground node follow the access sigmoid.
    pub fn los_params(self, backhaul: LosParams, access: LosParams) -> LosParams {
        match self {
            LinkClass::Backhaul | LinkClass::PbsToUav => backhaul,
            LinkClass::Access | LinkClass::PbsToUser | LinkClass::ToPrimary => access,
        }
    }

    pub fn fading_shape(self, shapes: FadingShapes) -> u32 {
        match self {
            LinkClass::Backhaul | LinkClass::Access => shapes.serving,
            LinkClass::PbsToUav | LinkClass::PbsToUser => shapes.pbs_interference,
            LinkClass::ToPrimary => shapes.to_primary,
        }
    }
}

// ---------------------------------------------------------------------------
// Large-scale model
// ---------------------------------------------------------------------------

/// LoS probability `1 / (1 + a exp(-b (theta - a)))` with `theta` the
/// elevation angle in degrees. Strictly increasing in `theta`, in (0, 1).
pub fn los_probability(elevation_deg: f64, params: LosParams) -> f64 {
    1.0 / (1.0 + params.a * (-params.b * (elevation_deg - params.a)).exp())
}

/// Free-space path loss in dB at slant distance `d` meters and carrier
/// `fc` Hz.
pub fn fspl_db(slant_distance: f64, fc: f64) -> Result<f64, ChannelError> {
    if slant_distance <= 0.0 {
        return Err(ChannelError::Domain(format!(
            "slant distance must be > 0 (got {slant_distance})"
        )));
    }
    if fc <= 0.0 {
        return Err(ChannelError::Domain(format!("carrier frequency must be > 0 (got {fc})")));
    }
    Ok(20.0 * slant_distance.log10()
        + 20.0 * fc.log10()
        + 20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT).log10())
}

/// Mean path loss in dB for a given LoS probability:
/// `p_los (FSPL + eta_los) + (1 - p_los)(FSPL + eta_nlos)`.
pub fn path_loss_db_given_prob(p_los: f64, fspl: f64, eta: AttenuationDb) -> f64 {
    p_los * (fspl + eta.los) + (1.0 - p_los) * (fspl + eta.nlos)
}

/// Spatial expectation of the path loss in dB over the LoS/NLoS mix.
pub fn mean_path_loss_db(
    geometry: &LinkGeometry,
    los: LosParams,
    eta: AttenuationDb,
    fc: f64,
) -> Result<f64, ChannelError> {
    let fspl = fspl_db(geometry.slant_distance, fc)?;
    Ok(path_loss_db_given_prob(
        los_probability(geometry.elevation_deg, los),
        fspl,
        eta,
    ))
}

/// Spatial expectation of the linear attenuation: the geometric LoS/NLoS
/// mix `prod_l [eta_l * FSPL]^(-p(l))` of the linear per-state losses.
/// Equals `10^(-PL_dB / 10)` of [`mean_path_loss_db`].
pub fn mean_attenuation(
    geometry: &LinkGeometry,
    los: LosParams,
    eta: AttenuationDb,
    fc: f64,
) -> Result<f64, ChannelError> {
    let fspl_lin = 10f64.powf(fspl_db(geometry.slant_distance, fc)? / 10.0);
    let p_los = los_probability(geometry.elevation_deg, los);
    let eta_los_lin = 10f64.powf(eta.los / 10.0);
    let eta_nlos_lin = 10f64.powf(eta.nlos / 10.0);
    Ok((eta_los_lin * fspl_lin).powf(-p_los) * (eta_nlos_lin * fspl_lin).powf(-(1.0 - p_los)))
}

// ---------------------------------------------------------------------------
// Small-scale model
// ---------------------------------------------------------------------------

/// Draw a unit-mean Nakagami-m fading power sample, i.e. Gamma(m, rate m).
pub fn sample_nakagami_power<R: Rng>(m: u32, rng: &mut R) -> f64 {
    assert!(m >= 1);
    let gamma = Gamma::new(m as f64, 1.0 / m as f64).expect("valid gamma parameters");
    gamma.sample(rng)
}

/// CSI error variance `zeta = theta * rho^(-mu)` with `rho` the transmit
/// SNR in linear scale.
pub fn csi_error_variance(theta: f64, mu: f64, tx_snr_linear: f64) -> f64 {
    debug_assert!(theta >= 0.0 && mu >= 0.0 && tx_snr_linear > 0.0);
    theta * tx_snr_linear.powf(-mu)
}

/// Floor on the estimated-channel power scale when the configured error
/// variance approaches the full channel power.
pub const EST_POWER_FLOOR: f64 = 1e-6;

/// One realized link: mean attenuation plus a small-scale draw.
#[derive(Debug, Clone, Copy)]
pub struct ChannelRealization {
    /// Linear mean attenuation `ell`.
    pub ell: f64,
    /// True composite small-scale power `|h|^2 = |h_est + e|^2`.
    pub h_true_power: f64,
    /// Estimated channel coefficient (re, im).
    pub h_est: (f64, f64),
    /// Estimation error variance `zeta`.
    pub err_var: f64,
    /// Estimated small-scale power `|h_est|^2`.
    pub est_power: f64,
}

/// Sample a channel realization for one link.
///
/// The estimated power is a Nakagami power draw scaled by
/// `max(1 - zeta, EST_POWER_FLOOR)` and the error is an independent
/// complex Gaussian of variance `zeta`, so `h = h_est + e` holds in
/// distribution with `E|h|^2 = 1`. Interference links are not estimated
/// and carry `zeta = 0`.
pub fn sample_channel<R: Rng>(
    geometry: &LinkGeometry,
    class: LinkClass,
    backhaul_los: LosParams,
    access_los: LosParams,
    eta: AttenuationDb,
    fc: f64,
    impairments: &ImpairmentConfig,
    tx_snr_linear: f64,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    let ell = mean_attenuation(geometry, class.los_params(backhaul_los, access_los), eta, fc)?;
    let zeta = if class.is_estimated() {
        csi_error_variance(impairments.csi_theta, impairments.csi_mu, tx_snr_linear)
    } else {
        0.0
    };
    if zeta >= 1.0 {
        return Err(ChannelError::Config(format!(
            "CSI error variance {zeta} >= 1: estimation noise exceeds the channel power"
        )));
    }
    let shape = class.fading_shape(impairments.fading_m);
    let scale = (1.0 - zeta).max(EST_POWER_FLOOR);
    let est_power = scale * sample_nakagami_power(shape, rng);
    let phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let amp = est_power.sqrt();
    let h_est = (amp * phase.cos(), amp * phase.sin());
    let h_true_power = if zeta > 0.0 {
        let err = Normal::new(0.0, (zeta / 2.0).sqrt()).expect("valid normal");
        let h = (h_est.0 + err.sample(rng), h_est.1 + err.sample(rng));
        h.0 * h.0 + h.1 * h.1
    } else {
        est_power
    };
    Ok(ChannelRealization { ell, h_true_power, h_est, err_var: zeta, est_power })
}
