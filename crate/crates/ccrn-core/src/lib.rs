//! # ccrn-core
//!
//! Planning library for a UAV-relayed cooperative cognitive NOMA secondary
//! network. The secondary base station (SBS) offloads hot-spot traffic
//! through a relaying UAV onto primary channels in an underlay fashion, and
//! this crate provides everything needed to plan such a deployment:
//!
//! * [`scenario`] — data model, JSON configuration, hot-spot user generation,
//!   and deterministic RNG stream derivation.
//! * [`channel`] — air-to-ground LoS probability, LoS/NLoS-weighted path
//!   loss, Nakagami-m fading, and imperfect-CSI channel realizations.
//! * [`link`] — per-user SIDNRs of the broadcasting and relaying phases,
//!   end-to-end rates, and the aggregated interference-plus-noise terms.
//! * [`ra`] — closed-form max-min fair power and phase-time allocation per
//!   cluster, with a grid-search oracle for validation.
//! * [`coverage`] — analytic coverage probability over Nakagami-m fading
//!   with hardware impairments, CSI error, primary interference, and the
//!   interference temperature cap, plus a Monte Carlo oracle.
//! * [`assign`] — user clustering and channel assignment via iterative
//!   linear bottleneck assignment (threshold method).
//! * [`deploy`] — 3D UAV placement by simulated annealing and grid sweeps.
//!
//! All randomized components draw from counter-split ChaCha streams derived
//! from the single scenario seed, so every result is bit-reproducible.

pub mod assign;
pub mod channel;
pub mod coverage;
pub mod deploy;
pub mod link;
pub mod numeric;
pub mod ra;
pub mod scenario;
