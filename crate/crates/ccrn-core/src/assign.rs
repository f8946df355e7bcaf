//! User clustering and channel assignment.
//!
//! Users join clusters over `ceil(N/K)` rounds. Each round scores every
//! (cluster, unassigned user) pair by re-solving the cluster's resource
//! allocation with the user hypothetically admitted, then solves a linear
//! bottleneck assignment (LBA) on that cost matrix so each cluster admits
//! at most one new member per round and the worst admitted score is as
//! large as possible.
//!
//! The LBA itself uses the threshold method: binary search over the sorted
//! distinct costs, testing each threshold for a perfect matching on the
//! edges at or above it (Hopcroft-Karp).

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::coverage::{min_coverage, CoverageError};
use crate::link::{deterministic_cluster_state, mean_gains_to_pu, LinkError};
use crate::ra::{allocate_cluster, power_cap, AllocError, PowerCaps};
use crate::scenario::{Position, ScenarioConfig};

#[derive(Debug, Error)]
pub enum AssignError {
    #[error("cost matrix is empty")]
    EmptyMatrix,
    #[error("cost matrix must be square after padding ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("assignment infeasible: {0}")]
    Infeasible(String),
    #[error("instance too large for the exhaustive oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

/// Cost metric used to score a cluster: deterministic max-min rate or the
/// worst-member analytic coverage probability at the optimal allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    MinRate,
    Coverage,
}

impl MetricMode {
    /// Identity element for minimization; also the sentinel cost used to
    /// pad rectangular matrices so padding never binds the bottleneck.
    fn neutral(self) -> f64 {
        match self {
            MetricMode::MinRate => f64::INFINITY,
            MetricMode::Coverage => 1.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Linear bottleneck assignment
// ---------------------------------------------------------------------------

/// Cost matrix fed to the bottleneck solver: `entries[k][n]` scores
/// admitting user `n` into cluster `k` (zero once `n` is assigned).
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub entries: Vec<Vec<f64>>,
    pub iteration: usize,
}

/// A solved one-to-one assignment.
#[derive(Debug, Clone)]
pub struct LbaSolution {
    /// `assignment[row] = column`.
    pub assignment: Vec<usize>,
    /// The minimum selected entry, maximized over all assignments.
    pub bottleneck: f64,
}

/// Exact linear bottleneck assignment on a square matrix.
pub fn lba_solve(cost: &[Vec<f64>]) -> Result<LbaSolution, AssignError> {
    let n = cost.len();
    if n == 0 {
        return Err(AssignError::EmptyMatrix);
    }
    if let Some(row) = cost.iter().find(|r| r.len() != n) {
        return Err(AssignError::NotSquare { rows: n, cols: row.len() });
    }

    let mut values: Vec<f64> = cost.iter().flatten().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();

    // The lowest threshold keeps every edge, so a perfect matching always
    // exists there; binary search for the highest feasible threshold.
    let mut lo = 0usize;
    let mut hi = values.len() - 1;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if perfect_matching_at(cost, values[mid]).is_some() {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let bottleneck = values[lo];
    let assignment = perfect_matching_at(cost, bottleneck)
        .expect("threshold verified feasible during the search");
    Ok(LbaSolution { assignment, bottleneck })
}

/// Hopcroft-Karp maximum matching restricted to entries `>= threshold`;
/// returns the row-to-column map when the matching is perfect.
/// Rows and columns are scanned in index order, so ties resolve
/// deterministically.
fn perfect_matching_at(cost: &[Vec<f64>], threshold: f64) -> Option<Vec<usize>> {
    const FREE: usize = usize::MAX;
    let n = cost.len();
    let mut match_row = vec![FREE; n];
    let mut match_col = vec![FREE; n];
    let mut dist = vec![0u32; n];
    let mut queue = Vec::with_capacity(n);
    let mut matched = 0usize;

    loop {
        // BFS: layer free rows.
        queue.clear();
        for r in 0..n {
            if match_row[r] == FREE {
                dist[r] = 0;
                queue.push(r);
            } else {
                dist[r] = u32::MAX;
            }
        }
        let mut found_free_col = false;
        let mut head = 0;
        while head < queue.len() {
            let r = queue[head];
            head += 1;
            for c in 0..n {
                if cost[r][c] < threshold {
                    continue;
                }
                let next = match_col[c];
                if next == FREE {
                    found_free_col = true;
                } else if dist[next] == u32::MAX {
                    dist[next] = dist[r] + 1;
                    queue.push(next);
                }
            }
        }
        if !found_free_col {
            break;
        }
        // DFS augmentation along layered paths.
        fn augment(
            r: usize,
            n: usize,
            cost: &[Vec<f64>],
            threshold: f64,
            dist: &mut [u32],
            match_row: &mut [usize],
            match_col: &mut [usize],
        ) -> bool {
            for c in 0..n {
                if cost[r][c] < threshold {
                    continue;
                }
                let next = match_col[c];
                if next == usize::MAX
                    || (dist[next] == dist[r] + 1
                        && augment(next, n, cost, threshold, dist, match_row, match_col))
                {
                    match_row[r] = c;
                    match_col[c] = r;
                    return true;
                }
            }
            dist[r] = u32::MAX;
            false
        }
        for r in 0..n {
            if match_row[r] == FREE
                && augment(r, n, cost, threshold, &mut dist, &mut match_row, &mut match_col)
            {
                matched += 1;
            }
        }
    }

    (matched == n).then_some(match_row)
}

// ---------------------------------------------------------------------------
// Cluster metric
// ---------------------------------------------------------------------------

/// ITC-aware power caps for channel `k` at UAV location `c`, using the
/// mean (expected-fading) coupling gains toward the protected PU.
pub fn channel_power_caps(
    scenario: &ScenarioConfig,
    c: Position,
    k: usize,
) -> Result<PowerCaps, AssignError> {
    let (g_sbs, g_uav) = mean_gains_to_pu(scenario, c, k)?;
    let itc = scenario.itc_watts();
    Ok(PowerCaps {
        phi1: power_cap(scenario.budget.sbs_per_channel(), g_sbs, itc),
        phi2: power_cap(scenario.budget.uav_per_channel(), g_uav, itc),
    })
}

/// Score a hypothetical cluster on channel `k`: solve its max-min resource
/// allocation in deterministic channel mode and report the configured
/// metric.
pub fn cluster_metric(
    scenario: &ScenarioConfig,
    c: Position,
    members: &[usize],
    k: usize,
    mode: MetricMode,
) -> Result<f64, AssignError> {
    let state = deterministic_cluster_state(scenario, c, members, k)?;
    let caps = channel_power_caps(scenario, c, k)?;
    let alloc = allocate_cluster(&state, caps, scenario.bandwidth_w)?;
    match mode {
        MetricMode::MinRate => Ok(alloc.maxmin_rate),
        MetricMode::Coverage => Ok(min_coverage(
            &state,
            &alloc,
            scenario.rate_threshold_rbar,
            scenario.bandwidth_w,
        )?),
    }
}

// ---------------------------------------------------------------------------
// Iterative clustering
// ---------------------------------------------------------------------------

/// Final SU-to-channel assignment.
#[derive(Debug, Clone)]
pub struct AssignmentMatrix {
    /// `chi[k][n]`: user `n` serves on channel `k`.
    pub chi: Vec<Vec<bool>>,
    /// Members per cluster, in admission order.
    pub clusters: Vec<Vec<usize>>,
    /// Final per-cluster metric; empty clusters keep the neutral value.
    pub cluster_probs: Vec<f64>,
}

impl AssignmentMatrix {
    fn verify(&self, n_users: usize, cap: usize) {
        for n in 0..n_users {
            let col_sum: usize = self.chi.iter().filter(|row| row[n]).count();
            debug_assert!(col_sum <= 1, "user {n} assigned {col_sum} times");
        }
        for (k, row) in self.chi.iter().enumerate() {
            let row_sum = row.iter().filter(|&&x| x).count();
            debug_assert!(row_sum <= cap, "cluster {k} holds {row_sum} > {cap} users");
            debug_assert_eq!(row_sum, self.clusters[k].len());
        }
    }
}

/// Iterative bottleneck clustering for a given UAV location.
///
/// Returns the assignment and the network-wide minimum metric across
/// occupied clusters.
pub fn cluster_and_assign(
    scenario: &ScenarioConfig,
    c: Position,
    mode: MetricMode,
) -> Result<(AssignmentMatrix, f64), AssignError> {
    let n_users = scenario.n_users();
    let k_channels = scenario.budget.k_channels;
    let cap = n_users.div_ceil(k_channels);
    if scenario.max_cluster_size < cap {
        return Err(AssignError::Infeasible(format!(
            "max_cluster_size {} cannot hold {n_users} users on {k_channels} channels",
            scenario.max_cluster_size
        )));
    }

    let neutral = mode.neutral();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k_channels];
    let mut cluster_probs = vec![neutral; k_channels];
    let mut assigned = vec![false; n_users];

    for iteration in 1..=cap {
        let unassigned: Vec<usize> = (0..n_users).filter(|&n| !assigned[n]).collect();
        if unassigned.is_empty() {
            break;
        }
        // Hypothetical-admission cost matrix, rows parallel per cluster.
        let rows: Vec<Vec<f64>> = (0..k_channels)
            .into_par_iter()
            .map(|k| {
                unassigned
                    .iter()
                    .map(|&n| {
                        let mut members = clusters[k].clone();
                        members.push(n);
                        cluster_metric(scenario, c, &members, k, mode)
                    })
                    .collect::<Result<Vec<f64>, AssignError>>()
            })
            .collect::<Result<_, _>>()?;
        let cost = CostMatrix { entries: rows, iteration };

        // Pad to square with the neutral sentinel; padded rows/columns are
        // virtual clusters/users and their assignments are discarded.
        let m = k_channels.max(unassigned.len());
        let mut padded = vec![vec![neutral; m]; m];
        for (k, row) in cost.entries.iter().enumerate() {
            padded[k][..row.len()].copy_from_slice(row);
        }
        let solution = lba_solve(&padded)?;

        for k in 0..k_channels {
            let col = solution.assignment[k];
            if col < unassigned.len() {
                let user = unassigned[col];
                clusters[k].push(user);
                assigned[user] = true;
                cluster_probs[k] = cost.entries[k][col];
            }
        }

        let chi = chi_from_clusters(&clusters, n_users);
        let snapshot =
            AssignmentMatrix { chi, clusters: clusters.clone(), cluster_probs: cluster_probs.clone() };
        snapshot.verify(n_users, cap);
    }

    debug_assert!(assigned.iter().all(|&a| a), "every user must be assigned");
    let overall = cluster_probs.iter().cloned().fold(neutral, f64::min);
    let result = AssignmentMatrix {
        chi: chi_from_clusters(&clusters, n_users),
        clusters,
        cluster_probs,
    };
    Ok((result, overall))
}

fn chi_from_clusters(clusters: &[Vec<usize>], n_users: usize) -> Vec<Vec<bool>> {
    clusters
        .iter()
        .map(|members| {
            let mut row = vec![false; n_users];
            for &n in members {
                row[n] = true;
            }
            row
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

/// Brute-force global optimum over every feasible partition of users onto
/// channels (cluster size capped at `ceil(N/K)`), evaluating the same
/// metric as [`cluster_and_assign`]. Small instances only.
pub fn exhaustive_assignment_oracle(
    scenario: &ScenarioConfig,
    c: Position,
    mode: MetricMode,
) -> Result<(Vec<Vec<usize>>, f64), AssignError> {
    let n_users = scenario.n_users();
    let k_channels = scenario.budget.k_channels;
    if n_users > 12 || (k_channels as f64).powi(n_users as i32) > 2e7 {
        return Err(AssignError::TooLarge(format!(
            "{n_users} users on {k_channels} channels"
        )));
    }
    let cap = n_users.div_ceil(k_channels);
    let neutral = mode.neutral();

    // Memoize cluster metrics by (channel, member bitmask): partitions
    // share most of their clusters.
    let mut cache: HashMap<(usize, u32), f64> = HashMap::new();
    let mut metric_of = |k: usize, mask: u32| -> Result<f64, AssignError> {
        if let Some(&v) = cache.get(&(k, mask)) {
            return Ok(v);
        }
        let members: Vec<usize> = (0..n_users).filter(|&n| mask & (1 << n) != 0).collect();
        let v = cluster_metric(scenario, c, &members, k, mode)?;
        cache.insert((k, mask), v);
        Ok(v)
    };

    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut masks = vec![0u32; k_channels];
    // Depth-first over user placements.
    fn walk(
        user: usize,
        n_users: usize,
        cap: usize,
        masks: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if user == n_users {
            out.push(masks.clone());
            return;
        }
        for k in 0..masks.len() {
            if (masks[k].count_ones() as usize) < cap {
                masks[k] |= 1 << user;
                walk(user + 1, n_users, cap, masks, out);
                masks[k] &= !(1 << user);
            }
        }
    }
    let mut partitions = Vec::new();
    walk(0, n_users, cap, &mut masks, &mut partitions);

    for partition in partitions {
        let mut worst = neutral;
        for (k, &mask) in partition.iter().enumerate() {
            if mask != 0 {
                worst = worst.min(metric_of(k, mask)?);
            }
        }
        if best.as_ref().is_none_or(|(_, b)| worst > *b) {
            best = Some((partition, worst));
        }
    }

    let (partition, value) = best.expect("at least one feasible partition exists");
    let clusters = partition
        .iter()
        .map(|&mask| (0..n_users).filter(|&n| mask & (1 << n) != 0).collect())
        .collect();
    Ok((clusters, value))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
