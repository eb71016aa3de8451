//! Routing-matrix construction from a candidate pool.
//!
//! [`build_proposed`] adds one path at a time by minimum cost until the
//! mutual coherence drops below one. [`build_greedy`] and
//! [`build_greedy_fp`] search subsets exhaustively for the smallest
//! `(interval, traffic)` pair and serve as baselines.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::coherence::{
    coherence_below_one, f_mu, parallel_pair_count, sparsity_bound, RoutingMatrix,
};
use crate::paths::{CandidateSet, MeasurementPath, PathKind};
use crate::topology::Topology;

/// Largest pool the exhaustive baselines accept by default.
pub const DEFAULT_GREEDY_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("pool of {size} candidates exceeds the exhaustive-search limit of {limit}")]
    PoolTooLarge { size: usize, limit: usize },
    #[error("no subset of the pool yields mutual coherence below 1")]
    NoFeasibleSubset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Proposed,
    Greedy,
    GreedyFp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Success,
    Exhausted,
}

/// Selection cost of a candidate. Lower is better; `INFINITE` marks a
/// candidate that cannot make progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost(pub f64);

impl Cost {
    pub const INFINITE: Cost = Cost(f64::INFINITY);

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub algorithm: Algorithm,
    pub matrix: RoutingMatrix,
    /// Candidate indices in selection order, one per matrix row.
    pub selected: Vec<usize>,
    pub cost_evaluations: u64,
    pub terminated: Termination,
    /// Size of the pool the selection was drawn from.
    pub pool_size: usize,
}

/// Cost of adding `path` to the paths already in `matrix`.
///
/// While some link is uncovered (`F_μ > 1`) the cost is the reciprocal of
/// the number of links `path` covers that no selected path does. Once every
/// link is covered it is the number of exactly parallel column pairs in the
/// extended matrix.
pub fn path_cost(path: &MeasurementPath, matrix: &RoutingMatrix) -> Cost {
    if f_mu(matrix) > 1.0 {
        let fresh = path
            .link_counts()
            .filter(|&(j, _)| matrix.is_zero_column(j))
            .count();
        if fresh == 0 {
            Cost::INFINITE
        } else {
            Cost(1.0 / fresh as f64)
        }
    } else {
        let mut extended = matrix.clone();
        extended.push_row(path.counts());
        if extended.first_zero_column().is_some() {
            return Cost::INFINITE;
        }
        Cost(parallel_pair_count(&extended) as f64)
    }
}

/// One-by-one cost-driven selection. Ties go to the path with fewer hops,
/// then to the earlier candidate.
pub fn build_proposed(candidates: &CandidateSet) -> Result<BuildReport, BuildError> {
    let links = pool_links(candidates)?;
    let mut matrix = RoutingMatrix::empty(links);
    let mut used = vec![false; candidates.len()];
    let mut selected = Vec::new();
    let mut cost_evaluations = 0u64;
    let mut terminated = Termination::Success;

    while f_mu(&matrix) >= 1.0 {
        let mut best: Option<(Cost, usize, usize)> = None;
        for (i, path) in candidates.paths().iter().enumerate() {
            if used[i] {
                continue;
            }
            cost_evaluations += 1;
            let key = (path_cost(path, &matrix), path.hops(), i);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        match best {
            Some((cost, _, i)) if cost.is_finite() => {
                used[i] = true;
                selected.push(i);
                matrix.push_row(candidates.get(i).counts());
            }
            _ => {
                terminated = Termination::Exhausted;
                break;
            }
        }
    }

    Ok(BuildReport {
        algorithm: Algorithm::Proposed,
        matrix,
        selected,
        cost_evaluations,
        terminated,
        pool_size: candidates.len(),
    })
}

/// Exhaustive subset search over `candidates` minimizing the interval
/// factor, then the traffic factor. Ties go to the lexicographically first
/// index set.
pub fn build_greedy(candidates: &CandidateSet, limit: usize) -> Result<BuildReport, BuildError> {
    greedy(candidates, limit, Algorithm::Greedy)
}

/// [`build_greedy`] over the candidates extended with extra folded paths.
pub fn build_greedy_fp(
    candidates: &CandidateSet,
    fps: &CandidateSet,
    limit: usize,
) -> Result<BuildReport, BuildError> {
    greedy(&candidates.union(fps), limit, Algorithm::GreedyFp)
}

fn greedy(
    candidates: &CandidateSet,
    limit: usize,
    algorithm: Algorithm,
) -> Result<BuildReport, BuildError> {
    let links = pool_links(candidates)?;
    let n = candidates.len();
    if n > limit {
        return Err(BuildError::PoolTooLarge { size: n, limit });
    }
    let traffic: Vec<u64> = candidates
        .paths()
        .iter()
        .map(|p| p.counts().iter().map(|&c| u64::from(c)).sum())
        .collect();

    let mut evaluations = 0u64;
    for size in 1..=n {
        let mut best: Option<(u64, Vec<usize>)> = None;
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            evaluations += 1;
            let t: u64 = combo.iter().map(|&i| traffic[i]).sum();
            if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                let m = RoutingMatrix::from_paths(combo.iter().map(|&i| candidates.get(i)), links);
                if coherence_below_one(&m) || (links == 1 && m.first_zero_column().is_none()) {
                    best = Some((t, combo.clone()));
                }
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
        if let Some((_, selected)) = best {
            let matrix =
                RoutingMatrix::from_paths(selected.iter().map(|&i| candidates.get(i)), links);
            return Ok(BuildReport {
                algorithm,
                matrix,
                selected,
                cost_evaluations: evaluations,
                terminated: Termination::Success,
                pool_size: n,
            });
        }
    }
    Err(BuildError::NoFeasibleSubset)
}

/// Advances `combo` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
        return false;
    };
    combo[i] += 1;
    for x in i + 1..k {
        combo[x] = combo[x - 1] + 1;
    }
    true
}

fn pool_links(candidates: &CandidateSet) -> Result<usize, BuildError> {
    candidates
        .paths()
        .first()
        .map(|p| p.counts().len())
        .ok_or(BuildError::EmptyPool)
}

/// `(interval factor, traffic factor)`.
pub fn matrix_factors(a: &RoutingMatrix) -> (usize, u64) {
    (a.interval_factor(), a.traffic_factor())
}

#[derive(Debug, Serialize)]
pub struct SelectedPath {
    pub candidate: usize,
    pub kind: PathKind,
    pub walk: String,
    pub hops: usize,
}

/// JSON form of a [`BuildReport`].
#[derive(Debug, Serialize)]
pub struct BuildReportJson {
    pub algorithm: Algorithm,
    pub terminated: Termination,
    pub candidates: usize,
    pub selected: Vec<SelectedPath>,
    pub interval_factor: usize,
    pub links: usize,
    pub traffic_factor: u64,
    pub mu: f64,
    pub k_max: usize,
    pub cost_evaluations: u64,
}

impl BuildReport {
    pub fn to_json(&self, top: &Topology, candidates: &CandidateSet) -> BuildReportJson {
        let mu = f_mu(&self.matrix);
        BuildReportJson {
            algorithm: self.algorithm,
            terminated: self.terminated,
            candidates: self.pool_size,
            selected: self
                .selected
                .iter()
                .map(|&i| {
                    let p = candidates.get(i);
                    SelectedPath {
                        candidate: i,
                        kind: p.kind(),
                        walk: p.describe(top),
                        hops: p.hops(),
                    }
                })
                .collect(),
            interval_factor: self.matrix.interval_factor(),
            links: self.matrix.cols(),
            traffic_factor: self.matrix.traffic_factor(),
            mu,
            k_max: sparsity_bound(mu, self.matrix.cols()),
            cost_evaluations: self.cost_evaluations,
        }
    }
}
