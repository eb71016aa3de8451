//! Monte-Carlo bottleneck-detection experiments.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, axis index, trial index, lane)`. Lane 0 places the bottlenecks and
//! lane `j + 1` draws the delay of link `j`, so results do not depend on
//! evaluation order or worker count.

use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coherence::RoutingMatrix;
use crate::recovery::{default_lambda, solve, Declaration, RecoveryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("sweep axis has no values")]
    EmptyAxis,
    #[error("measurement vector has {got} entries, matrix has {expected} columns")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("worker pool: {0}")]
    Workers(String),
}

/// Delay model and experiment size. Delays are in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayScenario {
    pub alpha_normal: f64,
    pub sigma_normal: f64,
    pub x_bottleneck: f64,
    pub k: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for DelayScenario {
    fn default() -> Self {
        DelayScenario {
            alpha_normal: 15.0,
            sigma_normal: 3.0,
            x_bottleneck: 1000.0,
            k: 1,
            seed: 0,
            trials: 1000,
        }
    }
}

impl DelayScenario {
    pub fn validate(&self, links: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.alpha_normal > 0.0 && self.alpha_normal.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha_normal));
        }
        if !(self.sigma_normal >= 0.0 && self.sigma_normal.is_finite()) {
            return bad(format!(
                "sigma must be nonnegative, got {}",
                self.sigma_normal
            ));
        }
        if !(self.x_bottleneck > 0.0 && self.x_bottleneck.is_finite()) {
            return bad(format!(
                "bottleneck delay must be positive, got {}",
                self.x_bottleneck
            ));
        }
        if self.k == 0 || self.k > links {
            return bad(format!("k must be in 1..={links}, got {}", self.k));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        Ok(())
    }
}

/// Identifies one trial's random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialKey {
    pub axis: u64,
    pub trial: u64,
}

fn substream(seed: u64, key: TrialKey, lane: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&key.axis.to_le_bytes());
    bytes[16..24].copy_from_slice(&key.trial.to_le_bytes());
    bytes[24..].copy_from_slice(&lane.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Bottleneck links receive `x_bottleneck`; the rest draw from
/// `Normal(alpha, sigma²)`, redrawn until nonnegative.
pub fn draw_delays(
    links: usize,
    bottlenecks: &[usize],
    scenario: &DelayScenario,
    key: TrialKey,
) -> Result<Vec<f64>, SimError> {
    let normal = Normal::new(scenario.alpha_normal, scenario.sigma_normal)
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let mut x = vec![0.0; links];
    for (j, xj) in x.iter_mut().enumerate() {
        if bottlenecks.contains(&j) {
            *xj = scenario.x_bottleneck;
            continue;
        }
        let mut rng = substream(scenario.seed, key, j as u64 + 1);
        *xj = loop {
            let d = normal.sample(&mut rng);
            if d >= 0.0 {
                break d;
            }
        };
    }
    Ok(x)
}

/// Uniform `k`-subset of links, ascending.
pub fn place_bottlenecks(links: usize, k: usize, seed: u64, key: TrialKey) -> Vec<usize> {
    let mut rng = substream(seed, key, 0);
    let mut set = index::sample(&mut rng, links, k).into_vec();
    set.sort_unstable();
    set
}

/// Round-trip delays `y = Ax`.
pub fn measure(a: &RoutingMatrix, x: &[f64]) -> Result<Vec<f64>, SimError> {
    if x.len() != a.cols() {
        return Err(SimError::DimensionMismatch {
            expected: a.cols(),
            got: x.len(),
        });
    }
    Ok((0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .map(|(&c, &d)| f64::from(c) * d)
                .sum()
        })
        .collect())
}

/// How a trial turns an estimate into declared bottlenecks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum DeclareRule {
    /// Top-k with the true bottleneck count.
    #[default]
    TopK,
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrialOptions {
    /// Fixed regularization weight; `None` uses the default rule.
    pub lambda: Option<f64>,
    pub declare: DeclareRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub bottlenecks: Vec<usize>,
    pub declared: Vec<usize>,
    pub hits: usize,
}

pub fn run_trial(
    a: &RoutingMatrix,
    scenario: &DelayScenario,
    key: TrialKey,
    opts: &TrialOptions,
) -> Result<TrialOutcome, SimError> {
    let links = a.cols();
    scenario.validate(links)?;
    let bottlenecks = place_bottlenecks(links, scenario.k, scenario.seed, key);
    let x = draw_delays(links, &bottlenecks, scenario, key)?;
    let y = measure(a, &x)?;
    let lambda = match opts.lambda {
        Some(l) => l,
        None => default_lambda(a, &y)?,
    };
    let mode = match opts.declare {
        DeclareRule::TopK => Declaration::TopK(scenario.k),
        DeclareRule::Threshold(t) => Declaration::Threshold(t),
    };
    let declared = solve(a, &y, lambda)?.declare(mode)?.declared;
    let hits = declared.iter().filter(|j| bottlenecks.contains(j)).count();
    Ok(TrialOutcome {
        bottlenecks,
        declared,
        hits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    BottleneckDelay(Vec<f64>),
    BottleneckCount(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::BottleneckDelay(_) => "xb",
            SweepAxis::BottleneckCount(_) => "k",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::BottleneckDelay(v) => v.len(),
            SweepAxis::BottleneckCount(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, base: &DelayScenario, i: usize) -> (DelayScenario, String) {
        let mut s = *base;
        let label = match self {
            SweepAxis::BottleneckDelay(v) => {
                s.x_bottleneck = v[i];
                format!("{}", v[i])
            }
            SweepAxis::BottleneckCount(v) => {
                s.k = v[i];
                v[i].to_string()
            }
        };
        (s, label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub detection_ratio: f64,
    pub hits: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub axis: &'static str,
    pub value: String,
    pub trial: usize,
    #[serde(flatten)]
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
    pub log: Vec<TrialRecord>,
}

impl ExperimentResult {
    /// `sweep_axis,value,detection_ratio,trials,seed`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_axis,value,detection_ratio,trials,seed\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.axis, r.value, r.detection_ratio, r.trials, r.seed
            )
            .unwrap();
        }
        out
    }

    /// One JSON object per trial.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.log {
            out.push_str(&serde_json::to_string(rec).expect("plain data"));
            out.push('\n');
        }
        out
    }
}

/// Runs `base.trials` trials per axis value on `workers` threads.
pub fn sweep(
    a: &RoutingMatrix,
    base: &DelayScenario,
    axis: &SweepAxis,
    opts: &TrialOptions,
    workers: usize,
) -> Result<ExperimentResult, SimError> {
    if axis.is_empty() {
        return Err(SimError::EmptyAxis);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Workers(e.to_string()))?;

    let mut rows = Vec::with_capacity(axis.len());
    let mut log = Vec::new();
    for i in 0..axis.len() {
        let (scenario, value) = axis.point(base, i);
        scenario.validate(a.cols())?;
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..scenario.trials)
                .into_par_iter()
                .map(|t| {
                    let key = TrialKey {
                        axis: i as u64,
                        trial: t as u64,
                    };
                    run_trial(a, &scenario, key, opts)
                })
                .collect::<Result<_, _>>()
        })?;
        let hits: usize = outcomes.iter().map(|o| o.hits).sum();
        rows.push(SweepRow {
            value: value.clone(),
            detection_ratio: hits as f64 / (scenario.trials * scenario.k) as f64,
            hits,
            k: scenario.k,
            trials: scenario.trials,
            seed: scenario.seed,
        });
        log.extend(
            outcomes
                .into_iter()
                .enumerate()
                .map(|(t, outcome)| TrialRecord {
                    axis: axis.name(),
                    value: value.clone(),
                    trial: t,
                    outcome,
                }),
        );
    }
    Ok(ExperimentResult {
        axis: axis.name(),
        rows,
        log,
    })
}
