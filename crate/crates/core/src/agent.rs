//! The sampling and stopping loop: a Gaussian environment, the BOC, Uniform
//! and Oracle sampling rules, and the stopping statistic.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusteringResult};
use crate::error::{Error, Result};
use crate::hardness::{self, SimplexWeights, DEGENERATE_GAP};
use crate::model::{self, sq_dist, Instance, Partition};
use crate::thresholds::{StoppingRule, ThresholdKind};

/// `M` above which warm starting is on unless configured otherwise.
pub const WARM_START_ARMS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Boc,
    Uniform,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Boc, Algorithm::Uniform, Algorithm::Oracle];

    /// Stable small integer used to derive per-cell seeds.
    pub fn code(self) -> u64 {
        match self {
            Algorithm::Boc => 0,
            Algorithm::Uniform => 1,
            Algorithm::Oracle => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Boc => "boc",
            Algorithm::Uniform => "uniform",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boc" => Ok(Algorithm::Boc),
            "uniform" => Ok(Algorithm::Uniform),
            "oracle" => Ok(Algorithm::Oracle),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Gaussian arms with identity covariance around the true cluster centers.
#[derive(Clone, Debug)]
pub struct Environment {
    truth: Instance,
    rng: ChaCha8Rng,
    noiseless: bool,
}

impl Environment {
    pub fn new(truth: Instance, seed: u64) -> Self {
        Self {
            truth,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noiseless: false,
        }
    }

    /// Every pull returns the exact arm mean.
    pub fn noiseless(truth: Instance) -> Self {
        Self {
            truth,
            rng: ChaCha8Rng::seed_from_u64(0),
            noiseless: true,
        }
    }

    pub fn truth(&self) -> &Instance {
        &self.truth
    }

    pub fn pull(&mut self, arm: usize) -> Result<Vec<f64>> {
        if arm >= self.truth.num_arms() {
            return Err(Error::Domain(format!(
                "arm {} out of range 1..={}",
                arm + 1,
                self.truth.num_arms()
            )));
        }
        let mean = self.truth.arm_mean(arm);
        if self.noiseless {
            return Ok(mean.to_vec());
        }
        Ok(mean
            .iter()
            .map(|&mu| {
                let eta: f64 = StandardNormal.sample(&mut self.rng);
                mu + eta
            })
            .collect())
    }
}

/// Pull counts and running means, optionally with the raw observations.
#[derive(Clone, Debug)]
pub struct ArmStats {
    counts: Vec<u64>,
    means: Vec<Vec<f64>>,
    history: Option<Vec<Vec<Vec<f64>>>>,
}

impl ArmStats {
    pub fn new(m: usize, d: usize) -> Self {
        Self {
            counts: vec![0; m],
            means: vec![vec![0.0; d]; m],
            history: None,
        }
    }

    pub fn with_history(m: usize, d: usize) -> Self {
        Self {
            history: Some(vec![Vec::new(); m]),
            ..Self::new(m, d)
        }
    }

    pub fn update(&mut self, arm: usize, x: &[f64]) {
        self.counts[arm] += 1;
        let n = self.counts[arm] as f64;
        for (mu, &v) in self.means[arm].iter_mut().zip(x) {
            *mu += (v - *mu) / n;
        }
        if let Some(h) = &mut self.history {
            h[arm].push(x.to_vec());
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Arithmetic mean of the stored observations of `arm`, if history is kept.
    pub fn history_mean(&self, arm: usize) -> Option<Vec<f64>> {
        let obs = &self.history.as_ref()?[arm];
        let d = self.means[arm].len();
        let mut acc = vec![0.0; d];
        for x in obs {
            acc.iter_mut().zip(x).for_each(|(a, v)| *a += v);
        }
        let n = obs.len().max(1) as f64;
        Some(acc.into_iter().map(|a| a / n).collect())
    }
}

/// Everything a sampling rule may read or carry between steps.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub stats: ArmStats,
    /// The latest clustering of the empirical means.
    pub estimate: Option<ClusteringResult>,
    /// The latest sampling target.
    pub lambda: Option<SimplexWeights>,
    /// Cluster weights from the last minimax solve.
    pub warm_w: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoppingStatistic {
    pub z1: f64,
    pub z2: f64,
    pub z: f64,
    pub threshold: f64,
    pub fired: bool,
}

/// `½((√z2 − √z1)₊)²`
pub fn glr_gap(z1: f64, z2: f64) -> f64 {
    let r = (z2.sqrt() - z1.sqrt()).max(0.0);
    0.5 * r * r
}

/// The arm forced by `min_m N_m ≤ max(√t − M/2, 0)`, lowest index first.
pub fn forced_arm(counts: &[u64], t: u64) -> Option<usize> {
    let m = counts.len() as f64;
    let floor = ((t as f64).sqrt() - m / 2.0).max(0.0);
    let (arm, &n) = counts.iter().enumerate().min_by_key(|(i, n)| (**n, *i))?;
    (n as f64 <= floor).then_some(arm)
}

/// `argmax_m (t·λ_m − N_m)`, lowest index first.
pub fn tracking_arm(lambda: &[f64], counts: &[u64], t: u64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (m, (&l, &n)) in lambda.iter().zip(counts).enumerate() {
        let score = t as f64 * l - n as f64;
        if score > best.1 {
            best = (m, score);
        }
    }
    best.0
}

/// Round-robin arm at time `t` (0-based).
pub fn select_arm_uniform(t: u64, m: usize) -> usize {
    (t % m as u64) as usize
}

/// The optimal proportions for the estimated instance, or uniform when the
/// estimate is degenerate or the solver fails. Also returns the cluster
/// weights to warm-start the next solve.
pub fn estimate_lambda(
    estimate: &ClusteringResult,
    warm_w: Option<&[f64]>,
) -> (SimplexWeights, Option<Vec<f64>>) {
    let m = estimate.partition.num_arms();
    let solved = Instance::new(estimate.partition.clone(), estimate.centers.clone())
        .and_then(|inst| hardness::solve_dstar_from(&inst, warm_w));
    match solved {
        Ok(sol) => {
            let w = sol.w_star.values().to_vec();
            (sol.lambda_star, Some(w))
        }
        Err(e) => {
            log::debug!("falling back to uniform sampling target: {e}");
            (SimplexWeights::uniform(m), None)
        }
    }
}

/// Stopping statistic from post-update statistics and the estimate made
/// before the latest pull.
pub fn compute_stopping(
    estimate: &ClusteringResult,
    stats: &ArmStats,
    rule: &StoppingRule,
    t: u64,
) -> Result<StoppingStatistic> {
    let counts = stats.counts();
    let z1: f64 = stats
        .means()
        .iter()
        .zip(counts)
        .zip(estimate.partition.labels())
        .map(|((mu, &n), &l)| n as f64 * sq_dist(mu, &estimate.centers[l]))
        .sum();
    let z2 = if model::min_pairwise_distance(&estimate.centers) < DEGENERATE_GAP {
        0.0
    } else {
        let weights: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
        hardness::alt_inf_closed_form(&estimate.partition, &estimate.centers, &weights)?
    };
    let z = glr_gap(z1, z2);
    let threshold = rule.threshold(counts, t)?;
    Ok(StoppingStatistic {
        z1,
        z2,
        z,
        threshold,
        fired: z >= threshold,
    })
}

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub threshold: ThresholdKind,
    pub seed: u64,
    pub max_steps: u64,
    /// `None` picks warm starting iff `M > 200`.
    pub warm_start: Option<bool>,
    pub kmeans_max_iters: usize,
    pub keep_history: bool,
}

impl TrialConfig {
    pub fn new(algorithm: Algorithm, delta: f64, seed: u64) -> Self {
        Self {
            algorithm,
            delta,
            threshold: ThresholdKind::Heuristic,
            seed,
            max_steps: 10_000_000,
            warm_start: None,
            kmeans_max_iters: clustering::DEFAULT_MAX_ITERS,
            keep_history: false,
        }
    }

    pub fn threshold(mut self, kind: ThresholdKind) -> Self {
        self.threshold = kind;
        self
    }

    pub fn max_steps(mut self, n: u64) -> Self {
        self.max_steps = n;
        self
    }

    pub fn warm_start(mut self, on: bool) -> Self {
        self.warm_start = Some(on);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub seed: u64,
    pub tau: u64,
    pub correct: bool,
    pub terminated: bool,
    pub wall_ms: f64,
    #[serde(skip)]
    pub recommended: Option<Partition>,
}

/// One run of a sampling rule against one environment.
pub struct Trial {
    config: TrialConfig,
    env: Environment,
    state: AgentState,
    rule: StoppingRule,
    oracle: Option<SimplexWeights>,
    warm: bool,
    t: u64,
    last: Option<StoppingStatistic>,
}

impl Trial {
    /// Sets up the trial and pulls every arm once.
    pub fn new(
        truth: &Instance,
        config: TrialConfig,
        oracle: Option<&SimplexWeights>,
    ) -> Result<Self> {
        model::ensure_admissible(truth)?;
        let m = truth.num_arms();
        if config.max_steps <= m as u64 {
            return Err(Error::Config(format!(
                "max_steps must exceed M={m}, got {}",
                config.max_steps
            )));
        }
        let rule = StoppingRule::new(config.threshold, config.delta, m, truth.dim())?;
        let oracle = match (config.algorithm, oracle) {
            (Algorithm::Oracle, Some(l)) => {
                if l.len() != m {
                    return Err(Error::LengthMismatch {
                        expected: m,
                        got: l.len(),
                    });
                }
                Some(l.clone())
            }
            (Algorithm::Oracle, None) => Some(hardness::solve_dstar(truth)?.lambda_star),
            _ => None,
        };
        let stats = if config.keep_history {
            ArmStats::with_history(m, truth.dim())
        } else {
            ArmStats::new(m, truth.dim())
        };
        let warm = config.warm_start.unwrap_or(m > WARM_START_ARMS);
        let mut trial = Self {
            env: Environment::new(truth.clone(), config.seed),
            config,
            state: AgentState {
                stats,
                estimate: None,
                lambda: None,
                warm_w: None,
            },
            rule,
            oracle,
            warm,
            t: 0,
            last: None,
        };
        for arm in 0..m {
            let x = trial.env.pull(arm)?;
            trial.state.stats.update(arm, &x);
        }
        trial.t = m as u64;
        Ok(trial)
    }

    /// As [`Trial::new`] with a noiseless environment.
    pub fn noiseless(truth: &Instance, config: TrialConfig) -> Result<Self> {
        let mut trial = Self::new(truth, config, None)?;
        trial.env = Environment::noiseless(truth.clone());
        let m = truth.num_arms();
        trial.state.stats = ArmStats::new(m, truth.dim());
        for arm in 0..m {
            let x = trial.env.pull(arm)?;
            trial.state.stats.update(arm, &x);
        }
        Ok(trial)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn last_statistic(&self) -> Option<&StoppingStatistic> {
        self.last.as_ref()
    }

    fn refresh_estimate(&mut self) -> Result<()> {
        let weights: Vec<f64> = self
            .state
            .stats
            .counts()
            .iter()
            .map(|&n| n as f64)
            .collect();
        let warm_partition = if self.warm {
            self.state.estimate.as_ref().map(|e| &e.partition)
        } else {
            None
        };
        let k = self.env.truth().num_clusters();
        let est = clustering::weighted_kmeans(
            self.state.stats.means(),
            &weights,
            k,
            warm_partition,
            self.config.kmeans_max_iters,
        )?;
        self.state.estimate = Some(est);
        Ok(())
    }

    fn select(&mut self) -> Result<usize> {
        let t = self.t;
        let m = self.state.stats.counts().len();
        if self.config.algorithm == Algorithm::Uniform {
            self.refresh_estimate()?;
            return Ok(select_arm_uniform(t, m));
        }
        if let Some(arm) = forced_arm(self.state.stats.counts(), t) {
            return Ok(arm);
        }
        self.refresh_estimate()?;
        let lambda = match self.config.algorithm {
            Algorithm::Oracle => self
                .oracle
                .clone()
                .expect("oracle proportions set at construction"),
            _ => {
                let est = self
                    .state
                    .estimate
                    .as_ref()
                    .expect("estimate just refreshed");
                let warm_w = if self.warm {
                    self.state.warm_w.as_deref()
                } else {
                    None
                };
                let (lambda, w) = estimate_lambda(est, warm_w);
                self.state.warm_w = w;
                lambda
            }
        };
        let arm = tracking_arm(lambda.values(), self.state.stats.counts(), t);
        self.state.lambda = Some(lambda);
        Ok(arm)
    }

    /// Chooses an arm, observes it and evaluates the stopping rule. Returns
    /// `None` when no estimate exists yet, in which case no check is made.
    pub fn step(&mut self) -> Result<Option<StoppingStatistic>> {
        let arm = self.select()?;
        let x = self.env.pull(arm)?;
        self.state.stats.update(arm, &x);
        self.t += 1;
        let Some(est) = &self.state.estimate else {
            self.last = None;
            return Ok(None);
        };
        let stat = compute_stopping(est, &self.state.stats, &self.rule, self.t)?;
        self.last = Some(stat);
        Ok(Some(stat))
    }

    /// Steps until the stopping rule fires or `max_steps` is reached.
    pub fn run(mut self) -> Result<TrialRecord> {
        let started = Instant::now();
        let mut terminated = false;
        while self.t < self.config.max_steps {
            if self.step()?.is_some_and(|s| s.fired) {
                terminated = true;
                break;
            }
        }
        let recommended = self.state.estimate.as_ref().map(|e| e.partition.clone());
        let correct = match &recommended {
            Some(p) => model::partitions_equivalent(p, self.env.truth().partition())?,
            None => false,
        };
        Ok(TrialRecord {
            algorithm: self.config.algorithm,
            delta: self.config.delta,
            seed: self.config.seed,
            tau: self.t,
            correct,
            terminated,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            recommended,
        })
    }
}

/// Runs one trial to completion.
pub fn run_trial(
    truth: &Instance,
    config: TrialConfig,
    oracle: Option<&SimplexWeights>,
) -> Result<TrialRecord> {
    Trial::new(truth, config, oracle)?.run()
}
