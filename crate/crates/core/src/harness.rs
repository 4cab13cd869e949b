//! Experiment configuration, parallel trial execution and result files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{self, Algorithm, TrialConfig, TrialRecord};
use crate::error::{Error, Result};
use crate::hardness::{self, HardnessSolution};
use crate::model::{self, DatasetFormat, Instance, InstanceFile, SyntheticKind};
use crate::thresholds::ThresholdKind;

/// Header of the summary CSV.
pub const SUMMARY_HEADER: [&str; 8] = [
    "algorithm",
    "delta",
    "trials",
    "mean_tau",
    "std_tau",
    "errors",
    "nonterminated",
    "lower_bound",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum InstanceSource {
    Inline(InstanceFile),
    File {
        path: PathBuf,
    },
    Dataset {
        path: PathBuf,
        d: usize,
        #[serde(default)]
        label_column: Option<usize>,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        target_dstar: Option<f64>,
    },
    Synthetic {
        kind: SyntheticKind,
    },
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<Algorithm>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub threshold: ThresholdKind,
    pub base_seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub parallelism: Option<usize>,
    /// Warm-start K-means and the minimax solver; on iff `M > 200` when absent.
    #[serde(default)]
    pub warm_start: Option<bool>,
    pub max_steps: u64,
    pub output: OutputPaths,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|source| Error::Json {
            context: "experiment config".into(),
            source,
        })
    }

    /// Reads a config; relative paths inside it are taken relative to its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn trials_path(&self) -> PathBuf {
        self.resolve(&self.output.trials)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.resolve(&self.output.summary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms listed".into()));
        }
        if self.deltas.is_empty() {
            return Err(Error::Config("no deltas listed".into()));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(Error::Config(format!("delta {d} outside (0,1)")));
        }
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::Config("algorithm listed twice".into()));
        }
        Ok(())
    }

    /// Builds the instance the experiment runs on.
    pub fn load_instance(&self) -> Result<Instance> {
        match &self.instance {
            InstanceSource::Inline(file) => file.clone().into_instance(),
            InstanceSource::File { path } => Instance::read_json(self.resolve(path)),
            InstanceSource::Synthetic { kind } => Ok(model::synthetic_instance(*kind)),
            InstanceSource::Dataset {
                path,
                d,
                label_column,
                delimiter,
                has_header,
                target_dstar,
            } => {
                if !delimiter.is_ascii() {
                    return Err(Error::Config(format!(
                        "delimiter {delimiter:?} is not ASCII"
                    )));
                }
                let format = DatasetFormat {
                    d: *d,
                    label_column: *label_column,
                    delimiter: *delimiter as u8,
                    has_header: *has_header,
                };
                let raw = model::load_dataset(self.resolve(path), &format)?;
                match target_dstar {
                    Some(target) => Ok(model::rescale_to_hardness(&raw, *target)?.0),
                    None => Ok(raw),
                }
            }
        }
    }

    /// Seed of trial `index` in the cell (`algorithm`, `deltas[delta_index]`).
    pub fn seed_for(&self, algorithm: Algorithm, delta_index: usize, index: usize) -> u64 {
        let cell = algorithm.code() * self.deltas.len() as u64 + delta_index as u64;
        self.base_seed
            .wrapping_add(cell.wrapping_mul(self.trials as u64))
            .wrapping_add(index as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub trials: usize,
    /// Mean of τ over terminated trials.
    pub mean_tau: f64,
    /// Sample standard deviation (divisor n−1) of τ over terminated trials.
    pub std_tau: f64,
    /// Terminated trials whose recommendation was wrong.
    pub errors: usize,
    pub nonterminated: usize,
    pub lower_bound: f64,
    /// Every terminated trial in the cell was wrong.
    pub all_errors: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub instance: Instance,
    pub hardness: HardnessSolution,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every (algorithm, δ) cell of the config. Records come back in cell
/// order, then by trial index, whatever the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let instance = config.load_instance()?;
    if config.max_steps <= instance.num_arms() as u64 {
        return Err(Error::Config(format!(
            "max_steps must exceed M={}",
            instance.num_arms()
        )));
    }
    let solution = hardness::solve_dstar(&instance)?;
    log::info!(
        "instance M={} K={} d={} D*={:.6}",
        instance.num_arms(),
        instance.num_clusters(),
        instance.dim(),
        solution.d_star
    );

    let jobs: Vec<(Algorithm, f64, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&alg| {
            config
                .deltas
                .iter()
                .enumerate()
                .flat_map(move |(di, &delta)| {
                    (0..config.trials).map(move |i| (alg, delta, config.seed_for(alg, di, i)))
                })
        })
        .collect();

    let run = |&(alg, delta, seed): &(Algorithm, f64, u64)| {
        let mut cfg = TrialConfig::new(alg, delta, seed)
            .threshold(config.threshold)
            .max_steps(config.max_steps);
        cfg.warm_start = config.warm_start;
        agent::run_trial(&instance, cfg, Some(&solution.lambda_star))
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let records = pool.install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?;

    let summary = summarize(&records, solution.d_star)?;
    Ok(ExperimentOutput {
        instance,
        hardness: solution,
        records,
        summary,
    })
}

/// Per-cell statistics, sorted by algorithm and then by decreasing δ.
pub fn summarize(records: &[TrialRecord], d_star: f64) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Domain("no trial records to summarize".into()));
    }
    let mut cells: BTreeMap<(Algorithm, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        // larger δ sorts first
        cells
            .entry((r.algorithm, u64::MAX - r.delta.to_bits()))
            .or_default()
            .push(r);
    }
    cells
        .into_iter()
        .map(|((algorithm, _), cell)| {
            let delta = cell[0].delta;
            let mut taus: Vec<u64> = cell
                .iter()
                .filter(|r| r.terminated)
                .map(|r| r.tau)
                .collect();
            taus.sort_unstable();
            let n = taus.len();
            let (mean_tau, std_tau) = mean_std(&taus);
            let errors = cell.iter().filter(|r| r.terminated && !r.correct).count();
            Ok(SummaryRow {
                algorithm,
                delta,
                trials: cell.len(),
                mean_tau,
                std_tau,
                errors,
                nonterminated: cell.len() - n,
                lower_bound: hardness::lower_bound(delta, d_star)?,
                all_errors: n > 0 && errors == n,
            })
        })
        .collect()
}

fn mean_std(sorted: &[u64]) -> (f64, f64) {
    let n = sorted.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sorted.iter().map(|&t| t as u128).sum::<u128>() as f64 / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = sorted.iter().map(|&t| (t as f64 - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Writes one JSON object per trial and the summary CSV, creating parent
/// directories as needed.
pub fn emit(
    records: &[TrialRecord],
    summary: &[SummaryRow],
    trials_path: &Path,
    summary_path: &Path,
) -> Result<()> {
    for p in [trials_path, summary_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = File::create(trials_path).map_err(|e| Error::io(trials_path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| Error::Json {
            context: "trial record".into(),
            source,
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io(trials_path, e))?;
    }
    out.flush().map_err(|e| Error::io(trials_path, e))?;

    let csv_err = |e: csv::Error| Error::Dataset {
        path: summary_path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(summary_path).map_err(csv_err)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for row in summary {
        w.write_record([
            row.algorithm.to_string(),
            row.delta.to_string(),
            row.trials.to_string(),
            row.mean_tau.to_string(),
            row.std_tau.to_string(),
            row.errors.to_string(),
            row.nonterminated.to_string(),
            row.lower_bound.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(summary_path, e))?;
    Ok(())
}

/// Reads back a trial file written by [`emit`].
pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                context: path.display().to_string(),
                source,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        alg: Algorithm,
        delta: f64,
        tau: u64,
        correct: bool,
        terminated: bool,
    ) -> TrialRecord {
        TrialRecord {
            algorithm: alg,
            delta,
            seed: tau,
            tau,
            correct,
            terminated,
            wall_ms: 0.0,
            recommended: None,
        }
    }

    #[test]
    fn sample_std_convention() {
        let recs = [
            record(Algorithm::Boc, 0.1, 10, true, true),
            record(Algorithm::Boc, 0.1, 12, true, true),
        ];
        let rows = summarize(&recs, 2.0).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_tau, 11.0);
        assert!((rows[0].std_tau - 2f64.sqrt()).abs() < 1e-15);

        let one = summarize(&recs[..1], 2.0).unwrap();
        assert_eq!(one[0].std_tau, 0.0);
        assert!(summarize(&[], 2.0).is_err());
    }

    #[test]
    fn lower_bound_column_and_flags() {
        let recs = [
            record(Algorithm::Uniform, 0.5, 10, false, true),
            record(Algorithm::Uniform, 0.5, 11, false, true),
            record(Algorithm::Boc, 0.1, 11, true, true),
            record(Algorithm::Boc, 0.1, 50, false, false),
        ];
        let rows = summarize(&recs, 3.0).unwrap();
        assert_eq!(rows[0].algorithm, Algorithm::Boc);
        assert_eq!(rows[0].nonterminated, 1);
        assert_eq!(rows[0].errors, 0);
        assert_eq!(rows[0].mean_tau, 11.0);
        assert!(!rows[0].all_errors);
        assert_eq!(rows[1].lower_bound, 0.0);
        assert!(rows[1].all_errors);
        assert_eq!(rows[1].errors, 2);
    }

    #[test]
    fn seeds_ignore_algorithm_order() {
        let text = r#"{
            "instance": {"source": "synthetic", "kind": "easy"},
            "algorithms": ["uniform", "boc"],
            "deltas": [0.1, 0.01],
            "trials": 4,
            "threshold": "heuristic",
            "base_seed": 100,
            "max_steps": 100000,
            "output": {"trials": "t.jsonl", "summary": "s.csv"}
        }"#;
        let a = ExperimentConfig::from_json_str(text).unwrap();
        let mut b = a.clone();
        b.algorithms.reverse();
        b.algorithms.push(Algorithm::Oracle);
        for alg in [Algorithm::Boc, Algorithm::Uniform] {
            for di in 0..2 {
                for i in 0..4 {
                    assert_eq!(a.seed_for(alg, di, i), b.seed_for(alg, di, i));
                }
            }
        }
        let mut all: Vec<u64> = Algorithm::ALL
            .iter()
            .flat_map(|&alg| (0..2).flat_map(move |di| (0..4).map(move |i| (alg, di, i))))
            .map(|(alg, di, i)| a.seed_for(alg, di, i))
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn config_validation() {
        let base = r#"{
            "instance": {"source": "inline", "d": 1, "K": 2, "labels": [1, 1, 2], "centers": [[0.0], [1.0]]},
            "algorithms": ["boc"],
            "deltas": [0.1],
            "trials": 1,
            "threshold": "exact",
            "base_seed": 0,
            "max_steps": 1000,
            "output": {"trials": "t.jsonl", "summary": "s.csv"}
        }"#;
        let cfg = ExperimentConfig::from_json_str(base).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.load_instance().unwrap().num_arms(), 3);
        assert_eq!(cfg.threshold, ThresholdKind::Exact);

        let mut bad = cfg.clone();
        bad.trials = 0;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.deltas = vec![1.5];
        assert!(bad.validate().is_err());
        assert!(ExperimentConfig::from_json_str(&base.replace("\"boc\"", "\"glr\"")).is_err());
        assert!(ExperimentConfig::from_json_str(&base.replace("\"trials\": 1,", "")).is_err());
    }
}
