//! The evaluation sweep: mechanisms × ε × trials, scored at several `k`.
//!
//! `results.csv` columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `mechanism` | `fhr`, `grr`, `oue`, `rappor` or `olh` |
//! | `epsilon` | privacy budget |
//! | `k` | top-k size the metrics were computed at |
//! | `trial` | trial index, or `mean` for the per-cell average |
//! | `kld` | symmetric KL divergence over the true top-k |
//! | `re` | median relative error over the true top-k (items with nonzero count) |
//! | `se` | mean squared frequency error over the top-k intersection; `NaN` if empty |
//! | `ncr` | normalized cumulative rank |
//! | `wall_time_ms` | perturb + aggregate + estimate time; `0` with timing disabled |
//! | `report_bits` | bits one user sends |
//!
//! Mean rows skip `NaN` trials.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::data::{DatasetSpec, ItemStream};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mechanisms::Mechanism;
use crate::metrics::{self, FrequencyTable, TopKSelection};
use crate::simulation::{self, Replicate};
use crate::wire::{self, ReportSizes};

pub const RESULTS_HEADER: [&str; 10] = [
    "mechanism",
    "epsilon",
    "k",
    "trial",
    "kld",
    "re",
    "se",
    "ncr",
    "wall_time_ms",
    "report_bits",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub topk: Vec<usize>,
    pub trials: u32,
    pub seed: u64,
    /// Record wall-clock time per cell. Off makes `results.csv` byte-reproducible.
    pub record_timing: bool,
}

/// `0.4, 0.6, …, 2.0`.
pub fn default_epsilons() -> Vec<f64> {
    (0..9).map(|i| (4 + 2 * i) as f64 / 10.0).collect()
}

pub const DEFAULT_TOPK: [usize; 3] = [20, 50, 100];
pub const DEFAULT_TRIALS: u32 = 10;
pub const DEFAULT_MECHANISMS: [Mechanism; 3] = [Mechanism::Fhr, Mechanism::Oue, Mechanism::Olh];

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidParameter("no mechanisms selected".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::InvalidParameter("no epsilon values given".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| e.is_nan() || **e <= 0.0 || e.is_infinite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {e}")));
        }
        if self.topk.is_empty() || self.topk.contains(&0) {
            return Err(Error::InvalidParameter("top-k list must be non-empty and positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Index(u32),
    Mean,
}

impl std::fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrialLabel::Index(i) => write!(f, "{i}"),
            TrialLabel::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub k: usize,
    pub trial: TrialLabel,
    pub kld: f64,
    pub re: f64,
    pub se: f64,
    pub ncr: f64,
    pub wall_time_ms: f64,
    pub report_bits: u64,
}

impl ResultRow {
    fn record(&self) -> [String; 10] {
        [
            self.mechanism.to_string(),
            self.epsilon.to_string(),
            self.k.to_string(),
            self.trial.to_string(),
            self.kld.to_string(),
            self.re.to_string(),
            self.se.to_string(),
            self.ncr.to_string(),
            self.wall_time_ms.to_string(),
            self.report_bits.to_string(),
        ]
    }
}

/// Every resolved parameter of a run, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub spec: ExperimentSpec,
    pub n: usize,
    pub domain_size: u32,
    pub report_sizes: ReportSizes,
    pub columns: [&'static str; 10],
    pub conventions: Conventions,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub ncr_scoring: &'static str,
    pub kld: &'static str,
    pub re_candidates: &'static str,
    pub topk_tie_break: &'static str,
    pub trial_aggregate: &'static str,
    pub user_randomness: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    ncr_scoring: "membership: an estimated top-k item earns its true-rank score",
    kld: "symmetric KL in nats over the true top-k; negatives clipped, 1/(10n) added per candidate, renormalized",
    re_candidates: "true top-k items with nonzero count",
    topk_tie_break: "ascending item index",
    trial_aggregate: "arithmetic mean, NaN trials skipped",
    user_randomness: "ChaCha8 keyed by (seed, trial, user index)",
};

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

pub fn report_bits(sizes: &ReportSizes, mechanism: Mechanism) -> u64 {
    match mechanism {
        Mechanism::Fhr => sizes.fhr as u64,
        Mechanism::Grr => sizes.grr as u64,
        Mechanism::Oue | Mechanism::Rappor => sizes.unary,
        Mechanism::Olh => sizes.olh as u64,
    }
}

/// Metrics of one estimate against the truth at one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub kld: f64,
    pub re: f64,
    pub se: f64,
    pub ncr: f64,
}

pub fn score(real: &FrequencyTable, est: &FrequencyTable, k: usize) -> Result<CellMetrics> {
    let real_top = TopKSelection::of(real, k)?;
    let est_top = TopKSelection::of(est, k)?;
    let kld = metrics::kld(real, est, &real_top)?;
    let present = real_top.filtered(|i| real.values()[i as usize] > 0.0);
    let re = if present.items().is_empty() {
        f64::NAN
    } else {
        metrics::related_error(real, est, &present)?
    };
    let se = match metrics::squared_error(real, est, k) {
        Ok(v) => v,
        Err(Error::NoOverlap) => f64::NAN,
        Err(e) => return Err(e),
    };
    let ncr = metrics::ncr(&real_top, &est_top)?;
    Ok(CellMetrics { kld, re, se, ncr })
}

fn nan_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentOutput> {
    spec.validate()?;
    let stream = spec.dataset.load()?;
    run_on_stream(spec, &stream, exec)
}

/// Runs the sweep over an already materialized stream.
pub fn run_on_stream(spec: &ExperimentSpec, stream: &ItemStream, exec: Execution) -> Result<ExperimentOutput> {
    let d = stream.domain_size();
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "dataset has {d} distinct value(s); at least 2 are needed"
        )));
    }
    let real = FrequencyTable::from_counts(stream.counts())?;
    let n = stream.len() as f64;
    let mut rows = Vec::new();
    for &mechanism in &spec.mechanisms {
        for &epsilon in &spec.epsilons {
            let bits = report_bits(&wire::report_size_table(d as u64, epsilon)?, mechanism);
            // per_k[k_index][trial]
            let mut per_k: Vec<Vec<(CellMetrics, f64)>> = vec![Vec::new(); spec.topk.len()];
            for trial in 0..spec.trials {
                let rep = Replicate {
                    seed: spec.seed,
                    trial: trial as u64,
                };
                let start = Instant::now();
                let est = simulation::estimate_all(mechanism, stream.items(), d, epsilon, rep, exec)?;
                let elapsed = if spec.record_timing {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                let est = FrequencyTable::new(est.values, n)?;
                for (slot, &k) in per_k.iter_mut().zip(&spec.topk) {
                    slot.push((score(&real, &est, k)?, elapsed));
                }
            }
            for (cells, &k) in per_k.iter().zip(&spec.topk) {
                let row = |trial, m: CellMetrics, wall_time_ms| ResultRow {
                    mechanism,
                    epsilon,
                    k,
                    trial,
                    kld: m.kld,
                    re: m.re,
                    se: m.se,
                    ncr: m.ncr,
                    wall_time_ms,
                    report_bits: bits,
                };
                for (t, &(m, ms)) in cells.iter().enumerate() {
                    rows.push(row(TrialLabel::Index(t as u32), m, ms));
                }
                let mean = CellMetrics {
                    kld: nan_mean(cells.iter().map(|c| c.0.kld)),
                    re: nan_mean(cells.iter().map(|c| c.0.re)),
                    se: nan_mean(cells.iter().map(|c| c.0.se)),
                    ncr: nan_mean(cells.iter().map(|c| c.0.ncr)),
                };
                rows.push(row(TrialLabel::Mean, mean, nan_mean(cells.iter().map(|c| c.1))));
            }
        }
    }
    let max_eps = spec.epsilons.iter().copied().fold(f64::MIN, f64::max);
    Ok(ExperimentOutput {
        rows,
        manifest: Manifest {
            version: env!("CARGO_PKG_VERSION"),
            spec: spec.clone(),
            n: stream.len(),
            domain_size: d,
            report_sizes: wire::report_size_table(d as u64, max_eps)?,
            columns: RESULTS_HEADER,
            conventions: CONVENTIONS,
        },
    })
}

pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `manifest.json` into `dir`, creating it if needed.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(fs::File::create(dir.join("results.csv"))?, &output.rows)?;
    let mut manifest = serde_json::to_string_pretty(&output.manifest)?;
    manifest.push('\n');
    fs::write(dir.join("manifest.json"), manifest)?;
    Ok(())
}
