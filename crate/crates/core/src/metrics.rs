//! Utility metrics comparing a true frequency table with an estimate.
//!
//! All metrics work on normalized frequencies `value / total`, where `total`
//! is the number of users. Estimates may be negative; only [`kld`] clips.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-item counts (true or estimated) plus the population size they refer to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    values: Vec<f64>,
    total: f64,
}

impl FrequencyTable {
    pub fn new(values: Vec<f64>, total: f64) -> Result<Self> {
        if total.is_nan() || total <= 0.0 || total.is_infinite() {
            return Err(Error::InvalidParameter(format!("table total must be positive, got {total}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table values must be finite".into()));
        }
        Ok(Self { values, total })
    }

    /// Exact counts; the total is their sum.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total = counts.iter().sum::<u64>() as f64;
        Self::new(counts.iter().map(|&c| c as f64).collect(), total)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn frequency(&self, item: u32) -> f64 {
        self.values[item as usize] / self.total
    }

    fn check_same_domain(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::InvalidParameter(format!(
                "tables cover {} and {} items",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

/// The `k` highest-valued items, best first; ties go to the lower index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopKSelection {
    k: usize,
    items: Vec<u32>,
}

impl TopKSelection {
    pub fn of(table: &FrequencyTable, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let mut items: Vec<u32> = (0..table.len() as u32).collect();
        let by_rank = |a: &u32, b: &u32| {
            let (va, vb) = (table.values[*a as usize], table.values[*b as usize]);
            vb.partial_cmp(&va).unwrap_or(Ordering::Equal).then(a.cmp(b))
        };
        if k < items.len() {
            items.select_nth_unstable_by(k - 1, by_rank);
            items.truncate(k);
        }
        items.sort_unstable_by(by_rank);
        Ok(Self { k, items })
    }

    /// Requested `k`; the selection holds `min(k, D)` items.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn contains(&self, item: u32) -> bool {
        self.items.contains(&item)
    }

    /// Same `k`, keeping only the items `keep` accepts, in rank order.
    pub fn filtered(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            k: self.k,
            items: self.items.iter().copied().filter(|&i| keep(i)).collect(),
        }
    }

    /// Items with rank score `len - rank` (best item scores `len`).
    fn scored(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        let len = self.items.len();
        self.items.iter().enumerate().map(move |(rank, &item)| (item, len - rank))
    }
}

/// `½(KL(P‖Q) + KL(Q‖P))` in nats for two normalized distributions.
///
/// Terms with `p_i = 0` vanish; a positive mass facing a zero makes the
/// divergence infinite.
pub fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(&x, _)| x > 0.0)
            .map(|(&x, &y)| x * (x / y).ln())
            .sum()
    };
    0.5 * (kl(p, q) + kl(q, p))
}

/// Clips negatives, adds `1/(10n)` per candidate, renormalizes over the candidates.
fn smoothed(table: &FrequencyTable, candidates: &[u32], delta: f64) -> Result<Vec<f64>> {
    let raw: Vec<f64> = candidates
        .iter()
        .map(|&c| (table.frequency(c)).max(0.0) + delta)
        .collect();
    let mass: f64 = raw.iter().sum();
    if mass.is_nan() || mass <= 0.0 || raw.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::Metric("candidate with zero mass after smoothing".into()));
    }
    Ok(raw.into_iter().map(|v| v / mass).collect())
}

/// Symmetric KL divergence between the two tables restricted to `candidates`.
pub fn kld(real: &FrequencyTable, est: &FrequencyTable, candidates: &TopKSelection) -> Result<f64> {
    real.check_same_domain(est)?;
    let delta = 1.0 / (10.0 * real.total());
    let p = smoothed(real, candidates.items(), delta)?;
    let q = smoothed(est, candidates.items(), delta)?;
    Ok(symmetric_kl(&p, &q))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median over candidates of `|p - p*| / p`.
pub fn related_error(real: &FrequencyTable, est: &FrequencyTable, candidates: &TopKSelection) -> Result<f64> {
    real.check_same_domain(est)?;
    if candidates.items().is_empty() {
        return Err(Error::Metric("no candidates".into()));
    }
    let mut errors = candidates
        .items()
        .iter()
        .map(|&c| {
            let p = real.frequency(c);
            if p <= 0.0 {
                return Err(Error::Metric(format!("candidate {c} has zero true frequency")));
            }
            Ok((p - est.frequency(c)).abs() / p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&mut errors))
}

/// Mean squared frequency error over the intersection of the true and
/// estimated top-`k` sets. [`Error::NoOverlap`] when they share nothing.
pub fn squared_error(real: &FrequencyTable, est: &FrequencyTable, k: usize) -> Result<f64> {
    real.check_same_domain(est)?;
    let real_top = TopKSelection::of(real, k)?;
    let est_top = TopKSelection::of(est, k)?;
    let shared: Vec<u32> = real_top
        .items()
        .iter()
        .copied()
        .filter(|&c| est_top.contains(c))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoOverlap);
    }
    let sum: f64 = shared
        .iter()
        .map(|&c| (real.frequency(c) - est.frequency(c)).powi(2))
        .sum();
    Ok(sum / shared.len() as f64)
}

/// Normalized cumulative rank: every estimated item that appears in the true
/// top-`k` earns that item's true score (`k` for rank 1 down to 1 for rank
/// `k`); the total is divided by `k(k+1)/2`.
pub fn ncr(real_top: &TopKSelection, est_top: &TopKSelection) -> Result<f64> {
    if real_top.k() != est_top.k() || real_top.items().len() != est_top.items().len() {
        return Err(Error::InvalidParameter(format!(
            "top-k selections disagree on k ({} vs {})",
            real_top.k(),
            est_top.k()
        )));
    }
    let len = real_top.items().len();
    if len == 0 {
        return Err(Error::Metric("empty top-k selection".into()));
    }
    let score: usize = real_top
        .scored()
        .filter(|&(item, _)| est_top.contains(item))
        .map(|(_, s)| s)
        .sum();
    Ok(score as f64 / (len * (len + 1) / 2) as f64)
}
