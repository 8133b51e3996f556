//! Whole-population runs: every user perturbs with their own keyed random
//! source, the aggregator merges, and estimates come out for the full domain.

use crate::aggregator::{self, FrequencyEstimate, SumVector};
use crate::error::{Error, Result};
use crate::exec::{user_rng, Execution};
use crate::hadamard::HadamardOrder;
use crate::mechanisms::{self, FhrReport, Mechanism, OlhReport};
use crate::params::PrivacyParams;

/// Identifies one Monte-Carlo replicate; user `i` draws from `user_rng(seed, trial, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replicate {
    pub seed: u64,
    pub trial: u64,
}

fn check_items(items: &[u32], domain_size: u32) -> Result<()> {
    if domain_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "domain size must be at least 2, got {domain_size}"
        )));
    }
    match items.iter().find(|&&i| i >= domain_size) {
        Some(&item) => Err(Error::DomainOverflow {
            item: item as u64,
            domain: domain_size as u64,
        }),
        None => Ok(()),
    }
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

pub fn fhr_sum_vector(
    items: &[u32],
    domain_size: u32,
    params: &PrivacyParams,
    rep: Replicate,
    exec: Execution,
) -> Result<SumVector> {
    check_items(items, domain_size)?;
    let order = HadamardOrder::for_domain(domain_size as u64)?;
    let keep = params.p();
    Ok(exec.fold(
        items.len(),
        || SumVector::new(order),
        |acc, u| {
            let mut rng = user_rng(rep.seed, rep.trial, u as u64);
            let report = mechanisms::fhr_sample(items[u] as u64 + 1, order, keep, &mut rng);
            acc.add_unchecked(&report);
        },
        |mut a, b| {
            a.merge(&b).expect("chunks share an order");
            a
        },
    ))
}

/// The individual FHR reports behind [`fhr_sum_vector`] for the same replicate.
pub fn fhr_reports(
    items: &[u32],
    domain_size: u32,
    params: &PrivacyParams,
    rep: Replicate,
    exec: Execution,
) -> Result<Vec<FhrReport>> {
    check_items(items, domain_size)?;
    let order = HadamardOrder::for_domain(domain_size as u64)?;
    let keep = params.p();
    Ok(exec.map(items.len(), |u| {
        let mut rng = user_rng(rep.seed, rep.trial, u as u64);
        mechanisms::fhr_sample(items[u] as u64 + 1, order, keep, &mut rng)
    }))
}

/// Histogram of GRR outputs.
pub fn grr_counts(
    items: &[u32],
    domain_size: u32,
    params: &PrivacyParams,
    rep: Replicate,
    exec: Execution,
) -> Result<Vec<u64>> {
    check_items(items, domain_size)?;
    let keep = params.p();
    Ok(exec.fold(
        items.len(),
        || vec![0u64; domain_size as usize],
        |acc, u| {
            let mut rng = user_rng(rep.seed, rep.trial, u as u64);
            acc[mechanisms::randomized_response(items[u], domain_size, keep, &mut rng) as usize] += 1;
        },
        add_counts,
    ))
}

/// Per-position counts of set bits over all unary reports.
pub fn unary_counts(
    items: &[u32],
    domain_size: u32,
    params: &PrivacyParams,
    rep: Replicate,
    exec: Execution,
) -> Result<Vec<u64>> {
    check_items(items, domain_size)?;
    Ok(exec.fold(
        items.len(),
        || vec![0u64; domain_size as usize],
        |acc, u| {
            let mut rng = user_rng(rep.seed, rep.trial, u as u64);
            mechanisms::unary_sample(items[u], domain_size, params, &mut rng, |i| acc[i as usize] += 1);
        },
        add_counts,
    ))
}

pub fn olh_reports(
    items: &[u32],
    domain_size: u32,
    params: &PrivacyParams,
    rep: Replicate,
    exec: Execution,
) -> Result<Vec<OlhReport>> {
    check_items(items, domain_size)?;
    let g = params
        .hash_range()
        .ok_or_else(|| Error::InvalidParameter("OLH needs parameters built by PrivacyParams::olh".into()))?;
    let keep = params.p();
    Ok(exec.map(items.len(), |u| {
        let mut rng = user_rng(rep.seed, rep.trial, u as u64);
        mechanisms::olh_sample(items[u], g, keep, &mut rng)
    }))
}

/// Runs `mechanism` over the population and estimates every item in `0..domain_size`.
pub fn estimate_all(
    mechanism: Mechanism,
    items: &[u32],
    domain_size: u32,
    epsilon: f64,
    rep: Replicate,
    exec: Execution,
) -> Result<FrequencyEstimate> {
    let params = mechanism.params(epsilon, domain_size as u64)?;
    let n = items.len() as u64;
    match mechanism {
        Mechanism::Fhr => {
            let sum = fhr_sum_vector(items, domain_size, &params, rep, exec)?;
            aggregator::fhr_estimate_all(&sum, domain_size, &params, exec)
        }
        Mechanism::Grr => {
            let counts = grr_counts(items, domain_size, &params, rep, exec)?;
            aggregator::grr_estimate(&counts, &params, n)
        }
        Mechanism::Oue | Mechanism::Rappor => {
            let counts = unary_counts(items, domain_size, &params, rep, exec)?;
            aggregator::unary_estimate(&counts, &params, n)
        }
        Mechanism::Olh => {
            let reports = olh_reports(items, domain_size, &params, rep, exec)?;
            aggregator::olh_estimate_all(&reports, domain_size, &params, exec)
        }
    }
}
