//! Server-side accumulation and unbiased frequency estimation.
//!
//! Estimates are returned raw: they can be negative and need not sum to `n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hadamard::{self, HadamardOrder};
use crate::mechanisms::{olh_bucket, FhrReport, OlhReport};
use crate::params::PrivacyParams;

/// Elementwise sum of FHR report vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SumVector {
    sums: Vec<i64>,
    n: u64,
}

impl SumVector {
    pub fn new(order: HadamardOrder) -> Self {
        Self {
            sums: vec![0; order.order() as usize],
            n: 0,
        }
    }

    pub fn sums(&self) -> &[i64] {
        &self.sums
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn order(&self) -> u64 {
        self.sums.len() as u64
    }

    pub fn add(&mut self, report: &FhrReport) -> Result<()> {
        let order = self.order();
        for index in [report.index_x(), report.index_y()] {
            if index >= order {
                return Err(Error::CorruptReport(format!(
                    "index {index} out of range for order {order}"
                )));
            }
        }
        self.add_unchecked(report);
        Ok(())
    }

    #[inline]
    pub(crate) fn add_unchecked(&mut self, report: &FhrReport) {
        self.sums[report.index_x() as usize] += 1;
        self.sums[report.index_y() as usize] -= 1;
        self.n += 1;
    }

    /// Adds `other` into `self`. Both must share an order.
    pub fn merge(&mut self, other: &SumVector) -> Result<()> {
        if self.sums.len() != other.sums.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot merge sum vectors of order {} and {}",
                self.order(),
                other.order()
            )));
        }
        self.sums.iter_mut().zip(&other.sums).for_each(|(a, b)| *a += b);
        self.n += other.n;
        Ok(())
    }

    /// `ẑ · H(row)`, before the correction factor.
    pub fn dot_row(&self, row: u64) -> i64 {
        self.sums
            .iter()
            .enumerate()
            .map(|(col, &s)| if hadamard::is_negative(row, col as u64) { -s } else { s })
            .sum()
    }
}

pub fn fhr_accumulate<'a>(
    reports: impl IntoIterator<Item = &'a FhrReport>,
    order: HadamardOrder,
) -> Result<SumVector> {
    let mut acc = SumVector::new(order);
    for report in reports {
        acc.add(report)?;
    }
    Ok(acc)
}

/// Chunked accumulation of a report slice; equals [`fhr_accumulate`] exactly.
pub fn fhr_accumulate_chunked(
    reports: &[FhrReport],
    order: HadamardOrder,
    exec: Execution,
) -> Result<SumVector> {
    if let Some(bad) = reports
        .iter()
        .find(|r| r.index_x() >= order.order() || r.index_y() >= order.order())
    {
        return Err(Error::CorruptReport(format!("{bad:?} out of range for order {}", order.order())));
    }
    Ok(exec.fold(
        reports.len(),
        || SumVector::new(order),
        |acc, i| acc.add_unchecked(&reports[i]),
        |mut a, b| {
            a.sums.iter_mut().zip(&b.sums).for_each(|(x, y)| *x += y);
            a.n += b.n;
            a
        },
    ))
}

/// Estimated count of `item`: `correction · (ẑ · H(item))`.
pub fn fhr_estimate(sum: &SumVector, item: u32, params: &PrivacyParams) -> Result<f64> {
    let order = HadamardOrder::from_order(sum.order())?;
    let row = hadamard::row_of_item(item, order)?;
    Ok(params.correction() * sum.dot_row(row) as f64)
}

/// Estimates for items `0..domain_size` by direct dot products.
pub fn fhr_estimate_all(
    sum: &SumVector,
    domain_size: u32,
    params: &PrivacyParams,
    exec: Execution,
) -> Result<FrequencyEstimate> {
    let order = HadamardOrder::from_order(sum.order())?;
    if domain_size as u64 > order.capacity() {
        return Err(Error::DomainOverflow {
            item: domain_size as u64 - 1,
            domain: order.capacity(),
        });
    }
    let c = params.correction();
    let values = exec.map(domain_size as usize, |item| c * sum.dot_row(item as u64 + 1) as f64);
    Ok(FrequencyEstimate { values, n: sum.n })
}

/// Per-item estimated counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub values: Vec<f64>,
    pub n: u64,
}

fn check_gap(params: &PrivacyParams) -> Result<f64> {
    let gap = params.p() - params.q();
    if gap.is_nan() || gap <= 0.0 {
        return Err(Error::DegenerateParams {
            p: params.p(),
            q: params.q(),
        });
    }
    Ok(gap)
}

/// `(c - n·q)/(p - q)` per item, from GRR value counts.
pub fn grr_estimate(counts: &[u64], params: &PrivacyParams, n: u64) -> Result<FrequencyEstimate> {
    let total: u64 = counts.iter().sum();
    if total != n {
        return Err(Error::InvalidParameter(format!(
            "counts sum to {total}, expected {n}"
        )));
    }
    invert(counts, params, n)
}

/// `(c_i - n·q)/(p - q)` per bit position, from unary bit counts.
pub fn unary_estimate(bit_counts: &[u64], params: &PrivacyParams, n: u64) -> Result<FrequencyEstimate> {
    if let Some(&c) = bit_counts.iter().find(|&&c| c > n) {
        return Err(Error::InvalidParameter(format!("bit count {c} exceeds n = {n}")));
    }
    invert(bit_counts, params, n)
}

fn invert(counts: &[u64], params: &PrivacyParams, n: u64) -> Result<FrequencyEstimate> {
    let gap = check_gap(params)?;
    let base = n as f64 * params.q();
    Ok(FrequencyEstimate {
        values: counts.iter().map(|&c| (c as f64 - base) / gap).collect(),
        n,
    })
}

/// Number of reports whose seed hashes `item` onto the reported bucket.
pub fn olh_support_count(reports: &[OlhReport], item: u32, g: u32) -> u64 {
    reports
        .iter()
        .filter(|r| olh_bucket(r.seed, item, g) == r.value)
        .count() as u64
}

/// `(C(t) - n/g)/(p - 1/g)`.
pub fn olh_estimate(reports: &[OlhReport], item: u32, params: &PrivacyParams) -> Result<f64> {
    let g = olh_range(params)?;
    let gap = check_gap(params)?;
    let n = reports.len() as f64;
    Ok((olh_support_count(reports, item, g) as f64 - n * params.q()) / gap)
}

/// Full OLH table; costs `n · domain_size` hash evaluations.
pub fn olh_estimate_all(
    reports: &[OlhReport],
    domain_size: u32,
    params: &PrivacyParams,
    exec: Execution,
) -> Result<FrequencyEstimate> {
    let g = olh_range(params)?;
    let gap = check_gap(params)?;
    let base = reports.len() as f64 * params.q();
    let values = exec.map(domain_size as usize, |item| {
        (olh_support_count(reports, item as u32, g) as f64 - base) / gap
    });
    Ok(FrequencyEstimate {
        values,
        n: reports.len() as u64,
    })
}

fn olh_range(params: &PrivacyParams) -> Result<u32> {
    match params.hash_range() {
        Some(g) if g >= 2 => Ok(g),
        _ => Err(Error::InvalidParameter("OLH estimation needs g >= 2".into())),
    }
}

/// `(e^ε+1)²/(2(e^ε-1)²) · n`: the FHR variance of an item nobody holds.
///
/// For an item held by `n_t > 0` users the exact variance adds
/// `(v - 1)·n_t` (see [`fhr_variance_exact`]), which is positive below
/// `ε = ln(3 + 2√2)`; there this figure is not an upper bound.
pub fn fhr_variance_bound(epsilon: f64, n: u64) -> f64 {
    fhr_user_variance(epsilon) * n as f64
}

/// Exact FHR variance for an item held by `n_t` of `n` users.
pub fn fhr_variance_exact(epsilon: f64, n: u64, n_t: u64) -> f64 {
    let v = fhr_user_variance(epsilon);
    v * n as f64 + (v - 1.0) * n_t as f64
}

/// Variance contribution of one user whose row differs from the target.
fn fhr_user_variance(epsilon: f64) -> f64 {
    let t = (-epsilon).exp();
    let ratio = (1.0 + t) / (1.0 - t);
    ratio * ratio / 2.0
}

/// OUE / OLH variance `4e^ε/(e^ε-1)² · n`.
pub fn oue_variance(epsilon: f64, n: u64) -> f64 {
    let t = (-epsilon).exp();
    4.0 * t / ((1.0 - t) * (1.0 - t)) * n as f64
}

/// ε at which the FHR bound meets the OUE variance: `ln(3 + 2√2)`.
pub fn variance_crossover() -> f64 {
    (3.0 + 2.0 * std::f64::consts::SQRT_2).ln()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mechanisms::{fhr_perturb, olh_perturb};

    const LN3: f64 = 1.0986122886681098;

    fn o(exp: u32) -> HadamardOrder {
        HadamardOrder::new(exp).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        let order = o(2);
        let a = FhrReport::new(0, 1, order).unwrap();
        let b = FhrReport::new(1, 0, order).unwrap();
        let s = fhr_accumulate([a, b].iter(), order).unwrap();
        assert_eq!((s.sums(), s.n()), (&[0, 0, 0, 0][..], 2));

        let c = FhrReport::new(2, 3, order).unwrap();
        let s = fhr_accumulate([c].iter(), order).unwrap();
        assert_eq!((s.sums(), s.n()), (&[0, 0, 1, -1][..], 1));
    }

    #[test]
    fn accumulate_rejects_foreign_order() {
        let big = FhrReport::new(6, 1, o(3)).unwrap();
        assert!(matches!(
            fhr_accumulate([big].iter(), o(2)),
            Err(Error::CorruptReport(_))
        ));
        assert!(fhr_accumulate_chunked(&[big], o(2), Execution::Sequential).is_err());
        let mut s = SumVector::new(o(2));
        assert!(s.merge(&SumVector::new(o(3))).is_err());
    }

    fn reports_strategy() -> impl Strategy<Value = Vec<(u64, u64)>> {
        prop::collection::vec((0u64..16, 1u64..16), 0..300)
            .prop_map(|v| v.into_iter().map(|(x, d)| (x, (x + d) % 16)).collect())
    }

    proptest! {
        #[test]
        fn merge_is_commutative_and_matches_sequential(
            a in reports_strategy(),
            b in reports_strategy(),
        ) {
            let order = o(4);
            let to_reports = |v: &[(u64, u64)]| -> Vec<FhrReport> {
                v.iter().map(|&(x, y)| FhrReport::new(x, y, order).unwrap()).collect()
            };
            let (ra, rb) = (to_reports(&a), to_reports(&b));
            let sa = fhr_accumulate(ra.iter(), order).unwrap();
            let sb = fhr_accumulate(rb.iter(), order).unwrap();
            let mut ab = sa.clone();
            ab.merge(&sb).unwrap();
            let mut ba = sb.clone();
            ba.merge(&sa).unwrap();
            prop_assert_eq!(&ab, &ba);
            let all: Vec<FhrReport> = ra.iter().chain(&rb).copied().collect();
            prop_assert_eq!(&ab, &fhr_accumulate(all.iter(), order).unwrap());
            prop_assert_eq!(&ab, &fhr_accumulate_chunked(&all, order, Execution::Parallel).unwrap());
            prop_assert_eq!(ab.sums().iter().sum::<i64>(), 0);
            prop_assert!(ab.sums().iter().all(|s| s.unsigned_abs() <= ab.n()));
        }
    }

    #[test]
    fn chunked_accumulation_is_bit_identical() {
        let order = o(8);
        let params = PrivacyParams::fhr(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reports: Vec<FhrReport> = (0..20_000)
            .map(|i| fhr_perturb(i % 200, &params, order, &mut rng).unwrap())
            .collect();
        let seq = fhr_accumulate(reports.iter(), order).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            assert_eq!(fhr_accumulate_chunked(&reports, order, exec).unwrap(), seq);
        }
    }

    #[test]
    fn noiseless_limit() {
        let order = o(5);
        let params = PrivacyParams::fhr(f64::INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reports: Vec<FhrReport> = (0..500)
            .map(|_| fhr_perturb(6, &params, order, &mut rng).unwrap())
            .collect();
        let sum = fhr_accumulate(reports.iter(), order).unwrap();
        // Every report dots to +2 with its own row, times correction 1/2.
        assert_eq!(fhr_estimate(&sum, 6, &params).unwrap(), 500.0);
        let all = fhr_estimate_all(&sum, 31, &params, Execution::Sequential).unwrap();
        assert_eq!(all.values[6], 500.0);
        assert!(fhr_estimate(&sum, 31, &params).is_err());
    }

    #[test]
    fn correction_at_ln3() {
        assert!((PrivacyParams::fhr(LN3).unwrap().correction() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fhr_single_item_population_is_unbiased() {
        // n = 10^5 users all holding one item, eps = 1, 50 trials.
        let order = o(4);
        let params = PrivacyParams::fhr(1.0).unwrap();
        let n = 100_000u64;
        let trials = 50;
        let estimates: Vec<f64> = (0..trials)
            .map(|t| {
                let sum = Execution::default().fold(
                    n as usize,
                    || SumVector::new(order),
                    |acc, u| {
                        let mut rng = crate::exec::user_rng(99, t, u as u64);
                        acc.add_unchecked(&fhr_perturb(3, &params, order, &mut rng).unwrap());
                    },
                    |mut a, b| {
                        a.merge(&b).unwrap();
                        a
                    },
                );
                fhr_estimate(&sum, 3, &params).unwrap()
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let exact = fhr_variance_exact(1.0, n, n);
        assert!((mean - n as f64).abs() <= 3.0 * (exact / trials as f64).sqrt());
        // Sample variance of 50 draws; a factor-of-two window is ~5 sigma.
        assert!(var > exact / 2.0 && var < exact * 2.0, "var {var} exact {exact}");
    }

    #[test]
    fn grr_inversion() {
        let d = 4u64;
        let params = PrivacyParams::grr(LN3, d).unwrap();
        let n = 6000u64;
        // f = (0.4, 0.3, 0.2, 0.1): expected counts are n(f p + (1-f) q).
        let f = [0.4, 0.3, 0.2, 0.1];
        let p = params.p();
        let q = params.q();
        let expected: Vec<f64> = f.iter().map(|&fi| n as f64 * (fi * p + (1.0 - fi) * q)).collect();
        // p = 1/2, q = 1/6 at ln 3, D = 4: choose f so counts are integral.
        let counts: Vec<u64> = expected.iter().map(|c| c.round() as u64).collect();
        assert!(expected.iter().zip(&counts).all(|(e, &c)| (e - c as f64).abs() < 1e-9));
        let est = grr_estimate(&counts, &params, n).unwrap();
        for (e, fi) in est.values.iter().zip(f) {
            assert!((e - fi * n as f64).abs() < 1e-9);
        }
        let zero = grr_estimate(&[0, 3600, 2400, 0], &params, n).unwrap();
        assert!((zero.values[0] + n as f64 * q / (p - q)).abs() < 1e-9);
        assert!(grr_estimate(&[1, 2], &params, 4).is_err());
    }

    #[test]
    fn unary_inversion_points() {
        let params = PrivacyParams::unary(LN3, crate::params::UnaryVariant::Oue).unwrap();
        let n = 1000;
        // q = 1/4, p = 1/2.
        let est = unary_estimate(&[250, 500], &params, n).unwrap();
        assert!(est.values[0].abs() < 1e-9);
        assert!((est.values[1] - 1000.0).abs() < 1e-9);
        assert!(unary_estimate(&[1001], &params, n).is_err());
    }

    #[test]
    fn olh_inversion_points() {
        let params = PrivacyParams::olh(1.0).unwrap();
        let g = params.hash_range().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let reports: Vec<OlhReport> = (0..2000)
            .map(|_| olh_perturb(5, &params, &mut rng).unwrap())
            .collect();
        let n = reports.len() as f64;
        let est = olh_estimate(&reports, 5, &params).unwrap();
        let c = olh_support_count(&reports, 5, g) as f64;
        let direct = (c - n / g as f64) / (params.p() - 1.0 / g as f64);
        assert!((est - direct).abs() < 1e-9);
        // C(t) = n p maps to n.
        let gap = params.p() - params.q();
        assert!(((n * params.p() - n * params.q()) / gap - n).abs() < 1e-9);
        // No supporting reports.
        assert!((-(n / g as f64) / gap) < 0.0);
        let all = olh_estimate_all(&reports, 10, &params, Execution::Parallel).unwrap();
        assert!((all.values[5] - est).abs() < 1e-9);
        assert!(olh_estimate(&reports, 5, &PrivacyParams::fhr(1.0).unwrap()).is_err());
    }

    #[test]
    fn variance_closed_forms() {
        assert!((fhr_variance_bound(LN3, 1000) - 2000.0).abs() < 1e-9);
        assert!((variance_crossover() - 1.7627).abs() < 5e-4);
        let at = variance_crossover();
        assert!((fhr_variance_bound(at, 1) - oue_variance(at, 1)).abs() < 1e-9);
        assert_eq!(fhr_variance_exact(1.0, 100, 0), fhr_variance_bound(1.0, 100));
        assert!(fhr_variance_exact(1.0, 100, 50) > fhr_variance_bound(1.0, 100));
        assert!(fhr_variance_exact(2.0, 100, 50) <= fhr_variance_bound(2.0, 100));
    }
}
