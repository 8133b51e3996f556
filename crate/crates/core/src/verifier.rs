//! Exact audit of the `(ε, η)` overlap guarantee for small mechanisms.
//!
//! For every item the full output distribution is written down analytically.
//! The overlap
//!
//! ```text
//! η = min_{t≠t'} |R(t) ∩ R(t')| / max(|R(t)|, |R(t')|)
//! ```
//!
//! and the worst ratio `P(s|t)/P(s|t')` over outputs `s` in the intersection
//! then follow by exhaustive pairing. FHR outputs are keyed as
//! `plus_index * order + minus_index`; GRR outputs by value; unary outputs by
//! their bit mask.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hadamard::{self, HadamardOrder};
use crate::params::{PrivacyParams, UnaryVariant};

pub type OutputKey = u64;

/// Largest FHR order and GRR domain the auditor will enumerate.
pub const MAX_ENUMERATION: u64 = 64;
/// Unary outputs are bit masks, so the domain has a tighter cap.
pub const MAX_UNARY_DOMAIN: u64 = 16;

/// Exact output distribution of one item. Zero-probability outputs are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRange {
    probs: BTreeMap<OutputKey, f64>,
}

impl OutputRange {
    pub fn new(probs: BTreeMap<OutputKey, f64>) -> Result<Self> {
        if let Some((k, p)) = probs.iter().find(|(_, &p)| p.is_nan() || p <= 0.0 || p > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "output {k} has probability {p}"
            )));
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "output probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, key: OutputKey) -> Option<f64> {
        self.probs.get(&key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutputKey, f64)> + '_ {
        self.probs.iter().map(|(&k, &p)| (k, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// A mechanism whose per-item output distribution can be listed exactly.
pub trait Enumerable {
    fn domain_size(&self) -> u32;
    fn output_range(&self, item: u32) -> Result<OutputRange>;
}

/// FHR over every non-reserved row of a small Hadamard matrix.
#[derive(Debug, Clone, Copy)]
pub struct FhrEnumeration {
    order: HadamardOrder,
    params: PrivacyParams,
}

impl FhrEnumeration {
    pub fn new(epsilon: f64, order: HadamardOrder) -> Result<Self> {
        if order.order() > MAX_ENUMERATION {
            return Err(Error::EnumerationLimit {
                size: order.order(),
                limit: MAX_ENUMERATION,
            });
        }
        Ok(Self {
            order,
            params: PrivacyParams::fhr(epsilon)?,
        })
    }

    pub fn order(&self) -> HadamardOrder {
        self.order
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    /// Splits an output key back into `(plus_index, minus_index)`.
    pub fn decode(&self, key: OutputKey) -> (u64, u64) {
        (key / self.order.order(), key % self.order.order())
    }
}

impl Enumerable for FhrEnumeration {
    fn domain_size(&self) -> u32 {
        self.order.capacity() as u32
    }

    fn output_range(&self, item: u32) -> Result<OutputRange> {
        let row = hadamard::row_of_item(item, self.order)?;
        let n = self.order.order();
        let plus = hadamard::positions_of_sign(row, self.order, 1)?;
        let minus = hadamard::positions_of_sign(row, self.order, -1)?;
        let pair = 4.0 / (n * n) as f64;
        let mut probs = BTreeMap::new();
        for &a in &plus {
            for &b in &minus {
                probs.insert(a * n + b, self.params.p() * pair);
                probs.insert(b * n + a, (1.0 - self.params.p()) * pair);
            }
        }
        OutputRange::new(probs)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrrEnumeration {
    domain_size: u32,
    params: PrivacyParams,
}

impl GrrEnumeration {
    pub fn new(epsilon: f64, domain_size: u32) -> Result<Self> {
        if domain_size as u64 > MAX_ENUMERATION {
            return Err(Error::EnumerationLimit {
                size: domain_size as u64,
                limit: MAX_ENUMERATION,
            });
        }
        Ok(Self {
            domain_size,
            params: PrivacyParams::grr(epsilon, domain_size as u64)?,
        })
    }
}

impl Enumerable for GrrEnumeration {
    fn domain_size(&self) -> u32 {
        self.domain_size
    }

    fn output_range(&self, item: u32) -> Result<OutputRange> {
        check_item(item, self.domain_size)?;
        let probs = (0..self.domain_size)
            .map(|s| {
                let p = if s == item { self.params.p() } else { self.params.q() };
                (s as OutputKey, p)
            })
            .collect();
        OutputRange::new(probs)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UnaryEnumeration {
    domain_size: u32,
    params: PrivacyParams,
}

impl UnaryEnumeration {
    pub fn new(epsilon: f64, domain_size: u32, variant: UnaryVariant) -> Result<Self> {
        if domain_size as u64 > MAX_UNARY_DOMAIN {
            return Err(Error::EnumerationLimit {
                size: 1u64 << domain_size.min(63),
                limit: 1 << MAX_UNARY_DOMAIN,
            });
        }
        if domain_size < 2 {
            return Err(Error::InvalidParameter("unary domain must have at least 2 items".into()));
        }
        Ok(Self {
            domain_size,
            params: PrivacyParams::unary(epsilon, variant)?,
        })
    }
}

impl Enumerable for UnaryEnumeration {
    fn domain_size(&self) -> u32 {
        self.domain_size
    }

    fn output_range(&self, item: u32) -> Result<OutputRange> {
        check_item(item, self.domain_size)?;
        let (p, q) = (self.params.p(), self.params.q());
        let probs = (0..1u64 << self.domain_size)
            .map(|mask| {
                let prob = (0..self.domain_size)
                    .map(|i| {
                        let set = mask >> i & 1 == 1;
                        let on = if i == item { p } else { q };
                        if set {
                            on
                        } else {
                            1.0 - on
                        }
                    })
                    .product::<f64>();
                (mask, prob)
            })
            .collect();
        OutputRange::new(probs)
    }
}

fn check_item(item: u32, domain_size: u32) -> Result<()> {
    if item >= domain_size {
        return Err(Error::DomainOverflow {
            item: item as u64,
            domain: domain_size as u64,
        });
    }
    Ok(())
}

/// Worst-case evidence for one item pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairWitness {
    pub kind: WitnessKind,
    pub item: u32,
    pub other: u32,
    /// Output achieving the ratio; absent for overlap witnesses.
    pub output: Option<OutputKey>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Pair with the smallest overlap fraction.
    MinOverlap,
    /// Pair and output with the largest probability ratio.
    MaxRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FldpCertificate {
    pub domain_size: u32,
    pub eta_observed: f64,
    pub max_ratio_observed: f64,
    pub epsilon_effective: f64,
    /// Largest `|R(t)|` seen.
    pub range_size: usize,
    /// `|R(t) ∩ R(t')|` for the overlap witness.
    pub intersection_size: usize,
    pub pair_witnesses: Vec<PairWitness>,
}

/// Audits every ordered item pair of `mechanism`.
pub fn certify<M: Enumerable + ?Sized>(mechanism: &M) -> Result<FldpCertificate> {
    let d = mechanism.domain_size();
    if d < 2 {
        return Err(Error::InvalidParameter("need at least two items to compare".into()));
    }
    let ranges = (0..d)
        .map(|t| mechanism.output_range(t))
        .collect::<Result<Vec<_>>>()?;

    let mut eta = f64::INFINITY;
    let mut overlap_witness = (0, 0, 0);
    let mut max_ratio = 0.0f64;
    let mut ratio_witness = None;
    for t in 0..d as usize {
        for u in t + 1..d as usize {
            let (a, b) = (&ranges[t], &ranges[u]);
            let mut shared = 0usize;
            for (s, pa) in a.iter() {
                let Some(pb) = b.prob(s) else { continue };
                shared += 1;
                for (ratio, x, y) in [(pa / pb, t, u), (pb / pa, u, t)] {
                    if ratio > max_ratio {
                        max_ratio = ratio;
                        ratio_witness = Some((x as u32, y as u32, s));
                    }
                }
            }
            let frac = shared as f64 / a.len().max(b.len()) as f64;
            if frac < eta {
                eta = frac;
                overlap_witness = (t as u32, u as u32, shared);
            }
        }
    }

    let mut pair_witnesses = vec![PairWitness {
        kind: WitnessKind::MinOverlap,
        item: overlap_witness.0,
        other: overlap_witness.1,
        output: None,
        value: eta,
    }];
    if let Some((item, other, s)) = ratio_witness {
        pair_witnesses.push(PairWitness {
            kind: WitnessKind::MaxRatio,
            item,
            other,
            output: Some(s),
            value: max_ratio,
        });
    }
    // With no shared outputs anywhere there is no ratio to bound.
    let max_ratio = if ratio_witness.is_some() { max_ratio } else { f64::NAN };
    Ok(FldpCertificate {
        domain_size: d,
        eta_observed: eta,
        max_ratio_observed: max_ratio,
        epsilon_effective: max_ratio.ln(),
        range_size: ranges.iter().map(OutputRange::len).max().unwrap_or(0),
        intersection_size: overlap_witness.2,
        pair_witnesses,
    })
}

/// `P(s|t)/P(s|t')` for every output `s` both items can produce.
pub fn ratio_profile<M: Enumerable + ?Sized>(
    mechanism: &M,
    item: u32,
    other: u32,
) -> Result<Vec<(OutputKey, f64)>> {
    if item == other {
        return Err(Error::InvalidParameter(format!(
            "ratio profile needs two distinct items, got {item} twice"
        )));
    }
    let a = mechanism.output_range(item)?;
    let b = mechanism.output_range(other)?;
    Ok(a.iter()
        .filter_map(|(s, pa)| b.prob(s).map(|pb| (s, pa / pb)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Disjoint;

    impl Enumerable for Disjoint {
        fn domain_size(&self) -> u32 {
            3
        }
        fn output_range(&self, item: u32) -> Result<OutputRange> {
            OutputRange::new([(item as u64 * 2, 0.5), (item as u64 * 2 + 1, 0.5)].into())
        }
    }

    fn fhr(eps: f64, exp: u32) -> FhrEnumeration {
        FhrEnumeration::new(eps, HadamardOrder::new(exp).unwrap()).unwrap()
    }

    #[test]
    fn fhr_range_sizes() {
        let m = fhr(1.0, 3);
        for t in 0..7 {
            let r = m.output_range(t).unwrap();
            assert_eq!(r.len(), 32);
            assert!((r.total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fhr_certificate() {
        for exp in [2, 3, 4] {
            for eps in [0.4, 1.0, 2.0] {
                let c = certify(&fhr(eps, exp)).unwrap();
                let n = 1usize << exp;
                assert_eq!(c.eta_observed, 0.5);
                assert!((c.epsilon_effective - eps).abs() < 1e-9);
                assert_eq!(c.range_size, n * n / 2);
                assert_eq!(c.intersection_size, n * n / 4);
            }
        }
        let c = certify(&fhr(1.0, 3)).unwrap();
        assert!((c.max_ratio_observed - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn grr_and_unary_are_full_overlap() {
        for eps in [0.4, 1.0, 2.0] {
            let c = certify(&GrrEnumeration::new(eps, 4).unwrap()).unwrap();
            assert_eq!(c.eta_observed, 1.0);
            assert!((c.epsilon_effective - eps).abs() < 1e-9);
            let r = GrrEnumeration::new(eps, 4).unwrap().output_range(2).unwrap();
            assert_eq!(r.len(), 4);
            for variant in [UnaryVariant::Oue, UnaryVariant::Rappor] {
                let c = certify(&UnaryEnumeration::new(eps, 4, variant).unwrap()).unwrap();
                assert_eq!(c.eta_observed, 1.0);
                assert!(c.epsilon_effective <= eps + 1e-9, "{variant:?}");
            }
        }
    }

    #[test]
    fn disjoint_ranges_have_zero_overlap() {
        let c = certify(&Disjoint).unwrap();
        assert_eq!(c.eta_observed, 0.0);
        assert!(c.max_ratio_observed.is_nan());
    }

    #[test]
    fn fhr_ratio_profile_has_three_values() {
        let eps = 1.0;
        let m = fhr(eps, 3);
        let profile = ratio_profile(&m, 0, 4).unwrap();
        assert_eq!(profile.len(), 16);
        let mut seen = [false; 3];
        for &(s, ratio) in &profile {
            let (x, y) = m.decode(s);
            let unflipped_t = hadamard::sign(1, x) == 1;
            let unflipped_u = hadamard::sign(5, x) == 1;
            let want = match (unflipped_t, unflipped_u) {
                (true, true) | (false, false) => 1.0,
                (true, false) => eps.exp(),
                (false, true) => (-eps).exp(),
            };
            assert!((ratio - want).abs() < 1e-9, "({x},{y})");
            for (i, v) in [1.0, eps.exp(), (-eps).exp()].iter().enumerate() {
                seen[i] |= (ratio - v).abs() < 1e-9;
            }
        }
        assert_eq!(seen, [true; 3]);
        assert!(ratio_profile(&m, 2, 2).is_err());
    }

    #[test]
    fn enumeration_limits() {
        assert!(matches!(
            FhrEnumeration::new(1.0, HadamardOrder::new(7).unwrap()),
            Err(Error::EnumerationLimit { size: 128, .. })
        ));
        assert!(FhrEnumeration::new(1.0, HadamardOrder::new(6).unwrap()).is_ok());
        assert!(GrrEnumeration::new(1.0, 65).is_err());
        assert!(UnaryEnumeration::new(1.0, 17, UnaryVariant::Oue).is_err());
    }

    #[test]
    fn output_range_validation() {
        assert!(OutputRange::new([(0, 0.5)].into()).is_err());
        assert!(OutputRange::new([(0, 1.0), (1, 0.0)].into()).is_err());
    }

    #[test]
    fn dot_product_case_split() {
        // b·H(t) under the true item and under another item, order 8.
        let eps = 1.0;
        let m = fhr(eps, 3);
        let p = m.params().p();
        for t in 0..7u32 {
            let row_t = t as u64 + 1;
            for u in 0..7u32 {
                let mut dist = BTreeMap::<i64, f64>::new();
                for (s, prob) in m.output_range(u).unwrap().iter() {
                    let (x, y) = m.decode(s);
                    let dot = (hadamard::sign(row_t, x) - hadamard::sign(row_t, y)) as i64;
                    *dist.entry(dot).or_default() += prob;
                }
                let get = |k| dist.get(&k).copied().unwrap_or(0.0);
                if u == t {
                    assert!((get(2) - p).abs() < 1e-12);
                    assert!((get(-2) - (1.0 - p)).abs() < 1e-12);
                    assert_eq!(get(0), 0.0);
                } else {
                    assert!((get(0) - 0.5).abs() < 1e-12);
                    assert!((get(2) - 0.25).abs() < 1e-12);
                    assert!((get(-2) - 0.25).abs() < 1e-12);
                }
            }
        }
    }
}
