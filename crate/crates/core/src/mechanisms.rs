//! Client-side perturbation.
//!
//! Every function takes the caller's random source; the same source state
//! always yields the same report.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::{self, HadamardOrder};
use crate::params::{PrivacyParams, UnaryVariant};

/// The frequency oracles this crate can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Fhr,
    Grr,
    Oue,
    Rappor,
    Olh,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Fhr,
        Mechanism::Grr,
        Mechanism::Oue,
        Mechanism::Rappor,
        Mechanism::Olh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Fhr => "fhr",
            Mechanism::Grr => "grr",
            Mechanism::Oue => "oue",
            Mechanism::Rappor => "rappor",
            Mechanism::Olh => "olh",
        }
    }

    pub fn params(self, epsilon: f64, domain_size: u64) -> Result<PrivacyParams> {
        match self {
            Mechanism::Fhr => PrivacyParams::fhr(epsilon),
            Mechanism::Grr => PrivacyParams::grr(epsilon, domain_size),
            Mechanism::Oue => PrivacyParams::unary(epsilon, UnaryVariant::Oue),
            Mechanism::Rappor => PrivacyParams::unary(epsilon, UnaryVariant::Rappor),
            Mechanism::Olh => PrivacyParams::olh(epsilon),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mechanism {s:?}")))
    }
}

/// One FHR message: the column holding `+1` and the column holding `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FhrReport {
    index_x: u64,
    index_y: u64,
}

impl FhrReport {
    pub fn new(index_x: u64, index_y: u64, order: HadamardOrder) -> Result<Self> {
        for index in [index_x, index_y] {
            if index >= order.order() {
                return Err(Error::IndexOutOfBounds {
                    index,
                    order: order.order(),
                });
            }
        }
        if index_x == index_y {
            return Err(Error::EqualIndices(index_x));
        }
        Ok(Self { index_x, index_y })
    }

    /// Column carrying `+1`.
    pub fn index_x(&self) -> u64 {
        self.index_x
    }

    /// Column carrying `-1`.
    pub fn index_y(&self) -> u64 {
        self.index_y
    }

    /// `b · H(row)`, always one of `-2`, `0`, `2`.
    pub fn dot_row(&self, row: u64) -> i64 {
        (hadamard::sign(row, self.index_x) - hadamard::sign(row, self.index_y)) as i64
    }
}

/// Draws one FHR report for `item`.
pub fn fhr_perturb<R: Rng + ?Sized>(
    item: u32,
    params: &PrivacyParams,
    order: HadamardOrder,
    rng: &mut R,
) -> Result<FhrReport> {
    let row = hadamard::row_of_item(item, order)?;
    Ok(fhr_sample(row, order, params.p(), rng))
}

#[inline]
pub(crate) fn fhr_sample<R: Rng + ?Sized>(
    row: u64,
    order: HadamardOrder,
    keep: f64,
    rng: &mut R,
) -> FhrReport {
    let n = order.order();
    let plus = hadamard::fold_to_sign(row, rng.random_range(0..n), false);
    let minus = hadamard::fold_to_sign(row, rng.random_range(0..n), true);
    if rng.random_bool(keep) {
        FhrReport {
            index_x: plus,
            index_y: minus,
        }
    } else {
        FhrReport {
            index_x: minus,
            index_y: plus,
        }
    }
}

/// Dense form of a report: `+1` at `index_x`, `-1` at `index_y`, zeros elsewhere.
pub fn fhr_report_to_sparse(report: &FhrReport, order: HadamardOrder) -> Vec<i8> {
    let mut v = vec![0i8; order.order() as usize];
    v[report.index_x as usize] = 1;
    v[report.index_y as usize] = -1;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrrReport {
    pub value: u32,
}

pub fn grr_perturb<R: Rng + ?Sized>(
    item: u32,
    domain_size: u32,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<GrrReport> {
    if domain_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "GRR needs a domain of at least 2 items, got {domain_size}"
        )));
    }
    if item >= domain_size {
        return Err(Error::DomainOverflow {
            item: item as u64,
            domain: domain_size as u64,
        });
    }
    Ok(GrrReport {
        value: randomized_response(item, domain_size, params.p(), rng),
    })
}

/// Keeps `value` w.p. `keep`, otherwise draws uniformly from the other `size-1` values.
#[inline]
pub(crate) fn randomized_response<R: Rng + ?Sized>(
    value: u32,
    size: u32,
    keep: f64,
    rng: &mut R,
) -> u32 {
    if rng.random_bool(keep) {
        value
    } else {
        let other = rng.random_range(0..size - 1);
        if other >= value {
            other + 1
        } else {
            other
        }
    }
}

/// A perturbed one-hot vector, stored as packed bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnaryReport {
    words: Vec<u64>,
    len: usize,
}

impl UnaryReport {
    fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Positions of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + b)
            })
        })
    }
}

/// One-hot encodes `item` and flips each bit independently.
///
/// The true bit is set w.p. `p`; every other bit is set w.p. `q`.
pub fn unary_perturb<R: Rng + ?Sized>(
    item: u32,
    domain_size: u32,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<UnaryReport> {
    if domain_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "unary encoding needs a domain of at least 2 items, got {domain_size}"
        )));
    }
    if item >= domain_size {
        return Err(Error::DomainOverflow {
            item: item as u64,
            domain: domain_size as u64,
        });
    }
    let mut report = UnaryReport::zeros(domain_size as usize);
    unary_sample(item, domain_size, params, rng, |i| report.set(i as usize));
    Ok(report)
}

/// Calls `emit` with every set position of a fresh unary report, in increasing order
/// except that the true position (if set) comes first.
#[inline]
pub(crate) fn unary_sample<R: Rng + ?Sized>(
    item: u32,
    domain_size: u32,
    params: &PrivacyParams,
    rng: &mut R,
    mut emit: impl FnMut(u32),
) {
    if rng.random_bool(params.p()) {
        emit(item);
    }
    // Zero bits are visited by geometric skipping over the other D-1 positions.
    bernoulli_positions(domain_size as u64 - 1, params.q(), rng, |j| {
        let j = j as u32;
        emit(if j >= item { j + 1 } else { j });
    });
}

/// Visits each index in `0..len` independently with probability `prob`.
fn bernoulli_positions<R: Rng + ?Sized>(len: u64, prob: f64, rng: &mut R, mut f: impl FnMut(u64)) {
    if prob <= 0.0 || len == 0 {
        return;
    }
    if prob >= 1.0 {
        (0..len).for_each(f);
        return;
    }
    let log_miss = (-prob).ln_1p();
    let mut next = 0u64;
    loop {
        let u: f64 = rng.random();
        let gap = ((1.0 - u).ln() / log_miss).floor();
        if gap >= (len - next) as f64 {
            return;
        }
        next += gap as u64;
        f(next);
        next += 1;
        if next >= len {
            return;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlhReport {
    pub seed: u64,
    pub value: u32,
}

/// Keyed hash of `item` into `0..g`.
///
/// A splitmix64 finalizer over the seed and a Weyl-scrambled item, reduced by
/// multiply-high.
#[inline]
pub fn olh_bucket(seed: u64, item: u32, g: u32) -> u32 {
    let mut z = seed.wrapping_add((item as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ((z as u128 * g as u128) >> 64) as u32
}

/// Draws a fresh hash seed, buckets `item`, then runs GRR over the `g` buckets.
pub fn olh_perturb<R: Rng + ?Sized>(item: u32, params: &PrivacyParams, rng: &mut R) -> Result<OlhReport> {
    let g = params
        .hash_range()
        .ok_or_else(|| Error::InvalidParameter("OLH needs parameters built by PrivacyParams::olh".into()))?;
    Ok(olh_sample(item, g, params.p(), rng))
}

#[inline]
pub(crate) fn olh_sample<R: Rng + ?Sized>(item: u32, g: u32, keep: f64, rng: &mut R) -> OlhReport {
    let seed: u64 = rng.random();
    let bucket = olh_bucket(seed, item, g);
    OlhReport {
        seed,
        value: randomized_response(bucket, g, keep, rng),
    }
}
