//! Privacy parameters for each mechanism, derived from ε.
//!
//! Probabilities are computed from `e^{-ε}` so that `ε = ∞` yields the
//! noiseless limit instead of `∞/∞`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Which unary-encoding flavour to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryVariant {
    /// Symmetric flipping with budget ε/2 per bit.
    Rappor,
    /// Keep the one-bit w.p. 1/2, raise zero-bits w.p. `1/(e^ε+1)`.
    Oue,
}

/// ε together with the constants a mechanism derives from it.
///
/// `p` is the probability of reporting truthfully (the true item for GRR, a
/// set bit at the true position for unary encoding, an unflipped pair for
/// FHR, the true bucket for OLH). `q` is the probability that a report
/// supports an item the user does not hold; for OLH that is `1/g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyParams {
    epsilon: f64,
    p: f64,
    q: f64,
    hash_range: Option<u32>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon == 0.0 {
        return Err(Error::DegenerateParams { p: 0.5, q: 0.5 });
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// `e^ε/(e^ε+k)` evaluated without overflow.
fn keep_probability(epsilon: f64, others: f64) -> f64 {
    1.0 / (1.0 + others * (-epsilon).exp())
}

impl PrivacyParams {
    /// FHR: keep the sampled pair with `p = e^ε/(e^ε+1)`.
    pub fn fhr(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let p = keep_probability(epsilon, 1.0);
        Ok(Self {
            epsilon,
            p,
            q: 1.0 - p,
            hash_range: None,
        })
    }

    /// Generalized randomized response over `domain_size` items.
    pub fn grr(epsilon: f64, domain_size: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if domain_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "GRR needs a domain of at least 2 items, got {domain_size}"
            )));
        }
        let others = (domain_size - 1) as f64;
        let p = keep_probability(epsilon, others);
        let q = (-epsilon).exp() / (1.0 + others * (-epsilon).exp());
        Ok(Self {
            epsilon,
            p,
            q,
            hash_range: None,
        })
    }

    pub fn unary(epsilon: f64, variant: UnaryVariant) -> Result<Self> {
        check_epsilon(epsilon)?;
        let (p, q) = match variant {
            UnaryVariant::Rappor => {
                let p = keep_probability(epsilon / 2.0, 1.0);
                (p, 1.0 - p)
            }
            UnaryVariant::Oue => (0.5, 1.0 - keep_probability(epsilon, 1.0)),
        };
        Ok(Self {
            epsilon,
            p,
            q,
            hash_range: None,
        })
    }

    /// Optimized local hashing with `g = ⌈ε+1⌉` buckets.
    pub fn olh(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !epsilon.is_finite() || epsilon > 1e6 {
            return Err(Error::InvalidParameter(format!(
                "OLH needs a finite epsilon, got {epsilon}"
            )));
        }
        let g = (epsilon + 1.0).ceil() as u32;
        Ok(Self {
            epsilon,
            p: keep_probability(epsilon, (g - 1) as f64),
            q: 1.0 / g as f64,
            hash_range: Some(g),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// OLH bucket count `g`; `None` for every other mechanism.
    pub fn hash_range(&self) -> Option<u32> {
        self.hash_range
    }

    /// FHR estimator scale `(e^ε+1)/(2(e^ε-1))`.
    pub fn correction(&self) -> f64 {
        let t = (-self.epsilon).exp();
        (1.0 + t) / (2.0 * (1.0 - t))
    }
}
