//! Discrete probability distributions and the Jensen-Shannon divergence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("distribution arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative or non-finite probability at index {index}")]
    InvalidProbability { index: usize },
    #[error("cannot normalize an all-zero histogram")]
    EmptyHistogram,
}

/// A normalized probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution<T = f64> {
    probabilities: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates non-negativity and normalization within
    /// [`Scalar::normalization_tolerance`].
    pub fn new(probabilities: Vec<T>) -> Result<Self, DivergenceError> {
        let dist = Distribution { probabilities };
        dist.check()?;
        Ok(dist)
    }

    pub fn check(&self) -> Result<(), DivergenceError> {
        for (index, p) in self.probabilities.iter().enumerate() {
            if !p.is_finite() || *p < T::zero() {
                return Err(DivergenceError::InvalidProbability { index });
            }
        }
        let sum = self.probabilities.iter().fold(T::zero(), |acc, p| acc + *p);
        if (sum - T::one()).abs() > T::normalization_tolerance() {
            return Err(DivergenceError::NotNormalized {
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Normalizes raw counts. Fails when every count is zero.
    pub fn from_counts(counts: &[u64]) -> Result<Self, DivergenceError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(DivergenceError::EmptyHistogram);
        }
        let total = T::from_u64(total).expect("count fits scalar");
        let probabilities = counts
            .iter()
            .map(|&c| T::from_u64(c).expect("count fits scalar") / total)
            .collect();
        Ok(Distribution { probabilities })
    }

    pub fn uniform(arity: usize) -> Self {
        let n = T::from_usize(arity).expect("arity fits scalar");
        Distribution {
            probabilities: vec![T::one() / n; arity],
        }
    }

    /// All mass on one index.
    pub fn point_mass(arity: usize, index: usize) -> Self {
        let mut probabilities = vec![T::zero(); arity];
        probabilities[index] = T::one();
        Distribution { probabilities }
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    pub fn arity(&self) -> usize {
        self.probabilities.len()
    }

    pub fn get(&self, index: usize) -> T {
        self.probabilities.get(index).copied().unwrap_or_else(T::zero)
    }

    /// Index of the largest probability; the first one wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Kullback-Leibler divergence in bits, with `0 log 0 = 0`. Infinite when `q`
/// lacks support where `p` has mass.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).fold(T::zero(), |acc, (&pi, &qi)| {
        if pi == T::zero() {
            acc
        } else {
            acc + pi * (pi / qi).log2()
        }
    })
}

// p * log2(2p / (p + q)), one half of a JSD summand.
fn half_term<T: Scalar>(p: T, q: T) -> T {
    if p == T::zero() {
        T::zero()
    } else {
        let two = T::one() + T::one();
        p * (two * p / (p + q)).log2()
    }
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`.
///
/// Both inputs must have the same arity and sum to one. The value is exactly
/// zero for identical inputs, exactly one for disjoint supports, and exactly
/// symmetric in its arguments.
pub fn jsd<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T, DivergenceError> {
    if p.arity() != q.arity() {
        return Err(DivergenceError::ArityMismatch {
            left: p.arity(),
            right: q.arity(),
        });
    }
    p.check()?;
    q.check()?;
    jsd_unchecked(p.probabilities(), q.probabilities())
}

/// JSD over raw slices. Validates arity only.
pub fn jsd_unchecked<T: Scalar>(p: &[T], q: &[T]) -> Result<T, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::ArityMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let disjoint = p
        .iter()
        .zip(q)
        .all(|(&a, &b)| a == T::zero() || b == T::zero());
    if disjoint {
        return Ok(T::one());
    }
    let sum = p
        .iter()
        .zip(q)
        .fold(T::zero(), |acc, (&a, &b)| acc + (half_term(a, b) + half_term(b, a)));
    let half = T::one() / (T::one() + T::one());
    Ok((sum * half).max(T::zero()).min(T::one()))
}

/// JSD between two count vectors after normalizing each.
pub fn jsd_counts<T: Scalar>(p: &[u64], q: &[u64]) -> Result<T, DivergenceError> {
    let p = Distribution::<T>::from_counts(p)?;
    let q = Distribution::<T>::from_counts(q)?;
    jsd(&p, &q)
}

/// JSD between two Bernoulli rates, `[r, 1 - r]`.
pub fn jsd_bernoulli<T: Scalar>(a: T, b: T) -> T {
    jsd_unchecked(&[a, T::one() - a], &[b, T::one() - b]).expect("arity 2")
}
