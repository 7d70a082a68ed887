//! The two parameter vector kinds of a Kolmogorov model.

use std::fmt;

use crate::{Error, Result};

/// Tolerance on `Σθ = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the unit probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("simplex vector must have dimension >= 1"));
        }
        if entries.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("simplex entries must be finite and nonnegative"));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("simplex entries sum to {sum}, expected 1")));
        }
        Ok(Self(entries))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    /// The `j`-th vertex `e_j`.
    pub fn vertex(dim: usize, j: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        Self(e)
    }

    /// Wraps entries produced by a simplex-preserving update, renormalising
    /// away accumulated rounding.
    pub(crate) fn from_update(mut entries: Vec<f64>) -> Self {
        for x in entries.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let sum: f64 = entries.iter().sum();
        entries.iter_mut().for_each(|x| *x /= sum);
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A vector with entries in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryIndicator(Vec<bool>);

impl BinaryIndicator {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![false; dim])
    }

    pub fn ones(dim: usize) -> Self {
        Self(vec![true; dim])
    }

    /// Builds from 0/1 values; anything else is rejected.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&x| match x {
                0.0 => Ok(false),
                1.0 => Ok(true),
                x => Err(Error::invalid(format!("binary indicator entry {x} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// Bits of `code`, most significant first, so increasing codes enumerate
    /// vectors in lexicographic order.
    pub fn from_code(dim: usize, code: u64) -> Self {
        Self((0..dim).map(|d| (code >> (dim - 1 - d)) & 1 == 1).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, d: usize) -> bool {
        self.0[d]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for BinaryIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &b) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_validation() {
        assert!(SimplexVector::new(vec![0.3, 0.7]).is_ok());
        assert!(SimplexVector::new(vec![0.3, 0.6]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert_eq!(SimplexVector::uniform(4).as_slice(), &[0.25; 4]);
    }

    #[test]
    fn binary_codes_are_lexicographic() {
        let all: Vec<_> = (0..8).map(|c| BinaryIndicator::from_code(3, c)).collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all[1].to_f64(), vec![0.0, 0.0, 1.0]);
        assert!(BinaryIndicator::from_values(&[0.0, 0.5]).is_err());
        assert_eq!(BinaryIndicator::ones(2).to_string(), "1 1");
    }
}
