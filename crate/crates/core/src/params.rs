//! Flat parameter vectors exchanged between agents.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += factor * b;
        }
    }

    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn mean_of<'a, I>(vectors: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut acc = Self::zeros(dim);
        let mut count = 0usize;
        for v in vectors {
            acc.axpy(1.0, v);
            count += 1;
        }
        if count > 0 {
            acc.scale(1.0 / count as f64);
        }
        acc
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Comma-separated line, 17 significant digits per value.
impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v:.16e}")?;
        }
        Ok(())
    }
}

impl FromStr for ParamVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("parameter value `{tok}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip_is_exact(values in proptest::collection::vec(-1e6f64..1e6, 17)) {
            let p = ParamVector(values);
            let back: ParamVector = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!("1.0,abc".parse::<ParamVector>().is_err());
    }
}
