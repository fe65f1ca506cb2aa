use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two beliefs are considered equal when their L∞ distance is at most this.
pub const BELIEF_EQ_TOL: f64 = 1e-9;

/// A probability distribution over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.0
    }
}

impl Deref for Belief {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Belief {
    /// Checks nonnegativity and that entries sum to one within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidBelief(format!(
                "entries must be finite and nonnegative: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > BELIEF_EQ_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Clips negative round-off and rescales to unit mass.
    ///
    /// Panics if the input carries no positive mass.
    pub fn renormalized(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        assert!(sum > 0.0, "cannot normalize a zero vector");
        if sum != 1.0 {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Belief(probs)
    }

    pub fn vertex(n: usize, s: usize) -> Self {
        let mut v = vec![0.0; n];
        v[s] = 1.0;
        Belief(v)
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn linf_distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn approx_eq(&self, other: &[f64]) -> bool {
        self.linf_distance(other) <= BELIEF_EQ_TOL
    }

    /// Index of the vertex `e_s` this belief equals, if any.
    pub fn as_vertex(&self) -> Option<usize> {
        let s = self.0.iter().position(|&p| p >= 1.0 - BELIEF_EQ_TOL)?;
        self.approx_eq(&Belief::vertex(self.len(), s)).then_some(s)
    }
}
