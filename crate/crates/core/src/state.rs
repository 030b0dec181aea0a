use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::CoeffVec;

/// Phase-space point `(u, u̇)` in eigen-coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateE {
    pub a: CoeffVec,
    pub b: CoeffVec,
}

impl StateE {
    pub fn new(a: CoeffVec, b: CoeffVec) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(StateE { a, b })
    }

    pub fn zeros(n: usize) -> Self {
        StateE {
            a: CoeffVec::zeros(n),
            b: CoeffVec::zeros(n),
        }
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }

    /// Mode pair `(a_i, b_i)` for the 0-based slot `i`.
    #[inline]
    pub fn pair(&self, i: usize) -> [f64; 2] {
        [self.a.0[i], self.b.0[i]]
    }

    #[inline]
    pub fn set_pair(&mut self, i: usize, v: [f64; 2]) {
        self.a.0[i] = v[0];
        self.b.0[i] = v[1];
    }

    /// Interleaved layout `[a_1, b_1, a_2, b_2, …]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; 2 * self.modes()];
        for i in 0..self.modes() {
            v[2 * i] = self.a.0[i];
            v[2 * i + 1] = self.b.0[i];
        }
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let n = v.len() / 2;
        let mut s = StateE::zeros(n);
        for i in 0..n {
            s.a.0[i] = v[2 * i];
            s.b.0[i] = v[2 * i + 1];
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.a.0.iter().chain(&self.b.0).all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &StateE) -> StateE {
        let a = self
            .a
            .0
            .iter()
            .zip(&other.a.0)
            .map(|(x, y)| x - y)
            .collect::<Vec<_>>();
        let b = self
            .b
            .0
            .iter()
            .zip(&other.b.0)
            .map(|(x, y)| x - y)
            .collect::<Vec<_>>();
        StateE {
            a: CoeffVec(a),
            b: CoeffVec(b),
        }
    }

    pub fn add(&self, other: &StateE) -> StateE {
        let a = self
            .a
            .0
            .iter()
            .zip(&other.a.0)
            .map(|(x, y)| x + y)
            .collect::<Vec<_>>();
        let b = self
            .b
            .0
            .iter()
            .zip(&other.b.0)
            .map(|(x, y)| x + y)
            .collect::<Vec<_>>();
        StateE {
            a: CoeffVec(a),
            b: CoeffVec(b),
        }
    }

    pub fn scaled(&self, s: f64) -> StateE {
        StateE {
            a: self.a.scaled(s),
            b: self.b.scaled(s),
        }
    }

    /// Largest coordinate difference.
    pub fn max_abs_diff(&self, other: &StateE) -> f64 {
        self.a
            .0
            .iter()
            .zip(&other.a.0)
            .chain(self.b.0.iter().zip(&other.b.0))
            .map(|(x, y)| libm::fabs(x - y))
            .fold(0.0, f64::max)
    }
}
