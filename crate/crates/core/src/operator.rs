//! Dirichlet Laplacian on an interval: eigenbasis, quadrature grid and the
//! coefficient-space Hilbert structure.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Index, IndexMut};

use libm::{pow, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One retained eigenpair of the base operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    /// 1-based mode number.
    pub index: usize,
    pub eigenvalue: f64,
    /// L²-normalised eigenfunction at the quadrature nodes.
    pub grid_values: Vec<f64>,
}

/// Retained eigenpairs plus the quadrature grid used for nonlinear terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBasis {
    pub domain_length: f64,
    pub modes: Vec<EigenMode>,
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

/// Coordinates in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoeffVec(pub Vec<f64>);

impl CoeffVec {
    pub fn zeros(n: usize) -> Self {
        CoeffVec(vec![0.0; n])
    }

    /// Unit vector for the 1-based mode `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i - 1] = 1.0;
        CoeffVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn scaled(&self, s: f64) -> CoeffVec {
        CoeffVec(self.0.iter().map(|v| s * v).collect())
    }
}

impl From<Vec<f64>> for CoeffVec {
    fn from(v: Vec<f64>) -> Self {
        CoeffVec(v)
    }
}

impl Index<usize> for CoeffVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CoeffVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Eigenpairs `λ_i = (iπ/ℓ)²`, `φ_i = sqrt(2/ℓ) sin(iπx/ℓ)` on `G` interior
/// nodes `x_j = jℓ/(G+1)` with equal weights `ℓ/(G+1)`.
pub fn build_dirichlet_laplacian(length: f64, modes: usize, grid: usize) -> Result<EigenBasis> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(invalid("domain length must be positive"));
    }
    if modes == 0 {
        return Err(invalid("mode count must be at least 1"));
    }
    if grid < 4 * modes {
        return Err(invalid("grid size must be at least 4 times the mode count"));
    }
    let cells = (grid + 1) as f64;
    let h = length / cells;
    let quad_nodes: Vec<f64> = (1..=grid).map(|j| j as f64 * h).collect();
    let quad_weights = vec![h; grid];
    let amp = sqrt(2.0 / length);
    let modes: Vec<EigenMode> = (1..=modes)
        .map(|i| {
            let k = i as f64 * PI / length;
            let grid_values = (1..=grid)
                .map(|j| amp * sin(PI * (i * j) as f64 / cells))
                .collect();
            EigenMode {
                index: i,
                eigenvalue: k * k,
                grid_values,
            }
        })
        .collect();
    debug_assert!(modes.windows(2).all(|w| w[1].eigenvalue > w[0].eigenvalue));
    Ok(EigenBasis {
        domain_length: length,
        modes,
        quad_nodes,
        quad_weights,
    })
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.quad_nodes.len()
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.modes[i - 1].eigenvalue
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Eigenfunction `φ_i(x)` at an arbitrary point.
    pub fn eigenfunction(&self, i: usize, x: f64) -> f64 {
        let l = self.domain_length;
        sqrt(2.0 / l) * sin(i as f64 * PI * x / l)
    }

    /// Synthesis `Σ u_i φ_i(x)` at an arbitrary point.
    pub fn eval_at(&self, u: &CoeffVec, x: f64) -> f64 {
        u.0.iter()
            .enumerate()
            .map(|(i, c)| c * self.eigenfunction(i + 1, x))
            .sum()
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// H inner product in coefficients (the basis is orthonormal).
pub fn h_inner(u: &CoeffVec, v: &CoeffVec) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum())
}

/// `‖A^α u‖ = (Σ λ_i^{2α} u_i²)^{1/2}`.
pub fn fractional_norm(u: &CoeffVec, alpha: f64, basis: &EigenBasis) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    basis.check_len(u.len())?;
    let s: f64 =
        u.0.iter()
            .zip(&basis.modes)
            .map(|(c, m)| {
                let w = pow(m.eigenvalue, alpha) * c;
                w * w
            })
            .sum();
    Ok(sqrt(s))
}

/// Values of `Σ u_i φ_i` at the quadrature nodes.
pub fn grid_eval(u: &CoeffVec, basis: &EigenBasis) -> Result<Vec<f64>> {
    basis.check_len(u.len())?;
    let mut g = vec![0.0; basis.grid_len()];
    for (c, m) in u.0.iter().zip(&basis.modes) {
        if *c == 0.0 {
            continue;
        }
        for (gj, pj) in g.iter_mut().zip(&m.grid_values) {
            *gj += c * pj;
        }
    }
    Ok(g)
}

/// Quadrature coefficients `⟨g, φ_i⟩` for every retained mode.
pub fn grid_project(g: &[f64], basis: &EigenBasis) -> Result<CoeffVec> {
    if g.len() != basis.grid_len() {
        return Err(Error::DimensionMismatch {
            expected: basis.grid_len(),
            got: g.len(),
        });
    }
    let coeffs = basis
        .modes
        .iter()
        .map(|m| {
            m.grid_values
                .iter()
                .zip(g)
                .zip(&basis.quad_weights)
                .map(|((p, v), w)| p * v * w)
                .sum()
        })
        .collect();
    Ok(CoeffVec(coeffs))
}

/// Quadrature L² norm of a grid function.
pub fn grid_l2_norm(g: &[f64], basis: &EigenBasis) -> f64 {
    sqrt(
        g.iter()
            .zip(&basis.quad_weights)
            .map(|(v, w)| w * v * v)
            .sum(),
    )
}
