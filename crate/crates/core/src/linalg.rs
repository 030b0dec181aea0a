//! 2×2 real matrices and the scalar φ-functions used by the exponential
//! integrators.

use core::ops::{Add, Mul, Sub};

use libm::{expm1, fabs, sqrt};
use serde::{Deserialize, Serialize};

/// Row-major 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[r][c]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let m = &self.0;
        Mat2::new(s * m[0][0], s * m[0][1], s * m[1][0], s * m[1][1])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2::new(
            m[1][1] / d,
            -m[0][1] / d,
            -m[1][0] / d,
            m[0][0] / d,
        ))
    }

    #[inline]
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * x[0] + m[0][1] * x[1],
            m[1][0] * x[0] + m[1][1] * x[1],
        ]
    }

    /// Similarity `D M D⁻¹` with `D = diag(d0, d1)`.
    pub fn diag_similarity(&self, d0: f64, d1: f64) -> Mat2 {
        let m = &self.0;
        Mat2::new(m[0][0], m[0][1] * d0 / d1, m[1][0] * d1 / d0, m[1][1])
    }

    /// Spectral norm (largest singular value), closed form.
    pub fn norm2(&self) -> f64 {
        let m = &self.0;
        let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
        let s = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        // σ_max² = (s + sqrt(s² − 4 det²)) / 2
        let disc = (s * s - 4.0 * det * det).max(0.0);
        sqrt(0.5 * (s + sqrt(disc)))
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                m = m.max(fabs(self.0[r][c] - other.0[r][c]));
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2::new(
            a[0][0] - b[0][0],
            a[0][1] - b[0][1],
            a[1][0] - b[1][0],
            a[1][1] - b[1][1],
        )
    }
}

const SERIES_CUTOFF: f64 = 1e-4;

/// φ₁(z) = (eᶻ − 1)/z, with the Taylor branch near zero.
pub fn phi1(z: f64) -> f64 {
    if fabs(z) < SERIES_CUTOFF {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        expm1(z) / z
    }
}

/// φ₂(z) = (eᶻ − 1 − z)/z².
pub fn phi2(z: f64) -> f64 {
    if fabs(z) < 1e-2 {
        // truncation error below 1e-16 for |z| < 1e-2
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 3..12 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (expm1(z) - z) / (z * z)
    }
}

/// φ₃(z) = (eᶻ − 1 − z − z²/2)/z³.
pub fn phi3(z: f64) -> f64 {
    if fabs(z) < 5e-2 {
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for k in 4..16 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (expm1(z) - z - 0.5 * z * z) / (z * z * z)
    }
}

/// Composite Simpson rule on `[a, b]`; `panels` is rounded up to even.
pub fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm2_matches_eigen_of_gram() {
        let m = Mat2::new(1.0, 2.0, -3.0, 0.5);
        // Gram = MᵀM; largest eigenvalue by the quadratic formula
        let g00 = 1.0 + 9.0;
        let g01 = 2.0 - 1.5;
        let g11 = 4.0 + 0.25;
        let tr: f64 = g00 + g11;
        let det = g00 * g11 - g01 * g01;
        let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        assert!((m.norm2() - lmax.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn phi_functions_are_continuous_across_the_series_cutoff() {
        for &z in &[-2e-2, -5e-2, -1e-4, 1e-4, 1e-2, 5e-2] {
            let eps = 1e-9;
            assert!((phi1(z * (1.0 + eps)) - phi1(z * (1.0 - eps))).abs() < 1e-8);
            assert!((phi2(z * (1.0 + eps)) - phi2(z * (1.0 - eps))).abs() < 1e-8);
            assert!((phi3(z * (1.0 + eps)) - phi3(z * (1.0 - eps))).abs() < 1e-8);
        }
        assert!((phi1(-1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((phi2(-1.0) - ((-1.0f64).exp() - 1.0 + 1.0)).abs() < 1e-15);
        assert!((phi3(0.0) - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 3);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }
}
