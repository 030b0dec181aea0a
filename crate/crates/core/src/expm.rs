//! Closed-form functions of a real 2×2 generator `M`: the semigroup
//! `exp(−tM)` and the integrated weights used by exponential integrators.
//!
//! Every function `f(M)` is written as `α·I + β·(M − σI)` with `σ = tr M / 2`;
//! `(M − σI)² = q·I` where `q = σ² − det M`.

use num_complex::Complex64;

use libm::{cos, exp, expm1, fabs, sin, sqrt};

use crate::linalg::{phi1, phi2, Mat2};

/// Eigenvalue structure of a real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roots {
    /// `lo < hi`.
    Real {
        lo: f64,
        hi: f64,
    },
    Double(f64),
    /// `re ± i·im` with `im > 0`.
    Complex {
        re: f64,
        im: f64,
    },
}

impl Roots {
    /// Roots of `μ² − τμ + Δ` where `τ` is the trace and `Δ` the determinant.
    ///
    /// The larger real root is formed without cancellation when `τ ≥ 0` and the
    /// smaller one from `Δ / hi`, so `Δ = 0` gives an exact zero root.
    pub fn from_trace_det(tau: f64, det: f64) -> Roots {
        let disc = tau * tau - 4.0 * det;
        if disc > 0.0 {
            let s = sqrt(disc);
            if tau >= 0.0 {
                let hi = 0.5 * (tau + s);
                Roots::Real { lo: det / hi, hi }
            } else {
                let lo = 0.5 * (tau - s);
                Roots::Real { lo, hi: det / lo }
            }
        } else if disc == 0.0 {
            Roots::Double(0.5 * tau)
        } else {
            Roots::Complex {
                re: 0.5 * tau,
                im: 0.5 * sqrt(-disc),
            }
        }
    }

    pub fn of(m: &Mat2) -> Roots {
        Roots::from_trace_det(m.trace(), m.det())
    }

    /// `(μ⁻, μ⁺)`; for a complex pair μ⁻ carries the negative imaginary part.
    pub fn pair(&self) -> (Complex64, Complex64) {
        match *self {
            Roots::Real { lo, hi } => (Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)),
            Roots::Double(m) => (Complex64::new(m, 0.0), Complex64::new(m, 0.0)),
            Roots::Complex { re, im } => (Complex64::new(re, -im), Complex64::new(re, im)),
        }
    }

    pub fn min_real_part(&self) -> f64 {
        match *self {
            Roots::Real { lo, .. } => lo,
            Roots::Double(m) => m,
            Roots::Complex { re, .. } => re,
        }
    }
}

/// `exp(−tM)` by the three discriminant branches.
pub fn neg_exp(m: &Mat2, t: f64) -> Mat2 {
    neg_exp_with_roots(m, &Roots::of(m), t)
}

pub fn neg_exp_with_roots(m: &Mat2, roots: &Roots, t: f64) -> Mat2 {
    if t == 0.0 {
        return Mat2::IDENTITY;
    }
    match *roots {
        Roots::Real { lo, hi } => {
            // e^{−t lo}[I + (expm1(−t d)/d)(M − lo I)]
            let d = hi - lo;
            let g = expm1(-t * d) / d;
            let n = *m - Mat2::IDENTITY.scale(lo);
            (Mat2::IDENTITY + n.scale(g)).scale(exp(-t * lo))
        }
        Roots::Double(mu) => {
            let n = *m - Mat2::IDENTITY.scale(mu);
            (Mat2::IDENTITY - n.scale(t)).scale(exp(-t * mu))
        }
        Roots::Complex { re, im } => {
            let n = *m - Mat2::IDENTITY.scale(re);
            let w = im * t;
            (Mat2::IDENTITY.scale(cos(w)) - n.scale(sin(w) / im)).scale(exp(-t * re))
        }
    }
}

/// Integrated weights over one step of length `h`:
/// `phi1 = ∫₀^h e^{−sM} ds` and `psi = ∫₀^h e^{−(h−s)M} s ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepWeights {
    pub s: Mat2,
    pub phi1: Mat2,
    pub psi: Mat2,
}

/// Below this value of `|q|h²` the pair `σ ± √q` is treated through its Taylor
/// expansion about `σ` instead of divided differences.
const NEAR_DOUBLE: f64 = 1e-2;

pub fn step_weights(m: &Mat2, h: f64) -> StepWeights {
    let roots = Roots::of(m);
    let s = neg_exp_with_roots(m, &roots, h);
    if m.det() == 0.0 && m.get(0, 0) == 0.0 && m.get(1, 0) == 0.0 && m.get(0, 1) == -1.0 {
        return kernel_weights(m.get(1, 1), h, s);
    }
    let sigma = 0.5 * m.trace();
    let q = sigma * sigma - m.det();
    let n = *m - Mat2::IDENTITY.scale(sigma);
    let (a1, b1, a2, b2) = if fabs(q) * h * h < NEAR_DOUBLE {
        near_double(sigma, q, h)
    } else {
        match roots {
            Roots::Real { lo, hi } => {
                let (g1lo, g1hi) = (g1(lo, h), g1(hi, h));
                let (g2lo, g2hi) = (g2(lo, h), g2(hi, h));
                let d = hi - lo;
                (
                    0.5 * (g1lo + g1hi),
                    (g1hi - g1lo) / d,
                    0.5 * (g2lo + g2hi),
                    (g2hi - g2lo) / d,
                )
            }
            Roots::Double(_) => near_double(sigma, 0.0, h),
            Roots::Complex { re, im } => {
                let mu = Complex64::new(re, im);
                let v1 = g1_complex(mu, h);
                let v2 = g2_complex(mu, h);
                (v1.re, v1.im / im, v2.re, v2.im / im)
            }
        }
    };
    StepWeights {
        s,
        phi1: Mat2::IDENTITY.scale(a1) + n.scale(b1),
        psi: Mat2::IDENTITY.scale(a2) + n.scale(b2),
    }
}

/// Closed form for a generator `[[0, −1], [0, γ]]`, whose zero eigenvalue
/// makes the inverse-based formulas singular.
fn kernel_weights(gamma: f64, h: f64, s: Mat2) -> StepWeights {
    use crate::linalg::phi3;
    let z = -gamma * h;
    StepWeights {
        s,
        phi1: Mat2::new(h, h * h * phi2(z), 0.0, h * phi1(z)),
        psi: Mat2::new(0.5 * h * h, h * h * h * phi3(z), 0.0, h * h * phi2(z)),
    }
}

/// `g1(μ) = (1 − e^{−hμ})/μ`.
fn g1(mu: f64, h: f64) -> f64 {
    h * phi1(-h * mu)
}

/// `g2(μ) = ∫₀^h (h − u) e^{−uμ} du`.
fn g2(mu: f64, h: f64) -> f64 {
    h * h * phi2(-h * mu)
}

fn g1_complex(mu: Complex64, h: f64) -> Complex64 {
    let z = mu * (-h);
    ((z.exp() - 1.0) / z) * h
}

fn g2_complex(mu: Complex64, h: f64) -> Complex64 {
    let z = mu * (-h);
    ((z.exp() - 1.0 - z) / (z * z)) * (h * h)
}

/// `J_n(−a) = ∫₀¹ uⁿ e^{−au} du` for `a ≥ 0`.
fn j_moment(n: usize, a: f64) -> f64 {
    let np1 = (n + 1) as f64;
    if a > 40.0 + 2.0 * np1 {
        // n!/a^{n+1} (1 − e^{−a} Σ_{k≤n} a^k/k!)
        let mut fact = 1.0;
        let mut partial = 0.0;
        let mut term = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
                term *= a / k as f64;
            }
            partial += term;
        }
        let mut apow = 1.0;
        for _ in 0..=n {
            apow *= a;
        }
        return fact / apow * (1.0 - exp(-a) * partial);
    }
    // e^{−a} Σ_k a^k / ((n+1)(n+2)…(n+1+k)), positive terms
    let mut term = 1.0 / np1;
    let mut sum = term;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= a / (np1 + k);
        sum += term;
        k += 1.0;
    }
    exp(-a) * sum
}

/// Taylor expansion about `σ` in powers of `q`; `f^{(n)}(σ)` of `g1`, `g2` are
/// moments of `e^{−sσ}` over the step.
fn near_double(sigma: f64, q: f64, h: f64) -> (f64, f64, f64, f64) {
    const TERMS: usize = 12;
    let a = h * sigma;
    let mut j = [0.0; TERMS + 2];
    for (n, v) in j.iter_mut().enumerate() {
        *v = j_moment(n, a);
    }
    let (mut a1, mut b1, mut a2, mut b2) = (0.0, 0.0, 0.0, 0.0);
    let mut qpow = 1.0; // q^{⌊n/2⌋} / n!
    let mut sign = 1.0;
    let mut hpow = h; // h^{n+1}
    for n in 0..TERMS {
        if n > 0 {
            qpow /= n as f64;
            if n % 2 == 0 {
                qpow *= q;
            }
            sign = -sign;
            hpow *= h;
        }
        let d1 = sign * hpow * j[n];
        let d2 = sign * hpow * h * (j[n] - j[n + 1]);
        if n % 2 == 0 {
            a1 += d1 * qpow;
            a2 += d2 * qpow;
        } else {
            b1 += d1 * qpow;
            b2 += d2 * qpow;
        }
    }
    (a1, b1, a2, b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix6};

    fn expm_oracle(m: &Mat2, h: f64) -> (Mat2, Mat2, Mat2) {
        // exp of the augmented 6×6 generator [[−M, I, 0], [0, 0, I], [0, 0, 0]]·h
        let mut a = Matrix6::<f64>::zeros();
        for r in 0..2 {
            for c in 0..2 {
                a[(r, c)] = -m.get(r, c) * h;
            }
            a[(r, r + 2)] = h;
            a[(r + 2, r + 4)] = h;
        }
        let e = a.exp();
        let blk = |r0: usize, c0: usize, scale: f64| {
            Mat2::new(
                e[(r0, c0)] * scale,
                e[(r0, c0 + 1)] * scale,
                e[(r0 + 1, c0)] * scale,
                e[(r0 + 1, c0 + 1)] * scale,
            )
        };
        (blk(0, 0, 1.0), blk(0, 2, 1.0), blk(0, 4, 1.0))
    }

    fn block(lambda_i: f64, lambda: f64, c: f64) -> Mat2 {
        Mat2::new(0.0, -1.0, lambda_i - lambda, c * lambda_i)
    }

    fn rel_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        let scale = a.norm2().max(b.norm2()).max(1e-300);
        a.max_abs_diff(b) <= tol * scale
    }

    #[test]
    fn weights_match_augmented_exponential() {
        let cases = [
            block(1.0, 1.0, 0.5),           // kernel
            block(4.0, 1.0, 0.5),           // complex pair
            block(16.0, 1.0, 0.5),          // near-double real pair
            block(1.0, 4.0, 0.5),           // split real pair
            block(1.0, 0.0, 3.0),           // well separated real pair
            block(256.0, 1.0, 2.0),         // stiff
            block(9.0, 2.5, 0.1),           // lightly damped
            Mat2::new(0.0, -1.0, 1.0, 2.0), // exact double root at 1
        ];
        for m in &cases {
            for &h in &[1.0 / 1024.0, 1.0 / 256.0, 1.0 / 16.0, 0.5] {
                let w = step_weights(m, h);
                let (s, p1, psi) = expm_oracle(m, h);
                assert!(
                    rel_close(&w.s, &s, 1e-12),
                    "S {m:?} h={h}: {:?} vs {s:?}",
                    w.s
                );
                assert!(
                    rel_close(&w.phi1, &p1, 1e-11),
                    "phi1 {m:?} h={h}: {:?} vs {p1:?}",
                    w.phi1
                );
                assert!(
                    rel_close(&w.psi, &psi, 1e-10),
                    "psi {m:?} h={h}: {:?} vs {psi:?}",
                    w.psi
                );
            }
        }
    }

    #[test]
    fn semigroup_matches_nalgebra_exp() {
        let cases = [
            block(4.0, 1.0, 0.5),
            block(1.0, 4.0, 0.5),
            Mat2::new(0.0, -1.0, 1.0, 2.0),
        ];
        for m in &cases {
            for &t in &[0.1, 0.7, 1.3, -0.4] {
                let a = Matrix2::new(m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)) * (-t);
                let e = a.exp();
                let want = Mat2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]);
                assert!(rel_close(&neg_exp(m, t), &want, 1e-12));
            }
        }
    }

    #[test]
    fn moments_agree_across_branches() {
        for n in 0..6 {
            for &a in &[0.0, 0.5, 3.0, 30.0, 60.0, 200.0] {
                // composite Simpson oracle on a fine grid
                let k = 20000;
                let hh = 1.0 / k as f64;
                let f = |u: f64| u.powi(n as i32) * (-a * u).exp();
                let mut s = f(0.0) + f(1.0);
                for i in 1..k {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hh);
                }
                let want = s * hh / 3.0;
                let got = j_moment(n, a);
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1e-12),
                    "n={n} a={a}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn kernel_roots_are_exact() {
        let r = Roots::of(&block(1.0, 1.0, 0.5));
        assert_eq!(r, Roots::Real { lo: 0.0, hi: 0.5 });
    }
}
