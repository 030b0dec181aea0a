//! Mode-by-mode structure of the damped block operator
//! `𝒜(x, y) = (−y, A(x + cy) − λx)`: roots, the splitting `E₋ ⊕ E₀ ⊕ E₊`,
//! the semigroup `exp(−t𝒜)` and the decay constants `(M, δ)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, fabs, pow, sqrt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expm::{neg_exp_with_roots, Roots};
use crate::linalg::Mat2;
use crate::operator::EigenBasis;
use crate::state::StateE;

/// Physical parameters of the damped operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedConfig {
    pub c: f64,
    pub lambda: f64,
    /// Exponent of the phase space `X^α × X`.
    pub alpha: f64,
    /// 1-based `k` with `λ = λ_k`, if resonant.
    pub resonance_index: Option<usize>,
}

impl DampedConfig {
    /// Resonant configuration with `λ` copied from `λ_k`.
    pub fn resonant(basis: &EigenBasis, c: f64, k: usize, alpha: f64) -> Result<Self> {
        if k == 0 || k > basis.len() {
            return Err(invalid("resonance index outside the retained modes"));
        }
        Ok(DampedConfig {
            c,
            lambda: basis.eigenvalue(k),
            alpha,
            resonance_index: Some(k),
        })
    }

    pub fn non_resonant(c: f64, lambda: f64, alpha: f64) -> Self {
        DampedConfig {
            c,
            lambda,
            alpha,
            resonance_index: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(invalid("damping c must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha must lie in (0, 1)"));
        }
        if !self.lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModeClass {
    Negative,
    Kernel,
    Positive,
}

impl ModeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeClass::Negative => "NEGATIVE",
            ModeClass::Kernel => "KERNEL",
            ModeClass::Positive => "POSITIVE",
        }
    }
}

/// The 2×2 restriction of `𝒜` to mode `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBlock {
    pub index: usize,
    pub eigenvalue: f64,
    /// `[[0, −1], [λ_i − λ, cλ_i]]`.
    pub matrix: Mat2,
    pub roots: Roots,
    pub mu_minus: Complex64,
    pub mu_plus: Complex64,
    pub class: ModeClass,
}

impl ModeBlock {
    pub fn is_double_root(&self) -> bool {
        matches!(self.roots, Roots::Double(_))
    }

    /// Backward error of `μ` as a root of `μ² − cλ_iμ + (λ_i − λ)`: the
    /// residual divided by the sum of the term magnitudes.
    pub fn root_residual(&self, mu: Complex64) -> f64 {
        let tau = self.matrix.trace();
        let det = self.matrix.det();
        let r = mu * mu - mu * tau + det;
        let scale = mu.norm_sqr() + fabs(tau) * mu.norm() + fabs(det);
        if scale == 0.0 {
            r.norm()
        } else {
            r.norm() / scale
        }
    }

    /// `exp(−t M_i)`.
    pub fn semigroup(&self, t: f64) -> Result<Mat2> {
        semigroup_block(self, t)
    }
}

/// Builds the block of mode `index` (1-based) with eigenvalue `λ_i`.
pub fn mode_block(index: usize, lambda_i: f64, cfg: &DampedConfig) -> Result<ModeBlock> {
    if !(lambda_i > 0.0) {
        return Err(invalid("eigenvalue must be positive"));
    }
    let delta = lambda_i - cfg.lambda;
    let matrix = Mat2::new(0.0, -1.0, delta, cfg.c * lambda_i);
    let roots = Roots::from_trace_det(cfg.c * lambda_i, delta);
    let (mu_minus, mu_plus) = roots.pair();
    let class = if cfg.resonance_index == Some(index) || delta == 0.0 {
        ModeClass::Kernel
    } else if delta < 0.0 {
        ModeClass::Negative
    } else {
        ModeClass::Positive
    };
    Ok(ModeBlock {
        index,
        eigenvalue: lambda_i,
        matrix,
        roots,
        mu_minus,
        mu_plus,
        class,
    })
}

/// `exp(−tM)` for one block; negative `t` only on `E₋` blocks.
pub fn semigroup_block(b: &ModeBlock, t: f64) -> Result<Mat2> {
    if !t.is_finite() {
        return Err(invalid("time must be finite"));
    }
    if t < 0.0 && b.class != ModeClass::Negative {
        return Err(invalid("negative time only defined on E- blocks"));
    }
    Ok(neg_exp_with_roots(&b.matrix, &b.roots, t))
}

/// Spectral projections of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProjectors {
    pub p: Mat2,
    pub q_minus: Mat2,
    pub q_plus: Mat2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    P,
    QMinus,
    QPlus,
}

/// Splitting of the truncated phase space.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub basis: EigenBasis,
    pub config: DampedConfig,
    pub blocks: Vec<ModeBlock>,
    /// 1-based modes carrying an `E₋` component.
    pub idx_minus: Vec<usize>,
    pub idx_kernel: Vec<usize>,
    /// 1-based modes carrying an `E₊` component (split modes appear in both
    /// `idx_minus` and `idx_plus`).
    pub idx_plus: Vec<usize>,
    pub projectors: Vec<ModeProjectors>,
    pub m_const: f64,
    pub delta: f64,
    /// Bounds on the operator norms of `Q₊`, `Q₋`, `P` in `‖·‖_E`.
    pub q_plus_norm: f64,
    pub q_minus_norm: f64,
    pub p_norm: f64,
    /// Modes with a root equal to `1/c` within 1e-9.
    pub inverse_damping_hits: Vec<usize>,
    /// `λ_i^α` per mode.
    pub(crate) weights: Vec<f64>,
}

const DELTA_MARGIN: f64 = 0.01;

pub fn decompose(basis: &EigenBasis, cfg: &DampedConfig) -> Result<Decomposition> {
    cfg.validate()?;
    let n = basis.len();
    match cfg.resonance_index {
        Some(k) => {
            if k == 0 || k > n || basis.eigenvalue(k) != cfg.lambda {
                return Err(invalid(
                    "lambda does not equal the eigenvalue of the resonance index",
                ));
            }
        }
        None => {
            if basis.modes.iter().any(|m| m.eigenvalue == cfg.lambda) {
                return Err(invalid("lambda is an eigenvalue; set the resonance index"));
            }
        }
    }
    let mut blocks = Vec::with_capacity(n);
    for m in &basis.modes {
        blocks.push(mode_block(m.index, m.eigenvalue, cfg)?);
    }
    let weights: Vec<f64> = blocks
        .iter()
        .map(|b| pow(b.eigenvalue, cfg.alpha))
        .collect();

    let mut idx_minus = Vec::new();
    let mut idx_kernel = Vec::new();
    let mut idx_plus = Vec::new();
    let mut projectors = Vec::with_capacity(n);
    for b in &blocks {
        let pr = match b.class {
            ModeClass::Kernel => {
                idx_kernel.push(b.index);
                ModeProjectors {
                    p: Mat2::IDENTITY,
                    q_minus: Mat2::ZERO,
                    q_plus: Mat2::ZERO,
                }
            }
            ModeClass::Negative => {
                idx_minus.push(b.index);
                idx_plus.push(b.index);
                let (lo, hi) = match b.roots {
                    Roots::Real { lo, hi } => (lo, hi),
                    _ => unreachable!("negative determinant forces real roots"),
                };
                // projection onto span(1, −μ⁻) along span(1, −μ⁺)
                let k = 1.0 / (lo - hi);
                let pm = Mat2::new(-hi * k, -k, lo * hi * k, lo * k);
                ModeProjectors {
                    p: Mat2::ZERO,
                    q_minus: pm,
                    q_plus: Mat2::IDENTITY - pm,
                }
            }
            ModeClass::Positive => {
                idx_plus.push(b.index);
                ModeProjectors {
                    p: Mat2::ZERO,
                    q_minus: Mat2::ZERO,
                    q_plus: Mat2::IDENTITY,
                }
            }
        };
        projectors.push(pr);
    }

    // common decay rate of the forward flow on E₊ and the backward flow on E₋
    let abscissa = blocks
        .iter()
        .filter_map(|b| match b.class {
            ModeClass::Negative => Some(b.mu_plus.re.min(-b.mu_minus.re)),
            ModeClass::Positive => Some(b.roots.min_real_part()),
            ModeClass::Kernel => None,
        })
        .fold(f64::INFINITY, f64::min);
    let delta = if abscissa.is_finite() {
        (1.0 - DELTA_MARGIN) * abscissa
    } else {
        1.0
    };

    let mut sup = 1.0_f64;
    for (b, w) in blocks.iter().zip(&weights) {
        if b.class == ModeClass::Positive {
            let ms = b.matrix.diag_similarity(*w, 1.0);
            sup = sup.max(certified_sup(&ms, &b.roots, delta));
        }
    }
    let m_const = core::f64::consts::SQRT_2 * sup;

    let scaled = |f: fn(&ModeProjectors) -> Mat2| -> Vec<Mat2> {
        projectors
            .iter()
            .zip(&weights)
            .map(|(p, w)| f(p).diag_similarity(*w, 1.0))
            .collect()
    };
    let q_plus_norm = e_operator_norm(&scaled(|p| p.q_plus));
    let q_minus_norm = e_operator_norm(&scaled(|p| p.q_minus));
    let p_norm = e_operator_norm(&scaled(|p| p.p));

    let target = 1.0 / cfg.c;
    let inverse_damping_hits = blocks
        .iter()
        .filter(|b| (b.mu_minus - target).norm() < 1e-9 || (b.mu_plus - target).norm() < 1e-9)
        .map(|b| b.index)
        .collect();

    Ok(Decomposition {
        basis: basis.clone(),
        config: *cfg,
        blocks,
        idx_minus,
        idx_kernel,
        idx_plus,
        projectors,
        m_const,
        delta,
        q_plus_norm,
        q_minus_norm,
        p_norm,
        inverse_damping_hits,
        weights,
    })
}

/// Bound on the `‖·‖_E` operator norm of a block-diagonal map given by its
/// per-mode matrices in scaled coordinates `(λ_i^α a_i, b_i)`.
pub fn e_operator_norm(scaled: &[Mat2]) -> f64 {
    let spectral = scaled.iter().map(|m| m.norm2()).fold(0.0, f64::max) * core::f64::consts::SQRT_2;
    let colmax = |r: usize, c: usize| scaled.iter().map(|m| fabs(m.get(r, c))).fold(0.0, f64::max);
    let columns = (colmax(0, 0) + colmax(1, 0)).max(colmax(0, 1) + colmax(1, 1));
    spectral.min(columns)
}

/// Certified `sup_{t ≥ 0} ‖e^{δt} exp(−tM)‖₂` for a block with spectral
/// abscissa above `δ`.
///
/// Each interval `[t_j, t_j + h]` is bounded by the smaller of the inflation
/// bound `e^{(δ+‖M‖)h}·value(t_j)` and a non-increasing envelope valid on
/// `[t_j, ∞)`; the march stops once the envelope falls below the running max.
fn certified_sup(m: &Mat2, roots: &Roots, delta: f64) -> f64 {
    let norm_m = m.norm2();
    let h = 0.005 / (delta + norm_m);
    let inflate = exp((delta + norm_m) * h);
    let env = Envelope::new(m, roots, delta);
    let mut running = 0.0_f64;
    let mut t = 0.0;
    for _ in 0..400_000 {
        let e = env.at(t);
        if e <= running {
            return running;
        }
        let value = exp(delta * t) * neg_exp_with_roots(m, roots, t).norm2();
        running = running.max((inflate * value).min(e));
        t += h;
    }
    running.max(env.at(t))
}

/// Non-increasing upper bounds for `‖e^{δu} exp(−uM)‖₂` on `u ≥ t`.
struct Envelope {
    kind: EnvelopeKind,
    /// Polynomial-type bound `sup_{u≥t} e^{−ru}(1 + u·n)` usable in every
    /// branch; `(r, n)`.
    poly: (f64, f64),
}

enum EnvelopeKind {
    /// `e^{−r₁t}c₁ + e^{−r₂t}c₂`.
    TwoExp {
        r1: f64,
        c1: f64,
        r2: f64,
        c2: f64,
    },
    /// `e^{−rt}·c`.
    Oscillating {
        r: f64,
        c: f64,
    },
    PolyOnly,
}

impl Envelope {
    fn new(m: &Mat2, roots: &Roots, delta: f64) -> Self {
        match *roots {
            Roots::Real { lo, hi } => {
                let d = hi - lo;
                let nd = (*m - Mat2::IDENTITY.scale(lo)).scale(1.0 / d);
                let sigma = 0.5 * (lo + hi);
                let n_sigma = (*m - Mat2::IDENTITY.scale(sigma)).norm2();
                Envelope {
                    kind: EnvelopeKind::TwoExp {
                        r1: lo - delta,
                        c1: (Mat2::IDENTITY - nd).norm2(),
                        r2: hi - delta,
                        c2: nd.norm2(),
                    },
                    poly: (lo - delta, n_sigma),
                }
            }
            Roots::Double(mu) => {
                let n = (*m - Mat2::IDENTITY.scale(mu)).norm2();
                Envelope {
                    kind: EnvelopeKind::PolyOnly,
                    poly: (mu - delta, n),
                }
            }
            Roots::Complex { re, im } => {
                let nn = *m - Mat2::IDENTITY.scale(re);
                let k = nn.scale(1.0 / im);
                let kn = k.norm2();
                let lip = sqrt(1.0 + kn * kn);
                const SAMPLES: usize = 4096;
                let dtheta = PI / SAMPLES as f64;
                let mut best = 0.0_f64;
                for j in 0..=SAMPLES {
                    let th = j as f64 * dtheta;
                    let v = (Mat2::IDENTITY.scale(libm::cos(th)) - k.scale(libm::sin(th))).norm2();
                    best = best.max(v);
                }
                let c = (best + 0.5 * lip * dtheta).min(lip);
                Envelope {
                    kind: EnvelopeKind::Oscillating { r: re - delta, c },
                    poly: (re - delta, nn.norm2()),
                }
            }
        }
    }

    fn at(&self, t: f64) -> f64 {
        let poly = poly_envelope(self.poly.0, self.poly.1, t);
        let main = match self.kind {
            EnvelopeKind::TwoExp { r1, c1, r2, c2 } => exp(-r1 * t) * c1 + exp(-r2 * t) * c2,
            EnvelopeKind::Oscillating { r, c } => exp(-r * t) * c,
            EnvelopeKind::PolyOnly => f64::INFINITY,
        };
        main.min(poly)
    }
}

/// `sup_{u ≥ t} e^{−ru}(1 + u n)` for `r > 0`, `n ≥ 0`.
fn poly_envelope(r: f64, n: f64, t: f64) -> f64 {
    if r <= 0.0 {
        return f64::INFINITY;
    }
    let peak = if n > 0.0 { 1.0 / r - 1.0 / n } else { 0.0 };
    let u = if peak > t { peak } else { t };
    exp(-r * u) * (1.0 + u * n)
}

impl Decomposition {
    pub fn modes(&self) -> usize {
        self.blocks.len()
    }

    pub fn alpha_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `d_l = Σ_{i ≤ l} dim ker(λ_i I − A)`; every eigenvalue of the interval
    /// Laplacian is simple.
    pub fn cumulative_kernel_dim(&self, l: usize) -> usize {
        if l == 0 {
            return 0;
        }
        let ev = self.basis.eigenvalues();
        let top = ev[(l - 1).min(ev.len() - 1)];
        ev.iter().filter(|&&v| v <= top).count()
    }

    fn check(&self, s: &StateE) -> Result<()> {
        if s.modes() != self.modes() || s.b.len() != self.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                got: s.modes(),
            });
        }
        Ok(())
    }

    /// `‖(a, b)‖_E = ‖a‖_α + ‖b‖`.
    pub fn norm_e(&self, s: &StateE) -> f64 {
        let (na, nb) = self.norm_parts(s);
        na + nb
    }

    fn norm_parts(&self, s: &StateE) -> (f64, f64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..s.modes() {
            let x = self.weights[i] * s.a.0[i];
            na += x * x;
            nb += s.b.0[i] * s.b.0[i];
        }
        (sqrt(na), sqrt(nb))
    }

    /// Block-diagonal action of per-mode matrices.
    pub fn apply_blocks(&self, s: &StateE, mats: impl Fn(usize) -> Mat2) -> StateE {
        let mut out = StateE::zeros(s.modes());
        for i in 0..s.modes() {
            out.set_pair(i, mats(i).apply(s.pair(i)));
        }
        out
    }

    pub fn project(&self, s: &StateE, which: Projection) -> Result<StateE> {
        self.check(s)?;
        Ok(self.apply_blocks(s, |i| {
            let p = &self.projectors[i];
            match which {
                Projection::P => p.p,
                Projection::QMinus => p.q_minus,
                Projection::QPlus => p.q_plus,
            }
        }))
    }

    /// `S(t) = exp(−t𝒜)` on the whole state; `t < 0` requires the state to
    /// have no component outside `E₋`.
    pub fn semigroup(&self, s: &StateE, t: f64) -> Result<StateE> {
        self.check(s)?;
        let mut out = StateE::zeros(s.modes());
        for (i, b) in self.blocks.iter().enumerate() {
            let v = s.pair(i);
            if t < 0.0 && b.class != ModeClass::Negative {
                if v != [0.0, 0.0] {
                    return Err(invalid("negative time only defined on E- states"));
                }
                continue;
            }
            if t < 0.0 {
                // on a split mode the group acts on the E₋ line only
                let qm = self.projectors[i].q_minus.apply(v);
                if fabs(qm[0] - v[0]) + fabs(qm[1] - v[1]) > 1e-9 * (fabs(v[0]) + fabs(v[1])) {
                    return Err(invalid("negative time only defined on E- states"));
                }
            }
            out.set_pair(i, neg_exp_with_roots(&b.matrix, &b.roots, t).apply(v));
        }
        Ok(out)
    }

    /// `|z| = ‖(P + Q₋)z‖_E + sup_t ‖e^{δt} S(t) Q₊z‖_E`, the sup taken over
    /// `t_grid` and completed by an analytic bound beyond its last point.
    pub fn custom_norm(&self, s: &StateE, t_grid: &[f64]) -> Result<f64> {
        Ok(self.custom_norm_parts(s, t_grid)?.value())
    }

    pub fn custom_norm_parts(&self, s: &StateE, t_grid: &[f64]) -> Result<CustomNorm> {
        self.check(s)?;
        let t_max = match t_grid.last() {
            Some(&t) => t,
            None => return Err(invalid("empty time grid")),
        };
        if t_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("time grid must be non-negative"));
        }
        if t_max < 5.0 / self.delta {
            return Err(invalid("time grid must reach 5/delta"));
        }
        let rest = self
            .project(s, Projection::P)?
            .add(&self.project(s, Projection::QMinus)?);
        let y = self.project(s, Projection::QPlus)?;
        let n = self.modes();
        let scaled: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let v = y.pair(i);
                [self.weights[i] * v[0], v[1]]
            })
            .collect();

        let mut sampled = 0.0_f64;
        for &t in t_grid {
            let (mut na, mut nb) = (0.0, 0.0);
            for (i, b) in self.blocks.iter().enumerate() {
                let v = scaled[i];
                let w = match b.class {
                    ModeClass::Kernel => continue,
                    ModeClass::Negative => {
                        let f = exp((self.delta - b.mu_plus.re) * t);
                        [f * v[0], f * v[1]]
                    }
                    ModeClass::Positive => {
                        let m = b.matrix.diag_similarity(self.weights[i], 1.0);
                        let f = exp(self.delta * t);
                        let r = neg_exp_with_roots(&m, &b.roots, t).apply(v);
                        [f * r[0], f * r[1]]
                    }
                };
                na += w[0] * w[0];
                nb += w[1] * w[1];
            }
            sampled = sampled.max(sqrt(na) + sqrt(nb));
        }

        let mut tail_sq = 0.0;
        for (i, b) in self.blocks.iter().enumerate() {
            let e = self.mode_tail(b, i, scaled[i], t_max);
            tail_sq += e * e;
        }
        Ok(CustomNorm {
            projected: self.norm_e(&rest),
            sampled,
            tail: 2.0 * sqrt(tail_sq),
        })
    }

    /// Bound on `sup_{u ≥ T} ‖e^{δu} S̃_i(u) v‖₂` built from the exact modal
    /// components of `v`.
    fn mode_tail(&self, b: &ModeBlock, i: usize, v: [f64; 2], t: f64) -> f64 {
        let norm = |x: [f64; 2]| sqrt(x[0] * x[0] + x[1] * x[1]);
        let delta = self.delta;
        match b.class {
            ModeClass::Kernel => 0.0,
            ModeClass::Negative => exp(-(b.mu_plus.re - delta) * t) * norm(v),
            ModeClass::Positive => {
                let m = b.matrix.diag_similarity(self.weights[i], 1.0);
                match b.roots {
                    Roots::Real { lo, hi } => {
                        let nd = (m - Mat2::IDENTITY.scale(lo)).scale(1.0 / (hi - lo));
                        let c_hi = nd.apply(v);
                        let c_lo = [v[0] - c_hi[0], v[1] - c_hi[1]];
                        exp(-(lo - delta) * t) * norm(c_lo) + exp(-(hi - delta) * t) * norm(c_hi)
                    }
                    Roots::Double(mu) => {
                        let nv = (m - Mat2::IDENTITY.scale(mu)).apply(v);
                        let (p, q) = (norm(v), norm(nv));
                        let r = mu - delta;
                        let peak = if q > 0.0 && p > 0.0 {
                            1.0 / r - p / q
                        } else {
                            0.0
                        };
                        let u = if peak > t { peak } else { t };
                        exp(-r * u) * (p + u * q)
                    }
                    Roots::Complex { re, im } => {
                        let q = (m - Mat2::IDENTITY.scale(re)).scale(1.0 / im).apply(v);
                        let g00 = v[0] * v[0] + v[1] * v[1];
                        let g11 = q[0] * q[0] + q[1] * q[1];
                        let g01 = v[0] * q[0] + v[1] * q[1];
                        let tr = g00 + g11;
                        let disc = ((g00 - g11) * (g00 - g11) + 4.0 * g01 * g01).max(0.0);
                        exp(-(re - delta) * t) * sqrt(0.5 * (tr + sqrt(disc)))
                    }
                }
            }
        }
    }
}

/// Components of the equivalent norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomNorm {
    /// `‖(P + Q₋)z‖_E`.
    pub projected: f64,
    /// Max of `‖e^{δt}S(t)Q₊z‖_E` over the grid.
    pub sampled: f64,
    /// Bound on the same quantity beyond the last grid time.
    pub tail: f64,
}

impl CustomNorm {
    pub fn value(&self) -> f64 {
        self.projected + self.sampled.max(self.tail)
    }
}

/// `n + 1` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|j| t_max * j as f64 / n as f64).collect()
}
