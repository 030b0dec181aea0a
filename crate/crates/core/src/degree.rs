//! Brouwer degree in dimensions 1 to 3, fixed-point indices of truncated
//! Poincaré maps, averaged-map degree formulas and the averaging theorem.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{atan2, cos, fabs, sin, sqrt};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{IntegratorSettings, PoincareMap};
use crate::expm::neg_exp;
use crate::nonlinearity::NonlinearitySpec;
use crate::operator::build_dirichlet_laplacian;
use crate::resonance::{AprioriConstants, AveragedMap, GCondition};
use crate::spectral::{decompose, DampedConfig, Decomposition, ModeClass, Projection};
use crate::state::StateE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn cube(dim: usize, r: f64) -> Domain {
        Domain::Box {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn ball(dim: usize, r: f64) -> Domain {
        Domain::Ball {
            center: vec![0.0; dim],
            radius: r,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(invalid("box needs lo < hi in every coordinate"));
                }
            }
            Domain::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(invalid("ball radius must be positive"));
                }
            }
        }
        if !(1..=3).contains(&self.dim()) {
            return Err(invalid("degree is supported in dimensions 1 to 3"));
        }
        Ok(())
    }

    /// Signed distance to the boundary, positive inside.
    fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => {
                radius
                    - sqrt(
                        x.iter()
                            .zip(center)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>(),
                    )
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Maps a point of the unit cube into the domain.
    fn point_at(&self, h: &[f64]) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => h
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect(),
            Domain::Ball { center, radius } => {
                let v: Vec<f64> = h.iter().map(|t| 2.0 * t - 1.0).collect();
                let inf = v.iter().map(|a| fabs(*a)).fold(0.0, f64::max);
                let two = sqrt(v.iter().map(|a| a * a).sum::<f64>());
                let s = if two > 0.0 { radius * inf / two } else { 0.0 };
                v.iter().zip(center).map(|(a, c)| c + s * a).collect()
            }
        }
    }

    /// Closed boundary curve of a planar domain at parameter `s ∈ [0, 1]`.
    fn planar_boundary(&self, s: f64) -> [f64; 2] {
        match self {
            Domain::Box { lo, hi } => {
                let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
                let p = s * 2.0 * (w + h);
                if p <= w {
                    [lo[0] + p, lo[1]]
                } else if p <= w + h {
                    [hi[0], lo[1] + (p - w)]
                } else if p <= 2.0 * w + h {
                    [hi[0] - (p - w - h), hi[1]]
                } else {
                    [lo[0], hi[1] - (p - 2.0 * w - h)]
                }
            }
            Domain::Ball { center, radius } => {
                let a = 2.0 * PI * s;
                [center[0] + radius * cos(a), center[1] + radius * sin(a)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DegreeMethod {
    Sign1d,
    Winding2d,
    RegularSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rigor {
    Certified,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Zeros {
        zeros: Vec<Vec<f64>>,
        jacobian_signs: Vec<i32>,
        residuals: Vec<f64>,
    },
    Boundary {
        samples: usize,
        total_winding: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub value: i32,
    pub method: DegreeMethod,
    pub certificate: Certificate,
    pub rigor_flag: Rigor,
}

/// Tuning for the sampled degree computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeOptions {
    /// Initial boundary samples in dimension 2.
    pub boundary_samples: usize,
    /// Newton starts for the regular-value sum.
    pub starts: usize,
    pub dedup_radius: f64,
    pub residual_tol: f64,
}

impl Default for DegreeOptions {
    fn default() -> Self {
        DegreeOptions {
            boundary_samples: 256,
            starts: 64,
            dedup_radius: 1e-5,
            residual_tol: 1e-10,
        }
    }
}

const MARGIN_FACTOR: f64 = 10.0;
const MAX_BISECTIONS: u32 = 40;

fn norm2(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|a| a * a).sum())
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Brouwer degree of `map` on `domain`: endpoint signs in dimension 1,
/// adaptive boundary winding in dimension 2, Newton sign sum in dimension 3.
pub fn brouwer_degree(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    domain: &Domain,
    opts: &DegreeOptions,
) -> Result<DegreeResult> {
    domain.validate()?;
    match domain.dim() {
        1 => degree_1d(map, domain),
        2 => winding_2d(map, domain, opts),
        _ => {
            check_boundary_3d(map, domain)?;
            regular_sum(map, domain, opts)
        }
    }
}

fn degree_1d(map: &dyn Fn(&[f64]) -> Vec<f64>, domain: &Domain) -> Result<DegreeResult> {
    let (a, b) = match domain {
        Domain::Box { lo, hi } => (lo[0], hi[0]),
        Domain::Ball { center, radius } => (center[0] - radius, center[0] + radius),
    };
    let r = (b - a) * 1e-6;
    let end = |x: f64, inward: f64| -> Result<f64> {
        let v = map(&[x])[0];
        let l = fabs(map(&[x + inward * r])[0] - v) / r;
        if !(fabs(v) > MARGIN_FACTOR * l * r) || !v.is_finite() {
            return Err(Error::BoundaryZero { point: vec![x] });
        }
        Ok(v)
    };
    let fa = end(a, 1.0)?;
    let fb = end(b, -1.0)?;
    Ok(DegreeResult {
        value: (sign(fb) - sign(fa)) / 2,
        method: DegreeMethod::Sign1d,
        certificate: Certificate::Boundary {
            samples: 4,
            total_winding: 0.0,
        },
        rigor_flag: Rigor::Certified,
    })
}

fn winding_2d(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    domain: &Domain,
    opts: &DegreeOptions,
) -> Result<DegreeResult> {
    let eval = |s: f64| -> Result<([f64; 2], [f64; 2])> {
        let p = domain.planar_boundary(s);
        let f = map(&p);
        if !(f[0].is_finite() && f[1].is_finite()) || (f[0] == 0.0 && f[1] == 0.0) {
            return Err(Error::BoundaryZero { point: p.to_vec() });
        }
        Ok((p, [f[0], f[1]]))
    };
    let n = opts.boundary_samples.max(8);
    let mut total = 0.0;
    let mut samples = 0usize;
    // segment stack: (s0, f0, s1, f1, depth)
    let mut stack = Vec::new();
    let mut prev = eval(0.0)?;
    for j in 1..=n {
        let s = j as f64 / n as f64;
        let cur = eval(if j == n { 0.0 } else { s })?;
        stack.push(((j - 1) as f64 / n as f64, prev.1, s, cur.1, 0u32));
        prev = cur;
        while let Some((s0, f0, s1, f1, depth)) = stack.pop() {
            samples += 1;
            let jump = sqrt((f1[0] - f0[0]) * (f1[0] - f0[0]) + (f1[1] - f0[1]) * (f1[1] - f0[1]));
            let small =
                sqrt(f0[0] * f0[0] + f0[1] * f0[1]).min(sqrt(f1[0] * f1[0] + f1[1] * f1[1]));
            if small > MARGIN_FACTOR * jump {
                total += atan2(f0[0] * f1[1] - f0[1] * f1[0], f0[0] * f1[0] + f0[1] * f1[1]);
                continue;
            }
            if depth >= MAX_BISECTIONS {
                return Err(Error::BoundaryZero {
                    point: domain.planar_boundary(s0).to_vec(),
                });
            }
            let sm = 0.5 * (s0 + s1);
            let (_, fm) = eval(sm)?;
            // process the first half first
            stack.push((sm, fm, s1, f1, depth + 1));
            stack.push((s0, f0, sm, fm, depth + 1));
        }
    }
    let winding = total / (2.0 * PI);
    let value = libm::round(winding);
    if fabs(winding - value) > 1e-6 {
        return Err(invalid("winding number is not an integer"));
    }
    Ok(DegreeResult {
        value: value as i32,
        method: DegreeMethod::Winding2d,
        certificate: Certificate::Boundary {
            samples,
            total_winding: winding,
        },
        rigor_flag: Rigor::Certified,
    })
}

fn check_boundary_3d(map: &dyn Fn(&[f64]) -> Vec<f64>, domain: &Domain) -> Result<()> {
    const M: usize = 64;
    // each face is a grid of points indexed [i][j]
    let mut faces: Vec<Vec<Vec<Vec<f64>>>> = Vec::new();
    match domain {
        Domain::Box { lo, hi } => {
            for axis in 0..3 {
                for side in [lo[axis], hi[axis]] {
                    let (p, q) = ((axis + 1) % 3, (axis + 2) % 3);
                    let face = (0..=M)
                        .map(|i| {
                            (0..=M)
                                .map(|j| {
                                    let mut x = vec![0.0; 3];
                                    x[axis] = side;
                                    x[p] = lo[p] + (hi[p] - lo[p]) * i as f64 / M as f64;
                                    x[q] = lo[q] + (hi[q] - lo[q]) * j as f64 / M as f64;
                                    x
                                })
                                .collect()
                        })
                        .collect();
                    faces.push(face);
                }
            }
        }
        Domain::Ball { center, radius } => {
            let face = (0..=M)
                .map(|i| {
                    let th = PI * i as f64 / M as f64;
                    (0..=2 * M)
                        .map(|j| {
                            let ph = PI * j as f64 / M as f64;
                            vec![
                                center[0] + radius * sin(th) * cos(ph),
                                center[1] + radius * sin(th) * sin(ph),
                                center[2] + radius * cos(th),
                            ]
                        })
                        .collect()
                })
                .collect();
            faces.push(face);
        }
    }
    let dist =
        |a: &[f64], b: &[f64]| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    for face in faces {
        let vals: Vec<Vec<Vec<f64>>> = face
            .iter()
            .map(|row| row.iter().map(|x| map(x)).collect())
            .collect();
        for i in 0..face.len() {
            for j in 0..face[i].len() {
                let v = &vals[i][j];
                let n = norm2(v);
                if !n.is_finite() || n == 0.0 {
                    return Err(Error::BoundaryZero {
                        point: face[i][j].clone(),
                    });
                }
                let ni = if i + 1 < face.len() { i + 1 } else { i - 1 };
                let nj = if j + 1 < face[i].len() { j + 1 } else { j - 1 };
                for (a, b) in [(ni, j), (i, nj)] {
                    if dist(&face[i][j], &face[a][b]) > 0.0
                        && !(n > MARGIN_FACTOR * dist(v, &vals[a][b]))
                    {
                        return Err(Error::BoundaryZero {
                            point: face[i][j].clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Radical-inverse low-discrepancy point `index` in `[0, 1)^dim`.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    primes(dim)
        .into_iter()
        .map(|p| {
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= p as f64;
                r += f * (i % p) as f64;
                i /= p;
            }
            r
        })
        .collect()
}

fn primes(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Newton iteration settings shared by the zero searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    pub max_backtracks: u32,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 40,
            fd_step: 1e-6,
            max_backtracks: 8,
        }
    }
}

enum NewtonOutcome {
    Converged { x: Vec<f64>, residual: f64 },
    NearKnown,
    Failed(String),
}

fn fd_jacobian(
    g: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    gx: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut j = DMatrix::zeros(gx.len(), n);
    let mut xp = x.to_vec();
    for c in 0..n {
        let h = step * fabs(x[c]).max(1.0);
        xp[c] = x[c] + h;
        let gp = g(&xp)?;
        xp[c] = x[c];
        for r in 0..gx.len() {
            j[(r, c)] = (gp[r] - gx[r]) / h;
        }
    }
    Ok(j)
}

fn newton(
    g: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    norm: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &NewtonOptions,
    escape: &dyn Fn(&[f64]) -> bool,
    near_known: &dyn Fn(&[f64]) -> bool,
) -> NewtonOutcome {
    let mut x = x0.to_vec();
    let mut gx = match g(&x) {
        Ok(v) => v,
        Err(e) => return NewtonOutcome::Failed(e.to_string()),
    };
    let mut r = norm(&gx);
    for _ in 0..opts.max_iter {
        if r < opts.tol {
            return NewtonOutcome::Converged { x, residual: r };
        }
        if near_known(&x) {
            return NewtonOutcome::NearKnown;
        }
        let j = match fd_jacobian(g, &x, &gx, opts.fd_step) {
            Ok(j) => j,
            Err(e) => return NewtonOutcome::Failed(e.to_string()),
        };
        let rhs = DMatrix::from_iterator(gx.len(), 1, gx.iter().map(|v| -v));
        let step = match j.lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return NewtonOutcome::Failed("singular jacobian".into()),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let xn: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            if escape(&xn) {
                alpha *= 0.5;
                continue;
            }
            if let Ok(gn) = g(&xn) {
                let rn = norm(&gn);
                if rn < r {
                    x = xn;
                    gx = gn;
                    r = rn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return NewtonOutcome::Failed("no residual decrease".into());
        }
    }
    if r < opts.tol {
        NewtonOutcome::Converged { x, residual: r }
    } else {
        NewtonOutcome::Failed("iteration budget exhausted".into())
    }
}

/// Sign of `det J` together with `σ_min/σ_max`.
fn jacobian_sign(j: DMatrix<f64>) -> (i32, f64) {
    let sv = j.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let det = j.lu().determinant();
    (sign(det), if max > 0.0 { min / max } else { 0.0 })
}

/// Degenerate zeros below this conditioning mark a sum as heuristic.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// Sum of Jacobian signs over zeros found by multi-start Newton.
pub fn regular_sum(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    domain: &Domain,
    opts: &DegreeOptions,
) -> Result<DegreeResult> {
    domain.validate()?;
    let dim = domain.dim();
    let scale = domain.scale();
    let nopts = NewtonOptions {
        tol: opts.residual_tol,
        max_iter: 60,
        fd_step: 1e-7,
        max_backtracks: 20,
    };
    let mut zeros: Vec<Vec<f64>> = Vec::new();
    let mut signs = Vec::new();
    let mut residuals = Vec::new();
    let mut g = |x: &[f64]| -> Result<Vec<f64>> { Ok(map(x)) };
    let escape = |x: &[f64]| domain.depth(x) < -0.5 * scale;
    for s in 0..opts.starts.max(1) {
        let x0 = domain.point_at(&halton(s, dim));
        let known = zeros.clone();
        let near = |x: &[f64]| {
            known.iter().any(|z| {
                norm2(&x.iter().zip(z).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-3 * scale
            })
        };
        if let NewtonOutcome::Converged { x, residual } =
            newton(&mut g, &norm2, &x0, &nopts, &escape, &near)
        {
            if zeros.iter().any(|z| {
                norm2(&x.iter().zip(z).map(|(a, b)| a - b).collect::<Vec<_>>()) < opts.dedup_radius
            }) {
                continue;
            }
            let depth = domain.depth(&x);
            if fabs(depth) < 1e-6 * scale {
                return Err(Error::BoundaryZero { point: x });
            }
            if depth < 0.0 {
                continue;
            }
            let fx = map(&x);
            let j = fd_jacobian(&mut g, &x, &fx, 1e-7)?;
            let (sg, ratio) = jacobian_sign(j);
            if ratio < DEGENERACY_RATIO {
                return Err(invalid("degenerate zero; degree needs the winding method"));
            }
            zeros.push(x);
            signs.push(sg);
            residuals.push(residual);
        }
    }
    Ok(DegreeResult {
        value: signs.iter().sum(),
        method: DegreeMethod::RegularSum,
        certificate: Certificate::Zeros {
            zeros,
            jacobian_signs: signs,
            residuals,
        },
        rigor_flag: Rigor::Heuristic,
    })
}

/// `deg_B(F̂, U_R⁰)` and the assembled `deg_B(𝒜₀ − 𝓕̂, U_R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedDegree {
    pub kernel_dim: usize,
    pub radius: f64,
    pub fhat: DegreeResult,
    pub assembled: i32,
}

pub fn averaged_degree(
    f: &NonlinearitySpec,
    dec: &Decomposition,
    radius: f64,
) -> Result<AveragedDegree> {
    let dim = dec.idx_kernel.len();
    if dim == 0 || dim > 3 {
        return Err(invalid("kernel dimension must be between 1 and 3"));
    }
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    let avg = AveragedMap::new(f, dec)?;
    let map = |x: &[f64]| avg.eval(x);
    let fhat = brouwer_degree(&map, &Domain::ball(dim, radius), &DegreeOptions::default())?;
    let parity = if dim.is_multiple_of(2) { 1 } else { -1 };
    Ok(AveragedDegree {
        kernel_dim: dim,
        radius,
        assembled: parity * fhat.value,
        fhat,
    })
}

/// `d_l = Σ_{i≤l} dim ker(λ_i I − A)` counted up to the resonant eigenvalue.
pub fn predicted_degree(dec: &Decomposition, cond: GCondition) -> Result<i32> {
    if dec.config.resonance_index.is_none() {
        return Err(invalid("resonance index is not set"));
    }
    let lam = dec.config.lambda;
    let d = match cond {
        GCondition::G1 => dec
            .basis
            .modes
            .iter()
            .filter(|m| m.eigenvalue <= lam)
            .count(),
        GCondition::G2 => dec
            .basis
            .modes
            .iter()
            .filter(|m| m.eigenvalue < lam)
            .count(),
    };
    Ok(if d % 2 == 0 { 1 } else { -1 })
}

/// `sign det(I − S(T))` from the mode blocks.
pub fn linear_degree(dec: &Decomposition, period: f64) -> Result<i32> {
    let mut s = 1;
    for b in &dec.blocks {
        let m = neg_exp(&b.matrix, period);
        let d = (1.0 - m.get(0, 0)) * (1.0 - m.get(1, 1)) - m.get(0, 1) * m.get(1, 0);
        if !(fabs(d) > 1e-12) {
            return Err(invalid("I − S(T) is singular"));
        }
        s *= sign(d);
    }
    Ok(s)
}

/// Parameters from which a decomposition is rebuilt at any truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub length: f64,
    pub c: f64,
    pub alpha: f64,
    pub resonance: Resonance,
    /// Quadrature nodes per mode.
    pub grid_factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resonance {
    Index(usize),
    Lambda(f64),
}

impl Model {
    pub fn decompose(&self, modes: usize) -> Result<Decomposition> {
        if self.grid_factor < 4 {
            return Err(invalid("grid factor must be at least 4"));
        }
        let basis = build_dirichlet_laplacian(self.length, modes, self.grid_factor * modes)?;
        let cfg = match self.resonance {
            Resonance::Index(k) => DampedConfig::resonant(&basis, self.c, k, self.alpha)?,
            Resonance::Lambda(l) => DampedConfig::non_resonant(self.c, l, self.alpha),
        };
        decompose(&basis, &cfg)
    }
}

/// `W = {‖Pw‖_E < kernel_radius} ∩ {‖Qw‖_E < q_radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub kernel_radius: f64,
    pub q_radius: f64,
}

impl PhaseBox {
    /// Kernel radius `R3 + 1`, Q radius `R1 + R2 + 1`.
    pub fn from_constants(c: &AprioriConstants) -> Result<PhaseBox> {
        let r3 =
            c.r3.ok_or_else(|| invalid("R3 is unavailable; the geometric condition did not hold"))?;
        Ok(PhaseBox {
            kernel_radius: r3 + 1.0,
            q_radius: c.r1 + c.r2 + 1.0,
        })
    }

    fn parts(&self, dec: &Decomposition, w: &StateE) -> (f64, f64) {
        let p = dec
            .project(w, Projection::P)
            .expect("state matches decomposition");
        (dec.norm_e(&p), dec.norm_e(&w.sub(&p)))
    }

    /// Maps a unit-cube point to a state inside the box.
    fn start(&self, dec: &Decomposition, h: &[f64]) -> StateE {
        let v: Vec<f64> = h.iter().map(|t| 2.0 * t - 1.0).collect();
        let n = dec.modes();
        let mut kern = StateE::zeros(n);
        let mut rest = StateE::zeros(n);
        let (mut rho_k, mut rho_q) = (0.0f64, 0.0f64);
        for i in 0..n {
            let pair = [v[2 * i], v[2 * i + 1]];
            if dec.blocks[i].class == ModeClass::Kernel {
                kern.set_pair(i, pair);
                rho_k = rho_k.max(fabs(pair[0])).max(fabs(pair[1]));
            } else {
                rest.set_pair(i, pair);
                rho_q = rho_q.max(fabs(pair[0])).max(fabs(pair[1]));
            }
        }
        let nk = dec.norm_e(&kern);
        let nq = dec.norm_e(&rest);
        let kern = if nk > 0.0 {
            kern.scaled(0.999 * self.kernel_radius * rho_k / nk)
        } else {
            kern
        };
        let rest = if nq > 0.0 {
            rest.scaled(0.999 * self.q_radius * rho_q / nq)
        } else {
            rest
        };
        kern.add(&rest)
    }
}

/// Search settings for fixed points of the truncated Poincaré map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub starts: usize,
    pub dedup_radius: f64,
    pub newton: NewtonOptions,
    /// A start is abandoned once it comes this close to a known fixed point.
    pub capture_radius: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            starts: 64,
            dedup_radius: 1e-5,
            newton: NewtonOptions::default(),
            capture_radius: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: StateE,
    pub residual: f64,
    /// `sign det(I − DΦ_T)`.
    pub index: i32,
    /// `σ_min/σ_max` of `I − DΦ_T`.
    pub conditioning: f64,
    pub kernel_norm: f64,
    pub q_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSearch {
    pub modes: usize,
    pub fixed_points: Vec<FixedPoint>,
    pub starts: usize,
    pub converged: usize,
    pub captured: usize,
    pub failures: usize,
    pub outside: usize,
    /// Smallest `‖w − Φ_T(w)‖_E` at the starting points of failed starts.
    pub best_failed_residual: f64,
    pub last_failure: Option<String>,
}

impl FixedPointSearch {
    pub fn degree(&self) -> i32 {
        self.fixed_points.iter().map(|p| p.index).sum()
    }

    pub fn rigor(&self) -> Rigor {
        if self
            .fixed_points
            .iter()
            .any(|p| p.conditioning < DEGENERACY_RATIO)
        {
            Rigor::Heuristic
        } else {
            Rigor::Certified
        }
    }
}

/// Multi-start Newton on `w − Φ_T(w)` over Halton starts in `pbox`.
pub fn find_fixed_points(
    map: &PoincareMap<'_>,
    pbox: &PhaseBox,
    opts: &SearchOptions,
) -> Result<FixedPointSearch> {
    let dec = map.decomposition();
    let n = dec.modes();
    let mut g = |x: &[f64]| -> Result<Vec<f64>> {
        let w = StateE::from_flat(x);
        let p = map.apply(&w)?;
        Ok(x.iter().zip(p.to_flat()).map(|(a, b)| a - b).collect())
    };
    let norm = |r: &[f64]| dec.norm_e(&StateE::from_flat(r));
    let escape = |x: &[f64]| {
        let (k, q) = pbox.parts(dec, &StateE::from_flat(x));
        k > 4.0 * pbox.kernel_radius || q > 4.0 * pbox.q_radius
    };
    let mut found: Vec<FixedPoint> = Vec::new();
    let (mut converged, mut captured, mut failures, mut outside) = (0, 0, 0, 0);
    let mut best_failed = f64::INFINITY;
    let mut last_failure = None;
    for s in 0..opts.starts {
        let w0 = pbox.start(dec, &halton(s, 2 * n));
        let known: Vec<StateE> = found.iter().map(|p| p.state.clone()).collect();
        let near = |x: &[f64]| {
            let w = StateE::from_flat(x);
            known
                .iter()
                .any(|k| dec.norm_e(&w.sub(k)) < opts.capture_radius)
        };
        match newton(&mut g, &norm, &w0.to_flat(), &opts.newton, &escape, &near) {
            NewtonOutcome::NearKnown => captured += 1,
            NewtonOutcome::Failed(why) => {
                failures += 1;
                last_failure = Some(why);
                if let Ok(r) = g(&w0.to_flat()) {
                    best_failed = best_failed.min(norm(&r));
                }
            }
            NewtonOutcome::Converged { x, residual } => {
                converged += 1;
                let w = StateE::from_flat(&x);
                if found
                    .iter()
                    .any(|p| dec.norm_e(&w.sub(&p.state)) < opts.dedup_radius)
                {
                    continue;
                }
                let (k, q) = pbox.parts(dec, &w);
                let band = 1e-6;
                if fabs(k - pbox.kernel_radius) < band * pbox.kernel_radius
                    || fabs(q - pbox.q_radius) < band * pbox.q_radius
                {
                    return Err(Error::BoundaryFixedPoint {
                        distance: fabs(k - pbox.kernel_radius).min(fabs(q - pbox.q_radius)),
                    });
                }
                if k > pbox.kernel_radius || q > pbox.q_radius {
                    outside += 1;
                    continue;
                }
                let gx = g(&x)?;
                let j = fd_jacobian(&mut g, &x, &gx, opts.newton.fd_step)?;
                let (index, conditioning) = jacobian_sign(j);
                found.push(FixedPoint {
                    state: w,
                    residual,
                    index,
                    conditioning,
                    kernel_norm: k,
                    q_norm: q,
                });
            }
        }
    }
    Ok(FixedPointSearch {
        modes: n,
        fixed_points: found,
        starts: opts.starts,
        converged,
        captured,
        failures,
        outside,
        best_failed_residual: best_failed,
        last_failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLadder {
    pub n_values: Vec<usize>,
    pub degrees: Vec<i32>,
    pub stable: bool,
    pub rigor_flag: Rigor,
    pub searches: Vec<FixedPointSearch>,
}

impl TruncationLadder {
    pub fn require_stable(&self) -> Result<i32> {
        if self.stable {
            Ok(self.degrees[0])
        } else {
            Err(Error::UnstableLadder {
                modes: self.n_values.clone(),
                degrees: self.degrees.clone(),
            })
        }
    }
}

/// Fixed-point index of `I − Φ_T` on `W` for each truncation level.
pub fn poincare_degree(
    f: &NonlinearitySpec,
    model: &Model,
    pbox: &PhaseBox,
    n_ladder: &[usize],
    settings: &IntegratorSettings,
    opts: &SearchOptions,
) -> Result<TruncationLadder> {
    if n_ladder.is_empty() || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("mode ladder must be increasing"));
    }
    if !(pbox.kernel_radius > 0.0 && pbox.q_radius > 0.0) {
        return Err(invalid("box radii must be positive"));
    }
    let mut searches = Vec::new();
    for &n in n_ladder {
        let dec = model.decompose(n)?;
        let map = PoincareMap::new(f, &dec, settings)?;
        let s = find_fixed_points(&map, pbox, opts)?;
        if s.fixed_points.is_empty() {
            return Err(Error::NewtonBudget(alloc::format!(
                "no fixed point found at N = {n} from {} starts",
                opts.starts
            )));
        }
        searches.push(s);
    }
    let degrees: Vec<i32> = searches.iter().map(|s| s.degree()).collect();
    let stable = degrees.iter().all(|d| *d == degrees[0]);
    let rigor_flag = if searches.iter().all(|s| s.rigor() == Rigor::Certified) {
        Rigor::Certified
    } else {
        Rigor::Heuristic
    };
    Ok(TruncationLadder {
        n_values: n_ladder.to_vec(),
        degrees,
        stable,
        rigor_flag,
        searches,
    })
}

/// Outcome of a Newton search that is expected to fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub radius: f64,
    pub search: FixedPointSearch,
    /// True when no start converged to a fixed point.
    pub exhaustive_failure: bool,
}

/// Multi-start Newton inside the ball `‖Pw‖_E, ‖Qw‖_E < radius`.
pub fn nonexistence_search(
    map: &PoincareMap<'_>,
    radius: f64,
    opts: &SearchOptions,
) -> Result<NonexistenceReport> {
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    let pbox = PhaseBox {
        kernel_radius: radius,
        q_radius: radius,
    };
    let search = find_fixed_points(map, &pbox, opts)?;
    Ok(NonexistenceReport {
        radius,
        exhaustive_failure: search.converged == 0,
        search,
    })
}

/// Planar test fields for the averaging theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanarField {
    /// `f(t, u) = −u`.
    LinearSink,
    /// `f(t, u) = (−x − ωy, ωx − y) + ε(cos 2πt/T, sin 2πt/T)`.
    RotationSink { omega: f64, eps: f64 },
    /// `f(t, u) = (x² − y², 2xy)/(1 + x² + y²) + ε(cos 2πt/T, sin 2πt/T)`.
    Square { eps: f64 },
}

impl PlanarField {
    pub fn eval(&self, t: f64, period: f64, u: [f64; 2]) -> [f64; 2] {
        let (c, s) = (cos(2.0 * PI * t / period), sin(2.0 * PI * t / period));
        let [x, y] = u;
        match *self {
            PlanarField::LinearSink => [-x, -y],
            PlanarField::RotationSink { omega, eps } => {
                [-x - omega * y + eps * c, omega * x - y + eps * s]
            }
            PlanarField::Square { eps } => {
                let d = 1.0 + x * x + y * y;
                [(x * x - y * y) / d + eps * c, 2.0 * x * y / d + eps * s]
            }
        }
    }

    /// Time average over one period.
    pub fn averaged(&self, u: [f64; 2]) -> [f64; 2] {
        let [x, y] = u;
        match *self {
            PlanarField::LinearSink => [-x, -y],
            PlanarField::RotationSink { omega, .. } => [-x - omega * y, omega * x - y],
            PlanarField::Square { .. } => {
                let d = 1.0 + x * x + y * y;
                [(x * x - y * y) / d, 2.0 * x * y / d]
            }
        }
    }

    /// `φ^μ_T(u)` by classical RK4 with `steps` steps.
    pub fn flow(&self, mu: f64, period: f64, u: [f64; 2], steps: usize) -> [f64; 2] {
        let h = period / steps as f64;
        let f = |t: f64, v: [f64; 2]| {
            let r = self.eval(t, period, v);
            [mu * r[0], mu * r[1]]
        };
        let mut v = u;
        for j in 0..steps {
            let t = j as f64 * h;
            let k1 = f(t, v);
            let k2 = f(
                t + 0.5 * h,
                [v[0] + 0.5 * h * k1[0], v[1] + 0.5 * h * k1[1]],
            );
            let k3 = f(
                t + 0.5 * h,
                [v[0] + 0.5 * h * k2[0], v[1] + 0.5 * h * k2[1]],
            );
            let k4 = f(t + h, [v[0] + h * k3[0], v[1] + h * k3[1]]);
            for i in 0..2 {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingEntry {
    pub mu: f64,
    pub degree: Option<i32>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub field: PlanarField,
    pub period: f64,
    pub averaged_degree: i32,
    pub entries: Vec<AveragingEntry>,
    /// Largest `μ` from which the degrees agree for every smaller tested `μ`.
    pub mu_star: Option<f64>,
}

/// Compares `deg_B(I − φ^μ_T, U)` with `deg_B(−f̂, U)` along a decreasing
/// `μ` ladder.
pub fn verify_kras_averaging(
    field: &PlanarField,
    period: f64,
    domain: &Domain,
    mu_ladder: &[f64],
) -> Result<AveragingReport> {
    if domain.dim() != 2 {
        return Err(invalid("averaging check is planar"));
    }
    if !(period > 0.0) {
        return Err(invalid("period must be positive"));
    }
    if mu_ladder.is_empty()
        || mu_ladder.windows(2).any(|w| !(w[1] < w[0]))
        || mu_ladder.iter().any(|m| !(*m > 0.0))
    {
        return Err(invalid("mu ladder must be positive and decreasing"));
    }
    let opts = DegreeOptions::default();
    let neg = |x: &[f64]| {
        let v = field.averaged([x[0], x[1]]);
        vec![-v[0], -v[1]]
    };
    let averaged_degree = brouwer_degree(&neg, domain, &opts)?.value;
    let mut entries = Vec::new();
    for &mu in mu_ladder {
        let disp = |x: &[f64]| {
            let p = field.flow(mu, period, [x[0], x[1]], 400);
            vec![x[0] - p[0], x[1] - p[1]]
        };
        entries.push(match brouwer_degree(&disp, domain, &opts) {
            Ok(d) => AveragingEntry {
                mu,
                degree: Some(d.value),
                skipped: None,
            },
            Err(e @ Error::BoundaryZero { .. }) => AveragingEntry {
                mu,
                degree: None,
                skipped: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        });
    }
    let mut mu_star = None;
    for e in entries.iter().rev() {
        match e.degree {
            Some(d) if d == averaged_degree => mu_star = Some(e.mu),
            Some(_) => break,
            None => {}
        }
    }
    Ok(AveragingReport {
        field: *field,
        period,
        averaged_degree,
        entries,
        mu_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Scheme;

    fn opts() -> DegreeOptions {
        DegreeOptions::default()
    }

    #[test]
    fn normalization_and_orientation() {
        for d in 1..=3 {
            let id = |x: &[f64]| x.to_vec();
            assert_eq!(
                brouwer_degree(&id, &Domain::cube(d, 1.0), &opts())
                    .unwrap()
                    .value,
                1
            );
            let neg = |x: &[f64]| x.iter().map(|v| -v).collect();
            let want = if d % 2 == 0 { 1 } else { -1 };
            assert_eq!(
                brouwer_degree(&neg, &Domain::cube(d, 1.0), &opts())
                    .unwrap()
                    .value,
                want
            );
            assert_eq!(
                brouwer_degree(&id, &Domain::ball(d, 0.5), &opts())
                    .unwrap()
                    .value,
                1
            );
        }
    }

    #[test]
    fn square_map_winds_twice() {
        let sq = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]];
        let r = brouwer_degree(&sq, &Domain::cube(2, 1.0), &opts()).unwrap();
        assert_eq!(r.value, 2);
        assert_eq!(r.rigor_flag, Rigor::Certified);
        assert_eq!(
            brouwer_degree(&sq, &Domain::ball(2, 1.0), &opts())
                .unwrap()
                .value,
            2
        );
        // zero off the domain
        let off = |x: &[f64]| vec![x[0] - 3.0, x[1]];
        assert_eq!(
            brouwer_degree(&off, &Domain::cube(2, 1.0), &opts())
                .unwrap()
                .value,
            0
        );
    }

    #[test]
    fn boundary_zero_is_an_error() {
        let f = |x: &[f64]| vec![x[0] - 1.0];
        assert!(matches!(
            brouwer_degree(&f, &Domain::cube(1, 1.0), &opts()),
            Err(Error::BoundaryZero { .. })
        ));
        let g = |x: &[f64]| vec![x[0] - 1.0, x[1]];
        assert!(matches!(
            brouwer_degree(&g, &Domain::cube(2, 1.0), &opts()),
            Err(Error::BoundaryZero { .. })
        ));
        let h = |x: &[f64]| vec![x[0], x[1], x[2] - 1.0];
        assert!(matches!(
            brouwer_degree(&h, &Domain::cube(3, 1.0), &opts()),
            Err(Error::BoundaryZero { .. })
        ));
    }

    #[test]
    fn additivity_over_split_boxes() {
        let f = |x: &[f64]| vec![x[0] * x[0] - 0.25];
        let whole = brouwer_degree(&f, &Domain::cube(1, 1.0), &opts())
            .unwrap()
            .value;
        let left = brouwer_degree(
            &f,
            &Domain::Box {
                lo: vec![-1.0],
                hi: vec![0.1],
            },
            &opts(),
        )
        .unwrap()
        .value;
        let right = brouwer_degree(
            &f,
            &Domain::Box {
                lo: vec![0.1],
                hi: vec![1.0],
            },
            &opts(),
        )
        .unwrap()
        .value;
        assert_eq!((whole, left, right), (0, -1, 1));
        let g = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1] - 0.25, 2.0 * x[0] * x[1]];
        let whole = brouwer_degree(&g, &Domain::cube(2, 1.0), &opts())
            .unwrap()
            .value;
        let l = brouwer_degree(
            &g,
            &Domain::Box {
                lo: vec![-1.0, -1.0],
                hi: vec![0.1, 1.0],
            },
            &opts(),
        )
        .unwrap()
        .value;
        let r = brouwer_degree(
            &g,
            &Domain::Box {
                lo: vec![0.1, -1.0],
                hi: vec![1.0, 1.0],
            },
            &opts(),
        )
        .unwrap()
        .value;
        assert_eq!(whole, 2);
        assert_eq!(l + r, whole);
    }

    #[test]
    fn homotopy_invariance() {
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let h = move |x: &[f64]| {
                vec![
                    x[0] + s * 0.4 * sin(3.0 * x[1]),
                    x[1] - s * 0.3 * x[0] * x[0],
                ]
            };
            assert_eq!(
                brouwer_degree(&h, &Domain::cube(2, 1.0), &opts())
                    .unwrap()
                    .value,
                1
            );
        }
    }

    #[test]
    fn product_maps_multiply() {
        let f = |x: &[f64]| vec![-x[0]];
        let g = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1] - 0.25, 2.0 * x[0] * x[1]];
        let df = brouwer_degree(&f, &Domain::cube(1, 1.0), &opts())
            .unwrap()
            .value;
        let dg = brouwer_degree(&g, &Domain::cube(2, 1.0), &opts())
            .unwrap()
            .value;
        let fg = |x: &[f64]| {
            let mut v = f(&x[..1]);
            v.extend(g(&x[1..]));
            v
        };
        let r = brouwer_degree(&fg, &Domain::cube(3, 1.0), &opts()).unwrap();
        assert_eq!(r.method, DegreeMethod::RegularSum);
        assert_eq!(r.value, df * dg);
        assert_eq!(r.value, -2);
        let pair = |x: &[f64]| vec![x[0], -x[1]];
        assert_eq!(
            brouwer_degree(&pair, &Domain::cube(2, 1.0), &opts())
                .unwrap()
                .value,
            -1
        );
    }

    #[test]
    fn sign_sum_equals_winding_in_the_plane() {
        let g = |x: &[f64]| {
            vec![
                x[0] * x[0] - x[1] * x[1] - 0.25,
                2.0 * x[0] * x[1] + 0.1 * x[0],
            ]
        };
        let w = brouwer_degree(&g, &Domain::cube(2, 1.0), &opts())
            .unwrap()
            .value;
        let s = regular_sum(&g, &Domain::cube(2, 1.0), &opts())
            .unwrap()
            .value;
        assert_eq!(w, s);
    }

    #[test]
    fn halton_is_in_unit_cube_and_distinct() {
        let a = halton(0, 5);
        let b = halton(1, 5);
        assert!(a.iter().chain(&b).all(|v| (0.0..1.0).contains(v)));
        assert_ne!(a, b);
        assert_eq!(halton(0, 2), vec![0.5, 1.0 / 3.0]);
    }

    fn model(k: usize) -> Model {
        Model {
            length: PI,
            c: 0.5,
            alpha: 0.5,
            resonance: Resonance::Index(k),
            grid_factor: 4,
        }
    }

    #[test]
    fn predicted_degrees() {
        let d1 = model(1).decompose(8).unwrap();
        assert_eq!(predicted_degree(&d1, GCondition::G1).unwrap(), -1);
        assert_eq!(predicted_degree(&d1, GCondition::G2).unwrap(), 1);
        let d2 = model(2).decompose(8).unwrap();
        assert_eq!(predicted_degree(&d2, GCondition::G1).unwrap(), 1);
        let nr = Model {
            resonance: Resonance::Lambda(2.0),
            ..model(1)
        }
        .decompose(8)
        .unwrap();
        assert!(predicted_degree(&nr, GCondition::G1).is_err());
    }

    #[test]
    fn averaged_degree_signs() {
        let d = model(1).decompose(8).unwrap();
        let a = averaged_degree(&NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0), &d, 5.0).unwrap();
        assert_eq!((a.fhat.value, a.assembled), (1, -1));
        let b = averaged_degree(&NonlinearitySpec::arctan(-1.0, 1.0, 0.1, 1.0), &d, 5.0).unwrap();
        assert_eq!((b.fhat.value, b.assembled), (-1, 1));
        // F̂ vanishes identically
        assert!(averaged_degree(&NonlinearitySpec::zero(1.0), &d, 5.0).is_err());
    }

    #[test]
    fn linear_map_degree_matches_search() {
        let m = Model {
            resonance: Resonance::Lambda(2.5),
            ..model(1)
        };
        let f = NonlinearitySpec::zero(1.0);
        let settings = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 64.0);
        let pbox = PhaseBox {
            kernel_radius: 1.0,
            q_radius: 3.0,
        };
        let sopts = SearchOptions {
            starts: 4,
            ..SearchOptions::default()
        };
        let lad = poincare_degree(&f, &m, &pbox, &[4, 8], &settings, &sopts).unwrap();
        let want = linear_degree(&m.decompose(4).unwrap(), 1.0).unwrap();
        assert_eq!(want, -1);
        assert_eq!(lad.require_stable().unwrap(), want);
        let fp = &lad.searches[0].fixed_points;
        assert_eq!(fp.len(), 1);
        assert!(fp[0].state.to_flat().iter().all(|v| v.abs() < 1e-9));
        let below = Model {
            resonance: Resonance::Lambda(0.5),
            ..model(1)
        };
        assert_eq!(linear_degree(&below.decompose(4).unwrap(), 1.0).unwrap(), 1);
        assert!(linear_degree(&model(1).decompose(4).unwrap(), 1.0).is_err());
    }

    #[test]
    fn unstable_ladder_is_reported() {
        let lad = TruncationLadder {
            n_values: vec![4, 8],
            degrees: vec![1, -1],
            stable: false,
            rigor_flag: Rigor::Certified,
            searches: vec![],
        };
        assert!(matches!(
            lad.require_stable(),
            Err(Error::UnstableLadder { .. })
        ));
    }

    #[test]
    fn averaging_linear_sink() {
        let r = verify_kras_averaging(
            &PlanarField::LinearSink,
            1.0,
            &Domain::cube(2, 1.0),
            &[1.0, 0.5, 0.25],
        )
        .unwrap();
        assert_eq!(r.averaged_degree, 1);
        assert!(r.entries.iter().all(|e| e.degree == Some(1)));
        assert_eq!(r.mu_star, Some(1.0));
    }

    #[test]
    fn averaging_rotation_and_square() {
        let mus: Vec<f64> = (0..7).map(|j| 1.0 / (1u32 << j) as f64).collect();
        let rot = PlanarField::RotationSink {
            omega: 2.0,
            eps: 0.3,
        };
        let r = verify_kras_averaging(&rot, 1.0, &Domain::cube(2, 1.0), &mus).unwrap();
        assert_eq!(r.averaged_degree, 1);
        assert!(r.mu_star.is_some());
        let sq = PlanarField::Square { eps: 0.05 };
        let r = verify_kras_averaging(&sq, 1.0, &Domain::ball(2, 1.0), &mus).unwrap();
        assert_eq!(r.averaged_degree, 2);
        assert!(r.mu_star.unwrap() > 0.0, "{r:?}");
    }
}
