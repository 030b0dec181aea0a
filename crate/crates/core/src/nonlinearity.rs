//! Bounded, Lipschitz, T-periodic scalar nonlinearities `f(t, x, s)` and the
//! induced Nemitskii operator on eigen-coordinates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use libm::{atan, cos, fabs, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operator::{CoeffVec, EigenBasis};

/// Spatial factor `g(x)` multiplying the time forcing, or the profile `y₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialProfile {
    Constant(f64),
    /// `Σ c_i φ_i(x)` for eigenfunctions of the interval `(0, length)`.
    Modes {
        length: f64,
        coeffs: Vec<(usize, f64)>,
    },
}

impl Default for SpatialProfile {
    fn default() -> Self {
        SpatialProfile::Constant(1.0)
    }
}

impl SpatialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpatialProfile::Constant(v) => *v,
            SpatialProfile::Modes { length, coeffs } => {
                let amp = sqrt(2.0 / length);
                coeffs
                    .iter()
                    .map(|(i, c)| c * amp * sin(*i as f64 * PI * x / length))
                    .sum()
            }
        }
    }

    /// Upper bound of `|g|`.
    pub fn sup(&self) -> f64 {
        match self {
            SpatialProfile::Constant(v) => fabs(*v),
            SpatialProfile::Modes { length, coeffs } => {
                sqrt(2.0 / length) * coeffs.iter().map(|(_, c)| fabs(*c)).sum::<f64>()
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            SpatialProfile::Constant(v) => *v == 0.0,
            SpatialProfile::Modes { coeffs, .. } => coeffs.iter().all(|(_, c)| *c == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Family {
    /// `a·atan(b·s) + e·cos(2πt/T)·g(x)`.
    Arctan {
        a: f64,
        b: f64,
        #[serde(default)]
        e: f64,
        #[serde(default)]
        profile: SpatialProfile,
    },
    /// `a·s/(1 + s²)`.
    Rational { a: f64 },
    /// `y₀(x)`.
    KernelConst { profile: SpatialProfile },
    /// Piecewise linear in `s` through `(s_nodes[j], values[j])`, constant
    /// beyond the end nodes.
    CustomTable { s_nodes: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub family: Family,
    pub period: f64,
}

impl NonlinearitySpec {
    pub fn new(family: Family, period: f64) -> Result<Self> {
        let spec = NonlinearitySpec { family, period };
        spec.validate()?;
        Ok(spec)
    }

    /// `f ≡ 0`.
    pub fn zero(period: f64) -> Self {
        NonlinearitySpec {
            family: Family::KernelConst {
                profile: SpatialProfile::Constant(0.0),
            },
            period,
        }
    }

    pub fn arctan(a: f64, b: f64, e: f64, period: f64) -> Self {
        NonlinearitySpec {
            family: Family::Arctan {
                a,
                b,
                e,
                profile: SpatialProfile::Constant(1.0),
            },
            period,
        }
    }

    pub fn rational(a: f64, period: f64) -> Self {
        NonlinearitySpec {
            family: Family::Rational { a },
            period,
        }
    }

    pub fn kernel_const(profile: SpatialProfile, period: f64) -> Self {
        NonlinearitySpec {
            family: Family::KernelConst { profile },
            period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(invalid("period must be positive"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.family {
            Family::Arctan { a, b, e, profile } => {
                if !finite(&[*a, *b, *e]) {
                    return Err(invalid("arctan parameters must be finite"));
                }
                validate_profile(profile)
            }
            Family::Rational { a } => {
                if !a.is_finite() {
                    return Err(invalid("rational amplitude must be finite"));
                }
                Ok(())
            }
            Family::KernelConst { profile } => validate_profile(profile),
            Family::CustomTable { s_nodes, values } => {
                if s_nodes.is_empty() || s_nodes.len() != values.len() {
                    return Err(invalid(
                        "custom table needs matching, non-empty node and value lists",
                    ));
                }
                if !finite(s_nodes) || !finite(values) {
                    return Err(invalid("custom table entries must be finite"));
                }
                if s_nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("custom table nodes must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn forcing(&self, t: f64) -> f64 {
        cos(2.0 * PI * t / self.period)
    }

    /// `f(t, x, s)`.
    pub fn eval(&self, t: f64, x: f64, s: f64) -> f64 {
        match &self.family {
            Family::Arctan { a, b, e, profile } => {
                let mut v = a * atan(b * s);
                if *e != 0.0 {
                    v += e * self.forcing(t) * profile.eval(x);
                }
                v
            }
            Family::Rational { a } => a * s / (1.0 + s * s),
            Family::KernelConst { profile } => profile.eval(x),
            Family::CustomTable { s_nodes, values } => table_eval(s_nodes, values, s),
        }
    }

    /// Bound `m` with `|f| ≤ m`.
    pub fn bound(&self) -> f64 {
        match &self.family {
            Family::Arctan { a, e, profile, .. } => fabs(*a) * FRAC_PI_2 + fabs(*e) * profile.sup(),
            Family::Rational { a } => 0.5 * fabs(*a),
            Family::KernelConst { profile } => profile.sup(),
            Family::CustomTable { values, .. } => {
                values.iter().map(|v| fabs(*v)).fold(0.0, f64::max)
            }
        }
    }

    /// Lipschitz constant `L` in `s`.
    pub fn lipschitz(&self) -> f64 {
        match &self.family {
            Family::Arctan { a, b, .. } => fabs(a * b),
            Family::Rational { a } => fabs(*a),
            Family::KernelConst { .. } => 0.0,
            Family::CustomTable { s_nodes, values } => s_nodes
                .windows(2)
                .zip(values.windows(2))
                .map(|(s, v)| fabs(v[1] - v[0]) / (s[1] - s[0]))
                .fold(0.0, f64::max),
        }
    }

    /// `f₊(t, x) = lim_{s→+∞} f(t, x, s)`.
    pub fn f_plus(&self, t: f64, x: f64) -> Option<f64> {
        self.limit(t, x, 1.0)
    }

    /// `f₋(t, x) = lim_{s→−∞} f(t, x, s)`.
    pub fn f_minus(&self, t: f64, x: f64) -> Option<f64> {
        self.limit(t, x, -1.0)
    }

    fn limit(&self, t: f64, x: f64, dir: f64) -> Option<f64> {
        match &self.family {
            Family::Arctan { a, b, e, profile } => {
                let sign = if *b > 0.0 {
                    1.0
                } else if *b < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Some(dir * a * FRAC_PI_2 * sign + e * self.forcing(t) * profile.eval(x))
            }
            Family::Rational { .. } => Some(0.0),
            Family::KernelConst { profile } => Some(profile.eval(x)),
            Family::CustomTable { values, .. } => Some(if dir > 0.0 {
                *values.last().unwrap()
            } else {
                values[0]
            }),
        }
    }

    /// `f_∞(t, x) = lim_{|s|→∞} f(t, x, s)·s` where it exists and is finite.
    pub fn f_infty(&self, _t: f64, _x: f64) -> Option<f64> {
        match &self.family {
            Family::Arctan { a, b, e, .. } => {
                if *a * *b == 0.0 && *e == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Family::Rational { a } => Some(*a),
            Family::KernelConst { profile } => profile.is_zero().then_some(0.0),
            Family::CustomTable { values, .. } => {
                (values[0] == 0.0 && *values.last().unwrap() == 0.0).then_some(0.0)
            }
        }
    }

    pub fn has_infty_limit(&self) -> bool {
        self.f_infty(0.0, 0.0).is_some()
    }
}

fn validate_profile(p: &SpatialProfile) -> Result<()> {
    match p {
        SpatialProfile::Constant(v) if v.is_finite() => Ok(()),
        SpatialProfile::Constant(_) => Err(invalid("profile constant must be finite")),
        SpatialProfile::Modes { length, coeffs } => {
            if !(*length > 0.0) {
                return Err(invalid("profile length must be positive"));
            }
            if coeffs.iter().any(|(i, c)| *i == 0 || !c.is_finite()) {
                return Err(invalid(
                    "profile modes are 1-based with finite coefficients",
                ));
            }
            Ok(())
        }
    }
}

fn table_eval(s_nodes: &[f64], values: &[f64], s: f64) -> f64 {
    let n = s_nodes.len();
    if s <= s_nodes[0] {
        return values[0];
    }
    if s >= s_nodes[n - 1] {
        return values[n - 1];
    }
    let j = s_nodes.partition_point(|v| *v <= s) - 1;
    let w = (s - s_nodes[j]) / (s_nodes[j + 1] - s_nodes[j]);
    values[j] + w * (values[j + 1] - values[j])
}

/// Nemitskii operator `u ↦ Π_N f(t, ·, u(·))` on a fixed basis.
#[derive(Debug, Clone)]
pub struct Nemitskii {
    pub spec: NonlinearitySpec,
    nodes: Vec<f64>,
    /// `w_j φ_i(x_j)`, row per mode.
    weighted: Vec<Vec<f64>>,
    /// `φ_i(x_j)`, row per mode.
    values: Vec<Vec<f64>>,
    /// Precomputed `g(x_j)` for the time forcing, or `y₀(x_j)`.
    profile: Vec<f64>,
    /// Coefficients of `Π_N y₀` for `KernelConst`.
    constant: Option<Vec<f64>>,
}

impl Nemitskii {
    pub fn new(spec: &NonlinearitySpec, basis: &EigenBasis) -> Result<Self> {
        spec.validate()?;
        let values: Vec<Vec<f64>> = basis.modes.iter().map(|m| m.grid_values.clone()).collect();
        let weighted = basis
            .modes
            .iter()
            .map(|m| {
                m.grid_values
                    .iter()
                    .zip(&basis.quad_weights)
                    .map(|(p, w)| p * w)
                    .collect()
            })
            .collect();
        let profile: Vec<f64> = match &spec.family {
            Family::Arctan { profile, .. } | Family::KernelConst { profile } => {
                basis.quad_nodes.iter().map(|x| profile.eval(*x)).collect()
            }
            _ => vec![0.0; basis.grid_len()],
        };
        let mut op = Nemitskii {
            spec: spec.clone(),
            nodes: basis.quad_nodes.clone(),
            weighted,
            values,
            profile,
            constant: None,
        };
        if let Family::KernelConst { .. } = spec.family {
            let g = op.profile.clone();
            op.constant = Some(op.project(&g));
        }
        Ok(op)
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    fn project(&self, g: &[f64]) -> Vec<f64> {
        self.weighted
            .iter()
            .map(|row| row.iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Writes the coefficients of `F(t, u)` into `out`.
    pub fn eval_into(&self, t: f64, u: &[f64], out: &mut [f64]) {
        if let Some(c) = &self.constant {
            out.copy_from_slice(c);
            return;
        }
        let g = self.grid_values(t, u);
        for (o, row) in out.iter_mut().zip(&self.weighted) {
            *o = row.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
    }

    /// Pointwise values `f(t, x_j, u(x_j))`.
    pub fn grid_values(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let mut ug = vec![0.0; self.nodes.len()];
        for (c, row) in u.iter().zip(&self.values) {
            if *c != 0.0 {
                for (g, p) in ug.iter_mut().zip(row) {
                    *g += c * p;
                }
            }
        }
        match &self.spec.family {
            Family::Arctan { a, b, e, .. } => {
                let ft = if *e != 0.0 {
                    e * self.spec.forcing(t)
                } else {
                    0.0
                };
                for (g, p) in ug.iter_mut().zip(&self.profile) {
                    *g = a * atan(b * *g) + ft * p;
                }
            }
            Family::KernelConst { .. } => ug.copy_from_slice(&self.profile),
            _ => {
                for (g, x) in ug.iter_mut().zip(&self.nodes) {
                    *g = self.spec.eval(t, *x, *g);
                }
            }
        }
        ug
    }

    pub fn eval(&self, t: f64, u: &CoeffVec) -> CoeffVec {
        let mut out = vec![0.0; self.modes()];
        self.eval_into(t, &u.0, &mut out);
        CoeffVec(out)
    }
}

/// Convenience wrapper `F(t, u)` for a one-off evaluation.
pub fn nemitskii(
    f: &NonlinearitySpec,
    t: f64,
    u: &CoeffVec,
    basis: &EigenBasis,
) -> Result<CoeffVec> {
    if u.len() != basis.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: basis.len(),
            got: u.len(),
        });
    }
    Ok(Nemitskii::new(f, basis)?.eval(t, u))
}
