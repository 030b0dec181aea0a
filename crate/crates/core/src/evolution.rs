//! Mild solutions of `ẇ = −𝒜w + (0, F(t, u))` on the Galerkin truncation,
//! Poincaré operators and the reduced kernel flow.

use alloc::vec;
use alloc::vec::Vec;

use libm::ceil;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expm::{step_weights, Roots, StepWeights};
use crate::linalg::Mat2;
use crate::nonlinearity::{Nemitskii, NonlinearitySpec};
use crate::operator::CoeffVec;
use crate::spectral::{Decomposition, ModeClass};
use crate::state::StateE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    ExpEuler,
    ExpMidpoint,
    Rk4Ref,
}

impl Scheme {
    pub fn order(&self) -> u32 {
        match self {
            Scheme::ExpEuler => 1,
            Scheme::ExpMidpoint => 2,
            Scheme::Rk4Ref => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub scheme: Scheme,
    pub h: f64,
    /// Global tolerance for step halving; `None` integrates once at `h`.
    pub tol: Option<f64>,
    pub max_halvings: u32,
}

impl IntegratorSettings {
    /// `EXP_MIDPOINT`, `h = T/256`, `tol = 1e-8`.
    pub fn for_period(period: f64) -> Self {
        IntegratorSettings {
            scheme: Scheme::ExpMidpoint,
            h: period / 256.0,
            tol: Some(1e-8),
            max_halvings: 8,
        }
    }

    pub fn fixed(scheme: Scheme, h: f64) -> Self {
        IntegratorSettings {
            scheme,
            h,
            tol: None,
            max_halvings: 0,
        }
    }

    pub fn validate(&self, period: f64) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("step must be positive"));
        }
        if self.h > period / 8.0 * (1.0 + 1e-12) {
            return Err(invalid("step must not exceed T/8"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(invalid("tolerance must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: Scheme,
    /// Step actually used.
    pub h: f64,
    /// Step-halving estimate of the global error at the final time.
    pub error_estimate: Option<f64>,
    pub halvings: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateE>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateE {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }
}

/// Velocity forcing `F(t, a)` in eigen-coordinates.
pub trait Forcing {
    fn eval(&self, t: f64, a: &[f64], out: &mut [f64]);
}

impl Forcing for Nemitskii {
    fn eval(&self, t: f64, a: &[f64], out: &mut [f64]) {
        self.eval_into(t, a, out)
    }
}

/// `G(s, t, u) = PF(t, sQu + Pu) + s·QF(t, sQu + Pu)`.
pub struct Homotopy<'a> {
    inner: &'a Nemitskii,
    s: f64,
    kernel: Vec<bool>,
}

impl<'a> Homotopy<'a> {
    pub fn new(inner: &'a Nemitskii, dec: &Decomposition, s: f64) -> Self {
        let kernel = dec
            .blocks
            .iter()
            .map(|b| b.class == ModeClass::Kernel)
            .collect();
        Homotopy { inner, s, kernel }
    }
}

impl Forcing for Homotopy<'_> {
    fn eval(&self, t: f64, a: &[f64], out: &mut [f64]) {
        let deformed: Vec<f64> = a
            .iter()
            .zip(&self.kernel)
            .map(|(v, k)| if *k { *v } else { self.s * v })
            .collect();
        self.inner.eval_into(t, &deformed, out);
        for (o, k) in out.iter_mut().zip(&self.kernel) {
            if !*k {
                *o *= self.s;
            }
        }
    }
}

/// `μ·PF(t, u₀)` on kernel coordinates only.
struct KernelForcing<'a> {
    inner: &'a Nemitskii,
    kernel: &'a [usize],
    mu: f64,
    modes: usize,
}

impl Forcing for KernelForcing<'_> {
    fn eval(&self, t: f64, a: &[f64], out: &mut [f64]) {
        let mut full = vec![0.0; self.modes];
        for (v, &i) in a.iter().zip(self.kernel) {
            full[i - 1] = *v;
        }
        let mut f = vec![0.0; self.modes];
        self.inner.eval_into(t, &full, &mut f);
        for (o, &i) in out.iter_mut().zip(self.kernel) {
            *o = self.mu * f[i - 1];
        }
    }
}

/// Fixed-step integrator for block-diagonal generators.
struct Engine<'a, F: Forcing> {
    mats: &'a [Mat2],
    forcing: &'a F,
    scheme: Scheme,
    h: f64,
    full: Vec<StepWeights>,
    half: Vec<StepWeights>,
    substeps: usize,
}

impl<'a, F: Forcing> Engine<'a, F> {
    fn new(mats: &'a [Mat2], forcing: &'a F, scheme: Scheme, h: f64) -> Self {
        let (full, half, substeps) = match scheme {
            Scheme::Rk4Ref => {
                let rho = mats
                    .iter()
                    .map(|m| {
                        let (a, b) = Roots::of(m).pair();
                        a.norm().max(b.norm())
                    })
                    .fold(0.0, f64::max);
                (
                    Vec::new(),
                    Vec::new(),
                    (ceil(h * rho / 0.5) as usize).max(1),
                )
            }
            _ => (
                mats.iter().map(|m| step_weights(m, h)).collect(),
                mats.iter().map(|m| step_weights(m, 0.5 * h)).collect(),
                1,
            ),
        };
        Engine {
            mats,
            forcing,
            scheme,
            h,
            full,
            half,
            substeps,
        }
    }

    fn step(&self, t: f64, w: &mut StateE) {
        let n = self.mats.len();
        let mut f0 = vec![0.0; n];
        match self.scheme {
            Scheme::ExpEuler => {
                self.forcing.eval(t, &w.a.0, &mut f0);
                for i in 0..n {
                    let sw = &self.full[i];
                    let v = sw.s.apply(w.pair(i));
                    w.set_pair(
                        i,
                        [
                            v[0] + sw.phi1.get(0, 1) * f0[i],
                            v[1] + sw.phi1.get(1, 1) * f0[i],
                        ],
                    );
                }
            }
            Scheme::ExpMidpoint => {
                self.forcing.eval(t, &w.a.0, &mut f0);
                let mut amid = vec![0.0; n];
                for i in 0..n {
                    let hw = &self.half[i];
                    let p = w.pair(i);
                    amid[i] =
                        hw.s.get(0, 0) * p[0] + hw.s.get(0, 1) * p[1] + hw.phi1.get(0, 1) * f0[i];
                }
                let mut fm = vec![0.0; n];
                self.forcing.eval(t + 0.5 * self.h, &amid, &mut fm);
                let k = 2.0 / self.h;
                for i in 0..n {
                    let sw = &self.full[i];
                    let v = sw.s.apply(w.pair(i));
                    let (p0, p1) = (sw.phi1.get(0, 1), sw.phi1.get(1, 1));
                    let (q0, q1) = (k * sw.psi.get(0, 1), k * sw.psi.get(1, 1));
                    w.set_pair(
                        i,
                        [
                            v[0] + (p0 - q0) * f0[i] + q0 * fm[i],
                            v[1] + (p1 - q1) * f0[i] + q1 * fm[i],
                        ],
                    );
                }
            }
            Scheme::Rk4Ref => {
                let hs = self.h / self.substeps as f64;
                for j in 0..self.substeps {
                    self.rk4(t + j as f64 * hs, hs, w);
                }
            }
        }
    }

    fn rhs(&self, t: f64, w: &StateE, out: &mut StateE) {
        let n = self.mats.len();
        let mut f = vec![0.0; n];
        self.forcing.eval(t, &w.a.0, &mut f);
        for i in 0..n {
            let v = self.mats[i].apply(w.pair(i));
            out.set_pair(i, [-v[0], -v[1] + f[i]]);
        }
    }

    fn rk4(&self, t: f64, h: f64, w: &mut StateE) {
        let n = self.mats.len();
        let mut k1 = StateE::zeros(n);
        let mut k2 = StateE::zeros(n);
        let mut k3 = StateE::zeros(n);
        let mut k4 = StateE::zeros(n);
        self.rhs(t, w, &mut k1);
        let tmp = w.add(&k1.scaled(0.5 * h));
        self.rhs(t + 0.5 * h, &tmp, &mut k2);
        let tmp = w.add(&k2.scaled(0.5 * h));
        self.rhs(t + 0.5 * h, &tmp, &mut k3);
        let tmp = w.add(&k3.scaled(h));
        self.rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            let upd =
                |x: f64, a: f64, b: f64, c: f64, d: f64| x + h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
            w.a.0[i] = upd(w.a.0[i], k1.a.0[i], k2.a.0[i], k3.a.0[i], k4.a.0[i]);
            w.b.0[i] = upd(w.b.0[i], k1.b.0[i], k2.b.0[i], k3.b.0[i], k4.b.0[i]);
        }
    }

    /// Integrates over `[t0, t0 + steps·h]`, optionally recording every state.
    fn run(
        &self,
        w0: &StateE,
        t0: f64,
        steps: usize,
        record: bool,
    ) -> Result<(Vec<f64>, Vec<StateE>)> {
        let mut w = w0.clone();
        let mut times = vec![t0];
        let mut states = vec![w0.clone()];
        for j in 0..steps {
            let t = t0 + j as f64 * self.h;
            self.step(t, &mut w);
            if !w.is_finite() {
                return Err(Error::NonFinite { t: t + self.h });
            }
            if record {
                times.push(t0 + (j + 1) as f64 * self.h);
                states.push(w.clone());
            }
        }
        if !record {
            times.push(t0 + steps as f64 * self.h);
            states.push(w);
        }
        Ok((times, states))
    }
}

fn step_count(span: f64, h: f64) -> usize {
    (ceil(span / h - 1e-9) as usize).max(1)
}

/// Per-mode generators of the truncated `𝒜`.
pub fn generators(dec: &Decomposition) -> Vec<Mat2> {
    dec.blocks.iter().map(|b| b.matrix).collect()
}

/// Generic driver with optional step halving.
#[allow(clippy::too_many_arguments)]
fn integrate_with<F: Forcing>(
    mats: &[Mat2],
    forcing: &F,
    w0: &StateE,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
    record: bool,
    err_norm: &dyn Fn(&StateE, &StateE) -> f64,
) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(invalid("end time must exceed start time"));
    }
    if !(settings.h > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let span = t1 - t0;
    let mut steps = step_count(span, settings.h);
    let run = |steps: usize| {
        let h = span / steps as f64;
        Engine::new(mats, forcing, settings.scheme, h).run(w0, t0, steps, record)
    };
    let (mut times, mut states) = run(steps)?;
    let mut estimate = None;
    let mut halvings = 0;
    if let Some(tol) = settings.tol {
        let factor = ((1u64 << settings.scheme.order()) - 1) as f64;
        loop {
            if halvings >= settings.max_halvings {
                return Err(Error::ToleranceNotMet {
                    tol,
                    estimate: estimate.unwrap_or(f64::INFINITY),
                    halvings,
                });
            }
            steps *= 2;
            halvings += 1;
            let (t2, s2) = run(steps)?;
            let e = err_norm(states.last().unwrap(), s2.last().unwrap()) / factor;
            times = t2;
            states = s2;
            estimate = Some(e);
            if e <= tol {
                break;
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            scheme: settings.scheme,
            h: span / steps as f64,
            error_estimate: estimate,
            halvings,
        },
    })
}

fn check_state(w: &StateE, dec: &Decomposition) -> Result<()> {
    if w.modes() != dec.modes() || w.b.len() != dec.modes() {
        return Err(Error::DimensionMismatch {
            expected: dec.modes(),
            got: w.modes(),
        });
    }
    Ok(())
}

/// One exponential-integrator step of size `h` from time `t`.
pub fn mild_step(
    w: &StateE,
    t: f64,
    h: f64,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<StateE> {
    check_state(w, dec)?;
    if !(h > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let nem = Nemitskii::new(f, &dec.basis)?;
    let mats = generators(dec);
    let mut out = w.clone();
    Engine::new(&mats, &nem, settings.scheme, h).step(t, &mut out);
    if !out.is_finite() {
        return Err(Error::NonFinite { t: t + h });
    }
    Ok(out)
}

/// Mild solution on `[0, t_end]` sampled at every step.
pub fn integrate(
    w0: &StateE,
    t_end: f64,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    integrate_span(w0, 0.0, t_end, f, dec, settings)
}

/// Mild solution on `[t0, t1]`.
pub fn integrate_span(
    w0: &StateE,
    t0: f64,
    t1: f64,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_state(w0, dec)?;
    settings.validate(f.period)?;
    let nem = Nemitskii::new(f, &dec.basis)?;
    let mats = generators(dec);
    integrate_with(&mats, &nem, w0, t0, t1, settings, true, &|a, b| {
        dec.norm_e(&a.sub(b))
    })
}

/// Prepared time-`T` maps for repeated evaluation.
pub struct PoincareMap<'a> {
    dec: &'a Decomposition,
    nem: Nemitskii,
    mats: Vec<Mat2>,
    settings: IntegratorSettings,
    period: f64,
}

impl<'a> PoincareMap<'a> {
    pub fn new(
        f: &NonlinearitySpec,
        dec: &'a Decomposition,
        settings: &IntegratorSettings,
    ) -> Result<Self> {
        settings.validate(f.period)?;
        Ok(PoincareMap {
            dec,
            nem: Nemitskii::new(f, &dec.basis)?,
            mats: generators(dec),
            settings: *settings,
            period: f.period,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn decomposition(&self) -> &Decomposition {
        self.dec
    }

    pub fn nemitskii(&self) -> &Nemitskii {
        &self.nem
    }

    fn final_of<F: Forcing>(&self, forcing: &F, w0: &StateE) -> Result<StateE> {
        check_state(w0, self.dec)?;
        let tr = integrate_with(
            &self.mats,
            forcing,
            w0,
            0.0,
            self.period,
            &self.settings,
            false,
            &|a, b| self.dec.norm_e(&a.sub(b)),
        )?;
        Ok(tr.states.into_iter().last().unwrap())
    }

    /// `Φ_T(w0)`.
    pub fn apply(&self, w0: &StateE) -> Result<StateE> {
        self.final_of(&self.nem, w0)
    }

    /// `Ψ_T(s, w0)`.
    pub fn apply_homotopy(&self, s: f64, w0: &StateE) -> Result<StateE> {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid("homotopy parameter must lie in [0, 1]"));
        }
        let g = Homotopy::new(&self.nem, self.dec, s);
        self.final_of(&g, w0)
    }

    /// Full trajectory of one period.
    pub fn orbit(&self, w0: &StateE, periods: usize) -> Result<Trajectory> {
        check_state(w0, self.dec)?;
        integrate_with(
            &self.mats,
            &self.nem,
            w0,
            0.0,
            self.period * periods as f64,
            &self.settings,
            true,
            &|a, b| self.dec.norm_e(&a.sub(b)),
        )
    }
}

/// `Φ_T(w0) = w(T; w0)`.
pub fn poincare(
    w0: &StateE,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<StateE> {
    PoincareMap::new(f, dec, settings)?.apply(w0)
}

/// `Ψ_T(s, w0)` for the deformed nonlinearity `G(s, ·)`.
pub fn poincare_homotopy(
    s: f64,
    w0: &StateE,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<StateE> {
    PoincareMap::new(f, dec, settings)?.apply_homotopy(s, w0)
}

/// Kernel coordinates `(u₀, v₀)`, one entry per kernel mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `Θ^μ_T`: time-`T` map of `u̇₀ = μv₀`, `v̇₀ = −cμλv₀ + μPF(t, u₀)`.
pub fn kernel_flow(
    mu: f64,
    z: &KernelState,
    f: &NonlinearitySpec,
    dec: &Decomposition,
    settings: &IntegratorSettings,
) -> Result<KernelState> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(invalid("mu must lie in (0, 1]"));
    }
    let k = dec.idx_kernel.len();
    if z.u.len() != k || z.v.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: z.u.len(),
        });
    }
    if k == 0 {
        return Ok(z.clone());
    }
    settings.validate(f.period)?;
    let nem = Nemitskii::new(f, &dec.basis)?;
    let forcing = KernelForcing {
        inner: &nem,
        kernel: &dec.idx_kernel,
        mu,
        modes: dec.modes(),
    };
    let mats: Vec<Mat2> = dec
        .idx_kernel
        .iter()
        .map(|&i| dec.blocks[i - 1].matrix.scale(mu))
        .collect();
    let w0 = StateE {
        a: CoeffVec(z.u.clone()),
        b: CoeffVec(z.v.clone()),
    };
    let tr = integrate_with(
        &mats,
        &forcing,
        &w0,
        0.0,
        f.period,
        settings,
        false,
        &|a, b| a.max_abs_diff(b),
    )?;
    let w = tr.final_state();
    Ok(KernelState {
        u: w.a.0.clone(),
        v: w.b.0.clone(),
    })
}

/// `t ↦ ⟨Pu(t), cλy₀⟩ + ⟨Pv(t), y₀⟩` along a trajectory.
pub fn drift_functional(traj: &Trajectory, y0: &CoeffVec, dec: &Decomposition) -> Result<Vec<f64>> {
    if y0.len() != dec.modes() {
        return Err(Error::DimensionMismatch {
            expected: dec.modes(),
            got: y0.len(),
        });
    }
    for (i, b) in dec.blocks.iter().enumerate() {
        if b.class != ModeClass::Kernel && y0[i] != 0.0 {
            return Err(invalid("y0 must be supported on kernel modes"));
        }
    }
    let cl = dec.config.c * dec.config.lambda;
    Ok(traj
        .states
        .iter()
        .map(|w| {
            dec.idx_kernel
                .iter()
                .map(|&i| w.a[i - 1] * cl * y0[i - 1] + w.b[i - 1] * y0[i - 1])
                .sum()
        })
        .collect())
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::SpatialProfile;
    use crate::operator::build_dirichlet_laplacian;
    use crate::spectral::{decompose, DampedConfig, Projection};
    use core::f64::consts::PI;

    fn dec(n: usize, c: f64, k: usize) -> Decomposition {
        let b = build_dirichlet_laplacian(PI, n, 4 * n.max(8)).unwrap();
        let cfg = DampedConfig::resonant(&b, c, k, 0.5).unwrap();
        decompose(&b, &cfg).unwrap()
    }

    fn sample_state(n: usize, scale: f64) -> StateE {
        let mut w = StateE::zeros(n);
        for i in 0..n {
            let x = (i as f64 + 1.0) * 0.7;
            w.set_pair(
                i,
                [
                    scale * libm::sin(x) / (i as f64 + 1.0),
                    scale * libm::cos(1.3 * x),
                ],
            );
        }
        w
    }

    #[test]
    fn homogeneous_step_is_semigroup() {
        let d = dec(6, 0.5, 1);
        let w = sample_state(6, 1.0);
        let f = NonlinearitySpec::zero(1.0);
        for scheme in [Scheme::ExpEuler, Scheme::ExpMidpoint] {
            let s = IntegratorSettings::fixed(scheme, 0.01);
            let got = mild_step(&w, 0.0, 0.01, &f, &d, &s).unwrap();
            let want = d.semigroup(&w, 0.01).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn constant_forcing_on_kernel_mode_is_exact() {
        // v̇ = −cλv + 1, u̇ = v from rest: v = (1 − e^{−γt})/γ, u = t/γ − (1 − e^{−γt})/γ²
        let d = dec(4, 0.5, 1);
        let y0 = SpatialProfile::Modes {
            length: PI,
            coeffs: vec![(1, 1.0)],
        };
        let f = NonlinearitySpec::kernel_const(y0, 1.0);
        let gamma = 0.5;
        for scheme in [Scheme::ExpEuler, Scheme::ExpMidpoint] {
            let h = 0.3;
            let s = IntegratorSettings::fixed(scheme, h);
            let got = mild_step(&StateE::zeros(4), 0.0, h, &f, &d, &s).unwrap();
            let v = (1.0 - (-gamma * h).exp()) / gamma;
            let u = h / gamma - (1.0 - (-gamma * h).exp()) / (gamma * gamma);
            assert!((got.b[0] - v).abs() < 1e-10 && (got.a[0] - u).abs() < 1e-10);
        }
    }

    #[test]
    fn frozen_forcing_matches_variation_of_constants() {
        // time-independent forcing vector: w(T) = S(T)w0 + Φ₁(T)(0, F)
        let d = dec(5, 0.5, 2);
        let y0 = SpatialProfile::Modes {
            length: PI,
            coeffs: vec![(1, 0.4), (2, -1.0), (4, 2.0)],
        };
        let f = NonlinearitySpec::kernel_const(y0, 1.0);
        let w0 = sample_state(5, 0.5);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 64.0);
        let got = integrate(&w0, 1.0, &f, &d, &s).unwrap();
        let mut want = StateE::zeros(5);
        let fc = [0.4, -1.0, 0.0, 2.0, 0.0];
        for (i, b) in d.blocks.iter().enumerate() {
            let w = step_weights(&b.matrix, 1.0);
            let v = w.s.apply(w0.pair(i));
            want.set_pair(
                i,
                [
                    v[0] + w.phi1.get(0, 1) * fc[i],
                    v[1] + w.phi1.get(1, 1) * fc[i],
                ],
            );
        }
        assert!(got.final_state().max_abs_diff(&want) < 1e-9);
    }

    #[test]
    fn flow_composition_and_determinism() {
        let d = dec(6, 0.5, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 128.0);
        let w0 = sample_state(6, 1.0);
        let full = integrate(&w0, 2.0, &f, &d, &s).unwrap();
        let first = integrate(&w0, 1.0, &f, &d, &s).unwrap();
        let second = integrate_span(first.final_state(), 1.0, 2.0, &f, &d, &s).unwrap();
        assert!(full.final_state().max_abs_diff(second.final_state()) < 1e-9);
        let again = integrate(&w0, 2.0, &f, &d, &s).unwrap();
        assert_eq!(full, again);
        assert_eq!(full.times[0], 0.0);
    }

    #[test]
    fn homogeneous_decay_on_e_plus() {
        let d = dec(6, 0.5, 2);
        let f = NonlinearitySpec::zero(1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 32.0);
        let w0 = d.project(&sample_state(6, 2.0), Projection::QPlus).unwrap();
        let tr = integrate(&w0, 3.0, &f, &d, &s).unwrap();
        let n0 = d.norm_e(&w0);
        for (t, w) in tr.times.iter().zip(&tr.states) {
            assert!(d.norm_e(w) <= d.m_const * (-d.delta * t).exp() * n0 + 1e-12);
        }
    }

    #[test]
    fn poincare_of_zero_forcing_is_semigroup() {
        let d = dec(6, 0.5, 1);
        let f = NonlinearitySpec::zero(1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 16.0);
        let w0 = sample_state(6, 1.0);
        let got = poincare(&w0, &f, &d, &s).unwrap();
        assert!(got.max_abs_diff(&d.semigroup(&w0, 1.0).unwrap()) < 1e-10);
        // contraction of the Q₊ part
        let w1 = w0.add(&d.project(&sample_state(6, 0.3), Projection::QPlus).unwrap());
        let g1 = poincare(&w1, &f, &d, &s).unwrap();
        let num = d.norm_e(&d.project(&got.sub(&g1), Projection::QPlus).unwrap());
        let den = d.norm_e(&d.project(&w0.sub(&w1), Projection::QPlus).unwrap());
        assert!(num <= d.m_const * (-d.delta).exp() * den);
    }

    #[test]
    fn homotopy_endpoints() {
        let d = dec(6, 0.5, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 128.0);
        let map = PoincareMap::new(&f, &d, &s).unwrap();
        let w0 = sample_state(6, 1.0);
        let one = map.apply_homotopy(1.0, &w0).unwrap();
        assert!(one.max_abs_diff(&map.apply(&w0).unwrap()) < 1e-12);
        let zero = map.apply_homotopy(0.0, &w0).unwrap();
        let lin = d.semigroup(&w0, 1.0).unwrap();
        for i in 1..6 {
            assert!((zero.a[i] - lin.a[i]).abs() < 1e-10 && (zero.b[i] - lin.b[i]).abs() < 1e-10);
        }
        let kf = kernel_flow(
            1.0,
            &KernelState {
                u: vec![w0.a[0]],
                v: vec![w0.b[0]],
            },
            &f,
            &d,
            &s,
        )
        .unwrap();
        assert!((kf.u[0] - zero.a[0]).abs() < 1e-9 && (kf.v[0] - zero.b[0]).abs() < 1e-9);
        assert!(map.apply_homotopy(1.5, &w0).is_err());
    }

    #[test]
    fn kernel_flow_limits() {
        let d = dec(4, 0.5, 1);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 64.0);
        let z = KernelState {
            u: vec![0.7],
            v: vec![-0.4],
        };
        let lin = kernel_flow(1.0, &z, &NonlinearitySpec::zero(1.0), &d, &s).unwrap();
        let e = crate::expm::neg_exp(&d.blocks[0].matrix, 1.0).apply([0.7, -0.4]);
        assert!((lin.u[0] - e[0]).abs() < 1e-12 && (lin.v[0] - e[1]).abs() < 1e-12);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0);
        let mut prev = f64::INFINITY;
        for &mu in &[0.1, 0.01, 0.001] {
            let r = kernel_flow(mu, &z, &f, &d, &s).unwrap();
            let dist = (r.u[0] - 0.7).abs() + (r.v[0] + 0.4).abs();
            assert!(dist < 2.0 * mu * 2.0, "mu={mu}: {dist}");
            assert!(dist < prev);
            prev = dist;
        }
        assert!(kernel_flow(0.0, &z, &f, &d, &s).is_err());
    }

    #[test]
    fn drift_slope_equals_norm_squared() {
        let d = dec(8, 0.5, 1);
        let y0 = SpatialProfile::Modes {
            length: PI,
            coeffs: vec![(1, 1.0)],
        };
        let f = NonlinearitySpec::kernel_const(y0, 1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpMidpoint, 1.0 / 256.0);
        let tr = integrate(&sample_state(8, 1.0), 1.0, &f, &d, &s).unwrap();
        let y = CoeffVec::unit(8, 1);
        let series = drift_functional(&tr, &y, &d).unwrap();
        assert!((fit_slope(&tr.times, &series) - 1.0).abs() < 1e-6);
        let zero = integrate(&StateE::zeros(8), 1.0, &NonlinearitySpec::zero(1.0), &d, &s).unwrap();
        assert!(drift_functional(&zero, &y, &d)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(drift_functional(&tr, &CoeffVec::unit(8, 2), &d).is_err());
    }

    #[test]
    fn settings_validation() {
        assert!(IntegratorSettings::fixed(Scheme::ExpEuler, 0.2)
            .validate(1.0)
            .is_err());
        assert!(IntegratorSettings::fixed(Scheme::ExpEuler, 0.0)
            .validate(1.0)
            .is_err());
        assert!(IntegratorSettings::for_period(1.0).validate(1.0).is_ok());
    }

    #[test]
    fn step_halving_meets_tolerance() {
        let d = dec(6, 0.5, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0);
        let s = IntegratorSettings {
            scheme: Scheme::ExpMidpoint,
            h: 1.0 / 16.0,
            tol: Some(1e-8),
            max_halvings: 10,
        };
        let tr = integrate(&sample_state(6, 1.0), 1.0, &f, &d, &s).unwrap();
        assert!(tr.meta.error_estimate.unwrap() <= 1e-8);
        let fine = integrate(
            &sample_state(6, 1.0),
            1.0,
            &f,
            &d,
            &IntegratorSettings::fixed(Scheme::Rk4Ref, 1.0 / 4096.0),
        )
        .unwrap();
        assert!(d.norm_e(&tr.final_state().sub(fine.final_state())) < 1e-7);
        let strict = IntegratorSettings {
            tol: Some(1e-15),
            max_halvings: 2,
            ..s
        };
        assert!(matches!(
            integrate(&sample_state(6, 1.0), 1.0, &f, &d, &strict),
            Err(Error::ToleranceNotMet { .. })
        ));
    }

    fn arctan_n8() -> (Decomposition, NonlinearitySpec) {
        let b = build_dirichlet_laplacian(PI, 8, 32).unwrap();
        let cfg = DampedConfig::resonant(&b, 0.5, 1, 0.5).unwrap();
        (
            decompose(&b, &cfg).unwrap(),
            NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0),
        )
    }

    #[test]
    fn euler_agrees_with_rk4_reference() {
        let (d, f) = arctan_n8();
        let w0 = StateE::zeros(8);
        let reference = integrate(
            &w0,
            1.0,
            &f,
            &d,
            &IntegratorSettings::fixed(Scheme::Rk4Ref, 1.0 / 8192.0),
        )
        .unwrap();
        let euler = integrate(
            &w0,
            1.0,
            &f,
            &d,
            &IntegratorSettings::fixed(Scheme::ExpEuler, 1.0 / 131072.0),
        )
        .unwrap();
        assert!(euler.final_state().max_abs_diff(reference.final_state()) < 1e-6);
    }

    #[test]
    fn euler_richardson_difference_is_second_order() {
        let (d, f) = arctan_n8();
        let w0 = sample_state(8, 1.0);
        let s = IntegratorSettings::fixed(Scheme::ExpEuler, 1.0);
        let diff = |h: f64| {
            let one = mild_step(&w0, 0.0, h, &f, &d, &s).unwrap();
            let half = mild_step(&w0, 0.0, h / 2.0, &f, &d, &s).unwrap();
            let two = mild_step(&half, h / 2.0, h / 2.0, &f, &d, &s).unwrap();
            d.norm_e(&one.sub(&two))
        };
        let slope = (diff(1.0 / 64.0) / diff(1.0 / 512.0)).ln() / 8f64.ln();
        assert!((slope - 2.0).abs() < 0.15, "{slope}");
    }
}
