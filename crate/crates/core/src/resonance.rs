//! Averaged kernel map, sample-based checkers for the geometric,
//! Landesman-Lazer and strong-resonance conditions, and a priori radii.

use alloc::vec;
use alloc::vec::Vec;

use libm::{pow, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::simpson;
use crate::nonlinearity::{Nemitskii, NonlinearitySpec};
use crate::operator::EigenBasis;
use crate::spectral::{Decomposition, ModeClass};

/// Time panels for the averaged map.
pub const AVERAGING_PANELS: usize = 64;
/// Spatial panels for the LL and SR integrals.
pub const SPATIAL_PANELS: usize = 16384;
/// Points of `{u > 0}` / `{u < 0}` closer than this to zero are ignored.
pub const SIGN_TOLERANCE: f64 = 1e-12;
/// Largest `|s|` on the SR lattice.
pub const SR_S_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    G1,
    G2,
    LL1,
    LL2,
    SR1,
    SR2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    HoldsOnSamples,
    Violated,
}

/// A sample at which the checked inequality failed. Vectors are full
/// coefficient vectors of length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub y: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub s: Option<f64>,
    /// Signed slack at the sample; non-positive for a violation.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub r_ladder: Vec<f64>,
    pub sample_count: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Smallest slack over the samples that decide the verdict.
    pub margin: f64,
    /// Smallest ladder radius from which every sample held (G only).
    pub threshold: Option<f64>,
    pub sample_spec: SampleSpec,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsOnSamples
    }
}

/// `x ↦ ∫₀^T PF(τ, x) dτ` on kernel coordinates.
#[derive(Debug, Clone)]
pub struct AveragedMap {
    nem: Nemitskii,
    kernel: Vec<usize>,
    period: f64,
    panels: usize,
    offset: f64,
}

impl AveragedMap {
    pub fn new(f: &NonlinearitySpec, dec: &Decomposition) -> Result<Self> {
        Ok(AveragedMap {
            nem: Nemitskii::new(f, &dec.basis)?,
            kernel: dec.idx_kernel.clone(),
            period: f.period,
            panels: AVERAGING_PANELS,
            offset: 0.0,
        })
    }

    /// Starts the quadrature at `offset` instead of 0.
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn dim(&self) -> usize {
        self.kernel.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nem.modes();
        let mut u = vec![0.0; n];
        for (v, &i) in x.iter().zip(&self.kernel) {
            u[i - 1] = *v;
        }
        let h = self.period / self.panels as f64;
        let mut acc = vec![0.0; self.kernel.len()];
        let mut out = vec![0.0; n];
        for j in 0..=self.panels {
            let w = if j == 0 || j == self.panels {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            self.nem.eval_into(self.offset + j as f64 * h, &u, &mut out);
            for (a, &i) in acc.iter_mut().zip(&self.kernel) {
                *a += w * out[i - 1];
            }
        }
        acc.iter().map(|a| a * h / 3.0).collect()
    }
}

/// `F̂(x)` for kernel coordinates `x`.
pub fn averaged_map(f: &NonlinearitySpec, dec: &Decomposition, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != dec.idx_kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: dec.idx_kernel.len(),
            got: x.len(),
        });
    }
    Ok(AveragedMap::new(f, dec)?.eval(x))
}

/// Both Landesman-Lazer verdicts from one set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlReport {
    pub ll1: ConditionReport,
    pub ll2: ConditionReport,
    pub min_value: f64,
    pub max_value: f64,
}

fn kernel_modes(basis: &EigenBasis, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > basis.len() {
        return Err(invalid("resonance index out of range"));
    }
    let lk = basis.eigenvalue(k);
    Ok((1..=basis.len())
        .filter(|&i| basis.eigenvalue(i) == lk)
        .collect())
}

/// Deterministic unit directions in `R^d`: `±e_i`, then Gaussian draws.
fn unit_directions(d: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            dirs.push(v);
        }
    }
    while dirs.len() < count {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = sqrt(v.iter().map(|a| a * a).sum());
        if n > 1e-12 {
            dirs.push(v.iter().map(|a| a / n).collect());
        }
    }
    dirs
}

fn ll_value(
    f: &NonlinearitySpec,
    basis: &EigenBasis,
    kernel: &[usize],
    coeffs: &[f64],
    t: f64,
) -> f64 {
    simpson(
        |x| {
            let u: f64 = kernel
                .iter()
                .zip(coeffs)
                .map(|(&i, c)| c * basis.eigenfunction(i, x))
                .sum();
            if u > SIGN_TOLERANCE {
                f.f_plus(t, x).unwrap_or(0.0) * u
            } else if u < -SIGN_TOLERANCE {
                f.f_minus(t, x).unwrap_or(0.0) * u
            } else {
                0.0
            }
        },
        0.0,
        basis.domain_length,
        SPATIAL_PANELS,
    )
}

/// Samples `∫_{𝓍>0} f₊𝓍 + ∫_{𝓍<0} f₋𝓍` over unit kernel elements `𝓍` and
/// times `t_j = jT/n`.
pub fn check_ll(
    f: &NonlinearitySpec,
    basis: &EigenBasis,
    k: usize,
    sample_count: usize,
) -> Result<LlReport> {
    if f.f_plus(0.0, 0.0).is_none() {
        return Err(Error::MissingLimit("f_plus"));
    }
    if f.f_minus(0.0, 0.0).is_none() {
        return Err(Error::MissingLimit("f_minus"));
    }
    if sample_count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let kernel = kernel_modes(basis, k)?;
    let d = kernel.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n_dirs = if d == 1 {
        2
    } else {
        (2 * d).max(sample_count / 16)
    };
    let dirs = unit_directions(d, n_dirs, &mut rng);
    let n_t = sample_count.div_ceil(dirs.len()).max(1);
    let mut lo = (f64::INFINITY, None);
    let mut hi = (f64::NEG_INFINITY, None);
    for j in 0..n_t {
        let t = j as f64 * f.period / n_t as f64;
        for dir in &dirs {
            let v = ll_value(f, basis, &kernel, dir, t);
            if v < lo.0 {
                lo = (v, Some((t, dir.clone())));
            }
            if v > hi.0 {
                hi = (v, Some((t, dir.clone())));
            }
        }
    }
    let spec = SampleSpec {
        b1: None,
        b2: None,
        r_ladder: Vec::new(),
        sample_count: n_t * dirs.len(),
        seed: None,
    };
    let full = |dir: &[f64]| {
        let mut x = vec![0.0; basis.len()];
        for (&i, c) in kernel.iter().zip(dir) {
            x[i - 1] = *c;
        }
        x
    };
    let report = |id, margin: f64, at: &Option<(f64, Vec<f64>)>, value: f64| {
        let ok = margin > 0.0;
        let (t, dir) = at.clone().unwrap();
        ConditionReport {
            condition_id: id,
            verdict: if ok {
                Verdict::HoldsOnSamples
            } else {
                Verdict::Violated
            },
            witness: (!ok).then(|| Witness {
                t,
                y: None,
                z: None,
                x: Some(full(&dir)),
                s: None,
                value,
            }),
            margin,
            threshold: None,
            sample_spec: spec.clone(),
        }
    };
    Ok(LlReport {
        ll1: report(ConditionId::LL1, lo.0, &lo.1, lo.0),
        ll2: report(ConditionId::LL2, -hi.0, &hi.1, hi.0),
        min_value: lo.0,
        max_value: hi.0,
    })
}

/// Both strong-resonance verdicts from one lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrReport {
    pub sr1: ConditionReport,
    pub sr2: ConditionReport,
    /// `min / max_t ∫ f_∞(t, x) dx`.
    pub integral_min: f64,
    pub integral_max: f64,
    /// Extremes of `f(t, x, s)·s` on the lattice.
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    /// `f·s` at `±s_max` is within `1e-3(1 + |f_∞|)` of `f_∞` everywhere.
    pub tails_converged: bool,
}

/// Checks the SR envelope on a `(t, x, s)` lattice with `s` log-spaced up to
/// `1e6`, and the sign of `∫ f_∞` at sampled times.
pub fn check_sr(f: &NonlinearitySpec, basis: &EigenBasis, sample_count: usize) -> Result<SrReport> {
    if !f.has_infty_limit() {
        return Err(Error::MissingLimit("f_infty"));
    }
    if sample_count < 2 {
        return Err(invalid("sample count must be at least 2"));
    }
    const N_T: usize = 16;
    let ell = basis.domain_length;
    let mut s_values = vec![0.0];
    for j in 0..sample_count {
        let p = -6.0 + 12.0 * j as f64 / (sample_count - 1) as f64;
        let s = pow(10.0, p);
        s_values.push(s);
        s_values.push(-s);
    }
    let mut env_lo = f64::INFINITY;
    let mut env_hi = f64::NEG_INFINITY;
    let mut tails = true;
    let mut tail_witness = None;
    let mut int_lo = (f64::INFINITY, 0.0);
    let mut int_hi = (f64::NEG_INFINITY, 0.0);
    for j in 0..N_T {
        let t = j as f64 * f.period / N_T as f64;
        for &x in &basis.quad_nodes {
            for &s in &s_values {
                let v = f.eval(t, x, s) * s;
                env_lo = env_lo.min(v);
                env_hi = env_hi.max(v);
            }
            let finf = f.f_infty(t, x).unwrap_or(0.0);
            for s in [SR_S_MAX, -SR_S_MAX] {
                let gap = (f.eval(t, x, s) * s - finf).abs();
                if tails && gap > 1e-3 * (1.0 + finf.abs()) {
                    tails = false;
                    tail_witness = Some(Witness {
                        t,
                        y: None,
                        z: None,
                        x: None,
                        s: Some(s),
                        value: -gap,
                    });
                }
            }
        }
        let integral = simpson(|x| f.f_infty(t, x).unwrap_or(0.0), 0.0, ell, SPATIAL_PANELS);
        if integral < int_lo.0 {
            int_lo = (integral, t);
        }
        if integral > int_hi.0 {
            int_hi = (integral, t);
        }
    }
    let spec = SampleSpec {
        b1: None,
        b2: None,
        r_ladder: Vec::new(),
        sample_count: N_T * basis.grid_len() * s_values.len(),
        seed: None,
    };
    let report = |id, margin: f64, t: f64, value: f64| {
        let ok = tails && margin > 0.0;
        let witness = if ok {
            None
        } else if !tails {
            tail_witness.clone()
        } else {
            Some(Witness {
                t,
                y: None,
                z: None,
                x: None,
                s: None,
                value,
            })
        };
        ConditionReport {
            condition_id: id,
            verdict: if ok {
                Verdict::HoldsOnSamples
            } else {
                Verdict::Violated
            },
            witness,
            margin,
            threshold: None,
            sample_spec: spec.clone(),
        }
    };
    Ok(SrReport {
        sr1: report(ConditionId::SR1, int_lo.0, int_lo.1, int_lo.0),
        sr2: report(ConditionId::SR2, -int_hi.0, int_hi.1, int_hi.0),
        integral_min: int_lo.0,
        integral_max: int_hi.0,
        envelope_lower: env_lo,
        envelope_upper: env_hi,
        tails_converged: tails,
    })
}

/// Which geometric condition to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GCondition {
    G1,
    G2,
}

impl GCondition {
    fn sign(self) -> f64 {
        match self {
            GCondition::G1 => 1.0,
            GCondition::G2 => -1.0,
        }
    }

    fn id(self) -> ConditionId {
        match self {
            GCondition::G1 => ConditionId::G1,
            GCondition::G2 => ConditionId::G2,
        }
    }
}

/// Slack of `⟨F(t, x + y), x + z⟩ > 0` (G1) or `< 0` (G2); positive when the
/// inequality holds.
pub fn g_slack(nem: &Nemitskii, cond: GCondition, t: f64, y: &[f64], x: &[f64], z: &[f64]) -> f64 {
    let u: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let mut out = vec![0.0; u.len()];
    nem.eval_into(t, &u, &mut out);
    let lhs: f64 = out
        .iter()
        .zip(x.iter().zip(z))
        .map(|(f, (a, b))| f * (a + b))
        .sum();
    cond.sign() * lhs
}

/// Searches for the smallest radius in `r_ladder` from which the condition
/// held on every sample at that and all larger radii. For each sample the
/// worst `z` in the `B2` ball is taken in closed form.
#[allow(clippy::too_many_arguments)]
pub fn check_g(
    f: &NonlinearitySpec,
    dec: &Decomposition,
    b1: f64,
    b2: f64,
    r_ladder: &[f64],
    sample_count: usize,
    seed: u64,
    cond: GCondition,
) -> Result<ConditionReport> {
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(invalid("ball radii must be positive"));
    }
    if r_ladder.is_empty() || r_ladder.windows(2).any(|w| !(w[1] > w[0])) || !(r_ladder[0] > 0.0) {
        return Err(invalid("radius ladder must be positive and increasing"));
    }
    if sample_count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if dec.idx_kernel.is_empty() {
        return Err(invalid("the kernel is trivial"));
    }
    let nem = Nemitskii::new(f, &dec.basis)?;
    let n = dec.modes();
    let kernel = &dec.idx_kernel;
    let free: Vec<usize> = (1..=n)
        .filter(|i| dec.blocks[i - 1].class != ModeClass::Kernel)
        .collect();
    let weights = dec.alpha_weights();
    let sign = cond.sign();

    struct Worst {
        slack: f64,
        t: f64,
        y: Vec<f64>,
        x: Vec<f64>,
        z: Vec<f64>,
    }
    let mut rung_worst: Vec<Worst> = Vec::with_capacity(r_ladder.len());
    let mut out = vec![0.0; n];
    for (rung, &r) in r_ladder.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rung as u64);
        let dirs = if kernel.len() == 1 {
            Vec::new()
        } else {
            unit_directions(kernel.len(), sample_count, &mut rng)
        };
        let mut worst = Worst {
            slack: f64::INFINITY,
            t: 0.0,
            y: vec![],
            x: vec![],
            z: vec![],
        };
        for j in 0..sample_count {
            let t = rng.random::<f64>() * f.period;
            let mut y = vec![0.0; n];
            if !free.is_empty() {
                let g: Vec<f64> = free
                    .iter()
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let gn = sqrt(g.iter().map(|v| v * v).sum()).max(1e-300);
                let rad = b1 * pow(rng.random::<f64>(), 1.0 / free.len() as f64);
                for (gi, &i) in g.iter().zip(&free) {
                    y[i - 1] = rad * gi / gn / weights[i - 1];
                }
            }
            let mut x = vec![0.0; n];
            if kernel.len() == 1 {
                x[kernel[0] - 1] = if j % 2 == 0 { r } else { -r };
            } else {
                for (c, &i) in dirs[j].iter().zip(kernel) {
                    x[i - 1] = r * c;
                }
            }
            let u: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            nem.eval_into(t, &u, &mut out);
            let pfx: f64 = kernel.iter().map(|&i| out[i - 1] * x[i - 1]).sum();
            let pfn = sqrt(kernel.iter().map(|&i| out[i - 1] * out[i - 1]).sum());
            let slack = sign * pfx - b2 * pfn;
            if slack < worst.slack {
                let mut z = vec![0.0; n];
                if pfn > 0.0 {
                    for &i in kernel {
                        z[i - 1] = -sign * b2 * out[i - 1] / pfn;
                    }
                }
                worst = Worst { slack, t, y, x, z };
            }
        }
        rung_worst.push(worst);
    }
    let first_ok = rung_worst
        .iter()
        .rposition(|w| !(w.slack > 0.0))
        .map_or(0, |p| p + 1);
    let spec = SampleSpec {
        b1: Some(b1),
        b2: Some(b2),
        r_ladder: r_ladder.to_vec(),
        sample_count,
        seed: Some(seed),
    };
    if first_ok == r_ladder.len() {
        let w = rung_worst.pop().unwrap();
        return Ok(ConditionReport {
            condition_id: cond.id(),
            verdict: Verdict::Violated,
            witness: Some(Witness {
                t: w.t,
                y: Some(w.y),
                z: Some(w.z),
                x: Some(w.x),
                s: None,
                value: w.slack,
            }),
            margin: w.slack,
            threshold: None,
            sample_spec: spec,
        });
    }
    let margin = rung_worst[first_ok..]
        .iter()
        .map(|w| w.slack)
        .fold(f64::INFINITY, f64::min);
    Ok(ConditionReport {
        condition_id: cond.id(),
        verdict: Verdict::HoldsOnSamples,
        witness: None,
        margin,
        threshold: Some(r_ladder[first_ok]),
        sample_spec: spec,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    /// Declared bound `m` of `|f|`.
    pub m: f64,
    /// Bound on `‖𝓖(s, t, z)‖_E`.
    pub m0: f64,
    /// Bound on `‖PF‖_H`.
    pub m1: f64,
    pub r1: f64,
    pub r2: f64,
    /// Threshold from the geometric checker, when one was supplied and held.
    pub r3: Option<f64>,
    /// `m1/(cλ) + 1`, the bound on `‖Pv(t)‖_H` for periodic solutions.
    pub kernel_velocity_bound: Option<f64>,
}

/// `m0 = m1 = m·sqrt(ℓ)`, `R1 = m0·M·‖Q₊‖/δ`, `R2 = m0·M·‖Q₋‖/δ`.
pub fn apriori_constants(
    f: &NonlinearitySpec,
    dec: &Decomposition,
    g_report: Option<&ConditionReport>,
) -> Result<AprioriConstants> {
    let m = f.bound();
    if !m.is_finite() {
        return Err(invalid("nonlinearity is unbounded"));
    }
    let m0 = m * sqrt(dec.basis.domain_length);
    let m1 = m0;
    let r1 = m0 * dec.m_const * dec.q_plus_norm / dec.delta;
    let r2 = m0 * dec.m_const * dec.q_minus_norm / dec.delta;
    let r3 = g_report.filter(|r| r.holds()).and_then(|r| r.threshold);
    let cl = dec.config.c * dec.config.lambda;
    let kernel_velocity_bound = (cl > 0.0).then(|| m1 / cl + 1.0);
    Ok(AprioriConstants {
        m,
        m0,
        m1,
        r1,
        r2,
        r3,
        kernel_velocity_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{Family, SpatialProfile};
    use crate::operator::build_dirichlet_laplacian;
    use crate::spectral::{decompose, DampedConfig};
    use core::f64::consts::PI;

    fn dec(n: usize, k: usize) -> Decomposition {
        let b = build_dirichlet_laplacian(PI, n, 4 * n.max(8)).unwrap();
        let cfg = DampedConfig::resonant(&b, 0.5, k, 0.5).unwrap();
        decompose(&b, &cfg).unwrap()
    }

    const LADDER: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];

    #[test]
    fn averaged_map_examples() {
        let d = dec(8, 1);
        assert_eq!(
            averaged_map(&NonlinearitySpec::zero(1.0), &d, &[3.0]).unwrap(),
            vec![0.0]
        );
        let y0 = SpatialProfile::Modes {
            length: PI,
            coeffs: vec![(1, 1.0)],
        };
        let v = averaged_map(&NonlinearitySpec::kernel_const(y0, 2.0), &d, &[0.3]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        // zero-mean time factor times a fixed profile
        let f = NonlinearitySpec::arctan(0.0, 1.0, 0.7, 1.0);
        assert!(averaged_map(&f, &d, &[5.0]).unwrap()[0].abs() < 1e-10);
        assert!(averaged_map(&f, &d, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn averaged_map_is_shift_invariant() {
        let d = dec(8, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.3, 1.0);
        let base = AveragedMap::new(&f, &d).unwrap();
        for x in [-4.0, 0.5, 2.0] {
            let v0 = base.eval(&[x])[0];
            for off in [0.13, 0.5, 0.77] {
                let v1 = base.clone().with_offset(off).eval(&[x])[0];
                assert!((v0 - v1).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ll_values_match_closed_form() {
        let b = build_dirichlet_laplacian(PI, 8, 32).unwrap();
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.0, 1.0);
        let r = check_ll(&f, &b, 1, 16).unwrap();
        let want = sqrt(2.0 * PI);
        assert!((r.min_value - want).abs() < 1e-6 && (r.max_value - want).abs() < 1e-6);
        assert!(r.ll1.holds() && !r.ll2.holds());
        let neg = check_ll(&NonlinearitySpec::arctan(-1.0, 1.0, 0.0, 1.0), &b, 1, 16).unwrap();
        assert!((neg.max_value + want).abs() < 1e-6);
        assert!(neg.ll2.holds() && !neg.ll1.holds());
        let z = check_ll(&NonlinearitySpec::zero(1.0), &b, 1, 16).unwrap();
        assert!(!z.ll1.holds() && !z.ll2.holds());
        assert!(z.ll1.witness.is_some() && z.ll2.witness.is_some());
        // forcing shifts the value by e·cos(2πt)·∫φ₁
        let e = check_ll(&NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0), &b, 1, 64).unwrap();
        let shift = 0.1 * 2.0 * sqrt(2.0 / PI);
        assert!((e.min_value - (want - shift)).abs() < 1e-6);
        assert!(check_ll(&NonlinearitySpec::rational(1.0, 1.0), &b, 1, 16)
            .unwrap()
            .ll1
            .witness
            .is_some());
    }

    #[test]
    fn ll_needs_limits() {
        let b = build_dirichlet_laplacian(PI, 4, 16).unwrap();
        let table = NonlinearitySpec::new(
            Family::CustomTable {
                s_nodes: vec![-1.0, 1.0],
                values: vec![-1.0, 1.0],
            },
            1.0,
        )
        .unwrap();
        assert!(check_ll(&table, &b, 1, 4).is_ok());
        let kc = NonlinearitySpec::kernel_const(SpatialProfile::Constant(1.0), 1.0);
        assert!(check_ll(&kc, &b, 1, 4).is_ok());
    }

    #[test]
    fn sr_examples() {
        let b = build_dirichlet_laplacian(PI, 8, 32).unwrap();
        let r = check_sr(&NonlinearitySpec::rational(1.0, 1.0), &b, 200).unwrap();
        assert!(r.sr1.holds() && !r.sr2.holds());
        assert!((r.integral_min - PI).abs() < 1e-9);
        assert!(r.envelope_lower >= 0.0 && r.envelope_upper < 1.0);
        let n = check_sr(&NonlinearitySpec::rational(-1.0, 1.0), &b, 200).unwrap();
        assert!(n.sr2.holds() && !n.sr1.holds());
        assert!(matches!(
            check_sr(&NonlinearitySpec::arctan(1.0, 1.0, 0.0, 1.0), &b, 200),
            Err(Error::MissingLimit(_))
        ));
    }

    #[test]
    fn g1_holds_for_arctan_and_witness_reproduces() {
        let d = dec(8, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.0, 1.0);
        let r = check_g(&f, &d, 1.0, 1.0, &LADDER, 200, 7, GCondition::G1).unwrap();
        assert!(r.holds(), "{r:?}");
        let th = r.threshold.unwrap();
        // ⟨F, x⟩ ≈ R·sqrt(2π) against B2‖PF‖ ≤ B2·sqrt(2π)
        assert!(th <= 5.0, "{th}");
        let g2 = check_g(&f, &d, 1.0, 1.0, &LADDER, 200, 7, GCondition::G2).unwrap();
        assert!(!g2.holds());
        let w = g2.witness.unwrap();
        let nem = Nemitskii::new(&f, &d.basis).unwrap();
        let v = g_slack(
            &nem,
            GCondition::G2,
            w.t,
            w.y.as_ref().unwrap(),
            w.x.as_ref().unwrap(),
            w.z.as_ref().unwrap(),
        );
        assert!(v <= 0.0 && (v - w.value).abs() < 1e-9);
    }

    #[test]
    fn g_violated_for_constant_forcing() {
        let d = dec(8, 1);
        let f = NonlinearitySpec::kernel_const(SpatialProfile::Constant(1.0), 1.0);
        for cond in [GCondition::G1, GCondition::G2] {
            let r = check_g(&f, &d, 1.0, 1.0, &LADDER, 50, 3, cond).unwrap();
            assert_eq!(r.verdict, Verdict::Violated);
            let w = r.witness.unwrap();
            let nem = Nemitskii::new(&f, &d.basis).unwrap();
            let v = g_slack(
                &nem,
                cond,
                w.t,
                w.y.as_ref().unwrap(),
                w.x.as_ref().unwrap(),
                w.z.as_ref().unwrap(),
            );
            assert!(v <= 0.0);
        }
    }

    #[test]
    fn g_threshold_monotone_in_b2_and_reproducible() {
        let d = dec(8, 1);
        let f = NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0);
        let mut prev = 0.0;
        for b2 in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let r = check_g(&f, &d, 1.0, b2, &LADDER, 100, 11, GCondition::G1).unwrap();
            let th = r.threshold.unwrap_or(f64::INFINITY);
            assert!(th >= prev);
            prev = th;
        }
        let a = check_g(&f, &d, 1.0, 1.0, &LADDER, 100, 11, GCondition::G1).unwrap();
        let b = check_g(&f, &d, 1.0, 1.0, &LADDER, 100, 11, GCondition::G1).unwrap();
        assert_eq!(a, b);
        assert!(check_g(&f, &d, 1.0, 1.0, &[2.0, 1.0], 10, 1, GCondition::G1).is_err());
    }

    #[test]
    fn sr_implies_g() {
        let d = dec(8, 1);
        let f = NonlinearitySpec::rational(1.0, 1.0);
        let ladder = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
        assert!(check_g(&f, &d, 1.0, 1.0, &ladder, 200, 5, GCondition::G1)
            .unwrap()
            .holds());
        let g = NonlinearitySpec::rational(-1.0, 1.0);
        assert!(check_g(&g, &d, 1.0, 1.0, &ladder, 200, 5, GCondition::G2)
            .unwrap()
            .holds());
    }

    #[test]
    fn apriori_examples() {
        let d = dec(8, 2);
        let z = apriori_constants(&NonlinearitySpec::zero(1.0), &d, None).unwrap();
        assert_eq!((z.r1, z.r2), (0.0, 0.0));
        let a = apriori_constants(&NonlinearitySpec::rational(1.0, 1.0), &d, None).unwrap();
        let b = apriori_constants(&NonlinearitySpec::rational(2.0, 1.0), &d, None).unwrap();
        assert_eq!(b.r1, 2.0 * a.r1);
        assert_eq!(b.r2, 2.0 * a.r2);
        assert!(a.r2 > 0.0 && a.r3.is_none());
        let cl = d.config.c * d.config.lambda;
        assert!((a.kernel_velocity_bound.unwrap() - (a.m1 / cl + 1.0)).abs() < 1e-15);
    }
}
