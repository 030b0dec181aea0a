//! One function per subcommand. Each writes its artifacts into `out` and
//! returns the list of files written.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use sdwave_core::degree::{
    averaged_degree, find_fixed_points, linear_degree, nonexistence_search, poincare_degree,
    predicted_degree, verify_kras_averaging, FixedPointSearch, PhaseBox, SearchOptions,
};
use sdwave_core::evolution::{drift_functional, fit_slope, integrate, PoincareMap, Trajectory};
use sdwave_core::nonlinearity::{NonlinearitySpec, SpatialProfile};
use sdwave_core::operator::{grid_project, CoeffVec};
use sdwave_core::resonance::{
    apriori_constants, check_g, check_ll, check_sr, AprioriConstants, ConditionReport, GCondition,
};
use sdwave_core::spectral::{Decomposition, ModeClass, Projection};
use sdwave_core::state::StateE;
use sdwave_core::Error;

use crate::config::ScenarioConfig;
use crate::error::AppError;
use crate::output::OutputDir;

pub type Written = Vec<PathBuf>;

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn initial_state(cfg: &ScenarioConfig, n: usize) -> Result<StateE, AppError> {
    match &cfg.simulate.initial {
        None => Ok(StateE::zeros(n)),
        Some(s) => {
            if s.a.len() != n || s.b.len() != n {
                return Err(AppError::Config(format!(
                    "simulate.initial needs {n} coefficients in a and b"
                )));
            }
            Ok(StateE::new(CoeffVec(s.a.clone()), CoeffVec(s.b.clone()))?)
        }
    }
}

fn trajectory_csv(out: &OutputDir, name: &str, tr: &Trajectory) -> Result<PathBuf, AppError> {
    let n = tr.final_state().modes();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("a_{i}")));
    header.extend((1..=n).map(|i| format!("b_{i}")));
    let rows: Vec<Vec<f64>> = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(t, w)| {
            std::iter::once(*t)
                .chain(w.a.0.iter().copied())
                .chain(w.b.0.iter().copied())
                .collect()
        })
        .collect();
    out.write_csv(name, &header, &rows)
}

pub fn spectrum(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let header: Vec<String> = [
        "i",
        "eigenvalue",
        "class",
        "mu_minus_re",
        "mu_minus_im",
        "mu_plus_re",
        "mu_plus_im",
        "residual_minus",
        "residual_plus",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for b in &dec.blocks {
        let (rm, rp) = (b.root_residual(b.mu_minus), b.root_residual(b.mu_plus));
        rows.push(vec![
            b.index.to_string(),
            num(b.eigenvalue),
            b.class.as_str().to_string(),
            num(b.mu_minus.re),
            num(b.mu_minus.im),
            num(b.mu_plus.re),
            num(b.mu_plus.im),
            num(rm),
            num(rp),
        ]);
        blocks.push(json!({
            "i": b.index,
            "eigenvalue": b.eigenvalue,
            "class": b.class,
            "mu_minus": [b.mu_minus.re, b.mu_minus.im],
            "mu_plus": [b.mu_plus.re, b.mu_plus.im],
            "double_root": b.is_double_root(),
            "residual_minus": rm,
            "residual_plus": rp,
        }));
    }
    let csv = out.write_csv_text("spectrum.csv", &header, &rows)?;
    let report = json!({
        "config": dec.config,
        "modes": dec.modes(),
        "idx_minus": dec.idx_minus,
        "idx_kernel": dec.idx_kernel,
        "idx_plus": dec.idx_plus,
        "m_const": dec.m_const,
        "delta": dec.delta,
        "q_plus_norm": dec.q_plus_norm,
        "q_minus_norm": dec.q_minus_norm,
        "p_norm": dec.p_norm,
        "inverse_damping_hits": dec.inverse_damping_hits,
        "blocks": blocks,
    });
    Ok(vec![csv, out.write_json("spectrum.json", &report)?])
}

pub fn simulate(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let w0 = initial_state(cfg, dec.modes())?;
    let t_end = cfg.simulate.periods * cfg.period();
    let tr = integrate(&w0, t_end, &cfg.nonlinearity, &dec, &cfg.settings()?)?;
    let csv = trajectory_csv(out, "trajectory.csv", &tr)?;
    let last = tr.final_state();
    let report = json!({
        "t_end": t_end,
        "steps": tr.times.len() - 1,
        "meta": tr.meta,
        "final_state": last,
        "final_norm_e": dec.norm_e(last),
    });
    Ok(vec![csv, out.write_json("simulate.json", &report)?])
}

pub fn poincare(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let w0 = initial_state(cfg, dec.modes())?;
    let settings = cfg.settings()?;
    let map = PoincareMap::new(&cfg.nonlinearity, &dec, &settings)?;
    let w1 = map.apply(&w0)?;
    let report = json!({
        "period": cfg.period(),
        "settings": settings,
        "input": w0,
        "output": w1,
        "displacement_norm_e": dec.norm_e(&w1.sub(&w0)),
    });
    Ok(vec![out.write_json("poincare.json", &report)?])
}

/// Geometric check under `cond`, or G1 then G2 when no condition is fixed.
fn geometric(
    cfg: &ScenarioConfig,
    dec: &Decomposition,
) -> Result<(GCondition, ConditionReport), AppError> {
    let ch = &cfg.checks;
    let run = |c| {
        check_g(
            &cfg.nonlinearity,
            dec,
            ch.b1,
            ch.b2,
            &ch.r_ladder,
            ch.sample_count,
            cfg.seed,
            c,
        )
    };
    if let Some(c) = cfg.degree.condition {
        return Ok((c, run(c)?));
    }
    let g1 = run(GCondition::G1)?;
    if g1.holds() {
        return Ok((GCondition::G1, g1));
    }
    Ok((GCondition::G2, run(GCondition::G2)?))
}

fn phase_box(cfg: &ScenarioConfig, consts: &AprioriConstants) -> Result<PhaseBox, AppError> {
    let kernel_radius = match (cfg.degree.kernel_radius, consts.r3) {
        (Some(r), _) => r,
        (None, Some(r3)) => r3 + 1.0,
        (None, None) => {
            return Err(AppError::Config(
                "no geometric condition holds on samples; set degree.kernel_radius".into(),
            ))
        }
    };
    let q_radius = cfg.degree.q_radius.unwrap_or(consts.r1 + consts.r2 + 1.0);
    Ok(PhaseBox {
        kernel_radius,
        q_radius,
    })
}

fn search_options(cfg: &ScenarioConfig) -> SearchOptions {
    SearchOptions {
        starts: cfg.degree.starts,
        ..SearchOptions::default()
    }
}

/// Bounds realised along one period of a periodic orbit.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitBounds {
    pub periodicity_error: f64,
    pub q_max: f64,
    pub pv_max: f64,
}

/// Re-integrates a fixed point over `[0, 2T]` and measures the orbit.
pub fn orbit_bounds(
    map: &PoincareMap<'_>,
    w: &StateE,
) -> Result<(Trajectory, OrbitBounds), AppError> {
    let dec = map.decomposition();
    let tr = map.orbit(w, 2)?;
    let mut q_max = 0.0f64;
    let mut pv_max = 0.0f64;
    for s in &tr.states {
        let p = dec.project(s, Projection::P)?;
        q_max = q_max.max(dec.norm_e(&s.sub(&p)));
        pv_max = pv_max.max(p.b.norm());
    }
    let periodicity_error = dec.norm_e(&tr.final_state().sub(w));
    Ok((
        tr,
        OrbitBounds {
            periodicity_error,
            q_max,
            pv_max,
        },
    ))
}

fn search_summary(s: &FixedPointSearch) -> Value {
    json!({
        "modes": s.modes,
        "degree": s.degree(),
        "rigor": s.rigor(),
        "starts": s.starts,
        "converged": s.converged,
        "captured": s.captured,
        "failures": s.failures,
        "outside": s.outside,
        "best_failed_residual": s.best_failed_residual,
        "last_failure": s.last_failure,
        "fixed_points": s.fixed_points.iter().map(|p| json!({
            "index": p.index,
            "residual": p.residual,
            "conditioning": p.conditioning,
            "kernel_norm": p.kernel_norm,
            "q_norm": p.q_norm,
        })).collect::<Vec<_>>(),
    })
}

pub fn find_periodic(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let (cond, g) = geometric(cfg, &dec)?;
    let consts = apriori_constants(&cfg.nonlinearity, &dec, Some(&g))?;
    let pbox = phase_box(cfg, &consts)?;
    let map = PoincareMap::new(&cfg.nonlinearity, &dec, &cfg.poincare_settings())?;
    let search = find_fixed_points(&map, &pbox, &search_options(cfg))?;
    if search.fixed_points.is_empty() {
        return Err(Error::NewtonBudget(format!(
            "no fixed point from {} starts; last failure: {}",
            search.starts,
            search.last_failure.as_deref().unwrap_or("none")
        ))
        .into());
    }
    let mut written = Vec::new();
    let mut orbits = Vec::new();
    for (j, p) in search.fixed_points.iter().enumerate() {
        let (tr, bounds) = orbit_bounds(&map, &p.state)?;
        if j == 0 {
            written.push(trajectory_csv(out, "orbit.csv", &tr)?);
        }
        orbits.push(json!({ "state": p.state, "bounds": bounds }));
    }
    let report = json!({
        "condition": cond,
        "constants": consts,
        "phase_box": pbox,
        "q_bound": consts.r1 + consts.r2,
        "pv_bound": consts.kernel_velocity_bound,
        "search": search_summary(&search),
        "orbits": orbits,
    });
    written.insert(0, out.write_json("periodic.json", &report)?);
    Ok(written)
}

pub fn degree(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let (cond, g) = geometric(cfg, &dec)?;
    let consts = apriori_constants(&cfg.nonlinearity, &dec, Some(&g))?;
    let pbox = phase_box(cfg, &consts)?;
    let averaged = averaged_degree(&cfg.nonlinearity, &dec, pbox.kernel_radius)?;
    let predicted = predicted_degree(&dec, cond)?;
    let ladder = poincare_degree(
        &cfg.nonlinearity,
        &cfg.model(),
        &pbox,
        &cfg.degree.n_ladder,
        &cfg.poincare_settings(),
        &search_options(cfg),
    )?;
    let value = ladder.stable.then(|| ladder.degrees[0]);
    let report = json!({
        "value": value,
        "condition": cond,
        "geometric": g,
        "constants": consts,
        "phase_box": pbox,
        "averaged": averaged,
        "predicted": predicted,
        "ladder": {
            "n_values": ladder.n_values,
            "degrees": ladder.degrees,
            "stable": ladder.stable,
            "rigor_flag": ladder.rigor_flag,
            "searches": ladder.searches.iter().map(search_summary).collect::<Vec<_>>(),
        },
    });
    let path = out.write_json("degree.json", &report)?;
    ladder.require_stable()?;
    Ok(vec![path])
}

/// Runs a check and stores input-side refusals (missing limits, non-resonant
/// setups) as an error entry instead of aborting.
fn soft<T: Serialize>(r: sdwave_core::Result<T>) -> Result<Value, AppError> {
    match r {
        Ok(v) => Ok(serde_json::to_value(v)?),
        Err(e) if !e.is_numerical() => Ok(json!({ "error": e.kind(), "message": e.to_string() })),
        Err(e) => Err(e.into()),
    }
}

pub fn check_conditions(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let ch = &cfg.checks;
    let f = &cfg.nonlinearity;
    let ll = match cfg.damped.k {
        Some(k) => soft(check_ll(f, &dec.basis, k, ch.ll_samples))?,
        None => json!({ "error": "invalid_argument", "message": "LL needs a resonance index" }),
    };
    let sr = soft(check_sr(f, &dec.basis, ch.sr_samples))?;
    let g1 = check_g(
        f,
        &dec,
        ch.b1,
        ch.b2,
        &ch.r_ladder,
        ch.sample_count,
        cfg.seed,
        GCondition::G1,
    )?;
    let g2 = check_g(
        f,
        &dec,
        ch.b1,
        ch.b2,
        &ch.r_ladder,
        ch.sample_count,
        cfg.seed,
        GCondition::G2,
    )?;
    let held = [&g1, &g2].into_iter().find(|r| r.holds());
    let consts = apriori_constants(f, &dec, held)?;
    let report = json!({
        "ll": ll,
        "sr": sr,
        "g1": g1,
        "g2": g2,
        "constants": consts,
        "linear_degree": soft(linear_degree(&dec, cfg.period()))?,
    });
    Ok(vec![out.write_json("conditions.json", &report)?])
}

pub fn verify_averaging(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let a = &cfg.averaging;
    let reports = a
        .fields
        .iter()
        .map(|field| verify_kras_averaging(field, a.period, &a.domain, &a.mu_ladder))
        .collect::<Result<Vec<_>, _>>()?;
    let all_agree = reports.iter().all(|r| r.mu_star.is_some());
    Ok(vec![out.write_json(
        "averaging.json",
        &json!({ "all_agree": all_agree, "fields": reports }),
    )?])
}

/// Kernel-supported coefficients of `profile`.
fn kernel_coeffs(profile: &SpatialProfile, dec: &Decomposition) -> Result<CoeffVec, AppError> {
    let g: Vec<f64> = dec
        .basis
        .quad_nodes
        .iter()
        .map(|x| profile.eval(*x))
        .collect();
    let mut c = grid_project(&g, &dec.basis)?;
    for (i, b) in dec.blocks.iter().enumerate() {
        if b.class != ModeClass::Kernel {
            c.0[i] = 0.0;
        }
    }
    Ok(c)
}

pub fn nonexistence_demo(cfg: &ScenarioConfig, out: &OutputDir) -> Result<Written, AppError> {
    let dec = cfg.decomposition()?;
    let k = dec
        .config
        .resonance_index
        .ok_or_else(|| AppError::Config("nonexistence-demo needs damped.k".into()))?;
    let profile = cfg
        .nonexistence
        .y0
        .clone()
        .unwrap_or(SpatialProfile::Modes {
            length: cfg.basis.length,
            coeffs: vec![(k, 1.0)],
        });
    let f = NonlinearitySpec::kernel_const(profile.clone(), cfg.period());
    let y0 = kernel_coeffs(&profile, &dec)?;
    let t_end = cfg.nonexistence.periods * cfg.period();
    let tr = integrate(
        &StateE::zeros(dec.modes()),
        t_end,
        &f,
        &dec,
        &cfg.settings()?,
    )?;
    let drift = drift_functional(&tr, &y0, &dec)?;
    let rows: Vec<Vec<f64>> = tr
        .times
        .iter()
        .zip(&drift)
        .map(|(t, d)| vec![*t, *d])
        .collect();
    let csv = out.write_csv("drift.csv", &["t".into(), "drift".into()], &rows)?;
    let slope = fit_slope(&tr.times, &drift);
    let expected = y0.norm().powi(2);
    let map = PoincareMap::new(&f, &dec, &cfg.poincare_settings())?;
    let opts = SearchOptions {
        starts: cfg.nonexistence.starts,
        ..SearchOptions::default()
    };
    let newton = nonexistence_search(&map, cfg.nonexistence.radius, &opts)?;
    let report = json!({
        "y0": profile,
        "y0_kernel_coeffs": y0,
        "slope": slope,
        "expected_slope": expected,
        "slope_error": (slope - expected).abs(),
        "newton": {
            "radius": newton.radius,
            "exhaustive_failure": newton.exhaustive_failure,
            "search": search_summary(&newton.search),
        },
    });
    Ok(vec![csv, out.write_json("nonexistence.json", &report)?])
}
