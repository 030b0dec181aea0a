//! Scenario configuration: JSON schema, defaults and dot-path overrides.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sdwave_core::degree::{Domain, Model, PlanarField, Resonance};
use sdwave_core::evolution::{IntegratorSettings, Scheme};
use sdwave_core::nonlinearity::{NonlinearitySpec, SpatialProfile};
use sdwave_core::operator::{build_dirichlet_laplacian, EigenBasis};
use sdwave_core::resonance::GCondition;
use sdwave_core::spectral::{decompose, DampedConfig, Decomposition};

use crate::error::AppError;

/// Scenario used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for every sampled check. Required.
    pub seed: u64,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub damped: DampedSection,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub degree: DegreeSection,
    #[serde(default)]
    pub averaging: AveragingSection,
    #[serde(default)]
    pub nonexistence: NonexistenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec::arctan(1.0, 1.0, 0.1, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub length: f64,
    pub modes: usize,
    /// Quadrature nodes; `4·modes` when absent.
    pub grid: Option<usize>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            length: PI,
            modes: 8,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DampedSection {
    pub c: f64,
    /// Resonance index; exclusive with `lambda`.
    pub k: Option<usize>,
    /// Non-resonant `λ`; exclusive with `k`.
    pub lambda: Option<f64>,
    pub alpha: f64,
}

impl Default for DampedSection {
    fn default() -> Self {
        DampedSection {
            c: 0.5,
            k: Some(1),
            lambda: None,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub scheme: Scheme,
    /// Step; `T/256` when absent.
    pub h: Option<f64>,
    /// Step-halving tolerance; `null` disables halving.
    pub tol: Option<f64>,
    pub max_halvings: u32,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            scheme: Scheme::ExpMidpoint,
            h: None,
            tol: Some(1e-8),
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Integration length in periods.
    pub periods: f64,
    /// Initial coefficients; zero when absent.
    pub initial: Option<InitialState>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            periods: 1.0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    /// Samples per ladder radius in the geometric check.
    pub sample_count: usize,
    pub b1: f64,
    pub b2: f64,
    pub r_ladder: Vec<f64>,
    pub ll_samples: usize,
    pub sr_samples: usize,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            sample_count: 2000,
            b1: 1.0,
            b2: 1.0,
            r_ladder: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            ll_samples: 64,
            sr_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegreeSection {
    pub n_ladder: Vec<usize>,
    pub starts: usize,
    /// Fixed Poincaré step; `T/256` when absent.
    pub h: Option<f64>,
    /// Geometric condition to use; picked from the checker when absent.
    pub condition: Option<GCondition>,
    /// Overrides `R3 + 1`.
    pub kernel_radius: Option<f64>,
    /// Overrides `R1 + R2 + 1`.
    pub q_radius: Option<f64>,
}

impl Default for DegreeSection {
    fn default() -> Self {
        DegreeSection {
            n_ladder: vec![4, 8, 16],
            starts: 64,
            h: None,
            condition: None,
            kernel_radius: None,
            q_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingSection {
    pub period: f64,
    pub mu_ladder: Vec<f64>,
    pub domain: Domain,
    pub fields: Vec<PlanarField>,
}

impl Default for AveragingSection {
    fn default() -> Self {
        AveragingSection {
            period: 1.0,
            mu_ladder: (0..7).map(|j| 1.0 / f64::from(1u32 << j)).collect(),
            domain: Domain::cube(2, 1.0),
            fields: vec![
                PlanarField::LinearSink,
                PlanarField::RotationSink {
                    omega: 2.0,
                    eps: 0.3,
                },
                PlanarField::Square { eps: 0.05 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonexistenceSection {
    /// Kernel forcing; `φ_k` when absent.
    pub y0: Option<SpatialProfile>,
    pub radius: f64,
    pub starts: usize,
    pub periods: f64,
}

impl Default for NonexistenceSection {
    fn default() -> Self {
        NonexistenceSection {
            y0: None,
            radius: 1e3,
            starts: 64,
            periods: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

/// Sets `path` (dot-separated, numeric segments index arrays) to `value`.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), AppError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| AppError::Config(format!("override `{assignment}` is not key=value")))?;
    if path.is_empty() {
        return Err(AppError::Config("override key is empty".into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    AppError::Config(format!("`{seg}` is not an array index in `{path}`"))
                })?;
                let slot = items.get_mut(idx).ok_or_else(|| {
                    AppError::Config(format!("index {idx} out of range in `{path}`"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(AppError::Config(format!("`{path}` descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl ScenarioConfig {
    /// Parses a config (or the default scenario), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, AppError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| AppError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => DEFAULT_CONFIG.to_string(),
        };
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| AppError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ScenarioConfig =
            serde_json::from_value(value).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: &str| Err(AppError::Config(m.to_string()));
        if self.basis.modes == 0 {
            return bad("basis.modes must be positive");
        }
        if let Some(g) = self.basis.grid {
            if g < 4 * self.basis.modes {
                return bad("basis.grid must be at least 4·modes");
            }
        }
        match (self.damped.k, self.damped.lambda) {
            (Some(_), Some(_)) => return bad("set exactly one of damped.k and damped.lambda"),
            (None, None) => return bad("set one of damped.k and damped.lambda"),
            _ => {}
        }
        if self.simulate.periods <= 0.0 || self.nonexistence.periods <= 0.0 {
            return bad("periods must be positive");
        }
        if self.degree.n_ladder.is_empty() {
            return bad("degree.n_ladder must not be empty");
        }
        self.nonlinearity.validate()?;
        self.settings()?.validate(self.nonlinearity.period)?;
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.nonlinearity.period
    }

    pub fn model(&self) -> Model {
        let grid_factor = self.basis.grid.map_or(4, |g| (g / self.basis.modes).max(4));
        Model {
            length: self.basis.length,
            c: self.damped.c,
            alpha: self.damped.alpha,
            resonance: match (self.damped.k, self.damped.lambda) {
                (Some(k), _) => Resonance::Index(k),
                (None, Some(l)) => Resonance::Lambda(l),
                (None, None) => Resonance::Index(1),
            },
            grid_factor,
        }
    }

    pub fn basis(&self) -> Result<EigenBasis, AppError> {
        let grid = self.basis.grid.unwrap_or(4 * self.basis.modes);
        Ok(build_dirichlet_laplacian(
            self.basis.length,
            self.basis.modes,
            grid,
        )?)
    }

    pub fn decomposition(&self) -> Result<Decomposition, AppError> {
        let basis = self.basis()?;
        let cfg = match (self.damped.k, self.damped.lambda) {
            (Some(k), _) => DampedConfig::resonant(&basis, self.damped.c, k, self.damped.alpha)?,
            (None, Some(l)) => DampedConfig::non_resonant(self.damped.c, l, self.damped.alpha),
            (None, None) => return Err(AppError::Config("missing resonance".into())),
        };
        Ok(decompose(&basis, &cfg)?)
    }

    /// Settings for `simulate`.
    pub fn settings(&self) -> Result<IntegratorSettings, AppError> {
        let i = &self.integrator;
        Ok(IntegratorSettings {
            scheme: i.scheme,
            h: i.h.unwrap_or(self.period() / 256.0),
            tol: i.tol,
            max_halvings: i.max_halvings,
        })
    }

    /// Fixed-step settings for Poincaré maps inside Newton searches.
    pub fn poincare_settings(&self) -> IntegratorSettings {
        IntegratorSettings::fixed(
            self.integrator.scheme,
            self.degree.h.unwrap_or(self.period() / 256.0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = ScenarioConfig::load(None, &[]).unwrap();
        assert_eq!(c.basis.modes, 8);
        assert_eq!(c.damped.k, Some(1));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ScenarioConfig::load(
            None,
            &[
                "basis.modes=4".into(),
                "damped.c=2".into(),
                "degree.n_ladder=[4,8]".into(),
                "output.dir=x".into(),
            ],
        )
        .unwrap();
        assert_eq!(
            (c.basis.modes, c.damped.c, c.output.dir.as_str()),
            (4, 2.0, "x")
        );
        assert_eq!(c.degree.n_ladder, vec![4, 8]);
        let mut v = serde_json::json!({"a": [1, {"b": 2}]});
        apply_override(&mut v, "a.1.b=5").unwrap();
        assert_eq!(v["a"][1]["b"], 5);
        assert!(apply_override(&mut v, "a.7=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        assert!(ScenarioConfig::load(None, &["basis.bogus=1".into()]).is_err());
        assert!(ScenarioConfig::load(None, &["bogus=1".into()]).is_err());
        let no_seed: Value = serde_json::json!({"basis": {"modes": 4}});
        assert!(serde_json::from_value::<ScenarioConfig>(no_seed).is_err());
    }

    #[test]
    fn resonance_choice_is_exclusive() {
        assert!(ScenarioConfig::load(None, &["damped.lambda=2.5".into()]).is_err());
        let c = ScenarioConfig::load(None, &["damped.lambda=2.5".into(), "damped.k=null".into()])
            .unwrap();
        assert_eq!(c.model().resonance, Resonance::Lambda(2.5));
    }
}
