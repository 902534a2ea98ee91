//! Run configuration (one JSON file per run). Unknown keys are rejected.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::cell::{CellOptions, CellResolutions};
use crate::expr::parse;
use crate::fem::{CgOptions, Preconditioner};
use crate::meanvalue::AlgebraSpec;
use crate::pipeline::{
    CoefficientSpec, Formulation, GuardMode, Hints, MsCheckSpec, ObstacleSpec, PipelineError, StudySpec,
};
use crate::vi::{PdasOptions, PsorOptions, ViMethod, ViTolerances};

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Spatial dimension N (1 or 2).
    pub dimension: usize,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub coefficient: Option<CoefficientConfig>,
    #[serde(default)]
    pub obstacle: Option<ObstacleConfig>,
    /// Load f(x).
    #[serde(default)]
    pub load: Option<String>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default, rename = "macro")]
    pub macro_mesh: MacroConfig,
    #[serde(default)]
    pub epsilon: Option<EpsilonConfig>,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub mscheck: Option<MsCheckConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// Row-major N×N entries a_ij(x, y, z).
    pub entries: Vec<Vec<String>>,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub algebra_y: AlgebraSpec,
    #[serde(default)]
    pub algebra_z: AlgebraSpec,
    #[serde(default)]
    pub hints: Hints,
}

fn default_g() -> String {
    "0".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    /// Limit obstacle ψ₀(x); must be ≤ 0 on the boundary.
    pub psi0: String,
    /// Oscillating part g(x, y) of ψ_ε = ψ₀ + ε^g_order · g(x, x/ε).
    #[serde(default = "default_g")]
    pub g: String,
    #[serde(default = "one")]
    pub g_order: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Psor,
    #[default]
    Pdas,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: MethodName,
    /// PSOR relaxation factor in (0, 2).
    pub omega: f64,
    /// PDAS parameter c > 0.
    pub c: f64,
    /// Relative dual and complementarity tolerance (PSOR stopping test).
    pub tol: f64,
    pub maxit: Option<usize>,
    /// Relative residual of the inner linear solves (PDAS).
    pub cg_tol: f64,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: MethodName::Pdas,
            omega: 1.5,
            c: 1.0,
            tol: 1e-10,
            maxit: None,
            cg_tol: 1e-13,
            preconditioner: Preconditioner::Ic0,
        }
    }
}

impl SolverConfig {
    pub fn method(&self) -> ViMethod {
        match self.method {
            MethodName::Psor => {
                let d = PsorOptions::default();
                ViMethod::Psor(PsorOptions {
                    omega: self.omega,
                    tolerances: ViTolerances {
                        feasibility: 0.0,
                        dual: self.tol,
                        complementarity: self.tol,
                    },
                    maxit: self.maxit.unwrap_or(d.maxit),
                    ..d
                })
            }
            MethodName::Pdas => {
                let d = PdasOptions::default();
                ViMethod::Pdas(PdasOptions {
                    c: self.c,
                    maxit: self.maxit.unwrap_or(d.maxit),
                    cg: CgOptions {
                        tol: self.cg_tol,
                        preconditioner: self.preconditioner,
                        ..d.cg
                    },
                })
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub n_micro: usize,
    pub n_meso: usize,
    /// Maximum number of micro solves for one A*(x).
    pub budget: usize,
    /// Macro point at which `cell` reports correctors (defaults to the domain center).
    pub anchor: Option<Vec<f64>>,
    pub cg_tol: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            n_micro: 128,
            n_meso: 128,
            budget: 20_000,
            anchor: None,
            cg_tol: 1e-12,
        }
    }
}

impl CellConfig {
    pub fn resolutions(&self) -> CellResolutions {
        CellResolutions {
            n_micro: self.n_micro,
            n_meso: self.n_meso,
            budget: self.budget,
        }
    }

    pub fn options(&self) -> CellOptions {
        let mut o = CellOptions::default();
        o.cg.tol = self.cg_tol;
        o
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct MacroConfig {
    /// Subdivisions per axis of the mesh for u₀.
    pub subdivisions: usize,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig { subdivisions: 128 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EpsilonConfig {
    pub eps: f64,
    /// Fine subdivisions per axis.
    pub subdivisions: usize,
    #[serde(default)]
    pub guard: GuardMode,
    #[serde(default)]
    pub formulation: Formulation,
}

fn default_ppp() -> usize {
    16
}

fn default_min_subdivisions() -> usize {
    64
}

fn default_true() -> bool {
    true
}

fn default_study_csv() -> String {
    "study.csv".into()
}

fn default_study_json() -> String {
    "study.json".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Strictly decreasing ε values.
    pub eps: Vec<f64>,
    /// Fine elements per fastest period (ε² if A depends on z, else ε).
    #[serde(default = "default_ppp")]
    pub points_per_period: usize,
    #[serde(default = "default_min_subdivisions")]
    pub min_subdivisions: usize,
    /// Explicit fine subdivisions per ε, overriding the rule above.
    #[serde(default)]
    pub fine_subdivisions: Option<Vec<usize>>,
    #[serde(default)]
    pub guard: GuardMode,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default = "default_true")]
    pub check_formulations: bool,
    /// Fill the `seconds` column (makes the CSV non-reproducible).
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_study_csv")]
    pub csv: String,
    #[serde(default = "default_study_json")]
    pub json: String,
}

fn default_ms_ppp() -> usize {
    16
}

fn default_budget() -> f64 {
    1e8
}

fn default_ms_csv() -> String {
    "mscheck.csv".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MsCheckConfig {
    /// Macro amplitude w(x).
    pub w: String,
    /// Oscillating profile φ(y, z).
    pub phi: String,
    /// Test function v(x, y, z).
    pub v: String,
    pub eps: Vec<f64>,
    #[serde(default = "default_ms_ppp")]
    pub points_per_period: usize,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default = "default_ms_csv")]
    pub csv: String,
}

/// Config problems detected before any numerical work.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config does not match the schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("missing {0} block")]
    Missing(&'static str),
    #[error(transparent)]
    Invalid(#[from] PipelineError),
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let c: Config = serde_json::from_str(text)?;
        if !(1..=2).contains(&c.dimension) {
            return Err(PipelineError::Invalid(format!("dimension must be 1 or 2, got {}", c.dimension)).into());
        }
        if let Some(d) = &c.domain {
            if d.lo.len() != c.dimension || d.hi.len() != c.dimension {
                return Err(PipelineError::Invalid("domain lo/hi must have one entry per dimension".into()).into());
            }
        }
        Ok(c)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Config, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Box `[lo, hi]`, the unit box by default.
    pub fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.domain {
            Some(d) => (d.lo.clone(), d.hi.clone()),
            None => (vec![0.0; self.dimension], vec![1.0; self.dimension]),
        }
    }

    pub fn coefficient(&self) -> Result<CoefficientSpec, ConfigError> {
        let c = self.coefficient.as_ref().ok_or(ConfigError::Missing("coefficient"))?;
        let spec = CoefficientSpec::new(self.dimension, &c.entries, c.alpha, c.beta)?
            .with_algebras(c.algebra_y.clone(), c.algebra_z.clone())
            .with_hints(c.hints)?;
        let (lo, hi) = self.domain();
        spec.validate(&lo, &hi)?;
        Ok(spec)
    }

    /// The obstacle block, or an obstacle that never binds.
    pub fn obstacle(&self) -> Result<ObstacleSpec, ConfigError> {
        let o = match &self.obstacle {
            Some(o) => ObstacleSpec::new(self.dimension, &o.psi0, &o.g, o.g_order)?,
            None => ObstacleSpec::inactive(self.dimension),
        };
        let (lo, hi) = self.domain();
        o.validate(&lo, &hi)?;
        Ok(o)
    }

    pub fn load(&self) -> Result<crate::expr::Expr, ConfigError> {
        let text = self.load.as_ref().ok_or(ConfigError::Missing("load"))?;
        Ok(parse(text, self.dimension).map_err(PipelineError::from)?)
    }

    pub fn study_spec(&self) -> Result<StudySpec, ConfigError> {
        let s = self.study.as_ref().ok_or(ConfigError::Missing("study"))?;
        Ok(StudySpec {
            eps: s.eps.clone(),
            points_per_period: s.points_per_period,
            min_subdivisions: s.min_subdivisions,
            fine_subdivisions: s.fine_subdivisions.clone(),
            macro_subdivisions: self.macro_mesh.subdivisions,
            guard: s.guard,
            formulation: s.formulation,
            check_formulations: s.check_formulations,
            timing: s.timing,
            cell: self.cell.resolutions(),
        })
    }

    pub fn mscheck_spec(&self) -> Result<MsCheckSpec, ConfigError> {
        let m = self.mscheck.as_ref().ok_or(ConfigError::Missing("mscheck"))?;
        let p = |t: &str| parse(t, self.dimension).map_err(PipelineError::from);
        Ok(MsCheckSpec {
            w: p(&m.w)?,
            phi: p(&m.phi)?,
            v: p(&m.v)?,
            eps: m.eps.clone(),
            points_per_period: m.points_per_period,
            budget: m.budget,
        })
    }

    /// Algebras for the multiscale check (periodic unless a coefficient block says otherwise).
    pub fn algebras(&self) -> (AlgebraSpec, AlgebraSpec) {
        match &self.coefficient {
            Some(c) => (c.algebra_y.clone(), c.algebra_z.clone()),
            None => (AlgebraSpec::periodic(), AlgebraSpec::periodic()),
        }
    }
}

/// JSON schema of [`Config`].
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Config)).expect("schema serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = Config::from_json(r#"{"dimension": 1, "coefficient": {"entries": [["2"]], "alpha": 2, "beta": 2}}"#)
            .unwrap();
        assert_eq!(c.domain(), (vec![0.0], vec![1.0]));
        assert!(c.coefficient().unwrap().hints().z_independent);
        assert!(matches!(c.load(), Err(ConfigError::Missing("load"))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = Config::from_json(r#"{"dimension": 1, "colour": 3}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Schema(_)));
        let e = Config::from_json(r#"{"dimension": 1, "solver": {"omgea": 1.2}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Schema(_)));
        let e = Config::from_json(r#"{"dimension": 1, "coefficient": {"entries": [["2"]], "alpha": 2, "beta": 2,
            "algebra_z": {"kind": "periodic", "radii": [1, 2]}}}"#)
        .unwrap_err();
        assert!(matches!(e, ConfigError::Schema(_)));
    }

    #[test]
    fn solver_block_maps_to_methods() {
        let c = Config::from_json(r#"{"dimension": 1, "solver": {"method": "psor", "omega": 1.2, "maxit": 10}}"#).unwrap();
        match c.solver.method() {
            ViMethod::Psor(o) => assert_eq!((o.omega, o.maxit), (1.2, 10)),
            _ => panic!("expected psor"),
        }
    }

    #[test]
    fn schema_mentions_every_block() {
        let s = schema().to_string();
        for key in ["coefficient", "obstacle", "solver", "cell", "macro", "study", "mscheck", "quasiperiodic"] {
            assert!(s.contains(key), "{key}");
        }
    }
}
