//! Experiment configuration: TOML with one level of sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublap_core::grid::{GridSpec, TailPolicy, MAX_NODES};
use sublap_core::group::{GroupInstance, DEFAULT_VOLUME_SAMPLES, DEFAULT_VOLUME_SEED};
use sublap_core::weight::{library, WeightSpec};

use crate::error::LabError;
use crate::polynomial::parse_polynomial;

/// Version of the configuration and report schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub group: GroupConfig,
    pub weight: WeightConfig,
    pub grid: GridConfig,
    pub lyapunov: Option<LyapunovConfig>,
    pub improved: Option<ImprovedConfig>,
    #[serde(default)]
    pub spectral: SpectralConfig,
    pub offdiag: Option<OffdiagConfig>,
    pub nonlocal: Option<NonlocalConfig>,
    pub covering: Option<CoveringConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum GroupName {
    Euclidean,
    Heisenberg1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: GroupName,
    /// Dimension for `euclidean`.
    pub n: Option<usize>,
    /// Monte-Carlo samples for the Heisenberg volume constant.
    pub volume_samples: Option<usize>,
    pub volume_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// A library weight.
    pub name: Option<String>,
    /// A polynomial potential in the coordinates, e.g. `"0.5*x^2 + 0.25*y^4"`.
    pub polynomial: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    pub domain_radius: f64,
    /// Optional box overriding `[−radius, radius]^dim`.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    #[serde(default)]
    pub tail_policy: TailPolicy,
    /// One more resolution for two-resolution comparisons.
    pub refined_resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub a: f64,
    pub c: f64,
    pub radius: f64,
    /// Outer shell radius; defaults to the domain radius.
    pub shell_radius: Option<f64>,
    #[serde(default = "default_shell_samples")]
    pub shell_samples: usize,
    /// Random `f` for the form inequality with the constructed `W`.
    #[serde(default = "default_lemma_samples")]
    pub lemma_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImprovedConfig {
    pub epsilon: f64,
    pub radius: f64,
    pub shell_radius: Option<f64>,
    #[serde(default = "default_shell_samples")]
    pub shell_samples: usize,
    /// `α` values of the functional-calculus check.
    #[serde(default = "default_calculus_alphas")]
    pub calculus_alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "default_eigen_count")]
    pub eigen_count: usize,
    #[serde(default = "default_alpha_list")]
    pub alpha_list: Vec<f64>,
    #[serde(default = "default_random_functions")]
    pub random_functions: usize,
    #[serde(default = "default_quadrature_nodes")]
    pub quadrature_nodes: usize,
    /// Relative tolerance of the quadratic identity.
    #[serde(default = "default_quadratic_tolerance")]
    pub quadratic_tolerance: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            eigen_count: default_eigen_count(),
            alpha_list: default_alpha_list(),
            random_functions: default_random_functions(),
            quadrature_nodes: default_quadrature_nodes(),
            quadratic_tolerance: default_quadratic_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffdiagConfig {
    /// Coordinate box of `E`.
    pub e_lower: Vec<f64>,
    pub e_upper: Vec<f64>,
    /// Coordinate box of `F`.
    pub f_lower: Vec<f64>,
    pub f_upper: Vec<f64>,
    pub t_list: Vec<f64>,
    #[serde(default = "default_r_squared")]
    pub r_squared_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlocalConfig {
    #[serde(default = "default_alpha_list")]
    pub alpha_list: Vec<f64>,
    /// Resolution of the pair-sum grid; defaults to the main resolution.
    pub resolution: Option<usize>,
    /// Second resolution for the agreement check.
    pub refined_resolution: Option<usize>,
    /// Largest relative disagreement of `λ_α` between the two resolutions.
    #[serde(default = "default_nonlocal_agreement")]
    pub agreement: f64,
    /// Random mean-zero `f` for the quadratic-versus-energy comparison.
    #[serde(default = "default_control_functions")]
    pub control_functions: usize,
    #[serde(default = "default_control_alpha")]
    pub control_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringConfig {
    pub t_list: Vec<f64>,
    #[serde(default = "default_theta_list")]
    pub theta_list: Vec<f64>,
    /// Largest annulus index.
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    /// `t` of the annulus table.
    pub annulus_t: Option<f64>,
    /// Resolution of the net grid; defaults to the main resolution.
    pub resolution: Option<usize>,
    pub refined_resolution: Option<usize>,
    /// Largest relative change of fitted constants between resolutions.
    #[serde(default = "default_stability")]
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

fn default_shell_samples() -> usize {
    100_000
}
fn default_lemma_samples() -> usize {
    1000
}
fn default_calculus_alphas() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_eigen_count() -> usize {
    3
}
fn default_alpha_list() -> Vec<f64> {
    vec![0.5, 1.0, 1.5]
}
fn default_random_functions() -> usize {
    20
}
fn default_quadrature_nodes() -> usize {
    sublap_core::spectral::QUADRATURE_NODES
}
fn default_quadratic_tolerance() -> f64 {
    1e-3
}
fn default_r_squared() -> f64 {
    0.98
}
fn default_nonlocal_agreement() -> f64 {
    0.05
}
fn default_control_functions() -> usize {
    10
}
fn default_control_alpha() -> f64 {
    1.0
}
fn default_theta_list() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}
fn default_k_max() -> u32 {
    4
}
fn default_stability() -> f64 {
    0.1
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), LabError> {
    if !(v > lo && v < hi) {
        return Err(invalid(format!("{name} = {v} must lie in ({lo}, {hi})")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), LabError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} = {v} must be positive and finite")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        match self.group.kind {
            GroupName::Euclidean => self.group.n.unwrap_or(0),
            GroupName::Heisenberg1 => 3,
        }
    }

    /// Range checks. Everything numeric is checked here, before any work.
    pub fn validate(&self) -> Result<(), LabError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match self.group.kind {
            GroupName::Euclidean => match self.group.n {
                Some(n) if (1..=8).contains(&n) => {}
                _ => return Err(invalid("group.n must be an integer in 1..=8 for euclidean")),
            },
            GroupName::Heisenberg1 => {
                if self.group.n.is_some() {
                    return Err(invalid("group.n is not used by heisenberg1"));
                }
                if self.group.volume_samples == Some(0) {
                    return Err(invalid("group.volume_samples must be positive"));
                }
            }
        }
        match (&self.weight.name, &self.weight.polynomial) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(invalid("weight needs exactly one of `name` or `polynomial`")),
        }
        let g = &self.grid;
        if g.resolution < sublap_core::grid::MIN_RESOLUTION {
            return Err(invalid(format!(
                "grid.resolution must be at least {}",
                sublap_core::grid::MIN_RESOLUTION
            )));
        }
        check_positive("grid.domain_radius", g.domain_radius)?;
        if g.lower.is_some() != g.upper.is_some() {
            return Err(invalid("grid.lower and grid.upper must be given together"));
        }
        if let (Some(lo), Some(hi)) = (&g.lower, &g.upper) {
            if lo.len() != self.dim() || hi.len() != self.dim() {
                return Err(invalid("grid.lower/upper must have one entry per coordinate"));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(invalid("grid.lower must be below grid.upper"));
            }
        }
        if let Some(r) = g.refined_resolution {
            if r < sublap_core::grid::MIN_RESOLUTION {
                return Err(invalid("grid.refined_resolution is too small"));
            }
        }
        if let Some(l) = &self.lyapunov {
            check_range("lyapunov.a", l.a, 0.0, 1.0)?;
            check_positive("lyapunov.c", l.c)?;
            check_positive("lyapunov.radius", l.radius)?;
            if let Some(s) = l.shell_radius {
                check_positive("lyapunov.shell_radius", s)?;
            }
            if l.shell_samples == 0 {
                return Err(invalid("lyapunov.shell_samples must be positive"));
            }
        }
        if let Some(i) = &self.improved {
            check_range("improved.epsilon", i.epsilon, 0.0, 1.0)?;
            check_positive("improved.radius", i.radius)?;
            for &a in &i.calculus_alphas {
                if !(a > 0.0 && a <= 2.0) {
                    return Err(invalid(format!(
                        "improved.calculus_alphas entry {a} must lie in (0, 2]"
                    )));
                }
            }
        }
        let s = &self.spectral;
        if s.eigen_count == 0 {
            return Err(invalid("spectral.eigen_count must be positive"));
        }
        for &a in &s.alpha_list {
            check_range("spectral.alpha_list entry", a, 0.0, 2.0)?;
        }
        if s.quadrature_nodes < 2 {
            return Err(invalid("spectral.quadrature_nodes must be at least 2"));
        }
        check_positive("spectral.quadratic_tolerance", s.quadratic_tolerance)?;
        if let Some(o) = &self.offdiag {
            for v in [&o.e_lower, &o.e_upper, &o.f_lower, &o.f_upper] {
                if v.len() != self.dim() {
                    return Err(invalid("offdiag boxes must have one entry per coordinate"));
                }
            }
            if o.t_list.len() < 2 {
                return Err(invalid("offdiag.t_list needs at least two values"));
            }
            for &t in &o.t_list {
                check_positive("offdiag.t_list entry", t)?;
            }
            check_range("offdiag.r_squared_min", o.r_squared_min, 0.0, 1.0 + 1e-12)?;
        }
        if let Some(n) = &self.nonlocal {
            for &a in &n.alpha_list {
                check_range("nonlocal.alpha_list entry", a, 0.0, 2.0)?;
            }
            check_range("nonlocal.control_alpha", n.control_alpha, 0.0, 2.0)?;
            check_positive("nonlocal.agreement", n.agreement)?;
        }
        if let Some(c) = &self.covering {
            if c.t_list.is_empty() {
                return Err(invalid("covering.t_list must not be empty"));
            }
            for &t in &c.t_list {
                check_positive("covering.t_list entry", t)?;
            }
            for &th in &c.theta_list {
                if !(th >= 1.0 && th.is_finite()) {
                    return Err(invalid(format!("covering.theta_list entry {th} must be at least 1")));
                }
            }
            if let Some(t) = c.annulus_t {
                check_positive("covering.annulus_t", t)?;
            }
            if c.k_max > 20 {
                return Err(invalid("covering.k_max must be at most 20"));
            }
            check_positive("covering.stability", c.stability)?;
        }
        Ok(())
    }

    pub fn group_instance(&self) -> Result<GroupInstance, LabError> {
        match self.group.kind {
            GroupName::Euclidean => Ok(GroupInstance::euclidean(self.group.n.unwrap_or(0))?),
            GroupName::Heisenberg1 => crate::volume::heisenberg(
                self.group.volume_samples.unwrap_or(DEFAULT_VOLUME_SAMPLES),
                self.group.volume_seed.unwrap_or(DEFAULT_VOLUME_SEED),
            ),
        }
    }

    pub fn weight_spec(&self, group: &GroupInstance) -> Result<WeightSpec, LabError> {
        if let Some(name) = &self.weight.name {
            return Ok(library(name, group)?);
        }
        let text = self.weight.polynomial.as_deref().unwrap_or_default();
        let poly = parse_polynomial(text, group.kind())?;
        Ok(WeightSpec::new("polynomial", poly))
    }

    /// Grid box at `resolution` nodes per axis.
    pub fn grid_spec(&self, resolution: usize) -> GridSpec {
        let dim = self.dim();
        let r = self.grid.domain_radius;
        GridSpec {
            lower: self.grid.lower.clone().unwrap_or_else(|| vec![-r; dim]),
            upper: self.grid.upper.clone().unwrap_or_else(|| vec![r; dim]),
            resolution: vec![resolution; dim],
            tail_policy: self.grid.tail_policy,
            max_nodes: MAX_NODES,
        }
    }
}
