//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{select_truncation, TruncationWindow, DEFAULT_EPSILON};
use crate::model::{
    build_dirac_family, build_soler_coupling_with_constant, CoefficientFamily, DiracRadialParams, NonlinearCoupling,
    PotentialSpec,
};
use crate::ode::OdeOptions;
use crate::scalar::lin_space;
use crate::spectrum::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindConfig {
    Coulomb,
    Zero,
    Power,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: PotentialKindConfig,
    pub k: i32,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub mu_a: f64,
    /// CSV with columns `x,v`, relative to the config file.
    pub table: Option<PathBuf>,
    /// Must be `[-1, 1]` when given; the Dirac gap is fixed.
    pub gap: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub rtol: f64,
    pub atol: f64,
    pub tol: f64,
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub x0: Option<f64>,
    pub x_inf: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            tol: 1e-9,
            delta: None,
            epsilon: DEFAULT_EPSILON,
            x0: None,
            x_inf: None,
            lambda_min: -0.9,
            lambda_max: 0.999,
            lambda_points: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointConfig {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Level `k` for eigenfunction and branch; lowest found when absent.
    pub level: Option<i64>,
    pub samples: usize,
    pub endpoint: EndpointConfig,
    pub schedule: Vec<f64>,
    pub ds: f64,
    pub max_steps: usize,
    pub a_max: Option<f64>,
    /// Branch steps whose solutions are written out; first and last when absent.
    pub sample_steps: Option<Vec<usize>>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            level: None,
            samples: 400,
            endpoint: EndpointConfig::Upper,
            schedule: vec![1e2, 1e3, 1e4, 1e5],
            ds: 0.05,
            max_steps: 25,
            a_max: None,
            sample_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearityConfig {
    Linear,
    Cubic,
}

/// `γ(r) = r^p / (1 + r^q)`, `F(s) = c s` or `c s³`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    pub gamma_power: f64,
    pub gamma_decay: f64,
    pub f: NonlinearityConfig,
    pub f_scale: f64,
    pub lipschitz: Option<f64>,
    pub constant: Option<f64>,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { gamma_power: 2.0, gamma_decay: 5.0, f: NonlinearityConfig::Linear, f_scale: 1.0, lipschitz: None, constant: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub task: TaskConfig,
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parse or validation failure; each entry is one message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigErrors> {
        let text = fs::read_to_string(path).map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg = Self::from_toml(&text).map_err(|ConfigErrors(v)| {
            ConfigErrors(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect())
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigErrors(vec![e.to_string().trim_end().to_string()]))?;
        let errs = cfg.validate();
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errs))
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let p = &self.problem;
        if p.k == 0 {
            e.push("problem.k must be a nonzero integer".to_string());
        }
        match p.kind {
            PotentialKindConfig::Coulomb | PotentialKindConfig::Power if p.gamma.is_none() => {
                e.push("problem.gamma is required for this potential kind".to_string())
            }
            PotentialKindConfig::Tabulated if p.table.is_none() => {
                e.push("problem.table is required for a tabulated potential".to_string())
            }
            _ => {}
        }
        if p.kind == PotentialKindConfig::Power && !p.alpha.is_some_and(|a| a > 0.0) {
            e.push("problem.alpha must be positive for a power potential".to_string());
        }
        if !p.mu_a.is_finite() {
            e.push("problem.mu_a must be finite".to_string());
        }
        if let Some(g) = p.gap {
            if g != [-1.0, 1.0] {
                e.push(format!("problem.gap must be [-1, 1] for the radial Dirac family, got {g:?}"));
            }
        }
        let n = &self.numerics;
        if !(n.rtol > 0.0 && n.atol > 0.0 && n.tol > 0.0) {
            e.push("numerics.rtol, numerics.atol and numerics.tol must be positive".to_string());
        }
        if !(n.epsilon > 0.0) || n.delta.is_some_and(|d| !(d > 0.0)) {
            e.push("numerics.delta and numerics.epsilon must be positive".to_string());
        }
        if !(n.lambda_min > -1.0 && n.lambda_max < 1.0 && n.lambda_min < n.lambda_max) {
            e.push(format!(
                "numerics.lambda_min/lambda_max = [{}, {}] must be an increasing range inside the gap (-1, 1)",
                n.lambda_min, n.lambda_max
            ));
        }
        if n.lambda_points < 2 {
            e.push("numerics.lambda_points must be at least 2".to_string());
        }
        if let (Some(a), Some(b)) = (n.x0, n.x_inf) {
            if !(a > 0.0 && b > a) {
                e.push("numerics.x0 and numerics.x_inf must satisfy 0 < x0 < x_inf".to_string());
            }
        }
        let t = &self.task;
        if !(t.ds > 0.0) {
            e.push("task.ds must be positive".to_string());
        }
        if t.samples < 2 {
            e.push("task.samples must be at least 2".to_string());
        }
        if t.schedule.len() < 2 || t.schedule.windows(2).any(|w| !(w[1] > w[0])) || t.schedule[0] <= 0.0 {
            e.push("task.schedule must hold at least two increasing positive cutoffs".to_string());
        }
        if let Some(c) = &self.coupling {
            if !(c.gamma_power >= 0.0 && c.gamma_decay >= 0.0 && c.f_scale.is_finite()) {
                e.push("coupling.gamma_power and coupling.gamma_decay must be non-negative".to_string());
            }
            if c.constant.is_some_and(|v| !(v > 0.0)) {
                e.push("coupling.constant must be positive".to_string());
            }
        }
        e
    }

    /// SHA-256 of the canonical form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output = OutputConfig::default();
        let text = toml::to_string(&canon).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn ode_options(&self) -> OdeOptions<f64> {
        OdeOptions::with_tolerances(self.numerics.rtol, self.numerics.atol)
    }

    pub fn solve_options(&self) -> SolveOptions<f64> {
        SolveOptions { ode: self.ode_options(), tol: self.numerics.tol, ..SolveOptions::default() }
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        let n = &self.numerics;
        lin_space(n.lambda_min, n.lambda_max, n.lambda_points)
    }

    pub fn potential(&self) -> anyhow::Result<PotentialSpec<f64>> {
        let p = &self.problem;
        Ok(match p.kind {
            PotentialKindConfig::Coulomb => PotentialSpec::coulomb(p.gamma.unwrap_or_default()),
            PotentialKindConfig::Zero => PotentialSpec::zero(),
            PotentialKindConfig::Power => PotentialSpec::power(p.gamma.unwrap_or_default(), p.alpha.unwrap_or(1.0))?,
            PotentialKindConfig::Tabulated => {
                let path = self.base_dir.join(p.table.as_deref().unwrap_or(Path::new("")));
                let (xs, vs) = read_table(&path)?;
                PotentialSpec::tabulated(&xs, &vs)?
            }
        })
    }

    pub fn family(&self) -> anyhow::Result<CoefficientFamily<f64>> {
        let params = DiracRadialParams { k: self.problem.k, mu_a: self.problem.mu_a, potential: self.potential()? };
        Ok(build_dirac_family(params)?)
    }

    pub fn window(&self, family: &CoefficientFamily<f64>) -> crate::error::Result<TruncationWindow<f64>> {
        let n = &self.numerics;
        let delta = n.delta.unwrap_or_else(|| crate::asymptotics::default_delta(family));
        let need_select = n.x0.is_none() || n.x_inf.is_none();
        let (mut x0, mut x_inf) = (n.x0.unwrap_or(0.0), n.x_inf.unwrap_or(0.0));
        if need_select {
            let w = select_truncation(family, (n.lambda_min, n.lambda_max), delta, n.epsilon)?;
            x0 = n.x0.unwrap_or(w.x0);
            x_inf = n.x_inf.unwrap_or(w.x_inf);
        }
        TruncationWindow::new(x0, x_inf, delta, n.epsilon)
    }

    pub fn coupling(&self) -> Option<crate::error::Result<NonlinearCoupling<f64>>> {
        let c = self.coupling.clone()?;
        let (p, q) = (c.gamma_power, c.gamma_decay);
        let gamma = Arc::new(move |r: f64| r.powf(p) / (1.0 + r.powf(q)));
        let scale = c.f_scale;
        let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match c.f {
            NonlinearityConfig::Linear => Arc::new(move |s| scale * s),
            NonlinearityConfig::Cubic => Arc::new(move |s| scale * s * s * s),
        };
        let lip = c.lipschitz.unwrap_or(scale.abs());
        let constant = c.constant.unwrap_or(4.0 * std::f64::consts::PI);
        Some(build_soler_coupling_with_constant(gamma, f, lip, constant))
    }
}

fn read_table(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 2 {
            anyhow::bail!("{}: expected columns x,v", path.display());
        }
        xs.push(row[0].trim().parse::<f64>()?);
        vs.push(row[1].trim().parse::<f64>()?);
    }
    Ok((xs, vs))
}

#[cfg(test)]
mod tests {
    use super::*;

    const COULOMB: &str = "[problem]\nkind = \"coulomb\"\nk = -1\ngamma = -0.5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(COULOMB).unwrap();
        assert_eq!(c.numerics, NumericsConfig::default());
        assert_eq!(c.lambda_grid().len(), 50);
        assert!(c.coupling.is_none());
    }

    #[test]
    fn schema_errors_are_listed() {
        let e = RunConfig::from_toml("[problem]\nkind = \"coulomb\"\nk = 0\n[numerics]\nlambda_min = -2.0\n").unwrap_err();
        assert_eq!(e.0.len(), 3, "{e}");
        let e = RunConfig::from_toml("[problem]\nkind = \"coulomb\"\nk = -1\ngamma = -0.5\nbogus = 1\n").unwrap_err();
        assert!(e.0[0].contains("line"), "{e}");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::from_toml(COULOMB).unwrap();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.numerics.rtol = 1e-9;
        assert_ne!(a.hash(), c.hash());
    }
}
