//! Experiment configuration: a JSON file with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frachardy_core::{DomainSpec, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dimension for grid-free commands; must match the domain otherwise.
    pub d: Option<usize>,
    pub alpha: f64,
    /// Absolute coupling; exclusive with `c_frac`.
    pub c: Option<f64>,
    /// Coupling as a fraction of `c*`.
    pub c_frac: Option<f64>,
    pub domain: DomainSpec,
    /// Cells per axis of the base grid.
    pub n: usize,
    /// Eigenpairs kept by `solve`.
    pub eigenpairs: usize,
    /// Number of grid doublings used by refinement checks.
    pub refinements: usize,
    /// Times for heat kernels; empty means `gap·t ∈ {2.5, 5, 7.5, 10}`.
    pub t_ladder: Vec<f64>,
    /// Checks run by `verify-all`; empty means all.
    pub checks: Vec<String>,
    /// Per-check tolerance overrides, keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
    /// Coupling fractions for `sweep`.
    pub sweep: Vec<f64>,
    /// Radii for `riesz-check`.
    pub radii: Vec<f64>,
    /// Exponent for `riesz-check`; defaults to `β(c)`, or `β_c / 2` when `c` is 0 or `c*`.
    pub beta: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: None,
            alpha: 0.5,
            c: None,
            c_frac: None,
            domain: DomainSpec::Interval { a: -1.0, b: 1.0 },
            n: 512,
            eigenpairs: 8,
            refinements: 2,
            t_ladder: Vec::new(),
            checks: Vec::new(),
            tolerances: BTreeMap::new(),
            sweep: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            radii: vec![0.5, 1.0, 2.0],
            beta: None,
            out_dir: PathBuf::from("frachardy-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Dimension of the grid commands.
    pub fn grid_dim(&self) -> Result<usize> {
        let dim = self.domain.dim();
        if let Some(d) = self.d {
            if d != dim {
                bail!("--d {d} contradicts the {dim}-dimensional domain {}", self.domain);
            }
        }
        Ok(dim)
    }

    /// Dimension of the grid-free commands.
    pub fn free_dim(&self) -> usize {
        self.d.unwrap_or_else(|| self.domain.dim())
    }

    pub fn params_in(&self, d: usize) -> Result<ModelParams> {
        let p = match (self.c, self.c_frac) {
            (Some(_), Some(_)) => bail!("give either c or c_frac, not both"),
            (Some(c), None) => ModelParams::new(d, self.alpha, c)?,
            (None, Some(f)) => ModelParams::with_fraction(d, self.alpha, f)?,
            (None, None) => ModelParams::new(d, self.alpha, 0.0)?,
        };
        Ok(p)
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.params_in(self.grid_dim()?)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validated()?;
        if self.n < 4 {
            bail!("n = {} is below the minimum of 4 cells per axis", self.n);
        }
        if self.eigenpairs == 0 {
            bail!("eigenpairs must be positive");
        }
        crate::checks::validate_names(&self.checks)?;
        if self.t_ladder.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            bail!("t-ladder entries must be positive");
        }
        if self.t_ladder.windows(2).any(|w| w[1] <= w[0]) {
            bail!("t-ladder must be strictly increasing");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"alpha": 1.0, "domain": {"kind": "disk", "r": 1.0}, "c_frac": 0.5}"#).unwrap();
        assert_eq!(cfg.grid_dim().unwrap(), 2);
        let p = cfg.params().unwrap();
        assert!((p.c - 0.5 * p.c_star()).abs() < 1e-15);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"alpah": 1.0}"#).is_err());
    }

    #[test]
    fn conflicts() {
        let cfg = ExperimentConfig { c: Some(0.1), c_frac: Some(0.5), ..Default::default() };
        assert!(cfg.params().is_err());
        let cfg = ExperimentConfig { d: Some(2), ..Default::default() };
        assert!(cfg.grid_dim().is_err());
        assert_eq!(cfg.free_dim(), 2);
    }
}
