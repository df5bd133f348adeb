//! Run configuration files.
//!
//! A config is TOML with four sections. Only `[model]` and `[run]` are
//! needed for single ground states; `[scan]` drives the `scan` subcommand.
//!
//! ```toml
//! [model]
//! n_sites = 78
//! j_af = 1.0
//! j_f = -1.0
//! delta_af = 1.0
//! delta_f = 2.3
//!
//! [run]
//! backend = "auto"        # "auto" | "ed" | "dmrg"
//! output_dir = "out"
//! checkpoint = true
//!
//! [dmrg]
//! max_kept_m = 128
//!
//! [scan]
//! sizes = [20, 40, 60, 80]
//! start = 1.6
//! stop = 3.0
//! step = 0.05
//! observable = "entropy"  # "susceptibility" | "entropy" | "both"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinchain::dmrg::DmrgConfig;
use spinchain::model::{Boundary, ModelParams};
use spinchain::scan::{self, Backend, Observable, ScanConfig, AUTO_EXACT_MAX_SITES};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Auto,
    Ed,
    Dmrg,
}

impl BackendChoice {
    pub fn resolve(self, n_sites: usize) -> Backend {
        match self {
            BackendChoice::Ed => Backend::Exact,
            BackendChoice::Dmrg => Backend::Dmrg,
            BackendChoice::Auto if n_sites <= AUTO_EXACT_MAX_SITES => Backend::Exact,
            BackendChoice::Auto => Backend::Dmrg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObservableChoice {
    #[default]
    Susceptibility,
    Entropy,
    Both,
}

impl From<ObservableChoice> for Observable {
    fn from(o: ObservableChoice) -> Self {
        match o {
            ObservableChoice::Susceptibility => Observable::FidelitySusceptibility,
            ObservableChoice::Entropy => Observable::Entropy,
            ObservableChoice::Both => Observable::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub j_af: f64,
    #[serde(default = "minus_one")]
    pub j_f: f64,
    #[serde(default = "one")]
    pub delta_af: f64,
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

fn default_delta_f() -> f64 {
    2.3
}

impl ModelSection {
    pub fn params(&self, n_sites: usize) -> ModelParams {
        ModelParams {
            n_sites,
            j_af: self.j_af,
            j_f: self.j_f,
            delta_af: self.delta_af,
            delta_f: self.delta_f,
            boundary: Boundary::Open,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: bool,
}

/// DMRG settings; absent keys take the library defaults for the observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DmrgSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_kept_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sweeps_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_solver_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DmrgSection {
    pub fn apply(&self, base: DmrgConfig) -> DmrgConfig {
        DmrgConfig {
            max_kept_m: self.max_kept_m.unwrap_or(base.max_kept_m),
            n_sweeps_max: self.n_sweeps_max.unwrap_or(base.n_sweeps_max),
            energy_tol: self.energy_tol.unwrap_or(base.energy_tol),
            local_solver_tol: self.local_solver_tol.unwrap_or(base.local_solver_tol),
            local_max_iter: self.local_max_iter.unwrap_or(base.local_max_iter),
            degeneracy_tol: self.degeneracy_tol.unwrap_or(base.degeneracy_tol),
            seed: self.seed.unwrap_or(base.seed),
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Chain lengths to scan; defaults to `[model] n_sites`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_start")]
    pub start: f64,
    #[serde(default = "default_stop")]
    pub stop: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub observable: ObservableChoice,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "default_refine_width")]
    pub refine_width: f64,
    #[serde(default = "default_refine_points")]
    pub refine_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_l: Option<usize>,
    #[serde(default)]
    pub allow_f_bond_cut: bool,
}

fn default_start() -> f64 {
    1.6
}

fn default_stop() -> f64 {
    3.0
}

fn default_step() -> f64 {
    0.05
}

fn default_delta() -> f64 {
    0.001
}

fn yes() -> bool {
    true
}

fn default_refine_width() -> f64 {
    0.2
}

fn default_refine_points() -> usize {
    21
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            sizes: None,
            start: default_start(),
            stop: default_stop(),
            step: default_step(),
            delta: default_delta(),
            observable: ObservableChoice::default(),
            refine: true,
            refine_width: default_refine_width(),
            refine_points: default_refine_points(),
            entropy_l: None,
            allow_f_bond_cut: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub dmrg: DmrgSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn backend(&self, n_sites: usize) -> Backend {
        self.run.backend.resolve(n_sites)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.scan
            .as_ref()
            .and_then(|s| s.sizes.clone())
            .unwrap_or_else(|| vec![self.model.n_sites])
    }

    /// DMRG settings for a run measuring `observable`.
    pub fn dmrg_config(&self, observable: Observable) -> DmrgConfig {
        let base = match observable {
            Observable::Entropy => DmrgConfig::for_entropy(),
            _ => DmrgConfig::for_fidelity(),
        };
        self.dmrg.apply(base)
    }

    pub fn scan_config(&self, n_sites: usize) -> Result<ScanConfig, CliError> {
        let s = self.scan.clone().unwrap_or_default();
        if !(s.step > 0.0) || !(s.stop > s.start) {
            return Err(CliError::Usage(format!(
                "scan grid needs start < stop and step > 0 (got {}..{} step {})",
                s.start, s.stop, s.step
            )));
        }
        let observable: Observable = s.observable.into();
        let mut c = ScanConfig::new(self.model.params(n_sites), self.backend(n_sites), observable);
        c.delta_f_grid = scan::uniform_grid(s.start, s.stop, s.step);
        c.delta_step = s.delta;
        c.dmrg = self.dmrg_config(observable);
        c.refine = s.refine;
        c.refine_width = s.refine_width;
        c.refine_points = s.refine_points;
        c.entropy_l = s.entropy_l;
        c.allow_f_bond_cut = s.allow_f_bond_cut;
        c.validate().map_err(|e| CliError::Usage(format!("N = {n_sites}: {e}")))?;
        Ok(c)
    }
}
