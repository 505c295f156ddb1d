//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output = "report.csv"
//! m0 = 5
//! n_sweep = [4, 8, 16, 32, 64]
//! trials = 50
//! snr_db = 10.0
//! train_pool = 64
//!
//! [dataset]
//! kind = "synthetic"
//! nodes = 25
//!
//! [features]
//! kind = "identity"
//!
//! [cv]
//! folds = 4
//! lrg_selection = "initial"
//! nrlrg_selection = "initial"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::Pairing;
use super::synth::SyntheticSpec;
use crate::error::{Error, Result};
use crate::eval::{default_grid, CvConfig};
use crate::features::FeatureSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Report CSV; the aggregated table goes next to it.
    pub output: PathBuf,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub features: FeatureSpec,
    pub m0: usize,
    /// Full permutation of output nodes; the first `m0` form the initial graph.
    #[serde(default)]
    pub node_order: Option<Vec<usize>>,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    pub n_sweep: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Leading pairs reserved for training; the remainder is the test set.
    /// Defaults to `max(n_sweep)`.
    #[serde(default)]
    pub train_pool: Option<usize>,
    #[serde(default)]
    pub cv: CvSettings,
    /// Evaluate every method after each insertion, not only at the full graph.
    #[serde(default = "yes")]
    pub eval_every_node: bool,
    /// Record wall times; off keeps reports byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    /// Check `F Q = I` after every insertion and re-solve on failure.
    #[serde(default)]
    pub verify: bool,
}

fn default_snr() -> f64 {
    10.0
}

fn default_trials() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv {
        /// Signal matrix, header `node_1..node_M`.
        signals: PathBuf,
        pairing: Pairing,
        /// `name,lat,lon` per output node, for a geodesic adjacency.
        #[serde(default)]
        coords: Option<PathBuf>,
        /// Explicit adjacency over output nodes; takes precedence over coords.
        #[serde(default)]
        adjacency: Option<PathBuf>,
    },
}

/// When `(alpha, beta)` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Once, on the initial `m0`-node graph.
    Initial,
    /// Again at every evaluated graph size (LR and LRG only).
    PerSize,
    /// Once, on the full graph.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedHyper {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub folds: usize,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub lrg_selection: Selection,
    pub nrlrg_selection: Selection,
    /// Skip cross-validation and use these for every method (LR takes `alpha`).
    pub fixed: Option<FixedHyper>,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            folds: 4,
            alpha_grid: default_grid(),
            beta_grid: default_grid(),
            lrg_selection: Selection::Initial,
            nrlrg_selection: Selection::Initial,
            fixed: None,
        }
    }
}

impl CvSettings {
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            alpha_grid: self.alpha_grid.clone(),
            beta_grid: self.beta_grid.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: base_dir.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config { msg, .. } => Error::Config {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        if let DatasetSource::Csv {
            signals,
            coords,
            adjacency,
            ..
        } = &mut self.dataset
        {
            fix(signals);
            if let Some(c) = coords {
                fix(c);
            }
            if let Some(a) = adjacency {
                fix(a);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.m0 < 1 {
            return bad("m0 must be at least 1".into());
        }
        if self.n_sweep.is_empty() || self.n_sweep.contains(&0) {
            return bad("n_sweep must list positive training sizes".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.snr_db.is_nan() {
            return bad("snr_db must be a number".into());
        }
        if let Some(order) = &self.node_order {
            let mut seen = vec![false; order.len()];
            for &v in order {
                if v >= order.len() || std::mem::replace(&mut seen[v], true) {
                    return bad(format!("node_order is not a permutation (entry {v})"));
                }
            }
        }
        match &self.cv.fixed {
            Some(h) => crate::lrg::check_penalties(h.alpha, h.beta)?,
            None => {
                self.cv.cv_config().validate()?;
                let min_n = *self.n_sweep.iter().min().expect("non-empty");
                if min_n < self.cv.folds {
                    return bad(format!(
                        "smallest training size {min_n} is below the fold count {}",
                        self.cv.folds
                    ));
                }
            }
        }
        if self.cv.nrlrg_selection == Selection::PerSize {
            return bad("nrlrg_selection cannot be per_size: the recursion keeps (alpha, beta) fixed".into());
        }
        Ok(())
    }
}
