//! Expansion experiment: grow a graph node by node and compare ridge
//! regression (LR), batch LRG re-solved at every size, and the node-recursive
//! update seeded at `m0`.

use std::borrow::Cow;
use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

use super::config::{DatasetSource, ExperimentConfig, Selection};
use super::dataset::{load_signals, Dataset};
use super::report::{emit_report, ExperimentReport, Method, ReportRow, Truth};
use super::synth::{self, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{add_noise, cross_validate, cross_validate_ridge, nmse, Hyperparameters, NoiseSpec};
use crate::features::{DesignMatrix, FeatureMap};
use crate::graph::{geodesic_adjacency, Graph};
use crate::io::{read_coords_csv, read_matrix_csv};
use crate::lrg::{solve_batch, CoefficientMatrix, LrgProblem};
use crate::nrlrg::RecursionState;

/// Dataset plus the graph over its output nodes.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub graph: Graph,
    pub truth: Truth,
    /// Set when every trial draws its own synthetic pairs.
    pub resample: Option<SyntheticSpec>,
}

impl PreparedData {
    /// The pairs used by `trial`.
    pub fn trial_dataset(&self, trial: usize) -> Result<Cow<'_, Dataset>> {
        match &self.resample {
            Some(spec) => Ok(Cow::Owned(synth::draw_pairs(
                spec,
                &self.graph,
                trial_seed(spec.seed ^ PAIRS_SALT, trial),
            )?)),
            None => Ok(Cow::Borrowed(&self.dataset)),
        }
    }
}

pub fn prepare_data(source: &DatasetSource) -> Result<PreparedData> {
    match source {
        DatasetSource::Synthetic(spec) => {
            let data = synth::generate(spec)?;
            Ok(PreparedData {
                dataset: data.dataset,
                graph: data.graph,
                truth: Truth::Clean,
                resample: spec.resample_per_trial.then(|| spec.clone()),
            })
        }
        DatasetSource::Csv {
            signals,
            pairing,
            coords,
            adjacency,
        } => {
            let mut dataset = load_signals(signals, pairing)?;
            let graph = if let Some(path) = adjacency {
                Graph::new(read_matrix_csv(path)?.1)?
            } else if let Some(path) = coords {
                let points: Vec<_> = read_coords_csv(path)?.into_iter().map(|(_, p)| p).collect();
                dataset = dataset.with_coords(points.clone())?;
                Graph::new(geodesic_adjacency(&points)?)?
            } else {
                return Err(Error::Validation(
                    "CSV dataset needs either `adjacency` or `coords`".into(),
                ));
            };
            if graph.node_count() != dataset.nodes() {
                return Err(Error::dims("graph nodes", dataset.nodes(), graph.node_count()));
            }
            Ok(PreparedData {
                dataset,
                graph,
                truth: Truth::Observed,
                resample: None,
            })
        }
    }
}

/// Runs the configured sweep and returns the normalised report.
pub fn run_expansion_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = prepare_data(&cfg.dataset)?;
    let mut report = ExperimentReport::new(data.truth);
    run_into(cfg, &data, &mut report)?;
    report.normalize();
    Ok(report)
}

/// Like [`run_expansion_experiment`] but writes the report to
/// `cfg.output`; rows gathered before a failure are still written.
pub fn run_and_emit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = prepare_data(&cfg.dataset)?;
    emit_after(data.truth, &cfg.output, |report| run_into(cfg, &data, report))
}

/// Runs `body`, then writes whatever rows it produced; `body`'s error wins
/// over a successful write.
fn emit_after(
    truth: Truth,
    path: &Path,
    body: impl FnOnce(&mut ExperimentReport) -> Result<()>,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(truth);
    let outcome = body(&mut report);
    report.normalize();
    emit_report(&report, path)?;
    outcome.map(|_| report)
}

/// Separates the pair stream from the noise stream when both seeds coincide.
const PAIRS_SALT: u64 = 0x5EED_DA7A_0000_0001;

/// Per-trial seed derived from a base seed.
fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn run_into(cfg: &ExperimentConfig, data: &PreparedData, report: &mut ExperimentReport) -> Result<()> {
    cfg.validate()?;
    let dataset = &data.dataset;
    let total_nodes = dataset.nodes();
    if cfg.m0 > total_nodes {
        return Err(Error::Validation(format!(
            "m0 = {} exceeds the {total_nodes} output nodes",
            cfg.m0
        )));
    }
    let order: Vec<usize> = match &cfg.node_order {
        Some(o) if o.len() != total_nodes => {
            return Err(Error::dims("node_order length", total_nodes, o.len()))
        }
        Some(o) => o.clone(),
        None => (0..total_nodes).collect(),
    };
    let max_n = *cfg.n_sweep.iter().max().expect("validated non-empty");
    let pool = cfg.train_pool.unwrap_or(max_n);
    if max_n > pool || pool >= dataset.len() {
        return Err(Error::Validation(format!(
            "need max(n_sweep) = {max_n} <= train_pool = {pool} < {} pairs",
            dataset.len()
        )));
    }

    let map = FeatureMap::from_spec(&cfg.features, dataset.input_dim())?;
    let graph = data.graph.induced(&order)?;

    for trial in 0..cfg.trials {
        let dataset = data.trial_dataset(trial)?;
        let test_rows = dataset.len() - pool;
        let phi_pool = map.design_matrix(&dataset.inputs.rows(0, pool).clone_owned())?;
        let phi_test = map.design_matrix(&dataset.inputs.rows(pool, test_rows).clone_owned())?;
        let truth_test = dataset.targets.rows(pool, test_rows).select_columns(&order);
        let noisy_pool = add_noise(
            &dataset.targets.rows(0, pool).clone_owned(),
            NoiseSpec {
                snr_db: cfg.snr_db,
                seed: trial_seed(cfg.seed, trial),
            },
        )?
        .select_columns(&order);

        for &n in &cfg.n_sweep {
            let rows: Vec<usize> = (0..n).collect();
            let run = TrialRun {
                cfg,
                graph: &graph,
                phi: phi_pool.select_rows(&rows),
                targets: noisy_pool.rows(0, n).clone_owned(),
                phi_test: &phi_test,
                truth_test: &truth_test,
                trial,
                cv_cache: HashMap::new(),
            };
            run.execute(report)?;
        }
    }
    Ok(())
}

struct TrialRun<'a> {
    cfg: &'a ExperimentConfig,
    graph: &'a Graph,
    phi: DesignMatrix,
    /// N x M_total noisy training targets in insertion order.
    targets: DMatrix<f64>,
    phi_test: &'a DesignMatrix,
    truth_test: &'a DMatrix<f64>,
    trial: usize,
    cv_cache: HashMap<usize, (Hyperparameters, f64)>,
}

impl TrialRun<'_> {
    fn total_nodes(&self) -> usize {
        self.graph.node_count()
    }

    fn prefix(&self, nodes: usize) -> Vec<usize> {
        (0..nodes).collect()
    }

    /// LRG `(alpha, beta)` and LR `alpha` selected on the first `nodes` nodes.
    fn cross_validated(&mut self, nodes: usize) -> Result<(Hyperparameters, f64)> {
        if let Some(h) = self.cfg.cv.fixed {
            return Ok((Hyperparameters { alpha: h.alpha, beta: h.beta }, h.alpha));
        }
        if let Some(cached) = self.cv_cache.get(&nodes) {
            return Ok(*cached);
        }
        let sub = self.graph.induced(&self.prefix(nodes))?;
        let targets = self.targets.columns(0, nodes).clone_owned();
        let cv = self.cfg.cv.cv_config();
        let lrg = cross_validate(&self.phi, &targets, sub.laplacian(), &cv)?;
        let lr = cross_validate_ridge(&self.phi, &targets, cv.folds, &cv.alpha_grid)?;
        self.cv_cache.insert(nodes, (lrg, lr));
        Ok((lrg, lr))
    }

    fn selection_size(&self, selection: Selection, nodes: usize) -> usize {
        match selection {
            Selection::Initial => self.cfg.m0,
            Selection::PerSize => nodes,
            Selection::Final => self.total_nodes(),
        }
    }

    fn timed<T>(&self, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
        let start = Instant::now();
        let out = f()?;
        let elapsed = start.elapsed().as_secs_f64();
        Ok((out, if self.cfg.record_timing { elapsed } else { 0.0 }))
    }

    fn test_nmse(&self, w: &CoefficientMatrix) -> Result<f64> {
        let nodes = w.nodes();
        let pred = w.predict_design(self.phi_test)?;
        nmse(&pred, &self.truth_test.columns(0, nodes).clone_owned())
    }

    fn push(&self, report: &mut ExperimentReport, method: Method, nodes: usize, nmse: f64, wall: f64) {
        report.rows.push(ReportRow {
            method,
            nodes,
            samples: self.phi.samples(),
            trial: self.trial,
            nmse,
            wall_time_s: wall,
        });
    }

    fn evaluate_batch(&mut self, report: &mut ExperimentReport, nodes: usize) -> Result<()> {
        let size = self.selection_size(self.cfg.cv.lrg_selection, nodes);
        let (lrg_h, lr_alpha) = self.cross_validated(size)?;
        let targets = self.targets.columns(0, nodes).clone_owned();
        let sub = self.graph.induced(&self.prefix(nodes))?;

        let lr_problem = LrgProblem::ridge(self.phi.clone(), targets.clone(), lr_alpha)?;
        let (w_lr, t_lr) = self.timed(|| solve_batch(&lr_problem))?;
        let lr = self.test_nmse(&w_lr)?;
        self.push(report, Method::Lr, nodes, lr, t_lr);

        let lrg_problem = LrgProblem::new(
            self.phi.clone(),
            targets,
            sub.laplacian().clone(),
            lrg_h.alpha,
            lrg_h.beta,
        )?;
        let (w_lrg, t_lrg) = self.timed(|| solve_batch(&lrg_problem))?;
        let lrg = self.test_nmse(&w_lrg)?;
        self.push(report, Method::Lrg, nodes, lrg, t_lrg);
        Ok(())
    }

    fn execute(mut self, report: &mut ExperimentReport) -> Result<()> {
        let m0 = self.cfg.m0;
        let total = self.total_nodes();
        let should_eval = |nodes: usize| self.cfg.eval_every_node || nodes == total;

        let nr_size = self.selection_size(self.cfg.cv.nrlrg_selection, m0);
        let (nr_h, _) = self.cross_validated(nr_size)?;

        let initial_graph = self.graph.induced(&self.prefix(m0))?;
        let initial_targets = self.targets.columns(0, m0).clone_owned();
        let (mut state, mut wall) = self.timed(|| {
            Ok(RecursionState::init(
                initial_graph,
                self.phi.clone(),
                initial_targets,
                nr_h.alpha,
                nr_h.beta,
            )?
            .with_verify(self.cfg.verify))
        })?;

        for nodes in m0..=total {
            if nodes > m0 {
                let new_node = nodes - 1;
                let attachment = self.graph.attachment_to(new_node, &self.prefix(new_node))?;
                let column = self.targets.column(new_node).clone_owned();
                let (next, t) = self.timed(|| state.update(&attachment, &column))?;
                state = next;
                wall = t;
            }
            if should_eval(nodes) {
                self.evaluate_batch(report, nodes)?;
                let nr = self.test_nmse(state.weights())?;
                self.push(report, Method::NrLrg, nodes, nr, wall);
            }
        }
        Ok(())
    }
}
