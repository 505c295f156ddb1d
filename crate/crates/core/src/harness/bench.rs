//! Timing of one recursive insertion against a batch re-solve at the grown size.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::graph::{Graph, NodeAttachment};
use crate::lrg::{solve_batch, LrgProblem};
use crate::nrlrg::RecursionState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    /// Nodes before the insertion.
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m: 50,
            k: 10,
            n: 100,
            reps: 10,
            alpha: 0.1,
            beta: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub recursive_s: Vec<f64>,
    pub batch_s: Vec<f64>,
    pub recursive_median_s: f64,
    pub batch_median_s: f64,
    /// Recursive median over batch median.
    pub ratio: f64,
    /// Largest entry of `|W_recursive - W_batch|` seen across repetitions.
    pub max_weight_gap: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Random problem of the configured size: Erdos-Renyi style graph with
/// uniform weights, Gaussian design and targets.
fn random_instance(cfg: &BenchConfig) -> Result<(Graph, NodeAttachment, DesignMatrix, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.m;
    let mut adjacency = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..j {
            if rng.random_bool(0.2) {
                let w: f64 = rng.random();
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
        }
    }
    let attachment = NodeAttachment::new(
        (0..m)
            .map(|_| if rng.random_bool(0.2) { rng.random() } else { 0.0 })
            .collect(),
    )?;
    let phi = DesignMatrix::new(DMatrix::from_fn(cfg.n, cfg.k, |_, _| rng.sample(StandardNormal)))?;
    let targets = DMatrix::from_fn(cfg.n, m + 1, |_, _| rng.sample(StandardNormal));
    Ok((Graph::new(adjacency)?, attachment, phi, targets))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.m == 0 || cfg.k == 0 || cfg.n == 0 || cfg.reps == 0 {
        return Err(Error::Validation("bench sizes and repetitions must be positive".into()));
    }
    let (graph, attachment, phi, targets) = random_instance(cfg)?;
    let state = RecursionState::init(
        graph.clone(),
        phi.clone(),
        targets.columns(0, cfg.m).clone_owned(),
        cfg.alpha,
        cfg.beta,
    )?;
    let new_column: DVector<f64> = targets.column(cfg.m).clone_owned();
    let grown = graph.append_node(&attachment)?;

    let mut recursive_s = Vec::with_capacity(cfg.reps);
    let mut batch_s = Vec::with_capacity(cfg.reps);
    let mut max_weight_gap: f64 = 0.0;
    for _ in 0..cfg.reps {
        let start = Instant::now();
        let next = state.update(&attachment, &new_column)?;
        recursive_s.push(start.elapsed().as_secs_f64());

        let start = Instant::now();
        let problem = LrgProblem::new(
            phi.clone(),
            targets.clone(),
            grown.laplacian().clone(),
            cfg.alpha,
            cfg.beta,
        )?;
        let batch = solve_batch(&problem)?;
        batch_s.push(start.elapsed().as_secs_f64());

        let gap = (next.weights().matrix() - batch.matrix()).abs().max();
        max_weight_gap = max_weight_gap.max(gap);
    }

    let recursive_median_s = median(&recursive_s);
    let batch_median_s = median(&batch_s);
    Ok(BenchResult {
        recursive_s,
        batch_s,
        recursive_median_s,
        batch_median_s,
        ratio: recursive_median_s / batch_median_s,
        max_weight_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench_agrees_with_batch() {
        let cfg = BenchConfig {
            m: 8,
            k: 3,
            n: 12,
            reps: 3,
            ..BenchConfig::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.recursive_s.len(), 3);
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        assert!(r.max_weight_gap < 1e-8, "gap {}", r.max_weight_gap);
    }

    #[test]
    fn rejects_zero_reps() {
        let cfg = BenchConfig {
            reps: 0,
            ..BenchConfig::default()
        };
        assert!(run_bench(&cfg).is_err());
    }
}
