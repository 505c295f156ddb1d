//! Batch linear regression over graphs.
//!
//! The model predicts a graph signal `y = W^T phi(x)` with `W` of shape K x M.
//! Coefficients minimise
//!
//! ```text
//! C(W) = sum_n |t_n - W^T phi(x_n)|^2 + alpha |W|_F^2 + beta sum_n y_n^T L y_n
//! ```
//!
//! whose normal equations are `F vec(W) = vec(Phi^T T)` with
//! `F = (I_M + beta L) (x) Phi^T Phi + alpha I_MK`. `vec` stacks columns, so
//! node `m` owns the contiguous K-block `m*K..(m+1)*K` of `vec(W)` and
//! `F` is an M x M grid of K x K blocks.
//!
//! Plain ridge regression (LR) is the `beta = 0` case of the same solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, FeatureMap};

/// K x M regression coefficients; column `m` belongs to node `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<f64>);

impl CoefficientMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(
                "coefficient matrix has non-finite entries".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn zeros(features: usize, nodes: usize) -> Self {
        Self(DMatrix::zeros(features, nodes))
    }

    /// Inverse of [`CoefficientMatrix::vec`].
    pub fn from_vec(features: usize, nodes: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != features * nodes {
            return Err(Error::dims("vec(W)", features * nodes, v.len()));
        }
        Self::new(DMatrix::from_column_slice(features, nodes, v.as_slice()))
    }

    pub fn features(&self) -> usize {
        self.0.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Column-stacked vectorisation.
    pub fn vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    /// Predictions `Phi W` for every row of `phi` (N x M).
    pub fn predict_design(&self, phi: &DesignMatrix) -> Result<DMatrix<f64>> {
        if phi.features() != self.features() {
            return Err(Error::dims("prediction features", self.features(), phi.features()));
        }
        Ok(phi.matrix() * &self.0)
    }
}

/// One LRG instance: design matrix, N x M targets, Laplacian and penalties.
#[derive(Debug, Clone)]
pub struct LrgProblem {
    pub phi: DesignMatrix,
    pub targets: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl LrgProblem {
    pub fn new(
        phi: DesignMatrix,
        targets: DMatrix<f64>,
        laplacian: DMatrix<f64>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        check_penalties(alpha, beta)?;
        if targets.nrows() != phi.samples() {
            return Err(Error::dims("target rows", phi.samples(), targets.nrows()));
        }
        if !laplacian.is_square() || laplacian.nrows() != targets.ncols() {
            return Err(Error::dims(
                "Laplacian",
                format!("{0}x{0}", targets.ncols()),
                format!("{}x{}", laplacian.nrows(), laplacian.ncols()),
            ));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("targets must be finite".into()));
        }
        Ok(Self {
            phi,
            targets,
            laplacian,
            alpha,
            beta,
        })
    }

    /// Graph-free ridge problem (`beta = 0`, no edges).
    pub fn ridge(phi: DesignMatrix, targets: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let m = targets.ncols();
        Self::new(phi, targets, DMatrix::zeros(m, m), alpha, 0.0)
    }

    pub fn nodes(&self) -> usize {
        self.targets.ncols()
    }

    pub fn features(&self) -> usize {
        self.phi.features()
    }

    /// `Phi^T T`, K x M. Its vectorisation is the right-hand side of the
    /// normal equations.
    pub fn projected_targets(&self) -> DMatrix<f64> {
        self.phi.matrix().tr_mul(&self.targets)
    }
}

pub(crate) fn check_penalties(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
        return Err(Error::Validation(format!(
            "penalties must be finite and nonnegative, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(())
}

/// `F = (I_M + beta L) (x) G + alpha I_MK` for a K x K Gram matrix `G`.
pub fn build_f_from_gram(
    laplacian: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    check_penalties(alpha, beta)?;
    if !laplacian.is_square() || !gram.is_square() {
        return Err(Error::dims(
            "build_f",
            "square Laplacian and Gram matrices",
            format!(
                "{}x{} and {}x{}",
                laplacian.nrows(),
                laplacian.ncols(),
                gram.nrows(),
                gram.ncols()
            ),
        ));
    }
    let m = laplacian.nrows();
    let k = gram.nrows();
    let mut f = DMatrix::zeros(m * k, m * k);
    for j in 0..m {
        for i in 0..m {
            let coupling = if i == j { 1.0 } else { 0.0 } + beta * laplacian[(i, j)];
            if coupling == 0.0 {
                continue;
            }
            let mut block = f.view_mut((i * k, j * k), (k, k));
            block.zip_apply(gram, |fv, gv| *fv = coupling * gv);
        }
    }
    for d in 0..m * k {
        f[(d, d)] += alpha;
    }
    Ok(f)
}

pub fn build_f(
    laplacian: &DMatrix<f64>,
    phi: &DesignMatrix,
    alpha: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    build_f_from_gram(laplacian, &phi.gram(), alpha, beta)
}

/// Optimal coefficients for `problem` via an SPD factorisation of `F`.
///
/// With `beta = 0` (or an edgeless graph) `F` is block diagonal with identical
/// blocks `Phi^T Phi + alpha I`, so a single K x K factorisation serves every
/// node.
pub fn solve_batch(problem: &LrgProblem) -> Result<CoefficientMatrix> {
    let k = problem.features();
    let m = problem.nodes();
    let gram = problem.phi.gram();
    let rhs = problem.projected_targets();

    let decoupled = problem.beta == 0.0 || problem.laplacian.iter().all(|&v| v == 0.0);
    let w = if decoupled {
        let mut block = gram;
        for d in 0..k {
            block[(d, d)] += problem.alpha;
        }
        let chol = block.cholesky().ok_or_else(|| {
            Error::Singular("Phi^T Phi + alpha I is not positive definite".into())
        })?;
        chol.solve(&rhs)
    } else {
        let f = build_f_from_gram(&problem.laplacian, &gram, problem.alpha, problem.beta)?;
        let chol = f
            .cholesky()
            .ok_or_else(|| Error::Singular("F is not positive definite".into()))?;
        let v = chol.solve(&DVector::from_column_slice(rhs.as_slice()));
        DMatrix::from_column_slice(k, m, v.as_slice())
    };
    CoefficientMatrix::new(w).map_err(|_| Error::Singular("batch solve produced non-finite coefficients".into()))
}

/// `W^T phi(x)`.
pub fn predict(w: &CoefficientMatrix, x: &DVector<f64>, map: &FeatureMap) -> Result<DVector<f64>> {
    if map.output_dim() != w.features() {
        return Err(Error::dims("predict feature dimension", w.features(), map.output_dim()));
    }
    let features = map.apply(x)?;
    Ok(w.matrix().tr_mul(&features))
}

fn check_cost_dims(w: &CoefficientMatrix, p: &LrgProblem) -> Result<()> {
    if w.features() != p.features() || w.nodes() != p.nodes() {
        return Err(Error::dims(
            "cost coefficient shape",
            format!("{}x{}", p.features(), p.nodes()),
            format!("{}x{}", w.features(), w.nodes()),
        ));
    }
    Ok(())
}

/// Cost as a sum over samples: data misfit, Frobenius penalty and the
/// Laplacian quadratic form of each prediction.
pub fn cost(w: &CoefficientMatrix, p: &LrgProblem) -> Result<f64> {
    check_cost_dims(w, p)?;
    let phi = p.phi.matrix();
    let mut misfit = 0.0;
    let mut roughness = 0.0;
    for n in 0..phi.nrows() {
        let y = w.matrix().tr_mul(&phi.row(n).transpose());
        let t = p.targets.row(n).transpose();
        misfit += (&t - &y).norm_squared();
        roughness += y.dot(&(&p.laplacian * &y));
    }
    Ok(misfit + p.alpha * w.matrix().norm_squared() + p.beta * roughness)
}

/// The same cost written with traces:
/// `tr(T^T T) - 2 tr(T^T Phi W) + tr(W^T Phi^T Phi W) + alpha tr(W^T W) + beta tr(W^T Phi^T Phi W L)`.
pub fn cost_trace_form(w: &CoefficientMatrix, p: &LrgProblem) -> Result<f64> {
    check_cost_dims(w, p)?;
    let w = w.matrix();
    let t = &p.targets;
    let gram = p.phi.gram();
    let gw = &gram * w;
    let wtgw = w.tr_mul(&gw);
    Ok(t.tr_mul(t).trace() - 2.0 * t.tr_mul(&(p.phi.matrix() * w)).trace()
        + wtgw.trace()
        + p.alpha * w.tr_mul(w).trace()
        + p.beta * (wtgw * &p.laplacian).trace())
}
