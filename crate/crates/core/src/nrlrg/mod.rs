//! Node-recursive LRG.
//!
//! [`RecursionState`] carries the optimal coefficients `W_M` together with
//! `Q_M = F_M^{-1}` for the current graph. Appending a node partitions
//! `F_{M+1}` as `[[b, c], [c^T, d]]` with
//!
//! ```text
//! b = F_M + beta diag(a) (x) G       c = -beta a (x) G       d = (1 + beta a^T 1) G + alpha I
//! ```
//!
//! (`G = Phi^T Phi`), and the block inverse gives
//!
//! ```text
//! h = beta diag(a) (x) G - c d^-1 c^T
//! z = (Q_M^-1 + h)^-1 = Q_M - Q_M h (I + Q_M h)^-1 Q_M
//! m = -z c d^-1
//! n = d^-1 + d^-1 c^T z c d^-1
//! Q_{M+1} = [[z, m], [m^T, n]]
//! vec(W_{M+1}) = [ z F_M vec(W_M) + m Phi^T t ; m^T F_M vec(W_M) + n Phi^T t ]
//! ```
//!
//! where `t` holds the N training observations of the new node.
//!
//! Every one of these blocks is a Kronecker combination of an M x M (or
//! smaller) matrix with `G`. Writing `G = U diag(lambda) U^T`, the change of
//! basis `I_M (x) U` turns `F` into K independent M x M systems
//! `F_k = lambda_k (I + beta L) + alpha I`, and the recursion above runs on each
//! of them with scalar `d_k`. The state stores the per-component inverses
//! `Q_k`; the full `Q` and `F` are assembled on demand. [`BlockPieces`]
//! evaluates the same formulas on the dense MK x MK matrices.

mod pieces;
mod snapshot;

pub use pieces::{block_pieces, BlockPieces};
pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::graph::{Graph, NodeAttachment};
use crate::lrg::{build_f_from_gram, solve_batch, CoefficientMatrix, LrgProblem};

/// Residual above which verify mode discards the recursion and re-solves.
pub const VERIFY_FALLBACK_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RecursionState {
    graph: Graph,
    phi: DesignMatrix,
    targets: DMatrix<f64>,
    weights: CoefficientMatrix,
    alpha: f64,
    beta: f64,
    gram: DMatrix<f64>,
    /// Eigenvectors of `gram`, one per column.
    basis: DMatrix<f64>,
    spectrum: DVector<f64>,
    /// `Q_k = (lambda_k (I + beta L) + alpha I)^-1`, one M x M matrix per eigenpair.
    components: Vec<DMatrix<f64>>,
    verify: bool,
    fallbacks: usize,
}

impl RecursionState {
    /// Solves the batch problem on `graph` and factorises `F` once.
    pub fn init(
        graph: Graph,
        phi: DesignMatrix,
        targets: DMatrix<f64>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::Validation(format!(
                "node recursion needs alpha > 0, got {alpha}"
            )));
        }
        if targets.ncols() != graph.node_count() {
            return Err(Error::dims("target columns", graph.node_count(), targets.ncols()));
        }
        let problem = LrgProblem::new(
            phi.clone(),
            targets.clone(),
            graph.laplacian().clone(),
            alpha,
            beta,
        )?;
        let weights = solve_batch(&problem)?;
        let gram = phi.gram();
        let (basis, spectrum) = eigen(&gram);
        let components = spectrum
            .iter()
            .map(|&lambda| component_inverse(graph.laplacian(), lambda, alpha, beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            graph,
            phi,
            targets,
            weights,
            alpha,
            beta,
            gram,
            basis,
            spectrum,
            components,
            verify: false,
            fallbacks: 0,
        })
    }

    /// Enables the per-step inverse check with batch fallback.
    pub fn with_verify(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.phi
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn weights(&self) -> &CoefficientMatrix {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nodes(&self) -> usize {
        self.graph.node_count()
    }

    pub fn features(&self) -> usize {
        self.gram.nrows()
    }

    pub fn samples(&self) -> usize {
        self.phi.samples()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Number of verify-mode fallbacks to a batch re-solve so far.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// `F_M` assembled from the current graph.
    pub fn f_matrix(&self) -> DMatrix<f64> {
        build_f_from_gram(self.graph.laplacian(), &self.gram, self.alpha, self.beta)
            .expect("state penalties were validated at construction")
    }

    /// `Q_M = F_M^{-1}` assembled from the per-component inverses.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let m = self.nodes();
        let k = self.features();
        let mut q = DMatrix::zeros(m * k, m * k);
        let mut scaled = DMatrix::zeros(k, k);
        for j in 0..m {
            for i in 0..=j {
                for c in 0..k {
                    let s = self.components[c][(i, j)];
                    scaled.column_mut(c).copy_from(&(self.basis.column(c) * s));
                }
                let block = &scaled * self.basis.transpose();
                q.view_mut((i * k, j * k), (k, k)).copy_from(&block);
                if i != j {
                    q.view_mut((j * k, i * k), (k, k))
                        .copy_from(&block.transpose());
                }
            }
        }
        q
    }

    /// `max |F Q - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let mut r = self.f_matrix() * self.q_matrix();
        for d in 0..r.nrows() {
            r[(d, d)] -= 1.0;
        }
        r.abs().max()
    }

    /// Appends one node with edge weights `attachment` and training
    /// observations `new_targets` (length N), returning the M+1 state.
    pub fn update(
        &self,
        attachment: &NodeAttachment,
        new_targets: &DVector<f64>,
    ) -> Result<RecursionState> {
        let m = self.nodes();
        let k = self.features();
        if attachment.len() != m {
            return Err(Error::dims("attachment length", m, attachment.len()));
        }
        if new_targets.len() != self.samples() {
            return Err(Error::dims("new node targets", self.samples(), new_targets.len()));
        }
        if new_targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("new node targets must be finite".into()));
        }

        let graph = self.graph.append_node(attachment)?;
        let projected_new = self.basis.tr_mul(&self.phi.matrix().tr_mul(new_targets));

        let (weights, components) = if attachment.is_disconnected() || self.beta == 0.0 {
            self.decoupled_step(&projected_new)?
        } else {
            self.coupled_step(attachment, &projected_new)?
        };

        let mut targets = self.targets.clone().resize_horizontally(m + 1, 0.0);
        targets.set_column(m, new_targets);

        let next = RecursionState {
            graph,
            phi: self.phi.clone(),
            targets,
            weights,
            alpha: self.alpha,
            beta: self.beta,
            gram: self.gram.clone(),
            basis: self.basis.clone(),
            spectrum: self.spectrum.clone(),
            components,
            verify: self.verify,
            fallbacks: self.fallbacks,
        };
        debug_assert_eq!(next.weights.features(), k);

        let residual = if self.verify { next.inverse_residual() } else { 0.0 };
        if residual.is_nan() || residual > VERIFY_FALLBACK_RESIDUAL {
            let fallbacks = next.fallbacks + 1;
            let mut fresh = RecursionState::init(
                next.graph,
                next.phi,
                next.targets,
                next.alpha,
                next.beta,
            )?
            .with_verify(true);
            fresh.fallbacks = fallbacks;
            return Ok(fresh);
        }
        Ok(next)
    }

    /// A node without edges (or no graph penalty): existing coefficients are
    /// untouched and the new column is the ridge solution.
    fn decoupled_step(
        &self,
        projected_new: &DVector<f64>,
    ) -> Result<(CoefficientMatrix, Vec<DMatrix<f64>>)> {
        let m = self.nodes();
        let mut column = DVector::zeros(self.features());
        let mut components = Vec::with_capacity(self.components.len());
        for (c, q) in self.components.iter().enumerate() {
            let d = self.spectrum[c] + self.alpha;
            column[c] = projected_new[c] / d;
            let mut grown = q.clone().resize(m + 1, m + 1, 0.0);
            grown[(m, m)] = 1.0 / d;
            components.push(grown);
        }
        let mut w = self.weights.matrix().clone().resize_horizontally(m + 1, 0.0);
        w.set_column(m, &(&self.basis * column));
        Ok((CoefficientMatrix::new(w)?, components))
    }

    fn coupled_step(
        &self,
        attachment: &NodeAttachment,
        projected_new: &DVector<f64>,
    ) -> Result<(CoefficientMatrix, Vec<DMatrix<f64>>)> {
        let m = self.nodes();
        let a = attachment.weights();
        let degree = attachment.degree();

        // Rotated coefficients and F_M vec(W_M) in the eigenbasis, one row per component.
        let rotated = self.basis.tr_mul(self.weights.matrix());
        let smoothed = &rotated * self.graph.laplacian();

        let mut next_rotated = DMatrix::zeros(self.features(), m + 1);
        let mut components = Vec::with_capacity(self.components.len());
        for (c, q) in self.components.iter().enumerate() {
            let lambda = self.spectrum[c];
            let s = self.beta * lambda;
            let d = lambda * (1.0 + self.beta * degree) + self.alpha;
            let coupling = a * (-s);

            // Q h with h = s diag(a) - c c^T / d, without forming h.
            let qc = q * &coupling;
            let mut qh = q.clone();
            for (j, mut col) in qh.column_iter_mut().enumerate() {
                col *= s * a[j];
            }
            qh.ger(-1.0 / d, &qc, &coupling, 1.0);

            let z = woodbury_from_product(q, &qh)?;
            let zc = &z * &coupling;
            let m_col = &zc * (-1.0 / d);
            let n = 1.0 / d + coupling.dot(&zc) / (d * d);

            let f_w: DVector<f64> = ((rotated.row(c) + smoothed.row(c) * self.beta) * lambda
                + rotated.row(c) * self.alpha)
                .transpose();
            let r = projected_new[c];
            let top = &z * &f_w + &m_col * r;
            let bottom = m_col.dot(&f_w) + n * r;

            next_rotated
                .view_mut((c, 0), (1, m))
                .copy_from(&top.transpose());
            next_rotated[(c, m)] = bottom;

            let mut grown = z.resize(m + 1, m + 1, 0.0);
            for i in 0..m {
                grown[(i, m)] = m_col[i];
                grown[(m, i)] = m_col[i];
            }
            grown[(m, m)] = n;
            components.push(grown);
        }

        let weights = CoefficientMatrix::new(&self.basis * next_rotated)
            .map_err(|_| Error::NumericalBreakdown("recursive update produced non-finite coefficients".into()))?;
        Ok((weights, components))
    }
}

/// `(Q^-1 + h)^-1` evaluated as `Q - Q h (I + Q h)^-1 Q`, which needs neither
/// `Q^-1` nor `h^-1` and is valid for singular `h`. The result is symmetrised.
pub fn woodbury_z(q: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !q.is_square() || q.shape() != h.shape() {
        return Err(Error::dims(
            "woodbury_z",
            format!("{0}x{0} matrices", q.nrows()),
            format!("{}x{} and {}x{}", q.nrows(), q.ncols(), h.nrows(), h.ncols()),
        ));
    }
    woodbury_from_product(q, &(q * h))
}

fn woodbury_from_product(q: &DMatrix<f64>, qh: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let correction = DMatrix::identity(n, n) + qh;
    let solved = correction
        .lu()
        .solve(q)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NumericalBreakdown("I + Q h is singular".into()))?;
    let z = q - qh * solved;
    let z = (&z + z.transpose()) * 0.5;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("Woodbury update is not finite".into()));
    }
    Ok(z)
}

fn eigen(gram: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let eig = SymmetricEigen::new(gram.clone());
    (eig.eigenvectors, eig.eigenvalues)
}

fn component_inverse(
    laplacian: &DMatrix<f64>,
    lambda: f64,
    alpha: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let m = laplacian.nrows();
    let mut f = laplacian * (lambda * beta);
    for d in 0..m {
        f[(d, d)] += lambda + alpha;
    }
    let inv = f
        .cholesky()
        .ok_or_else(|| Error::Singular("spectral block of F is not positive definite".into()))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}
