use nalgebra::{DMatrix, DVector};

use super::{woodbury_z, RecursionState};
use crate::error::{Error, Result};
use crate::graph::NodeAttachment;
use crate::lrg::CoefficientMatrix;

/// Dense blocks of `F_{M+1}` and `Q_{M+1}` for one node insertion.
///
/// This is the literal MK x MK form of the recursion; [`RecursionState::update`]
/// computes the same quantities componentwise.
#[derive(Debug, Clone)]
pub struct BlockPieces {
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// `I - z F_M`, so that `z F_M = I - rho`.
    pub rho: DMatrix<f64>,
    f_prev: DMatrix<f64>,
}

pub fn block_pieces(state: &RecursionState, attachment: &NodeAttachment) -> Result<BlockPieces> {
    let nodes = state.nodes();
    let k = state.features();
    let a = attachment.weights();
    if a.len() != nodes {
        return Err(Error::dims("attachment length", nodes, a.len()));
    }
    let beta = state.beta();
    let gram = state.gram();
    let mk = nodes * k;

    let f_prev = state.f_matrix();
    let q_prev = state.q_matrix();

    let mut diag_term = DMatrix::zeros(mk, mk);
    let mut c = DMatrix::zeros(mk, k);
    for i in 0..nodes {
        diag_term
            .view_mut((i * k, i * k), (k, k))
            .copy_from(&(gram * (beta * a[i])));
        c.view_mut((i * k, 0), (k, k))
            .copy_from(&(gram * (-beta * a[i])));
    }
    let mut d = gram * (1.0 + beta * attachment.degree());
    for j in 0..k {
        d[(j, j)] += state.alpha();
    }
    let d_chol = d
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalBreakdown("d block is not positive definite".into()))?;

    // c d^-1, via the factorisation of the symmetric d.
    let c_dinv = d_chol.solve(&c.transpose()).transpose();
    let b = &f_prev + &diag_term;
    let h = &diag_term - &c_dinv * c.transpose();
    let z = woodbury_z(&q_prev, &h)?;
    let m = -(&z * &c_dinv);
    let d_inv = d_chol.inverse();
    let n = &d_inv + c_dinv.transpose() * &z * &c_dinv;
    let n = (&n + n.transpose()) * 0.5;
    let rho = DMatrix::identity(mk, mk) - &z * &f_prev;

    Ok(BlockPieces {
        b,
        c,
        d,
        h,
        z,
        m,
        n,
        rho,
        f_prev,
    })
}

impl BlockPieces {
    /// `[[b, c], [c^T, d]]`, which must equal `F_{M+1}`.
    pub fn assemble_f(&self) -> DMatrix<f64> {
        assemble(&self.b, &self.c, &self.d)
    }

    /// `[[z, m], [m^T, n]]`, the inverse of `F_{M+1}`.
    pub fn assemble_q(&self) -> DMatrix<f64> {
        assemble(&self.z, &self.m, &self.n)
    }

    /// Coefficients on the grown graph from the previous optimum and the
    /// new node's projected targets `Phi^T t` (length K).
    pub fn next_coefficients(
        &self,
        previous: &CoefficientMatrix,
        projected_new: &DVector<f64>,
    ) -> Result<CoefficientMatrix> {
        let k = self.d.nrows();
        let mk = self.b.nrows();
        if previous.features() * previous.nodes() != mk || projected_new.len() != k {
            return Err(Error::dims(
                "next_coefficients",
                format!("vec(W) of {mk} and K = {k}"),
                format!(
                    "vec(W) of {} and {}",
                    previous.features() * previous.nodes(),
                    projected_new.len()
                ),
            ));
        }
        let w = previous.vec();
        let keep = DMatrix::identity(mk, mk) - &self.rho;
        let top = keep * &w + &self.m * projected_new;
        let bottom = self.m.transpose() * (&self.f_prev * &w) + &self.n * projected_new;
        let mut v = DVector::zeros(mk + k);
        v.rows_mut(0, mk).copy_from(&top);
        v.rows_mut(mk, k).copy_from(&bottom);
        CoefficientMatrix::from_vec(k, previous.nodes() + 1, &v)
    }
}

fn assemble(tl: &DMatrix<f64>, tr: &DMatrix<f64>, br: &DMatrix<f64>) -> DMatrix<f64> {
    let p = tl.nrows();
    let k = br.nrows();
    let mut out = DMatrix::zeros(p + k, p + k);
    out.view_mut((0, 0), (p, p)).copy_from(tl);
    out.view_mut((0, p), (p, k)).copy_from(tr);
    out.view_mut((p, 0), (k, p)).copy_from(&tr.transpose());
    out.view_mut((p, p), (k, k)).copy_from(br);
    out
}
