//! Checkpoint format for a recursion state.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    8 bytes  "NRLRGSNP"
//! version  u32      currently 1
//! M, K, N  u64 x 3
//! alpha    f64
//! beta     f64
//! A        M x M   adjacency
//! Phi      N x K   design matrix
//! T        N x M   training targets
//! W        K x M   coefficients
//! Q        MK x MK inverse of F
//! ```
//!
//! Matrices are written row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{eigen, RecursionState};
use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::graph::Graph;
use crate::lrg::CoefficientMatrix;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NRLRGSNP";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Refuse headers that would allocate absurd amounts of memory.
const MAX_DIM: u64 = 1 << 20;

impl RecursionState {
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        for dim in [self.nodes(), self.features(), self.samples()] {
            out.write_all(&(dim as u64).to_le_bytes())?;
        }
        out.write_all(&self.alpha.to_le_bytes())?;
        out.write_all(&self.beta.to_le_bytes())?;
        for mat in [
            self.graph.adjacency(),
            self.phi.matrix(),
            &self.targets,
            self.weights.matrix(),
            &self.q_matrix(),
        ] {
            write_row_major(&mut out, mat)?;
        }
        out.flush()
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut input, &mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Validation("not a recursion-state snapshot".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut input)?);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported snapshot version {version} (expected {SNAPSHOT_VERSION})"
            )));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let v = u64::from_le_bytes(read_array(&mut input)?);
            if v == 0 || v > MAX_DIM {
                return Err(Error::Validation(format!("implausible snapshot dimension {v}")));
            }
            *d = v as usize;
        }
        let [m, k, n] = dims;
        let alpha = f64::from_le_bytes(read_array(&mut input)?);
        let beta = f64::from_le_bytes(read_array(&mut input)?);
        if !(alpha > 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Validation(format!(
                "snapshot penalties out of range: alpha={alpha}, beta={beta}"
            )));
        }

        let graph = Graph::new(read_row_major(&mut input, m, m)?)?;
        let phi = DesignMatrix::new(read_row_major(&mut input, n, k)?)?;
        let targets = read_row_major(&mut input, n, m)?;
        let weights = CoefficientMatrix::new(read_row_major(&mut input, k, m)?)?;
        let q = read_row_major(&mut input, m * k, m * k)?;

        let gram = phi.gram();
        let (basis, spectrum) = eigen(&gram);
        // Q_k[i, j] = u_k^T Q_ij u_k
        let mut components = vec![DMatrix::zeros(m, m); k];
        for j in 0..m {
            for i in 0..m {
                let block = q.view((i * k, j * k), (k, k));
                let rotated = basis.tr_mul(&(block * &basis));
                for (c, comp) in components.iter_mut().enumerate() {
                    comp[(i, j)] = rotated[(c, c)];
                }
            }
        }
        for comp in components.iter_mut() {
            *comp = (&*comp + comp.transpose()) * 0.5;
        }

        Ok(RecursionState {
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

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_snapshot(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_snapshot(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

fn write_row_major<W: Write>(out: &mut W, mat: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            out.write_all(&mat[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_row_major<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut mat = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = f64::from_le_bytes(read_array(input)?);
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "snapshot contains a non-finite value at ({i},{j})"
                )));
            }
            mat[(i, j)] = v;
        }
    }
    Ok(mat)
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf)?;
    Ok(buf)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| Error::io("<snapshot>", e))
}
