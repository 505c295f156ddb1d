//! Input feature maps and design matrices.
//!
//! Feature maps never see the graph: the design matrix built here stays fixed
//! while nodes are appended, which is what makes the node recursion possible.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Identity,
    RandomSigmoid,
}

/// Serializable description of a feature map; see [`FeatureMap::from_spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    /// Output dimension for random-sigmoid maps. `None` means twice the
    /// input dimension. Ignored for the identity map.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Identity,
            k: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Identity {
        dim: usize,
    },
    /// `phi_i(x) = 1 / (1 + exp(-(f_i^T x + g_i)))`
    RandomSigmoid {
        weights: DMatrix<f64>,
        biases: DVector<f64>,
    },
}

impl FeatureMap {
    pub fn identity(dim: usize) -> Self {
        FeatureMap::Identity { dim }
    }

    /// Draws `k x input_dim` weights and `k` biases i.i.d. from N(0, 1).
    pub fn random_sigmoid(input_dim: usize, k: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || k == 0 {
            return Err(Error::Validation(format!(
                "random-sigmoid map needs positive dimensions, got I={input_dim}, K={k}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = DMatrix::from_fn(k, input_dim, |_, _| StandardNormal.sample(&mut rng));
        let biases = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        Self::sigmoid_with(weights, biases)
    }

    pub fn sigmoid_with(weights: DMatrix<f64>, biases: DVector<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::dims(
                "random-sigmoid biases",
                weights.nrows(),
                biases.len(),
            ));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "random-sigmoid parameters must be finite".into(),
            ));
        }
        Ok(FeatureMap::RandomSigmoid { weights, biases })
    }

    pub fn from_spec(spec: &FeatureSpec, input_dim: usize) -> Result<Self> {
        match spec.kind {
            FeatureKind::Identity => {
                if let Some(k) = spec.k {
                    if k != input_dim {
                        return Err(Error::Validation(format!(
                            "identity feature map requires K == I, got K={k}, I={input_dim}"
                        )));
                    }
                }
                Ok(Self::identity(input_dim))
            }
            FeatureKind::RandomSigmoid => {
                Self::random_sigmoid(input_dim, spec.k.unwrap_or(2 * input_dim), spec.seed)
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomSigmoid { weights, .. } => weights.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomSigmoid { weights, .. } => weights.nrows(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("feature map input", self.input_dim(), x.len()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "feature map input entry {i} is not finite"
            )));
        }
        Ok(match self {
            FeatureMap::Identity { .. } => x.clone(),
            FeatureMap::RandomSigmoid { weights, biases } => {
                (weights * x + biases).map(logistic)
            }
        })
    }

    /// Stacks `apply` over the rows of `inputs` (N x I).
    pub fn design_matrix(&self, inputs: &DMatrix<f64>) -> Result<DesignMatrix> {
        if inputs.nrows() == 0 {
            return Err(Error::Validation("design matrix needs at least one sample".into()));
        }
        if inputs.ncols() != self.input_dim() {
            return Err(Error::dims("design matrix inputs", self.input_dim(), inputs.ncols()));
        }
        let mut phi = DMatrix::zeros(inputs.nrows(), self.output_dim());
        for n in 0..inputs.nrows() {
            let row = self.apply(&inputs.row(n).transpose())?;
            phi.row_mut(n).copy_from(&row.transpose());
        }
        Ok(DesignMatrix(phi))
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The N x K matrix of feature-mapped training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix(DMatrix<f64>);

impl DesignMatrix {
    pub fn new(phi: DMatrix<f64>) -> Result<Self> {
        if phi.nrows() == 0 || phi.ncols() == 0 {
            return Err(Error::Validation("design matrix must be non-empty".into()));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("design matrix has non-finite entries".into()));
        }
        Ok(Self(phi))
    }

    pub fn samples(&self) -> usize {
        self.0.nrows()
    }

    pub fn features(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `Phi^T Phi`, exactly symmetric.
    pub fn gram(&self) -> DMatrix<f64> {
        let g = self.0.tr_mul(&self.0);
        (&g + g.transpose()) * 0.5
    }

    /// Rows selected by `rows`, in order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix(self.0.select_rows(rows))
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}
