use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GeoPoint;
use crate::io::read_matrix_csv;

/// Input/target pairs for regression onto graph signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N_total x I
    pub inputs: DMatrix<f64>,
    /// N_total x M, one graph signal per row.
    pub targets: DMatrix<f64>,
    pub node_coords: Option<Vec<GeoPoint>>,
    /// Leading rows available for training; the rest are held out.
    pub train: usize,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::dims("dataset rows", inputs.nrows(), targets.nrows()));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Validation("dataset has no input/target pairs".into()));
        }
        let train = inputs.nrows();
        Ok(Self {
            inputs,
            targets,
            node_coords: None,
            train,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> usize {
        self.targets.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn test(&self) -> usize {
        self.len() - self.train
    }

    /// Reserves the first `train` pairs for training.
    pub fn with_split(mut self, train: usize) -> Result<Self> {
        if train == 0 || train > self.len() {
            return Err(Error::Validation(format!(
                "training split {train} out of range for {} pairs",
                self.len()
            )));
        }
        self.train = train;
        Ok(self)
    }

    pub fn with_coords(mut self, coords: Vec<GeoPoint>) -> Result<Self> {
        if coords.len() != self.nodes() {
            return Err(Error::dims("node coordinates", self.nodes(), coords.len()));
        }
        self.node_coords = Some(coords);
        Ok(self)
    }
}

/// How signal rows become regression pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pairing {
    /// `x_n = row n`, `t_n = row n + lag`, over all columns.
    Lag { lag: usize },
    /// Same row, inputs and outputs from disjoint column sets (0-based).
    Columns {
        inputs: Vec<usize>,
        outputs: Vec<usize>,
    },
}

/// `(x_n, t_n) = (row n, row n + lag)`.
pub fn make_lagged_pairs(signals: &DMatrix<f64>, lag: usize) -> Result<Dataset> {
    let rows = signals.nrows();
    if rows <= lag {
        return Err(Error::Validation(format!(
            "{rows} signal rows cannot form pairs at lag {lag}"
        )));
    }
    let n = rows - lag;
    Dataset::new(
        signals.rows(0, n).clone_owned(),
        signals.rows(lag, n).clone_owned(),
    )
}

pub fn split_columns(signals: &DMatrix<f64>, inputs: &[usize], outputs: &[usize]) -> Result<Dataset> {
    let cols = signals.ncols();
    for &c in inputs.iter().chain(outputs) {
        if c >= cols {
            return Err(Error::Validation(format!(
                "column {c} out of range for {cols} signal columns"
            )));
        }
    }
    if inputs.is_empty() || outputs.is_empty() {
        return Err(Error::Validation("input and output column sets must be non-empty".into()));
    }
    if let Some(c) = inputs.iter().find(|c| outputs.contains(c)) {
        return Err(Error::Validation(format!(
            "column {c} appears in both input and output sets"
        )));
    }
    Dataset::new(signals.select_columns(inputs), signals.select_columns(outputs))
}

pub fn pair_signals(signals: &DMatrix<f64>, pairing: &Pairing) -> Result<Dataset> {
    match pairing {
        Pairing::Lag { lag } => make_lagged_pairs(signals, *lag),
        Pairing::Columns { inputs, outputs } => split_columns(signals, inputs, outputs),
    }
}

/// Reads a signal CSV (header `node_1..node_M`, one row per time sample)
/// and pairs its rows.
pub fn load_signals(path: &Path, pairing: &Pairing) -> Result<Dataset> {
    let (_, signals) = read_matrix_csv(path)?;
    if signals.nrows() == 0 {
        return Err(Error::Validation(format!("{} has no signal rows", path.display())));
    }
    pair_signals(&signals, pairing)
}
