//! Synthetic smooth graph signals.
//!
//! Stands in for proprietary sensor data: nodes scattered over a lat/lon box
//! with a geodesic adjacency, and input/target pairs of correlated smooth
//! fields on that graph.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{geodesic_adjacency, GeoPoint, Graph};

/// `count` signals `y = (I + gamma L)^-1 z`, `z ~ N(0, I)`, one per row.
pub fn synth_smooth(laplacian: &DMatrix<f64>, gamma: f64, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Validation(format!("smoothing strength must be >= 0, got {gamma}")));
    }
    if !laplacian.is_square() {
        return Err(Error::dims(
            "synth_smooth Laplacian",
            "square",
            format!("{}x{}", laplacian.nrows(), laplacian.ncols()),
        ));
    }
    let m = laplacian.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = DMatrix::from_fn(count, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    if gamma == 0.0 {
        return Ok(white);
    }
    let mut filter = laplacian * gamma;
    for d in 0..m {
        filter[(d, d)] += 1.0;
    }
    let chol = filter
        .cholesky()
        .ok_or_else(|| Error::Validation("I + gamma L is not positive definite".into()))?;
    Ok(chol.solve(&white.transpose()).transpose())
}

/// Parameters of the synthetic expansion dataset.
///
/// Each pair is an independent draw: `x = s`, `t = rho s + sqrt(1 - rho^2) e`
/// with `s`, `e` smooth fields on the node graph, so every target row is a
/// smooth signal correlated with its input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub pairs: usize,
    /// Spatial smoothing strength of each field.
    pub smoothing: f64,
    /// Input/target correlation `rho`, in [0, 1].
    pub correlation: f64,
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    pub seed: u64,
    /// Draw fresh pairs on the same graph for every experiment trial.
    pub resample_per_trial: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            nodes: 25,
            pairs: 90,
            smoothing: 10.0,
            correlation: 0.9,
            lat_range: (55.5, 66.0),
            lon_range: (12.0, 22.0),
            seed: 0,
            resample_per_trial: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub graph: Graph,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.nodes < 2 {
        return Err(Error::Validation("synthetic graph needs at least 2 nodes".into()));
    }
    if spec.pairs == 0 {
        return Err(Error::Validation("synthetic dataset needs at least one pair".into()));
    }
    if !(0.0..=1.0).contains(&spec.correlation) {
        return Err(Error::Validation(format!(
            "correlation must lie in [0, 1], got {}",
            spec.correlation
        )));
    }
    let (lat_lo, lat_hi) = spec.lat_range;
    let (lon_lo, lon_hi) = spec.lon_range;
    if !(lat_lo < lat_hi && lon_lo < lon_hi) {
        return Err(Error::Validation("empty coordinate box".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coords: Vec<GeoPoint> = (0..spec.nodes)
        .map(|_| GeoPoint::new(rng.random_range(lat_lo..lat_hi), rng.random_range(lon_lo..lon_hi)))
        .collect();
    let graph = Graph::new(geodesic_adjacency(&coords)?)?;

    let dataset = draw_pairs(spec, &graph, rng.random())?.with_coords(coords)?;
    Ok(SyntheticData { dataset, graph })
}

/// Fresh input/target pairs on an existing graph.
pub fn draw_pairs(spec: &SyntheticSpec, graph: &Graph, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = synth_smooth(graph.laplacian(), spec.smoothing, spec.pairs, rng.random())?;
    let innovations = synth_smooth(graph.laplacian(), spec.smoothing, spec.pairs, rng.random())?;
    let rho = spec.correlation;
    let targets = &inputs * rho + innovations * (1.0 - rho * rho).sqrt();
    Dataset::new(inputs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::smoothness;
    use nalgebra::DVector;

    fn path_laplacian(m: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(m, m);
        for i in 1..m {
            a[(i, i - 1)] = 1.0;
            a[(i - 1, i)] = 1.0;
        }
        Graph::new(a).unwrap().laplacian().clone()
    }

    #[test]
    fn zero_gamma_is_white() {
        let l = path_laplacian(4);
        let y = synth_smooth(&l, 0.0, 3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_eq!(y, z);
    }

    #[test]
    fn large_gamma_tends_to_mean() {
        let l = path_laplacian(6);
        let y = synth_smooth(&l, 1e8, 4, 9).unwrap();
        let z = synth_smooth(&l, 0.0, 4, 9).unwrap();
        for r in 0..4 {
            let mean = z.row(r).mean();
            assert!(y.row(r).iter().all(|v| (v - mean).abs() < 1e-5));
        }
    }

    #[test]
    fn smoothing_reduces_variation() {
        let l = path_laplacian(8);
        let mean_smoothness = |gamma: f64| {
            let y = synth_smooth(&l, gamma, 100, 11).unwrap();
            (0..100)
                .map(|r| smoothness(&DVector::from_iterator(8, y.row(r).iter().copied()), &l).unwrap())
                .sum::<f64>()
                / 100.0
        };
        assert!(mean_smoothness(10.0) < mean_smoothness(0.0));
    }

    #[test]
    fn rejects_negative_gamma() {
        assert!(synth_smooth(&path_laplacian(3), -1.0, 2, 0).is_err());
    }

    #[test]
    fn default_dataset_shape() {
        let data = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(data.dataset.len(), 90);
        assert_eq!(data.dataset.nodes(), 25);
        assert_eq!(data.dataset.input_dim(), 25);
        assert_eq!(data.graph.node_count(), 25);
        assert_eq!(generate(&SyntheticSpec::default()).unwrap().dataset, data.dataset);
    }

    #[test]
    fn full_correlation_copies_inputs() {
        let spec = SyntheticSpec {
            nodes: 4,
            pairs: 6,
            correlation: 1.0,
            ..SyntheticSpec::default()
        };
        let data = generate(&spec).unwrap();
        assert_eq!(data.dataset.inputs, data.dataset.targets);
        assert!(generate(&SyntheticSpec { correlation: 1.5, ..spec }).is_err());
    }
}
