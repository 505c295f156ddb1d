//! Undirected weighted graphs and their Laplacians.
//!
//! A [`Graph`] owns a symmetric nonnegative adjacency matrix with an empty
//! diagonal and the Laplacian `L = D - A` derived from it. Graphs only grow:
//! [`Graph::append_node`] adds one node together with its edges to the
//! existing nodes and updates the Laplacian blockwise,
//!
//! ```text
//! L' = [ L + diag(a)   -a   ]
//!      [    -a^T      a^T 1 ]
//! ```
//!
//! leaving every existing edge untouched.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
    laplacian: DMatrix<f64>,
}

impl Graph {
    /// Validates `adjacency` and caches its Laplacian.
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        let adjacency = validated_adjacency(adjacency)?;
        let laplacian = laplacian_unchecked(&adjacency);
        Ok(Self {
            adjacency,
            laplacian,
        })
    }

    /// Graph with `nodes` vertices and no edges.
    pub fn empty(nodes: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(nodes, nodes),
            laplacian: DMatrix::zeros(nodes, nodes),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Returns a new graph with one extra node connected by `attachment`.
    pub fn append_node(&self, attachment: &NodeAttachment) -> Result<Graph> {
        let m = self.node_count();
        let a = attachment.weights();
        if a.len() != m {
            return Err(Error::dims("append_node attachment", m, a.len()));
        }

        let mut adjacency = self.adjacency.clone().resize(m + 1, m + 1, 0.0);
        let mut laplacian = self.laplacian.clone().resize(m + 1, m + 1, 0.0);
        for i in 0..m {
            adjacency[(i, m)] = a[i];
            adjacency[(m, i)] = a[i];
            laplacian[(i, i)] += a[i];
            laplacian[(i, m)] = -a[i];
            laplacian[(m, i)] = -a[i];
        }
        laplacian[(m, m)] = a.sum();

        Ok(Graph {
            adjacency,
            laplacian,
        })
    }

    /// Subgraph induced by `nodes`, in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        let m = self.node_count();
        if let Some(&bad) = nodes.iter().find(|&&v| v >= m) {
            return Err(Error::Validation(format!(
                "node index {bad} out of range for graph with {m} nodes"
            )));
        }
        let adjacency = DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| {
            self.adjacency[(nodes[i], nodes[j])]
        });
        Graph::new(adjacency)
    }

    /// Edge weights from node `node` to each node in `to`.
    pub fn attachment_to(&self, node: usize, to: &[usize]) -> Result<NodeAttachment> {
        let m = self.node_count();
        if node >= m || to.iter().any(|&v| v >= m) {
            return Err(Error::Validation(format!(
                "node index out of range for graph with {m} nodes"
            )));
        }
        NodeAttachment::new(to.iter().map(|&j| self.adjacency[(node, j)]).collect())
    }
}

/// Edge weights from an incoming node to every node already in the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAttachment(DVector<f64>);

impl NodeAttachment {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "attachment weight {i} must be finite and nonnegative, got {w}"
                )));
            }
        }
        Ok(Self(DVector::from_vec(weights)))
    }

    /// A node with no edges.
    pub fn disconnected(existing_nodes: usize) -> Self {
        Self(DVector::zeros(existing_nodes))
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_disconnected(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }

    /// Sum of weights, `a^T 1`.
    pub fn degree(&self) -> f64 {
        self.0.sum()
    }
}

/// `D - A` for a validated adjacency matrix.
pub fn laplacian(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let adjacency = validated_adjacency(adjacency.clone())?;
    Ok(laplacian_unchecked(&adjacency))
}

fn laplacian_unchecked(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -adjacency;
    for i in 0..adjacency.nrows() {
        l[(i, i)] = adjacency.row(i).sum();
    }
    l
}

fn validated_adjacency(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::dims(
            "adjacency",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let m = a.nrows();
    for i in 0..m {
        if a[(i, i)] != 0.0 {
            return Err(Error::Validation(format!(
                "adjacency has a self-loop at ({i},{i}): {}",
                a[(i, i)]
            )));
        }
        for j in 0..m {
            let v = a[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "adjacency entry ({i},{j}) must be finite and nonnegative, got {v}"
                )));
            }
            if j > i {
                let w = a[(j, i)];
                if (v - w).abs() > SYMMETRY_TOL * v.abs().max(w.abs()).max(1.0) {
                    return Err(Error::Validation(format!(
                        "adjacency is not symmetric at ({i},{j}): {v} vs {w}"
                    )));
                }
            }
        }
    }
    // Make symmetry exact so the Laplacian is exactly symmetric too.
    for i in 0..m {
        for j in (i + 1)..m {
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok(a)
}

/// Laplacian quadratic form `y^T L y`.
pub fn smoothness(signal: &DVector<f64>, laplacian: &DMatrix<f64>) -> Result<f64> {
    if laplacian.nrows() != signal.len() || !laplacian.is_square() {
        return Err(Error::dims(
            "smoothness",
            format!("{0}x{0} Laplacian", signal.len()),
            format!("{}x{}", laplacian.nrows(), laplacian.ncols()),
        ));
    }
    Ok(signal.dot(&(laplacian * signal)))
}

/// A location on the sphere in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Haversine great-circle distance in km.
pub fn haversine_km(p: GeoPoint, q: GeoPoint) -> f64 {
    let (lat1, lat2) = (p.lat.to_radians(), q.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (q.lon - p.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Gaussian adjacency over great-circle distances,
/// `a_ij = exp(-d_ij^2 / S)` with `S` the sum of `d_ij^2` over ordered pairs `i != j`.
pub fn geodesic_adjacency(points: &[GeoPoint]) -> Result<DMatrix<f64>> {
    let m = points.len();
    if m < 2 {
        return Err(Error::Validation(format!(
            "geodesic adjacency needs at least 2 points, got {m}"
        )));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.lat.is_finite() && p.lon.is_finite()) || p.lat.abs() > 90.0 {
            return Err(Error::Validation(format!(
                "point {i} has invalid coordinates ({}, {})",
                p.lat, p.lon
            )));
        }
    }

    let sq_dist = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            haversine_km(points[i], points[j]).powi(2)
        }
    });
    let total: f64 = sq_dist.sum();
    if total <= 0.0 {
        return Err(Error::Validation(
            "all pairwise distances are zero; adjacency normalisation undefined".into(),
        ));
    }

    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            (-sq_dist[(i, j)] / total).exp()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn laplacian_of_path() {
        let l = laplacian(&dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        assert_eq!(l, dmatrix![1.0, -1.0; -1.0, 1.0]);
    }

    #[test]
    fn laplacian_of_empty_graph_is_zero() {
        let l = laplacian(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_of_uniform_triangle() {
        let a = dmatrix![0.0, 1.0, 1.0; 1.0, 0.0, 1.0; 1.0, 1.0, 0.0];
        let l = laplacian(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { -1.0 };
                assert_eq!(l[(i, j)], want);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_negative() {
        let err = laplacian(&dmatrix![0.0, 1.0; 0.5, 0.0]).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");
        let err = laplacian(&dmatrix![0.0, -1.0; -1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");
        assert!(laplacian(&dmatrix![1.0, 0.0; 0.0, 0.0]).is_err());
        assert!(laplacian(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let l = laplacian(&dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        let y = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(smoothness(&y, &l).unwrap(), 1.0);

        let tri = laplacian(&dmatrix![0.0, 1.0, 2.0; 1.0, 0.0, 0.5; 2.0, 0.5, 0.0]).unwrap();
        let constant = DVector::from_element(3, 4.2);
        assert!(smoothness(&constant, &tri).unwrap().abs() < 1e-12);

        assert!(smoothness(&DVector::zeros(3), &l).is_err());
    }

    #[test]
    fn append_to_single_node() {
        let g = Graph::empty(1);
        let g2 = g
            .append_node(&NodeAttachment::new(vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(*g2.laplacian(), dmatrix![1.0, -1.0; -1.0, 1.0]);
    }

    #[test]
    fn append_disconnected_node_is_block_diagonal() {
        let g = Graph::new(dmatrix![0.0, 2.0; 2.0, 0.0]).unwrap();
        let g2 = g.append_node(&NodeAttachment::disconnected(2)).unwrap();
        let mut want = DMatrix::zeros(3, 3);
        want.view_mut((0, 0), (2, 2)).copy_from(g.laplacian());
        assert_eq!(*g2.laplacian(), want);
    }

    #[test]
    fn append_rejects_bad_attachments() {
        assert!(NodeAttachment::new(vec![1.0, -0.1]).is_err());
        assert!(NodeAttachment::new(vec![f64::NAN]).is_err());
        let g = Graph::empty(3);
        let att = NodeAttachment::new(vec![1.0]).unwrap();
        assert!(g.append_node(&att).is_err());
    }

    #[test]
    fn geodesic_two_points() {
        let a = geodesic_adjacency(&[GeoPoint::new(59.33, 18.07), GeoPoint::new(57.71, 11.97)])
            .unwrap();
        assert!((a[(0, 1)] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((a[(0, 1)] - 0.606_530_659_712_633_4).abs() < 1e-12);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn geodesic_coincident_pair() {
        let p = GeoPoint::new(10.0, 20.0);
        let a = geodesic_adjacency(&[p, p, GeoPoint::new(11.0, 20.0)]).unwrap();
        assert_eq!(a[(0, 1)], 1.0);
        assert!(a[(0, 2)] < 1.0);
    }

    #[test]
    fn geodesic_errors() {
        assert!(geodesic_adjacency(&[GeoPoint::new(0.0, 0.0)]).is_err());
        let p = GeoPoint::new(1.0, 1.0);
        assert!(geodesic_adjacency(&[p, p, p]).is_err());
    }

    #[test]
    fn haversine_quarter_meridian() {
        let d = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(90.0, 0.0));
        assert!((d - EARTH_RADIUS_KM * std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    fn random_adjacency() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=10).prop_flat_map(|m| {
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0..5.0f64], m * m).prop_map(
                move |v| {
                    let mut a = DMatrix::from_vec(m, m, v);
                    for i in 0..m {
                        a[(i, i)] = 0.0;
                        for j in 0..i {
                            a[(j, i)] = a[(i, j)];
                        }
                    }
                    a
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn laplacian_is_symmetric_psd_with_zero_rows(a in random_adjacency()) {
            let g = Graph::new(a).unwrap();
            let l = g.laplacian();
            prop_assert_eq!(l, &l.transpose());
            for i in 0..l.nrows() {
                prop_assert!(l.row(i).sum().abs() < 1e-12);
            }
            let min_eig = l.clone().symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-10);
        }

        #[test]
        fn append_matches_laplacian_of_grown_adjacency(
            a in random_adjacency(),
            seed in proptest::collection::vec(0.0..3.0f64, 10),
        ) {
            let g = Graph::new(a).unwrap();
            let m = g.node_count();
            let att = NodeAttachment::new(seed[..m].to_vec()).unwrap();
            let grown = g.append_node(&att).unwrap();
            let direct = laplacian(grown.adjacency()).unwrap();
            let diff = (grown.laplacian() - direct).abs().max();
            prop_assert!(diff <= 1e-12);
            prop_assert_eq!(
                grown.adjacency().view((0, 0), (m, m)).clone_owned(),
                g.adjacency().clone()
            );
        }

        #[test]
        fn quadratic_form_equals_edge_sum(
            a in random_adjacency(),
            y in proptest::collection::vec(-3.0..3.0f64, 10),
        ) {
            let g = Graph::new(a).unwrap();
            let m = g.node_count();
            let y = DVector::from_column_slice(&y[..m]);
            let mut edge_sum = 0.0;
            for i in 0..m {
                for j in (i + 1)..m {
                    edge_sum += g.adjacency()[(i, j)] * (y[i] - y[j]).powi(2);
                }
            }
            let q = smoothness(&y, g.laplacian()).unwrap();
            prop_assert!((q - edge_sum).abs() <= 1e-12 * edge_sum.abs().max(1.0));
        }

        #[test]
        fn geodesic_weights_in_unit_interval(
            coords in proptest::collection::vec((-60.0..60.0f64, -170.0..170.0f64), 2..12)
        ) {
            let pts: Vec<_> = coords.iter().map(|&(la, lo)| GeoPoint::new(la, lo)).collect();
            if let Ok(a) = geodesic_adjacency(&pts) {
                let m = pts.len();
                for i in 0..m {
                    prop_assert_eq!(a[(i, i)], 0.0);
                    for j in 0..m {
                        prop_assert_eq!(a[(i, j)], a[(j, i)]);
                        if i != j {
                            prop_assert!(a[(i, j)] > 0.0 && a[(i, j)] <= 1.0);
                        }
                    }
                }
            }
        }
    }
}
