//! Graph data model and the structure-dependent matrices built from it.

mod io;
mod sbm;

pub use io::{load_graph, save_graph, GraphPaths};
pub use sbm::{random_split, sbm_generate, SbmConfig};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{validate, Error, Result};

/// Degree floor used by the normalized Laplacian.
pub const DEGREE_EPS: f64 = 1e-8;

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// An undirected attributed graph with node labels.
///
/// The adjacency is dense, symmetric, in `[0, 1]`, with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    splits: Splits,
}

impl Graph {
    pub fn new(
        adjacency: Array2<f64>,
        features: Array2<f64>,
        labels: Vec<usize>,
        splits: Splits,
    ) -> Result<Self> {
        let n = labels.len();
        if adjacency.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "adjacency is {:?} but there are {n} labels",
                adjacency.dim()
            )));
        }
        if features.nrows() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows but there are {n} nodes",
                features.nrows()
            )));
        }
        validate(features.iter().all(|x| x.is_finite()), || {
            "features contain non-finite values".into()
        })?;
        for i in 0..n {
            validate(adjacency[[i, i]] == 0.0, || format!("self-loop stored at node {i}"))?;
            for j in 0..i {
                let a = adjacency[[i, j]];
                validate(a == adjacency[[j, i]], || {
                    format!("adjacency not symmetric at ({i}, {j})")
                })?;
                validate((0.0..=1.0).contains(&a), || {
                    format!("adjacency entry ({i}, {j}) = {a} outside [0, 1]")
                })?;
            }
        }
        let mut seen = vec![false; n];
        for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
            if i >= n {
                return Err(Error::Range { id: i, n });
            }
            validate(!seen[i], || format!("node {i} appears in more than one split slot"))?;
            seen[i] = true;
        }
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Ok(Graph {
            adjacency,
            features,
            labels,
            n_classes,
            splits,
        })
    }

    /// Identity features, for graphs that come without node attributes.
    pub fn identity_features(n: usize) -> Array2<f64> {
        Array2::eye(n)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[[i, j]] > 0.0
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[[i, j]] > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Same nodes, features, labels and splits on a different adjacency.
    pub fn with_adjacency(&self, adjacency: Array2<f64>) -> Result<Self> {
        Graph::new(
            adjacency,
            self.features.clone(),
            self.labels.clone(),
            self.splits.clone(),
        )
    }

    pub fn with_splits(&self, splits: Splits) -> Result<Self> {
        Graph::new(
            self.adjacency.clone(),
            self.features.clone(),
            self.labels.clone(),
            splits,
        )
    }

    pub(crate) fn set_edge(adjacency: &mut Array2<f64>, i: usize, j: usize, w: f64) {
        adjacency[[i, j]] = w;
        adjacency[[j, i]] = w;
    }
}

/// Edges injected into and removed from a clean graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PerturbationRecord {
    #[serde(rename = "added")]
    pub added_edges: Vec<(usize, usize)>,
    #[serde(rename = "removed")]
    pub removed_edges: Vec<(usize, usize)>,
    #[serde(rename = "rate")]
    pub perturbation_rate: f64,
}

impl PerturbationRecord {
    pub fn is_empty(&self) -> bool {
        self.added_edges.is_empty() && self.removed_edges.is_empty()
    }

    fn check_indices(&self, n: usize) -> Result<()> {
        for &(i, j) in self.added_edges.iter().chain(&self.removed_edges) {
            for id in [i, j] {
                if id >= n {
                    return Err(Error::Range { id, n });
                }
            }
            validate(i < j, || format!("record edge ({i}, {j}) is not ordered i < j"))?;
        }
        Ok(())
    }

    /// Applies the record to the clean graph it was drawn from.
    pub fn apply(&self, clean: &Graph) -> Result<Graph> {
        self.check_indices(clean.n())?;
        let mut adj = clean.adjacency().clone();
        for &(i, j) in &self.added_edges {
            validate(!clean.has_edge(i, j), || format!("added edge ({i}, {j}) already present"))?;
            Graph::set_edge(&mut adj, i, j, 1.0);
        }
        for &(i, j) in &self.removed_edges {
            validate(clean.has_edge(i, j), || format!("removed edge ({i}, {j}) not present"))?;
            Graph::set_edge(&mut adj, i, j, 0.0);
        }
        clean.with_adjacency(adj)
    }

    /// Undoes the record on the poisoned graph.
    pub fn revert(&self, poisoned: &Graph) -> Result<Graph> {
        self.check_indices(poisoned.n())?;
        let mut adj = poisoned.adjacency().clone();
        for &(i, j) in &self.added_edges {
            Graph::set_edge(&mut adj, i, j, 0.0);
        }
        for &(i, j) in &self.removed_edges {
            Graph::set_edge(&mut adj, i, j, 1.0);
        }
        poisoned.with_adjacency(adj)
    }
}

fn row_sums(s: ArrayView2<f64>) -> Array1<f64> {
    s.sum_axis(Axis(1))
}

/// `D̃^{-1/2} (S + I) D̃^{-1/2}` with `D̃_ii = 1 + Σ_j S_ij`.
pub fn normalize_adj(s: ArrayView2<f64>) -> Array2<f64> {
    let r = row_sums(s).mapv(|d| 1.0 / (1.0 + d).sqrt());
    let n = s.nrows();
    let mut out = Array2::zeros((n, n));
    Zip::indexed(&mut out).and(&s).for_each(|(i, j), o, &x| {
        let v = if i == j { x + 1.0 } else { x };
        *o = v * r[i] * r[j];
    });
    out
}

/// Inverse square roots of the eps-floored degrees.
pub(crate) fn floored_inv_sqrt_degrees(s: ArrayView2<f64>, eps: f64) -> (Array1<f64>, Array1<f64>) {
    let deg = row_sums(s).mapv(|d| d.max(eps));
    let q = deg.mapv(|d| 1.0 / d.sqrt());
    (deg, q)
}

/// `D^{-1/2} (D − S) D^{-1/2}` with degrees floored at `eps`.
pub fn normalized_laplacian(s: ArrayView2<f64>, eps: f64) -> Array2<f64> {
    let (deg, q) = floored_inv_sqrt_degrees(s, eps);
    let n = s.nrows();
    let mut out = Array2::zeros((n, n));
    Zip::indexed(&mut out).and(&s).for_each(|(i, j), o, &x| {
        let dm = if i == j { deg[i] - x } else { -x };
        *o = dm * q[i] * q[j];
    });
    out
}

/// `tr(Xᵀ L̂ X)` for the normalized Laplacian of `s`.
pub fn feature_smoothness(s: ArrayView2<f64>, x: ArrayView2<f64>, eps: f64) -> f64 {
    let (_, q) = floored_inv_sqrt_degrees(s, eps);
    // L̂ = D^{-1/2} D D^{-1/2} − D^{-1/2} S D^{-1/2}; the first part is I.
    let y = &x * &q.view().insert_axis(Axis(1));
    let cross = (&s.dot(&y) * &y).sum();
    let diag: f64 = x.iter().map(|v| v * v).sum();
    diag - cross
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_adjacency(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let w: f64 = rng.gen_range(0.0..1.0);
                s[[i, j]] = w;
                s[[j, i]] = w;
            }
        }
        s
    }

    /// ½ Σ_ij S_ij ‖x_i/√d_i − x_j/√d_j‖².
    fn smoothness_double_sum(s: &Array2<f64>, x: &Array2<f64>) -> f64 {
        let n = s.nrows();
        let deg: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let diff = &x.row(i) / deg[i].sqrt() - &x.row(j) / deg[j].sqrt();
                total += s[[i, j]] * diff.dot(&diff);
            }
        }
        0.5 * total
    }

    #[test]
    fn normalize_two_nodes() {
        let s = array![[0.0, 1.0], [1.0, 0.0]];
        let a = normalize_adj(s.view());
        assert!(a.iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn normalize_zero_is_identity() {
        let z = Array2::zeros((2, 2));
        assert_eq!(normalize_adj(z.view()), Array2::<f64>::eye(2));
    }

    #[test]
    fn normalize_path_graph() {
        let s = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let a = normalize_adj(s.view());
        assert_abs_diff_eq!(a[[0, 1]], 1.0 / 6f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(a[[0, 1]], 0.408_248_290_463_863, epsilon = 1e-12);
        assert_eq!(a, a.t());
    }

    #[test]
    fn normalize_cycle_entries() {
        // Regular of degree 2: every edge and self-loop entry is 1/3.
        let n = 7;
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            Graph::set_edge(&mut s, i, (i + 1) % n, 1.0);
        }
        let a = normalize_adj(s.view());
        for i in 0..n {
            assert_abs_diff_eq!(a[[i, i]], 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(a[[i, (i + 1) % n]], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn laplacian_examples() {
        let s = array![[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(normalized_laplacian(s.view(), 1e-8), array![[1.0, -1.0], [-1.0, 1.0]]);
        let z = Array2::zeros((2, 2));
        assert_eq!(normalized_laplacian(z.view(), 1e-8), Array2::<f64>::eye(2));
        let tri = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let l = normalized_laplacian(tri.view(), 1e-8);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert_abs_diff_eq!(l[[i, j]], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let s = random_adjacency(&mut rng, 8);
            let l = normalized_laplacian(s.view(), DEGREE_EPS);
            for _ in 0..100 {
                let x = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
                assert!(x.dot(&l.dot(&x)) >= -1e-9);
            }
        }
    }

    #[test]
    fn smoothness_examples() {
        let s = array![[0.0, 1.0], [1.0, 0.0]];
        let x = array![[1.0], [0.0]];
        assert_abs_diff_eq!(feature_smoothness(s.view(), x.view(), 1e-8), 1.0, epsilon = 1e-15);

        let cyc = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let x = array![[0.3, -2.0], [0.3, -2.0], [0.3, -2.0]];
        assert!(feature_smoothness(cyc.view(), x.view(), 1e-8).abs() < 1e-12);
    }

    #[test]
    fn smoothness_matches_double_sum_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_adjacency(&mut rng, 5);
            let x = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
            let fast = feature_smoothness(s.view(), x.view(), DEGREE_EPS);
            assert_abs_diff_eq!(fast, smoothness_double_sum(&s, &x), epsilon = 1e-10);
            let l = normalized_laplacian(s.view(), DEGREE_EPS);
            let trace = x.t().dot(&l).dot(&x).diag().sum();
            assert_abs_diff_eq!(fast, trace, epsilon = 1e-12);
        }
    }

    #[test]
    fn new_rejects_bad_inputs() {
        let feats = Array2::zeros((2, 1));
        let asym = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(Graph::new(asym, feats.clone(), vec![0, 1], Splits::default()).is_err());
        let looped = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(Graph::new(looped, feats.clone(), vec![0, 1], Splits::default()).is_err());
        let overlap = Splits {
            train: vec![0],
            val: vec![0],
            test: vec![],
        };
        assert!(Graph::new(Array2::zeros((2, 2)), feats, vec![0, 1], overlap).is_err());
    }

    proptest! {
        #[test]
        fn normalize_adj_is_symmetric(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_adjacency(&mut rng, n);
            let a = normalize_adj(s.view());
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((a[[i, j]] - a[[j, i]]).abs() < 1e-15);
                }
            }
        }
    }
}
