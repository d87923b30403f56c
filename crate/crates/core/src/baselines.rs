//! Preprocessing and structure-free defenses, trained with the same GCN and
//! returning the same result type as the joint learner.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{validate, Result};
use crate::graph::Graph;
use crate::learner::{train_on_structure, HyperParams, TrainResult};
use crate::linalg;
use crate::prox::project_s;

/// Plain GCN on the given adjacency.
pub fn gcn(graph: &Graph, hp: &HyperParams) -> Result<TrainResult> {
    train_on_structure(graph, graph.adjacency().clone(), hp)
}

/// GCN on the all-zero structure, which normalizes to the identity.
pub fn gcn_nograph(graph: &Graph, hp: &HyperParams) -> Result<TrainResult> {
    train_on_structure(graph, Array2::zeros((graph.n(), graph.n())), hp)
}

/// Best rank-`k` approximation of a symmetric matrix.
pub fn low_rank_approx(a: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
    let svd = linalg::svd(a)?;
    let k = k.min(svd.sigma.len());
    let keep: Vec<usize> = (0..k).collect();
    let u = svd.u.select(Axis(1), &keep);
    let v = svd.v.select(Axis(1), &keep);
    let sig = svd.sigma.select(Axis(0), &keep);
    Ok((&u * &sig.view().insert_axis(Axis(0))).dot(&v.t()))
}

/// GCN on the projected rank-`k` reconstruction of the adjacency.
pub fn gcn_svd_baseline(graph: &Graph, k: usize, hp: &HyperParams) -> Result<TrainResult> {
    let n = graph.n();
    validate(k >= 1 && k <= n, || format!("rank must be in 1..={n}, got {k}"))?;
    // A full-rank truncation discards nothing.
    let s = if k == n {
        graph.adjacency().clone()
    } else {
        project_s(low_rank_approx(graph.adjacency().view(), k)?.view())
    };
    train_on_structure(graph, s, hp)
}

/// Jaccard similarity of two binarized feature vectors; zero when both are empty.
pub fn jaccard(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (x, y) = (x > 0.0, y > 0.0);
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Drops every edge whose endpoints have Jaccard similarity below `threshold`.
/// Edges between identical feature vectors are always kept.
pub fn jaccard_prune(graph: &Graph, threshold: f64) -> Result<Graph> {
    validate((0.0..=1.0).contains(&threshold), || {
        format!("jaccard threshold must lie in [0, 1], got {threshold}")
    })?;
    let x = graph.features();
    validate(x.iter().all(|v| v.is_finite()), || "features cannot be binarized".into())?;
    let mut adj = graph.adjacency().clone();
    for (i, j) in graph.edges() {
        let (xi, xj) = (x.row(i), x.row(j));
        if xi == xj {
            continue;
        }
        if jaccard(xi, xj) < threshold {
            Graph::set_edge(&mut adj, i, j, 0.0);
        }
    }
    graph.with_adjacency(adj)
}

pub fn gcn_jaccard_baseline(graph: &Graph, threshold: f64, hp: &HyperParams) -> Result<TrainResult> {
    let pruned = jaccard_prune(graph, threshold)?;
    train_on_structure(graph, pruned.adjacency().clone(), hp)
}
