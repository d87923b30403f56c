//! Diagnostics: spectra and numerical rank, rank decay under edge removal,
//! feature-distance histograms, and learned weights on clean vs. injected edges.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validate, Error, Result};
use crate::graph::{Graph, PerturbationRecord};
use crate::linalg;

/// Relative factor for the default numerical-rank tolerance.
pub const RELATIVE_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    pub tol: f64,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,singular_value\n");
        for (i, v) in self.singular_values.iter().enumerate() {
            let _ = writeln!(s, "{i},{v:?}");
        }
        s
    }
}

/// Full singular spectrum; rank counts values strictly above `tol`.
pub fn singular_spectrum(m: ArrayView2<f64>, tol: f64) -> Result<SpectrumReport> {
    validate(tol > 0.0, || format!("rank tolerance must be > 0, got {tol}"))?;
    let sv = linalg::singular_values(m)?;
    Ok(SpectrumReport {
        numerical_rank: sv.iter().filter(|&&s| s > tol).count(),
        singular_values: sv.to_vec(),
        tol,
    })
}

/// Spectrum with tolerance `1e-6 · σ_max`.
pub fn singular_spectrum_relative(m: ArrayView2<f64>) -> Result<SpectrumReport> {
    let sv = linalg::singular_values(m)?;
    let tol = (RELATIVE_RANK_TOL * sv.first().copied().unwrap_or(0.0)).max(f64::MIN_POSITIVE);
    Ok(SpectrumReport {
        numerical_rank: sv.iter().filter(|&&s| s > tol).count(),
        singular_values: sv.to_vec(),
        tol,
    })
}

fn numerical_rank(m: &Array2<f64>, tol: f64) -> Result<usize> {
    Ok(linalg::singular_values(m.view())?.iter().filter(|&&s| s > tol).count())
}

/// Rank after removing growing numbers of injected vs. clean edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCurves {
    pub removed: Vec<usize>,
    pub adversarial: Vec<usize>,
    pub normal: Vec<usize>,
}

impl RankCurves {
    /// Trapezoid areas under the (adversarial, normal) curves.
    pub fn areas(&self) -> (f64, f64) {
        (trapezoid(&self.removed, &self.adversarial), trapezoid(&self.removed, &self.normal))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("removed,adversarial_rank,normal_rank\n");
        for k in 0..self.removed.len() {
            let _ = writeln!(s, "{},{},{}", self.removed[k], self.adversarial[k], self.normal[k]);
        }
        s
    }
}

fn trapezoid(x: &[usize], y: &[usize]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) as f64 * (ys[0] + ys[1]) as f64 / 2.0)
        .sum()
}

pub fn rank_decrease_curve(
    poisoned: &Graph,
    record: &PerturbationRecord,
    steps: usize,
    tol: f64,
    seed: u64,
) -> Result<RankCurves> {
    validate(!record.added_edges.is_empty(), || "record has no injected edges".into())?;
    validate(tol > 0.0, || format!("rank tolerance must be > 0, got {tol}"))?;
    let total = record.added_edges.len();
    validate(steps >= 1 && steps <= total, || {
        format!("steps must be in 1..={total} (injected edges), got {steps}")
    })?;
    for &(i, j) in &record.added_edges {
        validate(i < poisoned.n() && j < poisoned.n() && poisoned.has_edge(i, j), || {
            format!("injected edge ({i}, {j}) is not in the poisoned graph")
        })?;
    }
    let injected: std::collections::HashSet<_> = record.added_edges.iter().copied().collect();
    let mut normal: Vec<(usize, usize)> = poisoned
        .edges()
        .into_iter()
        .filter(|e| !injected.contains(e))
        .collect();
    validate(normal.len() >= total, || {
        format!("only {} clean edges available, need {total}", normal.len())
    })?;
    normal.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut curves = RankCurves {
        removed: Vec::with_capacity(steps + 1),
        adversarial: Vec::with_capacity(steps + 1),
        normal: Vec::with_capacity(steps + 1),
    };
    for t in 0..=steps {
        let m = t * total / steps;
        let mut adv = poisoned.adjacency().clone();
        for &(i, j) in &record.added_edges[..m] {
            Graph::set_edge(&mut adv, i, j, 0.0);
        }
        let mut nor = poisoned.adjacency().clone();
        for &(i, j) in &normal[..m] {
            Graph::set_edge(&mut nor, i, j, 0.0);
        }
        curves.removed.push(m);
        curves.adversarial.push(numerical_rank(&adv, tol)?);
        curves.normal.push(numerical_rank(&nor, tol)?);
    }
    Ok(curves)
}

/// Density histograms of `‖x_i − x_j‖²` over clean and injected edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDensity {
    /// `bins + 1` shared bin boundaries.
    pub bin_edges: Vec<f64>,
    pub normal: Vec<f64>,
    pub adversarial: Vec<f64>,
    pub adversarial_empty: bool,
    pub normal_mean: f64,
    pub adversarial_mean: f64,
}

impl FeatureDensity {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,normal_density,adversarial_density\n");
        for k in 0..self.normal.len() {
            let _ = writeln!(
                s,
                "{:?},{:?},{:?},{:?}",
                self.bin_edges[k],
                self.bin_edges[k + 1],
                self.normal[k],
                self.adversarial[k]
            );
        }
        s
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn feature_diff_density(graph: &Graph, record: &PerturbationRecord, bins: usize) -> Result<FeatureDensity> {
    validate(bins >= 1, || "need at least one bin".into())?;
    let x = graph.features();
    let dist = |&(i, j): &(usize, usize)| -> Result<f64> {
        if i >= graph.n() || j >= graph.n() {
            return Err(Error::Range {
                id: i.max(j),
                n: graph.n(),
            });
        }
        let d = &x.row(i) - &x.row(j);
        Ok(d.dot(&d))
    };
    let injected: std::collections::HashSet<_> = record.added_edges.iter().copied().collect();
    let normal: Vec<f64> = graph
        .edges()
        .iter()
        .filter(|e| !injected.contains(e))
        .map(dist)
        .collect::<Result<_>>()?;
    let adversarial: Vec<f64> = record.added_edges.iter().map(dist).collect::<Result<_>>()?;

    let hi = normal.iter().chain(&adversarial).cloned().fold(0.0, f64::max);
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let width = hi / bins as f64;
    let hist = |vals: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; bins];
        if vals.is_empty() {
            return h;
        }
        for &v in vals {
            let k = ((v / width) as usize).min(bins - 1);
            h[k] += 1.0;
        }
        let norm = vals.len() as f64 * width;
        h.iter_mut().for_each(|c| *c /= norm);
        h
    };
    Ok(FeatureDensity {
        bin_edges: (0..=bins).map(|k| k as f64 * width).collect(),
        normal: hist(&normal),
        adversarial: hist(&adversarial),
        adversarial_empty: adversarial.is_empty(),
        normal_mean: mean(&normal),
        adversarial_mean: mean(&adversarial),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeightReport {
    pub normal_weights: Vec<f64>,
    pub adversarial_weights: Vec<f64>,
    pub mean_normal: f64,
    pub mean_adversarial: f64,
}

/// Learned weights at clean-graph edges and at injected edges.
pub fn edge_weight_report(
    learned_s: ArrayView2<f64>,
    clean: &Graph,
    record: &PerturbationRecord,
) -> Result<EdgeWeightReport> {
    let n = clean.n();
    if learned_s.dim() != (n, n) {
        return Err(Error::Validation(format!(
            "learned structure is {:?} but the clean graph has {n} nodes",
            learned_s.dim()
        )));
    }
    let normal_weights: Vec<f64> = clean.edges().iter().map(|&(i, j)| learned_s[[i, j]]).collect();
    let mut adversarial_weights = Vec::with_capacity(record.added_edges.len());
    for &(i, j) in &record.added_edges {
        if i >= n || j >= n {
            return Err(Error::Validation(format!(
                "injected edge ({i}, {j}) out of range for {n} nodes"
            )));
        }
        adversarial_weights.push(learned_s[[i, j]]);
    }
    Ok(EdgeWeightReport {
        mean_normal: mean(&normal_weights),
        mean_adversarial: mean(&adversarial_weights),
        normal_weights,
        adversarial_weights,
    })
}
