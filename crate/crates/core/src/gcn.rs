//! Two-layer GCN: `softmax(Â relu(Â X W1) W2)` with `Â` the renormalized structure.
//!
//! Gradients are exact. The structure gradient differentiates through the
//! degree normalization as well as through the entries of `S`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::normalize_adj;

/// Weights of the two GCN layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    #[serde(with = "crate::matrix_serde")]
    pub w1: Array2<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub w2: Array2<f64>,
}

impl GcnParams {
    /// Uniform(−1/√fan_in, 1/√fan_in) initialization.
    pub fn init(d: usize, hidden: usize, c: usize, rng: &mut impl Rng) -> Self {
        let mut layer = |fan_in: usize, fan_out: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..=bound))
        };
        let w1 = layer(d, hidden);
        let w2 = layer(hidden, c);
        GcnParams { w1, w2 }
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|x| x.is_finite())
    }
}

/// Forward-pass results.
#[derive(Debug, Clone)]
pub struct GcnOutput {
    pub probs: Array2<f64>,
    pub hidden: Array2<f64>,
    pub logits: Array2<f64>,
    pre_activation: Array2<f64>,
    propagated_hidden: Array2<f64>,
}

/// Gradients of the mean cross-entropy.
#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub loss: f64,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    /// Symmetrized structure gradient, when requested.
    pub s: Option<Array2<f64>>,
}

/// `Â` and `Â X` for a fixed structure; reused across parameter steps.
#[derive(Debug, Clone)]
pub struct Propagation {
    a_hat: Array2<f64>,
    ax: Array2<f64>,
}

impl Propagation {
    pub fn new(s: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<Self> {
        let n = x.nrows();
        if s.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "structure is {:?} but features have {n} rows",
                s.dim()
            )));
        }
        let a_hat = normalize_adj(s);
        let ax = a_hat.dot(&x);
        Ok(Propagation { a_hat, ax })
    }

    pub fn a_hat(&self) -> &Array2<f64> {
        &self.a_hat
    }

    pub fn forward(&self, params: &GcnParams) -> Result<GcnOutput> {
        if params.w1.nrows() != self.ax.ncols() {
            return Err(Error::Shape(format!(
                "W1 has {} rows but features have {} columns",
                params.w1.nrows(),
                self.ax.ncols()
            )));
        }
        if params.w2.nrows() != params.w1.ncols() {
            return Err(Error::Shape(format!(
                "W1 is {:?} but W2 is {:?}",
                params.w1.dim(),
                params.w2.dim()
            )));
        }
        let pre_activation = self.ax.dot(&params.w1);
        let hidden = pre_activation.mapv(|v| v.max(0.0));
        let propagated_hidden = self.a_hat.dot(&hidden);
        let logits = propagated_hidden.dot(&params.w2);
        let probs = softmax_rows(&logits);
        Ok(GcnOutput {
            probs,
            hidden,
            logits,
            pre_activation,
            propagated_hidden,
        })
    }

    /// Mean cross-entropy over `idx`, with parameter gradients and optionally
    /// the structure gradient.
    pub fn grads(
        &self,
        params: &GcnParams,
        s: ArrayView2<f64>,
        x: ArrayView2<f64>,
        labels: &[usize],
        idx: &[usize],
        with_structure: bool,
    ) -> Result<GcnGrads> {
        let out = self.forward(params)?;
        let loss = mean_nll(&out.logits, labels, idx)?;
        let m = idx.len() as f64;

        // d loss / d logits
        let mut g = Array2::<f64>::zeros(out.logits.raw_dim());
        for &i in idx {
            let mut row = g.row_mut(i);
            row.scaled_add(1.0 / m, &out.probs.row(i));
            row[labels[i]] -= 1.0 / m;
        }

        let dw2 = out.propagated_hidden.t().dot(&g);
        let d_prop_hidden = g.dot(&params.w2.t());
        let mut d_pre = self.a_hat.t().dot(&d_prop_hidden);
        Zip::from(&mut d_pre)
            .and(&out.pre_activation)
            .for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        let dw1 = self.ax.t().dot(&d_pre);

        let ds = if with_structure {
            let d_ax = d_pre.dot(&params.w1.t());
            let d_ahat = d_prop_hidden.dot(&out.hidden.t()) + d_ax.dot(&x.t());
            Some(structure_grad_through_normalization(s, &d_ahat))
        } else {
            None
        };
        Ok(GcnGrads {
            loss,
            w1: dw1,
            w2: dw2,
            s: ds,
        })
    }
}

/// Chain rule from `dL/dÂ` to `dL/dS`, including the dependence of `D̃` on `S`,
/// returned symmetrized.
fn structure_grad_through_normalization(s: ArrayView2<f64>, d_ahat: &Array2<f64>) -> Array2<f64> {
    let n = s.nrows();
    let deg: Array1<f64> = s.sum_axis(Axis(1)).mapv(|d| d + 1.0);
    let r = deg.mapv(|d| 1.0 / d.sqrt());
    // t_ij = dÂ_ij (S + I)_ij
    let mut t = d_ahat * &s;
    for i in 0..n {
        t[[i, i]] += d_ahat[[i, i]];
    }
    let row_term = t.dot(&r);
    let col_term = t.t().dot(&r);
    let c = Array1::from_shape_fn(n, |k| -0.5 * deg[k].powf(-1.5) * (row_term[k] + col_term[k]));

    let mut grad = Array2::zeros((n, n));
    Zip::indexed(&mut grad)
        .and(d_ahat)
        .for_each(|(k, l), gkl, &dkl| *gkl = dkl * r[k] * r[l] + c[k]);
    symmetrize(&grad)
}

pub(crate) fn symmetrize(g: &Array2<f64>) -> Array2<f64> {
    let mut out = g.clone();
    let n = g.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = (g[[i, j]] + g[[j, i]]) / 2.0;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        row /= z;
    }
    p
}

fn check_idx(idx: &[usize], labels: &[usize], n: usize, c: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Validation("empty index set".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
    }
    for &i in idx {
        if i >= n {
            return Err(Error::Range { id: i, n });
        }
        if labels[i] >= c {
            return Err(Error::Validation(format!(
                "label {} of node {i} exceeds class count {c}",
                labels[i]
            )));
        }
    }
    Ok(())
}

pub(crate) fn mean_nll(logits: &Array2<f64>, labels: &[usize], idx: &[usize]) -> Result<f64> {
    check_idx(idx, labels, logits.nrows(), logits.ncols())?;
    let mut total = 0.0;
    for &i in idx {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[labels[i]];
    }
    Ok(total / idx.len() as f64)
}

pub fn gcn_forward(params: &GcnParams, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<GcnOutput> {
    Propagation::new(s, x)?.forward(params)
}

/// Mean negative log-likelihood of the true labels over `idx`.
pub fn gcn_loss(
    params: &GcnParams,
    s: ArrayView2<f64>,
    x: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
) -> Result<f64> {
    let out = gcn_forward(params, x, s)?;
    mean_nll(&out.logits, labels, idx)
}

pub fn gcn_grad_theta(
    params: &GcnParams,
    s: ArrayView2<f64>,
    x: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = Propagation::new(s, x)?.grads(params, s, x, labels, idx, false)?;
    Ok((g.w1, g.w2))
}

pub fn gcn_grad_s(
    params: &GcnParams,
    s: ArrayView2<f64>,
    x: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
) -> Result<Array2<f64>> {
    let g = Propagation::new(s, x)?.grads(params, s, x, labels, idx, true)?;
    Ok(g.s.expect("structure gradient requested"))
}

/// One full-batch gradient-descent step on both weight matrices.
pub fn train_gcn_step(
    params: &GcnParams,
    s: ArrayView2<f64>,
    x: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
    lr: f64,
) -> Result<GcnParams> {
    let prop = Propagation::new(s, x)?;
    step_with(&prop, params, s, x, labels, idx, lr).map(|(p, _)| p)
}

/// Gradient step on a prepared propagation; also returns the pre-step loss.
pub(crate) fn step_with(
    prop: &Propagation,
    params: &GcnParams,
    s: ArrayView2<f64>,
    x: ArrayView2<f64>,
    labels: &[usize],
    idx: &[usize],
    lr: f64,
) -> Result<(GcnParams, f64)> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Validation(format!("learning rate must be >= 0, got {lr}")));
    }
    let g = prop.grads(params, s, x, labels, idx, false)?;
    let mut next = params.clone();
    next.w1.scaled_add(-lr, &g.w1);
    next.w2.scaled_add(-lr, &g.w2);
    Ok((next, g.loss))
}

/// Fraction of nodes in `idx` whose arg-max class matches the label.
pub fn accuracy(probs: &Array2<f64>, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let correct = idx
        .iter()
        .filter(|&&i| argmax(probs.row(i).iter().copied()) == labels[i])
        .count();
    correct as f64 / idx.len() as f64
}

/// First index of the maximum.
fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in it.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}
