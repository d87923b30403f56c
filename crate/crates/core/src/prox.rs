//! The structure subproblem: smooth gradient, ℓ1 and nuclear-norm proximal
//! operators, feasibility projection, and one incremental proximal descent step.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{validate, Error, Result};
use crate::gcn::{symmetrize, GcnParams, Propagation};
use crate::graph::{feature_smoothness, floored_inv_sqrt_degrees, DEGREE_EPS};
use crate::linalg;

/// Weights of the structure objective and the structure step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxConfig {
    /// ℓ1 weight.
    pub alpha: f64,
    /// Nuclear-norm weight.
    pub beta: f64,
    /// GCN loss weight.
    pub gamma: f64,
    /// Feature-smoothness weight.
    pub lambda: f64,
    /// Structure learning rate.
    pub eta: f64,
    /// Degree floor of the normalized Laplacian.
    pub eps: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig {
            alpha: 5e-4,
            beta: 1.5,
            gamma: 1.0,
            lambda: 1.0,
            eta: 1e-2,
            eps: DEGREE_EPS,
        }
    }
}

impl ProxConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ] {
            validate(v.is_finite() && v >= 0.0, || format!("{name} must be finite and >= 0, got {v}"))?;
        }
        validate(self.eta.is_finite() && self.eta > 0.0, || format!("eta must be > 0, got {}", self.eta))?;
        validate(self.eps.is_finite() && self.eps > 0.0, || format!("eps must be > 0, got {}", self.eps))
    }
}

/// Labeled-node data the GCN term of the objective needs.
#[derive(Debug, Clone, Copy)]
pub struct Supervision<'a> {
    pub x: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
    pub idx: &'a [usize],
}

/// Gradient of `tr(Xᵀ L̂ X)` with respect to `S`, differentiating through the
/// degrees. Where the degree floor binds the degree is treated as constant.
pub fn smoothness_grad(s: ArrayView2<f64>, x: ArrayView2<f64>, eps: f64) -> Array2<f64> {
    let n = s.nrows();
    let (deg, q) = floored_inv_sqrt_degrees(s, eps);
    let raw_deg = s.sum_axis(Axis(1));
    let y = &x * &q.view().insert_axis(Axis(1));
    let sy = s.dot(&y);
    let sty = s.t().dot(&y);
    let c = Array1::from_shape_fn(n, |k| {
        if raw_deg[k] <= eps {
            return 0.0;
        }
        let xk = x.row(k);
        0.5 * deg[k].powf(-1.5) * (xk.dot(&sy.row(k)) + xk.dot(&sty.row(k)))
    });
    let mut g = y.dot(&y.t());
    Zip::indexed(&mut g).for_each(|(k, _), v| *v = c[k] - *v);
    symmetrize(&g)
}

fn check_square_pair(s: ArrayView2<f64>, a: ArrayView2<f64>) -> Result<()> {
    let (r, c) = s.dim();
    if r != c || a.dim() != (r, c) {
        return Err(Error::Shape(format!(
            "structure {:?} and adjacency {:?} must be equal square shapes",
            s.dim(),
            a.dim()
        )));
    }
    Ok(())
}

/// `∇_S [‖A − S‖²_F + γ·L_gnn + λ·tr(Xᵀ L̂ X)]`.
pub fn smooth_grad(
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    params: &GcnParams,
    sup: Supervision<'_>,
    cfg: &ProxConfig,
) -> Result<Array2<f64>> {
    check_square_pair(s, a)?;
    if sup.x.nrows() != s.nrows() {
        return Err(Error::Shape(format!(
            "features have {} rows for a {}-node structure",
            sup.x.nrows(),
            s.nrows()
        )));
    }
    let mut g = (&s - &a) * 2.0;
    if cfg.gamma != 0.0 {
        let prop = Propagation::new(s, sup.x)?;
        let gnn = prop.grads(params, s, sup.x, sup.labels, sup.idx, true)?;
        g.scaled_add(cfg.gamma, gnn.s.as_ref().expect("structure gradient requested"));
    }
    if cfg.lambda != 0.0 {
        g.scaled_add(cfg.lambda, &smoothness_grad(s, sup.x, cfg.eps));
    }
    Ok(g)
}

/// Soft thresholding: `sgn(Z) ⊙ (|Z| − t)_+`.
pub fn prox_l1(z: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
    validate(t >= 0.0, || format!("threshold must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(z.to_owned());
    }
    Ok(z.mapv(|v| {
        let m = v.abs() - t;
        if m > 0.0 {
            v.signum() * m
        } else {
            0.0
        }
    }))
}

/// Singular value thresholding: `U diag((σ − t)_+) Vᵀ`.
pub fn prox_nuclear(z: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
    validate(t >= 0.0, || format!("threshold must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(z.to_owned());
    }
    let svd = linalg::svd(z)?;
    let keep: Vec<usize> = (0..svd.sigma.len()).filter(|&k| svd.sigma[k] > t).collect();
    let (m, n) = z.dim();
    if keep.is_empty() {
        return Ok(Array2::zeros((m, n)));
    }
    let u = svd.u.select(Axis(1), &keep);
    let v = svd.v.select(Axis(1), &keep);
    let shrunk = Array1::from_iter(keep.iter().map(|&k| svd.sigma[k] - t));
    let us = &u * &shrunk.view().insert_axis(Axis(0));
    Ok(us.dot(&v.t()))
}

/// Symmetrize then clip every entry to `[0, 1]`.
pub fn project_s(s: ArrayView2<f64>) -> Array2<f64> {
    let n = s.nrows();
    let mut out = Array2::zeros(s.raw_dim());
    for i in 0..n {
        out[[i, i]] = s[[i, i]].clamp(0.0, 1.0);
        for j in 0..i {
            let v = ((s[[i, j]] + s[[j, i]]) / 2.0).clamp(0.0, 1.0);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Gradient step, nuclear prox, ℓ1 prox, projection, in that order.
pub fn prox_descent_step(
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    params: &GcnParams,
    sup: Supervision<'_>,
    cfg: &ProxConfig,
) -> Result<Array2<f64>> {
    let grad = smooth_grad(s, a, params, sup, cfg)?;
    let mut next = s.to_owned();
    next.scaled_add(-cfg.eta, &grad);
    let next = prox_nuclear(next.view(), cfg.eta * cfg.beta)?;
    let next = prox_l1(next.view(), cfg.eta * cfg.alpha)?;
    Ok(project_s(next.view()))
}

/// The individual terms of the joint objective at `(S, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub fidelity: f64,
    pub l1: f64,
    pub nuclear: f64,
    pub gnn: f64,
    pub smoothness: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, cfg: &ProxConfig) -> f64 {
        self.fidelity
            + cfg.alpha * self.l1
            + cfg.beta * self.nuclear
            + cfg.gamma * self.gnn
            + cfg.lambda * self.smoothness
    }
}

pub fn objective_terms(
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    params: &GcnParams,
    sup: Supervision<'_>,
    cfg: &ProxConfig,
) -> Result<ObjectiveTerms> {
    check_square_pair(s, a)?;
    let fidelity = (&a - &s).iter().map(|v| v * v).sum();
    let l1 = s.iter().map(|v| v.abs()).sum();
    let nuclear = if cfg.beta != 0.0 {
        linalg::nuclear_norm(s)?
    } else {
        0.0
    };
    let gnn = if cfg.gamma != 0.0 {
        crate::gcn::gcn_loss(params, s, sup.x, sup.labels, sup.idx)?
    } else {
        0.0
    };
    let smoothness = if cfg.lambda != 0.0 {
        feature_smoothness(s, sup.x, cfg.eps)
    } else {
        0.0
    };
    Ok(ObjectiveTerms {
        fidelity,
        l1,
        nuclear,
        gnn,
        smoothness,
    })
}

/// `‖A − S‖²_F + α‖S‖₁ + β‖S‖_* + γ L_gnn + λ tr(Xᵀ L̂ X)`.
pub fn objective(
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    params: &GcnParams,
    sup: Supervision<'_>,
    cfg: &ProxConfig,
) -> Result<f64> {
    Ok(objective_terms(s, a, params, sup, cfg)?.total(cfg))
}
