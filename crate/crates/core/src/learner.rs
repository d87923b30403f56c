//! Alternating optimization of the structure matrix and the GCN weights.

use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validate, Error, Result};
use crate::gcn::{self, GcnParams, Propagation};
use crate::graph::Graph;
use crate::prox::{self, ObjectiveTerms, ProxConfig, Supervision};

/// How structure and weights are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Structure and weights updated alternately.
    #[default]
    Joint,
    /// Structure cleaned first without the GCN term, weights trained afterwards.
    TwoStage,
    /// Structure frozen at the input adjacency.
    GcnOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    #[serde(flatten)]
    pub prox: ProxConfig,
    /// Weight learning rate.
    pub eta_prime: f64,
    /// Weight steps per outer iteration.
    pub tau: usize,
    pub outer_iters: usize,
    pub hidden: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Stop after this many outer iterations without a new best snapshot.
    pub patience: Option<usize>,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            prox: ProxConfig::default(),
            eta_prime: 1e-2,
            tau: 2,
            outer_iters: 400,
            hidden: 16,
            seed: 0,
            mode: Mode::Joint,
            patience: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        self.prox.validate()?;
        validate(self.eta_prime.is_finite() && self.eta_prime > 0.0, || {
            format!("eta_prime must be > 0, got {}", self.eta_prime)
        })?;
        validate(self.tau >= 1, || "tau must be >= 1".into())?;
        validate(self.outer_iters >= 1, || "outer_iters must be >= 1".into())?;
        validate(self.hidden >= 1, || "hidden must be >= 1".into())
    }
}

/// One outer iteration's diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    #[serde(rename = "learned_S", with = "crate::matrix_serde")]
    pub learned_s: Array2<f64>,
    pub params: GcnParams,
    pub history: Vec<IterationRecord>,
    pub best_iteration: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
}

impl TrainResult {
    /// Entries of the upper triangle (diagonal included) above `threshold`.
    pub fn sparse_structure(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let n = self.learned_s.nrows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let w = self.learned_s[[i, j]];
                if w > threshold {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

/// The regularizer kept by an ablation; the other three weights are zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Alpha,
    Beta,
    Gamma,
    Lambda,
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Ablation::Alpha),
            "beta" => Ok(Ablation::Beta),
            "gamma" => Ok(Ablation::Gamma),
            "lambda" => Ok(Ablation::Lambda),
            other => Err(Error::Validation(format!(
                "unknown ablation {other:?}; expected alpha, beta, gamma or lambda"
            ))),
        }
    }
}

pub fn ablation_variant(hp: &HyperParams, variant: Ablation, value: f64) -> Result<HyperParams> {
    validate(value.is_finite() && value >= 0.0, || {
        format!("ablation value must be >= 0, got {value}")
    })?;
    let mut out = *hp;
    out.prox.alpha = 0.0;
    out.prox.beta = 0.0;
    out.prox.gamma = 0.0;
    out.prox.lambda = 0.0;
    match variant {
        Ablation::Alpha => out.prox.alpha = value,
        Ablation::Beta => out.prox.beta = value,
        Ablation::Gamma => out.prox.gamma = value,
        Ablation::Lambda => out.prox.lambda = value,
    }
    Ok(out)
}

/// Runs the optimization selected by `hp.mode`.
pub fn train(graph: &Graph, hp: &HyperParams) -> Result<TrainResult> {
    train_observed(graph, hp, |_, _| {})
}

/// Like [`train`], calling `observe(iteration, S)` after every structure update.
pub fn train_observed(
    graph: &Graph,
    hp: &HyperParams,
    observe: impl FnMut(usize, &Array2<f64>),
) -> Result<TrainResult> {
    hp.validate()?;
    match hp.mode {
        Mode::Joint => run(graph, graph.adjacency().clone(), hp, true, observe),
        Mode::GcnOnly => run(graph, graph.adjacency().clone(), hp, false, observe),
        Mode::TwoStage => two_stage(graph, hp, observe),
    }
}

/// Cleans the structure without the GCN term, then trains on the frozen result.
pub fn train_two_stage(graph: &Graph, hp: &HyperParams) -> Result<TrainResult> {
    hp.validate()?;
    two_stage(graph, hp, |_, _| {})
}

/// Trains the GCN on a fixed structure for `tau * outer_iters` steps.
pub fn train_on_structure(graph: &Graph, s: Array2<f64>, hp: &HyperParams) -> Result<TrainResult> {
    hp.validate()?;
    if s.dim() != graph.adjacency().dim() {
        return Err(Error::Shape(format!(
            "structure {:?} does not match graph of {} nodes",
            s.dim(),
            graph.n()
        )));
    }
    run(graph, s, hp, false, |_, _| {})
}

fn two_stage(
    graph: &Graph,
    hp: &HyperParams,
    mut observe: impl FnMut(usize, &Array2<f64>),
) -> Result<TrainResult> {
    let cfg = ProxConfig {
        gamma: 0.0,
        ..hp.prox
    };
    let a = graph.adjacency();
    let splits = graph.splits();
    let sup = Supervision {
        x: graph.features().view(),
        labels: graph.labels(),
        idx: &splits.train,
    };
    // The GCN term is off, so these weights never enter the structure gradient.
    let unused = init_params(graph, hp);
    let mut s = a.clone();
    for it in 0..hp.outer_iters {
        s = prox::prox_descent_step(s.view(), a.view(), &unused, sup, &cfg)?;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { iteration: it });
        }
        observe(it, &s);
    }
    run(graph, s, hp, false, |_, _| {})
}

fn init_params(graph: &Graph, hp: &HyperParams) -> GcnParams {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    GcnParams::init(graph.feature_dim(), hp.hidden, graph.n_classes(), &mut rng)
}

struct Snapshot {
    iteration: usize,
    s: Array2<f64>,
    params: GcnParams,
    val_accuracy: f64,
    val_loss: f64,
}

fn structure_terms(
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    params: &GcnParams,
    sup: Supervision<'_>,
    cfg: &ProxConfig,
) -> Result<ObjectiveTerms> {
    let no_gnn = ProxConfig { gamma: 0.0, ..*cfg };
    prox::objective_terms(s, a, params, sup, &no_gnn)
}

fn run(
    graph: &Graph,
    s0: Array2<f64>,
    hp: &HyperParams,
    update_structure: bool,
    mut observe: impl FnMut(usize, &Array2<f64>),
) -> Result<TrainResult> {
    let splits = graph.splits();
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::Validation(
            "training needs nonempty train and validation sets".into(),
        ));
    }
    let a = graph.adjacency();
    let x = graph.features().view();
    let labels = graph.labels();
    let sup = Supervision {
        x,
        labels,
        idx: &splits.train,
    };

    let mut s = s0;
    let mut params = init_params(graph, hp);
    let mut history = Vec::with_capacity(hp.outer_iters);
    let mut best: Option<Snapshot> = None;
    let mut last_gain = 0;
    let mut terms = structure_terms(s.view(), a.view(), &params, sup, &hp.prox)?;
    let mut prop = Propagation::new(s.view(), x)?;

    for it in 0..hp.outer_iters {
        if update_structure {
            s = prox::prox_descent_step(s.view(), a.view(), &params, sup, &hp.prox)?;
            observe(it, &s);
            terms = structure_terms(s.view(), a.view(), &params, sup, &hp.prox)?;
            prop = Propagation::new(s.view(), x)?;
        }
        for _ in 0..hp.tau {
            params = gcn::step_with(&prop, &params, s.view(), x, labels, &splits.train, hp.eta_prime)?.0;
        }

        let out = prop.forward(&params)?;
        let train_loss = gcn::mean_nll(&out.logits, labels, &splits.train)?;
        let val_loss = gcn::mean_nll(&out.logits, labels, &splits.val)?;
        let val_accuracy = gcn::accuracy(&out.probs, labels, &splits.val);
        let objective = ObjectiveTerms {
            gnn: train_loss,
            ..terms
        }
        .total(&hp.prox);
        if !objective.is_finite() || !params.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        history.push(IterationRecord {
            iteration: it,
            objective,
            train_loss,
            val_accuracy,
        });

        let improved = match &best {
            None => true,
            Some(b) => {
                val_accuracy > b.val_accuracy || (val_accuracy == b.val_accuracy && val_loss < b.val_loss)
            }
        };
        if best.as_ref().map_or(true, |b| val_accuracy > b.val_accuracy) {
            last_gain = it;
        }
        if improved {
            best = Some(Snapshot {
                iteration: it,
                s: s.clone(),
                params: params.clone(),
                val_accuracy,
                val_loss,
            });
        }
        // Patience counts only strict accuracy gains; loss tie-breaks don't reset it.
        if hp.patience.is_some_and(|p| it - last_gain >= p) {
            break;
        }
    }

    let best = best.expect("outer_iters >= 1");
    let out = gcn::gcn_forward(&best.params, x, best.s.view())?;
    let test_accuracy = if splits.test.is_empty() {
        0.0
    } else {
        gcn::accuracy(&out.probs, labels, &splits.test)
    };
    Ok(TrainResult {
        learned_s: best.s,
        params: best.params,
        history,
        best_iteration: best.iteration,
        best_val_accuracy: best.val_accuracy,
        test_accuracy,
    })
}
