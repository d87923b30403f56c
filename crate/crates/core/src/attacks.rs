//! Edge-injection attacks. Both attacks only add edges.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{validate, Error, Result};
use crate::graph::{Graph, PerturbationRecord};

fn budget(graph: &Graph, rate: f64) -> Result<usize> {
    validate(rate.is_finite() && (0.0..=1.0).contains(&rate), || {
        format!("perturbation rate must lie in [0, 1], got {rate}")
    })?;
    Ok((rate * graph.edge_count() as f64).round() as usize)
}

fn absent_pairs(graph: &Graph) -> Vec<(usize, usize)> {
    let n = graph.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !graph.has_edge(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

fn inject(graph: &Graph, mut added: Vec<(usize, usize)>) -> Result<(Graph, PerturbationRecord)> {
    added.sort_unstable();
    let clean_edges = graph.edge_count();
    let record = PerturbationRecord {
        perturbation_rate: if clean_edges == 0 {
            0.0
        } else {
            added.len() as f64 / clean_edges as f64
        },
        added_edges: added,
        removed_edges: Vec::new(),
    };
    let poisoned = record.apply(graph)?;
    Ok((poisoned, record))
}

/// Injects `round(rate · |E|)` uniformly random new edges.
pub fn random_attack(graph: &Graph, rate: f64, seed: u64) -> Result<(Graph, PerturbationRecord)> {
    let k = budget(graph, rate)?;
    let candidates = absent_pairs(graph);
    if k > candidates.len() {
        return Err(Error::Capacity {
            requested: k,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    inject(graph, chosen)
}

/// Injects `round(rate · |E|)` edges between the most dissimilar absent pairs,
/// by squared feature distance. With `use_labels`, only pairs whose labels
/// differ are candidates. Ties go to the lexicographically smaller pair.
pub fn dissimilar_feature_attack(
    graph: &Graph,
    rate: f64,
    use_labels: bool,
) -> Result<(Graph, PerturbationRecord)> {
    let k = budget(graph, rate)?;
    let x = graph.features();
    let labels = graph.labels();
    let mut candidates: Vec<(f64, (usize, usize))> = absent_pairs(graph)
        .into_iter()
        .filter(|&(i, j)| !use_labels || labels[i] != labels[j])
        .map(|(i, j)| {
            let diff = &x.row(i) - &x.row(j);
            (diff.dot(&diff), (i, j))
        })
        .collect();
    if k > candidates.len() {
        return Err(Error::Capacity {
            requested: k,
            available: candidates.len(),
        });
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    inject(graph, candidates.into_iter().take(k).map(|(_, p)| p).collect())
}

/// Injection attack selector used by the CLI and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Random,
    Dissimilar,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(AttackKind::Random),
            "dissimilar" => Ok(AttackKind::Dissimilar),
            other => Err(Error::Validation(format!(
                "unknown attack kind {other:?}; expected random or dissimilar"
            ))),
        }
    }
}

pub fn attack(
    graph: &Graph,
    kind: AttackKind,
    rate: f64,
    seed: u64,
    use_labels: bool,
) -> Result<(Graph, PerturbationRecord)> {
    match kind {
        AttackKind::Random => random_attack(graph, rate, seed),
        AttackKind::Dissimilar => dissimilar_feature_attack(graph, rate, use_labels),
    }
}
