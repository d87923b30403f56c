use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use graphclean::attacks::AttackKind;
use graphclean::baselines;
use graphclean::graph::{load_graph, sbm_generate, GraphPaths, SbmConfig};
use graphclean::learner::{self, HyperParams, Mode, TrainResult};
use graphclean::Graph;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Everything a command may need. Every section is optional and falls back
/// to defaults; command-line flags override individual fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<GraphSource>,
    pub attack: AttackSpec,
    pub defense: DefenseSpec,
    pub benchmark: BenchmarkSpec,
    pub analysis: AnalysisSpec,
}

/// Where a graph comes from: exactly one of a synthetic model, a directory
/// in the standard layout, or explicit file paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Sbm(SbmConfig),
    Dir(PathBuf),
    Files {
        edges: PathBuf,
        features: Option<PathBuf>,
        labels: PathBuf,
        splits: PathBuf,
    },
}

impl GraphSource {
    /// Materializes the graph; `seed` replaces the model seed for SBM sources.
    pub fn load(&self, seed: Option<u64>) -> Result<Graph, Failure> {
        match self {
            GraphSource::Sbm(cfg) => {
                let cfg = SbmConfig {
                    seed: seed.unwrap_or(cfg.seed),
                    ..cfg.clone()
                };
                Ok(sbm_generate(&cfg)?.0)
            }
            GraphSource::Dir(dir) => Ok(load_graph(&GraphPaths::in_dir(dir))?),
            GraphSource::Files {
                edges,
                features,
                labels,
                splits,
            } => Ok(load_graph(&GraphPaths {
                edges: edges.clone(),
                features: features.clone(),
                labels: labels.clone(),
                splits: splits.clone(),
            })?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub rate: f64,
    /// Restrict the dissimilar attack to pairs with different labels.
    pub use_labels: bool,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::Dissimilar,
            rate: 0.25,
            use_labels: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseSpec {
    pub method: Method,
    pub hyper: HyperParams,
    /// Truncation rank for gcn_svd.
    pub svd_rank: usize,
    /// Similarity threshold for gcn_jaccard.
    pub jaccard_threshold: f64,
}

impl Default for DefenseSpec {
    fn default() -> Self {
        DefenseSpec {
            method: Method::Prognn,
            hyper: HyperParams::default(),
            svd_rank: 10,
            jaccard_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub rates: Vec<f64>,
    pub methods: Vec<Method>,
    /// Number of seeds per cell, counted up from the base seed.
    pub seeds: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            rates: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
            methods: vec![Method::Gcn, Method::Prognn],
            seeds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Report {
    Spectrum,
    RankCurve,
    FeatureDensity,
    EdgeWeights,
}

impl FromStr for Report {
    type Err = Failure;
    fn from_str(s: &str) -> Result<Self, Failure> {
        match s {
            "spectrum" => Ok(Report::Spectrum),
            "rank_curve" => Ok(Report::RankCurve),
            "feature_density" => Ok(Report::FeatureDensity),
            "edge_weights" => Ok(Report::EdgeWeights),
            other => Err(Failure::Invalid(format!(
                "unknown report {other:?}; expected spectrum, rank_curve, feature_density or edge_weights"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub reports: Vec<Report>,
    pub bins: usize,
    pub steps: usize,
    /// Absolute rank tolerance; defaults to 1e-6 times the largest singular value.
    pub tol: Option<f64>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            reports: vec![Report::Spectrum],
            bins: 20,
            steps: 10,
            tol: None,
        }
    }
}

/// Registered defenses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Prognn,
    PrognnTwo,
    Gcn,
    GcnSvd,
    GcnJaccard,
    GcnNograph,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Prognn,
        Method::PrognnTwo,
        Method::Gcn,
        Method::GcnSvd,
        Method::GcnJaccard,
        Method::GcnNograph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Prognn => "prognn",
            Method::PrognnTwo => "prognn_two",
            Method::Gcn => "gcn",
            Method::GcnSvd => "gcn_svd",
            Method::GcnJaccard => "gcn_jaccard",
            Method::GcnNograph => "gcn_nograph",
        }
    }

    pub fn run(self, graph: &Graph, spec: &DefenseSpec, seed: u64) -> Result<TrainResult, Failure> {
        let hp = HyperParams {
            seed,
            ..spec.hyper
        };
        let result = match self {
            Method::Prognn => learner::train(graph, &HyperParams { mode: Mode::Joint, ..hp }),
            Method::PrognnTwo => learner::train_two_stage(graph, &hp),
            Method::Gcn => baselines::gcn(graph, &hp),
            Method::GcnSvd => baselines::gcn_svd_baseline(graph, spec.svd_rank.min(graph.n()), &hp),
            Method::GcnJaccard => baselines::gcn_jaccard_baseline(graph, spec.jaccard_threshold, &hp),
            Method::GcnNograph => baselines::gcn_nograph(graph, &hp),
        };
        Ok(result?)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Failure;
    fn from_str(s: &str) -> Result<Self, Failure> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Failure::Invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
    }

    /// The graph named by `--input`, else the configured source, else the default SBM.
    pub fn source(&self, input: Option<&Path>) -> GraphSource {
        match (input, &self.graph) {
            (Some(dir), _) => GraphSource::Dir(dir.to_path_buf()),
            (None, Some(src)) => src.clone(),
            (None, None) => GraphSource::Sbm(SbmConfig::default()),
        }
    }
}
