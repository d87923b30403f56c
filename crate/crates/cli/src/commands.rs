use std::path::{Path, PathBuf};

use graphclean::analysis::{
    edge_weight_report, feature_diff_density, rank_decrease_curve, singular_spectrum,
    singular_spectrum_relative, RankCurves,
};
use graphclean::attacks::{attack as run_attack, AttackKind};
use graphclean::graph::{save_graph, GraphPaths, SbmConfig};
use graphclean::{Graph, PerturbationRecord, TrainResult};
use ndarray::Array2;
use serde::Serialize;

use crate::config::{GraphSource, Method, Report, RunConfig};
use crate::failure::Failure;
use crate::output::{read_json, OutDir};

pub const GRAPH_FILES: [&str; 4] = ["edges.txt", "features.csv", "labels.csv", "splits.json"];

fn save(graph: &Graph, out: &OutDir) -> Result<(), Failure> {
    Ok(save_graph(graph, &GraphPaths::in_dir(out.path("")))?)
}

pub fn generate(cfg: &RunConfig, seed: Option<u64>, out: &OutDir) -> Result<(), Failure> {
    let sbm = match cfg.source(None) {
        GraphSource::Sbm(s) => s,
        _ => return Err(Failure::Invalid("generate needs an sbm graph source".into())),
    };
    let sbm = SbmConfig {
        seed: seed.unwrap_or(sbm.seed),
        ..sbm
    };
    let graph = GraphSource::Sbm(sbm).load(None)?;
    out.claim(&GRAPH_FILES)?;
    save(&graph, out)?;
    println!("nodes {} edges {}", graph.n(), graph.edge_count());
    Ok(())
}

pub fn attack(
    cfg: &RunConfig,
    input: Option<&Path>,
    kind: Option<&str>,
    rate: Option<f64>,
    seed: Option<u64>,
    out: &OutDir,
) -> Result<(), Failure> {
    let kind: AttackKind = match kind {
        Some(k) => k.parse()?,
        None => cfg.attack.kind,
    };
    let rate = rate.unwrap_or(cfg.attack.rate);
    let graph = cfg.source(input).load(seed)?;
    let (poisoned, record) = run_attack(&graph, kind, rate, seed.unwrap_or(0), cfg.attack.use_labels)?;
    let mut names = GRAPH_FILES.to_vec();
    names.push("record.json");
    out.claim(&names)?;
    save(&poisoned, out)?;
    out.write_json("record.json", &record)?;
    println!("added {} edges", record.added_edges.len());
    Ok(())
}

pub fn train(
    cfg: &RunConfig,
    input: Option<&Path>,
    method: Option<&str>,
    seed: Option<u64>,
    out: &OutDir,
) -> Result<(), Failure> {
    let method: Method = match method {
        Some(m) => m.parse()?,
        None => cfg.defense.method,
    };
    let graph = cfg.source(input).load(seed)?;
    let result = method.run(&graph, &cfg.defense, seed.unwrap_or(cfg.defense.hyper.seed))?;
    out.claim(&["result.json"])?;
    out.write_json("result.json", &result)?;
    println!("{method} test_accuracy {:.4}", result.test_accuracy);
    Ok(())
}

/// Inputs of the analyze command beyond the run configuration.
pub struct AnalyzeInputs {
    pub input: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub result: Option<PathBuf>,
    pub clean: Option<PathBuf>,
    pub reports: Vec<String>,
}

fn read_matrix(path: &Path) -> Result<Array2<f64>, Failure> {
    let rows: Vec<Vec<f64>> = read_json(path)?;
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Failure::Invalid(format!(
            "{}: expected a non-empty rectangular array of rows",
            path.display()
        )));
    }
    Ok(Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).expect("checked shape"))
}

#[derive(Serialize)]
struct RankCurveReport<'a> {
    #[serde(flatten)]
    curves: &'a RankCurves,
    adversarial_area: f64,
    normal_area: f64,
    tol: f64,
}

pub fn analyze(cfg: &RunConfig, args: &AnalyzeInputs, seed: Option<u64>, out: &OutDir) -> Result<(), Failure> {
    let reports = if args.reports.is_empty() {
        cfg.analysis.reports.clone()
    } else {
        args.reports.iter().map(|r| r.parse()).collect::<Result<Vec<Report>, _>>()?
    };
    let wants = |r: Report| reports.contains(&r);
    let needs_record = wants(Report::RankCurve) || wants(Report::EdgeWeights);
    if needs_record && args.record.is_none() {
        return Err(Failure::Invalid(
            "rank_curve and edge_weights reports need --record".into(),
        ));
    }
    if wants(Report::EdgeWeights) && args.result.is_none() {
        return Err(Failure::Invalid("edge_weights report needs --result".into()));
    }
    let record: PerturbationRecord = match &args.record {
        Some(p) => read_json(p)?,
        None => PerturbationRecord::default(),
    };
    let needs_graph = reports.iter().any(|&r| r != Report::Spectrum) || args.matrix.is_none();
    let graph = if needs_graph {
        Some(cfg.source(args.input.as_deref()).load(seed)?)
    } else {
        None
    };

    let mut planned = Vec::new();
    for r in &reports {
        match r {
            Report::Spectrum => planned.extend(["spectrum.csv", "spectrum.json"]),
            Report::RankCurve => planned.extend(["rank_curve.csv", "rank_curve.json"]),
            Report::FeatureDensity => planned.extend(["feature_density.csv", "feature_density.json"]),
            Report::EdgeWeights => planned.push("edge_weights.json"),
        }
    }
    out.claim(&planned)?;

    let tol_for = |m: &Array2<f64>| -> Result<f64, Failure> {
        Ok(match cfg.analysis.tol {
            Some(t) => t,
            None => singular_spectrum_relative(m.view())?.tol,
        })
    };
    for r in reports {
        match r {
            Report::Spectrum => {
                let m = match &args.matrix {
                    Some(p) => read_matrix(p)?,
                    None => graph.as_ref().expect("graph loaded").adjacency().clone(),
                };
                let rep = singular_spectrum(m.view(), tol_for(&m)?)?;
                out.write("spectrum.csv", &rep.to_csv())?;
                out.write_json("spectrum.json", &rep)?;
                println!("numerical_rank {}", rep.numerical_rank);
            }
            Report::RankCurve => {
                let g = graph.as_ref().expect("graph loaded");
                let tol = tol_for(g.adjacency())?;
                let curves = rank_decrease_curve(g, &record, cfg.analysis.steps, tol, seed.unwrap_or(0))?;
                let (adversarial_area, normal_area) = curves.areas();
                out.write("rank_curve.csv", &curves.to_csv())?;
                out.write_json(
                    "rank_curve.json",
                    &RankCurveReport {
                        curves: &curves,
                        adversarial_area,
                        normal_area,
                        tol,
                    },
                )?;
            }
            Report::FeatureDensity => {
                let g = graph.as_ref().expect("graph loaded");
                let d = feature_diff_density(g, &record, cfg.analysis.bins)?;
                out.write("feature_density.csv", &d.to_csv())?;
                out.write_json("feature_density.json", &d)?;
            }
            Report::EdgeWeights => {
                let g = graph.as_ref().expect("graph loaded");
                let clean = match &args.clean {
                    Some(dir) => GraphSource::Dir(dir.clone()).load(None)?,
                    None => record.revert(g)?,
                };
                let result: TrainResult = read_json(args.result.as_deref().expect("checked above"))?;
                let rep = edge_weight_report(result.learned_s.view(), &clean, &record)?;
                out.write_json("edge_weights.json", &rep)?;
                println!(
                    "mean_normal {:.4} mean_adversarial {:.4}",
                    rep.mean_normal, rep.mean_adversarial
                );
            }
        }
    }
    Ok(())
}
