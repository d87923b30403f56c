//! Perturbation-rate sweeps. Each (rate, method, seed) cell is cached as its
//! own JSON file so interrupted sweeps resume without recomputation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use graphclean::attacks::attack;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GraphSource, Method, RunConfig};
use crate::failure::Failure;
use crate::output::{read_json, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rate: f64,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
}

fn cell_name(rate: f64, method: Method, seed: u64) -> String {
    format!("cells/{rate:?}_{method}_{seed}.json")
}

fn run_cell(cfg: &RunConfig, source: &GraphSource, rate: f64, method: Method, seed: u64) -> Result<Cell, Failure> {
    let graph = source.load(Some(seed))?;
    let (poisoned, _) = attack(&graph, cfg.attack.kind, rate, seed, cfg.attack.use_labels)?;
    let result = method.run(&poisoned, &cfg.defense, seed)?;
    Ok(Cell {
        rate,
        method,
        seed,
        accuracy: result.test_accuracy,
    })
}

/// Writes through a temporary name so a killed run never leaves a truncated cell.
fn store(out: &OutDir, cell: &Cell) -> Result<(), Failure> {
    let name = cell_name(cell.rate, cell.method, cell.seed);
    let tmp = format!("{name}.tmp");
    out.write_json(&tmp, cell)?;
    let (from, to) = (out.path(&tmp), out.path(&name));
    fs::rename(&from, &to).map_err(|e| Failure::io(&to, e))
}

pub fn cells_csv(cells: &[Cell]) -> String {
    let mut s = String::from("rate,method,seed,accuracy\n");
    for c in cells {
        let _ = writeln!(s, "{:?},{},{},{:?}", c.rate, c.method, c.seed, c.accuracy);
    }
    s
}

/// Mean and population standard deviation per (rate, method), sorted by key.
pub fn summary_csv(cells: &[Cell]) -> String {
    let mut groups: BTreeMap<(u64, Method), Vec<f64>> = BTreeMap::new();
    for c in cells {
        // Rates are non-negative, so their bit patterns sort like the values.
        groups.entry((c.rate.to_bits(), c.method)).or_default().push(c.accuracy);
    }
    let mut s = String::from("rate,method,mean,std,n\n");
    for ((rate, method), accs) in groups {
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let _ = writeln!(s, "{:?},{method},{mean:.6},{:.6},{}", f64::from_bits(rate), var.sqrt(), accs.len());
    }
    s
}

pub fn benchmark(
    cfg: &RunConfig,
    input: Option<&Path>,
    base_seed: Option<u64>,
    resume: bool,
    out: &OutDir,
) -> Result<(), Failure> {
    let spec = &cfg.benchmark;
    if spec.rates.is_empty() || spec.methods.is_empty() || spec.seeds == 0 {
        return Err(Failure::Invalid("benchmark needs at least one rate, method and seed".into()));
    }
    if let Some(r) = spec.rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Failure::Invalid(format!("perturbation rate must lie in [0, 1], got {r}")));
    }
    cfg.defense.hyper.validate()?;
    let source = cfg.source(input);
    let base = base_seed.unwrap_or(0);

    if !resume {
        out.claim(&["benchmark.csv", "cells.csv", "cells"])?;
    }
    fs::create_dir_all(out.path("cells")).map_err(|e| Failure::io(&out.path("cells"), e))?;

    let mut keys = Vec::new();
    for &rate in &spec.rates {
        for &method in &spec.methods {
            for seed in base..base + spec.seeds {
                keys.push((rate, method, seed));
            }
        }
    }
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.dedup();

    let mut cached = Vec::new();
    let mut todo = Vec::new();
    for &(rate, method, seed) in &keys {
        let p = out.path(&cell_name(rate, method, seed));
        if resume && p.exists() {
            cached.push(read_json::<Cell>(&p)?);
        } else {
            todo.push((rate, method, seed));
        }
    }
    let computed: Vec<Cell> = todo
        .par_iter()
        .map(|&(rate, method, seed)| {
            let cell = run_cell(cfg, &source, rate, method, seed)?;
            store(out, &cell)?;
            Ok(cell)
        })
        .collect::<Result<_, Failure>>()?;

    let (n_cached, n_computed) = (cached.len(), computed.len());
    let mut cells = cached;
    cells.extend(computed);
    cells.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.method.cmp(&b.method)).then(a.seed.cmp(&b.seed)));
    out.write("cells.csv", &cells_csv(&cells))?;
    out.write("benchmark.csv", &summary_csv(&cells))?;
    println!("cells cached {n_cached} computed {n_computed}");
    Ok(())
}
