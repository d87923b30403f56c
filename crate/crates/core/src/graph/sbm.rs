use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Graph, Splits};
use crate::error::{validate, Result};

/// Parameters of a planted-partition stochastic block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub n_per_block: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Standard deviation of the Gaussian noise added to one-hot block features.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    /// Two blocks of 100 nodes with noisy one-hot features.
    fn default() -> Self {
        SbmConfig {
            n_per_block: 100,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
            feature_noise: 1.5,
            seed: 0,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        validate(self.blocks >= 1 && self.n_per_block >= 1, || {
            "need at least one block with at least one node".into()
        })?;
        validate(
            (0.0..=1.0).contains(&self.p_in) && (0.0..=1.0).contains(&self.p_out),
            || format!("probabilities must lie in [0, 1] (p_in={}, p_out={})", self.p_in, self.p_out),
        )?;
        validate(self.p_out < self.p_in, || {
            format!("p_out ({}) must be smaller than p_in ({})", self.p_out, self.p_in)
        })?;
        validate(self.feature_noise.is_finite() && self.feature_noise >= 0.0, || {
            format!("feature_noise must be finite and >= 0, got {}", self.feature_noise)
        })
    }
}

/// Random 10% / 10% / 80% split of `0..n`.
pub fn random_split(n: usize, rng: &mut impl Rng) -> Splits {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let n_train = (n as f64 * 0.1).round() as usize;
    let n_val = (n as f64 * 0.1).round() as usize;
    let mut train = ids[..n_train].to_vec();
    let mut val = ids[n_train..n_train + n_val].to_vec();
    let mut test = ids[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Splits { train, val, test }
}

/// Samples a block-model graph. Labels are block ids; also returns the block of each node.
pub fn sbm_generate(cfg: &SbmConfig) -> Result<(Graph, Vec<usize>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_per_block * cfg.blocks;
    let block: Vec<usize> = (0..n).map(|i| i / cfg.n_per_block).collect();

    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                Graph::set_edge(&mut adj, i, j, 1.0);
            }
        }
    }

    let mut features = Array2::zeros((n, cfg.blocks));
    if cfg.feature_noise > 0.0 {
        let noise = Normal::new(0.0, cfg.feature_noise).expect("validated noise scale");
        features.mapv_inplace(|_: f64| noise.sample(&mut rng));
    }
    for (i, &b) in block.iter().enumerate() {
        features[[i, b]] += 1.0;
    }

    let splits = random_split(n, &mut rng);
    let graph = Graph::new(adj, features, block.clone(), splits)?;
    Ok((graph, block))
}
