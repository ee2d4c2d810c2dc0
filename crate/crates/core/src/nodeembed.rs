//! Time-indexed node embeddings from biased second-order random walks,
//! trained with skip-gram and negative sampling.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dtwsim::SimilarityTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// Halt-status parameter: weight `1/q` for nodes that already halted.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub learning_rate: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 0.5,
            walk_length: 8,
            walks_per_node: 10,
            window: 3,
            dim: 4,
            negatives: 5,
            learning_rate: 0.025,
        }
    }
}

/// Unnormalized weight of stepping to each node `k` from `current`, having
/// arrived from `source`. Entry `current` is always zero.
///
/// Falls back to uniform over `k != current` when every weight is zero.
pub fn transition_weights(
    source: usize,
    current: usize,
    sim: &SimilarityTensor,
    halted: &[bool],
    cfg: &WalkConfig,
) -> Vec<f64> {
    let n = sim.n();
    let row: Vec<f64> = (0..n).map(|k| sim.min_over_lags(current, k)).collect();
    let mut w = vec![0.0; n];
    fill_weights(source, current, &row, halted, cfg, &mut w);
    w
}

/// `row[k]` is the similarity from `current` to `k`.
fn fill_weights(source: usize, current: usize, row: &[f64], halted: &[bool], cfg: &WalkConfig, w: &mut [f64]) {
    let mut total = 0.0;
    for (k, (wk, &s)) in w.iter_mut().zip(row).enumerate() {
        *wk = if k == current {
            0.0
        } else {
            let alpha = if k == source && source != current {
                1.0 / cfg.p
            } else if halted[k] {
                1.0 / cfg.q
            } else {
                1.0
            };
            alpha * s
        };
        total += *wk;
    }
    if total <= 0.0 {
        for (k, v) in w.iter_mut().enumerate() {
            *v = if k == current { 0.0 } else { 1.0 };
        }
    }
}

/// Draws an index proportionally to `w`; `None` if all weights are zero.
fn sample_weighted<R: Rng>(w: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    let mut last = None;
    for (k, &v) in w.iter().enumerate() {
        if v > 0.0 {
            if r < v {
                return Some(k);
            }
            r -= v;
            last = Some(k);
        }
    }
    last
}

fn walk_rng(seed: u64, start: usize, walk: usize) -> ChaCha8Rng {
    let mix = seed
        ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (walk as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    ChaCha8Rng::seed_from_u64(mix)
}

/// `walks_per_node` walks from every start node, each with its own RNG stream.
pub fn sample_walks(sim: &SimilarityTensor, halted: &[bool], cfg: &WalkConfig, seed: u64) -> Vec<Vec<usize>> {
    let n = sim.n();
    let min_sim: Vec<f64> = (0..n * n).map(|k| sim.min_over_lags(k / n, k % n)).collect();
    let mut weights = vec![0.0; n];
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for w in 0..cfg.walks_per_node {
        for start in 0..n {
            let mut rng = walk_rng(seed, start, w);
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut source = start;
            let mut current = start;
            while walk.len() < cfg.walk_length {
                fill_weights(source, current, &min_sim[current * n..(current + 1) * n], halted, cfg, &mut weights);
                let Some(next) = sample_weighted(&weights, &mut rng) else { break };
                walk.push(next);
                source = current;
                current = next;
            }
            walks.push(walk);
        }
    }
    walks
}

/// Input (`f_t`) and context vectors for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub t: usize,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    pub context: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    /// word2vec-style init: inputs uniform in `±0.5/dim`, contexts zero.
    pub fn new<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Self {
        let s = 0.5 / dim as f64;
        let vectors = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-s..s)).collect())
            .collect();
        Self {
            t: 0,
            dim,
            vectors,
            context: vec![vec![0.0; dim]; n],
        }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            t: 0,
            dim,
            vectors: vec![vec![0.0; dim]; n],
            context: vec![vec![0.0; dim]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, node: usize) -> &[f64] {
        &self.vectors[node]
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Skip-gram score `f(a) · g(b)` used by the training objective.
    pub fn score(&self, a: usize, b: usize) -> f64 {
        dot(&self.vectors[a], &self.context[b])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const MAX_NORM: f64 = 10.0;

/// Logistic step on one (center, target) pair; accumulates the center's gradient.
fn sgns_pair(table: &mut EmbeddingTable, center: usize, target: usize, label: f64, lr: f64, grad_in: &mut [f64]) {
    let f = dot(&table.vectors[center], &table.context[target]);
    let g = lr * (label - crate::numdiff::sigmoid(f));
    let v = &table.vectors[center];
    let c = &mut table.context[target];
    for ((gi, ck), vk) in grad_in.iter_mut().zip(c.iter_mut()).zip(v) {
        *gi += g * *ck;
        *ck += g * vk;
    }
}

/// One pass of skip-gram with negative sampling over `walks`, warm-started from `prev`.
pub fn train_embeddings<R: Rng>(
    walks: &[Vec<usize>],
    prev: &EmbeddingTable,
    cfg: &WalkConfig,
    t: usize,
    rng: &mut R,
) -> EmbeddingTable {
    let mut table = prev.clone();
    table.t = t;
    let n = table.n();
    if walks.iter().all(|w| w.len() < 2) {
        return table;
    }
    let mut counts = vec![0.0f64; n];
    for w in walks {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let noise: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let Ok(noise_dist) = WeightedIndex::new(&noise) else {
        return table;
    };
    let dim = table.dim;
    let lr = cfg.learning_rate;
    let mut grad_in = vec![0.0; dim];
    for walk in walks {
        for (pos, &center) in walk.iter().enumerate() {
            let lo = pos.saturating_sub(cfg.window);
            let hi = (pos + cfg.window).min(walk.len() - 1);
            for (cpos, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if cpos == pos {
                    continue;
                }
                grad_in.iter_mut().for_each(|g| *g = 0.0);
                sgns_pair(&mut table, center, ctx, 1.0, lr, &mut grad_in);
                for _ in 0..cfg.negatives {
                    let neg = noise_dist.sample(rng);
                    if neg != ctx {
                        sgns_pair(&mut table, center, neg, 0.0, lr, &mut grad_in);
                    }
                }
                for k in 0..dim {
                    table.vectors[center][k] += grad_in[k];
                }
            }
        }
    }
    for v in table.vectors.iter_mut().chain(table.context.iter_mut()) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > MAX_NORM {
            v.iter_mut().for_each(|x| *x *= MAX_NORM / norm);
        }
    }
    table
}
