//! Synthetic datasets with known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SpatioTemporalDataset;
use crate::error::{Result, StemoError};
use crate::graphcore::Graph;

const INTERVAL_SECS: i64 = 300;
const EPOCH: i64 = 1_704_067_200; // 2024-01-01T00:00:00Z

/// Blocks of `block_len` steps. In every block each node sits at its base
/// level until `t_c + lag`, then ramps over `ramp` steps to a new level
/// `base + shared·scale_i + private_i`. The shared amplitude is common to all
/// nodes, so early-lag nodes reveal most of what late-lag nodes will do.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangepointSpec {
    pub n: usize,
    pub blocks: usize,
    pub block_len: usize,
    pub t_c: usize,
    /// Lag per node; cycled when shorter than `n`.
    pub lags: Vec<usize>,
    pub ramp: usize,
    pub sigma: f64,
    pub base: f64,
    /// Shared amplitude drawn uniformly from `[-shared_amp, shared_amp]`.
    pub shared_amp: f64,
    /// Node-specific amplitude drawn uniformly from `[-private_amp, private_amp]`.
    pub private_amp: f64,
    pub seed: u64,
}

impl Default for ChangepointSpec {
    fn default() -> Self {
        Self {
            n: 6,
            blocks: 200,
            block_len: 12,
            t_c: 4,
            lags: vec![0, 1, 2, 3],
            ramp: 2,
            sigma: 0.1,
            base: 10.0,
            shared_amp: 2.0,
            private_amp: 0.5,
            seed: 0,
        }
    }
}

impl ChangepointSpec {
    pub fn lag(&self, node: usize) -> usize {
        self.lags[node % self.lags.len()]
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.blocks == 0 || self.block_len < 2 || self.lags.is_empty() || self.ramp == 0 {
            return Err(StemoError::Config("changepoint spec needs n, blocks, lags, ramp > 0 and block_len >= 2".into()));
        }
        if !(self.sigma >= 0.0 && self.shared_amp >= 0.0 && self.private_amp >= 0.0) {
            return Err(StemoError::Config("noise and amplitudes must be nonnegative".into()));
        }
        Ok(())
    }
}

fn node_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

fn timestamps(len: usize) -> Vec<i64> {
    (0..len as i64).map(|k| EPOCH + k * INTERVAL_SECS).collect()
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite sigma")
}

/// Fraction of the ramp completed at step `s` of a block.
fn ramp_fraction(s: usize, onset: usize, ramp: usize) -> f64 {
    if s < onset {
        0.0
    } else {
        ((s - onset + 1) as f64 / ramp as f64).min(1.0)
    }
}

pub fn changepoint(spec: &ChangepointSpec) -> Result<SpatioTemporalDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    // nodes sit along a line ordered by lag, with a small per-node offset
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| (spec.lag(i) as f64, 0.3 * (i / spec.lags.len()) as f64 + 0.05 * i as f64))
        .collect();
    let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.4)).collect();
    let graph = Graph::from_coords(node_ids(n), coords)?;
    let noise = normal(spec.sigma);
    let len = spec.blocks * spec.block_len;
    let mut values = Vec::with_capacity(len);
    for _ in 0..spec.blocks {
        let shared = rng.random_range(-1.0..=1.0) * spec.shared_amp;
        let private: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0) * spec.private_amp).collect();
        for s in 0..spec.block_len {
            let row = (0..n)
                .map(|i| {
                    let f = ramp_fraction(s, spec.t_c + spec.lag(i), spec.ramp);
                    let level = spec.base + f * (shared * scale[i] + private[i]);
                    level + if spec.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 }
                })
                .collect();
            values.push(row);
        }
    }
    SpatioTemporalDataset::new(graph, timestamps(len), values)
}

/// Daily-periodic sinusoid plus Gaussian noise; with `sigma = 0` every day repeats exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpec {
    pub n: usize,
    pub days: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        Self {
            n: 6,
            days: 10,
            sigma: 0.0,
            seed: 0,
        }
    }
}

pub fn periodic(spec: &PeriodicSpec) -> Result<SpatioTemporalDataset> {
    if spec.n == 0 || spec.days == 0 {
        return Err(StemoError::Config("periodic spec needs n > 0 and days > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let period = (86_400 / INTERVAL_SECS) as usize;
    let n = spec.n;
    let phase: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let amp: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..15.0)).collect();
    let coords = (0..n).map(|i| (i as f64, 0.0)).collect();
    let graph = Graph::from_coords(node_ids(n), coords)?;
    let noise = normal(spec.sigma);
    let len = spec.days * period;
    let values = (0..len)
        .map(|k| {
            let angle = std::f64::consts::TAU * (k % period) as f64 / period as f64;
            (0..n)
                .map(|i| {
                    let clean = 50.0 + amp[i] * (angle + phase[i]).sin();
                    clean + if spec.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 }
                })
                .collect()
        })
        .collect();
    SpatioTemporalDataset::new(graph, timestamps(len), values)
}

/// A pulse injected at node 0 diffuses along a chain, reaching node `i`
/// after `i * delay` steps with geometric decay.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    pub n: usize,
    pub len: usize,
    pub delay: usize,
    pub decay: f64,
    pub pulse_prob: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self {
            n: 6,
            len: 2400,
            delay: 1,
            decay: 0.8,
            pulse_prob: 0.1,
            sigma: 0.1,
            seed: 0,
        }
    }
}

pub fn diffusion(spec: &DiffusionSpec) -> Result<SpatioTemporalDataset> {
    if spec.n == 0 || spec.len == 0 || !(0.0..=1.0).contains(&spec.pulse_prob) {
        return Err(StemoError::Config("diffusion spec needs n, len > 0 and pulse_prob in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let pulses: Vec<f64> = (0..spec.len)
        .map(|_| {
            if rng.random_bool(spec.pulse_prob) {
                rng.random_range(2.0..6.0)
            } else {
                0.0
            }
        })
        .collect();
    let coords = (0..n).map(|i| (i as f64, 0.0)).collect();
    let graph = Graph::from_coords(node_ids(n), coords)?;
    let noise = normal(spec.sigma);
    let values = (0..spec.len)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let lag = i * spec.delay;
                    let drive = if k >= lag { pulses[k - lag] } else { 0.0 };
                    20.0 + drive * spec.decay.powi(i as i32)
                        + if spec.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 }
                })
                .collect()
        })
        .collect();
    SpatioTemporalDataset::new(graph, timestamps(spec.len), values)
}
