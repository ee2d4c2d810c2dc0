//! Recovering a hidden preference from scalar rewards by cross-entropy search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::episode::{run_episode, EpisodeMode};
use super::{Preference, StemoModel};
use crate::error::{Result, StemoError};
use crate::harness::Window;

/// What a scalar-reward environment reveals about one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEpisode {
    /// Mean over nodes of the hidden scalarization of each node's reward.
    pub scalar_return: f64,
    /// Every node's state at `t = 0`.
    pub initial_states: Vec<Vec<f64>>,
}

/// An environment that rewards rollouts with scalars only.
pub trait ScalarRewardEnv {
    /// Rolls out the greedy policy conditioned on `omega`. Equal `scenario`
    /// values replay the same window and noise.
    fn rollout(&mut self, model: &StemoModel, omega: &Preference, scenario: u64) -> Result<ScalarEpisode>;
}

/// Scalarizes vector rewards with a preference the searcher never sees.
pub struct HiddenPreferenceEnv {
    windows: Vec<Window>,
    hidden: Preference,
    seed: u64,
}

impl HiddenPreferenceEnv {
    pub fn new(windows: Vec<Window>, hidden: Preference, seed: u64) -> Result<Self> {
        if windows.is_empty() {
            return Err(StemoError::Data("hidden-preference env needs windows".into()));
        }
        Ok(Self { windows, hidden, seed })
    }
}

impl ScalarRewardEnv for HiddenPreferenceEnv {
    fn rollout(&mut self, model: &StemoModel, omega: &Preference, scenario: u64) -> Result<ScalarEpisode> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ scenario.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let window = &self.windows[rng.random_range(0..self.windows.len())];
        let mut out = run_episode(model, window, omega, EpisodeMode::Eval, &mut rng)?;
        let scalar_return = out.trace.scalar_return(&self.hidden);
        let mut initial: Vec<(usize, Vec<f64>)> = out
            .trace
            .transitions
            .drain(..)
            .filter(|tr| tr.t == 0)
            .map(|tr| (tr.node, tr.state))
            .collect();
        initial.sort_by_key(|(node, _)| *node);
        Ok(ScalarEpisode {
            scalar_return,
            initial_states: initial.into_iter().map(|(_, s)| s).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryConfig {
    /// Total episodes; one per candidate.
    pub budget: usize,
    pub candidates_per_round: usize,
    pub elite_frac: f64,
    /// Weight of the new fit when refitting the Beta proposal.
    pub smoothing: f64,
    /// Weight of the consistency residual in the candidate score.
    pub consistency_weight: f64,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            candidates_per_round: 10,
            elite_frac: 0.2,
            smoothing: 0.7,
            consistency_weight: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryRound {
    pub alpha: f64,
    pub beta: f64,
    pub best: Preference,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    /// Mean of the final proposal.
    pub preference: Preference,
    pub rounds: Vec<DiscoveryRound>,
    pub episodes: usize,
}

/// Greedy scalarized value the Q-network predicts for the initial states.
fn predicted_return(model: &StemoModel, states: &[Vec<f64>], omega: &Preference) -> Result<f64> {
    if states.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
    let prefs = vec![*omega; refs.len()];
    let q = model.qnet.predict(&refs, &prefs)?;
    let total: f64 = q
        .iter()
        .map(|v| omega.scalarize(v[0]).max(omega.scalarize(v[1])))
        .sum();
    Ok(total / q.len() as f64)
}

fn fit_beta(samples: &[f64]) -> (f64, f64) {
    let m = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / samples.len() as f64;
    let m = m.clamp(1e-3, 1.0 - 1e-3);
    // floor the spread so a tight elite set cannot collapse the proposal
    let var = var.max(1e-3).min(m * (1.0 - m) * 0.99);
    let common = m * (1.0 - m) / var - 1.0;
    (m * common, (1.0 - m) * common)
}

/// Cross-entropy search over `ω_acc` with a Beta proposal.
///
/// Every round draws `candidates_per_round` preferences, rolls each out once
/// on a shared scenario, and scores it by the observed scalar return minus the
/// gap between that return and the Q-network's own prediction under the
/// candidate. The Beta is refit on the elite fraction.
pub fn discover_preference<E: ScalarRewardEnv>(
    model: &StemoModel,
    env: &mut E,
    config: &DiscoveryConfig,
) -> Result<DiscoveryResult> {
    if config.budget < 10 {
        return Err(StemoError::Config(format!(
            "discovery budget {} is below the minimum of 10 episodes",
            config.budget
        )));
    }
    if config.candidates_per_round < 2 || !(config.elite_frac > 0.0 && config.elite_frac <= 1.0) {
        return Err(StemoError::Config("need at least 2 candidates per round and elite fraction in (0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut alpha, mut beta) = (1.0, 1.0);
    let per_round = config.candidates_per_round.min(config.budget);
    let n_elite = ((per_round as f64 * config.elite_frac).ceil() as usize).clamp(1, per_round);
    let mut rounds = Vec::new();
    let mut episodes = 0;
    while episodes + per_round <= config.budget {
        let dist = Beta::new(alpha, beta).map_err(|e| StemoError::Numeric(format!("Beta({alpha}, {beta}): {e}")))?;
        let scenario: u64 = rng.random();
        let mut scored = Vec::with_capacity(per_round);
        for _ in 0..per_round {
            let a: f64 = dist.sample(&mut rng);
            let omega = Preference::new(a, 1.0 - a)?;
            let ep = env.rollout(model, &omega, scenario)?;
            let predicted = predicted_return(model, &ep.initial_states, &omega)?;
            let score = ep.scalar_return - config.consistency_weight * (ep.scalar_return - predicted).abs();
            if !score.is_finite() {
                return Err(StemoError::Numeric("non-finite discovery score".into()));
            }
            scored.push((a, score));
        }
        episodes += per_round;
        scored.sort_by(|x, y| y.1.total_cmp(&x.1));
        let elites: Vec<f64> = scored[..n_elite].iter().map(|(a, _)| *a).collect();
        let (fa, fb) = fit_beta(&elites);
        alpha = config.smoothing * fa + (1.0 - config.smoothing) * alpha;
        beta = config.smoothing * fb + (1.0 - config.smoothing) * beta;
        let best = scored[0];
        rounds.push(DiscoveryRound {
            alpha,
            beta,
            best: Preference::new(best.0, 1.0 - best.0)?,
            best_score: best.1,
        });
    }
    let mean = alpha / (alpha + beta);
    Ok(DiscoveryResult {
        preference: Preference::new(mean, 1.0 - mean)?,
        rounds,
        episodes,
    })
}
