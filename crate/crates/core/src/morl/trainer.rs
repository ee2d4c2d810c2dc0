use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::envelope::{envelope_targets_batch, loss_and_update};
use super::episode::{run_episode, run_episode_dense, EpisodeMode, EpisodeOutcome, EpisodeTrace};
use super::{Preference, ReplayBuffer, Schedules, StemoModel};
use crate::error::{Result, StemoError};
use crate::evalmetrics::{mae, mape, rmse, used_time_pct};
use crate::harness::Window;
use crate::numdiff::{AdamState, ParamStore, Var};
use crate::predictor::{mae_on_tape, predictor_step_on_loss, train_predictor_step};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_episodes: usize,
    /// Leading episodes that use uniform halt times instead of the Q-policy.
    pub warmup_episodes: usize,
    pub batch_size: usize,
    pub n_omega: usize,
    pub replay_capacity: usize,
    pub predictor_lr: f64,
    pub q_lr: f64,
    /// Environment steps (one per time step of an episode) per Q-update.
    pub update_every: usize,
    pub target_sync: u64,
    /// Fraction of updates over which `λ` ramps from 0 to 1; above 1 the
    /// ramp ends short of 1.
    pub lambda_ramp_frac: f64,
    /// Pick the envelope maximizer with the online network, read it from the target snapshot.
    pub double_selection: bool,
    /// Train the predictor on every step's candidate, not only the committed forecast.
    pub dense_supervision: bool,
    /// Validation cadence in episodes; 0 disables validation.
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_episodes: 2000,
            warmup_episodes: 0,
            batch_size: 32,
            n_omega: 16,
            replay_capacity: 50_000,
            predictor_lr: 0.001,
            q_lr: 0.001,
            update_every: 4,
            target_sync: 200,
            lambda_ramp_frac: 0.6,
            double_selection: true,
            dense_supervision: false,
            eval_every: 0,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_omega == 0 || self.update_every == 0 || self.replay_capacity == 0 {
            return Err(StemoError::Config(
                "batch_size, n_omega, update_every and replay capacity must be positive".into(),
            ));
        }
        if !(self.predictor_lr > 0.0 && self.q_lr > 0.0) {
            return Err(StemoError::Config("learning rates must be positive".into()));
        }
        if !(self.lambda_ramp_frac >= 0.0 && self.lambda_ramp_frac.is_finite()) {
            return Err(StemoError::Config(format!("lambda ramp fraction {} must be finite and nonnegative", self.lambda_ramp_frac)));
        }
        if self.target_sync == 0 {
            return Err(StemoError::Config("target sync interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub episode: usize,
    pub omega: Preference,
    pub mae: f64,
    pub used_time_pct: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    /// `(episode, preference-averaged scalar return)` on the validation split.
    pub validation: Vec<(usize, f64)>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("episode,omega_acc,omega_time,mae,used_time_pct,eps,lambda,loss\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.4},{:.4},{:.6},{:.4},{:.6},{:.6},{:.6}",
                r.episode,
                r.omega.accuracy(),
                r.omega.time(),
                r.mae,
                r.used_time_pct,
                r.epsilon,
                r.lambda,
                r.loss
            );
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| StemoError::io(path, e))
    }
}

/// Owns the model, replay buffer, target snapshot, optimizers and schedules.
pub struct Trainer {
    pub model: StemoModel,
    pub config: TrainConfig,
    pub replay: ReplayBuffer,
    pub schedules: Schedules,
    target: ParamStore,
    predictor_adam: AdamState,
    q_adam: AdamState,
    rng: ChaCha8Rng,
    env_steps: u64,
    updates: u64,
}

/// Preferences used for validation returns.
fn validation_prefs() -> Vec<Preference> {
    [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&a| Preference::new(a, 1.0 - a).expect("simplex"))
        .collect()
}

impl Trainer {
    pub fn new(model: StemoModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let horizon = model.config.horizon as u64;
        let episodes = config.max_episodes as u64;
        let per_episode = horizon.div_ceil(config.update_every as u64);
        let mut schedules = Schedules::new(episodes * horizon, episodes * per_episode);
        schedules.target_sync = config.target_sync;
        schedules.lambda_ramp_frac = config.lambda_ramp_frac;
        Ok(Self {
            target: model.qnet.store.clone(),
            predictor_adam: AdamState::new(&model.predictor.store, config.predictor_lr),
            q_adam: AdamState::new(&model.qnet.store, config.q_lr),
            replay: ReplayBuffer::new(config.replay_capacity),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            config,
            schedules,
            env_steps: 0,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// One episode on `window`: rollout, predictor step, replay push, Q-updates.
    pub fn train_episode(&mut self, episode: usize, window: &Window) -> Result<TrainLogRow> {
        let omega = Preference::sample(&mut self.rng);
        let epsilon = self.schedules.epsilon(self.env_steps);
        let mode = match self.model.ablation.fixed_policy {
            Some(tau) => EpisodeMode::Fixed(tau),
            None if episode < self.config.warmup_episodes => EpisodeMode::Warmup,
            None => EpisodeMode::Train { epsilon },
        };
        if self.config.dense_supervision {
            let mut out = run_episode_dense(&self.model, window, &omega, mode, &mut self.rng)?;
            let mut total: Option<Var> = None;
            for &c in &out.candidates {
                let l = mae_on_tape(&mut out.tape, c, &out.target)?;
                total = Some(match total {
                    Some(acc) => out.tape.add(acc, l)?,
                    None => l,
                });
            }
            let k = out.candidates.len() as f64;
            let loss = out.tape.scale(total.expect("at least one candidate"), 1.0 / k);
            predictor_step_on_loss(&mut self.model.predictor, &mut self.predictor_adam, &mut out.tape, loss)
                .map_err(|e| e.in_stage("predictor update"))?;
            return self.finish_episode(episode, omega, epsilon, mode, out);
        }
        let mut out = run_episode(&self.model, window, &omega, mode, &mut self.rng)?;
        train_predictor_step(
            &mut self.model.predictor,
            &mut self.predictor_adam,
            &mut out.tape,
            out.committed,
            &out.target,
        )
        .map_err(|e| e.in_stage("predictor update"))?;
        self.finish_episode(episode, omega, epsilon, mode, out)
    }

    fn finish_episode(
        &mut self,
        episode: usize,
        omega: Preference,
        epsilon: f64,
        mode: EpisodeMode,
        mut out: EpisodeOutcome,
    ) -> Result<TrainLogRow> {

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        if !matches!(mode, EpisodeMode::Fixed(_)) {
            self.model.embeddings = out.embeddings;
            let horizon = self.model.config.horizon as u64;
            let before = self.env_steps / self.config.update_every as u64;
            self.env_steps += horizon;
            let after = self.env_steps / self.config.update_every as u64;
            for tr in out.trace.transitions.drain(..) {
                self.replay.push(tr);
            }
            for _ in before..after {
                if self.replay.len() < self.config.batch_size {
                    break;
                }
                loss_sum += self.q_update().map_err(|e| e.in_stage("q update"))?;
                loss_count += 1;
            }
        }
        Ok(TrainLogRow {
            episode,
            omega,
            mae: out.trace.mae(),
            used_time_pct: out.trace.used_time_pct(),
            epsilon,
            lambda: self.schedules.lambda(self.updates),
            loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
        })
    }

    fn q_update(&mut self) -> Result<f64> {
        let idx = self.replay.sample_indices(self.config.batch_size, &mut self.rng);
        let batch: Vec<_> = idx.iter().filter_map(|&i| self.replay.get(i)).collect();
        let prefs: Vec<Preference> = (0..self.config.n_omega)
            .map(|_| Preference::sample(&mut self.rng))
            .collect();
        let targets = envelope_targets_batch(&self.model.qnet, &self.target, &batch, &prefs, self.model.config.gamma, self.config.double_selection)?;
        let lambda = self.schedules.lambda(self.updates);
        let loss = loss_and_update(&mut self.model.qnet, &mut self.q_adam, &batch, &prefs, &targets, lambda)?;
        self.updates += 1;
        if self.schedules.should_sync(self.updates) {
            self.target.copy_values_from(&self.model.qnet.store);
        }
        Ok(loss.total)
    }

    /// Full loop: `max_episodes` episodes on uniformly drawn training windows,
    /// with optional validation-based early stopping.
    pub fn train(&mut self, train: &[Window], val: &[Window]) -> Result<TrainLog> {
        if train.is_empty() {
            return Err(StemoError::Data("no training windows".into()));
        }
        let mut log = TrainLog::default();
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0usize;
        for episode in 0..self.config.max_episodes {
            let w = &train[self.rng.random_range(0..train.len())];
            log.rows.push(self.train_episode(episode, w)?);
            let due = self.config.eval_every > 0 && (episode + 1) % self.config.eval_every == 0;
            if due && !val.is_empty() {
                let score = self.validation_return(val)?;
                log.validation.push((episode, score));
                if score > best {
                    best = score;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= self.config.patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
        }
        Ok(log)
    }

    /// Mean scalarized return over a fixed preference set, greedy policy.
    pub fn validation_return(&self, val: &[Window]) -> Result<f64> {
        let prefs = validation_prefs();
        let mut total = 0.0;
        for p in &prefs {
            let r = evaluate(&self.model, val, p, self.config.seed ^ 0x5eed)?;
            total += r.scalar_return;
        }
        Ok(total / prefs.len() as f64)
    }

    pub fn into_model(self) -> StemoModel {
        self.model
    }
}

/// Aggregate test metrics for one preference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub omega: Preference,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub used_time_pct: f64,
    pub scalar_return: f64,
    pub traces: Vec<EpisodeTrace>,
}

/// Per-window RNG, so every preference sees the same embedding noise on a window.
pub fn window_rng(seed: u64, window: &Window) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (window.start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Greedy rollouts on every window (or the model's fixed policy when ablated).
pub fn evaluate(model: &StemoModel, windows: &[Window], omega: &Preference, seed: u64) -> Result<EvalResult> {
    let mode = match model.ablation.fixed_policy {
        Some(tau) => EpisodeMode::Fixed(tau),
        None => EpisodeMode::Eval,
    };
    evaluate_mode(model, windows, omega, mode, seed)
}

pub fn evaluate_mode(
    model: &StemoModel,
    windows: &[Window],
    omega: &Preference,
    mode: EpisodeMode,
    seed: u64,
) -> Result<EvalResult> {
    if windows.is_empty() {
        return Err(StemoError::Data("no evaluation windows".into()));
    }
    let mut traces = Vec::with_capacity(windows.len());
    for w in windows {
        let mut rng = window_rng(seed, w);
        let mut out = run_episode(model, w, omega, mode, &mut rng)?;
        out.trace.transitions.clear();
        traces.push(out.trace);
    }
    let pred: Vec<f64> = traces.iter().flat_map(|t| t.forecast.iter().copied()).collect();
    let truth: Vec<f64> = traces.iter().flat_map(|t| t.truth.iter().copied()).collect();
    let halts: Vec<usize> = traces.iter().flat_map(|t| t.halt_times.iter().copied()).collect();
    Ok(EvalResult {
        omega: *omega,
        mae: mae(&pred, &truth)?,
        rmse: rmse(&pred, &truth)?,
        mape: mape(&pred, &truth)?.percent,
        used_time_pct: used_time_pct(&halts, model.config.horizon),
        scalar_return: traces.iter().map(|t| t.scalar_return(omega)).sum::<f64>() / traces.len() as f64,
        traces,
    })
}
