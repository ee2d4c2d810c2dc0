//! Preference-conditioned multi-objective Q-learning over per-node
//! wait/halt decisions.

mod discover;
mod envelope;
mod episode;
mod model;
mod policy;
mod qnet;
mod replay;
mod schedule;
mod trainer;

pub use discover::{
    discover_preference, DiscoveryConfig, DiscoveryResult, DiscoveryRound, HiddenPreferenceEnv, ScalarEpisode, ScalarRewardEnv,
};
pub use envelope::{envelope_argmax, envelope_target, envelope_target_selected, envelope_targets_batch, loss_and_update, LossBreakdown};
pub use episode::{run_episode, run_episode_dense, EpisodeMode, EpisodeOutcome, EpisodeTrace};
pub use model::{Ablation, ModelConfig, StemoModel};
pub use policy::{compute_rewards, greedy_action, select_actions};
pub use qnet::{ActionValues, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::Schedules;
pub use trainer::{evaluate, evaluate_mode, window_rng, EvalResult, TrainConfig, TrainLog, TrainLogRow, Trainer};

use rand::Rng;

use crate::error::{Result, StemoError};

/// Weights on (accuracy, timeliness); a point on the 2-simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preference([f64; 2]);

impl Preference {
    pub fn new(accuracy: f64, time: f64) -> Result<Self> {
        if !(accuracy >= 0.0 && time >= 0.0) || ((accuracy + time) - 1.0).abs() > 1e-9 {
            return Err(StemoError::Input(format!(
                "preference ({accuracy}, {time}) is not on the simplex"
            )));
        }
        Ok(Self([accuracy, time]))
    }

    /// Projects nonnegative weights onto the simplex by normalizing.
    pub fn normalized(accuracy: f64, time: f64) -> Result<Self> {
        let s = accuracy + time;
        if !(accuracy >= 0.0 && time >= 0.0 && s > 0.0) {
            return Err(StemoError::Input(format!("cannot normalize ({accuracy}, {time})")));
        }
        Self::new(accuracy / s, 1.0 - accuracy / s)
    }

    /// Uniform draw on the 2-simplex.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let a: f64 = rng.random();
        Self([a, 1.0 - a])
    }

    pub fn accuracy(&self) -> f64 {
        self.0[0]
    }

    pub fn time(&self) -> f64 {
        self.0[1]
    }

    pub fn as_array(&self) -> [f64; 2] {
        self.0
    }

    pub fn scalarize(&self, v: [f64; 2]) -> f64 {
        self.0[0] * v[0] + self.0[1] * v[1]
    }

    /// The sweep `(k/10, 1 - k/10)` for `k = 0..=10`.
    pub fn sweep() -> Vec<Preference> {
        (0..=10)
            .map(|k| {
                let a = k as f64 / 10.0;
                Self([a, 1.0 - a])
            })
            .collect()
    }

    pub fn l1_distance(&self, other: &Preference) -> f64 {
        (self.0[0] - other.0[0]).abs() + (self.0[1] - other.0[1]).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Wait = 0,
    Halt = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Wait
        } else {
            Action::Halt
        }
    }
}
