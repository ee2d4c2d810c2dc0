use rand::Rng;

use super::policy::{choose_actions, compute_rewards};
use super::{Action, ActionValues, Preference, StemoModel, Transition};
use crate::dtwsim::{build_similarity_slice, DtwTables, SimilarityTensor};
use crate::error::{Result, StemoError};
use crate::evalmetrics::used_time_pct;
use crate::harness::Window;
use crate::nodeembed::{sample_walks, train_embeddings, EmbeddingTable};
use crate::numdiff::{Tape, Var};
use crate::predictor::{commit_on_tape, CandidateForecast, EncoderState};

/// How actions are chosen during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeMode {
    /// ε-greedy on the Q-network.
    Train { epsilon: f64 },
    /// Greedy on the Q-network.
    Eval,
    /// Halt with probability `1/(T-t)`, so halt times are uniform over the window.
    Warmup,
    /// Every node halts at the given step; the Q-network is never consulted.
    Fixed(usize),
}

/// Per-episode record; forecasts and rewards are in raw data units.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub horizon: usize,
    pub halt_times: Vec<usize>,
    pub forecast: Vec<f64>,
    pub truth: Vec<f64>,
    pub rewards: Vec<[f64; 2]>,
    pub transitions: Vec<Transition>,
}

impl EpisodeTrace {
    pub fn mae(&self) -> f64 {
        self.rewards.iter().map(|r| -r[0]).sum::<f64>() / self.rewards.len() as f64
    }

    pub fn used_time_pct(&self) -> f64 {
        used_time_pct(&self.halt_times, self.horizon)
    }

    /// Mean over nodes of `ωᵀ r`.
    pub fn scalar_return(&self, omega: &Preference) -> f64 {
        self.rewards.iter().map(|r| omega.scalarize(*r)).sum::<f64>() / self.rewards.len() as f64
    }

    pub fn mean_reward(&self) -> [f64; 2] {
        let n = self.rewards.len() as f64;
        let s = self.rewards.iter().fold([0.0; 2], |a, r| [a[0] + r[0], a[1] + r[1]]);
        [s[0] / n, s[1] / n]
    }
}

/// A finished rollout plus the tape holding the committed forecast, so the
/// caller can take a predictor step.
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    pub tape: Tape,
    /// Committed forecast in normalized units, `n×1`.
    pub committed: Var,
    /// Every decoded candidate, `n×1` each, in step order.
    pub candidates: Vec<Var>,
    /// Normalized target frame.
    pub target: Vec<f64>,
    pub embeddings: EmbeddingTable,
}

fn halt_probability(t: usize, horizon: usize) -> f64 {
    1.0 / (horizon - t) as f64
}

/// One pass over a window: encode, build states, act, commit at the halt
/// times, and pay terminal rewards on each node's halt transition.
pub fn run_episode<R: Rng>(
    model: &StemoModel,
    window: &Window,
    omega: &Preference,
    mode: EpisodeMode,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    rollout(model, window, omega, mode, false, rng)
}

/// As [`run_episode`], but decodes a candidate at every step so that all of
/// them are available in [`EpisodeOutcome::candidates`].
pub fn run_episode_dense<R: Rng>(
    model: &StemoModel,
    window: &Window,
    omega: &Preference,
    mode: EpisodeMode,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    rollout(model, window, omega, mode, true, rng)
}

fn rollout<R: Rng>(
    model: &StemoModel,
    window: &Window,
    omega: &Preference,
    mode: EpisodeMode,
    decode_all: bool,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    let cfg = &model.config;
    let horizon = cfg.horizon;
    let n = model.n();
    if window.inputs.len() != horizon || window.raw.len() != horizon {
        return Err(StemoError::Input(format!(
            "window holds {} steps, episodes need T={horizon}",
            window.inputs.len()
        )));
    }
    if let EpisodeMode::Fixed(tau) = mode {
        crate::evalmetrics::validate_fixed_time(tau, horizon)?;
    }
    let needs_states = !matches!(mode, EpisodeMode::Fixed(_));
    let hidden = cfg.hidden;

    let mut tape = Tape::new();
    let mut dtw = DtwTables::with_window(n, horizon, cfg.dtw_window);
    let mut enc = EncoderState::initial(&mut tape, n, hidden);
    let mut emb = model.embeddings.clone();
    let zero_emb = vec![0.0; cfg.walk.dim];
    let mut halts: Vec<Option<usize>> = vec![None; n];
    let mut pending: Vec<Option<(Vec<f64>, Action, usize)>> = vec![None; n];
    let mut transitions = Vec::new();
    let mut halt_index: Vec<Option<usize>> = vec![None; n];
    let mut candidates: Vec<CandidateForecast> = Vec::new();

    for t in 0..horizon {
        dtw.extend(&window.inputs[t])?;
        let sim = if model.ablation.no_similarity {
            SimilarityTensor::zeros(n, t, cfg.kappa)
        } else {
            build_similarity_slice(&dtw, t, cfg.kappa)?
        };
        enc = model
            .predictor
            .encode_step(&mut tape, &window.inputs[..=t], &enc, &sim, &model.adj)?;

        let mut states: Vec<Option<Vec<f64>>> = vec![None; n];
        if needs_states {
            if !model.ablation.no_embedding {
                let halted: Vec<bool> = halts.iter().map(Option::is_some).collect();
                let walks = sample_walks(&sim, &halted, &cfg.walk, rng.random());
                emb = train_embeddings(&walks, &emb, &cfg.walk, t, rng);
            }
            let h = tape.value(enc.h);
            for i in (0..n).filter(|&i| halts[i].is_none()) {
                let mut s = Vec::with_capacity(cfg.state_dim());
                s.extend_from_slice(&h[i * hidden..(i + 1) * hidden]);
                s.extend_from_slice(if model.ablation.no_embedding { &zero_emb } else { emb.vector(i) });
                if cfg.time_feature {
                    s.push(t as f64 / (horizon - 1) as f64);
                }
                if let Some((prev, action, pt)) = pending[i].take() {
                    transitions.push(Transition {
                        node: i,
                        t: pt,
                        state: prev,
                        action,
                        reward: [0.0; 2],
                        next_state: Some(s.clone()),
                        terminal: false,
                    });
                }
                states[i] = Some(s);
            }
        }

        let actions: Vec<Option<Action>> = match mode {
            EpisodeMode::Train { .. } | EpisodeMode::Eval => {
                let epsilon = match mode {
                    EpisodeMode::Train { epsilon } => epsilon,
                    _ => 0.0,
                };
                let active: Vec<&[f64]> = states.iter().flatten().map(Vec::as_slice).collect();
                let prefs = vec![*omega; active.len()];
                let mut q = model.qnet.predict(&active, &prefs)?.into_iter();
                let values: Vec<Option<ActionValues>> =
                    states.iter().map(|s| s.as_ref().and_then(|_| q.next())).collect();
                choose_actions(&values, omega, epsilon, rng)
            }
            EpisodeMode::Warmup => {
                let p = halt_probability(t, horizon);
                halts
                    .iter()
                    .map(|h| {
                        h.is_none()
                            .then(|| if rng.random_bool(p) { Action::Halt } else { Action::Wait })
                    })
                    .collect()
            }
            EpisodeMode::Fixed(tau) => halts
                .iter()
                .map(|h| h.is_none().then_some(if t == tau { Action::Halt } else { Action::Wait }))
                .collect(),
        };

        let last = t + 1 == horizon;
        let mut any_halt = false;
        for i in 0..n {
            let Some(action) = actions[i] else { continue };
            let stops = action == Action::Halt || last;
            if stops {
                halts[i] = Some(t);
                any_halt = true;
            }
            if let Some(s) = states[i].take() {
                if stops {
                    halt_index[i] = Some(transitions.len());
                    transitions.push(Transition {
                        node: i,
                        t,
                        state: s,
                        action,
                        reward: [0.0; 2],
                        next_state: None,
                        terminal: true,
                    });
                } else {
                    pending[i] = Some((s, action, t));
                }
            }
        }
        if any_halt || decode_all {
            candidates.push(model.predictor.decode(&mut tape, &enc, &model.adj)?);
        }
    }

    let halt_times: Vec<usize> = halts
        .iter()
        .enumerate()
        .map(|(i, h)| h.ok_or_else(|| StemoError::Numeric(format!("node {i} has no halt time"))))
        .collect::<Result<_>>()?;
    let committed = commit_on_tape(&mut tape, &candidates, &halt_times)?;
    let forecast = model.scaler.inverse(tape.value(committed));
    if forecast.iter().any(|v| !v.is_finite()) {
        return Err(StemoError::Numeric("non-finite committed forecast".into()));
    }
    let truth = window.raw[horizon - 1].clone();
    let rewards = compute_rewards(&halt_times, &forecast, &truth, cfg.rho)?;
    for (i, idx) in halt_index.iter().enumerate() {
        if let Some(k) = idx {
            transitions[*k].reward = rewards[i];
        }
    }
    Ok(EpisodeOutcome {
        trace: EpisodeTrace {
            horizon,
            halt_times,
            forecast,
            truth,
            rewards,
            transitions,
        },
        tape,
        committed,
        candidates: candidates.iter().map(|c| c.xhat).collect(),
        target: window.inputs[horizon - 1].clone(),
        embeddings: emb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcore::build_spatial_adjacency;
    use crate::harness::split_windows;
    use crate::harness::synthetic::{changepoint, ChangepointSpec};
    use crate::morl::{Ablation, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (StemoModel, Window) {
        let ds = changepoint(&ChangepointSpec {
            n: 4,
            blocks: 3,
            ..ChangepointSpec::default()
        })
        .unwrap();
        let sw = split_windows(&ds, 12, 12).unwrap();
        let adj = build_spatial_adjacency(&ds.graph, ds.graph.default_eta()).unwrap();
        let cfg = ModelConfig {
            hidden: 4,
            q_hidden: 8,
            kappa: 5.0,
            time_feature: true,
            ..ModelConfig::default()
        };
        let model = StemoModel::new(cfg, adj, sw.scaler.clone(), Ablation::default(), 0).unwrap();
        (model, sw.train[0].clone())
    }

    #[test]
    fn fixed_halts_set_used_time() {
        let (model, w) = setup();
        let omega = Preference::new(0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = run_episode(&model, &w, &omega, EpisodeMode::Fixed(0), &mut rng).unwrap();
        assert_eq!(first.trace.used_time_pct(), 0.0);
        assert!(first.trace.transitions.is_empty());
        let last = run_episode(&model, &w, &omega, EpisodeMode::Fixed(11), &mut rng).unwrap();
        assert!((last.trace.used_time_pct() - 100.0 * 11.0 / 12.0).abs() < 1e-12);
        for r in &last.trace.rewards {
            assert!((r[1] + 0.5 * 11.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_node_halts_exactly_once() {
        let (model, w) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..20 {
            let omega = Preference::sample(&mut rng);
            let mode = if k % 2 == 0 { EpisodeMode::Warmup } else { EpisodeMode::Train { epsilon: 0.5 } };
            let out = run_episode(&model, &w, &omega, mode, &mut rng).unwrap();
            let tr = &out.trace;
            for i in 0..model.n() {
                let halts: Vec<&Transition> = tr.transitions.iter().filter(|x| x.node == i && x.terminal).collect();
                assert_eq!(halts.len(), 1);
                assert!(halts[0].next_state.is_none());
                assert_eq!(halts[0].t, tr.halt_times[i]);
                // the last step ends the episode whatever the action
                assert!(halts[0].action == Action::Halt || halts[0].t == 11);
                let steps = tr.transitions.iter().filter(|x| x.node == i).count();
                assert_eq!(steps, tr.halt_times[i] + 1);
            }
        }
    }

    #[test]
    fn dense_rollout_decodes_every_step() {
        let (model, w) = setup();
        let omega = Preference::new(0.9, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dense = run_episode_dense(&model, &w, &omega, EpisodeMode::Fixed(4), &mut rng).unwrap();
        assert_eq!(dense.candidates.len(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sparse = run_episode(&model, &w, &omega, EpisodeMode::Fixed(4), &mut rng).unwrap();
        assert_eq!(sparse.candidates.len(), 1);
        assert_eq!(dense.trace.forecast, sparse.trace.forecast);
    }
}
