//! Multi-graph convolution + GRU encoder-decoder producing one candidate
//! forecast of the horizon frame at every observation time.
//!
//! Encoder unit at time `t`:
//!
//! ```text
//! X'_t = σ( Σ_{t'<t} A^T[t,t'] X_{t'} W_{t'}  +  ½(Â^S + A^T[t,t]) X_t W_t )
//! H_t  = GRU_enc(X'_t, H_{t-1})
//! ```
//!
//! The decoder unrolls `T - t - 1` GRU steps from `H_t`. Its first input is a
//! learned go value; later inputs are the previous step's readout passed
//! through one `Â^S` graph convolution. The final hidden state is read out
//! affinely as the candidate for the horizon frame.

use rand::Rng;

use crate::dtwsim::SimilarityTensor;
use crate::error::{Result, StemoError};
use crate::graphcore::SpatialAdjacency;
use crate::numdiff::{AdamState, GruCell, Linear, ParamId, ParamStore, Tape, Tensor, Var};

/// Per-lag MGCN weights `W_{t'} ∈ R^{1×h}`, indexed by absolute time in the window.
#[derive(Debug, Clone)]
pub struct MgcnLayer {
    pub weights: Vec<ParamId>,
    pub hidden: usize,
}

impl MgcnLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, horizon: usize, hidden: usize, rng: &mut R) -> Self {
        let weights = (0..horizon)
            .map(|t| store.add_glorot(format!("encoder.mgcn.w{t}"), 1, hidden, rng))
            .collect();
        Self { weights, hidden }
    }

    pub fn horizon(&self) -> usize {
        self.weights.len()
    }
}

/// Encoder hidden state on a tape. `t == None` is the initial `H_{-1} = 0`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderState {
    pub h: Var,
    pub t: Option<usize>,
}

impl EncoderState {
    pub fn initial(tape: &mut Tape, n: usize, hidden: usize) -> Self {
        Self {
            h: tape.input(&Tensor::zeros(&[n, hidden])),
            t: None,
        }
    }
}

/// Candidate forecast issued at time `t`; `xhat` is an `n×1` tape node.
#[derive(Debug, Clone, Copy)]
pub struct CandidateForecast {
    pub t: usize,
    pub xhat: Var,
}

/// `X'_t` for one encoder unit.
pub fn mgcn_forward(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &MgcnLayer,
    history: &[Vec<f64>],
    sim: &SimilarityTensor,
    adj: &SpatialAdjacency,
) -> Result<Var> {
    let Some(t) = history.len().checked_sub(1) else {
        return Err(StemoError::Input("mgcn needs at least one observation".into()));
    };
    if t >= layer.horizon() {
        return Err(StemoError::Input(format!("t={t} beyond horizon {}", layer.horizon())));
    }
    if sim.t != t || sim.slices.len() != t + 1 {
        return Err(StemoError::Input(format!(
            "similarity stack built for t={} with {} slices, needed t={t}",
            sim.t,
            sim.slices.len()
        )));
    }
    let n = adj.n();
    let mut acc: Option<Var> = None;
    for (tp, x) in history.iter().enumerate() {
        if x.len() != n {
            return Err(StemoError::shape("mgcn", format!("X_{tp} has {} entries for {n} nodes", x.len())));
        }
        let a_t = sim.slice(tp)?;
        let mixed = |i: usize, j: usize| {
            if tp == t {
                0.5 * (adj.a_s_norm.at(i, j) + a_t.at(i, j))
            } else {
                a_t.at(i, j)
            }
        };
        let v: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| mixed(i, j) * x[j]).sum())
            .collect();
        if v.iter().all(|&e| e == 0.0) {
            continue;
        }
        let vin = tape.input_raw(n, 1, v);
        let w = tape.param(store, layer.weights[tp]);
        let term = tape.matmul(vin, w)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    let pre = match acc {
        Some(a) => a,
        None => tape.input(&Tensor::zeros(&[n, layer.hidden])),
    };
    Ok(tape.sigmoid(pre))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub horizon: usize,
    pub hidden: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            hidden: 12,
        }
    }
}

/// Encoder (`θ_e`) and decoder (`θ_d`) parameters in one store.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub config: PredictorConfig,
    pub store: ParamStore,
    pub mgcn: MgcnLayer,
    pub encoder: GruCell,
    pub decoder: GruCell,
    pub go: ParamId,
    pub readout: Linear,
}

impl Predictor {
    pub fn new<R: Rng>(config: PredictorConfig, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let h = config.hidden;
        let mgcn = MgcnLayer::new(&mut store, config.horizon, h, rng);
        let encoder = GruCell::new(&mut store, "encoder.gru", h, h, rng);
        let decoder = GruCell::new(&mut store, "decoder.gru", 1, h, rng);
        let go = store.add_zeros("decoder.go", 1, 1);
        let readout = Linear::new(&mut store, "decoder.readout", h, 1, rng);
        Self {
            config,
            store,
            mgcn,
            encoder,
            decoder,
            go,
            readout,
        }
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// One encoder unit: `H_t = GRU(X'_t, H_{t-1})`.
    pub fn encode_step(
        &self,
        tape: &mut Tape,
        history: &[Vec<f64>],
        prev: &EncoderState,
        sim: &SimilarityTensor,
        adj: &SpatialAdjacency,
    ) -> Result<EncoderState> {
        let t = history.len().checked_sub(1).ok_or_else(|| StemoError::Input("empty history".into()))?;
        let expected_prev = t.checked_sub(1);
        if prev.t != expected_prev {
            return Err(StemoError::Input(format!(
                "encoder step out of order: previous state at {:?}, stepping to t={t}",
                prev.t
            )));
        }
        let xp = mgcn_forward(tape, &self.store, &self.mgcn, history, sim, adj)?;
        let h = self.encoder.forward(tape, &self.store, xp, prev.h)?;
        Ok(EncoderState { h, t: Some(t) })
    }

    /// Candidate forecast of the horizon frame from `H_t`.
    pub fn decode(&self, tape: &mut Tape, state: &EncoderState, adj: &SpatialAdjacency) -> Result<CandidateForecast> {
        let t = state
            .t
            .ok_or_else(|| StemoError::Input("cannot decode the initial encoder state".into()))?;
        let horizon = self.horizon();
        if t >= horizon {
            return Err(StemoError::Input(format!("decode at t={t} beyond horizon {horizon}")));
        }
        let n = tape.shape(state.h).0;
        let units = horizon - t - 1;
        let mut h = state.h;
        if units > 0 {
            let go = tape.param(&self.store, self.go);
            let mut input = tape.repeat_rows(go, n)?;
            let a_norm = tape.input(&adj.a_s_norm);
            for unit in 0..units {
                h = self.decoder.forward(tape, &self.store, input, h)?;
                if unit + 1 < units {
                    let y = self.readout.forward(tape, &self.store, h)?;
                    input = tape.matmul(a_norm, y)?;
                }
            }
        }
        let xhat = self.readout.forward(tape, &self.store, h)?;
        Ok(CandidateForecast { t, xhat })
    }
}

/// Halt time per node from one-hot actions `actions[t][i]`.
pub fn halt_times_from_actions(actions: &[Vec<bool>]) -> Result<Vec<usize>> {
    let n = actions.first().map_or(0, Vec::len);
    let mut halts = vec![None; n];
    for (t, row) in actions.iter().enumerate() {
        if row.len() != n {
            return Err(StemoError::shape("commit", format!("action row {t} has {} nodes", row.len())));
        }
        for (i, &a) in row.iter().enumerate() {
            if a {
                if let Some(prev) = halts[i] {
                    return Err(StemoError::Input(format!("node {i} halts twice (t={prev} and t={t})")));
                }
                halts[i] = Some(t);
            }
        }
    }
    halts
        .into_iter()
        .enumerate()
        .map(|(i, h)| h.ok_or_else(|| StemoError::Input(format!("node {i} never halts"))))
        .collect()
}

/// `X̂_T = Σ_t a_t ⊙ X̂^(t)` on plain values; `candidates[t][i]`.
pub fn commit_forecast(candidates: &[Vec<f64>], actions: &[Vec<bool>]) -> Result<Vec<f64>> {
    let halts = halt_times_from_actions(actions)?;
    halts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            candidates
                .get(t)
                .and_then(|c| c.get(i))
                .copied()
                .ok_or_else(|| StemoError::Input(format!("no candidate for node {i} at t={t}")))
        })
        .collect()
}

/// Tape version of the masked sum; gradients reach only the selected candidates.
pub fn commit_on_tape(tape: &mut Tape, candidates: &[CandidateForecast], halt_times: &[usize]) -> Result<Var> {
    let n = halt_times.len();
    let mut acc: Option<Var> = None;
    for c in candidates {
        let mask: Vec<f64> = halt_times.iter().map(|&h| if h == c.t { 1.0 } else { 0.0 }).collect();
        if mask.iter().all(|&m| m == 0.0) {
            continue;
        }
        let m = tape.input_raw(n, 1, mask);
        let term = tape.mul(m, c.xhat)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    acc.ok_or_else(|| StemoError::Input("no candidate matches any halt time".into()))
}

/// MAE between the committed forecast and the truth, followed by one Adam step.
pub fn train_predictor_step(
    predictor: &mut Predictor,
    adam: &mut AdamState,
    tape: &mut Tape,
    committed: Var,
    truth: &[f64],
) -> Result<f64> {
    let loss = mae_on_tape(tape, committed, truth)?;
    predictor_step_on_loss(predictor, adam, tape, loss)
}

/// One Adam step on an arbitrary scalar loss already on `tape`.
pub fn predictor_step_on_loss(predictor: &mut Predictor, adam: &mut AdamState, tape: &mut Tape, loss: Var) -> Result<f64> {
    let value = tape.scalar(loss);
    predictor.store.zero_grads();
    tape.backward(loss, &mut predictor.store)?;
    adam.step(&mut predictor.store);
    if !predictor.store.all_finite() {
        return Err(StemoError::Numeric("non-finite predictor parameters after update".into()));
    }
    Ok(value)
}

pub fn mae_on_tape(tape: &mut Tape, pred: Var, truth: &[f64]) -> Result<Var> {
    let n = truth.len();
    let y = tape.input_raw(n, 1, truth.to_vec());
    let d = tape.sub(pred, y)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}

/// Per-node z-score normalization fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// `rows[t][i]`; a node with zero spread gets unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n == 0 {
            return Err(StemoError::Input("cannot fit a scaler on no rows".into()));
        }
        let m = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for r in rows {
            for (a, x) in mean.iter_mut().zip(r) {
                *a += x / m;
            }
        }
        let mut var = vec![0.0; n];
        for r in rows {
            for ((v, x), mu) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - mu).powi(2) / m;
            }
        }
        let std = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}
