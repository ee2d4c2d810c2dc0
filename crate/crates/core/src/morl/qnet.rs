use rand::Rng;

use super::Preference;
use crate::error::{Result, StemoError};
use crate::numdiff::{Mlp, ParamStore, Tape, Var};

/// Vector values per action: `values[action][objective]`.
pub type ActionValues = [[f64; 2]; 2];

/// Shared MLP mapping `(state ∥ ω)` to a 2-vector value for each of the two actions.
#[derive(Debug, Clone)]
pub struct QNetwork {
    pub store: ParamStore,
    pub mlp: Mlp,
    pub state_dim: usize,
}

impl QNetwork {
    pub fn new<R: Rng>(state_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "q", &[state_dim + 2, hidden, hidden, 4], rng);
        Self { store, mlp, state_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + 2
    }

    /// Tape forward over rows of `state ∥ ω`; output is `rows×4` laid out
    /// as `[wait_acc, wait_time, halt_acc, halt_time]`.
    pub fn forward(&self, tape: &mut Tape, inputs: Var) -> Result<Var> {
        self.forward_with(tape, &self.store, inputs)
    }

    /// Forward with another store of identical layout (the target snapshot).
    pub fn forward_with(&self, tape: &mut Tape, store: &ParamStore, inputs: Var) -> Result<Var> {
        let (_, c) = tape.shape(inputs);
        if c != self.input_dim() {
            return Err(StemoError::shape(
                "q_network",
                format!("input width {c}, expected {}", self.input_dim()),
            ));
        }
        self.mlp.forward(tape, store, inputs)
    }

    pub fn build_input(states: &[&[f64]], prefs: &[Preference]) -> (usize, Vec<f64>) {
        let rows = states.len();
        let mut v = Vec::new();
        for (s, p) in states.iter().zip(prefs) {
            v.extend_from_slice(s);
            v.extend_from_slice(&p.as_array());
        }
        (rows, v)
    }

    /// Evaluates `Q(s, ·, ω)` for a batch without keeping gradients.
    pub fn predict(&self, states: &[&[f64]], prefs: &[Preference]) -> Result<Vec<ActionValues>> {
        self.predict_with(&self.store, states, prefs)
    }

    pub fn predict_with(&self, store: &ParamStore, states: &[&[f64]], prefs: &[Preference]) -> Result<Vec<ActionValues>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        if states.iter().any(|s| s.len() != self.state_dim) {
            return Err(StemoError::shape("q_network", format!("state width != {}", self.state_dim)));
        }
        let (rows, v) = Self::build_input(states, prefs);
        let mut tape = Tape::new();
        let x = tape.input_raw(rows, self.input_dim(), v);
        let out = self.forward_with(&mut tape, store, x)?;
        Ok(tape
            .value(out)
            .chunks(4)
            .map(|c| [[c[0], c[1]], [c[2], c[3]]])
            .collect())
    }
}
