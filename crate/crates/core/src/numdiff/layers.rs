//! Learnable layers built from tape primitives.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Result, StemoError};

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let weight = store.add_glorot(format!("{name}.weight"), in_dim, out_dim, rng);
        let bias = store.add_zeros(format!("{name}.bias"), 1, out_dim);
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

/// Gated recurrent unit applied row-wise with shared weights.
///
/// Gates are packed column-wise as `[update | reset | candidate]`:
///
/// ```text
/// z  = σ(x Wz + h Uz + bz)
/// r  = σ(x Wr + h Ur + br)
/// n  = tanh(x Wn + r ⊙ (h Un) + bn)
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        // each gate block gets its own Glorot scale
        let mut w_in = Vec::with_capacity(in_dim * 3 * hidden);
        let mut w_h = Vec::with_capacity(hidden * 3 * hidden);
        let s_in = (6.0 / (in_dim + hidden) as f64).sqrt();
        let s_h = (6.0 / (2 * hidden) as f64).sqrt();
        for _ in 0..in_dim * 3 * hidden {
            w_in.push(rng.random_range(-s_in..s_in));
        }
        for _ in 0..hidden * 3 * hidden {
            w_h.push(rng.random_range(-s_h..s_h));
        }
        let w_input = store.add(
            format!("{name}.w_input"),
            super::Tensor::matrix(in_dim, 3 * hidden, w_in).expect("gru shape"),
        );
        let w_hidden = store.add(
            format!("{name}.w_hidden"),
            super::Tensor::matrix(hidden, 3 * hidden, w_h).expect("gru shape"),
        );
        let bias = store.add_zeros(format!("{name}.bias"), 1, 3 * hidden);
        Self {
            w_input,
            w_hidden,
            bias,
            in_dim,
            hidden,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, h_prev: Var) -> Result<Var> {
        let (xr, xc) = tape.shape(x);
        let (hr, hc) = tape.shape(h_prev);
        if xc != self.in_dim || hc != self.hidden || xr != hr {
            return Err(StemoError::shape(
                "gru_cell",
                format!(
                    "input {}x{} and hidden {}x{} for cell ({} -> {})",
                    xr, xc, hr, hc, self.in_dim, self.hidden
                ),
            ));
        }
        let h = self.hidden;
        let wi = tape.param(store, self.w_input);
        let wh = tape.param(store, self.w_hidden);
        let b = tape.param(store, self.bias);

        let xi = tape.matmul(x, wi)?;
        let xi = tape.add_row(xi, b)?;
        let hh = tape.matmul(h_prev, wh)?;

        let xz = tape.slice_cols(xi, 0, h)?;
        let hz = tape.slice_cols(hh, 0, h)?;
        let z = tape.add(xz, hz)?;
        let z = tape.sigmoid(z);

        let xr_ = tape.slice_cols(xi, h, h)?;
        let hr_ = tape.slice_cols(hh, h, h)?;
        let r = tape.add(xr_, hr_)?;
        let r = tape.sigmoid(r);

        let xn = tape.slice_cols(xi, 2 * h, h)?;
        let hn = tape.slice_cols(hh, 2 * h, h)?;
        let rhn = tape.mul(r, hn)?;
        let n = tape.add(xn, rhn)?;
        let n = tape.tanh(n);

        let keep = tape.mul(z, h_prev)?;
        let one_minus_z = tape.one_minus(z);
        let fresh = tape.mul(one_minus_z, n)?;
        tape.add(fresh, keep)
    }
}

/// Multilayer perceptron with tanh hidden activations and a linear head.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.l{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i < last {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }
}
