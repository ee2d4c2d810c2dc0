//! Independent oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use rand::Rng;
use stemo::morl::{ActionValues, Preference};
use stemo::numdiff::{ParamStore, Tape, Var};
use stemo::Result;

/// DTW by plain recursion over `(i, j)` with no memoization.
pub fn dtw_recursive(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let cost = (a[i] - b[j]).abs();
        match (i, j) {
            (0, 0) => cost,
            (0, _) => cost + go(a, b, 0, j - 1),
            (_, 0) => cost + go(a, b, i - 1, 0),
            _ => cost + go(a, b, i - 1, j).min(go(a, b, i, j - 1)).min(go(a, b, i - 1, j - 1)),
        }
    }
    go(a, b, a.len() - 1, b.len() - 1)
}

/// Fraction of a `k×k` cell-centre grid in the reference box dominated by some point, times the box area.
pub fn hv_grid(points: &[[f64; 2]], reference: [f64; 2], lo: [f64; 2], k: usize) -> f64 {
    let (w, h) = (reference[0] - lo[0], reference[1] - lo[1]);
    let mut hit = 0usize;
    for a in 0..k {
        let x = lo[0] + w * (a as f64 + 0.5) / k as f64;
        for b in 0..k {
            let y = lo[1] + h * (b as f64 + 0.5) / k as f64;
            if points.iter().any(|p| p[0] <= x && p[1] <= y) {
                hit += 1;
            }
        }
    }
    w * h * hit as f64 / (k * k) as f64
}

/// Uniform Monte Carlo estimate of the same area.
pub fn hv_monte_carlo<R: Rng>(points: &[[f64; 2]], reference: [f64; 2], lo: [f64; 2], samples: usize, rng: &mut R) -> f64 {
    let (w, h) = (reference[0] - lo[0], reference[1] - lo[1]);
    let hit = (0..samples)
        .filter(|_| {
            let x = lo[0] + w * rng.random::<f64>();
            let y = lo[1] + h * rng.random::<f64>();
            points.iter().any(|p| p[0] <= x && p[1] <= y)
        })
        .count();
    w * h * hit as f64 / samples as f64
}

/// Spacing written out directly from its definition.
pub fn spacing_by_hand(points: &[[f64; 2]]) -> f64 {
    let m = points.len();
    let d: Vec<f64> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / m as f64;
    (d.iter().map(|x| (mean - x).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
}

/// Largest scalarized one-step return over every `(ω', a)` pair.
pub fn best_scalarized(reward: [f64; 2], next: &[ActionValues], omega: &Preference, gamma: f64) -> f64 {
    next.iter()
        .flat_map(|v| v.iter())
        .map(|q| omega.scalarize([reward[0] + gamma * q[0], reward[1] + gamma * q[1]]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub const FD_STEP: f64 = 1e-6;
pub const REL_FLOOR: f64 = 1e-6;

/// Worst relative error between backprop and central differences over every
/// parameter entry of `store`, for the scalar `loss`.
pub fn check_params<F>(store: &mut ParamStore, loss: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let l = loss(&mut tape, store)?;
    store.zero_grads();
    tape.backward(l, store)?;
    let ids: Vec<_> = store.ids().collect();
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            let t = store.get(id);
            t.grad().map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)
        })
        .collect();
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(&mut tape, store)?;
        Ok(tape.scalar(l))
    };
    let mut worst: f64 = 0.0;
    for (p, &id) in ids.iter().enumerate() {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).values()[k];
            store.get_mut(id).values_mut()[k] = orig + FD_STEP;
            let up = eval(store)?;
            store.get_mut(id).values_mut()[k] = orig - FD_STEP;
            let down = eval(store)?;
            store.get_mut(id).values_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[p][k], numeric, REL_FLOOR));
        }
    }
    Ok(worst)
}

/// Fixed random weights for [`project`].
pub fn projection_weights<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `Σ out ⊙ W`, so every output entry reaches the loss with its own weight.
pub fn project(tape: &mut Tape, out: Var, w: &[f64]) -> Result<Var> {
    let (r, c) = tape.shape(out);
    let w = tape.input_raw(r, c, w.to_vec());
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

pub mod grad;
