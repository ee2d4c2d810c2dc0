//! Envelope Bellman targets and the mixed vector/scalar regression loss.

use super::{ActionValues, Preference, QNetwork, Transition};
use crate::error::{Result, StemoError};
use crate::numdiff::{AdamState, ParamStore, Tape, Var};

/// Index `(l, a)` of the preference/action pair maximizing `ωᵀ Q(s', a, ω'_l)`.
pub fn envelope_argmax(next_values: &[ActionValues], omega: &Preference) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_score = f64::NEG_INFINITY;
    for (l, values) in next_values.iter().enumerate() {
        for (a, v) in values.iter().enumerate() {
            let s = omega.scalarize(*v);
            if s > best_score {
                best_score = s;
                best = (l, a);
            }
        }
    }
    best
}

/// `y = r + γ Q(s', a*, ω'*)` with `(a*, ω'*) = argmax_{a, ω'} ωᵀ Q(s', a, ω')`;
/// `y = r` for terminal transitions.
///
/// `next_values[l]` holds `Q(s', ·, ω'_l)` for every candidate preference.
pub fn envelope_target(
    reward: [f64; 2],
    terminal: bool,
    next_values: &[ActionValues],
    omega: &Preference,
    gamma: f64,
) -> [f64; 2] {
    envelope_target_selected(reward, terminal, next_values, next_values, omega, gamma)
}

/// As [`envelope_target`], but the maximizing pair is chosen on `select` and
/// its vector read from `eval`.
pub fn envelope_target_selected(
    reward: [f64; 2],
    terminal: bool,
    select: &[ActionValues],
    eval: &[ActionValues],
    omega: &Preference,
    gamma: f64,
) -> [f64; 2] {
    if terminal || eval.is_empty() {
        return reward;
    }
    let (l, a) = envelope_argmax(select, omega);
    let best = eval[l][a];
    [reward[0] + gamma * best[0], reward[1] + gamma * best[1]]
}

/// Targets `y[k][j]` for every transition `k` trained under preference `prefs[j]`,
/// maximizing over actions and over the same preference set. Values come from
/// the target snapshot; with `double` the maximizing pair is picked by the
/// online network instead.
pub fn envelope_targets_batch(
    qnet: &QNetwork,
    target: &ParamStore,
    batch: &[&Transition],
    prefs: &[Preference],
    gamma: f64,
    double: bool,
) -> Result<Vec<Vec<[f64; 2]>>> {
    let live: Vec<(usize, &[f64])> = batch
        .iter()
        .enumerate()
        .filter(|(_, tr)| !tr.terminal)
        .map(|(k, tr)| {
            tr.next_state
                .as_deref()
                .map(|s| (k, s))
                .ok_or_else(|| StemoError::Input(format!("non-terminal transition of node {} lacks next state", tr.node)))
        })
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(live.len() * prefs.len());
    let mut rows_prefs = Vec::with_capacity(live.len() * prefs.len());
    for (_, s) in &live {
        for p in prefs {
            states.push(*s);
            rows_prefs.push(*p);
        }
    }
    let values = qnet.predict_with(target, &states, &rows_prefs)?;
    let online = if double { qnet.predict(&states, &rows_prefs)? } else { Vec::new() };
    let selector = if double { &online } else { &values };
    let mut next: Vec<Option<(&[ActionValues], &[ActionValues])>> = vec![None; batch.len()];
    for (idx, (k, _)) in live.iter().enumerate() {
        let rows = idx * prefs.len()..(idx + 1) * prefs.len();
        next[*k] = Some((&selector[rows.clone()], &values[rows]));
    }
    Ok(batch
        .iter()
        .zip(&next)
        .map(|(tr, nv)| {
            let (sel, eval) = nv.unwrap_or((&[], &[]));
            prefs
                .iter()
                .map(|w| envelope_target_selected(tr.reward, tr.terminal, sel, eval, w, gamma))
                .collect()
        })
        .collect())
}

/// Loss value and its two components before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub vector: f64,
    pub scalar: f64,
}

/// `(1-λ) mean ‖y - Q‖² + λ mean |ωᵀy - ωᵀQ|` on a `B×2` selected-Q node.
pub fn mixed_loss_on_tape(
    tape: &mut Tape,
    q_selected: Var,
    targets: &[[f64; 2]],
    omegas: &[Preference],
    lambda: f64,
) -> Result<(Var, LossBreakdown)> {
    let b = targets.len();
    if tape.shape(q_selected) != (b, 2) || omegas.len() != b {
        return Err(StemoError::shape(
            "envelope_loss",
            format!("{:?} values, {} targets, {} preferences", tape.shape(q_selected), b, omegas.len()),
        ));
    }
    let y = tape.input_raw(b, 2, targets.iter().flatten().copied().collect());
    let w = tape.input_raw(b, 2, omegas.iter().flat_map(|o| o.as_array()).collect());
    let diff = tape.sub(y, q_selected)?;
    let sq = tape.square(diff);
    let sq_sum = tape.sum(sq);
    let la = tape.scale(sq_sum, 1.0 / b as f64);
    let wd = tape.mul(w, diff)?;
    let proj = tape.row_sum(wd);
    let absd = tape.abs(proj);
    let lb = tape.mean(absd);
    let la_s = tape.scale(la, 1.0 - lambda);
    let lb_s = tape.scale(lb, lambda);
    let total = tape.add(la_s, lb_s)?;
    let breakdown = LossBreakdown {
        total: tape.scalar(total),
        vector: tape.scalar(la),
        scalar: tape.scalar(lb),
    };
    Ok((total, breakdown))
}

/// One gradient step on the online Q-network. Targets are constants.
///
/// Row `k * prefs.len() + j` pairs transition `k` with preference `j`.
pub fn loss_and_update(
    qnet: &mut QNetwork,
    adam: &mut AdamState,
    batch: &[&Transition],
    prefs: &[Preference],
    targets: &[Vec<[f64; 2]>],
    lambda: f64,
) -> Result<LossBreakdown> {
    let rows = batch.len() * prefs.len();
    let mut input = Vec::with_capacity(rows * qnet.input_dim());
    let mut mask_wait = Vec::with_capacity(rows * 2);
    let mut mask_halt = Vec::with_capacity(rows * 2);
    let mut ys = Vec::with_capacity(rows);
    let mut ws = Vec::with_capacity(rows);
    for (tr, ys_k) in batch.iter().zip(targets) {
        let (mw, mh) = match tr.action {
            super::Action::Wait => (1.0, 0.0),
            super::Action::Halt => (0.0, 1.0),
        };
        for (p, y) in prefs.iter().zip(ys_k) {
            input.extend_from_slice(&tr.state);
            input.extend_from_slice(&p.as_array());
            mask_wait.extend_from_slice(&[mw, mw]);
            mask_halt.extend_from_slice(&[mh, mh]);
            ys.push(*y);
            ws.push(*p);
        }
    }
    let mut tape = Tape::new();
    let x = tape.input_raw(rows, qnet.input_dim(), input);
    let out = qnet.forward(&mut tape, x)?;
    let q_wait = tape.slice_cols(out, 0, 2)?;
    let q_halt = tape.slice_cols(out, 2, 2)?;
    let m_wait = tape.input_raw(rows, 2, mask_wait);
    let m_halt = tape.input_raw(rows, 2, mask_halt);
    let a = tape.mul(m_wait, q_wait)?;
    let b = tape.mul(m_halt, q_halt)?;
    let q_sel = tape.add(a, b)?;
    let (loss, breakdown) = mixed_loss_on_tape(&mut tape, q_sel, &ys, &ws, lambda)?;
    qnet.store.zero_grads();
    tape.backward(loss, &mut qnet.store)?;
    adam.step(&mut qnet.store);
    if !qnet.store.all_finite() {
        return Err(StemoError::Numeric("non-finite Q-network parameters after update".into()));
    }
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pref(a: f64) -> Preference {
        Preference::new(a, 1.0 - a).unwrap()
    }

    #[test]
    fn terminal_target_is_reward() {
        let nv = [[[5.0, 5.0], [9.0, 9.0]]];
        assert_eq!(envelope_target([-1.0, -2.0], true, &nv, &pref(0.5), 1.0), [-1.0, -2.0]);
    }

    #[test]
    fn degenerate_single_choice() {
        let nv = [[[2.0, -1.0], [2.0, -1.0]]];
        assert_eq!(envelope_target([0.5, 0.0], false, &nv, &pref(0.3), 0.9), [0.5 + 0.9 * 2.0, -0.9]);
    }

    #[test]
    fn enumerated_argmax() {
        // two candidate preferences × two actions
        let nv = [[[1.0, -3.0], [0.0, 0.0]], [[3.0, -4.0], [-1.0, 1.0]]];
        let omega = pref(0.8);
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for values in &nv {
            for v in values {
                let s = omega.scalarize(*v);
                if s > best.0 {
                    best = (s, *v);
                }
            }
        }
        let y = envelope_target([0.0, 0.0], false, &nv, &omega, 1.0);
        assert_eq!(y, best.1);
        assert_eq!(y, [3.0, -4.0]);
    }

    #[test]
    fn loss_examples() {
        let mut tape = Tape::new();
        let q = tape.input_raw(1, 2, vec![0.0, 0.0]);
        let (_, l) = mixed_loss_on_tape(&mut tape, q, &[[1.0, 0.0]], &[pref(0.5)], 0.5).unwrap();
        assert!((l.total - 0.75).abs() < 1e-15);

        let mut tape = Tape::new();
        let q = tape.input_raw(1, 2, vec![1.0, 0.0]);
        let (_, l) = mixed_loss_on_tape(&mut tape, q, &[[1.0, 0.0]], &[pref(0.5)], 0.3).unwrap();
        assert_eq!(l.total, 0.0);

        let mut tape = Tape::new();
        let q = tape.input_raw(1, 2, vec![0.0, 2.0]);
        let (_, l0) = mixed_loss_on_tape(&mut tape, q, &[[1.0, 0.0]], &[pref(0.5)], 0.0).unwrap();
        assert_eq!(l0.total, l0.vector);
        let mut tape = Tape::new();
        let q = tape.input_raw(1, 2, vec![0.0, 2.0]);
        let (_, l1) = mixed_loss_on_tape(&mut tape, q, &[[1.0, 0.0]], &[pref(0.5)], 1.0).unwrap();
        assert_eq!(l1.total, l1.scalar);
    }
}
