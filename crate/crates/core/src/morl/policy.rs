use rand::Rng;

use super::{Action, ActionValues, Preference, QNetwork};
use crate::error::{Result, StemoError};

/// `argmax_a ωᵀ Q(s, a, ω)`; ties go to `Wait`.
pub fn greedy_action(values: &ActionValues, omega: &Preference) -> Action {
    let wait = omega.scalarize(values[0]);
    let halt = omega.scalarize(values[1]);
    if halt > wait {
        Action::Halt
    } else {
        Action::Wait
    }
}

/// ε-greedy choice per node; `None` entries (already halted) stay `None`.
pub fn choose_actions<R: Rng>(
    values: &[Option<ActionValues>],
    omega: &Preference,
    epsilon: f64,
    rng: &mut R,
) -> Vec<Option<Action>> {
    values
        .iter()
        .map(|v| {
            v.as_ref().map(|q| {
                let explore: f64 = rng.random();
                if explore < epsilon {
                    if rng.random_bool(0.5) {
                        Action::Halt
                    } else {
                        Action::Wait
                    }
                } else {
                    greedy_action(q, omega)
                }
            })
        })
        .collect()
}

/// Evaluates the Q-network on every unhalted node and applies ε-greedy selection.
pub fn select_actions<R: Rng>(
    qnet: &QNetwork,
    states: &[Option<Vec<f64>>],
    omega: &Preference,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<Option<Action>>> {
    let active: Vec<&[f64]> = states.iter().flatten().map(Vec::as_slice).collect();
    let prefs = vec![*omega; active.len()];
    let mut q = qnet.predict(&active, &prefs)?.into_iter();
    let values: Vec<Option<ActionValues>> = states.iter().map(|s| s.as_ref().and_then(|_| q.next())).collect();
    Ok(choose_actions(&values, omega, epsilon, rng))
}

/// Reward vector per node: `(-|x̂ - x|, -ρ t*)`, paid on the halt transition.
pub fn compute_rewards(halt_times: &[usize], committed: &[f64], truth: &[f64], rho: f64) -> Result<Vec<[f64; 2]>> {
    if halt_times.len() != committed.len() || committed.len() != truth.len() {
        return Err(StemoError::Input(format!(
            "reward inputs disagree: {} halts, {} forecasts, {} targets",
            halt_times.len(),
            committed.len(),
            truth.len()
        )));
    }
    Ok(halt_times
        .iter()
        .zip(committed.iter().zip(truth))
        .map(|(&t, (p, x))| [-(p - x).abs(), -rho * t as f64])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_prefers_higher_scalarization() {
        let q: ActionValues = [[0.0, -1.0], [0.5, -1.0]];
        let omega = Preference::new(0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = choose_actions(&[Some(q)], &omega, 0.0, &mut rng);
        assert_eq!(a, vec![Some(Action::Halt)]);
    }

    #[test]
    fn accuracy_only_preference_ignores_time_row() {
        let omega = Preference::new(1.0, 0.0).unwrap();
        let a: ActionValues = [[1.0, -5.0], [0.0, 3.0]];
        let b: ActionValues = [[1.0, 2.0], [0.0, -7.0]];
        assert_eq!(greedy_action(&a, &omega), greedy_action(&b, &omega));
    }

    #[test]
    fn halted_nodes_emit_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q: ActionValues = [[0.0; 2]; 2];
        let a = choose_actions(&[None, Some(q)], &Preference::new(0.5, 0.5).unwrap(), 1.0, &mut rng);
        assert!(a[0].is_none());
        assert!(a[1].is_some());
    }

    #[test]
    fn reward_examples() {
        assert_eq!(compute_rewards(&[0], &[2.0], &[2.0], 0.5).unwrap(), vec![[0.0, 0.0]]);
        assert_eq!(compute_rewards(&[4], &[1.0], &[2.5], 0.5).unwrap(), vec![[-1.5, -2.0]]);
        assert_eq!(compute_rewards(&[11], &[0.0], &[0.0], 0.5).unwrap()[0][1], -5.5);
    }
}
