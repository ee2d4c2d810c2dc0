/// Exploration rate, loss-mixing weight and target-sync cadence.
///
/// `ε(step) = max(ε_min, exp(-step / τ))` with `τ = total_env_steps / 5`;
/// `λ` rises linearly from 0 to 1 over the first 60% of updates, then stays at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub total_env_steps: u64,
    pub total_updates: u64,
    pub eps_min: f64,
    pub lambda_ramp_frac: f64,
    pub target_sync: u64,
}

impl Schedules {
    pub fn new(total_env_steps: u64, total_updates: u64) -> Self {
        Self {
            total_env_steps: total_env_steps.max(1),
            total_updates: total_updates.max(1),
            eps_min: 0.01,
            lambda_ramp_frac: 0.6,
            target_sync: 200,
        }
    }

    pub fn epsilon(&self, env_step: u64) -> f64 {
        let tau = self.total_env_steps as f64 / 5.0;
        (-(env_step as f64) / tau).exp().max(self.eps_min)
    }

    pub fn lambda(&self, update: u64) -> f64 {
        let ramp = self.lambda_ramp_frac * self.total_updates as f64;
        if ramp <= 0.0 {
            return 1.0;
        }
        (update as f64 / ramp).min(1.0)
    }

    pub fn should_sync(&self, update: u64) -> bool {
        update > 0 && update % self.target_sync == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_decays_to_floor() {
        let s = Schedules::new(1000, 100);
        assert_eq!(s.epsilon(0), 1.0);
        assert!(s.epsilon(500) < s.epsilon(100));
        assert_eq!(s.epsilon(100_000), 0.01);
    }

    #[test]
    fn lambda_path_endpoints() {
        let s = Schedules::new(1000, 100);
        assert_eq!(s.lambda(0), 0.0);
        assert_eq!(s.lambda(30), 0.5);
        assert_eq!(s.lambda(60), 1.0);
        assert_eq!(s.lambda(100), 1.0);
    }

    #[test]
    fn monotone_paths() {
        let s = Schedules::new(12_000, 3_000);
        for k in 1..12_000 {
            assert!(s.epsilon(k) <= s.epsilon(k - 1));
        }
        for k in 1..3_000 {
            assert!(s.lambda(k) >= s.lambda(k - 1));
        }
    }
}
