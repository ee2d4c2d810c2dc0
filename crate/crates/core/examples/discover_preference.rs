//! Recovers a hidden accuracy/time trade-off from scalar rewards alone.
//! Arguments: hidden accuracy weight, then optional `key=value` overrides.

use stemo::harness::{load_and_prepare, train_model, ExperimentConfig};
use stemo::morl::{discover_preference, DiscoveryConfig, HiddenPreferenceEnv, Preference};

fn main() -> stemo::Result<()> {
    let mut args = std::env::args().skip(1);
    let hidden_acc: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.67);
    let overrides: Vec<String> = args.collect();
    let mut cfg = ExperimentConfig::changepoint_task(0);
    cfg.apply_overrides(&overrides)?;
    let prep = load_and_prepare(&cfg)?;
    let (model, _) = train_model(&cfg, &prep)?;

    let hidden = Preference::new(hidden_acc, 1.0 - hidden_acc)?;
    let mut env = HiddenPreferenceEnv::new(prep.windows.test.clone(), hidden, cfg.seed)?;
    let found = discover_preference(&model, &mut env, &DiscoveryConfig::default())?;
    for (k, round) in found.rounds.iter().enumerate() {
        println!(
            "round {k}: Beta({:.2}, {:.2}) best w_acc {:.3} score {:.3}",
            round.alpha,
            round.beta,
            round.best.accuracy(),
            round.best_score
        );
    }
    println!(
        "hidden ({:.2}, {:.2}) recovered ({:.3}, {:.3}) L1 {:.3} after {} episodes",
        hidden.accuracy(),
        hidden.time(),
        found.preference.accuracy(),
        found.preference.time(),
        found.preference.l1_distance(&hidden),
        found.episodes
    );
    Ok(())
}
