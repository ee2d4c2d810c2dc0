//! Trains the full model on the synthetic change-point task and sweeps the
//! preference grid. Extra `key=value` arguments override the config, e.g.
//! `cargo run --release --example train_stemo -- max_episodes=500 seed=3`.

use stemo::harness::{load_and_prepare, sweep, train_model, ExperimentConfig, Report};
use stemo::morl::Preference;

fn main() -> stemo::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ExperimentConfig::changepoint_task(0);
    cfg.apply_overrides(&overrides)?;
    cfg.validate()?;
    let prep = load_and_prepare(&cfg)?;
    println!(
        "{} train / {} val / {} test windows over {} nodes",
        prep.windows.train.len(),
        prep.windows.val.len(),
        prep.windows.test.len(),
        prep.dataset.n()
    );
    let (model, log) = train_model(&cfg, &prep)?;
    for row in log.rows.iter().step_by((log.rows.len() / 10).max(1)) {
        println!("episode {:>5}: mae {:.3} used {:>5.1}%", row.episode, row.mae, row.used_time_pct);
    }
    let report = Report::new(sweep(&model, &prep.windows, &Preference::sweep(), cfg.seed, "stemo")?);
    print!("{}", report.to_csv());
    print!("{}", report.summary_text()?);
    Ok(())
}
