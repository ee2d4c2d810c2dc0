//! Trains the full model and the three ablations, then compares them at
//! half of the available observation time. Accepts `key=value` overrides.

use stemo::harness::{ablation_variants, load_and_prepare, operating_point, sweep, train_variant, ExperimentConfig};
use stemo::morl::Preference;

fn main() -> stemo::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ExperimentConfig::changepoint_task(0);
    cfg.apply_overrides(&overrides)?;
    let prep = load_and_prepare(&cfg)?;
    for ablation in ablation_variants(cfg.horizon) {
        let label = ablation.label();
        let (model, _) = train_variant(&cfg, &prep, ablation)?;
        let rows = if ablation.fixed_policy.is_some() {
            Vec::new()
        } else {
            sweep(&model, &prep.windows, &Preference::sweep(), cfg.seed, &label)?
        };
        let op = operating_point(&model, &prep.windows, &rows, 50.0, 4, cfg.seed, &label)?;
        println!("{label:>16}: MAE {:.3} at 50% used time ({} evaluations)", op.mae, op.evaluated.len());
    }
    Ok(())
}
