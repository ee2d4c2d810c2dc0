//! Prints one PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --test acceptance`; the training criteria take a while.

mod support;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stemo::dtwsim::{dtw_full, DtwTables};
use stemo::evalmetrics::{hypervolume_2d, spacing, spearman};
use stemo::harness::synthetic::{changepoint, periodic, ChangepointSpec, PeriodicSpec};
use stemo::harness::{
    load_and_prepare, load_model, operating_point, prepare, run_experiment, sweep, train_variant, ExperimentConfig,
    Prepared, ReportRow,
};
use stemo::morl::{
    discover_preference, envelope_target, envelope_targets_batch, evaluate, evaluate_mode, Ablation, Action,
    DiscoveryConfig, EpisodeMode, HiddenPreferenceEnv, Preference, QNetwork, StemoModel, Transition,
};
use support::grad;

struct Line {
    id: usize,
    pass: bool,
    text: String,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

fn fmt_list(xs: &[f64], digits: usize) -> String {
    xs.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join("/")
}

fn gradients() -> Line {
    let start = Instant::now();
    let mut layer_worst: f64 = 0.0;
    let mut e2e_worst: f64 = 0.0;
    let mut failures = Vec::new();
    let checks: [(&str, fn(u64) -> stemo::Result<f64>); 4] =
        [("linear", grad::linear), ("gru", grad::gru), ("mgcn", grad::mgcn), ("q_mlp", grad::q_mlp)];
    for (name, check) in checks {
        for seed in 0..100 {
            match check(seed) {
                Ok(e) => layer_worst = layer_worst.max(e),
                Err(e) => failures.push(format!("{name}#{seed}: {e}")),
            }
        }
    }
    for seed in 0..100 {
        match grad::end_to_end(seed) {
            Ok(e) => e2e_worst = e2e_worst.max(e),
            Err(e) => failures.push(format!("e2e#{seed}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 1,
        pass: failures.is_empty() && layer_worst < 1e-4 && e2e_worst < 1e-3 && secs < 60.0,
        text: format!(
            "gradient checks over 5x100 instances: worst layer rel err {layer_worst:.1e} (< 1e-4), end-to-end {e2e_worst:.1e} (< 1e-3), {secs:.1}s{}",
            if failures.is_empty() { String::new() } else { format!(", errors {failures:?}") }
        ),
    }
}

fn dtw() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatched = 0;
    for _ in 0..1000 {
        let la = rng.random_range(1..=8);
        let lb = rng.random_range(1..=8);
        let a: Vec<f64> = (0..la).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-3.0..3.0)).collect();
        if dtw_full(&a, &b).unwrap() != support::dtw_recursive(&a, &b) {
            mismatched += 1;
        }
    }
    let ds = changepoint(&ChangepointSpec {
        blocks: 1,
        ..ChangepointSpec::default()
    })
    .unwrap();
    let n = ds.n();
    let mut tables = DtwTables::new(n, 12);
    let mut incremental_bad = 0;
    let mut compared = 0;
    for t in 0..12 {
        tables.extend(&ds.values[t]).unwrap();
        for i in 0..n {
            for j in 0..n {
                for tp in 0..=t {
                    let a: Vec<f64> = ds.values[..=t].iter().map(|r| r[i]).collect();
                    let b: Vec<f64> = ds.values[..=tp].iter().map(|r| r[j]).collect();
                    compared += 1;
                    if tables.distance(i, j, t, tp) != dtw_full(&a, &b).unwrap() {
                        incremental_bad += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 2,
        pass: mismatched == 0 && incremental_bad == 0 && secs < 60.0,
        text: format!(
            "dtw: {mismatched}/1000 differ from exhaustive recursion, {incremental_bad}/{compared} incremental cells differ from recompute (6 nodes, T=12), {secs:.1}s"
        ),
    }
}

fn pareto() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=10);
        let pts: Vec<[f64; 2]> = (0..m).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
        let reference = [rng.random_range(10.0..12.0), rng.random_range(10.0..12.0)];
        let exact = hypervolume_2d(&pts, reference).unwrap();
        let grid = support::hv_grid(&pts, reference, [0.0, 0.0], 400);
        worst = worst.max((exact - grid).abs() / exact);
    }
    let trivial = hypervolume_2d(&[[2.0, 3.0]], [5.0, 7.0]).unwrap() == 12.0
        && hypervolume_2d(&[[5.0, 7.0]], [5.0, 7.0]).unwrap() == 0.0
        && spacing(&[[0.0, 0.0], [3.0, 4.0]]).unwrap() == 0.0
        && spacing(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap() == 0.0
        && hypervolume_2d(&[[1.0, 4.0], [3.0, 2.0]], [5.0, 5.0]).unwrap() == 8.0;
    let s = spacing(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
    let hand = support::spacing_by_hand(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
    let worked = (s - hand).abs() < 1e-12 && (s - 0.5774).abs() < 1e-4;
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 3,
        pass: worst < 0.01 && trivial && worked && secs < 60.0,
        text: format!(
            "hypervolume vs grid count on 100 fronts: worst rel diff {:.3}% (< 1%); trivial cases {}; spacing example {s:.4} vs hand {hand:.4}; {secs:.1}s",
            100.0 * worst,
            if trivial { "exact" } else { "WRONG" }
        ),
    }
}

fn envelope() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut terminal_bad = 0;
    let mut checked = 0;
    // the target operator on random value tables
    for _ in 0..2000 {
        let m = rng.random_range(1..8);
        let next: Vec<[[f64; 2]; 2]> = (0..m)
            .map(|_| [[rng.random_range(-5.0..1.0), rng.random_range(-5.0..1.0)], [rng.random_range(-5.0..1.0), rng.random_range(-5.0..1.0)]])
            .collect();
        let r = [rng.random_range(-3.0..0.0), rng.random_range(-3.0..0.0)];
        let w: f64 = rng.random();
        let omega = Preference::new(w, 1.0 - w).unwrap();
        let y = envelope_target(r, false, &next, &omega, 1.0);
        checked += 1;
        if omega.scalarize(y) < support::best_scalarized(r, &next, &omega, 1.0) - 1e-12 {
            violations += 1;
        }
        if envelope_target(r, true, &next, &omega, 1.0) != r {
            terminal_bad += 1;
        }
    }
    // batched targets from a random network
    let state_dim = 5;
    let q = QNetwork::new(state_dim, 16, &mut rng);
    let target_store = q.store.clone();
    let prefs: Vec<Preference> = (0..8).map(|_| Preference::sample(&mut rng)).collect();
    let batch: Vec<Transition> = (0..32)
        .map(|k| {
            let terminal = k % 3 == 0;
            Transition {
                node: k,
                t: 0,
                state: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: if terminal { Action::Halt } else { Action::Wait },
                reward: if terminal { [rng.random_range(-2.0..0.0), -rng.random_range(0.0..5.0)] } else { [0.0; 2] },
                next_state: (!terminal).then(|| (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect()),
                terminal,
            }
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let ys = envelope_targets_batch(&q, &target_store, &refs, &prefs, 1.0, false).unwrap();
    for (tr, row) in batch.iter().zip(&ys) {
        for (omega, y) in prefs.iter().zip(row) {
            checked += 1;
            if tr.terminal {
                if *y != tr.reward {
                    terminal_bad += 1;
                }
                continue;
            }
            let s = tr.next_state.as_deref().unwrap();
            let next = q.predict_with(&target_store, &vec![s; prefs.len()], &prefs).unwrap();
            if omega.scalarize(*y) < support::best_scalarized(tr.reward, &next, omega, 1.0) - 1e-12 {
                violations += 1;
            }
        }
    }
    Line {
        id: 4,
        pass: violations == 0 && terminal_bad == 0,
        text: format!("envelope targets: {violations} dominance violations and {terminal_bad} terminal mismatches in {checked} checks"),
    }
}

fn determinism() -> Line {
    let mut cfg = ExperimentConfig::changepoint_task(5);
    cfg.apply_overrides(&["length=60", "max_episodes=120", "warmup_episodes=40"]).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    let files = ["report.csv", "summary.txt", "train_log.csv", "model.ckpt", "baselines.csv"];
    let identical = files
        .iter()
        .all(|f| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap());
    let reloaded = load_model(&cfg, &first.checkpoint_path).unwrap();
    let prep = load_and_prepare(&cfg).unwrap();
    let same_traces = Preference::sweep().iter().all(|w| {
        evaluate(&first.model, &prep.windows.test, w, 1).unwrap().traces
            == evaluate(&reloaded, &prep.windows.test, w, 1).unwrap().traces
    });
    Line {
        id: 9,
        pass: identical && same_traces,
        text: format!(
            "determinism: report files {} across two runs; reloaded checkpoint traces {} over the sweep",
            if identical { "byte-identical" } else { "DIFFER" },
            if same_traces { "identical" } else { "DIFFER" }
        ),
    }
}

/// Everything the training criteria need from one seed.
struct SeedRun {
    seed: u64,
    train_secs: f64,
    sweep: Vec<ReportRow>,
    fixed_last_mae: f64,
    at_half: Vec<(String, f64)>,
    discovered: Vec<(Preference, Preference)>,
    tau_first: f64,
    tau_last: f64,
}

fn train_timed(cfg: &ExperimentConfig, prep: &Prepared, ablation: Ablation) -> (StemoModel, f64) {
    let start = Instant::now();
    let (model, _) = train_variant(cfg, prep, ablation).unwrap();
    (model, start.elapsed().as_secs_f64())
}

fn seed_run(seed: u64) -> SeedRun {
    let cfg = ExperimentConfig::changepoint_task(seed);
    let ds = changepoint(&cfg.changepoint_spec()).unwrap();
    let prep = prepare(&cfg, ds).unwrap();
    let horizon = cfg.horizon;
    let prefs = Preference::sweep();

    let (full, train_secs) = train_timed(&cfg, &prep, Ablation::default());
    let swept = sweep(&full, &prep.windows, &prefs, seed, "stemo").unwrap();
    let half = 0.5;
    let omega = Preference::new(half, half).unwrap();
    let tau = |tau: usize| evaluate_mode(&full, &prep.windows.test, &omega, EpisodeMode::Fixed(tau), seed).unwrap().mae;
    let (tau_first, tau_last) = (tau(0), tau(horizon - 1));

    let mut at_half = vec![(
        "stemo".to_string(),
        operating_point(&full, &prep.windows, &swept, 50.0, 4, seed, "stemo").unwrap().mae,
    )];
    for ablation in stemo::harness::ablation_variants(horizon).into_iter().skip(1) {
        let (model, _) = train_timed(&cfg, &prep, ablation);
        let label = ablation.label();
        let rows = if ablation.fixed_policy.is_some() {
            Vec::new()
        } else {
            sweep(&model, &prep.windows, &prefs, seed, &label).unwrap()
        };
        at_half.push((label.clone(), operating_point(&model, &prep.windows, &rows, 50.0, 4, seed, &label).unwrap().mae));
    }
    let fixed_last = Ablation {
        fixed_policy: Some(horizon - 1),
        ..Ablation::default()
    };
    let (baseline, _) = train_timed(&cfg, &prep, fixed_last);
    let fixed_last_mae = evaluate(&baseline, &prep.windows.test, &omega, seed).unwrap().mae;

    let mut discovered = Vec::new();
    for hidden in [Preference::new(0.67, 0.33).unwrap(), Preference::new(0.05, 0.95).unwrap()] {
        let mut env = HiddenPreferenceEnv::new(prep.windows.test.clone(), hidden, seed).unwrap();
        let found = discover_preference(
            &full,
            &mut env,
            &DiscoveryConfig {
                seed,
                ..DiscoveryConfig::default()
            },
        )
        .unwrap();
        discovered.push((hidden, found.preference));
    }
    SeedRun {
        seed,
        train_secs,
        sweep: swept,
        fixed_last_mae,
        at_half,
        discovered,
        tau_first,
        tau_last,
    }
}

fn row_at(rows: &[ReportRow], acc: f64) -> &ReportRow {
    rows.iter().find(|r| (r.omega.accuracy() - acc).abs() < 1e-9).unwrap()
}

fn training_criteria(runs: &[SeedRun]) -> Vec<Line> {
    let mut lines = Vec::new();
    for r in runs {
        let curve: Vec<String> = r
            .sweep
            .iter()
            .map(|x| format!("{:.1}:{:.3}@{:.0}%", x.omega.accuracy(), x.mae, x.used_time_pct))
            .collect();
        println!("  seed {} trained in {:.0}s; sweep {}", r.seed, r.train_secs, curve.join(" "));
        println!("  seed {} at 50% used time: {:?}", r.seed, r.at_half);
    }
    // 5
    let ratio: Vec<f64> = runs.iter().map(|r| row_at(&r.sweep, 0.9).mae / r.fixed_last_mae).collect();
    let used_hi: Vec<f64> = runs.iter().map(|r| row_at(&r.sweep, 0.9).used_time_pct).collect();
    let gap: Vec<f64> = runs
        .iter()
        .map(|r| row_at(&r.sweep, 0.9).used_time_pct - row_at(&r.sweep, 0.1).used_time_pct)
        .collect();
    let secs: Vec<f64> = runs.iter().map(|r| r.train_secs).collect();
    let fast = secs.iter().all(|&s| s < 600.0);
    let (mr, mu, mg) = (median(ratio.clone()), median(used_hi.clone()), median(gap.clone()));
    lines.push(Line {
        id: 5,
        pass: mr <= 1.15 && mu < 80.0 && mg >= 20.0 && fast,
        text: format!(
            "early halting: (a) MAE/fixed_policy(T-1) at w=(0.9,0.1) median {mr:.3} (<= 1.15) [{}], used median {mu:.1}% (< 80) [{}]; (b) used-time gap median {mg:.1} pts (>= 20) [{}]; train {}s",
            fmt_list(&ratio, 3),
            fmt_list(&used_hi, 1),
            fmt_list(&gap, 1),
            fmt_list(&secs, 0)
        ),
    });
    // 6
    let rho: Vec<f64> = runs
        .iter()
        .map(|r| {
            let wt: Vec<f64> = r.sweep.iter().map(|x| x.omega.time()).collect();
            let used: Vec<f64> = r.sweep.iter().map(|x| x.used_time_pct).collect();
            spearman(&wt, &used)
        })
        .collect();
    let mrho = median(rho.clone());
    lines.push(Line {
        id: 6,
        pass: mrho <= -0.6,
        text: format!("preference monotonicity: Spearman(w_time, used) median {mrho:.3} (<= -0.6) [{}]", fmt_list(&rho, 3)),
    });
    // 7
    let mut pass7 = true;
    let mut parts = Vec::new();
    for k in 0..2 {
        let hidden = runs[0].discovered[k].0;
        let acc: Vec<f64> = runs.iter().map(|r| r.discovered[k].1.accuracy()).collect();
        let l1: Vec<f64> = runs.iter().map(|r| r.discovered[k].1.l1_distance(&hidden)).collect();
        let m_acc = median(acc.clone());
        let same_side = (m_acc > 0.5) == (hidden.accuracy() > 0.5);
        let ml1 = median(l1.clone());
        pass7 &= same_side && ml1 <= 0.3;
        parts.push(format!(
            "w*=({:.2},{:.2}) -> median w_acc {m_acc:.3} [{}], L1 median {ml1:.3} (<= 0.3), dominant {}",
            hidden.accuracy(),
            hidden.time(),
            fmt_list(&acc, 3),
            if same_side { "matches" } else { "DIFFERS" }
        ));
    }
    lines.push(Line {
        id: 7,
        pass: pass7,
        text: format!("hidden preference (100 episodes): {}", parts.join("; ")),
    });
    // 8
    let methods: Vec<String> = runs[0].at_half.iter().map(|(m, _)| m.clone()).collect();
    let med: Vec<f64> = (0..methods.len())
        .map(|i| median(runs.iter().map(|r| r.at_half[i].1).collect()))
        .collect();
    let pass8 = med[1..].iter().all(|&v| med[0] <= 1.02 * v);
    let desc: Vec<String> = methods.iter().zip(&med).map(|(m, v)| format!("{m} {v:.3}")).collect();
    lines.push(Line {
        id: 8,
        pass: pass8,
        text: format!("ablation at 50% used time, median MAE: {} (full <= each x1.02)", desc.join(", ")),
    });
    lines
}

fn baselines(runs: &[SeedRun]) -> Line {
    let cfg = ExperimentConfig {
        source: stemo::harness::DataSource::Synthetic(stemo::harness::SyntheticKind::Periodic),
        ..ExperimentConfig::default()
    };
    let ds = periodic(&PeriodicSpec::default()).unwrap();
    let prep = prepare(&cfg, ds).unwrap();
    let ha = stemo::harness::experiment::ha_row(&prep).unwrap();
    let ha_ok = ha.mae < 1e-9;
    let ordered: Vec<bool> = runs.iter().map(|r| r.tau_last <= r.tau_first).collect();
    let detail: Vec<String> = runs.iter().map(|r| format!("{:.3}<={:.3}", r.tau_last, r.tau_first)).collect();
    Line {
        id: 10,
        pass: ha_ok && ordered.iter().all(|&b| b),
        text: format!(
            "baselines: HA MAE on periodic data {:.1e}; fixed tau=T-1 vs tau=0 MAE per seed [{}]",
            ha.mae,
            detail.join(", ")
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut lines = vec![gradients(), dtw(), pareto(), envelope(), determinism()];
    for l in &lines {
        println!("{} {:>2} {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.text);
    }
    let runs: Vec<SeedRun> = (0..3).map(seed_run).collect();
    let mut late = training_criteria(&runs);
    late.push(baselines(&runs));
    for l in &late {
        println!("{} {:>2} {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.text);
    }
    lines.extend(late);
    lines.sort_by_key(|l| l.id);
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("summary: {passed}/{} criteria pass in {:.0}s", lines.len(), start.elapsed().as_secs_f64());
    for l in &lines {
        println!("{} {:>2}", if l.pass { "PASS" } else { "FAIL" }, l.id);
    }
}
