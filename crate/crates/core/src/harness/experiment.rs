//! Train/evaluate orchestration and report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, StemoError};
use crate::evalmetrics::{
    error_at_used_time, hypervolume_2d, mae, mape, nondominated, rmse, spacing, worst_point, FrontPoint,
    HistoricalAverage,
};
use crate::graphcore::{build_spatial_adjacency, SpatialAdjacency};
use crate::morl::{evaluate, evaluate_mode, Ablation, EpisodeMode, Preference, StemoModel, TrainLog, Trainer};

use super::config::{DataSource, ExperimentConfig, SyntheticKind};
use super::synthetic::{changepoint, diffusion, periodic};
use super::windows::{split_windows_with, SplitWindows};
use super::{ingest_csv, SpatioTemporalDataset};

pub const REPORT_HEADER: &str = "method,omega_acc,omega_time,mae,rmse,mape,used_time_pct";

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<SpatioTemporalDataset> {
    match &cfg.source {
        DataSource::Csv { series, graph } => ingest_csv(series, graph),
        DataSource::Synthetic(SyntheticKind::Changepoint) => changepoint(&cfg.changepoint_spec()),
        DataSource::Synthetic(SyntheticKind::Periodic) => periodic(&cfg.periodic_spec()),
        DataSource::Synthetic(SyntheticKind::Diffusion) => diffusion(&cfg.diffusion_spec()),
    }
    .map_err(|e| e.in_stage("load dataset"))
}

/// Dataset, split windows and spatial adjacency for one configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: SpatioTemporalDataset,
    pub windows: SplitWindows,
    pub adj: SpatialAdjacency,
}

pub fn prepare(cfg: &ExperimentConfig, dataset: SpatioTemporalDataset) -> Result<Prepared> {
    let windows = split_windows_with(&dataset, cfg.horizon, cfg.window_stride(), cfg.train_frac, cfg.val_frac)
        .map_err(|e| e.in_stage("windowing"))?;
    let eta = cfg.eta.unwrap_or_else(|| dataset.graph.default_eta());
    let adj = build_spatial_adjacency(&dataset.graph, eta).map_err(|e| e.in_stage("adjacency"))?;
    Ok(Prepared { dataset, windows, adj })
}

pub fn load_and_prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    prepare(cfg, load_dataset(cfg)?)
}

/// Trains a model with the ablation switches from `cfg`.
pub fn train_model(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(StemoModel, TrainLog)> {
    train_variant(cfg, prep, cfg.ablation())
}

pub fn train_variant(cfg: &ExperimentConfig, prep: &Prepared, ablation: Ablation) -> Result<(StemoModel, TrainLog)> {
    let model = StemoModel::new(
        cfg.model_config(),
        prep.adj.clone(),
        prep.windows.scaler.clone(),
        ablation,
        cfg.seed,
    )
    .map_err(|e| e.in_stage("model init"))?;
    let mut trainer = Trainer::new(model, cfg.train_config()).map_err(|e| e.in_stage("trainer init"))?;
    let log = trainer
        .train(&prep.windows.train, &prep.windows.val)
        .map_err(|e| e.in_stage("training"))?;
    Ok((trainer.into_model(), log))
}

/// One evaluated preference for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub omega: Preference,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub used_time_pct: f64,
}

impl ReportRow {
    pub fn front_point(&self) -> FrontPoint {
        FrontPoint {
            error: self.mae,
            used_time_pct: self.used_time_pct,
            omega: self.omega.as_array(),
        }
    }
}

/// Test-split metrics for every preference in `prefs`.
pub fn sweep(
    model: &StemoModel,
    windows: &SplitWindows,
    prefs: &[Preference],
    seed: u64,
    method: &str,
) -> Result<Vec<ReportRow>> {
    prefs
        .iter()
        .map(|omega| {
            let r = evaluate(model, &windows.test, omega, seed).map_err(|e| e.in_stage("evaluation"))?;
            Ok(ReportRow {
                method: method.to_string(),
                omega: *omega,
                mae: r.mae,
                rmse: r.rmse,
                mape: r.mape,
                used_time_pct: r.used_time_pct,
            })
        })
        .collect()
}

/// HV and spacing of one method's non-dominated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub hv: f64,
    pub spacing: f64,
    pub front_size: usize,
    /// Test MAE interpolated along the front at 50% used time.
    pub mae_at_half_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        Self { rows }
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for(&self, method: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method,
                r.omega.accuracy(),
                r.omega.time(),
                r.mae,
                r.rmse,
                r.mape,
                r.used_time_pct
            );
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != REPORT_HEADER {
            return Err(StemoError::Data(format!("report header {:?}, expected {REPORT_HEADER}", header.join(","))));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| StemoError::Data(format!("report row {}: bad number {:?}", k + 1, &rec[i])))
            };
            rows.push(ReportRow {
                method: rec[0].to_string(),
                omega: Preference::new(num(1)?, num(2)?)?,
                mae: num(3)?,
                rmse: num(4)?,
                mape: num(5)?,
                used_time_pct: num(6)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| StemoError::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| e.in_stage("read report"))
    }

    /// Per-method summaries. HV uses one reference for all methods, the
    /// componentwise worst over every row, so values are comparable.
    pub fn summaries(&self) -> Result<Vec<MethodSummary>> {
        let reference = worst_point(self.rows.iter().map(|r| [r.mae, r.used_time_pct]));
        self.methods()
            .into_iter()
            .map(|m| {
                let points: Vec<FrontPoint> = self.rows_for(&m).iter().map(|r| r.front_point()).collect();
                let objs: Vec<[f64; 2]> = points.iter().map(FrontPoint::objectives).collect();
                let front: Vec<FrontPoint> = nondominated(&objs).into_iter().map(|i| points[i]).collect();
                let front_objs: Vec<[f64; 2]> = front.iter().map(FrontPoint::objectives).collect();
                Ok(MethodSummary {
                    hv: hypervolume_2d(&front_objs, reference)?,
                    spacing: spacing(&front_objs)?,
                    front_size: front.len(),
                    mae_at_half_time: error_at_used_time(&front, 50.0).unwrap_or(f64::NAN),
                    method: m,
                })
            })
            .collect()
    }

    pub fn summary_text(&self) -> Result<String> {
        let mut s = String::from("{\n");
        let summaries = self.summaries()?;
        for (i, m) in summaries.iter().enumerate() {
            let comma = if i + 1 < summaries.len() { "," } else { "" };
            let _ = writeln!(
                s,
                "  \"{}\": {{\"hv\": {}, \"spacing\": {}, \"front_size\": {}, \"mae_at_50pct\": {}}}{comma}",
                m.method, m.hv, m.spacing, m.front_size, m.mae_at_half_time
            );
        }
        s.push_str("}\n");
        Ok(s)
    }
}

/// A method's error at a target used time.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub method: String,
    pub target_pct: f64,
    pub mae: f64,
    /// Every evaluation that went into the estimate.
    pub evaluated: Vec<ReportRow>,
}

/// Error at `target_pct` used time. A fixed policy is evaluated once. A
/// learned policy starts from `initial` (usually the sweep), bisects on
/// `ω_acc` between the two preferences that bracket the target, and
/// interpolates along the non-dominated points found.
pub fn operating_point(
    model: &StemoModel,
    windows: &SplitWindows,
    initial: &[ReportRow],
    target_pct: f64,
    refinements: usize,
    seed: u64,
    method: &str,
) -> Result<OperatingPoint> {
    let mut evaluated: Vec<ReportRow> = initial.to_vec();
    if model.ablation.fixed_policy.is_none() {
        for _ in 0..refinements {
            let mut by_acc = evaluated.clone();
            by_acc.sort_by(|a, b| a.omega.accuracy().total_cmp(&b.omega.accuracy()));
            let bracket = by_acc
                .windows(2)
                .find(|w| (w[0].used_time_pct - target_pct) * (w[1].used_time_pct - target_pct) < 0.0);
            let Some(w) = bracket else { break };
            let mid = 0.5 * (w[0].omega.accuracy() + w[1].omega.accuracy());
            let omega = Preference::new(mid, 1.0 - mid)?;
            evaluated.extend(sweep(model, windows, &[omega], seed, method)?);
        }
    } else if evaluated.is_empty() {
        evaluated = sweep(model, windows, &[Preference::new(0.5, 0.5)?], seed, method)?;
    }
    let points: Vec<FrontPoint> = evaluated.iter().map(ReportRow::front_point).collect();
    let objs: Vec<[f64; 2]> = points.iter().map(FrontPoint::objectives).collect();
    let front: Vec<FrontPoint> = nondominated(&objs).into_iter().map(|i| points[i]).collect();
    let mae = error_at_used_time(&front, target_pct)
        .ok_or_else(|| StemoError::Numeric(format!("{method}: nothing evaluated")))?;
    Ok(OperatingPoint {
        method: method.to_string(),
        target_pct,
        mae,
        evaluated,
    })
}

/// Test MAE of the historical average and of the trained predictor forced
/// to halt at each listed step.
pub fn baselines(model: &StemoModel, prep: &Prepared, taus: &[usize], seed: u64) -> Result<Vec<ReportRow>> {
    let omega = Preference::new(0.5, 0.5)?;
    let mut rows = vec![ha_row(prep)?];
    for &tau in taus {
        let r = evaluate_mode(model, &prep.windows.test, &omega, EpisodeMode::Fixed(tau), seed)
            .map_err(|e| e.in_stage("fixed-time baseline"))?;
        rows.push(ReportRow {
            method: format!("fixed_{tau}"),
            omega,
            mae: r.mae,
            rmse: r.rmse,
            mape: r.mape,
            used_time_pct: r.used_time_pct,
        });
    }
    Ok(rows)
}

/// Historical average over one day, fitted on the training rows and scored
/// on each test window's target frame.
pub fn ha_row(prep: &Prepared) -> Result<ReportRow> {
    let ds = &prep.dataset;
    let train = prep.windows.splits.train.clone();
    let by_node: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.values[train.clone()].iter().map(|r| r[i]).collect()).collect();
    let ha = HistoricalAverage::fit(&by_node, train.start, ds.period()).map_err(|e| e.in_stage("historical average"))?;
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for w in &prep.windows.test {
        pred.extend(ha.predict(w.end() - 1));
        truth.extend(w.raw[w.len() - 1].iter().copied());
    }
    Ok(ReportRow {
        method: "ha".into(),
        omega: Preference::new(0.5, 0.5)?,
        mae: mae(&pred, &truth)?,
        rmse: rmse(&pred, &truth)?,
        mape: mape(&pred, &truth)?.percent,
        used_time_pct: 0.0,
    })
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    pub report_path: PathBuf,
    pub summary_path: PathBuf,
    pub log_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub model: StemoModel,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| StemoError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| StemoError::io(dir, e))
}

/// Trains, sweeps the test split over `ω = (k/10, 1 - k/10)` and writes
/// `config.txt`, `report.csv`, `summary.txt`, `baselines.csv`,
/// `train_log.csv` and `model.ckpt` into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    ensure_dir(out)?;
    write(&out.join("config.txt"), &cfg.to_text())?;
    let prep = load_and_prepare(cfg)?;
    let (model, log) = train_model(cfg, &prep)?;
    let log_path = out.join("train_log.csv");
    log.write(&log_path)?;
    let checkpoint_path = out.join("model.ckpt");
    model.save(&checkpoint_path)?;
    let method = cfg.ablation().label();
    let report = Report::new(sweep(&model, &prep.windows, &Preference::sweep(), cfg.seed, &method)?);
    let report_path = out.join("report.csv");
    write(&report_path, &report.to_csv())?;
    let summary_path = out.join("summary.txt");
    write(&summary_path, &report.summary_text()?)?;
    let mut taus = vec![0, cfg.horizon - 1];
    taus.extend(crate::evalmetrics::fixed_time_grid(cfg.horizon));
    taus.sort_unstable();
    taus.dedup();
    let base = Report::new(baselines(&model, &prep, &taus, cfg.seed)?);
    write(&out.join("baselines.csv"), &base.to_csv())?;
    Ok(ExperimentOutput {
        report,
        report_path,
        summary_path,
        log_path,
        checkpoint_path,
        model,
    })
}

/// Loads a checkpoint written by [`run_experiment`] for `cfg`.
pub fn load_model(cfg: &ExperimentConfig, path: &Path) -> Result<StemoModel> {
    StemoModel::load(path, cfg.model_config(), cfg.ablation()).map_err(|e| e.in_stage("load checkpoint"))
}

/// The variants compared in the ablation study.
pub fn ablation_variants(horizon: usize) -> Vec<Ablation> {
    vec![
        Ablation::default(),
        Ablation {
            no_similarity: true,
            ..Ablation::default()
        },
        Ablation {
            no_embedding: true,
            ..Ablation::default()
        },
        Ablation {
            fixed_policy: Some(horizon / 2),
            ..Ablation::default()
        },
    ]
}

/// Result of [`run_ablations`].
#[derive(Debug, Clone)]
pub struct AblationOutput {
    pub report: Report,
    pub operating_points: Vec<OperatingPoint>,
}

/// Trains every variant on the same data, sweeps preferences and locates
/// each variant's error at 50% used time. Writes `ablation_report.csv`,
/// `ablation_summary.txt` and `operating_points.csv` into `out`.
pub fn run_ablations(cfg: &ExperimentConfig, out: &Path, refinements: usize) -> Result<AblationOutput> {
    cfg.validate()?;
    ensure_dir(out)?;
    let prep = load_and_prepare(cfg)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for ablation in ablation_variants(cfg.horizon) {
        let label = ablation.label();
        let (model, _) = train_variant(cfg, &prep, ablation).map_err(|e| e.in_stage("ablation variant"))?;
        let swept = sweep(&model, &prep.windows, &Preference::sweep(), cfg.seed, &label)?;
        points.push(operating_point(&model, &prep.windows, &swept, 50.0, refinements, cfg.seed, &label)?);
        rows.extend(swept);
    }
    let report = Report::new(rows);
    write(&out.join("ablation_report.csv"), &report.to_csv())?;
    write(&out.join("ablation_summary.txt"), &report.summary_text()?)?;
    let mut s = String::from("method,target_used_time_pct,mae,evaluations\n");
    for p in &points {
        let _ = writeln!(s, "{},{},{},{}", p.method, p.target_pct, p.mae, p.evaluated.len());
    }
    write(&out.join("operating_points.csv"), &s)?;
    Ok(AblationOutput {
        report,
        operating_points: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, a: f64, mae: f64, used: f64) -> ReportRow {
        ReportRow {
            method: method.into(),
            omega: Preference::new(a, 1.0 - a).unwrap(),
            mae,
            rmse: mae,
            mape: 1.0,
            used_time_pct: used,
        }
    }

    #[test]
    fn report_csv_round_trip() {
        let r = Report::new(vec![row("stemo", 0.1, 0.5, 10.0), row("stemo", 0.9, 0.25, 80.0)]);
        let text = r.to_csv();
        assert!(text.starts_with(REPORT_HEADER));
        assert_eq!(Report::parse_csv(&text).unwrap(), r);
        assert!(Report::parse_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn summary_excludes_dominated_rows() {
        let r = Report::new(vec![
            row("m", 0.1, 1.0, 0.0),
            row("m", 0.5, 0.5, 50.0),
            row("m", 0.6, 0.6, 60.0),
            row("m", 0.9, 0.0, 100.0),
        ]);
        let s = &r.summaries().unwrap()[0];
        assert_eq!(s.front_size, 3);
        // reference (1, 100); the end points add no area
        assert!((s.hv - 0.5 * 50.0).abs() < 1e-9);
        assert_eq!(s.mae_at_half_time, 0.5);
        assert!(r.summary_text().unwrap().contains("\"m\": {\"hv\""));
    }
}
