//! Forecast error metrics, two-objective front metrics and reference baselines.
//!
//! Both front objectives are minimized: forecast error and average used-time
//! percentage. Hypervolume is measured toward the componentwise-worst
//! reference point, so higher is still better.

use crate::error::{Result, StemoError};

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(StemoError::Input("metric on empty input".into()));
    }
    if pred.len() != truth.len() {
        return Err(StemoError::Input(format!(
            "prediction length {} vs truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// MAPE in percent over entries with `|truth| >= 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    pub skipped: usize,
}

pub fn mape(pred: &[f64], truth: &[f64]) -> Result<Mape> {
    check_pair(pred, truth)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if t.abs() < 1e-8 {
            continue;
        }
        total += ((p - t) / t).abs();
        used += 1;
    }
    let percent = if used == 0 { 0.0 } else { 100.0 * total / used as f64 };
    Ok(Mape {
        percent,
        skipped: pred.len() - used,
    })
}

/// `(100 / n) Σ t*_i / T`.
pub fn used_time_pct(halt_times: &[usize], horizon: usize) -> f64 {
    if halt_times.is_empty() {
        return 0.0;
    }
    100.0 * halt_times.iter().sum::<usize>() as f64 / (halt_times.len() * horizon) as f64
}

/// One evaluated operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontPoint {
    pub error: f64,
    pub used_time_pct: f64,
    pub omega: [f64; 2],
}

impl FrontPoint {
    pub fn objectives(&self) -> [f64; 2] {
        [self.error, self.used_time_pct]
    }
}

fn dominates(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Indices of points not dominated by any other point.
pub fn nondominated(points: &[[f64; 2]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(*q, points[i])))
        .collect()
}

/// Evaluated points plus the reference used for hypervolume.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
    pub reference: [f64; 2],
}

impl ParetoFront {
    /// Reference is the componentwise worst of the given points.
    pub fn with_worst_reference(points: Vec<FrontPoint>) -> Self {
        let reference = worst_point(points.iter().map(FrontPoint::objectives));
        Self { points, reference }
    }

    pub fn objectives(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(FrontPoint::objectives).collect()
    }

    /// Non-dominated subset.
    pub fn front(&self) -> Vec<FrontPoint> {
        let objs = self.objectives();
        nondominated(&objs).into_iter().map(|i| self.points[i]).collect()
    }
}

pub fn worst_point(points: impl IntoIterator<Item = [f64; 2]>) -> [f64; 2] {
    points.into_iter().fold([f64::NEG_INFINITY; 2], |acc, p| [acc[0].max(p[0]), acc[1].max(p[1])])
}

/// Area dominated by the non-dominated points inside the reference box.
pub fn hypervolume(front: &ParetoFront) -> Result<f64> {
    hypervolume_2d(&front.objectives(), front.reference)
}

/// Sweep over points sorted by the first objective.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> Result<f64> {
    let outside: Vec<String> = points
        .iter()
        .filter(|p| p[0] > reference[0] || p[1] > reference[1])
        .map(|p| format!("({}, {})", p[0], p[1]))
        .collect();
    if !outside.is_empty() {
        return Err(StemoError::Input(format!(
            "points outside reference ({}, {}): {}",
            reference[0],
            reference[1],
            outside.join(", ")
        )));
    }
    let mut pts: Vec<[f64; 2]> = nondominated(points).into_iter().map(|i| points[i]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(area)
}

/// Standard deviation of nearest-neighbour distances (with `|Φ| - 1` in the denominator).
pub fn spacing(points: &[[f64; 2]]) -> Result<f64> {
    let m = points.len();
    if m < 2 {
        return Err(StemoError::Input(format!("spacing needs at least 2 points, got {m}")));
    }
    let d: Vec<f64> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / m as f64;
    let ss = d.iter().map(|x| (mean - x).powi(2)).sum::<f64>();
    Ok((ss / (m - 1) as f64).sqrt())
}

/// Per-node, per-slot historical means of a training series.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalAverage {
    pub period: usize,
    /// `slot_means[node][slot]`; `None` for slots never observed.
    pub slot_means: Vec<Vec<Option<f64>>>,
    pub node_means: Vec<f64>,
}

impl HistoricalAverage {
    /// `train[node][k]` is observed at absolute step `start + k`.
    pub fn fit(train: &[Vec<f64>], start: usize, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(StemoError::Input("historical average needs a positive period".into()));
        }
        if train.is_empty() || train.iter().any(Vec::is_empty) {
            return Err(StemoError::Input("historical average needs a nonempty training history".into()));
        }
        let mut slot_means = Vec::with_capacity(train.len());
        let mut node_means = Vec::with_capacity(train.len());
        for series in train {
            let mut sums = vec![0.0; period];
            let mut counts = vec![0usize; period];
            for (k, &v) in series.iter().enumerate() {
                let slot = (start + k) % period;
                sums[slot] += v;
                counts[slot] += 1;
            }
            slot_means.push(
                sums.iter()
                    .zip(&counts)
                    .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                    .collect(),
            );
            node_means.push(series.iter().sum::<f64>() / series.len() as f64);
        }
        Ok(Self {
            period,
            slot_means,
            node_means,
        })
    }

    /// Prediction for every node at absolute step `step`.
    pub fn predict(&self, step: usize) -> Vec<f64> {
        let slot = step % self.period;
        self.slot_means
            .iter()
            .zip(&self.node_means)
            .map(|(slots, &fallback)| slots[slot].unwrap_or(fallback))
            .collect()
    }
}

/// Historical-average predictions for each target step.
pub fn ha_baseline(train: &[Vec<f64>], train_start: usize, period: usize, target_steps: &[usize]) -> Result<Vec<Vec<f64>>> {
    let ha = HistoricalAverage::fit(train, train_start, period)?;
    Ok(target_steps.iter().map(|&s| ha.predict(s)).collect())
}

/// Checks a fixed halt time against the horizon.
pub fn validate_fixed_time(tau: usize, horizon: usize) -> Result<()> {
    if tau >= horizon {
        return Err(StemoError::Input(format!("fixed halt time {tau} outside [0, {}]", horizon - 1)));
    }
    Ok(())
}

/// Fixed halt times at 25/50/75/100% of the horizon, shifted to valid indices.
pub fn fixed_time_grid(horizon: usize) -> Vec<usize> {
    [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|f| ((f * horizon as f64).round() as usize).clamp(1, horizon) - 1)
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Linear interpolation of error at a target used-time percentage.
///
/// Points are sorted by used time; targets outside the covered range take
/// the nearest endpoint's error.
pub fn error_at_used_time(points: &[FrontPoint], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.used_time_pct, p.error)).collect();
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if target <= pts[0].0 {
        return Some(pts[0].1);
    }
    if target >= pts[pts.len() - 1].0 {
        return Some(pts[pts.len() - 1].1);
    }
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if target >= x0 && target <= x1 {
            if x1 == x0 {
                return Some(y0.min(y1));
            }
            return Some(y0 + (y1 - y0) * (target - x0) / (x1 - x0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mae(&x, &x).unwrap(), 0.0);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(mape(&x, &x).unwrap().percent, 0.0);
    }

    #[test]
    fn arithmetic_examples() {
        let pred = [3.0, -4.0];
        let truth = [0.0, 0.0];
        assert_eq!(mae(&pred, &truth).unwrap(), 3.5);
        assert!((rmse(&pred, &truth).unwrap() - 3.5355339).abs() < 1e-6);
        let m = mape(&[3.0, 3.0], &[2.0, 4.0]).unwrap();
        assert!((m.percent - 37.5).abs() < 1e-12);
        assert_eq!(m.skipped, 0);
    }

    #[test]
    fn mape_skips_zero_truth() {
        let m = mape(&[1.0, 3.0], &[0.0, 2.0]).unwrap();
        assert_eq!(m.skipped, 1);
        assert!((m.percent - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_fails() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[], &[]).is_err());
        assert!(mape(&[], &[]).is_err());
    }

    #[test]
    fn hypervolume_cases() {
        assert_eq!(hypervolume_2d(&[[2.0, 3.0]], [5.0, 7.0]).unwrap(), 12.0);
        assert_eq!(hypervolume_2d(&[[5.0, 7.0]], [5.0, 7.0]).unwrap(), 0.0);
        assert_eq!(hypervolume_2d(&[[1.0, 4.0], [3.0, 2.0]], [5.0, 5.0]).unwrap(), 8.0);
        let err = hypervolume_2d(&[[6.0, 1.0]], [5.0, 5.0]).unwrap_err();
        assert!(err.to_string().contains("(6, 1)"));
    }

    #[test]
    fn spacing_cases() {
        assert_eq!(spacing(&[[0.0, 0.0], [3.0, 1.0]]).unwrap(), 0.0);
        assert!(spacing(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap().abs() < 1e-15);
        let s = spacing(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(spacing(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn used_time_extremes() {
        assert_eq!(used_time_pct(&[0, 0, 0], 12), 0.0);
        assert!((used_time_pct(&[11, 11], 12) - 100.0 * 11.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn ha_constant_and_fallback() {
        let ha = HistoricalAverage::fit(&[vec![4.0; 5]], 0, 10).unwrap();
        assert_eq!(ha.predict(2), vec![4.0]);
        // slot 7 never observed in a 5-step history
        assert_eq!(ha.predict(7), vec![4.0]);
        assert!(HistoricalAverage::fit(&[vec![]], 0, 3).is_err());
    }

    #[test]
    fn fixed_grid_and_validation() {
        assert_eq!(fixed_time_grid(12), vec![2, 5, 8, 11]);
        assert!(validate_fixed_time(12, 12).is_err());
        assert!(validate_fixed_time(0, 12).is_ok());
    }

    #[test]
    fn spearman_perfect() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation() {
        let p = |e, u| FrontPoint {
            error: e,
            used_time_pct: u,
            omega: [0.5, 0.5],
        };
        let pts = [p(4.0, 0.0), p(2.0, 40.0), p(1.0, 60.0)];
        assert_eq!(error_at_used_time(&pts, 50.0), Some(1.5));
        assert_eq!(error_at_used_time(&pts, 80.0), Some(1.0));
    }
}
