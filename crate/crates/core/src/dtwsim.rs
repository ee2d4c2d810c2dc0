//! Dynamic time warping over growing prefixes and the multi-timestep
//! similarity tensor built from it.

use crate::error::{Result, StemoError};
use crate::numdiff::Tensor;

#[inline]
fn dp_step(local: f64, up: f64, left: f64, diag: f64) -> f64 {
    local + up.min(left).min(diag)
}

/// Classic DTW with absolute-difference local cost.
pub fn dtw_full(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_banded(a, b, None)
}

/// DTW restricted to a Sakoe-Chiba band of half-width `window` (None = unconstrained).
pub fn dtw_banded(a: &[f64], b: &[f64], window: Option<usize>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(StemoError::Input("dtw needs two nonempty series".into()));
    }
    let (la, lb) = (a.len(), b.len());
    let mut cost = vec![f64::INFINITY; la * lb];
    for r in 0..la {
        for c in 0..lb {
            if window.is_some_and(|w| r.abs_diff(c) > w) {
                continue;
            }
            let local = (a[r] - b[c]).abs();
            cost[r * lb + c] = if r == 0 && c == 0 {
                local
            } else {
                let up = if r > 0 { cost[(r - 1) * lb + c] } else { f64::INFINITY };
                let left = if c > 0 { cost[r * lb + c - 1] } else { f64::INFINITY };
                let diag = if r > 0 && c > 0 { cost[(r - 1) * lb + c - 1] } else { f64::INFINITY };
                dp_step(local, up, left, diag)
            };
        }
    }
    Ok(cost[la * lb - 1])
}

/// Incrementally extended DP matrices for every unordered node pair.
///
/// For pair `(i, j)` with `i < j`, entry `(r, c)` is `DTW(x^i[0..=r], x^j[0..=c])`.
#[derive(Debug, Clone)]
pub struct DtwTables {
    n: usize,
    capacity: usize,
    window: Option<usize>,
    series: Vec<Vec<f64>>,
    tables: Vec<Vec<f64>>,
}

impl DtwTables {
    pub fn new(n: usize, capacity: usize) -> Self {
        Self::with_window(n, capacity, None)
    }

    pub fn with_window(n: usize, capacity: usize, window: Option<usize>) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        Self {
            n,
            capacity,
            window,
            series: vec![Vec::with_capacity(capacity); n],
            tables: vec![vec![f64::INFINITY; capacity * capacity]; pairs],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observed time steps.
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // row-major upper triangle without the diagonal
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Appends one observation per node and fills row and column `t` of every table.
    pub fn extend(&mut self, observations: &[f64]) -> Result<()> {
        if observations.len() != self.n {
            return Err(StemoError::Input(format!(
                "expected {} observations, got {}",
                self.n,
                observations.len()
            )));
        }
        let t = self.len();
        if t >= self.capacity {
            return Err(StemoError::Input(format!("dtw tables full at {} steps", self.capacity)));
        }
        for (s, &x) in self.series.iter_mut().zip(observations) {
            s.push(x);
        }
        let cap = self.capacity;
        let window = self.window;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let p = self.pair_index(i, j);
                let (a, b) = (&self.series[i], &self.series[j]);
                let table = &mut self.tables[p];
                let cell = |table: &Vec<f64>, r: usize, c: usize| table[r * cap + c];
                let fill = |table: &mut Vec<f64>, r: usize, c: usize| {
                    if window.is_some_and(|w| r.abs_diff(c) > w) {
                        table[r * cap + c] = f64::INFINITY;
                        return;
                    }
                    let local = (a[r] - b[c]).abs();
                    let v = if r == 0 && c == 0 {
                        local
                    } else {
                        let up = if r > 0 { cell(table, r - 1, c) } else { f64::INFINITY };
                        let left = if c > 0 { cell(table, r, c - 1) } else { f64::INFINITY };
                        let diag = if r > 0 && c > 0 { cell(table, r - 1, c - 1) } else { f64::INFINITY };
                        dp_step(local, up, left, diag)
                    };
                    table[r * cap + c] = v;
                };
                for c in 0..t {
                    fill(table, t, c);
                }
                for r in 0..t {
                    fill(table, r, t);
                }
                fill(table, t, t);
            }
        }
        Ok(())
    }

    /// `DTW(x^i[0..=t], x^j[0..=t_prime])`; zero when `i == j` and the prefixes coincide.
    pub fn distance(&self, i: usize, j: usize, t: usize, t_prime: usize) -> f64 {
        let cap = self.capacity;
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.tables[self.pair_index(i, j)][t * cap + t_prime],
            std::cmp::Ordering::Greater => self.tables[self.pair_index(j, i)][t_prime * cap + t],
            std::cmp::Ordering::Equal => {
                if t == t_prime {
                    0.0
                } else {
                    let s = &self.series[i];
                    dtw_banded(&s[..=t], &s[..=t_prime], self.window).unwrap_or(f64::INFINITY)
                }
            }
        }
    }
}

/// Stack of similarity matrices `A[t, t']` for `t' ∈ 0..=t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTensor {
    pub t: usize,
    pub kappa: f64,
    /// `slices[t']` is the `n×n` matrix for lag index `t'`.
    pub slices: Vec<Tensor>,
}

impl SimilarityTensor {
    /// All-zero stack, used when the temporal similarity is ablated.
    pub fn zeros(n: usize, t: usize, kappa: f64) -> Self {
        Self {
            t,
            kappa,
            slices: vec![Tensor::zeros(&[n, n]); t + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.slices.first().map_or(0, Tensor::rows)
    }

    pub fn slice(&self, t_prime: usize) -> Result<&Tensor> {
        self.slices.get(t_prime).ok_or_else(|| {
            StemoError::Input(format!("similarity slice {t_prime} missing at t={}", self.t))
        })
    }

    /// `min_{t' ≤ t} A[t, t', j, k]`.
    pub fn min_over_lags(&self, j: usize, k: usize) -> f64 {
        self.slices
            .iter()
            .map(|s| s.at(j, k))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `A[t, t', i, j] = exp(-κ · DTW(x^i[0..=t], x^j[0..=t']))`, zero on the diagonal.
pub fn build_similarity_slice(tables: &DtwTables, t: usize, kappa: f64) -> Result<SimilarityTensor> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(StemoError::Input(format!("kappa must be positive, got {kappa}")));
    }
    if t >= tables.len() {
        return Err(StemoError::Input(format!(
            "tables cover {} steps, slice requested at t={t}",
            tables.len()
        )));
    }
    let n = tables.n();
    let slices = (0..=t)
        .map(|tp| {
            let mut m = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        m.set(i, j, (-kappa * tables.distance(i, j, t, tp)).exp());
                    }
                }
            }
            m
        })
        .collect();
    Ok(SimilarityTensor { t, kappa, slices })
}
