//! Define-by-run reverse-mode differentiation over 2-D tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Nodes are appended in
//! evaluation order, so the node vector is already a topological order and
//! backward is a single reverse sweep.

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_into, Tensor};
use crate::error::{Result, StemoError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    /// `true` when the input is watched for gradients.
    Input(bool),
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    RepeatRows(Var),
    Sigmoid(Var),
    Tanh(Var),
    Abs(Var),
    Square(Var),
    Affine(Var, f64),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    RowSum(Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

/// Ordered record of primitive operations with their forward values.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    grads: Option<Vec<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::matrix(n.rows, n.cols, n.value.clone()).expect("node shape")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Input whose gradient is recorded by [`Tape::backward`].
    pub fn watch(&mut self, t: &Tensor) -> Var {
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Input(true))
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Input(false))
    }

    pub fn input_raw(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Var {
        assert_eq!(rows * cols, values.len(), "input shape");
        self.push(rows, cols, values, Op::Input(false))
    }

    /// Leaf bound to a parameter. Repeated calls for the same id reuse the node.
    ///
    /// A tape must only ever reference parameters from a single store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.param_vars.len() <= id.index() {
            self.param_vars.resize(id.index() + 1, None);
        }
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let t = store.get(id);
        let v = self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Param(id));
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(StemoError::shape(
                "matmul",
                format!("{}x{} · {}x{}", m, k, k2, n),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&self.nodes[a.0].value, &self.nodes[b.0].value, &mut out, m, k, n);
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(StemoError::shape(
                op,
                format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok(sa)
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(r, c, v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(r, c, v, Op::Sub(a, b)))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("hadamard", a, b)?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(r, c, v, Op::Mul(a, b)))
    }

    /// Adds a `1×c` row to every row of an `r×c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        let (rr, rc) = self.shape(row);
        if rr != 1 || rc != c {
            return Err(StemoError::shape(
                "add_row",
                format!("{}x{} + row {}x{}", r, c, rr, rc),
            ));
        }
        let bias = &self.nodes[row.0].value;
        let v = self.nodes[a.0]
            .value
            .chunks(c)
            .flat_map(|chunk| chunk.iter().zip(bias).map(|(x, b)| x + b))
            .collect();
        Ok(self.push(r, c, v, Op::AddRow(a, row)))
    }

    /// Stacks a `1×c` row `rows` times.
    pub fn repeat_rows(&mut self, row: Var, rows: usize) -> Result<Var> {
        let (rr, c) = self.shape(row);
        if rr != 1 {
            return Err(StemoError::shape("repeat_rows", format!("expected 1 row, got {}", rr)));
        }
        let v = self.nodes[row.0].value.repeat(rows);
        Ok(self.push(rows, c, v, Op::RepeatRows(row)))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let (r, c) = self.shape(a);
        let v = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(r, c, v, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        self.unary(a, Op::Affine(a, scale), |x| scale * x + shift)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.affine(a, -1.0, 1.0)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(StemoError::shape("concat", "no inputs"));
        };
        let rows = self.shape(first).0;
        if let Some(bad) = parts.iter().find(|p| self.shape(**p).0 != rows) {
            return Err(StemoError::shape(
                "concat",
                format!("row count {} vs {}", rows, self.shape(*bad).0),
            ));
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut v = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                let n = &self.nodes[p.0];
                v.extend_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
            }
        }
        Ok(self.push(rows, cols, v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(StemoError::shape(
                "slice",
                format!("cols {}..{} of {}x{}", start, start + len, r, c),
            ));
        }
        let src = &self.nodes[a.0].value;
        let v = (0..r)
            .flat_map(|i| src[i * c + start..i * c + start + len].iter().copied())
            .collect();
        Ok(self.push(r, len, v, Op::SliceCols(a, start)))
    }

    /// Per-row sum, `r×c -> r×1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let v = self.nodes[a.0].value.chunks(c).map(|ch| ch.iter().sum()).collect();
        self.push(r, 1, v, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let m = n.value.iter().sum::<f64>() / n.value.len() as f64;
        self.push(1, 1, vec![m], Op::Mean(a))
    }

    /// Reverse sweep from a scalar loss. Parameter gradients are accumulated
    /// into `store`; gradients of every node stay queryable through [`Tape::grad`].
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.grads.is_some() {
            return Err(StemoError::Tape(
                "backward already ran on this tape; record a new forward pass".into(),
            ));
        }
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(StemoError::shape("backward", format!("loss must be 1x1, got {}x{}", r, c)));
        }
        let needs = self.needs_grad();
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .zip(&needs)
            .map(|(n, &k)| if k { vec![0.0; n.value.len()] } else { Vec::new() })
            .collect();
        if !needs[loss.0] {
            self.grads = Some(grads);
            return Ok(());
        }
        grads[loss.0][0] = 1.0;

        for idx in (0..=loss.0).rev() {
            if !needs[idx] {
                continue;
            }
            let g = std::mem::take(&mut grads[idx]);
            if g.iter().all(|&x| x == 0.0) {
                grads[idx] = g;
                continue;
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input(_) => {}
                Op::Param(id) => {
                    let acc = store.get_mut(*id).grad_mut();
                    for (a, &x) in acc.iter_mut().zip(&g) {
                        *a += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    // dA = dC · Bᵀ
                    if needs[a.0] {
                        let ga = &mut grads[a.0];
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    // dB = Aᵀ · dC
                    let gb = &mut grads[b.0];
                    for i in (0..m).filter(|_| needs[b.0]) {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let gbrow = &mut gb[p * n..(p + 1) * n];
                            for (o, &x) in gbrow.iter_mut().zip(grow) {
                                *o += aip * x;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    accumulate(&mut grads[b.0], &g, 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    accumulate(&mut grads[b.0], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    for ((o, &x), &y) in grads[a.0].iter_mut().zip(&g).zip(bv) {
                        *o += x * y;
                    }
                    for ((o, &x), &y) in grads[b.0].iter_mut().zip(&g).zip(av) {
                        *o += x * y;
                    }
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    let c = node.cols;
                    let gr = &mut grads[row.0];
                    for chunk in g.chunks(c) {
                        for (o, &x) in gr.iter_mut().zip(chunk) {
                            *o += x;
                        }
                    }
                }
                Op::RepeatRows(row) => {
                    let c = node.cols;
                    let gr = &mut grads[row.0];
                    for chunk in g.chunks(c) {
                        for (o, &x) in gr.iter_mut().zip(chunk) {
                            *o += x;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = &mut grads[a.0];
                    for ((o, &x), &y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *o += x * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let ga = &mut grads[a.0];
                    for ((o, &x), &y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *o += x * (1.0 - y * y);
                    }
                }
                Op::Abs(a) => {
                    let av = &self.nodes[a.0].value;
                    let ga = &mut grads[a.0];
                    for ((o, &x), &inp) in ga.iter_mut().zip(&g).zip(av) {
                        // subgradient 0 at the kink
                        *o += x * sign(inp);
                    }
                }
                Op::Square(a) => {
                    let av = &self.nodes[a.0].value;
                    let ga = &mut grads[a.0];
                    for ((o, &x), &inp) in ga.iter_mut().zip(&g).zip(av) {
                        *o += 2.0 * x * inp;
                    }
                }
                Op::Affine(a, s) => accumulate(&mut grads[a.0], &g, *s),
                Op::ConcatCols(parts) => {
                    let rows = node.rows;
                    let total = node.cols;
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.nodes[p.0].cols;
                        let gp = &mut grads[p.0];
                        if gp.is_empty() {
                            offset += pc;
                            continue;
                        }
                        for r in 0..rows {
                            for c in 0..pc {
                                gp[r * pc + c] += g[r * total + offset + c];
                            }
                        }
                        offset += pc;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src_cols = self.nodes[a.0].cols;
                    let len = node.cols;
                    let ga = &mut grads[a.0];
                    let rows = if ga.is_empty() { 0 } else { node.rows };
                    for r in 0..rows {
                        for c in 0..len {
                            ga[r * src_cols + start + c] += g[r * len + c];
                        }
                    }
                }
                Op::RowSum(a) => {
                    let c = self.nodes[a.0].cols;
                    let ga = &mut grads[a.0];
                    let rows = if ga.is_empty() { 0 } else { g.len() };
                    for (r, &x) in g.iter().enumerate().take(rows) {
                        for o in &mut ga[r * c..(r + 1) * c] {
                            *o += x;
                        }
                    }
                }
                Op::Sum(a) => {
                    let x = g[0];
                    grads[a.0].iter_mut().for_each(|o| *o += x);
                }
                Op::Mean(a) => {
                    let ga = &mut grads[a.0];
                    let x = g[0] / ga.len().max(1) as f64;
                    ga.iter_mut().for_each(|o| *o += x);
                }
            }
            grads[idx] = g;
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Whether each node depends on a parameter or a watched input.
    fn needs_grad(&self) -> Vec<bool> {
        let mut needs = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let k = match &node.op {
                Op::Input(w) => *w,
                Op::Param(_) => true,
                Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                    needs[a.0] || needs[b.0]
                }
                Op::RepeatRows(a)
                | Op::Sigmoid(a)
                | Op::Tanh(a)
                | Op::Abs(a)
                | Op::Square(a)
                | Op::Affine(a, _)
                | Op::SliceCols(a, _)
                | Op::RowSum(a)
                | Op::Sum(a)
                | Op::Mean(a) => needs[a.0],
                Op::ConcatCols(parts) => parts.iter().any(|p| needs[p.0]),
            };
            needs.push(k);
        }
        needs
    }

    /// Gradient of the last backward's loss with respect to `v`; empty for
    /// nodes that depend on neither a parameter nor a watched input.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.as_ref().map(|g| g[v.0].as_slice())
    }
}

fn accumulate(dst: &mut [f64], src: &[f64], s: f64) {
    for (o, &x) in dst.iter_mut().zip(src) {
        *o += s * x;
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
