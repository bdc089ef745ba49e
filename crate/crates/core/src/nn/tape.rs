//! Reverse-mode differentiation over batched matrix values.
//!
//! Every node holds a matrix (rows = batch items). The tape is rebuilt for
//! each forward pass; parameters enter as leaves tagged with a [`ParamId`] so
//! that [`Tape::backward`] can hand back one gradient per parameter.

use std::collections::BTreeMap;

use super::loss::LOG_FLOOR;
use super::matrix::{dot, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Softmax(Var),
    Sum(Var),
    HalfSquaredError(Var, Var),
    KlGaussian(Var, Var),
    CrossEntropy(Var, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, (usize, usize)>,
}

/// Parameter gradients keyed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Matrix>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.by_param.get(&id)
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    /// Gradients in ascending id order.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.by_param.values().map(Matrix::data).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.by_param.keys().copied()
    }

    /// All gradients concatenated in ascending id order.
    pub fn flatten(&self) -> Vec<f64> {
        self.by_param.values().flat_map(|m| m.data().iter().copied()).collect()
    }
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, id: ParamId, value: Matrix) -> Var {
        self.params.insert(id, value.shape());
        self.push(value, Op::Param(id), true)
    }

    /// `x · wᵀ` for `x: B × n`, `w: m × n`.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.cols() != wv.cols() {
            return Err(Error::shape(format!(
                "matmul_t: input {:?} against weights {:?}",
                xv.shape(),
                wv.shape()
            )));
        }
        let mut out = Matrix::zeros(xv.rows(), wv.rows());
        for b in 0..xv.rows() {
            let xr = xv.row(b);
            let orow = out.row_mut(b);
            for (j, o) in orow.iter_mut().enumerate() {
                *o = dot(xr, wv.row(j));
            }
        }
        let rg = self.needs(&[x, w]);
        Ok(self.push(out, Op::MatMulT(x, w), rg))
    }

    /// Adds a `1 × m` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(row));
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return Err(Error::shape(format!(
                "add_row: {:?} plus row {:?}",
                xv.shape(),
                rv.shape()
            )));
        }
        let mut out = xv.clone();
        for b in 0..out.rows() {
            for (o, r) in out.row_mut(b).iter_mut().zip(rv.data()) {
                *o += r;
            }
        }
        let rg = self.needs(&[x, row]);
        Ok(self.push(out, Op::AddRow(x, row), rg))
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let out = Matrix::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|x| f(*x)).collect();
        let out = Matrix::from_vec(av.rows(), av.cols(), data).expect("same shape");
        let rg = self.needs(&[a]);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for b in 0..out.rows() {
            super::loss::softmax_in_place(out.row_mut(b));
        }
        let rg = self.needs(&[a]);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Matrix::row_vector(vec![s]), Op::Sum(a), rg)
    }

    /// `½ Σ (a − b)²`.
    pub fn half_squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "half_squared_error")?;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Matrix::row_vector(vec![0.5 * s]), Op::HalfSquaredError(a, b), rg))
    }

    /// `−½ Σ (1 + logvar − exp(logvar) − μ²)` summed over all rows.
    pub fn kl_gaussian(&mut self, mu: Var, logvar: Var) -> Result<Var> {
        self.same_shape(mu, logvar, "kl_gaussian")?;
        let s: f64 = self
            .value(mu)
            .data()
            .iter()
            .zip(self.value(logvar).data())
            .map(|(m, lv)| 1.0 + lv - lv.exp() - m * m)
            .sum();
        let rg = self.needs(&[mu, logvar]);
        Ok(self.push(Matrix::row_vector(vec![-0.5 * s]), Op::KlGaussian(mu, logvar), rg))
    }

    /// `Σ_b −log(max(p[b, y_b], ε))` over a row-stochastic `probs`.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize]) -> Result<Var> {
        let pv = self.value(probs);
        if labels.len() != pv.rows() {
            return Err(Error::shape(format!(
                "cross_entropy: {} labels for {} rows",
                labels.len(),
                pv.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= pv.cols()) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} classes",
                pv.cols()
            )));
        }
        let s: f64 = labels
            .iter()
            .enumerate()
            .map(|(b, &y)| -pv.get(b, y).max(LOG_FLOOR).ln())
            .sum();
        let rg = self.needs(&[probs]);
        Ok(self.push(
            Matrix::row_vector(vec![s]),
            Op::CrossEntropy(probs, labels.to_vec()),
            rg,
        ))
    }

    /// Active/inactive pattern of every relu input, in tape order.
    ///
    /// Two evaluations share a pattern iff no relu crossed its kink between
    /// them, which is what the gradient checker uses to skip coordinates.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                out.extend(self.value(a).data().iter().map(|&x| x > 0.0));
            }
        }
        out
    }

    /// Reverse pass from a `1 × 1` loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::invalid("backward called on a node that was never recorded"));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }

        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::row_vector(vec![1.0]));
        let mut by_param: BTreeMap<ParamId, Matrix> = self
            .params
            .iter()
            .map(|(&id, &(r, c))| (id, Matrix::zeros(r, c)))
            .collect();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => accumulate_into(by_param.get_mut(id).expect("registered"), &g),
                Op::MatMulT(x, w) => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    if self.nodes[x.0].requires_grad {
                        let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                        for b in 0..xv.rows() {
                            let drow = dx.row_mut(b);
                            for (j, &gj) in g.row(b).iter().enumerate() {
                                if gj != 0.0 {
                                    for (d, wji) in drow.iter_mut().zip(wv.row(j)) {
                                        *d += gj * wji;
                                    }
                                }
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                    if self.nodes[w.0].requires_grad {
                        let mut dw = Matrix::zeros(wv.rows(), wv.cols());
                        for b in 0..xv.rows() {
                            let xr = xv.row(b);
                            for (j, &gj) in g.row(b).iter().enumerate() {
                                if gj != 0.0 {
                                    for (d, xi) in dw.row_mut(j).iter_mut().zip(xr) {
                                        *d += gj * xi;
                                    }
                                }
                            }
                        }
                        accumulate(&mut grads, *w, dw);
                    }
                }
                Op::AddRow(x, row) => {
                    let mut dr = Matrix::zeros(1, g.cols());
                    for b in 0..g.rows() {
                        for (d, v) in dr.data_mut().iter_mut().zip(g.row(b)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *row, dr);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, map(&g, |v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads, *a, zip(&g, bv, |gv, y| gv * y));
                    accumulate(&mut grads, *b, zip(&g, av, |gv, x| gv * x));
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, map(&g, |v| v * s)),
                Op::Relu(a) => {
                    let d = zip(&g, self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = zip(&g, &node.value, |gv, y| gv * (1.0 - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Exp(a) => {
                    let d = zip(&g, &node.value, |gv, y| gv * y);
                    accumulate(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for b in 0..y.rows() {
                        let inner = dot(g.row(b), y.row(b));
                        for ((dv, gv), yv) in d.row_mut(b).iter_mut().zip(g.row(b)).zip(y.row(b)) {
                            *dv = yv * (gv - inner);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Matrix::from_vec(r, c, vec![s; r * c])?);
                }
                Op::HalfSquaredError(a, b) => {
                    let s = g.data()[0];
                    let diff = zip(self.value(*a), self.value(*b), |x, y| s * (x - y));
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, *b, map(&diff, |v| -v));
                    }
                    accumulate(&mut grads, *a, diff);
                }
                Op::KlGaussian(mu, lv) => {
                    let s = g.data()[0];
                    accumulate(&mut grads, *mu, map(self.value(*mu), |m| s * m));
                    accumulate(&mut grads, *lv, map(self.value(*lv), |l| s * 0.5 * (l.exp() - 1.0)));
                }
                Op::CrossEntropy(p, labels) => {
                    let s = g.data()[0];
                    let pv = self.value(*p);
                    let mut d = Matrix::zeros(pv.rows(), pv.cols());
                    for (b, &y) in labels.iter().enumerate() {
                        let pb = pv.get(b, y);
                        if pb > LOG_FLOOR {
                            d.set(b, y, -s / pb);
                        }
                    }
                    accumulate(&mut grads, *p, d);
                }
            }
        }

        Ok(Gradients { by_param })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => accumulate_into(existing, &g),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_into(dst: &mut Matrix, g: &Matrix) {
    for (d, v) in dst.data_mut().iter_mut().zip(g.data()) {
        *d += v;
    }
}

fn map(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let data = m.data().iter().map(|v| f(*v)).collect();
    Matrix::from_vec(m.rows(), m.cols(), data).expect("same shape")
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}
