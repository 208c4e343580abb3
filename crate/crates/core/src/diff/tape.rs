use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::shape_err;
use crate::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
const BCE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Var, Var),
    SliceRows(Var, usize),
    PairSum {
        a: Var,
        b: Var,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    SelectCol(Var, usize),
    BceMean {
        probs: Var,
        labels: Vec<f64>,
        mask: Option<Vec<bool>>,
        count: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Inputs always precede outputs, so walking the nodes from last to first
/// is a reverse topological order.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that requires one.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visited: Vec<usize>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` did not
    /// influence the loss.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }

    /// Node indices in the order the backward pass processed them.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that is held fixed.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
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

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var], name: &'static str) -> Result<Var> {
        let value = value.check_finite(name)?;
        let rg = self.needs(inputs);
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.record(out, Op::MatMul(a, b), &[a, b], "matmul")
    }

    /// Adds a `1 x c` row to every row of an `r x c` tensor.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err(
                "add_row_bias",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut out = xv.clone();
        let c = xv.cols();
        for row in out.data_mut().chunks_exact_mut(c.max(1)) {
            for (v, b) in row.iter_mut().zip(bv.data()) {
                *v += b;
            }
        }
        self.record(out, Op::AddRowBias(x, bias), &[x, bias], "add_row_bias")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.record(out, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.record(out, Op::Sub(a, b), &[a, b], "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.record(out, Op::Mul(a, b), &[a, b], "mul")
    }

    /// Multiplies by a fixed scalar.
    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * factor);
        self.record(out, Op::Scale(x, factor), &[x], "scale")
    }

    /// Multiplies every entry of `x` by the single entry of the `1 x 1` `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        let sv = self.value(s);
        if sv.shape() != [1, 1] {
            return Err(shape_err(
                "scale_by",
                format!("scalar has shape {:?}", sv.shape()),
            ));
        }
        let factor = sv.data()[0];
        let out = self.value(x).map(|v| v * factor);
        self.record(out, Op::ScaleBy(x, s), &[x, s], "scale_by")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.record(out, Op::Sigmoid(x), &[x], "sigmoid")
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(tanh);
        self.record(out, Op::Tanh(x), &[x], "tanh")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.record(out, Op::Relu(x), &[x], "relu")
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(libm::exp);
        self.record(out, Op::Exp(x), &[x], "exp")
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= xv.rows() {
                return Err(shape_err(
                    "gather_rows",
                    format!("row {i} of a {}-row tensor", xv.rows()),
                ));
            }
            data.extend_from_slice(xv.row(i));
        }
        let out = Tensor::from_vec(indices.len(), c, data)?;
        self.record(
            out,
            Op::GatherRows(x, indices.to_vec()),
            &[x],
            "gather_rows",
        )
    }

    /// Joins row `r` of `a` with row `r` of `b`, giving `r x (ca + cb)`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(shape_err(
                "concat_rows",
                format!("{:?} beside {:?}", av.shape(), bv.shape()),
            ));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let out = Tensor::from_vec(av.rows(), cols, data)?;
        self.record(out, Op::ConcatRows(a, b), &[a, b], "concat_rows")
    }

    /// Rows `start .. start + len`.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.rows() || len == 0 {
            return Err(shape_err(
                "slice_rows",
                format!("rows {start}..{} of {:?}", start + len, xv.shape()),
            ));
        }
        let c = xv.cols();
        let out = Tensor::from_vec(len, c, xv.data()[start * c..(start + len) * c].to_vec())?;
        self.record(out, Op::SliceRows(x, start), &[x], "slice_rows")
    }

    /// Row `p` of the output is `a[left[p]] + b[right[p]]`. Equivalent to
    /// gathering both row sets, joining them side by side and multiplying
    /// by a stacked weight matrix, when `a` and `b` are the two halves of
    /// that product.
    pub fn pair_sum(&mut self, a: Var, b: Var, left: &[usize], right: &[usize]) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() || left.len() != right.len() {
            return Err(shape_err(
                "pair_sum",
                format!(
                    "{:?} and {:?} with {} / {} indices",
                    av.shape(),
                    bv.shape(),
                    left.len(),
                    right.len()
                ),
            ));
        }
        if left.iter().any(|&i| i >= av.rows()) || right.iter().any(|&j| j >= bv.rows()) {
            return Err(shape_err("pair_sum", "index out of range".into()));
        }
        let c = av.cols();
        let mut data = Vec::with_capacity(left.len() * c);
        for (&i, &j) in left.iter().zip(right) {
            data.extend(av.row(i).iter().zip(bv.row(j)).map(|(x, y)| x + y));
        }
        let out = Tensor::from_vec(left.len(), c, data)?;
        let op = Op::PairSum {
            a,
            b,
            left: left.to_vec(),
            right: right.to_vec(),
        };
        self.record(out, op, &[a, b], "pair_sum")
    }

    /// Column `col` as an `r x 1` tensor.
    pub fn select_col(&mut self, x: Var, col: usize) -> Result<Var> {
        let xv = self.value(x);
        if col >= xv.cols() {
            return Err(shape_err(
                "select_col",
                format!("column {col} of {:?}", xv.shape()),
            ));
        }
        let data = (0..xv.rows()).map(|r| xv.get(r, col)).collect();
        let out = Tensor::from_vec(xv.rows(), 1, data)?;
        self.record(out, Op::SelectCol(x, col), &[x], "select_col")
    }

    /// Mean binary cross-entropy of probabilities against 0/1 labels,
    /// averaged over the entries where `mask` is true (all entries when no
    /// mask is given). Returns a `1 x 1` tensor.
    pub fn bce_mean(&mut self, probs: Var, labels: &Tensor, mask: Option<&[bool]>) -> Result<Var> {
        let pv = self.value(probs);
        if pv.shape() != labels.shape() {
            return Err(shape_err(
                "bce_mean",
                format!(
                    "probabilities {:?} vs labels {:?}",
                    pv.shape(),
                    labels.shape()
                ),
            ));
        }
        if let Some(m) = mask {
            if m.len() != pv.len() {
                return Err(shape_err(
                    "bce_mean",
                    format!("mask of length {} for {} entries", m.len(), pv.len()),
                ));
            }
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (idx, (&p, &y)) in pv.data().iter().zip(labels.data()).enumerate() {
            if mask.is_some_and(|m| !m[idx]) {
                continue;
            }
            total += bce(p, y);
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidParameter("bce_mean over zero entries".into()));
        }
        let out = Tensor::from_vec(1, 1, vec![total / count as f64])?;
        let op = Op::BceMean {
            probs,
            labels: labels.data().to_vec(),
            mask: mask.map(<[bool]>::to_vec),
            count,
        };
        self.record(out, op, &[probs], "bce_mean")
    }

    /// Reverse pass from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != [1, 1] {
            return Err(shape_err(
                "backward",
                format!("output has shape {:?}", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut visited = Vec::new();
        grads[output.0] = Some(Tensor::filled(1, 1, 1.0));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            visited.push(idx);
            for (input, contribution) in self.local_grads(node, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                let contribution = contribution.check_finite("backward")?;
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn local_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let val = |v: Var| self.value(v);
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut out = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    out.push((*a, g.matmul_t(val(*b))?));
                }
                if wants(*b) {
                    out.push((*b, val(*a).t_matmul(g)?));
                }
            }
            Op::AddRowBias(x, bias) => {
                out.push((*x, g.clone()));
                if wants(*bias) {
                    out.push((*bias, g.sum_rows()));
                }
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.map(|v| -v)));
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    out.push((*a, g.zip_map(val(*b), |x, y| x * y)?));
                }
                if wants(*b) {
                    out.push((*b, g.zip_map(val(*a), |x, y| x * y)?));
                }
            }
            Op::Scale(x, factor) => out.push((*x, g.map(|v| v * factor))),
            Op::ScaleBy(x, s) => {
                let factor = val(*s).data()[0];
                if wants(*x) {
                    out.push((*x, g.map(|v| v * factor)));
                }
                if wants(*s) {
                    let dot: f64 = g
                        .data()
                        .iter()
                        .zip(val(*x).data())
                        .map(|(a, b)| a * b)
                        .sum();
                    out.push((*s, Tensor::filled(1, 1, dot)));
                }
            }
            Op::Sigmoid(x) => {
                out.push((*x, g.zip_map(&node.value, |gv, s| gv * s * (1.0 - s))?));
            }
            Op::Tanh(x) => {
                out.push((*x, g.zip_map(&node.value, |gv, t| gv * (1.0 - t * t))?));
            }
            Op::Relu(x) => {
                out.push((
                    *x,
                    g.zip_map(val(*x), |gv, v| if v > 0.0 { gv } else { 0.0 })?,
                ));
            }
            Op::Exp(x) => {
                out.push((*x, g.zip_map(&node.value, |gv, e| gv * e)?));
            }
            Op::GatherRows(x, indices) => {
                let xv = val(*x);
                let c = xv.cols();
                let mut acc = Tensor::zeros(xv.rows(), c);
                let data = acc.data_mut();
                for (r, &i) in indices.iter().enumerate() {
                    for (d, s) in data[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                out.push((*x, acc));
            }
            Op::ConcatRows(a, b) => {
                let ca = val(*a).cols();
                let cb = val(*b).cols();
                let rows = g.rows();
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                out.push((*a, Tensor::from_vec(rows, ca, ga)?));
                out.push((*b, Tensor::from_vec(rows, cb, gb)?));
            }
            Op::SliceRows(x, start) => {
                let xv = val(*x);
                let c = xv.cols();
                let mut acc = Tensor::zeros(xv.rows(), c);
                acc.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                out.push((*x, acc));
            }
            Op::PairSum { a, b, left, right } => {
                let c = g.cols();
                for (v, idx) in [(*a, left), (*b, right)] {
                    if !wants(v) {
                        continue;
                    }
                    let mut acc = Tensor::zeros(val(v).rows(), c);
                    let data = acc.data_mut();
                    for (r, &i) in idx.iter().enumerate() {
                        for (d, s) in data[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    out.push((v, acc));
                }
            }
            Op::SelectCol(x, col) => {
                let xv = val(*x);
                let mut acc = Tensor::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    acc.set(r, *col, g.get(r, 0));
                }
                out.push((*x, acc));
            }
            Op::BceMean {
                probs,
                labels,
                mask,
                count,
            } => {
                let pv = val(*probs);
                let scale = g.data()[0] / *count as f64;
                let data = pv
                    .data()
                    .iter()
                    .zip(labels)
                    .enumerate()
                    .map(|(idx, (&p, &y))| {
                        if mask.as_ref().is_some_and(|m| !m[idx]) {
                            return 0.0;
                        }
                        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                        scale * (p - y) / (p * (1.0 - p))
                    })
                    .collect();
                out.push((*probs, Tensor::from_vec(pv.rows(), pv.cols(), data)?));
            }
        }
        Ok(out)
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Hyperbolic tangent through a single exponential.
#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    let e = libm::exp(-2.0 * x.abs());
    let t = (1.0 - e) / (1.0 + e);
    if x < 0.0 {
        -t
    } else {
        t
    }
}

/// Binary cross-entropy of one probability against a 0/1 label.
#[inline]
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(1, 1));
        let y = tape.sigmoid(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5]);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.25]);
    }

    #[test]
    fn matmul_shape_rule() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(2, 3));
        let b = tape.param(Tensor::zeros(3, 1));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), [2, 1]);
        assert!(matches!(tape.matmul(b, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(1, 1, 1000.0));
        assert_eq!(tape.exp(x), Err(Error::NonFinite("exp")));
    }

    #[test]
    fn backward_visits_in_reverse_order() {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = tape.param(Tensor::randn(3, 2, 1.0, &mut rng));
        let w = tape.param(Tensor::randn(2, 1, 1.0, &mut rng));
        let h = tape.matmul(x, w).unwrap();
        let t = tape.tanh(h).unwrap();
        let p = tape.sigmoid(t).unwrap();
        let labels = Tensor::from_vec(3, 1, vec![1.0, 0.0, 1.0]).unwrap();
        let loss = tape.bce_mean(p, &labels, None).unwrap();
        let g = tape.backward(loss).unwrap();
        let order = g.visit_order();
        assert!(order.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(order.first(), Some(&loss.index()));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::filled(1, 1, 2.0));
        let b = tape.param(Tensor::filled(1, 1, 3.0));
        let c = tape.mul(a, b).unwrap();
        let g = tape.backward(c).unwrap();
        assert!(g.get(a).is_none());
        assert_eq!(g.get(b).unwrap().data(), &[2.0]);
    }

    #[test]
    fn masked_bce() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::from_vec(1, 2, vec![0.5, 0.9]).unwrap());
        let labels = Tensor::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let loss = tape.bce_mean(p, &labels, Some(&[true, false])).unwrap();
        assert!((tape.value(loss).data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(p).unwrap().data()[1], 0.0);
        assert!(tape.bce_mean(p, &labels, Some(&[false, false])).is_err());
    }
}
