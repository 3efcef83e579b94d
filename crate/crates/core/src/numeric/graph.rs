//! Define-then-run computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in construction order, which is already a topological
//! order: an operation can only reference nodes that exist. Shapes are checked
//! when a node is added, so a malformed graph fails before any arithmetic
//! runs. Leaves (parameters and data) receive values through [`Graph::set`];
//! [`Graph::forward`] evaluates every interior node, and [`Graph::backward`]
//! walks the nodes once in reverse, accumulating gradients for every node,
//! leaves included.

use crate::error::{Error, Result};
use crate::numeric::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulT(NodeId, NodeId),
    Transpose(NodeId),
    /// Same-shape addition, or matrix plus `1×cols` row vector.
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(NodeId, NodeId, Axis),
    /// Output element `i` is `src[index[i]]` (flat row-major), or zero.
    Gather(NodeId, Vec<Option<usize>>),
    /// Row-wise, max-subtracted.
    Softmax(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LeakyRelu(NodeId, f64),
    /// `Σ|x| / len`, a `1×1` output.
    MeanAbs(NodeId),
    Sum(NodeId),
    /// Identity forward, zero gradient.
    StopGradient(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    name: String,
    op: Op,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    values: Vec<Option<Tensor>>,
    grads: Vec<Option<Tensor>>,
    evaluated: bool,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Stabilized softmax of one row, written into `out`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    fn push(&mut self, name: String, op: Op, rows: usize, cols: usize) -> NodeId {
        self.nodes.push(Node {
            name,
            op,
            rows,
            cols,
        });
        self.values.push(None);
        self.grads.push(None);
        self.evaluated = false;
        NodeId(self.nodes.len() - 1)
    }

    fn auto_name(&self, op: &str) -> String {
        format!("{op}#{}", self.nodes.len())
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::graph(
                format!("#{}", id.0),
                "operand does not belong to this graph",
            ));
        }
        Ok(())
    }

    /// Declares a leaf whose value is supplied later with [`Graph::set`].
    pub fn input(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> NodeId {
        self.push(name.into(), Op::Leaf, rows, cols)
    }

    /// Declares a leaf and sets its value immediately.
    pub fn constant(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        let (r, c) = value.shape();
        let id = self.push(name.into(), Op::Leaf, r, c);
        self.values[id.0] = Some(value);
        id
    }

    pub fn set(&mut self, id: NodeId, value: Tensor) -> Result<()> {
        self.check(id)?;
        let node = &self.nodes[id.0];
        if !matches!(node.op, Op::Leaf) {
            return Err(Error::graph(&node.name, "only leaves can be assigned"));
        }
        if value.shape() != (node.rows, node.cols) {
            return Err(Error::graph(
                &node.name,
                format!(
                    "declared {}x{}, given {}x{}",
                    node.rows,
                    node.cols,
                    value.rows(),
                    value.cols()
                ),
            ));
        }
        self.values[id.0] = Some(value);
        self.evaluated = false;
        Ok(())
    }

    /// Mutable access to a leaf's value; invalidates earlier evaluation.
    pub fn leaf_mut(&mut self, id: NodeId) -> Result<&mut Tensor> {
        self.check(id)?;
        if !matches!(self.nodes[id.0].op, Op::Leaf) {
            return Err(Error::graph(
                &self.nodes[id.0].name,
                "only leaves can be assigned",
            ));
        }
        self.evaluated = false;
        let name = &self.nodes[id.0].name;
        self.values[id.0]
            .as_mut()
            .ok_or_else(|| Error::graph(name, "leaf has no value"))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let name = self.auto_name("matmul");
        let ((ar, ac), (br, bc)) = (self.shape(a), self.shape(b));
        if ac != br {
            return Err(Error::graph(
                name,
                format!("{ar}x{ac} · {br}x{bc}: inner dimensions differ"),
            ));
        }
        Ok(self.push(name, Op::MatMul(a, b), ar, bc))
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let name = self.auto_name("matmul_t");
        let ((ar, ac), (br, bc)) = (self.shape(a), self.shape(b));
        if ac != bc {
            return Err(Error::graph(
                name,
                format!("{ar}x{ac} · ({br}x{bc})ᵀ: inner dimensions differ"),
            ));
        }
        Ok(self.push(name, Op::MatMulT(a, b), ar, br))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let name = self.auto_name("transpose");
        let (r, c) = self.shape(a);
        Ok(self.push(name, Op::Transpose(a), c, r))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let name = self.auto_name("add");
        let ((ar, ac), (br, bc)) = (self.shape(a), self.shape(b));
        let ok = (ar, ac) == (br, bc) || (br == 1 && bc == ac);
        if !ok {
            return Err(Error::graph(
                name,
                format!("cannot add {br}x{bc} to {ar}x{ac}"),
            ));
        }
        Ok(self.push(name, Op::Add(a, b), ar, ac))
    }

    fn same_shape(&mut self, op: &str, a: NodeId, b: NodeId) -> Result<(String, usize, usize)> {
        self.check(a)?;
        self.check(b)?;
        let name = self.auto_name(op);
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::graph(
                name,
                format!("operands {}x{} and {}x{} differ", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok((name, sa.0, sa.1))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (name, r, c) = self.same_shape("sub", a, b)?;
        Ok(self.push(name, Op::Sub(a, b), r, c))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (name, r, c) = self.same_shape("mul", a, b)?;
        Ok(self.push(name, Op::Mul(a, b), r, c))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.check(a)?;
        let name = self.auto_name("scale");
        let (r, c) = self.shape(a);
        Ok(self.push(name, Op::Scale(a, factor), r, c))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: Axis) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let name = self.auto_name("concat");
        let ((ar, ac), (br, bc)) = (self.shape(a), self.shape(b));
        let (r, c) = match axis {
            Axis::Cols if ar == br => (ar, ac + bc),
            Axis::Rows if ac == bc => (ar + br, ac),
            _ => {
                return Err(Error::graph(
                    name,
                    format!("cannot concatenate {ar}x{ac} and {br}x{bc} along {axis:?}"),
                ))
            }
        };
        Ok(self.push(name, Op::Concat(a, b, axis), r, c))
    }

    /// Builds a `rows×cols` node whose element `i` is the flat element
    /// `index[i]` of `src`, or zero where the index is `None`.
    pub fn gather(
        &mut self,
        src: NodeId,
        index: Vec<Option<usize>>,
        rows: usize,
        cols: usize,
    ) -> Result<NodeId> {
        self.check(src)?;
        let name = self.auto_name("gather");
        let (sr, sc) = self.shape(src);
        if index.len() != rows * cols {
            return Err(Error::graph(
                name,
                format!("{} indices for a {rows}x{cols} output", index.len()),
            ));
        }
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= sr * sc) {
            return Err(Error::graph(
                name,
                format!("index {bad} out of range for {sr}x{sc} source"),
            ));
        }
        Ok(self.push(name, Op::Gather(src, index), rows, cols))
    }

    /// Selects whole rows of `src`, in the given order.
    pub fn select_rows(&mut self, src: NodeId, rows: &[usize]) -> Result<NodeId> {
        self.check(src)?;
        let cols = self.shape(src).1;
        let index = rows
            .iter()
            .flat_map(|&r| (0..cols).map(move |c| Some(r * cols + c)))
            .collect();
        self.gather(src, index, rows.len(), cols)
    }

    /// Selects the column block `start..end` of `src`.
    pub fn slice_cols(&mut self, src: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.check(src)?;
        let (r, c) = self.shape(src);
        if start > end || end > c {
            return Err(Error::graph(
                self.auto_name("gather"),
                format!("column range {start}..{end} out of 0..{c}"),
            ));
        }
        let width = end - start;
        let index = (0..r)
            .flat_map(|i| (start..end).map(move |j| Some(i * c + j)))
            .collect();
        self.gather(src, index, r, width)
    }

    fn unary(&mut self, op: &str, a: NodeId, make: impl FnOnce(NodeId) -> Op) -> Result<NodeId> {
        self.check(a)?;
        let name = self.auto_name(op);
        let (r, c) = self.shape(a);
        Ok(self.push(name, make(a), r, c))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("softmax", a, Op::Softmax)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("sigmoid", a, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("tanh", a, Op::Tanh)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        self.unary("leaky_relu", a, |a| Op::LeakyRelu(a, slope))
    }

    pub fn mean_abs(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let name = self.auto_name("mean_abs");
        if self.shape(a).0 * self.shape(a).1 == 0 {
            return Err(Error::graph(name, "mean of an empty tensor"));
        }
        Ok(self.push(name, Op::MeanAbs(a), 1, 1))
    }

    /// Passes `a` through unchanged but blocks gradient flow into it.
    pub fn stop_gradient(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary("stop_gradient", a, Op::StopGradient)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        let name = self.auto_name("sum");
        Ok(self.push(name, Op::Sum(a), 1, 1))
    }

    fn val(&self, id: NodeId) -> &Tensor {
        self.values[id.0]
            .as_ref()
            .expect("operands are evaluated before their consumers")
    }

    /// Evaluates every interior node. All leaves must have values.
    pub fn forward(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            let value = match &node.op {
                Op::Leaf => {
                    if self.values[i].is_none() {
                        return Err(Error::graph(&node.name, "leaf has no value"));
                    }
                    continue;
                }
                Op::MatMul(a, b) => self.val(*a).matmul_unchecked(self.val(*b)),
                Op::MatMulT(a, b) => self.val(*a).matmul_t(self.val(*b)),
                Op::Transpose(a) => self.val(*a).transpose(),
                Op::Add(a, b) => {
                    let (x, y) = (self.val(*a), self.val(*b));
                    let mut out = x.clone();
                    if y.shape() == x.shape() {
                        out.add_assign(y);
                    } else {
                        for r in 0..out.rows() {
                            for (o, &v) in out.row_mut(r).iter_mut().zip(y.data()) {
                                *o += v;
                            }
                        }
                    }
                    out
                }
                Op::Sub(a, b) => {
                    let (x, y) = (self.val(*a), self.val(*b));
                    let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
                    Tensor::from_vec(x.rows(), x.cols(), data)?
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.val(*a), self.val(*b));
                    let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
                    Tensor::from_vec(x.rows(), x.cols(), data)?
                }
                Op::Scale(a, f) => {
                    let f = *f;
                    self.val(*a).map(|v| v * f)
                }
                Op::Concat(a, b, axis) => {
                    let (x, y) = (self.val(*a), self.val(*b));
                    concat(x, y, *axis)
                }
                Op::Gather(src, index) => {
                    let s = self.val(*src).data();
                    let data = index.iter().map(|i| i.map_or(0.0, |i| s[i])).collect();
                    Tensor::from_vec(node.rows, node.cols, data)?
                }
                Op::Softmax(a) => {
                    let x = self.val(*a);
                    let mut out = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        softmax_into(x.row(r), out.row_mut(r));
                    }
                    out
                }
                Op::Sigmoid(a) => self.val(*a).map(sigmoid),
                Op::Tanh(a) => self.val(*a).map(f64::tanh),
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    self.val(*a).map(|v| leaky_relu(v, s))
                }
                Op::MeanAbs(a) => {
                    let x = self.val(*a);
                    let mut acc = 0.0;
                    for v in x.data() {
                        acc += v.abs();
                    }
                    Tensor::scalar(acc / x.len() as f64)
                }
                Op::Sum(a) => {
                    let mut acc = 0.0;
                    for v in self.val(*a).data() {
                        acc += v;
                    }
                    Tensor::scalar(acc)
                }
                Op::StopGradient(a) => self.val(*a).clone(),
            };
            self.values[i] = Some(value);
        }
        self.evaluated = true;
        Ok(())
    }

    /// Sets the given leaves and evaluates, returning the requested outputs.
    pub fn run(&mut self, inputs: Vec<(NodeId, Tensor)>, outputs: &[NodeId]) -> Result<Vec<Tensor>> {
        for (id, t) in inputs {
            self.set(id, t)?;
        }
        self.forward()?;
        outputs.iter().map(|&o| self.value(o).cloned()).collect()
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        self.check(id)?;
        self.values[id.0]
            .as_ref()
            .ok_or_else(|| Error::State(format!("node `{}` has not been evaluated", self.name(id))))
    }

    pub fn is_evaluated(&self) -> bool {
        self.evaluated
    }

    /// Propagates `cotangent` from `output` back to every node.
    pub fn backward(&mut self, output: NodeId, cotangent: Tensor) -> Result<()> {
        self.check(output)?;
        if !self.evaluated {
            return Err(Error::State(
                "backward called before forward".to_string(),
            ));
        }
        if cotangent.shape() != self.shape(output) {
            return Err(Error::graph(
                self.name(output),
                format!(
                    "cotangent is {}x{}, output is {}x{}",
                    cotangent.rows(),
                    cotangent.cols(),
                    self.shape(output).0,
                    self.shape(output).1
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(cotangent);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.val(*b));
                    let gb = self.val(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    // c = a bᵀ: da = g b, db = gᵀ a
                    let ga = g.matmul_unchecked(self.val(*b));
                    let gb = g.t_matmul(self.val(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    let bshape = self.shape(*b);
                    let gb = if bshape == g.shape() {
                        g.clone()
                    } else {
                        let mut col = Tensor::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (c, &v) in col.data_mut().iter_mut().zip(g.row(r)) {
                                *c += v;
                            }
                        }
                        col
                    };
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, gb);
                }
                Op::Sub(a, b) => {
                    let gb = g.map(|v| -v);
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, gb);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.val(*a), self.val(*b));
                    let ga = zip_map(&g, y, |gv, yv| gv * yv);
                    let gb = zip_map(&g, x, |gv, xv| gv * xv);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => {
                    let f = *f;
                    accumulate(&mut grads, *a, g.map(|v| v * f));
                }
                Op::Concat(a, b, axis) => {
                    let (ga, gb) = split(&g, self.shape(*a), *axis);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Gather(src, index) => {
                    let (r, c) = self.shape(*src);
                    let mut gs = Tensor::zeros(r, c);
                    let gsd = gs.data_mut();
                    for (gi, idx) in g.data().iter().zip(index) {
                        if let Some(j) = idx {
                            gsd[*j] += gi;
                        }
                    }
                    accumulate(&mut grads, *src, gs);
                }
                Op::Softmax(a) => {
                    let y = self.values[i].as_ref().expect("evaluated");
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let mut dot = 0.0;
                        for (yv, gv) in yr.iter().zip(gr) {
                            dot += yv * gv;
                        }
                        for ((o, yv), gv) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = self.values[i].as_ref().expect("evaluated");
                    let ga = zip_map(&g, y, |gv, yv| gv * yv * (1.0 - yv));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = self.values[i].as_ref().expect("evaluated");
                    let ga = zip_map(&g, y, |gv, yv| gv * (1.0 - yv * yv));
                    accumulate(&mut grads, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    let ga = zip_map(&g, self.val(*a), |gv, xv| if xv > 0.0 { gv } else { gv * s });
                    accumulate(&mut grads, *a, ga);
                }
                Op::MeanAbs(a) => {
                    let x = self.val(*a);
                    let scale = g.data()[0] / x.len() as f64;
                    let ga = x.map(|v| {
                        if v > 0.0 {
                            scale
                        } else if v < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    let v = g.data()[0];
                    accumulate(&mut grads, *a, Tensor::from_vec(r, c, vec![v; r * c])?);
                }
                Op::StopGradient(_) => {}
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Backward from a `1×1` output with unit cotangent.
    pub fn backward_scalar(&mut self, output: NodeId) -> Result<()> {
        if self.shape(output) != (1, 1) {
            let (r, c) = self.shape(output);
            return Err(Error::Contract(format!(
                "loss node `{}` is {r}x{c}, expected a scalar",
                self.name(output)
            )));
        }
        self.backward(output, Tensor::scalar(1.0))
    }

    /// Gradient of the last backward output with respect to `id`; zeros when
    /// the node does not influence that output.
    pub fn grad(&self, id: NodeId) -> Result<Tensor> {
        self.check(id)?;
        Ok(match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shape(id);
                Tensor::zeros(r, c)
            }
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn concat(x: &Tensor, y: &Tensor, axis: Axis) -> Tensor {
    match axis {
        Axis::Rows => {
            let mut data = x.data().to_vec();
            data.extend_from_slice(y.data());
            Tensor::from_vec(x.rows() + y.rows(), x.cols(), data).expect("checked at build")
        }
        Axis::Cols => {
            let mut data = Vec::with_capacity(x.len() + y.len());
            for r in 0..x.rows() {
                data.extend_from_slice(x.row(r));
                data.extend_from_slice(y.row(r));
            }
            Tensor::from_vec(x.rows(), x.cols() + y.cols(), data).expect("checked at build")
        }
    }
}

fn split(g: &Tensor, a_shape: (usize, usize), axis: Axis) -> (Tensor, Tensor) {
    match axis {
        Axis::Rows => {
            let cut = a_shape.0 * g.cols();
            let (ga, gb) = g.data().split_at(cut);
            (
                Tensor::from_vec(a_shape.0, g.cols(), ga.to_vec()).expect("shape"),
                Tensor::from_vec(g.rows() - a_shape.0, g.cols(), gb.to_vec()).expect("shape"),
            )
        }
        Axis::Cols => {
            let ac = a_shape.1;
            let bc = g.cols() - ac;
            let mut ga = Vec::with_capacity(g.rows() * ac);
            let mut gb = Vec::with_capacity(g.rows() * bc);
            for r in 0..g.rows() {
                let row = g.row(r);
                ga.extend_from_slice(&row[..ac]);
                gb.extend_from_slice(&row[ac..]);
            }
            (
                Tensor::from_vec(g.rows(), ac, ga).expect("shape"),
                Tensor::from_vec(g.rows(), bc, gb).expect("shape"),
            )
        }
    }
}
