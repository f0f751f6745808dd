use std::collections::HashMap;

use super::{Error, Gradients, Group, ParamId, ParamStore, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Constant,
    Param(ParamId),
    MatMul,
    MatVec,
    Add,
    Sub,
    Mul,
    Scale(f64),
    Neg,
    Tanh,
    Sigmoid,
    Relu,
    Softplus,
    Concat,
    Slice { start: usize },
    RowLookup { row: usize },
    Mean,
    Sum,
    AddN,
    SoftmaxCrossEntropy { gold: usize, probs: Vec<f64> },
    GradReverse { lambda: f64 },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul => "matmul",
            Op::MatVec => "matvec",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Neg => "neg",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Relu => "relu",
            Op::Softplus => "softplus",
            Op::Concat => "concat",
            Op::Slice { .. } => "slice",
            Op::RowLookup { .. } => "row_lookup",
            Op::Mean => "mean",
            Op::Sum => "sum",
            Op::AddN => "add_n",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy_with_logits",
            Op::GradReverse { .. } => "grad_reverse",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<Var>,
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    requires_grad: bool,
}

/// Define-by-run computation graph over a borrowed parameter store.
///
/// Nodes are appended in topological order; `backward` walks them in
/// reverse. Parameter gradients are accumulated into a caller-owned
/// [`Gradients`], all other gradients are stored on the node tensors.
#[derive(Debug)]
pub struct Graph<'p> {
    params: &'p ParamStore,
    frozen: Vec<Group>,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph::with_frozen(params, &[])
    }

    /// A graph in which parameters of the `frozen` groups receive no
    /// gradient.
    pub fn with_frozen(params: &'p ParamStore, frozen: &[Group]) -> Self {
        Graph {
            params,
            frozen: frozen.to_vec(),
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input ids of node `v`, for structural checks.
    pub fn inputs_of(&self, v: Var) -> &[Var] {
        &self.nodes[v.0].inputs
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.tensor(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.as_ref().and_then(|t| t.grad())
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>, value: Tensor) -> Result<Var, Error> {
        if !value.values().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { op: op.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let id = Var(self.nodes.len());
        self.nodes.push(Node {
            op,
            inputs,
            value: Some(value),
            requires_grad,
        });
        Ok(id)
    }

    /// Leaf whose gradient is recorded (used for gradient checks).
    pub fn input(&mut self, t: Tensor) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Input,
            inputs: Vec::new(),
            value: Some(t),
            requires_grad: true,
        });
        id
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Constant,
            inputs: Vec::new(),
            value: Some(t),
            requires_grad: false,
        });
        id
    }

    /// Leaf referring to a stored parameter; repeated calls share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let p = self.params.get(id);
        let requires_grad = p.trainable && !self.frozen.contains(&p.group);
        let v = Var(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Param(id),
            inputs: Vec::new(),
            value: None,
            requires_grad,
        });
        self.param_nodes.insert(id, v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), Error> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn unary(&mut self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Result<Var, Error> {
        let x = self.value(a);
        let values = x.values().iter().map(|&v| f(v)).collect();
        let out = Tensor::new(x.shape().to_vec(), values)?;
        self.push(op, vec![a], out)
    }

    fn binary(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Var, Error> {
        self.same_shape(op.name(), a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let values = x.values().iter().zip(y.values()).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor::new(x.shape().to_vec(), values)?;
        self.push(op, vec![a, b], out)
    }

    /// Matrix product of `[m, k]` and `[k, n]` operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: x.shape().to_vec(),
                right: y.shape().to_vec(),
            });
        }
        let (m, k, n) = (x.rows(), x.cols(), y.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let xv = x.values()[i * k + p];
                let yrow = &y.values()[p * n..(p + 1) * n];
                for (o, &yv) in out[i * n..(i + 1) * n].iter_mut().zip(yrow) {
                    *o += xv * yv;
                }
            }
        }
        let out = Tensor::matrix(m, n, out)?;
        self.push(Op::MatMul, vec![a, b], out)
    }

    /// Product of an `[m, k]` matrix with a length-`k` vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, Error> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.rank() != 2 || xt.rank() != 1 || wt.cols() != xt.len() {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                left: wt.shape().to_vec(),
                right: xt.shape().to_vec(),
            });
        }
        let k = wt.cols();
        let xs = xt.values();
        let out: Vec<f64> = wt
            .values()
            .chunks_exact(k)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        self.push(Op::MatVec, vec![w, x], Tensor::vector(out))
    }

    /// `w · x + b`, the dense-layer affine map.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, Error> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.binary(Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.binary(Op::Sub, a, b, |x, y| x - y)
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.binary(Op::Mul, a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, Error> {
        self.unary(Op::Scale(c), a, |x| c * x)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, Error> {
        self.unary(Op::Neg, a, |x| -x)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, Error> {
        self.unary(Op::Tanh, a, f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, Error> {
        self.unary(Op::Sigmoid, a, sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, Error> {
        self.unary(Op::Relu, a, |x| if x > 0.0 { x } else { 0.0 })
    }

    /// `log(1 + exp(x))`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var, Error> {
        self.unary(Op::Softplus, a, softplus)
    }

    /// Concatenation of rank-1 tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, Error> {
        if parts.is_empty() {
            return Err(Error::InvalidShape { shape: vec![0] });
        }
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    left: t.shape().to_vec(),
                    right: vec![t.len()],
                });
            }
            out.extend_from_slice(t.values());
        }
        self.push(Op::Concat, parts.to_vec(), Tensor::vector(out))
    }

    /// Contiguous sub-vector `a[start..start + len]`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, Error> {
        let t = self.value(a);
        if t.rank() != 1 || len == 0 || start + len > t.len() {
            return Err(Error::ShapeMismatch {
                op: "slice",
                left: t.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let out = Tensor::vector(t.values()[start..start + len].to_vec());
        self.push(Op::Slice { start }, vec![a], out)
    }

    /// Row `row` of a matrix, as a vector (embedding gather).
    pub fn row_lookup(&mut self, table: Var, row: usize) -> Result<Var, Error> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(Error::ShapeMismatch {
                op: "row_lookup",
                left: t.shape().to_vec(),
                right: vec![row],
            });
        }
        if row >= t.rows() {
            return Err(Error::IndexOutOfRange {
                op: "row_lookup",
                index: row,
                len: t.rows(),
            });
        }
        let out = Tensor::vector(t.row(row).to_vec());
        self.push(Op::RowLookup { row }, vec![table], out)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, Error> {
        let t = self.value(a);
        let m = t.values().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean, vec![a], Tensor::scalar(m))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, Error> {
        let s = self.value(a).values().iter().sum::<f64>();
        self.push(Op::Sum, vec![a], Tensor::scalar(s))
    }

    /// Element-wise sum of equally shaped tensors.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var, Error> {
        let first = *parts.first().ok_or(Error::InvalidShape { shape: vec![0] })?;
        let mut acc = self.value(first).values().to_vec();
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
            for (a, v) in acc.iter_mut().zip(self.value(p).values()) {
                *a += v;
            }
        }
        let out = Tensor::new(self.value(first).shape().to_vec(), acc)?;
        self.push(Op::AddN, parts.to_vec(), out)
    }

    /// Mean of equally shaped tensors.
    pub fn average(&mut self, parts: &[Var]) -> Result<Var, Error> {
        let s = self.add_n(parts)?;
        self.scale(s, 1.0 / parts.len() as f64)
    }

    /// Negative log-probability of class `gold` under `softmax(logits)`.
    ///
    /// Entries with `mask[i] == false` are treated as `-inf` logits.
    pub fn softmax_cross_entropy_with_logits(
        &mut self,
        logits: Var,
        gold: usize,
        mask: Option<&[bool]>,
    ) -> Result<Var, Error> {
        let t = self.value(logits);
        if t.rank() != 1 {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy_with_logits",
                left: t.shape().to_vec(),
                right: vec![gold],
            });
        }
        let k = t.len();
        if gold >= k {
            return Err(Error::IndexOutOfRange {
                op: "softmax_cross_entropy_with_logits",
                index: gold,
                len: k,
            });
        }
        if let Some(m) = mask {
            if m.len() != k {
                return Err(Error::ShapeMismatch {
                    op: "softmax_cross_entropy_with_logits",
                    left: vec![k],
                    right: vec![m.len()],
                });
            }
            if !m[gold] {
                return Err(Error::MaskedGold { gold });
            }
        }
        let allowed = |i: usize| mask.is_none_or(|m| m[i]);
        let max = (0..k)
            .filter(|&i| allowed(i))
            .map(|i| t.values()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = vec![0.0; k];
        let mut z = 0.0;
        for (i, p) in probs.iter_mut().enumerate() {
            if allowed(i) {
                *p = (t.values()[i] - max).exp();
                z += *p;
            }
        }
        probs.iter_mut().for_each(|p| *p /= z);
        let loss = z.ln() + max - t.values()[gold];
        self.push(
            Op::SoftmaxCrossEntropy { gold, probs },
            vec![logits],
            Tensor::scalar(loss),
        )
    }

    /// Identity in the forward pass; scales the incoming gradient by
    /// `-lambda` in the backward pass.
    pub fn grad_reverse(&mut self, a: Var, lambda: f64) -> Result<Var, Error> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::NegativeLambda(lambda));
        }
        let out = self.value(a).clone();
        self.push(Op::GradReverse { lambda }, vec![a], out)
    }

    /// Back-propagates from the scalar `loss`.
    ///
    /// Intermediate gradients overwrite the node tensors' buffers; parameter
    /// gradients are added to `grads`, so several backward passes sum.
    pub fn backward(&mut self, loss: Var, grads: &mut Gradients) -> Result<(), Error> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(loss.0));
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::NotScalar {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        node_grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut node_grads, grads)?;
            node_grads[i] = Some(g);
        }

        for (node, g) in self.nodes.iter_mut().zip(node_grads) {
            if let (Some(t), Some(g)) = (node.value.as_mut(), g) {
                t.set_grad(g);
            }
        }
        Ok(())
    }

    fn propagate(
        &self,
        i: usize,
        g: &[f64],
        node_grads: &mut [Option<Vec<f64>>],
        grads: &mut Gradients,
    ) -> Result<(), Error> {
        let node = &self.nodes[i];
        let inputs = &node.inputs;
        let out = node.value.as_ref().map(|t| t.values());

        // Gradient buffer of input `v`, or `None` when it needs no gradient.
        macro_rules! target {
            ($v:expr) => {{
                let v: Var = $v;
                let n = &self.nodes[v.0];
                if !n.requires_grad {
                    None
                } else {
                    match n.op {
                        Op::Param(id) => Some(grads.buffer_mut(id, self.params.tensor(id).len())),
                        _ => {
                            let len = self.value(v).len();
                            Some(&mut node_grads[v.0].get_or_insert_with(|| vec![0.0; len])[..])
                        }
                    }
                }
            }};
        }

        match &node.op {
            Op::Input | Op::Constant | Op::Param(_) => {}
            Op::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (x, y) = (self.value(a), self.value(b));
                let (m, k, n) = (x.rows(), x.cols(), y.cols());
                if let Some(da) = target!(a) {
                    for r in 0..m {
                        for p in 0..k {
                            let yrow = &y.values()[p * n..(p + 1) * n];
                            da[r * k + p] += g[r * n..(r + 1) * n]
                                .iter()
                                .zip(yrow)
                                .map(|(gv, yv)| gv * yv)
                                .sum::<f64>();
                        }
                    }
                }
                if let Some(db) = target!(b) {
                    for r in 0..m {
                        for p in 0..k {
                            let xv = x.values()[r * k + p];
                            for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(&g[r * n..(r + 1) * n]) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
            }
            Op::MatVec => {
                let (w, x) = (inputs[0], inputs[1]);
                let (wt, xt) = (self.value(w), self.value(x));
                let k = wt.cols();
                if let Some(dw) = target!(w) {
                    for (row, &gv) in dw.chunks_exact_mut(k).zip(g) {
                        if gv != 0.0 {
                            for (d, xv) in row.iter_mut().zip(xt.values()) {
                                *d += gv * xv;
                            }
                        }
                    }
                }
                if let Some(dx) = target!(x) {
                    for (row, &gv) in wt.values().chunks_exact(k).zip(g) {
                        if gv != 0.0 {
                            for (d, wv) in dx.iter_mut().zip(row) {
                                *d += gv * wv;
                            }
                        }
                    }
                }
            }
            Op::Add => {
                for &v in &inputs[..2] {
                    if let Some(d) = target!(v) {
                        d.iter_mut().zip(g).for_each(|(d, gv)| *d += gv);
                    }
                }
            }
            Op::Sub => {
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().zip(g).for_each(|(d, gv)| *d += gv);
                }
                if let Some(d) = target!(inputs[1]) {
                    d.iter_mut().zip(g).for_each(|(d, gv)| *d -= gv);
                }
            }
            Op::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                let xa = self.value(a).values();
                let xb = self.value(b).values();
                if let Some(d) = target!(a) {
                    for ((d, gv), bv) in d.iter_mut().zip(g).zip(xb) {
                        *d += gv * bv;
                    }
                }
                if let Some(d) = target!(b) {
                    for ((d, gv), av) in d.iter_mut().zip(g).zip(xa) {
                        *d += gv * av;
                    }
                }
            }
            Op::Scale(c) => {
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().zip(g).for_each(|(d, gv)| *d += c * gv);
                }
            }
            Op::Neg => {
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().zip(g).for_each(|(d, gv)| *d -= gv);
                }
            }
            Op::Tanh => {
                let y = out.expect("tanh output");
                if let Some(d) = target!(inputs[0]) {
                    for ((d, gv), yv) in d.iter_mut().zip(g).zip(y) {
                        *d += gv * (1.0 - yv * yv);
                    }
                }
            }
            Op::Sigmoid => {
                let y = out.expect("sigmoid output");
                if let Some(d) = target!(inputs[0]) {
                    for ((d, gv), yv) in d.iter_mut().zip(g).zip(y) {
                        *d += gv * yv * (1.0 - yv);
                    }
                }
            }
            Op::Relu => {
                let x = self.value(inputs[0]).values();
                if let Some(d) = target!(inputs[0]) {
                    for ((d, gv), xv) in d.iter_mut().zip(g).zip(x) {
                        if *xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Softplus => {
                let x = self.value(inputs[0]).values();
                if let Some(d) = target!(inputs[0]) {
                    for ((d, gv), xv) in d.iter_mut().zip(g).zip(x) {
                        *d += gv * sigmoid(*xv);
                    }
                }
            }
            Op::Concat => {
                let mut offset = 0;
                for &v in inputs {
                    let len = self.value(v).len();
                    if let Some(d) = target!(v) {
                        d.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, gv)| *d += gv);
                    }
                    offset += len;
                }
            }
            Op::Slice { start } => {
                if let Some(d) = target!(inputs[0]) {
                    d[*start..*start + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, gv)| *d += gv);
                }
            }
            Op::RowLookup { row } => {
                let cols = self.value(inputs[0]).cols();
                if let Some(d) = target!(inputs[0]) {
                    d[row * cols..(row + 1) * cols]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, gv)| *d += gv);
                }
            }
            Op::Mean => {
                let n = self.value(inputs[0]).len() as f64;
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().for_each(|d| *d += g[0] / n);
                }
            }
            Op::Sum => {
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::AddN => {
                for &v in inputs {
                    if let Some(d) = target!(v) {
                        d.iter_mut().zip(g).for_each(|(d, gv)| *d += gv);
                    }
                }
            }
            Op::SoftmaxCrossEntropy { gold, probs } => {
                if let Some(d) = target!(inputs[0]) {
                    for (j, (d, p)) in d.iter_mut().zip(probs).enumerate() {
                        let onehot = if j == *gold { 1.0 } else { 0.0 };
                        *d += g[0] * (p - onehot);
                    }
                }
            }
            Op::GradReverse { lambda } => {
                if let Some(d) = target!(inputs[0]) {
                    d.iter_mut().zip(g).for_each(|(d, gv)| *d += -lambda * gv);
                }
            }
        }
        Ok(())
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

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn store() -> ParamStore {
        ParamStore::new()
    }

    #[test]
    fn matmul_by_hand() {
        let s = store();
        let mut g = Graph::new(&s);
        let a = g.input(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = g.input(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).values(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_op_and_shapes() {
        let s = store();
        let mut g = Graph::new(&s);
        let a = g.input(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let b = g.input(Tensor::matrix(3, 1, vec![0.0; 3]).unwrap());
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul"), "{err}");
        assert!(err.contains("[2, 2]") && err.contains("[3, 1]"), "{err}");
    }

    #[test]
    fn tanh_at_origin() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.0]));
        let y = g.tanh(x).unwrap();
        assert_eq!(g.value(y).values(), &[0.0]);
    }

    #[test]
    fn uniform_softmax_gives_log_k() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.0; 4]));
        let l = g.softmax_cross_entropy_with_logits(x, 2, None).unwrap();
        assert_relative_eq!(g.value(l).item(), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn masked_softmax_ignores_disallowed_classes() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.0, 50.0, 0.0]));
        let mask = [true, false, true];
        let l = g.softmax_cross_entropy_with_logits(x, 0, Some(&mask)).unwrap();
        assert_relative_eq!(g.value(l).item(), 2f64.ln(), epsilon = 1e-15);
        g.backward(l, &mut Gradients::new()).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[-0.5, 0.0, 0.5]);
        assert!(g.softmax_cross_entropy_with_logits(x, 1, Some(&mask)).is_err());
    }

    #[test]
    fn sum_gives_all_ones() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 3.0, 0.0, 1.0]).unwrap());
        let l = g.sum(x).unwrap();
        g.backward(l, &mut Gradients::new()).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn mean_of_squares() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let sq = g.mul(x, x).unwrap();
        let l = g.mean(sq).unwrap();
        g.backward(l, &mut Gradients::new()).unwrap();
        let grad = g.grad(x).unwrap();
        assert_relative_eq!(grad[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(grad[1], 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(grad[2], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn grad_reverse_forward_and_backward() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![1.5, -2.0]));
        let y = g.grad_reverse(x, 0.7).unwrap();
        assert_eq!(g.value(y).values(), &[1.5, -2.0]);

        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.3, 0.4]));
        let r = g.grad_reverse(x, 1.0).unwrap();
        let w = g.constant(Tensor::vector(vec![1.0, 2.0]));
        let p = g.mul(r, w).unwrap();
        let l = g.sum(p).unwrap();
        g.backward(l, &mut Gradients::new()).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[-1.0, -2.0]);

        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.3]));
        let r = g.grad_reverse(x, 0.0).unwrap();
        let w = g.constant(Tensor::vector(vec![4.0]));
        let p = g.mul(r, w).unwrap();
        let l = g.sum(p).unwrap();
        g.backward(l, &mut Gradients::new()).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);

        assert!(matches!(g.grad_reverse(x, -0.1), Err(Error::NegativeLambda(_))));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(
            g.backward(x, &mut Gradients::new()),
            Err(Error::NotScalar { .. })
        ));
    }

    #[test]
    fn params_share_one_node_and_respect_frozen_groups() {
        let mut s = store();
        let w = s.add("w", Group::Discriminator, Tensor::vector(vec![2.0]));
        let v = s.add("v", Group::Generator, Tensor::vector(vec![3.0]));
        let mut g = Graph::with_frozen(&s, &[Group::Discriminator]);
        let a = g.param(w);
        assert_eq!(g.param(w), a);
        let b = g.param(v);
        let p = g.mul(a, b).unwrap();
        let l = g.sum(p).unwrap();
        let mut grads = Gradients::new();
        g.backward(l, &mut grads).unwrap();
        assert!(grads.get(w).is_none());
        assert_eq!(grads.get(v).unwrap(), &[2.0]);
    }

    #[test]
    fn graph_is_topologically_ordered() {
        let s = store();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![1.0, 2.0]));
        let y = g.tanh(x).unwrap();
        let z = g.concat(&[x, y]).unwrap();
        let l = g.mean(z).unwrap();
        for i in 0..=l.index() {
            let v = Var(i);
            assert!(g.inputs_of(v).iter().all(|u| u.index() < i));
        }
    }
}
