//! Reverse-mode differentiation over matrix primitives.
//!
//! A [`Tape`] records primitive applications in topological order; each
//! node caches its primal value. Scalars are carried as 1x1 matrices so
//! every node has a single value type. [`Tape::backward`] walks the tape
//! once in reverse and accumulates adjoints, which makes it possible to
//! differentiate the full estimation pipeline (trace normalization,
//! Newton-Schulz inverses, projected-gradient updates) end to end and to
//! validate the result against central finite differences with
//! [`grad_check`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::mat::Mat;

/// Default step for central finite differences in [`grad_check`].
pub const GRAD_CHECK_H: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations the tape understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    MatMul,
    Transpose,
    Add,
    Sub,
    ScalarMul,
    ScalarDiv,
    ReluElem,
    SigmoidElem,
    Sym,
    Trace,
    FrobNormSq,
    LogDetChol,
    MatVec,
    Dot,
}

impl OpKind {
    fn arity(self) -> usize {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::ScalarMul
            | OpKind::ScalarDiv
            | OpKind::MatVec
            | OpKind::Dot => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Transpose => "transpose",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::ScalarMul => "scalar_mul",
            OpKind::ScalarDiv => "scalar_div",
            OpKind::ReluElem => "relu_elem",
            OpKind::SigmoidElem => "sigmoid_elem",
            OpKind::Sym => "sym",
            OpKind::Trace => "trace",
            OpKind::FrobNormSq => "frob_norm_sq",
            OpKind::LogDetChol => "logdet_chol",
            OpKind::MatVec => "matvec",
            OpKind::Dot => "dot",
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Unary(OpKind, usize),
    Binary(OpKind, usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    val: Mat,
}

/// Recorded computation graph. Parent ids are strictly smaller than the
/// node id, so a single reverse pass visits each node exactly once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn scalar(v: f64) -> Mat {
    let mut m = Mat::zeros(1, 1);
    m[(0, 0)] = v;
    m
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + fm::exp(-x))
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input value and returns its node.
    pub fn leaf(&mut self, m: Mat) -> NodeId {
        self.push(Node { op: Op::Leaf, val: m })
    }

    /// Records a scalar constant as a 1x1 leaf.
    pub fn scalar_leaf(&mut self, v: f64) -> NodeId {
        self.leaf(scalar(v))
    }

    /// Primal value of a node.
    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].val
    }

    /// Scalar primal of a 1x1 node.
    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        let m = self.value(id);
        if m.shape() != (1, 1) {
            return Err(Error::LossNotScalar {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        Ok(m[(0, 0)])
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn check_parent(&self, id: NodeId) -> Result<usize> {
        if id.0 >= self.nodes.len() {
            return Err(Error::NodeOutOfRange {
                id: id.0,
                len: self.nodes.len(),
            });
        }
        Ok(id.0)
    }

    /// Applies a primitive to parent nodes, computing and caching the
    /// primal value.
    pub fn apply(&mut self, op: OpKind, parents: &[NodeId]) -> Result<NodeId> {
        if parents.len() != op.arity() {
            return Err(Error::ArityMismatch {
                op: op.name(),
                expected: op.arity(),
                got: parents.len(),
            });
        }
        for &p in parents {
            self.check_parent(p)?;
        }
        let val = match op {
            OpKind::MatMul => self.value(parents[0]).matmul(self.value(parents[1]))?,
            OpKind::Transpose => self.value(parents[0]).transpose(),
            OpKind::Add => self.value(parents[0]).add(self.value(parents[1]))?,
            OpKind::Sub => self.value(parents[0]).sub(self.value(parents[1]))?,
            OpKind::ScalarMul => {
                let s = self.scalar_value(parents[1])?;
                self.value(parents[0]).mul_scalar(s)
            }
            OpKind::ScalarDiv => {
                let s = self.scalar_value(parents[1])?;
                self.value(parents[0]).div_scalar(s)
            }
            OpKind::ReluElem => self.value(parents[0]).relu_elem(),
            OpKind::SigmoidElem => self.value(parents[0]).map(sigmoid),
            OpKind::Sym => self.value(parents[0]).sym()?,
            OpKind::Trace => scalar(self.value(parents[0]).trace()?),
            OpKind::FrobNormSq => {
                let m = self.value(parents[0]);
                scalar(m.dot(m).expect("same shape"))
            }
            OpKind::LogDetChol => {
                let m = self.value(parents[0]).sym()?;
                scalar(crate::chol::chol_logdet(&m)?)
            }
            OpKind::MatVec => {
                let v = self.value(parents[1]);
                if v.cols() != 1 {
                    return Err(Error::DimMismatch {
                        op: "matvec",
                        lhs: self.value(parents[0]).shape(),
                        rhs: v.shape(),
                    });
                }
                self.value(parents[0]).matmul(v)?
            }
            OpKind::Dot => {
                let a = self.value(parents[0]);
                let b = self.value(parents[1]);
                if a.cols() != 1 || b.cols() != 1 {
                    return Err(Error::DimMismatch {
                        op: "dot",
                        lhs: a.shape(),
                        rhs: b.shape(),
                    });
                }
                scalar(a.dot(b)?)
            }
        };
        let op = match op.arity() {
            1 => Op::Unary(op, parents[0].0),
            _ => Op::Binary(op, parents[0].0, parents[1].0),
        };
        Ok(self.push(Node { op, val }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Transpose, &[a])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn scalar_mul(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        self.apply(OpKind::ScalarMul, &[a, s])
    }

    pub fn scalar_div(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        self.apply(OpKind::ScalarDiv, &[a, s])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::ReluElem, &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::SigmoidElem, &[a])
    }

    pub fn sym(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sym, &[a])
    }

    pub fn trace(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Trace, &[a])
    }

    pub fn frob_norm_sq(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::FrobNormSq, &[a])
    }

    pub fn logdet(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::LogDetChol, &[a])
    }

    pub fn matvec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatVec, &[a, v])
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Dot, &[a, b])
    }

    /// Hash of the sign pattern at every ReLU input on this tape. Two
    /// evaluations whose signatures differ crossed a kink between them,
    /// which invalidates a finite-difference comparison.
    pub fn relu_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for node in &self.nodes {
            if let Op::Unary(OpKind::ReluElem, p) = node.op {
                for &v in self.nodes[p].val.data() {
                    let bit = u64::from(v > 0.0);
                    h = (h ^ bit).wrapping_mul(0x1000_0000_01b3);
                }
            }
        }
        h
    }

    /// Reverse pass from a scalar loss node. Returns the adjoint of every
    /// node reachable from the loss; unreached nodes have no adjoint.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        self.check_parent(loss)?;
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::LossNotScalar {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut adj: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(scalar(1.0));

        for id in (0..=loss.0).rev() {
            let g = match adj[id].take() {
                Some(g) => g,
                None => continue,
            };
            match self.nodes[id].op {
                Op::Leaf => {
                    adj[id] = Some(g);
                    continue;
                }
                Op::Unary(kind, a) => {
                    let contrib = match kind {
                        OpKind::Transpose => g.transpose(),
                        OpKind::ReluElem => {
                            let x = &self.nodes[a].val;
                            Mat::from_fn(x.rows(), x.cols(), |i, j| {
                                if x[(i, j)] > 0.0 {
                                    g[(i, j)]
                                } else {
                                    0.0
                                }
                            })
                        }
                        OpKind::SigmoidElem => {
                            // derivative from the cached output value
                            let out = &self.nodes[id].val;
                            Mat::from_fn(out.rows(), out.cols(), |i, j| {
                                let s = out[(i, j)];
                                g[(i, j)] * s * (1.0 - s)
                            })
                        }
                        OpKind::Sym => g.sym()?,
                        OpKind::Trace => {
                            let d = self.nodes[a].val.rows();
                            Mat::scaled_identity(d, g[(0, 0)])
                        }
                        OpKind::FrobNormSq => self.nodes[a].val.mul_scalar(2.0 * g[(0, 0)]),
                        OpKind::LogDetChol => {
                            let m = self.nodes[a].val.sym()?;
                            crate::chol::chol_inverse(&m)?.mul_scalar(g[(0, 0)])
                        }
                        _ => unreachable!("unary kinds covered"),
                    };
                    accumulate(&mut adj[a], contrib)?;
                    adj[id] = Some(g);
                }
                Op::Binary(kind, a, b) => {
                    match kind {
                        OpKind::MatMul | OpKind::MatVec => {
                            let bt = self.nodes[b].val.transpose();
                            let at = self.nodes[a].val.transpose();
                            accumulate(&mut adj[a], g.matmul(&bt)?)?;
                            accumulate(&mut adj[b], at.matmul(&g)?)?;
                        }
                        OpKind::Add => {
                            accumulate(&mut adj[a], g.clone())?;
                            accumulate(&mut adj[b], g.clone())?;
                        }
                        OpKind::Sub => {
                            accumulate(&mut adj[a], g.clone())?;
                            accumulate(&mut adj[b], g.mul_scalar(-1.0))?;
                        }
                        OpKind::ScalarMul => {
                            let s = self.nodes[b].val[(0, 0)];
                            accumulate(&mut adj[a], g.mul_scalar(s))?;
                            let ds = g.dot(&self.nodes[a].val)?;
                            accumulate(&mut adj[b], scalar(ds))?;
                        }
                        OpKind::ScalarDiv => {
                            let s = self.nodes[b].val[(0, 0)];
                            accumulate(&mut adj[a], g.div_scalar(s))?;
                            let ds = -g.dot(&self.nodes[a].val)? / (s * s);
                            accumulate(&mut adj[b], scalar(ds))?;
                        }
                        OpKind::Dot => {
                            let gv = g[(0, 0)];
                            accumulate(&mut adj[a], self.nodes[b].val.mul_scalar(gv))?;
                            accumulate(&mut adj[b], self.nodes[a].val.mul_scalar(gv))?;
                        }
                        _ => unreachable!("binary kinds covered"),
                    }
                    adj[id] = Some(g);
                }
            }
        }
        Ok(Gradients { adj })
    }
}

fn accumulate(slot: &mut Option<Mat>, contrib: Mat) -> Result<()> {
    match slot {
        Some(existing) => {
            *existing = existing.add(&contrib)?;
        }
        None => *slot = Some(contrib),
    }
    Ok(())
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    adj: Vec<Option<Mat>>,
}

impl Gradients {
    /// Adjoint of a node, or `None` when the loss does not depend on it.
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.adj.get(id.0).and_then(|o| o.as_ref())
    }
}

/// Central finite-difference check of the tape gradient of a scalar
/// function `f` of one matrix input.
///
/// Returns `max_ij |analytic - central difference| / max(1, |analytic|)`.
/// Entries whose `x +- h` evaluations cross a ReLU kink (detected by
/// comparing sign signatures) are excluded from the maximum, as the
/// finite difference is meaningless across a subgradient boundary.
pub fn grad_check<F>(f: &F, x: &Mat, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let x0 = tape.leaf(x.clone());
    let loss = f(&mut tape, x0)?;
    let base = tape.scalar_value(loss)?;
    if !base.is_finite() {
        return Err(Error::NonFinite {
            what: "grad_check loss",
        });
    }
    let grads = tape.backward(loss)?;
    let zero = Mat::zeros(x.rows(), x.cols());
    let g = grads.get(x0).unwrap_or(&zero);

    let mut max_err = 0.0f64;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let mut xp = x.clone();
            xp[(i, j)] += h;
            let (jp, sig_p) = eval_scalar(f, &xp)?;
            let mut xm = x.clone();
            xm[(i, j)] -= h;
            let (jm, sig_m) = eval_scalar(f, &xm)?;
            if sig_p != sig_m {
                continue;
            }
            let fd = (jp - jm) / (2.0 * h);
            let err = fm::abs(g[(i, j)] - fd) / fm::abs(g[(i, j)]).max(1.0);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

fn eval_scalar<F>(f: &F, x: &Mat) -> Result<(f64, u64)>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let x0 = tape.leaf(x.clone());
    let loss = f(&mut tape, x0)?;
    let v = tape.scalar_value(loss)?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            what: "grad_check loss",
        });
    }
    Ok((v, tape.relu_signature()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_mat(r: usize, c: usize, rng: &mut SplitMix64) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.next_range(-1.0, 1.0))
    }

    fn random_spd(d: usize, rng: &mut SplitMix64) -> Mat {
        let a = random_mat(d, d, rng);
        a.matmul(&a.transpose())
            .unwrap()
            .add(&Mat::scaled_identity(d, d as f64))
            .unwrap()
            .sym()
            .unwrap()
    }

    #[test]
    fn record_primal_trivials() {
        let mut tape = Tape::new();
        let i3 = tape.leaf(Mat::identity(3));
        let t = tape.trace(i3).unwrap();
        assert_eq!(tape.scalar_value(t).unwrap(), 3.0);

        let neg = tape.leaf(Mat::scaled_identity(2, -1.0));
        let r = tape.relu(neg).unwrap();
        assert_eq!(tape.value(r), &Mat::zeros(2, 2));
    }

    #[test]
    fn chained_primal_matches_eager() {
        let mut rng = SplitMix64::new(53);
        let a = random_mat(3, 3, &mut rng);
        let b = random_mat(3, 3, &mut rng);
        let eager = a.matmul(&b).unwrap().trace().unwrap();

        let mut tape = Tape::new();
        let na = tape.leaf(a);
        let nb = tape.leaf(b);
        let prod = tape.matmul(na, nb).unwrap();
        let tr = tape.trace(prod).unwrap();
        assert_eq!(tape.scalar_value(tr).unwrap(), eager);
    }

    #[test]
    fn backward_linear_functional() {
        let mut rng = SplitMix64::new(59);
        let s = random_mat(4, 4, &mut rng);
        let mut tape = Tape::new();
        let n = tape.leaf(s);
        let t = tape.trace(n).unwrap();
        let grads = tape.backward(t).unwrap();
        assert_eq!(grads.get(n).unwrap(), &Mat::identity(4));
    }

    #[test]
    fn backward_quadratic() {
        let mut rng = SplitMix64::new(61);
        let s = random_mat(3, 3, &mut rng);
        let mut tape = Tape::new();
        let n = tape.leaf(s.clone());
        let fsq = tape.frob_norm_sq(n).unwrap();
        let grads = tape.backward(fsq).unwrap();
        assert_eq!(grads.get(n).unwrap(), &s.mul_scalar(2.0));
    }

    #[test]
    fn backward_logdet_diagonal() {
        let mut tape = Tape::new();
        let n = tape.leaf(Mat::from_diag(&[2.0, 4.0]));
        let ld = tape.logdet(n).unwrap();
        let grads = tape.backward(ld).unwrap();
        let g = grads.get(n).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((g[(1, 1)] - 0.25).abs() < 1e-14);
        assert!(g[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let n = tape.leaf(Mat::identity(2));
        assert!(matches!(
            tape.backward(n),
            Err(Error::LossNotScalar { .. })
        ));
    }

    #[test]
    fn apply_validates_parents() {
        let mut other = Tape::new();
        let foreign = other.leaf(Mat::identity(2));
        let _ = other.leaf(Mat::identity(2));

        let mut tape = Tape::new();
        assert!(matches!(
            tape.apply(OpKind::Transpose, &[foreign]),
            Err(Error::NodeOutOfRange { .. })
        ));
        let a = tape.leaf(Mat::identity(2));
        assert!(matches!(
            tape.apply(OpKind::MatMul, &[a]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn backward_is_deterministic() {
        let mut rng = SplitMix64::new(67);
        let s = random_spd(5, &mut rng);
        let run = || {
            let mut tape = Tape::new();
            let n = tape.leaf(s.clone());
            let sm = tape.sym(n).unwrap();
            let ld = tape.logdet(sm).unwrap();
            let fsq = tape.frob_norm_sq(n).unwrap();
            let loss = tape.add(ld, fsq).unwrap();
            let grads = tape.backward(loss).unwrap();
            grads.get(n).unwrap().clone()
        };
        let g1 = run();
        let g2 = run();
        for (a, b) in g1.data().iter().zip(g2.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    // One gradient check per primitive, on seeded random inputs. Matrix
    // outputs are scalarized through a fixed linear functional
    // trace(C^T op(X)) so the op's adjoint is exercised in isolation.
    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = SplitMix64::new(71);
        let d = 5;

        type BoxedF = alloc::boxed::Box<dyn Fn(&mut Tape, NodeId) -> Result<NodeId>>;
        let linear = |tape: &mut Tape, c: Mat, y: NodeId| -> Result<NodeId> {
            let cn = tape.leaf(c);
            let ct = tape.transpose(cn)?;
            let prod = tape.matmul(ct, y)?;
            tape.trace(prod)
        };

        let mut cases: Vec<(&'static str, Mat, BoxedF)> = Vec::new();

        let b_const = random_mat(d, d, &mut rng);
        let c_sq = random_mat(d, d, &mut rng);
        cases.push((
            "matmul_lhs",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let b = b_const.clone();
                let c = c_sq.clone();
                move |tape, x| {
                    let bn = tape.leaf(b.clone());
                    let y = tape.matmul(x, bn)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "matmul_rhs",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let a = random_mat(d, d, &mut rng);
                let c = c_sq.clone();
                move |tape, x| {
                    let an = tape.leaf(a.clone());
                    let y = tape.matmul(an, x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "transpose",
            random_mat(d, 3, &mut rng),
            alloc::boxed::Box::new({
                let c = random_mat(3, d, &mut rng);
                move |tape, x| {
                    let y = tape.transpose(x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "add",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let b = random_mat(d, d, &mut rng);
                let c = c_sq.clone();
                move |tape, x| {
                    let bn = tape.leaf(b.clone());
                    let y = tape.add(x, bn)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "sub",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let b = random_mat(d, d, &mut rng);
                let c = c_sq.clone();
                move |tape, x| {
                    let bn = tape.leaf(b.clone());
                    let y = tape.sub(bn, x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "scalar_mul_mat",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let c = c_sq.clone();
                move |tape, x| {
                    let s = tape.scalar_leaf(1.7);
                    let y = tape.scalar_mul(x, s)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "scalar_mul_scalar",
            Mat::from_rows(&[&[0.8]]),
            alloc::boxed::Box::new({
                let a = random_mat(d, d, &mut rng);
                let c = c_sq.clone();
                move |tape, s| {
                    let an = tape.leaf(a.clone());
                    let y = tape.scalar_mul(an, s)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "scalar_div_scalar",
            Mat::from_rows(&[&[1.3]]),
            alloc::boxed::Box::new({
                let a = random_mat(d, d, &mut rng);
                let c = c_sq.clone();
                move |tape, s| {
                    let an = tape.leaf(a.clone());
                    let y = tape.scalar_div(an, s)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "relu",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let c = c_sq.clone();
                move |tape, x| {
                    let y = tape.relu(x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "sigmoid",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let c = c_sq.clone();
                move |tape, x| {
                    let y = tape.sigmoid(x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "sym",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new({
                let c = c_sq.clone();
                move |tape, x| {
                    let y = tape.sym(x)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "trace",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new(move |tape, x| tape.trace(x)),
        ));
        cases.push((
            "frob_norm_sq",
            random_mat(d, d, &mut rng),
            alloc::boxed::Box::new(move |tape, x| tape.frob_norm_sq(x)),
        ));
        cases.push((
            "logdet_chol",
            random_spd(d, &mut rng),
            alloc::boxed::Box::new(move |tape, x| tape.logdet(x)),
        ));
        cases.push((
            "matvec_mat",
            random_mat(d, 3, &mut rng),
            alloc::boxed::Box::new({
                let v = random_mat(3, 1, &mut rng);
                let c = random_mat(d, 1, &mut rng);
                move |tape, x| {
                    let vn = tape.leaf(v.clone());
                    let y = tape.matvec(x, vn)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "matvec_vec",
            random_mat(3, 1, &mut rng),
            alloc::boxed::Box::new({
                let a = random_mat(d, 3, &mut rng);
                let c = random_mat(d, 1, &mut rng);
                move |tape, v| {
                    let an = tape.leaf(a.clone());
                    let y = tape.matvec(an, v)?;
                    linear(tape, c.clone(), y)
                }
            }),
        ));
        cases.push((
            "dot",
            random_mat(d, 1, &mut rng),
            alloc::boxed::Box::new({
                let b = random_mat(d, 1, &mut rng);
                move |tape, x| {
                    let bn = tape.leaf(b.clone());
                    tape.dot(x, bn)
                }
            }),
        ));

        for (name, x, f) in &cases {
            let err = grad_check(f, x, GRAD_CHECK_H).unwrap();
            assert!(err < 1e-6, "{name}: max rel err {err:e}");
        }
    }

    #[test]
    fn primitive_gradients_over_seeded_inputs() {
        // 10 seeded inputs through a composite of several primitives,
        // at varying dimensions up to 8.
        for seed in 0..10u64 {
            let mut rng = SplitMix64::new(1000 + seed);
            let d = 3 + (seed % 6) as usize;
            let x = random_mat(d, d, &mut rng);
            let f = |tape: &mut Tape, n: NodeId| -> Result<NodeId> {
                let s = tape.sym(n)?;
                let r = tape.relu(s)?;
                let t = tape.transpose(r)?;
                let p = tape.matmul(r, t)?;
                let g = tape.sigmoid(p)?;
                let tr = tape.trace(g)?;
                let fs = tape.frob_norm_sq(r)?;
                let scaled = tape.scalar_div(fs, tr)?;
                tape.add(scaled, tr)
            };
            let err = grad_check(&f, &x, GRAD_CHECK_H).unwrap();
            assert!(err < 1e-6, "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn grad_check_reports_non_finite_loss() {
        // dividing by an exactly-zero scalar node makes the loss infinite
        let f = |tape: &mut Tape, x: NodeId| -> Result<NodeId> {
            let zero = tape.scalar_leaf(0.0);
            let y = tape.scalar_div(x, zero)?;
            tape.frob_norm_sq(y)
        };
        let x = Mat::identity(2);
        assert!(matches!(
            grad_check(&f, &x, GRAD_CHECK_H),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn logdet_gradcheck_on_spd() {
        let mut rng = SplitMix64::new(73);
        let x = random_spd(6, &mut rng);
        let f = |tape: &mut Tape, n: NodeId| tape.logdet(n);
        let err = grad_check(&f, &x, GRAD_CHECK_H).unwrap();
        assert!(err < 1e-6, "logdet: {err:e}");
    }
}
