//! Eager reverse-mode differentiation over a flat op tape.
//!
//! Model code builds forward passes by pushing ops; values are computed
//! immediately and `backward` walks the tape once in reverse, accumulating
//! gradients. Parameter leaves carry the index of their entry in a
//! [`crate::nn::params::ParameterStore`] so gradients can be drained back
//! after the walk. The op set is exactly what the GRU encoder/decoder
//! stack needs; every rule here is covered by finite-difference tests.

use crate::error::{Error, Result};
use crate::nn::ops;
use crate::nn::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Id(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<usize> },
    Gather { m: Id, row: usize },
    MatVec { m: Id, v: Id },
    MatTVec { m: Id, v: Id },
    MatMulT { a: Id, b: Id },
    Add { a: Id, b: Id },
    AddRowBroadcast { m: Id, v: Id },
    Mul { a: Id, b: Id },
    OneMinus { a: Id },
    Sigmoid { a: Id },
    Tanh { a: Id },
    Concat { a: Id, b: Id },
    StackRows { rows: Vec<Id> },
    MeanRows { m: Id },
    MaskedSoftmax { scores: Id, mask: Vec<bool> },
    CrossEntropy { logits: Id, target: usize },
    Sum { items: Vec<Id> },
    Scale { a: Id, k: f64 },
    MulConst { a: Id, mask: Tensor<f64> },
}

struct Node<T> {
    op: Op,
    value: Tensor<T>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Tape::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor<T>) -> Id {
        self.nodes.push(Node { op, value });
        Id(self.nodes.len() - 1)
    }

    pub fn value(&self, id: Id) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant or input; not connected to any parameter.
    pub fn constant(&mut self, value: Tensor<T>) -> Id {
        self.push(Op::Leaf { param: None }, value)
    }

    /// A leaf whose gradient will be reported for parameter `param_index`.
    pub fn param(&mut self, value: Tensor<T>, param_index: usize) -> Id {
        self.push(Op::Leaf { param: Some(param_index) }, value)
    }

    pub fn gather(&mut self, m: Id, row: usize) -> Id {
        let src = self.value(m);
        assert!(row < src.rows, "gather row {row} of {}", src.shape_string());
        let value = Tensor::vector(src.row(row).to_vec());
        self.push(Op::Gather { m, row }, value)
    }

    pub fn matvec(&mut self, m: Id, v: Id) -> Id {
        let value = self.value(m).matvec(self.value(v));
        self.push(Op::MatVec { m, v }, value)
    }

    pub fn mat_t_vec(&mut self, m: Id, v: Id) -> Id {
        let value = self.value(m).mat_t_vec(self.value(v));
        self.push(Op::MatTVec { m, v }, value)
    }

    pub fn matmul_t(&mut self, a: Id, b: Id) -> Id {
        let value = self.value(a).matmul_t(self.value(b));
        self.push(Op::MatMulT { a, b }, value)
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        let (va, vb) = (self.value(a), self.value(b));
        assert!(va.same_shape(vb), "add {} + {}", va.shape_string(), vb.shape_string());
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| *x + *y).collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::Add { a, b }, value)
    }

    pub fn add_row_broadcast(&mut self, m: Id, v: Id) -> Id {
        let (vm, vv) = (self.value(m), self.value(v));
        assert_eq!(vm.cols, vv.rows, "row broadcast {} + {}", vm.shape_string(), vv.shape_string());
        let mut value = vm.clone();
        for r in 0..value.rows {
            for (slot, add) in value.row_mut(r).iter_mut().zip(&vv.data) {
                *slot += *add;
            }
        }
        self.push(Op::AddRowBroadcast { m, v }, value)
    }

    pub fn mul(&mut self, a: Id, b: Id) -> Id {
        let (va, vb) = (self.value(a), self.value(b));
        assert!(va.same_shape(vb), "mul {} * {}", va.shape_string(), vb.shape_string());
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| *x * *y).collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::Mul { a, b }, value)
    }

    pub fn one_minus(&mut self, a: Id) -> Id {
        let va = self.value(a);
        let data = va.data.iter().map(|x| T::one() - *x).collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::OneMinus { a }, value)
    }

    pub fn sigmoid(&mut self, a: Id) -> Id {
        let va = self.value(a);
        let data = va
            .data
            .iter()
            .map(|x| T::one() / (T::one() + (-*x).exp()))
            .collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::Sigmoid { a }, value)
    }

    pub fn tanh(&mut self, a: Id) -> Id {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x.tanh()).collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::Tanh { a }, value)
    }

    pub fn concat(&mut self, a: Id, b: Id) -> Id {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols, 1, "concat expects vectors");
        assert_eq!(vb.cols, 1, "concat expects vectors");
        let mut data = va.data.clone();
        data.extend_from_slice(&vb.data);
        self.push(Op::Concat { a, b }, Tensor::vector(data))
    }

    pub fn stack_rows(&mut self, rows: Vec<Id>) -> Id {
        assert!(!rows.is_empty(), "stack_rows of nothing");
        let cols = self.value(rows[0]).rows;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in &rows {
            let v = self.value(r);
            assert_eq!(v.cols, 1, "stack_rows expects vectors");
            assert_eq!(v.rows, cols, "stack_rows ragged");
            data.extend_from_slice(&v.data);
        }
        let value = Tensor { rows: rows.len(), cols, data };
        self.push(Op::StackRows { rows }, value)
    }

    pub fn mean_rows(&mut self, m: Id) -> Id {
        let vm = self.value(m);
        let scale = T::from_f64(1.0 / vm.rows as f64);
        let mut out = vec![T::zero(); vm.cols];
        for r in 0..vm.rows {
            for (slot, x) in out.iter_mut().zip(vm.row(r)) {
                *slot += *x * scale;
            }
        }
        self.push(Op::MeanRows { m }, Tensor::vector(out))
    }

    pub fn masked_softmax(&mut self, scores: Id, mask: Vec<bool>) -> Result<Id> {
        let vs = self.value(scores);
        assert_eq!(vs.cols, 1, "masked_softmax expects a vector");
        let probs = ops::softmax(&vs.data, &mask)?;
        Ok(self.push(Op::MaskedSoftmax { scores, mask }, Tensor::vector(probs)))
    }

    pub fn cross_entropy(&mut self, logits: Id, target: usize) -> Result<Id> {
        let vl = self.value(logits);
        let (loss, _) = ops::cross_entropy(&vl.data, target)?;
        Ok(self.push(Op::CrossEntropy { logits, target }, Tensor::scalar(loss)))
    }

    pub fn sum(&mut self, items: Vec<Id>) -> Id {
        assert!(!items.is_empty(), "sum of nothing");
        let shape = {
            let v = self.value(items[0]);
            (v.rows, v.cols)
        };
        let mut acc = Tensor::zeros(shape.0, shape.1);
        for &id in &items {
            let v = self.value(id);
            assert!(v.same_shape(&acc), "sum shape mismatch");
            for (slot, x) in acc.data.iter_mut().zip(&v.data) {
                *slot += *x;
            }
        }
        self.push(Op::Sum { items }, acc)
    }

    pub fn scale(&mut self, a: Id, k: f64) -> Id {
        let va = self.value(a);
        let kk = T::from_f64(k);
        let data = va.data.iter().map(|x| *x * kk).collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::Scale { a, k }, value)
    }

    /// Elementwise product with a fixed (non-differentiated) mask; used for
    /// inverted dropout.
    pub fn mul_const(&mut self, a: Id, mask: Tensor<f64>) -> Id {
        let va = self.value(a);
        assert_eq!(va.rows, mask.rows, "mul_const shape");
        assert_eq!(va.cols, mask.cols, "mul_const shape");
        let data = va
            .data
            .iter()
            .zip(&mask.data)
            .map(|(x, k)| *x * T::from_f64(*k))
            .collect();
        let value = Tensor { rows: va.rows, cols: va.cols, data };
        self.push(Op::MulConst { a, mask }, value)
    }

    /// Reverse pass from a scalar loss. Returns per-node gradients; combine
    /// with [`Tape::param_grads`] to read off parameter gradients.
    pub fn backward(&self, loss: Id) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        assert_eq!(lv.data.len(), 1, "backward from non-scalar");
        if !lv.item().is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads: Vec<Tensor<T>> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.rows, n.value.cols))
            .collect();
        grads[loss.0].data[0] = T::one();

        for idx in (0..=loss.0).rev() {
            // take the buffer to appease the borrow checker; restored below
            let dy = std::mem::replace(&mut grads[idx], Tensor::zeros(0, 0));
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { .. } => {}
                Op::Gather { m, row } => {
                    let gm = &mut grads[m.0];
                    for (slot, g) in gm.row_mut(*row).iter_mut().zip(&dy.data) {
                        *slot += *g;
                    }
                }
                Op::MatVec { m, v } => {
                    let vv = self.value(*v).clone();
                    let vm = self.value(*m);
                    // dv += Mᵀ dy
                    let dv = vm.mat_t_vec(&dy);
                    // dM[i,j] += dy[i] * v[j]
                    {
                        let gm = &mut grads[m.0];
                        for i in 0..gm.rows {
                            let dyi = dy.data[i];
                            for (slot, x) in gm.row_mut(i).iter_mut().zip(&vv.data) {
                                *slot += dyi * *x;
                            }
                        }
                    }
                    for (slot, g) in grads[v.0].data.iter_mut().zip(&dv.data) {
                        *slot += *g;
                    }
                }
                Op::MatTVec { m, v } => {
                    let vv = self.value(*v).clone();
                    let vm = self.value(*m);
                    // dv += M dy
                    let dv = vm.matvec(&dy);
                    // dM[i,j] += v[i] * dy[j]
                    {
                        let gm = &mut grads[m.0];
                        for i in 0..gm.rows {
                            let vi = vv.data[i];
                            for (slot, g) in gm.row_mut(i).iter_mut().zip(&dy.data) {
                                *slot += vi * *g;
                            }
                        }
                    }
                    for (slot, g) in grads[v.0].data.iter_mut().zip(&dv.data) {
                        *slot += *g;
                    }
                }
                Op::MatMulT { a, b } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    // dA += dY B ; dB += dYᵀ A
                    {
                        let ga = &mut grads[a.0];
                        for i in 0..va.rows {
                            for j in 0..vb.rows {
                                let d = dy.at(i, j);
                                for (slot, x) in ga.row_mut(i).iter_mut().zip(vb.row(j)) {
                                    *slot += d * *x;
                                }
                            }
                        }
                    }
                    {
                        let gb = &mut grads[b.0];
                        for i in 0..va.rows {
                            for j in 0..vb.rows {
                                let d = dy.at(i, j);
                                for (slot, x) in gb.row_mut(j).iter_mut().zip(va.row(i)) {
                                    *slot += d * *x;
                                }
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    for (slot, g) in grads[a.0].data.iter_mut().zip(&dy.data) {
                        *slot += *g;
                    }
                    for (slot, g) in grads[b.0].data.iter_mut().zip(&dy.data) {
                        *slot += *g;
                    }
                }
                Op::AddRowBroadcast { m, v } => {
                    let cols = dy.cols;
                    for (slot, g) in grads[m.0].data.iter_mut().zip(&dy.data) {
                        *slot += *g;
                    }
                    let gv = &mut grads[v.0];
                    for r in 0..dy.rows {
                        for (slot, g) in gv.data.iter_mut().zip(&dy.data[r * cols..(r + 1) * cols]) {
                            *slot += *g;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (self.value(*a).clone(), self.value(*b).clone());
                    for ((slot, g), x) in grads[a.0].data.iter_mut().zip(&dy.data).zip(&vb.data) {
                        *slot += *g * *x;
                    }
                    for ((slot, g), x) in grads[b.0].data.iter_mut().zip(&dy.data).zip(&va.data) {
                        *slot += *g * *x;
                    }
                }
                Op::OneMinus { a } => {
                    for (slot, g) in grads[a.0].data.iter_mut().zip(&dy.data) {
                        *slot += -*g;
                    }
                }
                Op::Sigmoid { a } => {
                    let y = &node.value;
                    for ((slot, g), s) in grads[a.0].data.iter_mut().zip(&dy.data).zip(&y.data) {
                        *slot += *g * *s * (T::one() - *s);
                    }
                }
                Op::Tanh { a } => {
                    let y = &node.value;
                    for ((slot, g), t) in grads[a.0].data.iter_mut().zip(&dy.data).zip(&y.data) {
                        *slot += *g * (T::one() - *t * *t);
                    }
                }
                Op::Concat { a, b } => {
                    let la = grads[a.0].data.len();
                    for (slot, g) in grads[a.0].data.iter_mut().zip(&dy.data[..la]) {
                        *slot += *g;
                    }
                    for (slot, g) in grads[b.0].data.iter_mut().zip(&dy.data[la..]) {
                        *slot += *g;
                    }
                }
                Op::StackRows { rows } => {
                    for (r, &row_id) in rows.iter().enumerate() {
                        for (slot, g) in grads[row_id.0].data.iter_mut().zip(dy.row(r)) {
                            *slot += *g;
                        }
                    }
                }
                Op::MeanRows { m } => {
                    let gm = &mut grads[m.0];
                    let scale = T::from_f64(1.0 / gm.rows as f64);
                    for r in 0..gm.rows {
                        for (slot, g) in gm.row_mut(r).iter_mut().zip(&dy.data) {
                            *slot += *g * scale;
                        }
                    }
                }
                Op::MaskedSoftmax { scores, mask } => {
                    let alpha = &node.value;
                    let mut dot = T::zero();
                    for (a, g) in alpha.data.iter().zip(&dy.data) {
                        dot += *a * *g;
                    }
                    let gs = &mut grads[scores.0];
                    for i in 0..gs.data.len() {
                        if mask[i] {
                            gs.data[i] += alpha.data[i] * (dy.data[i] - dot);
                        }
                    }
                }
                Op::CrossEntropy { logits, target } => {
                    let vl = self.value(*logits);
                    let (_, grad) =
                        ops::cross_entropy(&vl.data, *target).expect("validated at forward");
                    let d = dy.data[0];
                    for (slot, g) in grads[logits.0].data.iter_mut().zip(&grad) {
                        *slot += d * *g;
                    }
                }
                Op::Sum { items } => {
                    for &id in items {
                        for (slot, g) in grads[id.0].data.iter_mut().zip(&dy.data) {
                            *slot += *g;
                        }
                    }
                }
                Op::Scale { a, k } => {
                    let kk = T::from_f64(*k);
                    for (slot, g) in grads[a.0].data.iter_mut().zip(&dy.data) {
                        *slot += *g * kk;
                    }
                }
                Op::MulConst { a, mask } => {
                    for ((slot, g), k) in grads[a.0].data.iter_mut().zip(&dy.data).zip(&mask.data) {
                        *slot += *g * T::from_f64(*k);
                    }
                }
            }
            grads[idx] = dy;
        }
        Ok(Gradients { grads })
    }

    /// (parameter index, gradient) pairs for every parameter leaf on the tape.
    pub fn param_grads<'g>(
        &self,
        gradients: &'g Gradients<T>,
    ) -> Vec<(usize, &'g Tensor<T>)> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(p) } = node.op {
                out.push((p, &gradients.grads[i]));
            }
        }
        out
    }
}

pub struct Gradients<T> {
    grads: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn of(&self, id: Id) -> &Tensor<T> {
        &self.grads[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Finite-difference scaffolding: f builds a scalar loss from a single
    /// tensor leaf; checks d loss / d leaf entries.
    fn fd_check<F>(input: Tensor<f64>, f: F)
    where
        F: Fn(&mut Tape<f64>, Id) -> Id,
    {
        let mut tape = Tape::new();
        let x = tape.param(input.clone(), 0);
        let loss = f(&mut tape, x);
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.of(x).clone();

        let h = 1e-6;
        for i in 0..input.data.len() {
            let eval = |delta: f64| {
                let mut t = Tape::new();
                let mut shifted = input.clone();
                shifted.data[i] += delta;
                let x = t.param(shifted, 0);
                let l = f(&mut t, x);
                t.value(l).item()
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic.data[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((a - numeric) / denom).abs() < 1e-6,
                "entry {i}: analytic {a} numeric {numeric}"
            );
        }
    }

    fn square_norm(tape: &mut Tape<f64>, v: Id) -> Id {
        let sq = tape.mul(v, v);
        let ones_len = tape.value(sq).rows;
        let ones = tape.constant(Tensor::from_rows(&[vec![1.0; ones_len]]));
        tape.matvec(ones, sq)
    }

    #[test]
    fn matvec_grad() {
        let m = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2], vec![-0.4, 0.9]]);
        fd_check(m, |tape, m| {
            let x = tape.constant(Tensor::vector(vec![0.5, -1.25]));
            let y = tape.matvec(m, x);
            square_norm(tape, y)
        });
    }

    #[test]
    fn mat_t_vec_and_stack_grad() {
        let m = Tensor::from_rows(&[vec![0.3, -0.7, 0.1], vec![1.1, 0.2, -0.5]]);
        fd_check(m, |tape, m| {
            let a = tape.constant(Tensor::vector(vec![0.2, -0.4]));
            let y = tape.mat_t_vec(m, a);
            let t = tape.tanh(y);
            square_norm(tape, t)
        });
    }

    #[test]
    fn matmul_t_grad() {
        let a = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2]]);
        fd_check(a, |tape, a| {
            let b = tape.constant(Tensor::from_rows(&[vec![0.4, 0.6], vec![-0.2, 0.8], vec![0.9, 0.05]]));
            let y = tape.matmul_t(a, b); // (2,3)
            let s = tape.tanh(y);
            let v = tape.constant(Tensor::vector(vec![1.0, -1.0, 0.5]));
            let z = tape.matvec(s, v);
            square_norm(tape, z)
        });
    }

    #[test]
    fn gru_style_composite_grad() {
        // sigmoid/tanh/mul/one_minus/add chained like a GRU cell update
        let h = Tensor::vector(vec![0.2, -0.3, 0.5]);
        fd_check(h, |tape, h| {
            let w = tape.constant(Tensor::from_rows(&[
                vec![0.3, -0.1, 0.7],
                vec![0.2, 0.4, -0.6],
                vec![-0.5, 0.8, 0.1],
            ]));
            let z_pre = tape.matvec(w, h);
            let z = tape.sigmoid(z_pre);
            let cand_pre = tape.matvec(w, z);
            let cand = tape.tanh(cand_pre);
            let keep = tape.one_minus(z);
            let a = tape.mul(keep, h);
            let b = tape.mul(z, cand);
            let next = tape.add(a, b);
            square_norm(tape, next)
        });
    }

    #[test]
    fn gather_and_mean_rows_grad() {
        let emb = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2], vec![-0.4, 0.9]]);
        fd_check(emb, |tape, emb| {
            let r0 = tape.gather(emb, 0);
            let r2 = tape.gather(emb, 2);
            let m = tape.stack_rows(vec![r0, r2, r0]);
            let mean = tape.mean_rows(m);
            square_norm(tape, mean)
        });
    }

    #[test]
    fn masked_softmax_grad() {
        let scores = Tensor::vector(vec![0.3, -0.9, 0.4, 1.2]);
        fd_check(scores, |tape, s| {
            let mask = vec![true, true, false, true];
            let alpha = tape.masked_softmax(s, mask).unwrap();
            let w = tape.constant(Tensor::vector(vec![0.5, -1.0, 2.0, 0.25]));
            let prod = tape.mul(alpha, w);
            square_norm(tape, prod)
        });
    }

    #[test]
    fn cross_entropy_and_concat_grad() {
        let x = Tensor::vector(vec![0.3, -0.9]);
        fd_check(x, |tape, x| {
            let y = tape.constant(Tensor::vector(vec![0.1, 0.7]));
            let both = tape.concat(x, y);
            let w = tape.constant(Tensor::from_rows(&[
                vec![0.3, -0.1, 0.7, 0.2],
                vec![0.2, 0.4, -0.6, -0.3],
                vec![-0.5, 0.8, 0.1, 0.9],
            ]));
            let logits = tape.matvec(w, both);
            tape.cross_entropy(logits, 1).unwrap()
        });
    }

    #[test]
    fn broadcast_sum_scale_grad() {
        let m = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2]]);
        fd_check(m, |tape, m| {
            let v = tape.constant(Tensor::vector(vec![0.4, -0.2]));
            let shifted = tape.add_row_broadcast(m, v);
            let t = tape.tanh(shifted);
            let col = tape.constant(Tensor::vector(vec![1.0, -2.0]));
            let y = tape.matvec(t, col);
            let n1 = square_norm(tape, y);
            let n2 = tape.scale(n1, 0.35);
            tape.sum(vec![n1, n2])
        });
    }

    #[test]
    fn mul_const_grad() {
        let v = Tensor::vector(vec![0.3, -0.7, 0.2]);
        fd_check(v, |tape, v| {
            let mask = Tensor { rows: 3, cols: 1, data: vec![0.0, 2.0, 1.0] };
            let dropped = tape.mul_const(v, mask);
            square_norm(tape, dropped)
        });
    }

    #[test]
    fn backward_rejects_non_finite_loss() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(f64::NAN));
        assert!(tape.backward(x).is_err());
    }
}
