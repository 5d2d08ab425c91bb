//! Reverse-mode autodiff over [`Mat`] values.
//!
//! A `Tape` records one forward computation; `backward` walks it in reverse
//! and accumulates gradients. Leaves tagged with a parameter name can be
//! flushed into a [`ParamStore`](super::params::ParamStore) afterwards.

use super::eig::sym_eig;
use super::mat::Mat;
use super::params::ParamStore;
use crate::geometry::wrap_angle;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `(n, c) + (1, c)` with the second operand broadcast over rows.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Wrap(NodeId),
    RowSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    Transpose(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    SliceRows {
        x: NodeId,
        r0: usize,
        r1: usize,
    },
    SliceCols {
        x: NodeId,
        c0: usize,
        c1: usize,
    },
    GatherRows {
        table: NodeId,
        idx: Vec<usize>,
    },
    MeanAll(NodeId),
    SumAll(NodeId),
    L2NormalizeRows(NodeId),
    CrossEntropyMean {
        logits: NodeId,
        labels: Vec<usize>,
    },
    /// Project `query - mean(patches)` onto the leading `m` principal
    /// components of the patch covariance. Gradient flows through the
    /// eigenvectors; the factorization from the forward pass is kept for
    /// the backward pass.
    PcaProject {
        patches: NodeId,
        query: NodeId,
        m: usize,
        mean: Vec<f64>,
        vecs: Mat,
        vals: Vec<f64>,
    },
    /// Fused scaled-dot-product attention over all heads: inputs are the
    /// already-projected q/k/v of width `heads * head_dim`. The attention
    /// probabilities from the forward pass are kept (stacked per head) for
    /// the backward pass.
    MultiHeadAttn {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        probs: Mat,
    },
}

struct Node {
    value: Mat,
    op: Op,
    param: Option<String>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id].value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "node is not a scalar");
        v.data[0]
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        self.nodes.len() - 1
    }

    /// A constant or input leaf. No gradient is reported for it.
    pub fn leaf(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// A leaf bound to a named parameter in `store`; its gradient is
    /// accumulated back into the store by [`Tape::accumulate_into`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let value = store.value(name).clone();
        let id = self.push(value, Op::Leaf);
        self.nodes[id].param = Some(name.to_string());
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.matmul(&self.nodes[b].value);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape());
        let mut v = self.nodes[a].value.clone();
        v.add_assign(&self.nodes[b].value);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (n, c) = self.nodes[a].value.shape();
        assert_eq!(self.nodes[row].value.shape(), (1, c));
        let mut v = self.nodes[a].value.clone();
        for r in 0..n {
            for j in 0..c {
                *v.at_mut(r, j) += self.nodes[row].value.at(0, j);
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape());
        let va = &self.nodes[a].value;
        let vb = &self.nodes[b].value;
        let mut v = va.clone();
        for (x, y) in v.data.iter_mut().zip(&vb.data) {
            *x -= y;
        }
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape());
        let va = &self.nodes[a].value;
        let vb = &self.nodes[b].value;
        let mut v = va.clone();
        for (x, y) in v.data.iter_mut().zip(&vb.data) {
            *x *= y;
        }
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let mut v = self.nodes[a].value.clone();
        v.scale_assign(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let mut v = va.clone();
        for x in &mut v.data {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let mut v = va.clone();
        for x in &mut v.data {
            *x = x.tanh();
        }
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let mut v = va.clone();
        for x in &mut v.data {
            *x = 1.0 / (1.0 + (-*x).exp());
        }
        self.push(v, Op::Sigmoid(a))
    }

    /// Elementwise angle wrap into `(-pi, pi]`; unit gradient everywhere.
    pub fn wrap(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let v = Mat::from_fn(va.rows, va.cols, |r, c| wrap_angle(va.at(r, c)));
        self.push(v, Op::Wrap(a))
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let cols = va.cols;
        let mut v = va.clone();
        for r in 0..va.rows {
            let row = &mut v.data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(v, Op::RowSoftmax(a))
    }

    /// Row-wise layer norm with learnable gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> NodeId {
        let vx = &self.nodes[x].value;
        let (n, c) = vx.shape();
        assert_eq!(self.nodes[gain].value.shape(), (1, c));
        assert_eq!(self.nodes[bias].value.shape(), (1, c));
        let g = &self.nodes[gain].value;
        let b = &self.nodes[bias].value;
        let mut v = Mat::zeros(n, c);
        for r in 0..n {
            let row = vx.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            let out = &mut v.data[r * c..(r + 1) * c];
            for j in 0..c {
                out[j] = g.data[j] * (row[j] - mean) * inv + b.data[j];
            }
        }
        self.push(v, Op::LayerNorm { x, gain, bias, eps })
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0]].value.cols;
        let rows: usize = parts.iter().map(|&p| self.nodes[p].value.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            assert_eq!(self.nodes[p].value.cols, cols);
            data.extend_from_slice(&self.nodes[p].value.data);
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0]].value.rows;
        let cols: usize = parts.iter().map(|&p| self.nodes[p].value.cols).sum();
        let mut v = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let vp = &self.nodes[p].value;
            assert_eq!(vp.rows, rows);
            for r in 0..rows {
                for c in 0..vp.cols {
                    *v.at_mut(r, off + c) = vp.at(r, c);
                }
            }
            off += vp.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, x: NodeId, r0: usize, r1: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        assert!(r0 < r1 && r1 <= vx.rows);
        let mut data = Vec::with_capacity((r1 - r0) * vx.cols);
        data.extend_from_slice(&vx.data[r0 * vx.cols..r1 * vx.cols]);
        self.push(
            Mat::from_vec(r1 - r0, vx.cols, data),
            Op::SliceRows { x, r0, r1 },
        )
    }

    pub fn slice_cols(&mut self, x: NodeId, c0: usize, c1: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        assert!(c0 < c1 && c1 <= vx.cols);
        let v = Mat::from_fn(vx.rows, c1 - c0, |r, c| vx.at(r, c0 + c));
        self.push(v, Op::SliceCols { x, c0, c1 })
    }

    /// Embedding lookup: output row `i` is `table` row `idx[i]`.
    pub fn gather_rows(&mut self, table: NodeId, idx: &[usize]) -> NodeId {
        let vt = &self.nodes[table].value;
        let v = Mat::from_fn(idx.len(), vt.cols, |r, c| vt.at(idx[r], c));
        self.push(
            v,
            Op::GatherRows {
                table,
                idx: idx.to_vec(),
            },
        )
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let v = Mat::scalar(va.data.iter().sum::<f64>() / va.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let v = Mat::scalar(va.data.iter().sum::<f64>());
        self.push(v, Op::SumAll(a))
    }

    /// Rows scaled to unit L2 norm. Zero rows are rejected.
    pub fn l2_normalize_rows(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let mut v = Mat::zeros(va.rows, va.cols);
        for r in 0..va.rows {
            let norm = va.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm > 1e-30, "l2_normalize_rows: zero-norm row {r}");
            for c in 0..va.cols {
                *v.at_mut(r, c) = va.at(r, c) / norm;
            }
        }
        self.push(v, Op::L2NormalizeRows(a))
    }

    /// Mean over rows of `-log softmax(logits)[label]`, stabilized by
    /// max-subtraction.
    pub fn cross_entropy_mean(&mut self, logits: NodeId, labels: &[usize]) -> NodeId {
        let vl = &self.nodes[logits].value;
        assert_eq!(vl.rows, labels.len());
        for &l in labels {
            assert!(l < vl.cols, "label {l} out of range for {} classes", vl.cols);
        }
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = vl.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
            total += logsum - row[label];
        }
        self.push(
            Mat::scalar(total / labels.len() as f64),
            Op::CrossEntropyMean {
                logits,
                labels: labels.to_vec(),
            },
        )
    }

    /// PCA projection used by the principal-component extraction path:
    /// the centered `query` row expressed in the basis of the top `m`
    /// principal components of the `patches` row covariance.
    pub fn pca_project(&mut self, patches: NodeId, query: NodeId, m: usize) -> NodeId {
        let p = &self.nodes[patches].value;
        let q = &self.nodes[query].value;
        let (n, c) = p.shape();
        assert_eq!(q.shape(), (1, c));
        assert!(m >= 1);
        let m = m.min(c).min(n);
        let (mean, cov) = mean_and_cov(p);
        let (vecs, vals) = sym_eig(&cov);
        let mut out = Mat::zeros(1, m);
        for j in 0..m {
            let mut dot = 0.0;
            for i in 0..c {
                dot += (q.at(0, i) - mean[i]) * vecs.at(i, j);
            }
            *out.at_mut(0, j) = dot;
        }
        self.push(
            out,
            Op::PcaProject {
                patches,
                query,
                m,
                mean,
                vecs,
                vals,
            },
        )
    }

    /// Fused multi-head scaled-dot-product attention. `q`, `k`, `v` are
    /// the projected inputs of width `heads * head_dim`; the output is the
    /// per-head attention results concatenated back to full width.
    pub fn multi_head_attn(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize) -> NodeId {
        let (n_q, c) = self.nodes[q].value.shape();
        let (n_kv, ck) = self.nodes[k].value.shape();
        assert_eq!(self.nodes[v].value.shape(), (n_kv, c));
        assert_eq!(c, ck);
        assert!(c % heads == 0, "width {c} not divisible by heads {heads}");
        let d = c / heads;
        let scale = 1.0 / (d as f64).sqrt();
        let qv = &self.nodes[q].value;
        let kv = &self.nodes[k].value;
        let vv = &self.nodes[v].value;
        let mut probs = Mat::zeros(heads * n_q, n_kv);
        let mut out = Mat::zeros(n_q, c);
        // Contiguous per-head copies keep the inner products streaming.
        let mut kh = vec![0.0; n_kv * d];
        let mut vh = vec![0.0; n_kv * d];
        for h in 0..heads {
            let off = h * d;
            for j in 0..n_kv {
                kh[j * d..(j + 1) * d].copy_from_slice(&kv.row(j)[off..off + d]);
                vh[j * d..(j + 1) * d].copy_from_slice(&vv.row(j)[off..off + d]);
            }
            for i in 0..n_q {
                let qrow = &qv.row(i)[off..off + d];
                let prow = &mut probs.data[(h * n_q + i) * n_kv..(h * n_q + i + 1) * n_kv];
                let mut max = f64::NEG_INFINITY;
                for (j, p) in prow.iter_mut().enumerate() {
                    let krow = &kh[j * d..(j + 1) * d];
                    let dot: f64 = qrow.iter().zip(krow).map(|(a, b)| a * b).sum();
                    *p = dot * scale;
                    if *p > max {
                        max = *p;
                    }
                }
                let mut sum = 0.0;
                for p in prow.iter_mut() {
                    *p = (*p - max).exp();
                    sum += *p;
                }
                for p in prow.iter_mut() {
                    *p /= sum;
                }
                let orow = &mut out.data[i * c + off..i * c + off + d];
                for (j, &p) in prow.iter().enumerate() {
                    let vrow = &vh[j * d..(j + 1) * d];
                    for (o, &x) in orow.iter_mut().zip(vrow) {
                        *o += p * x;
                    }
                }
            }
        }
        self.push(
            out,
            Op::MultiHeadAttn {
                q,
                k,
                v,
                heads,
                probs,
            },
        )
    }

    /// Backward pass seeded with `d(loss)/d(node) = 1` at a scalar node.
    pub fn backward(&mut self, loss: NodeId) -> Grads {
        assert_eq!(self.nodes[loss].value.shape(), (1, 1));
        self.backward_seeded(loss, Mat::scalar(1.0))
    }

    /// Backward pass with an explicit output gradient; used when a value
    /// computed on this tape feeds a loss on another tape.
    pub fn backward_seeded(&mut self, node: NodeId, seed: Mat) -> Grads {
        self.backward_seeded_multi(vec![(node, seed)])
    }

    /// Backward pass seeded at several nodes at once, e.g. when a batch of
    /// embeddings from this tape entered a contrastive loss elsewhere.
    pub fn backward_seeded_multi(&mut self, seeds: Vec<(NodeId, Mat)>) -> Grads {
        assert!(!seeds.is_empty());
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        let mut top = 0;
        for (node, seed) in seeds {
            assert_eq!(self.nodes[node].value.shape(), seed.shape());
            top = top.max(node);
            match &mut grads[node] {
                Some(existing) => existing.add_assign(&seed),
                slot @ None => *slot = Some(seed),
            }
        }
        self.backward_from(top, grads)
    }

    fn backward_from(&mut self, node: NodeId, mut grads: Vec<Option<Mat>>) -> Grads {
        let nodes = &self.nodes;
        for id in (0..=node).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                &Op::MatMul(a, b) => {
                    let da = g.matmul(&nodes[b].value.transpose());
                    let db = nodes[a].value.transpose().matmul(&g);
                    add_grad(&mut grads, a, da, nodes);
                    add_grad(&mut grads, b, db, nodes);
                }
                &Op::Add(a, b) => {
                    add_grad(&mut grads, a, g.clone(), nodes);
                    add_grad(&mut grads, b, g, nodes);
                }
                &Op::AddRow(a, row) => {
                    let c = g.cols;
                    let mut drow = Mat::zeros(1, c);
                    for r in 0..g.rows {
                        for (d, &x) in drow.data.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    add_grad(&mut grads, a, g, nodes);
                    add_grad(&mut grads, row, drow, nodes);
                }
                &Op::Sub(a, b) => {
                    let mut neg = g.clone();
                    neg.scale_assign(-1.0);
                    add_grad(&mut grads, a, g, nodes);
                    add_grad(&mut grads, b, neg, nodes);
                }
                &Op::Mul(a, b) => {
                    let va = &nodes[a].value;
                    let vb = &nodes[b].value;
                    let mut da = g.clone();
                    for (x, y) in da.data.iter_mut().zip(&vb.data) {
                        *x *= y;
                    }
                    let mut db = g;
                    for (x, y) in db.data.iter_mut().zip(&va.data) {
                        *x *= y;
                    }
                    add_grad(&mut grads, a, da, nodes);
                    add_grad(&mut grads, b, db, nodes);
                }
                &Op::Scale(a, s) => {
                    let mut da = g;
                    da.scale_assign(s);
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::Relu(a) => {
                    let va = &nodes[a].value;
                    let mut da = g;
                    for (x, &v) in da.data.iter_mut().zip(&va.data) {
                        if v <= 0.0 {
                            *x = 0.0;
                        }
                    }
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::Tanh(a) => {
                    let y = &nodes[id].value;
                    let mut da = g;
                    for (x, &v) in da.data.iter_mut().zip(&y.data) {
                        *x *= 1.0 - v * v;
                    }
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::Sigmoid(a) => {
                    let y = &nodes[id].value;
                    let mut da = g;
                    for (x, &v) in da.data.iter_mut().zip(&y.data) {
                        *x *= v * (1.0 - v);
                    }
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::Wrap(a) => {
                    add_grad(&mut grads, a, g, nodes);
                }
                &Op::RowSoftmax(a) => {
                    let y = &nodes[id].value;
                    let cols = g.cols;
                    let mut da = Mat::zeros(g.rows, cols);
                    for r in 0..g.rows {
                        let gr = g.row(r);
                        let yr = y.row(r);
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        let dr = &mut da.data[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            dr[j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::LayerNorm { x, gain, bias, eps } => {
                    let vx = &nodes[x].value;
                    let vg = &nodes[gain].value;
                    let (n, c) = vx.shape();
                    let mut dx = Mat::zeros(n, c);
                    let mut dg = Mat::zeros(1, c);
                    let mut db = Mat::zeros(1, c);
                    let mut xhat = vec![0.0; c];
                    let mut dxhat = vec![0.0; c];
                    for r in 0..n {
                        let row = vx.row(r);
                        let gr = g.row(r);
                        let mean = row.iter().sum::<f64>() / c as f64;
                        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / c as f64;
                        let inv = 1.0 / (var + eps).sqrt();
                        for j in 0..c {
                            xhat[j] = (row[j] - mean) * inv;
                            dg.data[j] += gr[j] * xhat[j];
                            db.data[j] += gr[j];
                            dxhat[j] = gr[j] * vg.data[j];
                        }
                        let mean_dxhat = dxhat.iter().sum::<f64>() / c as f64;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        let dr = &mut dx.data[r * c..(r + 1) * c];
                        for j in 0..c {
                            dr[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                        }
                    }
                    add_grad(&mut grads, x, dx, nodes);
                    add_grad(&mut grads, gain, dg, nodes);
                    add_grad(&mut grads, bias, db, nodes);
                }
                &Op::Transpose(a) => {
                    add_grad(&mut grads, a, g.transpose(), nodes);
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for &p in parts {
                        let rows = nodes[p].value.rows;
                        let cols = nodes[p].value.cols;
                        let mut dp = Mat::zeros(rows, cols);
                        dp.data
                            .copy_from_slice(&g.data[r0 * cols..(r0 + rows) * cols]);
                        add_grad(&mut grads, p, dp, nodes);
                        r0 += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for &p in parts {
                        let (rows, cols) = nodes[p].value.shape();
                        let dp = Mat::from_fn(rows, cols, |r, c| g.at(r, c0 + c));
                        add_grad(&mut grads, p, dp, nodes);
                        c0 += cols;
                    }
                }
                &Op::SliceRows { x, r0, r1 } => {
                    let (rows, cols) = nodes[x].value.shape();
                    let mut dx = Mat::zeros(rows, cols);
                    dx.data[r0 * cols..r1 * cols].copy_from_slice(&g.data);
                    add_grad(&mut grads, x, dx, nodes);
                }
                &Op::SliceCols { x, c0, c1 } => {
                    let (rows, cols) = nodes[x].value.shape();
                    let mut dx = Mat::zeros(rows, cols);
                    for r in 0..rows {
                        dx.data[r * cols + c0..r * cols + c1].copy_from_slice(g.row(r));
                    }
                    add_grad(&mut grads, x, dx, nodes);
                }
                Op::GatherRows { table, idx } => {
                    let table = *table;
                    let (rows, cols) = nodes[table].value.shape();
                    let mut dt = Mat::zeros(rows, cols);
                    for (r, &src) in idx.iter().enumerate() {
                        let dst = &mut dt.data[src * cols..(src + 1) * cols];
                        for (d, &x) in dst.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    add_grad(&mut grads, table, dt, nodes);
                }
                &Op::MeanAll(a) => {
                    let va = &nodes[a].value;
                    let s = g.data[0] / va.len() as f64;
                    let da = Mat::from_fn(va.rows, va.cols, |_, _| s);
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::SumAll(a) => {
                    let va = &nodes[a].value;
                    let s = g.data[0];
                    let da = Mat::from_fn(va.rows, va.cols, |_, _| s);
                    add_grad(&mut grads, a, da, nodes);
                }
                &Op::L2NormalizeRows(a) => {
                    let va = &nodes[a].value;
                    let y = &nodes[id].value;
                    let cols = g.cols;
                    let mut da = Mat::zeros(g.rows, cols);
                    for r in 0..g.rows {
                        let norm = va.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
                        let gr = g.row(r);
                        let yr = y.row(r);
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        let dr = &mut da.data[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            dr[j] = (gr[j] - dot * yr[j]) / norm;
                        }
                    }
                    add_grad(&mut grads, a, da, nodes);
                }
                Op::CrossEntropyMean { logits, labels } => {
                    let logits = *logits;
                    let vl = &nodes[logits].value;
                    let scale = g.data[0] / labels.len() as f64;
                    let cols = vl.cols;
                    let mut dl = Mat::zeros(vl.rows, cols);
                    for (r, &label) in labels.iter().enumerate() {
                        let row = vl.row(r);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
                        let dr = &mut dl.data[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            let p = (row[c] - max).exp() / sum;
                            dr[c] = scale * (p - if c == label { 1.0 } else { 0.0 });
                        }
                    }
                    add_grad(&mut grads, logits, dl, nodes);
                }
                Op::PcaProject {
                    patches,
                    query,
                    m,
                    mean,
                    vecs,
                    vals,
                } => {
                    let (patches, query) = (*patches, *query);
                    let (dp, dq) = pca_project_backward(
                        &nodes[patches].value,
                        &nodes[query].value,
                        *m,
                        mean,
                        vecs,
                        vals,
                        &g,
                    );
                    add_grad(&mut grads, patches, dp, nodes);
                    add_grad(&mut grads, query, dq, nodes);
                }
                Op::MultiHeadAttn {
                    q,
                    k,
                    v,
                    heads,
                    probs,
                } => {
                    let (q, k, v, heads) = (*q, *k, *v, *heads);
                    let qv = &nodes[q].value;
                    let kv = &nodes[k].value;
                    let vv = &nodes[v].value;
                    let (n_q, c) = qv.shape();
                    let n_kv = kv.rows;
                    let d = c / heads;
                    let scale = 1.0 / (d as f64).sqrt();
                    let mut dq = Mat::zeros(n_q, c);
                    let mut dk = Mat::zeros(n_kv, c);
                    let mut dv = Mat::zeros(n_kv, c);
                    let mut dprobs = vec![0.0; n_kv];
                    for h in 0..heads {
                        let off = h * d;
                        for i in 0..n_q {
                            let prow = &probs.data
                                [(h * n_q + i) * n_kv..(h * n_q + i + 1) * n_kv];
                            let grow = &g.row(i)[off..off + d];
                            // dv_h += p^T g_h; dprobs = g_h . v_h^T
                            for j in 0..n_kv {
                                let vrow = &vv.row(j)[off..off + d];
                                let mut dot = 0.0;
                                let dvrow = &mut dv.data[j * c + off..j * c + off + d];
                                for ((dvx, &vx), &gx) in
                                    dvrow.iter_mut().zip(vrow).zip(grow)
                                {
                                    *dvx += prow[j] * gx;
                                    dot += vx * gx;
                                }
                                dprobs[j] = dot;
                            }
                            // Softmax backward then the scaled score grads.
                            let dot: f64 =
                                dprobs.iter().zip(prow).map(|(a, b)| a * b).sum();
                            let qrow = &qv.row(i)[off..off + d];
                            let dqrow = &mut dq.data[i * c + off..i * c + off + d];
                            for j in 0..n_kv {
                                let ds = prow[j] * (dprobs[j] - dot) * scale;
                                if ds == 0.0 {
                                    continue;
                                }
                                let krow = &kv.row(j)[off..off + d];
                                let dkrow = &mut dk.data[j * c + off..j * c + off + d];
                                for ((dqx, &kx), (dkx, &qx)) in dqrow
                                    .iter_mut()
                                    .zip(krow)
                                    .zip(dkrow.iter_mut().zip(qrow))
                                {
                                    *dqx += ds * kx;
                                    *dkx += ds * qx;
                                }
                            }
                        }
                    }
                    add_grad(&mut grads, q, dq, nodes);
                    add_grad(&mut grads, k, dk, nodes);
                    add_grad(&mut grads, v, dv, nodes);
                }
            }
        }

        Grads { grads }
    }

    /// Flush leaf gradients from `grads` into the parameter store.
    pub fn accumulate_into(&self, grads: &Grads, store: &mut ParamStore) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(name) = &node.param {
                if let Some(g) = &grads.grads[id] {
                    store.grad_mut(name).add_assign(g);
                }
            }
        }
    }

    /// Per-parameter gradient totals, summed over duplicate leaves, in name
    /// order. Lets worker threads hand gradients back without touching the
    /// shared store.
    pub fn collect_param_grads(&self, grads: &Grads) -> Vec<(String, Mat)> {
        let mut map = GradAccumulator::default();
        self.accumulate_param_grads(grads, &mut map);
        map.into_entries()
    }

    /// Accumulate this tape's parameter gradients into a shared buffer, so
    /// a worker can fold many samples before handing one buffer back.
    pub fn accumulate_param_grads(&self, grads: &Grads, acc: &mut GradAccumulator) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let (Some(name), Some(g)) = (&node.param, &grads.grads[id]) {
                acc.add(name, g);
            }
        }
    }
}

fn add_grad(grads: &mut [Option<Mat>], id: NodeId, g: Mat, nodes: &[Node]) {
    debug_assert_eq!(nodes[id].value.shape(), g.shape());
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients per tape node, produced by [`Tape::backward`].
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }
}

/// Reusable per-parameter gradient buffer for worker threads.
#[derive(Default)]
pub struct GradAccumulator {
    map: std::collections::BTreeMap<String, Mat>,
}

impl GradAccumulator {
    pub fn add(&mut self, name: &str, g: &Mat) {
        match self.map.get_mut(name) {
            Some(acc) => acc.add_assign(g),
            None => {
                self.map.insert(name.to_string(), g.clone());
            }
        }
    }

    pub fn into_entries(self) -> Vec<(String, Mat)> {
        self.map.into_iter().collect()
    }

    /// Fold the accumulated gradients into the store's buffers.
    pub fn apply_to(self, store: &mut ParamStore) {
        for (name, g) in self.map {
            store.grad_mut(&name).add_assign(&g);
        }
    }
}

fn mean_and_cov(p: &Mat) -> (Vec<f64>, Mat) {
    let (n, c) = p.shape();
    let mut mean = vec![0.0; c];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(p.row(r)) {
            *m += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    // Centered rows once, then a rank-n accumulation with contiguous rows.
    let centered = Mat::from_fn(n, c, |r, j| p.at(r, j) - mean[j]);
    let mut cov = Mat::zeros(c, c);
    for r in 0..n {
        let row = centered.row(r);
        for i in 0..c {
            let di = row[i];
            let dst = &mut cov.data[i * c..(i + 1) * c];
            for (d, &v) in dst.iter_mut().zip(row) {
                *d += di * v;
            }
        }
    }
    cov.scale_assign(1.0 / n as f64);
    (mean, cov)
}

/// Gradient of `y = V_m^T (q - mean)` with respect to the patch matrix and
/// the query, where `V_m` are leading eigenvectors of the patch covariance.
/// The eigenvector sensitivity uses the standard symmetric-eigendecomposition
/// adjoint with the usual guard for near-degenerate eigenvalue pairs.
#[allow(clippy::too_many_arguments)]
fn pca_project_backward(
    p: &Mat,
    q: &Mat,
    m: usize,
    mean: &[f64],
    vecs: &Mat,
    vals: &[f64],
    gy: &Mat,
) -> (Mat, Mat) {
    let (n, c) = p.shape();
    let m = m.min(c).min(n);

    // dq and the direct mean term.
    let mut dq = Mat::zeros(1, c);
    for i in 0..c {
        for j in 0..m {
            *dq.at_mut(0, i) += gy.at(0, j) * vecs.at(i, j);
        }
    }
    let mut dmean: Vec<f64> = (0..c).map(|i| -dq.at(0, i)).collect();

    // dV: only the first m columns receive gradient.
    let mut dv = Mat::zeros(c, c);
    for i in 0..c {
        for j in 0..m {
            *dv.at_mut(i, j) = (q.at(0, i) - mean[i]) * gy.at(0, j);
        }
    }

    // dS = V (F o (V^T dV)) V^T, symmetrized; F_ij = 1/(lambda_j - lambda_i).
    let vt_dv = vecs.transpose().matmul(&dv);
    let mut inner = Mat::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let gap = vals[j] - vals[i];
            if gap.abs() > 1e-9 {
                *inner.at_mut(i, j) = vt_dv.at(i, j) / gap;
            }
        }
    }
    let ds_raw = vecs.matmul(&inner).matmul(&vecs.transpose());
    let ds = Mat::from_fn(c, c, |i, j| 0.5 * (ds_raw.at(i, j) + ds_raw.at(j, i)));

    // Through the covariance: S = (1/n) Pc^T Pc with Pc = P - 1 mean.
    // dPc = (2/n) Pc dS for symmetric dS.
    let mut dp = Mat::zeros(n, c);
    for r in 0..n {
        for j in 0..c {
            let mut acc = 0.0;
            for k in 0..c {
                acc += (p.at(r, k) - mean[k]) * ds.at(k, j);
            }
            *dp.at_mut(r, j) = 2.0 / n as f64 * acc;
        }
    }
    // mean also depends on P through centering.
    for j in 0..c {
        let col_sum: f64 = (0..n).map(|r| dp.at(r, j)).sum();
        dmean[j] -= col_sum;
    }
    for r in 0..n {
        for j in 0..c {
            *dp.at_mut(r, j) += dmean[j] / n as f64;
        }
    }
    (dp, dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Finite-difference check of a scalar function of a single input leaf.
    fn fd_check(
        rng: &mut ChaCha8Rng,
        rows: usize,
        cols: usize,
        build: impl Fn(&mut Tape, NodeId) -> NodeId,
        tol: f64,
    ) {
        let x0 = rand_mat(rows, cols, rng);
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let loss = build(&mut tape, x);
        let grads = tape.backward(loss);
        let analytic = grads.get(x).unwrap().clone();

        let h = 1e-5;
        for i in 0..x0.len() {
            let mut plus = x0.clone();
            plus.data[i] += h;
            let mut minus = x0.clone();
            minus.data[i] -= h;
            let eval = |m: Mat| {
                let mut t = Tape::new();
                let xx = t.leaf(m);
                let l = build(&mut t, xx);
                t.scalar_value(l)
            };
            let num = (eval(plus) - eval(minus)) / (2.0 * h);
            let a = analytic.data[i];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-4);
            assert!(rel < tol, "element {i}: analytic {a}, numeric {num}");
        }
    }

    #[test]
    fn fd_matmul_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = rand_mat(4, 3, &mut rng);
        fd_check(
            &mut rng,
            2,
            4,
            move |t, x| {
                let wn = t.leaf(w.clone());
                let y = t.matmul(x, wn);
                let y = t.tanh(y);
                t.sum_all(y)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_softmax_layernorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        fd_check(
            &mut rng,
            3,
            5,
            |t, x| {
                let g = t.leaf(Mat::from_fn(1, 5, |_, _| 1.3));
                let b = t.leaf(Mat::from_fn(1, 5, |_, _| -0.2));
                let ln = t.layer_norm(x, g, b, 1e-5);
                let sm = t.row_softmax(ln);
                let sq = t.mul(sm, sm);
                t.sum_all(sq)
            },
            1e-5,
        );
    }

    #[test]
    fn fd_normalize_sigmoid_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        fd_check(
            &mut rng,
            2,
            6,
            |t, x| {
                let n = t.l2_normalize_rows(x);
                let s = t.sigmoid(n);
                let r = t.relu(s);
                t.mean_all(r)
            },
            1e-5,
        );
    }

    #[test]
    fn fd_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        fd_check(
            &mut rng,
            4,
            6,
            |t, x| t.cross_entropy_mean(x, &[1, 0, 5, 2]),
            1e-6,
        );
    }

    #[test]
    fn fd_slice_concat_gather() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        fd_check(
            &mut rng,
            5,
            4,
            |t, x| {
                let top = t.slice_rows(x, 0, 2);
                let cols = t.slice_cols(x, 1, 3);
                let colsum = t.sum_all(cols);
                let gathered = t.gather_rows(x, &[4, 0, 4]);
                let joined = t.concat_rows(&[top, gathered]);
                let s = t.sum_all(joined);
                let tr = t.transpose(top);
                let s2 = t.sum_all(tr);
                let a = t.add(s, s2);
                t.add(a, colsum)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_multi_head_attn() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // FD over q, k, v through the fused attention op.
        let q0 = rand_mat(3, 8, &mut rng);
        let k0 = rand_mat(5, 8, &mut rng);
        let v0 = rand_mat(5, 8, &mut rng);
        let build = |t: &mut Tape, q: NodeId, k: NodeId, v: NodeId| {
            let o = t.multi_head_attn(q, k, v, 2);
            let sq = t.mul(o, o);
            t.sum_all(sq)
        };
        let mut tape = Tape::new();
        let (q, k, v) = (
            tape.leaf(q0.clone()),
            tape.leaf(k0.clone()),
            tape.leaf(v0.clone()),
        );
        let loss = build(&mut tape, q, k, v);
        let grads = tape.backward(loss);
        let eval = |qm: Mat, km: Mat, vm: Mat| {
            let mut t = Tape::new();
            let (q, k, v) = (t.leaf(qm), t.leaf(km), t.leaf(vm));
            let l = build(&mut t, q, k, v);
            t.scalar_value(l)
        };
        let h = 1e-6;
        for (which, base, analytic) in [
            (0, &q0, grads.get(q).unwrap()),
            (1, &k0, grads.get(k).unwrap()),
            (2, &v0, grads.get(v).unwrap()),
        ] {
            for i in 0..base.len() {
                let mut plus = base.clone();
                plus.data[i] += h;
                let mut minus = base.clone();
                minus.data[i] -= h;
                let (fp, fm) = match which {
                    0 => (
                        eval(plus, k0.clone(), v0.clone()),
                        eval(minus, k0.clone(), v0.clone()),
                    ),
                    1 => (
                        eval(q0.clone(), plus, v0.clone()),
                        eval(q0.clone(), minus, v0.clone()),
                    ),
                    _ => (
                        eval(q0.clone(), k0.clone(), plus),
                        eval(q0.clone(), k0.clone(), minus),
                    ),
                };
                let num = (fp - fm) / (2.0 * h);
                let a = analytic.data[i];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-4);
                assert!(rel < 1e-5, "input {which} elem {i}: {a} vs {num}");
            }
        }
    }

    #[test]
    fn fused_attention_matches_composed_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let q0 = rand_mat(2, 8, &mut rng);
        let k0 = rand_mat(6, 8, &mut rng);
        let v0 = rand_mat(6, 8, &mut rng);
        let heads = 4;
        let d = 2;

        let mut t = Tape::new();
        let (q, k, v) = (t.leaf(q0.clone()), t.leaf(k0.clone()), t.leaf(v0.clone()));
        let fused = t.multi_head_attn(q, k, v, heads);

        // Reference composition from primitive ops.
        let mut parts = Vec::new();
        for h in 0..heads {
            let qh = t.slice_cols(q, h * d, (h + 1) * d);
            let kh = t.slice_cols(k, h * d, (h + 1) * d);
            let vh = t.slice_cols(v, h * d, (h + 1) * d);
            let kt = t.transpose(kh);
            let scores = t.matmul(qh, kt);
            let scores = t.scale(scores, 1.0 / (d as f64).sqrt());
            let probs = t.row_softmax(scores);
            parts.push(t.matmul(probs, vh));
        }
        let composed = t.concat_cols(&parts);
        let a = t.value(fused).clone();
        let b = t.value(composed).clone();
        for i in 0..a.len() {
            assert!((a.data[i] - b.data[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_pca_project() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Gradient through the eigendecomposition, checked against central
        // differences on both the patches and the query.
        for _ in 0..5 {
            let patches0 = rand_mat(7, 5, &mut rng);
            let query0 = rand_mat(1, 5, &mut rng);
            let build = |t: &mut Tape, p: NodeId, q: NodeId| {
                let y = t.pca_project(p, q, 3);
                let y2 = t.mul(y, y);
                t.sum_all(y2)
            };
            let mut tape = Tape::new();
            let p = tape.leaf(patches0.clone());
            let q = tape.leaf(query0.clone());
            let loss = build(&mut tape, p, q);
            let grads = tape.backward(loss);
            let dp = grads.get(p).unwrap().clone();
            let dq = grads.get(q).unwrap().clone();

            let eval = |pm: Mat, qm: Mat| {
                let mut t = Tape::new();
                let pp = t.leaf(pm);
                let qq = t.leaf(qm);
                let l = build(&mut t, pp, qq);
                t.scalar_value(l)
            };
            let h = 1e-6;
            for i in 0..patches0.len() {
                let mut plus = patches0.clone();
                plus.data[i] += h;
                let mut minus = patches0.clone();
                minus.data[i] -= h;
                let num = (eval(plus, query0.clone()) - eval(minus, query0.clone())) / (2.0 * h);
                let a = dp.data[i];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-4);
                assert!(rel < 1e-4, "patches[{i}]: analytic {a}, numeric {num}");
            }
            for i in 0..query0.len() {
                let mut plus = query0.clone();
                plus.data[i] += h;
                let mut minus = query0.clone();
                minus.data[i] -= h;
                let num = (eval(patches0.clone(), plus) - eval(patches0.clone(), minus)) / (2.0 * h);
                let a = dq.data[i];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-4);
                assert!(rel < 1e-4, "query[{i}]: analytic {a}, numeric {num}");
            }
        }
    }

    #[test]
    fn pca_project_identity_when_full_rank() {
        // With m = C the projection expresses the centered query exactly:
        // reconstructing from all components returns the centered vector.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let patches = rand_mat(9, 4, &mut rng);
        let query = rand_mat(1, 4, &mut rng);
        let (mean, cov) = mean_and_cov(&patches);
        let (vecs, _) = sym_eig(&cov);
        let mut tape = Tape::new();
        let p = tape.leaf(patches.clone());
        let q = tape.leaf(query.clone());
        let y = tape.pca_project(p, q, 4);
        let yv = tape.value(y).clone();
        for i in 0..4 {
            let recon: f64 = (0..4).map(|j| vecs.at(i, j) * yv.at(0, j)).sum();
            assert!((recon - (query.at(0, i) - mean[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_op_wraps_values() {
        let mut tape = Tape::new();
        let x = tape.leaf(Mat::row_vector(vec![3.0 * std::f64::consts::PI, 0.1]));
        let w = tape.wrap(x);
        assert!((tape.value(w).at(0, 0) - std::f64::consts::PI).abs() < 1e-12);
        assert!((tape.value(w).at(0, 1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn backward_seeded_matches_composed() {
        // Splitting one computation across two tapes must give the same
        // parameter gradient as a single tape.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = rand_mat(3, 3, &mut rng);
        let x0 = rand_mat(2, 3, &mut rng);

        let mut full = Tape::new();
        let wn = full.leaf(w.clone());
        let x = full.leaf(x0.clone());
        let h = full.matmul(x, wn);
        let h = full.tanh(h);
        let loss = full.sum_all(h);
        let g_full = full.backward(loss);
        let dw_full = g_full.get(wn).unwrap().clone();

        // Stage 1 tape produces h; stage 2 tape consumes it as a leaf.
        let mut stage1 = Tape::new();
        let wn1 = stage1.leaf(w.clone());
        let x1 = stage1.leaf(x0.clone());
        let h1 = stage1.matmul(x1, wn1);
        let h1 = stage1.tanh(h1);
        let h1_val = stage1.value(h1).clone();

        let mut stage2 = Tape::new();
        let hleaf = stage2.leaf(h1_val);
        let loss2 = stage2.sum_all(hleaf);
        let g2 = stage2.backward(loss2);
        let seed = g2.get(hleaf).unwrap().clone();

        let g1 = stage1.backward_seeded(h1, seed);
        let dw_staged = g1.get(wn1).unwrap().clone();

        for i in 0..dw_full.len() {
            assert!((dw_full.data[i] - dw_staged.data[i]).abs() < 1e-12);
        }
    }
}
