//! Trainable building blocks: linear maps, layer norm, multi-head
//! cross-attention with its residual, the residual feed-forward block, and
//! a GRU cell. Each block registers named parameters in a [`ParamStore`]
//! and applies itself on a [`Tape`].

use super::mat::Mat;
use super::params::ParamStore;
use super::tape::{NodeId, Tape};
use rand::Rng;

pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Hidden expansion ratio of residual feed-forward blocks.
pub const FFN_EXPANSION: usize = 4;

#[derive(Debug, Clone)]
pub struct Linear {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Descriptor only; parameters must already exist (e.g. from a loaded
    /// checkpoint) or be created later via [`Linear::init`].
    pub fn new(name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            name: name.to_string(),
            in_dim,
            out_dim,
        }
    }

    pub fn init(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        store.insert(&format!("{name}.w"), Mat::xavier(in_dim, out_dim, rng));
        store.insert(&format!("{name}.b"), Mat::zeros(1, out_dim));
        Self::new(name, in_dim, out_dim)
    }

    pub fn apply(&self, t: &mut Tape, store: &ParamStore, x: NodeId) -> NodeId {
        let w = t.param(store, &format!("{}.w", self.name));
        let b = t.param(store, &format!("{}.b", self.name));
        let y = t.matmul(x, w);
        t.add_row(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub name: String,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(name: &str, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            dim,
        }
    }

    pub fn init(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        store.insert(&format!("{name}.g"), Mat::from_fn(1, dim, |_, _| 1.0));
        store.insert(&format!("{name}.b"), Mat::zeros(1, dim));
        Self::new(name, dim)
    }

    pub fn apply(&self, t: &mut Tape, store: &ParamStore, x: NodeId) -> NodeId {
        let g = t.param(store, &format!("{}.g", self.name));
        let b = t.param(store, &format!("{}.b", self.name));
        t.layer_norm(x, g, b, LAYER_NORM_EPS)
    }
}

/// Multi-head cross-attention with the post-attention residual and layer
/// norm fused in: `apply` returns `LN(q + A(q, kv))`.
#[derive(Debug, Clone)]
pub struct CrossAttention {
    pub name: String,
    pub dim: usize,
    pub heads: usize,
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    ln: LayerNorm,
}

impl CrossAttention {
    pub fn new(name: &str, dim: usize, heads: usize) -> Self {
        assert!(dim % heads == 0, "dim {dim} not divisible by heads {heads}");
        Self {
            name: name.to_string(),
            dim,
            heads,
            wq: Linear::new(&format!("{name}.wq"), dim, dim),
            wk: Linear::new(&format!("{name}.wk"), dim, dim),
            wv: Linear::new(&format!("{name}.wv"), dim, dim),
            wo: Linear::new(&format!("{name}.wo"), dim, dim),
            ln: LayerNorm::new(&format!("{name}.ln"), dim),
        }
    }

    pub fn init(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut impl Rng) -> Self {
        assert!(dim % heads == 0, "dim {dim} not divisible by heads {heads}");
        Self {
            name: name.to_string(),
            dim,
            heads,
            wq: Linear::init(store, &format!("{name}.wq"), dim, dim, rng),
            wk: Linear::init(store, &format!("{name}.wk"), dim, dim, rng),
            wv: Linear::init(store, &format!("{name}.wv"), dim, dim, rng),
            wo: Linear::init(store, &format!("{name}.wo"), dim, dim, rng),
            ln: LayerNorm::init(store, &format!("{name}.ln"), dim),
        }
    }

    pub fn apply(&self, t: &mut Tape, store: &ParamStore, q: NodeId, kv: NodeId) -> NodeId {
        let attn = self.attend(t, store, q, kv);
        let res = t.add(q, attn);
        self.ln.apply(t, store, res)
    }

    /// The raw attention output `A(q, kv)` without residual or norm.
    pub fn attend(&self, t: &mut Tape, store: &ParamStore, q: NodeId, kv: NodeId) -> NodeId {
        let qp = self.wq.apply(t, store, q);
        let kp = self.wk.apply(t, store, kv);
        let vp = self.wv.apply(t, store, kv);
        let cat = t.multi_head_attn(qp, kp, vp, self.heads);
        self.wo.apply(t, store, cat)
    }
}

/// Two-layer ReLU feed-forward block with residual and layer norm:
/// `apply` returns `LN(x + FFN(x))`.
#[derive(Debug, Clone)]
pub struct ResidualFfn {
    pub name: String,
    pub dim: usize,
    l1: Linear,
    l2: Linear,
    ln: LayerNorm,
}

impl ResidualFfn {
    pub fn new(name: &str, dim: usize) -> Self {
        let hidden = dim * FFN_EXPANSION;
        Self {
            name: name.to_string(),
            dim,
            l1: Linear::new(&format!("{name}.l1"), dim, hidden),
            l2: Linear::new(&format!("{name}.l2"), hidden, dim),
            ln: LayerNorm::new(&format!("{name}.ln"), dim),
        }
    }

    pub fn init(store: &mut ParamStore, name: &str, dim: usize, rng: &mut impl Rng) -> Self {
        let hidden = dim * FFN_EXPANSION;
        Self {
            name: name.to_string(),
            dim,
            l1: Linear::init(store, &format!("{name}.l1"), dim, hidden, rng),
            l2: Linear::init(store, &format!("{name}.l2"), hidden, dim, rng),
            ln: LayerNorm::init(store, &format!("{name}.ln"), dim),
        }
    }

    pub fn apply(&self, t: &mut Tape, store: &ParamStore, x: NodeId) -> NodeId {
        let h = self.l1.apply(t, store, x);
        let h = t.relu(h);
        let y = self.l2.apply(t, store, h);
        let res = t.add(x, y);
        self.ln.apply(t, store, res)
    }
}

/// A single gated recurrent unit cell. `step` maps hidden state `(1, H)`
/// and input `(1, I)` to the next hidden state.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub name: String,
    pub in_dim: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(name: &str, in_dim: usize, hidden: usize) -> Self {
        Self {
            name: name.to_string(),
            in_dim,
            hidden,
        }
    }

    pub fn init(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        for gate in ["z", "r", "h"] {
            store.insert(
                &format!("{name}.w{gate}"),
                Mat::uniform_scaled(in_dim, hidden, hidden, rng),
            );
            store.insert(
                &format!("{name}.u{gate}"),
                Mat::uniform_scaled(hidden, hidden, hidden, rng),
            );
            store.insert(&format!("{name}.b{gate}"), Mat::zeros(1, hidden));
        }
        Self::new(name, in_dim, hidden)
    }

    pub fn step(&self, t: &mut Tape, store: &ParamStore, h: NodeId, x: NodeId) -> NodeId {
        let gate = |t: &mut Tape, which: &str, hh: NodeId, xx: NodeId| {
            let w = t.param(store, &format!("{}.w{which}", self.name));
            let u = t.param(store, &format!("{}.u{which}", self.name));
            let b = t.param(store, &format!("{}.b{which}", self.name));
            let a = t.matmul(xx, w);
            let c = t.matmul(hh, u);
            let s = t.add(a, c);
            t.add_row(s, b)
        };
        let z = gate(t, "z", h, x);
        let z = t.sigmoid(z);
        let r = gate(t, "r", h, x);
        let r = t.sigmoid(r);
        let rh = t.mul(r, h);
        let cand = gate(t, "h", rh, x);
        let cand = t.tanh(cand);
        // h' = (1 - z) * h + z * cand
        let one = t.leaf(Mat::from_fn(1, self.hidden, |_, _| 1.0));
        let omz = t.sub(one, z);
        let keep = t.mul(omz, h);
        let new = t.mul(z, cand);
        t.add(keep, new)
    }
}
