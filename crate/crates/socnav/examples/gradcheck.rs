//! Finite-difference gradient checks over the trainable blocks, the same
//! harness the test suite uses.
//!
//! ```bash
//! cargo run --release -p socnav --example gradcheck
//! ```

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socnav::nn::{grad_check, CrossAttention, GruCell, Mat, ParamStore, ResidualFfn, Tape};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // Cross-attention layer with residual + norm.
    let mut store = ParamStore::new();
    let attn = CrossAttention::init(&mut store, "a", 8, 2, &mut rng);
    let q0 = Mat::from_fn(2, 8, |_, _| rng.random_range(-1.0..1.0));
    let kv0 = Mat::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
    let report = grad_check(
        &mut store,
        |s| {
            let mut t = Tape::new();
            let q = t.leaf(q0.clone());
            let kv = t.leaf(kv0.clone());
            let out = attn.apply(&mut t, s, q, kv);
            let sq = t.mul(out, out);
            let loss = t.sum_all(sq);
            (t, loss)
        },
        1e-4,
    )
    .unwrap();
    println!(
        "attention layer: max rel err {:.2e} -> {}",
        report.max_rel_err,
        if report.pass() { "pass" } else { "FAIL" }
    );

    // Residual feed-forward block.
    let mut store = ParamStore::new();
    let ffn = ResidualFfn::init(&mut store, "f", 8, &mut rng);
    let x0 = Mat::from_fn(3, 8, |_, _| rng.random_range(-1.0..1.0));
    let report = grad_check(
        &mut store,
        |s| {
            let mut t = Tape::new();
            let x = t.leaf(x0.clone());
            let out = ffn.apply(&mut t, s, x);
            let sq = t.mul(out, out);
            let loss = t.sum_all(sq);
            (t, loss)
        },
        1e-4,
    )
    .unwrap();
    println!(
        "residual ffn:    max rel err {:.2e} -> {}",
        report.max_rel_err,
        if report.pass() { "pass" } else { "FAIL" }
    );

    // GRU cell unrolled three steps.
    let mut store = ParamStore::new();
    let gru = GruCell::init(&mut store, "g", 4, 6, &mut rng);
    let xs: Vec<Mat> = (0..3)
        .map(|_| Mat::from_fn(1, 4, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let report = grad_check(
        &mut store,
        |s| {
            let mut t = Tape::new();
            let mut h = t.leaf(Mat::zeros(1, 6));
            for x0 in &xs {
                let x = t.leaf(x0.clone());
                h = gru.step(&mut t, s, h, x);
            }
            let sq = t.mul(h, h);
            let loss = t.sum_all(sq);
            (t, loss)
        },
        1e-4,
    )
    .unwrap();
    println!(
        "gru (3 steps):   max rel err {:.2e} -> {}",
        report.max_rel_err,
        if report.pass() { "pass" } else { "FAIL" }
    );
}
