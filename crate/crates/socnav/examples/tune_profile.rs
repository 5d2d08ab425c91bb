//! Scratch micro-profile of the encoder forward/backward path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{ScConfig, SocialContextModel};
use socnav::nn::{eig::sym_eig, Mat, ParamStore, Tape};
use socnav::sim::{make_scenario, rasterize_view, ScenarioKind};
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
    let world = make_scenario(ScenarioKind::NarrowHallway, 3);
    let raster = rasterize_view(&world.robot, &world);

    // Raw matmul throughput.
    let a = Mat::from_fn(65, 64, |r, c| ((r * 7 + c) % 13) as f64 * 0.1);
    let b = Mat::from_fn(64, 256, |r, c| ((r * 5 + c) % 11) as f64 * 0.1);
    let t0 = Instant::now();
    let mut sink = 0.0;
    for _ in 0..2000 {
        sink += a.matmul(&b).data[0];
    }
    let dt = t0.elapsed().as_secs_f64();
    let flops = 2.0 * 65.0 * 64.0 * 256.0 * 2000.0;
    println!("matmul 65x64x256: {:.2} GFLOP/s (sink {sink:.1})", flops / dt / 1e9);

    // Eigendecomposition 64x64.
    let raw = Mat::from_fn(64, 64, |r, c| ((r * 31 + c * 17) % 29) as f64 * 0.03);
    let s = raw.matmul(&raw.transpose());
    let t0 = Instant::now();
    let mut sink = 0.0;
    for _ in 0..50 {
        sink += sym_eig(&s).1[0];
    }
    println!(
        "sym_eig 64x64: {:.2} ms each (sink {sink:.0})",
        t0.elapsed().as_secs_f64() * 1000.0 / 50.0
    );

    // Image forward only.
    let t0 = Instant::now();
    for _ in 0..20 {
        let mut t = Tape::new();
        model.forward_image(&mut t, &store, &raster).unwrap();
    }
    println!(
        "image forward: {:.1} ms",
        t0.elapsed().as_secs_f64() * 1000.0 / 20.0
    );

    // Image forward + backward, separately timed.
    let mut fwd_time = 0.0;
    let mut bwd_time = 0.0;
    let mut n_nodes = 0;
    for _ in 0..20 {
        let f0 = Instant::now();
        let mut t = Tape::new();
        let nodes = model.forward_image(&mut t, &store, &raster).unwrap();
        let s = t.sum_all(nodes.embedding);
        let s2 = t.sum_all(nodes.pce);
        let total = t.add(s, s2);
        fwd_time += f0.elapsed().as_secs_f64();
        n_nodes = t.len();
        let b0 = Instant::now();
        let _ = t.backward(total);
        bwd_time += b0.elapsed().as_secs_f64();
    }
    println!(
        "image fwd: {:.1} ms, bwd: {:.1} ms, nodes {}",
        fwd_time * 1000.0 / 20.0,
        bwd_time * 1000.0 / 20.0,
        n_nodes
    );

    // Text forward + backward (40 tokens).
    let tokens: Vec<usize> = (0..40).map(|i| 2 + (i % 60)).collect();
    let t0 = Instant::now();
    for _ in 0..20 {
        let mut t = Tape::new();
        let n = model.forward_text(&mut t, &store, &tokens, 248).unwrap();
        let s = t.sum_all(n);
        let _ = t.backward(s);
    }
    println!(
        "text fwd+bwd: {:.1} ms",
        t0.elapsed().as_secs_f64() * 1000.0 / 20.0
    );
}

#[allow(dead_code)]
fn extra() {}
