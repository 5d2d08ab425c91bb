use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{ScConfig, SocialContextModel};
use socnav::nn::{ParamStore, Tape};
use socnav::sim::{make_scenario, rasterize_view, ScenarioKind};
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let cfg = ScConfig::default();
    println!(
        "patch {} image_dim {} n_patches {}",
        cfg.patch_size,
        cfg.image_dim,
        cfg.n_patches()
    );
    let model = SocialContextModel::init(cfg, &mut store, &mut rng);
    let world = make_scenario(ScenarioKind::NarrowHallway, 3);
    let raster = rasterize_view(&world.robot, &world);
    // warmup
    for _ in 0..5 {
        model.encode_image(&store, &raster).unwrap();
    }
    let t0 = Instant::now();
    for _ in 0..100 {
        let mut t = Tape::new();
        model.forward_image(&mut t, &store, &raster).unwrap();
    }
    println!("image forward: {:.2} ms", t0.elapsed().as_secs_f64() * 10.0);
    let tokens: Vec<usize> = (0..50).map(|i| 2 + (i % 60)).collect();
    let t0 = Instant::now();
    for _ in 0..100 {
        let mut t = Tape::new();
        model.forward_text(&mut t, &store, &tokens, 248).unwrap();
    }
    println!("text forward: {:.2} ms", t0.elapsed().as_secs_f64() * 10.0);
}
