//! Scratch diagnostic for training hyperparameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{retrieval_accuracy, ScConfig, SocialContextModel};
use socnav::nn::ParamStore;
use socnav::selector::{
    selection_accuracy, synthetic_selection_set, train_tsm, SelectionHead, TsmConfig,
    TsmTrainConfig,
};
use socnav::sim::{make_scenario, rasterize_view, teacher_oracle, ScenarioKind};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("sc");

    if what == "sc2" {
        // Generalization probe: minibatch training with a held-out split.
        let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(360);
        let batch: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
        let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
        let epochs: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(30);
        let mut data = Vec::new();
        let kinds = ScenarioKind::ALL;
        let mut seed = 0u64;
        while data.len() < n {
            let kind = kinds[data.len() % kinds.len()];
            let mut world = make_scenario(kind, seed);
            socnav::data::advance_along_expert(&mut world, (seed % 11) as usize);
            data.push((rasterize_view(&world.robot, &world), teacher_oracle(&world)));
            seed += 1;
        }
        let held = data.split_off(n - n / 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let cfg = socnav::context::ScTrainConfig {
            batch_size: batch,
            lr,
            min_lr: lr,
            weight_decay: 0.01,
            epochs,
            seed: 3,
            workers: 2,
            verbose: true,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        socnav::context::train_sc_clip(&model, &mut store, &data, &cfg).unwrap();
        let train_acc = retrieval_accuracy(&model, &store, &data[..held.len()]).unwrap();
        let held_acc = retrieval_accuracy(&model, &store, &held).unwrap();
        let (lt, st) = socnav::context::train::sc_loss_terms(&model, &store, &held).unwrap();
        println!(
            "n={n} batch={batch} lr={lr} epochs={epochs}: train-acc {train_acc:.3} held-acc {held_acc:.3} held-long {lt:.3} held-short {st:.3} wall {:?}",
            t0.elapsed()
        );
        return;
    }

    if what == "sc" {
        let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
        let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let mut data = Vec::new();
        let kinds = ScenarioKind::ALL;
        let mut seed = 0u64;
        while data.len() < 64 {
            let kind = kinds[data.len() % kinds.len()];
            let world = make_scenario(kind, seed);
            data.push((rasterize_view(&world.robot, &world), teacher_oracle(&world)));
            seed += 1;
        }
        let t0 = std::time::Instant::now();
        let cfg = socnav::context::ScTrainConfig {
            batch_size: 64,
            lr,
            weight_decay: 0.01,
            epochs: steps,
            val_fraction: 0.1,
            seed: 3,
            patience: None,
            verbose: false,
            ..Default::default()
        };
        // Train manually step by step to watch the loss.
        use socnav::context::sc_steps_probe;
        let losses = sc_steps_probe(&model, &mut store, &data, steps, lr, cfg.workers).unwrap();
        for (i, l) in losses.iter().enumerate() {
            if i % 10 == 0 || i + 1 == losses.len() {
                println!("step {i}: loss {l:.4}");
            }
        }
        let acc = retrieval_accuracy(&model, &store, &data).unwrap();
        let (long_term, short_term) =
            socnav::context::train::sc_loss_terms(&model, &store, &data).unwrap();
        println!(
            "steps={steps} lr={lr}: accuracy {acc:.3}, long {long_term:.3}, short {short_term:.3}, wall {:?}",
            t0.elapsed()
        );
    } else {
        let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(800);
        let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
        let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(3e-3);
        let samples = synthetic_selection_set(n, 5, 10, 77);
        let split = n * 4 / 5;
        let train: Vec<_> = samples[..split].to_vec();
        let held: Vec<_> = samples[split..].iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut store = ParamStore::new();
        let head = SelectionHead::init(TsmConfig::default(), &mut store, &mut rng);
        let cfg = TsmTrainConfig {
            epochs,
            batch_size: 64,
            lr,
            weight_decay: 1e-5,
            seed: 9,
            verbose: true,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        train_tsm(&head, &mut store, &train, &cfg).unwrap();
        let acc = selection_accuracy(&head, &store, &held).unwrap();
        println!(
            "n={n} epochs={epochs} lr={lr}: accuracy {acc:.3}, wall {:?}",
            t0.elapsed()
        );
    }
}
