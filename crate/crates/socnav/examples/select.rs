//! Text-conditioned trajectory selection on the synthetic separable set:
//! each sample pairs shuffled maneuver templates with an action embedding
//! and the selector learns to pick the matching candidate.
//!
//! ```bash
//! cargo run --release -p socnav --example select
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::nn::ParamStore;
use socnav::selector::{
    selection_accuracy, synthetic_selection_set, train_tsm, SelectionHead, TsmConfig,
    TsmTrainConfig,
};

fn main() {
    let samples = synthetic_selection_set(800, 5, 10, 42);
    let train: Vec<_> = samples[..640].to_vec();
    let held: Vec<_> = samples[640..].iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let head = SelectionHead::init(TsmConfig::default(), &mut store, &mut rng);
    println!(
        "untrained held-out accuracy: {:.3}",
        selection_accuracy(&head, &store, &held).unwrap()
    );

    let cfg = TsmTrainConfig {
        epochs: 60,
        batch_size: 64,
        lr: 3e-3,
        weight_decay: 1e-5,
        seed: 4,
        workers: 2,
        verbose: false,
        ..Default::default()
    };
    let log = train_tsm(&head, &mut store, &train, &cfg).unwrap();
    println!(
        "trained held-out accuracy:   {:.3} (best val CE {:.4})",
        selection_accuracy(&head, &store, &held).unwrap(),
        log.best_val_loss
    );

    // Inspect one decision.
    let s = &samples[650];
    let cands = socnav::planner::CandidateSet::new(
        s.candidates
            .iter()
            .map(|m| {
                socnav::geometry::Trajectory::new(
                    (0..m.rows)
                        .map(|r| socnav::geometry::Pose::new(m.at(r, 0), m.at(r, 1), m.at(r, 2)))
                        .collect(),
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap();
    let (picked, logits) = head.select(&store, &cands, &s.text_embedding).unwrap();
    println!(
        "sample 650: label {}, picked {picked}, logits {:?}",
        s.label,
        logits.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
}
