//! Multi-hypothesis trajectory planning: winner-takes-all training on
//! expert demonstrations, then a look at the candidate fan.
//!
//! ```bash
//! cargo run --release -p socnav --example plan
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{ScConfig, SocialContextModel};
use socnav::data::{build_dtpn, plan_records_for_training};
use socnav::nn::ParamStore;
use socnav::planner::train::eval_wta;
use socnav::planner::{train_tpn, wta_loss, Tpn, TpnConfig, TpnTrainConfig};
use socnav::sim::ScenarioKind;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // Frozen, untrained encoders supply the context tokens; the point
    // here is the planner.
    let mut sc_store = ParamStore::new();
    let sc_model = SocialContextModel::init(ScConfig::default(), &mut sc_store, &mut rng);

    let ds = build_dtpn(120, 5, &[ScenarioKind::NarrowHallway]).unwrap();
    let mut store = ParamStore::new();
    let tpn = Tpn::init(TpnConfig::default(), &mut store, &mut rng);
    let records = plan_records_for_training(&ds, 0..ds.len(), &sc_model, &sc_store, &tpn).unwrap();
    let refs: Vec<_> = records.iter().collect();

    let before = eval_wta(&tpn, &store, &refs, 2).unwrap();
    let cfg = TpnTrainConfig {
        epochs: 10,
        batch_size: 10,
        lr: 8e-4,
        weight_decay: 1e-4,
        seed: 2,
        workers: 2,
        verbose: false,
        ..Default::default()
    };
    let log = train_tpn(&tpn, &mut store, &records, &cfg).unwrap();
    let after = eval_wta(&tpn, &store, &refs, 2).unwrap();
    println!("winner-takes-all loss: {before:.4} untrained -> {after:.4} trained");
    println!("best validation epoch: {}", log.best_epoch);

    // Plan once and show the candidate fan with the per-candidate loss.
    let rec = &records[0];
    let candidates = tpn
        .plan(&store, Some(&rec.context_tokens), Some(&rec.grid), &rec.goal)
        .unwrap();
    let expert = socnav::geometry::Trajectory::new(
        (0..rec.expert.rows)
            .map(|r| {
                socnav::geometry::Pose::new(
                    rec.expert.at(r, 0),
                    rec.expert.at(r, 1),
                    rec.expert.at(r, 2),
                )
            })
            .collect(),
    )
    .unwrap();
    let (min_loss, winner) = wta_loss(&candidates, &expert).unwrap();
    println!("candidates (winner {winner}, loss {min_loss:.4}):");
    for (k, traj) in candidates.trajectories.iter().enumerate() {
        let end = traj.last();
        println!(
            "  {k}: ends at ({:+.2}, {:+.2}) heading {:+.2}{}",
            end.x,
            end.y,
            end.phi,
            if k == winner { "  <- winner" } else { "" }
        );
    }
    let expert_end = expert.last();
    println!(
        "  expert ends at ({:+.2}, {:+.2}) heading {:+.2}",
        expert_end.x, expert_end.y, expert_end.phi
    );
}
