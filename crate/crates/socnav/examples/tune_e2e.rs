//! Scratch end-to-end spike: quick-train the whole stack, then roll
//! episodes in every family and report reach/collision rates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::config::RunConfig;
use socnav::context::{train_sc_clip, retrieval_accuracy, ScConfig, ScTrainConfig, SocialContextModel};
use socnav::data::{build_dsc, build_dtpn, build_dtsm, curate_database, plan_records_for_training};
use socnav::nn::ParamStore;
use socnav::pipeline::{run_episode, Ablation, EpisodeOptions, Stack};
use socnav::planner::{train_tpn, Tpn, TpnConfig, TpnTrainConfig};
use socnav::planner::train::eval_wta;
use socnav::selector::{train_tsm, SelectionHead, TsmConfig, TsmSample, TsmTrainConfig};
use socnav::sim::{make_scenario, ScenarioKind};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sc_steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let tpn_epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(15);
    let n_dsc: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(400);
    let n_dtpn: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(400);
    let cfg = RunConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let t0 = Instant::now();
    let dsc = build_dsc(n_dsc, 10, &[]).unwrap();
    println!("[{:?}] dsc built: {}", t0.elapsed(), dsc.len());
    let sc_data: Vec<_> = (0..dsc.len())
        .map(|i| dsc.sc_record(i).map(|r| (r.raster, r.caption)).unwrap())
        .collect();
    let mut sc_store = ParamStore::new();
    let sc_model = SocialContextModel::init(ScConfig::default(), &mut sc_store, &mut rng);
    let sc_cfg = ScTrainConfig {
        batch_size: 64,
        lr: 2e-3,
        min_lr: 2e-3, // constant rate: annealing starves short runs
        weight_decay: 0.01,
        epochs: sc_steps / (n_dsc * 9 / 10 / 64).max(1),
        seed: 2,
        workers: cfg.workers,
        verbose: true,
        ..Default::default()
    };
    train_sc_clip(&sc_model, &mut sc_store, &sc_data, &sc_cfg).unwrap();
    let held: Vec<_> = sc_data[..100.min(sc_data.len())].to_vec();
    println!(
        "[{:?}] sc trained; retrieval on first 100: {:.3}",
        t0.elapsed(),
        retrieval_accuracy(&sc_model, &sc_store, &held).unwrap()
    );

    let dtpn = build_dtpn(n_dtpn, 20, &[]).unwrap();
    println!("[{:?}] dtpn built: {}", t0.elapsed(), dtpn.len());
    let mut tpn_store = ParamStore::new();
    let tpn = Tpn::init(TpnConfig::default(), &mut tpn_store, &mut rng);
    let records =
        plan_records_for_training(&dtpn, 0..dtpn.len(), &sc_model, &sc_store, &tpn).unwrap();
    let refs: Vec<_> = records.iter().collect();
    let untrained = eval_wta(&tpn, &tpn_store, &refs, cfg.workers).unwrap();
    let tpn_cfg = TpnTrainConfig {
        batch_size: 10,
        lr: 8e-4,
        min_lr: 4e-4,
        weight_decay: 1e-4,
        epochs: tpn_epochs,
        seed: 3,
        workers: cfg.workers,
        verbose: true,
        ..Default::default()
    };
    let log = train_tpn(&tpn, &mut tpn_store, &records, &tpn_cfg).unwrap();
    let trained = eval_wta(&tpn, &tpn_store, &refs, cfg.workers).unwrap();
    println!(
        "[{:?}] tpn trained: wta {untrained:.4} -> {trained:.4} (best val {:.4})",
        t0.elapsed(),
        log.best_val_loss
    );

    let db = curate_database(&dsc, 256, 4, &sc_model, &sc_store).unwrap();
    let dtsm = build_dtsm(300, 30, &[], &sc_model, &sc_store, &tpn, &tpn_store).unwrap();
    println!("[{:?}] dtsm built: {}", t0.elapsed(), dtsm.len());
    let samples: Vec<TsmSample> = (0..dtsm.len())
        .map(|i| {
            let r = dtsm.sel_record(i).unwrap();
            TsmSample {
                candidates: socnav::selector::candidate_mats(&r.candidates),
                text_embedding: r.text_embedding,
                label: r.label,
            }
        })
        .collect();
    // Label distribution sanity.
    let mut counts = [0usize; 5];
    for s in &samples {
        counts[s.label] += 1;
    }
    println!("label distribution: {counts:?}");
    let mut tsm_store = ParamStore::new();
    let tsm = SelectionHead::init(TsmConfig::default(), &mut tsm_store, &mut rng);
    let tsm_cfg = TsmTrainConfig {
        batch_size: 64,
        lr: 3e-3,
        weight_decay: 1e-5,
        epochs: 60,
        seed: 5,
        workers: cfg.workers,
        verbose: false,
        ..Default::default()
    };
    let log = train_tsm(&tsm, &mut tsm_store, &samples, &tsm_cfg).unwrap();
    println!("[{:?}] tsm trained (best val {:.4})", t0.elapsed(), log.best_val_loss);

    let mut stack = Stack {
        sc_model,
        sc_store,
        db,
        tpn,
        tpn_store,
        tsm,
        tsm_store,
    };

    let opts = EpisodeOptions::default();
    for kind in ScenarioKind::ALL {
        let mut reached = 0;
        let mut wall = 0;
        let mut mse_sum = 0.0;
        for seed in 100..105u64 {
            let world = make_scenario(kind, seed);
            let r = run_episode(&mut stack, &world, Ablation::FULL, &opts).unwrap();
            if r.reached_goal {
                reached += 1;
            }
            if r.wall_collision {
                wall += 1;
            }
            mse_sum += r.mse;
        }
        println!(
            "{:28} reached {reached}/5 wall_collisions {wall} mean_mse {:.3}",
            kind.name(),
            mse_sum / 5.0
        );
    }
    println!("[{:?}] done", t0.elapsed());
}
