//! Winner-takes-all training for the planner. Social-context tokens are
//! precomputed with the frozen encoders, so each epoch touches only
//! planner parameters. Samples are independent, so batches fan out across
//! workers with gradients reduced in sample order.

use super::{wta_loss_node, Tpn, VoxelGrid};
use crate::geometry::Pose;
use crate::nn::{cosine_lr, default_workers, EpochStats, GradAccumulator, LrSchedule, Mat, ParamStore, Tape, TrainLog};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One training sample: precomputed context tokens, voxelized scan, the
/// goal in the planning frame, and the expert's poses as a matrix.
#[derive(Debug, Clone)]
pub struct TpnRecord {
    pub context_tokens: Mat,
    pub grid: VoxelGrid,
    pub goal: Pose,
    pub expert: Mat,
    pub episode: u64,
}

#[derive(Debug, Clone)]
pub struct TpnTrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub min_lr: f64,
    pub seed: u64,
    /// Fraction of episodes held out for validation.
    pub val_fraction: f64,
    pub patience: Option<usize>,
    pub workers: usize,
    pub verbose: bool,
}

impl Default for TpnTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            lr: 8e-4,
            weight_decay: 1e-4,
            epochs: 500,
            min_lr: 0.0,
            seed: 0,
            val_fraction: 0.1,
            patience: None,
            workers: default_workers(),
            verbose: false,
        }
    }
}

/// Mean winner-takes-all loss over records (evaluation mode).
pub fn eval_wta(
    tpn: &Tpn,
    store: &ParamStore,
    records: &[&TpnRecord],
    workers: usize,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let chunk = records.len().div_ceil(workers.max(1));
    let totals: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|recs| {
                scope.spawn(move || {
                    let mut total = 0.0;
                    for rec in recs {
                        let mut t = Tape::new();
                        let nodes = tpn.forward(
                            &mut t,
                            store,
                            Some(&rec.context_tokens),
                            Some(&rec.grid),
                            &rec.goal,
                        );
                        let expert = t.leaf(rec.expert.clone());
                        let (_, _, value) =
                            wta_loss_node(&mut t, &nodes, expert, super::WtaMode::WinnerOnly);
                        total += value;
                    }
                    total
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Ok(totals.iter().sum::<f64>() / records.len() as f64)
}

fn batch_step(
    tpn: &Tpn,
    store: &mut ParamStore,
    batch: &[&TpnRecord],
    workers: usize,
) -> Result<f64> {
    let n = batch.len();
    let scale = 1.0 / n as f64;
    let chunk = n.div_ceil(workers.max(1));
    let mode = tpn.cfg.wta_mode;
    let results: Vec<(f64, GradAccumulator)> = std::thread::scope(|scope| {
        let store_ref: &ParamStore = store;
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|recs| {
                scope.spawn(move || {
                    let mut total = 0.0;
                    let mut acc = GradAccumulator::default();
                    for rec in recs {
                        let mut t = Tape::new();
                        let nodes = tpn.forward(
                            &mut t,
                            store_ref,
                            Some(&rec.context_tokens),
                            Some(&rec.grid),
                            &rec.goal,
                        );
                        let expert = t.leaf(rec.expert.clone());
                        let (loss, _, value) = wta_loss_node(&mut t, &nodes, expert, mode);
                        total += value;
                        let grads = t.backward_seeded(loss, Mat::scalar(scale));
                        t.accumulate_param_grads(&grads, &mut acc);
                    }
                    (total, acc)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut total = 0.0;
    for (sub, acc) in results {
        total += sub;
        acc.apply_to(store);
    }
    if !total.is_finite() {
        return Err(Error::Diverged(format!("wta loss {total}")));
    }
    Ok(total / n as f64)
}

/// Train the planner, holding out whole episodes for validation and
/// keeping the best-validation checkpoint.
pub fn train_tpn(
    tpn: &Tpn,
    store: &mut ParamStore,
    records: &[TpnRecord],
    cfg: &TpnTrainConfig,
) -> Result<TrainLog> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Episode-level split.
    let mut episodes: Vec<u64> = {
        let mut e: Vec<u64> = records.iter().map(|r| r.episode).collect();
        e.sort_unstable();
        e.dedup();
        e
    };
    episodes.shuffle(&mut rng);
    let n_val_ep = ((episodes.len() as f64 * cfg.val_fraction).round() as usize)
        .clamp(1, episodes.len().saturating_sub(1).max(1));
    let val_eps: std::collections::HashSet<u64> =
        episodes.iter().take(n_val_ep).copied().collect();
    let train_recs: Vec<&TpnRecord> = records
        .iter()
        .filter(|r| !val_eps.contains(&r.episode))
        .collect();
    let val_recs: Vec<&TpnRecord> = records
        .iter()
        .filter(|r| val_eps.contains(&r.episode))
        .collect();
    let (train_recs, val_recs) = if train_recs.is_empty() || val_recs.is_empty() {
        // Degenerate datasets (e.g. one episode): fall back to record split.
        let k = records.len().div_ceil(10).max(1).min(records.len() - 1);
        (
            records.iter().skip(k).collect::<Vec<_>>(),
            records.iter().take(k).collect::<Vec<_>>(),
        )
    } else {
        (train_recs, val_recs)
    };

    let steps_per_epoch = train_recs.len().div_ceil(cfg.batch_size).max(1);
    let sched = LrSchedule::new(cfg.lr, (cfg.epochs * steps_per_epoch).max(1), cfg.min_lr)?;

    let mut log = TrainLog::default();
    let mut best_val = f64::INFINITY;
    let mut best_snapshot = store.snapshot();
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut idx: Vec<usize> = (0..train_recs.len()).collect();
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for ids in idx.chunks(cfg.batch_size) {
            let batch: Vec<&TpnRecord> = ids.iter().map(|&i| train_recs[i]).collect();
            store.zero_grads();
            let loss = batch_step(tpn, store, &batch, cfg.workers)?;
            let lr = cosine_lr(&sched, step.min(sched.total_steps))?;
            store.adamw_step(lr, cfg.weight_decay)?;
            step += 1;
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = epoch_loss / seen.max(1) as f64;
        let val_loss = eval_wta(tpn, store, &val_recs, cfg.workers)?;
        let lr_now = cosine_lr(&sched, step.min(sched.total_steps))?;
        if cfg.verbose {
            eprintln!("tpn epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        }
        log.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr: lr_now,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_snapshot = store.snapshot();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if let Some(p) = cfg.patience {
                if since_best >= p {
                    break;
                }
            }
        }
    }
    store.restore(&best_snapshot);
    log.best_epoch = best_epoch;
    log.best_val_loss = best_val;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{voxelize, TpnConfig};
    use rand::RngExt;

    fn random_record(rng: &mut ChaCha8Rng, cfg: &TpnConfig, episode: u64) -> TpnRecord {
        let points: Vec<(f64, f64)> = (0..10)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        TpnRecord {
            context_tokens: Mat::from_fn(3, cfg.context_dim, |_, _| rng.random_range(-0.5..0.5)),
            grid: voxelize(&points, cfg.voxel),
            goal: Pose::new(rng.random_range(1.0..4.0), rng.random_range(-1.0..1.0), 0.0),
            expert: Mat::from_fn(cfg.horizon, 3, |r, _| 0.25 * (r + 1) as f64),
            episode,
        }
    }

    #[test]
    fn single_sample_overfit() {
        // The spec's overfit probe: one record, a couple hundred steps,
        // training loss under 1e-3.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let tpn = Tpn::init(TpnConfig::tiny(), &mut store, &mut rng);
        let rec = random_record(&mut rng, &tpn.cfg, 0);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            store.zero_grads();
            last = batch_step(&tpn, &mut store, &[&rec], 1).unwrap();
            store.adamw_step(3e-3, 0.0).unwrap();
        }
        assert!(last < 1e-3, "overfit loss {last}");
    }

    #[test]
    fn training_reduces_validation_loss_and_keeps_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut store = ParamStore::new();
        let tpn = Tpn::init(TpnConfig::tiny(), &mut store, &mut rng);
        let records: Vec<TpnRecord> = (0..30)
            .map(|i| random_record(&mut rng, &tpn.cfg, i / 3))
            .collect();
        let refs: Vec<&TpnRecord> = records.iter().collect();
        let before = eval_wta(&tpn, &store, &refs, 2).unwrap();
        let cfg = TpnTrainConfig {
            epochs: 30,
            batch_size: 10,
            lr: 2e-3,
            weight_decay: 1e-4,
            seed: 5,
            workers: 2,
            ..Default::default()
        };
        let log = train_tpn(&tpn, &mut store, &records, &cfg).unwrap();
        let after = eval_wta(&tpn, &store, &refs, 2).unwrap();
        assert!(after < before * 0.5, "before {before}, after {after}");
        // Retained checkpoint is the best-validation one.
        let final_val = log.final_val_loss();
        assert!(log.best_val_loss <= final_val + 1e-12);
    }

    #[test]
    fn parallel_grads_deterministic_and_match_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut store = ParamStore::new();
        let tpn = Tpn::init(TpnConfig::tiny(), &mut store, &mut rng);
        let records: Vec<TpnRecord> = (0..6)
            .map(|i| random_record(&mut rng, &tpn.cfg, i))
            .collect();
        let batch: Vec<&TpnRecord> = records.iter().collect();

        // Same worker count twice: bit-identical.
        store.zero_grads();
        batch_step(&tpn, &mut store, &batch, 3).unwrap();
        let first: Vec<(String, Mat)> = store
            .names()
            .map(|n| (n.to_string(), store.grad(n).clone()))
            .collect();
        store.zero_grads();
        batch_step(&tpn, &mut store, &batch, 3).unwrap();
        for (name, g) in &first {
            let gp = store.grad(name);
            for i in 0..g.len() {
                assert_eq!(
                    g.data[i].to_bits(),
                    gp.data[i].to_bits(),
                    "nondeterministic grad in {name}[{i}]"
                );
            }
        }

        // Serial differs only by summation order.
        store.zero_grads();
        batch_step(&tpn, &mut store, &batch, 1).unwrap();
        for (name, g) in &first {
            let gs = store.grad(name);
            for i in 0..g.len() {
                let denom = g.data[i].abs().max(gs.data[i].abs()).max(1e-9);
                assert!(
                    (g.data[i] - gs.data[i]).abs() / denom < 1e-9,
                    "serial/parallel drift in {name}[{i}]"
                );
            }
        }
    }
}
