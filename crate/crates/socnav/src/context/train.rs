//! Contrastive distillation training for the encoder pair: AdamW with a
//! cosine-annealed learning rate, seeded shuffling, a validation split,
//! and best-checkpoint keeping. Batch forwards fan out across worker
//! threads; gradients are reduced in sample order so results stay
//! bit-deterministic.

use super::{tokenize_caption, SocialContextModel, TokenizedCaption};
use crate::nn::{cosine_lr, default_workers, EpochStats, GradAccumulator, LrSchedule, Mat, ParamStore, Tape, TrainLog};
use crate::sim::raster::Raster;
use crate::sim::CaptionPair;
use crate::text::Tokenizer;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ScTrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub min_lr: f64,
    pub seed: u64,
    pub val_fraction: f64,
    /// Stop when validation loss has not improved for this many epochs.
    pub patience: Option<usize>,
    pub workers: usize,
    pub verbose: bool,
}

impl Default for ScTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            lr: 1e-4,
            weight_decay: 0.01,
            epochs: 100,
            min_lr: 0.0,
            seed: 0,
            val_fraction: 0.1,
            patience: None,
            workers: default_workers(),
            verbose: false,
        }
    }
}

/// Per-sample embeddings computed on worker tapes, to be joined into the
/// batch loss on a main tape.
struct SampleForward {
    tape: Tape,
    e_img: usize,
    e_pce: usize,
    e_long: usize,
    e_short: usize,
}

fn forward_samples(
    model: &SocialContextModel,
    store: &ParamStore,
    rasters: &[&Raster],
    captions: &[&TokenizedCaption],
    workers: usize,
) -> Result<Vec<SampleForward>> {
    let n = rasters.len();
    let chunk = n.div_ceil(workers.max(1));
    let results: Vec<Result<Vec<SampleForward>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = rasters
            .chunks(chunk)
            .zip(captions.chunks(chunk))
            .map(|(rs, cs)| {
                scope.spawn(move || {
                    let mut fwds = Vec::with_capacity(rs.len());
                    for (r, c) in rs.iter().zip(cs) {
                        let mut tape = Tape::new();
                        let img = model.forward_image(&mut tape, store, r)?;
                        let e_long = model.forward_text(
                            &mut tape,
                            store,
                            &c.long,
                            model.cfg.max_long_tokens,
                        )?;
                        let e_short = model.forward_text(
                            &mut tape,
                            store,
                            &c.short,
                            model.cfg.max_short_tokens,
                        )?;
                        fwds.push(SampleForward {
                            tape,
                            e_img: img.embedding,
                            e_pce: img.pce,
                            e_long,
                            e_short,
                        });
                    }
                    Ok(fwds)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut fwds = Vec::with_capacity(n);
    for r in results {
        fwds.extend(r?);
    }
    Ok(fwds)
}

/// One training step over a batch: forward on worker tapes, the
/// contrastive join on a main tape, then seeded backward per sample with
/// gradients reduced in sample order. Returns the batch loss.
fn sc_batch_step(
    model: &SocialContextModel,
    store: &mut ParamStore,
    rasters: &[&Raster],
    captions: &[&TokenizedCaption],
    workers: usize,
    train: bool,
) -> Result<f64> {
    let n = rasters.len();
    let mut fwds = forward_samples(model, store, rasters, captions, workers)?;

    let mut main = Tape::new();
    let mut img_rows = Vec::with_capacity(n);
    let mut pce_rows = Vec::with_capacity(n);
    let mut long_rows = Vec::with_capacity(n);
    let mut short_rows = Vec::with_capacity(n);
    for f in &fwds {
        img_rows.push(main.leaf(f.tape.value(f.e_img).clone()));
        pce_rows.push(main.leaf(f.tape.value(f.e_pce).clone()));
        long_rows.push(main.leaf(f.tape.value(f.e_long).clone()));
        short_rows.push(main.leaf(f.tape.value(f.e_short).clone()));
    }
    let ei = main.concat_rows(&img_rows);
    let ep = main.concat_rows(&pce_rows);
    let el = main.concat_rows(&long_rows);
    let es = main.concat_rows(&short_rows);
    let labels: Vec<usize> = (0..n).collect();
    let elt = main.transpose(el);
    let logits_long = main.matmul(ei, elt);
    let logits_long = main.scale(logits_long, model.cfg.logit_scale);
    let loss_long = main.cross_entropy_mean(logits_long, &labels);
    let est = main.transpose(es);
    let logits_short = main.matmul(ep, est);
    let logits_short = main.scale(logits_short, model.cfg.logit_scale);
    let loss_short = main.cross_entropy_mean(logits_short, &labels);
    let loss = main.add(loss_long, loss_short);
    let loss_value = main.scalar_value(loss);
    if !loss_value.is_finite() {
        return Err(Error::Diverged(format!("contrastive loss {loss_value}")));
    }
    if !train {
        return Ok(loss_value);
    }

    let main_grads = main.backward(loss);
    let seeds: Vec<[Mat; 4]> = (0..n)
        .map(|i| {
            [
                main_grads.get(img_rows[i]).unwrap().clone(),
                main_grads.get(pce_rows[i]).unwrap().clone(),
                main_grads.get(long_rows[i]).unwrap().clone(),
                main_grads.get(short_rows[i]).unwrap().clone(),
            ]
        })
        .collect();

    // Backward on worker tapes; each worker folds its samples into one
    // gradient buffer, merged in worker order.
    let chunk = n.div_ceil(workers.max(1));
    let partials: Vec<GradAccumulator> = std::thread::scope(|scope| {
        let handles: Vec<_> = fwds
            .chunks_mut(chunk)
            .zip(seeds.chunks(chunk))
            .map(|(fchunk, schunk)| {
                scope.spawn(move || {
                    let mut acc = GradAccumulator::default();
                    for (f, seed) in fchunk.iter_mut().zip(schunk) {
                        let [gi, gp, gl, gs] = seed.clone();
                        let grads = f.tape.backward_seeded_multi(vec![
                            (f.e_img, gi),
                            (f.e_pce, gp),
                            (f.e_long, gl),
                            (f.e_short, gs),
                        ]);
                        f.tape.accumulate_param_grads(&grads, &mut acc);
                    }
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for acc in partials {
        acc.apply_to(store);
    }
    Ok(loss_value)
}

/// Evaluation-mode loss over a slice, batched.
pub fn eval_loss(
    model: &SocialContextModel,
    store: &mut ParamStore,
    data: &[(Raster, TokenizedCaption)],
    batch_size: usize,
    workers: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in data.chunks(batch_size.max(2)) {
        if chunk.len() < 2 {
            continue;
        }
        let rasters: Vec<&Raster> = chunk.iter().map(|(r, _)| r).collect();
        let caps: Vec<&TokenizedCaption> = chunk.iter().map(|(_, c)| c).collect();
        let loss = sc_batch_step(model, store, &rasters, &caps, workers, false)?;
        total += loss * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count.max(1) as f64)
}

/// Train the encoder pair on (raster, caption) pairs. Returns the log;
/// parameters in `store` are left at the best-validation epoch.
pub fn train_sc_clip(
    model: &SocialContextModel,
    store: &mut ParamStore,
    data: &[(Raster, CaptionPair)],
    cfg: &ScTrainConfig,
) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tok = Tokenizer::new();
    let tokenized: Vec<(Raster, TokenizedCaption)> = data
        .iter()
        .map(|(r, c)| (r.clone(), tokenize_caption(&tok, c)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..tokenized.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((tokenized.len() as f64 * cfg.val_fraction).round() as usize)
        .clamp(1, tokenized.len().saturating_sub(1).max(1));
    let (val_idx, train_idx) = order.split_at(n_val.min(order.len().saturating_sub(2)));
    let val_set: Vec<(Raster, TokenizedCaption)> =
        val_idx.iter().map(|&i| tokenized[i].clone()).collect();
    let train_set: Vec<(Raster, TokenizedCaption)> =
        train_idx.iter().map(|&i| tokenized[i].clone()).collect();

    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size).max(1);
    let sched = LrSchedule::new(cfg.lr, (cfg.epochs * steps_per_epoch).max(1), cfg.min_lr)?;

    let mut log = TrainLog::default();
    let mut best_val = f64::INFINITY;
    let mut best_snapshot = store.snapshot();
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut idx: Vec<usize> = (0..train_set.len()).collect();
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch_ids in idx.chunks(cfg.batch_size) {
            if batch_ids.len() < 2 {
                continue;
            }
            let rasters: Vec<&Raster> = batch_ids.iter().map(|&i| &train_set[i].0).collect();
            let caps: Vec<&TokenizedCaption> =
                batch_ids.iter().map(|&i| &train_set[i].1).collect();
            store.zero_grads();
            let loss = sc_batch_step(model, store, &rasters, &caps, cfg.workers, true)?;
            let lr = cosine_lr(&sched, step.min(sched.total_steps))?;
            store.adamw_step(lr, cfg.weight_decay)?;
            step += 1;
            epoch_loss += loss * batch_ids.len() as f64;
            seen += batch_ids.len();
        }
        let train_loss = epoch_loss / seen.max(1) as f64;
        let val_loss = eval_loss(model, store, &val_set, cfg.batch_size, cfg.workers)?;
        let lr_now = cosine_lr(&sched, step.min(sched.total_steps))?;
        if cfg.verbose {
            eprintln!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4} lr {lr_now:.2e}");
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

/// Loss terms of one evaluation batch: (long-caption term, short-caption
/// term).
pub fn sc_loss_terms(
    model: &SocialContextModel,
    store: &ParamStore,
    data: &[(Raster, CaptionPair)],
) -> Result<(f64, f64)> {
    let tok = Tokenizer::new();
    let mut t = Tape::new();
    let mut e_img = Vec::new();
    let mut e_pce = Vec::new();
    let mut e_long = Vec::new();
    let mut e_short = Vec::new();
    for (r, c) in data {
        let img = model.forward_image(&mut t, store, r)?;
        e_img.push(img.embedding);
        e_pce.push(img.pce);
        let tc = tokenize_caption(&tok, c);
        e_long.push(model.forward_text(&mut t, store, &tc.long, model.cfg.max_long_tokens)?);
        e_short.push(model.forward_text(&mut t, store, &tc.short, model.cfg.max_short_tokens)?);
    }
    let labels: Vec<usize> = (0..data.len()).collect();
    let ei = t.concat_rows(&e_img);
    let ep = t.concat_rows(&e_pce);
    let el = t.concat_rows(&e_long);
    let es = t.concat_rows(&e_short);
    let elt = t.transpose(el);
    let l1 = t.matmul(ei, elt);
    let l1 = t.scale(l1, model.cfg.logit_scale);
    let l1 = t.cross_entropy_mean(l1, &labels);
    let est = t.transpose(es);
    let l2 = t.matmul(ep, est);
    let l2 = t.scale(l2, model.cfg.logit_scale);
    let l2 = t.cross_entropy_mean(l2, &labels);
    Ok((t.scalar_value(l1), t.scalar_value(l2)))
}

/// Fixed-rate full-batch training probe: returns the per-step loss curve.
/// Used by diagnostics and the distillation smoke tests.
pub fn sc_steps_probe(
    model: &SocialContextModel,
    store: &mut ParamStore,
    data: &[(Raster, CaptionPair)],
    steps: usize,
    lr: f64,
    workers: usize,
) -> Result<Vec<f64>> {
    let tok = Tokenizer::new();
    let tokenized: Vec<(Raster, TokenizedCaption)> = data
        .iter()
        .map(|(r, c)| (r.clone(), tokenize_caption(&tok, c)))
        .collect();
    let rasters: Vec<&Raster> = tokenized.iter().map(|(r, _)| r).collect();
    let caps: Vec<&TokenizedCaption> = tokenized.iter().map(|(_, c)| c).collect();
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        store.zero_grads();
        let loss = sc_batch_step(model, store, &rasters, &caps, workers, true)?;
        store.adamw_step(lr, 0.01)?;
        losses.push(loss);
    }
    Ok(losses)
}

/// Dedup-aware in-batch top-1 retrieval accuracy over a held-out set,
/// averaged over the image-to-text and text-to-image directions. A
/// retrieval counts as correct when the retrieved caption text equals the
/// query's own caption text (identical captions embed identically, so the
/// argmax index alone would punish harmless ties).
pub fn retrieval_accuracy(
    model: &SocialContextModel,
    store: &ParamStore,
    data: &[(Raster, CaptionPair)],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tok = Tokenizer::new();
    let n = data.len();
    let mut img = Vec::with_capacity(n);
    let mut txt = Vec::with_capacity(n);
    for (r, c) in data {
        img.push(model.encode_image(store, r)?);
        txt.push(model.encode_text(store, &tok, &c.long)?);
    }
    let mut correct = 0usize;
    for i in 0..n {
        // image -> text
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (j, t) in txt.iter().enumerate() {
            let sim: f64 = img[i].values.iter().zip(&t.values).map(|(a, b)| a * b).sum();
            if sim > best_sim {
                best_sim = sim;
                best = j;
            }
        }
        if data[best].1.long == data[i].1.long {
            correct += 1;
        }
        // text -> image
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (j, im) in img.iter().enumerate() {
            let sim: f64 = txt[i].values.iter().zip(&im.values).map(|(a, b)| a * b).sum();
            if sim > best_sim {
                best_sim = sim;
                best = j;
            }
        }
        if data[best].1.long == data[i].1.long {
            correct += 1;
        }
    }
    Ok(correct as f64 / (2 * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ScConfig;
    use crate::sim::{make_scenario, rasterize_view, teacher_oracle, ScenarioKind};

    fn gather_pairs(n: usize) -> Vec<(Raster, CaptionPair)> {
        let mut out = Vec::new();
        let kinds = ScenarioKind::ALL;
        let mut seed = 0u64;
        while out.len() < n {
            let kind = kinds[out.len() % kinds.len()];
            let world = make_scenario(kind, seed);
            out.push((rasterize_view(&world.robot, &world), teacher_oracle(&world)));
            seed += 1;
        }
        out
    }

    #[test]
    fn loss_decreases_and_retrieval_learns_on_small_set() {
        // 64 pairs: the moving-average loss must fall monotonically over
        // the first 50 steps and retrieval on the set must reach 90%
        // after the full probe.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let data = gather_pairs(64);
        let losses =
            sc_steps_probe(&model, &mut store, &data, 300, 2e-3, default_workers()).unwrap();
        let ma: Vec<f64> = losses[..50]
            .windows(10)
            .map(|w| w.iter().sum::<f64>() / 10.0)
            .collect();
        for w in ma.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "moving-average loss increased: {:?}",
                ma
            );
        }
        let acc = retrieval_accuracy(&model, &store, &data).unwrap();
        assert!(acc > 0.9, "retrieval accuracy {acc}");
    }
}
