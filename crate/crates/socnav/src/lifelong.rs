//! Online lifelong updates: a frame buffer filled during navigation, the
//! teacher captions the buffered frames, and a symmetric contrastive
//! fine-tuning pass nudges both encoders before the retrieval database is
//! re-embedded with the updated text encoder.

use crate::context::{ContextDatabase, SocialContextModel};
use crate::nn::{ParamStore, Tape};
use crate::sim::raster::Raster;
use crate::sim::{CaptionPair, TeacherOracle, TeacherView, World};
use crate::text::Tokenizer;
use crate::{Error, Result};
use std::io::Write;
use std::time::Instant;

/// A buffered navigation frame: the raster the encoder saw plus the world
/// snapshot the template teacher reads.
#[derive(Debug, Clone)]
pub struct BufferedFrame {
    pub raster: Raster,
    pub world: World,
}

/// FIFO frame buffer; an update triggers exactly when it reaches capacity.
#[derive(Debug)]
pub struct FrameBuffer {
    frames: Vec<BufferedFrame>,
    capacity: usize,
}

impl FrameBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            frames: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append a frame; returns true exactly when the buffer just filled.
    pub fn push(&mut self, frame: BufferedFrame) -> bool {
        if self.frames.len() < self.capacity {
            self.frames.push(frame);
        }
        self.frames.len() == self.capacity
    }

    /// Drain the buffered batch for an update; the buffer is empty after.
    pub fn take_batch(&mut self) -> Vec<BufferedFrame> {
        std::mem::take(&mut self.frames)
    }
}

/// Caption every buffered frame with the teacher. A frame whose caption
/// fails is dropped from both sides; alignment is preserved. Returns the
/// kept frames, their captions, and the number dropped.
pub fn caption_batch(
    frames: Vec<BufferedFrame>,
    teacher: &dyn TeacherOracle,
) -> (Vec<BufferedFrame>, Vec<CaptionPair>, usize) {
    let mut kept = Vec::with_capacity(frames.len());
    let mut captions = Vec::with_capacity(frames.len());
    let mut dropped = 0usize;
    for frame in frames {
        let view = TeacherView {
            raster: &frame.raster,
            world: Some(&frame.world),
        };
        match teacher.caption(&view) {
            Ok(c) => {
                captions.push(c);
                kept.push(frame);
            }
            Err(_) => dropped += 1,
        }
    }
    (kept, captions, dropped)
}

/// Update hyperparameters and the iteration counter.
#[derive(Debug, Clone)]
pub struct UpdateState {
    pub iteration: usize,
    /// Softmax temperature of the contrastive loss.
    pub temperature: f64,
    pub lr: f64,
    pub steps: usize,
    pub weight_decay: f64,
    /// Averaged two-direction loss when true; image-anchored only when
    /// false.
    pub symmetric: bool,
}

impl Default for UpdateState {
    fn default() -> Self {
        Self {
            iteration: 0,
            temperature: 0.07,
            lr: 1e-5,
            steps: 10,
            weight_decay: 0.0,
            symmetric: true,
        }
    }
}

/// Contrastive fine-tuning loss between normalized image and text feature
/// rows: cross-entropy over the cosine-similarity matrix scaled by 1/mu,
/// image-anchored, plus the mirrored direction when `symmetric` (the two
/// directions are averaged). Mean over pairs.
pub fn llu_loss_from_features(
    t: &mut Tape,
    image_rows: crate::nn::NodeId,
    text_rows: crate::nn::NodeId,
    mu: f64,
    symmetric: bool,
) -> Result<crate::nn::NodeId> {
    if mu <= 0.0 {
        return Err(Error::InvalidTemperature(mu));
    }
    let (n, _) = t.value(image_rows).shape();
    let (m, _) = t.value(text_rows).shape();
    if n != m {
        return Err(Error::BatchMismatch(n, m));
    }
    let labels: Vec<usize> = (0..n).collect();
    let tt = t.transpose(text_rows);
    let sims = t.matmul(image_rows, tt);
    let sims = t.scale(sims, 1.0 / mu);
    let img_to_txt = t.cross_entropy_mean(sims, &labels);
    if !symmetric {
        return Ok(img_to_txt);
    }
    let sims_t = t.transpose(sims);
    let txt_to_img = t.cross_entropy_mean(sims_t, &labels);
    let sum = t.add(img_to_txt, txt_to_img);
    Ok(t.scale(sum, 0.5))
}

/// Forward both encoders over an aligned batch and evaluate the update
/// loss on one tape.
pub fn llu_loss(
    model: &SocialContextModel,
    store: &ParamStore,
    tok: &Tokenizer,
    rasters: &[&Raster],
    captions: &[&CaptionPair],
    mu: f64,
    symmetric: bool,
) -> Result<(Tape, crate::nn::NodeId)> {
    if rasters.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if rasters.len() != captions.len() {
        return Err(Error::BatchMismatch(rasters.len(), captions.len()));
    }
    let mut t = Tape::new();
    let mut img_rows = Vec::with_capacity(rasters.len());
    let mut txt_rows = Vec::with_capacity(rasters.len());
    for (r, c) in rasters.iter().zip(captions) {
        let img = model.forward_image(&mut t, store, r)?;
        img_rows.push(img.embedding);
        let tokens = tok.tokenize(&c.long);
        txt_rows.push(model.forward_text(&mut t, store, &tokens, model.cfg.max_long_tokens)?);
    }
    let ei = t.concat_rows(&img_rows);
    let et = t.concat_rows(&txt_rows);
    let loss = llu_loss_from_features(&mut t, ei, et, mu, symmetric)?;
    Ok((t, loss))
}

/// Result of one applied update.
#[derive(Debug, Clone)]
pub struct UpdateReport {
    pub iteration: usize,
    pub batch_size: usize,
    pub pre_loss: f64,
    pub post_loss: f64,
    pub wall_ms: u128,
    pub dropped_frames: usize,
}

impl UpdateReport {
    /// Append-only log line: iteration, wall time, batch size, pre/post
    /// loss.
    pub fn log_line(&self) -> String {
        format!(
            "iteration={} wall_ms={} batch={} pre_loss={:.6} post_loss={:.6} dropped={}\n",
            self.iteration, self.wall_ms, self.batch_size, self.pre_loss, self.post_loss,
            self.dropped_frames
        )
    }

    pub fn append_to(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        f.write_all(self.log_line().as_bytes())?;
        Ok(())
    }
}

/// Fine-tune both encoders on a captioned batch with a fixed number of
/// AdamW steps, then re-embed the retrieval database with the updated text
/// encoder. Zero configured steps is a no-op (iteration unchanged). A
/// non-finite loss aborts the update and leaves the encoders at the
/// previous iteration.
///
/// Optimizer moments start fresh from the current parameter values, so an
/// update is bit-reproducible from (checkpoint, batch, step count).
pub fn apply_update(
    model: &SocialContextModel,
    store: &mut ParamStore,
    state: &mut UpdateState,
    frames: &[BufferedFrame],
    captions: &[CaptionPair],
    db: Option<&mut ContextDatabase>,
    dropped_frames: usize,
) -> Result<UpdateReport> {
    let start = Instant::now();
    if frames.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if frames.len() != captions.len() {
        return Err(Error::BatchMismatch(frames.len(), captions.len()));
    }
    let tok = Tokenizer::new();
    let rasters: Vec<&Raster> = frames.iter().map(|f| &f.raster).collect();
    let caps: Vec<&CaptionPair> = captions.iter().collect();

    let pre_loss = {
        let (t, node) = llu_loss(model, store, &tok, &rasters, &caps, state.temperature, state.symmetric)?;
        t.scalar_value(node)
    };
    if state.steps == 0 {
        return Ok(UpdateReport {
            iteration: state.iteration,
            batch_size: frames.len(),
            pre_loss,
            post_loss: pre_loss,
            wall_ms: start.elapsed().as_millis(),
            dropped_frames,
        });
    }

    // Fresh optimizer state over the current values: reproducible from the
    // checkpoint alone.
    let mut work = ParamStore::from_entries(store.snapshot());
    for _ in 0..state.steps {
        let (mut t, node) = llu_loss(model, &work, &tok, &rasters, &caps, state.temperature, state.symmetric)?;
        let value = t.scalar_value(node);
        if !value.is_finite() {
            return Err(Error::Diverged(format!("update loss {value}")));
        }
        work.zero_grads();
        let grads = t.backward(node);
        t.accumulate_into(&grads, &mut work);
        work.adamw_step(state.lr, state.weight_decay)?;
    }
    let post_loss = {
        let (t, node) = llu_loss(model, &work, &tok, &rasters, &caps, state.temperature, state.symmetric)?;
        t.scalar_value(node)
    };
    if !post_loss.is_finite() {
        return Err(Error::Diverged(format!("post-update loss {post_loss}")));
    }
    store.restore(&work.snapshot());
    state.iteration += 1;

    if let Some(db) = db {
        let captions: Vec<CaptionPair> = db.entries.iter().map(|e| e.caption.clone()).collect();
        *db = ContextDatabase::build(model, store, &tok, &captions)?;
    }

    Ok(UpdateReport {
        iteration: state.iteration,
        batch_size: frames.len(),
        pre_loss,
        post_loss,
        wall_ms: start.elapsed().as_millis(),
        dropped_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ScConfig;
    use crate::nn::{cosine_similarity, Mat};
    use crate::sim::{make_scenario, rasterize_view, teacher_oracle, Action, ScenarioKind,
        TemplateTeacher};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_from(kind: ScenarioKind, seed: u64) -> BufferedFrame {
        let world = make_scenario(kind, seed);
        BufferedFrame {
            raster: rasterize_view(&world.robot, &world),
            world,
        }
    }

    #[test]
    fn buffer_triggers_exactly_at_capacity() {
        let mut buf = FrameBuffer::new(50);
        for i in 0..49 {
            assert!(!buf.push(frame_from(ScenarioKind::NarrowHallway, i)));
        }
        assert!(buf.push(frame_from(ScenarioKind::NarrowHallway, 49)));
        assert_eq!(buf.len(), 50);
        let batch = buf.take_batch();
        assert_eq!(batch.len(), 50);
        assert_eq!(buf.len(), 0);
    }

    struct FailingTeacher {
        fail_index: std::cell::Cell<usize>,
        at: usize,
    }

    impl TeacherOracle for FailingTeacher {
        fn caption(&self, view: &TeacherView<'_>) -> Result<CaptionPair> {
            let i = self.fail_index.get();
            self.fail_index.set(i + 1);
            if i == self.at {
                return Err(Error::BadConfig("teacher outage".into()));
            }
            Ok(teacher_oracle(view.world.unwrap()))
        }
    }

    #[test]
    fn caption_batch_alignment_and_drop_rule() {
        let frames: Vec<BufferedFrame> = (0..10)
            .map(|i| frame_from(ScenarioKind::StaticGroupsDynamic, i))
            .collect();
        let teacher = TemplateTeacher;
        let (kept, caps, dropped) = caption_batch(frames.clone(), &teacher);
        assert_eq!(kept.len(), 10);
        assert_eq!(caps.len(), 10);
        assert_eq!(dropped, 0);
        // Deterministic on the same frame.
        let again = caption_batch(frames.clone(), &teacher);
        assert_eq!(caps, again.1);

        let failing = FailingTeacher {
            fail_index: std::cell::Cell::new(0),
            at: 3,
        };
        let (kept, caps, dropped) = caption_batch(frames, &failing);
        assert_eq!(kept.len(), 9);
        assert_eq!(caps.len(), 9);
        assert_eq!(dropped, 1);
        // Alignment preserved: caption i describes frame i's world.
        for (f, c) in kept.iter().zip(&caps) {
            assert_eq!(teacher_oracle(&f.world), *c);
        }
    }

    #[test]
    fn llu_loss_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let tok = Tokenizer::new();
        let f = frame_from(ScenarioKind::NarrowHallway, 0);
        let cap = teacher_oracle(&f.world);

        // Single pair: the denominator has one candidate, so the loss is 0.
        let (t, node) = llu_loss(&model, &store, &tok, &[&f.raster], &[&cap], 0.07, true).unwrap();
        assert!(t.scalar_value(node).abs() < 1e-12);

        // Temperature must be positive.
        let mut t2 = Tape::new();
        let a = t2.leaf(Mat::from_vec(1, 2, vec![1.0, 0.0]));
        let b = t2.leaf(Mat::from_vec(1, 2, vec![1.0, 0.0]));
        assert!(llu_loss_from_features(&mut t2, a, b, 0.0, true).is_err());
    }

    #[test]
    fn llu_loss_closed_form_orthogonal_case() {
        // Matched pairs at similarity 1, mismatches orthogonal, mu = 1,
        // N = 4: each pair contributes -log(e / (e + 3)) per direction.
        let n = 4;
        let mut t = Tape::new();
        let eye = Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 });
        let a = t.leaf(eye.clone());
        let b = t.leaf(eye);
        let loss = llu_loss_from_features(&mut t, a, b, 1.0, true).unwrap();
        let e = std::f64::consts::E;
        let want = -(e / (e + 3.0)).ln();
        assert!((t.scalar_value(loss) - want).abs() < 1e-12);
    }

    #[test]
    fn llu_loss_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::tiny(), &mut store, &mut rng);
        let tok = Tokenizer::new();
        let frames: Vec<BufferedFrame> = (0..4)
            .map(|i| frame_from(ScenarioKind::NarrowHallway, i))
            .collect();
        // Tiny config takes 8x8 rasters; shrink the real frames.
        let rasters: Vec<Raster> = frames
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut r = Raster::zeros();
                r.data = (0..4 * 8 * 8)
                    .map(|j| ((i * 31 + j * 7) % 13) as f64 / 13.0)
                    .collect();
                r
            })
            .collect();
        let caps: Vec<CaptionPair> = frames.iter().map(|f| teacher_oracle(&f.world)).collect();
        let report = crate::nn::grad_check(
            &mut store,
            |s| {
                let rr: Vec<&Raster> = rasters.iter().collect();
                let cc: Vec<&CaptionPair> = caps.iter().collect();
                let (t, node) = llu_loss(&model, s, &tok, &rr, &cc, 0.07, true).unwrap();
                (t, node)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn apply_update_reduces_loss_and_increments_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let frames: Vec<BufferedFrame> = (0..8)
            .map(|i| frame_from(ScenarioKind::DynamicGroupsDynamic, 100 + i))
            .collect();
        let teacher = TemplateTeacher;
        let (frames, captions, dropped) = caption_batch(frames, &teacher);
        let mut state = UpdateState {
            steps: 5,
            lr: 1e-4,
            ..Default::default()
        };

        // Zero steps: a no-op.
        let mut state0 = UpdateState {
            steps: 0,
            ..state.clone()
        };
        let before = store.snapshot();
        let report0 =
            apply_update(&model, &mut store, &mut state0, &frames, &captions, None, dropped)
                .unwrap();
        assert_eq!(state0.iteration, 0);
        assert_eq!(report0.pre_loss, report0.post_loss);
        for (name, value) in &before {
            assert_eq!(store.value(name).data, value.data);
        }

        let report =
            apply_update(&model, &mut store, &mut state, &frames, &captions, None, dropped)
                .unwrap();
        assert_eq!(state.iteration, 1);
        assert!(
            report.post_loss <= report.pre_loss,
            "pre {} post {}",
            report.pre_loss,
            report.post_loss
        );
    }

    #[test]
    fn update_is_reproducible_from_checkpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store_a = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store_a, &mut rng);
        let snapshot = store_a.snapshot();
        let mut store_b = ParamStore::from_entries(snapshot);

        let frames: Vec<BufferedFrame> = (0..6)
            .map(|i| frame_from(ScenarioKind::BlindCorner, 7 + i))
            .collect();
        let (frames, captions, _) = caption_batch(frames, &TemplateTeacher);
        let mut sa = UpdateState {
            steps: 3,
            ..Default::default()
        };
        let mut sb = sa.clone();
        apply_update(&model, &mut store_a, &mut sa, &frames, &captions, None, 0).unwrap();
        apply_update(&model, &mut store_b, &mut sb, &frames, &captions, None, 0).unwrap();
        for name in store_a.names().map(String::from).collect::<Vec<_>>() {
            let a = store_a.value(&name);
            let b = store_b.value(&name);
            for i in 0..a.len() {
                assert_eq!(a.data[i].to_bits(), b.data[i].to_bits(), "{name}[{i}]");
            }
        }
    }

    #[test]
    fn database_rebuild_changes_entries_after_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let tok = Tokenizer::new();
        let worlds: Vec<_> = (0..6)
            .map(|i| make_scenario(ScenarioKind::StaticGroupsDynamic, 40 + i))
            .collect();
        let captions: Vec<CaptionPair> = worlds.iter().map(teacher_oracle).collect();
        let mut db = ContextDatabase::build(&model, &store, &tok, &captions).unwrap();
        let before: Vec<Vec<f64>> = db.entries.iter().map(|e| e.embedding.values.clone()).collect();

        let frames: Vec<BufferedFrame> = worlds
            .iter()
            .map(|w| BufferedFrame {
                raster: rasterize_view(&w.robot, w),
                world: w.clone(),
            })
            .collect();
        let batch_caps: Vec<CaptionPair> = worlds.iter().map(teacher_oracle).collect();
        let mut state = UpdateState {
            steps: 5,
            lr: 1e-4,
            ..Default::default()
        };
        apply_update(
            &model,
            &mut store,
            &mut state,
            &frames,
            &batch_caps,
            Some(&mut db),
            0,
        )
        .unwrap();
        let changed = db
            .entries
            .iter()
            .zip(&before)
            .any(|(e, b)| {
                cosine_similarity(&e.embedding.values, b).unwrap() < 1.0 - 1e-9
            });
        assert!(changed, "database entries unchanged after update");
        // Actions preserved through the rebuild.
        assert!(db.entries.iter().zip(&captions).all(|(e, c)| {
            e.caption.action == c.action || c.action != Action::Proceed
        }));
    }
}
