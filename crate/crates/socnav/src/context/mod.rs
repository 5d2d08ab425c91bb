//! Social-context encoders: a lightweight patch-transformer image encoder
//! and a self-attention text encoder distilled jointly against caption
//! pairs from the teacher oracle, with a principal-component side channel
//! aligning short captions. Also houses the cosine-retrieval database the
//! selector draws its text embedding from.

pub mod database;
pub mod train;

pub use database::ContextDatabase;
pub use train::{retrieval_accuracy, sc_steps_probe, train_sc_clip, ScTrainConfig};

use crate::nn::{CrossAttention, Linear, Mat, NodeId, ParamStore, ResidualFfn, Tape};
use crate::sim::raster::{Raster, RASTER_CHANNELS, RASTER_SIZE};
use crate::sim::CaptionPair;
use crate::text::{Tokenizer, CLS_ID};
use crate::{Error, Result};
use rand::Rng;

/// A fixed-dimension real vector with an explicit unit-norm convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl Embedding {
    /// Wrap an already-normalized vector, verifying the convention.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::ZeroNorm("embedding not unit-norm"));
        }
        Ok(Self {
            values,
            normalized: true,
        })
    }

    pub fn raw(values: Vec<f64>) -> Self {
        Self {
            values,
            normalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &Embedding) -> Result<f64> {
        crate::nn::cosine_similarity(&self.values, &other.values)
    }
}

/// Sizing and loss constants for the encoder pair.
#[derive(Debug, Clone)]
pub struct ScConfig {
    /// Output embedding dimension shared by both encoders.
    pub embed_dim: usize,
    pub image_size: usize,
    pub image_channels: usize,
    pub patch_size: usize,
    pub image_dim: usize,
    pub image_layers: usize,
    pub image_heads: usize,
    pub vocab_size: usize,
    pub text_dim: usize,
    pub text_layers: usize,
    pub text_heads: usize,
    pub max_long_tokens: usize,
    pub max_short_tokens: usize,
    /// Principal components kept by the short-caption side channel.
    pub pce_components: usize,
    /// Inverse-temperature scale on similarity logits.
    pub logit_scale: f64,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            image_size: RASTER_SIZE,
            image_channels: RASTER_CHANNELS,
            patch_size: 16,
            image_dim: 48,
            image_layers: 4,
            image_heads: 4,
            vocab_size: crate::text::vocabulary().len(),
            text_dim: 48,
            text_layers: 2,
            text_heads: 4,
            max_long_tokens: 248,
            max_short_tokens: 20,
            pce_components: 8,
            logit_scale: 1.0 / 0.07,
        }
    }
}

impl ScConfig {
    /// Tiny configuration for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 8,
            image_size: 8,
            image_channels: RASTER_CHANNELS,
            patch_size: 4,
            image_dim: 8,
            image_layers: 1,
            image_heads: 2,
            vocab_size: crate::text::vocabulary().len(),
            text_dim: 8,
            text_layers: 1,
            text_heads: 2,
            max_long_tokens: 16,
            max_short_tokens: 8,
            pce_components: 2,
            logit_scale: 1.0 / 0.07,
        }
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn n_patches(&self) -> usize {
        self.patches_per_side() * self.patches_per_side()
    }

    pub fn patch_dim(&self) -> usize {
        self.image_channels * self.patch_size * self.patch_size
    }
}

/// The encoder pair. Parameters live in a single [`ParamStore`] so the
/// online updater can fine-tune both sides together.
#[derive(Debug, Clone)]
pub struct SocialContextModel {
    pub cfg: ScConfig,
    patch_proj: Linear,
    img_blocks: Vec<(CrossAttention, ResidualFfn)>,
    img_out: Linear,
    pce_out: Linear,
    txt_blocks: Vec<(CrossAttention, ResidualFfn)>,
    txt_out: Linear,
}

const IMG_CLS: &str = "sc.img.cls";
const IMG_POS: &str = "sc.img.pos";
const TXT_EMBED: &str = "sc.txt.embed";
const TXT_POS: &str = "sc.txt.pos";

impl SocialContextModel {
    /// Descriptors only; parameters must already be present in the store.
    pub fn new(cfg: ScConfig) -> Self {
        let img_blocks = (0..cfg.image_layers)
            .map(|i| {
                (
                    CrossAttention::new(&format!("sc.img.attn{i}"), cfg.image_dim, cfg.image_heads),
                    ResidualFfn::new(&format!("sc.img.ffn{i}"), cfg.image_dim),
                )
            })
            .collect();
        let txt_blocks = (0..cfg.text_layers)
            .map(|i| {
                (
                    CrossAttention::new(&format!("sc.txt.attn{i}"), cfg.text_dim, cfg.text_heads),
                    ResidualFfn::new(&format!("sc.txt.ffn{i}"), cfg.text_dim),
                )
            })
            .collect();
        Self {
            patch_proj: Linear::new("sc.img.patch", cfg.patch_dim(), cfg.image_dim),
            img_out: Linear::new("sc.img.out", cfg.image_dim, cfg.embed_dim),
            pce_out: Linear::new("sc.pce.out", cfg.pce_components, cfg.embed_dim),
            txt_out: Linear::new("sc.txt.out", cfg.text_dim, cfg.embed_dim),
            img_blocks,
            txt_blocks,
            cfg,
        }
    }

    /// Fresh random initialization of every parameter.
    pub fn init(cfg: ScConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let model = Self::new(cfg);
        let c = model.cfg.clone();
        Linear::init(store, "sc.img.patch", c.patch_dim(), c.image_dim, rng);
        store.insert(IMG_CLS, Mat::uniform_scaled(1, c.image_dim, c.image_dim, rng));
        store.insert(
            IMG_POS,
            Mat::uniform_scaled(c.n_patches() + 1, c.image_dim, c.image_dim, rng),
        );
        for i in 0..c.image_layers {
            CrossAttention::init(store, &format!("sc.img.attn{i}"), c.image_dim, c.image_heads, rng);
            ResidualFfn::init(store, &format!("sc.img.ffn{i}"), c.image_dim, rng);
            // Residual branches start small so deep stacks stay trainable
            // at practical learning rates.
            store.value_mut(&format!("sc.img.attn{i}.wo.w")).scale_assign(0.3);
            store.value_mut(&format!("sc.img.ffn{i}.l2.w")).scale_assign(0.3);
        }
        Linear::init(store, "sc.img.out", c.image_dim, c.embed_dim, rng);
        Linear::init(store, "sc.pce.out", c.pce_components, c.embed_dim, rng);

        store.insert(
            TXT_EMBED,
            Mat::uniform_scaled(c.vocab_size, c.text_dim, c.text_dim, rng),
        );
        store.insert(
            TXT_POS,
            Mat::uniform_scaled(c.max_long_tokens + 1, c.text_dim, c.text_dim, rng),
        );
        for i in 0..c.text_layers {
            CrossAttention::init(store, &format!("sc.txt.attn{i}"), c.text_dim, c.text_heads, rng);
            ResidualFfn::init(store, &format!("sc.txt.ffn{i}"), c.text_dim, rng);
            store.value_mut(&format!("sc.txt.attn{i}.wo.w")).scale_assign(0.3);
            store.value_mut(&format!("sc.txt.ffn{i}.l2.w")).scale_assign(0.3);
        }
        Linear::init(store, "sc.txt.out", c.text_dim, c.embed_dim, rng);
        model
    }

    /// Patch-pixel matrix for a raster: one row per patch.
    pub fn patches(&self, raster: &Raster) -> Result<Mat> {
        let c = &self.cfg;
        if raster.data.len() != c.image_channels * c.image_size * c.image_size {
            return Err(Error::ShapeMismatch {
                ctx: "encode_image",
                expected: format!("{}x{}x{}", c.image_channels, c.image_size, c.image_size),
                got: format!("{} values", raster.data.len()),
            });
        }
        let ps = c.patch_size;
        let per_side = c.patches_per_side();
        let mut m = Mat::zeros(c.n_patches(), c.patch_dim());
        for pr in 0..per_side {
            for pc in 0..per_side {
                let patch = pr * per_side + pc;
                let mut k = 0;
                for ch in 0..c.image_channels {
                    for dr in 0..ps {
                        for dc in 0..ps {
                            let row = pr * ps + dr;
                            let col = pc * ps + dc;
                            m.data[patch * c.patch_dim() + k] =
                                raster.data[(ch * c.image_size + row) * c.image_size + col];
                            k += 1;
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Image forward pass on a tape. Returns the normalized pooled
    /// embedding, the normalized principal-component embedding, and the
    /// pre-pooling patch feature matrix.
    pub fn forward_image(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        raster: &Raster,
    ) -> Result<ImageNodes> {
        let patches = self.patches(raster)?;
        let x = t.leaf(patches);
        let x = self.patch_proj.apply(t, store, x);
        let cls = t.param(store, IMG_CLS);
        let x = t.concat_rows(&[cls, x]);
        let pos = t.param(store, IMG_POS);
        let mut x = t.add(x, pos);
        for (attn, ffn) in &self.img_blocks {
            x = attn.apply(t, store, x, x);
            x = ffn.apply(t, store, x);
        }
        let cls_feat = t.slice_rows(x, 0, 1);
        let patch_feats = t.slice_rows(x, 1, self.cfg.n_patches() + 1);
        let pooled = self.img_out.apply(t, store, cls_feat);
        let embedding = t.l2_normalize_rows(pooled);

        let m = self.cfg.pce_components.min(self.cfg.n_patches());
        let projected = t.pca_project(patch_feats, cls_feat, m);
        let pce_raw = self.pce_out.apply(t, store, projected);
        let pce = t.l2_normalize_rows(pce_raw);

        Ok(ImageNodes {
            embedding,
            pce,
            patch_feats,
            cls_feat,
        })
    }

    /// Text forward pass on a tape: normalized embedding of a token
    /// sequence (truncated to the configured cap).
    pub fn forward_text(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        tokens: &[usize],
        cap: usize,
    ) -> Result<NodeId> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let mut ids = Vec::with_capacity(cap.min(tokens.len()) + 1);
        ids.push(CLS_ID);
        ids.extend(tokens.iter().take(cap).copied());
        let table = t.param(store, TXT_EMBED);
        let x = t.gather_rows(table, &ids);
        let pos_table = t.param(store, TXT_POS);
        let pos = t.slice_rows(pos_table, 0, ids.len());
        let mut x = t.add(x, pos);
        for (attn, ffn) in &self.txt_blocks {
            x = attn.apply(t, store, x, x);
            x = ffn.apply(t, store, x);
        }
        let cls_feat = t.slice_rows(x, 0, 1);
        let out = self.txt_out.apply(t, store, cls_feat);
        Ok(t.l2_normalize_rows(out))
    }

    /// Evaluation-mode image embedding.
    pub fn encode_image(&self, store: &ParamStore, raster: &Raster) -> Result<Embedding> {
        let mut t = Tape::new();
        let nodes = self.forward_image(&mut t, store, raster)?;
        Embedding::normalized(t.value(nodes.embedding).data.clone())
    }

    /// Evaluation-mode image embedding plus the patch-feature matrix.
    pub fn encode_image_with_patches(
        &self,
        store: &ParamStore,
        raster: &Raster,
    ) -> Result<(Embedding, Mat)> {
        let mut t = Tape::new();
        let nodes = self.forward_image(&mut t, store, raster)?;
        Ok((
            Embedding::normalized(t.value(nodes.embedding).data.clone())?,
            t.value(nodes.patch_feats).clone(),
        ))
    }

    /// Evaluation-mode text embedding of a raw string (long-caption cap).
    pub fn encode_text(&self, store: &ParamStore, tok: &Tokenizer, text: &str) -> Result<Embedding> {
        let tokens = tok.tokenize(text);
        let mut t = Tape::new();
        let node = self.forward_text(&mut t, store, &tokens, self.cfg.max_long_tokens)?;
        Embedding::normalized(t.value(node).data.clone())
    }

    /// The dual-caption contrastive loss over an aligned batch: long
    /// captions align with the pooled image embedding, short captions with
    /// the principal-component embedding; both terms are cross-entropy
    /// over the in-batch similarity matrix with diagonal labels.
    pub fn sc_clip_loss(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        images: &[&Raster],
        longs: &[&[usize]],
        shorts: &[&[usize]],
    ) -> Result<NodeId> {
        let n = images.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if longs.len() != n || shorts.len() != n {
            return Err(Error::BatchMismatch(n, longs.len().min(shorts.len())));
        }
        let mut e_img = Vec::with_capacity(n);
        let mut e_pce = Vec::with_capacity(n);
        let mut e_long = Vec::with_capacity(n);
        let mut e_short = Vec::with_capacity(n);
        for i in 0..n {
            let img = self.forward_image(t, store, images[i])?;
            e_img.push(img.embedding);
            e_pce.push(img.pce);
            e_long.push(self.forward_text(t, store, longs[i], self.cfg.max_long_tokens)?);
            e_short.push(self.forward_text(t, store, shorts[i], self.cfg.max_short_tokens)?);
        }
        let ei = t.concat_rows(&e_img);
        let ep = t.concat_rows(&e_pce);
        let el = t.concat_rows(&e_long);
        let es = t.concat_rows(&e_short);
        let labels: Vec<usize> = (0..n).collect();

        let elt = t.transpose(el);
        let logits_long = t.matmul(ei, elt);
        let logits_long = t.scale(logits_long, self.cfg.logit_scale);
        let loss_long = t.cross_entropy_mean(logits_long, &labels);

        let est = t.transpose(es);
        let logits_short = t.matmul(ep, est);
        let logits_short = t.scale(logits_short, self.cfg.logit_scale);
        let loss_short = t.cross_entropy_mean(logits_short, &labels);

        Ok(t.add(loss_long, loss_short))
    }
}

/// Tape nodes produced by one image forward pass.
pub struct ImageNodes {
    pub embedding: NodeId,
    pub pce: NodeId,
    pub patch_feats: NodeId,
    pub cls_feat: NodeId,
}

/// Tokenized caption pair, cached for training.
#[derive(Debug, Clone)]
pub struct TokenizedCaption {
    pub long: Vec<usize>,
    pub short: Vec<usize>,
}

pub fn tokenize_caption(tok: &Tokenizer, cap: &CaptionPair) -> TokenizedCaption {
    TokenizedCaption {
        long: tok.tokenize(&cap.long),
        short: tok.tokenize(&cap.short),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::sim::raster::Raster;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_raster(cfg: &ScConfig, rng: &mut impl Rng) -> Raster {
        let mut r = Raster::zeros();
        r.data = (0..cfg.image_channels * cfg.image_size * cfg.image_size)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        r
    }

    #[test]
    fn image_embedding_normalized_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let world = crate::sim::make_scenario(crate::sim::ScenarioKind::NarrowHallway, 3);
        let raster = crate::sim::rasterize_view(&world.robot, &world);
        let a = model.encode_image(&store, &raster).unwrap();
        let b = model.encode_image(&store, &raster).unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn text_embedding_normalized_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
        let tok = Tokenizer::new();
        let a = model
            .encode_text(&store, &tok, "keep to the right side while passing")
            .unwrap();
        let b = model
            .encode_text(&store, &tok, "keep to the right side while passing")
            .unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!(model.encode_text(&store, &tok, "").is_err());
    }

    #[test]
    fn loss_single_pair_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::tiny(), &mut store, &mut rng);
        let raster_small = tiny_raster(&model.cfg, &mut rng);
        let mut t = Tape::new();
        let loss = model
            .sc_clip_loss(
                &mut t,
                &store,
                &[&raster_small],
                &[&[5, 6, 7][..]],
                &[&[8, 9][..]],
            )
            .unwrap();
        assert!(t.scalar_value(loss).abs() < 1e-12);
    }

    #[test]
    fn loss_identical_batch_is_two_ln_n() {
        // Same image and captions in every slot: all similarity logits are
        // equal, so each term is exactly ln N.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::tiny(), &mut store, &mut rng);
        let raster = tiny_raster(&model.cfg, &mut rng);
        let n = 5;
        let images: Vec<&Raster> = (0..n).map(|_| &raster).collect();
        let long: Vec<usize> = vec![5, 6, 7];
        let short: Vec<usize> = vec![8, 9];
        let longs: Vec<&[usize]> = (0..n).map(|_| &long[..]).collect();
        let shorts: Vec<&[usize]> = (0..n).map(|_| &short[..]).collect();
        let mut t = Tape::new();
        let loss = model
            .sc_clip_loss(&mut t, &store, &images, &longs, &shorts)
            .unwrap();
        let want = 2.0 * (n as f64).ln();
        assert!((t.scalar_value(loss) - want).abs() < 1e-6);
    }

    #[test]
    fn sc_clip_loss_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::tiny(), &mut store, &mut rng);
        let rasters: Vec<Raster> = (0..4).map(|_| tiny_raster(&model.cfg, &mut rng)).collect();
        let longs: Vec<Vec<usize>> = (0..4)
            .map(|_| (0..6).map(|_| rng.random_range(2..40)).collect())
            .collect();
        let shorts: Vec<Vec<usize>> = (0..4)
            .map(|_| (0..3).map(|_| rng.random_range(2..40)).collect())
            .collect();
        let report = grad_check(
            &mut store,
            |s| {
                let mut t = Tape::new();
                let images: Vec<&Raster> = rasters.iter().collect();
                let ls: Vec<&[usize]> = longs.iter().map(|v| &v[..]).collect();
                let ss: Vec<&[usize]> = shorts.iter().map(|v| &v[..]).collect();
                let loss = model.sc_clip_loss(&mut t, s, &images, &ls, &ss).unwrap();
                (t, loss)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
    }
}
