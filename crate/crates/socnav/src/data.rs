//! Dataset builders and the on-disk container: a human-readable manifest
//! plus length-prefixed binary records, reproducible from a seed.
//!
//! Three dataset kinds are built from the simulator:
//! - caption pairs for distilling the context encoders,
//! - expert-demonstration planning records,
//! - candidate/selection records produced with trained checkpoints.

use crate::context::{ContextDatabase, SocialContextModel};
use crate::geometry::{transform_to_initial_frame, Pose, Trajectory};
use crate::nn::{Mat, ParamStore};
use crate::planner::{scan_to_points, voxelize, CandidateSet, Tpn, TpnRecord};
use crate::sim::raster::Raster;
use crate::sim::{
    make_scenario, scripted_expert, teacher_oracle, Action, CaptionPair, ScenarioKind,
    SensorFrame, World, LIDAR_MAX_RANGE,
};
use crate::text::Tokenizer;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Sc,
    Tpn,
    Tsm,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Sc => "sc",
            DatasetKind::Tpn => "tpn",
            DatasetKind::Tsm => "tsm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sc" => Some(DatasetKind::Sc),
            "tpn" => Some(DatasetKind::Tpn),
            "tsm" => Some(DatasetKind::Tsm),
            _ => None,
        }
    }
}

/// Index ranges of the train/val/test splits; disjoint and exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Splits {
    pub train_end: usize,
    pub val_end: usize,
    pub count: usize,
}

impl Splits {
    pub fn standard(count: usize) -> Self {
        let train_end = count * 8 / 10;
        let val_end = count * 9 / 10;
        Self {
            train_end,
            val_end,
            count,
        }
    }

    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn val(&self) -> std::ops::Range<usize> {
        self.train_end..self.val_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.val_end..self.count
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub count: usize,
    pub seed: u64,
    pub schema_version: u32,
    pub splits: Splits,
    pub content_hash: u64,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        format!(
            "kind: {}\ncount: {}\nseed: {}\nschema_version: {}\ntrain_end: {}\nval_end: {}\ncontent_hash: {:016x}\n",
            self.kind.name(),
            self.count,
            self.seed,
            self.schema_version,
            self.splits.train_end,
            self.splits.val_end,
            self.content_hash
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut count = None;
        let mut seed = None;
        let mut version = None;
        let mut train_end = None;
        let mut val_end = None;
        let mut hash = None;
        for line in text.lines() {
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "kind" => kind = DatasetKind::parse(value),
                "count" => count = value.parse().ok(),
                "seed" => seed = value.parse().ok(),
                "schema_version" => version = value.parse().ok(),
                "train_end" => train_end = value.parse().ok(),
                "val_end" => val_end = value.parse().ok(),
                "content_hash" => hash = u64::from_str_radix(value, 16).ok(),
                _ => {}
            }
        }
        let (Some(kind), Some(count), Some(seed), Some(version), Some(train_end), Some(val_end), Some(hash)) =
            (kind, count, seed, version, train_end, val_end, hash)
        else {
            return Err(Error::DatasetCorrupt("incomplete manifest".into()));
        };
        Ok(Self {
            kind,
            count,
            seed,
            schema_version: version,
            splits: Splits {
                train_end,
                val_end,
                count,
            },
            content_hash: hash,
        })
    }
}

/// FNV-1a over the record bytes; the manifest pins it so rebuilds can be
/// verified.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

// ---------------------------------------------------------------------------
// Record payloads

/// Caption-distillation record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScRecord {
    pub image_id: u64,
    pub raster: Raster,
    pub caption: CaptionPair,
}

/// Expert-demonstration planning record. Everything is expressed in the
/// frame of the robot pose at capture time.
#[derive(Debug, Clone)]
pub struct PlanRecord {
    pub episode: u64,
    pub scan: Vec<f64>,
    pub raster: Raster,
    pub goal: Pose,
    /// Ten poses, the first at the origin.
    pub expert: Trajectory,
}

/// Candidate-selection record.
#[derive(Debug, Clone)]
pub struct SelRecord {
    pub candidates: CandidateSet,
    pub text_embedding: Vec<f64>,
    pub label: usize,
    pub action: Action,
}

// ---------------------------------------------------------------------------
// Binary encoding helpers

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    put_u32(out, vs.len() as u32);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::DatasetCorrupt("truncated record".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::DatasetCorrupt("non-utf8 string".into()))
    }
}

fn encode_sc(rec: &ScRecord) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, rec.image_id);
    put_f64s(&mut out, &rec.raster.data);
    put_str(&mut out, &rec.caption.long);
    put_str(&mut out, &rec.caption.short);
    out.push(rec.caption.action.index() as u8);
    out
}

fn decode_sc(bytes: &[u8]) -> Result<ScRecord> {
    let mut c = Cursor::new(bytes);
    let image_id = c.u64()?;
    let data = c.f64s()?;
    let long = c.string()?;
    let short = c.string()?;
    let action = Action::ALL
        .get(c.u8()? as usize)
        .copied()
        .ok_or_else(|| Error::DatasetCorrupt("bad action index".into()))?;
    Ok(ScRecord {
        image_id,
        raster: Raster { data },
        caption: CaptionPair {
            long,
            short,
            action,
        },
    })
}

fn encode_poses(out: &mut Vec<u8>, traj: &Trajectory) {
    put_u32(out, traj.len() as u32);
    for p in traj.poses() {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.phi.to_le_bytes());
    }
}

fn decode_poses(c: &mut Cursor) -> Result<Trajectory> {
    let n = c.u32()? as usize;
    let mut poses = Vec::with_capacity(n);
    for _ in 0..n {
        let bytes = c.take(24)?;
        let x = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let y = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let phi = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        poses.push(Pose::new(x, y, phi));
    }
    Trajectory::new(poses)
}

fn encode_plan(rec: &PlanRecord) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, rec.episode);
    put_f64s(&mut out, &rec.scan);
    put_f64s(&mut out, &rec.raster.data);
    out.extend_from_slice(&rec.goal.x.to_le_bytes());
    out.extend_from_slice(&rec.goal.y.to_le_bytes());
    out.extend_from_slice(&rec.goal.phi.to_le_bytes());
    encode_poses(&mut out, &rec.expert);
    out
}

fn decode_plan(bytes: &[u8]) -> Result<PlanRecord> {
    let mut c = Cursor::new(bytes);
    let episode = c.u64()?;
    let scan = c.f64s()?;
    let raster = Raster { data: c.f64s()? };
    let g = c.take(24)?;
    let goal = Pose::new(
        f64::from_le_bytes(g[0..8].try_into().unwrap()),
        f64::from_le_bytes(g[8..16].try_into().unwrap()),
        f64::from_le_bytes(g[16..24].try_into().unwrap()),
    );
    let expert = decode_poses(&mut c)?;
    Ok(PlanRecord {
        episode,
        scan,
        raster,
        goal,
        expert,
    })
}

fn encode_sel(rec: &SelRecord) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(rec.candidates.k() as u8);
    for t in &rec.candidates.trajectories {
        encode_poses(&mut out, t);
    }
    put_f64s(&mut out, &rec.text_embedding);
    out.push(rec.label as u8);
    out.push(rec.action.index() as u8);
    out
}

fn decode_sel(bytes: &[u8]) -> Result<SelRecord> {
    let mut c = Cursor::new(bytes);
    let k = c.u8()? as usize;
    let mut trajectories = Vec::with_capacity(k);
    for _ in 0..k {
        trajectories.push(decode_poses(&mut c)?);
    }
    let text_embedding = c.f64s()?;
    let label = c.u8()? as usize;
    let action = Action::ALL
        .get(c.u8()? as usize)
        .copied()
        .ok_or_else(|| Error::DatasetCorrupt("bad action index".into()))?;
    Ok(SelRecord {
        candidates: CandidateSet::new(trajectories)?,
        text_embedding,
        label,
        action,
    })
}

// ---------------------------------------------------------------------------
// On-disk dataset

pub struct Dataset {
    pub manifest: DatasetManifest,
    records: Vec<Vec<u8>>,
}

impl Dataset {
    fn build(kind: DatasetKind, seed: u64, records: Vec<Vec<u8>>) -> Self {
        let mut all = Vec::new();
        for r in &records {
            put_u32(&mut all, r.len() as u32);
            all.extend_from_slice(r);
        }
        let manifest = DatasetManifest {
            kind,
            count: records.len(),
            seed,
            schema_version: SCHEMA_VERSION,
            splits: Splits::standard(records.len()),
            content_hash: fnv1a(&all),
        };
        Self { manifest, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.txt"), self.manifest.to_text())?;
        let mut w = BufWriter::new(File::create(dir.join("records.bin"))?);
        for r in &self.records {
            w.write_all(&(r.len() as u32).to_le_bytes())?;
            w.write_all(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_text = std::fs::read_to_string(dir.join("manifest.txt"))
            .map_err(|_| Error::DatasetCorrupt(format!("missing manifest in {}", dir.display())))?;
        let manifest = DatasetManifest::from_text(&manifest_text)?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(dir.join("records.bin"))?).read_to_end(&mut bytes)?;
        if fnv1a(&bytes) != manifest.content_hash {
            return Err(Error::DatasetCorrupt("content hash mismatch".into()));
        }
        let mut records = Vec::with_capacity(manifest.count);
        let mut pos = 0usize;
        while pos + 4 <= bytes.len() {
            let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            pos += 4;
            if pos + len > bytes.len() {
                return Err(Error::DatasetCorrupt("truncated records".into()));
            }
            records.push(bytes[pos..pos + len].to_vec());
            pos += len;
        }
        if records.len() != manifest.count {
            return Err(Error::DatasetCorrupt(format!(
                "manifest promises {} records, file holds {}",
                manifest.count,
                records.len()
            )));
        }
        Ok(Self { manifest, records })
    }

    pub fn sc_record(&self, i: usize) -> Result<ScRecord> {
        decode_sc(&self.records[i])
    }

    pub fn plan_record(&self, i: usize) -> Result<PlanRecord> {
        decode_plan(&self.records[i])
    }

    pub fn sel_record(&self, i: usize) -> Result<SelRecord> {
        decode_sel(&self.records[i])
    }

    /// Human-readable dump of one record.
    pub fn dump_record(&self, i: usize) -> Result<String> {
        match self.manifest.kind {
            DatasetKind::Sc => {
                let r = self.sc_record(i)?;
                Ok(format!(
                    "image_id: {}\naction: {}\nlong: {}\nshort: {}\nraster_nonzero: {}\n",
                    r.image_id,
                    r.caption.action.name(),
                    r.caption.long,
                    r.caption.short,
                    r.raster.data.iter().filter(|&&v| v > 0.0).count()
                ))
            }
            DatasetKind::Tpn => {
                let r = self.plan_record(i)?;
                let mut s = format!(
                    "episode: {}\ngoal: {:.3} {:.3} {:.3}\nscan_returns: {}\nexpert:\n",
                    r.episode,
                    r.goal.x,
                    r.goal.y,
                    r.goal.phi,
                    r.scan.iter().filter(|&&d| d < LIDAR_MAX_RANGE - 1e-9).count()
                );
                for p in r.expert.poses() {
                    s.push_str(&format!("  {:.3} {:.3} {:.3}\n", p.x, p.y, p.phi));
                }
                Ok(s)
            }
            DatasetKind::Tsm => {
                let r = self.sel_record(i)?;
                let mut s = format!(
                    "label: {}\naction: {}\nembedding_dim: {}\ncandidates:\n",
                    r.label,
                    r.action.name(),
                    r.text_embedding.len()
                );
                for (k, t) in r.candidates.trajectories.iter().enumerate() {
                    let last = t.last();
                    s.push_str(&format!(
                        "  {k}: ends at {:.3} {:.3} {:.3}\n",
                        last.x, last.y, last.phi
                    ));
                }
                Ok(s)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Builders

/// Advance the world along the expert plan for `steps` plan hops: the
/// robot rides successive plan poses while humans follow their scripts.
pub fn advance_along_expert(world: &mut World, steps: usize) {
    let mut plan = scripted_expert(world);
    let mut plan_age = 0usize;
    for _ in 0..steps {
        if plan_age >= 4 {
            plan = scripted_expert(world);
            plan_age = 0;
        }
        let idx = (plan_age + 1).min(plan.len() - 1);
        let target = plan.poses()[idx];
        world.robot = target;
        // Humans advance by roughly the ride time at the expert's pace.
        let hold = world.robot;
        world.step(0.0, 0.0);
        world.step(0.0, 0.0);
        world.step(0.0, 0.0);
        world.robot = hold;
        plan_age += 1;
    }
}

/// Caption-distillation dataset: `(raster, caption)` pairs from seeded
/// worlds across the given scenario families (all four when empty).
pub fn build_dsc(n: usize, seed: u64, families: &[ScenarioKind]) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let families = if families.is_empty() {
        &ScenarioKind::ALL[..]
    } else {
        families
    };
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let kind = families[i % families.len()];
        let world_seed = seed.wrapping_add(i as u64);
        let mut world = make_scenario(kind, world_seed);
        // Vary the viewpoint: ride the expert plan a seeded number of hops.
        let steps = (world_seed % 11) as usize;
        advance_along_expert(&mut world, steps);
        let raster = crate::sim::rasterize_view(&world.robot, &world);
        let caption = teacher_oracle(&world);
        records.push(encode_sc(&ScRecord {
            image_id: i as u64,
            raster,
            caption,
        }));
    }
    Ok(Dataset::build(DatasetKind::Sc, seed, records))
}

/// Planning dataset: records sampled along expert-ridden episodes. Every
/// stored trajectory is expressed in the frame of the pose it was captured
/// at, so its first pose is the origin.
pub fn build_dtpn(n: usize, seed: u64, families: &[ScenarioKind]) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let families = if families.is_empty() {
        &ScenarioKind::ALL[..]
    } else {
        families
    };
    let per_episode = 5usize;
    let mut records = Vec::with_capacity(n);
    let mut episode = 0u64;
    while records.len() < n {
        let kind = families[(episode as usize) % families.len()];
        let world_seed = seed.wrapping_add(episode);
        let mut world = make_scenario(kind, world_seed);
        for _ in 0..per_episode {
            if records.len() >= n {
                break;
            }
            let frame: SensorFrame = world.sense();
            let plan = scripted_expert(&world);
            let local = transform_to_initial_frame(&plan);
            records.push(encode_plan(&PlanRecord {
                episode,
                scan: frame.scan,
                raster: frame.raster,
                goal: frame.goal,
                expert: local,
            }));
            advance_along_expert(&mut world, 5);
            if world.goal_distance() < 1.0 {
                break;
            }
        }
        episode += 1;
    }
    Ok(Dataset::build(DatasetKind::Tpn, seed, records))
}

/// Selection dataset: candidates from a trained planner, the caption
/// embedding from the trained text encoder, and the label picking the
/// candidate closest to the expert demonstration.
pub fn build_dtsm(
    n: usize,
    seed: u64,
    families: &[ScenarioKind],
    sc_model: &SocialContextModel,
    sc_store: &ParamStore,
    tpn: &Tpn,
    tpn_store: &ParamStore,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let families = if families.is_empty() {
        &ScenarioKind::ALL[..]
    } else {
        families
    };
    let tok = Tokenizer::new();
    let mut records = Vec::with_capacity(n);
    let mut episode = 0u64;
    while records.len() < n {
        let kind = families[(episode as usize) % families.len()];
        let world_seed = seed.wrapping_add(episode).wrapping_mul(2654435761);
        let mut world = make_scenario(kind, world_seed);
        for _ in 0..4 {
            if records.len() >= n {
                break;
            }
            let frame = world.sense();
            let caption = teacher_oracle(&world);
            let tokens = context_tokens(sc_model, sc_store, &frame.raster)?;
            let grid = voxelize(&scan_to_points(&frame.scan, LIDAR_MAX_RANGE), tpn.cfg.voxel);
            let candidates = tpn.plan(tpn_store, Some(&tokens), Some(&grid), &frame.goal)?;
            let expert = transform_to_initial_frame(&scripted_expert(&world));
            let label = label_best_candidate(&candidates, &expert)?;
            let e_t = sc_model.encode_text(sc_store, &tok, &caption.long)?;
            records.push(encode_sel(&SelRecord {
                candidates,
                text_embedding: e_t.values,
                label,
                action: caption.action,
            }));
            advance_along_expert(&mut world, 7);
        }
        episode += 1;
    }
    Ok(Dataset::build(DatasetKind::Tsm, seed, records))
}

/// The label rule: index of the candidate with minimum positional MSE to
/// the expert trajectory.
pub fn label_best_candidate(candidates: &CandidateSet, expert: &Trajectory) -> Result<usize> {
    let mut best = (f64::INFINITY, 0usize);
    for (k, cand) in candidates.trajectories.iter().enumerate() {
        let m = crate::geometry::mse(cand, expert)?;
        if m < best.0 {
            best = (m, k);
        }
    }
    Ok(best.1)
}

/// Social-context token set for the planner: patch features with the
/// pooled embedding appended as a final row.
pub fn context_tokens(
    model: &SocialContextModel,
    store: &ParamStore,
    raster: &Raster,
) -> Result<Mat> {
    let (embedding, patches) = model.encode_image_with_patches(store, raster)?;
    let mut tokens = Mat::zeros(patches.rows + 1, patches.cols);
    tokens.data[..patches.data.len()].copy_from_slice(&patches.data);
    let last = patches.rows;
    for (j, v) in embedding.values.iter().enumerate() {
        *tokens.at_mut(last, j) = *v;
    }
    Ok(tokens)
}

/// Decode a planning dataset into in-memory training records with
/// precomputed context tokens (the encoders are frozen while the planner
/// trains).
pub fn plan_records_for_training(
    ds: &Dataset,
    range: std::ops::Range<usize>,
    sc_model: &SocialContextModel,
    sc_store: &ParamStore,
    tpn: &Tpn,
) -> Result<Vec<TpnRecord>> {
    let mut out = Vec::with_capacity(range.len());
    for i in range {
        let rec = ds.plan_record(i)?;
        let tokens = context_tokens(sc_model, sc_store, &rec.raster)?;
        let grid = voxelize(&scan_to_points(&rec.scan, LIDAR_MAX_RANGE), tpn.cfg.voxel);
        let expert = crate::selector::trajectory_mat(&rec.expert);
        out.push(TpnRecord {
            context_tokens: tokens,
            grid,
            goal: rec.goal,
            expert,
            episode: rec.episode,
        });
    }
    Ok(out)
}

/// Curate the retrieval database from a caption dataset: a seeded subset
/// of the long captions, embedded with the current text encoder.
pub fn curate_database(
    ds: &Dataset,
    size: usize,
    seed: u64,
    sc_model: &SocialContextModel,
    sc_store: &ParamStore,
) -> Result<ContextDatabase> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let take = size.min(ds.len());
    let tok = Tokenizer::new();
    let captions: Vec<CaptionPair> = idx[..take]
        .iter()
        .map(|&i| ds.sc_record(i).map(|r| r.caption))
        .collect::<Result<_>>()?;
    ContextDatabase::build(sc_model, sc_store, &tok, &captions)
}

/// Export caption records as line-delimited text:
/// `image_id<TAB>long<TAB>short<TAB>action`.
pub fn export_captions(ds: &Dataset, mut w: impl Write) -> Result<()> {
    for i in 0..ds.len() {
        let r = ds.sc_record(i)?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.image_id,
            r.caption.long,
            r.caption.short,
            r.caption.action.name()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsc_builds_counts_and_reproduces() {
        let a = build_dsc(24, 7, &[]).unwrap();
        assert_eq!(a.len(), 24);
        let b = build_dsc(24, 7, &[]).unwrap();
        assert_eq!(a.manifest.content_hash, b.manifest.content_hash);
        let c = build_dsc(24, 8, &[]).unwrap();
        assert_ne!(a.manifest.content_hash, c.manifest.content_hash);
        let r = a.sc_record(0).unwrap();
        assert!(!r.caption.long.is_empty());
    }

    #[test]
    fn dtpn_records_start_at_origin_with_ten_poses() {
        let ds = build_dtpn(20, 3, &[]).unwrap();
        assert_eq!(ds.len(), 20);
        for i in 0..ds.len() {
            let r = ds.plan_record(i).unwrap();
            assert_eq!(r.expert.len(), 10);
            let first = r.expert.first();
            assert!(first.x.abs() < 1e-12 && first.y.abs() < 1e-12 && first.phi.abs() < 1e-12);
            assert_eq!(r.scan.len(), crate::sim::LIDAR_BEAMS);
        }
        let episodes: std::collections::HashSet<u64> = (0..ds.len())
            .map(|i| ds.plan_record(i).unwrap().episode)
            .collect();
        assert!(episodes.len() >= 3);
    }

    #[test]
    fn save_load_roundtrip_and_validation() {
        let ds = build_dsc(10, 5, &[ScenarioKind::NarrowHallway]).unwrap();
        let dir = std::env::temp_dir().join("socnav_ds_test");
        let _ = std::fs::remove_dir_all(&dir);
        ds.save(&dir).unwrap();
        let back = Dataset::load(&dir).unwrap();
        assert_eq!(back.manifest, ds.manifest);
        assert_eq!(back.sc_record(3).unwrap(), ds.sc_record(3).unwrap());

        // Corrupt the records file: load must fail.
        let path = dir.join("records.bin");
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(Dataset::load(&dir).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let s = Splits::standard(100);
        assert_eq!(s.train().len() + s.val().len() + s.test().len(), 100);
        assert_eq!(s.train().end, s.val().start);
        assert_eq!(s.val().end, s.test().start);
    }

    #[test]
    fn manifest_roundtrip() {
        let m = DatasetManifest {
            kind: DatasetKind::Tpn,
            count: 42,
            seed: 9,
            schema_version: SCHEMA_VERSION,
            splits: Splits::standard(42),
            content_hash: 0xdeadbeef,
        };
        let back = DatasetManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn caption_export_format() {
        let ds = build_dsc(3, 11, &[]).unwrap();
        let mut buf = Vec::new();
        export_captions(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            assert_eq!(line.split('\t').count(), 4);
        }
    }
}
