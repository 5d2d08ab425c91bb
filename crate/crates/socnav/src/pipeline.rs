//! Full-stack navigation: sense, encode, retrieve, plan, select, track.
//! Also the open-loop hold-out evaluation used by the ablation table and
//! the trend studies, plus a small SVG plotter for episode traces.

use crate::context::{ContextDatabase, SocialContextModel};
use crate::controller::{pid_step, PidState};
use crate::data::context_tokens;
use crate::geometry::{
    hausdorff, mse, mse_resampled, psv_duration, resample_by_arclength, wrap_angle, Pose,
    TimedTrack, Trajectory, PERSONAL_SPACE_RADIUS,
};
use crate::lifelong::{
    apply_update, caption_batch, BufferedFrame, FrameBuffer, UpdateReport, UpdateState,
};
use crate::nn::{Mat, ParamStore};
use crate::planner::{scan_to_points, voxelize, Tpn};
use crate::selector::SelectionHead;
use crate::sim::{scripted_expert, TemplateTeacher, World, LIDAR_MAX_RANGE};
use crate::text::Tokenizer;
use crate::{Error, Result};

/// Everything a rollout needs: the trained encoder pair, the retrieval
/// database, the planner, and the selection head.
pub struct Stack {
    pub sc_model: SocialContextModel,
    pub sc_store: ParamStore,
    pub db: ContextDatabase,
    pub tpn: Tpn,
    pub tpn_store: ParamStore,
    pub tsm: SelectionHead,
    pub tsm_store: ParamStore,
}

/// Which embeddings to replace with zeros, mirroring the ablation
/// variants: the context tokens into the planner, the retrieved text
/// embedding into the selector, and the LiDAR tokens into the planner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_context: bool,
    pub no_text: bool,
    pub no_lidar: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        no_context: false,
        no_text: false,
        no_lidar: false,
    };

    pub fn label(&self) -> &'static str {
        match (self.no_context, self.no_text, self.no_lidar) {
            (false, false, false) => "full",
            (true, false, false) => "no_image_embedding",
            (false, true, false) => "no_text_embedding",
            (false, false, true) => "no_lidar_embedding",
            _ => "combined",
        }
    }

    pub const VARIANTS: [Ablation; 4] = [
        Ablation::FULL,
        Ablation {
            no_context: true,
            no_text: false,
            no_lidar: false,
        },
        Ablation {
            no_context: false,
            no_text: true,
            no_lidar: false,
        },
        Ablation {
            no_context: false,
            no_text: false,
            no_lidar: true,
        },
    ];
}

/// Retrieval confidence below which selection falls back to candidate 0.
pub const RETRIEVAL_FALLBACK_COSINE: f64 = 0.2;

/// One planner/selector decision for the current sensor frame. Returns
/// the chosen trajectory in the world frame plus the decision metadata.
pub fn decide(
    stack: &Stack,
    world: &World,
    ablation: Ablation,
) -> Result<(Trajectory, Decision)> {
    let frame = world.sense();
    let tokens = context_tokens(&stack.sc_model, &stack.sc_store, &frame.raster)?;
    // Retrieval always uses the real pooled embedding (the ablation zeroes
    // the planner input, not the retrieval query).
    let pooled = tokens.row(tokens.rows - 1).to_vec();
    let (db_index, confidence, entry) = stack.db.retrieve(&pooled)?;

    let grid = voxelize(
        &scan_to_points(&frame.scan, LIDAR_MAX_RANGE),
        stack.tpn.cfg.voxel,
    );
    let candidates = stack.tpn.plan(
        &stack.tpn_store,
        (!ablation.no_context).then_some(&tokens),
        (!ablation.no_lidar).then_some(&grid),
        &frame.goal,
    )?;

    let zero_text;
    let text_embedding: &[f64] = if ablation.no_text {
        zero_text = vec![0.0; stack.sc_model.cfg.embed_dim];
        &zero_text
    } else {
        &entry.embedding.values
    };
    let (selected, fallback) = if !ablation.no_text && confidence < RETRIEVAL_FALLBACK_COSINE {
        (0, true)
    } else {
        (
            stack
                .tsm
                .select(&stack.tsm_store, &candidates, text_embedding)?
                .0,
            false,
        )
    };

    // Express the chosen candidate in the world frame.
    let (s, c) = world.robot.phi.sin_cos();
    let world_poses = candidates.trajectories[selected]
        .poses()
        .iter()
        .map(|p| {
            Pose::new(
                world.robot.x + c * p.x - s * p.y,
                world.robot.y + s * p.x + c * p.y,
                wrap_angle(p.phi + world.robot.phi),
            )
        })
        .collect();
    Ok((
        Trajectory::new(world_poses)?,
        Decision {
            selected,
            db_index,
            confidence,
            action: entry.caption.action,
            fallback,
        },
    ))
}

/// Metadata of one planning decision, logged per replan tick.
#[derive(Debug, Clone)]
pub struct Decision {
    pub selected: usize,
    pub db_index: usize,
    pub confidence: f64,
    pub action: crate::sim::Action,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeOptions {
    pub max_steps: usize,
    /// Controller steps between planner invocations (1 Hz at dt = 0.1).
    pub replan_every: usize,
    pub goal_tolerance: f64,
    /// Online-update settings; `None` disables the frame buffer.
    pub llu: Option<LluOptions>,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            max_steps: 600,
            replan_every: 10,
            goal_tolerance: 0.35,
            llu: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LluOptions {
    pub capacity: usize,
    pub state: UpdateState,
}

impl Default for LluOptions {
    fn default() -> Self {
        Self {
            capacity: 50,
            state: UpdateState::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub reached_goal: bool,
    pub wall_collision: bool,
    pub human_collision: bool,
    pub steps: usize,
    pub mse: f64,
    pub hausdorff: f64,
    pub psv_seconds: f64,
    pub robot_path: Vec<(f64, f64)>,
    pub expert_path: Vec<(f64, f64)>,
    pub human_paths: Vec<Vec<(f64, f64)>>,
    pub decisions: Vec<Decision>,
    pub commands: Vec<(f64, f64, f64)>,
    pub llu_updates: Vec<UpdateReport>,
}

/// Run one closed-loop episode with the full stack. The expert reference
/// trajectory comes from an identical world rolled out under the scripted
/// expert with the same controller.
pub fn run_episode(
    stack: &mut Stack,
    world: &World,
    ablation: Ablation,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult> {
    let expert_path = expert_rollout(world, opts);

    let mut world = world.clone();
    let mut pid = PidState::default();
    let mut plan: Option<Trajectory> = None;
    let mut decisions = Vec::new();
    let mut commands = Vec::new();
    let mut robot_path = vec![world.robot.position()];
    let mut human_paths: Vec<Vec<(f64, f64)>> =
        world.humans.iter().map(|h| vec![(h.x, h.y)]).collect();
    let mut wall_collision = false;
    let mut reached = false;

    let mut buffer = opts
        .llu
        .as_ref()
        .map(|l| FrameBuffer::new(l.capacity.max(1)));
    let llu_stride = opts
        .llu
        .as_ref()
        .map(|l| (opts.max_steps / l.capacity.max(1)).max(1))
        .unwrap_or(1);
    let mut llu_updates = Vec::new();
    let teacher = TemplateTeacher;

    let mut steps = 0usize;
    for step in 0..opts.max_steps {
        if step % opts.replan_every == 0 {
            let (traj, decision) = decide(stack, &world, ablation)?;
            decisions.push(decision);
            plan = Some(traj);
            pid.reset();
        }
        let traj = plan.as_ref().expect("plan exists after first tick");
        let (v, omega) = pid_step(&mut pid, &world.robot, traj, world.dt)?;
        commands.push((world.time, v, omega));
        world.step(v, omega);
        steps = step + 1;

        robot_path.push(world.robot.position());
        for (path, h) in human_paths.iter_mut().zip(&world.humans) {
            path.push((h.x, h.y));
        }
        if world.wall_collision() {
            wall_collision = true;
        }

        if let (Some(buf), Some(llu)) = (buffer.as_mut(), opts.llu.as_ref()) {
            if step % llu_stride == 0 {
                let frame = BufferedFrame {
                    raster: crate::sim::rasterize_view(&world.robot, &world),
                    world: world.clone(),
                };
                if buf.push(frame) {
                    let batch = buf.take_batch();
                    let (frames, captions, dropped) = caption_batch(batch, &teacher);
                    let mut state = llu.state.clone();
                    state.iteration = llu_updates.len();
                    let report = apply_update(
                        &stack.sc_model,
                        &mut stack.sc_store,
                        &mut state,
                        &frames,
                        &captions,
                        Some(&mut stack.db),
                        dropped,
                    )?;
                    llu_updates.push(report);
                }
            }
        }

        if world.goal_distance() < opts.goal_tolerance {
            reached = true;
            break;
        }
    }

    // Metrics against the expert reference.
    let robot_traj = Trajectory::new(
        robot_path
            .iter()
            .map(|&(x, y)| Pose::new(x, y, 0.0))
            .collect(),
    )?;
    let expert_traj = Trajectory::new(
        expert_path
            .iter()
            .map(|&(x, y)| Pose::new(x, y, 0.0))
            .collect(),
    )?;
    let mse_value = mse_resampled(&robot_traj, &expert_traj);
    let n = robot_path.len().max(expert_path.len());
    let haus = hausdorff(
        &resample_by_arclength(&robot_traj, n),
        &resample_by_arclength(&expert_traj, n),
    )?;

    let robot_track = TimedTrack::from_positions(0.0, world.dt, &robot_path)?;
    let human_tracks: Vec<TimedTrack> = human_paths
        .iter()
        .map(|p| TimedTrack::from_positions(0.0, world.dt, p))
        .collect::<Result<_>>()?;
    let psv = psv_duration(&robot_track, &human_tracks, PERSONAL_SPACE_RADIUS)?;

    Ok(EpisodeResult {
        reached_goal: reached,
        wall_collision,
        human_collision: world.collided && !wall_collision,
        steps,
        mse: mse_value,
        hausdorff: haus,
        psv_seconds: psv,
        robot_path,
        expert_path,
        human_paths,
        decisions,
        commands,
        llu_updates,
    })
}

/// Reference rollout: the scripted expert replanning at the same rate,
/// tracked by the same controller.
pub fn expert_rollout(world: &World, opts: &EpisodeOptions) -> Vec<(f64, f64)> {
    let mut world = world.clone();
    let mut pid = PidState::default();
    let mut path = vec![world.robot.position()];
    let mut plan = scripted_expert(&world);
    for step in 0..opts.max_steps {
        if step % opts.replan_every == 0 {
            plan = scripted_expert(&world);
            pid.reset();
        }
        let (v, omega) = match pid_step(&mut pid, &world.robot, &plan, world.dt) {
            Ok(cmd) => cmd,
            Err(_) => break,
        };
        world.step(v, omega);
        path.push(world.robot.position());
        if world.goal_distance() < opts.goal_tolerance {
            break;
        }
    }
    path
}

/// Open-loop evaluation on held-out planning records: run the decision
/// pipeline on each stored frame and compare the selected candidate with
/// the expert demonstration. Deterministic given checkpoints.
pub fn open_loop_eval(
    stack: &Stack,
    records: &[crate::data::PlanRecord],
    ablation: Ablation,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total_mse = 0.0;
    let mut total_haus = 0.0;
    for rec in records {
        let tokens = context_tokens(&stack.sc_model, &stack.sc_store, &rec.raster)?;
        let pooled = tokens.row(tokens.rows - 1).to_vec();
        let (_, confidence, entry) = stack.db.retrieve(&pooled)?;
        let grid = voxelize(&scan_to_points(&rec.scan, LIDAR_MAX_RANGE), stack.tpn.cfg.voxel);
        let candidates = stack.tpn.plan(
            &stack.tpn_store,
            (!ablation.no_context).then_some(&tokens),
            (!ablation.no_lidar).then_some(&grid),
            &rec.goal,
        )?;
        let zero_text;
        let text: &[f64] = if ablation.no_text {
            zero_text = vec![0.0; stack.sc_model.cfg.embed_dim];
            &zero_text
        } else {
            &entry.embedding.values
        };
        let selected = if !ablation.no_text && confidence < RETRIEVAL_FALLBACK_COSINE {
            0
        } else {
            stack.tsm.select(&stack.tsm_store, &candidates, text)?.0
        };
        let chosen = &candidates.trajectories[selected];
        total_mse += mse(chosen, &rec.expert)?;
        total_haus += hausdorff(&chosen.points(), &rec.expert.points())?;
    }
    let n = records.len() as f64;
    Ok((total_mse / n, total_haus / n))
}

/// One row of the ablation table.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: &'static str,
    pub before_mse: f64,
    pub before_haus: f64,
    pub after_mse: f64,
    pub after_haus: f64,
}

/// Machine-readable ablation table (tab-separated with a header).
pub fn ablation_table_text(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant\tbefore_mse\tbefore_haus\tafter_mse\tafter_haus\n");
    for r in rows {
        s.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            r.variant, r.before_mse, r.before_haus, r.after_mse, r.after_haus
        ));
    }
    s
}

/// Minimal standalone SVG of an episode: walls, paths, goal.
pub fn episode_svg(world: &World, result: &EpisodeResult) -> String {
    let (xmin, ymin, xmax, ymax) = world.bounds;
    let scale = 60.0;
    let w = (xmax - xmin) * scale;
    let h = (ymax - ymin) * scale;
    let tx = |x: f64| (x - xmin) * scale;
    let ty = |y: f64| (ymax - y) * scale;
    let polyline = |pts: &[(f64, f64)], color: &str, width: f64| {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", tx(x), ty(y)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.1} {h:.1}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for wall in &world.walls {
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"3\"/>\n",
            tx(wall.ax),
            ty(wall.ay),
            tx(wall.bx),
            ty(wall.by)
        ));
    }
    for path in &result.human_paths {
        svg.push_str(&polyline(path, "#cc3333", 1.5));
    }
    svg.push_str(&polyline(&result.expert_path, "#33aa33", 2.0));
    svg.push_str(&polyline(&result.robot_path, "#3355cc", 2.5));
    svg.push_str(&format!(
        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"6\" fill=\"#33aa33\"/>\n",
        tx(world.goal.x),
        ty(world.goal.y)
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Build a stack from freshly initialized parameters (untested weights;
/// used by tests and examples that train in place).
pub fn untrained_stack(seed: u64) -> Stack {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sc_store = ParamStore::new();
    let sc_model = SocialContextModel::init(crate::context::ScConfig::default(), &mut sc_store, &mut rng);
    let mut tpn_store = ParamStore::new();
    let tpn = Tpn::init(crate::planner::TpnConfig::default(), &mut tpn_store, &mut rng);
    let mut tsm_store = ParamStore::new();
    let tsm = SelectionHead::init(crate::selector::TsmConfig::default(), &mut tsm_store, &mut rng);
    Stack {
        sc_model,
        sc_store,
        db: ContextDatabase::default(),
        tpn,
        tpn_store,
        tsm,
        tsm_store,
    }
}

/// Tokenizer shared by pipeline callers.
pub fn tokenizer() -> Tokenizer {
    Tokenizer::new()
}

/// Convenience: seed the database from a handful of caption pairs (tests
/// and examples).
pub fn seed_database(stack: &mut Stack, captions: &[crate::sim::CaptionPair]) -> Result<()> {
    let tok = Tokenizer::new();
    stack.db = ContextDatabase::build(&stack.sc_model, &stack.sc_store, &tok, captions)?;
    Ok(())
}

/// Expert context tokens helper re-exported for eval call sites.
pub fn stack_context_tokens(stack: &Stack, raster: &crate::sim::raster::Raster) -> Result<Mat> {
    context_tokens(&stack.sc_model, &stack.sc_store, raster)
}
