//! Command-line entry points: dataset generation, the three training
//! stages, episode rollouts with ablation and online-update switches,
//! hold-out evaluation, manual update triggers, and record dumps.

use crate::config::RunConfig;
use crate::context::{ContextDatabase, ScConfig, ScTrainConfig, SocialContextModel};
use crate::data::{
    build_dsc, build_dtpn, build_dtsm, curate_database, plan_records_for_training, Dataset, PlanRecord,
};
use crate::lifelong::{apply_update, caption_batch, BufferedFrame, UpdateState};
use crate::nn::{load_params, save_params, ParamStore};
use crate::pipeline::{
    ablation_table_text, episode_svg, open_loop_eval, run_episode, Ablation, AblationRow,
    EpisodeOptions, LluOptions, Stack,
};
use crate::planner::{train_tpn, Tpn, TpnConfig, TpnTrainConfig};
use crate::selector::{train_tsm, SelectionHead, TsmConfig, TsmSample, TsmTrainConfig};
use crate::sim::{make_scenario, rasterize_view, ScenarioKind, TemplateTeacher};
use crate::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "socnav",
    about = "Socially compliant navigation: data generation, training, rollouts, and evaluation",
    version
)]
pub struct Cli {
    /// Flat key=value config file; command-line overrides take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. --set sc_epochs=5 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Output root (defaults to $SOCNAV_OUT or ./out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Sc,
    Tpn,
    Tsm,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StageArg {
    Scclip,
    Tpn,
    Tsm,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    NarrowHallway,
    BlindCorner,
    StaticGroupsDynamic,
    DynamicGroupsDynamic,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::NarrowHallway => ScenarioKind::NarrowHallway,
            ScenarioArg::BlindCorner => ScenarioKind::BlindCorner,
            ScenarioArg::StaticGroupsDynamic => ScenarioKind::StaticGroupsDynamic,
            ScenarioArg::DynamicGroupsDynamic => ScenarioKind::DynamicGroupsDynamic,
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a dataset (the tsm kind needs trained checkpoints).
    GenData {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Record count; defaults to the config's desk-scale size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to one scenario family (default: all four).
        #[arg(long, value_enum)]
        family: Option<ScenarioArg>,
    },
    /// Train one stage; later stages need the earlier checkpoints.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
    },
    /// Roll out one full-pipeline episode and write metrics plus a plot.
    RunEpisode {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the visual context tokens into the planner with zeros.
        #[arg(long)]
        ablate_ei: bool,
        /// Replace the retrieved text embedding into the selector with zeros.
        #[arg(long)]
        ablate_et: bool,
        /// Replace the LiDAR tokens into the planner with zeros.
        #[arg(long)]
        ablate_el: bool,
        /// Buffer frames during the episode and fine-tune the encoders
        /// when the buffer fills.
        #[arg(long)]
        llu: bool,
    },
    /// Hold-out evaluation: the ablation table before and after one
    /// online update from the held-out family.
    Eval {
        /// Planning dataset directory to evaluate on (test split).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Family supplying the online-update frames.
        #[arg(long, value_enum, default_value = "blind-corner")]
        llu_family: ScenarioArg,
        #[arg(long, default_value_t = 1000)]
        llu_seed: u64,
    },
    /// Manually trigger one online update from freshly collected frames.
    LluUpdate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print one dataset record in human-readable form.
    Dump {
        /// Dataset directory (manifest.txt + records.bin).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

/// Parse arguments, run, and translate errors to exit codes: 0 success,
/// 2 usage errors (clap's own convention), 1 runtime failures.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::BadConfig(format!("--set expects KEY=VALUE, got {kv}")))?;
        cfg.apply(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let out = cli.out.clone().unwrap_or_else(RunConfig::out_root);
    std::fs::create_dir_all(&out)?;
    // Every run records the effective config next to its outputs.
    std::fs::write(out.join("run.cfg"), cfg.to_text())?;

    match cli.command {
        Command::GenData {
            kind,
            n,
            seed,
            family,
        } => cmd_gen_data(&cfg, &out, kind, n, seed, family),
        Command::Train { stage } => cmd_train(&cfg, &out, stage),
        Command::RunEpisode {
            scenario,
            seed,
            ablate_ei,
            ablate_et,
            ablate_el,
            llu,
        } => cmd_run_episode(
            &cfg,
            &out,
            scenario.into(),
            seed,
            Ablation {
                no_context: ablate_ei,
                no_text: ablate_et,
                no_lidar: ablate_el,
            },
            llu,
        ),
        Command::Eval {
            data,
            llu_family,
            llu_seed,
        } => cmd_eval(&cfg, &out, data, llu_family.into(), llu_seed),
        Command::LluUpdate { scenario, seed } => {
            cmd_llu_update(&cfg, &out, scenario.into(), seed)
        }
        Command::Dump { data, index } => cmd_dump(&data, index),
    }
}

fn families_arg(family: Option<ScenarioArg>) -> Vec<ScenarioKind> {
    match family {
        Some(f) => vec![f.into()],
        None => Vec::new(),
    }
}

fn cmd_gen_data(
    cfg: &RunConfig,
    out: &Path,
    kind: KindArg,
    n: Option<usize>,
    seed: Option<u64>,
    family: Option<ScenarioArg>,
) -> Result<()> {
    let seed = seed.unwrap_or(cfg.seed);
    let families = families_arg(family);
    let (ds, dir) = match kind {
        KindArg::Sc => (
            build_dsc(n.unwrap_or(cfg.dsc_n), seed, &families)?,
            out.join("dsc"),
        ),
        KindArg::Tpn => (
            build_dtpn(n.unwrap_or(cfg.dtpn_n), seed, &families)?,
            out.join("dtpn"),
        ),
        KindArg::Tsm => {
            let (sc_model, sc_store) = load_sc(out)?;
            let (tpn, tpn_store) = load_tpn(cfg, out)?;
            (
                build_dtsm(
                    n.unwrap_or(cfg.dtsm_n),
                    seed,
                    &families,
                    &sc_model,
                    &sc_store,
                    &tpn,
                    &tpn_store,
                )?,
                out.join("dtsm"),
            )
        }
    };
    ds.save(&dir)?;
    println!(
        "wrote {} records to {} (hash {:016x})",
        ds.len(),
        dir.display(),
        ds.manifest.content_hash
    );
    Ok(())
}

fn sc_ckpt(out: &Path) -> PathBuf {
    out.join("sc.ckpt")
}

fn db_ckpt(out: &Path) -> PathBuf {
    out.join("db.ckpt")
}

fn tpn_ckpt(out: &Path) -> PathBuf {
    out.join("tpn.ckpt")
}

fn tsm_ckpt(out: &Path) -> PathBuf {
    out.join("tsm.ckpt")
}

fn load_sc(out: &Path) -> Result<(SocialContextModel, ParamStore)> {
    let path = sc_ckpt(out);
    if !path.exists() {
        return Err(Error::MissingCheckpoint(format!(
            "{} (run `socnav train --stage scclip` first)",
            path.display()
        )));
    }
    Ok((SocialContextModel::new(ScConfig::default()), load_params(&path)?))
}

fn load_tpn(cfg: &RunConfig, out: &Path) -> Result<(Tpn, ParamStore)> {
    let path = tpn_ckpt(out);
    if !path.exists() {
        return Err(Error::MissingCheckpoint(format!(
            "{} (run `socnav train --stage tpn` first)",
            path.display()
        )));
    }
    let tpn_cfg = TpnConfig {
        common_dim: cfg.common_dim,
        heads: cfg.heads,
        n_candidates: cfg.candidates,
        ..Default::default()
    };
    Ok((Tpn::new(tpn_cfg), load_params(&path)?))
}

fn load_tsm(cfg: &RunConfig, out: &Path) -> Result<(SelectionHead, ParamStore)> {
    let path = tsm_ckpt(out);
    if !path.exists() {
        return Err(Error::MissingCheckpoint(format!(
            "{} (run `socnav train --stage tsm` first)",
            path.display()
        )));
    }
    let tsm_cfg = TsmConfig {
        k: cfg.candidates,
        ..Default::default()
    };
    Ok((SelectionHead::new(tsm_cfg), load_params(&path)?))
}

fn load_stack(cfg: &RunConfig, out: &Path) -> Result<Stack> {
    let (sc_model, sc_store) = load_sc(out)?;
    let (tpn, tpn_store) = load_tpn(cfg, out)?;
    let (tsm, tsm_store) = load_tsm(cfg, out)?;
    let db = ContextDatabase::load(&db_ckpt(out))?;
    Ok(Stack {
        sc_model,
        sc_store,
        db,
        tpn,
        tpn_store,
        tsm,
        tsm_store,
    })
}

fn cmd_train(cfg: &RunConfig, out: &Path, stage: StageArg) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    match stage {
        StageArg::Scclip => {
            let ds = Dataset::load(&out.join("dsc")).map_err(|_| {
                Error::MissingCheckpoint(format!(
                    "{}/dsc (run `socnav gen-data --kind sc` first)",
                    out.display()
                ))
            })?;
            let data: Vec<_> = (0..ds.len())
                .map(|i| ds.sc_record(i).map(|r| (r.raster, r.caption)))
                .collect::<Result<_>>()?;
            let mut store = ParamStore::new();
            let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
            let train_cfg = ScTrainConfig {
                batch_size: cfg.sc_batch,
                lr: cfg.sc_lr,
                weight_decay: cfg.sc_wd,
                epochs: cfg.sc_epochs,
                seed: cfg.seed,
                workers: cfg.workers,
                verbose: true,
                ..Default::default()
            };
            let log = crate::context::train_sc_clip(&model, &mut store, &data, &train_cfg)?;
            save_params(&sc_ckpt(out), &store)?;
            std::fs::write(out.join("sc_train.log"), log.to_text())?;
            let db = curate_database(&ds, cfg.db_size, cfg.seed, &model, &store)?;
            db.save(&db_ckpt(out))?;
            println!(
                "trained encoders: best val loss {:.4} at epoch {}; database size {}",
                log.best_val_loss,
                log.best_epoch,
                db.len()
            );
        }
        StageArg::Tpn => {
            let (sc_model, sc_store) = load_sc(out)?;
            let ds = Dataset::load(&out.join("dtpn")).map_err(|_| {
                Error::MissingCheckpoint(format!(
                    "{}/dtpn (run `socnav gen-data --kind tpn` first)",
                    out.display()
                ))
            })?;
            let tpn_cfg = TpnConfig {
                common_dim: cfg.common_dim,
                heads: cfg.heads,
                n_candidates: cfg.candidates,
                ..Default::default()
            };
            let mut store = ParamStore::new();
            let tpn = Tpn::init(tpn_cfg, &mut store, &mut rng);
            let records =
                plan_records_for_training(&ds, 0..ds.len(), &sc_model, &sc_store, &tpn)?;
            let train_cfg = TpnTrainConfig {
                batch_size: cfg.tpn_batch,
                lr: cfg.tpn_lr,
                weight_decay: cfg.tpn_wd,
                epochs: cfg.tpn_epochs,
                seed: cfg.seed,
                workers: cfg.workers,
                verbose: true,
                ..Default::default()
            };
            let log = train_tpn(&tpn, &mut store, &records, &train_cfg)?;
            save_params(&tpn_ckpt(out), &store)?;
            std::fs::write(out.join("tpn_train.log"), log.to_text())?;
            println!(
                "trained planner: best val loss {:.5} at epoch {}",
                log.best_val_loss, log.best_epoch
            );
        }
        StageArg::Tsm => {
            let ds = Dataset::load(&out.join("dtsm")).map_err(|_| {
                Error::MissingCheckpoint(format!(
                    "{}/dtsm (run `socnav gen-data --kind tsm` first)",
                    out.display()
                ))
            })?;
            let samples: Vec<TsmSample> = (0..ds.len())
                .map(|i| {
                    ds.sel_record(i).map(|r| TsmSample {
                        candidates: crate::selector::candidate_mats(&r.candidates),
                        text_embedding: r.text_embedding,
                        label: r.label,
                    })
                })
                .collect::<Result<_>>()?;
            let tsm_cfg = TsmConfig {
                k: cfg.candidates,
                ..Default::default()
            };
            let mut store = ParamStore::new();
            let head = SelectionHead::init(tsm_cfg, &mut store, &mut rng);
            let train_cfg = TsmTrainConfig {
                batch_size: cfg.tsm_batch,
                lr: cfg.tsm_lr,
                weight_decay: cfg.tsm_wd,
                epochs: cfg.tsm_epochs,
                seed: cfg.seed,
                workers: cfg.workers,
                verbose: true,
                ..Default::default()
            };
            let log = train_tsm(&head, &mut store, &samples, &train_cfg)?;
            save_params(&tsm_ckpt(out), &store)?;
            std::fs::write(out.join("tsm_train.log"), log.to_text())?;
            println!(
                "trained selector: best val loss {:.4} at epoch {}",
                log.best_val_loss, log.best_epoch
            );
        }
    }
    Ok(())
}

fn cmd_run_episode(
    cfg: &RunConfig,
    out: &Path,
    scenario: ScenarioKind,
    seed: u64,
    ablation: Ablation,
    llu: bool,
) -> Result<()> {
    let mut stack = load_stack(cfg, out)?;
    let world = make_scenario(scenario, seed);
    let opts = EpisodeOptions {
        max_steps: cfg.max_steps,
        replan_every: cfg.replan_every,
        llu: llu.then(|| LluOptions {
            capacity: cfg.llu_capacity,
            state: UpdateState {
                temperature: cfg.llu_mu,
                lr: cfg.llu_lr,
                steps: cfg.llu_steps,
                ..Default::default()
            },
        }),
        ..Default::default()
    };
    let result = run_episode(&mut stack, &world, ablation, &opts)?;

    let tag = format!("{}_{}_{}", scenario.name(), seed, ablation.label());
    std::fs::write(out.join(format!("episode_{tag}.svg")), episode_svg(&world, &result))?;
    let mut cmd_log = String::new();
    for (t, v, w) in &result.commands {
        cmd_log.push_str(&format!("{t:.2} {v:.4} {w:.4}\n"));
    }
    std::fs::write(out.join(format!("commands_{tag}.log")), cmd_log)?;
    let mut sel_log = String::new();
    for (i, d) in result.decisions.iter().enumerate() {
        sel_log.push_str(&format!(
            "{i} k={} cosine={:.3} action={} fallback={}\n",
            d.selected,
            d.confidence,
            d.action.name(),
            d.fallback
        ));
    }
    std::fs::write(out.join(format!("selections_{tag}.log")), sel_log)?;
    for update in &result.llu_updates {
        update.append_to(&out.join("llu_updates.log"))?;
    }

    println!(
        "episode {tag}: reached={} wall_collision={} steps={} mse={:.4} hausdorff={:.4} psv={:.2}s llu_updates={}",
        result.reached_goal,
        result.wall_collision,
        result.steps,
        result.mse,
        result.hausdorff,
        result.psv_seconds,
        result.llu_updates.len()
    );
    Ok(())
}

fn collect_family_frames(
    family: ScenarioKind,
    seed: u64,
    count: usize,
) -> Vec<BufferedFrame> {
    let mut frames = Vec::with_capacity(count);
    let mut world_seed = seed;
    while frames.len() < count {
        let mut world = make_scenario(family, world_seed);
        for _ in 0..5 {
            if frames.len() >= count {
                break;
            }
            frames.push(BufferedFrame {
                raster: rasterize_view(&world.robot, &world),
                world: world.clone(),
            });
            crate::data::advance_along_expert(&mut world, 6);
        }
        world_seed += 1;
    }
    frames
}

fn cmd_eval(
    cfg: &RunConfig,
    out: &Path,
    data: Option<PathBuf>,
    llu_family: ScenarioKind,
    llu_seed: u64,
) -> Result<()> {
    let mut stack = load_stack(cfg, out)?;
    let data_dir = data.unwrap_or_else(|| out.join("dtpn"));
    let ds = Dataset::load(&data_dir)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let records: Vec<PlanRecord> = ds
        .manifest
        .splits
        .test()
        .map(|i| ds.plan_record(i))
        .collect::<Result<_>>()?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut before = Vec::new();
    for variant in Ablation::VARIANTS {
        before.push(open_loop_eval(&stack, &records, variant)?);
    }

    // One online update from the held-out family, then re-evaluate.
    let frames = collect_family_frames(llu_family, llu_seed, cfg.llu_capacity);
    let (frames, captions, dropped) = caption_batch(frames, &TemplateTeacher);
    let mut state = UpdateState {
        temperature: cfg.llu_mu,
        lr: cfg.llu_lr,
        steps: cfg.llu_steps,
        ..Default::default()
    };
    let report = apply_update(
        &stack.sc_model,
        &mut stack.sc_store,
        &mut state,
        &frames,
        &captions,
        Some(&mut stack.db),
        dropped,
    )?;
    report.append_to(&out.join("llu_updates.log"))?;

    let mut rows = Vec::new();
    for (variant, &(bm, bh)) in Ablation::VARIANTS.iter().zip(&before) {
        let (am, ah) = open_loop_eval(&stack, &records, *variant)?;
        rows.push(AblationRow {
            variant: variant.label(),
            before_mse: bm,
            before_haus: bh,
            after_mse: am,
            after_haus: ah,
        });
    }
    let table = ablation_table_text(&rows);
    std::fs::write(out.join("ablation_table.tsv"), &table)?;
    print!("{table}");
    println!(
        "update: pre_loss {:.4} -> post_loss {:.4} on {} frames",
        report.pre_loss, report.post_loss, report.batch_size
    );
    Ok(())
}

fn cmd_llu_update(cfg: &RunConfig, out: &Path, scenario: ScenarioKind, seed: u64) -> Result<()> {
    let (sc_model, mut sc_store) = load_sc(out)?;
    let mut db = ContextDatabase::load(&db_ckpt(out))?;
    let frames = collect_family_frames(scenario, seed, cfg.llu_capacity);
    let (frames, captions, dropped) = caption_batch(frames, &TemplateTeacher);
    let mut state = UpdateState {
        temperature: cfg.llu_mu,
        lr: cfg.llu_lr,
        steps: cfg.llu_steps,
        ..Default::default()
    };
    let report = apply_update(
        &sc_model,
        &mut sc_store,
        &mut state,
        &frames,
        &captions,
        Some(&mut db),
        dropped,
    )?;
    save_params(&sc_ckpt(out), &sc_store)?;
    db.save(&db_ckpt(out))?;
    report.append_to(&out.join("llu_updates.log"))?;
    println!(
        "applied update {}: loss {:.4} -> {:.4} on {} frames ({} dropped)",
        report.iteration, report.pre_loss, report.post_loss, report.batch_size, dropped
    );
    Ok(())
}

fn cmd_dump(data: &Path, index: usize) -> Result<()> {
    let ds = Dataset::load(data)?;
    if index >= ds.len() {
        return Err(Error::BadConfig(format!(
            "index {index} out of range for {} records",
            ds.len()
        )));
    }
    print!("{}", ds.dump_record(index)?);
    Ok(())
}
