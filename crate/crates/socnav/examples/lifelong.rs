//! Online lifelong updates: fill the frame buffer during navigation,
//! caption the batch with the teacher, fine-tune both encoders, and
//! re-embed the retrieval database.
//!
//! ```bash
//! cargo run --release -p socnav --example lifelong
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{ContextDatabase, ScConfig, SocialContextModel};
use socnav::lifelong::{apply_update, caption_batch, BufferedFrame, FrameBuffer, UpdateState};
use socnav::nn::ParamStore;
use socnav::sim::{make_scenario, rasterize_view, teacher_oracle, ScenarioKind, TemplateTeacher};
use socnav::text::Tokenizer;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);

    // A database built before the update, from hallway captions only.
    let tok = Tokenizer::new();
    let captions: Vec<_> = (0..16)
        .map(|i| teacher_oracle(&make_scenario(ScenarioKind::NarrowHallway, i)))
        .collect();
    let mut db = ContextDatabase::build(&model, &store, &tok, &captions).unwrap();
    let before: Vec<Vec<f64>> = db.entries.iter().map(|e| e.embedding.values.clone()).collect();

    // Navigation encounters a new family: buffer frames until full.
    let mut buffer = FrameBuffer::new(20);
    let mut seed = 100u64;
    loop {
        let world = make_scenario(ScenarioKind::BlindCorner, seed);
        seed += 1;
        let full = buffer.push(BufferedFrame {
            raster: rasterize_view(&world.robot, &world),
            world,
        });
        if full {
            break;
        }
    }
    println!("buffer filled with {} frames", buffer.len());

    let batch = buffer.take_batch();
    let (frames, caps, dropped) = caption_batch(batch, &TemplateTeacher);
    println!("teacher captioned {} frames ({} dropped)", caps.len(), dropped);

    let mut state = UpdateState {
        steps: 10,
        lr: 1e-4,
        ..Default::default()
    };
    let report = apply_update(
        &model,
        &mut store,
        &mut state,
        &frames,
        &caps,
        Some(&mut db),
        dropped,
    )
    .unwrap();
    println!(
        "update {}: contrastive loss {:.4} -> {:.4} in {} ms",
        report.iteration, report.pre_loss, report.post_loss, report.wall_ms
    );

    let moved = db
        .entries
        .iter()
        .zip(&before)
        .filter(|(e, b)| {
            socnav::nn::cosine_similarity(&e.embedding.values, b).unwrap() < 1.0 - 1e-9
        })
        .count();
    println!("database rebuilt: {moved}/{} entries moved", db.len());
    println!("{}", report.log_line().trim());
}
