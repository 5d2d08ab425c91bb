//! Contrastive distillation of the encoder pair on a small caption set,
//! with the retrieval database built from the result.
//!
//! Full convergence on a desk CPU takes a few hundred steps; this demo
//! runs a short probe so it finishes in about a minute.
//!
//! ```bash
//! cargo run --release -p socnav --example distill
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::context::{
    retrieval_accuracy, sc_steps_probe, ContextDatabase, ScConfig, SocialContextModel,
};
use socnav::nn::ParamStore;
use socnav::sim::{make_scenario, rasterize_view, teacher_oracle, ScenarioKind};
use socnav::text::Tokenizer;

fn main() {
    // 32 (raster, caption) pairs across the four scenario families.
    let mut data = Vec::new();
    let mut seed = 0u64;
    while data.len() < 32 {
        let kind = ScenarioKind::ALL[data.len() % 4];
        let world = make_scenario(kind, seed);
        data.push((rasterize_view(&world.robot, &world), teacher_oracle(&world)));
        seed += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let model = SocialContextModel::init(ScConfig::default(), &mut store, &mut rng);
    println!(
        "untrained retrieval accuracy: {:.3}",
        retrieval_accuracy(&model, &store, &data).unwrap()
    );

    let losses = sc_steps_probe(&model, &mut store, &data, 60, 2e-3, 2).unwrap();
    for (i, l) in losses.iter().enumerate() {
        if i % 10 == 0 || i + 1 == losses.len() {
            println!("step {i:>3}: contrastive loss {l:.4}");
        }
    }
    println!(
        "after {} steps: retrieval accuracy {:.3}",
        losses.len(),
        retrieval_accuracy(&model, &store, &data).unwrap()
    );

    // Build the retrieval database from the trained text encoder and probe
    // it with an image embedding.
    let tok = Tokenizer::new();
    let captions: Vec<_> = data.iter().map(|(_, c)| c.clone()).collect();
    let db = ContextDatabase::build(&model, &store, &tok, &captions).unwrap();
    let query = model.encode_image(&store, &data[5].0).unwrap();
    let (idx, cosine, entry) = db.retrieve(&query.values).unwrap();
    println!(
        "query image 5 -> entry {idx} (cosine {cosine:.3}): action {}",
        entry.caption.action.name()
    );
}
