//! Scenario worlds, the scripted expert, and the caption oracle.
//!
//! ```bash
//! cargo run --release -p socnav --example simulate
//! ```

use socnav::sim::{
    classify_plan_maneuver, make_scenario, scripted_expert, teacher_oracle, ScenarioKind,
};

fn main() {
    for kind in ScenarioKind::ALL {
        let world = make_scenario(kind, 7);
        let plan = scripted_expert(&world);
        let caption = teacher_oracle(&world);
        println!("== {}", kind.name());
        println!(
            "   {} humans, {} groups, goal {:.1} m away",
            world.humans.len(),
            world.n_groups,
            world.goal_distance()
        );
        println!("   action:  {}", caption.action.name());
        println!("   realize: {}", classify_plan_maneuver(&world, &plan).name());
        println!("   short:   {}", caption.short);
        let head = plan
            .poses()
            .iter()
            .take(4)
            .map(|p| format!("({:.2},{:.2})", p.x, p.y))
            .collect::<Vec<_>>()
            .join(" ");
        println!("   plan:    {head} ...");
        println!("   long:    {}", caption.long);
    }
}
