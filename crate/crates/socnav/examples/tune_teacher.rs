//! Scratch diagnostic: teacher action vs expert realized maneuver.

use socnav::geometry::Pose;
use socnav::sim::{
    classify_plan_maneuver, make_scenario, scripted_expert, teacher_oracle, Action, Human,
    ScenarioKind, Segment, World,
};

fn main() {
    // Single-case debug first.
    let mut w = World {
        walls: vec![
            Segment::new(0.0, -1.0, 9.0, -1.0),
            Segment::new(0.0, 1.0, 9.0, 1.0),
        ],
        humans: Vec::new(),
        n_groups: 0,
        robot: Pose::new(0.5, 0.0, 0.0),
        goal: Pose::new(8.5, 0.0, 0.0),
        dt: 0.1,
        seed: 0,
        time: 0.0,
        collided: false,
        bounds: (-0.5, -1.5, 9.5, 1.5),
    };
    w.humans.push(Human::walking(4.0, 0.0, 0.8, vec![(0.5, 0.0)]));
    let cap = teacher_oracle(&w);
    let plan = scripted_expert(&w);
    println!("teacher: {:?}", cap.action);
    println!("plan classify: {:?}", classify_plan_maneuver(&w, &plan));
    for p in plan.poses() {
        println!("  ({:.2}, {:.2}, {:.2})", p.x, p.y, p.phi);
    }

    // Confusion matrix per family.
    for kind in ScenarioKind::ALL {
        let mut matrix = std::collections::BTreeMap::new();
        for seed in 0..250u64 {
            let w = make_scenario(kind, seed);
            let label = teacher_oracle(&w).action;
            let plan = scripted_expert(&w);
            let realized = classify_plan_maneuver(&w, &plan);
            *matrix
                .entry((label.name(), realized.name()))
                .or_insert(0usize) += 1;
        }
        let agree: usize = Action::ALL
            .iter()
            .map(|a| matrix.get(&(a.name(), a.name())).copied().unwrap_or(0))
            .sum();
        println!("\n== {} (agreement {}/250)", kind.name(), agree);
        for ((l, r), n) in &matrix {
            if l != r {
                println!("  teacher={l:15} expert={r:15} x{n}");
            }
        }
    }
}
