//! PID trajectory tracking on the unicycle base.
//!
//! ```bash
//! cargo run --release -p socnav --example track
//! ```

use socnav::controller::{pid_step, PidState};
use socnav::geometry::{Pose, Trajectory};
use socnav::sim::World;

fn empty_world() -> World {
    World {
        walls: Vec::new(),
        humans: Vec::new(),
        n_groups: 0,
        robot: Pose::new(0.0, 0.5, 0.8),
        goal: Pose::new(6.0, 0.0, 0.0),
        dt: 0.1,
        seed: 0,
        time: 0.0,
        collided: false,
        bounds: (-1.0, -3.0, 7.0, 3.0),
    }
}

fn main() {
    // Follow a straight 6 m line starting from an offset pose.
    let line = Trajectory::new(
        (0..=60)
            .map(|i| Pose::new(0.1 * i as f64, 0.0, 0.0))
            .collect(),
    )
    .unwrap();
    let mut world = empty_world();
    let mut pid = PidState::default();
    println!("tracking a straight line from an offset start:");
    for step in 0..100 {
        let (v, w) = pid_step(&mut pid, &world.robot, &line, world.dt).unwrap();
        world.step(v, w);
        if step % 20 == 19 {
            println!(
                "  t={:>4.1}s pos=({:.2}, {:+.3}) cross-track {:+.3} m",
                world.time, world.robot.x, world.robot.y, world.robot.y
            );
        }
    }

    // Follow a quarter circle.
    let arc = Trajectory::new(
        (0..=40)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / 40.0;
                Pose::new(3.0 * a.sin(), 3.0 * (1.0 - a.cos()), a)
            })
            .collect(),
    )
    .unwrap();
    let mut world = empty_world();
    world.robot = Pose::new(0.0, 0.0, 0.0);
    let mut pid = PidState::default();
    let mut worst = 0.0f64;
    for _ in 0..160 {
        let (v, w) = pid_step(&mut pid, &world.robot, &arc, world.dt).unwrap();
        world.step(v, w);
        let err = arc
            .poses()
            .iter()
            .map(|p| p.distance(&world.robot))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
    }
    let end = arc.last();
    println!(
        "quarter circle: final offset {:.3} m, worst path deviation {:.3} m",
        end.distance(&world.robot),
        worst
    );
}
