//! The two synthetic sensors: the ray-cast range scan and the egocentric
//! rasterized view.
//!
//! ```bash
//! cargo run --release -p socnav --example sensors
//! ```

use socnav::sim::raster::{CH_GOAL, CH_HUMAN, CH_STATIC, RASTER_SIZE};
use socnav::sim::{make_scenario, ScenarioKind};

fn main() {
    let world = make_scenario(ScenarioKind::NarrowHallway, 3);
    let frame = world.sense();

    let returns = frame
        .scan
        .iter()
        .filter(|&&r| r < socnav::sim::LIDAR_MAX_RANGE - 1e-9)
        .count();
    let nearest = frame.scan.iter().cloned().fold(f64::INFINITY, f64::min);
    println!(
        "scan: {} beams, {} returns, nearest obstacle {:.2} m",
        frame.scan.len(),
        returns,
        nearest
    );
    println!(
        "goal in robot frame: ({:.2}, {:.2}, {:.2})",
        frame.goal.x, frame.goal.y, frame.goal.phi
    );

    // ASCII view of the raster, every second row/column: '#' walls,
    // 'o' humans, '.' goal ray. The robot sits at the bottom center.
    println!("raster ({}x{} cells, 0.125 m/cell):", RASTER_SIZE, RASTER_SIZE);
    for row in (0..RASTER_SIZE).step_by(2) {
        let mut line = String::new();
        for col in (0..RASTER_SIZE).step_by(2) {
            let ch = if frame.raster.at(CH_HUMAN, row, col) > 0.0 {
                'o'
            } else if frame.raster.at(CH_STATIC, row, col) > 0.0 {
                '#'
            } else if frame.raster.at(CH_GOAL, row, col) > 0.0 {
                '.'
            } else {
                ' '
            };
            line.push(ch);
        }
        println!("|{line}|");
    }
}
