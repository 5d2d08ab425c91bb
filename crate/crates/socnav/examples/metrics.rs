//! Trajectory metrics: positional MSE, Hausdorff distance, and
//! personal-space violation duration.
//!
//! ```bash
//! cargo run --release -p socnav --example metrics
//! ```

use socnav::geometry::{
    hausdorff, mse, mse_resampled, psv_duration, Pose, TimedTrack, Trajectory,
    PERSONAL_SPACE_RADIUS,
};

fn main() {
    // A straight reference and a drifting track.
    let reference = Trajectory::new(
        (0..=20)
            .map(|i| Pose::new(0.25 * i as f64, 0.0, 0.0))
            .collect(),
    )
    .unwrap();
    let drifting = Trajectory::new(
        (0..=20)
            .map(|i| {
                let x = 0.25 * i as f64;
                Pose::new(x, 0.15 * (x * 1.3).sin(), 0.0)
            })
            .collect(),
    )
    .unwrap();

    println!("mse(ref, ref)        = {:.6}", mse(&reference, &reference).unwrap());
    println!("mse(ref, drifting)   = {:.6}", mse(&reference, &drifting).unwrap());

    // Different lengths are aligned by arc-length resampling.
    let short = Trajectory::new(
        (0..=7)
            .map(|i| Pose::new(5.0 * i as f64 / 7.0, 0.1, 0.0))
            .collect(),
    )
    .unwrap();
    println!("mse_resampled(ref, short) = {:.6}", mse_resampled(&reference, &short));

    let h = hausdorff(&reference.points(), &drifting.points()).unwrap();
    println!("hausdorff(ref, drifting)  = {:.6}", h);

    // Personal space: a pedestrian standing right on the track.
    let robot = TimedTrack::from_positions(
        0.0,
        0.1,
        &(0..=50).map(|i| (0.1 * i as f64, 0.0)).collect::<Vec<_>>(),
    )
    .unwrap();
    let human = TimedTrack::from_positions(0.0, 0.1, &vec![(2.5, 0.1); 51]).unwrap();
    let psv = psv_duration(&robot, &[human], PERSONAL_SPACE_RADIUS).unwrap();
    println!("psv at radius {PERSONAL_SPACE_RADIUS} m = {psv:.1} s");
}
