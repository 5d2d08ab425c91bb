//! Ray-cast range scanner over wall segments and human discs.

use super::{World, HUMAN_RADIUS};
use crate::geometry::Pose;
use std::f64::consts::PI;

/// Cast `n_beams` rays over a full revolution starting at the robot's
/// heading (counter-clockwise). Each range is the nearest hit among walls
/// and human discs, capped at `max_range`.
pub fn raycast_lidar(pose: &Pose, world: &World, n_beams: usize, max_range: f64) -> Vec<f64> {
    assert!(n_beams >= 1);
    let mut scan = Vec::with_capacity(n_beams);
    for k in 0..n_beams {
        let angle = pose.phi + 2.0 * PI * k as f64 / n_beams as f64;
        let (dy, dx) = angle.sin_cos();
        let mut best = max_range;
        for w in &world.walls {
            if let Some(t) = ray_segment(pose.x, pose.y, dx, dy, w.ax, w.ay, w.bx, w.by) {
                if t < best {
                    best = t;
                }
            }
        }
        for h in &world.humans {
            if let Some(t) = ray_circle(pose.x, pose.y, dx, dy, h.x, h.y, HUMAN_RADIUS) {
                if t < best {
                    best = t;
                }
            }
        }
        scan.push(best.max(1e-6));
    }
    scan
}

/// Intersection parameter of ray `(px, py) + t (dx, dy)` with a segment,
/// if any with `t > 0`.
fn ray_segment(
    px: f64,
    py: f64,
    dx: f64,
    dy: f64,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
) -> Option<f64> {
    let ex = bx - ax;
    let ey = by - ay;
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = ((ax - px) * ey - (ay - py) * ex) / denom;
    let s = ((ax - px) * dy - (ay - py) * dx) / denom;
    if t > 1e-9 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Smallest positive intersection of the ray with a circle.
fn ray_circle(px: f64, py: f64, dx: f64, dy: f64, cx: f64, cy: f64, r: f64) -> Option<f64> {
    let ox = px - cx;
    let oy = py - cy;
    let b = ox * dx + oy * dy;
    let c = ox * ox + oy * oy - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b - sq;
    let t2 = -b + sq;
    if t1 > 1e-9 {
        Some(t1)
    } else if t2 > 1e-9 {
        Some(t2)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Human, Segment};

    fn world_with(walls: Vec<Segment>, humans: Vec<Human>) -> World {
        World {
            walls,
            humans,
            n_groups: 0,
            robot: Pose::new(0.0, 0.0, 0.0),
            goal: Pose::new(1.0, 0.0, 0.0),
            dt: 0.1,
            seed: 0,
            time: 0.0,
            collided: false,
            bounds: (-10.0, -10.0, 10.0, 10.0),
        }
    }

    #[test]
    fn empty_world_all_max_range() {
        let w = world_with(Vec::new(), Vec::new());
        let scan = raycast_lidar(&Pose::new(0.0, 0.0, 0.0), &w, 180, 8.0);
        assert_eq!(scan.len(), 180);
        assert!(scan.iter().all(|&r| r == 8.0));
    }

    #[test]
    fn forward_beam_hits_perpendicular_wall() {
        // Wall crossing the x axis at x = 3, dead ahead of the robot: the
        // ray-segment intersection solves to t = 3 by hand.
        let w = world_with(vec![Segment::new(3.0, -2.0, 3.0, 2.0)], Vec::new());
        let scan = raycast_lidar(&Pose::new(0.0, 0.0, 0.0), &w, 4, 8.0);
        assert!((scan[0] - 3.0).abs() < 1e-9);
        assert_eq!(scan[1], 8.0);
        assert_eq!(scan[2], 8.0);
        assert_eq!(scan[3], 8.0);
    }

    #[test]
    fn human_disc_blocks_beam() {
        let w = world_with(
            Vec::new(),
            vec![Human::standing(2.0, 0.0, None)],
        );
        let scan = raycast_lidar(&Pose::new(0.0, 0.0, 0.0), &w, 4, 8.0);
        assert!((scan[0] - (2.0 - HUMAN_RADIUS)).abs() < 1e-9);
    }

    #[test]
    fn mirrored_world_mirrors_scan() {
        // Mirror geometry across the robot's heading axis (y -> -y): beam k
        // swaps with beam n-k.
        let walls = vec![
            Segment::new(1.0, 0.5, 3.0, 1.5),
            Segment::new(-2.0, -1.0, -1.0, 2.0),
        ];
        let mirrored: Vec<Segment> = walls
            .iter()
            .map(|s| Segment::new(s.ax, -s.ay, s.bx, -s.by))
            .collect();
        let n = 36;
        let a = raycast_lidar(
            &Pose::new(0.0, 0.0, 0.0),
            &world_with(walls, Vec::new()),
            n,
            8.0,
        );
        let b = raycast_lidar(
            &Pose::new(0.0, 0.0, 0.0),
            &world_with(mirrored, Vec::new()),
            n,
            8.0,
        );
        for k in 0..n {
            let j = (n - k) % n;
            assert!(
                (a[k] - b[j]).abs() < 1e-9,
                "beam {k} vs mirrored {j}: {} vs {}",
                a[k],
                b[j]
            );
        }
    }
}
