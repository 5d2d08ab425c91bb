//! Egocentric rasterized view: a 4-channel occupancy image standing in for
//! an onboard camera. The robot sits at the bottom-center looking up.

use super::{World, HUMAN_RADIUS};
use crate::geometry::Pose;

pub const RASTER_SIZE: usize = 64;
pub const RASTER_RES: f64 = 0.125;
pub const RASTER_CHANNELS: usize = 4;

pub const CH_STATIC: usize = 0;
pub const CH_HUMAN: usize = 1;
pub const CH_GROUP: usize = 2;
pub const CH_GOAL: usize = 3;

/// Channel-major occupancy image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub data: Vec<f64>,
}

impl Raster {
    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; RASTER_CHANNELS * RASTER_SIZE * RASTER_SIZE],
        }
    }

    #[inline]
    pub fn at(&self, ch: usize, row: usize, col: usize) -> f64 {
        self.data[(ch * RASTER_SIZE + row) * RASTER_SIZE + col]
    }

    #[inline]
    pub fn set(&mut self, ch: usize, row: usize, col: usize, v: f64) {
        self.data[(ch * RASTER_SIZE + row) * RASTER_SIZE + col] = v;
    }

    pub fn channel_sum(&self, ch: usize) -> f64 {
        let base = ch * RASTER_SIZE * RASTER_SIZE;
        self.data[base..base + RASTER_SIZE * RASTER_SIZE].iter().sum()
    }
}

/// View-frame coordinates of a world point: forward distance and leftward
/// offset relative to the pose.
fn to_view(pose: &Pose, wx: f64, wy: f64) -> (f64, f64) {
    let dx = wx - pose.x;
    let dy = wy - pose.y;
    let (s, c) = pose.phi.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Grid cell for view coordinates, if inside the image. Row 63 is the
/// robot's own row, row 0 is eight meters ahead; columns run left to right.
fn to_cell(forward: f64, lateral: f64) -> Option<(usize, usize)> {
    let half = RASTER_SIZE as f64 / 2.0;
    let col = (half - lateral / RASTER_RES).floor();
    let row = (RASTER_SIZE as f64 - 1.0 - (forward / RASTER_RES)).floor();
    if row < 0.0 || row >= RASTER_SIZE as f64 || col < 0.0 || col >= RASTER_SIZE as f64 {
        None
    } else {
        Some((row as usize, col as usize))
    }
}

/// Rasterize the world around `pose`. Walls fill the static channel, all
/// humans the human channel, group members additionally the group channel,
/// and a painted ray toward the goal fills the goal-direction channel.
pub fn rasterize_view(pose: &Pose, world: &World) -> Raster {
    let mut r = Raster::zeros();

    // Walls: sample each segment at sub-cell resolution.
    for w in &world.walls {
        let len = (w.bx - w.ax).hypot(w.by - w.ay);
        let steps = (len / (RASTER_RES * 0.5)).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let (fwd, lat) = to_view(pose, w.ax + t * (w.bx - w.ax), w.ay + t * (w.by - w.ay));
            if let Some((row, col)) = to_cell(fwd, lat) {
                r.set(CH_STATIC, row, col, 1.0);
            }
        }
    }

    // Humans: filled discs; group members also mark the group channel, and
    // the space between members of one group is marked as group space.
    for h in &world.humans {
        let (fwd, lat) = to_view(pose, h.x, h.y);
        let cells = (HUMAN_RADIUS / RASTER_RES).ceil() as i64;
        for di in -cells..=cells {
            for dj in -cells..=cells {
                let f = fwd + di as f64 * RASTER_RES;
                let l = lat + dj as f64 * RASTER_RES;
                if ((f - fwd).powi(2) + (l - lat).powi(2)).sqrt() <= HUMAN_RADIUS {
                    if let Some((row, col)) = to_cell(f, l) {
                        r.set(CH_HUMAN, row, col, 1.0);
                        if h.group.is_some() {
                            r.set(CH_GROUP, row, col, 1.0);
                        }
                    }
                }
            }
        }
    }
    for g in 0..world.n_groups {
        let members: Vec<&super::Human> = world
            .humans
            .iter()
            .filter(|h| h.group == Some(g))
            .collect();
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let steps = 16;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    let wx = members[i].x + t * (members[j].x - members[i].x);
                    let wy = members[i].y + t * (members[j].y - members[i].y);
                    let (fwd, lat) = to_view(pose, wx, wy);
                    if let Some((row, col)) = to_cell(fwd, lat) {
                        r.set(CH_GROUP, row, col, 1.0);
                    }
                }
            }
        }
    }

    // Goal direction: a painted ray from the robot toward the goal, clipped
    // to the view.
    let (gf, gl) = to_view(pose, world.goal.x, world.goal.y);
    let dist = gf.hypot(gl);
    if dist > 1e-9 {
        let steps = (dist / (RASTER_RES * 0.5)).ceil().min(256.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            if let Some((row, col)) = to_cell(gf * t, gl * t) {
                r.set(CH_GOAL, row, col, 1.0);
            }
        }
    }

    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Human;

    fn empty_world() -> World {
        World {
            walls: Vec::new(),
            humans: Vec::new(),
            n_groups: 0,
            robot: Pose::new(0.0, 0.0, 0.0),
            goal: Pose::new(5.0, 0.0, 0.0),
            dt: 0.1,
            seed: 0,
            time: 0.0,
            collided: false,
            bounds: (-10.0, -10.0, 10.0, 10.0),
        }
    }

    #[test]
    fn empty_world_zero_static_and_human() {
        let w = empty_world();
        let r = rasterize_view(&Pose::new(0.0, 0.0, 0.0), &w);
        assert_eq!(r.channel_sum(CH_STATIC), 0.0);
        assert_eq!(r.channel_sum(CH_HUMAN), 0.0);
        assert!(r.channel_sum(CH_GOAL) > 0.0);
    }

    #[test]
    fn human_one_meter_ahead_lands_in_expected_cell() {
        // Forward 1 m is 8 cells up from the bottom row (63 - 8 = 55);
        // lateral 0 is the center column.
        let mut w = empty_world();
        w.humans.push(Human::standing(1.0, 0.0, None));
        let r = rasterize_view(&Pose::new(0.0, 0.0, 0.0), &w);
        assert!(r.at(CH_HUMAN, 55, 32) > 0.0);
        assert_eq!(r.channel_sum(CH_GROUP), 0.0);
    }

    #[test]
    fn deterministic() {
        let mut w = empty_world();
        w.humans.push(Human::standing(2.0, 0.5, Some(0)));
        w.n_groups = 1;
        let a = rasterize_view(&Pose::new(0.0, 0.0, 0.3), &w);
        let b = rasterize_view(&Pose::new(0.0, 0.0, 0.3), &w);
        assert_eq!(a, b);
    }

    #[test]
    fn values_in_unit_range() {
        let w = crate::sim::make_scenario(crate::sim::ScenarioKind::StaticGroupsDynamic, 3);
        let r = rasterize_view(&w.robot, &w);
        assert!(r.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn group_members_mark_group_channel() {
        let mut w = empty_world();
        w.humans.push(Human::standing(2.0, -0.4, Some(0)));
        w.humans.push(Human::standing(2.0, 0.4, Some(0)));
        w.n_groups = 1;
        let r = rasterize_view(&Pose::new(0.0, 0.0, 0.0), &w);
        assert!(r.channel_sum(CH_GROUP) > 0.0);
        // The connecting space between members is marked too.
        let (row, col) = (63 - 16, 32);
        assert!(r.at(CH_GROUP, row, col) > 0.0);
    }
}
