//! Deterministic 2D social-navigation simulator: walled worlds, scripted
//! pedestrians (optionally grouped), unicycle robot kinematics, a ray-cast
//! range scanner, an egocentric rasterized view, a rule-based expert
//! planner, four scenario families, and a template caption oracle.

pub mod expert;
pub mod lidar;
pub mod raster;
pub mod scenario;
pub mod teacher;

pub use expert::{classify_plan_maneuver, scripted_expert};
pub use lidar::raycast_lidar;
pub use raster::{rasterize_view, Raster};
pub use scenario::{make_scenario, ScenarioKind};
pub use teacher::{teacher_oracle, Action, CaptionPair, TeacherOracle, TeacherView, TemplateTeacher};

use crate::geometry::{wrap_angle, Pose};

pub const ROBOT_RADIUS: f64 = 0.3;
pub const HUMAN_RADIUS: f64 = 0.3;
pub const LIDAR_BEAMS: usize = 180;
pub const LIDAR_MAX_RANGE: f64 = 8.0;
pub const DEFAULT_DT: f64 = 0.1;

/// A static wall segment.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub ax: f64,
    pub ay: f64,
    pub bx: f64,
    pub by: f64,
}

impl Segment {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self { ax, ay, bx, by }
    }

    /// Distance from a point to this segment.
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        let dx = self.bx - self.ax;
        let dy = self.by - self.ay;
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((px - self.ax) * dx + (py - self.ay) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let cx = self.ax + t * dx;
        let cy = self.ay + t * dy;
        (px - cx).hypot(py - cy)
    }
}

/// A pedestrian following a waypoint script at constant speed. Group
/// members share a label; static humans have an empty script.
#[derive(Debug, Clone)]
pub struct Human {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub waypoints: Vec<(f64, f64)>,
    pub wp_index: usize,
    pub group: Option<usize>,
}

impl Human {
    pub fn standing(x: f64, y: f64, group: Option<usize>) -> Self {
        Self {
            x,
            y,
            speed: 0.0,
            waypoints: Vec::new(),
            wp_index: 0,
            group,
        }
    }

    pub fn walking(x: f64, y: f64, speed: f64, waypoints: Vec<(f64, f64)>) -> Self {
        Self {
            x,
            y,
            speed,
            waypoints,
            wp_index: 0,
            group: None,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.speed > 0.0 && self.wp_index < self.waypoints.len()
    }

    /// Velocity vector, zero when standing or done with the script.
    pub fn velocity(&self) -> (f64, f64) {
        if !self.is_moving() {
            return (0.0, 0.0);
        }
        let (tx, ty) = self.waypoints[self.wp_index];
        let dx = tx - self.x;
        let dy = ty - self.y;
        let d = dx.hypot(dy);
        if d < 1e-9 {
            (0.0, 0.0)
        } else {
            (self.speed * dx / d, self.speed * dy / d)
        }
    }

    fn advance(&mut self, dt: f64) {
        let mut remaining = self.speed * dt;
        while remaining > 1e-12 && self.wp_index < self.waypoints.len() {
            let (tx, ty) = self.waypoints[self.wp_index];
            let dx = tx - self.x;
            let dy = ty - self.y;
            let d = dx.hypot(dy);
            if d <= remaining {
                self.x = tx;
                self.y = ty;
                remaining -= d;
                self.wp_index += 1;
            } else {
                self.x += remaining * dx / d;
                self.y += remaining * dy / d;
                remaining = 0.0;
            }
        }
    }
}

/// Full simulator state for one episode.
#[derive(Debug, Clone)]
pub struct World {
    pub walls: Vec<Segment>,
    pub humans: Vec<Human>,
    pub n_groups: usize,
    pub robot: Pose,
    pub goal: Pose,
    pub dt: f64,
    pub seed: u64,
    pub time: f64,
    pub collided: bool,
    /// (xmin, ymin, xmax, ymax) covering all geometry; used by the expert
    /// planner's costmap.
    pub bounds: (f64, f64, f64, f64),
}

impl World {
    /// Advance one time step under a `(v, omega)` command. Humans follow
    /// their scripts; a wall or human contact latches the collision flag.
    pub fn step(&mut self, v: f64, omega: f64) {
        let (s, c) = self.robot.phi.sin_cos();
        self.robot = Pose::new(
            self.robot.x + v * c * self.dt,
            self.robot.y + v * s * self.dt,
            wrap_angle(self.robot.phi + omega * self.dt),
        );
        for h in &mut self.humans {
            h.advance(self.dt);
        }
        self.time += self.dt;
        if self.in_collision() {
            self.collided = true;
        }
    }

    pub fn in_collision(&self) -> bool {
        self.wall_collision() || self.human_collision()
    }

    pub fn wall_collision(&self) -> bool {
        self.walls
            .iter()
            .any(|w| w.distance_to(self.robot.x, self.robot.y) < ROBOT_RADIUS)
    }

    pub fn human_collision(&self) -> bool {
        self.humans
            .iter()
            .any(|h| (h.x - self.robot.x).hypot(h.y - self.robot.y) < ROBOT_RADIUS + HUMAN_RADIUS)
    }

    pub fn goal_distance(&self) -> f64 {
        (self.goal.x - self.robot.x).hypot(self.goal.y - self.robot.y)
    }

    /// Goal pose expressed in the robot frame.
    pub fn goal_in_robot_frame(&self) -> Pose {
        let dx = self.goal.x - self.robot.x;
        let dy = self.goal.y - self.robot.y;
        let (s, c) = self.robot.phi.sin_cos();
        Pose::new(
            c * dx + s * dy,
            -s * dx + c * dy,
            self.goal.phi - self.robot.phi,
        )
    }

    /// One full sensor reading at the current robot pose.
    pub fn sense(&self) -> SensorFrame {
        SensorFrame {
            scan: raycast_lidar(&self.robot, self, LIDAR_BEAMS, LIDAR_MAX_RANGE),
            raster: rasterize_view(&self.robot, self),
            goal: self.goal_in_robot_frame(),
        }
    }
}

/// One sensor reading: range scan, egocentric raster, and the goal in the
/// robot frame.
#[derive(Debug, Clone)]
pub struct SensorFrame {
    pub scan: Vec<f64>,
    pub raster: Raster,
    pub goal: Pose,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn empty_world() -> World {
        World {
            walls: Vec::new(),
            humans: Vec::new(),
            n_groups: 0,
            robot: Pose::new(0.0, 0.0, 0.0),
            goal: Pose::new(5.0, 0.0, 0.0),
            dt: 1.0,
            seed: 0,
            time: 0.0,
            collided: false,
            bounds: (-10.0, -10.0, 10.0, 10.0),
        }
    }

    #[test]
    fn step_straight_advances_x() {
        let mut w = empty_world();
        w.step(1.0, 0.0);
        assert!((w.robot.x - 1.0).abs() < 1e-12);
        assert!(w.robot.y.abs() < 1e-12);
    }

    #[test]
    fn step_rotation_wraps() {
        let mut w = empty_world();
        w.step(0.0, PI);
        assert!((w.robot.phi - PI).abs() < 1e-12);
        w.step(0.0, PI / 2.0);
        assert!((w.robot.phi + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_steps_approximate_arc() {
        // Constant (v, omega) follows a circle of radius v/omega; Euler
        // integration converges to the closed-form arc as dt shrinks.
        let v = 1.0f64;
        let omega = 0.5f64;
        let t_total = 2.0f64;
        let exact_x = v / omega * (omega * t_total).sin();
        let exact_y = v / omega * (1.0 - (omega * t_total).cos());
        let mut errs = Vec::new();
        for n in [20usize, 200] {
            let mut w = empty_world();
            w.dt = t_total / n as f64;
            for _ in 0..n {
                w.step(v, omega);
            }
            errs.push((w.robot.x - exact_x).hypot(w.robot.y - exact_y));
        }
        assert!(errs[1] < errs[0] / 5.0, "errors: {errs:?}");
        assert!(errs[1] < 0.01);
    }

    #[test]
    fn human_follows_script_and_stops() {
        let mut h = Human::walking(0.0, 0.0, 1.0, vec![(2.0, 0.0), (2.0, 1.0)]);
        for _ in 0..40 {
            h.advance(0.1);
        }
        assert!((h.x - 2.0).abs() < 1e-9);
        assert!((h.y - 1.0).abs() < 1e-9);
        assert!(!h.is_moving());
        assert_eq!(h.velocity(), (0.0, 0.0));
    }

    #[test]
    fn collision_with_wall_latches() {
        let mut w = empty_world();
        w.walls.push(Segment::new(1.0, -1.0, 1.0, 1.0));
        for _ in 0..3 {
            w.step(0.5, 0.0);
        }
        assert!(w.collided);
    }

    #[test]
    fn goal_in_robot_frame_matches_hand_calc() {
        let mut w = empty_world();
        w.robot = Pose::new(1.0, 1.0, PI / 2.0);
        w.goal = Pose::new(1.0, 3.0, PI / 2.0);
        let g = w.goal_in_robot_frame();
        assert!((g.x - 2.0).abs() < 1e-12);
        assert!(g.y.abs() < 1e-12);
        assert!(g.phi.abs() < 1e-12);
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut w1 = make_scenario(ScenarioKind::NarrowHallway, 42);
        let mut w2 = make_scenario(ScenarioKind::NarrowHallway, 42);
        let commands = [(0.5, 0.1), (0.8, -0.2), (1.0, 0.0), (0.3, 0.5)];
        for &(v, om) in commands.iter().cycle().take(100) {
            w1.step(v, om);
            w2.step(v, om);
        }
        assert_eq!(w1.robot.x.to_bits(), w2.robot.x.to_bits());
        assert_eq!(w1.robot.y.to_bits(), w2.robot.y.to_bits());
        assert_eq!(w1.robot.phi.to_bits(), w2.robot.phi.to_bits());
        for (h1, h2) in w1.humans.iter().zip(&w2.humans) {
            assert_eq!(h1.x.to_bits(), h2.x.to_bits());
            assert_eq!(h1.y.to_bits(), h2.y.to_bits());
        }
    }
}
