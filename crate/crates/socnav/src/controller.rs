//! PID tracking controller: follows a planned trajectory with a lookahead
//! target, producing clamped `(v, omega)` commands for the unicycle base.

use crate::geometry::{wrap_angle, Pose, Trajectory};
use crate::{Error, Result};

/// Distance ahead along the trajectory at which the target is picked.
pub const LOOKAHEAD: f64 = 0.4;

#[derive(Debug, Clone, Copy)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Controller state: per-channel gains, integrators, previous errors, and
/// output limits.
#[derive(Debug, Clone)]
pub struct PidState {
    pub linear: PidGains,
    pub angular: PidGains,
    pub v_max: f64,
    pub omega_max: f64,
    pub integral_clamp: f64,
    int_lin: f64,
    int_ang: f64,
    prev_lin: Option<f64>,
    prev_ang: Option<f64>,
}

impl Default for PidState {
    fn default() -> Self {
        Self {
            linear: PidGains {
                kp: 0.8,
                ki: 0.0,
                kd: 0.1,
            },
            angular: PidGains {
                kp: 1.5,
                ki: 0.0,
                kd: 0.2,
            },
            v_max: 1.0,
            omega_max: 1.5,
            integral_clamp: 1.0,
            int_lin: 0.0,
            int_ang: 0.0,
            prev_lin: None,
            prev_ang: None,
        }
    }
}

impl PidState {
    pub fn new(linear: PidGains, angular: PidGains, v_max: f64, omega_max: f64) -> Self {
        Self {
            linear,
            angular,
            v_max,
            omega_max,
            ..Default::default()
        }
    }

    /// Zero the integrators and error history; gains and limits stay.
    pub fn reset(&mut self) {
        self.int_lin = 0.0;
        self.int_ang = 0.0;
        self.prev_lin = None;
        self.prev_ang = None;
    }

    pub fn integral_magnitudes(&self) -> (f64, f64) {
        (self.int_lin.abs(), self.int_ang.abs())
    }
}

/// Pick the first waypoint at least [`LOOKAHEAD`] ahead of the pose along
/// the trajectory (falling back to the final waypoint).
fn lookahead_target(pose: &Pose, traj: &Trajectory) -> Pose {
    for p in traj.poses() {
        if pose.distance(p) >= LOOKAHEAD {
            return *p;
        }
    }
    traj.last()
}

/// One control step: PID on the heading-projected distance to the
/// lookahead target (linear) and the wrapped bearing error (angular).
/// Reverse motion is disallowed; outputs are clamped to the limits.
pub fn pid_step(
    state: &mut PidState,
    pose: &Pose,
    traj: &Trajectory,
    dt: f64,
) -> Result<(f64, f64)> {
    if dt <= 0.0 {
        return Err(Error::InvalidDt(dt));
    }
    let target = lookahead_target(pose, traj);
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    let dist = dx.hypot(dy);

    let (lin_err, ang_err) = if dist < 1e-9 {
        (0.0, 0.0)
    } else {
        let bearing = dy.atan2(dx);
        let ang = wrap_angle(bearing - pose.phi);
        // Distance projected on the heading: driving forward only helps
        // when the target is in front.
        (dist * ang.cos().max(0.0), ang)
    };

    state.int_lin = (state.int_lin + lin_err * dt)
        .clamp(-state.integral_clamp, state.integral_clamp);
    state.int_ang = (state.int_ang + ang_err * dt)
        .clamp(-state.integral_clamp, state.integral_clamp);

    let d_lin = match state.prev_lin {
        Some(prev) => (lin_err - prev) / dt,
        None => 0.0,
    };
    let d_ang = match state.prev_ang {
        Some(prev) => (ang_err - prev) / dt,
        None => 0.0,
    };
    state.prev_lin = Some(lin_err);
    state.prev_ang = Some(ang_err);

    let v = state.linear.kp * lin_err + state.linear.ki * state.int_lin + state.linear.kd * d_lin;
    let omega =
        state.angular.kp * ang_err + state.angular.ki * state.int_ang + state.angular.kd * d_ang;
    Ok((
        v.clamp(0.0, state.v_max),
        omega.clamp(-state.omega_max, state.omega_max),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn traj(pts: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(pts.iter().map(|&(x, y)| Pose::new(x, y, 0.0)).collect()).unwrap()
    }

    fn p_only(kp_lin: f64, kp_ang: f64) -> PidState {
        PidState::new(
            PidGains {
                kp: kp_lin,
                ki: 0.0,
                kd: 0.0,
            },
            PidGains {
                kp: kp_ang,
                ki: 0.0,
                kd: 0.0,
            },
            10.0,
            10.0,
        )
    }

    #[test]
    fn at_target_outputs_zero() {
        let mut state = PidState::default();
        let t = traj(&[(0.0, 0.0)]);
        let (v, w) = pid_step(&mut state, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
        assert_eq!((v, w), (0.0, 0.0));
    }

    #[test]
    fn p_term_straight_ahead() {
        // Target 2 m dead ahead with Kp 0.5: v = 1.0, omega = 0.
        let mut state = p_only(0.5, 1.0);
        let t = traj(&[(2.0, 0.0)]);
        let (v, w) = pid_step(&mut state, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn p_term_bearing_error() {
        // Target at bearing +pi/2 with Kp 1.0: omega = pi/2 before the
        // clamp; the projected linear error is zero.
        let mut state = p_only(0.5, 1.0);
        let t = traj(&[(0.0, 2.0)]);
        let (v, w) = pid_step(&mut state, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
        assert!((w - PI / 2.0).abs() < 1e-12);
        assert_eq!(v, 0.0);

        let mut clamped = p_only(0.5, 1.0);
        clamped.omega_max = 1.0;
        let (_, w2) = pid_step(&mut clamped, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
        assert_eq!(w2, 1.0);
    }

    #[test]
    fn outputs_always_within_limits() {
        let mut state = PidState::default();
        let t = traj(&[(100.0, -50.0)]);
        for i in 0..50 {
            let pose = Pose::new(-(i as f64), i as f64, (i as f64 * 0.7) % PI);
            let (v, w) = pid_step(&mut state, &pose, &t, 0.1).unwrap();
            assert!((0.0..=state.v_max).contains(&v));
            assert!(w.abs() <= state.omega_max);
        }
    }

    #[test]
    fn integral_respects_clamp() {
        let mut state = PidState::new(
            PidGains {
                kp: 0.0,
                ki: 2.0,
                kd: 0.0,
            },
            PidGains {
                kp: 0.0,
                ki: 2.0,
                kd: 0.0,
            },
            1.0,
            1.5,
        );
        let t = traj(&[(50.0, 50.0)]);
        for _ in 0..1000 {
            pid_step(&mut state, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
            let (il, ia) = state.integral_magnitudes();
            assert!(il <= state.integral_clamp + 1e-12);
            assert!(ia <= state.integral_clamp + 1e-12);
        }
    }

    #[test]
    fn reset_matches_fresh_instance() {
        let mut used = PidState::default();
        let t = traj(&[(3.0, 1.0)]);
        for _ in 0..10 {
            pid_step(&mut used, &Pose::new(0.0, 0.0, 0.0), &t, 0.1).unwrap();
        }
        used.reset();
        let mut fresh = PidState::default();
        let a = pid_step(&mut used, &Pose::new(0.5, 0.2, 0.1), &t, 0.1).unwrap();
        let b = pid_step(&mut fresh, &Pose::new(0.5, 0.2, 0.1), &t, 0.1).unwrap();
        assert_eq!(a, b);

        // Reset is idempotent.
        let mut twice = PidState::default();
        twice.reset();
        twice.reset();
        let c = pid_step(&mut twice, &Pose::new(0.5, 0.2, 0.1), &t, 0.1).unwrap();
        assert_eq!(a, c);

        // Reset then a step at the target gives zero output.
        let mut at_target = PidState::default();
        at_target.reset();
        let t0 = traj(&[(0.0, 0.0)]);
        let (v, w) = pid_step(&mut at_target, &Pose::new(0.0, 0.0, 0.0), &t0, 0.1).unwrap();
        assert_eq!((v, w), (0.0, 0.0));
    }

    #[test]
    fn p_only_converges_on_straight_line_in_sim() {
        // Track a 5 m straight line in the simulator: final cross-track
        // error under 5 cm within 10 s at dt = 0.1.
        let mut world = crate::sim::World {
            walls: Vec::new(),
            humans: Vec::new(),
            n_groups: 0,
            robot: Pose::new(0.0, 0.4, 0.5),
            goal: Pose::new(5.0, 0.0, 0.0),
            dt: 0.1,
            seed: 0,
            time: 0.0,
            collided: false,
            bounds: (-1.0, -2.0, 6.0, 2.0),
        };
        let line: Vec<(f64, f64)> = (0..=50).map(|i| (0.1 * i as f64, 0.0)).collect();
        let t = traj(&line);
        let mut pid = p_only(0.8, 1.5);
        pid.v_max = 1.0;
        pid.omega_max = 1.5;
        for _ in 0..100 {
            let (v, w) = pid_step(&mut pid, &world.robot, &t, world.dt).unwrap();
            world.step(v, w);
        }
        let cross_track = world.robot.y.abs();
        assert!(cross_track < 0.05, "cross-track error {cross_track}");
        assert!(world.robot.x > 4.0, "made progress: {}", world.robot.x);
    }
}
