//! 2D poses, trajectories, frame normalization, and the evaluation metrics
//! (positional MSE, Hausdorff distance, personal-space violation duration).

use crate::{Error, Result};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// A planar pose. Heading is always kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wrap an angle into `(-pi, pi]`.
///
/// Panics on non-finite input; angles are always produced by finite
/// arithmetic in this crate.
pub fn wrap_angle(a: f64) -> f64 {
    assert!(a.is_finite(), "wrap_angle: non-finite angle {a}");
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// An ordered, non-empty sequence of poses with optional strictly
/// increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    timestamps: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        Ok(Self {
            poses,
            timestamps: None,
        })
    }

    pub fn with_timestamps(poses: Vec<Pose>, timestamps: Vec<f64>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if poses.len() != timestamps.len() {
            return Err(Error::TimestampMismatch(timestamps.len(), poses.len()));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonIncreasingTimestamps);
        }
        Ok(Self {
            poses,
            timestamps: Some(timestamps),
        })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Pose {
        self.poses[0]
    }

    pub fn last(&self) -> Pose {
        *self.poses.last().unwrap()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.poses.iter().map(|p| (p.x, p.y)).collect()
    }

    /// Total arc length of the waypoint polyline.
    pub fn arc_length(&self) -> f64 {
        self.poses.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// Express every pose of `traj` in the frame of its first pose.
///
/// The first pose maps to `(0, 0, 0)`; the rigid transform preserves all
/// pairwise distances and headings are offset by the initial heading.
pub fn transform_to_initial_frame(traj: &Trajectory) -> Trajectory {
    let p0 = traj.first();
    let (sin0, cos0) = p0.phi.sin_cos();
    let poses = traj
        .poses()
        .iter()
        .map(|p| {
            let dx = p.x - p0.x;
            let dy = p.y - p0.y;
            Pose::new(
                cos0 * dx + sin0 * dy,
                -sin0 * dx + cos0 * dy,
                p.phi - p0.phi,
            )
        })
        .collect();
    Trajectory {
        poses,
        timestamps: traj.timestamps.clone(),
    }
}

/// Mean squared positional error over aligned waypoints. Headings are
/// ignored. Lengths must match; see [`mse_resampled`] for trajectories of
/// different lengths.
pub fn mse(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let sum: f64 = a
        .poses()
        .iter()
        .zip(b.poses())
        .map(|(p, q)| {
            let dx = p.x - q.x;
            let dy = p.y - q.y;
            dx * dx + dy * dy
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// Resample the polyline to `n` points spaced uniformly by arc length.
pub fn resample_by_arclength(traj: &Trajectory, n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let pts = traj.points();
    if pts.len() == 1 || traj.arc_length() == 0.0 {
        return vec![pts[0]; n];
    }
    if n == 1 {
        return vec![pts[0]];
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 {
            ((target - cum[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((
            pts[seg].0 + t * (pts[seg + 1].0 - pts[seg].0),
            pts[seg].1 + t * (pts[seg + 1].1 - pts[seg].1),
        ));
    }
    out
}

/// MSE between two trajectories of possibly different lengths: both are
/// resampled by arc length to the longer waypoint count first.
pub fn mse_resampled(a: &Trajectory, b: &Trajectory) -> f64 {
    let n = a.len().max(b.len());
    let pa = resample_by_arclength(a, n);
    let pb = resample_by_arclength(b, n);
    let sum: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(p, q)| {
            let dx = p.0 - q.0;
            let dy = p.1 - q.1;
            dx * dx + dy * dy
        })
        .sum();
    sum / n as f64
}

/// Symmetric Hausdorff distance between two point sets.
///
/// Uses the early-break scan; the brute-force sup-inf definition lives in
/// the tests as an independent oracle.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
            if d2 < best {
                best = d2;
                if best <= worst {
                    break;
                }
            }
        }
        if best > worst {
            worst = best;
        }
    }
    worst.sqrt()
}

/// A uniformly sampled planar track: `(time, x, y)` at a fixed time step.
#[derive(Debug, Clone)]
pub struct TimedTrack {
    samples: Vec<(f64, f64, f64)>,
    dt: f64,
}

impl TimedTrack {
    pub fn new(samples: Vec<(f64, f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if samples.len() == 1 {
            return Ok(Self { samples, dt: 0.0 });
        }
        let dt = samples[1].0 - samples[0].0;
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidDt(dt));
        }
        for w in samples.windows(2) {
            let step = w[1].0 - w[0].0;
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::DtMismatch(dt, step));
            }
        }
        Ok(Self { samples, dt })
    }

    /// Build a track from positions sampled at `dt` starting at `t0`.
    pub fn from_positions(t0: f64, dt: f64, positions: &[(f64, f64)]) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidDt(dt));
        }
        let samples = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (t0 + i as f64 * dt, x, y))
            .collect();
        Self::new(samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Default personal-space radius in meters.
pub const PERSONAL_SPACE_RADIUS: f64 = 0.25;

/// Total time the robot spends strictly inside `radius` of any human.
///
/// All tracks must share the same time step and be time-aligned; the
/// violation count is over timesteps, scaled by `dt`. Distances exactly at
/// `radius` do not count.
pub fn psv_duration(robot: &TimedTrack, humans: &[TimedTrack], radius: f64) -> Result<f64> {
    for h in humans {
        if (h.dt - robot.dt).abs() > 1e-12 {
            return Err(Error::DtMismatch(robot.dt, h.dt));
        }
        if h.len() != robot.len() || (h.samples[0].0 - robot.samples[0].0).abs() > 1e-9 {
            return Err(Error::TrackMisaligned);
        }
    }
    let mut violations = 0usize;
    for (i, &(_, rx, ry)) in robot.samples.iter().enumerate() {
        let near = humans.iter().any(|h| {
            let (_, hx, hy) = h.samples[i];
            (rx - hx).hypot(ry - hy) < radius
        });
        if near {
            violations += 1;
        }
    }
    Ok(violations as f64 * robot.dt)
}

/// Write a trajectory as line-delimited `t x y phi` records.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    for (i, p) in traj.poses().iter().enumerate() {
        let t = traj
            .timestamps()
            .map(|ts| ts[i])
            .unwrap_or(i as f64);
        writeln!(w, "{} {} {} {}", t, p.x, p.y, p.phi)?;
    }
    Ok(())
}

/// Read a trajectory from line-delimited `t x y phi` records.
pub fn read_trajectory<R: BufRead>(r: R) -> Result<Trajectory> {
    let mut poses = Vec::new();
    let mut times = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::DatasetCorrupt(format!("bad trajectory line: {e}")))?;
        if fields.len() != 4 {
            return Err(Error::DatasetCorrupt(format!(
                "expected 4 fields per trajectory line, got {}",
                fields.len()
            )));
        }
        times.push(fields[0]);
        poses.push(Pose::new(fields[1], fields[2], fields[3]));
    }
    Trajectory::with_timestamps(poses, times)
}
