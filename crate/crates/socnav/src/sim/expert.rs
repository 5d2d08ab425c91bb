//! Rule-based expert planner: grid A* over an inflated costmap with a
//! keep-right lateral bias, line-of-sight shortcutting, and slow-down at
//! occluded corners. Stands in for teleoperated demonstrations.

use super::teacher::Action;
use super::{Human, World, HUMAN_RADIUS, ROBOT_RADIUS};
use crate::geometry::{Pose, Trajectory};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Poses per plan, including the current pose at index 0.
pub const PLAN_POSES: usize = 10;
/// Nominal spacing between consecutive plan poses.
pub const PLAN_STEP: f64 = 0.3;
/// Spacing when slowed at an occluded corner.
pub const PLAN_STEP_SLOW: f64 = 0.15;
/// Required clearance between plan points and human centers.
pub const HUMAN_CLEARANCE: f64 = 0.5;

const GRID_RES: f64 = 0.1;
const WALL_INFLATION: f64 = ROBOT_RADIUS + 0.1;
const HUMAN_BLOCK: f64 = HUMAN_CLEARANCE + 0.05;
const GROUP_BLOCK: f64 = HUMAN_RADIUS + HUMAN_CLEARANCE + 0.15;
const KEEP_RIGHT_WEIGHT: f64 = 0.25;
const SOFT_HUMAN_RANGE: f64 = 1.2;
const SOFT_HUMAN_WEIGHT: f64 = 1.5;

struct Costmap {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    blocked: Vec<bool>,
    soft: Vec<f64>,
}

impl Costmap {
    fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let ix = ((x - self.x0) / GRID_RES).floor();
        let iy = ((y - self.y0) / GRID_RES).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.nx as f64 || iy >= self.ny as f64 {
            None
        } else {
            Some((ix as usize, iy as usize))
        }
    }

    fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x0 + (ix as f64 + 0.5) * GRID_RES,
            self.y0 + (iy as f64 + 0.5) * GRID_RES,
        )
    }

    fn is_blocked(&self, x: f64, y: f64) -> bool {
        match self.cell_of(x, y) {
            Some((ix, iy)) => self.blocked[self.idx(ix, iy)],
            None => true,
        }
    }

    /// Straight segment entirely in free cells, sampled at half resolution.
    fn line_free(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let d = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (d / (GRID_RES * 0.5)).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            if self.is_blocked(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)) {
                return false;
            }
        }
        true
    }
}

fn build_costmap(world: &World) -> Costmap {
    let (xmin, ymin, xmax, ymax) = world.bounds;
    let nx = ((xmax - xmin) / GRID_RES).ceil() as usize + 1;
    let ny = ((ymax - ymin) / GRID_RES).ceil() as usize + 1;
    let mut map = Costmap {
        x0: xmin,
        y0: ymin,
        nx,
        ny,
        blocked: vec![false; nx * ny],
        soft: vec![0.0; nx * ny],
    };

    let goal_dir = {
        let dx = world.goal.x - world.robot.x;
        let dy = world.goal.y - world.robot.y;
        let d = dx.hypot(dy).max(1e-9);
        (dx / d, dy / d)
    };

    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = map.center(ix, iy);
            let i = map.idx(ix, iy);

            for w in &world.walls {
                if w.distance_to(x, y) < WALL_INFLATION {
                    map.blocked[i] = true;
                    break;
                }
            }
            if map.blocked[i] {
                continue;
            }
            for h in &world.humans {
                let d = (h.x - x).hypot(h.y - y);
                if d < HUMAN_BLOCK {
                    map.blocked[i] = true;
                    break;
                }
                if d < SOFT_HUMAN_RANGE {
                    map.soft[i] += SOFT_HUMAN_WEIGHT * (SOFT_HUMAN_RANGE - d);
                }
            }
            if map.blocked[i] {
                continue;
            }
            // Conversation space between members of one group is treated as
            // an obstacle hull.
            'groups: for g in 0..world.n_groups {
                let members: Vec<&Human> =
                    world.humans.iter().filter(|h| h.group == Some(g)).collect();
                for a in 0..members.len() {
                    for b in (a + 1)..members.len() {
                        let seg = super::Segment::new(
                            members[a].x,
                            members[a].y,
                            members[b].x,
                            members[b].y,
                        );
                        if seg.distance_to(x, y) < GROUP_BLOCK {
                            map.blocked[i] = true;
                            break 'groups;
                        }
                    }
                }
            }
            if map.blocked[i] {
                continue;
            }
            // Keep-right bias: traveling left of the straight start-goal
            // line costs extra.
            let leftness =
                goal_dir.0 * (y - world.robot.y) - goal_dir.1 * (x - world.robot.x);
            if leftness > 0.0 {
                map.soft[i] += KEEP_RIGHT_WEIGHT * leftness;
            }
        }
    }
    map
}

#[derive(PartialEq)]
struct QueueItem {
    f: f64,
    idx: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, deterministic tie-break on index.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn nearest_free(map: &Costmap, x: f64, y: f64) -> Option<(usize, usize)> {
    let (ix, iy) = map.cell_of(x, y)?;
    if !map.blocked[map.idx(ix, iy)] {
        return Some((ix, iy));
    }
    for radius in 1..=12i64 {
        let mut best: Option<(f64, (usize, usize))> = None;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx.abs() != radius && dy.abs() != radius {
                    continue;
                }
                let cx = ix as i64 + dx;
                let cy = iy as i64 + dy;
                if cx < 0 || cy < 0 || cx >= map.nx as i64 || cy >= map.ny as i64 {
                    continue;
                }
                let (cx, cy) = (cx as usize, cy as usize);
                if !map.blocked[map.idx(cx, cy)] {
                    let (px, py) = map.center(cx, cy);
                    let d = (px - x).hypot(py - y);
                    if best.is_none() || d < best.unwrap().0 {
                        best = Some((d, (cx, cy)));
                    }
                }
            }
        }
        if let Some((_, cell)) = best {
            return Some(cell);
        }
    }
    None
}

fn astar(map: &Costmap, start: (usize, usize), goal: (usize, usize)) -> Option<Vec<(f64, f64)>> {
    let n = map.nx * map.ny;
    let start_idx = map.idx(start.0, start.1);
    let goal_idx = map.idx(goal.0, goal.1);
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g[start_idx] = 0.0;
    let h = |idx: usize| {
        let ix = (idx % map.nx) as f64;
        let iy = (idx / map.nx) as f64;
        let gx = goal.0 as f64;
        let gy = goal.1 as f64;
        let dx = (ix - gx).abs();
        let dy = (iy - gy).abs();
        GRID_RES * (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy))
    };
    heap.push(QueueItem {
        f: h(start_idx),
        idx: start_idx,
    });

    const DIRS: [(i64, i64, f64); 8] = [
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, std::f64::consts::SQRT_2),
        (1, -1, std::f64::consts::SQRT_2),
        (-1, 1, std::f64::consts::SQRT_2),
        (-1, -1, std::f64::consts::SQRT_2),
    ];

    while let Some(QueueItem { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == goal_idx {
            let mut path = Vec::new();
            let mut cur = idx;
            while cur != usize::MAX {
                let (ix, iy) = (cur % map.nx, cur / map.nx);
                path.push(map.center(ix, iy));
                cur = parent[cur];
            }
            path.reverse();
            return Some(path);
        }
        let ix = (idx % map.nx) as i64;
        let iy = (idx / map.nx) as i64;
        for &(dx, dy, step) in &DIRS {
            let cx = ix + dx;
            let cy = iy + dy;
            if cx < 0 || cy < 0 || cx >= map.nx as i64 || cy >= map.ny as i64 {
                continue;
            }
            let nidx = map.idx(cx as usize, cy as usize);
            if map.blocked[nidx] || closed[nidx] {
                continue;
            }
            let cost = g[idx] + step * GRID_RES * (1.0 + map.soft[nidx]);
            if cost < g[nidx] {
                g[nidx] = cost;
                parent[nidx] = idx;
                heap.push(QueueItem {
                    f: cost + h(nidx),
                    idx: nidx,
                });
            }
        }
    }
    None
}

/// Greedy line-of-sight shortcutting followed by one midpoint-smoothing
/// pass.
fn smooth(map: &Costmap, path: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut cut = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut far = i + 1;
        for j in (i + 1..path.len()).rev() {
            if map.line_free(path[i], path[j]) {
                far = j;
                break;
            }
        }
        cut.push(path[far]);
        i = far;
    }
    if cut.len() <= 2 {
        return cut;
    }
    let mut out = vec![cut[0]];
    for w in cut.windows(2) {
        out.push((0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 + w[1].1)));
        out.push(w[1]);
    }
    out
}

fn resample_points(path: &[(f64, f64)], step: f64, count: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    let mut seg_pos = 0.0;
    let mut cur;
    for _ in 0..count {
        let mut remaining = step;
        while remaining > 1e-12 && seg + 1 < path.len() {
            let (ax, ay) = path[seg];
            let (bx, by) = path[seg + 1];
            let seg_len = (bx - ax).hypot(by - ay);
            let left = seg_len - seg_pos;
            if left > remaining {
                seg_pos += remaining;
                remaining = 0.0;
            } else {
                remaining -= left;
                seg += 1;
                seg_pos = 0.0;
            }
        }
        if seg + 1 < path.len() {
            let (ax, ay) = path[seg];
            let (bx, by) = path[seg + 1];
            let seg_len = (bx - ax).hypot(by - ay).max(1e-12);
            let t = seg_pos / seg_len;
            cur = (ax + t * (bx - ax), ay + t * (by - ay));
        } else {
            cur = *path.last().unwrap();
        }
        out.push(cur);
    }
    out
}

/// Wall corner vertices where two segments meet at a sharp interior angle.
fn wall_corners(world: &World) -> Vec<(f64, f64)> {
    let mut corners = Vec::new();
    let ends = |s: &super::Segment| [(s.ax, s.ay), (s.bx, s.by)];
    for (i, a) in world.walls.iter().enumerate() {
        for b in world.walls.iter().skip(i + 1) {
            for pa in ends(a) {
                for pb in ends(b) {
                    if (pa.0 - pb.0).hypot(pa.1 - pb.1) < 1e-6 {
                        let da = (a.bx - a.ax, a.by - a.ay);
                        let db = (b.bx - b.ax, b.by - b.ay);
                        let na = da.0.hypot(da.1).max(1e-9);
                        let nb = db.0.hypot(db.1).max(1e-9);
                        let cosang = ((da.0 * db.0 + da.1 * db.1) / (na * nb)).abs();
                        if cosang < 0.7 {
                            corners.push(pa);
                        }
                    }
                }
            }
        }
    }
    corners
}

/// Whether a straight segment crosses any wall.
pub fn segment_blocked(world: &World, a: (f64, f64), b: (f64, f64)) -> bool {
    world
        .walls
        .iter()
        .any(|w| segments_intersect(a, b, (w.ax, w.ay), (w.bx, w.by)))
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

/// Whether the robot is approaching an occluded corner: the goal is hidden
/// behind a wall and a sharp corner vertex is close ahead.
pub fn near_occluded_corner(world: &World) -> bool {
    if !segment_blocked(
        world,
        (world.robot.x, world.robot.y),
        (world.goal.x, world.goal.y),
    ) {
        return false;
    }
    let (s, c) = world.robot.phi.sin_cos();
    wall_corners(world).iter().any(|&(cx, cy)| {
        let dx = cx - world.robot.x;
        let dy = cy - world.robot.y;
        let dist = dx.hypot(dy);
        let forward = c * dx + s * dy;
        dist < 2.2 && forward > 0.0
    })
}

/// Plan the next [`PLAN_POSES`] poses from the current robot pose: pose 0
/// is the current pose, the rest follow the A* path at the plan spacing
/// (halved near occluded corners). With no feasible path the plan stays in
/// place.
pub fn scripted_expert(world: &World) -> Trajectory {
    let stop = || {
        Trajectory::new(vec![world.robot; PLAN_POSES]).expect("non-empty")
    };
    let map = build_costmap(world);
    let start = match nearest_free(&map, world.robot.x, world.robot.y) {
        Some(c) => c,
        None => return stop(),
    };
    let goal = match nearest_free(&map, world.goal.x, world.goal.y) {
        Some(c) => c,
        None => return stop(),
    };
    let raw = match astar(&map, start, goal) {
        Some(p) => p,
        None => return stop(),
    };
    let mut path = smooth(&map, &raw);
    path.insert(0, (world.robot.x, world.robot.y));

    let spacing = if near_occluded_corner(world) {
        PLAN_STEP_SLOW
    } else {
        PLAN_STEP
    };
    let future = resample_points(&path, spacing, PLAN_POSES - 1);

    let mut poses = Vec::with_capacity(PLAN_POSES);
    poses.push(world.robot);
    let mut prev = (world.robot.x, world.robot.y);
    let mut prev_heading = world.robot.phi;
    for &(x, y) in &future {
        let heading = if (x - prev.0).hypot(y - prev.1) > 1e-6 {
            (y - prev.1).atan2(x - prev.0)
        } else {
            prev_heading
        };
        poses.push(Pose::new(x, y, heading));
        prev = (x, y);
        prev_heading = heading;
    }
    Trajectory::new(poses).expect("non-empty")
}

/// Classify the maneuver a plan realizes, from its geometry alone:
/// stationary plans yield, reduced spacing means slowing for a corner, and
/// lateral deviation from the reference line splits into keep-right and
/// the two veers. The reference line runs toward the goal, or along the
/// current heading when the goal is hidden behind a wall.
pub fn classify_plan_maneuver(world: &World, plan: &Trajectory) -> Action {
    let pts = plan.points();
    let arc: f64 = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum();
    if arc < 0.05 {
        return Action::StopAndYield;
    }
    let mean_step = arc / (pts.len() - 1) as f64;
    if mean_step < (PLAN_STEP + PLAN_STEP_SLOW) / 2.0 {
        return Action::SlowDown;
    }

    let goal_hidden = segment_blocked(
        world,
        (world.robot.x, world.robot.y),
        (world.goal.x, world.goal.y),
    );
    let dir = if goal_hidden {
        let (s, c) = world.robot.phi.sin_cos();
        (c, s)
    } else {
        let dx = world.goal.x - world.robot.x;
        let dy = world.goal.y - world.robot.y;
        let d = dx.hypot(dy).max(1e-9);
        (dx / d, dy / d)
    };
    let mut max_left = 0.0f64;
    let mut max_right = 0.0f64;
    for &(x, y) in &pts {
        let lateral = dir.0 * (y - world.robot.y) - dir.1 * (x - world.robot.x);
        if lateral > max_left {
            max_left = lateral;
        }
        if -lateral > max_right {
            max_right = -lateral;
        }
    }
    const SHIFT: f64 = 0.18;
    const VEER: f64 = 0.8;
    if max_left < SHIFT && max_right < SHIFT {
        return Action::Proceed;
    }
    if max_right >= max_left {
        if max_right > VEER {
            Action::VeerRight
        } else {
            Action::KeepRight
        }
    } else if max_left > SHIFT {
        Action::VeerLeft
    } else {
        Action::Proceed
    }
}
