//! Seeded generators for the four evaluation scenario families.

use super::{Human, Segment, World, DEFAULT_DT};
use crate::geometry::Pose;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Straight corridor with two people approaching front-on.
    NarrowHallway,
    /// L-shaped corridor with one person coming around the corner.
    BlindCorner,
    /// Open room with two standing conversation groups and three walkers.
    StaticGroupsDynamic,
    /// Open room with two moving groups and two walkers.
    DynamicGroupsDynamic,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::NarrowHallway,
        ScenarioKind::BlindCorner,
        ScenarioKind::StaticGroupsDynamic,
        ScenarioKind::DynamicGroupsDynamic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::NarrowHallway => "narrow_hallway",
            ScenarioKind::BlindCorner => "blind_corner",
            ScenarioKind::StaticGroupsDynamic => "static_groups_dynamic",
            ScenarioKind::DynamicGroupsDynamic => "dynamic_groups_dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// Build a randomized-but-seeded world of the given family.
pub fn make_scenario(kind: ScenarioKind, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64) << 32);
    match kind {
        ScenarioKind::NarrowHallway => narrow_hallway(&mut rng, seed),
        ScenarioKind::BlindCorner => blind_corner(&mut rng, seed),
        ScenarioKind::StaticGroupsDynamic => static_groups(&mut rng, seed),
        ScenarioKind::DynamicGroupsDynamic => dynamic_groups(&mut rng, seed),
    }
}

fn narrow_hallway(rng: &mut ChaCha8Rng, seed: u64) -> World {
    let width = rng.random_range(1.8..2.4);
    let length = rng.random_range(9.0..12.0);
    let hw = width / 2.0;
    let walls = vec![
        Segment::new(0.0, -hw, length, -hw),
        Segment::new(0.0, hw, length, hw),
        Segment::new(0.0, -hw, 0.0, hw),
        Segment::new(length, -hw, length, hw),
    ];
    let robot_y = rng.random_range(-0.2..0.2);
    let goal_y = rng.random_range(-0.2..0.2);
    // Two oncoming people starting in the far half, walking to the near end.
    let mut humans = Vec::new();
    for i in 0..2 {
        let x = rng.random_range(length * 0.55..length * 0.8);
        let y = rng.random_range(-hw + 0.5..hw - 0.5);
        let speed = rng.random_range(0.5..1.0);
        let end_y = rng.random_range(-hw + 0.5..hw - 0.5);
        let _ = i;
        humans.push(Human::walking(x, y, speed, vec![(0.8, end_y)]));
    }
    World {
        walls,
        humans,
        n_groups: 0,
        robot: Pose::new(0.6, robot_y, 0.0),
        goal: Pose::new(length - 0.6, goal_y, 0.0),
        dt: DEFAULT_DT,
        seed,
        time: 0.0,
        collided: false,
        bounds: (-0.5, -hw - 0.5, length + 0.5, hw + 0.5),
    }
}

fn blind_corner(rng: &mut ChaCha8Rng, seed: u64) -> World {
    let width = rng.random_range(1.8..2.4);
    let hw = width / 2.0;
    let arm_x = rng.random_range(5.0..7.0);
    let arm_y = rng.random_range(4.0..6.0);
    // Horizontal arm along +x, then a 90-degree turn up (+y). The inner
    // corner at (arm_x - hw, hw) hides the vertical arm.
    let walls = vec![
        // outer boundary
        Segment::new(0.0, -hw, arm_x + hw, -hw),
        Segment::new(arm_x + hw, -hw, arm_x + hw, arm_y),
        // inner boundary
        Segment::new(0.0, hw, arm_x - hw, hw),
        Segment::new(arm_x - hw, hw, arm_x - hw, arm_y),
        // start cap
        Segment::new(0.0, -hw, 0.0, hw),
        // far cap
        Segment::new(arm_x - hw, arm_y, arm_x + hw, arm_y),
    ];
    // One person beyond the corner walking toward and around it.
    let start_y = rng.random_range(arm_y * 0.5..arm_y - 0.6);
    let lane = rng.random_range(-hw + 0.55..hw - 0.55);
    let speed = rng.random_range(0.4..0.9);
    let humans = vec![Human::walking(
        arm_x + lane,
        start_y,
        speed,
        vec![(arm_x + lane * 0.5, 0.0), (0.8, rng.random_range(-0.4..0.4))],
    )];
    World {
        walls,
        humans,
        n_groups: 0,
        robot: Pose::new(0.6, rng.random_range(-0.2..0.2), 0.0),
        goal: Pose::new(arm_x, arm_y - 0.6, PI / 2.0),
        dt: DEFAULT_DT,
        seed,
        time: 0.0,
        collided: false,
        bounds: (-0.5, -hw - 0.5, arm_x + hw + 0.5, arm_y + 0.5),
    }
}

fn open_room(rng: &mut ChaCha8Rng) -> (Vec<Segment>, f64, f64) {
    let w = rng.random_range(9.0..11.0);
    let h = rng.random_range(7.0..9.0);
    let walls = vec![
        Segment::new(0.0, 0.0, w, 0.0),
        Segment::new(w, 0.0, w, h),
        Segment::new(w, h, 0.0, h),
        Segment::new(0.0, h, 0.0, 0.0),
    ];
    (walls, w, h)
}

fn place_clear(
    rng: &mut ChaCha8Rng,
    w: f64,
    h: f64,
    clear_of: &[(f64, f64)],
    min_dist: f64,
) -> (f64, f64) {
    for _ in 0..64 {
        let x = rng.random_range(1.0..w - 1.0);
        let y = rng.random_range(1.0..h - 1.0);
        if clear_of
            .iter()
            .all(|&(cx, cy)| (x - cx).hypot(y - cy) >= min_dist)
        {
            return (x, y);
        }
    }
    (w / 2.0, h / 2.0)
}

fn static_groups(rng: &mut ChaCha8Rng, seed: u64) -> World {
    let (walls, w, h) = open_room(rng);
    let robot = Pose::new(0.8, h / 2.0 + rng.random_range(-0.5..0.5), 0.0);
    let goal = Pose::new(w - 0.8, h / 2.0 + rng.random_range(-0.5..0.5), 0.0);
    let mut keep_out = vec![(robot.x, robot.y), (goal.x, goal.y)];

    let mut humans = Vec::new();
    // Two standing conversation groups of 2-3 people.
    for g in 0..2 {
        let (cx, cy) = place_clear(rng, w, h, &keep_out, 2.2);
        keep_out.push((cx, cy));
        let members = rng.random_range(2..=3);
        for m in 0..members {
            let ang = 2.0 * PI * m as f64 / members as f64 + rng.random_range(-0.3..0.3);
            let mut hmn = Human::standing(cx + 0.5 * ang.cos(), cy + 0.5 * ang.sin(), Some(g));
            hmn.group = Some(g);
            humans.push(hmn);
        }
    }
    // Three dynamic individuals crossing the room.
    for _ in 0..3 {
        let (x, y) = place_clear(rng, w, h, &keep_out, 1.8);
        let (tx, ty) = place_clear(rng, w, h, &[(x, y)], 3.0);
        humans.push(Human::walking(x, y, rng.random_range(0.5..1.2), vec![(tx, ty)]));
    }
    World {
        walls,
        humans,
        n_groups: 2,
        robot,
        goal,
        dt: DEFAULT_DT,
        seed,
        time: 0.0,
        collided: false,
        bounds: (-0.5, -0.5, w + 0.5, h + 0.5),
    }
}

fn dynamic_groups(rng: &mut ChaCha8Rng, seed: u64) -> World {
    let (walls, w, h) = open_room(rng);
    let robot = Pose::new(0.8, h / 2.0 + rng.random_range(-0.5..0.5), 0.0);
    let goal = Pose::new(w - 0.8, h / 2.0 + rng.random_range(-0.5..0.5), 0.0);
    let mut keep_out = vec![(robot.x, robot.y), (goal.x, goal.y)];

    let mut humans = Vec::new();
    // Two walking groups: members share a destination and speed, offset
    // side by side.
    for g in 0..2 {
        let (cx, cy) = place_clear(rng, w, h, &keep_out, 2.2);
        keep_out.push((cx, cy));
        let (tx, ty) = place_clear(rng, w, h, &[(cx, cy)], 3.5);
        let speed = rng.random_range(0.4..0.8);
        let members = rng.random_range(2..=3);
        let dir = ((ty - cy).atan2(tx - cx) + PI / 2.0, ());
        for m in 0..members {
            let off = (m as f64 - (members - 1) as f64 / 2.0) * 0.7;
            let ox = cx + off * dir.0.cos();
            let oy = cy + off * dir.0.sin();
            let mut hmn = Human::walking(
                ox,
                oy,
                speed,
                vec![(tx + off * dir.0.cos(), ty + off * dir.0.sin())],
            );
            hmn.group = Some(g);
            humans.push(hmn);
        }
    }
    // Two dynamic individuals.
    for _ in 0..2 {
        let (x, y) = place_clear(rng, w, h, &keep_out, 1.8);
        let (tx, ty) = place_clear(rng, w, h, &[(x, y)], 3.0);
        humans.push(Human::walking(x, y, rng.random_range(0.5..1.2), vec![(tx, ty)]));
    }
    World {
        walls,
        humans,
        n_groups: 2,
        robot,
        goal,
        dt: DEFAULT_DT,
        seed,
        time: 0.0,
        collided: false,
        bounds: (-0.5, -0.5, w + 0.5, h + 0.5),
    }
}
