//! Block stacking and the house-building family: tasks whose goal is a
//! single structure built on the table.

use super::predicates::{adjacent, is_stack, on_ground, on_top, rests_on_both};
use super::sampler::{self, Region, D_SEP};
use super::{EpisodeParams, Task, TaskError, TaskSpec, TaskState};
use crate::geometry::polygon::{self, Vec2};
use crate::geometry::{self, Pose, Shape};
use crate::planners::{self, PlanContext, PlannerError};
use crate::sim::{Action, Category, SimObject, WorldState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const CUBE_SIDE: f64 = 0.03;
pub const ROOF_LENGTH: f64 = 0.12;
/// Center distance between the two ground blocks of a house, before scaling.
pub const PAIR_DISTANCE: f64 = 0.04;
/// Circumradius of an improvised block footprint, before scaling.
pub const RANDOM_RADIUS: f64 = 0.015;
pub const RANDOM_HEIGHT: (f64, f64) = (0.015, 0.035);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StructureKind {
    Stack,
    House1,
    House2,
    House3,
    House4,
    Improvise2,
    Improvise3,
}

/// Goal pose of one structure member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub xy: Vec2,
    pub base: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug)]
pub struct StructureTask {
    spec: TaskSpec,
    kind: StructureKind,
}

fn cube(s: f64) -> (Shape, Category) {
    (Shape::cube(CUBE_SIDE * s), Category::Block)
}

fn roof(s: f64) -> (Shape, Category) {
    (Shape::TriangularPrism { lx: ROOF_LENGTH * s, ly: CUBE_SIDE * s, lz: CUBE_SIDE * s }, Category::Roof)
}

fn brick(s: f64) -> (Shape, Category) {
    (Shape::cuboid(ROOF_LENGTH * s, CUBE_SIDE * s, CUBE_SIDE * s), Category::Brick)
}

fn triangle(s: f64) -> (Shape, Category) {
    let l = CUBE_SIDE * s;
    (Shape::TriangularPrism { lx: l, ly: l, lz: l }, Category::Triangle)
}

/// Random convex footprint with 4 to 6 vertices, centered on its centroid and
/// fitting a square of side `2 * RANDOM_RADIUS * s`.
pub fn random_block<R: Rng>(rng: &mut R, s: f64, height: f64) -> Shape {
    loop {
        let k = rng.gen_range(4..=6);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let max_gap = (0..k)
            .map(|i| if i + 1 < k { angles[i + 1] - angles[i] } else { angles[0] + TAU - angles[i] })
            .fold(0.0, f64::max);
        if max_gap > TAU / 3.0 {
            continue;
        }
        let raw: Vec<Vec2> = angles.iter().map(|&a| Vec2::from_angle(a) * (RANDOM_RADIUS * s)).collect();
        let c = polygon::centroid(&raw);
        let mut pts: Vec<Vec2> = raw.iter().map(|&p| p - c).collect();
        let half = pts.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max);
        let limit = RANDOM_RADIUS * s;
        if half > limit {
            pts = pts.iter().map(|&p| p * (limit / half)).collect();
        }
        let shape = Shape::ConvexPrism { footprint: pts, height };
        if shape.validate().is_ok() {
            return shape;
        }
    }
}

impl StructureTask {
    fn new(kind: StructureKind, name: &str, n: usize, optimal: u32, max: u32) -> Self {
        StructureTask { spec: TaskSpec::new(name, n, optimal, max, true), kind }
    }

    pub fn block_stacking() -> Self {
        Self::new(StructureKind::Stack, "block_stacking", 4, 6, 10)
    }

    pub fn house_building_1() -> Self {
        Self::new(StructureKind::House1, "house_building_1", 4, 6, 10)
    }

    pub fn house_building_2() -> Self {
        Self::new(StructureKind::House2, "house_building_2", 3, 4, 10)
    }

    pub fn house_building_3() -> Self {
        Self::new(StructureKind::House3, "house_building_3", 4, 6, 10)
    }

    pub fn house_building_4() -> Self {
        Self::new(StructureKind::House4, "house_building_4", 6, 10, 20)
    }

    pub fn improvise_house_building_2() -> Self {
        Self::new(StructureKind::Improvise2, "improvise_house_building_2", 3, 4, 10)
    }

    pub fn improvise_house_building_3() -> Self {
        Self::new(StructureKind::Improvise3, "improvise_house_building_3", 4, 6, 10)
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// Member shapes in build order; the first is the anchor that stays put.
    pub fn members<R: Rng>(&self, n: usize, s: f64, rng: &mut R) -> Vec<(Shape, Category)> {
        use StructureKind::*;
        let randoms = |rng: &mut R| {
            let h = rng.gen_range(RANDOM_HEIGHT.0..=RANDOM_HEIGHT.1) * s;
            let a = random_block(rng, s, h);
            let b = random_block(rng, s, h);
            [(a, Category::Random), (b, Category::Random)]
        };
        match self.kind {
            Stack => (0..n).map(|_| cube(s)).collect(),
            House1 => (0..n - 1).map(|_| cube(s)).chain([triangle(s)]).collect(),
            House2 => vec![cube(s), cube(s), roof(s)],
            House3 => vec![cube(s), cube(s), brick(s), roof(s)],
            House4 => vec![cube(s), cube(s), brick(s), cube(s), cube(s), roof(s)],
            Improvise2 => {
                let [a, b] = randoms(rng);
                vec![a, b, roof(s)]
            }
            Improvise3 => {
                let [a, b] = randoms(rng);
                vec![a, b, brick(s), roof(s)]
            }
        }
    }

    /// Goal poses for members with shapes `shapes` (build order), given the
    /// anchor position and the structure axis `phi`.
    pub fn layout(&self, shapes: &[Shape], anchor: Vec2, phi: f64) -> Vec<Target> {
        use StructureKind::*;
        let scale = shapes.iter().map(|s| s.half_extents().x * 2.0 / ROOF_LENGTH).fold(0.0, f64::max);
        let d = PAIR_DISTANCE * scale;
        let h = |i: usize| shapes[i].height();
        let local: Vec<(f64, f64)> = match self.kind {
            Stack | House1 => {
                let mut base = 0.0;
                shapes
                    .iter()
                    .map(|s| {
                        let b = base;
                        base += s.height();
                        (0.0, b)
                    })
                    .collect()
            }
            House2 | Improvise2 => vec![(0.0, 0.0), (d, 0.0), (d / 2.0, h(0))],
            House3 | Improvise3 => vec![(0.0, 0.0), (d, 0.0), (d / 2.0, h(0)), (d / 2.0, h(0) + h(2))],
            House4 => vec![
                (0.0, 0.0),
                (d, 0.0),
                (d / 2.0, h(0)),
                (0.0, h(0) + h(2)),
                (d, h(0) + h(2)),
                (d / 2.0, h(0) + h(2) + h(3)),
            ],
        };
        local
            .into_iter()
            .map(|(along, base)| Target { xy: anchor + Vec2::from_angle(phi) * along, base, yaw: phi })
            .collect()
    }

    /// Category sequence of the members, for matching world objects to
    /// build slots.
    pub fn slot_categories(&self, n: usize) -> Vec<Category> {
        use Category::{Block, Brick, Random, Roof, Triangle};
        match self.kind {
            StructureKind::Stack => vec![Block; n],
            StructureKind::House1 => std::iter::repeat_n(Block, n - 1).chain([Triangle]).collect(),
            StructureKind::House2 => vec![Block, Block, Roof],
            StructureKind::House3 => vec![Block, Block, Brick, Roof],
            StructureKind::House4 => vec![Block, Block, Brick, Block, Block, Roof],
            StructureKind::Improvise2 => vec![Random, Random, Roof],
            StructureKind::Improvise3 => vec![Random, Random, Brick, Roof],
        }
    }

    /// Spawn the finished structure directly in an empty world. Returns the
    /// member ids in build order.
    pub fn build_goal(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<Vec<u32>, TaskError> {
        let members = self.members(params.num_objects, params.scale, &mut world.rng);
        let shapes: Vec<Shape> = members.iter().map(|(s, _)| s.clone()).collect();
        let name = self.spec.name.clone();
        sampler::with_rounds(world, &name, |w| {
            for _ in 0..sampler::ATTEMPTS_PER_OBJECT {
                let b = w.bounds;
                let anchor = Vec2::new(w.rng.gen_range(b.x_min..=b.x_max), w.rng.gen_range(b.y_min..=b.y_max));
                let phi = params.yaw(&mut w.rng);
                let targets = self.layout(&shapes, anchor, phi);
                let poses: Vec<Pose> = targets
                    .iter()
                    .zip(&shapes)
                    .map(|(t, s)| Pose::new(t.xy.x, t.xy.y, t.base + s.height() / 2.0, t.yaw))
                    .collect();
                let inside = poses.iter().zip(&shapes).all(|(p, s)| {
                    let fp = geometry::world_footprint(s, p);
                    sampler::inside_bounds(&b, &fp) && inset_ok(&b, &fp)
                });
                if inside {
                    return Some(
                        members.iter().zip(poses).map(|((s, c), p)| w.spawn(s.clone(), p, *c, true)).collect(),
                    );
                }
            }
            None
        })
    }
}

/// Keep goal structures away from the workspace edge so scattered pieces
/// have room around them.
fn inset_ok(b: &crate::sim::Bounds, fp: &[Vec2]) -> bool {
    let m = 0.01;
    fp.iter().all(|p| p.x >= b.x_min + m && p.x <= b.x_max - m && p.y >= b.y_min + m && p.y <= b.y_max - m)
}

fn by_category(world: &WorldState, cat: Category) -> Vec<&SimObject> {
    world.objects.iter().filter(|o| o.category == cat).collect()
}

/// Scale of the episode, recovered from the roof length.
fn house_scale(roof: &SimObject) -> f64 {
    roof.shape.half_extents().x * 2.0 / ROOF_LENGTH
}

/// Some pair `(a, b)` drawn from `blocks` (not in `exclude`) satisfies `f`.
fn any_pair<'a>(blocks: &[&'a SimObject], mut f: impl FnMut(&'a SimObject, &'a SimObject) -> bool) -> bool {
    (0..blocks.len()).any(|i| (i + 1..blocks.len()).any(|j| f(blocks[i], blocks[j])))
}

impl Task for StructureTask {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn optimal_steps(&self, n: usize) -> u32 {
        match self.kind {
            StructureKind::Stack | StructureKind::House1 => 2 * (n as u32 - 1),
            _ => self.spec.optimal_steps,
        }
    }

    fn check_num_objects(&self, n: usize) -> Result<(), TaskError> {
        let ok = match self.kind {
            StructureKind::Stack | StructureKind::House1 => (2..=8).contains(&n),
            _ => n == self.spec.num_objects,
        };
        if ok {
            Ok(())
        } else {
            Err(TaskError::NumObjects {
                task: self.spec.name.clone(),
                n,
                reason: match self.kind {
                    StructureKind::Stack | StructureKind::House1 => "expected 2..=8".into(),
                    _ => format!("this task uses exactly {}", self.spec.num_objects),
                },
            })
        }
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let members = self.members(params.num_objects, params.scale, &mut world.rng);
        sampler::with_rounds(world, &self.spec.name, |w| {
            for (shape, cat) in &members {
                let pose = sampler::sample_pose(w, shape, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
                w.spawn(shape.clone(), pose, *cat, true);
            }
            Some(())
        })?;
        Ok(TaskState::None)
    }

    fn check_goal(&self, world: &WorldState, _state: &TaskState) -> bool {
        use StructureKind::*;
        if world.gripper.is_holding() || world.objects.iter().any(|o| o.out_of_play) {
            return false;
        }
        match self.kind {
            Stack => is_stack(&by_category(world, Category::Block)),
            House1 => {
                let cubes = by_category(world, Category::Block);
                let tri = by_category(world, Category::Triangle);
                let Some(top) = cubes.iter().max_by(|a, b| a.base().total_cmp(&b.base())) else {
                    return false;
                };
                is_stack(&cubes) && tri.len() == 1 && on_top(tri[0], top)
            }
            House2 | Improvise2 => {
                let cat = if self.kind == House2 { Category::Block } else { Category::Random };
                let blocks = by_category(world, cat);
                let roofs = by_category(world, Category::Roof);
                let [roof] = roofs[..] else { return false };
                let s = house_scale(roof);
                any_pair(&blocks, |a, b| on_ground(a) && adjacent(a, b, s) && rests_on_both(roof, a, b))
            }
            House3 | Improvise3 => {
                let cat = if self.kind == House3 { Category::Block } else { Category::Random };
                let blocks = by_category(world, cat);
                let (bricks, roofs) = (by_category(world, Category::Brick), by_category(world, Category::Roof));
                let ([brick], [roof]) = (&bricks[..], &roofs[..]) else { return false };
                let s = house_scale(roof);
                any_pair(&blocks, |a, b| on_ground(a) && adjacent(a, b, s) && rests_on_both(brick, a, b))
                    && on_top(roof, brick)
            }
            House4 => {
                let blocks = by_category(world, Category::Block);
                let (bricks, roofs) = (by_category(world, Category::Brick), by_category(world, Category::Roof));
                let ([brick], [roof]) = (&bricks[..], &roofs[..]) else { return false };
                let s = house_scale(roof);
                let lower = any_pair(&blocks, |a, b| on_ground(a) && adjacent(a, b, s) && rests_on_both(brick, a, b));
                let upper = any_pair(&blocks, |a, b| {
                    let brick_fp = brick.footprint();
                    let on_brick = |o: &SimObject| {
                        super::predicates::touches_top(o, brick)
                            && polygon::convex_contains(&brick_fp, o.pose.xy(), 1e-9)
                    };
                    on_brick(a) && on_brick(b) && adjacent(a, b, s) && rests_on_both(roof, a, b)
                });
                lower && upper
            }
        }
    }

    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        planners::structure::next_action(self, ctx)
    }

    fn structure(&self) -> Option<&StructureTask> {
        Some(self)
    }
}
