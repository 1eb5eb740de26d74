//! Quasi-static pick-and-place world.
//!
//! There are no dynamics. A pick lifts the topmost object under the gripper
//! if the grasp is feasible; a place drops the held object straight down onto
//! whatever lies beneath its footprint. An object whose center of mass falls
//! outside its support polygon topples: it slides outward in fixed
//! increments until it clears the surface that tipped it, then lands again.
//! After every primitive, [`settle`] drops any object left hanging.

pub mod support;

use crate::geometry::polygon::{self, Vec2};
use crate::geometry::{self, GeometryError, Pose, Shape, SurfacePatch, AREA_EPS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use support::{analyze_landing, surface_height, surfaces_under, SETTLE_TOLERANCE};
use thiserror::Error;

/// Added to the local maximum height to get a pick depth.
pub const Z_PICK_OFFSET: f64 = -0.015;
/// Clearance between the local maximum height and a held object's bottom.
pub const Z_PLACE_CLEAR: f64 = 0.002;
/// Half-width of the square the z heuristic scans.
pub const Z_REGION_HALF_WIDTH: f64 = 0.012;
/// Gripper center must lie this close to the object's grasp line.
pub const GRASP_TOLERANCE: f64 = 0.01;
/// Length of one toppling displacement increment.
pub const TOPPLE_STEP: f64 = 0.01;
/// Footprints with a long/short extent ratio at least this large are grasped
/// along their centerline rather than at the center of mass.
pub const ELONGATION_RATIO: f64 = 1.5;

const MAX_TOPPLE_ROUNDS: usize = 8;
const MAX_TOPPLE_INCREMENTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("pick requested while the gripper is holding object {0}")]
    GripperHolding(u32),
    #[error("place requested with an empty gripper")]
    GripperEmpty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Block,
    Roof,
    Triangle,
    Brick,
    Random,
    Box,
    Bottle,
    Swab,
    Tube,
    UsedTube,
    Container,
    Pallet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub id: u32,
    pub shape: Shape,
    pub pose: Pose,
    pub category: Category,
    pub movable: bool,
    /// Set once the object has left the workspace; the object stays in the
    /// world but the episode can no longer succeed.
    #[serde(default)]
    pub out_of_play: bool,
}

impl SimObject {
    pub fn base(&self) -> f64 {
        geometry::base_height(&self.shape, &self.pose)
    }

    /// Top of the vertical extent.
    pub fn top(&self) -> f64 {
        self.base() + self.shape.height()
    }

    pub fn footprint(&self) -> Vec<Vec2> {
        geometry::world_footprint(&self.shape, &self.pose)
    }

    pub fn patches(&self) -> Vec<SurfacePatch> {
        geometry::world_patches(&self.shape, &self.pose)
    }

    pub fn height_at(&self, q: Vec2) -> Option<f64> {
        geometry::height_at(&self.shape, &self.pose, q)
    }

    /// Segment the gripper center must be near for a grasp: the long-axis
    /// centerline for elongated footprints, the center of mass otherwise.
    pub fn grasp_line(&self) -> (Vec2, Vec2) {
        let h = self.shape.half_extents();
        let (long, short) = (h.x.max(h.y), h.x.min(h.y));
        if short > 0.0 && long / short >= ELONGATION_RATIO {
            let half = long - short;
            let axis = if h.x >= h.y { Vec2::new(half, 0.0) } else { Vec2::new(0.0, half) };
            (self.pose.to_world(-axis), self.pose.to_world(axis))
        } else {
            (self.pose.xy(), self.pose.xy())
        }
    }

    /// Direction (yaw) of the footprint's long axis.
    pub fn long_axis_yaw(&self) -> f64 {
        let h = self.shape.half_extents();
        if h.y > h.x {
            self.pose.yaw + PI / 2.0
        } else {
            self.pose.yaw
        }
    }
}

/// Held object plus the object's pose relative to the gripper frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub object: SimObject,
    pub offset: Vec2,
    pub yaw_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub holding: Option<Grasp>,
    pub max_open_width: f64,
}

impl GripperState {
    pub fn is_holding(&self) -> bool {
        self.holding.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    Pick,
    Place,
}

impl Primitive {
    /// Wire encoding: 0 pick, 1 place.
    pub fn to_f32(self) -> f32 {
        match self {
            Primitive::Pick => 0.0,
            Primitive::Place => 1.0,
        }
    }

    pub fn from_f32(v: f32) -> Option<Self> {
        if !v.is_finite() {
            None
        } else if v < 0.5 {
            Some(Primitive::Pick)
        } else {
            Some(Primitive::Place)
        }
    }
}

/// A primitive with a target gripper pose. `z = None` asks the world to
/// resolve the height with the local-maximum heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub primitive: Primitive,
    pub x: f64,
    pub y: f64,
    pub z: Option<f64>,
    pub theta: f64,
}

impl Action {
    pub fn pick(x: f64, y: f64, theta: f64) -> Self {
        Action { primitive: Primitive::Pick, x, y, z: None, theta }
    }

    pub fn place(x: f64, y: f64, theta: f64) -> Self {
        Action { primitive: Primitive::Place, x, y, z: None, theta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Grasped(u32),
    Miss,
    PlacedStable,
    PlacedToppled,
}

/// Workspace bounds in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { x_min: 0.25, x_max: 0.65, y_min: -0.2, y_max: 0.2, z_min: 0.0, z_max: 1.0 }
    }
}

impl Bounds {
    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: Vec<SimObject>,
    pub gripper: GripperState,
    pub rng: ChaCha8Rng,
    pub step_count: u32,
    pub next_id: u32,
    pub bounds: Bounds,
    pub half_rotation: bool,
}

impl WorldState {
    pub fn new(seed: u64, bounds: Bounds, max_open_width: f64, half_rotation: bool) -> Self {
        WorldState {
            objects: Vec::new(),
            gripper: GripperState { holding: None, max_open_width },
            rng: ChaCha8Rng::seed_from_u64(seed),
            step_count: 0,
            next_id: 0,
            bounds,
            half_rotation,
        }
    }

    /// Add an object with a fresh id; returns the id.
    pub fn spawn(&mut self, shape: Shape, pose: Pose, category: Category, movable: bool) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.objects.push(SimObject { id, shape, pose, category, movable, out_of_play: false });
        id
    }

    pub fn object(&self, id: u32) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: u32) -> Option<&mut SimObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn remove(&mut self, id: u32) -> Option<SimObject> {
        let idx = self.objects.iter().position(|o| o.id == id)?;
        Some(self.objects.remove(idx))
    }

    pub fn held(&self) -> Option<&SimObject> {
        self.gripper.holding.as_ref().map(|g| &g.object)
    }

    /// Movable objects in the world plus the held one.
    pub fn movable_count(&self) -> usize {
        self.objects.iter().filter(|o| o.movable).count() + usize::from(self.gripper.is_holding())
    }

    /// Highest surface anywhere in the axis-aligned square of half-width
    /// `half` around `center`.
    pub fn max_height_in_square(&self, center: Vec2, half: f64) -> f64 {
        let square = polygon::rect(center - Vec2::new(half, half), center + Vec2::new(half, half));
        surface_height(&surfaces_under(&self.objects, &square, None))
    }

    /// Support height directly under `obj`, ignoring anything above its base.
    pub fn support_height(&self, obj: &SimObject) -> f64 {
        let others = self.objects.iter().filter(|o| o.id != obj.id);
        surface_height(&surfaces_under(others, &obj.footprint(), Some(obj.base())))
    }

    /// Ids of movable objects not resting exactly on their support.
    pub fn unsettled(&self) -> Vec<u32> {
        self.objects
            .iter()
            .filter(|o| o.movable)
            .filter(|o| (o.base() - self.support_height(o)).abs() > SETTLE_TOLERANCE)
            .map(|o| o.id)
            .collect()
    }
}

/// Gripper height for a primitive at `(x, y)`: the highest surface around the
/// point, offset down for a pick and up (by half the held object plus a
/// clearance) for a place.
pub fn compute_z(
    world: &WorldState,
    x: f64,
    y: f64,
    primitive: Primitive,
    held_height: Option<f64>,
) -> Result<f64, SimError> {
    let h_max = world.max_height_in_square(Vec2::new(x, y), Z_REGION_HALF_WIDTH);
    match primitive {
        Primitive::Pick => Ok((h_max + Z_PICK_OFFSET).max(0.0)),
        Primitive::Place => {
            let held = held_height.ok_or(SimError::GripperEmpty)?;
            Ok(h_max + held / 2.0 + Z_PLACE_CLEAR)
        }
    }
}

/// Attempt to grasp the topmost object under `(x, y)`.
///
/// The gripper descends to `z`; the object is reachable if `z` does not pass
/// above its top (a gripper below the object's base is stopped by whatever
/// the object rests on, so that still reaches). The gripper center must lie
/// within [`GRASP_TOLERANCE`] of the grasp line and the footprint extent
/// across the jaws must fit the opening.
pub fn resolve_pick(world: &mut WorldState, x: f64, y: f64, z: f64, theta: f64) -> Result<Outcome, SimError> {
    if let Some(g) = &world.gripper.holding {
        return Err(SimError::GripperHolding(g.object.id));
    }
    let q = Vec2::new(x, y);
    let candidate = world
        .objects
        .iter()
        .filter_map(|o| o.height_at(q).map(|h| (o, h)))
        .max_by(|(a, ha), (b, hb)| ha.total_cmp(hb).then(a.base().total_cmp(&b.base())).then(b.id.cmp(&a.id)));
    let Some((obj, _)) = candidate else {
        return Ok(Outcome::Miss);
    };
    if !obj.movable || z > obj.top() + geometry::GEOM_EPS {
        return Ok(Outcome::Miss);
    }
    let (a, b) = obj.grasp_line();
    if polygon::point_segment_distance(q, a, b) > GRASP_TOLERANCE {
        return Ok(Outcome::Miss);
    }
    let across = Vec2::from_angle(theta).perp();
    if polygon::extent_along(&obj.footprint(), across) > world.gripper.max_open_width + geometry::GEOM_EPS {
        return Ok(Outcome::Miss);
    }
    let id = obj.id;
    let object = world.remove(id).expect("candidate is in the world");
    let offset = (object.pose.xy() - q).rotate(-theta);
    let yaw_offset = object.pose.yaw - theta;
    world.gripper.holding = Some(Grasp { object, offset, yaw_offset });
    settle(world);
    Ok(Outcome::Grasped(id))
}

/// Release the held object at gripper pose `(x, y, theta)`.
///
/// `z` is accepted for symmetry with the action format but does not affect
/// the result: the object always drops onto the highest surface under its
/// footprint.
pub fn resolve_place(world: &mut WorldState, x: f64, y: f64, _z: f64, theta: f64) -> Result<Outcome, SimError> {
    let grasp = world.gripper.holding.take().ok_or(SimError::GripperEmpty)?;
    let mut object = grasp.object;
    let center = Vec2::new(x, y) + grasp.offset.rotate(theta);
    object.pose.x = center.x;
    object.pose.y = center.y;
    object.pose.yaw = geometry::normalize_yaw(theta + grasp.yaw_offset, false)?;

    let half_height = object.shape.height() / 2.0;
    let mut toppled = false;
    for round in 0..MAX_TOPPLE_ROUNDS {
        let landing = analyze_landing(&world.objects, &object.footprint(), object.pose.xy());
        object.pose.z = landing.height + half_height;
        if landing.stable {
            break;
        }
        toppled = true;
        if round + 1 == MAX_TOPPLE_ROUNDS {
            log::debug!("object {} still unstable after {} topple rounds", object.id, MAX_TOPPLE_ROUNDS);
            break;
        }
        displace_from_supports(world, &mut object, &landing.supports);
    }
    world.objects.push(object);
    Ok(if toppled { Outcome::PlacedToppled } else { Outcome::PlacedStable })
}

/// Slide `object` away from the support centroid in [`TOPPLE_STEP`]
/// increments until its footprint clears every object in `supports`.
fn displace_from_supports(world: &WorldState, object: &mut SimObject, supports: &[u32]) {
    let support_objs: Vec<&SimObject> = world.objects.iter().filter(|o| supports.contains(&o.id)).collect();
    if support_objs.is_empty() {
        return;
    }
    let centroid = support_objs.iter().fold(Vec2::ZERO, |acc, o| acc + o.pose.xy()) * (1.0 / support_objs.len() as f64);
    let start = object.pose.xy();
    let delta = start - centroid;
    let dir = if delta.norm() < 1e-12 { Vec2::new(1.0, 0.0) } else { delta * (1.0 / delta.norm()) };
    let footprints: Vec<Vec<Vec2>> = support_objs.iter().map(|o| o.footprint()).collect();

    let mut prev = start;
    for k in 1..=MAX_TOPPLE_INCREMENTS {
        let c = world.bounds.clamp(start + dir * (TOPPLE_STEP * k as f64));
        object.pose.x = c.x;
        object.pose.y = c.y;
        let fp = object.footprint();
        let overlapping = footprints.iter().any(|s| polygon::overlap_area(&fp, s) > AREA_EPS);
        if !overlapping || c == prev {
            break;
        }
        prev = c;
    }
}

/// Drop every movable object onto its support until nothing moves.
///
/// Objects are visited by ascending base height, then id, so a drop is seen
/// by the objects resting above it within the same pass.
pub fn settle(world: &mut WorldState) {
    let passes = world.objects.len() + 1;
    for _ in 0..passes {
        let mut order: Vec<usize> = (0..world.objects.len()).filter(|&i| world.objects[i].movable).collect();
        order.sort_by(|&a, &b| {
            let (oa, ob) = (&world.objects[a], &world.objects[b]);
            oa.base().total_cmp(&ob.base()).then(oa.id.cmp(&ob.id))
        });
        let mut moved = false;
        for i in order {
            let support = world.support_height(&world.objects[i]);
            let obj = &mut world.objects[i];
            if obj.base() > support + SETTLE_TOLERANCE {
                obj.pose.z = support + obj.shape.height() / 2.0;
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
}

/// Result of one primitive: the action as executed and what happened.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub action: Action,
    pub resolved_z: f64,
    pub outcome: Outcome,
}

/// Execute one primitive: clip to the workspace, normalize the gripper
/// angle, resolve z if needed, dispatch, settle, and count the step.
pub fn step(world: &mut WorldState, action: &Action) -> Result<StepReport, SimError> {
    let p = world.bounds.clamp(Vec2::new(action.x, action.y));
    let theta = geometry::normalize_yaw(action.theta, world.half_rotation)?;
    let held_height = world.held().map(|o| o.shape.height());
    let z = match action.z {
        Some(z) if z.is_finite() => z,
        _ => compute_z(world, p.x, p.y, action.primitive, held_height)?,
    };
    let outcome = match action.primitive {
        Primitive::Pick => resolve_pick(world, p.x, p.y, z, theta)?,
        Primitive::Place => resolve_place(world, p.x, p.y, z, theta)?,
    };
    settle(world);
    world.step_count += 1;
    let executed = Action { primitive: action.primitive, x: p.x, y: p.y, z: Some(z), theta };
    Ok(StepReport { action: executed, resolved_z: z, outcome })
}
