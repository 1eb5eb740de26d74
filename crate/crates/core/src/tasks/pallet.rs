//! Stack boxes on a pallet in an interlocking pattern. A new box appears
//! after each correct placement.

use super::sampler::{self, Region, D_SEP};
use super::{EpisodeParams, Task, TaskError, TaskSpec, TaskState};
use crate::geometry::polygon::Vec2;
use crate::geometry::{yaw_distance, Shape};
use crate::planners::{self, PlanContext, PlannerError};
use crate::sim::{Action, Category, Outcome, SimObject, WorldState};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub const PALLET_SIZE: (f64, f64, f64) = (0.232, 0.192, 0.03);
pub const BOX_SIZE: (f64, f64, f64) = (0.072, 0.045, 0.045);
pub const BOXES_PER_LAYER: usize = 6;
pub const SLOT_POSITION_TOLERANCE: f64 = 0.01;
pub const SLOT_YAW_TOLERANCE: f64 = 10.0 * PI / 180.0;
pub const SLOT_BASE_TOLERANCE: f64 = 0.003;

/// Pallet-frame slot centers of a layer whose boxes run along the pallet's
/// x axis (even layers), and of the crosswise odd layers, before scaling.
const EVEN_LAYER: [(f64, f64); 6] =
    [(-0.073, -0.023), (0.0, -0.023), (0.073, -0.023), (-0.073, 0.023), (0.0, 0.023), (0.073, 0.023)];
const ODD_LAYER: [(f64, f64); 6] =
    [(-0.052, -0.037), (0.0, -0.037), (0.052, -0.037), (-0.052, 0.037), (0.0, 0.037), (0.052, 0.037)];

/// World-frame slot pose: box center, box yaw and base height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub xy: Vec2,
    pub yaw: f64,
    pub base: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalletState {
    /// Number of boxes placed so far.
    pub next_slot: usize,
    pub slots: Vec<Slot>,
    /// Box id occupying each slot.
    pub occupant: Vec<Option<u32>>,
    pub pallet: u32,
}

impl PalletState {
    /// Unfilled slots of the lowest layer that still has room.
    pub fn open_slots(&self) -> Vec<usize> {
        let layer = (0..self.slots.len() / BOXES_PER_LAYER)
            .find(|&l| (l * BOXES_PER_LAYER..(l + 1) * BOXES_PER_LAYER).any(|i| self.occupant[i].is_none()));
        match layer {
            None => Vec::new(),
            Some(l) => {
                (l * BOXES_PER_LAYER..(l + 1) * BOXES_PER_LAYER).filter(|&i| self.occupant[i].is_none()).collect()
            }
        }
    }

    pub fn is_placed(&self, id: u32) -> bool {
        self.occupant.contains(&Some(id))
    }
}

/// Slot table for `n` boxes on a pallet at `pallet`, boxes scaled by `s`.
pub fn slot_table(pallet: &SimObject, n: usize, s: f64) -> Vec<Slot> {
    let top = pallet.top();
    (0..n)
        .map(|i| {
            let layer = i / BOXES_PER_LAYER;
            let (x, y) = if layer.is_multiple_of(2) { EVEN_LAYER } else { ODD_LAYER }[i % BOXES_PER_LAYER];
            let yaw = pallet.pose.yaw + if layer.is_multiple_of(2) { 0.0 } else { FRAC_PI_2 };
            Slot { xy: pallet.pose.to_world(Vec2::new(x * s, y * s)), yaw, base: top + layer as f64 * BOX_SIZE.2 * s }
        })
        .collect()
}

pub fn matches_slot(obj: &SimObject, slot: &Slot) -> bool {
    obj.pose.xy().distance(slot.xy) <= SLOT_POSITION_TOLERANCE
        && yaw_distance(obj.pose.yaw, slot.yaw, PI) <= SLOT_YAW_TOLERANCE
        && (obj.base() - slot.base).abs() <= SLOT_BASE_TOLERANCE
}

#[derive(Clone, Debug)]
pub struct BoxPalletizing {
    spec: TaskSpec,
}

impl BoxPalletizing {
    pub fn new() -> Self {
        BoxPalletizing { spec: TaskSpec::new("box_palletizing", 18, 36, 40, false) }
    }

    fn box_shape(s: f64) -> Shape {
        Shape::cuboid(BOX_SIZE.0 * s, BOX_SIZE.1 * s, BOX_SIZE.2 * s)
    }

    fn spawn_box(world: &mut WorldState, params: &EpisodeParams) -> bool {
        let shape = Self::box_shape(params.scale);
        for _ in 0..10 {
            if let Some(pose) =
                sampler::sample_pose(world, &shape, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))
            {
                world.spawn(shape, pose, Category::Box, true);
                return true;
            }
        }
        log::warn!("no free pose for a new box");
        false
    }
}

impl Default for BoxPalletizing {
    fn default() -> Self {
        Self::new()
    }
}

impl Task for BoxPalletizing {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn optimal_steps(&self, n: usize) -> u32 {
        2 * n as u32
    }

    fn check_num_objects(&self, n: usize) -> Result<(), TaskError> {
        if [6, 12, 18].contains(&n) {
            Ok(())
        } else {
            Err(TaskError::NumObjects { task: self.spec.name.clone(), n, reason: "expected 6, 12 or 18".into() })
        }
    }

    fn init_episode(&self, world: &mut WorldState, params: &EpisodeParams) -> Result<TaskState, TaskError> {
        let s = params.scale;
        let pallet_id = sampler::with_rounds(world, &self.spec.name, |w| {
            let pallet = Shape::Slab { lx: PALLET_SIZE.0, ly: PALLET_SIZE.1, lz: PALLET_SIZE.2 };
            let pose = sampler::sample_pose(w, &pallet, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
            let id = w.spawn(pallet, pose, Category::Pallet, false);
            let shape = Self::box_shape(s);
            let pose = sampler::sample_pose(w, &shape, &Region::Workspace, D_SEP, &[], |w| params.yaw(&mut w.rng))?;
            w.spawn(shape, pose, Category::Box, true);
            Some(id)
        })?;
        let pallet = world.object(pallet_id).expect("pallet was spawned");
        let slots = slot_table(pallet, params.num_objects, s);
        Ok(TaskState::Pallet(PalletState { next_slot: 0, occupant: vec![None; slots.len()], slots, pallet: pallet_id }))
    }

    fn check_goal(&self, world: &WorldState, state: &TaskState) -> bool {
        let TaskState::Pallet(st) = state else { return false };
        st.next_slot == st.slots.len()
            && !world.gripper.is_holding()
            && world.objects.iter().all(|o| !o.out_of_play)
            && st
                .occupant
                .iter()
                .zip(&st.slots)
                .all(|(occ, slot)| occ.and_then(|id| world.object(id)).is_some_and(|o| matches_slot(o, slot)))
    }

    fn on_step(&self, world: &mut WorldState, state: &mut TaskState, params: &EpisodeParams, _outcome: Outcome) {
        let TaskState::Pallet(st) = state else { return };
        loop {
            let open = st.open_slots();
            let hit = world
                .objects
                .iter()
                .filter(|o| o.category == Category::Box && !o.out_of_play && !st.is_placed(o.id))
                .find_map(|o| open.iter().find(|&&i| matches_slot(o, &st.slots[i])).map(|&i| (o.id, i)));
            let Some((id, slot)) = hit else { break };
            st.occupant[slot] = Some(id);
            st.next_slot += 1;
            if st.next_slot < st.slots.len() {
                Self::spawn_box(world, params);
            }
        }
    }

    fn expert_action(&self, ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
        planners::pallet::next_action(ctx)
    }
}
