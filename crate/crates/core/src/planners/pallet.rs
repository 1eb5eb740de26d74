//! Waypoint expert for box palletizing: fill the pallet slot by slot.

use super::{pick_through, PlanContext, PlannerError};
use crate::sim::{Action, Category};
use crate::tasks::TaskState;

pub fn next_action(ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
    let TaskState::Pallet(st) = ctx.state else {
        return Err(PlannerError::Stuck("missing pallet state".into()));
    };
    if ctx.world.held().is_some() {
        return match st.open_slots().first() {
            Some(&i) => ctx.place_at(st.slots[i].xy, st.slots[i].yaw),
            None => ctx.relocate_held(),
        };
    }
    let next = ctx
        .world
        .objects
        .iter()
        .filter(|o| o.category == Category::Box && !o.out_of_play && !st.is_placed(o.id))
        .min_by_key(|o| o.id)
        .ok_or_else(|| PlannerError::Stuck("no loose box".into()))?;
    Ok(pick_through(ctx, next))
}
