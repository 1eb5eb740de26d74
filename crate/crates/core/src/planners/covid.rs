//! Waypoint expert for the swab test: present a swab, present a tube, then
//! collect the used tube.

use super::{pick_through, PlanContext, PlannerError};
use crate::geometry::polygon::Vec2;
use crate::sim::{Action, Category};
use crate::tasks::covid::{present_spot, rests_in, USED_ROWS};
use crate::tasks::TaskState;

/// A used-box row is taken when a tube center lies this close to it.
pub const ROW_OCCUPIED: f64 = 0.015;

pub fn next_action(ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
    let TaskState::Covid(st) = ctx.state else {
        return Err(PlannerError::Stuck("missing test state".into()));
    };
    let world = ctx.world;
    let fixture = |id| world.object(id).ok_or_else(|| PlannerError::Stuck(format!("fixture {id} missing")));
    let (test, used) = (fixture(st.test_area)?, fixture(st.used_box)?);

    if let Some(held) = world.held() {
        return match held.category {
            Category::Swab | Category::Tube => ctx.place_at(present_spot(test, held.category), test.pose.yaw),
            Category::UsedTube => {
                let row = USED_ROWS.iter().map(|&y| used.pose.to_world(Vec2::new(0.0, y))).find(|r| {
                    !world
                        .objects
                        .iter()
                        .any(|o| o.category == Category::UsedTube && o.pose.xy().distance(*r) < ROW_OCCUPIED)
                });
                match row {
                    Some(r) => ctx.place_at(r, used.pose.yaw),
                    None => ctx.relocate_held(),
                }
            }
            _ => ctx.relocate_held(),
        };
    }

    let items = |cat: Category| world.objects.iter().filter(move |o| o.category == cat);
    let target = if let Some(t) = items(Category::UsedTube).filter(|o| !rests_in(o, used)).min_by_key(|o| o.id) {
        t
    } else if !items(Category::Swab).any(|o| rests_in(o, test)) {
        items(Category::Swab).min_by_key(|o| o.id).ok_or_else(|| PlannerError::Stuck("no swab left".into()))?
    } else {
        items(Category::Tube)
            .filter(|o| !rests_in(o, test))
            .min_by_key(|o| o.id)
            .ok_or_else(|| PlannerError::Stuck("no tube left".into()))?
    };
    Ok(pick_through(ctx, target))
}
