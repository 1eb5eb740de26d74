//! Waypoint experts for bin packing and bottle arrangement.

use super::{pick_through, PlanContext, PlannerError};
use crate::geometry::polygon::{self, Vec2};
use crate::sim::support::{surface_height, surfaces_under};
use crate::sim::{Action, Category, SimObject};
use crate::tasks::bin_packing::{BinPacking, CELLS, CELL_HALF};
use crate::tasks::bottles::BottleArrangement;
use crate::tasks::predicates::inside_cavity;

/// A bottle cell is taken when a bottle center lies this close to it.
pub const CELL_OCCUPIED: f64 = 0.03;

fn stuck(msg: &str) -> PlannerError {
    PlannerError::Stuck(msg.to_string())
}

/// Surface height over bin cell `i`.
fn cell_height(ctx: &PlanContext<'_>, bin: &SimObject, i: usize) -> f64 {
    let (cx, cy) = CELLS[i];
    let (hx, hy) = CELL_HALF;
    let rect: Vec<Vec2> = polygon::rect(Vec2::new(cx - hx, cy - hy), Vec2::new(cx + hx, cy + hy))
        .into_iter()
        .map(|p| bin.pose.to_world(p))
        .collect();
    surface_height(&surfaces_under(&ctx.world.objects, &rect, None))
}

/// Largest block first, each into the lowest cell that keeps it below the
/// rim.
pub fn bin_packing(ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
    let world = ctx.world;
    let bin = BinPacking::bin(world).ok_or_else(|| stuck("no bin"))?;
    if let Some(held) = world.held() {
        let h = held.shape.height();
        let cells = BinPacking::cells(bin);
        let best = (0..cells.len())
            .map(|i| (i, cell_height(ctx, bin, i)))
            .filter(|&(_, z)| z + h <= bin.top() + 1e-9)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        return match best {
            Some((i, _)) => ctx.place_at(cells[i], bin.pose.yaw),
            None => ctx.relocate_held(),
        };
    }
    let next = world
        .objects
        .iter()
        .filter(|o| o.movable && !BinPacking::is_packed(o, bin))
        .max_by(|a, b| {
            let (fa, fb) = (polygon::area(&a.footprint()), polygon::area(&b.footprint()));
            fa.total_cmp(&fb).then(b.id.cmp(&a.id))
        })
        .ok_or_else(|| stuck("every block is packed"))?;
    Ok(pick_through(ctx, next))
}

/// Stand bottles in the tray cells in order.
pub fn bottle_arrangement(ctx: &mut PlanContext<'_>) -> Result<Action, PlannerError> {
    let world = ctx.world;
    let tray = BottleArrangement::tray(world).ok_or_else(|| stuck("no tray"))?;
    if world.held().is_some() {
        let free = BottleArrangement::cells(tray).into_iter().find(|c| {
            !world.objects.iter().any(|o| o.category == Category::Bottle && o.pose.xy().distance(*c) < CELL_OCCUPIED)
        });
        return match free {
            Some(c) => ctx.place_at(c, tray.pose.yaw),
            None => ctx.relocate_held(),
        };
    }
    let next = world
        .objects
        .iter()
        .filter(|o| o.movable && !inside_cavity(o, tray))
        .min_by_key(|o| o.id)
        .ok_or_else(|| stuck("every bottle is in the tray"))?;
    Ok(pick_through(ctx, next))
}
