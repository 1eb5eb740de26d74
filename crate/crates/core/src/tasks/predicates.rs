//! Geometric relations used by goal predicates. All are invariant under a
//! rigid motion of the whole scene.

use crate::geometry::polygon::{self, Vec2};
use crate::sim::support::SETTLE_TOLERANCE;
use crate::sim::SimObject;

/// Maximum horizontal COM offset between stacked objects.
pub const STACK_TOLERANCE: f64 = 0.015;
/// Center distance window for two objects "next to each other", in units of
/// the episode scale.
pub const ADJACENT_MIN: f64 = 0.03;
pub const ADJACENT_MAX: f64 = 0.05;

/// Base of `upper` meets the top of `lower`.
pub fn touches_top(upper: &SimObject, lower: &SimObject) -> bool {
    (upper.base() - lower.top()).abs() <= SETTLE_TOLERANCE
}

pub fn on_ground(obj: &SimObject) -> bool {
    obj.base().abs() <= SETTLE_TOLERANCE
}

/// `upper` sits on `lower` with centers aligned within [`STACK_TOLERANCE`].
pub fn on_top(upper: &SimObject, lower: &SimObject) -> bool {
    touches_top(upper, lower) && upper.pose.xy().distance(lower.pose.xy()) <= STACK_TOLERANCE
}

/// `objs` form a single stack on the ground (in any order).
pub fn is_stack(objs: &[&SimObject]) -> bool {
    let mut sorted: Vec<&SimObject> = objs.to_vec();
    sorted.sort_by(|a, b| a.base().total_cmp(&b.base()));
    match sorted.first() {
        None => false,
        Some(bottom) => on_ground(bottom) && sorted.windows(2).all(|w| on_top(w[1], w[0])),
    }
}

/// Two grounded objects of equal height whose centers are between
/// `ADJACENT_MIN·scale` and `ADJACENT_MAX·scale` apart.
pub fn adjacent(a: &SimObject, b: &SimObject, scale: f64) -> bool {
    let d = a.pose.xy().distance(b.pose.xy());
    (a.base() - b.base()).abs() <= SETTLE_TOLERANCE
        && (a.top() - b.top()).abs() <= SETTLE_TOLERANCE
        && d >= ADJACENT_MIN * scale - 1e-9
        && d <= ADJACENT_MAX * scale + 1e-9
}

/// `upper` rests on both `a` and `b`: its base meets both tops and its
/// footprint covers both centers.
pub fn rests_on_both(upper: &SimObject, a: &SimObject, b: &SimObject) -> bool {
    let fp = upper.footprint();
    let covers = |o: &SimObject| polygon::convex_contains(&fp, o.pose.xy(), 1e-9);
    touches_top(upper, a) && touches_top(upper, b) && covers(a) && covers(b)
}

/// True when `p` lies inside `obj`'s footprint shrunk by `margin`.
pub fn center_inside(obj: &SimObject, p: Vec2, margin: f64) -> bool {
    let local = obj.pose.to_local(p);
    let h = obj.shape.half_extents();
    local.x.abs() <= h.x - margin && local.y.abs() <= h.y - margin
}

/// Every footprint vertex of `obj` lies within `container`'s cavity.
pub fn inside_cavity(obj: &SimObject, container: &SimObject) -> bool {
    let Some(c) = container.shape.cavity_half_extents() else {
        return false;
    };
    obj.footprint().iter().all(|&p| {
        let l = container.pose.to_local(p);
        l.x.abs() <= c.x + 1e-9 && l.y.abs() <= c.y + 1e-9
    })
}
