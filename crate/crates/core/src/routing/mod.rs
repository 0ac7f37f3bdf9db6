//! Static tours over a pick list: exact optimal routing plus the S-shape and
//! largest-gap heuristics.
//!
//! A [`Route`] is stored densely: every consecutive pair of positions is one
//! legal unit move (one depth step inside an aisle, or one aisle step along a
//! cross-aisle). That is what the re-routing simulators walk.

mod exact;
mod heuristics;

use serde::{Deserialize, Serialize};

pub use exact::optimal_route;
pub use heuristics::{largest_gap_route, s_shape_route};

use crate::error::{Error, Result};
use crate::orders::OrderId;
use crate::warehouse::{Position, SlotLocation, WarehouseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pick {
    pub order: OrderId,
    pub location: SlotLocation,
}

/// Picks to collect, starting from `origin` and ending at the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct PickList {
    pub origin: Position,
    pub picks: Vec<Pick>,
}

impl PickList {
    pub fn new(origin: Position, picks: Vec<Pick>) -> Self {
        Self { origin, picks }
    }

    /// Anonymous picks at the given slots, ids numbered from zero.
    pub fn from_slots(origin: Position, slots: &[SlotLocation]) -> Self {
        let picks = slots
            .iter()
            .enumerate()
            .map(|(i, s)| Pick {
                order: i as OrderId,
                location: *s,
            })
            .collect();
        Self { origin, picks }
    }

    pub fn validate(&self, cfg: &WarehouseConfig) -> Result<()> {
        cfg.check_position(self.origin)?;
        for p in &self.picks {
            cfg.check_slot(p.location)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Dense unit-move path from the origin to the depot.
    pub steps: Vec<Position>,
    /// Index into `steps` at which each pick is collected.
    pub visits: Vec<(usize, Pick)>,
    /// Meters.
    pub length: f64,
}

impl Route {
    pub fn origin(&self) -> Position {
        self.steps[0]
    }

    pub fn end(&self) -> Position {
        *self.steps.last().expect("routes are never empty")
    }

    /// Corner points only: the origin, every change of direction, and the end.
    pub fn waypoints(&self) -> Vec<Position> {
        let mut out = vec![self.steps[0]];
        for w in self.steps.windows(3) {
            let delta = |a: Position, b: Position| {
                (b.aisle as i64 - a.aisle as i64, b.depth as i64 - a.depth as i64)
            };
            if delta(w[0], w[1]) != delta(w[1], w[2]) {
                out.push(w[1]);
            }
        }
        if self.steps.len() > 1 {
            out.push(self.end());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Router {
    Optimal,
    SShape,
    LargestGap,
}

impl Router {
    /// Like the individual routers but also accepts an empty list, which
    /// yields the shortest walk to the depot.
    pub fn plan(self, list: &PickList, cfg: &WarehouseConfig) -> Result<Route> {
        if list.picks.is_empty() {
            list.validate(cfg)?;
            let mut b = RouteBuilder::new(list.origin, cfg);
            b.move_to(cfg.depot());
            return b.finish(&[]);
        }
        match self {
            Router::Optimal => optimal_route(list, cfg),
            Router::SShape => s_shape_route(list, cfg),
            Router::LargestGap => largest_gap_route(list, cfg),
        }
    }
}

fn unit_length(a: Position, b: Position, cfg: &WarehouseConfig) -> Option<f64> {
    if a.aisle == b.aisle && a.depth.abs_diff(b.depth) == 1 {
        Some(cfg.slot_pitch)
    } else if a.depth == b.depth && a.is_cross() && b.is_cross() && a.aisle.abs_diff(b.aisle) == 1 {
        Some(cfg.inter_aisle_gap)
    } else {
        None
    }
}

/// Independent validity check: legal unit moves, starts at the origin, ends
/// at the depot, collects every pick at its own slot, and the stored length
/// equals the re-summed walk.
pub fn check_route(route: &Route, list: &PickList, cfg: &WarehouseConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidInput(msg));
    if route.steps.first() != Some(&list.origin) {
        return bad("route does not start at the origin".into());
    }
    if route.steps.last() != Some(&cfg.depot()) {
        return bad("route does not end at the depot".into());
    }
    let mut total = 0.0;
    for (i, w) in route.steps.windows(2).enumerate() {
        cfg.check_position(w[1])?;
        match unit_length(w[0], w[1], cfg) {
            Some(d) => total += d,
            None => return bad(format!("illegal move {} -> {} at step {i}", w[0], w[1])),
        }
    }
    if (total - route.length).abs() > 1e-9 * total.max(1.0) {
        return bad(format!("stored length {} differs from walked {}", route.length, total));
    }
    let mut want: Vec<OrderId> = list.picks.iter().map(|p| p.order).collect();
    let mut got: Vec<OrderId> = route.visits.iter().map(|(_, p)| p.order).collect();
    want.sort_unstable();
    got.sort_unstable();
    if want != got {
        return bad("route does not cover exactly the listed picks".into());
    }
    for (idx, p) in &route.visits {
        if route.steps.get(*idx).copied() != Some(p.location.position()) {
            return bad(format!("order {} collected away from its slot", p.order));
        }
    }
    Ok(())
}

/// The part of `route` from the first time it reaches `current`.
pub fn route_remaining(route: &Route, current: Position, cfg: &WarehouseConfig) -> Result<Route> {
    let start = route
        .steps
        .iter()
        .position(|p| *p == current)
        .ok_or_else(|| Error::OffRoute(current.to_string()))?;
    Ok(route.suffix(start, cfg))
}

impl Route {
    /// The part of the route from step `start` on, keeping the picks still ahead.
    pub fn suffix(&self, start: usize, cfg: &WarehouseConfig) -> Route {
        let steps = self.steps[start..].to_vec();
        let visits = self
            .visits
            .iter()
            .filter(|(i, _)| *i >= start)
            .map(|(i, p)| (i - start, *p))
            .collect();
        let length = steps
            .windows(2)
            .map(|w| unit_length(w[0], w[1], cfg).expect("route steps are unit moves"))
            .sum();
        Route { steps, visits, length }
    }
}

/// Builds dense routes one target at a time.
pub(crate) struct RouteBuilder<'a> {
    cfg: &'a WarehouseConfig,
    steps: Vec<Position>,
}

impl<'a> RouteBuilder<'a> {
    pub(crate) fn new(origin: Position, cfg: &'a WarehouseConfig) -> Self {
        Self {
            cfg,
            steps: vec![origin],
        }
    }

    pub(crate) fn here(&self) -> Position {
        *self.steps.last().expect("builder starts with the origin")
    }

    fn vertical(&mut self, depth: usize) {
        let mut p = self.here();
        while p.depth != depth {
            let d = if p.depth < depth { p.depth + 1 } else { p.depth - 1 };
            p = self.cfg.position_at(p.aisle, d);
            self.steps.push(p);
        }
    }

    fn horizontal(&mut self, aisle: usize) {
        let mut p = self.here();
        while p.aisle != aisle {
            p.aisle = if p.aisle < aisle { p.aisle + 1 } else { p.aisle - 1 };
            self.steps.push(p);
        }
    }

    /// Shortest walk to `target`; equal options go through the front cross-aisle.
    pub(crate) fn move_to(&mut self, target: Position) {
        let here = self.here();
        if here.aisle != target.aisle {
            let back = self.cfg.back_depth();
            let via_front = here.depth + target.depth;
            let via_back = (back - here.depth) + (back - target.depth);
            self.vertical(if via_front <= via_back { 0 } else { back });
            self.horizontal(target.aisle);
        }
        self.vertical(target.depth);
    }

    pub(crate) fn length(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| unit_length(w[0], w[1], self.cfg).expect("builder only makes unit moves"))
            .sum()
    }

    /// Assigns every pick to the first time the path passes its slot.
    pub(crate) fn finish(self, picks: &[Pick]) -> Result<Route> {
        let length = self.length();
        let mut visits = Vec::with_capacity(picks.len());
        for p in picks {
            let pos = p.location.position();
            let idx = self
                .steps
                .iter()
                .position(|s| *s == pos)
                .ok_or_else(|| Error::OffRoute(pos.to_string()))?;
            visits.push((idx, *p));
        }
        visits.sort_by_key(|(i, p)| (*i, p.order));
        Ok(Route {
            steps: self.steps,
            visits,
            length,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depot_leg_for_empty_list() {
        let cfg = WarehouseConfig::default();
        let list = PickList::new(Position::in_aisle(2, 14), vec![]);
        let r = Router::Optimal.plan(&list, &cfg).unwrap();
        check_route(&r, &list, &cfg).unwrap();
        assert_eq!(r.length, 14.0 + 12.0);
    }

    #[test]
    fn waypoints_compress_straight_runs() {
        let cfg = WarehouseConfig::default();
        let list = PickList::from_slots(cfg.depot(), &[SlotLocation::new(7, 3)]);
        let r = s_shape_route(&list, &cfg).unwrap();
        assert_eq!(
            r.waypoints(),
            vec![Position::front(6), Position::front(7), Position::in_aisle(7, 3), Position::front(7), Position::front(6)]
        );
    }

    #[test]
    fn off_route_position_rejected() {
        let cfg = WarehouseConfig::default();
        let list = PickList::from_slots(cfg.depot(), &[SlotLocation::new(6, 3)]);
        let r = optimal_route(&list, &cfg).unwrap();
        assert!(matches!(
            route_remaining(&r, Position::front(1), &cfg),
            Err(Error::OffRoute(_))
        ));
    }
}
