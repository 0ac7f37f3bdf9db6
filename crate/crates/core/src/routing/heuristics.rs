//! S-shape and largest-gap tours.
//!
//! Both start from a cross-aisle. A picker that is inside an aisle first
//! clears its own aisle on the way out through the front or the back; both
//! exits are tried and the shorter tour kept (the front wins ties).

use std::collections::BTreeMap;

use super::{Pick, PickList, Route, RouteBuilder};
use crate::error::{Error, Result};
use crate::warehouse::{Position, WarehouseConfig};

/// Pick depths per aisle, ascending.
type ByAisle = BTreeMap<usize, Vec<usize>>;

fn group(picks: &[Pick]) -> ByAisle {
    let mut m: ByAisle = BTreeMap::new();
    for p in picks {
        m.entry(p.location.aisle).or_default().push(p.location.depth);
    }
    for d in m.values_mut() {
        d.sort_unstable();
        d.dedup();
    }
    m
}

fn with_exits(
    list: &PickList,
    cfg: &WarehouseConfig,
    tour: fn(&mut RouteBuilder, &ByAisle, &WarehouseConfig),
) -> Result<Route> {
    if list.picks.is_empty() {
        return Err(Error::EmptyPickList);
    }
    list.validate(cfg)?;
    let o = list.origin;
    if o.is_cross() {
        let mut b = RouteBuilder::new(o, cfg);
        tour(&mut b, &group(&list.picks), cfg);
        b.move_to(cfg.depot());
        return b.finish(&list.picks);
    }
    let mut rest = group(&list.picks);
    let own = rest.remove(&o.aisle).unwrap_or_default();
    let mut best: Option<Route> = None;
    for exit in [0, cfg.back_depth()] {
        let mut b = RouteBuilder::new(o, cfg);
        // the farthest own pick behind the exit direction comes first
        let behind = if exit == 0 {
            own.iter().copied().filter(|&d| d > o.depth).max()
        } else {
            own.iter().copied().filter(|&d| d < o.depth).min()
        };
        if let Some(d) = behind {
            b.move_to(Position::in_aisle(o.aisle, d));
        }
        b.move_to(cfg.position_at(o.aisle, exit));
        tour(&mut b, &rest, cfg);
        b.move_to(cfg.depot());
        let r = b.finish(&list.picks)?;
        if best.as_ref().is_none_or(|cur| r.length < cur.length) {
            best = Some(r);
        }
    }
    Ok(best.expect("two candidates built"))
}

fn row(cfg: &WarehouseConfig, aisle: usize, front: bool) -> Position {
    if front {
        Position::front(aisle)
    } else {
        Position::back(aisle, cfg)
    }
}

/// Enters `aisle` from the given row up to `depth` and comes back.
fn dip(b: &mut RouteBuilder, cfg: &WarehouseConfig, aisle: usize, front: bool, depth: usize) {
    b.move_to(row(cfg, aisle, front));
    b.move_to(Position::in_aisle(aisle, depth));
    b.move_to(row(cfg, aisle, front));
}

fn s_shape_tour(b: &mut RouteBuilder, picks: &ByAisle, cfg: &WarehouseConfig) {
    let mut at_front = b.here().depth == 0;
    let n = picks.len();
    for (i, (&aisle, depths)) in picks.iter().enumerate() {
        b.move_to(row(cfg, aisle, at_front));
        if i + 1 == n && at_front {
            dip(b, cfg, aisle, true, *depths.last().expect("non-empty"));
        } else {
            b.move_to(row(cfg, aisle, !at_front));
            at_front = !at_front;
        }
    }
}

/// Visits aisles with picks in increasing order, traversing each one fully
/// and alternating direction. A last aisle entered from the front is left
/// through the front again.
pub fn s_shape_route(list: &PickList, cfg: &WarehouseConfig) -> Result<Route> {
    with_exits(list, cfg, s_shape_tour)
}

/// Deepest depth served from the front and shallowest depth served from the
/// back, split at the largest gap. Among equal gaps the one nearest the back
/// is skipped, so ties are served from the front.
pub(crate) fn split_at_largest_gap(depths: &[usize], back: usize) -> (Option<usize>, Option<usize>) {
    let mut points = Vec::with_capacity(depths.len() + 2);
    points.push(0);
    points.extend_from_slice(depths);
    points.push(back);
    let mut best = 0;
    for i in 1..points.len() - 1 {
        if points[i + 1] - points[i] >= points[best + 1] - points[best] {
            best = i;
        }
    }
    let lower = (best > 0).then(|| points[best]);
    let upper = (best + 1 < points.len() - 1).then(|| points[best + 1]);
    (lower, upper)
}

fn largest_gap_tour(b: &mut RouteBuilder, picks: &ByAisle, cfg: &WarehouseConfig) {
    let back = cfg.back_depth();
    let near_front = b.here().depth == 0;
    let aisles: Vec<usize> = picks.keys().copied().collect();
    match aisles.as_slice() {
        [] => {}
        [a] => {
            let d = &picks[a];
            if near_front {
                dip(b, cfg, *a, true, *d.last().expect("non-empty"));
            } else {
                b.move_to(row(cfg, *a, false));
                b.move_to(row(cfg, *a, true));
            }
        }
        [first, .., last] => {
            // part of an aisle served from the near row and from the far row
            let near_part = |a: usize| {
                let (lo, hi) = split_at_largest_gap(&picks[&a], back);
                if near_front {
                    lo
                } else {
                    hi
                }
            };
            let far_part = |a: usize| {
                let (lo, hi) = split_at_largest_gap(&picks[&a], back);
                if near_front {
                    hi
                } else {
                    lo
                }
            };
            let middle = &aisles[1..aisles.len() - 1];
            let mut served_near = Vec::new();
            // on the way out, serve near parts of aisles that are passed
            let start = b.here().aisle;
            for &a in middle.iter().rev().filter(|&&a| a < start) {
                if let Some(d) = near_part(a) {
                    dip(b, cfg, a, near_front, d);
                    served_near.push(a);
                }
            }
            b.move_to(row(cfg, *first, near_front));
            b.move_to(row(cfg, *first, !near_front));
            for &a in middle {
                if let Some(d) = far_part(a) {
                    dip(b, cfg, a, !near_front, d);
                }
            }
            b.move_to(row(cfg, *last, !near_front));
            b.move_to(row(cfg, *last, near_front));
            for &a in middle.iter().rev() {
                if served_near.contains(&a) {
                    continue;
                }
                if let Some(d) = near_part(a) {
                    dip(b, cfg, a, near_front, d);
                }
            }
        }
    }
}

/// Traverses the first and last aisles with picks fully; every aisle in
/// between is entered from both cross-aisles up to its largest gap between
/// adjacent picks, which is never crossed.
pub fn largest_gap_route(list: &PickList, cfg: &WarehouseConfig) -> Result<Route> {
    with_exits(list, cfg, largest_gap_tour)
}
