//! Exact shortest tours for a single-block warehouse.
//!
//! A tour from the origin to the depot is an Euler walk in a multigraph on
//! the aisle grid: every node has even degree except the origin and the
//! depot, and all used edges form one component. No edge is ever needed more
//! than twice, so a left-to-right dynamic program over aisles that tracks the
//! sideways edge multiplicities and how the open pieces are connected finds
//! the cheapest such multigraph. The tour is then read off with Hierholzer.

use std::collections::BTreeMap;

use super::{PickList, Route, RouteBuilder};
use crate::error::{Error, Result};
use crate::warehouse::{Position, WarehouseConfig, Zone};

/// Chain of special points in one aisle, front row to back row.
struct Aisle {
    /// Depths `0, interior.., L+1`.
    depths: Vec<usize>,
    /// Required degree parity per point.
    parity: Vec<u8>,
    /// The front / back row node must carry at least one edge.
    need_front: bool,
    need_back: bool,
}

/// Cheapest segment multiplicities for one way an aisle meets its rows.
#[derive(Clone)]
struct ChainChoice {
    cost: f64,
    mult: Vec<u8>,
}

/// Key: multiplicity at the front row, at the back row, and whether the
/// chain links the two rows.
type Interface = (u8, u8, bool);

impl Aisle {
    fn choices(&self, cfg: &WarehouseConfig) -> BTreeMap<Interface, ChainChoice> {
        let n_seg = self.depths.len() - 1;
        let seg_len: Vec<f64> = self
            .depths
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * cfg.slot_pitch)
            .collect();
        let mut out: BTreeMap<Interface, ChainChoice> = BTreeMap::new();
        for first in 0..2u8 {
            let mut par = Vec::with_capacity(n_seg);
            let mut p = first;
            par.push(p);
            for i in 1..n_seg {
                p ^= self.parity[i];
                par.push(p);
            }
            let base: Vec<u8> = par.iter().map(|&q| if q == 1 { 1 } else { 2 }).collect();
            // no gap, or a single unused even segment
            let gaps = std::iter::once(None).chain((0..n_seg).filter(|&i| par[i] == 0).map(Some));
            for gap in gaps {
                let mut mult = base.clone();
                if let Some(g) = gap {
                    mult[g] = 0;
                }
                let cost: f64 = mult.iter().zip(&seg_len).map(|(&m, &l)| m as f64 * l).sum();
                let key = (mult[0], mult[n_seg - 1], gap.is_none());
                if out.get(&key).is_none_or(|c| cost < c.cost) {
                    out.insert(key, ChainChoice { cost, mult });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct State {
    xa: u8,
    xb: u8,
    conn: bool,
    closed: bool,
}

impl State {
    const COUNT: usize = 36;

    fn index(self) -> usize {
        ((self.xa as usize * 3 + self.xb as usize) * 2 + self.conn as usize) * 2 + self.closed as usize
    }
}

struct Uf([usize; 4]);

impl Uf {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Successor state, or `None` when the combination is infeasible.
fn transition(s: State, aisle: &Aisle, c: Interface, ya: u8, yb: u8) -> Option<State> {
    let (da, db, linked) = c;
    let deg_f = s.xa + da + ya;
    let deg_b = s.xb + db + yb;
    if deg_f % 2 != aisle.parity[0] || deg_b % 2 != *aisle.parity.last().unwrap() {
        return None;
    }
    if (aisle.need_front && deg_f == 0) || (aisle.need_back && deg_b == 0) {
        return None;
    }
    if s.closed {
        return (deg_f == 0 && deg_b == 0 && aisle.depths.len() == 2).then_some(s);
    }
    const LF: usize = 0;
    const LB: usize = 1;
    const F: usize = 2;
    const B: usize = 3;
    let mut uf = Uf([0, 1, 2, 3]);
    if s.xa > 0 {
        uf.union(LF, F);
    }
    if s.xb > 0 {
        uf.union(LB, B);
    }
    if s.conn {
        uf.union(LF, LB);
    }
    if linked {
        uf.union(F, B);
    }
    let same = uf.find(F) == uf.find(B);
    let mut active = Vec::with_capacity(2);
    if deg_f > 0 {
        active.push((uf.find(F), ya > 0 || (same && yb > 0)));
    }
    if deg_b > 0 && !(deg_f > 0 && same) {
        active.push((uf.find(B), yb > 0 || (same && ya > 0)));
    }
    let closing = active.iter().filter(|(_, cont)| !cont).count();
    if closing > 0 && !(closing == 1 && active.len() == 1 && ya == 0 && yb == 0) {
        return None;
    }
    Some(State {
        xa: ya,
        xb: yb,
        conn: ya > 0 && yb > 0 && same,
        closed: closing == 1,
    })
}

#[derive(Clone, Copy)]
struct Back {
    prev: usize,
    chain: Interface,
    ya: u8,
    yb: u8,
}

fn build_aisles(list: &PickList, cfg: &WarehouseConfig) -> Vec<Aisle> {
    let back = cfg.back_depth();
    let depot = cfg.depot();
    let mut aisles = Vec::with_capacity(cfg.n_aisles);
    for j in 1..=cfg.n_aisles {
        let mut interior: Vec<usize> = list
            .picks
            .iter()
            .filter(|p| p.location.aisle == j)
            .map(|p| p.location.depth)
            .collect();
        let o = list.origin;
        if o.aisle == j && o.zone == Zone::InAisle {
            interior.push(o.depth);
        }
        interior.sort_unstable();
        interior.dedup();
        let mut depths = vec![0];
        depths.extend(&interior);
        depths.push(back);
        let mut parity = vec![0u8; depths.len()];
        let mut flip = |p: Position| {
            if p.aisle == j {
                let i = depths.iter().position(|&d| d == p.depth).expect("point listed");
                parity[i] ^= 1;
            }
        };
        flip(o);
        flip(depot);
        aisles.push(Aisle {
            need_front: (o.aisle == j && o.depth == 0) || depot.aisle == j,
            need_back: o.aisle == j && o.depth == back,
            depths,
            parity,
        });
    }
    aisles
}

/// Shortest route from the list's origin through every pick to the depot.
pub fn optimal_route(list: &PickList, cfg: &WarehouseConfig) -> Result<Route> {
    if list.picks.is_empty() {
        return Err(Error::EmptyPickList);
    }
    list.validate(cfg)?;
    let aisles = build_aisles(list, cfg);
    let choices: Vec<_> = aisles.iter().map(|a| a.choices(cfg)).collect();
    let n = cfg.n_aisles;

    let mut cost = vec![f64::INFINITY; State::COUNT];
    let start = State {
        xa: 0,
        xb: 0,
        conn: false,
        closed: false,
    };
    cost[start.index()] = 0.0;
    let mut states: Vec<Option<State>> = vec![None; State::COUNT];
    states[start.index()] = Some(start);
    let mut backs: Vec<Vec<Option<Back>>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut next_cost = vec![f64::INFINITY; State::COUNT];
        let mut next_states: Vec<Option<State>> = vec![None; State::COUNT];
        let mut back = vec![None; State::COUNT];
        let last = j + 1 == n;
        for (si, s) in states.iter().enumerate() {
            let Some(s) = *s else { continue };
            for (&c, choice) in &choices[j] {
                for ya in 0..3u8 {
                    for yb in 0..3u8 {
                        if last && (ya > 0 || yb > 0) {
                            continue;
                        }
                        let Some(t) = transition(s, &aisles[j], c, ya, yb) else {
                            continue;
                        };
                        let total = cost[si] + choice.cost + (ya + yb) as f64 * cfg.inter_aisle_gap;
                        let ti = t.index();
                        if total < next_cost[ti] {
                            next_cost[ti] = total;
                            next_states[ti] = Some(t);
                            back[ti] = Some(Back {
                                prev: si,
                                chain: c,
                                ya,
                                yb,
                            });
                        }
                    }
                }
            }
        }
        cost = next_cost;
        states = next_states;
        backs.push(back);
    }

    let end = State {
        xa: 0,
        xb: 0,
        conn: false,
        closed: true,
    };
    if !cost[end.index()].is_finite() {
        return Err(Error::InvalidInput("no feasible tour found".into()));
    }

    // recover multiplicities
    let mut chain_mult: Vec<Vec<u8>> = vec![Vec::new(); n];
    let mut side: Vec<(u8, u8)> = vec![(0, 0); n];
    let mut si = end.index();
    for j in (0..n).rev() {
        let b = backs[j][si].expect("reachable state has a predecessor");
        chain_mult[j] = choices[j][&b.chain].mult.clone();
        side[j] = (b.ya, b.yb);
        si = b.prev;
    }

    let walk = euler_walk(list, cfg, &aisles, &chain_mult, &side);
    let mut builder = RouteBuilder::new(list.origin, cfg);
    for p in walk.into_iter().skip(1) {
        builder.move_to(p);
    }
    let route = builder.finish(&list.picks)?;
    debug_assert!((route.length - cost[end.index()]).abs() < 1e-6);
    Ok(route)
}

fn euler_walk(
    list: &PickList,
    cfg: &WarehouseConfig,
    aisles: &[Aisle],
    chain_mult: &[Vec<u8>],
    side: &[(u8, u8)],
) -> Vec<Position> {
    let mut nodes: Vec<Position> = Vec::new();
    let mut offset = Vec::with_capacity(aisles.len());
    for (j, a) in aisles.iter().enumerate() {
        offset.push(nodes.len());
        nodes.extend(a.depths.iter().map(|&d| cfg.position_at(j + 1, d)));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    let mut n_edges = 0;
    let mut add = |u: usize, v: usize, m: u8| {
        for _ in 0..m {
            adj[u].push((v, n_edges));
            adj[v].push((u, n_edges));
            n_edges += 1;
        }
    };
    for (j, a) in aisles.iter().enumerate() {
        for (i, &m) in chain_mult[j].iter().enumerate() {
            add(offset[j] + i, offset[j] + i + 1, m);
        }
        if j + 1 < aisles.len() {
            let top = a.depths.len() - 1;
            let next_top = aisles[j + 1].depths.len() - 1;
            add(offset[j], offset[j + 1], side[j].0);
            add(offset[j] + top, offset[j + 1] + next_top, side[j].1);
        }
    }
    let start = nodes
        .iter()
        .position(|p| *p == list.origin)
        .expect("origin is a graph node");

    // iterative Hierholzer
    let mut used = vec![false; n_edges];
    let mut ptr = vec![0usize; nodes.len()];
    let mut stack = vec![start];
    let mut out = Vec::with_capacity(n_edges + 1);
    while let Some(&v) = stack.last() {
        let mut advanced = false;
        while ptr[v] < adj[v].len() {
            let (w, e) = adj[v][ptr[v]];
            ptr[v] += 1;
            if !used[e] {
                used[e] = true;
                stack.push(w);
                advanced = true;
                break;
            }
        }
        if !advanced {
            out.push(nodes[v]);
            stack.pop();
        }
    }
    out.reverse();
    out
}
