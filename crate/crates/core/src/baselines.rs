//! Batching and re-routing baselines driven by the same arrival streams as the
//! agent.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ShiftMetrics;
use crate::orders::{Ledger, OrderId, OrderSource};
use crate::routing::{Pick, PickList, Route, Router};
use crate::warehouse::{Position, WarehouseConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub name: String,
    /// Pending orders needed before an idle picker leaves the depot.
    pub initial_pick_size: usize,
    /// Whether a tour may be re-planned while the picker is in a cross-aisle.
    pub reroute_cross_aisle: bool,
    pub router: Router,
}

impl BaselineSpec {
    pub fn new(name: &str, k: usize, reroute_cross_aisle: bool, router: Router) -> Self {
        Self {
            name: name.to_owned(),
            initial_pick_size: k,
            reroute_cross_aisle,
            router,
        }
    }

    /// The seven reference policies, in table order.
    pub fn canonical(cfg: &WarehouseConfig) -> Vec<Self> {
        let k_mid = (cfg.capacity / 4).max(1);
        vec![
            Self::new("baseline1", cfg.capacity, false, Router::Optimal),
            Self::new("baseline2", k_mid, false, Router::Optimal),
            Self::new("baseline3", k_mid, true, Router::Optimal),
            Self::new("baseline4", 1, false, Router::Optimal),
            Self::new("baseline5", 1, true, Router::Optimal),
            Self::new("s_shape", 1, true, Router::SShape),
            Self::new("largest_gap", 1, true, Router::LargestGap),
        ]
    }

    pub fn by_name(name: &str, cfg: &WarehouseConfig) -> Result<Self> {
        let key = name.to_ascii_lowercase().replace(['-', ' '], "_");
        Self::canonical(cfg)
            .into_iter()
            .find(|s| s.name == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown baseline {name:?}")))
    }

    pub fn validate(&self, cfg: &WarehouseConfig) -> Result<()> {
        if self.initial_pick_size == 0 || self.initial_pick_size > cfg.capacity {
            return Err(Error::InvalidConfig(format!(
                "initial pick size must lie in 1..={}, got {}",
                cfg.capacity, self.initial_pick_size
            )));
        }
        Ok(())
    }
}

/// Re-plans the rest of a tour after new orders were admitted.
///
/// Returns `current` unchanged when nothing new was admitted, or when the
/// picker is in a cross-aisle and this baseline does not re-route there.
pub fn replan(
    spec: &BaselineSpec,
    current: &Route,
    remaining: &[Pick],
    new_orders: &[Pick],
    cfg: &WarehouseConfig,
) -> Result<Route> {
    let here = current.origin();
    if new_orders.is_empty() || (!spec.reroute_cross_aisle && here.is_cross()) {
        return Ok(current.clone());
    }
    let mut picks = remaining.to_vec();
    picks.extend_from_slice(new_orders);
    spec.router.plan(&PickList::new(here, picks), cfg)
}

/// Result of one simulated shift.
#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub ledger: Ledger,
    /// Meters walked.
    pub total_distance: f64,
    pub shift_end: f64,
    pub tours: usize,
    pub replans: usize,
}

impl ShiftOutcome {
    pub fn metrics(&self, run_seed: u64) -> ShiftMetrics {
        ShiftMetrics::from_ledger(&self.ledger, self.total_distance, self.shift_end, run_seed)
    }
}

struct Sim<'a, S> {
    spec: &'a BaselineSpec,
    cfg: &'a WarehouseConfig,
    source: S,
    shift_end: f64,
    clock: f64,
    ingested_to: f64,
    pos: Position,
    ledger: Ledger,
    queue: VecDeque<OrderId>,
    assigned: Vec<Pick>,
    onboard: Vec<OrderId>,
    route: Option<Route>,
    at: usize,
    distance: f64,
    tours: usize,
    replans: usize,
}

impl<S: OrderSource> Sim<'_, S> {
    fn ingest_to(&mut self, t: f64) -> Result<()> {
        if t > self.ingested_to {
            for o in self.source.sample(self.ingested_to, t) {
                self.queue.push_back(o.id);
                self.ledger.insert(o)?;
            }
            self.ingested_to = t;
        }
        Ok(())
    }

    fn committed(&self) -> usize {
        self.assigned.len() + self.onboard.len()
    }

    /// Moves queued orders into the tour, oldest first, while capacity allows.
    fn admit(&mut self) -> Vec<Pick> {
        let room = self.cfg.capacity - self.committed();
        let n = room.min(self.queue.len());
        let mut out = Vec::with_capacity(n);
        for id in self.queue.drain(..n) {
            let o = self.ledger.get(id).expect("queued orders are in the ledger");
            out.push(Pick {
                order: id,
                location: o.location,
            });
        }
        out
    }

    fn pick_here(&mut self) -> Result<()> {
        let Some(slot) = self.pos.slot() else {
            return Ok(());
        };
        let mut i = 0;
        while i < self.assigned.len() {
            if self.assigned[i].location == slot {
                let p = self.assigned.remove(i);
                self.clock += self.cfg.pick_time_per_item;
                self.ledger.mark_picked(p.order, self.clock)?;
                self.onboard.push(p.order);
            } else {
                i += 1;
            }
        }
        self.ingest_to(self.clock)
    }

    fn try_replan(&mut self) -> Result<bool> {
        let allowed = self.spec.reroute_cross_aisle || !self.pos.is_cross();
        // back at the depot with nothing left to pick: unload first
        let finishing = self.pos == self.cfg.depot() && self.assigned.is_empty();
        if self.queue.is_empty() || self.committed() >= self.cfg.capacity || !allowed || finishing {
            return Ok(false);
        }
        let route = self.route.as_ref().expect("re-planning only happens on tour");
        let suffix = route.suffix(self.at, self.cfg);
        let new = self.admit();
        let remaining = self.assigned.clone();
        let next = replan(self.spec, &suffix, &remaining, &new, self.cfg)?;
        self.assigned.extend(new);
        self.route = Some(next);
        self.at = 0;
        self.replans += 1;
        Ok(true)
    }

    fn start_tour(&mut self) -> Result<()> {
        let picks = self.admit();
        let list = PickList::new(self.pos, picks.clone());
        self.route = Some(self.spec.router.plan(&list, self.cfg)?);
        self.assigned = picks;
        self.at = 0;
        self.tours += 1;
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        while self.clock < self.shift_end {
            let Some(route) = self.route.as_ref() else {
                self.ingest_to(self.clock)?;
                if self.queue.len() >= self.spec.initial_pick_size {
                    self.start_tour()?;
                    continue;
                }
                match self.source.next_arrival(self.ingested_to, self.shift_end) {
                    Some(t) => {
                        self.clock = self.clock.max(t);
                        self.ingest_to(t.next_up())?;
                    }
                    None => self.clock = self.shift_end,
                }
                continue;
            };
            if self.at + 1 == route.steps.len() {
                // tour complete at the depot
                let items = self.onboard.len();
                self.clock += items as f64 * self.cfg.dropoff_time_per_item;
                let ids = std::mem::take(&mut self.onboard);
                self.ledger.mark_delivered(&ids, self.clock)?;
                self.route = None;
                self.ingest_to(self.clock)?;
                continue;
            }
            let next = route.steps[self.at + 1];
            let horizontal = next.aisle != self.pos.aisle;
            let (dt, dx) = if horizontal {
                (self.cfg.aisle_change_time(), self.cfg.inter_aisle_gap)
            } else {
                (self.cfg.tau(), self.cfg.slot_pitch)
            };
            self.clock += dt;
            self.distance += dx;
            self.pos = next;
            self.at += 1;
            self.ingest_to(self.clock)?;
            loop {
                self.pick_here()?;
                if !self.try_replan()? {
                    break;
                }
            }
        }
        Ok(())
    }
}

/// Simulates one shift of `spec` against `source`, starting idle at the depot.
pub fn run_baseline<S: OrderSource>(
    spec: &BaselineSpec,
    source: S,
    cfg: &WarehouseConfig,
    shift_seconds: f64,
) -> Result<ShiftOutcome> {
    cfg.validate()?;
    spec.validate(cfg)?;
    if !(shift_seconds > 0.0 && shift_seconds.is_finite()) {
        return Err(Error::InvalidConfig("shift length must be positive".into()));
    }
    let mut sim = Sim {
        spec,
        cfg,
        source,
        shift_end: shift_seconds,
        clock: 0.0,
        ingested_to: 0.0,
        pos: cfg.depot(),
        ledger: Ledger::new(),
        queue: VecDeque::new(),
        assigned: Vec::new(),
        onboard: Vec::new(),
        route: None,
        at: 0,
        distance: 0.0,
        tours: 0,
        replans: 0,
    };
    sim.run()?;
    Ok(ShiftOutcome {
        ledger: sim.ledger,
        total_distance: sim.distance,
        shift_end: shift_seconds,
        tours: sim.tours,
        replans: sim.replans,
    })
}
