//! The picking MDP: featurization, action masking, variable-length
//! transitions and rewards.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orders::{ArrivalProcess, Ledger, OrderId, OrderSource};
use crate::warehouse::{
    directional_distance_unchecked, Direction, Position, SlotLocation, WarehouseConfig, Zone,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Drop off at the depot, otherwise wait one move quantum.
    Stay = 0,
    /// Next aisle to the right (aisle + 1), cross-aisles only.
    Right = 1,
    /// Next aisle to the left (aisle - 1), cross-aisles only.
    Left = 2,
    /// Toward the back cross-aisle.
    Up = 3,
    /// Toward the front cross-aisle.
    Down = 4,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Stay, Action::Right, Action::Left, Action::Up, Action::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("action index {i} out of range")))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionMask(pub [bool; 5]);

impl ActionMask {
    pub fn contains(&self, a: Action) -> bool {
        self.0[a.index()]
    }

    pub fn remove(&mut self, a: Action) {
        self.0[a.index()] = false;
    }

    pub fn feasible(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.contains(*a))
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

/// Agent-visible picker features `(S^H, S^V1, S^V2, S^C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PickerState {
    /// 1 at the front cross-aisle, -1 at the back, 0 inside an aisle.
    pub s_h: i8,
    pub s_v1: usize,
    pub s_v2: usize,
    /// Remaining capacity.
    pub s_c: usize,
}

impl PickerState {
    pub fn from_position(p: Position, remaining: usize) -> Self {
        let s_h = match p.zone {
            Zone::FrontCross => 1,
            Zone::BackCross => -1,
            Zone::InAisle => 0,
        };
        Self {
            s_h,
            s_v1: 2 * p.aisle - 1,
            s_v2: 2 * p.aisle,
            s_c: remaining,
        }
    }

    pub fn aisle(&self) -> usize {
        self.s_v2 / 2
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.s_h as f64, self.s_v1 as f64, self.s_v2 as f64, self.s_c as f64]
    }
}

/// Direction-aware reward potentials: entry `2n-2` is the upward potential of
/// aisle `n`, entry `2n-1` the downward one (0-based storage).
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFeatures {
    pub values: Vec<f64>,
}

impl OrderFeatures {
    pub fn zeros(n_aisles: usize) -> Self {
        Self {
            values: vec![0.0; 2 * n_aisles],
        }
    }

    pub fn upward(&self, aisle: usize) -> f64 {
        self.values[2 * aisle - 2]
    }

    pub fn downward(&self, aisle: usize) -> f64 {
        self.values[2 * aisle - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpState {
    pub picker: PickerState,
    pub orders: OrderFeatures,
}

impl MdpState {
    /// Picker features followed by order features.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 + self.orders.values.len());
        v.extend_from_slice(&self.picker.to_array());
        v.extend_from_slice(&self.orders.values);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Reward per picked item.
    pub r: f64,
    /// Weight of the unload reward relative to picking.
    pub alpha: f64,
}

impl RewardParams {
    /// `R = L + N`, the per-aisle slot count plus the number of aisles.
    pub fn for_config(cfg: &WarehouseConfig, alpha: f64) -> Self {
        Self {
            r: (cfg.slots_per_aisle + cfg.n_aisles) as f64,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!(
                "reward params need R > 0 and 0 <= alpha <= 1, got R={} alpha={}",
                self.r, self.alpha
            )));
        }
        Ok(())
    }

    /// Unload reward at the depot.
    pub fn unload(&self, items: usize) -> f64 {
        self.r * items as f64 * self.alpha
    }

    /// Reward for a move of `moved` slot units that picked `picked` items.
    pub fn travel(&self, moved: f64, picked: usize) -> f64 {
        -moved + self.r * picked as f64
    }

    pub const IDLE: f64 = -1.0;
}

/// Gates that restrict the agent the way some baselines are restricted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOptions {
    /// An empty picker may leave the depot only once this many orders are pending.
    pub initial_pick_size: usize,
    /// When false, the picker cannot reverse its sideways direction inside a
    /// cross-aisle until it has entered an aisle.
    pub cross_aisle_reroute: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self {
            initial_pick_size: 1,
            cross_aisle_reroute: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: MdpState,
    pub reward: f64,
    pub elapsed: f64,
    /// Items picked (`n^p`).
    pub picked: usize,
    /// Slot units moved (`n^m`).
    pub moved: f64,
    pub picked_ids: Vec<OrderId>,
    pub delivered_ids: Vec<OrderId>,
}

/// Feasibility from the picker features alone.
pub fn feasible_actions(picker: &PickerState, n_aisles: usize) -> ActionMask {
    let aisle = picker.aisle();
    let cross = picker.s_h != 0;
    ActionMask([
        true,
        cross && aisle < n_aisles,
        cross && aisle > 1,
        picker.s_h != -1,
        picker.s_h != 1,
    ])
}

/// Computes the agent-visible state from the picker position, its remaining
/// capacity and the number of pending orders at every slot
/// (indexed by [`WarehouseConfig::slot_index`]).
pub fn featurize(
    position: Position,
    remaining: usize,
    pending_per_slot: &[u32],
    cfg: &WarehouseConfig,
) -> MdpState {
    let mut orders = OrderFeatures::zeros(cfg.n_aisles);
    for (idx, &count) in pending_per_slot.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let slot = cfg.slot_from_index(idx);
        let n = count as f64;
        // an order at the picker's own slot sits at distance 0; count it as one unit away
        if let Some(rho) = directional_distance_unchecked(position, slot, Direction::Up, cfg) {
            orders.values[2 * slot.aisle - 2] += n / rho.max(1.0);
        }
        if let Some(rho) = directional_distance_unchecked(position, slot, Direction::Down, cfg) {
            orders.values[2 * slot.aisle - 1] += n / rho.max(1.0);
        }
    }
    MdpState {
        picker: PickerState::from_position(position, remaining),
        orders,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub aisle: usize,
    pub depth: usize,
    pub action: Action,
    pub reward: f64,
    pub elapsed: f64,
    pub remaining: usize,
    pub picked_ids: Vec<OrderId>,
    pub delivered_ids: Vec<OrderId>,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "time", "aisle", "depth", "action", "reward", "elapsed", "remaining", "picked", "delivered",
    ])?;
    let ids = |v: &[OrderId]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
    for r in rows {
        out.write_record([
            format!("{:.3}", r.time),
            r.aisle.to_string(),
            r.depth.to_string(),
            r.action.to_string(),
            format!("{:.6}", r.reward),
            format!("{:.3}", r.elapsed),
            r.remaining.to_string(),
            ids(&r.picked_ids),
            ids(&r.delivered_ids),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Simulator ground truth plus the MDP interface on top of it.
#[derive(Debug, Clone)]
pub struct Env<S = ArrivalProcess> {
    cfg: WarehouseConfig,
    reward: RewardParams,
    opts: EnvOptions,
    source: S,
    position: Position,
    remaining: usize,
    clock: f64,
    ledger: Ledger,
    slot_queues: Vec<VecDeque<OrderId>>,
    pending_per_slot: Vec<u32>,
    onboard: Vec<OrderId>,
    distance: f64,
    movement_units: f64,
    last_sideways: Option<Action>,
    state: MdpState,
    trace: Option<Vec<TraceRow>>,
}

impl<S: OrderSource> Env<S> {
    pub fn new(cfg: WarehouseConfig, reward: RewardParams, opts: EnvOptions, source: S) -> Result<Self> {
        cfg.validate()?;
        reward.validate()?;
        let n_slots = cfg.num_slots();
        let state = MdpState {
            picker: PickerState::from_position(cfg.depot(), cfg.capacity),
            orders: OrderFeatures::zeros(cfg.n_aisles),
        };
        Ok(Self {
            position: cfg.depot(),
            remaining: cfg.capacity,
            clock: 0.0,
            ledger: Ledger::new(),
            slot_queues: vec![VecDeque::new(); n_slots],
            pending_per_slot: vec![0; n_slots],
            onboard: Vec::new(),
            distance: 0.0,
            movement_units: 0.0,
            last_sideways: None,
            state,
            trace: None,
            cfg,
            reward,
            opts,
            source,
        })
    }

    /// Back to the depot at time zero with an empty ledger and a fresh order source.
    pub fn reset(&mut self, source: S) -> &MdpState {
        let trace = self.trace.is_some();
        *self = Self::new(self.cfg.clone(), self.reward, self.opts, source)
            .expect("config was validated on construction");
        if trace {
            self.trace = Some(Vec::new());
        }
        &self.state
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.trace.as_deref()
    }

    pub fn config(&self) -> &WarehouseConfig {
        &self.cfg
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn state(&self) -> &MdpState {
        &self.state
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn remaining_capacity(&self) -> usize {
        self.remaining
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn pending_per_slot(&self) -> &[u32] {
        &self.pending_per_slot
    }

    pub fn onboard(&self) -> &[OrderId] {
        &self.onboard
    }

    /// Meters walked so far.
    pub fn total_distance(&self) -> f64 {
        self.distance
    }

    /// Sum of all movement penalties so far, in slot units.
    pub fn movement_units(&self) -> f64 {
        self.movement_units
    }

    pub fn at_depot(&self) -> bool {
        self.position == self.cfg.depot()
    }

    pub fn mask(&self) -> ActionMask {
        let mut mask = feasible_actions(&self.state.picker, self.cfg.n_aisles);
        let (pending, _, _) = self.ledger.counts();
        if self.at_depot() && self.remaining == self.cfg.capacity && pending < self.opts.initial_pick_size {
            mask.remove(Action::Right);
            mask.remove(Action::Left);
            mask.remove(Action::Up);
        }
        if !self.opts.cross_aisle_reroute && self.position.is_cross() {
            match self.last_sideways {
                Some(Action::Right) => mask.remove(Action::Left),
                Some(Action::Left) => mask.remove(Action::Right),
                _ => {}
            }
        }
        mask
    }

    fn ingest(&mut self, from: f64, to: f64) -> Result<usize> {
        let arrivals = self.source.sample(from, to);
        let n = arrivals.len();
        for order in arrivals {
            let idx = self.cfg.slot_index(order.location);
            self.slot_queues[idx].push_back(order.id);
            self.pending_per_slot[idx] += 1;
            self.ledger.insert(order)?;
        }
        Ok(n)
    }

    /// Picks everything pending at the current slot while capacity allows.
    fn pick_here(&mut self, picked: &mut Vec<OrderId>) -> Result<usize> {
        let Some(slot) = self.position.slot() else {
            return Ok(0);
        };
        let idx = self.cfg.slot_index(slot);
        let mut n = 0;
        while self.remaining > 0 {
            let Some(id) = self.slot_queues[idx].pop_front() else {
                break;
            };
            self.pending_per_slot[idx] -= 1;
            self.clock += self.cfg.pick_time_per_item;
            self.ledger.mark_picked(id, self.clock)?;
            self.onboard.push(id);
            self.remaining -= 1;
            picked.push(id);
            n += 1;
        }
        Ok(n)
    }

    fn refresh_state(&mut self) {
        self.state = featurize(self.position, self.remaining, &self.pending_per_slot, &self.cfg);
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if !self.mask().contains(action) {
            return Err(Error::InfeasibleAction {
                action: action.index() as u8,
            });
        }
        let start = self.clock;
        let start_pos = self.position;
        let mut picked_ids = Vec::new();
        let mut delivered_ids = Vec::new();
        let mut moved = 0.0;
        let reward;
        match action {
            Action::Stay if self.at_depot() => {
                let items = self.cfg.capacity - self.remaining;
                if items > 0 {
                    self.clock += items as f64 * self.cfg.dropoff_time_per_item;
                    delivered_ids = std::mem::take(&mut self.onboard);
                    self.ledger.mark_delivered(&delivered_ids, self.clock)?;
                    self.remaining = self.cfg.capacity;
                } else {
                    self.clock += self.cfg.tau();
                }
                reward = self.reward.unload(items);
                self.ingest(start, self.clock)?;
            }
            Action::Stay => {
                self.clock += self.cfg.tau();
                reward = RewardParams::IDLE;
                self.ingest(start, self.clock)?;
            }
            Action::Right | Action::Left => {
                self.position.aisle = if action == Action::Right {
                    self.position.aisle + 1
                } else {
                    self.position.aisle - 1
                };
                self.clock += self.cfg.aisle_change_time();
                self.distance += self.cfg.inter_aisle_gap;
                moved = self.cfg.gap_units();
                self.last_sideways = Some(action);
                reward = self.reward.travel(moved, 0);
                self.ingest(start, self.clock)?;
            }
            Action::Up | Action::Down => {
                self.last_sideways = None;
                let back = self.cfg.back_depth();
                let mut arrived = 0;
                // an order at the picker's own slot is collected before moving on
                let t0 = self.clock;
                if self.pick_here(&mut picked_ids)? > 0 {
                    self.ingest(t0, self.clock)?;
                } else {
                    loop {
                        let t = self.clock;
                        self.position.depth = if action == Action::Up {
                            self.position.depth + 1
                        } else {
                            self.position.depth - 1
                        };
                        self.position = self.cfg.position_at(self.position.aisle, self.position.depth);
                        self.clock += self.cfg.tau();
                        self.distance += self.cfg.slot_pitch;
                        moved += 1.0;
                        arrived += self.ingest(t, self.clock)?;
                        let before_pick = self.clock;
                        if self.pick_here(&mut picked_ids)? > 0 {
                            arrived += self.ingest(before_pick, self.clock)?;
                        }
                        let boundary = self.position.depth == 0 || self.position.depth == back;
                        if boundary || arrived > 0 || !picked_ids.is_empty() {
                            break;
                        }
                    }
                }
                reward = self.reward.travel(moved, picked_ids.len());
            }
        }
        self.movement_units += moved;
        self.refresh_state();
        let elapsed = self.clock - start;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRow {
                time: start,
                aisle: start_pos.aisle,
                depth: start_pos.depth,
                action,
                reward,
                elapsed,
                remaining: self.remaining,
                picked_ids: picked_ids.clone(),
                delivered_ids: delivered_ids.clone(),
            });
        }
        Ok(StepOutcome {
            next_state: self.state.clone(),
            reward,
            elapsed,
            picked: picked_ids.len(),
            moved,
            picked_ids,
            delivered_ids,
        })
    }
}

/// Anything that maps an observation to an action.
pub trait Policy {
    fn act(&mut self, state: &MdpState, mask: ActionMask, clock: f64) -> Result<Action>;
}

/// Never moves; unloads whenever it happens to sit at the depot.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn act(&mut self, _: &MdpState, _: ActionMask, _: f64) -> Result<Action> {
        Ok(Action::Stay)
    }
}

/// Uniform over the feasible actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &MdpState, mask: ActionMask, _: f64) -> Result<Action> {
        let feasible: Vec<Action> = mask.feasible().collect();
        if feasible.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(feasible[self.rng.gen_range(0..feasible.len())])
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&mut self, state: &MdpState, mask: ActionMask, clock: f64) -> Result<Action> {
        (**self).act(state, mask, clock)
    }
}

/// Steps `env` with `policy` until the clock reaches `shift_end`.
pub fn run_shift<S: OrderSource, P: Policy + ?Sized>(
    env: &mut Env<S>,
    policy: &mut P,
    shift_end: f64,
) -> Result<()> {
    while env.clock() < shift_end {
        let mask = env.mask();
        let action = policy.act(env.state(), mask, env.clock())?;
        env.step(action)?;
    }
    Ok(())
}

/// Pending counts per slot with one order for every listed slot.
pub fn pending_counts(slots: &[SlotLocation], cfg: &WarehouseConfig) -> Vec<u32> {
    let mut v = vec![0; cfg.num_slots()];
    for s in slots {
        v[cfg.slot_index(*s)] += 1;
    }
    v
}
