//! Order arrivals and the order ledger.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warehouse::{SlotLocation, WarehouseConfig};

pub type OrderId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderStatus {
    Pending,
    Onboard,
    Delivered,
}

impl OrderStatus {
    fn name(self) -> &'static str {
        match self {
            OrderStatus::Pending => "pending",
            OrderStatus::Onboard => "onboard",
            OrderStatus::Delivered => "delivered",
        }
    }
}

/// One unit of demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub id: OrderId,
    pub location: SlotLocation,
    pub arrival_time: f64,
    pub pickup_time: Option<f64>,
    pub delivery_time: Option<f64>,
    pub status: OrderStatus,
}

impl Order {
    pub fn new(id: OrderId, location: SlotLocation, arrival_time: f64) -> Self {
        Self {
            id,
            location,
            arrival_time,
            pickup_time: None,
            delivery_time: None,
            status: OrderStatus::Pending,
        }
    }

    /// Arrival-to-deposit time, once delivered.
    pub fn completion_time(&self) -> Option<f64> {
        self.delivery_time.map(|d| d - self.arrival_time)
    }
}

/// A constant-rate block of a piecewise arrival schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBlock {
    pub duration: f64,
    pub rate: f64,
}

/// Something that reveals orders over time.
pub trait OrderSource {
    /// Orders arriving in `[from, to)`, sorted by arrival time.
    fn sample(&mut self, from: f64, to: f64) -> Vec<Order>;

    /// Time of the first arrival at or after `t`, if any occurs before `horizon`.
    fn next_arrival(&mut self, t: f64, horizon: f64) -> Option<f64>;
}

/// Seed of the `index`-th child stream of `master` (one SplitMix64 round over
/// the pair), used for training episodes and evaluation runs alike.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Width of the independently seeded chunks arrivals are generated in.
const CHUNK_SECONDS: f64 = 600.0;

/// Poisson arrivals, optionally with a piecewise-constant rate.
///
/// Time is cut into fixed chunks and every chunk draws from its own ChaCha
/// stream, so the realized process only depends on the seed and never on how
/// callers slice their queries.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    blocks: Vec<RateBlock>,
    seed: u64,
    n_aisles: usize,
    slots_per_aisle: usize,
    generated: Vec<Order>,
    next_chunk: u64,
}

impl ArrivalProcess {
    pub fn poisson(rate: f64, seed: u64, cfg: &WarehouseConfig) -> Result<Self> {
        Self::build(
            vec![RateBlock {
                duration: f64::INFINITY,
                rate,
            }],
            seed,
            cfg,
        )
    }

    /// Piecewise-constant rate. The last block's rate persists past the end of the schedule.
    pub fn schedule(blocks: Vec<RateBlock>, seed: u64, cfg: &WarehouseConfig) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("empty arrival schedule".into()));
        }
        if blocks.iter().any(|b| !(b.duration > 0.0)) {
            return Err(Error::InvalidInput("schedule durations must be positive".into()));
        }
        Self::build(blocks, seed, cfg)
    }

    fn build(blocks: Vec<RateBlock>, seed: u64, cfg: &WarehouseConfig) -> Result<Self> {
        if blocks.iter().any(|b| !(b.rate.is_finite() && b.rate > 0.0)) {
            return Err(Error::InvalidInput("arrival rate must be positive".into()));
        }
        Ok(Self {
            blocks,
            seed,
            n_aisles: cfg.n_aisles,
            slots_per_aisle: cfg.slots_per_aisle,
            generated: Vec::new(),
            next_chunk: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn blocks(&self) -> &[RateBlock] {
        &self.blocks
    }

    /// Rate in force at `t` and the time at which it next changes.
    fn rate_at(&self, t: f64) -> (f64, f64) {
        let mut start = 0.0;
        for b in &self.blocks {
            let end = start + b.duration;
            if t < end {
                return (b.rate, end);
            }
            start = end;
        }
        (self.blocks.last().map_or(0.0, |b| b.rate), f64::INFINITY)
    }

    fn generate_chunk(&mut self, chunk: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        let chunk_end = (chunk + 1) as f64 * CHUNK_SECONDS;
        let mut t = chunk as f64 * CHUNK_SECONDS;
        let n_slots = self.n_aisles * self.slots_per_aisle;
        while t < chunk_end {
            let (rate, change) = self.rate_at(t);
            let seg_end = change.min(chunk_end);
            let gap = Exp::new(rate).expect("rate validated").sample(&mut rng);
            if t + gap < seg_end {
                t += gap;
                let idx = rng.gen_range(0..n_slots);
                let location = SlotLocation {
                    aisle: idx / self.slots_per_aisle + 1,
                    depth: idx % self.slots_per_aisle + 1,
                };
                let id = self.generated.len() as OrderId;
                self.generated.push(Order::new(id, location, t));
            } else {
                // memoryless: restarting at the segment boundary is exact
                t = seg_end;
            }
        }
    }

    fn ensure_until(&mut self, t: f64) {
        while (self.next_chunk as f64) * CHUNK_SECONDS <= t {
            let chunk = self.next_chunk;
            self.generate_chunk(chunk);
            self.next_chunk += 1;
        }
    }

    /// Orders arriving in `[from, to)`.
    pub fn sample_arrivals(&mut self, from: f64, to: f64) -> Vec<Order> {
        if !(to > from) {
            return Vec::new();
        }
        self.ensure_until(to);
        let lo = self.generated.partition_point(|o| o.arrival_time < from);
        let hi = self.generated.partition_point(|o| o.arrival_time < to);
        self.generated[lo..hi].to_vec()
    }
}

impl OrderSource for ArrivalProcess {
    fn sample(&mut self, from: f64, to: f64) -> Vec<Order> {
        self.sample_arrivals(from, to)
    }

    fn next_arrival(&mut self, t: f64, horizon: f64) -> Option<f64> {
        let mut upto = t;
        loop {
            self.ensure_until(upto);
            let i = self.generated.partition_point(|o| o.arrival_time < t);
            if let Some(o) = self.generated.get(i) {
                return (o.arrival_time < horizon).then_some(o.arrival_time);
            }
            if upto >= horizon {
                return None;
            }
            upto += CHUNK_SECONDS;
        }
    }
}

/// A fixed list of arrivals, handy for tests and what-if traces.
#[derive(Debug, Clone, Default)]
pub struct ScriptedArrivals {
    orders: Vec<Order>,
}

impl ScriptedArrivals {
    pub fn new(mut arrivals: Vec<(f64, SlotLocation)>) -> Self {
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let orders = arrivals
            .into_iter()
            .enumerate()
            .map(|(i, (t, loc))| Order::new(i as OrderId, loc, t))
            .collect();
        Self { orders }
    }
}

impl OrderSource for ScriptedArrivals {
    fn sample(&mut self, from: f64, to: f64) -> Vec<Order> {
        self.orders
            .iter()
            .filter(|o| o.arrival_time >= from && o.arrival_time < to)
            .cloned()
            .collect()
    }

    fn next_arrival(&mut self, t: f64, horizon: f64) -> Option<f64> {
        self.orders
            .iter()
            .map(|o| o.arrival_time)
            .find(|&a| a >= t && a < horizon)
    }
}

impl<S: OrderSource + ?Sized> OrderSource for Box<S> {
    fn sample(&mut self, from: f64, to: f64) -> Vec<Order> {
        (**self).sample(from, to)
    }

    fn next_arrival(&mut self, t: f64, horizon: f64) -> Option<f64> {
        (**self).next_arrival(t, horizon)
    }
}

/// Every order seen during a run, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    orders: BTreeMap<OrderId, Order>,
    pending: usize,
    onboard: usize,
    delivered: usize,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, order: Order) -> Result<()> {
        if self.orders.contains_key(&order.id) {
            return Err(Error::InvalidInput(format!("duplicate order id {}", order.id)));
        }
        match order.status {
            OrderStatus::Pending => self.pending += 1,
            OrderStatus::Onboard => self.onboard += 1,
            OrderStatus::Delivered => self.delivered += 1,
        }
        self.orders.insert(order.id, order);
        Ok(())
    }

    pub fn get(&self, id: OrderId) -> Option<&Order> {
        self.orders.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Order> {
        self.orders.values()
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.pending, self.onboard, self.delivered)
    }

    /// Pending orders that have arrived by `t`.
    pub fn pending(&self, t: f64) -> Vec<&Order> {
        self.orders
            .values()
            .filter(|o| o.status == OrderStatus::Pending && o.arrival_time <= t)
            .collect()
    }

    fn transition(&mut self, id: OrderId, from: OrderStatus, to: OrderStatus) -> Result<&mut Order> {
        let order = self.orders.get_mut(&id).ok_or(Error::UnknownOrder(id))?;
        if order.status != from {
            return Err(Error::IllegalTransition {
                id,
                from: order.status.name(),
                to: to.name(),
            });
        }
        Ok(order)
    }

    pub fn mark_picked(&mut self, id: OrderId, t: f64) -> Result<()> {
        let order = self.transition(id, OrderStatus::Pending, OrderStatus::Onboard)?;
        if t < order.arrival_time {
            return Err(Error::InvalidInput(format!(
                "order {id} picked at {t} before arriving at {}",
                order.arrival_time
            )));
        }
        order.pickup_time = Some(t);
        order.status = OrderStatus::Onboard;
        self.pending -= 1;
        self.onboard += 1;
        Ok(())
    }

    /// Stamps every order in `ids` as delivered at `t`. Validates all ids first.
    pub fn mark_delivered(&mut self, ids: &[OrderId], t: f64) -> Result<()> {
        for &id in ids {
            let order = self.orders.get(&id).ok_or(Error::UnknownOrder(id))?;
            if order.status != OrderStatus::Onboard {
                return Err(Error::IllegalTransition {
                    id,
                    from: order.status.name(),
                    to: OrderStatus::Delivered.name(),
                });
            }
            if order.pickup_time.is_some_and(|p| t < p) {
                return Err(Error::InvalidInput(format!("order {id} delivered before pickup")));
            }
        }
        for &id in ids {
            let order = self.orders.get_mut(&id).expect("validated above");
            order.delivery_time = Some(t);
            order.status = OrderStatus::Delivered;
        }
        self.onboard -= ids.len();
        self.delivered += ids.len();
        Ok(())
    }

    /// One row per order: `id,aisle,depth,arrival,pickup,delivery`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["id", "aisle", "depth", "arrival", "pickup", "delivery"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        for o in self.orders.values() {
            out.write_record([
                o.id.to_string(),
                o.location.aisle.to_string(),
                o.location.depth.to_string(),
                format!("{:.3}", o.arrival_time),
                opt(o.pickup_time),
                opt(o.delivery_time),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_with(n: u64) -> Ledger {
        let mut l = Ledger::new();
        for id in 0..n {
            l.insert(Order::new(id, SlotLocation::new(1, 1), 0.0)).unwrap();
        }
        l
    }

    #[test]
    fn empty_window_yields_nothing() {
        let cfg = WarehouseConfig::default();
        let mut p = ArrivalProcess::poisson(0.05, 1, &cfg).unwrap();
        assert!(p.sample_arrivals(100.0, 100.0).is_empty());
    }

    #[test]
    fn rejects_non_positive_rate() {
        let cfg = WarehouseConfig::default();
        assert!(ArrivalProcess::poisson(0.0, 1, &cfg).is_err());
    }

    #[test]
    fn deliver_unpicked_is_illegal() {
        let mut l = ledger_with(1);
        assert!(matches!(
            l.mark_delivered(&[0], 5.0),
            Err(Error::IllegalTransition { .. })
        ));
    }

    #[test]
    fn unknown_id() {
        let mut l = ledger_with(1);
        assert!(matches!(l.mark_picked(7, 1.0), Err(Error::UnknownOrder(7))));
    }

    #[test]
    fn completion_time_recorded() {
        let mut l = ledger_with(1);
        l.mark_picked(0, 10.0).unwrap();
        l.mark_delivered(&[0], 40.0).unwrap();
        let o = l.get(0).unwrap();
        assert_eq!(o.pickup_time, Some(10.0));
        assert_eq!(o.completion_time(), Some(40.0));
        assert_eq!(o.delivery_time.unwrap() - o.pickup_time.unwrap(), 30.0);
    }

    #[test]
    fn next_arrival_matches_sample() {
        let cfg = WarehouseConfig::default();
        let mut p = ArrivalProcess::poisson(0.01, 3, &cfg).unwrap();
        let first = p.sample_arrivals(0.0, 5000.0)[0].arrival_time;
        assert_eq!(p.next_arrival(0.0, 5000.0), Some(first));
        assert_eq!(p.next_arrival(first, 5000.0), Some(first));
        assert_eq!(p.next_arrival(0.0, first), None);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let mut l = ledger_with(2);
        l.mark_picked(1, 3.0).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "id,aisle,depth,arrival,pickup,delivery");
        assert_eq!(lines[1], "0,1,1,0.000,,");
        assert_eq!(lines[2], "1,1,1,0.000,3.000,");
    }
}
