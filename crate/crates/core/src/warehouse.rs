//! Single-block warehouse geometry.
//!
//! Aisles are numbered `1..=N` from left to right. Inside aisle `n` a picker
//! sits at an integer depth: `0` is the front cross-aisle row (the depot row),
//! `1..=L` are storage slots counted from the front, and `L + 1` is the back
//! cross-aisle row. Aisle changes happen only at depth `0` or `L + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarehouseConfig {
    pub n_aisles: usize,
    pub slots_per_aisle: usize,
    /// Meters between consecutive depths inside an aisle.
    pub slot_pitch: f64,
    /// Meters between adjacent aisles along a cross-aisle.
    pub inter_aisle_gap: f64,
    /// 1-based aisle whose front end hosts the depot.
    pub depot_aisle: usize,
    /// Meters per second.
    pub picker_speed: f64,
    pub pick_time_per_item: f64,
    pub dropoff_time_per_item: f64,
    pub capacity: usize,
}

impl Default for WarehouseConfig {
    fn default() -> Self {
        Self {
            n_aisles: 10,
            slots_per_aisle: 15,
            slot_pitch: 1.0,
            inter_aisle_gap: 3.0,
            depot_aisle: 6,
            picker_speed: 1.0,
            pick_time_per_item: 5.0,
            dropoff_time_per_item: 1.0,
            capacity: 20,
        }
    }
}

impl WarehouseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.n_aisles == 0 || self.slots_per_aisle == 0 || self.capacity == 0 {
            return bad("counts must be at least 1");
        }
        if !(1..=self.n_aisles).contains(&self.depot_aisle) {
            return bad("depot_aisle must lie in 1..=n_aisles");
        }
        let positive = [
            self.slot_pitch,
            self.inter_aisle_gap,
            self.picker_speed,
            self.pick_time_per_item,
            self.dropoff_time_per_item,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("lengths, speed and durations must be finite and positive");
        }
        Ok(())
    }

    /// Seconds needed to move one slot pitch.
    pub fn tau(&self) -> f64 {
        self.slot_pitch / self.picker_speed
    }

    /// Seconds needed to move between adjacent aisles.
    pub fn aisle_change_time(&self) -> f64 {
        self.inter_aisle_gap / self.picker_speed
    }

    /// Inter-aisle gap expressed in slot units.
    pub fn gap_units(&self) -> f64 {
        self.inter_aisle_gap / self.slot_pitch
    }

    /// Depth of the back cross-aisle row (`L + 1`).
    pub fn back_depth(&self) -> usize {
        self.slots_per_aisle + 1
    }

    pub fn num_slots(&self) -> usize {
        self.n_aisles * self.slots_per_aisle
    }

    pub fn depot(&self) -> Position {
        Position::front(self.depot_aisle)
    }

    /// Dense index of a slot in `0..num_slots()`.
    pub fn slot_index(&self, s: SlotLocation) -> usize {
        (s.aisle - 1) * self.slots_per_aisle + (s.depth - 1)
    }

    pub fn slot_from_index(&self, idx: usize) -> SlotLocation {
        SlotLocation {
            aisle: idx / self.slots_per_aisle + 1,
            depth: idx % self.slots_per_aisle + 1,
        }
    }

    pub fn check_position(&self, p: Position) -> Result<()> {
        let ok = (1..=self.n_aisles).contains(&p.aisle)
            && match p.zone {
                Zone::FrontCross => p.depth == 0,
                Zone::BackCross => p.depth == self.back_depth(),
                Zone::InAisle => (1..=self.slots_per_aisle).contains(&p.depth),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("position {p} is not valid")))
        }
    }

    pub fn check_slot(&self, s: SlotLocation) -> Result<()> {
        if (1..=self.n_aisles).contains(&s.aisle) && (1..=self.slots_per_aisle).contains(&s.depth) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("slot {s} is not valid")))
        }
    }

    /// Builds the position at `depth` of `aisle`, picking the zone from the depth.
    pub fn position_at(&self, aisle: usize, depth: usize) -> Position {
        let zone = if depth == 0 {
            Zone::FrontCross
        } else if depth == self.back_depth() {
            Zone::BackCross
        } else {
            Zone::InAisle
        };
        Position { zone, aisle, depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    FrontCross,
    BackCross,
    InAisle,
}

/// Where the picker is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub zone: Zone,
    pub aisle: usize,
    pub depth: usize,
}

impl Position {
    pub fn front(aisle: usize) -> Self {
        Self {
            zone: Zone::FrontCross,
            aisle,
            depth: 0,
        }
    }

    pub fn back(aisle: usize, cfg: &WarehouseConfig) -> Self {
        Self {
            zone: Zone::BackCross,
            aisle,
            depth: cfg.back_depth(),
        }
    }

    pub fn in_aisle(aisle: usize, depth: usize) -> Self {
        Self {
            zone: Zone::InAisle,
            aisle,
            depth,
        }
    }

    pub fn is_cross(&self) -> bool {
        self.zone != Zone::InAisle
    }

    pub fn slot(&self) -> Option<SlotLocation> {
        (self.zone == Zone::InAisle).then_some(SlotLocation {
            aisle: self.aisle,
            depth: self.depth,
        })
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let zone = match self.zone {
            Zone::FrontCross => "front",
            Zone::BackCross => "back",
            Zone::InAisle => "aisle",
        };
        write!(f, "({zone}, {}, {})", self.aisle, self.depth)
    }
}

/// A storage location. Both rack sides of a slot collapse onto one location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotLocation {
    pub aisle: usize,
    pub depth: usize,
}

impl SlotLocation {
    pub fn new(aisle: usize, depth: usize) -> Self {
        Self { aisle, depth }
    }

    pub fn position(&self) -> Position {
        Position::in_aisle(self.aisle, self.depth)
    }
}

impl fmt::Display for SlotLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.aisle, self.depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Toward the back cross-aisle.
    Up,
    /// Toward the front cross-aisle.
    Down,
}

/// Shortest walking distance in meters between two positions.
pub fn walk_distance(a: Position, b: Position, cfg: &WarehouseConfig) -> Result<f64> {
    cfg.check_position(a)?;
    cfg.check_position(b)?;
    Ok(walk_distance_unchecked(a, b, cfg))
}

pub(crate) fn walk_distance_unchecked(a: Position, b: Position, cfg: &WarehouseConfig) -> f64 {
    if a.aisle == b.aisle {
        return a.depth.abs_diff(b.depth) as f64 * cfg.slot_pitch;
    }
    let back = cfg.back_depth();
    let horizontal = a.aisle.abs_diff(b.aisle) as f64 * cfg.inter_aisle_gap;
    let via_front = a.depth + b.depth;
    let via_back = (back - a.depth) + (back - b.depth);
    via_front.min(via_back) as f64 * cfg.slot_pitch + horizontal
}

/// Slot-unit length of the shortest path that leaves `p` heading in `dir`
/// and reaches `s` without turning back inside an aisle.
///
/// From inside an aisle the picker either reaches `s` straight ahead in its
/// own aisle, or runs to the cross-aisle at that end, moves sideways and
/// enters the target aisle from there. From a cross-aisle only the motion
/// into the aisles is possible (`Up` from the front, `Down` from the back).
/// Returns `None` when no such path exists.
pub fn directional_distance(
    p: Position,
    s: SlotLocation,
    dir: Direction,
    cfg: &WarehouseConfig,
) -> Result<Option<f64>> {
    cfg.check_position(p)?;
    cfg.check_slot(s)?;
    Ok(directional_distance_unchecked(p, s, dir, cfg))
}

pub(crate) fn directional_distance_unchecked(
    p: Position,
    s: SlotLocation,
    dir: Direction,
    cfg: &WarehouseConfig,
) -> Option<f64> {
    let back = cfg.back_depth() as f64;
    let gap = p.aisle.abs_diff(s.aisle) as f64 * cfg.gap_units();
    let (pd, sd) = (p.depth as f64, s.depth as f64);
    match (p.zone, dir) {
        (Zone::FrontCross, Direction::Down) | (Zone::BackCross, Direction::Up) => None,
        (Zone::FrontCross, Direction::Up) => Some(gap + sd),
        (Zone::BackCross, Direction::Down) => Some(gap + (back - sd)),
        (Zone::InAisle, dir) if p.aisle == s.aisle => match dir {
            Direction::Up => (s.depth >= p.depth).then(|| sd - pd),
            Direction::Down => (s.depth <= p.depth).then(|| pd - sd),
        },
        (Zone::InAisle, Direction::Up) => Some((back - pd) + gap + (back - sd)),
        (Zone::InAisle, Direction::Down) => Some(pd + gap + sd),
    }
}
