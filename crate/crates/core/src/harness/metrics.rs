use serde::Serialize;

use crate::orders::{Ledger, OrderStatus};

/// Per-shift performance figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftMetrics {
    /// Meters walked per completed order; absent when nothing completed.
    pub atdo: Option<f64>,
    /// Mean arrival-to-deposit seconds over completed orders.
    pub aoct: Option<f64>,
    /// Percent of arrived orders not deposited by the end of the shift.
    pub puo: f64,
    pub total_distance: f64,
    pub completed: usize,
    pub arrived: usize,
    pub run_seed: u64,
}

impl ShiftMetrics {
    /// Orders arriving in `[0, shift_end)` count as arrived; an order counts as
    /// completed once it was deposited no later than `shift_end`.
    pub fn from_ledger(ledger: &Ledger, total_distance: f64, shift_end: f64, run_seed: u64) -> Self {
        let mut arrived = 0;
        let mut completed = 0;
        let mut ct_sum = 0.0;
        for o in ledger.iter().filter(|o| o.arrival_time < shift_end) {
            arrived += 1;
            if o.status == OrderStatus::Delivered && o.delivery_time.is_some_and(|d| d <= shift_end) {
                completed += 1;
                ct_sum += o.completion_time().expect("delivered orders have a delivery time");
            }
        }
        let puo = if arrived == 0 {
            0.0
        } else {
            100.0 * (arrived - completed) as f64 / arrived as f64
        };
        let (atdo, aoct) = if completed == 0 {
            (None, None)
        } else {
            (
                Some(total_distance / completed as f64),
                Some(ct_sum / completed as f64),
            )
        };
        Self {
            atdo,
            aoct,
            puo,
            total_distance,
            completed,
            arrived,
            run_seed,
        }
    }
}

/// Arithmetic means across runs. Undefined per-run values are skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub atdo: Option<f64>,
    pub aoct: Option<f64>,
    pub puo: f64,
    pub total_distance: f64,
    pub completed: f64,
    pub arrived: f64,
    pub runs: usize,
}

impl Aggregate {
    pub fn of(runs: &[ShiftMetrics]) -> Self {
        let n = runs.len().max(1) as f64;
        let mean_opt = |f: fn(&ShiftMetrics) -> Option<f64>| {
            let vals: Vec<f64> = runs.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Self {
            atdo: mean_opt(|m| m.atdo),
            aoct: mean_opt(|m| m.aoct),
            puo: runs.iter().map(|m| m.puo).sum::<f64>() / n,
            total_distance: runs.iter().map(|m| m.total_distance).sum::<f64>() / n,
            completed: runs.iter().map(|m| m.completed as f64).sum::<f64>() / n,
            arrived: runs.iter().map(|m| m.arrived as f64).sum::<f64>() / n,
            runs: runs.len(),
        }
    }
}
