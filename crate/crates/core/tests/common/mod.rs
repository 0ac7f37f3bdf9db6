#![allow(dead_code)]

use ndarray::Array2;
use orderpick::agent::{DqnTrainer, ReplayMemory, TrainConfig, Transition};
use orderpick::env::{Action, ActionMask};
use orderpick::nn::{QNetwork, QNetworkSpec};
use orderpick::warehouse::{walk_distance, Position, SlotLocation, WarehouseConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best visiting order by brute force, shortest path per leg.
pub fn brute_force(origin: Position, slots: &[SlotLocation], cfg: &WarehouseConfig) -> f64 {
    let mut distinct = slots.to_vec();
    distinct.sort();
    distinct.dedup();
    let pts: Vec<Position> = distinct.iter().map(|s| s.position()).collect();
    let mut best = f64::INFINITY;
    let mut used = vec![false; pts.len()];
    fn go(
        here: Position,
        acc: f64,
        pts: &[Position],
        used: &mut [bool],
        left: usize,
        best: &mut f64,
        cfg: &WarehouseConfig,
    ) {
        if acc >= *best {
            return;
        }
        if left == 0 {
            let total = acc + walk_distance(here, cfg.depot(), cfg).unwrap();
            if total < *best {
                *best = total;
            }
            return;
        }
        for i in 0..pts.len() {
            if !used[i] {
                used[i] = true;
                let d = walk_distance(here, pts[i], cfg).unwrap();
                go(pts[i], acc + d, pts, used, left - 1, best, cfg);
                used[i] = false;
            }
        }
    }
    go(origin, 0.0, &pts, &mut used, pts.len(), &mut best, cfg);
    best
}

pub fn random_position(rng: &mut ChaCha8Rng, cfg: &WarehouseConfig) -> Position {
    let aisle = rng.gen_range(1..=cfg.n_aisles);
    match rng.gen_range(0..4) {
        0 => Position::front(aisle),
        1 => Position::back(aisle, cfg),
        _ => Position::in_aisle(aisle, rng.gen_range(1..=cfg.slots_per_aisle)),
    }
}

pub fn random_slots(rng: &mut ChaCha8Rng, n: usize, cfg: &WarehouseConfig) -> Vec<SlotLocation> {
    (0..n)
        .map(|_| {
            SlotLocation::new(
                rng.gen_range(1..=cfg.n_aisles),
                rng.gen_range(1..=cfg.slots_per_aisle),
            )
        })
        .collect()
}

pub fn tiny_spec() -> QNetworkSpec {
    QNetworkSpec {
        picker_in: 4,
        order_in: 4,
        h_p: 3,
        h_o: 5,
        f1: 6,
        f2: 4,
        f3: 3,
        out: 5,
    }
}

pub fn random_transition(rng: &mut ChaCha8Rng, width: usize) -> Transition {
    let mut mask = ActionMask([false; 5]);
    mask.0[0] = true;
    for m in &mut mask.0[1..] {
        *m = rng.gen_bool(0.5);
    }
    Transition {
        state: (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        action: Action::from_index(rng.gen_range(0..5)).unwrap(),
        reward: rng.gen_range(-5.0..5.0),
        next_state: (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        next_mask: mask,
    }
}

pub fn small_cfg(batch: usize) -> TrainConfig {
    TrainConfig {
        batch_size: batch,
        replay_capacity: 50,
        tau: 0.1,
        learning_rate: 1e-2,
        seed: 9,
        ..Default::default()
    }
}

/// Replay memory of capacity `c` after `c + k` inserts holds exactly the last `c`.
pub fn replay_eviction_exact(c: usize, k: usize) -> bool {
    let mut m = ReplayMemory::new(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..c + k {
        let mut t = random_transition(&mut rng, 2);
        t.reward = i as f64;
        m.push(t);
    }
    let mut drawn: Vec<f64> = m.sample(c, &mut rng).unwrap().iter().map(|t| t.reward).collect();
    drawn.sort_by(f64::total_cmp);
    let want: Vec<f64> = (k..c + k).map(|i| i as f64).collect();
    m.len() == c && drawn == want && m.sample(c + 1, &mut rng).is_err()
}

/// Blending after each observed step is exactly `τθ + (1−τ)θ⁻`.
pub fn blend_is_exact() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tr = DqnTrainer::new(tiny_spec(), small_cfg(4)).unwrap();
    for _ in 0..20 {
        let before = tr.target().clone();
        tr.observe(random_transition(&mut rng, 8)).unwrap();
        let tau = tr.config().tau;
        let expected: Vec<f64> = before
            .flat_params()
            .iter()
            .zip(tr.online().flat_params())
            .map(|(t, o)| tau * o + (1.0 - tau) * t)
            .collect();
        if tr.target().flat_params() != expected {
            return false;
        }
    }
    true
}

/// Steps observed while the memory holds fewer than a batch take no gradient step.
pub fn warmup_gate_holds() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tr = DqnTrainer::new(tiny_spec(), small_cfg(8)).unwrap();
    let init = tr.online().clone();
    for i in 0..8 {
        let loss = tr.observe(random_transition(&mut rng, 8)).unwrap();
        let expect_step = i + 1 >= 8;
        if loss.is_some() != expect_step {
            return false;
        }
        if !expect_step && (tr.gradient_steps() != 0 || tr.online() != &init) {
            return false;
        }
    }
    tr.gradient_steps() == 1
}

pub fn random_batch(rng: &mut ChaCha8Rng, spec: &QNetworkSpec, rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, spec.input_width()), |_| rng.gen_range(-1.0..1.0))
}

/// Perturbs every bias so that no unit sits exactly on a rectifier kink.
pub fn jitter_biases(net: &mut QNetwork, rng: &mut ChaCha8Rng) {
    for l in net.layers_mut() {
        l.b.mapv_inplace(|_| rng.gen_range(-0.1..0.1));
    }
}

fn loss_at(probe: &mut QNetwork, flat: &[f64], x: &Array2<f64>, actions: &[usize], targets: &[f64]) -> f64 {
    probe.set_flat_params(flat).unwrap();
    probe.td_loss_and_grads(x.view(), actions, targets).unwrap().0
}

/// Central difference at coordinate `k`. When the one-sided differences
/// disagree a rectifier kink lies within the step, so the step shrinks.
pub fn central_difference(
    probe: &mut QNetwork,
    flat: &mut [f64],
    k: usize,
    x: &Array2<f64>,
    actions: &[usize],
    targets: &[f64],
) -> f64 {
    let orig = flat[k];
    let l0 = loss_at(probe, flat, x, actions, targets);
    let mut h = 1e-6;
    loop {
        flat[k] = orig + h;
        let lp = loss_at(probe, flat, x, actions, targets);
        flat[k] = orig - h;
        let lm = loss_at(probe, flat, x, actions, targets);
        flat[k] = orig;
        let (fwd, bwd) = ((lp - l0) / h, (l0 - lm) / h);
        let smooth = (fwd - bwd).abs() <= 1e-3 * fwd.abs().max(bwd.abs()).max(1e-6);
        if smooth || h < 1e-9 {
            return (lp - lm) / (2.0 * h);
        }
        h /= 100.0;
    }
}

/// Norm-wise relative error between analytic and central-difference
/// gradients, one value per tensor, over the coordinates in `coords`.
pub fn fd_errors(
    net: &QNetwork,
    x: &Array2<f64>,
    actions: &[usize],
    targets: &[f64],
    coords: &[Vec<usize>],
) -> Vec<f64> {
    let (_, grads) = net.td_loss_and_grads(x.view(), actions, targets).unwrap();
    let analytic = grads.tensors();
    let mut flat = net.flat_params();
    let mut probe = net.clone();
    let mut offset = 0;
    let mut errs = Vec::new();
    for (t, idxs) in analytic.iter().zip(coords) {
        let (mut diff, mut norm) = (0.0, 0.0);
        for &i in idxs {
            let numeric = central_difference(&mut probe, &mut flat, offset + i, x, actions, targets);
            diff += (t[i] - numeric).powi(2);
            norm += t[i].powi(2).max(numeric.powi(2));
        }
        errs.push(if norm == 0.0 { 0.0 } else { (diff / norm).sqrt() });
        offset += t.len();
    }
    errs
}

/// Worst per-tensor error on the full-size network, 40 sampled coordinates per tensor.
pub fn full_network_gradient_check(parameterizations: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = QNetworkSpec::for_aisles(10);
    let mut worst: f64 = 0.0;
    for k in 0..parameterizations {
        let mut net = QNetwork::new(spec, 100 + k).unwrap();
        jitter_biases(&mut net, &mut rng);
        let x = random_batch(&mut rng, &spec, 5);
        let actions: Vec<usize> = (0..5).map(|_| rng.gen_range(0..5)).collect();
        let targets: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let coords: Vec<Vec<usize>> = net
            .clone()
            .tensors_mut()
            .iter()
            .map(|t| (0..40).map(|_| rng.gen_range(0..t.len())).collect())
            .collect();
        for e in fd_errors(&net, &x, &actions, &targets, &coords) {
            worst = worst.max(e);
        }
    }
    worst
}
