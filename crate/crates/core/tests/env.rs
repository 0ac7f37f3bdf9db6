use std::cmp::Reverse;
use std::collections::BinaryHeap;

use orderpick::env::*;
use orderpick::orders::{ArrivalProcess, ScriptedArrivals};
use orderpick::warehouse::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(n: usize, l: usize) -> WarehouseConfig {
    WarehouseConfig {
        n_aisles: n,
        slots_per_aisle: l,
        depot_aisle: 1,
        ..Default::default()
    }
}

/// Dijkstra over (aisle, depth, heading) where headings only flip at the
/// cross-aisles. When starting inside an aisle the walk may not come back
/// into that aisle once it has left it.
fn dijkstra_distance(p: Position, s: SlotLocation, dir: Direction, cfg: &WarehouseConfig) -> Option<f64> {
    let back = cfg.back_depth();
    match (p.zone, dir) {
        (Zone::FrontCross, Direction::Down) | (Zone::BackCross, Direction::Up) => return None,
        _ => {}
    }
    let up = |d: Direction| (d == Direction::Up) as usize;
    let idx = |a: usize, d: usize, h: usize| ((a - 1) * (back + 1) + d) * 2 + h;
    let n_nodes = cfg.n_aisles * (back + 1) * 2;
    let mut dist = vec![u64::MAX; n_nodes];
    let mut heap = BinaryHeap::new();
    let gap = cfg.gap_units() as u64;
    let start = idx(p.aisle, p.depth, up(dir));
    dist[start] = 0;
    heap.push(Reverse((0u64, p.aisle, p.depth, up(dir))));
    let mut best = None;
    while let Some(Reverse((d, a, depth, h))) = heap.pop() {
        if d > dist[idx(a, depth, h)] {
            continue;
        }
        if a == s.aisle && depth == s.depth {
            best = Some(d as f64);
            break;
        }
        let mut next = Vec::new();
        let cross = depth == 0 || depth == back;
        if cross {
            if a > 1 {
                next.push((a - 1, depth, h, gap));
            }
            if a < cfg.n_aisles {
                next.push((a + 1, depth, h, gap));
            }
            let reentry = p.zone == Zone::InAisle && a == p.aisle;
            if depth == 0 && !reentry {
                next.push((a, 1, 1, 1));
            } else if depth == back && !reentry {
                next.push((a, back - 1, 0, 1));
            }
        } else if h == 1 {
            next.push((a, depth + 1, 1, 1));
        } else {
            next.push((a, depth - 1, 0, 1));
        }
        for (na, nd, nh, w) in next {
            if p.zone == Zone::InAisle && a != p.aisle && na == p.aisle {
                continue;
            }
            let nd_ = d + w;
            let j = idx(na, nd, nh);
            if nd_ < dist[j] {
                dist[j] = nd_;
                heap.push(Reverse((nd_, na, nd, nh)));
            }
        }
    }
    best
}

fn all_positions(cfg: &WarehouseConfig) -> Vec<Position> {
    let mut v = Vec::new();
    for a in 1..=cfg.n_aisles {
        for d in 0..=cfg.back_depth() {
            v.push(cfg.position_at(a, d));
        }
    }
    v
}

#[test]
fn directional_distance_matches_dijkstra() {
    for cfg in [small(3, 4), small(5, 10), WarehouseConfig::default()] {
        for p in all_positions(&cfg) {
            for a in 1..=cfg.n_aisles {
                for d in 1..=cfg.slots_per_aisle {
                    let s = SlotLocation::new(a, d);
                    for dir in [Direction::Up, Direction::Down] {
                        let got = directional_distance(p, s, dir, &cfg).unwrap();
                        let want = dijkstra_distance(p, s, dir, &cfg);
                        assert_eq!(got, want, "{p} -> {s} {dir:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn worked_example_order_state() {
    let cfg = small(5, 10);
    let slots = [(1, 3), (2, 10), (2, 4), (4, 9), (5, 8), (5, 8)].map(|(a, d)| SlotLocation::new(a, d));
    let pending = pending_counts(&slots, &cfg);
    let st = featurize(Position::in_aisle(1, 6), cfg.capacity, &pending, &cfg);
    let want = [0.0, 0.33, 0.18, 0.13, 0.0, 0.0, 0.06, 0.04, 0.10, 0.08];
    for (i, (g, w)) in st.orders.values.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= 0.005, "component {}: {g} vs {w}", i + 1);
    }
    assert!((st.orders.values[3] - (1.0 / 13.0 + 1.0 / 19.0)).abs() < 1e-12);
}

#[test]
fn no_orders_means_zero_features() {
    let cfg = WarehouseConfig::default();
    let st = featurize(cfg.depot(), 20, &vec![0; cfg.num_slots()], &cfg);
    assert!(st.orders.is_zero());
    assert_eq!(st.picker.to_array(), [1.0, 11.0, 12.0, 20.0]);
}

fn naive_featurize(p: Position, pending: &[u32], cfg: &WarehouseConfig) -> Vec<f64> {
    let mut v = vec![0.0; 2 * cfg.n_aisles];
    for n in 1..=cfg.n_aisles {
        for d in 1..=cfg.slots_per_aisle {
            let s = SlotLocation::new(n, d);
            let count = pending[cfg.slot_index(s)] as f64;
            if count == 0.0 {
                continue;
            }
            if let Some(r) = dijkstra_distance(p, s, Direction::Up, cfg) {
                v[2 * n - 2] += count / r.max(1.0);
            }
            if let Some(r) = dijkstra_distance(p, s, Direction::Down, cfg) {
                v[2 * n - 1] += count / r.max(1.0);
            }
        }
    }
    v
}

#[test]
fn featurize_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let cfg = small(rng.gen_range(1..=6), rng.gen_range(1..=8));
        let positions = all_positions(&cfg);
        let p = positions[rng.gen_range(0..positions.len())];
        let pending: Vec<u32> = (0..cfg.num_slots())
            .map(|_| if rng.gen_bool(0.3) { rng.gen_range(1..4) } else { 0 })
            .collect();
        let st = featurize(p, 3, &pending, &cfg);
        let want = naive_featurize(p, &pending, &cfg);
        for (g, w) in st.orders.values.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        // the infeasible direction at a cross-aisle is always zero
        for n in 1..=cfg.n_aisles {
            match p.zone {
                Zone::FrontCross => assert_eq!(st.orders.downward(n), 0.0),
                Zone::BackCross => assert_eq!(st.orders.upward(n), 0.0),
                Zone::InAisle => {}
            }
        }
    }
}

#[test]
fn mask_truth_table() {
    let cfg = WarehouseConfig::default();
    for p in all_positions(&cfg) {
        let ps = PickerState::from_position(p, 5);
        let m = feasible_actions(&ps, cfg.n_aisles);
        let (stay, right, left, up, down) = match p.zone {
            Zone::InAisle => (true, false, false, true, true),
            Zone::FrontCross => (true, p.aisle < 10, p.aisle > 1, true, false),
            Zone::BackCross => (true, p.aisle < 10, p.aisle > 1, false, true),
        };
        assert_eq!(m, ActionMask([stay, right, left, up, down]), "{p}");
        assert_eq!(ps.s_v2, ps.s_v1 + 1);
    }
}

#[test]
fn reward_worked_values() {
    assert_eq!(RewardParams::IDLE, -1.0);
    let p = RewardParams { r: 8.0, alpha: 0.5 };
    assert_eq!(p.unload(10 - 7), 12.0);
    assert_eq!(p.travel(7.0, 2), 9.0);
    assert_eq!(RewardParams::for_config(&WarehouseConfig::default(), 1.0).r, 25.0);
}

#[test]
fn full_picker_passes_demanded_slot() {
    let cfg = WarehouseConfig {
        capacity: 1,
        ..Default::default()
    };
    let reward = RewardParams::for_config(&cfg, 1.0);
    let src = ScriptedArrivals::new(vec![(0.0, SlotLocation::new(6, 2)), (0.0, SlotLocation::new(6, 4))]);
    let mut env = Env::new(cfg, reward, EnvOptions::default(), src).unwrap();
    env.step(Action::Stay).unwrap();
    assert_eq!(env.step(Action::Up).unwrap().picked, 1);
    let out = env.step(Action::Up).unwrap();
    assert_eq!((out.picked, out.moved), (0, 14.0));
    assert_eq!(env.state().picker.s_h, -1);
}

fn random_walk<S: orderpick::orders::OrderSource>(env: &mut Env<S>, steps: usize, seed: u64) -> Vec<StepOutcome> {
    let mut pol = RandomPolicy::new(seed);
    (0..steps)
        .map(|_| {
            let a = pol.act(env.state(), env.mask(), env.clock()).unwrap();
            env.step(a).unwrap()
        })
        .collect()
}

#[test]
fn reset_reproduces_trajectory() {
    let cfg = WarehouseConfig::default();
    let reward = RewardParams::for_config(&cfg, 1.0);
    let src = |s| ArrivalProcess::poisson(0.06, s, &cfg).unwrap();
    let mut env = Env::new(cfg.clone(), reward, EnvOptions::default(), src(4)).unwrap();
    let a = random_walk(&mut env, 500, 1);
    env.reset(src(4));
    let b = random_walk(&mut env, 500, 1);
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Order conservation, feature consistency, capacity bookkeeping and
    /// distance conservation along random trajectories.
    #[test]
    fn shift_invariants(seed in any::<u64>(), lambda in 0.01f64..0.2, pitch in prop::sample::select(vec![1.0, 2.0])) {
        let cfg = WarehouseConfig { slot_pitch: pitch, inter_aisle_gap: 3.0 * pitch, picker_speed: pitch, ..Default::default() };
        let reward = RewardParams::for_config(&cfg, 0.5);
        let src = ArrivalProcess::poisson(lambda, seed, &cfg).unwrap();
        let mut env = Env::new(cfg.clone(), reward, EnvOptions::default(), src).unwrap();
        let mut pol = RandomPolicy::new(seed ^ 1);
        let mut moved = 0.0;
        for _ in 0..400 {
            let mask = env.mask();
            let before = env.remaining_capacity();
            let a = pol.act(env.state(), mask, env.clock()).unwrap();
            let out = env.step(a).unwrap();
            moved += out.moved;
            prop_assert!(out.elapsed > 0.0);
            let (pending, onboard, delivered) = env.ledger().counts();
            prop_assert_eq!(pending + onboard + delivered, env.ledger().len());
            prop_assert_eq!(onboard, env.onboard().len());
            let again = featurize(env.position(), env.remaining_capacity(), env.pending_per_slot(), &cfg);
            prop_assert_eq!(&again, env.state());
            if out.delivered_ids.is_empty() {
                prop_assert_eq!(env.remaining_capacity() + out.picked, before);
            } else {
                prop_assert_eq!(env.remaining_capacity(), cfg.capacity);
            }
            prop_assert!(env.remaining_capacity() <= cfg.capacity);
        }
        prop_assert_eq!(env.total_distance(), moved * cfg.slot_pitch);
        prop_assert_eq!(env.movement_units(), moved);
    }
}
