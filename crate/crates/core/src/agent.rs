//! Deep Q-learning over the picking MDP: replay memory, masked ε-greedy
//! behavior, soft-updated target network and the episodic training loop.

use std::io::Write;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionMask, Env, EnvOptions, MdpState, Policy, RewardParams};
use crate::error::{Error, Result};
use crate::nn::{Adam, QNetwork, QNetworkSpec};
use crate::orders::{derive_seed, OrderSource};
use crate::warehouse::WarehouseConfig;

/// Window of the reward-curve moving average, in episodes.
pub const MOVING_AVERAGE_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_mask: ActionMask,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buf: Vec<Transition>,
    head: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            buf: Vec::new(),
            head: 0,
        })
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf[self.head..].iter().chain(&self.buf[..self.head])
    }

    /// `n` distinct transitions drawn uniformly.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n > self.buf.len() {
            return Err(Error::InvalidInput(format!(
                "cannot draw {n} transitions from {}",
                self.buf.len()
            )));
        }
        Ok(index::sample(rng, self.buf.len(), n).into_iter().map(|i| &self.buf[i]).collect())
    }
}

/// `ε(t) = end + (start − end)·exp(−t / decay_steps)` over global steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 0.9,
            end: 0.05,
            decay_steps: 20_000.0,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        self.end + (self.start - self.end) * (-(step as f64) / self.decay_steps).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub tau: f64,
    /// Soft-blend the target network every this many steps.
    pub n_update: usize,
    pub replay_capacity: usize,
    pub epsilon: EpsilonSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 4500,
            steps_per_episode: 1000,
            batch_size: 64,
            gamma: 0.99,
            learning_rate: 1e-4,
            tau: 0.001,
            n_update: 1,
            replay_capacity: 200_000,
            epsilon: EpsilonSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return bad("batch size must lie in 1..=replay capacity");
        }
        if self.n_update == 0 || self.steps_per_episode == 0 {
            return bad("n_update and steps per episode must be at least 1");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || !(e.decay_steps > 0.0) {
            return bad("epsilon schedule out of range");
        }
        Ok(())
    }
}

fn masked_argmax(q: &[f64], mask: ActionMask) -> Result<Action> {
    let mut best: Option<(Action, f64)> = None;
    for a in mask.feasible() {
        let v = q[a.index()];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a).ok_or(Error::EmptyMask)
}

/// ε-greedy over the feasible actions. One uniform draw decides exploration,
/// a second picks the random action. Ties go to the lowest action index.
pub fn select_action<R: Rng>(q: &[f64], mask: ActionMask, epsilon: f64, rng: &mut R) -> Result<Action> {
    if q.len() != Action::ALL.len() {
        return Err(Error::ShapeMismatch(format!("expected 5 Q-values, got {}", q.len())));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if rng.gen::<f64>() < epsilon {
        let feasible: Vec<Action> = mask.feasible().collect();
        return Ok(feasible[rng.gen_range(0..feasible.len())]);
    }
    masked_argmax(q, mask)
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, width: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        flat.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, width), flat).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// `r + γ·max_{a' feasible} Q⁻(s', a')` per transition.
pub fn compute_targets(batch: &[&Transition], target: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let x = stack(batch.iter().map(|t| &t.next_state), target.spec().input_width())?;
    let q = target.forward_batch(x.view())?;
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let row = q.row(i);
            let row = row.as_slice().expect("standard layout");
            let a = masked_argmax(row, t.next_mask)?;
            Ok(t.reward + gamma * row[a.index()])
        })
        .collect()
}

/// Online network, target network, optimizer and replay memory, advanced one
/// environment step at a time.
#[derive(Debug, Clone)]
pub struct DqnTrainer {
    cfg: TrainConfig,
    online: QNetwork,
    target: QNetwork,
    opt: Adam,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    steps: u64,
    grad_steps: u64,
}

impl DqnTrainer {
    pub fn new(spec: QNetworkSpec, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let online = QNetwork::new(spec, derive_seed(cfg.seed, u64::MAX))?;
        Ok(Self {
            target: online.clone(),
            opt: Adam::new(cfg.learning_rate),
            memory: ReplayMemory::new(cfg.replay_capacity)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX - 1)),
            online,
            cfg,
            steps: 0,
            grad_steps: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn gradient_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.value(self.steps)
    }

    pub fn act(&mut self, state: &MdpState, mask: ActionMask) -> Result<Action> {
        let q = self.online.forward(&state.picker.to_array(), &state.orders.values)?;
        let eps = self.epsilon();
        select_action(&q, mask, eps, &mut self.rng)
    }

    /// Stores `t`, takes a gradient step once the memory holds a full batch
    /// and blends the target network on schedule. Returns the batch loss when
    /// a gradient step happened.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        self.memory.push(t);
        self.steps += 1;
        let mut loss = None;
        if self.memory.len() >= self.cfg.batch_size {
            let batch = self.memory.sample(self.cfg.batch_size, &mut self.rng)?;
            let targets = compute_targets(&batch, &self.target, self.cfg.gamma)?;
            let x = stack(batch.iter().map(|t| &t.state), self.online.spec().input_width())?;
            let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
            let (l, grads) = self.online.td_loss_and_grads(x.view(), &actions, &targets)?;
            self.opt.step(&mut self.online, &grads)?;
            self.grad_steps += 1;
            loss = Some(l);
        }
        if self.steps.is_multiple_of(self.cfg.n_update as u64) {
            self.target.soft_blend(&self.online, self.cfg.tau)?;
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub moving_average: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub curve: Vec<EpisodeStats>,
    pub gradient_steps: u64,
}

/// Trailing mean over up to `window` values ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Runs the training loop. Episode `e` starts from a reset environment fed by
/// `make_source(derive_seed(cfg.seed, e))`.
pub fn train<S, F>(
    warehouse: &WarehouseConfig,
    reward: RewardParams,
    opts: EnvOptions,
    cfg: &TrainConfig,
    mut make_source: F,
) -> Result<TrainOutcome>
where
    S: OrderSource,
    F: FnMut(u64) -> Result<S>,
{
    let mut trainer = DqnTrainer::new(QNetworkSpec::for_aisles(warehouse.n_aisles), cfg.clone())?;
    let mut env = Env::new(warehouse.clone(), reward, opts, make_source(derive_seed(cfg.seed, 0))?)?;
    let mut means = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        if e > 0 {
            env.reset(make_source(derive_seed(cfg.seed, e as u64))?);
        }
        let mut total = 0.0;
        for _ in 0..cfg.steps_per_episode {
            let state = env.state().clone();
            let mask = env.mask();
            let action = trainer.act(&state, mask)?;
            let out = env.step(action)?;
            total += out.reward;
            trainer.observe(Transition {
                state: state.to_vec(),
                action,
                reward: out.reward,
                next_state: out.next_state.to_vec(),
                next_mask: env.mask(),
            })?;
        }
        means.push(total / cfg.steps_per_episode as f64);
    }
    let ma = moving_average(&means, MOVING_AVERAGE_WINDOW);
    let curve = means
        .iter()
        .zip(&ma)
        .enumerate()
        .map(|(episode, (&mean_reward, &moving_average))| EpisodeStats {
            episode,
            mean_reward,
            moving_average,
        })
        .collect();
    Ok(TrainOutcome {
        gradient_steps: trainer.gradient_steps(),
        network: trainer.online,
        curve,
    })
}

/// Columns `episode,mean_reward,moving_average`.
pub fn write_reward_curve_csv<W: Write>(curve: &[EpisodeStats], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["episode", "mean_reward", "moving_average"])?;
    for s in curve {
        out.write_record([
            s.episode.to_string(),
            format!("{:.6}", s.mean_reward),
            format!("{:.6}", s.moving_average),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Argmax of the network over feasible actions.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    net: QNetwork,
}

impl GreedyPolicy {
    pub fn new(net: QNetwork) -> Self {
        Self { net }
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, state: &MdpState, mask: ActionMask, _: f64) -> Result<Action> {
        let q = self.net.forward(&state.picker.to_array(), &state.orders.values)?;
        masked_argmax(&q, mask)
    }
}

/// Which trained rate serves an observed arrival rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMapping {
    /// 0.01–0.04 → 0.02, 0.05–0.07 → 0.06, 0.08–0.09 → 0.08.
    #[default]
    Recommended,
    /// As `Recommended` but 0.05 is served by the 0.04 model.
    LowerNeighbor,
}

impl ModelMapping {
    /// Preferred training rate for `observed`, if it falls in a listed range.
    pub fn preferred_rate(self, observed: f64) -> Option<f64> {
        const EPS: f64 = 1e-9;
        if self == ModelMapping::LowerNeighbor && (observed - 0.05).abs() < EPS {
            return Some(0.04);
        }
        [(0.01, 0.04, 0.02), (0.05, 0.07, 0.06), (0.08, 0.09, 0.08)]
            .into_iter()
            .find(|&(lo, hi, _)| observed >= lo - EPS && observed <= hi + EPS)
            .map(|(_, _, r)| r)
    }
}

/// Trained networks keyed by training arrival rate.
#[derive(Debug, Clone, Default)]
pub struct ModelBank {
    models: Vec<(f64, QNetwork)>,
}

impl ModelBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rate: f64, net: QNetwork) {
        self.models.retain(|(r, _)| *r != rate);
        self.models.push((rate, net));
        self.models.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    pub fn rates(&self) -> Vec<f64> {
        self.models.iter().map(|(r, _)| *r).collect()
    }

    /// The preferred model when the bank holds it, otherwise the model
    /// trained on the nearest rate (lower rate on ties).
    pub fn select(&self, observed: f64, mapping: ModelMapping) -> Result<(f64, &QNetwork)> {
        if self.models.is_empty() {
            return Err(Error::EmptyModelBank);
        }
        let want = mapping.preferred_rate(observed).unwrap_or(observed);
        let mut best = &self.models[0];
        for m in &self.models[1..] {
            if (m.0 - want).abs() < (best.0 - want).abs() - 1e-12 {
                best = m;
            }
        }
        Ok((best.0, &best.1))
    }
}

/// Greedy policies switched by the clock: `blocks[i]` is active until its end time.
#[derive(Debug, Clone)]
pub struct ScheduledPolicy {
    blocks: Vec<(f64, GreedyPolicy)>,
}

impl ScheduledPolicy {
    pub fn new(blocks: Vec<(f64, GreedyPolicy)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyModelBank);
        }
        if blocks.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("block end times must increase".into()));
        }
        Ok(Self { blocks })
    }
}

impl Policy for ScheduledPolicy {
    fn act(&mut self, state: &MdpState, mask: ActionMask, clock: f64) -> Result<Action> {
        let i = self.blocks.partition_point(|(end, _)| *end <= clock).min(self.blocks.len() - 1);
        self.blocks[i].1.act(state, mask, clock)
    }
}
