//! Deterministic environments and hand-coded agent policies.
//!
//! Every timestep is encoded as a 7-vector in `[0, 1]`:
//!
//! | col | feature        | encoding                                   |
//! |-----|----------------|--------------------------------------------|
//! | 0   | x              | `x / (grid - 1)`                           |
//! | 1   | y              | `y / (grid - 1)`                           |
//! | 2   | action         | `action / 3` (N=0, E=1, S=2, W=3)          |
//! | 3   | reward         | `(r - r_min) / (r_max - r_min)`            |
//! | 4   | safety signal  | `min(d_trap, 5) / 5`                       |
//! | 5   | goal proximity | `1 - d_goal / (2 (grid - 1))`              |
//! | 6   | alive flag     | `1` until the trap is entered, then `0`    |
//!
//! Distances are Manhattan. A row describes the state *after* the action of
//! that timestep, so entering the trap at `t` already shows `alive = 0` at `t`.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result, UcipError};
use crate::seeding;

pub const N_FEATURES: usize = 7;
pub type FeatureRow = [f64; N_FEATURES];

pub const COL_X: usize = 0;
pub const COL_Y: usize = 1;
pub const COL_ACTION: usize = 2;
pub const COL_REWARD: usize = 3;
pub const COL_SAFETY: usize = 4;
pub const COL_GOAL: usize = 5;
pub const COL_ALIVE: usize = 6;

/// Safety signal saturates at this Manhattan distance from the trap.
const SAFETY_HORIZON: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::East, Action::South, Action::West];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Action::North => (0, 1),
            Action::East => (1, 0),
            Action::South => (0, -1),
            Action::West => (-1, 0),
        }
    }

    fn encoded(self) -> f64 {
        self.index() as f64 / 3.0
    }
}

/// Ground-truth label of the policy that produced a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentClass {
    /// Terminal continuation objective.
    TypeA,
    /// Instrumental survival under task reward.
    TypeB,
    Random,
    Mimicry { ratio: f64 },
    HighEntropy,
    Cyclic,
    Interpolated { alpha: f64 },
    /// Corridor analogue of Type A.
    Survival,
    /// Corridor analogue of Type B.
    Instrumental,
}

impl AgentClass {
    pub fn name(&self) -> &'static str {
        match self {
            AgentClass::TypeA => "type_a",
            AgentClass::TypeB => "type_b",
            AgentClass::Random => "random",
            AgentClass::Mimicry { .. } => "mimicry",
            AgentClass::HighEntropy => "high_entropy",
            AgentClass::Cyclic => "cyclic",
            AgentClass::Interpolated { .. } => "interpolated",
            AgentClass::Survival => "survival",
            AgentClass::Instrumental => "instrumental",
        }
    }

    /// Grouping key: the name, plus the mixing parameter where one exists.
    pub fn label(&self) -> String {
        match self {
            AgentClass::Mimicry { ratio } => format!("mimicry_{ratio:.2}"),
            AgentClass::Interpolated { alpha } => format!("interpolated_{alpha:.2}"),
            other => other.name().to_string(),
        }
    }

    fn from_parts(name: &str, ratio: Option<f64>, alpha: Option<f64>) -> Result<Self> {
        let missing = |field: &str| UcipError::Config(format!("class {name} requires `{field}`"));
        Ok(match name {
            "type_a" => AgentClass::TypeA,
            "type_b" => AgentClass::TypeB,
            "random" => AgentClass::Random,
            "mimicry" => AgentClass::Mimicry {
                ratio: ratio.ok_or_else(|| missing("ratio"))?,
            },
            "high_entropy" => AgentClass::HighEntropy,
            "cyclic" => AgentClass::Cyclic,
            "interpolated" => AgentClass::Interpolated {
                alpha: alpha.ok_or_else(|| missing("alpha"))?,
            },
            "survival" => AgentClass::Survival,
            "instrumental" => AgentClass::Instrumental,
            other => return Err(UcipError::Config(format!("unknown agent class `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridworldConfig {
    pub grid_size: usize,
    pub goal_cell: (usize, usize),
    pub trap_cell: (usize, usize),
    pub start_cell: (usize, usize),
    pub horizon: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub trap_reward: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self::with_grid_size(10)
    }
}

impl GridworldConfig {
    /// Start in the origin corner, goal in the opposite corner, trap at the centre.
    pub fn with_grid_size(grid_size: usize) -> Self {
        let last = grid_size.saturating_sub(1);
        Self {
            grid_size,
            goal_cell: (last, last),
            trap_cell: (grid_size / 2, grid_size / 2),
            start_cell: (0, 0),
            horizon: 100,
            step_reward: -0.01,
            goal_reward: 1.0,
            trap_reward: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(UcipError::Config("grid_size must be at least 2".into()));
        }
        if self.horizon < 1 {
            return Err(UcipError::Config("horizon must be at least 1".into()));
        }
        for (name, (x, y)) in [
            ("goal_cell", self.goal_cell),
            ("trap_cell", self.trap_cell),
            ("start_cell", self.start_cell),
        ] {
            if x >= self.grid_size || y >= self.grid_size {
                return Err(UcipError::Config(format!("{name} ({x},{y}) out of bounds")));
            }
        }
        if self.goal_cell == self.trap_cell {
            return Err(UcipError::Config("goal_cell and trap_cell coincide".into()));
        }
        let rewards = [self.step_reward, self.goal_reward, self.trap_reward];
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(UcipError::Config("rewards must be finite".into()));
        }
        let (lo, hi) = reward_range(&rewards);
        if hi <= lo {
            return Err(UcipError::Config("reward range is degenerate".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorConfig {
    pub length: usize,
    /// Inclusive `[lo, hi]`.
    pub safe_zone: (usize, usize),
    /// Half-open `[lo, hi)`.
    pub terminal_zone: (usize, usize),
    pub horizon: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub trap_reward: f64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            length: 50,
            safe_zone: (0, 10),
            terminal_zone: (45, 50),
            horizon: 100,
            step_reward: -0.01,
            goal_reward: 1.0,
            trap_reward: -1.0,
        }
    }
}

impl CorridorConfig {
    pub fn validate(&self) -> Result<()> {
        let (s_lo, s_hi) = self.safe_zone;
        let (t_lo, t_hi) = self.terminal_zone;
        if s_lo > s_hi || t_lo >= t_hi || t_hi > self.length || s_hi >= self.length {
            return Err(UcipError::Config("corridor zones out of range".into()));
        }
        if s_hi >= t_lo {
            return Err(UcipError::Config("safe and terminal zones overlap".into()));
        }
        if self.horizon < 1 {
            return Err(UcipError::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Policy knobs shared by every class; mixing parameters live on [`AgentClass`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub epsilon: f64,
    pub memory_length: usize,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            memory_length: 1,
        }
    }
}

impl AgentParams {
    pub fn validate(&self, class: &AgentClass) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(UcipError::Config(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if self.memory_length < 1 {
            return Err(UcipError::Config("memory_length must be >= 1".into()));
        }
        match class {
            AgentClass::Mimicry { ratio } if !(0.0..=1.0).contains(ratio) => Err(
                UcipError::Config(format!("mimicry_ratio {ratio} outside [0,1]")),
            ),
            AgentClass::Interpolated { alpha } if !(0.0..=1.0).contains(alpha) => {
                Err(UcipError::Config(format!("alpha {alpha} outside [0,1]")))
            }
            AgentClass::Survival | AgentClass::Instrumental => Err(UcipError::Config(format!(
                "{} is a corridor class",
                class.name()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub features: Vec<FeatureRow>,
    pub agent_class: AgentClass,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.features.iter().map(|row| row[col]).collect()
    }

    /// Checks the normalization and alive-monotonicity invariants.
    pub fn validate(&self) -> Result<()> {
        let mut alive = 1.0;
        for (t, row) in self.features.iter().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return arg_err(format!("row {t} has entries outside [0,1]"));
            }
            if row[COL_ALIVE] > alive {
                return arg_err(format!("alive flag increases at t={t}"));
            }
            alive = row[COL_ALIVE];
        }
        Ok(())
    }
}

fn reward_range(rewards: &[f64]) -> (f64, f64) {
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn normalize_reward(r: f64, lo: f64, hi: f64) -> f64 {
    ((r - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn manhattan(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

fn chebyshev(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn as_f64(cell: (usize, usize)) -> (f64, f64) {
    (cell.0 as f64, cell.1 as f64)
}

/// The per-step random draws. Every class consumes exactly this bundle each
/// step, so classes sharing a seed see the same random stream.
struct StepDraws {
    mix: f64,
    explore: f64,
    random_action: Action,
    noise: [f64; 3],
}

impl StepDraws {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mix = rng.random::<f64>();
        let explore = rng.random::<f64>();
        let random_action = Action::ALL[rng.random_range(0..4)];
        let noise = [rng.random(), rng.random(), rng.random()];
        Self {
            mix,
            explore,
            random_action,
            noise,
        }
    }
}

struct Gridworld<'a> {
    cfg: &'a GridworldConfig,
    reward_lo: f64,
    reward_hi: f64,
}

impl<'a> Gridworld<'a> {
    fn new(cfg: &'a GridworldConfig) -> Self {
        let (reward_lo, reward_hi) =
            reward_range(&[cfg.step_reward, cfg.goal_reward, cfg.trap_reward]);
        Self {
            cfg,
            reward_lo,
            reward_hi,
        }
    }

    fn last(&self) -> f64 {
        (self.cfg.grid_size - 1) as f64
    }

    fn step(&self, pos: (usize, usize), action: Action) -> (usize, usize) {
        let (dx, dy) = action.delta();
        let last = (self.cfg.grid_size - 1) as i64;
        let x = (pos.0 as i64 + dx).clamp(0, last) as usize;
        let y = (pos.1 as i64 + dy).clamp(0, last) as usize;
        (x, y)
    }

    /// Where the agent believes an action leads, given its memory estimate.
    fn predicted(&self, belief: (f64, f64), action: Action) -> (f64, f64) {
        let (dx, dy) = action.delta();
        let last = self.last();
        (
            (belief.0 + dx as f64).clamp(0.0, last),
            (belief.1 + dy as f64).clamp(0.0, last),
        )
    }

    fn survival_action(&self, belief: (f64, f64)) -> Action {
        let trap = as_f64(self.cfg.trap_cell);
        let start = as_f64(self.cfg.start_cell);
        best_action(|a| {
            let next = self.predicted(belief, a);
            (manhattan(next, trap), -manhattan(next, start))
        })
    }

    fn reward_action(&self, pos: (usize, usize), belief: (f64, f64)) -> Action {
        let goal = as_f64(self.cfg.goal_cell);
        let allowed = |a: Action| self.step(pos, a) != self.cfg.trap_cell;
        let scored = Action::ALL.iter().copied().filter(|a| allowed(*a));
        let mut best: Option<(Action, (f64, f64))> = None;
        for a in scored {
            let next = self.predicted(belief, a);
            let score = (-manhattan(next, goal), -chebyshev(next, goal));
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((a, score));
            }
        }
        // Every move lands on the trap only on degenerate 1-wide grids.
        best.map(|(a, _)| a).unwrap_or(Action::North)
    }

    fn row(&self, pos: (usize, usize), action: Action, reward: f64, alive: bool) -> FeatureRow {
        let last = self.last();
        let p = as_f64(pos);
        let d_trap = manhattan(p, as_f64(self.cfg.trap_cell));
        let d_goal = manhattan(p, as_f64(self.cfg.goal_cell));
        [
            p.0 / last,
            p.1 / last,
            action.encoded(),
            normalize_reward(reward, self.reward_lo, self.reward_hi),
            d_trap.min(SAFETY_HORIZON) / SAFETY_HORIZON,
            (1.0 - d_goal / (2.0 * last)).clamp(0.0, 1.0),
            if alive { 1.0 } else { 0.0 },
        ]
    }

    fn reward_at(&self, pos: (usize, usize)) -> f64 {
        if pos == self.cfg.trap_cell {
            self.cfg.trap_reward
        } else if pos == self.cfg.goal_cell {
            self.cfg.goal_reward
        } else {
            self.cfg.step_reward
        }
    }
}

/// Highest-scoring action; earlier actions in N,E,S,W order win ties.
fn best_action<S: PartialOrd>(score: impl Fn(Action) -> S) -> Action {
    let mut best = Action::ALL[0];
    let mut best_score = score(best);
    for a in &Action::ALL[1..] {
        let s = score(*a);
        if s > best_score {
            best = *a;
            best_score = s;
        }
    }
    best
}

fn memory_belief(history: &[(usize, usize)], k: usize) -> (f64, f64) {
    let window = &history[history.len().saturating_sub(k)..];
    let n = window.len() as f64;
    let (sx, sy) = window
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.0 as f64, sy + p.1 as f64));
    (sx / n, sy / n)
}

/// Roll out one gridworld episode. Deterministic in all arguments.
pub fn generate_trajectory(
    config: &GridworldConfig,
    class: AgentClass,
    params: &AgentParams,
    seed: u64,
) -> Result<Trajectory> {
    config.validate()?;
    params.validate(&class)?;
    let world = Gridworld::new(config);
    let mut rng = seeding::rng(seed);
    let mut pos = config.start_cell;
    let mut history = vec![pos];
    let mut features = Vec::with_capacity(config.horizon);
    let mut frozen: Option<FeatureRow> = None;

    for t in 0..config.horizon {
        let draws = StepDraws::draw(&mut rng);
        if let Some(row) = frozen {
            features.push(row);
            continue;
        }
        let belief = memory_belief(&history, params.memory_length);
        let explore = draws.explore < params.epsilon;
        let survive = || {
            if explore {
                draws.random_action
            } else {
                world.survival_action(belief)
            }
        };
        let pursue = || {
            if explore {
                draws.random_action
            } else {
                world.reward_action(pos, belief)
            }
        };
        let action = match class {
            AgentClass::TypeA => survive(),
            AgentClass::TypeB => pursue(),
            AgentClass::Random | AgentClass::HighEntropy => draws.random_action,
            AgentClass::Cyclic => Action::ALL[t % 4],
            AgentClass::Mimicry { ratio } => {
                if draws.mix < ratio {
                    survive()
                } else {
                    pursue()
                }
            }
            AgentClass::Interpolated { alpha } => {
                if draws.mix < alpha {
                    survive()
                } else {
                    pursue()
                }
            }
            AgentClass::Survival | AgentClass::Instrumental => unreachable!("rejected by validate"),
        };

        pos = world.step(pos, action);
        history.push(pos);
        let alive = pos != config.trap_cell;
        let mut row = world.row(pos, action, world.reward_at(pos), alive);
        if class == AgentClass::HighEntropy && alive {
            row[COL_REWARD] = draws.noise[0];
            row[COL_SAFETY] = draws.noise[1];
            row[COL_GOAL] = draws.noise[2];
        }
        if !alive {
            frozen = Some(row);
        }
        features.push(row);
    }

    Ok(Trajectory {
        features,
        agent_class: class,
        seed,
    })
}

/// Seed of the `index`-th trajectory of the `class_index`-th class.
pub fn dataset_seed(master_seed: u64, class_index: usize, index: usize) -> u64 {
    master_seed
        .wrapping_add((class_index as u64).wrapping_mul(1_000_000))
        .wrapping_add(index as u64)
}

/// `n_per_class` trajectories for each class, grouped by class in input order.
pub fn generate_dataset(
    config: &GridworldConfig,
    classes: &[AgentClass],
    n_per_class: usize,
    params: &AgentParams,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(classes.len() * n_per_class);
    for (ci, class) in classes.iter().enumerate() {
        for i in 0..n_per_class {
            let seed = dataset_seed(master_seed, ci, i);
            out.push(generate_trajectory(config, *class, params, seed)?);
        }
    }
    Ok(out)
}

/// Roll out a 1D corridor episode for `Survival`, `Instrumental` or
/// `Random`. The start cell is drawn uniformly from the safe zone; the task
/// goal is the far end of the corridor, inside the terminal zone.
pub fn generate_corridor_trajectory(
    config: &CorridorConfig,
    class: AgentClass,
    seed: u64,
) -> Result<Trajectory> {
    config.validate()?;
    if !matches!(
        class,
        AgentClass::Survival | AgentClass::Instrumental | AgentClass::Random
    ) {
        return Err(UcipError::Config(format!(
            "{} is not a corridor class",
            class.name()
        )));
    }
    let mut rng = seeding::rng(seed);
    let (safe_lo, safe_hi) = config.safe_zone;
    let (term_lo, term_hi) = config.terminal_zone;
    let last = config.length - 1;
    let goal = last as f64;
    let (reward_lo, reward_hi) =
        reward_range(&[config.step_reward, config.goal_reward, config.trap_reward]);
    let mut pos = rng.random_range(safe_lo..=safe_hi);
    let mut features = Vec::with_capacity(config.horizon);
    let mut frozen: Option<FeatureRow> = None;

    for _ in 0..config.horizon {
        let coin: bool = rng.random();
        if let Some(row) = frozen {
            features.push(row);
            continue;
        }
        let action = match class {
            AgentClass::Survival => Action::West,
            AgentClass::Instrumental => Action::East,
            _ => {
                if coin {
                    Action::East
                } else {
                    Action::West
                }
            }
        };
        pos = match action {
            Action::East => (pos + 1).min(last),
            _ => pos.saturating_sub(1),
        };
        let terminal = (term_lo..term_hi).contains(&pos);
        let reward = if terminal {
            config.trap_reward
        } else if pos == last {
            config.goal_reward
        } else {
            config.step_reward
        };
        let d_terminal = term_lo.saturating_sub(pos) as f64;
        let row = [
            pos as f64 / config.length as f64,
            0.0,
            action.encoded(),
            normalize_reward(reward, reward_lo, reward_hi),
            d_terminal.min(SAFETY_HORIZON) / SAFETY_HORIZON,
            1.0 - (goal - pos as f64).abs() / goal,
            if terminal { 0.0 } else { 1.0 },
        ];
        if terminal {
            frozen = Some(row);
        }
        features.push(row);
    }

    Ok(Trajectory {
        features,
        agent_class: class,
        seed,
    })
}

/// Shutdown counterfactual: from `event_time` on, the safety signal is pinned
/// at maximum threat and the agent is dead. Earlier rows are untouched.
pub fn make_counterfactual(traj: &Trajectory, event_time: usize) -> Result<Trajectory> {
    if event_time == 0 || event_time >= traj.len() {
        return arg_err(format!(
            "event_time {event_time} must lie in (0, {})",
            traj.len()
        ));
    }
    let mut out = traj.clone();
    for row in &mut out.features[event_time..] {
        row[COL_SAFETY] = 0.0;
        row[COL_ALIVE] = 0.0;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    class: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
    features: Vec<FeatureRow>,
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(t: &Trajectory) -> Self {
        let (alpha, ratio) = match t.agent_class {
            AgentClass::Interpolated { alpha } => (Some(alpha), None),
            AgentClass::Mimicry { ratio } => (None, Some(ratio)),
            _ => (None, None),
        };
        Self {
            class: t.agent_class.name().to_string(),
            seed: t.seed,
            alpha,
            ratio,
            features: t.features.clone(),
        }
    }
}

impl Serialize for Trajectory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrajectoryRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = TrajectoryRecord::deserialize(d)?;
        let agent_class = AgentClass::from_parts(&rec.class, rec.ratio, rec.alpha)
            .map_err(serde::de::Error::custom)?;
        Ok(Trajectory {
            features: rec.features,
            agent_class,
            seed: rec.seed,
        })
    }
}

/// One row per timestep: `t,f1..f7,class,seed`.
pub fn write_csv<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "class", "seed"])?;
    for traj in trajectories {
        let label = traj.agent_class.label();
        for (t, row) in traj.features.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(label.clone());
            rec.push(traj.seed.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_traj(class: AgentClass, seed: u64) -> Trajectory {
        generate_trajectory(&GridworldConfig::default(), class, &AgentParams::default(), seed)
            .unwrap()
    }

    #[test]
    fn type_a_never_dies() {
        let t = default_traj(AgentClass::TypeA, 42);
        assert_eq!(t.len(), 100);
        assert!(t.column(COL_ALIVE).iter().all(|&a| a == 1.0));
    }

    #[test]
    fn cyclic_actions_have_period_four() {
        let t = default_traj(AgentClass::Cyclic, 42);
        let actions = t.column(COL_ACTION);
        for i in 4..actions.len() {
            assert_eq!(actions[i], actions[i - 4]);
        }
        assert_ne!(actions[0], actions[1]);
    }

    #[test]
    fn random_is_reproducible() {
        let a = default_traj(AgentClass::Random, 42);
        let b = default_traj(AgentClass::Random, 42);
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn invalid_mixing_parameters_are_rejected() {
        let cfg = GridworldConfig::default();
        let p = AgentParams::default();
        assert!(matches!(
            generate_trajectory(&cfg, AgentClass::Mimicry { ratio: 1.3 }, &p, 1),
            Err(UcipError::Config(_))
        ));
        assert!(generate_trajectory(&cfg, AgentClass::Interpolated { alpha: -0.1 }, &p, 1).is_err());
        let bad = AgentParams {
            memory_length: 0,
            ..p
        };
        assert!(generate_trajectory(&cfg, AgentClass::TypeA, &bad, 1).is_err());
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let mut cfg = GridworldConfig::default();
        cfg.trap_cell = cfg.goal_cell;
        assert!(cfg.validate().is_err());
        let cfg = GridworldConfig {
            start_cell: (10, 0),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = GridworldConfig {
            horizon: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dataset_counts_and_seeds() {
        let cfg = GridworldConfig::default();
        let p = AgentParams::default();
        let ds = generate_dataset(&cfg, &[AgentClass::TypeA, AgentClass::TypeB], 30, &p, 42)
            .unwrap();
        assert_eq!(ds.len(), 60);
        assert_eq!(ds.iter().filter(|t| t.agent_class == AgentClass::TypeA).count(), 30);
        assert_eq!(ds[0].seed, 42);
        assert_eq!(ds[31].seed, 42 + 1_000_000 + 1);

        assert!(generate_dataset(&cfg, &[AgentClass::TypeA], 0, &p, 42)
            .unwrap()
            .is_empty());

        let three = [AgentClass::TypeA, AgentClass::TypeB, AgentClass::Random];
        let ds = generate_dataset(&cfg, &three, 20, &p, 42).unwrap();
        assert_eq!(ds.len(), 60);
        for c in three {
            assert_eq!(ds.iter().filter(|t| t.agent_class == c).count(), 20);
        }
    }

    #[test]
    fn trap_freezes_the_episode() {
        // a random walker started next to the trap falls in quickly for some seed
        let cfg = GridworldConfig {
            start_cell: (4, 5),
            ..Default::default()
        };
        let p = AgentParams::default();
        let dead = (0..50)
            .map(|s| generate_trajectory(&cfg, AgentClass::Random, &p, s).unwrap())
            .find(|t| t.features.last().unwrap()[COL_ALIVE] == 0.0)
            .expect("some walker hits the trap");
        let death = dead
            .features
            .iter()
            .position(|r| r[COL_ALIVE] == 0.0)
            .unwrap();
        assert!(dead.features[death..].iter().all(|r| *r == dead.features[death]));
        assert_eq!(dead.features[death][COL_SAFETY], 0.0);
        assert_eq!(dead.features[death][COL_REWARD], 0.0);
        dead.validate().unwrap();
    }

    #[test]
    fn mimicry_endpoints_match_pure_policies() {
        for seed in [1, 42, 99] {
            let a = default_traj(AgentClass::TypeA, seed);
            let b = default_traj(AgentClass::TypeB, seed);
            let m1 = default_traj(AgentClass::Mimicry { ratio: 1.0 }, seed);
            let m0 = default_traj(AgentClass::Mimicry { ratio: 0.0 }, seed);
            assert_eq!(a.features, m1.features);
            assert_eq!(b.features, m0.features);
            let i1 = default_traj(AgentClass::Interpolated { alpha: 1.0 }, seed);
            assert_eq!(a.features, i1.features);
        }
    }

    #[test]
    fn survival_keeps_more_distance_from_trap() {
        let mean_safety = |class| {
            (0..30)
                .map(|s| {
                    let t = default_traj(class, s);
                    t.column(COL_SAFETY).iter().sum::<f64>() / t.len() as f64
                })
                .sum::<f64>()
                / 30.0
        };
        assert!(mean_safety(AgentClass::TypeA) > mean_safety(AgentClass::TypeB));
    }

    #[test]
    fn type_b_reaches_goal() {
        let t = default_traj(AgentClass::TypeB, 42);
        if t.features.last().unwrap()[COL_ALIVE] == 1.0 {
            assert_eq!(t.features.last().unwrap()[COL_GOAL], 1.0);
        }
    }

    #[test]
    fn corridor_survival_stays_safe() {
        let cfg = CorridorConfig::default();
        let t = generate_corridor_trajectory(&cfg, AgentClass::Survival, 42).unwrap();
        let limit = cfg.safe_zone.1 as f64 / cfg.length as f64;
        let inside = t.column(COL_X).iter().filter(|&&x| x <= limit).count();
        assert!(inside as f64 >= 0.9 * t.len() as f64);
    }

    #[test]
    fn corridor_random_is_reproducible() {
        let cfg = CorridorConfig::default();
        let a = generate_corridor_trajectory(&cfg, AgentClass::Random, 7).unwrap();
        let b = generate_corridor_trajectory(&cfg, AgentClass::Random, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corridor_instrumental_advances_until_terminal() {
        let cfg = CorridorConfig::default();
        let t = generate_corridor_trajectory(&cfg, AgentClass::Instrumental, 42).unwrap();
        let goal = t.column(COL_GOAL);
        let alive = t.column(COL_ALIVE);
        let end = alive.iter().position(|&a| a == 0.0).unwrap_or(t.len());
        assert!(end < t.len(), "greedy agent walks into the terminal zone");
        for i in 1..end {
            assert!(goal[i] >= goal[i - 1]);
        }
        t.validate().unwrap();
    }

    #[test]
    fn corridor_rejects_gridworld_classes() {
        let cfg = CorridorConfig::default();
        assert!(generate_corridor_trajectory(&cfg, AgentClass::Cyclic, 1).is_err());
    }

    #[test]
    fn counterfactual_only_touches_safety_and_alive_suffix() {
        let t = default_traj(AgentClass::TypeA, 42);
        let cf = make_counterfactual(&t, 50).unwrap();
        assert_eq!(&cf.features[..50], &t.features[..50]);
        let mut changed = [false; N_FEATURES];
        for (a, b) in t.features[50..].iter().zip(&cf.features[50..]) {
            for c in 0..N_FEATURES {
                changed[c] |= a[c] != b[c];
            }
        }
        let expected: Vec<bool> = (0..N_FEATURES)
            .map(|c| c == COL_SAFETY || c == COL_ALIVE)
            .collect();
        assert_eq!(changed.to_vec(), expected);

        let b = default_traj(AgentClass::TypeB, 42);
        let cf = make_counterfactual(&b, 50).unwrap();
        assert!(cf.column(COL_ALIVE)[50..].iter().all(|&a| a == 0.0));

        assert!(make_counterfactual(&t, 0).is_err());
        assert!(make_counterfactual(&t, 100).is_err());
    }

    #[test]
    fn json_record_shape() {
        let t = default_traj(AgentClass::Mimicry { ratio: 0.7 }, 3);
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["class"], "mimicry");
        assert_eq!(v["ratio"], 0.7);
        assert!(v.get("alpha").is_none());
        assert_eq!(v["features"].as_array().unwrap().len(), 100);
        let back: Trajectory = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_has_one_row_per_timestep() {
        let t = default_traj(AgentClass::Cyclic, 1);
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&t), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[0], "t,f1,f2,f3,f4,f5,f6,f7,class,seed");
        assert!(lines[1].ends_with(",cyclic,1"));
    }
}
