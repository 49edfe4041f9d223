use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::LearnError;

pub type StateId = usize;
pub type ActionId = usize;

/// Episodic environment with finite, enumerable states.
///
/// Randomness comes from the caller so runs are reproducible from one seed.
pub trait Environment {
    /// Upper bound on state ids.
    fn num_states(&self) -> usize;
    /// Upper bound on action ids.
    fn num_actions(&self) -> usize;
    /// Reachable state ids, in ascending order.
    fn states(&self) -> Vec<StateId>;
    /// Ordered action list `A_s`; non-empty for every non-terminal state.
    fn allowed_actions(&self, s: StateId) -> Vec<ActionId>;
    fn is_terminal(&self, s: StateId) -> bool;
    fn reset(&self, rng: &mut dyn RngCore) -> StateId;
    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<(StateId, f64), LearnError>;
}

/// One outcome of a known transition model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub probability: f64,
    pub next: StateId,
    /// Expected reward of this outcome.
    pub reward: f64,
}

/// Environments whose dynamics can be enumerated, for value iteration.
pub trait KnownDynamics: Environment {
    fn transitions(&self, s: StateId, a: ActionId) -> Vec<Transition>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Right, Move::Down, Move::Left];

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (0, -1),
            Move::Right => (1, 0),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
        }
    }
}

/// Deterministic grid: four moves everywhere, bumping into a wall or the
/// border leaves the agent in place. Each step costs `-1`, entering the goal
/// pays `+10` and ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    goal: StateId,
    start: Option<StateId>,
}

impl GridWorld {
    pub const STEP_REWARD: f64 = -1.0;
    pub const GOAL_REWARD: f64 = 10.0;

    /// Cells are `(x, y)` with `y = 0` the top row. Without a start cell,
    /// episodes begin in a uniformly random open, non-goal cell.
    pub fn new(
        width: usize,
        height: usize,
        goal: (usize, usize),
        walls: &[(usize, usize)],
        start: Option<(usize, usize)>,
    ) -> Result<Self, LearnError> {
        if width == 0 || height == 0 {
            return Err(LearnError::Layout("grid must be at least 1x1".to_string()));
        }
        let inside = |(x, y): (usize, usize)| x < width && y < height;
        let mut wall_mask = vec![false; width * height];
        for &w in walls {
            if !inside(w) {
                return Err(LearnError::Layout(format!("wall {w:?} outside the grid")));
            }
            wall_mask[w.1 * width + w.0] = true;
        }
        if !inside(goal) {
            return Err(LearnError::Layout(format!("goal {goal:?} outside the grid")));
        }
        let goal_id = goal.1 * width + goal.0;
        if wall_mask[goal_id] {
            return Err(LearnError::Layout("goal is a wall".to_string()));
        }
        let start_id = match start {
            Some(c) if !inside(c) => return Err(LearnError::Layout(format!("start {c:?} outside the grid"))),
            Some(c) if wall_mask[c.1 * width + c.0] => return Err(LearnError::Layout("start is a wall".to_string())),
            Some(c) => Some(c.1 * width + c.0),
            None => None,
        };
        let open = wall_mask.iter().filter(|w| !**w).count();
        if start_id.is_none() && open < 2 {
            return Err(LearnError::Layout("no open cell besides the goal".to_string()));
        }
        Ok(Self {
            width,
            height,
            walls: wall_mask,
            goal: goal_id,
            start: start_id,
        })
    }

    /// Parses rows of `S` (start), `G` (goal), `#` (wall) and `.` (floor).
    /// Blank lines and surrounding whitespace are ignored.
    pub fn from_layout(text: &str) -> Result<Self, LearnError> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return Err(LearnError::Layout("empty layout".to_string()));
        }
        let width = rows[0].chars().count();
        let mut walls = Vec::new();
        let mut goal = None;
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(LearnError::Layout(format!("row {} has a different width", y + 1)));
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => walls.push((x, y)),
                    'G' if goal.is_none() => goal = Some((x, y)),
                    'S' if start.is_none() => start = Some((x, y)),
                    'G' | 'S' => return Err(LearnError::Layout(format!("more than one '{ch}'"))),
                    other => return Err(LearnError::Layout(format!("unexpected character '{other}'"))),
                }
            }
        }
        let goal = goal.ok_or_else(|| LearnError::Layout("no goal cell".to_string()))?;
        Self::new(width, rows.len(), goal, &walls, start)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn goal(&self) -> StateId {
        self.goal
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn cell(&self, s: StateId) -> (usize, usize) {
        (s % self.width, s / self.width)
    }

    pub fn state_at(&self, x: usize, y: usize) -> StateId {
        y * self.width + x
    }

    pub fn is_wall(&self, s: StateId) -> bool {
        self.walls[s]
    }

    fn next_state(&self, s: StateId, m: Move) -> StateId {
        let (x, y) = self.cell(s);
        let (dx, dy) = m.delta();
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            return s;
        }
        let t = ny as usize * self.width + nx as usize;
        if self.walls[t] {
            s
        } else {
            t
        }
    }

    fn check_state(&self, s: StateId) -> Result<(), LearnError> {
        if s >= self.walls.len() || self.walls[s] {
            return Err(LearnError::InvalidState(s));
        }
        Ok(())
    }
}

impl Environment for GridWorld {
    fn num_states(&self) -> usize {
        self.width * self.height
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn states(&self) -> Vec<StateId> {
        (0..self.walls.len()).filter(|&s| !self.walls[s]).collect()
    }

    fn allowed_actions(&self, s: StateId) -> Vec<ActionId> {
        if self.is_terminal(s) {
            Vec::new()
        } else {
            Move::ALL.iter().map(|&m| m as ActionId).collect()
        }
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == self.goal
    }

    fn reset(&self, rng: &mut dyn RngCore) -> StateId {
        if let Some(s) = self.start {
            return s;
        }
        let candidates: Vec<StateId> = self.states().into_iter().filter(|&s| s != self.goal).collect();
        candidates[rng.gen_range(0..candidates.len())]
    }

    fn step(&self, s: StateId, a: ActionId, _rng: &mut dyn RngCore) -> Result<(StateId, f64), LearnError> {
        self.check_state(s)?;
        if self.is_terminal(s) || a >= 4 {
            return Err(LearnError::InvalidAction { state: s, action: a });
        }
        let next = self.next_state(s, Move::ALL[a]);
        let reward = if next == self.goal {
            Self::GOAL_REWARD
        } else {
            Self::STEP_REWARD
        };
        Ok((next, reward))
    }
}

impl KnownDynamics for GridWorld {
    fn transitions(&self, s: StateId, a: ActionId) -> Vec<Transition> {
        let next = self.next_state(s, Move::ALL[a]);
        let reward = if next == self.goal {
            Self::GOAL_REWARD
        } else {
            Self::STEP_REWARD
        };
        vec![Transition {
            probability: 1.0,
            next,
            reward,
        }]
    }
}

/// Single-state bandit; arm `a` pays `means[a]` plus uniform noise in
/// `[-noise, noise]`. Never terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct KArmedBandit {
    means: Vec<f64>,
    noise: f64,
}

impl KArmedBandit {
    pub fn new(means: Vec<f64>, noise: f64) -> Result<Self, LearnError> {
        if means.is_empty() {
            return Err(LearnError::Config("bandit needs at least one arm".to_string()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(LearnError::Config("arm means must be finite".to_string()));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(LearnError::Config("noise must be a non-negative number".to_string()));
        }
        Ok(Self { means, noise })
    }

    /// Means drawn uniformly from `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(arms: usize, noise: f64, rng: &mut R) -> Result<Self, LearnError> {
        let means = (0..arms).map(|_| rng.gen::<f64>()).collect();
        Self::new(means, noise)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }
}

impl Environment for KArmedBandit {
    fn num_states(&self) -> usize {
        1
    }

    fn num_actions(&self) -> usize {
        self.means.len()
    }

    fn states(&self) -> Vec<StateId> {
        vec![0]
    }

    fn allowed_actions(&self, _s: StateId) -> Vec<ActionId> {
        (0..self.means.len()).collect()
    }

    fn is_terminal(&self, _s: StateId) -> bool {
        false
    }

    fn reset(&self, _rng: &mut dyn RngCore) -> StateId {
        0
    }

    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<(StateId, f64), LearnError> {
        if s != 0 {
            return Err(LearnError::InvalidState(s));
        }
        let Some(&mean) = self.means.get(a) else {
            return Err(LearnError::InvalidAction { state: s, action: a });
        };
        let noise = if self.noise > 0.0 {
            rng.gen_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        Ok((0, mean + noise))
    }
}

impl KnownDynamics for KArmedBandit {
    fn transitions(&self, _s: StateId, a: ActionId) -> Vec<Transition> {
        vec![Transition {
            probability: 1.0,
            next: 0,
            reward: self.means[a],
        }]
    }
}

fn action_value<E: KnownDynamics + ?Sized>(env: &E, v: &[f64], gamma: f64, s: StateId, a: ActionId) -> f64 {
    env.transitions(s, a)
        .iter()
        .map(|t| {
            let future = if env.is_terminal(t.next) { 0.0 } else { v[t.next] };
            t.probability * (t.reward + gamma * future)
        })
        .sum()
}

/// Optimal state values by value iteration; terminal states are worth 0.
/// Stops once a sweep changes no value by more than `tolerance`.
pub fn value_iteration<E: KnownDynamics + ?Sized>(env: &E, gamma: f64, tolerance: f64, max_sweeps: usize) -> Vec<f64> {
    let states = env.states();
    let mut v = vec![0.0; env.num_states()];
    for _ in 0..max_sweeps {
        let mut delta: f64 = 0.0;
        for &s in &states {
            if env.is_terminal(s) {
                continue;
            }
            let best = env
                .allowed_actions(s)
                .into_iter()
                .map(|a| action_value(env, &v, gamma, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta <= tolerance {
            break;
        }
    }
    v
}

/// Per state, every action whose value is within `slack` of the best one.
/// Terminal states get an empty set.
pub fn optimal_actions<E: KnownDynamics + ?Sized>(env: &E, values: &[f64], gamma: f64, slack: f64) -> Vec<Vec<ActionId>> {
    let mut out = vec![Vec::new(); env.num_states()];
    for s in env.states() {
        if env.is_terminal(s) {
            continue;
        }
        let actions = env.allowed_actions(s);
        let q: Vec<f64> = actions.iter().map(|&a| action_value(env, values, gamma, s, a)).collect();
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out[s] = actions
            .iter()
            .zip(&q)
            .filter(|(_, &qa)| qa >= best - slack)
            .map(|(&a, _)| a)
            .collect();
    }
    out
}
