use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use qdist_core::counting::{count_marked, default_precision_bits, CountError, CountingConfig};
use qdist_core::encoder::{encode_with, sample_value, EncodeError, EncodeOptions, TargetDistribution};
use qdist_core::qlearn::{
    greedy_action, greedy_policy_agreement, train, Environment, GridWorld, KArmedBandit, LearnError, PolicyConfig,
    RunStats, TabularQ, TrainingConfig,
};
use qdist_core::scenario::small_class_distribution;
use qdist_core::state::MarkedSet;
use qdist_core::rng_from_seed;

use crate::config::{CommandKind, ConfigError, EnvKind, ExperimentConfig};
use crate::output::{fmt_float, summary_table, write_table, Table};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("encoder error: {0}")]
    Encode(EncodeError),
    #[error("resource budget exceeded: {0}")]
    Budget(CountError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Encode(_) => 3,
            AppError::Budget(_) => 4,
            AppError::Io(_) => 1,
        }
    }
}

impl From<EncodeError> for AppError {
    fn from(e: EncodeError) -> Self {
        match e {
            // Planning failures are encoder errors; the rest are invalid input.
            EncodeError::Plan { .. } => AppError::Encode(e),
            other => AppError::Config(ConfigError::new(other.to_string())),
        }
    }
}

impl From<CountError> for AppError {
    fn from(e: CountError) -> Self {
        match e {
            CountError::BudgetExceeded { .. } => AppError::Budget(e),
            other => AppError::Config(ConfigError::new(other.to_string())),
        }
    }
}

impl From<LearnError> for AppError {
    fn from(e: LearnError) -> Self {
        match e.root() {
            LearnError::Encode(inner) => AppError::Encode(inner.clone()),
            LearnError::Count(inner @ CountError::BudgetExceeded { .. }) => AppError::Budget(inner.clone()),
            _ => AppError::Config(ConfigError::new(e.to_string())),
        }
    }
}

/// Files written by one command, in writing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
}

pub fn run_command(kind: CommandKind, cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    fs::create_dir_all(out)?;
    match kind {
        CommandKind::Encode => cmd_encode(cfg, out),
        CommandKind::Count => cmd_count(cfg, out),
        CommandKind::Train => cmd_train(cfg, out),
        CommandKind::Sweep => cmd_sweep(cfg, out),
    }
}

fn class_sets(cfg: &ExperimentConfig) -> Result<(usize, Vec<Vec<usize>>), ConfigError> {
    let r = &cfg.register;
    match (&r.sizes, &r.members) {
        (Some(_), Some(_)) => Err(ConfigError::new("[register] takes either 'sizes' or 'members', not both")),
        (None, None) => Err(ConfigError::new("[register] needs 'sizes' or 'members'")),
        (Some(sizes), None) => {
            let total: usize = sizes.iter().sum();
            if let Some(n) = r.n {
                if n != total {
                    return Err(ConfigError::new(format!("class sizes add up to {total}, but n = {n}")));
                }
            }
            let mut start = 0;
            let classes = sizes
                .iter()
                .map(|&s| {
                    let c: Vec<usize> = (start..start + s).collect();
                    start += s;
                    c
                })
                .collect();
            Ok((total, classes))
        }
        (None, Some(members)) => {
            let n = r
                .n
                .ok_or_else(|| ConfigError::new("[register] needs 'n' when classes are given by 'members'"))?;
            Ok((n, members.clone()))
        }
    }
}

fn target_distribution(cfg: &ExperimentConfig) -> Result<TargetDistribution, AppError> {
    let (n, classes) = class_sets(cfg)?;
    if n == 0 {
        return Err(ConfigError::new("the register needs at least one value").into());
    }
    let targets = cfg
        .register
        .targets
        .clone()
        .ok_or_else(|| ConfigError::new("[register] needs 'targets'"))?;
    Ok(TargetDistribution::new(n, classes, targets)?.with_remainder(cfg.register.remainder))
}

pub fn cmd_encode(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    let dist = target_distribution(cfg)?;
    let options = EncodeOptions {
        max_iterations: cfg.encoder.max_iterations,
        overshoot_tolerance: cfg.encoder.overshoot_tolerance,
        planning_sizes: None,
    };
    let enc = encode_with(&dist, &options, |_, _| {})?;

    let samples = cfg.encoder.samples;
    let mut hits = vec![0usize; dist.classes().len()];
    if samples > 0 {
        let mut owner = vec![0; dist.n_values()];
        for (j, c) in dist.classes().iter().enumerate() {
            for &k in c.iter() {
                owner[k] = j;
            }
        }
        let mut rng = rng_from_seed(cfg.seed);
        for _ in 0..samples {
            hits[owner[sample_value(&enc, &mut rng)]] += 1;
        }
    }

    let mut metrics = Table::new(&[
        "class",
        "size",
        "remainder",
        "target",
        "achieved",
        "abs_error",
        "predicted",
        "empirical",
    ]);
    let rem = dist.remainder_class();
    for (j, class) in dist.classes().iter().enumerate() {
        let target = dist.class_targets()[j];
        let achieved = enc.achieved.per_class[j];
        metrics.push(vec![
            j.to_string(),
            class.len().to_string(),
            (j == rem).to_string(),
            fmt_float(target),
            fmt_float(achieved),
            fmt_float((achieved - target).abs()),
            fmt_float(enc.plan.predicted_class_probabilities[j]),
            if samples > 0 {
                fmt_float(hits[j] as f64 / samples as f64)
            } else {
                String::new()
            },
        ]);
    }

    let mut plan = Table::new(&["step", "class", "marked_count", "target", "t_f", "achieved"]);
    for (i, step) in enc.plan.steps.iter().enumerate() {
        plan.push(vec![
            (i + 1).to_string(),
            step.class_id.to_string(),
            step.marked_count.to_string(),
            fmt_float(step.target_class_probability),
            step.t_f().to_string(),
            fmt_float(step.achieved_class_probability()),
        ]);
    }

    let summary = summary_table(&[
        ("n_values", dist.n_values().to_string()),
        ("classes", dist.classes().len().to_string()),
        ("remainder_class", rem.to_string()),
        ("total_grover_iterations", enc.plan.total_grover_iterations.to_string()),
        ("max_class_error", fmt_float(enc.max_class_error)),
        ("prediction_gap", fmt_float(enc.prediction_gap())),
        ("samples", samples.to_string()),
    ]);

    Ok(CommandOutput {
        files: vec![
            write_table(out, "metrics.csv", &metrics)?,
            write_table(out, "plan.csv", &plan)?,
            write_table(out, "summary.csv", &summary)?,
        ],
    })
}

pub fn cmd_count(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    let (n, classes) = class_sets(cfg)?;
    if n == 0 {
        return Err(ConfigError::new("the register needs at least one value").into());
    }
    let config = CountingConfig {
        precision_bits: cfg.counting.precision_bits.unwrap_or_else(|| default_precision_bits(n)),
        mode: cfg.counting.mode,
    };
    let sets = classes
        .into_iter()
        .map(|c| MarkedSet::new(n, c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ConfigError::new(e.to_string()))?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut metrics = Table::new(&[
        "class",
        "true_size",
        "precision_bits",
        "raw_outcome",
        "phase",
        "estimate_real",
        "estimate",
        "error_bound",
        "oracle_calls",
    ]);
    for (j, set) in sets.iter().enumerate() {
        let est = count_marked(set, &config, &mut rng)?;
        metrics.push(vec![
            j.to_string(),
            set.len().to_string(),
            config.precision_bits.to_string(),
            est.raw_outcome.to_string(),
            fmt_float(est.phase),
            fmt_float(est.estimate_real),
            est.estimate.to_string(),
            fmt_float(est.error_bound),
            est.oracle_calls.to_string(),
        ]);
    }
    Ok(CommandOutput {
        files: vec![write_table(out, "metrics.csv", &metrics)?],
    })
}

enum Env {
    Grid(GridWorld),
    Bandit(KArmedBandit),
}

fn build_environment(cfg: &ExperimentConfig) -> Result<Env, AppError> {
    let e = &cfg.environment;
    let learn = |err: LearnError| AppError::Config(ConfigError::new(err.to_string()));
    match e.kind {
        EnvKind::GridWorld => {
            let grid = if let Some(path) = &e.layout_file {
                let text = fs::read_to_string(path)
                    .map_err(|err| ConfigError::new(format!("cannot read layout {}: {err}", path.display())))?;
                GridWorld::from_layout(&text).map_err(learn)?
            } else {
                let goal = e.goal.unwrap_or((e.width.saturating_sub(1), e.height.saturating_sub(1)));
                GridWorld::new(e.width, e.height, goal, &e.walls, e.start).map_err(learn)?
            };
            Ok(Env::Grid(grid))
        }
        EnvKind::Bandit => {
            let bandit = match &e.means {
                Some(m) => KArmedBandit::new(m.clone(), e.noise),
                None => {
                    // Means come from their own stream so they do not depend on training draws.
                    let mut rng = rng_from_seed(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
                    KArmedBandit::random(e.arms, e.noise, &mut rng)
                }
            }
            .map_err(learn)?;
            Ok(Env::Bandit(bandit))
        }
    }
}

fn policy_config(cfg: &ExperimentConfig) -> PolicyConfig {
    PolicyConfig {
        intervals: cfg.policy.intervals,
        schedule: cfg.policy.schedule,
        counting_bits: cfg.counting.precision_bits,
        counting_mode: cfg.counting.mode,
        selector: cfg.policy.selector,
        weighting: cfg.policy.weighting,
        remainder: cfg.register.remainder,
        encode: EncodeOptions {
            max_iterations: cfg.encoder.max_iterations,
            overshoot_tolerance: Some(cfg.encoder.overshoot_tolerance.unwrap_or(f64::INFINITY)),
            planning_sizes: None,
        },
    }
}

fn training_config(cfg: &ExperimentConfig) -> TrainingConfig {
    TrainingConfig {
        learning_rate: cfg.training.learning_rate,
        discount: cfg.training.discount,
        episodes: cfg.training.episodes,
        max_steps: cfg.training.max_steps,
        seed: cfg.seed,
    }
}

fn episode_table(stats: &RunStats) -> Table {
    let mut t = Table::new(&[
        "episode",
        "temperature",
        "total_reward",
        "steps",
        "reached_terminal",
        "j_calls",
        "grover_iterations",
        "counting_invocations",
        "counting_oracle_calls",
        "q_evaluations",
        "minmax_evaluations",
        "max_class_error",
    ]);
    for (i, e) in stats.episodes.iter().enumerate() {
        let c = &e.calls;
        t.push(vec![
            i.to_string(),
            fmt_float(e.temperature),
            fmt_float(e.total_reward),
            e.steps.to_string(),
            e.reached_terminal.to_string(),
            c.j_calls.to_string(),
            c.grover_iterations.to_string(),
            c.counting_invocations.to_string(),
            c.counting_oracle_calls.to_string(),
            c.q_evaluations.to_string(),
            c.minmax_evaluations.to_string(),
            fmt_float(c.max_class_error),
        ]);
    }
    t
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    let env = build_environment(cfg)?;
    let policy = policy_config(cfg);
    let training = training_config(cfg);
    let per_decision = |total: u64, decisions: u64| {
        if decisions == 0 {
            0.0
        } else {
            total as f64 / decisions as f64
        }
    };

    let (stats, mut pairs) = match &env {
        Env::Grid(grid) => {
            let mut q = TabularQ::new(grid.num_states(), grid.num_actions());
            let stats = train(grid, &mut q, &policy, &training)?;
            let agreement = greedy_policy_agreement(grid, &q, training.discount);
            let pairs = vec![
                ("environment", "gridworld".to_string()),
                ("greedy_matching_states", agreement.matching.to_string()),
                ("greedy_total_states", agreement.total.to_string()),
                ("greedy_optimal", agreement.all_match().to_string()),
            ];
            (stats, pairs)
        }
        Env::Bandit(bandit) => {
            let mut q = TabularQ::new(1, bandit.arms());
            let stats = train(bandit, &mut q, &policy, &training)?;
            let arms: Vec<usize> = (0..bandit.arms()).collect();
            let greedy = greedy_action(&q, 0, &arms).unwrap_or(0);
            let best = arms
                .iter()
                .copied()
                .fold(0, |b, a| if bandit.means()[a] > bandit.means()[b] { a } else { b });
            let pairs = vec![
                ("environment", "bandit".to_string()),
                ("greedy_arm", greedy.to_string()),
                ("best_arm", best.to_string()),
                ("greedy_optimal", (greedy == best).to_string()),
            ];
            (stats, pairs)
        }
    };
    let totals = &stats.totals;
    let returns = stats.returns();
    let mean_return = if returns.is_empty() {
        0.0
    } else {
        returns.iter().sum::<f64>() / returns.len() as f64
    };
    pairs.extend([
        ("selector", format!("{:?}", policy.selector).to_lowercase()),
        ("episodes", stats.episodes.len().to_string()),
        ("decisions", stats.decisions.to_string()),
        ("mean_return", fmt_float(mean_return)),
        ("j_calls", totals.j_calls.to_string()),
        ("grover_iterations", totals.grover_iterations.to_string()),
        ("counting_invocations", totals.counting_invocations.to_string()),
        ("counting_oracle_calls", totals.counting_oracle_calls.to_string()),
        ("q_evaluations", totals.q_evaluations.to_string()),
        ("minmax_evaluations", totals.minmax_evaluations.to_string()),
        ("j_calls_per_decision", fmt_float(per_decision(totals.j_calls, stats.decisions))),
        ("q_evaluations_per_decision", fmt_float(per_decision(totals.q_evaluations, stats.decisions))),
        ("max_class_error", fmt_float(totals.max_class_error)),
    ]);
    Ok(CommandOutput {
        files: vec![
            write_table(out, "episodes.csv", &episode_table(&stats))?,
            write_table(out, "summary.csv", &summary_table(&pairs))?,
        ],
    })
}

/// Per-size outcome of an encoding sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub errors: Vec<f64>,
    pub iterations: Vec<u64>,
}

impl SweepPoint {
    pub fn mean_error(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len().max(1) as f64
    }

    pub fn median_iterations(&self) -> f64 {
        median(&self.iterations.iter().map(|&i| i as f64).collect::<Vec<_>>())
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Seed of trial `trial` at size `n`, independent of evaluation order.
fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    let mut rng = rng_from_seed(seed ^ (n as u64).rotate_left(32) ^ trial as u64);
    rng.gen()
}

/// Encodes `trials` random small-class targets at each size. Shortfalls
/// against unreachable targets count as encoding error unless an
/// overshoot tolerance is configured.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>, AppError> {
    let s = &cfg.sweep;
    if s.sizes.is_empty() || s.trials == 0 || s.classes == 0 || s.max_class_size == 0 {
        return Err(ConfigError::new("[sweep] needs sizes, and positive trials, classes and max_class_size").into());
    }
    for &n in &s.sizes {
        if (s.classes - 1) * s.max_class_size >= n {
            return Err(ConfigError::new(format!("{} classes of up to {} values do not fit in n = {n}", s.classes, s.max_class_size)).into());
        }
    }
    let options = EncodeOptions {
        max_iterations: cfg.encoder.max_iterations,
        overshoot_tolerance: Some(cfg.encoder.overshoot_tolerance.unwrap_or(f64::INFINITY)),
        planning_sizes: None,
    };
    s.sizes
        .par_iter()
        .map(|&n| -> Result<SweepPoint, AppError> {
            let mut point = SweepPoint {
                n,
                errors: Vec::with_capacity(s.trials),
                iterations: Vec::with_capacity(s.trials),
            };
            for trial in 0..s.trials {
                let mut rng = rng_from_seed(trial_seed(cfg.seed, n, trial));
                let dist = small_class_distribution(n, s.classes, s.max_class_size, &mut rng)?
                    .with_remainder(cfg.register.remainder);
                let enc = encode_with(&dist, &options, |_, _| {})?;
                point.errors.push(enc.max_class_error);
                point.iterations.push(enc.plan.total_grover_iterations);
            }
            Ok(point)
        })
        .collect()
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    let points = run_sweep(cfg)?;
    let mut files = Vec::new();
    // One file per point, each written atomically.
    let written: Vec<std::io::Result<PathBuf>> = points
        .par_iter()
        .map(|p| {
            let mut t = Table::new(&["trial", "max_class_error", "grover_iterations"]);
            for (i, (e, it)) in p.errors.iter().zip(&p.iterations).enumerate() {
                t.push(vec![i.to_string(), fmt_float(*e), it.to_string()]);
            }
            write_table(out, &format!("point_n{}.csv", p.n), &t)
        })
        .collect();
    for w in written {
        files.push(w?);
    }
    let mut metrics = Table::new(&[
        "n",
        "trials",
        "mean_max_class_error",
        "median_grover_iterations",
        "error_times_sqrt_n",
        "iterations_over_sqrt_n",
    ]);
    for p in &points {
        let root = (p.n as f64).sqrt();
        metrics.push(vec![
            p.n.to_string(),
            p.errors.len().to_string(),
            fmt_float(p.mean_error()),
            fmt_float(p.median_iterations()),
            fmt_float(p.mean_error() * root),
            fmt_float(p.median_iterations() / root),
        ]);
    }
    files.insert(0, write_table(out, "metrics.csv", &metrics)?);
    Ok(CommandOutput { files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(AppError::from(ConfigError::new("x")).exit_code(), 2);
        assert_eq!(AppError::from(EncodeError::NotNormalized { sum: 0.9 }).exit_code(), 2);
        let plan = EncodeError::Plan {
            step: 1,
            class: 0,
            source: qdist_core::planner::PlanError::InvalidTarget(2.0),
        };
        assert_eq!(AppError::from(plan).exit_code(), 3);
        assert_eq!(AppError::from(CountError::BudgetExceeded { n_values: 8, bits: 30 }).exit_code(), 4);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
