//! Experiment configuration files.
//!
//! ```text
//! # comment
//! [experiment]
//! command = encode
//! seed = 7
//!
//! [register]
//! n = 8
//! sizes = 2, 3, 3
//! targets = 0.25, 0.25, 0.5
//! ```
//!
//! Keys outside a known section, unknown keys and repeated keys are errors.
//! [`ExperimentConfig::echo`] writes a canonical form that parses back to
//! the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qdist_core::counting::CountingMode;
use qdist_core::encoder::RemainderPolicy;
use qdist_core::qlearn::{ClassWeighting, SelectorKind, TemperatureSchedule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }

    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Encode,
    Count,
    Train,
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Encode => "encode",
            CommandKind::Count => "count",
            CommandKind::Train => "train",
            CommandKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    GridWorld,
    Bandit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisterSection {
    pub n: Option<usize>,
    /// Contiguous classes of these sizes.
    pub sizes: Option<Vec<usize>>,
    /// Explicit class members; alternative to `sizes`.
    pub members: Option<Vec<Vec<usize>>>,
    pub targets: Option<Vec<f64>>,
    pub remainder: RemainderPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSection {
    pub max_iterations: u64,
    pub overshoot_tolerance: Option<f64>,
    /// Values drawn from the encoded register; 0 skips sampling.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingSection {
    pub precision_bits: Option<u32>,
    pub mode: CountingMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSection {
    pub kind: EnvKind,
    pub layout_file: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub goal: Option<(usize, usize)>,
    pub start: Option<(usize, usize)>,
    pub walls: Vec<(usize, usize)>,
    pub arms: usize,
    pub means: Option<Vec<f64>>,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySection {
    pub intervals: usize,
    pub selector: SelectorKind,
    pub schedule: TemperatureSchedule,
    pub weighting: ClassWeighting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub discount: f64,
    pub episodes: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub classes: usize,
    pub max_class_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    pub seed: u64,
    pub register: RegisterSection,
    pub encoder: EncoderSection,
    pub counting: CountingSection,
    pub environment: EnvironmentSection,
    pub policy: PolicySection,
    pub training: TrainingSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            register: RegisterSection {
                n: None,
                sizes: None,
                members: None,
                targets: None,
                remainder: RemainderPolicy::Last,
            },
            encoder: EncoderSection {
                max_iterations: 100_000,
                overshoot_tolerance: None,
                samples: 0,
            },
            counting: CountingSection {
                precision_bits: None,
                mode: CountingMode::Deterministic,
            },
            environment: EnvironmentSection {
                kind: EnvKind::GridWorld,
                layout_file: None,
                width: 4,
                height: 4,
                goal: None,
                start: None,
                walls: Vec::new(),
                arms: 16,
                means: None,
                noise: 0.1,
            },
            policy: PolicySection {
                intervals: 4,
                selector: SelectorKind::Quantum,
                schedule: TemperatureSchedule::default(),
                weighting: ClassWeighting::MidpointCount,
            },
            training: TrainingSection {
                learning_rate: 0.1,
                discount: 0.9,
                episodes: 1000,
                max_steps: 100,
            },
            sweep: SweepSection {
                sizes: vec![64, 256, 1024],
                trials: 50,
                classes: 4,
                max_class_size: 3,
            },
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::at(line, format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

fn parse_cell(line: usize, key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
    match parse_list::<usize>(line, key, value)?.as_slice() {
        [x, y] => Ok((*x, *y)),
        _ => Err(ConfigError::at(line, format!("'{key}' needs two coordinates 'x, y'"))),
    }
}

fn parse_cells(line: usize, key: &str, value: &str) -> Result<Vec<(usize, usize)>, ConfigError> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|c| parse_cell(line, key, c))
        .collect()
}

fn parse_members(line: usize, key: &str, value: &str) -> Result<Vec<Vec<usize>>, ConfigError> {
    value
        .split('|')
        .map(|group| {
            group
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| parse_value(line, key, s))
                .collect()
        })
        .collect()
}

fn parse_enum<T: Copy>(line: usize, key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(value))
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            ConfigError::at(line, format!("'{key}' must be one of {}, got '{value}'", names.join(", ")))
        })
}

const COMMANDS: [(&str, CommandKind); 4] = [
    ("encode", CommandKind::Encode),
    ("count", CommandKind::Count),
    ("train", CommandKind::Train),
    ("sweep", CommandKind::Sweep),
];
const REMAINDERS: [(&str, RemainderPolicy); 2] = [("last", RemainderPolicy::Last), ("largest", RemainderPolicy::Largest)];
const MODES: [(&str, CountingMode); 2] = [
    ("deterministic", CountingMode::Deterministic),
    ("stochastic", CountingMode::Stochastic),
];
const ENVS: [(&str, EnvKind); 2] = [("gridworld", EnvKind::GridWorld), ("bandit", EnvKind::Bandit)];
const SELECTORS: [(&str, SelectorKind); 2] = [("quantum", SelectorKind::Quantum), ("classical", SelectorKind::Classical)];
const WEIGHTINGS: [(&str, ClassWeighting); 2] = [
    ("midpoint", ClassWeighting::MidpointCount),
    ("exact", ClassWeighting::ExactSum),
];

#[derive(Clone, Copy, PartialEq)]
enum ScheduleKind {
    Exponential,
    Constant,
}

impl ExperimentConfig {
    /// Parses a configuration; relative `layout_file` paths are resolved
    /// against `base_dir` when given.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section: Option<String> = None;
        let mut seen: Vec<(String, String)> = Vec::new();
        let mut schedule_kind = ScheduleKind::Exponential;
        let (mut t_initial, mut t_min) = (1.0, 0.05);
        let mut t_constant: Option<f64> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                    .trim();
                section = Some(name.to_ascii_lowercase());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let sec = section
                .clone()
                .ok_or_else(|| ConfigError::at(line, format!("key '{key}' appears before any section")))?;
            if seen.iter().any(|(s, k)| *s == sec && *k == key) {
                return Err(ConfigError::at(line, format!("duplicate key '{key}' in [{sec}]")));
            }
            seen.push((sec.clone(), key.clone()));
            let k = key.as_str();
            let unknown = || ConfigError::at(line, format!("unknown key '{k}' in [{sec}]"));

            match sec.as_str() {
                "experiment" => match k {
                    "command" => cfg.command = Some(parse_enum(line, k, value, &COMMANDS)?),
                    "seed" => cfg.seed = parse_value(line, k, value)?,
                    _ => return Err(unknown()),
                },
                "register" => match k {
                    "n" => cfg.register.n = Some(parse_value(line, k, value)?),
                    "sizes" => cfg.register.sizes = Some(parse_list(line, k, value)?),
                    "members" => cfg.register.members = Some(parse_members(line, k, value)?),
                    "targets" => cfg.register.targets = Some(parse_list(line, k, value)?),
                    "remainder" => cfg.register.remainder = parse_enum(line, k, value, &REMAINDERS)?,
                    _ => return Err(unknown()),
                },
                "encoder" => match k {
                    "max_iterations" => cfg.encoder.max_iterations = parse_value(line, k, value)?,
                    "overshoot_tolerance" => cfg.encoder.overshoot_tolerance = Some(parse_value(line, k, value)?),
                    "samples" => cfg.encoder.samples = parse_value(line, k, value)?,
                    _ => return Err(unknown()),
                },
                "counting" => match k {
                    "precision_bits" => cfg.counting.precision_bits = Some(parse_value(line, k, value)?),
                    "mode" => cfg.counting.mode = parse_enum(line, k, value, &MODES)?,
                    _ => return Err(unknown()),
                },
                "environment" => match k {
                    "kind" => cfg.environment.kind = parse_enum(line, k, value, &ENVS)?,
                    "layout_file" => {
                        let p = PathBuf::from(value);
                        cfg.environment.layout_file = Some(match base_dir {
                            Some(base) if p.is_relative() => base.join(p),
                            _ => p,
                        });
                    }
                    "width" => cfg.environment.width = parse_value(line, k, value)?,
                    "height" => cfg.environment.height = parse_value(line, k, value)?,
                    "goal" => cfg.environment.goal = Some(parse_cell(line, k, value)?),
                    "start" => cfg.environment.start = Some(parse_cell(line, k, value)?),
                    "walls" => cfg.environment.walls = parse_cells(line, k, value)?,
                    "arms" => cfg.environment.arms = parse_value(line, k, value)?,
                    "means" => cfg.environment.means = Some(parse_list(line, k, value)?),
                    "noise" => cfg.environment.noise = parse_value(line, k, value)?,
                    _ => return Err(unknown()),
                },
                "policy" => match k {
                    "intervals" => cfg.policy.intervals = parse_value(line, k, value)?,
                    "selector" => cfg.policy.selector = parse_enum(line, k, value, &SELECTORS)?,
                    "weighting" => cfg.policy.weighting = parse_enum(line, k, value, &WEIGHTINGS)?,
                    "schedule" => {
                        schedule_kind = parse_enum(
                            line,
                            k,
                            value,
                            &[("exponential", ScheduleKind::Exponential), ("constant", ScheduleKind::Constant)],
                        )?
                    }
                    "initial_temperature" => t_initial = parse_value(line, k, value)?,
                    "min_temperature" => t_min = parse_value(line, k, value)?,
                    "temperature" => t_constant = Some(parse_value(line, k, value)?),
                    _ => return Err(unknown()),
                },
                "training" => match k {
                    "learning_rate" => cfg.training.learning_rate = parse_value(line, k, value)?,
                    "discount" => cfg.training.discount = parse_value(line, k, value)?,
                    "episodes" => cfg.training.episodes = parse_value(line, k, value)?,
                    "max_steps" => cfg.training.max_steps = parse_value(line, k, value)?,
                    _ => return Err(unknown()),
                },
                "sweep" => match k {
                    "sizes" => cfg.sweep.sizes = parse_list(line, k, value)?,
                    "trials" => cfg.sweep.trials = parse_value(line, k, value)?,
                    "classes" => cfg.sweep.classes = parse_value(line, k, value)?,
                    "max_class_size" => cfg.sweep.max_class_size = parse_value(line, k, value)?,
                    _ => return Err(unknown()),
                },
                other => return Err(ConfigError::at(line, format!("unknown section [{other}]"))),
            }
        }

        cfg.policy.schedule = match schedule_kind {
            ScheduleKind::Exponential => {
                if t_constant.is_some() {
                    return Err(ConfigError::new("'temperature' is only valid with schedule = constant"));
                }
                TemperatureSchedule::Exponential {
                    initial: t_initial,
                    min: t_min,
                }
            }
            ScheduleKind::Constant => TemperatureSchedule::Constant(
                t_constant.ok_or_else(|| ConfigError::new("schedule = constant needs 'temperature'"))?,
            ),
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn echo(&self) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        }
        fn name<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
            options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).unwrap_or("?")
        }
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        if let Some(c) = self.command {
            let _ = writeln!(s, "command = {}", c.name());
        }
        let _ = writeln!(s, "seed = {}", self.seed);

        let r = &self.register;
        let _ = writeln!(s, "\n[register]");
        if let Some(n) = r.n {
            let _ = writeln!(s, "n = {n}");
        }
        if let Some(v) = &r.sizes {
            let _ = writeln!(s, "sizes = {}", list(v));
        }
        if let Some(groups) = &r.members {
            let g: Vec<String> = groups.iter().map(|m| list(m)).collect();
            let _ = writeln!(s, "members = {}", g.join(" | "));
        }
        if let Some(v) = &r.targets {
            let _ = writeln!(s, "targets = {}", list(v));
        }
        let _ = writeln!(s, "remainder = {}", name(&REMAINDERS, r.remainder));

        let e = &self.encoder;
        let _ = writeln!(s, "\n[encoder]\nmax_iterations = {}", e.max_iterations);
        if let Some(t) = e.overshoot_tolerance {
            let _ = writeln!(s, "overshoot_tolerance = {t}");
        }
        let _ = writeln!(s, "samples = {}", e.samples);

        let _ = writeln!(s, "\n[counting]");
        if let Some(b) = self.counting.precision_bits {
            let _ = writeln!(s, "precision_bits = {b}");
        }
        let _ = writeln!(s, "mode = {}", name(&MODES, self.counting.mode));

        let env = &self.environment;
        let _ = writeln!(s, "\n[environment]\nkind = {}", name(&ENVS, env.kind));
        if let Some(p) = &env.layout_file {
            let _ = writeln!(s, "layout_file = {}", p.display());
        }
        let _ = writeln!(s, "width = {}\nheight = {}", env.width, env.height);
        if let Some((x, y)) = env.goal {
            let _ = writeln!(s, "goal = {x}, {y}");
        }
        if let Some((x, y)) = env.start {
            let _ = writeln!(s, "start = {x}, {y}");
        }
        if !env.walls.is_empty() {
            let w: Vec<String> = env.walls.iter().map(|(x, y)| format!("{x}, {y}")).collect();
            let _ = writeln!(s, "walls = {}", w.join("; "));
        }
        let _ = writeln!(s, "arms = {}", env.arms);
        if let Some(m) = &env.means {
            let _ = writeln!(s, "means = {}", list(m));
        }
        let _ = writeln!(s, "noise = {}", env.noise);

        let p = &self.policy;
        let _ = writeln!(s, "\n[policy]\nintervals = {}", p.intervals);
        let _ = writeln!(s, "selector = {}", name(&SELECTORS, p.selector));
        let _ = writeln!(s, "weighting = {}", name(&WEIGHTINGS, p.weighting));
        match p.schedule {
            TemperatureSchedule::Exponential { initial, min } => {
                let _ = writeln!(
                    s,
                    "schedule = exponential\ninitial_temperature = {initial}\nmin_temperature = {min}"
                );
            }
            TemperatureSchedule::Constant(t) => {
                let _ = writeln!(s, "schedule = constant\ntemperature = {t}");
            }
        }

        let t = &self.training;
        let _ = writeln!(
            s,
            "\n[training]\nlearning_rate = {}\ndiscount = {}\nepisodes = {}\nmax_steps = {}",
            t.learning_rate, t.discount, t.episodes, t.max_steps
        );

        let w = &self.sweep;
        let _ = writeln!(
            s,
            "\n[sweep]\nsizes = {}\ntrials = {}\nclasses = {}\nmax_class_size = {}",
            list(&w.sizes),
            w.trials,
            w.classes,
            w.max_class_size
        );
        s
    }
}
