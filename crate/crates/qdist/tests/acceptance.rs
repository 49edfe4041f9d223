//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use qdist::commands::run_sweep;
use qdist::config::ExperimentConfig;
use qdist_core::counting::{count_marked, CountingConfig};
use qdist_core::encoder::{encode_with, EncodeEvent, EncodeOptions};
use qdist_core::planner::{evolve, link_steps, PlannerState};
use qdist_core::qlearn::{
    classical_action_distribution, greedy_action, greedy_policy_agreement, prepare_quantum_selection, select_action_classical,
    select_action_quantum, train, GridWorld, KArmedBandit, PolicyConfig, QFunction, SelectorKind, TabularQ, TrainingConfig,
};
use qdist_core::scenario::random_feasible_distribution;
use qdist_core::state::{Ancilla, MarkedSet, StateVector};
use qdist_core::{rng_from_seed, Complex64};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Shared results of the randomized encoding runs (criteria 1 to 3).
struct ScheduleRuns {
    max_prediction_gap: f64,
    max_step_gap: f64,
    max_norm_drift: f64,
    max_ticked_drift: f64,
    operations: u64,
}

fn run_random_schedules() -> ScheduleRuns {
    let mut rng = rng_from_seed(0xacce_0001);
    let mut runs = ScheduleRuns {
        max_prediction_gap: 0.0,
        max_step_gap: 0.0,
        max_norm_drift: 0.0,
        max_ticked_drift: 0.0,
        operations: 0,
    };
    for _ in 0..100 {
        let n = rng.gen_range(8..=512);
        let classes = rng.gen_range(2..=8);
        let dist = random_feasible_distribution(n, classes, &mut rng).expect("feasible distribution");
        let options = EncodeOptions::default();
        let plan = qdist_core::encoder::plan_encoding(&dist, &options).expect("feasible targets plan");
        let mut frozen: Vec<(usize, f64)> = Vec::new();
        let enc = encode_with(&dist, &options, |event, state| {
            runs.operations += 1;
            runs.max_norm_drift = runs.max_norm_drift.max((state.norm_sqr() - 1.0).abs());
            for &(k, p) in &frozen {
                let now = state.amplitude(k, Ancilla::Zero).norm_sqr();
                runs.max_ticked_drift = runs.max_ticked_drift.max((now - p).abs());
            }
            if let EncodeEvent::Tick { step, index, .. } = *event {
                let p = state.amplitude(index, Ancilla::Zero).norm_sqr();
                let predicted = plan.steps[step - 1].step.expect("executed step").achieved_per_state_probability;
                runs.max_step_gap = runs.max_step_gap.max((p - predicted).abs());
                frozen.push((index, p));
            }
        })
        .expect("encoding runs");
        runs.max_prediction_gap = runs.max_prediction_gap.max(enc.prediction_gap());
    }
    runs
}

fn criterion_1(runs: &ScheduleRuns) -> Outcome {
    let gap = runs.max_prediction_gap.max(runs.max_step_gap);
    outcome(
        gap <= 1e-9,
        format!(
            "max planner/simulator per-state gap {gap:.3e} (final {:.3e}, at tick {:.3e}) over 100 schedules, limit 1e-9",
            runs.max_prediction_gap, runs.max_step_gap
        ),
    )
}

fn criterion_2(runs: &ScheduleRuns) -> Outcome {
    outcome(
        runs.max_norm_drift <= 1e-12,
        format!("max |norm^2 - 1| {:.3e} over {} operations, limit 1e-12", runs.max_norm_drift, runs.operations),
    )
}

fn criterion_3(runs: &ScheduleRuns) -> Outcome {
    outcome(
        runs.max_ticked_drift <= 1e-12,
        format!("max change of a ticked probability {:.3e}, limit 1e-12", runs.max_ticked_drift),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());

    // N = 4, one marked value: a single iterate finds it with certainty.
    let mut s = StateVector::new_uniform(4).unwrap();
    let m4 = MarkedSet::new(4, [2]).unwrap();
    s.apply_conditional_grover(&m4).unwrap();
    check(s.amplitude(2, Ancilla::One).norm_sqr(), 1.0);
    check(evolve(0.5, 0.5, 4, 1, 1).unwrap().k_bar.powi(2), 1.0);

    // N = 8, one marked value, one iterate: 25/32.
    let mut s = StateVector::new_uniform(8).unwrap();
    let m8 = MarkedSet::new(8, [0]).unwrap();
    s.apply_conditional_grover(&m8).unwrap();
    check(s.amplitude(0, Ancilla::One).norm_sqr(), 25.0 / 32.0);
    let p = PlannerState::uniform(8, 1).unwrap().advanced(1).unwrap();
    check(p.per_state_probability(), 25.0 / 32.0);

    // Tick it; the seven survivors share the branch evenly: 7 k^2 = 1.
    s.apply_tick(0).unwrap();
    let b2: f64 = s.branch(Ancilla::One).iter().map(Complex64::norm_sqr).sum();
    check(b2, 7.0 / 32.0);
    let b = b2.sqrt();
    for k in 1..8 {
        let amp = s.amplitude(k, Ancilla::One);
        check(7.0 * (amp.re / b).powi(2), 1.0);
        check(amp.im, 0.0);
    }
    let linked = link_steps(&p, 1).unwrap();
    check(7.0 * linked.k_bar.powi(2), 1.0);
    check(7.0 * linked.alpha.powi(2), 1.0);
    // The unmarked mean also covers the ticked position, which is empty.
    check(7.0 * (7.0 / 6.0 * linked.l_bar).powi(2), 1.0);
    check(linked.b * linked.b, 7.0 / 32.0);
    check(linked.k_bar * linked.b, s.amplitude(1, Ancilla::One).re);
    outcome(worst <= 1e-12, format!("largest deviation {worst:.3e} across the closed-form checks, limit 1e-12"))
}

fn sweep_config(sizes: &[usize]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed: 2024,
        ..ExperimentConfig::default()
    };
    cfg.sweep.sizes = sizes.to_vec();
    cfg.sweep.trials = 50;
    cfg.sweep.classes = 4;
    cfg.sweep.max_class_size = 3;
    cfg
}

fn criterion_5() -> Outcome {
    let points = run_sweep(&sweep_config(&[64, 1024])).expect("sweep runs");
    let (e64, e1024) = (points[0].mean_error(), points[1].mean_error());
    let ratio = e64 / e1024;
    outcome(
        (2.0..=8.0).contains(&ratio),
        format!("mean worst class error {e64:.4} at N=64, {e1024:.4} at N=1024, ratio {ratio:.3}, required [2, 8]"),
    )
}

fn criterion_6() -> Outcome {
    let sizes = [64, 256, 1024, 4096];
    let points = run_sweep(&sweep_config(&sizes)).expect("sweep runs");
    let medians: Vec<f64> = points.iter().map(|p| p.median_iterations()).collect();
    // Growth is judged from N = 256 on; smaller registers are reported only.
    let growth: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    let growth_ok = growth[1..].iter().all(|g| *g <= 2.3);

    let mut rng = rng_from_seed(0xacce_0006);
    let policy = PolicyConfig::default();
    let intervals = policy.intervals as f64;
    let mut worst_ratio: f64 = 0.0;
    let mut classical_ok = true;
    for n in sizes {
        let mut q = TabularQ::new(1, n);
        for a in 0..n {
            q.set(0, a, rng.gen_range(-1.0..1.0));
        }
        let actions: Vec<usize> = (0..n).collect();
        for temperature in [10.0, 1.0, 0.1, 0.01] {
            let d = select_action_quantum(&q, 0, &actions, &policy, temperature, &mut rng).expect("quantum decision");
            worst_ratio = worst_ratio.max(d.stats.j_calls as f64 / (4.0 * intervals * (n as f64).sqrt()));
            let c = select_action_classical(&q, 0, &actions, &policy, temperature, &mut rng).expect("classical decision");
            classical_ok &= c.stats.q_evaluations == n as u64;
        }
    }
    let pass = growth_ok && worst_ratio <= 1.0 && classical_ok;
    outcome(
        pass,
        format!(
            "median iterations {medians:?} at N={sizes:?}, growth {growth:.3?} (limit 2.3 from N=256); \
             max J-calls / (4 J sqrt N) {worst_ratio:.3}; classical calls = N: {classical_ok}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut exact_cases = 0;
    for n in [8usize, 16, 32] {
        let config = CountingConfig::default_for(n);
        let t = config.precision_bits;
        assert_eq!(t, (n as f64).log2().ceil() as u32 + 3);
        for r in 0..=n {
            let marked = MarkedSet::new(n, 0..r).unwrap();
            let est = count_marked(&marked, &config, &mut rng_from_seed(0)).unwrap();
            let y = (1u64 << t) as f64 * ((r as f64 / n as f64).sqrt().asin()) / std::f64::consts::PI;
            let representable = (y - y.round()).abs() < 1e-9;
            let diff = (est.estimate as i64 - r as i64).abs();
            if representable {
                exact_cases += 1;
            }
            if diff > 1 || (representable && diff != 0) {
                failures.push((n, r, est.estimate));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("failures {failures:?}; {exact_cases} representable cases checked for exactness"),
    )
}

/// Empirical TV, exact TV between the two selectors' distributions, and the
/// encoder's largest class error.
fn selector_agreement(q: &TabularQ, temperature: f64, seed: u64) -> (f64, f64, f64) {
    let n = 64;
    let mut rng = rng_from_seed(seed);
    let actions: Vec<usize> = (0..n).collect();
    let policy = PolicyConfig::default();
    let values: Vec<f64> = (0..n).map(|a| q.value(0, a)).collect();
    let selection = prepare_quantum_selection(&values, &policy, temperature, &mut rng).expect("selection");
    let draws = 50_000;
    let mut quantum = vec![0usize; n];
    let mut classical = vec![0usize; n];
    for _ in 0..draws {
        quantum[select_action_quantum(q, 0, &actions, &policy, temperature, &mut rng).unwrap().action] += 1;
        classical[select_action_classical(q, 0, &actions, &policy, temperature, &mut rng).unwrap().action] += 1;
    }
    let tv = 0.5
        * quantum
            .iter()
            .zip(&classical)
            .map(|(a, b)| (*a as f64 - *b as f64).abs() / draws as f64)
            .sum::<f64>();
    let exact = classical_action_distribution(&values, &policy, temperature).expect("classical distribution");
    let exact_tv = 0.5
        * selection
            .action_probabilities()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    (tv, exact_tv, selection.encoded.max_class_error)
}

fn criterion_8() -> Outcome {
    let n = 64;
    let mut rng = rng_from_seed(0xacce_0008);
    let mut q = TabularQ::new(1, n);
    for a in 0..n {
        q.set(0, a, rng.gen::<f64>());
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, temperature) in [1.0, 0.1].into_iter().enumerate() {
        let (tv, exact_tv, err) = selector_agreement(&q, temperature, 0xacce_0080 + i as u64);
        let limit = err + 0.02;
        pass &= tv <= limit;
        parts.push(format!(
            "T={temperature}: TV {tv:.4} (exact {exact_tv:.4}), encoder max class error {err:.4}, limit {limit:.4}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let grid = GridWorld::new(4, 4, (3, 3), &[], None).unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let mut parts = Vec::new();
    let mut pass = true;
    for selector in [SelectorKind::Quantum, SelectorKind::Classical] {
        let policy = PolicyConfig {
            selector,
            ..PolicyConfig::default()
        };
        let grid_ok = seeds
            .par_iter()
            .filter(|&&seed| {
                let cfg = TrainingConfig {
                    episodes: 5000,
                    seed,
                    ..TrainingConfig::default()
                };
                let mut q = TabularQ::new(16, 4);
                train(&grid, &mut q, &policy, &cfg).expect("training runs");
                greedy_policy_agreement(&grid, &q, cfg.discount).all_match()
            })
            .count();
        let bandit_ok = seeds
            .par_iter()
            .filter(|&&seed| {
                let mut rng = rng_from_seed(seed ^ 0xba4d);
                let arms = 16;
                let mut means: Vec<f64> = (0..arms).map(|_| rng.gen_range(0.0..0.5)).collect();
                let best = rng.gen_range(0..arms);
                means[best] = 1.0;
                let env = KArmedBandit::new(means, 0.1).unwrap();
                let cfg = TrainingConfig {
                    learning_rate: 0.1,
                    discount: 0.0,
                    episodes: 2000,
                    max_steps: 1,
                    seed,
                };
                let mut q = TabularQ::new(1, arms);
                train(&env, &mut q, &policy, &cfg).expect("training runs");
                greedy_action(&q, 0, &(0..arms).collect::<Vec<_>>()) == Some(best)
            })
            .count();
        pass &= grid_ok >= 9 && bandit_ok >= 9;
        parts.push(format!("{selector:?}: gridworld {grid_ok}/10, bandit {bandit_ok}/10"));
    }
    outcome(pass, format!("{} (need 9/10 each)", parts.join("; ")))
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn metric_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut compared = 0;
    for (cmd, file) in [
        ("encode", "encode.ini"),
        ("count", "count.ini"),
        ("train", "train_grid.ini"),
        ("train", "train_bandit.ini"),
        ("sweep", "sweep.ini"),
    ] {
        let config = config_dir().join(file);
        let mut outs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{file}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_qdist"))
                .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11"])
                .output()
                .expect("binary runs")
                .status;
            if !status.success() {
                differing.push(format!("{file}: exit {status}"));
            }
            outs.push(out);
        }
        let (a, b) = (metric_files(&outs[0]), metric_files(&outs[1]));
        if a.is_empty() || a.len() != b.len() {
            differing.push(format!("{file}: file sets differ"));
            continue;
        }
        for (fa, fb) in a.iter().zip(&b) {
            compared += 1;
            if fs::read(fa).unwrap() != fs::read(fb).unwrap() {
                differing.push(format!("{file}: {}", fa.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty(),
        format!("{compared} metric files compared across repeated runs; differing {differing:?}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, start: Instant, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict} [{:.1}s] {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    let start = Instant::now();
    let runs = run_random_schedules();
    report(1, start, criterion_1(&runs));
    report(2, start, criterion_2(&runs));
    report(3, start, criterion_3(&runs));
    let criteria: [fn() -> Outcome; 7] = [
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        report(i + 4, start, c());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
