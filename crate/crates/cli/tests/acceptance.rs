//! End-to-end acceptance checks. Each check prints one PASS or FAIL line and
//! the process exits non-zero if any check fails.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use chainfair::fair_bandits::{chained_set, top_arm, ConfidenceInterval, Overlap};
use chainfair::instances::{
    distinguishing_time, is_distinguished, log_log_slope, posterior_odds, PosteriorQuery,
};
use chainfair::io::{read_intervals_csv, write_intervals_csv};
use chainfair::SimRng;
use chainfair_cli::experiment::adversarial_dont_know;
use chainfair_cli::{
    run_experiment, run_fair_to_kwik_trial, run_kwik_bound, run_trial, sweep, Axis,
    ExperimentConfig, InstanceConfig, KwikBoundRequest, LearnerKind,
};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn config(
    algorithm: &str,
    instance: InstanceConfig,
    delta: f64,
    horizon: u64,
    trials: u64,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        algorithm: algorithm.into(),
        instance,
        delta,
        epsilon: None,
        horizon,
        trials,
        seed,
        output_dir: "out".into(),
        write_traces: false,
    }
}

fn slack(delta: f64, n: u64) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt()
}

fn violation_fraction(cfg: &ExperimentConfig) -> Result<f64, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = cfg.clone();
    cfg.output_dir = tmp.path().to_path_buf();
    let s = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
    Ok(s.audit().violation_fraction)
}

fn fairness_budget() -> Check {
    let fb = config(
        "fair_bandits",
        InstanceConfig::LowerBound { k: 5 },
        0.2,
        5000,
        500,
        101,
    );
    let fb_frac = violation_fraction(&fb)?;
    let fb_limit = slack(0.2, 500);
    let kw = config(
        "kwik_to_fair",
        InstanceConfig::Linear { k: 3, d: 3 },
        0.2,
        2000,
        200,
        102,
    );
    let kw_frac = violation_fraction(&kw)?;
    let msg = format!(
        "chaining violation fraction {fb_frac:.4} (limit {fb_limit:.4}), linear reduction {kw_frac:.4} (must be 0)"
    );
    if fb_frac <= fb_limit && kw_frac == 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Replays the interval CSV of every trial and returns `(exits, fraction of
/// trials whose exits all left below every arm still active)`.
fn exit_order(k: usize, trials: u64) -> Result<(u32, f64), String> {
    let cfg = config(
        "fair_bandits",
        InstanceConfig::LowerBound { k },
        0.1,
        40_000,
        trials,
        202,
    );
    let mut ordered = 0;
    let mut exits = 0;
    for trial in 0..cfg.trials {
        let r = run_trial(&cfg, trial, true).map_err(|e| e.to_string())?;
        let means = r.instance.means().ok_or("lower-bound instance has means")?;
        let mut csv = Vec::new();
        write_intervals_csv(&mut csv, r.intervals.as_deref().unwrap_or_default())
            .map_err(|e| e.to_string())?;
        let rows = read_intervals_csv(csv.as_slice()).map_err(|e| e.to_string())?;

        let mut prev: BTreeSet<usize> = (0..k).collect();
        let mut well_ordered = true;
        for round in rows.chunks(k) {
            let active: BTreeSet<usize> = round
                .iter()
                .filter(|row| row.active == 1)
                .map(|row| row.arm)
                .collect();
            if !active.is_subset(&prev) {
                return Err(format!(
                    "k={k} trial {trial}: active set grew at round {}",
                    round[0].t
                ));
            }
            for &gone in prev.difference(&active) {
                exits += 1;
                well_ordered &= active.iter().all(|&j| means[gone] < means[j]);
            }
            prev = active;
        }
        ordered += well_ordered as u32;
    }
    Ok((exits, ordered as f64 / trials as f64))
}

fn active_set_evolution() -> Check {
    let (exits, frac) = exit_order(10, 20)?;
    // at k = 10 the means sit too close for any arm to leave by this horizon,
    // so a smaller draw is reported as well
    let (small_exits, small_frac) = exit_order(5, 20)?;
    let msg = format!(
        "active set never grew; k=10: {exits} exits, ordered fraction {frac:.2} (need 0.90); \
         k=5: {small_exits} exits, ordered fraction {small_frac:.2}"
    );
    if frac >= 0.9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn regret_separation() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for k in [10u64, 20] {
        let horizon = 25 * k * k;
        let mut per_alg = Vec::new();
        for alg in ["fair_bandits", "ucb"] {
            let base = config(
                alg,
                InstanceConfig::LowerBound { k: 10 },
                0.1,
                horizon,
                50,
                303,
            );
            let rows = sweep(&base, Axis::K, &[k], None).map_err(|e| e.to_string())?;
            per_alg.push(rows[0].final_round_regret);
        }
        ok &= per_alg[0] >= 0.05 && per_alg[1] <= 0.05;
        lines.push(format!(
            "k={k} T={horizon}: chaining {:.4} ucb {:.4}",
            per_alg[0], per_alg[1]
        ));
    }
    let msg = format!("{} (need chaining >= 0.05, ucb <= 0.05)", lines.join("; "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn distinguishing_scale() -> Check {
    let delta = 0.01f64;
    let threshold = (2.0 * delta).sqrt();
    let ks = [5usize, 10, 20, 40];
    let mut medians = Vec::new();
    for &k in &ks {
        let mut times = Vec::with_capacity(200);
        for stream in 0..200u64 {
            let mut rng = SimRng::for_trial(404 + k as u64, stream);
            let m = distinguishing_time(k, k / 2, threshold, 10_000_000, &mut rng)
                .map_err(|e| e.to_string())?
                .ok_or_else(|| format!("k={k} stream {stream} never distinguished"))?;
            times.push(m);
        }
        times.sort_unstable();
        medians.push((times[99] + times[100]) as f64 / 2.0);
    }
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let alpha = log_log_slope(&xs, &medians).map_err(|e| e.to_string())?;
    let msg = format!("medians {medians:?}, fitted exponent {alpha:.3} (need 1.6..=2.4)");
    if (1.6..=2.4).contains(&alpha) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn posterior_oracle() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in [2usize, 5, 10] {
        for arm in 0..k {
            let lo = 1.0 / 3.0 + (arm + 1) as f64 / (3.0 * k as f64);
            let hi = lo + 1.0 / (3.0 * k as f64);
            for m in 0..=12u32 {
                // brute force: posterior of "high" over every sequence with s ones, uniform prior
                let mut by_s = vec![(0.0f64, 0.0f64); m as usize + 1];
                for seq in 0u32..(1 << m) {
                    let s = seq.count_ones() as i32;
                    let f = m as i32 - s;
                    by_s[s as usize].0 += 0.5 * hi.powi(s) * (1.0 - hi).powi(f);
                    by_s[s as usize].1 += 0.5 * lo.powi(s) * (1.0 - lo).powi(f);
                }
                for (s, (ph, pl)) in by_s.iter().enumerate() {
                    let expected = ph / pl;
                    let got = posterior_odds(PosteriorQuery {
                        k,
                        p: lo,
                        s: s as u64,
                        m: m as u64,
                    })
                    .map_err(|e| e.to_string())?;
                    worst = worst.max((got - expected).abs() / expected);
                    let posterior_high = ph / (ph + pl);
                    let brute = posterior_high >= 1.0 - 0.05 || posterior_high <= 0.05;
                    if is_distinguished(expected, 0.05) != brute
                        && (posterior_high - 0.95).abs() > 1e-9
                    {
                        return Err(format!("k={k} m={m} s={s}: distinguishing test disagrees"));
                    }
                    cases += 1;
                }
            }
        }
    }
    let msg =
        format!("{cases} (k, arm, m, s) cases, worst relative error {worst:.2e} (limit 1e-12)");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bfs_component(intervals: &[(usize, ConfidenceInterval)], top: usize) -> Vec<usize> {
    let mut seen = BTreeSet::from([top]);
    let mut queue = VecDeque::from([top]);
    while let Some(a) = queue.pop_front() {
        let ia = intervals.iter().find(|(j, _)| *j == a).unwrap().1;
        for &(b, ib) in intervals {
            if !seen.contains(&b) && ia.lower <= ib.upper && ib.lower <= ia.upper {
                seen.insert(b);
                queue.push_back(b);
            }
        }
    }
    seen.into_iter().collect()
}

fn chaining_oracle() -> Check {
    let mut rng = SimRng::new(606);
    for case in 0..10_000 {
        let n = 1 + rng.index(6);
        let intervals: Vec<(usize, ConfidenceInterval)> = (0..n)
            .map(|j| {
                // coarse grid so shared endpoints occur often
                let a = rng.index(11) as f64 / 10.0;
                let b = rng.index(11) as f64 / 10.0;
                (j, ConfidenceInterval::new(a.min(b), a.max(b)).unwrap())
            })
            .collect();
        let top = top_arm(&intervals).map_err(|e| e.to_string())?;
        let got = chained_set(&intervals, top, Overlap::Closed).map_err(|e| e.to_string())?;
        if got != bfs_component(&intervals, top) {
            return Err(format!(
                "case {case}: sweep and closure disagree on {intervals:?}"
            ));
        }
    }
    Ok("10000 random interval sets agree with breadth-first closure".into())
}

fn kwik_budgets() -> Check {
    let mut worst_linear = 0.0f64;
    for seed in 0..100u64 {
        let d = 1 + (seed as usize % 10);
        let r = run_kwik_bound(&KwikBoundRequest {
            learner: LearnerKind::NoiselessLinear,
            d,
            epsilon: 0.0,
            delta: 0.0,
            length: Some(200),
            seed,
            sequence: None,
        })
        .map_err(|e| e.to_string())?;
        if r.dont_know > d as u64 {
            return Err(format!(
                "linear learner abstained {} times with d={d}",
                r.dont_know
            ));
        }
        worst_linear = worst_linear.max(r.max_error.unwrap_or(0.0));
    }
    if worst_linear > 1e-9 {
        return Err(format!(
            "linear learner answered with error {worst_linear:.2e}"
        ));
    }
    let mut enum_counts = Vec::new();
    for d in 4..=10 {
        let n = adversarial_dont_know(d).map_err(|e| e.to_string())?;
        if n != (1u64 << d) - 1 {
            return Err(format!(
                "conjunction learner abstained {n} times with d={d}"
            ));
        }
        enum_counts.push(n);
    }
    for seed in 0..200u64 {
        let mut rng = SimRng::new(seed);
        let epsilon = 0.05 + 0.5 * rng.uniform();
        let delta = 0.01 + 0.3 * rng.uniform();
        let r = run_kwik_bound(&KwikBoundRequest {
            learner: LearnerKind::BernoulliMean,
            d: 1,
            epsilon,
            delta,
            length: Some(2000),
            seed,
            sequence: None,
        })
        .map_err(|e| e.to_string())?;
        let cap = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64;
        if r.dont_know > cap {
            return Err(format!(
                "mean learner abstained {} times, cap {cap}",
                r.dont_know
            ));
        }
    }
    Ok(format!(
        "linear <= d with max error {worst_linear:.1e}; conjunction counts {enum_counts:?}; mean learner within cap on 200 streams"
    ))
}

fn conjunction_separation() -> Check {
    let k = 4usize;
    let mut table =
        vec!["      d  k^2*d  max regret  mean regret  fair-side abstentions".to_string()];
    let mut ok = true;
    for d in [6usize, 8, 10] {
        let cfg = config(
            "conjunction_bandit",
            InstanceConfig::Conjunction { k, d },
            0.1,
            2000,
            50,
            808,
        );
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for trial in 0..cfg.trials {
            let r = run_trial(&cfg, trial, false).map_err(|e| e.to_string())?;
            let regret = r.total_regret();
            worst = worst.max(regret);
            total += regret;
        }
        let cap = (k * k * d) as f64;
        ok &= worst <= cap;
        let abstentions = adversarial_dont_know(d).map_err(|e| e.to_string())?;
        table.push(format!(
            "    {d:>3}  {cap:>5}  {worst:>10.2}  {:>11.2}  {abstentions:>21}",
            total / cfg.trials as f64
        ));
    }
    let msg = format!("regret within k^2*d on every run\n{}", table.join("\n"));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fair_to_kwik_contract() -> Check {
    let (epsilon, delta, horizon, seeds) = (0.2, 0.05, 5000u64, 50u64);
    let mut accurate = 0;
    let mut budget = 0;
    let mut abstentions = Vec::new();
    let mut answered = 0;
    for seed in 0..seeds {
        let r = run_fair_to_kwik_trial(epsilon, delta, horizon, 3, 8, 909, seed)
            .map_err(|e| e.to_string())?;
        accurate += r.values.iter().all(|(v, f)| (v - f).abs() <= epsilon) as u32;
        budget += (r.dont_know as f64 * epsilon / 8.0 <= r.committed_regret) as u32;
        abstentions.push(r.dont_know);
        answered += !r.values.is_empty() as u32;
    }
    let acc = accurate as f64 / seeds as f64;
    let bud = budget as f64 / seeds as f64;
    let mean_m = abstentions.iter().sum::<u64>() as f64 / seeds as f64;
    let msg = format!(
        "accurate runs {acc:.2} (need 0.95), runs with m*eps/8 <= regret {bud:.2} (need 0.90), mean abstentions {mean_m:.1}, runs with a numeric answer {answered}"
    );
    if acc >= 0.95 && bud >= 0.9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Check {
    let configs = [
        config(
            "fair_bandits",
            InstanceConfig::LowerBound { k: 6 },
            0.1,
            500,
            4,
            1,
        ),
        config(
            "ucb",
            InstanceConfig::Classic {
                means: vec![0.3, 0.6, 0.7],
            },
            0.1,
            500,
            3,
            2,
        ),
        config(
            "kwik_to_fair",
            InstanceConfig::Linear { k: 3, d: 3 },
            0.1,
            300,
            3,
            3,
        ),
        config(
            "kwik_to_fair_doubling",
            InstanceConfig::Classic {
                means: vec![0.2, 0.9],
            },
            0.1,
            300,
            3,
            4,
        ),
        config(
            "conjunction_bandit",
            InstanceConfig::Conjunction { k: 3, d: 6 },
            0.1,
            300,
            3,
            5,
        ),
        config(
            "uniform",
            InstanceConfig::Conjunction { k: 3, d: 6 },
            0.1,
            300,
            3,
            6,
        ),
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, base) in configs.iter().enumerate() {
        let mut runs = Vec::new();
        for (run, jobs) in [(0, Some(1)), (1, Some(1)), (2, Some(4))] {
            let mut cfg = base.clone();
            cfg.write_traces = true;
            cfg.output_dir = tmp.path().join(format!("{i}_{run}"));
            run_experiment(&cfg, jobs).map_err(|e| e.to_string())?;
            runs.push(dir_bytes(&cfg.output_dir));
        }
        if runs[0] != runs[1] || runs[0] != runs[2] {
            return Err(format!("{} outputs differ between reruns", base.algorithm));
        }
        files += runs[0].len();
    }
    Ok(format!(
        "{files} files byte-identical across reruns and thread counts"
    ))
}

fn main() -> ExitCode {
    let checks: [Criterion; 10] = [
        ("fairness budget", fairness_budget),
        ("active-set evolution", active_set_evolution),
        ("regret separation", regret_separation),
        ("distinguishing scale", distinguishing_scale),
        ("posterior odds oracle", posterior_oracle),
        ("chaining oracle", chaining_oracle),
        ("KWIK budgets", kwik_budgets),
        ("conjunction separation", conjunction_separation),
        ("fair-to-KWIK contract", fair_to_kwik_contract),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name} ({secs:.1}s): {detail}", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
