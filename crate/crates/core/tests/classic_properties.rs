//! Statistical properties of the chaining algorithm over many seeded runs.

use chainfair::audit::audit_fairness;
use chainfair::fair_bandits::{pull_count_lower_bound, width_bound};
use chainfair::instances::sample_lower_bound_instance;
use chainfair::{sample_reward, Context, FairBandits, RoundTrace, SimRng};

fn slack(delta: f64, n: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt()
}

struct RunFlags {
    mean_escaped: bool,
    pulls_short: bool,
    too_wide: bool,
    active_grew: bool,
    violated: bool,
}

fn run(seed: u64, k: usize, delta: f64, horizon: usize) -> RunFlags {
    let mut rng = SimRng::for_trial(seed, 0);
    let instance = sample_lower_bound_instance(k, &mut rng).unwrap().instance();
    let means = instance.means().unwrap();
    let mut fb = FairBandits::new(k, delta).unwrap();
    let mut trace = Vec::with_capacity(horizon);
    let mut flags = RunFlags {
        mean_escaped: false,
        pulls_short: false,
        too_wide: false,
        active_grew: false,
        violated: false,
    };
    let mut prev_active = fb.active().to_vec();
    for t in 1..=horizon {
        let before: u64 = fb.arms().iter().map(|a| a.pulls).sum();
        assert_eq!(before, t as u64 - 1);
        let (distribution, arm) = fb.step(&mut rng);
        if !fb.active().iter().all(|a| prev_active.contains(a)) {
            flags.active_grew = true;
        }
        prev_active = fb.active().to_vec();

        // pull counts and widths at the start of round t
        let lb = pull_count_lower_bound(t as u64, k, delta);
        let short = fb
            .active()
            .iter()
            .any(|&i| (fb.arms()[i].pulls as f64) < lb);
        flags.pulls_short |= short;
        if !short {
            if let Some(eta) = width_bound(t as u64, k, delta) {
                flags.too_wide |= fb
                    .active()
                    .iter()
                    .any(|&i| fb.arms()[i].interval.width() > eta + 1e-12);
            }
        }

        let reward = sample_reward(&instance, arm, &Context::Unit, &mut rng).unwrap();
        fb.update(arm, reward).unwrap();
        let est = &fb.arms()[arm];
        assert!((0.0..=1.0).contains(&est.mean));
        assert!((est.interval.lower + est.interval.upper - 2.0 * est.mean).abs() < 1e-12);
        flags.mean_escaped |= (0..k).any(|i| !fb.arms()[i].interval.contains(means[i]));
        trace.push(RoundTrace {
            t,
            contexts: vec![Context::Unit; k],
            distribution,
            chosen: arm,
            reward,
        });
    }
    flags.violated = audit_fairness(&trace, &instance).unwrap().violated();
    flags
}

#[test]
fn interval_validity_pull_counts_widths_and_fairness() {
    let (k, delta, horizon, n) = (5, 0.1, 2000, 500);
    let runs: Vec<RunFlags> = (0..n as u64).map(|s| run(s, k, delta, horizon)).collect();
    let frac =
        |f: &dyn Fn(&RunFlags) -> bool| runs.iter().filter(|r| f(r)).count() as f64 / n as f64;
    let bound = slack(delta, n);
    assert!(frac(&|r| r.active_grew) == 0.0);
    assert!(
        frac(&|r| r.mean_escaped) <= bound,
        "interval failures {}",
        frac(&|r| r.mean_escaped)
    );
    assert!(
        frac(&|r| r.pulls_short) <= bound,
        "pull-count failures {}",
        frac(&|r| r.pulls_short)
    );
    assert!(frac(&|r| r.too_wide) == 0.0, "width bound broken");
    assert!(
        frac(&|r| r.violated) <= bound,
        "unfair runs {}",
        frac(&|r| r.violated)
    );
}

#[test]
fn uniform_play_regret_on_lower_bound_instances() {
    let k = 10;
    let mut rng = SimRng::new(31);
    let n = 2000;
    let mut total = 0.0;
    for _ in 0..n {
        let means = sample_lower_bound_instance(k, &mut rng).unwrap().means;
        let best = means.iter().copied().fold(f64::MIN, f64::max);
        total += best - means.iter().sum::<f64>() / k as f64;
    }
    let avg = total / n as f64;
    // best arm is at least 2/3, uniform play earns at most 1/2 + 1/(2k)
    assert!(
        avg >= 1.0 / 6.0 - 1.0 / k as f64,
        "average uniform regret {avg}"
    );
}
