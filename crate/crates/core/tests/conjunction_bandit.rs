//! The conjunction bandit on simulated noiseless instances.

use chainfair::audit::{audit_fairness, per_round_regret};
use chainfair::instances::{make_conjunction_instance, sample_bool_contexts, InstanceDump};
use chainfair::{
    sample_reward, ArmDistribution, ArmSpec, BanditInstance, ConjunctionBandit, Context, Payoff,
    RewardModel, RoundTrace, SimRng,
};

#[test]
fn candidates_cover_truth_and_regret_stays_below_k2d() {
    let k = 4;
    for d in [4usize, 6, 8] {
        for seed in 0..30 {
            let mut rng = SimRng::new(seed);
            let instance = make_conjunction_instance(d, k, &mut rng).unwrap();
            let truth = InstanceDump::from_instance(&instance, "conjunction", seed)
                .unwrap()
                .conjunctions
                .unwrap();
            let mut alg = ConjunctionBandit::new(k, d).unwrap();
            let mut trace = Vec::new();
            let mut prev: Vec<Vec<usize>> = (0..k).map(|j| alg.candidates(j)).collect();
            for t in 1..=1500 {
                let contexts = sample_bool_contexts(k, d, &mut rng);
                let choice = alg.select(&contexts, &mut rng).unwrap();
                for &j in &choice.active {
                    assert_eq!(
                        instance.expected(j, &contexts[j]).unwrap(),
                        1.0,
                        "false positive"
                    );
                }
                let reward =
                    sample_reward(&instance, choice.chosen, &contexts[choice.chosen], &mut rng)
                        .unwrap();
                alg.observe(&choice, reward);
                for j in 0..k {
                    let now = alg.candidates(j);
                    assert!(truth[j].iter().all(|v| now.contains(v)));
                    assert!(now.iter().all(|v| prev[j].contains(v)));
                    prev[j] = now;
                }
                trace.push(RoundTrace {
                    t,
                    contexts,
                    distribution: choice.distribution,
                    chosen: choice.chosen,
                    reward,
                });
            }
            let regret: f64 = per_round_regret(&trace, &instance).unwrap().iter().sum();
            assert!(
                regret <= (k * k * d) as f64,
                "d={d} seed={seed} regret={regret}"
            );
        }
    }
}

#[test]
fn exclusive_play_of_one_qualified_arm_is_unfair() {
    let d = 2;
    let instance = BanditInstance::new(
        vec![
            ArmSpec::Contextual {
                payoff: Payoff::Conjunction { d, vars: vec![] },
            },
            ArmSpec::Contextual {
                payoff: Payoff::Conjunction { d, vars: vec![0] },
            },
        ],
        RewardModel::Deterministic,
    )
    .unwrap();
    // arm 0 has already learned its (empty) conjunction, arm 1 has not
    let mut alg = ConjunctionBandit::new(2, d).unwrap();
    let ctx0 = vec![
        Context::Bool(vec![false, false]),
        Context::Bool(vec![false, false]),
    ];
    let mut rng = SimRng::new(0);
    loop {
        let choice = alg.select(&ctx0, &mut rng).unwrap();
        let reward =
            sample_reward(&instance, choice.chosen, &ctx0[choice.chosen], &mut rng).unwrap();
        alg.observe(&choice, reward);
        if alg.candidates(0).is_empty() {
            break;
        }
    }
    let contexts = vec![
        Context::Bool(vec![true, false]),
        Context::Bool(vec![true, false]),
    ];
    let choice = alg.select(&contexts, &mut rng).unwrap();
    assert_eq!(
        choice.distribution,
        ArmDistribution::point_mass(2, 0).unwrap()
    );
    let row = RoundTrace {
        t: 1,
        contexts,
        distribution: choice.distribution,
        chosen: 0,
        reward: 1.0,
    };
    let report = audit_fairness(&[row], &instance).unwrap();
    assert!(report.violated());
}
