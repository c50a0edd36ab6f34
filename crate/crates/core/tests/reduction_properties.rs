//! End-to-end checks of both reductions.

use chainfair::audit::audit_fairness;
use chainfair::instances::{make_dial_instance, make_linear_instance, sample_linear_contexts};
use chainfair::kwik::affine_lift;
use chainfair::model::RewardModel;
use chainfair::reductions::{
    compute_kwik_to_fair_params, ConstantBound, ContextualFairBandits, FairToKwik,
    FairToKwikParams, KwikToFair,
};
use chainfair::{
    sample_reward, AffineLinear, ArmSpec, BanditInstance, Context, KwikLearner, Payoff, Prediction,
    RoundTrace, SimRng,
};

#[test]
fn noiseless_linear_reduction_is_exact_and_fair() {
    let (k, d, horizon) = (3, 3, 500u64);
    for seed in 0..20 {
        let mut rng = SimRng::new(seed);
        let instance = make_linear_instance(d, k, RewardModel::Deterministic, &mut rng).unwrap();
        let params =
            compute_kwik_to_fair_params(horizon, k, 0.1, &ConstantBound((d + 1) as f64)).unwrap();
        let learners = vec![AffineLinear::new(d).unwrap(); k];
        let mut alg = KwikToFair::new(learners, params, horizon).unwrap();
        let mut trace = Vec::new();
        for t in 1..=horizon as usize {
            let contexts = sample_linear_contexts(k, d, &mut rng);
            let round = alg.step(&contexts, &mut rng).unwrap();
            let truth = instance.expected_all(&contexts).unwrap();
            for (p, f) in round.predictions.iter().zip(&truth) {
                if let Prediction::Value(s) = p {
                    assert!((s - f).abs() <= params.epsilon_star);
                }
            }
            let reward =
                sample_reward(&instance, round.chosen, &contexts[round.chosen], &mut rng).unwrap();
            alg.feedback(round.chosen, &contexts[round.chosen], reward)
                .unwrap();
            trace.push(RoundTrace {
                t,
                contexts,
                distribution: round.distribution,
                chosen: round.chosen,
                reward,
            });
        }
        assert!(
            !audit_fairness(&trace, &instance).unwrap().violated(),
            "seed {seed}"
        );
        for (j, count) in alg.dont_know_counts().iter().enumerate() {
            // learner j only hears its own pulls, so it can be queried
            // unknown contexts many times before it is pulled
            assert!(
                alg.learners()[j].rank() <= d + 1,
                "arm {j} abstained {count} times"
            );
        }
    }
}

#[test]
fn lifted_learner_recovers_affine_payoff() {
    let mut rng = SimRng::new(77);
    let theta = chainfair::instances::sample_unit_ball(4, &mut rng);
    let payoff = Payoff::Linear { theta };
    let mut learner = AffineLinear::new(4).unwrap();
    let mut abstained = 0;
    for _ in 0..200 {
        let x = Context::Real(chainfair::instances::sample_unit_ball(4, &mut rng));
        let f = payoff.value(&x).unwrap();
        match learner.predict(&x).unwrap() {
            Prediction::Value(v) => assert!((v - f).abs() < 1e-9),
            Prediction::DontKnow => {
                abstained += 1;
                learner.feedback(&x, f).unwrap();
            }
        }
    }
    assert!(abstained <= 5);
    assert_eq!(affine_lift(&[0.0; 4]).len(), 5);
}

#[test]
fn boolean_variant_on_conjunction_target_is_exact() {
    let d = 3;
    let target = Payoff::Conjunction {
        d,
        vars: vec![0, 2],
    };
    let horizon = 3000;
    let params = FairToKwikParams::boolean(0.1, horizon).unwrap();
    let instance = BanditInstance::new(
        vec![
            ArmSpec::Contextual {
                payoff: target.clone(),
            },
            ArmSpec::Contextual {
                payoff: Payoff::Dial,
            },
        ],
        RewardModel::Deterministic,
    )
    .unwrap();
    let policy = ContextualFairBandits::new(2, params.delta_star).unwrap();
    let mut learner = FairToKwik::new(params, policy).unwrap();
    let mut rng = SimRng::new(5);
    let mut values = 0;
    for _ in 0..horizon {
        let x = Context::Bool((0..d).map(|_| rng.fair_coin()).collect());
        let f = instance.expected(0, &x).unwrap();
        let step = learner.step(&x, |_| f, &mut rng).unwrap();
        if let Prediction::Value(v) = step.prediction {
            assert!(v == 0.0 || v == 1.0);
            assert_eq!(v, f);
            values += 1;
        }
    }
    assert!(values > 0, "never left the abstaining phase");
}

#[test]
fn fair_to_kwik_values_bracket_the_target() {
    let horizon = 3000;
    let params = FairToKwikParams::new(0.5, 0.05, horizon).unwrap();
    let mut rng = SimRng::new(13);
    let dial = make_dial_instance(2, 2, &mut rng).unwrap();
    let policy = ContextualFairBandits::new(2, params.delta_star).unwrap();
    let mut learner = FairToKwik::new(params, policy).unwrap();
    let mut regret = 0.0;
    for _ in 0..horizon {
        let x = dial.pool[rng.index(dial.pool.len())].clone();
        let f = dial.target(&x).unwrap();
        let step = learner
            .step(&x, |r| if r.bernoulli(f) { 1.0 } else { 0.0 }, &mut rng)
            .unwrap();
        if let Prediction::Value(v) = step.prediction {
            assert!((v - f).abs() <= params.epsilon, "{v} vs {f}");
        }
        if let Some(c) = step.committed {
            let best = f.max(c.dial_value);
            regret += best - (c.distribution.prob(0) * f + c.distribution.prob(1) * c.dial_value);
        }
    }
    let m = learner.dont_know_count() as f64;
    assert!(
        m * params.epsilon / 8.0 <= regret,
        "m = {m}, regret = {regret}"
    );
}
