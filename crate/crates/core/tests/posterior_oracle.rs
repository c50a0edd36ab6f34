//! Posterior odds against explicit Bayes over reward sequences.

use chainfair::instances::{lower_bound_means, posterior_odds, PosteriorQuery};

/// Likelihood ratio of one concrete reward sequence, multiplied out term by term.
fn likelihood_ratio(seq: u32, m: u32, lo: f64, hi: f64) -> f64 {
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..m {
        if seq & (1 << i) != 0 {
            num *= hi;
            den *= lo;
        } else {
            num *= 1.0 - hi;
            den *= 1.0 - lo;
        }
    }
    // equal priors: posterior ratio equals the likelihood ratio
    let post_hi = 0.5 * num / (0.5 * num + 0.5 * den);
    post_hi / (1.0 - post_hi)
}

#[test]
fn odds_match_enumerated_posteriors() {
    for k in [2usize, 5, 10] {
        for arm in 0..k {
            let (lo, hi) = lower_bound_means(k, arm);
            if hi >= 1.0 {
                continue;
            }
            for m in 0..=12u32 {
                for seq in 0..(1u32 << m) {
                    let s = seq.count_ones() as u64;
                    let want = likelihood_ratio(seq, m, lo, hi);
                    let got = posterior_odds(PosteriorQuery {
                        k,
                        p: lo,
                        s,
                        m: m as u64,
                    })
                    .unwrap();
                    assert!(
                        ((got - want) / want).abs() <= 1e-12,
                        "k={k} arm={arm} s={s} m={m}: {got} vs {want}"
                    );
                }
            }
        }
    }
}
