use bootperc::oracle::{auxiliary_tail, brute_force_pmf, exact_pmf, exact_stop_cdf, unstopped_marginal};
use bootperc::{binom, ModelParams};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (2u32..5, 1u64..40, 0.0f64..1.0).prop_flat_map(|(r, extra, p)| {
        let n = r as u64 + extra;
        (Just(n), Just(p), Just(r), 1u64..=n).prop_map(|(n, p, r, a)| ModelParams::with_degenerate(n, p, r, a).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pmf_is_a_law_on_a_to_n(pr in params()) {
        let pmf = exact_pmf(&pr).unwrap();
        prop_assert!((pmf.total() - 1.0).abs() < 1e-9);
        for k in 0..pr.a {
            prop_assert_eq!(pmf.prob(k), 0.0);
        }
        for (_, p) in pmf.iter() {
            prop_assert!(p.to_f64() >= 0.0);
        }
    }

    #[test]
    fn truncated_cdf_matches_pmf(pr in params(), frac in 0.0f64..1.0) {
        let pmf = exact_pmf(&pr).unwrap();
        let tau = (frac * pr.n as f64).floor() as u64;
        let cut = exact_stop_cdf(&pr, tau).unwrap().prob();
        prop_assert!((cut - pmf.cdf(tau).to_f64()).abs() < 1e-9, "tau {} cut {} full {}", tau, cut, pmf.cdf(tau).to_f64());
    }

    #[test]
    fn auxiliary_event_is_dominated(pr in params(), frac in 0.0f64..=1.0) {
        let t = (frac * pr.n as f64).round() as u64;
        let (event, aux) = auxiliary_tail(&pr, t).unwrap();
        prop_assert!(event <= aux + 1e-12, "{} > {}", event, aux);
    }

    #[test]
    fn more_seeds_stochastically_larger(pr in params()) {
        prop_assume!(pr.a < pr.n);
        let more = ModelParams::with_degenerate(pr.n, pr.p, pr.r, pr.a + 1).unwrap();
        let (x, y) = (exact_pmf(&pr).unwrap(), exact_pmf(&more).unwrap());
        for k in 0..=pr.n {
            prop_assert!(y.cdf(k).to_f64() <= x.cdf(k).to_f64() + 1e-9);
        }
    }
}

#[test]
fn dp_matches_enumeration_on_full_grid() {
    for n in 1..=7u64 {
        for p in [0.05, 0.3, 0.5, 0.9] {
            for r in [2u32, 3] {
                for a in 1..=n {
                    let pr = ModelParams::new(n, p, r, a).unwrap();
                    let dp = exact_pmf(&pr).unwrap();
                    let bf = brute_force_pmf(&pr).unwrap();
                    for k in 0..=n {
                        assert!((dp.prob(k) - bf.prob(k)).abs() < 1e-12, "{pr:?} k={k}");
                    }
                }
            }
        }
    }
}

#[test]
fn marginal_of_chain_is_binomial() {
    for (n, p, r, a) in [(40, 0.1, 2, 3), (30, 0.3, 3, 5), (25, 0.02, 2, 1)] {
        let pr = ModelParams::new(n, p, r, a).unwrap();
        for t in [1u64, 5, 12, n] {
            let v = unstopped_marginal(&pr, t).unwrap();
            let pi = bootperc::activation_prob(t as f64, p, r).unwrap().pi;
            for (s, &x) in v.iter().enumerate() {
                assert!((x - binom::ln_pmf(n - a, s as u64, pi).exp()).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn auxiliary_randomized_grid() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let r = rng.random_range(2..5u32);
        let n = rng.random_range(r as u64..2000);
        let a = rng.random_range(1..=n);
        let p = 10f64.powf(rng.random_range(-4.0..-0.1));
        let t = rng.random_range(0..=n);
        let pr = ModelParams::new(n, p, r, a).unwrap();
        let (event, aux) = auxiliary_tail(&pr, t).unwrap();
        assert!(event <= aux + 1e-12, "{pr:?} t={t}: {event} > {aux}");
    }
}

#[test]
fn early_stop_at_large_n_is_cheap_and_consistent() {
    // n far above the full-pmf cap; tau of order a_c keeps the DP small
    let n = 100_000u64;
    let p = (n as f64).powf(-0.7);
    let a_c = bootperc::LnCritical::at(n as f64, p.ln(), 2).ln_a_c.exp();
    let pr = ModelParams::new(n, p, 2, (2.0 * a_c).ceil() as u64).unwrap();
    let k = bootperc::oracle::default_k(2.0, 2).unwrap();
    let tau = (k * a_c).floor() as u64;
    let st = exact_stop_cdf(&pr, tau).unwrap();
    assert!(st.prob() > 0.0 && st.prob() < 1e-6);
    assert!(st.discarded_bound.to_f64() < 1e-20);
    // the chain can only stop at t = a when no other vertex is active by then
    let pi = bootperc::activation_prob(pr.a as f64, p, 2).unwrap().pi;
    let at_a = exact_stop_cdf(&pr, pr.a).unwrap();
    let expect = (n - pr.a) as f64 * (-pi).ln_1p();
    assert!((at_a.ln() - expect).abs() < 1e-9 * expect.abs());
    assert!(at_a.ln() <= st.ln());
}
