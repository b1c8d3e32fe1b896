use cvar_core::lp::solve_cvar_lp;
use cvar_core::simulate::{default_horizon, simulate_policy};
use cvar_core::ssp::evaluate_policy_expectation;
use cvar_core::{parse_model, BigRational, Error, Indexing, Mdp, Policy, Scalar};
use num_bigint::BigInt;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn geometric() -> Mdp<BigRational> {
    parse_model("mdp\nstates 2\ninitial 0\ngoals 1\naction 0 a 1\n  0:1/2 1:1/2\n").unwrap()
}

#[test]
fn deterministic_chain_is_exact() {
    let m: Mdp<BigRational> = parse_model(
        "mdp\nstates 4\ninitial 0\ngoals 3\naction 0 a 1\n  1:1\naction 1 a 1\n  2:1\naction 2 a 1\n  3:1\n",
    )
    .unwrap();
    let pi = Policy::stationary(Indexing::Step, vec![0; 4]);
    let report = simulate_policy(&m, &pi, &[q(1, 2), q(1, 10)], 1000, 7, 30).unwrap();
    assert_eq!(report.counts, vec![(3, 1000)]);
    assert_eq!(report.thresholds[0].cvar, 3.0);
    assert_eq!(report.thresholds[1].var, 3);
    assert_eq!(report.thresholds[1].half_width, 0.0);
}

#[test]
fn geometric_chain_interval_covers_the_exact_value() {
    let m = geometric();
    let out = solve_cvar_lp(&m, &q(1, 4)).unwrap();
    let horizon = default_horizon(out.result.cvar.to_f64());
    let report = simulate_policy(&m, &out.policy, &[q(1, 4)], 200_000, 11, horizon).unwrap();
    assert!(report.contains(0, 4.0), "{report:?}");
    let e = evaluate_policy_expectation(&m, &out.policy.tail).unwrap()[0].to_f64();
    assert!((report.mean - e).abs() <= report.mean_half_width, "{report:?}");
    assert!(report.censored < 5);
}

#[test]
fn fixed_seed_is_reproducible() {
    let m = geometric();
    let pi = Policy::stationary(Indexing::Step, vec![0, 0]);
    let a = simulate_policy(&m, &pi, &[q(1, 4)], 5000, 3, 40).unwrap();
    let b = simulate_policy(&m, &pi, &[q(1, 4)], 5000, 3, 40).unwrap();
    assert_eq!(a, b);
    let c = simulate_policy(&m, &pi, &[q(1, 4)], 5000, 4, 40).unwrap();
    assert_ne!(a.counts, c.counts);
}

#[test]
fn rejects_bad_input() {
    let m = geometric();
    let pi = Policy::stationary(Indexing::Step, vec![0, 0]);
    assert!(matches!(simulate_policy(&m, &pi, &[q(1, 4)], 0, 1, 10), Err(Error::Argument(_))));
    let short = Policy::stationary(Indexing::Step, vec![0]);
    assert!(matches!(simulate_policy(&m, &short, &[q(1, 4)], 10, 1, 10), Err(Error::PolicyMismatch(_))));
    // Horizon 0 censors every run.
    assert!(matches!(simulate_policy(&m, &pi, &[q(1, 4)], 10, 1, 0), Err(Error::Censored { .. })));
}
