use cvar_core::lp::solve_cvar_lp;
use cvar_core::pareto::{pareto_step, solve_cvar_vi, ParetoLayers, ParetoPolygon, ViEngine, ViOptions};
use cvar_core::{parse_model, solve_ssp, BigRational, Mdp, RiskResult};
use num_bigint::BigInt;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn geometric() -> Mdp<BigRational> {
    parse_model("mdp\nstates 2\ninitial 0\ngoals 1\naction 0 a 1\n  0:1/2 1:1/2\n").unwrap()
}

fn witness_options() -> ViOptions {
    ViOptions {
        witness: true,
        trace: true,
        ..ViOptions::default()
    }
}

#[test]
fn first_step_of_geometric_chain() {
    let m = geometric();
    let e = solve_ssp(&m).unwrap().values;
    let layers = ParetoLayers::base(&m, &e);
    assert_eq!(pareto_step(&m, &layers, 0), ParetoPolygon::point(q(1, 2), q(1, 1)));
    assert_eq!(pareto_step(&m, &layers, 1), ParetoPolygon::point(q(1, 1), q(0, 1)));
}

#[test]
fn geometric_chain_thresholds() {
    let m = geometric();
    let out = solve_cvar_vi(&m, &[q(1, 4), q(1, 2)]).unwrap();
    assert_eq!(out.thresholds[0].result, RiskResult { var: 2, cvar: q(4, 1) });
    assert_eq!(out.thresholds[1].result, RiskResult { var: 1, cvar: q(3, 1) });
}

#[test]
fn witnesses_reproduce_the_optimum() {
    let models = [
        "mdp\nstates 3\ninitial 0\ngoals 2\n\
         action 0 gamble 1\n  2:3/4 1:1/4\n\
         action 0 sure 3\n  2:1\n\
         action 1 slow 2\n  1:1/2 2:1/2\n",
        "mdp\nstates 3\ninitial 0\ngoals 2\n\
         action 0 risky 1\n  2:1/2 1:1/2\n\
         action 0 safe 1\n  1:1\n\
         action 1 a 1\n  1:1/3 2:2/3\n",
    ];
    let ts = [q(1, 2), q(1, 4), q(1, 10), q(3, 100)];
    for text in models {
        let m: Mdp<BigRational> = parse_model(text).unwrap();
        let out = ViEngine::new(&m).unwrap().with_options(witness_options()).solve(&ts).unwrap();
        for th in &out.thresholds {
            let lp = solve_cvar_lp(&m, &th.threshold).unwrap();
            assert_eq!(th.result, lp.result, "t = {}", th.threshold);
            let policy = th.policy.as_ref().unwrap();
            assert_eq!(policy.evaluate(&m, &th.threshold).unwrap(), th.result);
        }
        assert!(out.trace_csv().starts_with("n,vertices_s0,vertices_s1,vertices_s2,cvar_t1/2"));
    }
}
