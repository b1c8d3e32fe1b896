use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvar_core::models::{random_mdp, RandomSpec};
use cvar_core::{parse_model, validate_assumptions, BigRational, Mdp};
use serde_json::Value;

const GEOMETRIC: &str = "mdp\nstates 2\ninitial 0\ngoals 1\naction 0 a 1\n  0:1/2 1:1/2\n";
const CHOICE: &str = "mdp\nstates 3\ninitial 0\ngoals 2\n\
    action 0 gamble 1\n  2:3/4 1:1/4\n\
    action 0 sure 3\n  2:1\n\
    action 1 slow 2\n  1:1/2 2:1/2\n";

fn cvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvar")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solves_geometric_chain_with_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "geo.mdp", GEOMETRIC);
    for method in ["vi", "lp", "mc"] {
        let v = json(&cvar(&["solve", "--model", &model, "--method", method, "--threshold", "0.25"]));
        let r = &v["results"][0];
        assert_eq!(r["var"], 2, "{method}");
        assert_eq!(r["cvar"], "4", "{method}");
        assert_eq!(r["engine"], method);
        assert_eq!(v["mode"], "exact");
        assert_eq!(v["expected"], "2");
    }
    let v = json(&cvar(&["solve", "--model", &model, "--threshold", "0.25", "--mode", "float"]));
    assert_eq!(v["mode"], "float");
    assert!((v["results"][0]["cvar_value"].as_f64().unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn json_schema_and_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "geo.mdp", GEOMETRIC);
    let v = json(&cvar(&["solve", "--model", &model, "--threshold", "1/2,1/4", "--seed", "9"]));
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["model", "mode", "seed", "expected", "results", "policy_files", "trace"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(v["seed"], 9);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["threshold"], "1/2");
    assert_eq!(results[0]["cvar"], "3");
    for r in results {
        assert!(r["cvar_value"].as_f64().unwrap() >= r["var"].as_f64().unwrap());
        assert!(r["wall_time_ms"].as_f64().unwrap() >= 0.0);
    }

    let out = cvar(&["solve", "--model", &model, "--threshold", "0.25", "--output", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("threshold,var,cvar,cvar_value,engine,wall_time_ms"));
    assert!(lines.next().unwrap().starts_with("1/4,2,4,4,vi,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "choice.mdp", CHOICE);
    let out = cvar(&["solve", "--model", &model, "--method", "mc", "--threshold", "0.25"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model is not a Markov chain"));

    let out = cvar(&["solve", "--model", &model, "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold"));

    let out = cvar(&["solve", "--model", &model, "--threshold", "0.5", "--method", "magic"]);
    assert_eq!(out.status.code(), Some(1));

    let broken = write(dir.path(), "trap.mdp", "mdp\nstates 3\ninitial 0\ngoals 2\naction 0 a 1\n  1:1\naction 1 a 1\n  1:1\n");
    let out = cvar(&["solve", "--model", &broken, "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no proper policy"));

    assert_eq!(cvar(&["--help"]).status.code(), Some(0));
}

#[test]
fn non_uniform_chain_routes_through_value_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "c.mdp", "mdp\nstates 2\ninitial 0\ngoals 1\naction 0 a 2\n  0:1/2 1:1/2\n");
    let v = json(&cvar(&["solve", "--model", &model, "--method", "mc", "--threshold", "0.25"]));
    assert_eq!(v["results"][0]["engine"], "vi");
    assert_eq!(v["results"][0]["var"], 4);
    assert_eq!(v["results"][0]["cvar"], "8");
}

#[test]
fn generators_emit_valid_models() {
    let out = cvar(&["generate", "walk", "--n", "4"]);
    assert!(out.status.success());
    let m: Mdp<BigRational> = parse_model(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(validate_assumptions(&m).is_ok());

    let out = cvar(&["generate", "fig4", "--k", "3"]);
    let m: Mdp<BigRational> = parse_model(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(m.actions(m.initial()).len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.mdp");
    let out = cvar(&["generate", "grid", "--x", "4", "--check", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("all assumptions hold"));
    assert!(fs::read_to_string(&path).unwrap().starts_with("mdp"));

    let out = cvar(&["generate", "fig2", "--n", "3", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n/--k/--p"));
    let out = cvar(&["generate", "fig2", "--n", "6", "--k", "2", "--p", "1/3"]);
    assert!(out.status.success());
}

#[test]
fn policy_trace_and_lp_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "choice.mdp", CHOICE);
    let policy = dir.path().join("pi.txt");
    let trace = dir.path().join("trace.csv");
    let lps = dir.path().join("lps");
    let v = json(&cvar(&[
        "solve", "--model", &model, "--method", "vi", "--threshold", "0.1",
        "--policy-out", policy.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
    ]));
    assert_eq!(v["policy_files"][0], policy.to_str().unwrap());
    assert!(fs::read_to_string(&policy).unwrap().starts_with("policy\n"));
    assert!(fs::read_to_string(&trace).unwrap().starts_with("n,vertices_s0,vertices_s1,vertices_s2,cvar_t1/10\n"));

    let v = json(&cvar(&[
        "solve", "--model", &model, "--method", "lp", "--threshold", "0.1,0.5",
        "--policy-out", policy.to_str().unwrap(), "--export-lp", lps.to_str().unwrap(),
    ]));
    assert_eq!(v["policy_files"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("pi_t0.txt").exists());
    let exported: Vec<_> = fs::read_dir(&lps).unwrap().collect();
    assert!(!exported.is_empty());
}

#[test]
fn audit_checks_reported_values() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "geo.mdp", GEOMETRIC);
    let policy = dir.path().join("pi.txt");
    json(&cvar(&["solve", "--model", &model, "--method", "lp", "--threshold", "0.25", "--policy-out", policy.to_str().unwrap()]));
    let v = json(&cvar(&["audit", "--model", &model, "--policy", policy.to_str().unwrap(), "--samples", "200000", "--seed", "5"]));
    assert_eq!(v["reported"][0]["reported_cvar"], "4");
    assert_eq!(v["reported"][0]["inside_interval"], true);
    assert_eq!(v["report"]["samples"], 200000);

    let out = cvar(&["audit", "--model", &model, "--policy", policy.to_str().unwrap(), "--samples", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let other = write(dir.path(), "choice.mdp", CHOICE);
    let out = cvar(&["audit", "--model", &other, "--policy", policy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("policy does not match model"));
}

#[test]
fn lp_and_vi_agree_on_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = vec![GEOMETRIC.to_string(), CHOICE.to_string()];
    corpus.push(String::from_utf8(cvar(&["generate", "fig4", "--k", "3"]).stdout).unwrap());
    for seed in 0..4 {
        corpus.push(random_mdp(&RandomSpec::small(5), seed).unwrap().to_text());
    }
    for (i, text) in corpus.iter().enumerate() {
        let model = write(dir.path(), &format!("m{i}.mdp"), text);
        let lp = json(&cvar(&["solve", "--model", &model, "--method", "lp", "--threshold", "0.5,0.15"]));
        let vi = json(&cvar(&["solve", "--model", &model, "--method", "vi", "--threshold", "0.5,0.15"]));
        for k in 0..2 {
            assert_eq!(lp["results"][k]["cvar"], vi["results"][k]["cvar"], "model {i}");
            assert_eq!(lp["results"][k]["var"], vi["results"][k]["var"], "model {i}");
        }
    }
}
