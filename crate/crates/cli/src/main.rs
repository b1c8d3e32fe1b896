use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cvar_core::lp::{LpCvarResult, LpEngine};
use cvar_core::mc::ChainAnalysis;
use cvar_core::models::{restart_model, two_path_model, grid, walk, GridSpec, WalkSpec};
use cvar_core::pareto::{ViEngine, ViOptions};
use cvar_core::policy::parse_policy;
use cvar_core::scalar::{format_scalar, parse_rational};
use cvar_core::simulate::{default_horizon, simulate_policy, SimReport};
use cvar_core::{
    parse_model, validate_assumptions, BigRational, Error, Indexing, Mdp, NumericMode, Policy, Scalar,
    ThresholdQuery,
};

#[derive(Parser)]
#[command(name = "cvar", version, about = "Optimal CVaR of stochastic shortest path costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute optimal VaR and CVaR for one or more thresholds
    Solve(SolveArgs),
    /// Write a benchmark model
    Generate {
        #[command(subcommand)]
        family: Family,
        /// Output file (default: standard output)
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        /// Also check the solver assumptions
        #[arg(long, global = true)]
        check: bool,
    },
    /// Simulate a policy and compare with its reported CVaR
    Audit(AuditArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mc,
    Lp,
    Vi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "vi")]
    method: Method,
    /// Comma-separated thresholds in (0, 1), decimal or a/b
    #[arg(long)]
    threshold: String,
    /// Default: exact up to 10^4 state-action pairs, float above
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Write the witness policy (one file per threshold when several)
    #[arg(long)]
    policy_out: Option<PathBuf>,
    /// Per-iteration CSV trace of the value iteration
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write every LP solved to this directory
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Recorded in the output; the engines are deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    output: Output,
    /// Float value iteration only: drop polygon vertices within this distance
    #[arg(long)]
    merge_tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Family {
    /// Robot and janitor grid world of the given width
    Grid {
        #[arg(long, default_value_t = 4)]
        x: usize,
    },
    /// Doubling walk of the given length
    Walk {
        #[arg(long)]
        n: usize,
    },
    /// Restart cycle with a safe/risky choice that needs exponential memory
    #[command(name = "fig2")]
    Restart {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "1/2")]
        p: String,
    },
    /// Safe line against a cheap lottery with a long tail
    #[command(name = "fig4")]
    TwoPath {
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Default: the thresholds recorded in the policy file
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Default: ten times the largest reported CVaR
    #[arg(long)]
    horizon: Option<u64>,
}

/// One line of solver output.
#[derive(Debug, Serialize)]
struct Record {
    threshold: String,
    var: u64,
    /// Exact fraction in exact mode, decimal otherwise.
    cvar: String,
    cvar_value: f64,
    engine: &'static str,
    wall_time_ms: f64,
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    model: String,
    mode: &'static str,
    seed: u64,
    expected: String,
    results: Vec<Record>,
    policy_files: Vec<String>,
    trace: Option<String>,
}

#[derive(Debug, Serialize)]
struct AuditOutput {
    reported: Vec<AuditLine>,
    report: SimReport,
}

#[derive(Debug, Serialize)]
struct AuditLine {
    threshold: String,
    reported_cvar: Option<String>,
    inside_interval: Option<bool>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Generate { family, out, check } => generate(&family, out.as_deref(), check),
        Command::Audit(args) => audit(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for violated solver assumptions, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Assumption(_)
            | Error::NotAChain { .. }
            | Error::NonUniformCost
            | Error::ImproperPolicy { .. }
            | Error::CapExceeded { .. }
            | Error::Censored { .. },
        ) => 2,
        _ => 1,
    }
}

fn load_model(path: &Path) -> anyhow::Result<Mdp<BigRational>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_model(&text)?)
}

fn solve(args: &SolveArgs) -> anyhow::Result<()> {
    let query = ThresholdQuery::parse(&args.threshold)?;
    let exact = load_model(&args.model)?;
    if args.merge_tolerance.is_some_and(|t| !(t >= 0.0)) {
        bail!(Error::Argument("--merge-tolerance must be nonnegative".into()));
    }
    let float = match args.mode {
        Some(Mode::Float) => true,
        Some(Mode::Exact) => false,
        None => NumericMode::default_for(&exact) != NumericMode::ExactRational,
    };
    if float {
        solve_in(&exact.to_float(), &query, args, "float")
    } else {
        solve_in(&exact, &query, args, "exact")
    }
}

struct Solved<T> {
    t: T,
    var: u64,
    cvar: T,
    engine: &'static str,
    millis: f64,
    policy: Option<Policy<T>>,
}

fn solve_in<T: Scalar>(m: &Mdp<T>, query: &ThresholdQuery, args: &SolveArgs, mode: &'static str) -> anyhow::Result<()> {
    let report = validate_assumptions(m);
    if !report.is_ok() {
        return Err(Error::Assumption(report).into());
    }
    let thresholds: Vec<T> = query.as_scalars();
    let want_policy = args.policy_out.is_some();
    let mut trace_csv = None;
    if args.method == Method::Mc {
        m.check_chain()?;
    }
    let method = match args.method {
        // Unit-step analysis needs uniform costs; chains with other costs
        // go through the value iteration, which handles them.
        Method::Mc if !m.is_uniform_cost() => Method::Vi,
        other => other,
    };
    let solved: Vec<Solved<T>> = match method {
        Method::Mc => {
            let chain = ChainAnalysis::new(m)?;
            thresholds
                .iter()
                .map(|t| {
                    let start = Instant::now();
                    let r = chain.cvar(t)?;
                    Ok(Solved {
                        t: t.clone(),
                        var: r.var,
                        cvar: r.cvar,
                        engine: "mc",
                        millis: elapsed_ms(start),
                        policy: want_policy.then(|| Policy::stationary(Indexing::Step, vec![0; m.num_states()])),
                    })
                })
                .collect::<anyhow::Result<_>>()?
        }
        Method::Lp => {
            let engine = LpEngine::new(m)?;
            if let Some(dir) = &args.export_lp {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut out = Vec::new();
            for (ti, t) in thresholds.iter().enumerate() {
                let start = Instant::now();
                let mut written: anyhow::Result<()> = Ok(());
                let result: LpCvarResult<T> = engine.solve_observed(t, |lp, _| {
                    if let (Some(dir), Ok(())) = (&args.export_lp, &written) {
                        let path = dir.join(format!("cvar_t{ti}_n{}.lp", lp.n));
                        written = fs::write(&path, lp.model.to_lp_format())
                            .with_context(|| format!("writing {}", path.display()));
                    }
                })?;
                written?;
                out.push(Solved {
                    t: t.clone(),
                    var: result.result.var,
                    cvar: result.result.cvar,
                    engine: "lp",
                    millis: elapsed_ms(start),
                    policy: want_policy.then_some(result.policy),
                });
            }
            out
        }
        Method::Vi => {
            let start = Instant::now();
            let engine = ViEngine::new(m)?.with_options(ViOptions {
                merge_tolerance: args.merge_tolerance,
                witness: want_policy,
                trace: args.trace.is_some(),
            });
            let outcome = engine.solve(&thresholds)?;
            let millis = elapsed_ms(start);
            if args.trace.is_some() {
                trace_csv = Some(outcome.trace_csv());
            }
            outcome
                .thresholds
                .into_iter()
                .map(|th| Solved {
                    t: th.threshold,
                    var: th.result.var,
                    cvar: th.result.cvar,
                    engine: "vi",
                    millis,
                    policy: th.policy,
                })
                .collect()
        }
    };

    let mut policy_files = Vec::new();
    if let Some(path) = &args.policy_out {
        for (i, s) in solved.iter().enumerate() {
            let target = if solved.len() == 1 { path.clone() } else { numbered(path, i) };
            let policy = s.policy.as_ref().expect("policy requested");
            let text = policy.to_text(m, &[(s.t.clone(), s.cvar.clone())]);
            fs::write(&target, text).with_context(|| format!("writing {}", target.display()))?;
            policy_files.push(target.display().to_string());
        }
    }
    if let (Some(path), Some(csv)) = (&args.trace, &trace_csv) {
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let expected = cvar_core::solve_ssp(m)?.values[m.initial()].clone();
    let output = SolveOutput {
        model: args.model.display().to_string(),
        mode,
        seed: args.seed,
        expected: format_scalar(&expected),
        results: solved
            .iter()
            .map(|s| Record {
                threshold: format_scalar(&s.t),
                var: s.var,
                cvar: format_scalar(&s.cvar),
                cvar_value: s.cvar.to_f64(),
                engine: s.engine,
                wall_time_ms: s.millis,
            })
            .collect(),
        policy_files,
        trace: trace_csv.and(args.trace.as_ref().map(|p| p.display().to_string())),
    };
    match args.output {
        Output::Json => println!("{}", serde_json::to_string_pretty(&output)?),
        Output::Csv => {
            println!("threshold,var,cvar,cvar_value,engine,wall_time_ms");
            for r in &output.results {
                println!("{},{},{},{},{},{:.3}", r.threshold, r.var, r.cvar, r.cvar_value, r.engine, r.wall_time_ms);
            }
        }
    }
    Ok(())
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// `dir/name.ext` to `dir/name_t{i}.ext`.
fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_t{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}_t{i}"),
    };
    path.with_file_name(name)
}

fn generate(family: &Family, out: Option<&Path>, check: bool) -> anyhow::Result<()> {
    let m = match family {
        Family::Grid { x } => grid(&GridSpec::new(*x)).context("--x")?,
        Family::Walk { n } => walk(&WalkSpec::new(*n)).context("--n")?,
        Family::Restart { n, k, p } => {
            let p = parse_rational(p).ok_or_else(|| Error::Argument(format!("--p: invalid probability '{p}'")))?;
            restart_model(*n, *k, &p).context("--n/--k/--p")?
        }
        Family::TwoPath { k } => two_path_model(*k).context("--k")?,
    };
    let text = m.to_text();
    match out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if check {
        let report = validate_assumptions(&m);
        eprintln!("{} states, {} state-action pairs: {report}", m.num_states(), m.num_state_action_pairs());
        if !report.is_ok() {
            return Err(Error::Assumption(report).into());
        }
    }
    Ok(())
}

fn audit(args: &AuditArgs) -> anyhow::Result<()> {
    let m = load_model(&args.model)?;
    let text = fs::read_to_string(&args.policy).with_context(|| format!("reading {}", args.policy.display()))?;
    let file = parse_policy(&text, &m)?;
    let thresholds: Vec<BigRational> = match &args.threshold {
        Some(spec) => ThresholdQuery::parse(spec)?.thresholds().to_vec(),
        None if !file.reported.is_empty() => file.reported.iter().map(|(t, _)| t.clone()).collect(),
        None => bail!(Error::Argument("--threshold is required when the policy records none".into())),
    };
    let reported_for = |t: &BigRational| file.reported.iter().find(|(r, _)| r == t).map(|(_, c)| c.clone());
    let horizon = match args.horizon {
        Some(h) => h,
        None => {
            let mut worst = 0.0f64;
            for t in &thresholds {
                let c = match reported_for(t) {
                    Some(c) => c,
                    None => file.policy.evaluate(&m, t)?.cvar,
                };
                worst = worst.max(c.to_f64());
            }
            default_horizon(worst)
        }
    };
    let report = simulate_policy(&m, &file.policy, &thresholds, args.samples, args.seed, horizon)?;
    let reported = thresholds
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let c = reported_for(t);
            AuditLine {
                threshold: format_scalar(t),
                inside_interval: c.as_ref().map(|c| report.contains(i, c.to_f64())),
                reported_cvar: c.as_ref().map(format_scalar),
            }
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&AuditOutput { reported, report })?);
    Ok(())
}
