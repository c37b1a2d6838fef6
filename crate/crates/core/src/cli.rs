//! Command-line front end. Exit codes: 0 ok, 1 I/O, 2 compile diagnostics,
//! 3 verification or execution failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::coin::CoinError;
use crate::combinators::{plan_from_json, plan_hash, plan_to_json, Backend, PlanError};
use crate::envelope::{dump_csv, validate_schedule, EngineError, SimMode};
use crate::interval::Interval;
use crate::lang::{compile_text, CompileError};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::schedules::ScheduleError;
use crate::verify::{
    monte_carlo, oracle_enumerate, tail_profile, MonteCarloOptions, SimulationReport, Target, VerifyError,
};

#[derive(Debug, Parser)]
#[command(name = "bfactory", about = "Exact Bernoulli factories: compile, simulate, verify")]
pub struct Cli {
    /// Worker threads for Monte Carlo (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile an expression in p into a plan.
    Compile {
        expr: String,
        #[arg(long, default_value = "0:1")]
        domain: String,
        /// exact | approx:STEPS
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo runs of a plan or target.
    Simulate {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Censor runs longer than this many tosses.
        #[arg(long)]
        max_tosses: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run schedules on the exact path only.
        #[arg(long)]
        exact: bool,
    },
    /// Exhaustive-tape brackets at a fixed depth.
    Verify {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 12)]
        depth: u32,
        #[arg(long)]
        p: String,
        #[arg(long)]
        exact: bool,
    },
    /// Validate a schedule's envelopes and optionally dump them.
    Envelope {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 64)]
        max_n: u64,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Fit a geometric tail to a simulation report.
    Tails {
        #[arg(long)]
        report: PathBuf,
        /// Comma-separated n values to fit on.
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<u64>>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TargetArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// fair, walk:N, double:EPS, monomial:J, lipschitz|c2:EXPR:C:EPS, continuous:EXPR:EPS:I-J, csv:PATH
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Compile(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Compile(_) => 2,
            CliError::Failure(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Compile(m) | CliError::Failure(m) => m,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn is_io(e: &VerifyError) -> bool {
    matches!(
        e,
        VerifyError::Coin(CoinError::Io(_))
            | VerifyError::Engine(EngineError::Io(_) | EngineError::Csv(_))
            | VerifyError::Schedule(ScheduleError::Load(_))
    )
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        if is_io(&e) {
            CliError::Io(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

fn rational_arg(s: &str) -> Result<Rational, CliError> {
    parse_rational(s).map_err(|e| CliError::Failure(e.to_string()))
}

fn domain_arg(s: &str) -> Result<Interval, CliError> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| CliError::Failure(format!("domain {s:?} is not lo:hi")))?;
    let (lo, hi) = (rational_arg(lo)?, rational_arg(hi)?);
    if lo > hi {
        return Err(CliError::Failure(format!("empty domain {s}")));
    }
    Ok(Interval::new(lo, hi))
}

fn write_out(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string())),
    }
}

fn load_target(args: &TargetArgs, exact: bool) -> Result<Target, CliError> {
    let mode = if exact { SimMode::Exact } else { SimMode::Accelerated };
    if let Some(path) = &args.plan {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        let plan = plan_from_json(&v).map_err(|e| match e {
            PlanError::Json(m) => io_err(path, m),
            other => CliError::Failure(other.to_string()),
        })?;
        return Ok(Target::Plan(plan));
    }
    let s = args.target.as_deref().expect("clap enforces one selector");
    Ok(Target::parse(s, mode)?)
}

/// Runs one parsed command, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let emit = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()));
    match cli.command {
        Command::Compile { expr, domain, backend, out: path } => {
            let domain = domain_arg(&domain)?;
            let backend = match backend {
                Some(b) => Some(Backend::parse(&b).ok_or_else(|| CliError::Failure(format!("unknown backend {b:?}")))?),
                None => None,
            };
            let plan = compile_text(&expr, &domain, backend).map_err(|e| match e {
                CompileError::Syntax(s) => {
                    CliError::Compile(format!("error: {s}\n  {expr}\n  {}^", " ".repeat(s.offset)))
                }
                CompileError::Blocked(ds) => {
                    CliError::Compile(ds.iter().map(|d| d.render(&expr)).collect::<Vec<_>>().join("\n"))
                }
                CompileError::Plan(p) => CliError::Compile(format!("error: {p}")),
            })?;
            let json = serde_json::to_string_pretty(&plan_to_json(&plan)).expect("plan json");
            write_out(path.as_deref(), &json, out)?;
            if path.is_some() {
                emit(out, format!("plan {} hash {}", plan.describe(), plan_hash(&plan)))?;
            }
        }
        Command::Simulate { target, p, runs, seed, max_tosses, report, exact } => {
            let target = load_target(&target, exact)?;
            let p = rational_arg(&p)?;
            let opts = MonteCarloOptions { runs, seed, max_tosses, threads: cli.threads };
            let rep = monte_carlo(&target, &p, &opts)?;
            let json = serde_json::to_string_pretty(&rep).expect("report json");
            write_out(report.as_deref(), &json, out)?;
            if report.is_some() {
                emit(
                    out,
                    format!(
                        "{}: {}/{} ones, estimate {}, interval [{}, {}], censored {}",
                        rep.target,
                        rep.successes,
                        rep.runs - rep.censored,
                        rep.estimate,
                        rep.wilson[0],
                        rep.wilson[1],
                        rep.censored
                    ),
                )?;
            }
        }
        Command::Verify { target, depth, p, exact } => {
            let target = load_target(&target, exact)?;
            let p = rational_arg(&p)?;
            let r = oracle_enumerate(&target, depth, &p)?;
            let (g, h) = r.bracket();
            emit(out, format!("{} depth {} p {}", target.label(), depth, format_rational(&p)))?;
            emit(out, format!("accept {} undecided {}", format_rational(&r.accept), format_rational(&r.undecided)))?;
            emit(out, format!("bracket [{}, {}]", format_rational(&g), format_rational(&h)))?;
            if let Some(v) = target.output_probability(&p) {
                emit(out, format!("target {v}"))?;
                if v.hi < g || v.lo > h {
                    return Err(CliError::Failure(format!(
                        "target {v} outside bracket [{}, {}]",
                        format_rational(&g),
                        format_rational(&h)
                    )));
                }
            }
        }
        Command::Envelope { target, max_n, dump } => {
            let t = Target::parse(&target, SimMode::Exact)?;
            let Target::Schedule { ctx, .. } = &t else {
                return Err(CliError::Failure(format!("{target} is not a schedule")));
            };
            let schedule = ctx.schedule();
            if let Some(path) = &dump {
                let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
                dump_csv(schedule, max_n, &mut f).map_err(|e| io_err(path, e))?;
                f.flush().map_err(|e| io_err(path, e))?;
            }
            let rep = validate_schedule(schedule, max_n);
            emit(
                out,
                format!("{}: checkpoints {:?}, {} violation(s)", t.label(), rep.checkpoints, rep.violations.len()),
            )?;
            for v in rep.violations.iter().take(20) {
                emit(out, format!("  {:?} at n={} k={}: {}", v.kind, v.n, v.k, v.detail))?;
            }
            if !rep.is_valid() {
                let v = &rep.violations[0];
                return Err(CliError::Failure(format!("schedule invalid at n={} k={}", v.n, v.k)));
            }
        }
        Command::Tails { report, points } => {
            let text = std::fs::read_to_string(&report).map_err(|e| io_err(&report, e))?;
            let rep: SimulationReport = serde_json::from_str(&text).map_err(|e| io_err(&report, e))?;
            let fit = tail_profile(&rep, points.as_deref())?;
            emit(out, serde_json::to_string_pretty(&fit).expect("fit json"))?;
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.message());
            e.code()
        }
    }
}
