//! Command-line front end: argument definitions, command dispatch and the
//! mapping from library errors to exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::certify;
use crate::channels::{adjoint_apply, adjoint_norm_check, apply, contraction_check, random_channel, KrausChannel};
use crate::dual::{max_entropy, GibbsSolution};
use crate::error::Error;
use crate::harness::{equivalence_check, generate_sequence, run_convergence, SequenceKind, SequenceConfig};
use crate::io::{
    parse_channel, parse_problem, parse_state, ChannelCheckSection, ConvergenceSection, FeasibilitySection,
    Problem, ResultFile, SolutionSection,
};
use crate::linalg::{trace_norm_distance, trace_of_product};
use crate::moments::{check_feasibility, FeasibilityStatus};
use crate::random;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_SELF_CHECK: i32 = 5;

/// Slack allowed in the channel norm and transfer checks.
const CHANNEL_SLACK: f64 = 1e-9;
const DUALITY_TOL: f64 = 1e-10;
/// Observables sampled per state in the observable-transfer check.
const TRANSFER_SAMPLES: usize = 8;
const TRANSFER_LENGTH: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "maxent", version, about = "Maximum-entropy state inference from moment constraints")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Main tolerance of the command: the feasibility band for `feasibility`,
    /// the dual gradient tolerance otherwise.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Iteration limit: sphere iterations for `feasibility`, Newton steps otherwise.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Result file path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the summary line on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether the target moments are attainable.
    Feasibility { problem: PathBuf },
    /// Compute the maximum-entropy state.
    Solve { problem: PathBuf },
    /// Certify a state against the maximum-entropy solution.
    Certify { problem: PathBuf, state: PathBuf },
    /// Simulate a convergent sequence and record it as CSV.
    Converge {
        problem: PathBuf,
        #[arg(long, default_value = "mix")]
        kind: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// CSV path; standard output when absent (the result file is then
        /// written only with --out).
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Contraction and duality checks for a supplied or random channels.
    ChannelCheck {
        problem: PathBuf,
        /// Kraus file; random Stinespring channels when absent.
        #[arg(long)]
        channel: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Partial result still worth writing, e.g. an infeasibility verdict.
    pub result: Option<Box<ResultFile>>,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            result: None,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Indeterminate { .. }
        | Error::BoundarySuspected { .. }
        | Error::NonConvergence { .. }
        | Error::PathFailure { .. }
        | Error::EigenFailure => EXIT_NONCONVERGENCE,
        Error::ThresholdExceeded(_) => EXIT_SELF_CHECK,
        _ => EXIT_INVALID,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e.to_string())
    }
}

type CmdResult = Result<(ResultFile, Option<String>), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))
}

fn load_problem(path: &Path, global: &GlobalArgs, feasibility: bool) -> Result<Problem, Failure> {
    let mut problem = parse_problem(&read(path)?)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let opts = &mut problem.options;
    if feasibility {
        if let Some(t) = global.tol {
            opts.feasibility.feas_tol = t;
        }
        if let Some(n) = global.max_iter {
            opts.feasibility.max_iter = n;
        }
    } else {
        if let Some(t) = global.tol {
            opts.grad_tol = t;
        }
        if let Some(n) = global.max_iter {
            opts.max_newton_iters = n;
        }
    }
    opts.validate()?;
    Ok(problem)
}

fn infeasible_result(command: &str, witness: Vec<f64>, margin: f64) -> ResultFile {
    let mut rf = ResultFile::new(command);
    rf.feasibility = Some(FeasibilitySection {
        status: FeasibilityStatus::Infeasible.as_str().into(),
        margin,
        direction: witness.clone(),
        witness_direction: Some(witness),
        witness_state: None,
        linearly_dependent: false,
        iterations: 0,
    });
    rf
}

fn solve(problem: &Problem, command: &str) -> Result<GibbsSolution, Failure> {
    max_entropy(&problem.constraints, &problem.target, &problem.options).map_err(|e| match e {
        Error::Infeasible { witness, margin } => Failure {
            code: EXIT_INFEASIBLE,
            message: format!("moments are infeasible (margin {margin:e})"),
            result: Some(Box::new(infeasible_result(command, witness, margin))),
        },
        other => other.into(),
    })
}

fn cmd_feasibility(problem: &Path, global: &GlobalArgs) -> CmdResult {
    let p = load_problem(problem, global, true)?;
    let verdict = check_feasibility(&p.constraints, &p.target, &p.options)?;
    let mut rf = ResultFile::new("feasibility");
    rf.feasibility = Some(FeasibilitySection::from(&verdict));
    let summary = format!("status {} margin {:e}", verdict.status.as_str(), verdict.margin);
    if verdict.status == FeasibilityStatus::Infeasible {
        return Err(Failure {
            code: EXIT_INFEASIBLE,
            message: summary,
            result: Some(Box::new(rf)),
        });
    }
    Ok((rf, Some(summary)))
}

fn cmd_solve(problem: &Path, global: &GlobalArgs) -> CmdResult {
    let p = load_problem(problem, global, false)?;
    let sol = solve(&p, "solve")?;
    let mut rf = ResultFile::new("solve");
    rf.solution = Some(SolutionSection::from(&sol));
    let summary = format!(
        "{} entropy {} residual {:e}",
        sol.classification.as_str(),
        sol.entropy,
        sol.moment_residual
    );
    Ok((rf, Some(summary)))
}

fn cmd_certify(problem: &Path, state: &Path, global: &GlobalArgs) -> CmdResult {
    let p = load_problem(problem, global, false)?;
    let rho = parse_state(&read(state)?)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", state.display())))?;
    let sol = solve(&p, "certify")?;
    let report = certify(&p.constraints, &rho, &sol, &p.target)?;
    let mut rf = ResultFile::new("certify");
    rf.solution = Some(SolutionSection::from(&sol));
    rf.certificate = Some((&report).into());
    let violations = report.violations();
    if !violations.is_empty() {
        return Err(Failure {
            code: EXIT_SELF_CHECK,
            message: format!("certificate self-check failed: {}", violations.join("; ")),
            result: Some(Box::new(rf)),
        });
    }
    let summary = format!("trace distance {} relative entropy {}", report.trace_distance, report.relative_entropy);
    Ok((rf, Some(summary)))
}

fn cmd_converge(
    problem: &Path,
    kind: &str,
    n: usize,
    noise: f64,
    csv_out: Option<&Path>,
    global: &GlobalArgs,
) -> Result<(Option<ResultFile>, Option<String>), Failure> {
    let p = load_problem(problem, global, false)?;
    let kind: SequenceKind = kind.parse()?;
    let config = SequenceConfig::new(kind, n, noise, global.seed);
    config.validate()?;
    let sol = solve(&p, "converge")?;
    let record = run_convergence(&sol, &p.constraints, &p.target, &config, &p.options)?;
    let equivalence = equivalence_check(&sol, &p.constraints, &config, &p.options)?;
    let csv = record.to_csv();
    match csv_out {
        Some(path) => write_file(path, &csv)?,
        None => write_stdout(&csv)?,
    }
    let final_distance = record.final_row().map_or(f64::NAN, |r| r.trace_distance);
    let mut rf = ResultFile::new("converge");
    rf.solution = Some(SolutionSection::from(&sol));
    rf.convergence = Some(ConvergenceSection {
        kind: kind.as_str().into(),
        length: n,
        noise_scale: noise,
        seed: global.seed,
        threshold: record.threshold,
        final_trace_distance: final_distance,
        domination_violations: record.domination_violations(),
        equivalence_holds: equivalence.holds(),
    });
    if !equivalence.holds() {
        return Err(Failure {
            code: EXIT_SELF_CHECK,
            message: format!(
                "continuity inequalities fail at rows {:?} / {:?}",
                equivalence.moment_violations, equivalence.entropy_violations
            ),
            result: Some(Box::new(rf)),
        });
    }
    let summary = format!("{} rows, final trace distance {final_distance}", record.rows.len());
    // Without --csv-out the CSV owns standard output.
    let rf = (csv_out.is_some() || global.out.is_some()).then_some(rf);
    Ok((rf, Some(summary)))
}

#[derive(Default)]
struct ChannelTally {
    contraction: usize,
    adjoint: usize,
    duality: usize,
    worst_slack: f64,
    max_duality_error: f64,
}

impl ChannelTally {
    fn new() -> Self {
        Self {
            worst_slack: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    fn trial(&mut self, ch: &KrausChannel, rng: &mut ChaCha8Rng) -> crate::Result<()> {
        let rho = random::state(ch.dim_in(), rng);
        let sigma = random::state(ch.dim_in(), rng);
        let c = contraction_check(ch, &rho, &sigma)?;
        self.worst_slack = self.worst_slack.max(c.lhs - c.rhs);
        if !c.holds(CHANNEL_SLACK) {
            self.contraction += 1;
        }
        let b = random::hermitian(ch.dim_out(), rng);
        let a = adjoint_norm_check(ch, &b)?;
        self.worst_slack = self.worst_slack.max(a.lhs - a.rhs);
        if !a.holds(CHANNEL_SLACK) {
            self.adjoint += 1;
        }
        let left = trace_of_product(apply(ch, &rho)?.matrix(), b.matrix()).re;
        let right = trace_of_product(rho.matrix(), adjoint_apply(ch, &b)?.operator.matrix()).re;
        let err = (left - right).abs();
        self.max_duality_error = self.max_duality_error.max(err);
        if !(err <= DUALITY_TOL) {
            self.duality += 1;
        }
        Ok(())
    }
}

/// Transfer of trace-norm convergence through `ch` along a mix-to-sigma
/// sequence, in both the state and the observable picture.
fn transfer_violations(
    ch: &KrausChannel,
    p: &Problem,
    sol: &GibbsSolution,
    rng: &mut ChaCha8Rng,
) -> crate::Result<usize> {
    let config = SequenceConfig::new(SequenceKind::MixToSigma, TRANSFER_LENGTH, 1.0, rng.random());
    let states = generate_sequence(sol, &p.constraints, &config, &p.options)?;
    let image_sigma = apply(ch, &sol.sigma)?;
    let mut bad = 0;
    for rho in &states {
        let dist = trace_norm_distance(rho, &sol.sigma)?;
        if !(trace_norm_distance(&apply(ch, rho)?, &image_sigma)? <= dist + CHANNEL_SLACK) {
            bad += 1;
        }
        let diff = rho.matrix() - sol.sigma.matrix();
        for _ in 0..TRANSFER_SAMPLES {
            let b = random::contraction(ch.dim_out(), 1.0, rng);
            let pulled = adjoint_apply(ch, &b)?.operator;
            if !(trace_of_product(&diff, pulled.matrix()).re.abs() <= dist + CHANNEL_SLACK) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

fn cmd_channel_check(problem: &Path, channel: Option<&Path>, trials: usize, global: &GlobalArgs) -> CmdResult {
    let p = load_problem(problem, global, false)?;
    let d = p.constraints.dim();
    let fixed = match channel {
        Some(path) => {
            let ch = parse_channel(&read(path)?)
                .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
            if ch.dim_in() != d {
                return Err(Failure::new(
                    EXIT_INVALID,
                    format!("channel input dimension {} does not match problem dimension {d}", ch.dim_in()),
                ));
            }
            Some(ch)
        }
        None => None,
    };
    let sol = solve(&p, "channel-check")?;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);
    let mut tally = ChannelTally::new();
    let mut sequence_violations = 0;
    for t in 0..trials {
        let ch = match &fixed {
            Some(ch) => ch.clone(),
            None => {
                let r = rng.random_range(1..=d + 1);
                let e = d.div_ceil(r) + rng.random_range(0..=1);
                random_channel(d, r, e, rng.random())?
            }
        };
        tally.trial(&ch, &mut rng)?;
        // one sequence per distinct channel is enough
        if fixed.is_none() || t == 0 {
            sequence_violations += transfer_violations(&ch, &p, &sol, &mut rng)?;
        }
    }
    let mut rf = ResultFile::new("channel-check");
    rf.channel_check = Some(ChannelCheckSection {
        source: if fixed.is_some() { "file" } else { "random" }.into(),
        trials,
        seed: global.seed,
        contraction_violations: tally.contraction,
        adjoint_violations: tally.adjoint,
        duality_violations: tally.duality,
        worst_slack: if trials == 0 { 0.0 } else { tally.worst_slack },
        max_duality_error: tally.max_duality_error,
        sequence_violations,
    });
    let total = tally.contraction + tally.adjoint + tally.duality + sequence_violations;
    if total > 0 {
        return Err(Failure {
            code: EXIT_SELF_CHECK,
            message: format!("{total} channel check violations"),
            result: Some(Box::new(rf)),
        });
    }
    Ok((rf, Some(format!("{trials} trials, no violations"))))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_INVALID, format!("cannot write {}: {e}", path.display())))
}

fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot write to standard output: {e}")))
}

fn emit(rf: &ResultFile, out: Option<&Path>) -> Result<(), Failure> {
    let text = rf.to_json()?;
    match out {
        Some(path) => write_file(path, &text),
        None => write_stdout(&text),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Feasibility { problem } => cmd_feasibility(problem, g).map(|(r, s)| (Some(r), s)),
        Command::Solve { problem } => cmd_solve(problem, g).map(|(r, s)| (Some(r), s)),
        Command::Certify { problem, state } => cmd_certify(problem, state, g).map(|(r, s)| (Some(r), s)),
        Command::Converge {
            problem,
            kind,
            n,
            noise,
            csv_out,
        } => cmd_converge(problem, kind, *n, *noise, csv_out.as_deref(), g),
        Command::ChannelCheck {
            problem,
            channel,
            trials,
        } => cmd_channel_check(problem, channel.as_deref(), *trials, g).map(|(r, s)| (Some(r), s)),
    };
    match outcome {
        Ok((result, summary)) => {
            if let Some(rf) = result {
                if let Err(f) = emit(&rf, g.out.as_deref()) {
                    eprintln!("error: {}", f.message);
                    return f.code;
                }
            }
            if let (false, Some(s)) = (g.quiet, summary) {
                eprintln!("{s}");
            }
            EXIT_OK
        }
        Err(f) => {
            if let Some(rf) = &f.result {
                if let Err(e) = emit(rf, g.out.as_deref()) {
                    eprintln!("error: {}", e.message);
                }
            }
            if f.code == EXIT_INFEASIBLE {
                eprintln!("{}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            f.code
        }
    }
}
