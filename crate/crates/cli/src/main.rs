// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use remrec::catalog::{catalog, make_beverton_holt, BevertonHoltParams, ExampleKind};
use remrec::classify::{
    almost_period_scan, classify_trajectory, ClassificationReport, ClassifyConfig, ClassifyError,
    ScanMode, TauRange, WindowSchedule, DEFAULT_SEED,
};
use remrec::dynamics::{boundedness, DynamicsError, Trajectory};

mod config;
mod output;
mod system;
mod verify;

use output::{num, print_text, Format, Sink};

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {
        print_text(&format!($($t)*))
    };
}
use system::{parse_span, parse_u0, ModelArgs, System, SystemArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("integration aborted: {0}")]
    Abort(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        if e.is_integration_abort() {
            CliError::Abort(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Dynamics(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<remrec::catalog::CatalogError> for CliError {
    fn from(e: remrec::catalog::CatalogError) -> Self {
        match e {
            remrec::catalog::CatalogError::Dynamics(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Abort(_) => EXIT_ABORT,
            _ => EXIT_FAILURE,
        }
    }
}

/// Simulate scalar nonautonomous ODEs and difference equations and classify
/// the recurrence of their trajectories.
///
/// Exit codes: 0 success, 1 verify failure or i/o error, 2 configuration
/// error, 3 integration aborted, 4 every classification verdict inconclusive.
#[derive(Parser, Debug, Serialize)]
#[command(name = "remrec", version, args_override_self = true)]
struct Cli {
    /// key = value config file with [sections]; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Write data here instead of stdout (the summary then goes to stdout)
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Data format [default: csv; verify and examples print text]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for random shift probes and initial-value pairs
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for shift scans [default: all cores]
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Integrate or iterate a system and write the trajectories
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Classify one trajectory at a resolution eps
    #[command(args_override_self = true)]
    Classify(ClassifyArgs),
    /// Scan shifts tau for eps-almost periods
    #[command(args_override_self = true)]
    Scan(ScanArgs),
    /// Run a built-in check suite; exits 1 if any check fails
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// List the worked examples
    Examples,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Initial values, comma separated
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<String>,
    /// Time span START:END
    #[arg(long, allow_hyphen_values = true)]
    span: Option<String>,
    /// Number of iterations for maps (span 0:STEPS)
    #[arg(long)]
    steps: Option<u64>,
    /// Report whether sup |phi| stays within this bound
    #[arg(long)]
    bound: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct TrajectoryArgs {
    /// Initial value
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<f64>,
    /// Resolution eps [default: the example's]
    #[arg(long)]
    eps: Option<f64>,
    /// Sampled span is [0, HORIZON] [default: the example's, else 1e4]
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    traj: TrajectoryArgs,
    /// Largest shift of the almost-period scans
    #[arg(long, default_value_t = 20.0)]
    tau_max: f64,
    /// Shift spacing [default: the sampling step]
    #[arg(long)]
    tau_step: Option<f64>,
    /// Shift for the tau-periodic classes [default: declared period, else detected]
    #[arg(long)]
    period: Option<f64>,
    /// Shifts standing in for "every tau", comma separated [default: 1, sqrt 2, 5, 17.3, one seeded]
    #[arg(long)]
    probes: Option<String>,
    /// Interval length for relative density [default: tau-max / 2]
    #[arg(long)]
    density_l: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Global,
    Remote,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    traj: TrajectoryArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Global)]
    mode: ModeArg,
    /// Shift range LO:HI
    #[arg(long, default_value = "0:20")]
    tau_range: String,
    /// Shift spacing [default: the sampling step]
    #[arg(long)]
    tau_step: Option<f64>,
    /// Interval length for relative density [default: half the range]
    #[arg(long)]
    density_l: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: verify::Suite,
}

const SYSTEM_KEYS: [&str; 5] = ["ode", "map", "fn", "example", "bh"];

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) if output::is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(argv: Vec<String>) -> Result<u8, CliError> {
    let argv = match config::config_path(&argv) {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("--config {path}: {e}")))?;
            let entries = config::parse_config(&text)?;
            config::merge(&Cli::command(), &argv, &entries, &SYSTEM_KEYS)?
        }
        None => argv,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    let hash = remrec::hash_str(&serde_json::to_string(&cli)?);
    let sink = Sink {
        out: cli.out.clone(),
        format: cli.format.unwrap_or(Format::Csv),
        config_hash: hash,
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &sink),
        Command::Classify(a) => cmd_classify(a, cli.seed, &sink),
        Command::Scan(a) => cmd_scan(a, &sink),
        Command::Verify(a) => cmd_verify(a, cli.seed, cli.format, &sink),
        Command::Examples => cmd_examples(cli.format, &sink),
    }
}

#[derive(Serialize)]
struct Run {
    u0: f64,
    sup: f64,
    sup_at: f64,
    bounded: Option<remrec::PropertyReport>,
    trajectory: Trajectory,
}

#[derive(Serialize)]
struct SimulatePayload<'a> {
    system: &'a str,
    runs: Vec<Run>,
}

fn cmd_simulate(a: &SimulateArgs, sink: &Sink) -> Result<u8, CliError> {
    let system = System::from_args(&a.system, &a.model, 0.01)?;
    let u0s = match &a.u0 {
        Some(text) => parse_u0(text)?,
        None => vec![system.example.as_ref().map_or(0.0, |e| e.u0)],
    };
    let (t0, t1) = match (&a.span, a.steps) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give --span or --steps, not both".into()))
        }
        (Some(s), None) => parse_span("--span", s)?,
        (None, Some(0)) => return Err(CliError::Config("--steps must be at least 1".into())),
        (None, Some(n)) => (0.0, n as f64),
        (None, None) => (0.0, 100.0),
    };
    if a.steps.is_some() && !system.is_discrete() {
        return Err(CliError::Config(
            "--steps applies to maps; use --span for ODEs and functions".into(),
        ));
    }
    let bound = a.bound.or(system.bound);
    let mut runs = Vec::new();
    for &u0 in &u0s {
        let trajectory = system.trajectory(u0, t0, t1)?;
        let (sup, sup_at) = trajectory.sup_abs();
        runs.push(Run {
            u0,
            sup,
            sup_at,
            bounded: bound.map(|b| boundedness(&trajectory, b)),
            trajectory,
        });
    }
    let payload = SimulatePayload {
        system: &system.label,
        runs,
    };
    sink.emit(&payload, |w| {
        w.write_record(["u0", "t", "value"])?;
        for run in &payload.runs {
            for (k, v) in run.trajectory.values().iter().enumerate() {
                w.write_record([num(run.u0), num(run.trajectory.time(k)), num(*v)])?;
            }
        }
        Ok(())
    })?;
    let mut lines = vec![format!(
        "{} on [{t0}, {t1}], config {}",
        system.label, sink.config_hash
    )];
    for run in &payload.runs {
        let mut line = format!(
            "u0={}: {} samples, sup |phi| = {:.6} at t={}",
            run.u0,
            run.trajectory.len(),
            run.sup,
            run.sup_at
        );
        if let (Some(b), Some(r)) = (bound, &run.bounded) {
            line.push_str(&format!(", bounded by {b}: {}", r.verdict));
        }
        lines.push(line);
    }
    sink.summary(&lines.join("\n"));
    Ok(0)
}

struct Sampled {
    system: System,
    traj: Trajectory,
    eps: f64,
}

fn sample(system: &SystemArgs, model: &ModelArgs, t: &TrajectoryArgs) -> Result<Sampled, CliError> {
    let system = System::from_args(system, model, 0.01)?;
    let ex = system.example.as_ref();
    let eps = t
        .eps
        .or(ex.map(|e| e.resolution.eps))
        .ok_or_else(|| CliError::Config("--eps is required unless --example is given".into()))?;
    if !(eps > 0.0) {
        return Err(CliError::Config(format!(
            "--eps must be positive, got {eps}"
        )));
    }
    let horizon = t
        .horizon
        .or(ex.map(|e| e.resolution.horizon))
        .unwrap_or(1e4);
    let horizon = if system.is_discrete() {
        horizon.round()
    } else {
        horizon
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Config(format!(
            "--horizon must be positive, got {horizon}"
        )));
    }
    let u0 = t.u0.or(ex.map(|e| e.u0)).unwrap_or(0.0);
    let traj = system.trajectory(u0, 0.0, horizon)?;
    Ok(Sampled { system, traj, eps })
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x > 0.0)
                .ok_or_else(|| CliError::Config(format!("{flag}: `{v}` is not a positive number")))
        })
        .collect()
}

fn cmd_classify(a: &ClassifyArgs, seed: u64, sink: &Sink) -> Result<u8, CliError> {
    let s = sample(&a.system, &a.model, &a.traj)?;
    let config = ClassifyConfig {
        tau_max: a.tau_max,
        tau_step: a.tau_step,
        schedule: None,
        probes: a
            .probes
            .as_deref()
            .map(|p| parse_list("--probes", p))
            .transpose()?,
        seed,
        period: a
            .period
            .or(s.system.example.as_ref().and_then(|e| e.period)),
        density_l: a.density_l,
    };
    let report = classify_trajectory(&s.traj, s.eps, &config)?;
    sink.emit(&report, |w| {
        w.write_record(["class", "verdict", "basis"])?;
        for v in &report.verdicts {
            w.write_record([v.class.name(), &v.verdict.to_string(), &v.basis])?;
        }
        Ok(())
    })?;
    sink.summary(&format!(
        "{}, seed {seed}, config {}\n{report}",
        s.system.label, sink.config_hash
    ));
    Ok(classify_exit(&report))
}

fn classify_exit(report: &ClassificationReport) -> u8 {
    if report.all_inconclusive() {
        EXIT_INCONCLUSIVE
    } else {
        0
    }
}

fn cmd_scan(a: &ScanArgs, sink: &Sink) -> Result<u8, CliError> {
    let s = sample(&a.system, &a.model, &a.traj)?;
    let (lo, hi) = parse_span("--tau-range", &a.tau_range)?;
    let default_step = if s.traj.is_discrete() {
        1.0
    } else {
        s.traj.step()
    };
    let range = TauRange::new(lo, hi, a.tau_step.unwrap_or(default_step))?;
    let (mode, schedule) = match a.mode {
        ModeArg::Global => (ScanMode::Global, None),
        ModeArg::Remote => (
            ScanMode::Remote,
            Some(WindowSchedule::for_trajectory(&s.traj, hi)?),
        ),
    };
    let mut set = almost_period_scan(&s.traj, s.eps, mode, &range, schedule.as_ref())?;
    if let Some(l) = a.density_l {
        set = set.with_density_window(l);
    }
    sink.emit(&set, |w| {
        w.write_record(["tau", "admitted", "L", "sup"])?;
        for r in &set.records {
            w.write_record([
                num(r.tau),
                r.admitted.to_string(),
                r.l.map(num).unwrap_or_default(),
                num(r.sup),
            ])?;
        }
        Ok(())
    })?;
    let clusters: Vec<String> = set
        .clusters()
        .iter()
        .map(|c| format!("[{:.4}, {:.4}] best {:.4}", c.lo, c.hi, c.best))
        .collect();
    sink.summary(&format!(
        "{} {:?} scan at eps {}: {} of {} shifts admitted, config {}\nclusters: {}\nrelatively dense with l = {}: {} (smallest l {})",
        s.system.label,
        mode,
        s.eps,
        set.admitted().len(),
        set.records.len(),
        sink.config_hash,
        if clusters.is_empty() { "none".to_string() } else { clusters.join(", ") },
        set.density.l,
        set.density.verdict,
        set.density.l_min.map_or("n/a".to_string(), |l| format!("{l:.4}")),
    ));
    Ok(0)
}

fn cmd_verify(
    a: &VerifyArgs,
    seed: u64,
    format: Option<Format>,
    sink: &Sink,
) -> Result<u8, CliError> {
    let checks = verify::run(a.suite, seed)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let text = format!(
        "{}\n{} of {} checks pass (seed {seed})",
        checks
            .iter()
            .map(verify::Check::line)
            .collect::<Vec<_>>()
            .join("\n"),
        checks.len() - failed,
        checks.len()
    );
    if format.is_some() || sink.out.is_some() {
        sink.emit(&checks, |w| {
            w.write_record(["suite", "check", "pass", "detail"])?;
            for c in &checks {
                w.write_record([c.suite, &c.check, &c.pass.to_string(), &c.detail])?;
            }
            Ok(())
        })?;
        sink.summary(&text);
    } else {
        print_text(&text);
    }
    Ok(if failed == 0 { 0 } else { EXIT_FAILURE })
}

fn cmd_examples(format: Option<Format>, sink: &Sink) -> Result<u8, CliError> {
    let entries = catalog();
    if format.is_some() || sink.out.is_some() {
        return sink
            .emit(&entries, |w| {
                w.write_record([
                    "name",
                    "kind",
                    "definition",
                    "oracle",
                    "bound",
                    "expected",
                    "period",
                    "notes",
                ])?;
                for e in &entries {
                    w.write_record([
                        e.name,
                        &e.kind.to_string(),
                        e.definition,
                        e.oracle.unwrap_or(""),
                        e.bound.unwrap_or(""),
                        e.expected,
                        &e.period.map(num).unwrap_or_default(),
                        e.notes,
                    ])?;
                }
                Ok(())
            })
            .map(|()| 0);
    }
    for e in &entries {
        say!("{} ({})", e.name, e.kind);
        let label = match e.kind {
            ExampleKind::Function => "phi(t)",
            ExampleKind::Ode => "x' =",
            ExampleKind::Difference => "x(n+1) =",
        };
        say!("  {label:<10} {}", e.definition);
        if let Some(o) = e.oracle {
            say!("  {:<10} {o}", "solution");
        }
        if let Some(b) = e.bound {
            let what = if e.kind == ExampleKind::Difference {
                "limsup <="
            } else {
                "tail <="
            };
            say!("  {what:<10} {b}");
        }
        say!("  {:<10} {}", "expected", e.expected);
        say!(
            "  {:<10} eps {} horizon {} step {}",
            "checked at",
            e.resolution.eps,
            e.resolution.horizon,
            e.resolution.step
        );
        if e.kind == ExampleKind::Difference {
            let bh = make_beverton_holt(&BevertonHoltParams::default())?;
            say!(
                "  {:<10} mu beta^2/alpha^2 = {:.4} <= 1 (uniform Lipschitz-1 maps): {}; mu > 1: {}",
                "condition", bh.lipschitz_bound, bh.lipschitz_le_one, bh.mu_gt_one
            );
        }
        say!("  {:<10} {}", "notes", e.notes);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use remrec::Verdict;

    #[test]
    fn all_inconclusive_classification_exits_4() {
        let traj = Trajectory::sequence(0.0, vec![1.0; 400], "constant").unwrap();
        let config = ClassifyConfig {
            probes: Some(vec![1.0]),
            ..ClassifyConfig::default()
        };
        let mut report = classify_trajectory(&traj, 0.1, &config).unwrap();
        assert_eq!(classify_exit(&report), 0);
        for v in &mut report.verdicts {
            v.verdict = Verdict::Inconclusive;
        }
        assert_eq!(classify_exit(&report), EXIT_INCONCLUSIVE);
    }

    #[test]
    fn command_line_parses() {
        Cli::command().debug_assert();
    }
}
