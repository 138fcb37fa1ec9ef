//! Command-line front end: build and verify Tsirelson polytope models, run
//! PEF certification sweeps, and dump reference scenarios.
//!
//! Exit codes are a stable contract for scripting: 0 on success (and on a
//! verify run where every check passes), 1 for validation problems (bad
//! flags, unreadable or failing models), 2 for numerical failures inside
//! the solvers.
//!
//! Relative output paths are placed under `$TSIRELSON_OUT_DIR` when that
//! variable is set. All files are written atomically and carry a generator
//! header (tool version plus the full command line) so every number in them
//! can be traced back to its invocation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tsirelson::bell::{chsh_functional, tilted_bound, tilted_functional};
use tsirelson::pef::{
    sweep_alpha, sweep_beta, CertificationConfig, CertificationReport, PefError, SolveStatus,
};
use tsirelson::polytope::{
    double_bound_extremes, eight_chsh_polytope, single_bound_extremes, verify_extremality,
    PolytopeModel, TsirelsonConstraint,
};
use tsirelson::scenarios::{self, TrialDistribution};
use tsirelson::solver::SolverError;

const OUT_DIR_ENV: &str = "TSIRELSON_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "tsirelson",
    version,
    about = "Tsirelson polytopes and PEF-based randomness certification",
    after_help = "Relative output paths go under $TSIRELSON_OUT_DIR when set."
)]
struct Cli {
    /// Worker threads for sweep grids (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or verify polytope model files
    #[command(subcommand)]
    Polytope(PolytopeCommand),
    /// Optimize PEFs over a beta grid and report certified bits
    Certify(CertifyArgs),
    /// Sweep the tilted weight alpha over double-bound polytopes
    SweepAlpha(SweepAlphaArgs),
    /// Reference scenario behaviors
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum PolytopeCommand {
    /// Construct a model and write it as JSON
    Build(BuildArgs),
    /// Audit a model file and verify extremality of every point
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    /// One Tsirelson bound (see --bell, --bound)
    Single,
    /// All eight CHSH versions at 2*sqrt(2)
    EightChsh,
    /// CHSH plus the tilted bound at --alpha
    Double,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BellKind {
    Chsh,
    Tilted,
}

#[derive(Args)]
struct ModelSpec {
    /// Polytope family to construct
    #[arg(long, value_enum)]
    variant: Option<Variant>,

    /// Bell functional for --variant single
    #[arg(long, value_enum, default_value_t = BellKind::Chsh)]
    bell: BellKind,

    /// Tilted weight (> 1); required by --variant double and --bell tilted
    #[arg(long)]
    alpha: Option<f64>,

    /// Bound TB* for --variant single (default: the quantum bound)
    #[arg(long)]
    bound: Option<f64>,
}

impl ModelSpec {
    fn build(&self) -> Result<PolytopeModel> {
        let variant = self
            .variant
            .ok_or_else(|| anyhow!("--variant is required (or pass --model FILE)"))?;
        let model = match variant {
            Variant::Single => {
                let functional = match self.bell {
                    BellKind::Chsh => chsh_functional(),
                    BellKind::Tilted => {
                        let alpha = self
                            .alpha
                            .ok_or_else(|| anyhow!("--bell tilted requires --alpha"))?;
                        tilted_functional(alpha)?
                    }
                };
                let default_bound = match self.bell {
                    BellKind::Chsh => tilted_bound(1.0),
                    BellKind::Tilted => tilted_bound(self.alpha.unwrap()),
                };
                let constraint =
                    TsirelsonConstraint::new(functional, self.bound.unwrap_or(default_bound))?;
                single_bound_extremes(&constraint)?
            }
            Variant::EightChsh => {
                if self.alpha.is_some() || self.bound.is_some() {
                    bail!("--variant eight-chsh takes no --alpha/--bound");
                }
                eight_chsh_polytope()
            }
            Variant::Double => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| anyhow!("--variant double requires --alpha"))?;
                if self.bound.is_some() {
                    bail!("--variant double fixes both bounds; --bound is not accepted");
                }
                double_bound_extremes(alpha)?
            }
        };
        Ok(model)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    spec: ModelSpec,

    /// Output model file (JSON)
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model file to verify
    #[arg(short, long)]
    input: PathBuf,

    /// Report file (JSON); stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Existing model file; alternative to --variant
    #[arg(long, conflicts_with_all = ["variant", "bell", "alpha", "bound"])]
    model: Option<PathBuf>,

    #[command(flatten)]
    spec: ModelSpec,

    /// Trial scenario: "tilted:alpha=A" or "chsh-max"
    #[arg(long)]
    scenario: String,

    /// Error bound epsilon in (0, 1]
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,

    /// Number of i.i.d. trials n
    #[arg(long, default_value_t = 10_000)]
    trials: u64,

    /// Power grid as START:END:COUNT (equally spaced, inclusive)
    #[arg(long, default_value = "0.001:0.1:100")]
    beta_grid: String,

    /// Per-beta trace (CSV)
    #[arg(long)]
    out_csv: Option<PathBuf>,

    /// Summary report (JSON)
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepAlphaArgs {
    /// Alpha grid as START:END:STEP (inclusive)
    #[arg(long, default_value = "1.90:2.10:0.01")]
    alpha_grid: String,

    /// Tilted weight of the fixed trial behavior
    #[arg(long, default_value_t = 2.0)]
    trial_alpha: f64,

    /// Error bound epsilon in (0, 1]
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,

    /// Number of i.i.d. trials n
    #[arg(long, default_value_t = 10_000)]
    trials: u64,

    /// Power grid as START:END:COUNT (equally spaced, inclusive)
    #[arg(long, default_value = "0.001:0.1:100")]
    beta_grid: String,

    /// Per-alpha results (CSV)
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write a named scenario behavior as JSON
    Dump(ScenarioDumpArgs),
}

#[derive(Args)]
struct ScenarioDumpArgs {
    /// Scenario name: "tilted:alpha=A" or "chsh-max"
    #[arg(long)]
    name: String,

    /// Output file; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: --jobs {jobs}: {err}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// 2 for numerical failures inside the solvers, 1 for everything else.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(solver) = cause.downcast_ref::<SolverError>() {
            return match solver {
                SolverError::MaxIterations { .. } | SolverError::NumericalBreakdown(_) => 2,
                _ => 1,
            };
        }
        if let Some(pef) = cause.downcast_ref::<PefError>() {
            return match pef {
                PefError::Solver(
                    SolverError::MaxIterations { .. } | SolverError::NumericalBreakdown(_),
                )
                | PefError::AllPointsFailed(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Polytope(PolytopeCommand::Build(args)) => build(args),
        Command::Polytope(PolytopeCommand::Verify(args)) => verify(args),
        Command::Certify(args) => certify(args),
        Command::SweepAlpha(args) => alpha_sweep(args),
        Command::Scenario(ScenarioCommand::Dump(args)) => scenario_dump(args),
    }
}

fn build(args: BuildArgs) -> Result<ExitCode> {
    let model = args.spec.build()?;
    let mut value = serde_json::to_value(&model)?;
    value["generator"] = generator_header();
    let path = write_atomic(&args.output, &serde_json::to_string_pretty(&value)?)?;
    let saturation: Vec<String> = model
        .saturation_counts()
        .iter()
        .enumerate()
        .map(|(i, n)| format!("constraint {i}: {n} saturating"))
        .collect();
    println!(
        "wrote {}: {} extreme points, {} constraints ({})",
        path.display(),
        model.len(),
        model.constraints().len(),
        saturation.join("; ")
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let model: PolytopeModel =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;

    let audit = model.audit();
    let audit_pass = audit.iter().all(|a| a.pass());
    let extremality = verify_extremality(&model)?;
    let extremality_pass = extremality.all_extreme();
    let pass = audit_pass && extremality_pass;

    let report = json!({
        "generator": generator_header(),
        "input": args.input.display().to_string(),
        "audit": { "pass": audit_pass, "points": audit },
        "extremality": { "pass": extremality_pass, "points": extremality.checks },
        "pass": pass,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &args.output {
        Some(path) => {
            let path = write_atomic(path, &text)?;
            println!(
                "verify {}: {} ({} points), report at {}",
                args.input.display(),
                if pass { "PASS" } else { "FAIL" },
                model.len(),
                path.display()
            );
        }
        None => println!("{text}"),
    }
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn load_or_build_model(model: &Option<PathBuf>, spec: &ModelSpec) -> Result<PolytopeModel> {
    match model {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let model: PolytopeModel = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            model
                .validate()
                .with_context(|| format!("model {} failed its audit", path.display()))?;
            Ok(model)
        }
        None => spec.build(),
    }
}

fn certify(args: CertifyArgs) -> Result<ExitCode> {
    let model = load_or_build_model(&args.model, &args.spec)?;
    let behavior = scenarios::by_name(&args.scenario)?;
    let trial = TrialDistribution::uniform(behavior);
    let cfg = CertificationConfig::new(args.epsilon, args.trials)?;
    let grid = parse_linspace(&args.beta_grid).context("--beta-grid")?;

    let report = sweep_beta(&model, &trial, &cfg, &grid)?;
    let failed = report.trace.iter().filter(|p| !p.status.is_ok()).count();

    if let Some(path) = &args.out_csv {
        let path = write_atomic(path, &trace_csv(&report))?;
        println!("trace written to {}", path.display());
    }
    if let Some(path) = &args.out_json {
        let summary = json!({
            "generator": generator_header(),
            "scenario": args.scenario,
            "epsilon": cfg.epsilon,
            "trials": cfg.n,
            "points": model.len(),
            "best": {
                "beta": report.beta,
                "expected_log": report.expected_log,
                "bits": report.bits,
            },
            "failed_grid_points": failed,
        });
        let path = write_atomic(path, &serde_json::to_string_pretty(&summary)?)?;
        println!("summary written to {}", path.display());
    }
    println!(
        "best: {} certified bits at beta = {} (E[ln F] = {}){}",
        sig12(report.bits),
        sig12(report.beta),
        sig12(report.expected_log),
        if failed > 0 {
            format!("; {failed} grid points failed")
        } else {
            String::new()
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn alpha_sweep(args: SweepAlphaArgs) -> Result<ExitCode> {
    let alpha_grid = parse_steps(&args.alpha_grid).context("--alpha-grid")?;
    let beta_grid = parse_linspace(&args.beta_grid).context("--beta-grid")?;
    let cfg = CertificationConfig::new(args.epsilon, args.trials)?;

    let rows = sweep_alpha(&alpha_grid, args.trial_alpha, &cfg, &beta_grid)?;
    let mut csv = csv_header("alpha,beta,expected_log,bits,solver_status");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            sig12(row.alpha),
            sig12(row.beta),
            sig12(row.expected_log),
            sig12(row.bits),
            row.status
        )?;
    }
    let path = write_atomic(&args.output, &csv)?;
    let best = rows
        .iter()
        .max_by(|a, b| a.bits.total_cmp(&b.bits))
        .expect("grid is nonempty");
    println!(
        "wrote {} ({} alphas); best: {} bits at alpha = {}",
        path.display(),
        rows.len(),
        sig12(best.bits),
        sig12(best.alpha)
    );
    Ok(ExitCode::SUCCESS)
}

fn scenario_dump(args: ScenarioDumpArgs) -> Result<ExitCode> {
    let behavior = scenarios::by_name(&args.name)?;
    let mut value = serde_json::to_value(&behavior)?;
    value["generator"] = generator_header();
    let text = serde_json::to_string_pretty(&value)?;
    match &args.output {
        Some(path) => {
            let path = write_atomic(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn generator_header() -> serde_json::Value {
    json!({
        "tool": "tsirelson",
        "version": env!("CARGO_PKG_VERSION"),
        "command": std::env::args().collect::<Vec<_>>().join(" "),
    })
}

fn csv_header(columns: &str) -> String {
    format!(
        "# tool: tsirelson {}\n# command: {}\n# expected_log is a natural logarithm; bits are base 2\n{columns}\n",
        env!("CARGO_PKG_VERSION"),
        std::env::args().collect::<Vec<_>>().join(" ")
    )
}

fn trace_csv(report: &CertificationReport) -> String {
    let mut csv = csv_header("beta,expected_log,bits,solver_status");
    for point in &report.trace {
        let ok = matches!(point.status, SolveStatus::Ok);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            sig12(point.beta),
            if ok {
                sig12(point.expected_log)
            } else {
                "nan".into()
            },
            if ok { sig12(point.bits) } else { "nan".into() },
            point.status
        );
    }
    csv
}

/// 12 significant digits, plain decimal where reasonable.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..12).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Trim trailing zeros but keep at least one decimal digit.
        let trimmed = s.trim_end_matches('0');
        let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
        trimmed.to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Equally spaced inclusive grid "START:END:COUNT".
fn parse_linspace(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, count] = parts.as_slice() else {
        bail!("expected START:END:COUNT, got {spec:?}");
    };
    let start: f64 = start.parse().context("START")?;
    let end: f64 = end.parse().context("END")?;
    let count: usize = count.parse().context("COUNT")?;
    if count == 0 {
        bail!("COUNT must be at least 1");
    }
    if count == 1 {
        if start != end {
            bail!("COUNT = 1 needs START = END");
        }
        return Ok(vec![start]);
    }
    if end <= start || end.is_nan() {
        bail!("END must exceed START");
    }
    let step = (end - start) / (count - 1) as f64;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Inclusive stepped grid "START:END:STEP".
fn parse_steps(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        bail!("expected START:END:STEP, got {spec:?}");
    };
    let start: f64 = start.parse().context("START")?;
    let end: f64 = end.parse().context("END")?;
    let step: f64 = step.parse().context("STEP")?;
    if step <= 0.0 || step.is_nan() {
        bail!("STEP must be positive");
    }
    if end < start {
        bail!("END must not be below START");
    }
    let mut grid = Vec::new();
    let mut k = 0u32;
    loop {
        let value = start + step * k as f64;
        if value > end + step * 1e-9 {
            break;
        }
        grid.push(value);
        k += 1;
    }
    Ok(grid)
}

/// Resolves against `$TSIRELSON_OUT_DIR`, writes to a temporary sibling, and
/// renames into place. Returns the final path.
fn write_atomic(path: &Path, contents: &str) -> Result<PathBuf> {
    let resolved = match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    };
    if let Some(parent) = resolved.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut tmp = resolved.clone().into_os_string();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &resolved).with_context(|| format!("renaming into {}", resolved.display()))?;
    Ok(resolved)
}
