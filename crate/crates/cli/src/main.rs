//! Verification driver: runs the library's suites end-to-end and emits
//! machine-readable report bundles (JSON, plus optional per-relation CSV
//! curves). Exit codes: 0 all checks passed, 1 a relation failed (named on
//! stderr), 2 invalid configuration.

mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ozcheck_core::blocks::z_witness;
use ozcheck_core::matfield::GridSpec;
use ozcheck_core::plfun::lambda_sequence;
use ozcheck_core::traces::{
    collapse_check, pullback_trace, simplicity_witness, w_boundedness_check, TraceMeasure,
};
use serde_json::json;
use suites::Suite;

#[derive(Parser)]
#[command(
    name = "ozcheck",
    version,
    about = "Verification suites for order-zero generator/relation witnesses",
    after_help = "OZCHECK_THREADS caps worker parallelism; the driver currently runs suite \
                  items sequentially, so any positive value is honored as-is."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and emit a JSON report bundle
    Verify(VerifyArgs),
    /// Trace pullback and collapse reports along the symbolic connector
    Traces {
        #[command(subcommand)]
        which: TracesCommand,
    },
    /// Covering-radius witness for the iterated ramp
    Simplicity(SimplicityArgs),
    /// Dump witness generator fields as JSON
    Export(ExportArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Which suite to run
    #[arg(long, value_enum)]
    suite: Suite,
    /// Matrix size of the witness domain (base level for tower suites)
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Grid samples on [0,1]
    #[arg(long, default_value_t = 65)]
    grid: usize,
    /// Residual tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for randomized property checks (fingerprint suite)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    emit: EmitArgs,
}

#[derive(Subcommand)]
enum TracesCommand {
    /// Dirac-pair trace variation against the geometric bound
    Collapse(CollapseArgs),
    /// Pullback of reference measures through one symbolic stage
    Pullback(PullbackArgs),
}

#[derive(Args)]
struct CollapseArgs {
    /// Base level of the tower
    #[arg(long, default_value_t = 2)]
    p: u64,
    /// Symbolic stages to compose
    #[arg(long, default_value_t = 1)]
    steps: u32,
    /// Grid samples on [0,1]
    #[arg(long, default_value_t = 65)]
    grid: usize,
    #[command(flatten)]
    emit: EmitArgs,
}

#[derive(Args)]
struct PullbackArgs {
    /// Base level of the tower
    #[arg(long, default_value_t = 2)]
    p: u64,
    /// Grid samples on [0,1]
    #[arg(long, default_value_t = 65)]
    grid: usize,
    #[command(flatten)]
    emit: EmitArgs,
}

#[derive(Args)]
struct SimplicityArgs {
    /// Base level of the tower
    #[arg(long, default_value_t = 2)]
    p: u64,
    /// Ramp iterations
    #[arg(long, default_value_t = 2)]
    steps: u32,
    /// Required support width
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    emit: EmitArgs,
}

#[derive(Args)]
struct ExportArgs {
    /// Witness family to dump: z, w or alt1
    #[arg(long, value_enum)]
    suite: Suite,
    /// Matrix size of the witness domain
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Grid samples on [0,1]
    #[arg(long, default_value_t = 65)]
    grid: usize,
    /// Output directory (required; one JSON file per generator)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmitArgs {
    /// Directory for the bundle (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bundle format; csv additionally writes per-relation residual curves
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    /// A relation exceeded its tolerance; exit 1 with the names.
    Relations(Vec<String>),
    /// Invalid configuration or I/O problem; exit 2 with the message.
    Config(String),
}

impl From<ozcheck_core::Error> for Failure {
    fn from(e: ozcheck_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = check_thread_cap() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Relations(names)) => {
            eprintln!("FAIL: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn check_thread_cap() -> Result<(), String> {
    match std::env::var("OZCHECK_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(format!(
                "OZCHECK_THREADS must be a positive integer, got {raw:?}"
            )),
        },
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Verify(args) => verify(args),
        Command::Traces {
            which: TracesCommand::Collapse(args),
        } => collapse(args),
        Command::Traces {
            which: TracesCommand::Pullback(args),
        } => pullback(args),
        Command::Simplicity(args) => simplicity(args),
        Command::Export(args) => export(args),
    }
}

fn emit_bundle(value: &serde_json::Value, emit: &EmitArgs) -> Result<(), Failure> {
    if let Some(path) = output::emit(value, emit.out.as_deref())? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let run = suites::run_verify(args.suite, args.n, args.grid, args.tol, args.seed)?;
    let pass = run.reports.values().all(|r| r.all_pass());
    let value = output::bundle(
        "verify",
        run.config,
        pass,
        vec![("reports", output::reports_value(&run.reports))],
    );
    emit_bundle(&value, &args.emit)?;
    if args.emit.format == Format::Csv {
        let dir = args
            .emit
            .out
            .clone()
            .ok_or_else(|| Failure::Config("--format csv needs --out".into()))?;
        let files = output::write_csv_curves(&run.reports, &dir)?;
        eprintln!("wrote {} residual curves", files.len());
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Relations(output::failing_names(&run.reports)))
    }
}

fn collapse(args: CollapseArgs) -> Result<(), Failure> {
    let g = GridSpec::new(args.grid)?;
    let wit = z_witness(args.p as usize, g)?;
    let report = collapse_check(args.p, args.steps, wit.phi.unit_image())?;
    let bounded = w_boundedness_check(args.p, args.steps)?;
    let pass = report.pass && bounded.pass;
    let value = output::bundle(
        "traces collapse",
        json!({ "p": args.p, "steps": args.steps, "grid": args.grid,
                "input": "witness unit image" }),
        pass,
        vec![
            ("collapse", serde_json::to_value(&report).expect("serialize")),
            ("boundedness", serde_json::to_value(&bounded).expect("serialize")),
        ],
    );
    emit_bundle(&value, &args.emit)?;
    if pass {
        Ok(())
    } else {
        let mut names = Vec::new();
        if !report.pass {
            names.push("collapse.bound".into());
        }
        if !bounded.pass {
            names.push("boundedness.strictly_decreasing".into());
        }
        Err(Failure::Relations(names))
    }
}

fn pullback(args: PullbackArgs) -> Result<(), Failure> {
    let g = GridSpec::new(args.grid)?;
    let lambda = lambda_sequence(args.p)?;
    let dirac = pullback_trace(&TraceMeasure::dirac(g, 0.0)?, &lambda)?;
    let uniform = pullback_trace(&TraceMeasure::uniform(g), &lambda)?;
    let value = output::bundle(
        "traces pullback",
        json!({ "p": args.p, "grid": args.grid }),
        true,
        vec![
            (
                "connector",
                json!({
                    "total_count": lambda.total_count().to_string(),
                    "non_constant_fraction": lambda.non_constant_fraction().to_string(),
                }),
            ),
            ("dirac_at_zero", serde_json::to_value(&dirac).expect("serialize")),
            ("uniform", serde_json::to_value(&uniform).expect("serialize")),
        ],
    );
    emit_bundle(&value, &args.emit)
}

fn simplicity(args: SimplicityArgs) -> Result<(), Failure> {
    let report = simplicity_witness(args.p, args.eps, args.steps)?;
    let pass = report.pass && report.criterion_met;
    let value = output::bundle(
        "simplicity",
        json!({ "p": args.p, "steps": args.steps, "eps": args.eps }),
        pass,
        vec![("report", serde_json::to_value(&report).expect("serialize"))],
    );
    emit_bundle(&value, &args.emit)?;
    if pass {
        Ok(())
    } else {
        let mut names = Vec::new();
        if !report.offset_recursion_verified {
            names.push("simplicity.offset_recursion".into());
        }
        if !report.radius_within_bound {
            names.push("simplicity.covering_radius".into());
        }
        if !report.criterion_met {
            names.push("simplicity.step_criterion".into());
        }
        Err(Failure::Relations(names))
    }
}

fn export(args: ExportArgs) -> Result<(), Failure> {
    let fields = suites::export_fields(args.suite, args.n, args.grid)?;
    std::fs::create_dir_all(&args.out)?;
    for (name, field) in &fields {
        let path = args.out.join(format!("{name}.json"));
        let text = format!(
            "{}\n",
            serde_json::to_string_pretty(field).map_err(std::io::Error::from)?
        );
        std::fs::write(&path, text)?;
        eprintln!("wrote {}", path.display());
    }
    eprintln!("{} generator fields exported", fields.len());
    Ok(())
}
