//! `skl`: command-line front end for the singular kernel laboratory.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use config::RunConfig;
use error::{CliError, Outcome, EXIT_VALIDATION};

#[derive(Parser, Debug)]
#[command(
    name = "skl",
    version,
    about = "Singular kernel laboratory: kernels, weighted norms, integrability thresholds and the Teodorescu transform",
    after_help = "Reports are JSON: {command, config, seed, result, runtime_ms}. \
Exit status: 0 ok, 1 check failed, 2 validation error, 3 divergent where a finite value was requested, \
4 no convergence verdict. SKL_THREADS caps the worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Singularity class of a kernel under |x|^w dx.
    Classify,
    /// Critical exponent p*, conjugate range and viability verdict.
    Threshold,
    /// Principal value of int_{eps<|x|<radius} |k|^p d mu as eps -> 0.
    Cpv,
    /// Weighted L^p norm of a kernel (closed form or Monte Carlo) or a grid file.
    Norm,
    /// Hoelder inequality check for two grid files.
    Holder,
    /// Kernel-norm times density-norm table as q rises to q*.
    /// CSV columns (--format csv): q,p,kernel_norm,f_norm,product.
    Scan,
    /// Teodorescu transform of a grid file or a generated bump.
    Teodorescu,
    /// Threshold identities and numeric witnesses for every kernel family instance.
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Threshold => "threshold",
            Command::Cpv => "cpv",
            Command::Norm => "norm",
            Command::Holder => "holder",
            Command::Scan => "scan",
            Command::Teodorescu => "teodorescu",
            Command::VerifyAll => "verify-all",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Re-run the command and config recorded in a report.
    #[arg(long, global = true, value_name = "REPORT")]
    replay: Option<PathBuf>,
    /// output.path: write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// output.format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// kernel.family: power_model | cauchy | laplace_iterate | dirac_iterate
    #[arg(long, global = true)]
    family: Option<String>,
    /// kernel.n
    #[arg(long, global = true)]
    n: Option<usize>,
    /// kernel.l
    #[arg(long, global = true)]
    l: Option<usize>,
    /// kernel.alpha
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// kernel.theta
    #[arg(long, global = true)]
    theta: Option<f64>,

    /// measure.weight_exponent
    #[arg(long, global = true)]
    weight: Option<f64>,

    /// domain.kind: interval | annulus | punctured_ball | exterior
    #[arg(long, global = true)]
    domain_kind: Option<String>,
    /// domain.r_in
    #[arg(long, global = true)]
    r_in: Option<f64>,
    /// domain.r_out
    #[arg(long, global = true)]
    r_out: Option<f64>,
    /// domain.r_max (exterior truncation radius)
    #[arg(long, global = true)]
    r_max: Option<f64>,

    /// numeric.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// numeric.samples
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// numeric.delta (threshold witness offset)
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// numeric.refine (near-field subgrid factor)
    #[arg(long, global = true)]
    refine: Option<usize>,

    /// params.p
    #[arg(long, global = true)]
    p: Option<f64>,
    /// params.q
    #[arg(long, global = true)]
    q: Option<f64>,
    /// params.j (derivative order)
    #[arg(long, global = true)]
    j: Option<u32>,
    /// params.k (Sobolev order of a grid norm)
    #[arg(long, global = true)]
    k: Option<usize>,
    /// params.target_q, rational such as 3/2
    #[arg(long, global = true)]
    target_q: Option<String>,
    /// params.equal_order_case: the n = l = 3 iterated Dirac range (1, 3/2)
    #[arg(long, global = true)]
    equal_order_case: bool,
    /// params.q_star
    #[arg(long, global = true)]
    q_star: Option<f64>,
    /// params.steps
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// params.eps_first
    #[arg(long, global = true)]
    eps_first: Option<f64>,
    /// params.eps_ratio
    #[arg(long, global = true)]
    eps_ratio: Option<f64>,
    /// params.eps_count
    #[arg(long, global = true)]
    eps_count: Option<usize>,
    /// params.r_out: outer radius of the principal-value integral
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// params.grid: grid function file
    #[arg(long, global = true, value_name = "FILE")]
    grid: Option<PathBuf>,
    /// params.g: first Hoelder factor
    #[arg(long, global = true, value_name = "FILE")]
    g: Option<PathBuf>,
    /// params.f: second Hoelder factor
    #[arg(long, global = true, value_name = "FILE")]
    f: Option<PathBuf>,
    /// params.method: closed_form | monte_carlo
    #[arg(long, global = true)]
    method: Option<String>,
    /// params.proposal: matched | volume
    #[arg(long, global = true)]
    proposal: Option<String>,
    /// params.puncture: SUBGRID_REFINE | CELL_EXCLUDE
    #[arg(long, global = true)]
    puncture: Option<String>,
    /// params.nodes: nodes per axis of the generated bump
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// params.half_width: half side of the generated bump's box
    #[arg(long, global = true)]
    half_width: Option<f64>,
    /// params.grid_out: where to write the transformed grid
    #[arg(long, global = true, value_name = "FILE")]
    grid_out: Option<PathBuf>,
}

fn path_value(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Flags {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.set("kernel", "family", self.family.clone());
        cfg.set("kernel", "n", self.n);
        cfg.set("kernel", "l", self.l);
        cfg.set("kernel", "alpha", self.alpha);
        cfg.set("kernel", "theta", self.theta);
        cfg.set("measure", "weight_exponent", self.weight);
        cfg.set("domain", "kind", self.domain_kind.clone());
        cfg.set("domain", "r_in", self.r_in);
        cfg.set("domain", "r_out", self.r_out);
        cfg.set("domain", "r_max", self.r_max);
        cfg.set("numeric", "seed", self.seed);
        cfg.set("numeric", "samples", self.samples);
        cfg.set("numeric", "delta", self.delta);
        cfg.set("numeric", "refine", self.refine);
        cfg.set("output", "path", path_value(&self.output));
        cfg.set(
            "output",
            "format",
            self.format.map(|f| if f == Format::Csv { "csv" } else { "json" }),
        );
        cfg.set("params", "p", self.p);
        cfg.set("params", "q", self.q);
        cfg.set("params", "j", self.j);
        cfg.set("params", "k", self.k);
        cfg.set("params", "target_q", self.target_q.clone());
        cfg.set("params", "equal_order_case", self.equal_order_case.then_some(true));
        cfg.set("params", "q_star", self.q_star);
        cfg.set("params", "steps", self.steps);
        cfg.set("params", "eps_first", self.eps_first);
        cfg.set("params", "eps_ratio", self.eps_ratio);
        cfg.set("params", "eps_count", self.eps_count);
        cfg.set("params", "r_out", self.radius);
        cfg.set("params", "grid", path_value(&self.grid));
        cfg.set("params", "g", path_value(&self.g));
        cfg.set("params", "f", path_value(&self.f));
        cfg.set("params", "method", self.method.clone());
        cfg.set("params", "proposal", self.proposal.clone());
        cfg.set("params", "puncture", self.puncture.clone());
        cfg.set("params", "nodes", self.nodes);
        cfg.set("params", "half_width", self.half_width);
        cfg.set("params", "grid_out", path_value(&self.grid_out));
        // a domain given by kind alone takes its dimension from the kernel
        if cfg.has_section("domain") && cfg.get("domain", "n").is_none() {
            let n = cfg.get("kernel", "n").and_then(Value::as_u64).or_else(|| {
                (cfg.get("kernel", "family").and_then(Value::as_str) == Some("power_model")).then_some(1)
            });
            cfg.set("domain", "n", n);
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var("SKL_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::validation(format!("SKL_THREADS must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))
}

/// Resolves the command name and configuration from flags, config file or replay.
fn resolve(cli: &Cli) -> Result<(String, RunConfig), CliError> {
    let (mut cfg, recorded) = if let Some(path) = &cli.flags.replay {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let report: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{} is not a JSON report: {e}", path.display())))?;
        let command = report["command"].as_str().map(str::to_owned);
        let config = report
            .get("config")
            .cloned()
            .ok_or_else(|| CliError::validation("report has no `config`"))?;
        let mut cfg = RunConfig::from_value(config)?;
        // replays print to stdout unless a new destination is given
        cfg.remove_section("output");
        (cfg, command)
    } else if let Some(path) = &cli.flags.config {
        let cfg = RunConfig::load(path)?;
        let command = cfg.command().map(str::to_owned);
        (cfg, command)
    } else {
        (RunConfig::default(), None)
    };
    let command = match (cli.command, recorded) {
        (Some(c), _) => c.name().to_owned(),
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::validation("no command given (see --help)")),
    };
    if !commands::COMMANDS.contains(&command.as_str()) {
        return Err(CliError::validation(format!("unknown command `{command}`")));
    }
    cli.flags.apply(&mut cfg);
    cfg.set_command(&command);
    Ok((command, cfg))
}

fn emit(cfg: &RunConfig, report: &Value, outcome: &Outcome) -> Result<(), CliError> {
    let format: Option<String> = cfg.value("output", "format")?;
    let path: Option<PathBuf> = cfg.value("output", "path")?;
    let json = || serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    let body = match format.as_deref() {
        Some("csv") => Some(
            outcome
                .csv
                .clone()
                .ok_or_else(|| CliError::validation("this command has no CSV output"))?,
        ),
        Some("json") => Some(json()),
        Some(other) => return Err(CliError::validation(format!("unknown output format `{other}`"))),
        // commands that print verdict lines only add the report on request
        None => (outcome.lines.is_empty() || path.is_some()).then(json),
    };
    for line in &outcome.lines {
        println!("{line}");
    }
    if let Some(body) = body {
        match path {
            Some(path) => std::fs::write(&path, body)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{body}"),
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let (command, cfg) = resolve(cli)?;
    let seed = commands::seed(&cfg)?;
    let start = Instant::now();
    let outcome = commands::run(&command, &cfg)?;
    let report = json!({
        "command": command,
        "config": cfg.to_value(),
        "seed": seed,
        "result": outcome.result,
        "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    emit(&cfg, &report, &outcome)?;
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("skl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
