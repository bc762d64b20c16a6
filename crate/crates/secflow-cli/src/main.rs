use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use secflow::attack_graph::GraphFile;
use secflow::benchmark::{generate, GenSpec};
use secflow::instance::Instance;
use secflow::milp::{export_lp_with_names, export_mps_with_names, Limits, NameMap, Status};
use secflow::model::{build_for_instance, Configuration, ModelWeights};
use secflow::pipeline::{
    blocked_report, default_alphas, evaluate_configuration, evaluate_graph, report, solve_instance, sweep, PipelineError, ReportFormat,
    SweepOptions,
};

const EXIT_INVALID: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "secflow", version, about = "Route flows and place firewall rules against attack-graph risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded fat-tree instance.
    Generate {
        #[arg(long, default_value_t = 4)]
        pods: u32,
        #[arg(long, default_value_t = 1)]
        flows_per_host: u32,
        #[arg(long, default_value_t = 1)]
        types: u32,
        #[arg(long, default_value_t = 20)]
        vuln_pct: u32,
        #[arg(long, default_value_t = 2.0)]
        vulns_per_host: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance and print its configuration.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long, value_enum, default_value_t = Solver::Internal)]
        solver: Solver,
        /// With `--solver external`: where to write the model.
        #[arg(long)]
        mps_out: Option<PathBuf>,
        /// Risk report destination; defaults to stderr.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a grid of alpha and beta values.
    Sweep {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        betas: Vec<f64>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write 0 instead of wall-clock solve times.
        #[arg(long)]
        no_timing: bool,
        /// Blocked internal/external counts per row, as CSV.
        #[arg(long)]
        blocked_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact risk, reach, path and hybrid of a graph, or of an instance
    /// under a configuration.
    Evaluate {
        /// Attack graph JSON.
        #[arg(long, conflicts_with_all = ["instance", "config"], required_unless_present = "instance")]
        graph: Option<PathBuf>,
        #[arg(long, requires = "config")]
        instance: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the model of an instance as MPS or LP.
    Export {
        instance: PathBuf,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_enum, default_value_t = ModelFormat::Mps)]
        format: ModelFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Weights JSON; `--alpha` and `--beta` override its values.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    /// Seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    #[arg(long, default_value_t = 1_000_000)]
    node_cap: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Internal,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelFormat {
    Mps,
    Lp,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn invalid(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INVALID, err: err.into() }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::NoSolution(Status::TimeLimit | Status::GapLimit) => EXIT_LIMIT,
            PipelineError::Solve(_) => 1,
            _ => EXIT_INVALID,
        };
        Failure { code, err: e.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let inst = Instance::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display())).map_err(invalid)?;
    inst.validate().map_err(invalid)?;
    Ok(inst)
}

fn weights(args: &WeightArgs) -> Result<ModelWeights, Failure> {
    let mut w = match &args.weights {
        Some(p) => ModelWeights::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display())).map_err(invalid)?,
        None => ModelWeights::default(),
    };
    if let Some(a) = args.alpha {
        w.alpha = a;
    }
    if let Some(b) = args.beta {
        w.beta = b;
    }
    w.validate().map_err(invalid)?;
    Ok(w)
}

fn limits(args: &LimitArgs) -> Result<Limits, Failure> {
    if !(args.time_limit > 0.0) || !(args.gap >= 0.0) {
        return Err(invalid(anyhow!("time limit must be positive and gap non-negative")));
    }
    Ok(Limits { time_s: args.time_limit, gap: args.gap, node_cap: args.node_cap })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let res = match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    };
    res.map_err(|err| Failure { code: 1, err })
}

/// Model text, plus `<out>.names.json` when names had to be shortened.
fn write_model(out: Option<&Path>, text: &str, names: &NameMap) -> Result<(), Failure> {
    emit(out, text)?;
    if let Some(p) = out {
        if !names.columns.is_empty() || !names.rows.is_empty() {
            let mut side = p.as_os_str().to_owned();
            side.push(".names.json");
            emit(Some(Path::new(&side)), &with_newline(names.to_json()))?;
        }
    }
    Ok(())
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Generate { pods, flows_per_host, types, vuln_pct, vulns_per_host, seed, out } => {
            let spec = GenSpec { pods, flows_per_host, traffic_types: types, exploitable_host_pct: vuln_pct, vulns_per_host, seed };
            let inst = generate(&spec).map_err(invalid)?;
            emit(out.as_deref(), &with_newline(inst.to_json()))?;
            Ok(0)
        }
        Command::Solve { instance, weights: wa, limits: la, solver, mps_out, report: report_out, out } => {
            let inst = read_instance(&instance)?;
            let w = weights(&wa)?;
            if solver == Solver::External {
                let path = mps_out.ok_or_else(|| invalid(anyhow!("--solver external needs --mps-out")))?;
                let (_, model) = build_for_instance(&inst, &w).map_err(invalid)?;
                let (text, names) = export_mps_with_names(&model.problem);
                write_model(Some(&path), &text, &names)?;
                return Ok(0);
            }
            let s = solve_instance(&inst, &w, &limits(&la)?)?;
            emit(out.as_deref(), &with_newline(s.configuration.to_json()))?;
            let rep = with_newline(serde_json::to_string_pretty(&s.report).expect("reports serialize"));
            match report_out {
                Some(p) => emit(Some(&p), &rep)?,
                None => eprint!("{rep}"),
            }
            Ok(match s.report.status {
                Some(Status::TimeLimit | Status::GapLimit) => EXIT_LIMIT,
                _ => 0,
            })
        }
        Command::Sweep { instance, alphas, betas, weights: wpath, limits: la, format, no_timing, blocked_out, out } => {
            let inst = read_instance(&instance)?;
            let w = weights(&WeightArgs { alpha: None, beta: None, weights: wpath })?;
            let alphas = alphas.unwrap_or_else(default_alphas);
            let opts = SweepOptions { limits: limits(&la)?, timing: !no_timing };
            let res = sweep(&inst, &w, &alphas, &betas, &opts)?;
            let fmt = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            emit(out.as_deref(), &report(&res, fmt))?;
            if let Some(p) = blocked_out {
                emit(Some(&p), &blocked_report(&res))?;
            }
            let limited = res.rows.iter().any(|r| r.solve_status != Status::Optimal);
            Ok(if limited { EXIT_LIMIT } else { 0 })
        }
        Command::Evaluate { graph, instance, config, weights: wa, out } => {
            let w = weights(&wa)?;
            let rep = match (graph, instance, config) {
                (Some(gp), _, _) => {
                    let file = GraphFile::from_json(&read(&gp)?).with_context(|| format!("parsing {}", gp.display())).map_err(invalid)?;
                    let g = file.build().map_err(invalid)?;
                    let g = if g.is_augmented() { g } else { g.with_targets() };
                    evaluate_graph(&g, &Default::default(), w.beta, w.epsilon).map_err(invalid)?
                }
                (None, Some(ip), Some(cp)) => {
                    let inst = read_instance(&ip)?;
                    let cfg =
                        Configuration::from_json(&read(&cp)?).with_context(|| format!("parsing {}", cp.display())).map_err(invalid)?;
                    if let Some(&f) = cfg.delivered.iter().chain(&cfg.blocked).find(|&&f| f >= inst.network.flows.len()) {
                        return Err(invalid(anyhow!("configuration names flow {f}, instance has {}", inst.network.flows.len())));
                    }
                    let asm = inst.assemble().map_err(invalid)?;
                    evaluate_configuration(&inst, &asm, &cfg, &w).map_err(invalid)?
                }
                _ => return Err(invalid(anyhow!("give --graph, or --instance with --config"))),
            };
            emit(out.as_deref(), &with_newline(serde_json::to_string_pretty(&rep).expect("reports serialize")))?;
            Ok(0)
        }
        Command::Export { instance, weights: wa, format, out } => {
            let inst = read_instance(&instance)?;
            let (_, model) = build_for_instance(&inst, &weights(&wa)?).map_err(invalid)?;
            let (text, names) = match format {
                ModelFormat::Mps => export_mps_with_names(&model.problem),
                ModelFormat::Lp => export_lp_with_names(&model.problem),
            };
            write_model(out.as_deref(), &text, &names)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
