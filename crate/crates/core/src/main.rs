//! `hdanova` command line.
//!
//! Exit codes: 0 success (for `test`: H0 not rejected), 3 H0 rejected,
//! 2 any error.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tracing::Level;

use hdanova::bandwidth::{select_bands, select_h, BandGrid};
use hdanova::bootstrap::{run_test, TestConfig, TestReport, REPORT_SCHEMA_VERSION};
use hdanova::dgp::{DgpKind, Shift, DEFAULT_BURN_IN};
use hdanova::error::{AnovaError, Result};
use hdanova::harness::{
    emit_report, load_sweep, run_real, run_size_power, write_report, ExperimentBlock, ReportFormat,
};
use hdanova::kernel::KernelSpec;
use hdanova::panel::{demean, load_panel};
use hdanova::statistic::BandConfig;
use hdanova::variance::{diagnose_variance, second_order_residuals, GroupHac};

const EXIT_ERROR: u8 = 2;
const EXIT_REJECT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "hdanova", version, about = "Banded ANOVA test for dependent high-dimensional time series")]
struct Cli {
    /// Root seed (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "HDANOVA_THREADS")]
    threads: Option<usize>,

    /// Output format.
    #[arg(long, global = true, default_value = "json")]
    format: ReportFormat,

    /// CI profile for `simulate`: R=50, 60 bootstrap draws, d=60, T=80.
    #[arg(long, global = true)]
    fast: bool,

    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test equality of group means of a panel.
    Test(TestArgs),
    /// Run size/power Monte Carlo experiments.
    Simulate(SimulateArgs),
    /// Select (B, B1) and H from the data.
    Bandwidth(InputArgs),
    /// Per-group HAC variance of the banded within-group sum.
    DiagnoseVariance(VarianceArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Panel CSV with header `group,time,x1,...,xd`.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct BandArgs {
    #[arg(long = "B", default_value_t = 10)]
    b: usize,
    #[arg(long = "B1", default_value_t = 15)]
    b1: usize,
    #[arg(long = "H", default_value_t = 50.0)]
    h: f64,
    #[arg(long, default_value = "gaussian")]
    kernel: KernelSpec,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Treat the input as one series and split it into this many periods.
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap draws.
    #[arg(long, default_value_t = 100)]
    boot: usize,
    #[command(flatten)]
    band: BandArgs,
    /// Select (B, B1) and H from the data.
    #[arg(long, conflicts_with_all = ["b", "b1", "h"])]
    auto_bandwidth: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Sweep file with `[experiment.N]` blocks; other experiment flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "spatial-independent")]
    kind: DgpKind,
    /// `none` or `uniform:A`.
    #[arg(long, default_value = "none")]
    shift: Shift,
    /// Comma-separated group lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [150, 200])]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 250)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 100)]
    boot: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long)]
    auto_bandwidth: bool,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Record wall time (makes reports differ between runs).
    #[arg(long)]
    timing: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    band: BandArgs,
    /// Normaliser; defaults to sqrt(T_k d (B1 - B)).
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Serialize)]
struct BandwidthReport {
    schema_version: u32,
    #[serde(rename = "B")]
    b: usize,
    #[serde(rename = "B1")]
    b1: usize,
    #[serde(rename = "H")]
    h: f64,
    objective: f64,
}

#[derive(Serialize)]
struct VarianceReport {
    schema_version: u32,
    band: BandConfig,
    kernel: KernelSpec,
    groups: Vec<GroupHac>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_max_level(if cli.verbose { Level::INFO } else { Level::WARN })
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn threads(cli: &Cli) -> Result<usize> {
    match cli.threads {
        Some(0) => Err(AnovaError::InvalidArgument("--threads must be >= 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let n_threads = threads(&cli)?;
    // ignore failure: the global pool may already exist in embedded use
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n_threads).build_global();
    match &cli.command {
        Command::Test(args) => cmd_test(&cli, args),
        Command::Simulate(args) => cmd_simulate(&cli, args, n_threads),
        Command::Bandwidth(args) => cmd_bandwidth(&cli, args),
        Command::DiagnoseVariance(args) => cmd_variance(&cli, args),
    }
}

fn stdout_io(e: io::Error) -> AnovaError {
    AnovaError::io("<stdout>", e)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(stdout_io)
}

fn print_csv(header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(io::stdout().lock());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row)?;
    }
    wtr.flush().map_err(stdout_io)
}

fn cmd_test(cli: &Cli, args: &TestArgs) -> Result<ExitCode> {
    let config = TestConfig {
        band: BandConfig::new(args.band.b, args.band.b1)?,
        h: args.band.h,
        kernel: args.band.kernel,
        boot_count: args.boot,
        alpha: args.alpha,
        seed: cli.seed.unwrap_or(TestConfig::default().seed),
        auto_bandwidth: args.auto_bandwidth,
    };
    let report = match args.periods {
        Some(n) => run_real(&args.input.input, n, &config)?,
        None => run_test(&load_panel(&args.input.input)?, &config)?,
    };
    match cli.format {
        ReportFormat::Json => print_json(&report)?,
        ReportFormat::Csv => print_test_csv(&report)?,
    }
    Ok(ExitCode::from(if report.reject { EXIT_REJECT } else { 0 }))
}

fn print_test_csv(r: &TestReport) -> Result<()> {
    let per_group = r.per_group.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
    let objective = r.band_objective.map(|v| v.to_string()).unwrap_or_default();
    print_csv(
        &[
            "schema_version", "statistic", "scaled_statistic", "per_group", "quantile", "v",
            "reject", "B", "B1", "H", "kernel", "boot_count", "alpha", "seed", "t_min",
            "auto_bandwidth", "band_objective", "degenerate_variance", "wall_time_ms",
        ],
        &[vec![
            r.schema_version.to_string(),
            r.statistic.to_string(),
            r.scaled_statistic.to_string(),
            per_group,
            r.quantile.to_string(),
            r.v.to_string(),
            r.reject.to_string(),
            r.band.lower.to_string(),
            r.band.upper.to_string(),
            r.h.to_string(),
            r.kernel.to_string(),
            r.boot_count.to_string(),
            r.alpha.to_string(),
            r.seed.to_string(),
            r.t_min.to_string(),
            r.auto_bandwidth.to_string(),
            objective,
            r.degenerate_variance.to_string(),
            r.wall_time_ms.to_string(),
        ]],
    )
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, n_threads: usize) -> Result<ExitCode> {
    let blocks = match &args.config {
        Some(path) => load_sweep(path)?,
        None => vec![ExperimentBlock {
            kind: args.kind,
            lengths: args.lengths.clone(),
            dim: args.dim,
            shift: args.shift,
            replicates: args.replicates,
            boot_count: args.boot,
            alpha: args.alpha,
            b: args.band.b,
            b1: args.band.b1,
            h: args.band.h,
            auto_bandwidth: args.auto_bandwidth,
            kernel: args.band.kernel,
            seed: TestConfig::default().seed,
            burn_in: args.burn_in,
        }],
    };
    let mut rows = Vec::with_capacity(blocks.len());
    for mut block in blocks {
        if let Some(seed) = cli.seed {
            block.seed = seed;
        }
        let mut spec = block.into_spec(n_threads);
        if cli.fast {
            spec = spec.fast();
        }
        spec.timing = args.timing;
        rows.push(run_size_power(&spec)?);
    }
    match &args.output {
        Some(path) => write_report(&rows, cli.format, path)?,
        None => emit_report(&rows, cli.format, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bandwidth(cli: &Cli, args: &InputArgs) -> Result<ExitCode> {
    let panel = load_panel(&args.input)?;
    let sel = select_bands(&panel, &BandGrid::default_for(panel.min_len()))?;
    let (_, res) = demean(&panel);
    let h = select_h(&second_order_residuals(&res, sel.band)?)?;
    let report = BandwidthReport {
        schema_version: REPORT_SCHEMA_VERSION,
        b: sel.band.lower,
        b1: sel.band.upper,
        h,
        objective: sel.objective,
    };
    match cli.format {
        ReportFormat::Json => print_json(&report)?,
        ReportFormat::Csv => print_csv(
            &["schema_version", "B", "B1", "H", "objective"],
            &[vec![
                report.schema_version.to_string(),
                report.b.to_string(),
                report.b1.to_string(),
                report.h.to_string(),
                report.objective.to_string(),
            ]],
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_variance(cli: &Cli, args: &VarianceArgs) -> Result<ExitCode> {
    let panel = load_panel(&args.input.input)?;
    let band = BandConfig::new(args.band.b, args.band.b1)?.clamp_to(panel.min_len())?;
    let groups = diagnose_variance(&panel, band, args.band.h, args.band.kernel, args.scale)?;
    match cli.format {
        ReportFormat::Json => print_json(&VarianceReport {
            schema_version: REPORT_SCHEMA_VERSION,
            band,
            kernel: args.band.kernel,
            groups,
        })?,
        ReportFormat::Csv => print_csv(
            &["group", "B", "B1", "H", "scale", "value"],
            &groups
                .iter()
                .map(|g| {
                    vec![
                        g.group.to_string(),
                        band.lower.to_string(),
                        band.upper.to_string(),
                        g.estimate.h.to_string(),
                        g.estimate.scale.to_string(),
                        g.estimate.value.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    }
    Ok(ExitCode::SUCCESS)
}
