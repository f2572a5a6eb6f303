//! Monte Carlo size/power sweeps, the real-data workflow and report I/O.
//!
//! Replicate `r` of an experiment with root seed `s` draws its panel from
//! `StreamKey(s, [REPLICATE, r, DGP])` and its bootstrap weights from
//! `StreamKey(s, [REPLICATE, r, BOOTSTRAP])`. Results are gathered in
//! replicate order, so the summary does not depend on the thread count.
//!
//! Report columns, in CSV order:
//! `kind, shift, lengths, dim, replicates, boot_count, alpha,
//! auto_bandwidth, seed, mean_distance, B, B1, H, rate, se, wall_time_ms,
//! median_replicate_ms`. `lengths` is `;`-separated. `B`, `B1` and `H` are
//! the most frequent selection across replicates (ties go to the smallest).
//! The two timing columns are empty unless timing was requested.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::bootstrap::{run_test, TestConfig, TestReport, REPORT_SCHEMA_VERSION};
use crate::dgp::{distance, gen_panel, DgpKind, DgpSpec, Shift, DEFAULT_BURN_IN};
use crate::error::{AnovaError, Result};
use crate::kernel::KernelSpec;
use crate::panel::{load_series, split_periods};
use crate::rng::{domain, StreamKey};
use crate::statistic::BandConfig;

pub const CSV_COLUMNS: [&str; 17] = [
    "kind",
    "shift",
    "lengths",
    "dim",
    "replicates",
    "boot_count",
    "alpha",
    "auto_bandwidth",
    "seed",
    "mean_distance",
    "B",
    "B1",
    "H",
    "rate",
    "se",
    "wall_time_ms",
    "median_replicate_ms",
];

/// One size/power cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// `dgp.seed` is the root seed of the whole experiment.
    pub dgp: DgpSpec,
    /// `config.seed` is ignored; each replicate derives its own.
    pub config: TestConfig,
    pub replicates: usize,
    pub parallelism: usize,
    /// Record wall time. Off by default so reports are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(AnovaError::InvalidArgument("need at least one replicate".into()));
        }
        if self.parallelism == 0 {
            return Err(AnovaError::InvalidArgument("parallelism must be >= 1".into()));
        }
        self.dgp.validate()?;
        self.config.validate()
    }

    /// CI profile: R=50, 60 bootstrap draws, d=60, every T_k=80.
    pub fn fast(mut self) -> Self {
        self.replicates = 50;
        self.config.boot_count = 60;
        self.dgp.dim = 60;
        self.dgp.lengths = vec![80; self.dgp.lengths.len()];
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: DgpKind,
    pub shift: Shift,
    pub lengths: Vec<usize>,
    pub dim: usize,
    pub replicates: usize,
    pub boot_count: usize,
    pub alpha: f64,
    pub auto_bandwidth: bool,
    pub seed: u64,
    pub mean_distance: f64,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "B1")]
    pub b1: usize,
    #[serde(rename = "H")]
    pub h: f64,
    pub rate: f64,
    pub se: f64,
    pub wall_time_ms: Option<f64>,
    pub median_replicate_ms: Option<f64>,
}

/// Result of a single replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub reject: bool,
    pub distance: f64,
    pub band: BandConfig,
    pub h: f64,
    pub wall_ms: f64,
}

/// `(panel seed, bootstrap seed)` for replicate `r`.
pub fn replicate_seeds(root: u64, r: usize) -> (u64, u64) {
    let key = StreamKey::root(root).children(&[domain::REPLICATE, r as u64]);
    (key.child(domain::DGP).derive_u64(), key.child(domain::BOOTSTRAP).derive_u64())
}

pub fn run_replicate(spec: &ExperimentSpec, r: usize) -> Result<ReplicateOutcome> {
    let start = Instant::now();
    let (dgp_seed, boot_seed) = replicate_seeds(spec.dgp.seed, r);
    let dgp = DgpSpec { seed: dgp_seed, ..spec.dgp.clone() };
    let (panel, means) = gen_panel(&dgp)?;
    let config = TestConfig { seed: boot_seed, ..spec.config.clone() };
    let report = run_test(&panel, &config)?;
    Ok(ReplicateOutcome {
        reject: report.reject,
        distance: distance(&means),
        band: report.band,
        h: report.h,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// All replicates in index order, run on a dedicated pool of
/// `spec.parallelism` threads.
pub fn run_replicates(spec: &ExperimentSpec) -> Result<Vec<ReplicateOutcome>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| AnovaError::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    let results: Vec<Result<ReplicateOutcome>> = pool.install(|| {
        (0..spec.replicates)
            .into_par_iter()
            .map(|r| run_replicate(spec, r))
            .collect()
    });
    results
        .into_iter()
        .enumerate()
        .map(|(r, res)| {
            res.map_err(|e| AnovaError::Replicate {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Most frequent `(B, B1, H)`; ties go to the smallest.
fn modal_selection(outcomes: &[ReplicateOutcome]) -> (usize, usize, f64) {
    // H > 0, so bit order matches numeric order
    let mut counts: BTreeMap<(usize, usize, u64), usize> = BTreeMap::new();
    for o in outcomes {
        *counts.entry((o.band.lower, o.band.upper, o.h.to_bits())).or_default() += 1;
    }
    let mut best = None;
    for (key, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((key, n));
        }
    }
    let ((b, b1, h), _) = best.expect("at least one replicate");
    (b, b1, f64::from_bits(h))
}

pub fn summarize(spec: &ExperimentSpec, outcomes: &[ReplicateOutcome], wall_ms: Option<f64>) -> SummaryRow {
    let n = outcomes.len() as f64;
    let rejects = outcomes.iter().filter(|o| o.reject).count();
    let rate = rejects as f64 / n;
    let mean_distance = outcomes.iter().map(|o| o.distance).sum::<f64>() / n;
    let (b, b1, h) = modal_selection(outcomes);
    let median = wall_ms.map(|_| {
        let mut t: Vec<f64> = outcomes.iter().map(|o| o.wall_ms).collect();
        t.sort_by(f64::total_cmp);
        let m = t.len() / 2;
        if t.len() % 2 == 0 {
            (t[m - 1] + t[m]) / 2.0
        } else {
            t[m]
        }
    });
    SummaryRow {
        kind: spec.dgp.kind,
        shift: spec.dgp.shift,
        lengths: spec.dgp.lengths.clone(),
        dim: spec.dgp.dim,
        replicates: outcomes.len(),
        boot_count: spec.config.boot_count,
        alpha: spec.config.alpha,
        auto_bandwidth: spec.config.auto_bandwidth,
        seed: spec.dgp.seed,
        mean_distance,
        b,
        b1,
        h,
        rate,
        se: (rate * (1.0 - rate) / n).sqrt(),
        wall_time_ms: wall_ms,
        median_replicate_ms: median,
    }
}

/// Run every replicate of `spec` and aggregate.
pub fn run_size_power(spec: &ExperimentSpec) -> Result<SummaryRow> {
    let start = Instant::now();
    let outcomes = run_replicates(spec)?;
    let wall = spec.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    let row = summarize(spec, &outcomes, wall);
    info!(
        kind = %row.kind,
        shift = %row.shift,
        rate = row.rate,
        se = row.se,
        "experiment finished"
    );
    Ok(row)
}

/// Split one series into `n_periods` contiguous groups and test them.
pub fn run_real(input: impl AsRef<Path>, n_periods: usize, config: &TestConfig) -> Result<TestReport> {
    if n_periods < 2 {
        return Err(AnovaError::InvalidArgument(format!(
            "need at least 2 periods, got {n_periods}"
        )));
    }
    let series = load_series(input)?;
    let panel = split_periods(series.view(), n_periods)?;
    run_test(&panel, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = AnovaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(AnovaError::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonReport {
    schema_version: u32,
    rows: Vec<SummaryRow>,
}

/// Flat mirror of [`SummaryRow`] for CSV.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    kind: DgpKind,
    shift: Shift,
    lengths: String,
    dim: usize,
    replicates: usize,
    boot_count: usize,
    alpha: f64,
    auto_bandwidth: bool,
    seed: u64,
    mean_distance: f64,
    #[serde(rename = "B")]
    b: usize,
    #[serde(rename = "B1")]
    b1: usize,
    #[serde(rename = "H")]
    h: f64,
    rate: f64,
    se: f64,
    wall_time_ms: Option<f64>,
    median_replicate_ms: Option<f64>,
}

impl From<&SummaryRow> for CsvRow {
    fn from(r: &SummaryRow) -> Self {
        CsvRow {
            kind: r.kind,
            shift: r.shift,
            lengths: r.lengths.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";"),
            dim: r.dim,
            replicates: r.replicates,
            boot_count: r.boot_count,
            alpha: r.alpha,
            auto_bandwidth: r.auto_bandwidth,
            seed: r.seed,
            mean_distance: r.mean_distance,
            b: r.b,
            b1: r.b1,
            h: r.h,
            rate: r.rate,
            se: r.se,
            wall_time_ms: r.wall_time_ms,
            median_replicate_ms: r.median_replicate_ms,
        }
    }
}

impl TryFrom<CsvRow> for SummaryRow {
    type Error = AnovaError;

    fn try_from(r: CsvRow) -> Result<Self> {
        let lengths = r
            .lengths
            .split(';')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| AnovaError::MalformedData(format!("bad lengths field `{}`", r.lengths)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SummaryRow {
            kind: r.kind,
            shift: r.shift,
            lengths,
            dim: r.dim,
            replicates: r.replicates,
            boot_count: r.boot_count,
            alpha: r.alpha,
            auto_bandwidth: r.auto_bandwidth,
            seed: r.seed,
            mean_distance: r.mean_distance,
            b: r.b,
            b1: r.b1,
            h: r.h,
            rate: r.rate,
            se: r.se,
            wall_time_ms: r.wall_time_ms,
            median_replicate_ms: r.median_replicate_ms,
        })
    }
}

pub fn emit_report<W: Write>(rows: &[SummaryRow], format: ReportFormat, mut writer: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let report = JsonReport {
                schema_version: REPORT_SCHEMA_VERSION,
                rows: rows.to_vec(),
            };
            serde_json::to_writer_pretty(&mut writer, &report)?;
            writeln!(writer).map_err(|e| AnovaError::io("<writer>", e))?;
        }
        ReportFormat::Csv => {
            let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
            wtr.write_record(CSV_COLUMNS)?;
            for row in rows {
                wtr.serialize(CsvRow::from(row))?;
            }
            wtr.flush().map_err(|e| AnovaError::io("<writer>", e))?;
        }
    }
    Ok(())
}

pub fn write_report(rows: &[SummaryRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AnovaError::io(path, e))?;
    emit_report(rows, format, std::io::BufWriter::new(file))
}

pub fn parse_report(text: &str, format: ReportFormat) -> Result<Vec<SummaryRow>> {
    match format {
        ReportFormat::Json => {
            let report: JsonReport = serde_json::from_str(text)?;
            if report.schema_version != REPORT_SCHEMA_VERSION {
                return Err(AnovaError::MalformedData(format!(
                    "unsupported schema_version {}",
                    report.schema_version
                )));
            }
            Ok(report.rows)
        }
        ReportFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
            if header != CSV_COLUMNS {
                return Err(AnovaError::MalformedData(format!(
                    "unexpected report header {header:?}"
                )));
            }
            rdr.deserialize::<CsvRow>()
                .map(|r| SummaryRow::try_from(r?))
                .collect()
        }
    }
}

/// One `[experiment.N]` block of a sweep file. Missing keys take the
/// desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: DgpKind,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_shift")]
    pub shift: Shift,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_boot_count")]
    pub boot_count: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    #[serde(rename = "B1", default = "default_b1")]
    pub b1: usize,
    #[serde(rename = "H", default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub auto_bandwidth: bool,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_lengths() -> Vec<usize> {
    vec![150, 200]
}
fn default_dim() -> usize {
    250
}
fn default_shift() -> Shift {
    Shift::None
}
fn default_replicates() -> usize {
    200
}
fn default_boot_count() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.05
}
fn default_b() -> usize {
    10
}
fn default_b1() -> usize {
    15
}
fn default_h() -> f64 {
    50.0
}
fn default_seed() -> u64 {
    42
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ExperimentBlock {
    pub fn default_for(kind: DgpKind) -> Self {
        Self {
            kind,
            lengths: default_lengths(),
            dim: default_dim(),
            shift: default_shift(),
            replicates: default_replicates(),
            boot_count: default_boot_count(),
            alpha: default_alpha(),
            b: default_b(),
            b1: default_b1(),
            h: default_h(),
            auto_bandwidth: false,
            kernel: KernelSpec::Gaussian,
            seed: default_seed(),
            burn_in: default_burn_in(),
        }
    }

    pub fn into_spec(self, parallelism: usize) -> ExperimentSpec {
        ExperimentSpec {
            dgp: DgpSpec {
                kind: self.kind,
                lengths: self.lengths,
                dim: self.dim,
                shift: self.shift,
                burn_in: self.burn_in,
                seed: self.seed,
            },
            config: TestConfig {
                band: BandConfig {
                    lower: self.b,
                    upper: self.b1,
                },
                h: self.h,
                kernel: self.kernel,
                boot_count: self.boot_count,
                alpha: self.alpha,
                seed: self.seed,
                auto_bandwidth: self.auto_bandwidth,
            },
            replicates: self.replicates,
            parallelism,
            timing: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    experiment: BTreeMap<String, ExperimentBlock>,
}

/// Parse a sweep file. Blocks are returned in ascending numeric order of `N`.
pub fn parse_sweep(text: &str) -> Result<Vec<ExperimentBlock>> {
    let file: SweepFile = toml::from_str(text).map_err(|e| AnovaError::Config(e.to_string()))?;
    let mut blocks = file
        .experiment
        .into_iter()
        .map(|(name, block)| {
            name.parse::<u64>()
                .map(|n| (n, block))
                .map_err(|_| AnovaError::Config(format!("experiment id `{name}` is not an integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    if blocks.is_empty() {
        return Err(AnovaError::Config("no [experiment.N] blocks".into()));
    }
    blocks.sort_by_key(|(n, _)| *n);
    Ok(blocks.into_iter().map(|(_, b)| b).collect())
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<Vec<ExperimentBlock>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AnovaError::io(path, e))?;
    parse_sweep(&text)
}
