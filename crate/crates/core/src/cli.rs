// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! Parameters resolve as command-line flags, then an optional TOML file given
//! with `--config`, then built-in defaults. The default seed may also come from
//! the `ICID_SEED` environment variable. Exit status is 0 on success, 1 for
//! invalid parameters and 2 for runtime failures.

use crate::bench::{run_bench, BenchConfig, BENCH_SIZES};
use crate::data::{gen_s1_blocks, gen_s2, load_csv, load_labels, minmax_normalize, TimeSeries, S1_BLOCK_LEN};
use crate::detector::{detect_offline, score_points_cpd, select_psi, DetectorConfig, Scoring, DEFAULT_PSI_GRID};
use crate::embedding::PointKernelSpec;
use crate::error::{IcidError, Result};
use crate::eval::{f1_with_margin, Anchor, EvalReport, ExportFormat, ScoreDocument};
use crate::instability::{InstabilityKind, InstabilityMeasure};
use crate::kernel::DEFAULT_T;
use crate::online::{init_online, OnlineConfig};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "ICID_SEED";

#[derive(Parser, Debug)]
#[command(name = "icid", version, about = "Change-interval detection with the Isolation Distributional Kernel")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its labels.
    Synth(SynthArgs),
    /// Score fixed intervals, select psi and flag change intervals.
    Offline(OfflineArgs),
    /// Replay a stream in w-sized steps against a bounded buffer.
    Online(OnlineArgs),
    /// Score every point with a pair of sliding windows.
    Cpd(CpdArgs),
    /// Compare a score file with labels at a detection margin.
    Eval(EvalArgs),
    /// Time offline and online detection on growing synthetic streams.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// TOML file with default parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interval length.
    #[arg(long = "w", visible_alias = "window")]
    w: Option<usize>,
    /// Candidate subsample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    psi_list: Option<Vec<usize>>,
    /// Threshold multiplier: tau = mean + alpha * sigma.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of partitionings.
    #[arg(long)]
    t: Option<usize>,
    /// Random seed (default from ICID_SEED, else 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Instability measure: approx_entropy, variance or gini.
    #[arg(long)]
    measure: Option<String>,
    /// Scoring: icid, icid_mmd or gcid_mmd.
    #[arg(long)]
    scoring: Option<String>,
    /// Point kernel for gcid_mmd: gaussian, laplacian, chi2, polynomial or sigmoid.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    coef0: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
}

#[derive(Args, Debug)]
struct OfflineArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Input CSV, one row per time step.
    #[arg(long)]
    input: PathBuf,
    /// Score file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json; inferred from the output extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Labels to evaluate the flagged intervals against.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Detection margin for evaluation (requires --labels).
    #[arg(long)]
    margin: Option<usize>,
    /// Time stamp of a flagged interval: start, mid or end.
    #[arg(long)]
    anchor: Option<String>,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Reference CSV used to choose psi and the normalization; its length is the buffer size.
    #[arg(long)]
    reference: PathBuf,
    /// Stream CSV, or `-` for standard input.
    #[arg(long, default_value = "-")]
    input: String,
    /// Output CSV, appended one row per scored step; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Start from an empty buffer instead of one holding the reference.
    #[arg(long)]
    cold_start: bool,
}

#[derive(Args, Debug)]
struct CpdArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Fixed subsample size; selected from the candidate list when omitted.
    #[arg(long)]
    psi: Option<usize>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    margin: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Score file written by offline or cpd.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Detection margin; defaults to the window of the score file.
    #[arg(long)]
    margin: Option<usize>,
    #[arg(long, default_value = "start")]
    anchor: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// s1 or s2.
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Points per block for s1.
    #[arg(long)]
    block_len: Option<usize>,
    /// Data CSV path.
    #[arg(long)]
    output: PathBuf,
    /// Labels path; the output path with a `.labels` extension when omitted.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long = "w", default_value_t = 60)]
    w: usize,
    #[arg(long, value_delimiter = ',')]
    psi_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_T)]
    t: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    repeats: usize,
    #[arg(long, default_value_t = 40)]
    online_steps: usize,
    /// Online buffer capacity.
    #[arg(long, default_value_t = 6_000)]
    capacity: usize,
    /// Also write the report as json.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parameters accepted in a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    window: Option<usize>,
    psi_list: Option<Vec<usize>>,
    alpha: Option<f64>,
    t: Option<usize>,
    seed: Option<u64>,
    measure: Option<String>,
    apen_m: Option<usize>,
    apen_r_factor: Option<f64>,
    scoring: Option<String>,
    kernel: Option<String>,
    gamma: Option<f64>,
    coef0: Option<f64>,
    degree: Option<u32>,
    margin: Option<usize>,
    anchor: Option<String>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| IcidError::io(path, e))?;
    toml::from_str(&text).map_err(|e| IcidError::invalid(format!("{}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| IcidError::invalid(format!("{SEED_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    Ok(match flag.or(file) {
        Some(seed) => seed,
        None => env_seed()?.unwrap_or(0),
    })
}

/// Fully resolved detection parameters, echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: String,
    pub input: Option<PathBuf>,
    pub window: usize,
    pub psi_list: Vec<usize>,
    pub alpha: f64,
    pub t: usize,
    pub seed: u64,
    pub measure: InstabilityMeasure,
    pub scoring: Scoring,
    pub margin: Option<usize>,
    pub anchor: Anchor,
}

impl RunConfig {
    fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            window: self.window,
            psi_list: self.psi_list.clone(),
            alpha: self.alpha,
            t: self.t,
            seed: self.seed,
            measure: self.measure,
            scoring: self.scoring,
        }
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn resolve_scoring(p: &ParamArgs, f: &FileConfig) -> Result<Scoring> {
    let scoring: Scoring = p.scoring.as_deref().or(f.scoring.as_deref()).unwrap_or("icid").parse()?;
    let family = p.kernel.as_deref().or(f.kernel.as_deref());
    let gamma = p.gamma.or(f.gamma);
    let coef0 = p.coef0.or(f.coef0).unwrap_or(1.0);
    let degree = p.degree.or(f.degree).unwrap_or(3);
    let kernel_flags = family.is_some() || gamma.is_some() || p.coef0.or(f.coef0).is_some() || p.degree.or(f.degree).is_some();
    match scoring {
        Scoring::GcidMmd { .. } => {
            let need_gamma = |name: &str| {
                gamma.ok_or_else(|| IcidError::invalid(format!("kernel {name} needs --gamma")))
            };
            let kernel = match family.unwrap_or("gaussian") {
                "gaussian" => gamma.map(|gamma| PointKernelSpec::Gaussian { gamma }),
                "laplacian" => Some(PointKernelSpec::Laplacian { gamma: need_gamma("laplacian")? }),
                "chi2" => Some(PointKernelSpec::Chi2 { gamma: need_gamma("chi2")? }),
                "polynomial" => Some(PointKernelSpec::Polynomial {
                    gamma: need_gamma("polynomial")?,
                    coef0,
                    degree,
                }),
                "sigmoid" => Some(PointKernelSpec::Sigmoid {
                    gamma: need_gamma("sigmoid")?,
                    coef0,
                }),
                other => {
                    return Err(IcidError::invalid(format!(
                        "unknown kernel {other:?} (expected gaussian, laplacian, chi2, polynomial or sigmoid)"
                    )))
                }
            };
            if let Some(k) = &kernel {
                k.validate()?;
            }
            Ok(Scoring::GcidMmd { kernel })
        }
        _ if kernel_flags => Err(IcidError::invalid("point-kernel options apply only to --scoring gcid_mmd")),
        other => Ok(other),
    }
}

fn resolve(mode: &str, input: Option<&Path>, p: &ParamArgs, margin: Option<usize>, anchor: Option<&str>) -> Result<RunConfig> {
    let f = load_file_config(p.config.as_deref())?;
    let window = p
        .w
        .or(f.window)
        .ok_or_else(|| IcidError::invalid("interval length is required (--w or `window` in the config file)"))?;
    if window < 2 {
        return Err(IcidError::invalid(format!("window must be >= 2, got {window}")));
    }
    let psi_list = p.psi_list.clone().or(f.psi_list.clone()).unwrap_or_else(|| DEFAULT_PSI_GRID.to_vec());
    if psi_list.is_empty() || psi_list.contains(&0) {
        return Err(IcidError::invalid("psi list must be nonempty and contain only positive sizes"));
    }
    let alpha = p.alpha.or(f.alpha).unwrap_or(1.0);
    if !alpha.is_finite() {
        return Err(IcidError::invalid(format!("alpha must be finite, got {alpha}")));
    }
    let t = p.t.or(f.t).unwrap_or(DEFAULT_T);
    if t == 0 {
        return Err(IcidError::invalid("t must be >= 1"));
    }
    let kind: InstabilityKind = p.measure.as_deref().or(f.measure.as_deref()).unwrap_or("approx_entropy").parse()?;
    let mut measure = InstabilityMeasure::new(kind);
    if let Some(m) = f.apen_m {
        measure.apen_m = m;
    }
    if let Some(r) = f.apen_r_factor {
        measure.apen_r_factor = r;
    }
    measure.validate()?;
    let anchor: Anchor = anchor.or(f.anchor.as_deref()).unwrap_or("start").parse()?;
    Ok(RunConfig {
        mode: mode.to_string(),
        input: input.map(Path::to_path_buf),
        window,
        psi_list,
        alpha,
        t,
        seed: resolve_seed(p.seed, f.seed)?,
        measure,
        scoring: resolve_scoring(p, &f)?,
        margin: margin.or(f.margin),
        anchor,
    })
}

fn output_format(flag: Option<&str>, output: Option<&Path>) -> Result<ExportFormat> {
    match flag {
        Some(f) => f.parse(),
        None => Ok(match output.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }),
    }
}

fn write_document(doc: &ScoreDocument, output: Option<&Path>, format: ExportFormat) -> Result<()> {
    match output {
        Some(path) => doc.write(path, format),
        None => {
            let text = match format {
                ExportFormat::Csv => doc.to_csv(),
                ExportFormat::Json => serde_json::to_string_pretty(doc)? + "\n",
            };
            io::stdout().write_all(text.as_bytes()).map_err(|e| IcidError::io("<stdout>", e))
        }
    }
}

/// Checks label-dependent flags and loads the labels when given.
fn evaluation_inputs(labels: Option<&Path>, margin: Option<usize>, output: Option<&Path>) -> Result<Option<crate::data::Labels>> {
    match (labels, margin) {
        (None, Some(_)) => Err(IcidError::invalid("--margin requires --labels")),
        (None, None) => Ok(None),
        (Some(_), _) if output.is_none() => Err(IcidError::invalid(
            "--labels requires --output so the evaluation report can go to stdout",
        )),
        (Some(path), _) => load_labels(path).map(Some),
    }
}

fn print_report(report: &EvalReport) -> Result<()> {
    println!("{}", serde_json::to_string(report)?);
    Ok(())
}

fn cmd_offline(a: &OfflineArgs) -> Result<()> {
    let config = resolve("offline", Some(&a.input), &a.params, a.margin, a.anchor.as_deref())?;
    let format = output_format(a.format.as_deref(), a.output.as_deref())?;
    let labels = evaluation_inputs(a.labels.as_deref(), config.margin, a.output.as_deref())?;
    let series = load_csv(&a.input)?;
    if let Some(l) = &labels {
        l.check_len(series.len())?;
    }
    let (normalized, _) = minmax_normalize(&series);
    let result = detect_offline(normalized.view(), &config.detector())?;
    eprintln!(
        "offline: {} intervals, psi* = {}, tau = {}, flagged {:?}",
        result.series.len(),
        result.psi_star.map_or("none".into(), |p| p.to_string()),
        result.threshold,
        result.flagged
    );
    let doc = ScoreDocument::from_detection(&result, config.echo());
    write_document(&doc, a.output.as_deref(), format)?;
    if let Some(l) = labels {
        let margin = config.margin.unwrap_or(config.window);
        print_report(&f1_with_margin(&doc.detections(config.anchor), &l.change_points, margin))?;
    }
    Ok(())
}

fn cmd_cpd(a: &CpdArgs) -> Result<()> {
    let config = resolve("cpd", Some(&a.input), &a.params, a.margin, None)?;
    if !config.scoring.uses_isolation() || config.scoring != Scoring::Icid {
        return Err(IcidError::invalid("cpd supports icid scoring only"));
    }
    let format = output_format(a.format.as_deref(), a.output.as_deref())?;
    let labels = evaluation_inputs(a.labels.as_deref(), config.margin, a.output.as_deref())?;
    let series = load_csv(&a.input)?;
    if let Some(l) = &labels {
        l.check_len(series.len())?;
    }
    let (normalized, _) = minmax_normalize(&series);
    let psi = match a.psi {
        Some(0) => return Err(IcidError::invalid("--psi must be >= 1")),
        Some(psi) => psi,
        None => {
            select_psi(
                normalized.view(),
                config.window,
                &config.psi_list,
                config.t,
                config.seed,
                &config.measure,
                config.scoring,
            )?
            .psi_star
        }
    };
    let points = score_points_cpd(normalized.view(), config.window, psi, config.t, config.seed)?;
    let mut echo = config.echo();
    echo["psi"] = psi.into();
    let doc = ScoreDocument::from_points(&points, config.alpha, echo)?;
    eprintln!(
        "cpd: {} points, psi = {psi}, tau = {}, {} flagged",
        points.scores.len(),
        doc.metadata.threshold,
        doc.flagged().len()
    );
    write_document(&doc, a.output.as_deref(), format)?;
    if let Some(l) = labels {
        let margin = config.margin.unwrap_or(config.window);
        print_report(&f1_with_margin(&doc.detections(Anchor::Start), &l.change_points, margin))?;
    }
    Ok(())
}

fn cmd_online(a: &OnlineArgs) -> Result<()> {
    let input_path = (a.input != "-").then(|| PathBuf::from(&a.input));
    let config = resolve("online", input_path.as_deref(), &a.params, None, None)?;
    let reference = load_csv(&a.reference)?;
    let mut state = init_online(
        &reference,
        &OnlineConfig {
            window: config.window,
            psi_list: config.psi_list.clone(),
            t: config.t,
            seed: config.seed,
            measure: config.measure,
            scoring: config.scoring,
        },
    )?;
    if a.cold_start {
        state.clear_buffer();
    }
    let (source, source_name): (Box<dyn Read>, String) = match &input_path {
        Some(p) => (Box::new(fs::File::open(p).map_err(|e| IcidError::io(p, e))?), p.display().to_string()),
        None => (Box::new(io::stdin().lock()), "<stdin>".into()),
    };
    let (mut sink, sink_name): (Box<dyn Write>, String) = match &a.output {
        Some(p) => (Box::new(fs::File::create(p).map_err(|e| IcidError::io(p, e))?), p.display().to_string()),
        None => (Box::new(io::stdout().lock()), "<stdout>".into()),
    };
    let out_err = |e| IcidError::io(&sink_name, e);
    let mut echo = config.echo();
    echo["reference"] = a.reference.display().to_string().into();
    echo["capacity"] = state.capacity().into();
    echo["cold_start"] = a.cold_start.into();
    writeln!(sink, "# psi_star={},window={},capacity={}", state.psi_star(), config.window, state.capacity()).map_err(out_err)?;
    writeln!(sink, "# config={echo}").map_err(out_err)?;
    writeln!(sink, "step,start,score").map_err(out_err)?;
    sink.flush().map_err(out_err)?;

    let w = config.window;
    let dim = reference.dim();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut pending: Vec<f64> = Vec::with_capacity(w * dim);
    let mut step = 0usize;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| IcidError::Parse {
            path: PathBuf::from(&source_name),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            // a leading header row
            Err(_) if first && record.iter().all(|c| c.parse::<f64>().is_err()) => {
                first = false;
                continue;
            }
            Err(e) => {
                return Err(IcidError::Parse {
                    path: PathBuf::from(&source_name),
                    line,
                    message: e.to_string(),
                })
            }
        };
        first = false;
        if row.len() != dim {
            return Err(IcidError::DimensionMismatch { expected: dim, got: row.len() });
        }
        pending.extend(row);
        if pending.len() == w * dim {
            let chunk = Array2::from_shape_vec((w, dim), std::mem::take(&mut pending)).expect("w full rows");
            match state.online_step(chunk.view()) {
                Ok(score) => {
                    writeln!(sink, "{step},{},{score}", step * w).map_err(out_err)?;
                    sink.flush().map_err(out_err)?;
                }
                Err(IcidError::WarmingUp { have, need }) => {
                    log::info!("step {step}: warming up ({have}/{need} points)");
                }
                Err(e) => return Err(e),
            }
            step += 1;
        }
    }
    if !pending.is_empty() {
        log::warn!("dropped {} trailing points (less than one interval)", pending.len() / dim);
    }
    eprintln!("online: psi* = {}, {} steps, {} scored", state.psi_star(), step, state.steps());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let doc = ScoreDocument::read(&a.scores)?;
    let labels = load_labels(&a.labels)?;
    let anchor: Anchor = a.anchor.parse()?;
    let margin = a.margin.unwrap_or(doc.metadata.window);
    print_report(&f1_with_margin(&doc.detections(anchor), &labels.change_points, margin))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let seed = resolve_seed(a.seed, None)?;
    let (series, labels): (TimeSeries, _) = match a.dataset.as_str() {
        "s1" => {
            let block = a.block_len.unwrap_or(S1_BLOCK_LEN);
            if block < S1_BLOCK_LEN {
                return Err(IcidError::invalid(format!("s1 block length must be >= {S1_BLOCK_LEN}")));
            }
            gen_s1_blocks(block, seed)
        }
        "s2" if a.block_len.is_some() => return Err(IcidError::invalid("--block-len applies to s1 only")),
        "s2" => gen_s2(seed),
        other => return Err(IcidError::invalid(format!("unknown dataset {other:?} (expected s1 or s2)"))),
    };
    series.write_csv(&a.output)?;
    let labels_path = a.labels.clone().unwrap_or_else(|| a.output.with_extension("labels"));
    labels.write(&labels_path)?;
    eprintln!(
        "synth: {} rows x {} dims -> {}, labels -> {}",
        series.len(),
        series.dim(),
        a.output.display(),
        labels_path.display()
    );
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        sizes: a.sizes.clone().unwrap_or_else(|| BENCH_SIZES.to_vec()),
        window: a.w,
        psi_list: a.psi_list.clone().unwrap_or_else(|| DEFAULT_PSI_GRID.to_vec()),
        t: a.t,
        seed: resolve_seed(a.seed, None)?,
        measure: InstabilityMeasure::default(),
        repeats: a.repeats,
        online_steps: a.online_steps,
        online_capacity: a.capacity,
    };
    let report = run_bench(&config)?;
    print!("{}", report.table());
    if let Some(path) = &a.output {
        let doc = serde_json::json!({ "config": config, "report": report });
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n").map_err(|e| IcidError::io(path, e))?;
    }
    Ok(())
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, _: &log::Metadata<'_>) -> bool {
        true
    }

    fn log(&self, record: &log::Record<'_>) {
        eprintln!("[{}] {}", record.level(), record.args());
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn });
    }
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Offline(a) => cmd_offline(a),
        Command::Online(a) => cmd_online(a),
        Command::Cpd(a) => cmd_cpd(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParamArgs {
        ParamArgs {
            w: Some(60),
            ..ParamArgs::default()
        }
    }

    #[test]
    fn defaults() {
        let c = resolve("offline", None, &params(), None, None).unwrap();
        assert_eq!(c.psi_list, DEFAULT_PSI_GRID.to_vec());
        assert_eq!(c.t, 200);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.measure.kind, InstabilityKind::ApproxEntropy);
        assert_eq!(c.scoring, Scoring::Icid);
        assert_eq!(c.anchor, Anchor::Start);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "window = 100\nalpha = 2.5\nt = 50\nseed = 9\nmeasure = \"gini\"\n").unwrap();
        let p = ParamArgs {
            config: Some(path.clone()),
            alpha: Some(1.5),
            ..ParamArgs::default()
        };
        let c = resolve("offline", None, &p, None, None).unwrap();
        assert_eq!((c.window, c.alpha, c.t, c.seed), (100, 1.5, 50, 9));
        assert_eq!(c.measure.kind, InstabilityKind::Gini);

        fs::write(&path, "window = 100\nbogus = 1\n").unwrap();
        let err = resolve("offline", None, &p, None, None).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn kernel_options() {
        let mut p = params();
        p.kernel = Some("laplacian".into());
        assert!(resolve("offline", None, &p, None, None).is_err(), "kernel without gcid_mmd");
        p.scoring = Some("gcid_mmd".into());
        assert!(resolve("offline", None, &p, None, None).is_err(), "laplacian without gamma");
        p.gamma = Some(0.5);
        let c = resolve("offline", None, &p, None, None).unwrap();
        assert_eq!(c.scoring, Scoring::GcidMmd { kernel: Some(PointKernelSpec::Laplacian { gamma: 0.5 }) });
        p.kernel = None;
        p.gamma = None;
        let c = resolve("offline", None, &p, None, None).unwrap();
        assert_eq!(c.scoring, Scoring::GcidMmd { kernel: None });
    }

    #[test]
    fn validation_errors() {
        assert!(resolve("offline", None, &ParamArgs::default(), None, None).is_err());
        let mut p = params();
        p.psi_list = Some(vec![]);
        assert!(resolve("offline", None, &p, None, None).is_err());
        assert!(evaluation_inputs(None, Some(60), None).unwrap_err().is_validation());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["icid", "offline"]), 1);
        assert_eq!(run(["icid", "frobnicate"]), 1);
        assert_eq!(run(["icid", "--help"]), 0);
    }
}
