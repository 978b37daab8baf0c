//! `mottrack` command line: `track`, `evaluate` and `report`.
//!
//! Exit codes: 0 success, 1 load/IO error, 2 usage or config error,
//! 3 empty ground truth.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::metrics::{
    evaluate_sequence, format_comparison, format_csv, format_table, parse_csv, MetricRow,
    MetricsSummary,
};
use crate::motio::{
    default_results_path, read_config, read_ground_truth, read_results, write_results, Config,
    SequenceBundle,
};
use crate::tracker::{run_sequence, FrameOutput};

pub const EXIT_OK: u8 = 0;
pub const EXIT_LOAD: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_EMPTY_GT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mottrack",
    version,
    about = "Detection-based multi-object tracker and MOTChallenge evaluator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track one or more sequences from detection files.
    Track(TrackArgs),
    /// Score result files against ground truth.
    Evaluate(EvaluateArgs),
    /// Combine metric CSV rows into a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Detection file (MOTChallenge det.txt layout); repeat for more sequences.
    #[arg(long, required = true)]
    detections: Vec<PathBuf>,
    /// Embedding sidecar, one per --detections when given.
    #[arg(long)]
    embeddings: Vec<PathBuf>,
    /// Results file, one per --detections when given. Defaults to
    /// `<stem>_results.txt` beside the detections.
    #[arg(long)]
    output: Vec<PathBuf>,
    /// seqinfo.ini, one per --detections when given.
    #[arg(long)]
    seqinfo: Vec<PathBuf>,
    /// Flat `key = value` tracker configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Ground-truth file; repeat together with --results.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Results file paired with the --gt at the same position.
    #[arg(long, required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Also write the rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Label of the summary row.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `NAME=CSVPATH`; the last row of each CSV becomes a column.
    #[arg(long = "row", required = true, value_parser = parse_row_spec)]
    rows: Vec<(String, PathBuf)>,
}

fn parse_row_spec(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=CSVPATH, got `{s}`")),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match cli.command {
        Command::Track(a) => cmd_track(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out, err),
        Command::Report(a) => cmd_report(a, out, err),
    }
}

fn fail(err: &mut dyn Write, code: u8, message: impl Display) -> u8 {
    let _ = writeln!(err, "error: {message}");
    code
}

/// Per-sequence optional paths must be absent or match the detection count.
fn paired<'a>(
    flag: &str,
    paths: &'a [PathBuf],
    count: usize,
) -> Result<Vec<Option<&'a Path>>, String> {
    if paths.is_empty() {
        Ok(vec![None; count])
    } else if paths.len() == count {
        Ok(paths.iter().map(|p| Some(p.as_path())).collect())
    } else {
        Err(format!(
            "{} --{flag} given for {count} --detections",
            paths.len()
        ))
    }
}

struct TrackJob<'a> {
    detections: &'a Path,
    embeddings: Option<&'a Path>,
    seqinfo: Option<&'a Path>,
    output: PathBuf,
}

fn cmd_track(args: TrackArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let n = args.detections.len();
    let (embeddings, outputs, seqinfos) = match (
        paired("embeddings", &args.embeddings, n),
        paired("output", &args.output, n),
        paired("seqinfo", &args.seqinfo, n),
    ) {
        (Ok(e), Ok(o), Ok(s)) => (e, o, s),
        (Err(m), _, _) | (_, Err(m), _) | (_, _, Err(m)) => return fail(err, EXIT_USAGE, m),
    };

    let config = match &args.config {
        Some(path) if !path.is_file() => {
            return fail(
                err,
                EXIT_USAGE,
                format!("config file {} not found", path.display()),
            )
        }
        Some(path) => match read_config(path) {
            Ok(c) => c,
            Err(e @ Error::Io { .. }) => return fail(err, EXIT_USAGE, e),
            Err(e) => return fail(err, EXIT_USAGE, format!("{}: {e}", path.display())),
        },
        None => Config::default(),
    };

    let jobs: Vec<TrackJob> = (0..n)
        .map(|i| TrackJob {
            detections: &args.detections[i],
            embeddings: embeddings[i],
            seqinfo: seqinfos[i],
            output: outputs[i]
                .map(Path::to_path_buf)
                .unwrap_or_else(|| default_results_path(&args.detections[i])),
        })
        .collect();

    let mut seen_outputs = HashSet::new();
    for job in &jobs {
        let inputs = [Some(job.detections), job.embeddings, job.seqinfo];
        if let Some(missing) = inputs.into_iter().flatten().find(|p| !p.is_file()) {
            return fail(
                err,
                EXIT_LOAD,
                format!("input file {} not found", missing.display()),
            );
        }
        if !seen_outputs.insert(job.output.clone()) {
            return fail(
                err,
                EXIT_USAGE,
                format!(
                    "output {} used by more than one sequence",
                    job.output.display()
                ),
            );
        }
    }

    let mut bundles = Vec::with_capacity(n);
    for job in &jobs {
        match SequenceBundle::load(job.detections, job.embeddings, None, job.seqinfo) {
            Ok(b) => bundles.push(b),
            Err(e) => return fail(err, EXIT_LOAD, e),
        }
    }

    let tracker_config = config.tracker;
    let results: Vec<crate::Result<Vec<FrameOutput>>> = thread::scope(|s| {
        let handles: Vec<_> = bundles
            .iter()
            .zip(&jobs)
            .map(|(bundle, job)| {
                s.spawn(move || {
                    let outputs = run_sequence(bundle, &tracker_config)?;
                    write_results(&job.output, &outputs)?;
                    Ok(outputs)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tracking thread panicked"))
            .collect()
    });

    let mut code = EXIT_OK;
    for ((bundle, job), result) in bundles.iter().zip(&jobs).zip(results) {
        match result {
            Ok(outputs) => {
                let ids: HashSet<u64> = outputs
                    .iter()
                    .flat_map(|o| o.records.iter().map(|r| r.id))
                    .collect();
                let records: usize = outputs.iter().map(|o| o.records.len()).sum();
                let _ = writeln!(
                    out,
                    "{}: {} frames, {} tracks, {} records -> {}",
                    bundle.name,
                    bundle.frame_count,
                    ids.len(),
                    records,
                    job.output.display()
                );
            }
            Err(e) => code = fail(err, EXIT_LOAD, format!("{}: {e}", bundle.name)),
        }
    }
    code
}

/// `seq/gt/gt.txt` is named `seq`; anything else by its file stem.
fn sequence_name(gt: &Path) -> String {
    let parent = gt.parent();
    if parent.and_then(Path::file_name).is_some_and(|n| n == "gt") {
        if let Some(seq) = parent.and_then(Path::parent).and_then(Path::file_name) {
            return seq.to_string_lossy().into_owned();
        }
    }
    gt.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into())
}

fn cmd_evaluate(args: EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    if args.gt.len() != args.results.len() {
        return fail(
            err,
            EXIT_USAGE,
            format!(
                "{} --gt but {} --results",
                args.gt.len(),
                args.results.len()
            ),
        );
    }
    if !(args.iou_threshold > 0.0 && args.iou_threshold <= 1.0) {
        return fail(err, EXIT_USAGE, "--iou-threshold must lie in (0, 1]");
    }
    if let Some(missing) = args.gt.iter().chain(&args.results).find(|p| !p.is_file()) {
        return fail(
            err,
            EXIT_LOAD,
            format!("input file {} not found", missing.display()),
        );
    }

    let mut rows = Vec::new();
    let mut total = MetricsSummary::default();
    for (gt_path, res_path) in args.gt.iter().zip(&args.results) {
        let gt = match read_ground_truth(gt_path) {
            Ok(gt) => gt,
            Err(e) => return fail(err, EXIT_LOAD, e),
        };
        let hyp = match read_results(res_path) {
            Ok(h) => h,
            Err(e) => return fail(err, EXIT_LOAD, e),
        };
        let summary = match evaluate_sequence(&gt, &hyp, args.iou_threshold) {
            Ok(s) => s,
            Err(Error::EmptyGroundTruth) => {
                return fail(
                    err,
                    EXIT_EMPTY_GT,
                    format!("{}: no scored ground-truth objects", gt_path.display()),
                )
            }
            Err(e) => return fail(err, EXIT_LOAD, e),
        };
        total += summary;
        rows.push(MetricRow::from_summary(sequence_name(gt_path), &summary));
    }
    if rows.len() == 1 {
        if let Some(name) = &args.name {
            rows[0].model = name.clone();
        }
    } else {
        let name = args.name.as_deref().unwrap_or("ALL");
        rows.push(MetricRow::from_summary(name, &total));
    }

    let _ = write!(out, "{}", format_table(&rows));
    if let Some(path) = &args.csv {
        if let Err(e) = std::fs::write(path, format_csv(&rows)) {
            return fail(err, EXIT_LOAD, format!("{}: {e}", path.display()));
        }
    }
    EXIT_OK
}

fn cmd_report(args: ReportArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut names = HashSet::new();
    let mut rows = Vec::with_capacity(args.rows.len());
    for (name, path) in &args.rows {
        if !names.insert(name.as_str()) {
            return fail(
                err,
                EXIT_LOAD,
                format!("row name `{name}` given more than once"),
            );
        }
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(err, EXIT_LOAD, format!("{}: {e}", path.display())),
        };
        let parsed = match parse_csv(&text) {
            Ok(p) => p,
            Err(e) => return fail(err, EXIT_LOAD, format!("{}: {e}", path.display())),
        };
        let Some(mut row) = parsed.into_iter().last() else {
            return fail(
                err,
                EXIT_LOAD,
                format!("{}: no metric rows", path.display()),
            );
        };
        row.model = name.clone();
        rows.push(row);
    }
    let _ = write!(out, "{}", format_comparison(&rows));
    EXIT_OK
}
