//! The `mlcf` command line: `track`, `eval` and `plotdata`.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 feature source.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::evaluation::{curve_csv, load_sequence, SequenceMetrics};
use crate::imaging::Frame;
use crate::pipeline::{BoundingBox, Tracker};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FEATURE_SOURCE: i32 = 3;

/// Environment variable that overrides the feature service address.
pub const SERVICE_ENV: &str = "MLCF_FEATURE_SERVICE";

pub const CSV_HEADER: &str = "frame_index,x,y,w,h,score,eta_t,n_candidates";

#[derive(Parser, Debug)]
#[command(name = "mlcf", version, about = "Multi-level correlation filter tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one or more OTB-layout sequences from their first ground-truth box.
    Track(TrackArgs),
    /// Score a box CSV against a sequence's ground truth.
    Eval(EvalArgs),
    /// Merge metrics JSON files into plot-ready CSVs.
    Plotdata(PlotArgs),
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Sequence directory (contains img/ and groundtruth_rect.txt).
    #[arg(long, required = true, num_args = 1..)]
    sequence: Vec<PathBuf>,
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV for one sequence, or a directory for several.
    #[arg(long)]
    output: PathBuf,
    /// Sequences processed concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Optional JSON run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long)]
    sequence: PathBuf,
    /// Metrics JSON; curve CSVs are written next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Metrics JSON files, optionally labeled as LABEL=PATH.
    #[arg(required = true)]
    inputs: Vec<String>,
    #[arg(long)]
    output_dir: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::FeatureSource { .. } => EXIT_FEATURE_SOURCE,
        _ => EXIT_DATA,
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Track(a) => cmd_track(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Plotdata(a) => cmd_plotdata(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Write via a sibling temp file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Per-sequence result of a tracking run.
#[derive(Debug, Clone, Serialize)]
pub struct SequenceRun {
    pub sequence: PathBuf,
    pub output: PathBuf,
    pub frame_seconds: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: Option<PathBuf>,
    pub output: PathBuf,
    pub runs: Vec<SequenceRun>,
}

fn load_config(path: Option<&Path>) -> Result<TrackerConfig> {
    let mut cfg = match path {
        Some(p) => TrackerConfig::load(p)?,
        None => TrackerConfig::default(),
    };
    if let Ok(addr) = std::env::var(SERVICE_ENV) {
        if !addr.is_empty() {
            cfg.override_service_addr(&addr);
        }
    }
    Ok(cfg)
}

fn csv_row(out: &mut String, index: usize, b: &BoundingBox, score: f64, eta: f64, n: usize) {
    let _ = writeln!(
        out,
        "{index},{:.4},{:.4},{:.4},{:.4},{score:.6},{eta:.6},{n}",
        b.x, b.y, b.w, b.h
    );
}

/// Track one sequence directory and return the CSV text and per-frame times.
pub fn track_directory(dir: &Path, config: &TrackerConfig) -> Result<(String, Vec<f64>)> {
    let seq = load_sequence(dir)?;
    let first = Frame::load(&seq.frame_paths[0])?;
    let init = seq.groundtruth[0];
    let started = Instant::now();
    let mut tracker = Tracker::init(&first, init, config.clone())?;
    let mut times = vec![started.elapsed().as_secs_f64()];
    let mut csv = format!("{CSV_HEADER}\n");
    csv_row(&mut csv, 0, &init, 0.0, 0.0, 0);
    for (i, path) in seq.frame_paths.iter().enumerate().skip(1) {
        let frame = Frame::load(path)?;
        let t = Instant::now();
        let (b, d) = tracker.track(&frame)?;
        times.push(t.elapsed().as_secs_f64());
        csv_row(&mut csv, i, &b, d.score, d.eta, d.n_candidates);
    }
    Ok((csv, times))
}

fn cmd_track(a: &TrackArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let single_file = a.sequence.len() == 1 && a.output.extension().is_some_and(|e| e == "csv");
    let outputs: Vec<PathBuf> = if single_file {
        vec![a.output.clone()]
    } else {
        std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
        a.sequence
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let name = s.file_name().map(|n| n.to_string_lossy().into_owned());
                a.output.join(format!("{}.csv", name.unwrap_or_else(|| format!("sequence{i}"))))
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs as usize)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<Result<SequenceRun>> = pool.install(|| {
        a.sequence
            .par_iter()
            .zip(outputs.par_iter())
            .map(|(dir, out)| {
                let (csv, times) = track_directory(dir, &config)?;
                write_atomic(out, csv.as_bytes())?;
                Ok(SequenceRun {
                    sequence: dir.clone(),
                    output: out.clone(),
                    frame_seconds: times,
                })
            })
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    for r in &runs {
        let total: f64 = r.frame_seconds.iter().sum();
        let fps = if total > 0.0 { r.frame_seconds.len() as f64 / total } else { 0.0 };
        eprintln!("{}: {} frames, mean {:.2} fps", r.sequence.display(), r.frame_seconds.len(), fps);
    }
    if let Some(path) = &a.manifest {
        let manifest = RunManifest {
            config: a.config.clone(),
            output: a.output.clone(),
            runs,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(path, json.as_bytes())?;
    }
    Ok(())
}

/// Read the `x,y,w,h` columns of a box CSV with a header line.
pub fn read_box_csv(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let idx = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Format(format!("{}: header lacks column '{name}'", path.display())))
    };
    let ix = [idx("x")?, idx("y")?, idx("w")?, idx("h")?];
    let mut boxes = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut v = [0.0; 4];
        for (slot, &c) in v.iter_mut().zip(&ix) {
            *slot = fields
                .get(c)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Format(format!("{} line {}: bad box row", path.display(), i + 1)))?;
        }
        boxes.push(
            BoundingBox::new(v[0], v[1], v[2], v[3])
                .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    if boxes.is_empty() {
        return Err(Error::Format(format!("{} has no box rows", path.display())));
    }
    Ok(boxes)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let boxes = read_box_csv(&a.boxes)?;
    let seq = load_sequence(&a.sequence)?;
    if boxes.len() != seq.groundtruth.len() {
        return Err(Error::Format(format!(
            "frame count mismatch: boxes={} annotations={}",
            boxes.len(),
            seq.groundtruth.len()
        )));
    }
    let m = SequenceMetrics::compute(&seq.name, &boxes, &seq.groundtruth)?;
    let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&a.output, json.as_bytes())?;
    write_atomic(
        &sibling(&a.output, "precision"),
        curve_csv(&m.precision_curve()?, "precision").as_bytes(),
    )?;
    write_atomic(&sibling(&a.output, "success"), curve_csv(&m.success_curve()?, "success").as_bytes())?;
    println!("{}: DP@20 = {:.4}  AUC = {:.4}", m.sequence, m.dp20, m.auc);
    Ok(())
}

fn merged_csv(thresholds: &[f64], labels: &[String], columns: &[&Vec<f64>]) -> String {
    let mut out = String::from("threshold");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, t) in thresholds.iter().enumerate() {
        let _ = write!(out, "{t}");
        for c in columns {
            let _ = write!(out, ",{}", c[i]);
        }
        out.push('\n');
    }
    out
}

fn cmd_plotdata(a: &PlotArgs) -> Result<()> {
    let mut labels = Vec::new();
    let mut metrics = Vec::new();
    for input in &a.inputs {
        let (label, path) = match input.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(input);
                let l = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (l, p)
            }
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: SequenceMetrics =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let (p, s) = (m.precision_curve()?, m.success_curve()?);
        labels.push(label);
        metrics.push((p, s));
    }
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    let precision: Vec<&Vec<f64>> = metrics.iter().map(|(p, _)| &p.values).collect();
    let success: Vec<&Vec<f64>> = metrics.iter().map(|(_, s)| &s.values).collect();
    let (p0, s0) = &metrics[0];
    write_atomic(
        &a.output_dir.join("precision.csv"),
        merged_csv(&p0.thresholds, &labels, &precision).as_bytes(),
    )?;
    write_atomic(
        &a.output_dir.join("success.csv"),
        merged_csv(&s0.thresholds, &labels, &success).as_bytes(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["mlcf"]), EXIT_USAGE);
        assert_eq!(run(["mlcf", "track", "--output", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["mlcf", "track", "--sequence", "a", "--output", "x.csv", "--jobs", "0"]), EXIT_USAGE);
        assert_eq!(run(["mlcf", "--help"]), EXIT_OK);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Format("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::feature_source("down", None)), EXIT_FEATURE_SOURCE);
    }

    #[test]
    fn box_csv_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        std::fs::write(&p, format!("{CSV_HEADER}\n0,1,2,3,4,0,0,0\n1,1.5,2,3,4,0.5,0.01,2\n")).unwrap();
        let b = read_box_csv(&p).unwrap();
        assert_eq!(b[1], BoundingBox::new(1.5, 2.0, 3.0, 4.0).unwrap());
        std::fs::write(&p, "").unwrap();
        assert!(matches!(read_box_csv(&p), Err(Error::Format(_))));
        std::fs::write(&p, "x,y,w\n1,2,3\n").unwrap();
        assert!(read_box_csv(&p).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
