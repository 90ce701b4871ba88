//! Matrix Market input, right-hand sides, and experiment output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::krylov::{FinalResidual, IterRecord};
use crate::refine::OuterRecord;
pub use crate::rng::random_rhs;
use crate::sparsela::SparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub path: PathBuf,
    pub transpose_if_underdetermined: bool,
    pub rhs_seed: u64,
}

impl ProblemSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            transpose_if_underdetermined: true,
            rhs_seed: 1,
        }
    }

    /// Short identifier: the file stem.
    pub fn id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// Load the matrix of `spec`, transposing wide inputs, and generate `b`.
pub fn load_problem(spec: &ProblemSpec) -> Result<(SparseMatrix, Vec<f64>), IoError> {
    let mut a = load_matrix_market(&spec.path)?;
    if spec.transpose_if_underdetermined && a.nrows() < a.ncols() {
        a = a.transpose();
    }
    if a.nrows() == 0 {
        return Err(IoError::Dimension("matrix has no rows".into()));
    }
    let b = random_rhs(a.nrows(), spec.rhs_seed);
    Ok((a, b))
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix, IoError> {
    parse_matrix_market(File::open(path)?)
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parse a real or integer Matrix Market stream in coordinate or array layout.
pub fn parse_matrix_market(reader: impl Read) -> Result<SparseMatrix, IoError> {
    let mut lines = BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let words: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported layout `{other}`"))),
    };
    let pattern = match words[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field `{other}`"))),
    };
    if pattern && !coordinate {
        return Err(parse_err(1, "pattern field requires coordinate layout"));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        Ok(s) => Some(Ok((k, s))),
        Err(e) => Some(Err(e)),
    });
    let (size_line, size) = data
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(size_line, format!("bad integer `{t}`")))
        })
        .collect::<Result<_, _>>()?;
    let expect = if coordinate { 3 } else { 2 };
    if dims.len() != expect {
        return Err(parse_err(
            size_line,
            format!("size line needs {expect} integers"),
        ));
    }
    let (m, n) = (dims[0], dims[1]);
    if symmetry != Symmetry::General && m != n {
        return Err(IoError::Dimension(format!(
            "symmetric matrix must be square, got {m}x{n}"
        )));
    }

    let mut trip = Vec::new();
    let mut push = |i: usize, j: usize, v: f64| {
        trip.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => trip.push((j, i, v)),
                Symmetry::SkewSymmetric => trip.push((j, i, -v)),
            }
        }
    };
    let parse_f = |line: usize, t: &str| -> Result<f64, IoError> {
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(line, format!("bad value `{t}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(line, "non-finite value"))
        }
    };

    if coordinate {
        let nnz = dims[2];
        let mut count = 0;
        for item in data {
            let (line, s) = item?;
            let toks: Vec<&str> = s.split_whitespace().collect();
            let need = if pattern { 2 } else { 3 };
            if toks.len() < need {
                return Err(parse_err(line, "incomplete entry"));
            }
            let idx = |t: &str, bound: usize| -> Result<usize, IoError> {
                let k: usize = t
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad index `{t}`")))?;
                if k == 0 || k > bound {
                    return Err(parse_err(
                        line,
                        format!("index {k} out of range 1..={bound}"),
                    ));
                }
                Ok(k - 1)
            };
            let (i, j) = (idx(toks[0], m)?, idx(toks[1], n)?);
            if symmetry != Symmetry::General && i < j {
                return Err(parse_err(
                    line,
                    "entry above the diagonal in a symmetric file",
                ));
            }
            let v = if pattern {
                1.0
            } else {
                parse_f(line, toks[2])?
            };
            push(i, j, v);
            count += 1;
        }
        if count != nnz {
            return Err(IoError::Dimension(format!(
                "header declares {nnz} entries, found {count}"
            )));
        }
    } else {
        // Column-major; symmetric files list the lower triangle only.
        let mut slots = (0..n).flat_map(|j| {
            let start = if symmetry == Symmetry::General { 0 } else { j };
            (start..m).map(move |i| (i, j))
        });
        let mut last_line = size_line;
        for item in data {
            let (line, s) = item?;
            last_line = line;
            for t in s.split_whitespace() {
                let (i, j) = slots
                    .next()
                    .ok_or_else(|| parse_err(line, "too many values"))?;
                let v = parse_f(line, t)?;
                if symmetry == Symmetry::SkewSymmetric && i == j && v != 0.0 {
                    return Err(parse_err(line, "nonzero diagonal in skew-symmetric file"));
                }
                if v != 0.0 {
                    push(i, j, v);
                }
            }
        }
        if slots.next().is_some() {
            return Err(parse_err(last_line + 1, "too few values"));
        }
    }
    SparseMatrix::from_triplets(m, n, &trip).map_err(|e| IoError::Dimension(e.to_string()))
}

/// Write in coordinate real general format with full precision values.
pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one run, one row of a summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub m: usize,
    pub n: usize,
    pub precond: String,
    pub level: Option<usize>,
    pub lsize: Option<usize>,
    pub rsize: Option<usize>,
    pub fact: String,
    pub apply: String,
    pub matvec: String,
    pub criterion: String,
    pub delta: f64,
    pub reorth: String,
    pub iterations: usize,
    pub termination: String,
    pub ratio_pt: Option<f64>,
    pub ratio_ps: Option<f64>,
    pub ratio_gs: Option<f64>,
    pub rnorm: Option<f64>,
    pub alpha: f64,
    pub restarts: usize,
    pub nnz_l: usize,
    pub nout: Option<usize>,
    pub nsol: Option<usize>,
    pub wall_time_s: f64,
}

/// One row of a per-iteration history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub phibar: f64,
    pub est_normt_r: f64,
    pub ratio_pt: Option<f64>,
    pub ratio_gs: Option<f64>,
    /// True residual norm, on the final row only.
    pub rnorm_true: Option<f64>,
}

/// History rows for an LSQR run; the final row carries the true residual.
pub fn history_rows(history: &[IterRecord], fin: Option<&FinalResidual>) -> Vec<HistoryRow> {
    let mut rows: Vec<HistoryRow> = history
        .iter()
        .map(|h| HistoryRow {
            iter: h.iter,
            phibar: h.phibar,
            est_normt_r: h.est_normt_r,
            ratio_pt: h.ratio_pt,
            ratio_gs: h.ratio_gs,
            rnorm_true: None,
        })
        .collect();
    if let (Some(last), Some(f)) = (rows.last_mut(), fin) {
        last.rnorm_true = Some(f.rnorm);
    }
    rows
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!(
                "unknown output format `{s}` (expected csv or json)"
            )),
        }
    }
}

fn write_rows<T: Serialize>(
    rows: &[T],
    header: &[&str],
    path: &Path,
    format: OutputFormat,
) -> Result<(), IoError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(path)?;
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(
    path: &Path,
    format: OutputFormat,
) -> Result<Vec<T>, IoError> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_path(path)?;
            Ok(r.deserialize().collect::<Result<_, _>>()?)
        }
        OutputFormat::Json => Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?),
    }
}

const HISTORY_HEADER: [&str; 6] = [
    "iter",
    "phibar",
    "est_normt_r",
    "ratio_pt",
    "ratio_gs",
    "rnorm_true",
];
const SUMMARY_HEADER: [&str; 25] = [
    "problem",
    "m",
    "n",
    "precond",
    "level",
    "lsize",
    "rsize",
    "fact",
    "apply",
    "matvec",
    "criterion",
    "delta",
    "reorth",
    "iterations",
    "termination",
    "ratio_pt",
    "ratio_ps",
    "ratio_gs",
    "rnorm",
    "alpha",
    "restarts",
    "nnz_l",
    "nout",
    "nsol",
    "wall_time_s",
];

pub fn write_history(
    rows: &[HistoryRow],
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<(), IoError> {
    write_rows(rows, &HISTORY_HEADER, path.as_ref(), format)
}

pub fn read_history(
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<Vec<HistoryRow>, IoError> {
    read_rows(path.as_ref(), format)
}

pub fn write_summary(
    records: &[RunRecord],
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<(), IoError> {
    write_rows(records, &SUMMARY_HEADER, path.as_ref(), format)
}

pub fn read_summary(
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<Vec<RunRecord>, IoError> {
    read_rows(path.as_ref(), format)
}

const OUTER_HEADER: [&str; 4] = ["inner_iterations", "inner_termination", "ratio_gs", "rnorm"];

/// Per-outer-step history of an LSQR-IR run.
pub fn write_outer_history(
    rows: &[OuterRecord],
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<(), IoError> {
    write_rows(rows, &OUTER_HEADER, path.as_ref(), format)
}

pub fn read_outer_history(
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<Vec<OuterRecord>, IoError> {
    read_rows(path.as_ref(), format)
}

/// Path of the history file of run `index` next to the summary at `summary`.
pub fn history_path(summary: &Path, index: usize, format: OutputFormat) -> PathBuf {
    let stem = summary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    summary.with_file_name(format!("{stem}.history{index:03}.{}", format.extension()))
}

/// Write a summary file plus one history file per run.
pub fn write_results(
    runs: &[(RunRecord, Vec<HistoryRow>)],
    summary: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, IoError> {
    let summary = summary.as_ref();
    let records: Vec<RunRecord> = runs.iter().map(|r| r.0.clone()).collect();
    write_summary(&records, summary, format)?;
    let mut paths = Vec::with_capacity(runs.len());
    for (k, (_, rows)) in runs.iter().enumerate() {
        let p = history_path(summary, k, format);
        write_history(rows, &p, format)?;
        paths.push(p);
    }
    Ok(paths)
}
