//! On-disk formats.
//!
//! An instance directory holds:
//!
//! * `problem.toml`, the manifest (schema below);
//! * `A.mtx`, `y.mtx` and optionally `x_true.mtx` and `noise.mtx`, each a
//!   Matrix Market `array real general` file (column-major, one entry per
//!   line, 17 significant digits). Vectors are stored as `n × 1` matrices.
//!
//! Manifest schema (TOML):
//!
//! ```toml
//! format_version = "qcbp-manifest/1"
//! matrix = "A.mtx"          # path relative to the manifest
//! y = "y.mtx"
//! ground_truth = "x_true.mtx"   # optional
//! noise = "noise.mtx"           # optional
//! eta = 0.1
//! seed = 7                      # optional
//!
//! [generator]                   # optional, present for synthetic instances
//! d = 100
//! p_s = 0.4
//! p_m = 0.05
//! eta = 0.1
//! seed = 7
//! strict_interior = false
//! ```
//!
//! The reader also accepts Matrix Market `coordinate` files (densified on
//! load), `integer` fields and `symmetric` storage.
//!
//! Convergence histories are CSV with header `iter,r_p,r_d,gap,objective`;
//! numbers use the shortest decimal form that reads back to the same
//! `f64`, and an infinite gap is written `inf`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};
use crate::instance::{GeneratorParams, ProblemInstance};
use crate::linalg::DenseMatrix;
use crate::solver::{IterationRecord, SolveReport};

pub const FORMAT_VERSION: &str = "qcbp-manifest/1";
pub const MANIFEST_FILE: &str = "problem.toml";
pub const HISTORY_HEADER: &str = "iter,r_p,r_d,gap,objective";

/// Contents of `problem.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub format_version: String,
    pub matrix: PathBuf,
    pub y: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<PathBuf>,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorParams>,
}

/// Writes `instance` into `dir` (created if missing) and returns the manifest.
/// The manifest itself is at `dir/problem.toml`.
pub fn write_instance(instance: &ProblemInstance, dir: &Path) -> Result<ProblemManifest> {
    write_instance_with(instance, dir, None)
}

/// Like [`write_instance`], also recording the generator parameters.
pub fn write_instance_with(
    instance: &ProblemInstance,
    dir: &Path,
    generator: Option<&GeneratorParams>,
) -> Result<ProblemManifest> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let manifest = ProblemManifest {
        format_version: FORMAT_VERSION.to_string(),
        matrix: "A.mtx".into(),
        y: "y.mtx".into(),
        ground_truth: instance
            .ground_truth_x
            .as_ref()
            .map(|_| "x_true.mtx".into()),
        noise: instance.noise.as_ref().map(|_| "noise.mtx".into()),
        eta: instance.eta,
        seed: instance.seed,
        generator: generator.copied(),
    };
    write_matrix_market(&dir.join(&manifest.matrix), &instance.a)?;
    write_vector_market(&dir.join(&manifest.y), &instance.y)?;
    if let (Some(p), Some(x)) = (&manifest.ground_truth, &instance.ground_truth_x) {
        write_vector_market(&dir.join(p), x)?;
    }
    if let (Some(p), Some(v)) = (&manifest.noise, &instance.noise) {
        write_vector_market(&dir.join(p), v)?;
    }
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest {
        path: dir.join(MANIFEST_FILE),
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

/// Reads the manifest at `path`.
pub fn read_manifest(path: &Path) -> Result<ProblemManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let manifest: ProblemManifest = toml::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        field: manifest_error_field(&e),
        message: e.message().to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            field: "format_version".into(),
            message: format!(
                "unrecognized version `{}` (expected `{FORMAT_VERSION}`)",
                manifest.format_version
            ),
        });
    }
    Ok(manifest)
}

fn manifest_error_field(e: &toml::de::Error) -> String {
    // toml reports missing keys as "missing field `name`"
    let msg = e.message();
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

/// Reads and validates the instance described by the manifest at `path`.
/// `path` may also be the directory containing `problem.toml`.
pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest = read_manifest(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let a = read_matrix_market(&base.join(&manifest.matrix))?;
    let y = read_vector_market(&base.join(&manifest.y))?;
    let ground_truth_x = manifest
        .ground_truth
        .as_ref()
        .map(|p| read_vector_market(&base.join(p)))
        .transpose()?;
    let noise = manifest
        .noise
        .as_ref()
        .map(|p| read_vector_market(&base.join(p)))
        .transpose()?;
    let instance = ProblemInstance {
        a,
        y,
        eta: manifest.eta,
        ground_truth_x,
        noise,
        seed: manifest.seed,
    };
    instance.validate().map_err(Error::InvalidInstance)?;
    Ok(instance)
}

fn fmt_entry(out: &mut String, v: f64) {
    // 17 significant digits: exact binary round trip
    let _ = writeln!(out, "{v:.16e}");
}

/// Writes a dense matrix as Matrix Market `array real general`.
pub fn write_matrix_market(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut out = String::with_capacity(26 * a.rows() * a.cols() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for v in a.to_col_major() {
        fmt_entry(&mut out, v);
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

/// Writes a vector as an `n × 1` Matrix Market array.
pub fn write_vector_market(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(26 * v.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} 1", v.len());
    for &x in v {
        fmt_entry(&mut out, x);
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

pub fn read_matrix_market(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_matrix_market(&text, path)
}

/// Reads an `n × 1` (or `1 × n`) Matrix Market file as a vector.
pub fn read_vector_market(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_market(path)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: format!(
                "expected a vector, found a {}x{} matrix",
                m.rows(),
                m.cols()
            ),
        });
    }
    Ok(m.as_slice().to_vec())
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Array,
    Coordinate,
}

/// Parses Matrix Market text. `path` is only used in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<DenseMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("malformed Matrix Market header `{header}`")));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(err(1, format!("unsupported format `{other}`"))),
    };
    if !matches!(tokens[3].as_str(), "real" | "integer" | "double") {
        return Err(err(1, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut data_lines = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_no, size_line) = data_lines
        .next()
        .ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_no, format!("bad size line `{size_line}`: {e}")))?;
    let want = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != want {
        return Err(err(
            size_no,
            format!("size line needs {want} integers, got `{size_line}`"),
        ));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if symmetric && rows != cols {
        return Err(err(size_no, "symmetric matrix must be square".into()));
    }

    let parse_val = |no: usize, tok: &str| {
        tok.parse::<f64>()
            .map_err(|e| err(no, format!("bad value `{tok}`: {e}")))
            .and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(no, format!("non-finite value `{tok}`")))
                }
            })
    };

    let mut dense = vec![0.0; rows * cols];
    let mut last_line = size_no;
    match layout {
        Layout::Array => {
            // column-major; symmetric stores the lower triangle only
            let positions: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| {
                    let start = if symmetric { j } else { 0 };
                    (start..rows).map(move |i| (i, j))
                })
                .collect();
            let mut count = 0;
            for (no, line) in data_lines {
                last_line = no;
                for tok in line.split_whitespace() {
                    let &(i, j) = positions
                        .get(count)
                        .ok_or_else(|| err(no, format!("more than {} entries", positions.len())))?;
                    let v = parse_val(no, tok)?;
                    dense[i * cols + j] = v;
                    if symmetric {
                        dense[j * cols + i] = v;
                    }
                    count += 1;
                }
            }
            if count != positions.len() {
                return Err(err(
                    last_line,
                    format!("expected {} entries, found {count}", positions.len()),
                ));
            }
        }
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut count = 0;
            for (no, line) in data_lines {
                last_line = no;
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(err(no, format!("expected `row col value`, got `{line}`")));
                }
                let idx = |s: &str, bound: usize| {
                    s.parse::<usize>()
                        .ok()
                        .filter(|&k| k >= 1 && k <= bound)
                        .ok_or_else(|| err(no, format!("index `{s}` out of range 1..={bound}")))
                };
                let i = idx(t[0], rows)? - 1;
                let j = idx(t[1], cols)? - 1;
                let v = parse_val(no, t[2])?;
                dense[i * cols + j] += v;
                if symmetric && i != j {
                    dense[j * cols + i] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(err(
                    last_line,
                    format!("expected {nnz} entries, found {count}"),
                ));
            }
        }
    }
    DenseMatrix::from_row_major(rows, cols, dense)
}

/// Writes the recorded history of `report` as CSV.
pub fn write_history(report: &SolveReport, path: &Path) -> Result<()> {
    write_history_records(&report.history, path)
}

pub fn write_history_records(records: &[IterationRecord], path: &Path) -> Result<()> {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.r_p, r.r_d, r.gap, r.objective
        );
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

/// Reads a history CSV written by [`write_history`].
pub fn read_history(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        _ => return Err(err(1, format!("expected header `{HISTORY_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(no, format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| err(no, format!("bad number `{s}`: {e}")))
        };
        out.push(IterationRecord {
            iter: f[0]
                .trim()
                .parse()
                .map_err(|e| err(no, format!("bad iteration `{}`: {e}", f[0])))?,
            r_p: num(f[1])?,
            r_d: num(f[2])?,
            gap: num(f[3])?,
            objective: num(f[4])?,
        });
    }
    Ok(out)
}
