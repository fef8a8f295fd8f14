//! File formats: schedule JSON, trajectory and error CSV, certificate and
//! witness JSON. Node and pair indices are 1-based in every file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tempsync_core::{
    build_switching_schedule, AdjacencySchedule, ClusterCertificate, Condition, CoupledComparison,
    ErrorSeries, Extension, Matrix, Piece, SyncCertificate, Trajectory, Verdict,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    // the underlying errors are folded into the message, not chained, so
    // that reporters print them once
    #[error("{path}: {err}")]
    File { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Json { path: PathBuf, err: serde_json::Error },
    #[error("{path}: {err}")]
    Csv { path: PathBuf, err: csv::Error },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

impl IoError {
    fn invalid(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Invalid {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionKind {
    #[default]
    Constant,
    Periodic,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub t: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

/// On-disk form of a piecewise-constant schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub n: usize,
    #[serde(default)]
    pub extension: ExtensionKind,
    /// Required for the periodic extension; defaults to the span of the segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// End of the domain for `extension = "none"` (unbounded when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    pub segments: Vec<SegmentDoc>,
}

impl ScheduleDoc {
    pub fn to_schedule(&self) -> Result<AdjacencySchedule, String> {
        if self.segments.is_empty() {
            return Err("schedule has no segments".into());
        }
        let mut segs = Vec::with_capacity(self.segments.len());
        for (k, s) in self.segments.iter().enumerate() {
            let m = Matrix::from_rows(&s.a).ok_or_else(|| format!("segment {}: ragged matrix", k + 1))?;
            if m.rows() != self.n || m.cols() != self.n {
                return Err(format!(
                    "segment {}: expected {n}x{n} matrix, got {}x{}",
                    k + 1,
                    m.rows(),
                    m.cols(),
                    n = self.n
                ));
            }
            segs.push((s.t, m));
        }
        let ext = match self.extension {
            ExtensionKind::Constant => Extension::Constant,
            ExtensionKind::Periodic => {
                let period = match self.period {
                    Some(p) => p,
                    None => {
                        let first = self.segments[0].t;
                        let last = self.segments[self.segments.len() - 1].t;
                        if self.segments.len() < 2 {
                            return Err("periodic schedule needs a period".into());
                        }
                        // last segment gets the mean segment length
                        (last - first) * self.segments.len() as f64 / (self.segments.len() - 1) as f64
                    }
                };
                Extension::Periodic { period }
            }
            ExtensionKind::None => Extension::None { end: self.end },
        };
        build_switching_schedule(self.n, segs, ext).map_err(|e| e.to_string())
    }

    /// Document for a schedule made only of constant pieces.
    pub fn from_schedule(s: &AdjacencySchedule) -> Option<Self> {
        let mut segments = Vec::new();
        for (t, p) in s.breakpoints().iter().zip(s.pieces()) {
            match p {
                Piece::Constant(m) => segments.push(SegmentDoc { t: *t, a: m.to_rows() }),
                _ => return None,
            }
        }
        let (extension, period, end) = match s.extension() {
            Extension::Constant => (ExtensionKind::Constant, None, None),
            Extension::Periodic { period } => (ExtensionKind::Periodic, Some(period), None),
            Extension::None { end } => (ExtensionKind::None, None, end),
        };
        Some(Self {
            n: s.n_nodes(),
            extension,
            period,
            end,
            segments,
        })
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let f = File::open(path).map_err(|err| IoError::File {
        path: path.to_path_buf(),
        err,
    })?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|err| IoError::Json {
        path: path.to_path_buf(),
        err,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file_err = |err| IoError::File {
        path: path.to_path_buf(),
        err,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file_err)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(file_err)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|err| IoError::Json {
        path: path.to_path_buf(),
        err,
    })?;
    w.write_all(b"\n").map_err(file_err)?;
    w.flush().map_err(file_err)
}

pub fn read_schedule(path: &Path) -> Result<AdjacencySchedule, IoError> {
    let doc: ScheduleDoc = read_json(path)?;
    doc.to_schedule().map_err(|m| IoError::invalid(path, m))
}

pub fn write_schedule(path: &Path, s: &AdjacencySchedule) -> Result<(), IoError> {
    let doc = ScheduleDoc::from_schedule(s)
        .ok_or_else(|| IoError::invalid(path, "only piecewise-constant schedules can be written"))?;
    write_json(path, &doc)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|err| IoError::File {
            path: path.to_path_buf(),
            err,
        })?;
    }
    csv::Writer::from_path(path).map_err(|err| IoError::Csv {
        path: path.to_path_buf(),
        err,
    })
}

fn write_rows<'a>(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = (f64, Box<dyn Iterator<Item = f64> + 'a>)>,
) -> Result<(), IoError> {
    let csv_err = |err| IoError::Csv {
        path: path.to_path_buf(),
        err,
    };
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err)?;
    let mut rec = Vec::with_capacity(header.len());
    for (t, vals) in rows {
        rec.clear();
        rec.push(t.to_string());
        rec.extend(vals.map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|err| IoError::File {
        path: path.to_path_buf(),
        err,
    })
}

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for d in 1..=m {
            h.push(format!("x_{i}_{d}"));
        }
    }
    h
}

pub fn error_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for j in i + 1..=n {
            h.push(format!("xi_{i}_{j}"));
        }
    }
    h.push("e_hat".into());
    h
}

/// `t, x_1_1, ..., x_N_m`, one row per recorded time.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let header = trajectory_header(traj.n_nodes(), traj.state_dim());
    write_rows(
        path,
        header,
        (0..traj.len()).map(|k| {
            let it: Box<dyn Iterator<Item = f64>> = Box::new(traj.state(k).iter().copied());
            (traj.times()[k], it)
        }),
    )
}

/// `t, xi_1_2, ..., xi_(N-1)_N, e_hat`.
pub fn write_error_csv(path: &Path, err: &ErrorSeries) -> Result<(), IoError> {
    let header = error_header(err.n_nodes());
    write_rows(
        path,
        header,
        (0..err.len()).map(|k| {
            let it: Box<dyn Iterator<Item = f64>> =
                Box::new(err.xi(k).iter().copied().chain(std::iter::once(err.e_hat[k])));
            (err.times[k], it)
        }),
    )
}

/// Reads any numeric CSV written by this module: header plus rows of floats.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let csv_err = |err| IoError::Csv {
        path: path.to_path_buf(),
        err,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::invalid(path, e.to_string()))?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails { .. } => "fails",
        Verdict::GridVerifiedOnly => "grid-verified-only",
    }
}

fn failure_json(v: &Verdict) -> Value {
    match v {
        Verdict::Fails { condition, pair, t } => json!({
            "condition": match condition { Condition::Delta => "delta", Condition::Gamma => "gamma" },
            "pair": [pair.0 + 1, pair.1 + 1],
            "t": t,
        }),
        _ => Value::Null,
    }
}

fn assumptions(cert: &SyncCertificate) -> Vec<String> {
    let mut a = vec![format!("rho={}", cert.rho), "grid-verified".to_string()];
    if cert.verdict == Verdict::GridVerifiedOnly {
        a.push(format!("within-margin={}", cert.margin));
    }
    a
}

/// JSON form of a full-network certificate.
pub fn certificate_json(cert: &SyncCertificate) -> Value {
    json!({
        "verdict": verdict_name(&cert.verdict),
        "failure": failure_json(&cert.verdict),
        "gamma_bar": cert.gamma_bar,
        "gamma_argmin": {
            "pair": [cert.gamma_argmin.0 .0 + 1, cert.gamma_argmin.0 .1 + 1],
            "t": cert.gamma_argmin.1,
        },
        "mu1": cert.mu1,
        "mu2": Value::Null,
        "bound_M": cert.bound_m,
        "epsilon": cert.epsilon,
        "log_threshold": cert.log_threshold,
        "asymptotic_bound": cert.asymptotic_bound,
        "settle_time": cert.settle_time,
        "delta_max": cert.delta_max.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "grid": {
            "t0": cert.grid.t0,
            "t1": cert.grid.t1,
            "step": cert.grid.step,
            "points": cert.n_grid_points,
        },
        "assumptions": assumptions(cert),
    })
}

pub fn cluster_certificate_json(cert: &ClusterCertificate) -> Value {
    let mut v = certificate_json(&cert.core);
    v["mu2"] = json!(cert.mu2);
    v["combined_mu"] = json!(cert.combined_mu);
    v["cluster"] = json!(cert.cluster.indices().iter().map(|i| i + 1).collect::<Vec<_>>());
    v
}

pub fn h2_witness_json(w: &CoupledComparison, grid: (f64, f64)) -> Value {
    json!({
        "gamma": w.gamma,
        "verdict": if w.verdict { "holds" } else { "fails" },
        "sup_l": w.sup_l,
        "argmin": { "node": w.argmin.0 + 1, "t": w.argmin.1 },
        "nodes": w.n_nodes,
        "grid": { "t0": grid.0, "t1": grid.1, "points": w.grid_len },
    })
}
