//! Trace CSV reading and writing.
//!
//! Format: a header `timestamp,<14 metric names>`, then one row per tick with
//! an integer epoch-second timestamp and decimal floats. Comma separated,
//! newline terminated, no quoting.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{feature_index, MetricSeries, TraceError, TraceFrame, N_FEATURES};

pub const TRACE_HEADER: &str = "timestamp,cpu_util,mem_util,storage_util,disk_read_iops,disk_write_iops,net_in,net_out,request_rate,active_connections,error_rate,queue_depth,p99_latency,hour_sin,hour_cos";

/// Parsed rows before any grid assumption. Empty cells are missing values
/// and surface as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub names: Vec<String>,
    pub timestamps: Vec<i64>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// 1-based file line of each row.
    pub lines: Vec<u64>,
}

impl RawTrace {
    /// One series per column, skipping missing cells.
    pub fn series(&self) -> Vec<MetricSeries> {
        self.names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let (timestamps, values) = self
                    .timestamps
                    .iter()
                    .zip(&self.rows)
                    .filter_map(|(&t, r)| r[j].map(|v| (t, v)))
                    .unzip();
                MetricSeries {
                    name: name.clone(),
                    timestamps,
                    values,
                }
            })
            .collect()
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a trace CSV allowing irregular spacing and empty cells.
pub fn read_csv_raw<R: Read>(reader: R) -> Result<RawTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(TraceError::Empty),
    };
    if header.len() != N_FEATURES + 1 {
        return Err(TraceError::ColumnCount {
            line: 1,
            expected: N_FEATURES + 1,
            found: header.len(),
        });
    }
    if &header[0] != "timestamp" {
        return Err(parse_err(
            1,
            format!("first column must be timestamp, got {:?}", &header[0]),
        ));
    }
    let mut names = Vec::with_capacity(N_FEATURES);
    for field in header.iter().skip(1) {
        if feature_index(field).is_none() {
            return Err(TraceError::UnknownColumn(field.to_string()));
        }
        if names.iter().any(|n: &String| n == field) {
            return Err(parse_err(1, format!("duplicate column {field:?}")));
        }
        names.push(field.to_string());
    }

    let mut out = RawTrace {
        names,
        timestamps: Vec::new(),
        rows: Vec::new(),
        lines: Vec::new(),
    };
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != N_FEATURES + 1 {
            return Err(TraceError::ColumnCount {
                line,
                expected: N_FEATURES + 1,
                found: rec.len(),
            });
        }
        let ts: i64 = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp {:?}", &rec[0])))?;
        if let Some(&prev) = out.timestamps.last() {
            if ts <= prev {
                return Err(TraceError::NonMonotonic {
                    line,
                    timestamp: ts,
                    previous: prev,
                });
            }
        }
        let mut row = Vec::with_capacity(N_FEATURES);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("bad number {cell:?} in column {}", out.names[j])))?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("non-finite value {cell:?} in column {}", out.names[j]),
                ));
            }
            row.push(Some(v));
        }
        out.timestamps.push(ts);
        out.rows.push(row);
        out.lines.push(line);
    }
    Ok(out)
}

/// Parses a trace CSV into a uniform-grid frame. Every cell must be present
/// and ticks must be evenly spaced.
pub fn read_csv<R: Read>(reader: R) -> Result<TraceFrame, TraceError> {
    let raw = read_csv_raw(reader)?;
    if raw.rows.is_empty() {
        return Err(TraceError::Empty);
    }
    let n = raw.rows.len();
    let interval = if n > 1 {
        raw.timestamps[1] - raw.timestamps[0]
    } else {
        super::DEFAULT_TICK_SECONDS as i64
    };
    for k in 1..n {
        let spacing = raw.timestamps[k] - raw.timestamps[k - 1];
        if spacing != interval {
            return Err(TraceError::Irregular {
                line: raw.lines[k],
                spacing,
                expected: interval,
            });
        }
    }
    let mut data = Array2::zeros((n, N_FEATURES));
    for (k, row) in raw.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            data[[k, j]] = cell.ok_or_else(|| {
                parse_err(raw.lines[k], format!("missing value in column {}", raw.names[j]))
            })?;
        }
    }
    TraceFrame::new(raw.timestamps[0], interval as u64, raw.names, data)
}

fn open(path: &Path) -> Result<File, TraceError> {
    File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<TraceFrame, TraceError> {
    read_csv(open(path.as_ref())?)
}

pub fn ingest_csv_raw(path: impl AsRef<Path>) -> Result<RawTrace, TraceError> {
    read_csv_raw(open(path.as_ref())?)
}

/// Writes `frame` with its columns in their stored order. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv_to<W: Write>(frame: &TraceFrame, mut out: W) -> std::io::Result<()> {
    let mut line = String::from("timestamp");
    for n in frame.names() {
        line.push(',');
        line.push_str(n);
    }
    writeln!(out, "{line}")?;
    for (k, row) in frame.data().rows().into_iter().enumerate() {
        line.clear();
        line.push_str(&frame.timestamp(k).to_string());
        for v in row {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub fn write_csv(frame: &TraceFrame, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_csv_to(frame, BufWriter::new(file)).map_err(io)
}
