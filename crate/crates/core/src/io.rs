//! File formats: trajectory and sweep CSV, and atomic output writes.
//!
//! Reals are written in their shortest round-trip decimal form, so reading a
//! file back reproduces every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::lorenz::State3;
use crate::pipeline::SweepRow;

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "x", "y", "z"];
pub const SWEEP_HEADER: [&str; 7] = ["ic_x", "ic_y", "ic_z", "variant", "mode", "destiny", "settle_time"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("CSV is empty")]
    Empty,
    #[error("bad CSV header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("malformed CSV at row {row}: {detail}")]
    Row { row: u64, detail: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Shortest decimal that parses back to exactly `x`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// The recorded samples of a trajectory, as stored on disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub states: Vec<State3>,
}

impl TrajectoryTable {
    pub fn new(times: Vec<f64>, states: Vec<State3>) -> Self {
        assert_eq!(times.len(), states.len(), "one state per time");
        TrajectoryTable { times, states }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn write_trajectory_csv<W: Write>(out: W, times: &[f64], states: &[State3]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for (t, s) in times.iter().zip(states) {
        w.write_record([format_real(*t), format_real(s.x), format_real(s.y), format_real(s.z)])?;
    }
    w.flush().map_err(|source| IoError::File { path: "<csv>".into(), source })?;
    Ok(())
}

pub fn trajectory_csv_string(times: &[f64], states: &[State3]) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, times, states).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Parses a trajectory CSV. Row numbers in errors count the header as row 1.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable, IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        None => return Err(IoError::Empty),
        Some(h) => h.map_err(|e| IoError::Row { row: 1, detail: e.to_string() })?,
    };
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(IoError::Header {
            found: header.iter().map(str::to_owned).collect(),
            expected: TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut table = TrajectoryTable::default();
    for (i, rec) in records.enumerate() {
        let row = i as u64 + 2;
        let rec = rec.map_err(|e| IoError::Row { row, detail: e.to_string() })?;
        if rec.len() != 4 {
            return Err(IoError::Row { row, detail: format!("expected 4 fields, found {}", rec.len()) });
        }
        let mut v = [0.0; 4];
        for (slot, (field, name)) in v.iter_mut().zip(rec.iter().zip(TRAJECTORY_HEADER)) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| IoError::Row { row, detail: format!("{name} = {field:?} is not a number") })?;
        }
        table.times.push(v[0]);
        table.states.push(State3::new(v[1], v[2], v[3]));
    }
    if table.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(table)
}

pub fn read_trajectory_file(path: &Path) -> Result<TrajectoryTable, IoError> {
    let f = std::fs::File::open(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    read_trajectory_csv(f)
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            format_real(r.ic.x),
            format_real(r.ic.y),
            format_real(r.ic.z),
            r.variant.to_string(),
            r.mode.to_string(),
            r.destiny.as_str().to_owned(),
            format_real(r.settle_time.unwrap_or(f64::INFINITY)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is ASCII")
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |source| IoError::File { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
