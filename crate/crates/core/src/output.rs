//! CSV diagnostics and PGM snapshot emitters. Floats are written as the
//! shortest decimal that parses back to the same bits; lines end in LF.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cho::{ChoRecord, ChoSink, ChoState, CHO_COLUMNS};
use crate::diagnostics::{DiagnosticsRecord, COLUMNS};
use crate::error::{Error, Result};
use crate::grid::{write_pgm, Field};
use crate::stepper::{SimState, Sink};

fn write_row(out: &mut impl Write, row: &[f64]) -> std::io::Result<()> {
    let mut line = String::with_capacity(24 * row.len());
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        line.push_str(&format!("{v:?}"));
    }
    line.push('\n');
    out.write_all(line.as_bytes())
}

fn write_header(out: &mut impl Write, columns: &[&str]) -> std::io::Result<()> {
    out.write_all(columns.join(",").as_bytes())?;
    out.write_all(b"\n")
}

pub fn encode_csv(records: &[DiagnosticsRecord]) -> String {
    let mut buf = Vec::new();
    write_header(&mut buf, &COLUMNS).expect("in-memory write");
    for r in records {
        write_row(&mut buf, &r.to_row()).expect("in-memory write");
    }
    String::from_utf8(buf).expect("ASCII output")
}

pub fn write_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    fs::write(path, encode_csv(records)).map_err(|e| Error::io(path, e))
}

/// Parses text produced by [`encode_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != COLUMNS.join(",") {
        return Err(Error::Validation(format!("unexpected CSV header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != COLUMNS.len() {
                return Err(Error::Validation(format!(
                    "CSV row {}: {} fields, expected {}",
                    k + 1,
                    fields.len(),
                    COLUMNS.len()
                )));
            }
            let mut row = [0.0; 22];
            for (slot, f) in row.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|e| {
                    Error::Validation(format!("CSV row {}: bad number {f:?}: {e}", k + 1))
                })?;
            }
            Ok(DiagnosticsRecord::from_row(&row))
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

struct CsvFile {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl CsvFile {
    fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write_header(&mut out, columns).map_err(|e| Error::io(path, e))?;
        Ok(CsvFile {
            path: path.to_path_buf(),
            out,
        })
    }

    fn row(&mut self, row: &[f64]) -> Result<()> {
        write_row(&mut self.out, row).map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn snapshot(dir: &Path, name: &str, step: usize, field: &Field, lo: f64, hi: f64) -> Result<()> {
    write_pgm(field, &dir.join(format!("{name}_{step:06}.pgm")), lo, hi)
}

/// Streams records to `diagnostics.csv` and snapshots to
/// `snapshots/<field>_<step>.pgm` under one directory.
pub struct CsvSink {
    csv: CsvFile,
    snapshot_dir: PathBuf,
    pub records: Vec<DiagnosticsRecord>,
}

impl CsvSink {
    pub fn create(dir: &Path) -> Result<Self> {
        let snapshot_dir = dir.join("snapshots");
        Ok(CsvSink {
            csv: CsvFile::create(&dir.join("diagnostics.csv"), &COLUMNS)?,
            snapshot_dir,
            records: Vec::new(),
        })
    }

    pub fn finish(mut self) -> Result<Vec<DiagnosticsRecord>> {
        self.csv.flush()?;
        Ok(self.records)
    }
}

impl Sink for CsvSink {
    fn on_output(&mut self, _state: &SimState, record: &DiagnosticsRecord) -> Result<()> {
        self.csv.row(&record.to_row())?;
        self.records.push(*record);
        Ok(())
    }

    fn on_snapshot(&mut self, state: &SimState) -> Result<()> {
        let dir = &self.snapshot_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n = state.step_index;
        snapshot(dir, "phi1", n, &state.phi[0], 0.0, 1.0)?;
        snapshot(dir, "phi2", n, &state.phi[1], 0.0, 1.0)?;
        snapshot(dir, "P", n, &state.p, 0.0, 1.0)?;
        snapshot(dir, "R1", n, &state.r[0], 0.0, 1.0)?;
        snapshot(dir, "R2", n, &state.r[1], 0.0, 1.0)
    }
}

/// CSV/PGM sink of the scalar model; `φ` is mapped from `[-1, 1]`.
pub struct ChoCsvSink {
    csv: CsvFile,
    snapshot_dir: PathBuf,
    pub records: Vec<ChoRecord>,
}

impl ChoCsvSink {
    pub fn create(dir: &Path) -> Result<Self> {
        Ok(ChoCsvSink {
            csv: CsvFile::create(&dir.join("diagnostics.csv"), &CHO_COLUMNS)?,
            snapshot_dir: dir.join("snapshots"),
            records: Vec::new(),
        })
    }

    pub fn finish(mut self) -> Result<Vec<ChoRecord>> {
        self.csv.flush()?;
        Ok(self.records)
    }
}

impl ChoSink for ChoCsvSink {
    fn on_output(&mut self, _state: &ChoState, record: &ChoRecord) -> Result<()> {
        self.csv.row(&record.to_row())?;
        self.records.push(*record);
        Ok(())
    }

    fn on_snapshot(&mut self, state: &ChoState) -> Result<()> {
        let dir = &self.snapshot_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        snapshot(dir, "phi", state.step_index, &state.phi, -1.0, 1.0)
    }
}
