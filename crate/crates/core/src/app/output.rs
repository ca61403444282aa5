//! Series CSV and snapshot persistence.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::evolve::Observer;
use crate::functionals::{DiagnosticsRow, CSV_HEADER};
use crate::state::{SimState, Snapshot};

/// CSV writer that flushes after every row, so a crashed run leaves a valid prefix.
pub struct SeriesWriter {
    out: BufWriter<File>,
    rows: usize,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out, rows: 0 })
    }

    pub fn push(&mut self, row: &DiagnosticsRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

pub fn write_snapshot(path: &Path, state: &SimState) -> Result<()> {
    fs::write(path, Snapshot::of(state).to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&fs::read(path)?)
}

pub fn snapshot_path(dir: &Path, sample: usize) -> PathBuf {
    dir.join(format!("snapshot_{sample:05}.pkns"))
}

/// Run observer that streams rows to CSV and writes periodic snapshots.
pub struct RunRecorder {
    series: Option<SeriesWriter>,
    snapshots: Option<(PathBuf, usize)>,
    samples: usize,
    pub written: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn new(series: Option<&Path>, snapshot_dir: Option<&Path>, every: usize) -> Result<Self> {
        let series = series.map(SeriesWriter::create).transpose()?;
        let snapshots = match snapshot_dir {
            Some(dir) if every > 0 => {
                fs::create_dir_all(dir)?;
                Some((dir.to_path_buf(), every))
            }
            _ => None,
        };
        Ok(Self { series, snapshots, samples: 0, written: Vec::new() })
    }
}

impl Observer for RunRecorder {
    fn sample(&mut self, state: &SimState, row: &DiagnosticsRow) -> Result<()> {
        if let Some(w) = &mut self.series {
            w.push(row)?;
        }
        if let Some((dir, every)) = &self.snapshots {
            if self.samples.is_multiple_of(*every) {
                let p = snapshot_path(dir, self.samples);
                write_snapshot(&p, state)?;
                self.written.push(p);
            }
        }
        self.samples += 1;
        Ok(())
    }
}
