use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use landau_core::diagnostics::DiagnosticRecord;

use crate::Failure;

pub const NDJSON: &str = "diagnostics.ndjson";
pub const CSV: &str = "diagnostics.csv";
pub const FINAL_CHECKPOINT: &str = "final.lndk";

pub fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("checkpoint_{index:04}.lndk"))
}

pub fn write_line<W: Write, T: serde::Serialize + ?Sized>(out: &mut W, value: &T) -> Result<(), Failure> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DiagnosticRecord>, Failure> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Drops lines after `t_max`, so a resumed run appends where its checkpoint left off.
pub fn truncate_after(path: &Path, t_max: f64) -> Result<(), Failure> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path)?;
    let mut kept = String::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let r: DiagnosticRecord = serde_json::from_str(line)?;
        if r.t <= t_max + 1e-12 {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept)?;
    Ok(())
}

/// CSV derived from the NDJSON stream; vector fields expand to indexed columns.
pub fn ndjson_to_csv(src: &Path, dst: &Path) -> Result<(), Failure> {
    let records = read_records(src)?;
    let mut w = csv::Writer::from_path(dst)?;
    if let Some(first) = records.first() {
        w.write_record(first.csv_header())?;
    }
    for r in &records {
        w.write_record(r.csv_row().iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}
