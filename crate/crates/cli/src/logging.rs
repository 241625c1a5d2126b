//! Structured run logs.
//!
//! Every artifact is deterministic: the run id is a hash of the effective
//! configuration and command rather than a timestamp, so identical runs
//! produce identical bytes. Floats are written in their shortest
//! round-trip decimal form.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use edl_core::evolve::GenerationRecord;
use edl_core::Result;

/// 64-bit FNV-1a over the canonical run description.
pub fn run_id(parts: &[&str]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for byte in part.as_bytes().iter().chain(b"\x1f") {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{hash:016x}")
}

/// One log line: the generation record tagged with schema and run id.
#[derive(Serialize)]
struct RunLogRow<'a> {
    schema_version: u32,
    run_id: &'a str,
    #[serde(flatten)]
    record: &'a GenerationRecord,
}

/// Append-only JSONL writer for generation records.
pub struct JsonlLog {
    out: BufWriter<File>,
    run_id: String,
    rows: usize,
}

impl JsonlLog {
    pub fn create(path: &Path, run_id: &str) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            run_id: run_id.to_string(),
            rows: 0,
        })
    }

    pub fn push(&mut self, record: &GenerationRecord) -> Result<()> {
        let row = RunLogRow {
            schema_version: crate::config::SCHEMA_VERSION,
            run_id: &self.run_id,
            record,
        };
        serde_json::to_writer(&mut self.out, &row)?;
        self.out.write_all(b"\n")?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush()?;
        Ok(self.rows)
    }
}

/// Render an optional float as a CSV cell; `None` stays empty.
fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const GENERATION_CSV_HEADER: &str = "generation,sigma,best_fitness,mean_fitness,\
best_accuracy,mean_accuracy,val_fitness,val_accuracy,global_best_fitness,\
refill_attempts,chaos_min,chaos_mean,chaos_max,chaos_reseeds";

pub fn generation_csv_row(r: &GenerationRecord) -> String {
    let mut line = String::new();
    let _ = write!(
        line,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.generation,
        r.sigma,
        r.best_fitness,
        r.mean_fitness,
        r.best_accuracy,
        r.mean_accuracy,
        r.val_fitness,
        r.val_accuracy,
        r.global_best_fitness,
        r.refill_attempts,
        opt_cell(r.chaos_min),
        opt_cell(r.chaos_mean),
        opt_cell(r.chaos_max),
        r.chaos_reseeds
    );
    line
}

/// Write a whole CSV file at once: header plus one row per record.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> GenerationRecord {
        GenerationRecord {
            generation: 3,
            sigma: 0.2,
            best_fitness: 0.5,
            mean_fitness: 0.625,
            best_accuracy: 0.75,
            mean_accuracy: 0.5,
            val_fitness: 0.51,
            val_accuracy: 0.74,
            global_best_fitness: 0.5,
            refill_attempts: 9,
            chaos_min: Some(0.125),
            chaos_mean: Some(0.5),
            chaos_max: Some(0.875),
            chaos_reseeds: 0,
        }
    }

    #[test]
    fn run_ids_are_stable_and_sensitive() {
        let a = run_id(&["pretrain", "cfg", "1"]);
        let b = run_id(&["pretrain", "cfg", "1"]);
        let c = run_id(&["pretrain", "cfg", "2"]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
        // Separator prevents concatenation collisions.
        assert_ne!(run_id(&["ab", "c"]), run_id(&["a", "bc"]));
    }

    #[test]
    fn jsonl_rows_are_valid_json_with_schema_and_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut log = JsonlLog::create(&path, "deadbeefdeadbeef").unwrap();
        log.push(&record()).unwrap();
        log.push(&record()).unwrap();
        assert_eq!(log.finish().unwrap(), 2);

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["schema_version"], 1);
            assert_eq!(v["run_id"], "deadbeefdeadbeef");
            assert_eq!(v["generation"], 3);
            assert_eq!(v["chaos_max"], 0.875);
        }
    }

    #[test]
    fn csv_rows_keep_full_precision_and_empty_optionals() {
        let mut r = record();
        r.best_fitness = 0.1 + 0.2;
        r.chaos_min = None;
        r.chaos_mean = None;
        r.chaos_max = None;
        let row = generation_csv_row(&r);
        assert!(row.contains("0.30000000000000004"));
        assert!(row.ends_with(",,,,0"), "{row}");
        assert_eq!(
            GENERATION_CSV_HEADER.split(',').count(),
            row.split(',').count()
        );
    }
}
