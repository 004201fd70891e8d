use std::io::{Read, Write};

use super::{BenchError, BenchSample};

pub const CSV_COLUMNS: &str = "variant,precision,bytes,threads,reps,median_seconds,cycles_per_cl,gup_per_s";

/// Provenance written as `#` comment lines above the column header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub machine: String,
    pub frequency_ghz: f64,
    pub plan_digest: String,
    pub seed: u64,
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Csv(e.to_string())
}

pub fn write_csv<W: Write>(mut out: W, header: &CsvHeader, samples: &[BenchSample]) -> Result<(), BenchError> {
    writeln!(out, "# machine: {}", header.machine)?;
    writeln!(out, "# frequency_ghz: {}", header.frequency_ghz)?;
    writeln!(out, "# plan: {}", header.plan_digest)?;
    writeln!(out, "# seed: {}", header.seed)?;
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    if samples.is_empty() {
        w.write_record(CSV_COLUMNS.split(',')).map_err(csv_err)?;
    }
    for s in samples {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Samples from CSV text as written by [`write_csv`]; comment lines are
/// skipped and the column header must match exactly.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchSample>, BenchError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(input);
    let header = r.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_COLUMNS {
        return Err(BenchError::Csv(format!("unexpected header `{header}`")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
