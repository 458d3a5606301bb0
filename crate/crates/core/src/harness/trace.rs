use std::fs::File;
use std::path::Path;

use crate::error::Result;
use crate::solver::TraceRecord;

pub const TRACE_HEADER: &str = "outer_iter,grad_norm,inner_iters_cum,rounds_cum,bytes_cum,wall_ms";

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in records {
        w.serialize(r)?;
    }
    // An empty trace still gets its header.
    if records.is_empty() {
        w.write_record(TRACE_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
