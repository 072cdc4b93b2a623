//! Loss CSV files: a `loss` header, then one positive decimal per line.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const HEADER: &str = "loss";

pub fn read_losses<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("line 1: empty loss file".into()))??;
    let header = header.trim_start_matches('\u{feff}').trim();
    if header != HEADER {
        return Err(Error::Parse(format!("line 1: expected header `{HEADER}`, found `{header}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let x: f64 = cell.parse().map_err(|_| Error::Parse(format!("line {lineno}: `{cell}` is not a number")))?;
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Parse(format!("line {lineno}: loss must be positive and finite, got `{cell}`")));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::Parse("loss file has no data rows".into()));
    }
    Ok(out)
}

pub fn write_losses<W: Write>(mut w: W, losses: &[f64]) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for x in losses {
        writeln!(w, "{x:?}")?;
    }
    Ok(())
}
