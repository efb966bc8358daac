//! Whitespace-separated record files with `#` comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Calls `f(line_number, fields)` for every non-blank, non-comment line.
/// Line numbers are 1-based.
pub(crate) fn for_each_record<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, &[&str]) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        f(idx + 1, &fields)?;
    }
    Ok(())
}

pub(crate) fn field<T: FromStr>(
    path: &Path,
    line: usize,
    fields: &[&str],
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("`{raw}` is not a valid {name}")))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

pub(crate) fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = create(path)?;
    for line in lines {
        writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
