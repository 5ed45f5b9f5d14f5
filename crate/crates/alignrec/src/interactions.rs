//! Tab-separated interaction logs: `user<TAB>item<TAB>timestamp`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use alignrec_core::{CoreError, Interaction, RawInteractions};

use crate::error::{Error, Result};

/// Parses a log. Blank lines and lines starting with `#` are skipped;
/// duplicate pairs keep their earliest timestamp.
pub fn parse_interactions(path: &Path, text: &str) -> Result<RawInteractions> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err("empty user or item key".into()));
        }
        let ts: u64 = fields[2].trim().parse().map_err(|_| {
            parse_err(format!(
                "timestamp {:?} is not a non-negative integer",
                fields[2]
            ))
        })?;
        records.push(Interaction::new(fields[0], fields[1], ts));
    }
    if records.is_empty() {
        return Err(
            CoreError::EmptyInput(format!("{} has no interactions", path.display())).into(),
        );
    }
    Ok(RawInteractions::from_records(records))
}

pub fn load_interactions(path: &Path) -> Result<RawInteractions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(path, &text)
}

pub fn format_interactions(raw: &RawInteractions) -> String {
    let mut out = String::new();
    for r in raw.records() {
        writeln!(out, "{}\t{}\t{}", r.user, r.item, r.timestamp).expect("writing to a String");
    }
    out
}

pub fn write_interactions(path: &Path, raw: &RawInteractions) -> Result<()> {
    fs::write(path, format_interactions(raw)).map_err(|e| Error::io(path, e))
}
