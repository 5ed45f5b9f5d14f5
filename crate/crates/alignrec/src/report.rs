//! Text renderings of evaluation reports and training-log records.
//!
//! Floats use Rust's shortest round-trip formatting, so equal values always
//! produce equal text.

use std::fmt::Write as _;

use alignrec_core::trainer::EpochRecord;
use alignrec_core::{EvalReport, Slice};

pub fn slice_name(s: Slice) -> &'static str {
    match s {
        Slice::Full => "full",
        Slice::LongTail => "long-tail",
    }
}

/// `(key, value)` pairs describing a report, tags first.
pub fn report_fields(tags: &[(&str, String)], r: &EvalReport) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = tags
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    out.push(("slice".into(), slice_name(r.slice).into()));
    out.push(("users".into(), r.users_evaluated.to_string()));
    out.push(("skipped".into(), r.skipped.to_string()));
    for m in &r.metrics {
        out.push((format!("recall@{}", m.k), m.recall.to_string()));
    }
    for m in &r.metrics {
        out.push((format!("ndcg@{}", m.k), m.ndcg.to_string()));
    }
    out
}

/// One `key=value` per line.
pub fn report_block(tags: &[(&str, String)], r: &EvalReport) -> String {
    let mut s = String::new();
    for (k, v) in report_fields(tags, r) {
        writeln!(s, "{k}={v}").expect("writing to a String");
    }
    s
}

/// All fields on one space-separated line, prefixed with `report`.
pub fn report_line(tags: &[(&str, String)], r: &EvalReport) -> String {
    let mut s = String::from("report");
    for (k, v) in report_fields(tags, r) {
        write!(s, " {k}={v}").expect("writing to a String");
    }
    s
}

pub fn epoch_line(r: &EpochRecord) -> String {
    let s = &r.stats;
    format!(
        "epoch={} lr={} batches={} loss={} bpr={} cca={} uia={} reg={} degenerate={} val_recall@20={} val_ndcg@20={} improved={}",
        s.epoch,
        s.learning_rate,
        s.batches,
        s.total,
        s.components.bpr,
        s.components.cca,
        s.components.uia,
        s.components.reg,
        s.degenerate,
        r.val_recall,
        r.val_ndcg,
        r.improved
    )
}
