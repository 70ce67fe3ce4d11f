//! Run logs as CSV: one row per (record point, class).
//!
//! Reals are written with 9 significant digits in the style of C's `%.9g`;
//! undefined values (empty classes, no batch index, parameters a loss does
//! not have) are empty fields.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::trainer::{MetricsRecord, RunLog, StepKind};

pub const CSV_HEADER: &str = "step_kind,epoch,batch,fractional_epoch,class,mean_prob_subset,mean_prob_overall,accuracy,loss_name,gamma,cutoff,seed";

/// `%.9g`: fixed notation for decimal exponents in [-4, 9), scientific
/// otherwise, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

/// Streams records as they arrive; every call ends on a flushed, complete
/// record.
pub struct CsvRunWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvRunWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(CsvRunWriter { out })
    }

    pub fn write_record(&mut self, r: &MetricsRecord) -> Result<()> {
        let m = &r.metrics;
        let mut buf = String::new();
        for k in 0..m.mean_prob_overall.len() {
            let fields = [
                r.step_kind.as_str().to_string(),
                r.epoch.to_string(),
                r.batch.map(|b| b.to_string()).unwrap_or_default(),
                format_sig9(r.fractional_epoch),
                k.to_string(),
                opt(m.mean_prob_subset[k]),
                format_sig9(m.mean_prob_overall[k]),
                opt(m.accuracy[k]),
                r.loss.name().to_string(),
                opt(r.loss.gamma()),
                opt(r.loss.cutoff()),
                r.seed.to_string(),
            ];
            buf.push_str(&fields.join(","));
            buf.push('\n');
        }
        self.out.write_all(buf.as_bytes())?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_run_log<W: Write>(log: &RunLog, out: W) -> Result<()> {
    let mut w = CsvRunWriter::new(out)?;
    for r in &log.records {
        w.write_record(r)?;
    }
    Ok(())
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub step_kind: StepKind,
    pub epoch: usize,
    pub batch: Option<usize>,
    pub fractional_epoch: f64,
    pub class: usize,
    pub mean_prob_subset: Option<f64>,
    pub mean_prob_overall: f64,
    pub accuracy: Option<f64>,
    pub loss_name: String,
    pub gamma: Option<f64>,
    pub cutoff: Option<f64>,
    pub seed: u64,
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T> {
    s.parse()
        .map_err(|_| Error::format(format!("line {line}: bad {name} {s:?}")))
}

fn parse_opt<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, name, line).map(Some)
    }
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::format(format!("csv header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::format(format!("unexpected csv header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(format!("csv: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let step_kind = match &rec[0] {
            "init" => StepKind::Init,
            "batch" => StepKind::Batch,
            "epoch" => StepKind::Epoch,
            other => {
                return Err(Error::format(format!(
                    "line {line}: bad step_kind {other:?}"
                )))
            }
        };
        rows.push(CsvRow {
            step_kind,
            epoch: parse_field(&rec[1], "epoch", line)?,
            batch: parse_opt(&rec[2], "batch", line)?,
            fractional_epoch: parse_field(&rec[3], "fractional_epoch", line)?,
            class: parse_field(&rec[4], "class", line)?,
            mean_prob_subset: parse_opt(&rec[5], "mean_prob_subset", line)?,
            mean_prob_overall: parse_field(&rec[6], "mean_prob_overall", line)?,
            accuracy: parse_opt(&rec[7], "accuracy", line)?,
            loss_name: rec[8].to_string(),
            gamma: parse_opt(&rec[9], "gamma", line)?,
            cutoff: parse_opt(&rec[10], "cutoff", line)?,
            seed: parse_field(&rec[11], "seed", line)?,
        });
    }
    Ok(rows)
}
