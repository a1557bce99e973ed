//! Text formats for series, annotations, scores, reports and labeled pools.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! back gives bit-identical values, and identical inputs give identical
//! bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nncpd_core::datagen::LabeledPool;
use nncpd_core::{Annotation, DetectionResult, EvalReport, TimeSeries};

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::parse(path, line, err.to_string())
}

fn parse_value(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse `{field}` as a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite value `{field}`")));
    }
    Ok(v)
}

fn parse_time(path: &Path, line: u64, field: &str) -> Result<i64> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse `{field}` as an integer time")))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a series CSV. With a leading `t` column the first `t` becomes the
/// start index and times must advance by exactly one; without it rows are
/// numbered from 1.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_from(file, path)
}

/// [`read_series`] over any reader; `origin` only labels errors.
pub fn read_series_from<R: Read>(reader: R, origin: &Path) -> Result<TimeSeries> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(origin, e))?.clone();
    let has_time = headers.get(0) == Some("t");
    let dim = headers.len() - usize::from(has_time);
    if dim == 0 {
        return Err(Error::parse(origin, 1, "header has no value columns"));
    }

    let mut values = Vec::new();
    let mut start = None;
    let mut prev_t = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fields = record.iter();
        if has_time {
            let t = parse_time(origin, line, fields.next().unwrap_or(""))?;
            if let Some(p) = prev_t {
                if t != p + 1 {
                    return Err(Error::parse(
                        origin,
                        line,
                        format!("t must advance by 1 (got {t} after {p})"),
                    ));
                }
            }
            start.get_or_insert(t);
            prev_t = Some(t);
        }
        for field in fields {
            values.push(parse_value(origin, line, field)?);
        }
    }
    if values.is_empty() {
        return Err(Error::parse(origin, 1, "no observations"));
    }
    Ok(TimeSeries::new(values, dim, start.unwrap_or(1))?)
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(format_series(series).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn format_series(series: &TimeSeries) -> String {
    let mut out = String::from("t");
    for c in 1..=series.dim() {
        let _ = write!(out, ",x{c}");
    }
    out.push('\n');
    for (i, row) in series.rows().enumerate() {
        let _ = write!(out, "{}", series.start_index() + i as i64);
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// One change point per line, strictly increasing. Blank lines and `#`
/// comments are ignored.
pub fn read_annotation(path: &Path) -> Result<Annotation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotation(&text, path)
}

pub fn parse_annotation(text: &str, origin: &Path) -> Result<Annotation> {
    let mut cps: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let c = parse_time(origin, i as u64 + 1, line)?;
        if let Some(&p) = cps.last() {
            if c <= p {
                return Err(Error::parse(
                    origin,
                    i as u64 + 1,
                    format!("change points must be strictly increasing ({c} after {p})"),
                ));
            }
        }
        cps.push(c);
    }
    Ok(Annotation::new(cps)?)
}

pub fn write_annotation(path: &Path, cps: &[i64]) -> Result<()> {
    let mut w = create(path)?;
    for c in cps {
        writeln!(w, "{c}").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// One line of a score file. Fields that do not exist at `t` are `None`
/// and written empty.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub t: i64,
    pub d_raw: Option<f64>,
    pub d_bar: Option<f64>,
    pub d_bar_shifted: Option<f64>,
    pub is_detection: bool,
}

impl ScoreRow {
    fn empty(t: i64) -> Self {
        Self {
            t,
            d_raw: None,
            d_bar: None,
            d_bar_shifted: None,
            is_detection: false,
        }
    }
}

pub const SCORE_HEADER: &str = "t,d_raw,d_bar,d_bar_shifted,is_detection";

/// Lays the raw and smoothed scores (at processing times) and the shifted
/// score (at `t - l - n`) on one grid.
pub fn score_rows(result: &DetectionResult) -> Vec<ScoreRow> {
    let score = &result.score;
    let mut rows: BTreeMap<i64, ScoreRow> = BTreeMap::new();
    for ((&t, &raw), &bar) in score.times().iter().zip(score.raw()).zip(score.smoothed()) {
        let row = rows.entry(t).or_insert_with(|| ScoreRow::empty(t));
        row.d_raw = Some(raw);
        row.d_bar = Some(bar);
    }
    if score.is_shifted() {
        for (t, &v) in score.shifted_times().zip(score.shifted()) {
            rows.entry(t).or_insert_with(|| ScoreRow::empty(t)).d_bar_shifted = Some(v);
        }
    }
    for &c in &result.detected {
        rows.entry(c).or_insert_with(|| ScoreRow::empty(c)).is_detection = true;
    }
    rows.into_values().collect()
}

pub fn format_scores(rows: &[ScoreRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(SCORE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            opt(r.d_raw),
            opt(r.d_bar),
            opt(r.d_bar_shifted),
            u8::from(r.is_detection)
        );
    }
    out
}

pub fn write_scores(path: &Path, result: &DetectionResult) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(format_scores(&score_rows(result)).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores_from(file, path)
}

pub fn read_scores_from<R: Read>(reader: R, origin: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(origin, e))?;
    if headers.iter().collect::<Vec<_>>().join(",") != SCORE_HEADER {
        return Err(Error::parse(origin, 1, format!("expected header `{SCORE_HEADER}`")));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let opt = |i: usize| -> Result<Option<f64>> {
            match &record[i] {
                "" => Ok(None),
                s => parse_value(origin, line, s).map(Some),
            }
        };
        let is_detection = match &record[4] {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(origin, line, format!("is_detection must be 0 or 1, got `{other}`"))),
        };
        rows.push(ScoreRow {
            t: parse_time(origin, line, &record[0])?,
            d_raw: opt(1)?,
            d_bar: opt(2)?,
            d_bar_shifted: opt(3)?,
            is_detection,
        });
    }
    Ok(rows)
}

/// Positions flagged as detections.
pub fn detections(rows: &[ScoreRow]) -> Vec<i64> {
    rows.iter().filter(|r| r.is_detection).map(|r| r.t).collect()
}

const REPORT_FIELDS: &str = "margin,n_true,n_detected,tp_count,precision,recall,f1,rand_index";

/// `key=value` lines followed by a commented CSV header and one CSV row.
pub fn format_report(report: &EvalReport) -> String {
    let pairs: Vec<String> = report.pairs.iter().map(|(t, d)| format!("{t}:{d}")).collect();
    let mut out = String::new();
    let _ = writeln!(out, "margin={}", report.margin);
    let _ = writeln!(out, "n_true={}", report.n_true);
    let _ = writeln!(out, "n_detected={}", report.n_detected);
    let _ = writeln!(out, "tp_count={}", report.tp_count);
    let _ = writeln!(out, "precision={}", fmt_f64(report.precision));
    let _ = writeln!(out, "recall={}", fmt_f64(report.recall));
    let _ = writeln!(out, "f1={}", fmt_f64(report.f1));
    let _ = writeln!(out, "rand_index={}", fmt_f64(report.rand_index));
    let _ = writeln!(out, "pairs={}", pairs.join(";"));
    let _ = writeln!(out, "# {REPORT_FIELDS}");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        report.margin,
        report.n_true,
        report.n_detected,
        report.tp_count,
        fmt_f64(report.precision),
        fmt_f64(report.recall),
        fmt_f64(report.f1),
        fmt_f64(report.rand_index)
    );
    out
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    fs::write(path, format_report(report)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text, path)
}

pub fn parse_report(text: &str, origin: &Path) -> Result<EvalReport> {
    let mut kv: BTreeMap<&str, (u64, &str)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim(), (i as u64 + 1, v.trim()));
        }
    }
    let get = |key: &str| {
        kv.get(key)
            .copied()
            .ok_or_else(|| Error::Format {
                path: origin.into(),
                msg: format!("missing key `{key}`"),
            })
    };
    let int = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse().map_err(|_| Error::parse(origin, line, format!("`{key}` must be an integer")))
    };
    let real = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        parse_value(origin, line, v)
    };
    let (pairs_line, pairs_text) = get("pairs")?;
    let mut pairs = Vec::new();
    for item in pairs_text.split(';').filter(|s| !s.is_empty()) {
        let (t, d) = item
            .split_once(':')
            .ok_or_else(|| Error::parse(origin, pairs_line, format!("bad pair `{item}`")))?;
        pairs.push((parse_time(origin, pairs_line, t)?, parse_time(origin, pairs_line, d)?));
    }
    Ok(EvalReport {
        margin: int("margin")?,
        n_true: int("n_true")?,
        n_detected: int("n_detected")?,
        tp_count: int("tp_count")?,
        precision: real("precision")?,
        recall: real("recall")?,
        f1: real("f1")?,
        rand_index: real("rand_index")?,
        pairs,
    })
}

/// Labeled feature table for class-alternation series: header
/// `label,f1,...,fd`, label `1` for the positive class and `0` otherwise.
pub fn read_pool(path: &Path) -> Result<LabeledPool> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv_reader(file);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    if headers.get(0) != Some("label") || headers.len() < 2 {
        return Err(Error::parse(path, 1, "expected header `label,f1,...`"));
    }
    let mut pool = LabeledPool::new(headers.len() - 1);
    let mut features = Vec::with_capacity(headers.len() - 1);
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let positive = match &record[0] {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(path, line, format!("label must be 0 or 1, got `{other}`"))),
        };
        features.clear();
        for field in record.iter().skip(1) {
            features.push(parse_value(path, line, field)?);
        }
        pool.push(&features, positive)?;
    }
    Ok(pool)
}
