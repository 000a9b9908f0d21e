//! Output records shared by the subcommands.

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};
use switchdetect::estimate::EstimationResult;
use switchdetect::harness::CalibrationEntry;
use switchdetect::multiclass::PeelingResult;
use switchdetect::multivariate::regression::CoefficientDetection;
use switchdetect::multivariate::VectorDetectionResult;
use switchdetect::DetectionResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Csv,
    Tsv,
    Json,
}

/// Ordered scalar fields plus an optional table of rows.
pub struct Report {
    kind: &'static str,
    fields: Vec<(String, Value)>,
    table_name: &'static str,
    table: Vec<Vec<(String, Value)>>,
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "NA".into(),
        other => other.to_string(),
    }
}

fn delimited(rows: &[Vec<String>], delimiter: u8) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
}

impl Report {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, fields: Vec::new(), table_name: "rows", table: Vec::new() }
    }

    pub fn push(&mut self, key: &str, v: f64) {
        self.fields.push((key.into(), num(v)));
    }

    pub fn push_int(&mut self, key: &str, v: usize) {
        self.fields.push((key.into(), Value::from(v)));
    }

    pub fn push_text(&mut self, key: &str, v: impl Into<String>) {
        self.fields.push((key.into(), Value::String(v.into())));
    }

    pub fn push_bool(&mut self, key: &str, v: bool) {
        self.fields.push((key.into(), Value::Bool(v)));
    }

    pub fn push_opt(&mut self, key: &str, v: Option<f64>) {
        self.fields.push((key.into(), v.map_or(Value::Null, num)));
    }

    fn row(&mut self, r: Vec<(&str, Value)>) {
        self.table.push(r.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
    }

    pub fn detection(r: &DetectionResult, source: &str, with_profile: bool) -> Self {
        let mut rep = Report::new("detection");
        rep.push_text("decision", r.decision.to_string());
        rep.push("j_stat", r.j_stat);
        rep.push("b_star_n", r.b_star_n);
        rep.push_int("n1", r.split_at_bstar.n1);
        rep.push_int("n2", r.split_at_bstar.n2);
        rep.push("threshold_c", r.threshold_c);
        rep.push_text("threshold_source", source);
        rep.push("theta", r.split_at_bstar.theta);
        if with_profile {
            rep.table_name = "profile";
            for p in &r.profile {
                rep.row(vec![("b", num(p.b)), ("psi", num(p.psi)), ("n1", Value::from(p.n1))]);
            }
        }
        rep
    }

    pub fn vector_detection(r: &VectorDetectionResult, source: &str, with_profile: bool) -> Self {
        let mut rep = Report::new("vector_detection");
        rep.push_text("decision", r.decision.to_string());
        rep.push("j_stat", r.j_stat);
        rep.push("b_star_n", r.b_star_n);
        rep.push_int("n1", r.split_at_bstar.n1);
        rep.push_int("n2", r.split_at_bstar.n2);
        rep.push("threshold_c", r.threshold_c);
        rep.push_text("threshold_source", source);
        for (j, t) in r.split_at_bstar.theta.iter().enumerate() {
            rep.push(&format!("theta_{j}"), *t);
        }
        if with_profile {
            rep.table_name = "profile";
            for p in &r.profile {
                let mut row: Vec<(String, Value)> =
                    vec![("b".into(), num(p.b)), ("norm".into(), num(p.norm)), ("n1".into(), Value::from(p.n1))];
                row.extend(p.psi.iter().enumerate().map(|(j, v)| (format!("psi_{j}"), num(*v))));
                rep.table.push(row);
            }
        }
        rep
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                let mut out: String =
                    self.fields.iter().map(|(k, v)| format!("{k:<width$}  {}\n", text(v))).collect();
                if !self.table.is_empty() {
                    out.push('\n');
                    let header: Vec<&str> = self.table[0].iter().map(|(k, _)| k.as_str()).collect();
                    out.push_str(&header.join("\t"));
                    out.push('\n');
                    for r in &self.table {
                        let cells: Vec<String> = r.iter().map(|(_, v)| text(v)).collect();
                        out.push_str(&cells.join("\t"));
                        out.push('\n');
                    }
                }
                out
            }
            Format::Csv | Format::Tsv => {
                let d = if format == Format::Csv { b',' } else { b'\t' };
                let mut out = delimited(
                    &[
                        self.fields.iter().map(|(k, _)| k.clone()).collect(),
                        self.fields.iter().map(|(_, v)| text(v)).collect(),
                    ],
                    d,
                );
                if !self.table.is_empty() {
                    out.push('\n');
                    let mut rows = vec![self.table[0].iter().map(|(k, _)| k.clone()).collect::<Vec<_>>()];
                    rows.extend(self.table.iter().map(|r| r.iter().map(|(_, v)| text(v)).collect()));
                    out.push_str(&delimited(&rows, d));
                }
                out
            }
            Format::Json => {
                let mut obj = Map::new();
                obj.insert("kind".into(), Value::String(self.kind.into()));
                for (k, v) in &self.fields {
                    obj.insert(k.clone(), v.clone());
                }
                if !self.table.is_empty() {
                    let rows = self.table.iter().map(|r| Value::Object(r.iter().cloned().collect())).collect();
                    obj.insert(self.table_name.into(), Value::Array(rows));
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("plain values");
                s.push('\n');
                s
            }
        }
    }
}

pub fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain values");
    s.push('\n');
    s
}

pub fn regression(per: &[CoefficientDetection], sources: &[String]) -> Report {
    let mut rep = Report::new("regression_detection");
    rep.push_int("coefficients", per.len());
    rep.push_bool("any_rejected", per.iter().any(|c| c.result.decision.rejects()));
    rep.table_name = "coefficients";
    for (c, src) in per.iter().zip(sources) {
        rep.row(vec![
            ("coefficient", Value::from(c.coefficient)),
            ("decision", Value::String(c.result.decision.to_string())),
            ("j_stat", num(c.result.j_stat)),
            ("b_star_n", num(c.result.b_star_n)),
            ("n1", Value::from(c.result.split_at_bstar.n1)),
            ("n2", Value::from(c.result.split_at_bstar.n2)),
            ("threshold_c", num(c.result.threshold_c)),
            ("theta", num(c.result.split_at_bstar.theta)),
            ("eps_hat", num(c.eps_hat)),
            ("threshold_source", Value::String(src.clone())),
        ]);
    }
    rep
}

pub fn peeling(r: &PeelingResult, source: &str) -> Report {
    let mut rep = Report::new("peeling");
    rep.push_int("classes", r.class_count());
    rep.push_int("iterations", r.iterations);
    rep.push_text("stop", format!("{:?}", r.stop));
    rep.push_text("threshold_source", source);
    rep.table_name = "classes";
    for (i, class) in r.classes.iter().enumerate() {
        let step = r.per_iteration.get(i);
        rep.row(vec![
            ("class", Value::from(i)),
            ("size", Value::from(class.len())),
            ("j_stat", step.map_or(Value::Null, |d| num(d.j_stat))),
            ("b_star_n", step.map_or(Value::Null, |d| num(d.b_star_n))),
            ("theta", step.map_or(Value::Null, |d| num(d.split_at_bstar.theta))),
        ]);
    }
    rep
}

pub fn estimation(det: &DetectionResult, est: Option<&EstimationResult>, source: &str) -> Report {
    let mut rep = Report::detection(det, source, false);
    rep.kind = "estimation";
    match est {
        None => {
            rep.push_opt("eps_nonpar", None);
            rep.push_opt("h_nonpar", None);
        }
        Some(e) => {
            rep.push("eps_nonpar", e.eps_nonpar);
            rep.push_opt("h_nonpar", e.h_nonpar);
            if let Some(c) = &e.consistent {
                rep.push("eps_consistent", c.eps_hat);
                rep.push("h_consistent", c.h_hat);
                rep.push("residual", c.residual);
                rep.push_bool("multiple_roots", c.multiple_roots);
            }
            if let Some(msg) = &e.consistent_error {
                rep.push_text("consistent_error", msg.clone());
            }
        }
    }
    rep
}

pub fn calibration(fingerprint: &str, entries: &[(CalibrationEntry, Option<bool>)]) -> Report {
    let mut rep = Report::new("calibration");
    rep.push_text("fingerprint", fingerprint);
    rep.table_name = "entries";
    for (e, added) in entries {
        let stored = match added {
            None => "not stored",
            Some(true) => "added",
            Some(false) => "already present",
        };
        rep.row(vec![
            ("n", Value::from(e.n)),
            ("p", num(e.p)),
            ("c", num(e.c)),
            ("trials", Value::from(e.trials)),
            ("seed", Value::from(e.seed)),
            ("store", Value::String(stored.into())),
        ]);
    }
    rep
}
