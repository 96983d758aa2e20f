use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Counts, Metrics, MetricsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Evaluated frames.
    pub n: usize,
    pub counts: Counts,
}

/// Per-sequence rows plus a micro-averaged total from the summed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

impl Report {
    pub fn new(rows: Vec<ReportRow>) -> Result<Self, MetricsError> {
        if rows.is_empty() {
            return Err(MetricsError::EmptyReport);
        }
        Ok(Self { rows })
    }

    pub fn total(&self) -> ReportRow {
        ReportRow {
            name: "total".into(),
            n: self.rows.iter().map(|r| r.n).sum(),
            counts: self.rows.iter().map(|r| r.counts).sum(),
        }
    }

    pub fn total_metrics(&self) -> Metrics {
        self.total().counts.metrics()
    }

    fn cells(row: &ReportRow) -> [String; 8] {
        let m = row.counts.metrics();
        [
            row.name.clone(),
            row.n.to_string(),
            row.counts.tp.to_string(),
            row.counts.fp.to_string(),
            row.counts.fn_.to_string(),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1),
        ]
    }

    const HEADER: [&'static str; 8] = ["sequence", "n", "TP", "FP", "FN", "Pr.", "Rec.", "F1"];

    /// Aligned text table; the total row is separated by a rule.
    pub fn to_text(&self) -> String {
        let mut body: Vec<[String; 8]> = self.rows.iter().map(Self::cells).collect();
        body.push(Self::cells(&self.total()));
        let mut widths = Self::HEADER.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.push('\n');
            s
        };
        let mut out = line(&Self::HEADER.map(String::from));
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        out.push_str(&rule);
        out.push('\n');
        let (total, rows) = body.split_last().expect("total row");
        for r in rows {
            out.push_str(&line(r));
        }
        out.push_str(&rule);
        out.push('\n');
        out.push_str(&line(total));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sequence,n,tp,fp,fn,precision,recall,f1\n");
        for r in self.rows.iter().cloned().chain([self.total()]) {
            let c = Self::cells(&r);
            let name = if c[0].contains([',', '"']) { format!("\"{}\"", c[0].replace('"', "\"\"")) } else { c[0].clone() };
            let _ = writeln!(out, "{name},{}", c[1..].join(","));
        }
        out
    }
}
