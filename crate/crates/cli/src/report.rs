//! Run reports and their JSON and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qfhe_core::qhe::{NoiseRow, RefreshEvent};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub label: String,
    pub rule: String,
    pub increment: f64,
    pub running: f64,
}

impl From<&NoiseRow> for LedgerRow {
    fn from(r: &NoiseRow) -> Self {
        let rule = if r.label == "BellPrep" { "fresh σ" } else { "∥τ∥max·σ" };
        Self { label: r.label.clone(), rule: rule.into(), increment: r.increment, running: r.running }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub preset: String,
    pub sigma: u32,
    pub seed: String,
    pub noise_ledger: Vec<LedgerRow>,
    pub refresh_events: Vec<RefreshEvent>,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    /// Command-specific results. Keys serialize sorted.
    pub results: Value,
    /// Tables rendered in text mode: (title, header, rows).
    pub tables: Vec<Table>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, header: &[&str]) -> Self {
        Self { title: title.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

impl RunReport {
    pub fn new(command: &str, preset: &str, sigma: u32, seed: &str) -> Self {
        Self {
            command: command.into(),
            preset: preset.into(),
            sigma,
            seed: seed.into(),
            results: Value::Object(Default::default()),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("report values serialize");
        if let Value::Object(m) = &mut self.results {
            m.insert(key.into(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.results.get(key)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    Json,
    Text,
}

pub fn render_report(r: &RunReport, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s.into_bytes()
        }
        RenderFormat::Text => render_text(r).into_bytes(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

fn render_table(out: &mut String, t: &Table) {
    let widths: Vec<usize> = (0..t.header.len())
        .map(|i| t.rows.iter().map(|r| r.get(i).map_or(0, |c| c.chars().count())).chain([t.header[i].chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("  {}", padded.join("  ").trim_end())
    };
    let _ = writeln!(out, "{}", t.title);
    let _ = writeln!(out, "{}", line(&t.header));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", line(&rule));
    for r in &t.rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
}

fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} (preset {}, σ = {}, seed {})\n", r.command, r.preset, r.sigma, r.seed);
    if !r.noise_ledger.is_empty() {
        let mut t = Table::new("noise ledger", &["op", "rule", "increment", "running"]);
        for row in &r.noise_ledger {
            t.row(vec![row.label.clone(), row.rule.clone(), format!("{:+}", row.increment), format!("{}", row.running)]);
        }
        render_table(&mut out, &t);
    }
    for t in &r.tables {
        render_table(&mut out, t);
    }
    if !r.refresh_events.is_empty() {
        let mut t = Table::new("refresh events", &["gate", "reason", "before", "after", "level"]);
        for e in &r.refresh_events {
            t.row(vec![
                e.gate_index.to_string(),
                format!("{:?}", e.reason).to_lowercase(),
                format!("{:.1}", e.tracker_before),
                format!("{:.1}", e.tracker_after),
                e.level.to_string(),
            ]);
        }
        render_table(&mut out, &t);
    }
    if let Value::Object(m) = &r.results {
        if !m.is_empty() {
            let _ = writeln!(out, "results");
            let w = m.keys().map(|k| k.chars().count()).max().unwrap_or(0);
            for (k, v) in m {
                let _ = writeln!(out, "  {k:<w$}  {}", cell(v));
            }
            out.push('\n');
        }
    }
    for (name, secs) in &r.timings {
        let _ = writeln!(out, "time {name}: {secs:.3} s");
    }
    for p in &r.outputs {
        let _ = writeln!(out, "wrote {p}");
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::new("demo", "toy", 3, "00");
        r.set("zeta", 1.5);
        r.set("alpha", "x");
        let mut t = Table::new("t", &["a", "bb"]);
        t.row(vec!["1".into(), "22".into()]);
        r.tables.push(t);
        r.notes.push("n".into());
        r
    }

    #[test]
    fn rendering_is_stable() {
        let r = sample();
        assert_eq!(render_report(&r, RenderFormat::Json), render_report(&r, RenderFormat::Json));
        assert_eq!(render_report(&r, RenderFormat::Text), render_report(&r, RenderFormat::Text));
        let text = String::from_utf8(render_report(&r, RenderFormat::Text)).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
    }

    #[test]
    fn json_roundtrip_is_stable() {
        let bytes = render_report(&sample(), RenderFormat::Json);
        let back: RunReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(render_report(&back, RenderFormat::Json), bytes);
    }
}
