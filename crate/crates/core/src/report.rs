//! Verdict reports in text and record (JSON lines) form.

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

use crate::mc::Outcome;
use crate::ta::model::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
}

impl Verdict {
    pub fn from_bool(holds: bool) -> Self {
        if holds {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub query: String,
    pub verdict: Verdict,
    pub states: usize,
    pub wall_seconds: f64,
    pub trace: Option<String>,
    pub note: Option<String>,
}

impl Report {
    pub fn new(query: impl Into<String>, holds: bool, states: usize, wall: Duration) -> Self {
        Report {
            query: query.into(),
            verdict: Verdict::from_bool(holds),
            states,
            wall_seconds: (wall.as_secs_f64() * 1000.0).round() / 1000.0,
            trace: None,
            note: None,
        }
    }

    pub fn from_outcome(query: &str, o: &Outcome, net: &Network) -> Self {
        let mut r = Report::new(query, o.holds, o.states, o.elapsed);
        r.trace = o.trace.as_ref().map(|t| t.render(net));
        r.note = o.note.clone();
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_trace(mut self, trace: impl Into<String>) -> Self {
        self.trace = Some(trace.into());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "query: {}", self.query);
        let _ = writeln!(out, "verdict: {}", self.verdict.as_str());
        let _ = writeln!(out, "states: {}", self.states);
        let _ = writeln!(out, "wall: {:.3}s", self.wall_seconds);
        if let Some(n) = &self.note {
            let _ = writeln!(out, "note: {n}");
        }
        if let Some(t) = &self.trace {
            out.push_str("trace:\n");
            for line in t.lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        out
    }

    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Renders a report set; records are one JSON object per line.
pub fn render_all(reports: &[Report], records: bool) -> String {
    if records {
        reports.iter().map(|r| r.to_record() + "\n").collect()
    } else {
        reports.iter().map(Report::to_text).collect::<Vec<_>>().join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_field_order_is_stable() {
        let r = Report::new("E<> p.b", true, 3, Duration::from_millis(1500));
        assert_eq!(r.to_record(), r#"{"query":"E<> p.b","verdict":"holds","states":3,"wall_seconds":1.5,"trace":null,"note":null}"#);
        assert!(r.to_text().starts_with("query: E<> p.b\nverdict: holds\n"));
    }
}
