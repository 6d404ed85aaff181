use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{aggregate_ranges, edit_counts, relative_improvement, EditCounts, FullRange, RangeAggregates, WerPoint};
use crate::{Condition, Error, Result};

/// One id-prefixed transcript line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub id: String,
    pub words: Vec<String>,
}

impl Transcript {
    /// Condition encoded as an `@<condition>` suffix of the id, e.g. `utt7@-5`.
    pub fn condition(&self) -> Result<Option<Condition>> {
        match self.id.rsplit_once('@') {
            Some((_, c)) => c.parse().map(Some),
            None => Ok(None),
        }
    }
}

/// Parse `<id> <word> <word> ...` lines; blank lines and `#` comments are skipped.
pub fn parse_transcripts(text: &str) -> Result<Vec<Transcript>> {
    let mut out: Vec<Transcript> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().expect("non-empty line").to_string();
        if out.iter().any(|t| t.id == id) {
            return Err(Error::format("transcript", format!("line {}: duplicate id {id}", n + 1)));
        }
        out.push(Transcript {
            id,
            words: parts.map(str::to_string).collect(),
        });
    }
    Ok(out)
}

/// Corpus-level edit counts per condition (or a single pooled group).
///
/// Every reference id needs a hypothesis; extra hypotheses are an error too.
pub fn score_by_condition(
    refs: &[Transcript],
    hyps: &[Transcript],
    by_condition: bool,
) -> Result<Vec<(Option<Condition>, EditCounts)>> {
    let hyp_by_id: BTreeMap<&str, &Transcript> = hyps.iter().map(|h| (h.id.as_str(), h)).collect();
    if let Some(extra) = hyps.iter().find(|h| !refs.iter().any(|r| r.id == h.id)) {
        return Err(Error::format("hypotheses", format!("id {} has no reference", extra.id)));
    }
    let mut groups: Vec<(Option<Condition>, EditCounts)> = Vec::new();
    for r in refs {
        let h = hyp_by_id
            .get(r.id.as_str())
            .ok_or_else(|| Error::format("hypotheses", format!("missing hypothesis for {}", r.id)))?;
        if r.words.is_empty() {
            return Err(Error::EmptyReference);
        }
        let key = if by_condition {
            Some(r.condition()?.ok_or_else(|| {
                Error::format("reference", format!("id {} lacks an @condition suffix", r.id))
            })?)
        } else {
            None
        };
        let counts = edit_counts(&r.words, &h.words);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, acc)) => *acc = *acc + counts,
            None => groups.push((key, counts)),
        }
    }
    groups.sort_by(|a, b| {
        let ka = a.0.map_or(f64::INFINITY, |c| c.sort_key());
        let kb = b.0.map_or(f64::INFINITY, |c| c.sort_key());
        kb.total_cmp(&ka)
    });
    Ok(groups)
}

/// Per-condition WERs with optional range aggregates and baseline comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub points: Vec<WerPoint>,
    pub aggregates: Option<RangeAggregates>,
    pub full_range: FullRange,
    /// `(range, baseline WER, relative improvement %)`.
    pub improvements: Vec<(&'static str, f64, f64)>,
}

impl Report {
    /// Build from points; aggregates are computed when every needed condition is present.
    pub fn new(points: Vec<WerPoint>, full_range: FullRange, require_ranges: bool) -> Result<Self> {
        let aggregates = match aggregate_ranges(&points, full_range) {
            Ok(a) => Some(a),
            Err(e) if require_ranges => return Err(e),
            Err(_) => None,
        };
        Ok(Self {
            points,
            aggregates,
            full_range,
            improvements: Vec::new(),
        })
    }

    /// Attach relative improvements against a baseline's range aggregates.
    pub fn compare_with(&mut self, baseline: &RangeAggregates) -> Result<()> {
        let ours = self
            .aggregates
            .ok_or_else(|| Error::Config("baseline comparison needs all range conditions".into()))?;
        self.improvements = ours
            .as_array()
            .iter()
            .zip(baseline.as_array())
            .map(|((name, m), (_, b))| Ok((*name, b, relative_improvement(b, *m)?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Aligned table followed by `key=value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.points.iter().map(|p| p.condition.to_string()).collect();
        let width = header.iter().map(|h| h.len()).max().unwrap_or(0).max(6);
        let _ = write!(out, "{:<10}", "SNR[dB]");
        for h in &header {
            let _ = write!(out, " {h:>width$}");
        }
        let _ = write!(out, "\n{:<10}", "WER[%]");
        for p in &self.points {
            let _ = write!(out, " {:>width$.1}", p.wer_percent);
        }
        out.push('\n');
        if let Some(agg) = &self.aggregates {
            out.push('\n');
            let _ = writeln!(out, "{:<10} {:>7} {:>7} {:>7} {:>7}", "range", "Full", "High", "Low", "ROI");
            let _ = writeln!(
                out,
                "{:<10} {:>7.1} {:>7.1} {:>7.1} {:>7.1}",
                "WER[%]", agg.full, agg.high, agg.low, agg.roi
            );
            if !self.improvements.is_empty() {
                let _ = write!(out, "{:<10}", "rel.impr");
                for (_, _, rel) in &self.improvements {
                    let _ = write!(out, " {rel:>6.1}%");
                }
                out.push('\n');
            }
        }
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "wer.{}={}", p.condition, p.wer_percent);
        }
        if let Some(agg) = &self.aggregates {
            let _ = writeln!(
                out,
                "full_range={}",
                match self.full_range {
                    FullRange::AllConditions => "all-conditions",
                    FullRange::ToMinus10 => "to-minus-10",
                }
            );
            for (name, v) in agg.as_array() {
                let _ = writeln!(out, "{name}={v}");
            }
        }
        for (name, base, rel) in &self.improvements {
            let _ = writeln!(out, "baseline.{name}={base}");
            let _ = writeln!(out, "rel_improvement.{name}={rel}");
        }
        out
    }
}

fn key_values(text: &str) -> impl Iterator<Item = (&str, &str)> {
    text.lines().filter_map(|l| l.trim().split_once('=')).map(|(k, v)| (k.trim(), v.trim()))
}

/// Read `wer.<condition>=<value>` lines (as written by [`Report::render`]).
pub fn parse_report_points(text: &str) -> Result<Vec<WerPoint>> {
    let mut points = Vec::new();
    for (k, v) in key_values(text) {
        if let Some(c) = k.strip_prefix("wer.") {
            let condition: Condition = c.parse()?;
            let wer_percent: f64 = v
                .parse()
                .map_err(|_| Error::format("report", format!("bad WER value {v:?} for {k}")))?;
            if !(wer_percent >= 0.0) {
                return Err(Error::format("report", format!("negative WER for {k}")));
            }
            points.push(WerPoint { condition, wer_percent });
        }
    }
    if points.is_empty() {
        return Err(Error::format("report", "no wer.<condition>= lines"));
    }
    Ok(points)
}
