//! Word error rate and SNR-range aggregation.

pub mod fixtures;
mod report;

pub use report::{parse_report_points, parse_transcripts, score_by_condition, Report, Transcript};

use serde::{Deserialize, Serialize};

use crate::{Condition, Error, Result};

/// Substitution, deletion and insertion counts of a minimum-edit alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer_percent(&self) -> Result<f64> {
        if self.reference_len == 0 {
            return Err(Error::EmptyReference);
        }
        Ok(100.0 * self.errors() as f64 / self.reference_len as f64)
    }
}

impl std::ops::Add for EditCounts {
    type Output = EditCounts;

    fn add(self, o: EditCounts) -> EditCounts {
        EditCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            reference_len: self.reference_len + o.reference_len,
        }
    }
}

impl std::iter::Sum for EditCounts {
    fn sum<I: Iterator<Item = EditCounts>>(iter: I) -> Self {
        iter.fold(EditCounts::default(), |a, b| a + b)
    }
}

/// Levenshtein alignment with unit costs.
///
/// Among minimum-cost alignments, the backtrace prefers substitutions, then
/// deletions, then insertions.
pub fn edit_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        cost[i * width] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(del).min(ins);
        }
    }
    let mut counts = EditCounts {
        reference_len: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if cost[(i - 1) * width + j - 1] + usize::from(!same) == here {
                if !same {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// `100 * (S + D + I) / |ref|`; may exceed 100.
pub fn word_error_rate<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let r: Vec<&str> = reference.iter().map(|s| s.as_ref()).collect();
    let h: Vec<&str> = hypothesis.iter().map(|s| s.as_ref()).collect();
    edit_counts(&r, &h).wer_percent()
}

/// WER measured under one test condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerPoint {
    pub condition: Condition,
    pub wer_percent: f64,
}

/// Evaluation conditions: clean, then 50 dB down to -20 dB in 5 dB steps.
pub fn evaluation_conditions() -> Vec<Condition> {
    std::iter::once(Condition::Clean)
        .chain((0..15).map(|i| Condition::db(50.0 - 5.0 * i as f64)))
        .collect()
}

/// Which points the Full range averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullRange {
    /// Clean plus 50 dB to -20 dB (16 points); reproduces the published range averages.
    #[default]
    AllConditions,
    /// Clean plus 50 dB to -10 dB (14 points), as the range is usually described.
    ToMinus10,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeAggregates {
    pub full: f64,
    pub high: f64,
    pub low: f64,
    pub roi: f64,
}

impl RangeAggregates {
    pub fn as_array(&self) -> [(&'static str, f64); 4] {
        [("full", self.full), ("high", self.high), ("low", self.low), ("roi", self.roi)]
    }
}

fn db_span(hi: f64, lo: f64) -> Vec<Condition> {
    let n = ((hi - lo) / 5.0).round() as usize + 1;
    (0..n).map(|i| Condition::db(hi - 5.0 * i as f64)).collect()
}

/// Conditions averaged by each range.
pub fn range_members(full: FullRange) -> [(&'static str, Vec<Condition>); 4] {
    let full_members = match full {
        FullRange::AllConditions => evaluation_conditions(),
        FullRange::ToMinus10 => std::iter::once(Condition::Clean).chain(db_span(50.0, -10.0)).collect(),
    };
    [
        ("full", full_members),
        ("high", db_span(50.0, 0.0)),
        ("low", db_span(0.0, -10.0)),
        ("roi", db_span(20.0, -10.0)),
    ]
}

fn lookup(points: &[WerPoint], c: Condition) -> Option<f64> {
    points.iter().find(|p| p.condition == c).map(|p| p.wer_percent)
}

/// Full/High/Low/ROI arithmetic means.
pub fn aggregate_ranges(points: &[WerPoint], full: FullRange) -> Result<RangeAggregates> {
    let members = range_members(full);
    let mut missing: Vec<String> = Vec::new();
    for (_, conds) in &members {
        for c in conds {
            if lookup(points, *c).is_none() && !missing.contains(&c.to_string()) {
                missing.push(c.to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingConditions(missing));
    }
    let mean = |conds: &[Condition]| {
        conds.iter().map(|c| lookup(points, *c).unwrap()).sum::<f64>() / conds.len() as f64
    };
    Ok(RangeAggregates {
        full: mean(&members[0].1),
        high: mean(&members[1].1),
        low: mean(&members[2].1),
        roi: mean(&members[3].1),
    })
}

/// Relative WER decrease of `method` against `baseline`, in percent.
pub fn relative_improvement(baseline: f64, method: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - method) / baseline)
}
