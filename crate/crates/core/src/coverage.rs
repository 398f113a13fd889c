//! Saturating weighted coverage: each sub-characteristic accumulates
//! influence from the selected practices, capped at a threshold k, and the
//! capped totals are combined through per-sub-characteristic weights.
//!
//! All totals and weighted sums are exact fixed-point arithmetic, so
//! coverage values compare deterministically across platforms. The coverage
//! fraction counts every sub-characteristic of the matrix, whatever its
//! weight.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::{Score, Value};
use crate::scores::{InfluenceMatrix, ScaleState};

/// Per-sub-characteristic weights in [0, 1]; ids not listed fall back to
/// `default_weight`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    weights: BTreeMap<String, Score>,
    default_weight: Score,
}

impl WeightVector {
    /// Weight 1 everywhere.
    pub fn uniform() -> WeightVector {
        WeightVector {
            weights: BTreeMap::new(),
            default_weight: Score::ONE,
        }
    }

    pub fn new(weights: BTreeMap<String, Score>, default_weight: Score) -> Result<WeightVector> {
        for (id, w) in &weights {
            check_weight(*w, id)?;
        }
        check_weight(default_weight, "(default)")?;
        Ok(WeightVector {
            weights,
            default_weight,
        })
    }

    pub fn weight_of(&self, subchar: &str) -> Score {
        self.weights
            .get(subchar)
            .copied()
            .unwrap_or(self.default_weight)
    }
}

fn check_weight(w: Score, id: &str) -> Result<()> {
    if w < Score::ZERO || w > Score::ONE {
        return Err(Error::validation(format!(
            "weight {w} for {id:?} outside [0, 1]"
        )));
    }
    Ok(())
}

pub const WEIGHTS_HEADER: &str = "subcharacteristic\tweight";

/// Parses a `subcharacteristic<TAB>weight` TSV. Unlisted ids weigh 1.
pub fn parse_weights(doc: &str) -> Result<WeightVector> {
    let mut lines = doc.lines();
    match lines.next() {
        Some(h) if h == WEIGHTS_HEADER => {}
        Some(h) => {
            return Err(Error::parse(
                1,
                format!("expected header {WEIGHTS_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::parse(1, "empty weights document")),
    }
    let mut weights = BTreeMap::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                row_no,
                format!("row {row_no}: expected 2 fields, found {}", fields.len()),
            ));
        }
        let w: Score = fields[1]
            .parse()
            .map_err(|e| Error::parse(row_no, format!("row {row_no}: {e}")))?;
        check_weight(w, fields[0])?;
        if weights.insert(fields[0].to_string(), w).is_some() {
            return Err(Error::validation(format!(
                "row {row_no}: duplicate weight for {:?}",
                fields[0]
            )));
        }
    }
    WeightVector::new(weights, Score::ONE)
}

/// The saturation threshold. It is compared against totals on whichever
/// scale the matrix carries (4 is full influence raw, 24 scaled).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoverageParams {
    pub k: Score,
}

impl CoverageParams {
    pub fn new(k: Score) -> Result<CoverageParams> {
        if k <= Score::ZERO {
            return Err(Error::validation(format!(
                "threshold k must be positive, got {k}"
            )));
        }
        Ok(CoverageParams { k })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubcharCoverage {
    pub id: String,
    pub raw_total: Score,
    pub saturated: Score,
    pub covered: bool,
    pub weight: Score,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub k: Score,
    pub scale: ScaleState,
    pub weighted_value: Value,
    pub coverage_fraction: f64,
    pub subcharacteristics: Vec<SubcharCoverage>,
    pub gaps: Vec<String>,
    #[serde(skip)]
    pub covered_count: usize,
}

/// Maps a selection of practice ids to matrix indices, rejecting unknown
/// ids and duplicates.
pub(crate) fn resolve_selection<S: AsRef<str>>(
    m: &InfluenceMatrix,
    selection: &[S],
) -> Result<Vec<usize>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(selection.len());
    for s in selection {
        let id = s.as_ref();
        let idx = m
            .practice_index(id)
            .ok_or_else(|| Error::validation(format!("unknown practice {id:?}")))?;
        if !seen.insert(idx) {
            return Err(Error::validation(format!(
                "practice {id:?} appears twice in the selection"
            )));
        }
        out.push(idx);
    }
    Ok(out)
}

pub(crate) fn saturated_totals(
    m: &InfluenceMatrix,
    selected: &[usize],
    k: Score,
) -> Vec<(Score, Score)> {
    (0..m.subchar_count())
        .map(|c| {
            let mut total = Score::ZERO;
            for &p in selected {
                total += m.value_at(p, c);
            }
            (total, total.min(k))
        })
        .collect()
}

/// The saturating weighted coverage of a practice selection.
pub fn coverage_value<S: AsRef<str>>(
    selection: &[S],
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
) -> Result<Value> {
    let selected = resolve_selection(m, selection)?;
    let mut value = Value::ZERO;
    for (c, (_, saturated)) in saturated_totals(m, &selected, params.k).iter().enumerate() {
        value += w.weight_of(&m.subcharacteristics()[c]) * *saturated;
    }
    Ok(value)
}

/// Full per-sub-characteristic breakdown of a selection's coverage.
///
/// A sub-characteristic is covered when its uncapped total reaches k. Gaps
/// list the uncovered ids, ascending by total and then lexicographically.
/// A matrix with no sub-characteristics is vacuously fully covered.
pub fn coverage_report<S: AsRef<str>>(
    selection: &[S],
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
) -> Result<CoverageReport> {
    let selected = resolve_selection(m, selection)?;
    let totals = saturated_totals(m, &selected, params.k);
    let mut subchars = Vec::with_capacity(m.subchar_count());
    let mut weighted_value = Value::ZERO;
    let mut covered_count = 0usize;
    for (c, (raw_total, saturated)) in totals.iter().enumerate() {
        let id = m.subcharacteristics()[c].clone();
        let weight = w.weight_of(&id);
        let covered = *raw_total >= params.k;
        if covered {
            covered_count += 1;
        }
        weighted_value += weight * *saturated;
        subchars.push(SubcharCoverage {
            id,
            raw_total: *raw_total,
            saturated: *saturated,
            covered,
            weight,
        });
    }
    let mut gaps: Vec<(Score, String)> = subchars
        .iter()
        .filter(|s| !s.covered)
        .map(|s| (s.raw_total, s.id.clone()))
        .collect();
    gaps.sort();
    let coverage_fraction = if subchars.is_empty() {
        1.0
    } else {
        covered_count as f64 / subchars.len() as f64
    };
    Ok(CoverageReport {
        k: params.k,
        scale: m.scale_state(),
        weighted_value,
        coverage_fraction,
        subcharacteristics: subchars,
        gaps: gaps.into_iter().map(|(_, id)| id).collect(),
        covered_count,
    })
}

/// The uncovered sub-characteristics of a report, weakest totals first and
/// ties in lexicographic order. Empty when the selection covers everything.
pub fn gaps(report: &CoverageReport) -> &[String] {
    &report.gaps
}

/// CSV twin of the JSON report: one row per sub-characteristic.
pub fn report_to_csv(report: &CoverageReport) -> String {
    let mut out = String::from("id,raw_total,saturated,covered,weight\n");
    for s in &report.subcharacteristics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.id, s.raw_total, s.saturated, s.covered, s.weight
        ));
    }
    out
}
