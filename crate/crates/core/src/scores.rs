//! Score tables: annotator inputs, aggregation, scaling, and merging.
//!
//! Raw annotator inputs are integer levels 0..=4. Aggregated influence
//! values are exact millipoint scores; a matrix is either `raw` (values in
//! [0, 4]) or `scaled` (values in [0, 24] after the piecewise-linear map).
//! Missing (practice, sub-characteristic) pairs materialize as 0, so every
//! matrix is dense. Row and column orders follow first appearance in the
//! source document, which keeps serialization round-trips stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::{div_round_half_away, Score, MILLIS_PER_POINT};
use crate::sqm::QualityModel;

pub const MAX_LEVEL: u8 = 4;
pub const MAX_RAW: Score = Score::from_millis(4 * MILLIS_PER_POINT);
pub const MAX_SCALED: Score = Score::from_millis(24 * MILLIS_PER_POINT);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleState {
    Raw,
    Scaled,
}

impl ScaleState {
    pub fn max_cell(self) -> Score {
        match self {
            ScaleState::Raw => MAX_RAW,
            ScaleState::Scaled => MAX_SCALED,
        }
    }
}

impl fmt::Display for ScaleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleState::Raw => write!(f, "raw"),
            ScaleState::Scaled => write!(f, "scaled"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    Median,
    Mean,
}

impl FromStr for Aggregation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "median" => Ok(Aggregation::Median),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation method {other:?}")),
        }
    }
}

/// One annotated (sub-characteristic, practice) row: a level per annotator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationRow {
    pub subcharacteristic: String,
    pub practice: String,
    pub levels: Vec<u8>,
}

/// A rectangular table of integer annotation levels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationTable {
    pub annotators: Vec<String>,
    pub rows: Vec<AnnotationRow>,
}

impl AnnotationTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sub-characteristic ids in order of first appearance.
    pub fn subcharacteristics(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for row in &self.rows {
            if seen.insert(row.subcharacteristic.as_str()) {
                out.push(row.subcharacteristic.as_str());
            }
        }
        out
    }

    /// Practice ids in order of first appearance.
    pub fn practices(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for row in &self.rows {
            if seen.insert(row.practice.as_str()) {
                out.push(row.practice.as_str());
            }
        }
        out
    }

    /// The column of one annotator, flattened in table row order.
    pub fn annotator_levels(&self, index: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r.levels[index]).collect()
    }
}

pub const SCORES_HEADER_PREFIX: [&str; 2] = ["subcharacteristic", "practice"];

fn check_scores_header(doc: &str) -> Result<Option<(Vec<String>, std::str::Lines<'_>)>> {
    let mut lines = doc.lines();
    let header = match lines.next() {
        Some(h) => h,
        None => return Ok(None),
    };
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() < 3
        || fields[0] != SCORES_HEADER_PREFIX[0]
        || fields[1] != SCORES_HEADER_PREFIX[1]
    {
        return Err(Error::parse(
            1,
            format!(
                "expected header \"subcharacteristic\\tpractice\\t<score column>...\", found {header:?}"
            ),
        ));
    }
    let columns: Vec<String> = fields[2..].iter().map(|s| s.to_string()).collect();
    let mut seen = BTreeSet::new();
    for c in &columns {
        if c.is_empty() {
            return Err(Error::parse(1, "empty score column name"));
        }
        if !seen.insert(c.clone()) {
            return Err(Error::validation(format!("duplicate score column {c:?}")));
        }
    }
    Ok(Some((columns, lines)))
}

/// Parses a TSV of integer annotation levels. An empty document yields an
/// empty table. Errors cite the 1-indexed data row.
pub fn parse_annotations(doc: &str) -> Result<AnnotationTable> {
    let (annotators, lines) = match check_scores_header(doc)? {
        Some(parts) => parts,
        None => return Ok(AnnotationTable::default()),
    };
    let mut table = AnnotationTable {
        annotators,
        rows: Vec::new(),
    };
    let mut seen_pairs = BTreeSet::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != table.annotators.len() + 2 {
            return Err(Error::parse(
                row_no,
                format!(
                    "row {row_no}: expected {} fields, found {}",
                    table.annotators.len() + 2,
                    fields.len()
                ),
            ));
        }
        let (subchar, practice) = (fields[0], fields[1]);
        if subchar.is_empty() || practice.is_empty() {
            return Err(Error::validation(format!(
                "row {row_no}: empty sub-characteristic or practice id"
            )));
        }
        if !seen_pairs.insert((subchar.to_string(), practice.to_string())) {
            return Err(Error::validation(format!(
                "row {row_no}: duplicate entry for ({subchar:?}, {practice:?})"
            )));
        }
        let mut levels = Vec::with_capacity(fields.len() - 2);
        for cell in &fields[2..] {
            let score: Score = cell
                .parse()
                .map_err(|e| Error::parse(row_no, format!("row {row_no}: {e}")))?;
            if !score.is_integer_level() {
                return Err(Error::parse(
                    row_no,
                    format!("row {row_no}: annotation {cell:?} is not an integer level"),
                ));
            }
            let level = score.integer_part();
            if level > i64::from(MAX_LEVEL) {
                return Err(Error::parse(
                    row_no,
                    format!("row {row_no}: annotation {cell:?} outside levels 0-4"),
                ));
            }
            levels.push(level as u8);
        }
        table.rows.push(AnnotationRow {
            subcharacteristic: subchar.to_string(),
            practice: practice.to_string(),
            levels,
        });
    }
    Ok(table)
}

/// A dense influence matrix u(practice, sub-characteristic).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfluenceMatrix {
    subchars: Vec<String>,
    practices: Vec<String>,
    subchar_index: BTreeMap<String, usize>,
    practice_index: BTreeMap<String, usize>,
    /// Practice-major: `values[p * subchars.len() + c]`.
    values: Vec<Score>,
    scale: ScaleState,
}

impl InfluenceMatrix {
    pub fn new(subchars: Vec<String>, practices: Vec<String>, scale: ScaleState) -> Result<Self> {
        let mut subchar_index = BTreeMap::new();
        for (i, c) in subchars.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::validation("empty sub-characteristic id".to_string()));
            }
            if subchar_index.insert(c.clone(), i).is_some() {
                return Err(Error::validation(format!(
                    "duplicate sub-characteristic id {c:?}"
                )));
            }
        }
        let mut practice_index = BTreeMap::new();
        for (i, p) in practices.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::validation("empty practice id".to_string()));
            }
            if practice_index.insert(p.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate practice id {p:?}")));
            }
        }
        let values = vec![Score::ZERO; subchars.len() * practices.len()];
        Ok(InfluenceMatrix {
            subchars,
            practices,
            subchar_index,
            practice_index,
            values,
            scale,
        })
    }

    /// Builds a matrix from (sub-characteristic, practice, score) triplets,
    /// ordering rows and columns by first appearance. Pairs not listed are 0.
    pub fn from_triplets(scale: ScaleState, triplets: &[(&str, &str, Score)]) -> Result<Self> {
        let mut subchars: Vec<String> = Vec::new();
        let mut practices: Vec<String> = Vec::new();
        let mut seen_c = BTreeSet::new();
        let mut seen_p = BTreeSet::new();
        for (c, p, _) in triplets {
            if seen_c.insert(*c) {
                subchars.push((*c).to_string());
            }
            if seen_p.insert(*p) {
                practices.push((*p).to_string());
            }
        }
        let mut m = InfluenceMatrix::new(subchars, practices, scale)?;
        let mut filled = BTreeSet::new();
        for (c, p, score) in triplets {
            if !filled.insert((*c, *p)) {
                return Err(Error::validation(format!(
                    "duplicate entry for ({c:?}, {p:?})"
                )));
            }
            m.set_by_id(p, c, *score)?;
        }
        Ok(m)
    }

    pub fn scale_state(&self) -> ScaleState {
        self.scale
    }

    pub fn subcharacteristics(&self) -> &[String] {
        &self.subchars
    }

    pub fn practices(&self) -> &[String] {
        &self.practices
    }

    pub fn subchar_count(&self) -> usize {
        self.subchars.len()
    }

    pub fn practice_count(&self) -> usize {
        self.practices.len()
    }

    pub fn practice_index(&self, id: &str) -> Option<usize> {
        self.practice_index.get(id).copied()
    }

    pub fn subchar_index(&self, id: &str) -> Option<usize> {
        self.subchar_index.get(id).copied()
    }

    pub fn value_at(&self, practice: usize, subchar: usize) -> Score {
        self.values[practice * self.subchars.len() + subchar]
    }

    pub fn get(&self, practice: &str, subchar: &str) -> Option<Score> {
        let p = self.practice_index(practice)?;
        let c = self.subchar_index(subchar)?;
        Some(self.value_at(p, c))
    }

    fn set_by_id(&mut self, practice: &str, subchar: &str, score: Score) -> Result<()> {
        if score < Score::ZERO || score > self.scale.max_cell() {
            return Err(Error::validation(format!(
                "score {score} for ({subchar:?}, {practice:?}) outside [0, {}] for a {} matrix",
                self.scale.max_cell(),
                self.scale
            )));
        }
        let p = self.practice_index(practice).expect("known practice");
        let c = self.subchar_index(subchar).expect("known subchar");
        self.values[p * self.subchars.len() + c] = score;
        Ok(())
    }

    /// Reorders and extends columns to a quality model: result columns are
    /// the model's ids in model order, and ids absent from the matrix are
    /// all-zero. Matrix columns unknown to the model are an error.
    pub fn aligned_to_model(&self, model: &QualityModel) -> Result<InfluenceMatrix> {
        for c in &self.subchars {
            if !model.contains_subcharacteristic(c) {
                return Err(Error::validation(format!(
                    "sub-characteristic {c:?} is not part of the quality model"
                )));
            }
        }
        let subchars: Vec<String> = model
            .subcharacteristic_ids()
            .into_iter()
            .map(str::to_string)
            .collect();
        let mut out = InfluenceMatrix::new(subchars, self.practices.clone(), self.scale)?;
        for (p_idx, p) in self.practices.iter().enumerate() {
            for (c_idx, c) in self.subchars.iter().enumerate() {
                out.set_by_id(p, c, self.value_at(p_idx, c_idx))?;
            }
        }
        Ok(out)
    }

    /// True when every cell is a whole annotator level.
    pub fn is_integer_leveled(&self) -> bool {
        self.values.iter().all(|v| v.is_integer_level())
    }
}

/// Aggregates annotator levels into a raw influence matrix.
///
/// Medians of an even count are the midpoint of the two middle values;
/// means are rounded half away from zero to millipoints. Both are invariant
/// under annotator order.
pub fn aggregate(table: &AnnotationTable, method: Aggregation) -> Result<InfluenceMatrix> {
    if table.rows.is_empty() || table.annotators.is_empty() {
        return Err(Error::validation(
            "cannot aggregate an empty table".to_string(),
        ));
    }
    let subchars: Vec<String> = table
        .subcharacteristics()
        .into_iter()
        .map(str::to_string)
        .collect();
    let practices: Vec<String> = table.practices().into_iter().map(str::to_string).collect();
    let mut m = InfluenceMatrix::new(subchars, practices, ScaleState::Raw)?;
    for row in &table.rows {
        let score = match method {
            Aggregation::Median => median_level(&row.levels),
            Aggregation::Mean => mean_level(&row.levels),
        };
        m.set_by_id(&row.practice, &row.subcharacteristic, score)?;
    }
    Ok(m)
}

fn median_level(levels: &[u8]) -> Score {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        Score::from_int(i64::from(sorted[n / 2]))
    } else {
        let low = i64::from(sorted[n / 2 - 1]);
        let high = i64::from(sorted[n / 2]);
        Score::from_millis((low + high) * MILLIS_PER_POINT / 2)
    }
}

fn mean_level(levels: &[u8]) -> Score {
    let sum: i64 = levels.iter().map(|&v| i64::from(v)).sum();
    let n = levels.len() as i64;
    Score::from_millis(div_round_half_away(sum * MILLIS_PER_POINT, n))
}

/// Piecewise-linear saturation emphasis: identity on [0, 2], slope 4 on
/// [2, 3], slope 18 on [3, 4]. Maps levels {0, 1, 2, 3, 4} to
/// {0, 1, 2, 6, 24}. Scores outside [0, 4] are a domain error.
pub fn scale_score(score: Score) -> Result<Score> {
    let m = score.as_millis();
    if !(0..=4 * MILLIS_PER_POINT).contains(&m) {
        return Err(Error::validation(format!(
            "score {score} outside the supported domain [0, 4]"
        )));
    }
    let scaled = if m <= 2 * MILLIS_PER_POINT {
        m
    } else if m <= 3 * MILLIS_PER_POINT {
        4 * m - 6 * MILLIS_PER_POINT
    } else {
        18 * m - 48 * MILLIS_PER_POINT
    };
    Ok(Score::from_millis(scaled))
}

/// Applies [`scale_score`] to every cell. Scaling twice is an error.
pub fn scale_matrix(m: &InfluenceMatrix) -> Result<InfluenceMatrix> {
    if m.scale == ScaleState::Scaled {
        return Err(Error::validation("matrix is already scaled".to_string()));
    }
    let mut out =
        InfluenceMatrix::new(m.subchars.clone(), m.practices.clone(), ScaleState::Scaled)?;
    for (p_idx, p) in m.practices.iter().enumerate() {
        for (c_idx, c) in m.subchars.iter().enumerate() {
            out.set_by_id(p, c, scale_score(m.value_at(p_idx, c_idx))?)?;
        }
    }
    Ok(out)
}

/// Merges influence matrices into one over the union of practices and
/// sub-characteristics. `drops` removes practice ids before the union: give
/// one set per source, a single set applied to every source, or none.
/// All sources must share a scale state, and a practice id surviving from
/// two sources is an error.
pub fn merge_matrices(
    sources: &[InfluenceMatrix],
    drops: &[BTreeSet<String>],
) -> Result<InfluenceMatrix> {
    if sources.is_empty() {
        return Err(Error::validation("no matrices to merge".to_string()));
    }
    if !(drops.is_empty() || drops.len() == 1 || drops.len() == sources.len()) {
        return Err(Error::validation(format!(
            "expected 0, 1, or {} drop sets, found {}",
            sources.len(),
            drops.len()
        )));
    }
    let scale = sources[0].scale;
    if sources.iter().any(|m| m.scale != scale) {
        return Err(Error::validation(
            "cannot merge matrices with mixed scale states".to_string(),
        ));
    }
    let drop_for = |source: usize| -> Option<&BTreeSet<String>> {
        match drops.len() {
            0 => None,
            1 => Some(&drops[0]),
            _ => Some(&drops[source]),
        }
    };

    let mut subchars: Vec<String> = Vec::new();
    let mut seen_c = BTreeSet::new();
    let mut practices: Vec<String> = Vec::new();
    let mut seen_p = BTreeSet::new();
    for (i, m) in sources.iter().enumerate() {
        for c in &m.subchars {
            if seen_c.insert(c.clone()) {
                subchars.push(c.clone());
            }
        }
        for p in &m.practices {
            if drop_for(i).is_some_and(|d| d.contains(p)) {
                continue;
            }
            if !seen_p.insert(p.clone()) {
                return Err(Error::validation(format!(
                    "practice {p:?} survives from more than one source; drop one copy"
                )));
            }
            practices.push(p.clone());
        }
    }

    let mut out = InfluenceMatrix::new(subchars, practices, scale)?;
    for (i, m) in sources.iter().enumerate() {
        for (p_idx, p) in m.practices.iter().enumerate() {
            if drop_for(i).is_some_and(|d| d.contains(p)) {
                continue;
            }
            for (c_idx, c) in m.subchars.iter().enumerate() {
                out.set_by_id(p, c, m.value_at(p_idx, c_idx))?;
            }
        }
    }
    Ok(out)
}

/// Parses an already-aggregated matrix: a scores TSV with exactly one score
/// column. A column named `scaled` marks a scaled matrix (values in [0, 24]);
/// any other name means raw levels in [0, 4]. Three fractional digits at most.
pub fn parse_matrix(doc: &str) -> Result<InfluenceMatrix> {
    let (columns, lines) = match check_scores_header(doc)? {
        Some(parts) => parts,
        None => return InfluenceMatrix::new(Vec::new(), Vec::new(), ScaleState::Raw),
    };
    if columns.len() != 1 {
        return Err(Error::parse(
            1,
            format!(
                "expected exactly one score column for an aggregated matrix, found {}",
                columns.len()
            ),
        ));
    }
    let scale = if columns[0] == "scaled" {
        ScaleState::Scaled
    } else {
        ScaleState::Raw
    };
    let max_cell = scale.max_cell();
    let mut triplets: Vec<(String, String, Score)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                row_no,
                format!("row {row_no}: expected 3 fields, found {}", fields.len()),
            ));
        }
        let score: Score = fields[2]
            .parse()
            .map_err(|e| Error::parse(row_no, format!("row {row_no}: {e}")))?;
        if score > max_cell {
            return Err(Error::parse(
                row_no,
                format!("row {row_no}: score {score} outside [0, {max_cell}]"),
            ));
        }
        triplets.push((fields[0].to_string(), fields[1].to_string(), score));
    }
    let borrowed: Vec<(&str, &str, Score)> = triplets
        .iter()
        .map(|(c, p, s)| (c.as_str(), p.as_str(), *s))
        .collect();
    InfluenceMatrix::from_triplets(scale, &borrowed)
}

/// Serializes a matrix densely: one row per (sub-characteristic, practice)
/// pair in matrix order. The score column is named `scaled` for scaled
/// matrices so the scale state survives a round trip through [`parse_matrix`].
pub fn serialize_matrix(m: &InfluenceMatrix) -> String {
    let column = match m.scale_state() {
        ScaleState::Raw => "score",
        ScaleState::Scaled => "scaled",
    };
    let mut out = format!("subcharacteristic\tpractice\t{column}\n");
    for (c_idx, c) in m.subcharacteristics().iter().enumerate() {
        for (p_idx, p) in m.practices().iter().enumerate() {
            out.push_str(c);
            out.push('\t');
            out.push_str(p);
            out.push('\t');
            out.push_str(&m.value_at(p_idx, c_idx).to_string());
            out.push('\n');
        }
    }
    out
}

/// Positive implementation costs per practice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostTable {
    pub costs: BTreeMap<String, Score>,
    pub budget_units: String,
}

pub const COSTS_HEADER: &str = "practice\tcost";

/// Parses a `practice<TAB>cost` TSV. Costs must be positive.
pub fn parse_costs(doc: &str) -> Result<CostTable> {
    let mut lines = doc.lines();
    match lines.next() {
        Some(h) if h == COSTS_HEADER => {}
        Some(h) => {
            return Err(Error::parse(
                1,
                format!("expected header {COSTS_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::parse(1, "empty cost document")),
    }
    let mut costs = BTreeMap::new();
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
        let cost: Score = fields[1]
            .parse()
            .map_err(|e| Error::parse(row_no, format!("row {row_no}: {e}")))?;
        if cost <= Score::ZERO {
            return Err(Error::validation(format!(
                "row {row_no}: cost for practice {:?} must be positive",
                fields[0]
            )));
        }
        if costs.insert(fields[0].to_string(), cost).is_some() {
            return Err(Error::validation(format!(
                "row {row_no}: duplicate cost entry for practice {:?}",
                fields[0]
            )));
        }
    }
    Ok(CostTable {
        costs,
        budget_units: "units".to_string(),
    })
}

/// Parses a drop list: one practice id per line, empty lines ignored.
pub fn parse_drop_list(doc: &str) -> BTreeSet<String> {
    doc.lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}
