//! Inter-annotator agreement: plain and practical fractions, Cohen's kappa,
//! and a gap-collapsing kappa variant.
//!
//! Metrics operate on integer levels, so the observed and expected
//! proportions are exact integer ratios; floating point enters only in the
//! final division. The gap-collapsing variant consumes one uniform draw per
//! collapsible position, which makes results a pure function of the seed.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scores::{AnnotationTable, MAX_LEVEL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMetric {
    Plain,
    Practical,
    Kappa,
    KappaPractical,
}

impl FromStr for AgreementMetric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "plain" => Ok(AgreementMetric::Plain),
            "practical" => Ok(AgreementMetric::Practical),
            "kappa" => Ok(AgreementMetric::Kappa),
            "kappa-practical" | "kappa_practical" => Ok(AgreementMetric::KappaPractical),
            other => Err(format!("unknown agreement metric {other:?}")),
        }
    }
}

fn validate_pair(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "annotator vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("annotator vectors are empty".to_string()));
    }
    for &v in a.iter().chain(b) {
        if v > MAX_LEVEL {
            return Err(Error::validation(format!("level {v} outside 0-4")));
        }
    }
    Ok(())
}

/// Fraction of positions with identical levels.
pub fn plain_agreement(a: &[u8], b: &[u8]) -> Result<f64> {
    validate_pair(a, b)?;
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(matches as f64 / a.len() as f64)
}

/// Fraction of positions within one level of each other.
pub fn practical_agreement(a: &[u8], b: &[u8]) -> Result<f64> {
    validate_pair(a, b)?;
    let close = a
        .iter()
        .zip(b)
        .filter(|(&x, &y)| x.abs_diff(y) <= 1)
        .count();
    Ok(close as f64 / a.len() as f64)
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e) with the chance term taken from
/// the two marginal level distributions. Both proportions are exact integer
/// ratios; the quotient is the only floating-point step. When both vectors
/// are constant and identical (p_e = p_o = 1) the result is 1 by convention.
pub fn cohen_kappa(a: &[u8], b: &[u8]) -> Result<f64> {
    validate_pair(a, b)?;
    let n = a.len() as i64;
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count() as i64;
    let mut count_a = [0i64; MAX_LEVEL as usize + 1];
    let mut count_b = [0i64; MAX_LEVEL as usize + 1];
    for (&x, &y) in a.iter().zip(b) {
        count_a[x as usize] += 1;
        count_b[y as usize] += 1;
    }
    let chance: i64 = count_a.iter().zip(&count_b).map(|(x, y)| x * y).sum();
    // kappa = (matches/n - chance/n^2) / (1 - chance/n^2), cleared of denominators.
    let numerator = matches * n - chance;
    let denominator = n * n - chance;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Kappa after collapsing near-agreements: wherever the two levels differ by
/// at most one, a uniform draw picks one of the two values for both vectors.
/// One draw is consumed per collapsible position, equal levels included.
pub fn collapsed_kappa(a: &[u8], b: &[u8], rng: &mut impl Rng) -> Result<f64> {
    validate_pair(a, b)?;
    let mut ca = a.to_vec();
    let mut cb = b.to_vec();
    for i in 0..ca.len() {
        if ca[i].abs_diff(cb[i]) <= 1 {
            let pick = if rng.gen_range(0..2u8) == 0 {
                ca[i]
            } else {
                cb[i]
            };
            ca[i] = pick;
            cb[i] = pick;
        }
    }
    cohen_kappa(&ca, &cb)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// Agreement over every unordered annotator pair, with the population mean
/// and standard deviation of the pair values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementStats {
    pub metric: AgreementMetric,
    pub pairwise: Vec<PairAgreement>,
    pub mean: f64,
    pub std_dev: f64,
}

impl AgreementStats {
    /// Symmetric lookup by annotator labels.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map(|p| p.value)
    }
}

/// Evaluates `metric` over all C(n, 2) annotator pairs of a table.
///
/// Pairs are enumerated in annotator order; for the seeded variant each pair
/// uses an independent stream keyed by `seed ^ pair_index`, so results do
/// not depend on evaluation order.
pub fn pairwise_stats(
    table: &AnnotationTable,
    metric: AgreementMetric,
    seed: u64,
) -> Result<AgreementStats> {
    if table.annotators.len() < 2 {
        return Err(Error::validation(format!(
            "pairwise agreement needs at least two annotators, found {}",
            table.annotators.len()
        )));
    }
    if table.is_empty() {
        return Err(Error::validation(
            "annotation table has no rows".to_string(),
        ));
    }
    let columns: Vec<Vec<u8>> = (0..table.annotators.len())
        .map(|i| table.annotator_levels(i))
        .collect();
    let mut pairwise = Vec::new();
    let mut pair_index: u64 = 0;
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            let value = match metric {
                AgreementMetric::Plain => plain_agreement(&columns[i], &columns[j])?,
                AgreementMetric::Practical => practical_agreement(&columns[i], &columns[j])?,
                AgreementMetric::Kappa => cohen_kappa(&columns[i], &columns[j])?,
                AgreementMetric::KappaPractical => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ pair_index);
                    collapsed_kappa(&columns[i], &columns[j], &mut rng)?
                }
            };
            pairwise.push(PairAgreement {
                a: table.annotators[i].clone(),
                b: table.annotators[j].clone(),
                value,
            });
            pair_index += 1;
        }
    }
    let n = pairwise.len() as f64;
    let mean = pairwise.iter().map(|p| p.value).sum::<f64>() / n;
    let variance = pairwise
        .iter()
        .map(|p| (p.value - mean) * (p.value - mean))
        .sum::<f64>()
        / n;
    Ok(AgreementStats {
        metric,
        pairwise,
        mean,
        std_dev: variance.sqrt(),
    })
}

/// Writes pair values as CSV rows `a,b,value` with a trailing mean/std block.
pub fn stats_to_csv(stats: &AgreementStats) -> String {
    let mut out = String::from("a,b,value\n");
    for p in &stats.pairwise {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_field(&p.a),
            csv_field(&p.b),
            p.value
        ));
    }
    out.push_str(&format!("mean,,{}\n", stats.mean));
    out.push_str(&format!("std_dev,,{}\n", stats.std_dev));
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Frequency map of levels, exposed for diagnostics.
pub fn level_frequencies(v: &[u8]) -> BTreeMap<u8, f64> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &x in v {
        *counts.entry(x).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / v.len() as f64))
        .collect()
}
