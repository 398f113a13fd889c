//! Rank stability of sub-characteristic totals under annotation noise.
//!
//! Each iteration perturbs every integer level by a uniform inclusive draw
//! in [-delta, +delta] (clamped to 0..=4), applies the saturation scaling,
//! totals per sub-characteristic, and correlates the perturbed ranking with
//! the baseline ranking. Iterations use independent streams keyed by
//! `seed ^ iteration`; cells are drawn practice-major in matrix order.
//! Rank correlation is computed from integer rank statistics, so identical
//! rankings yield exactly 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::Score;
use crate::scores::{scale_score, InfluenceMatrix, ScaleState, MAX_LEVEL};

/// Shifts a level by a uniform draw from [-delta, +delta], clamped to the
/// level range. A zero delta still consumes one draw.
pub fn perturb_level(level: u8, delta: u8, rng: &mut impl Rng) -> u8 {
    let offset = rng.gen_range(-i32::from(delta)..=i32::from(delta));
    (i32::from(level) + offset).clamp(0, i32::from(MAX_LEVEL)) as u8
}

/// Ranks doubled to stay integral: ties share the average of their
/// 1-based positions, and the average of a run is (first + last) / 2.
fn double_ranks(v: &[f64]) -> Vec<i64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("finite values"));
    let mut out = vec![0i64; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && v[idx[end + 1]] == v[idx[start]] {
            end += 1;
        }
        let rank2 = (start + 1 + end + 1) as i64;
        for t in start..=end {
            out[idx[t]] = rank2;
        }
        start = end + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
///
/// The rank statistics are exact integers; identical rankings return
/// exactly 1. Constant rankings on either side are a validation error.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::validation(
            "rank correlation needs at least two values".to_string(),
        ));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::validation(
            "rank correlation needs finite values".to_string(),
        ));
    }
    let u = double_ranks(a);
    let v = double_ranks(b);
    if u == v {
        return Ok(1.0);
    }
    let n = u.len() as i128;
    let sum = |xs: &[i64]| -> i128 { xs.iter().map(|&x| i128::from(x)).sum() };
    let dot = |xs: &[i64], ys: &[i64]| -> i128 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| i128::from(x) * i128::from(y))
            .sum()
    };
    let (su, sv) = (sum(&u), sum(&v));
    let sxy = n * dot(&u, &v) - su * sv;
    let sxx = n * dot(&u, &u) - su * su;
    let syy = n * dot(&v, &v) - sv * sv;
    if sxx == 0 || syy == 0 {
        return Err(Error::validation(
            "rank correlation undefined for constant rankings".to_string(),
        ));
    }
    // One sqrt over the exact integer product keeps perfect squares exact.
    Ok(sxy as f64 / ((sxx * syy) as f64).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityResult {
    pub delta: u8,
    pub iterations: u64,
    pub seed: u64,
    pub mean_correlation: f64,
    pub variance: f64,
    pub skipped_iterations: u64,
    /// (iteration, correlation) for the iterations that were kept.
    #[serde(skip)]
    pub per_iteration: Vec<(u64, f64)>,
}

/// Runs the perturbation study on a raw integer-level matrix.
///
/// Iterations whose perturbed totals are constant (rank correlation
/// undefined) are skipped and counted. The mean and population variance
/// cover the kept iterations.
pub fn sensitivity_run(
    m: &InfluenceMatrix,
    delta: u8,
    iterations: u64,
    seed: u64,
) -> Result<SensitivityResult> {
    if m.scale_state() != ScaleState::Raw {
        return Err(Error::validation(
            "sensitivity runs on raw levels; the matrix is already scaled".to_string(),
        ));
    }
    if !m.is_integer_leveled() {
        return Err(Error::validation(
            "sensitivity needs integer levels; aggregate with a method that preserves them"
                .to_string(),
        ));
    }
    if m.subchar_count() < 2 || m.practice_count() == 0 {
        return Err(Error::validation(
            "sensitivity needs at least two sub-characteristics and one practice".to_string(),
        ));
    }
    if iterations < 1 {
        return Err(Error::validation(
            "iterations must be at least 1".to_string(),
        ));
    }

    let baseline: Vec<f64> = scaled_totals_baseline(m)?;
    if double_ranks(&baseline)
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        == 1
    {
        return Err(Error::validation(
            "baseline totals are constant; rank correlation is undefined".to_string(),
        ));
    }

    let mut per_iteration = Vec::new();
    let mut skipped = 0u64;
    for iteration in 0..iterations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ iteration);
        let mut totals = vec![Score::ZERO; m.subchar_count()];
        for p in 0..m.practice_count() {
            for (c, total) in totals.iter_mut().enumerate() {
                let level = m.value_at(p, c).integer_part() as u8;
                let perturbed = perturb_level(level, delta, &mut rng);
                *total += scale_score(Score::from_int(i64::from(perturbed)))?;
            }
        }
        let perturbed: Vec<f64> = totals.iter().map(|t| t.to_f64()).collect();
        match rank_correlation(&perturbed, &baseline) {
            Ok(r) => per_iteration.push((iteration, r)),
            Err(_) => skipped += 1,
        }
    }
    if per_iteration.is_empty() {
        return Err(Error::validation(
            "every iteration was degenerate; no correlations to average".to_string(),
        ));
    }
    let kept = per_iteration.len() as f64;
    let mean = per_iteration.iter().map(|(_, r)| r).sum::<f64>() / kept;
    let variance = per_iteration
        .iter()
        .map(|(_, r)| (r - mean) * (r - mean))
        .sum::<f64>()
        / kept;
    Ok(SensitivityResult {
        delta,
        iterations,
        seed,
        mean_correlation: mean,
        variance,
        skipped_iterations: skipped,
        per_iteration,
    })
}

fn scaled_totals_baseline(m: &InfluenceMatrix) -> Result<Vec<f64>> {
    let mut totals = vec![Score::ZERO; m.subchar_count()];
    for p in 0..m.practice_count() {
        for (c, total) in totals.iter_mut().enumerate() {
            *total += scale_score(m.value_at(p, c))?;
        }
    }
    Ok(totals.iter().map(|t| t.to_f64()).collect())
}

/// CSV of kept iterations: `iteration,correlation`.
pub fn sensitivity_to_csv(result: &SensitivityResult) -> String {
    let mut out = String::from("iteration,correlation\n");
    for (i, r) in &result.per_iteration {
        out.push_str(&format!("{i},{r}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(&str, &str, i64)]) -> InfluenceMatrix {
        let triplets: Vec<(&str, &str, Score)> = rows
            .iter()
            .map(|(c, p, v)| (*c, *p, Score::from_int(*v)))
            .collect();
        InfluenceMatrix::from_triplets(ScaleState::Raw, &triplets).unwrap()
    }

    #[test]
    fn perturbation_stays_within_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for level in 0..=MAX_LEVEL {
            for delta in 0..=4u8 {
                for _ in 0..200 {
                    let p = perturb_level(level, delta, &mut rng);
                    assert!(p <= MAX_LEVEL);
                }
            }
        }
    }

    #[test]
    fn zero_delta_is_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for level in 0..=MAX_LEVEL {
            assert_eq!(perturb_level(level, 0, &mut rng), level);
        }
    }

    #[test]
    fn perturbation_reaches_both_inclusive_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..500 {
            seen.insert(perturb_level(2, 2, &mut rng));
        }
        assert_eq!(seen, (0..=4).collect());
    }

    #[test]
    fn rank_correlation_matches_hand_computed_values() {
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8
        );
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            1.0
        );
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0
        );
    }

    #[test]
    fn rank_correlation_averages_tied_ranks() {
        assert_eq!(
            rank_correlation(&[1.0, 1.0, 2.0], &[2.0, 1.0, 1.0]).unwrap(),
            -0.5
        );
    }

    #[test]
    fn rank_correlation_rejects_degenerate_input() {
        assert!(rank_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(rank_correlation(&[1.0], &[1.0]).is_err());
        assert!(rank_correlation(&[1.0, 2.0], &[1.0]).is_err());
        assert!(rank_correlation(&[f64::NAN, 1.0], &[1.0, 2.0]).is_err());
    }

    fn four_by_two() -> InfluenceMatrix {
        matrix(&[
            ("c1", "p1", 4),
            ("c2", "p1", 1),
            ("c3", "p1", 2),
            ("c4", "p1", 0),
            ("c1", "p2", 3),
            ("c2", "p2", 0),
            ("c3", "p2", 2),
            ("c4", "p2", 1),
        ])
    }

    #[test]
    fn zero_delta_run_is_exactly_stable() {
        let r = sensitivity_run(&four_by_two(), 0, 25, 9).unwrap();
        assert_eq!(r.mean_correlation, 1.0);
        assert_eq!(r.variance, 0.0);
        assert_eq!(r.skipped_iterations, 0);
        assert_eq!(r.per_iteration.len(), 25);
    }

    #[test]
    fn runs_are_reproducible_per_seed() {
        let a = sensitivity_run(&four_by_two(), 2, 40, 11).unwrap();
        let b = sensitivity_run(&four_by_two(), 2, 40, 11).unwrap();
        assert_eq!(a.mean_correlation, b.mean_correlation);
        assert_eq!(a.variance, b.variance);
        assert_eq!(a.per_iteration, b.per_iteration);
        let c = sensitivity_run(&four_by_two(), 2, 40, 12).unwrap();
        assert_ne!(a.per_iteration, c.per_iteration);
    }

    #[test]
    fn scaled_or_fractional_matrices_are_rejected() {
        let scaled = crate::scores::scale_matrix(&four_by_two()).unwrap();
        assert!(sensitivity_run(&scaled, 1, 5, 0).is_err());

        let fractional = InfluenceMatrix::from_triplets(
            ScaleState::Raw,
            &[
                ("c1", "p1", Score::from_millis(1500)),
                ("c2", "p1", Score::from_int(1)),
            ],
        )
        .unwrap();
        let err = sensitivity_run(&fractional, 1, 5, 0).unwrap_err();
        assert!(err.to_string().contains("integer levels"), "{err}");
    }

    #[test]
    fn constant_baseline_is_rejected() {
        let flat = matrix(&[("c1", "p1", 2), ("c2", "p1", 2)]);
        let err = sensitivity_run(&flat, 1, 5, 0).unwrap_err();
        assert!(err.to_string().contains("constant"), "{err}");
    }

    #[test]
    fn csv_lists_kept_iterations() {
        let r = sensitivity_run(&four_by_two(), 0, 3, 0).unwrap();
        let csv = sensitivity_to_csv(&r);
        assert_eq!(csv, "iteration,correlation\n0,1\n1,1\n2,1\n");
    }
}
