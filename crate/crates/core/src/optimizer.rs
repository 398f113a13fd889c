//! Practice selection under a budget: exhaustive search, greedy selection
//! with exact marginal gains, a cost-aware density greedy, coverage curves,
//! search-space sizing, and an empirical submodularity check.
//!
//! Determinism contract: objective values are exact integers, candidate
//! enumeration follows the canonical order (lexicographic by practice id),
//! and ties keep the earliest candidate. Given the same inputs every
//! function returns bit-identical results on any platform.

use std::collections::BTreeSet;

use itertools::Itertools;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coverage::{coverage_report, CoverageParams, CoverageReport, WeightVector};
use crate::error::{Error, Result};
use crate::score::{Score, Value};
use crate::scores::{CostTable, InfluenceMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Budget {
    Count(usize),
    Cost(Score),
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionResult {
    pub algorithm: String,
    pub budget: Budget,
    pub selected: Vec<String>,
    pub value: Value,
    pub exhausted: bool,
    pub report: CoverageReport,
    #[serde(skip)]
    pub budget_used: Budget,
    #[serde(skip)]
    pub warning: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GainRule {
    /// Exact marginal gain of the weighted saturating objective.
    Weighted,
    /// Historical variant: raw influence summed over not-yet-covered
    /// sub-characteristics, uncapped and ignoring weights.
    LegacyRawSum,
}

/// Incremental coverage bookkeeping shared by the selection algorithms.
struct SelectionState<'a> {
    m: &'a InfluenceMatrix,
    k: Score,
    /// Weight per sub-characteristic index.
    weights: Vec<Score>,
    totals: Vec<Score>,
    value: Value,
    selected: Vec<usize>,
    in_selection: Vec<bool>,
}

impl<'a> SelectionState<'a> {
    fn new(m: &'a InfluenceMatrix, w: &WeightVector, params: CoverageParams) -> Self {
        SelectionState {
            m,
            k: params.k,
            weights: m
                .subcharacteristics()
                .iter()
                .map(|c| w.weight_of(c))
                .collect(),
            totals: vec![Score::ZERO; m.subchar_count()],
            value: Value::ZERO,
            selected: Vec::new(),
            in_selection: vec![false; m.practice_count()],
        }
    }

    fn weighted_gain(&self, p: usize) -> Value {
        let mut gain = Value::ZERO;
        for c in 0..self.totals.len() {
            let before = self.totals[c].min(self.k);
            let after = (self.totals[c] + self.m.value_at(p, c)).min(self.k);
            gain += self.weights[c] * (after - before);
        }
        gain
    }

    /// Raw influence over uncovered sub-characteristics (legacy rule).
    fn legacy_gain(&self, p: usize) -> Score {
        let mut gain = Score::ZERO;
        for c in 0..self.totals.len() {
            if self.totals[c] < self.k {
                gain += self.m.value_at(p, c);
            }
        }
        gain
    }

    fn add(&mut self, p: usize) {
        self.value += self.weighted_gain(p);
        for c in 0..self.totals.len() {
            self.totals[c] += self.m.value_at(p, c);
        }
        self.selected.push(p);
        self.in_selection[p] = true;
    }

    fn all_saturated(&self) -> bool {
        self.totals.iter().all(|t| *t >= self.k)
    }

    fn covered_fraction(&self) -> f64 {
        if self.totals.is_empty() {
            return 1.0;
        }
        let covered = self.totals.iter().filter(|t| **t >= self.k).count();
        covered as f64 / self.totals.len() as f64
    }
}

/// Practice indices in canonical order: lexicographic by id.
fn canonical_order(m: &InfluenceMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.practice_count()).collect();
    order.sort_by(|&a, &b| m.practices()[a].cmp(&m.practices()[b]));
    order
}

fn ids_of(m: &InfluenceMatrix, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&p| m.practices()[p].clone()).collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    algorithm: &str,
    budget: Budget,
    budget_used: Budget,
    selected: Vec<String>,
    exhausted: bool,
    warning: Option<String>,
) -> Result<SelectionResult> {
    // The reported value is recomputed from scratch so the result is
    // self-consistent even if incremental bookkeeping ever drifted.
    let report = coverage_report(&selected, m, w, params)?;
    Ok(SelectionResult {
        algorithm: algorithm.to_string(),
        budget,
        selected,
        value: report.weighted_value,
        exhausted,
        report,
        budget_used,
        warning,
    })
}

/// Exhaustive search over all size-`budget` subsets. Subsets are enumerated
/// lexicographically in canonical practice order and the first maximizer
/// wins, so results are deterministic. Requires 1 <= budget <= |P|.
pub fn brute_force_select(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    budget: usize,
) -> Result<SelectionResult> {
    if budget < 1 || budget > m.practice_count() {
        return Err(Error::validation(format!(
            "budget {budget} outside 1..={} for exhaustive search",
            m.practice_count()
        )));
    }
    let order = canonical_order(m);
    let mut best: Option<(Value, Vec<usize>)> = None;
    for combo in order.iter().copied().combinations(budget) {
        let mut state = SelectionState::new(m, w, params);
        for &p in &combo {
            state.add(p);
        }
        let value = state.value;
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, combo));
        }
    }
    let (_, combo) = best.expect("budget >= 1 and practices non-empty");
    finish(
        m,
        w,
        params,
        "brute",
        Budget::Count(budget),
        Budget::Count(combo.len()),
        ids_of(m, &combo),
        false,
        None,
    )
}

/// Greedy selection, one practice per round by the given gain rule, ties to
/// the canonical-order earliest. Stops early when every sub-characteristic
/// is saturated or no practices remain; `exhausted` records an early stop.
/// Budgets above |P| are allowed.
pub fn greedy_select_with(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    budget: usize,
    rule: GainRule,
) -> Result<SelectionResult> {
    if budget < 1 {
        return Err(Error::validation("budget must be at least 1".to_string()));
    }
    let order = canonical_order(m);
    let mut state = SelectionState::new(m, w, params);
    let mut exhausted = false;
    while state.selected.len() < budget {
        if state.all_saturated() {
            exhausted = true;
            break;
        }
        let mut best: Option<(i64, usize)> = None;
        for &p in &order {
            if state.in_selection[p] {
                continue;
            }
            let key = match rule {
                GainRule::Weighted => state.weighted_gain(p).as_micros(),
                GainRule::LegacyRawSum => state.legacy_gain(p).as_millis(),
            };
            if best.as_ref().is_none_or(|(k, _)| key > *k) {
                best = Some((key, p));
            }
        }
        match best {
            Some((_, p)) => state.add(p),
            None => {
                exhausted = true;
                break;
            }
        }
    }
    let algorithm = match rule {
        GainRule::Weighted => "greedy",
        GainRule::LegacyRawSum => "greedy-legacy",
    };
    let selected = ids_of(m, &state.selected);
    finish(
        m,
        w,
        params,
        algorithm,
        Budget::Count(budget),
        Budget::Count(selected.len()),
        selected,
        exhausted,
        None,
    )
}

/// Greedy selection with the exact weighted marginal gain.
pub fn greedy_select(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    budget: usize,
) -> Result<SelectionResult> {
    greedy_select_with(m, w, params, budget, GainRule::Weighted)
}

/// Cost-aware selection: density greedy (gain per cost, exact cross-product
/// comparison) run until nothing affordable remains, compared against the
/// best affordable single practice; the better of the two is returned.
/// A budget below every cost yields an empty selection with a warning.
pub fn knapsack_select(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    costs: &CostTable,
    budget: Score,
) -> Result<SelectionResult> {
    if budget <= Score::ZERO {
        return Err(Error::validation(format!(
            "budget must be positive, got {budget}"
        )));
    }
    let mut missing: Vec<&str> = m
        .practices()
        .iter()
        .filter(|p| !costs.costs.contains_key(*p))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::validation(format!(
            "missing cost entries for: {}",
            missing.join(", ")
        )));
    }
    let order = canonical_order(m);
    let cost_of: Vec<Score> = m.practices().iter().map(|p| costs.costs[p]).collect();

    let mut state = SelectionState::new(m, w, params);
    let mut remaining = budget;
    let mut exhausted = false;
    loop {
        if state.all_saturated() {
            exhausted = true;
            break;
        }
        let mut best: Option<(Value, Score, usize)> = None;
        for &p in &order {
            if state.in_selection[p] || cost_of[p] > remaining {
                continue;
            }
            let gain = state.weighted_gain(p);
            let better = match &best {
                None => true,
                Some((bg, bc, _)) => {
                    // gain/cost > best_gain/best_cost, compared exactly.
                    i128::from(gain.as_micros()) * i128::from(bc.as_millis())
                        > i128::from(bg.as_micros()) * i128::from(cost_of[p].as_millis())
                }
            };
            if better {
                best = Some((gain, cost_of[p], p));
            }
        }
        match best {
            Some((_, cost, p)) => {
                state.add(p);
                remaining = remaining - cost;
            }
            None => break,
        }
    }

    // Best affordable singleton, for the classical approximation guarantee.
    let mut best_single: Option<(Value, usize)> = None;
    for &p in &order {
        if cost_of[p] > budget {
            continue;
        }
        let mut single = SelectionState::new(m, w, params);
        let value = single.weighted_gain(p);
        single.add(p);
        if best_single.as_ref().is_none_or(|(v, _)| value > *v) {
            best_single = Some((value, p));
        }
    }

    let greedy_value = state.value;
    let (selected, used, exhausted) = match best_single {
        Some((single_value, p)) if single_value > greedy_value => (vec![p], cost_of[p], false),
        _ => {
            let used = state
                .selected
                .iter()
                .fold(Score::ZERO, |acc, &p| acc + cost_of[p]);
            (state.selected.clone(), used, exhausted)
        }
    };
    let warning = if selected.is_empty() {
        Some(format!(
            "budget {budget} is below the cost of every practice; nothing selected"
        ))
    } else {
        None
    };
    finish(
        m,
        w,
        params,
        "knapsack",
        Budget::Cost(budget),
        Budget::Cost(used),
        ids_of(m, &selected),
        exhausted,
        warning,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub budget: usize,
    pub coverage_fraction: f64,
    pub value: Value,
}

/// Coverage as a function of budget along a single greedy chain, one point
/// per budget 1..=|P|. Greedy prefixes are optimal-per-round, so the point
/// at budget b matches `greedy_select` with that budget. Once coverage is
/// full the curve extends flat.
pub fn coverage_curve(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
) -> Result<Vec<CurvePoint>> {
    let order = canonical_order(m);
    let mut state = SelectionState::new(m, w, params);
    let mut points: Vec<CurvePoint> = Vec::with_capacity(m.practice_count());
    for budget in 1..=m.practice_count() {
        if state.covered_fraction() < 1.0 {
            let mut best: Option<(i64, usize)> = None;
            for &p in &order {
                if state.in_selection[p] {
                    continue;
                }
                let key = state.weighted_gain(p).as_micros();
                if best.as_ref().is_none_or(|(k, _)| key > *k) {
                    best = Some((key, p));
                }
            }
            if let Some((_, p)) = best {
                state.add(p);
            }
        }
        points.push(CurvePoint {
            budget,
            coverage_fraction: state.covered_fraction(),
            value: state.value,
        });
    }
    Ok(points)
}

/// CSV form of a curve: `budget,coverage_fraction,value`.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("budget,coverage_fraction,value\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.budget, p.coverage_fraction, p.value
        ));
    }
    out
}

/// Exact number of size-`b` subsets of `n` practices.
pub fn search_space_size(n: u64, b: u64) -> Result<BigUint> {
    if b > n {
        return Err(Error::validation(format!(
            "subset size {b} exceeds the number of practices {n}"
        )));
    }
    let mut acc = BigUint::from(1u32);
    for i in 1..=b {
        acc *= BigUint::from(n - b + i);
        acc /= BigUint::from(i);
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubmodularityCheck {
    pub trials: u64,
    pub violations: u64,
    pub monotonicity_violations: u64,
    /// Minimum of delta_a - delta_ab over all trials; negative means a
    /// submodularity violation was observed.
    pub worst_margin: Value,
}

/// Empirically checks diminishing returns: for random X and practices a, b
/// outside X, the gain of a on X must be at least its gain on X + b, and
/// adding a practice must never lower the objective. Each trial uses an
/// independent stream keyed by `seed ^ trial`, so the check is reproducible
/// and order-independent.
pub fn verify_submodularity(
    m: &InfluenceMatrix,
    w: &WeightVector,
    params: CoverageParams,
    trials: u64,
    seed: u64,
) -> Result<SubmodularityCheck> {
    if m.practice_count() < 2 {
        return Err(Error::validation(
            "submodularity check needs at least two practices".to_string(),
        ));
    }
    if trials < 1 {
        return Err(Error::validation("trials must be at least 1".to_string()));
    }
    let n = m.practice_count();
    let value_of = |indices: &BTreeSet<usize>| -> Value {
        let mut state = SelectionState::new(m, w, params);
        for &p in indices {
            state.add(p);
        }
        state.value
    };
    let mut violations = 0u64;
    let mut monotonicity_violations = 0u64;
    let mut worst_margin: Option<Value> = None;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial);
        let a = rng.gen_range(0..n);
        let b = loop {
            let b = rng.gen_range(0..n);
            if b != a {
                break b;
            }
        };
        let mut x: BTreeSet<usize> = BTreeSet::new();
        for p in 0..n {
            if p != a && p != b && rng.gen_bool(0.5) {
                x.insert(p);
            }
        }
        let f_x = value_of(&x);
        let mut xa = x.clone();
        xa.insert(a);
        let f_xa = value_of(&xa);
        let mut xb = x.clone();
        xb.insert(b);
        let f_xb = value_of(&xb);
        let mut xab = xa.clone();
        xab.insert(b);
        let f_xab = value_of(&xab);

        let delta_a = f_xa - f_x;
        let delta_a_after_b = f_xab - f_xb;
        let margin = delta_a - delta_a_after_b;
        if margin < Value::ZERO {
            violations += 1;
        }
        if f_xa < f_x {
            monotonicity_violations += 1;
        }
        worst_margin = Some(match worst_margin {
            Some(wm) => wm.min(margin),
            None => margin,
        });
    }
    Ok(SubmodularityCheck {
        trials,
        violations,
        monotonicity_violations,
        worst_margin: worst_margin.expect("at least one trial"),
    })
}
