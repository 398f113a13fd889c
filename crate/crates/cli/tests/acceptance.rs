//! Acceptance suite: one test per release criterion, library-level where the
//! criterion is about the math, binary-level where it is about the tool.
//! Each test prints exactly one pass/fail line under the standard harness.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcover::agreement::{cohen_kappa, collapsed_kappa, plain_agreement, practical_agreement};
use qcover::coverage::{coverage_report, coverage_value, CoverageParams, WeightVector};
use qcover::optimizer::{
    brute_force_select, coverage_curve, greedy_select, search_space_size, verify_submodularity,
};
use qcover::score::{Score, Value};
use qcover::scores::{parse_matrix, scale_matrix, scale_score, InfluenceMatrix, ScaleState};
use qcover::sensitivity::sensitivity_run;

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name]
        .iter()
        .collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path:?}: {e}"))
}

fn fixture_path(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name]
        .iter()
        .collect();
    path.to_str().unwrap().to_string()
}

/// Random objective instance: raw or scaled matrix, random weights, random k.
fn random_instance(
    rng: &mut ChaCha8Rng,
    max_p: usize,
    max_c: usize,
) -> (InfluenceMatrix, WeightVector, CoverageParams) {
    let n_p = rng.gen_range(2..=max_p);
    let n_c = rng.gen_range(1..=max_c);
    let p_names: Vec<String> = (0..n_p).map(|i| format!("p{i:02}")).collect();
    let c_names: Vec<String> = (0..n_c).map(|i| format!("c{i:02}")).collect();
    let mut triplets: Vec<(&str, &str, Score)> = Vec::new();
    for p in &p_names {
        for c in &c_names {
            triplets.push((c, p, Score::from_int(rng.gen_range(0..=4))));
        }
    }
    let mut m = InfluenceMatrix::from_triplets(ScaleState::Raw, &triplets).unwrap();
    if rng.gen_bool(0.5) {
        m = scale_matrix(&m).unwrap();
    }
    let weights = c_names
        .iter()
        .map(|c| (c.clone(), Score::from_millis(rng.gen_range(0..=1000))))
        .collect();
    let w = WeightVector::new(weights, Score::ONE).unwrap();
    let max_k = match m.scale_state() {
        ScaleState::Raw => 8,
        ScaleState::Scaled => 24,
    };
    let params = CoverageParams::new(Score::from_int(rng.gen_range(1..=max_k))).unwrap();
    (m, w, params)
}

#[test]
fn criterion_01_scaling_anchors_are_exact() {
    let start = Instant::now();
    let anchors = [
        (0, 0),
        (1000, 1000),
        (2000, 2000),
        (2500, 4000),
        (3000, 6000),
        (3500, 15000),
        (4000, 24000),
    ];
    for (input, expected) in anchors {
        assert_eq!(
            scale_score(Score::from_millis(input)).unwrap(),
            Score::from_millis(expected),
            "scale({input} millis)"
        );
    }
    assert!(start.elapsed() < Duration::from_secs(1));
}

#[test]
fn criterion_02_worked_coverage_example_is_exact() {
    let m = parse_matrix(&fixture("understandability.tsv")).unwrap();
    let w = WeightVector::uniform();
    let params = CoverageParams::new(Score::from_int(10)).unwrap();

    let strong = ["Documentation", "Peer Code Review", "Error Analysis"];
    let value = coverage_value(&strong, &m, &w, params).unwrap();
    assert_eq!(value.as_micros(), 10_000_000);
    let report = coverage_report(&strong, &m, &w, params).unwrap();
    assert!(report.subcharacteristics[0].covered);

    let weak = [
        "Logging of Metadata And Artifacts",
        "Data Versioning",
        "Alerting",
    ];
    let value = coverage_value(&weak, &m, &w, params).unwrap();
    assert_eq!(value.as_micros(), 3_000_000);
    let report = coverage_report(&weak, &m, &w, params).unwrap();
    assert!(!report.subcharacteristics[0].covered);
}

#[test]
fn criterion_03_search_space_sizes_are_exact() {
    // Independent oracle: Pascal's triangle, additions only.
    fn binom_pascal(n: usize, b: usize) -> u128 {
        let mut row = vec![0u128; b + 1];
        row[0] = 1;
        for _ in 0..n {
            for j in (1..=b).rev() {
                row[j] += row[j - 1];
            }
        }
        row[b]
    }
    assert_eq!(search_space_size(41, 3).unwrap().to_string(), "10660");
    assert_eq!(search_space_size(41, 10).unwrap().to_string(), "1121099408");
    assert_eq!(binom_pascal(41, 3), 10_660);
    assert_eq!(binom_pascal(41, 10), 1_121_099_408);
    assert_eq!(
        search_space_size(41, 10).unwrap().to_string(),
        binom_pascal(41, 10).to_string()
    );
}

#[test]
fn criterion_04_no_submodularity_violations_in_ten_thousand_trials() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut trials = 0;
    for i in 0..100u64 {
        let (m, w, params) = random_instance(&mut rng, 15, 10);
        let check = verify_submodularity(&m, &w, params, 100, 9000 + i).unwrap();
        trials += check.trials;
        assert_eq!(
            check.violations, 0,
            "matrix {i} violated diminishing returns"
        );
        assert_eq!(
            check.monotonicity_violations, 0,
            "matrix {i} violated monotonicity"
        );
        assert!(check.worst_margin >= Value::ZERO);
    }
    assert_eq!(trials, 10_000);
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn criterion_05_greedy_meets_the_classic_guarantee() {
    let start = Instant::now();
    // (1 - 1/e) to 15 decimal digits; the comparison stays in integers.
    const BOUND_NUM: i128 = 632_120_558_828_557;
    const BOUND_DEN: i128 = 1_000_000_000_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..500 {
        let (m, w, params) = random_instance(&mut rng, 12, 8);
        let budget = rng.gen_range(1..=4.min(m.practice_count()));
        let brute = brute_force_select(&m, &w, params, budget).unwrap();
        let greedy = greedy_select(&m, &w, params, budget).unwrap();
        assert!(
            brute.value >= greedy.value,
            "instance {i}: brute {} below greedy {}",
            brute.value,
            greedy.value
        );
        assert!(
            i128::from(greedy.value.as_micros()) * BOUND_DEN
                >= BOUND_NUM * i128::from(brute.value.as_micros()),
            "instance {i}: greedy {} below the guarantee against {}",
            greedy.value,
            brute.value
        );
    }
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn criterion_06_counterexample_separates_brute_from_greedy() {
    let m = parse_matrix(&fixture("demo.tsv")).unwrap();
    let w = WeightVector::uniform();
    let params = CoverageParams::new(Score::from_int(4)).unwrap();
    let brute = brute_force_select(&m, &w, params, 2).unwrap();
    assert_eq!(brute.selected, vec!["p1", "p3"]);
    assert_eq!(brute.value.as_micros(), 8_000_000);
    let greedy = greedy_select(&m, &w, params, 2).unwrap();
    assert_eq!(greedy.value.as_micros(), 7_000_000);
    // Strictly sub-optimal, yet within the guarantee: 7 >= (1 - 1/e) * 8.
    assert!(greedy.value < brute.value);
    assert!(
        i128::from(greedy.value.as_micros()) * 1_000_000_000_000_000
            >= 632_120_558_828_557 * 8_000_000
    );
}

#[test]
fn criterion_07_curve_is_monotone_and_ends_at_full_selection() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (m, w, params) = random_instance(&mut rng, 10, 8);
        let curve = coverage_curve(&m, &w, params).unwrap();
        assert_eq!(curve.len(), m.practice_count());
        for pair in curve.windows(2) {
            assert!(pair[1].coverage_fraction >= pair[0].coverage_fraction);
            assert!(pair[1].value >= pair[0].value);
        }
        let all: Vec<String> = m.practices().to_vec();
        let full = coverage_report(&all, &m, &w, params).unwrap();
        let last = curve.last().unwrap();
        assert_eq!(last.coverage_fraction, full.coverage_fraction);
        assert_eq!(last.value, full.weighted_value);
        // Each curve point is the greedy run at that budget.
        for point in &curve {
            let run = greedy_select(&m, &w, params, point.budget).unwrap();
            assert_eq!(point.value, run.value);
            assert_eq!(point.coverage_fraction, run.report.coverage_fraction);
        }
    }
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn criterion_08_agreement_orderings_hold_on_random_pairs() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let n = rng.gen_range(2..=40);
        let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let plain = plain_agreement(&a, &b).unwrap();
        let practical = practical_agreement(&a, &b).unwrap();
        let kappa = cohen_kappa(&a, &b).unwrap();
        assert!(
            plain <= practical,
            "pair {i}: plain {plain} > practical {practical}"
        );
        assert!(
            kappa <= plain + 1e-12,
            "pair {i}: kappa {kappa} > plain {plain}"
        );
    }

    // Analytic zero: observed and chance agreement both 0.5.
    let a = [0u8, 0, 1, 1];
    let b = [0u8, 1, 0, 1];
    assert_eq!(cohen_kappa(&a, &b).unwrap(), 0.0);

    // The collapsing draw is a pure function of the seed.
    let a: Vec<u8> = (0..30).map(|_| rng.gen_range(0..=4)).collect();
    let b: Vec<u8> = (0..30).map(|_| rng.gen_range(0..=4)).collect();
    let first = collapsed_kappa(&a, &b, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let second = collapsed_kappa(&a, &b, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert_eq!(first.to_bits(), second.to_bits());

    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn criterion_09_sensitivity_degrades_monotonically_with_noise() {
    let start = Instant::now();
    // Fixed synthetic 10x10 integer matrix.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p_names: Vec<String> = (0..10).map(|i| format!("p{i:02}")).collect();
    let c_names: Vec<String> = (0..10).map(|i| format!("c{i:02}")).collect();
    let mut triplets: Vec<(&str, &str, Score)> = Vec::new();
    for p in &p_names {
        for c in &c_names {
            triplets.push((c, p, Score::from_int(rng.gen_range(0..=4))));
        }
    }
    let m = InfluenceMatrix::from_triplets(ScaleState::Raw, &triplets).unwrap();

    let unperturbed = sensitivity_run(&m, 0, 100, 0).unwrap();
    assert_eq!(unperturbed.mean_correlation, 1.0);
    assert_eq!(unperturbed.variance, 0.0);
    assert_eq!(unperturbed.skipped_iterations, 0);

    let d1 = sensitivity_run(&m, 1, 1000, 0).unwrap();
    let d2 = sensitivity_run(&m, 2, 1000, 0).unwrap();
    let d3 = sensitivity_run(&m, 3, 1000, 0).unwrap();
    assert!(
        d1.mean_correlation >= d2.mean_correlation,
        "delta 1 mean {} below delta 2 mean {}",
        d1.mean_correlation,
        d2.mean_correlation
    );
    assert!(
        d2.mean_correlation >= d3.mean_correlation,
        "delta 2 mean {} below delta 3 mean {}",
        d2.mean_correlation,
        d3.mean_correlation
    );
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn criterion_10_every_subcommand_is_byte_deterministic() {
    let annotations = fixture_path("annotations.tsv");
    let example = fixture_path("example_scores.tsv");
    let demo = fixture_path("demo.tsv");
    let extra = fixture_path("demo_extra.tsv");
    let sample = fixture_path("sample_scores.tsv");
    let model = fixture_path("quality_model.tsv");
    let costs = fixture_path("demo_costs.tsv");
    let invocations: Vec<Vec<&str>> = vec![
        vec!["aggregate", "--scores", &annotations],
        vec!["scale", "--scores", &example],
        vec!["merge", "--scores", &demo, "--scores", &extra],
        vec![
            "agreement",
            "--scores",
            &annotations,
            "--metric",
            "kappa-practical",
            "--seed",
            "7",
        ],
        vec!["coverage", "--scores", &sample, "--model", &model],
        vec![
            "optimize",
            "--scores",
            &demo,
            "--budget",
            "2",
            "--algorithm",
            "brute",
        ],
        vec![
            "optimize",
            "--scores",
            &demo,
            "--algorithm",
            "knapsack",
            "--costs",
            &costs,
            "--budget",
            "2",
        ],
        vec!["curve", "--scores", &sample],
        vec![
            "sensitivity",
            "--scores",
            &example,
            "--iterations",
            "100",
            "--seed",
            "3",
        ],
        vec![
            "check-submodular",
            "--scores",
            &demo,
            "--trials",
            "300",
            "--seed",
            "5",
        ],
        vec!["search-space", "--n", "41", "--b", "10"],
    ];
    for args in &invocations {
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_qcover"))
                .args(args)
                .output()
                .expect("binary runs")
        };
        let first = run();
        let second = run();
        assert!(
            first.status.success(),
            "qcover {args:?} failed: {}",
            String::from_utf8_lossy(&first.stderr)
        );
        assert_eq!(first.status.code(), second.status.code());
        assert_eq!(first.stdout, second.stdout, "stdout differs for {args:?}");
        assert_eq!(first.stderr, second.stderr, "stderr differs for {args:?}");
        assert!(!first.stdout.is_empty(), "no output for {args:?}");
    }
}
