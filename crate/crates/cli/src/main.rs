//! Command-line front end for the qcover library: ingest score tables,
//! aggregate and scale them, and run the agreement, coverage, selection,
//! and sensitivity analyses.
//!
//! Data documents go to standard output (or `--output`); diagnostics and
//! warnings go to standard error. Exit codes: 0 success, 1 validation
//! error, 2 parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcover::agreement::{pairwise_stats, stats_to_csv, AgreementMetric};
use qcover::coverage::{
    coverage_report, parse_weights, report_to_csv, CoverageParams, WeightVector,
};
use qcover::optimizer::{
    brute_force_select, coverage_curve, curve_to_csv, greedy_select_with, knapsack_select,
    search_space_size, verify_submodularity, GainRule,
};
use qcover::score::Score;
use qcover::scores::{
    aggregate, merge_matrices, parse_annotations, parse_costs, parse_drop_list, parse_matrix,
    scale_matrix, serialize_matrix, Aggregation, InfluenceMatrix, ScaleState,
};
use qcover::sensitivity::{sensitivity_run, sensitivity_to_csv};
use qcover::sqm::load_quality_model;
use qcover::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qcover",
    version,
    about = "Coverage analysis of engineering practices against a quality model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate per-annotator integer levels into a single score matrix
    Aggregate(AggregateArgs),
    /// Apply the influence scaling to a raw score matrix
    Scale(ScaleArgs),
    /// Merge score matrices, optionally dropping practices per source
    Merge(MergeArgs),
    /// Inter-annotator agreement over every annotator pair
    Agreement(AgreementArgs),
    /// Coverage report for a selection of practices
    Coverage(CoverageArgs),
    /// Select a practice set maximizing coverage under a budget
    Optimize(OptimizeArgs),
    /// Greedy coverage at every budget from 1 to the practice count
    Curve(CurveArgs),
    /// Rank stability of sub-characteristic totals under level noise
    Sensitivity(SensitivityArgs),
    /// Randomized check that the objective is monotone and submodular
    CheckSubmodular(CheckSubmodularArgs),
    /// Number of practice subsets of a given size
    SearchSpace(SearchSpaceArgs),
}

/// Flags shared by every subcommand that reads a scores file.
#[derive(Args)]
struct InputArgs {
    /// Scores TSV: one score column is a matrix, several are annotator levels
    #[arg(long)]
    scores: PathBuf,
    /// How to aggregate annotator columns when the input has several
    #[arg(long, default_value = "median")]
    method: Aggregation,
    /// Quality model TSV; reorders matrix columns to the model's order
    #[arg(long)]
    model: Option<PathBuf>,
}

/// Flags shared by the analyses that evaluate the coverage objective.
#[derive(Args)]
struct ObjectiveArgs {
    /// Sub-characteristic weights TSV; omitted weights default to 1
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Coverage threshold in score points
    #[arg(long, default_value = "24")]
    k: Score,
    /// Keep raw levels instead of applying the scaling step
    #[arg(long)]
    no_scale: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    /// Scores TSV, one per source (repeat the flag)
    #[arg(long, required = true)]
    scores: Vec<PathBuf>,
    /// How to aggregate annotator columns when an input has several
    #[arg(long, default_value = "median")]
    method: Aggregation,
    /// Drop list (one practice id per line): none, one for all sources,
    /// or one per source
    #[arg(long)]
    drop: Vec<PathBuf>,
    /// Quality model TSV; reorders merged columns to the model's order
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AgreementArgs {
    /// Annotation TSV with one integer-level column per annotator
    #[arg(long)]
    scores: PathBuf,
    /// plain, practical, kappa, or kappa-practical
    #[arg(long, default_value = "kappa")]
    metric: AgreementMetric,
    /// Seed for the tie-collapsing draws of kappa-practical
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Restrict the report to these sub-characteristics (comma-separated)
    #[arg(long, value_delimiter = ',')]
    subchars: Vec<String>,
    /// The selected practices (comma-separated); defaults to all of them
    #[arg(long, value_delimiter = ',')]
    practices: Vec<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Practice count for greedy/brute, spend limit for knapsack
    #[arg(long)]
    budget: String,
    #[arg(long, value_enum, default_value_t = Algorithm::Greedy)]
    algorithm: Algorithm,
    /// Greedy only: rank candidates by raw uncovered influence instead of
    /// exact weighted marginal gain
    #[arg(long)]
    legacy_gain: bool,
    /// Per-practice costs TSV, required by the knapsack algorithm
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Half-width of the uniform integer perturbation of each level
    #[arg(long, default_value_t = 1)]
    delta: u8,
    #[arg(long, default_value_t = 1000)]
    iterations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckSubmodularArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SearchSpaceArgs {
    /// Total number of practices
    #[arg(long)]
    n: u64,
    /// Subset size
    #[arg(long)]
    b: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Greedy,
    Brute,
    Knapsack,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Scale(args) => cmd_scale(args),
        Command::Merge(args) => cmd_merge(args),
        Command::Agreement(args) => cmd_agreement(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
        Command::CheckSubmodular(args) => cmd_check_submodular(args),
        Command::SearchSpace(args) => cmd_search_space(args),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: serde::Serialize>(output: Option<&PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("cannot serialize result: {e}")))?;
    text.push('\n');
    emit(output, &text)
}

/// Reads a scores file as a matrix, aggregating annotator columns first
/// when the file carries more than one score column.
fn load_scores(path: &Path, method: Aggregation) -> Result<InfluenceMatrix> {
    let doc = read_file(path)?;
    let score_columns = doc
        .lines()
        .next()
        .map(|l| l.split('\t').count().saturating_sub(2))
        .unwrap_or(0);
    if score_columns >= 2 {
        aggregate(&parse_annotations(&doc)?, method)
    } else {
        parse_matrix(&doc)
    }
}

/// Full input pipeline for the analysis commands: load, align to the model
/// if one is given, and scale raw levels unless that step is disabled.
fn prepare_matrix(input: &InputArgs, no_scale: bool) -> Result<InfluenceMatrix> {
    let mut m = load_scores(&input.scores, input.method)?;
    if let Some(model_path) = &input.model {
        let model = load_quality_model(&read_file(model_path)?)?;
        m = m.aligned_to_model(&model)?;
    }
    if !no_scale && m.scale_state() == ScaleState::Raw {
        m = scale_matrix(&m)?;
    }
    Ok(m)
}

fn load_weight_vector(path: Option<&PathBuf>) -> Result<WeightVector> {
    match path {
        Some(p) => parse_weights(&read_file(p)?),
        None => Ok(WeightVector::uniform()),
    }
}

fn objective_inputs(
    input: &InputArgs,
    objective: &ObjectiveArgs,
) -> Result<(InfluenceMatrix, WeightVector, CoverageParams)> {
    let m = prepare_matrix(input, objective.no_scale)?;
    let w = load_weight_vector(objective.weights.as_ref())?;
    let params = CoverageParams::new(objective.k)?;
    if m.scale_state() == ScaleState::Scaled && params.k <= Score::from_int(4) {
        eprintln!(
            "warning: threshold k = {} is at most 4 while scores are scaled to [0, 24]; \
             pass --no-scale or a larger --k if this is unintended",
            params.k
        );
    }
    Ok((m, w, params))
}

fn cmd_aggregate(args: AggregateArgs) -> Result<()> {
    let table = parse_annotations(&read_file(&args.input.scores)?)?;
    let mut m = aggregate(&table, args.input.method)?;
    if let Some(model_path) = &args.input.model {
        let model = load_quality_model(&read_file(model_path)?)?;
        m = m.aligned_to_model(&model)?;
    }
    emit(args.output.as_ref(), &serialize_matrix(&m))
}

fn cmd_scale(args: ScaleArgs) -> Result<()> {
    let m = prepare_matrix(&args.input, true)?;
    let scaled = scale_matrix(&m)?;
    emit(args.output.as_ref(), &serialize_matrix(&scaled))
}

fn cmd_merge(args: MergeArgs) -> Result<()> {
    let sources = args
        .scores
        .iter()
        .map(|p| load_scores(p, args.method))
        .collect::<Result<Vec<_>>>()?;
    let drops = args
        .drop
        .iter()
        .map(|p| Ok(parse_drop_list(&read_file(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut merged = merge_matrices(&sources, &drops)?;
    if let Some(model_path) = &args.model {
        let model = load_quality_model(&read_file(model_path)?)?;
        merged = merged.aligned_to_model(&model)?;
    }
    emit(args.output.as_ref(), &serialize_matrix(&merged))
}

fn cmd_agreement(args: AgreementArgs) -> Result<()> {
    let table = parse_annotations(&read_file(&args.scores)?)?;
    let stats = pairwise_stats(&table, args.metric, args.seed)?;
    match args.format {
        ReportFormat::Json => emit_json(args.output.as_ref(), &stats),
        ReportFormat::Csv => emit(args.output.as_ref(), &stats_to_csv(&stats)),
    }
}

/// Restricts a matrix to the named sub-characteristics, in the given order.
fn project_subchars(m: &InfluenceMatrix, subset: &[String]) -> Result<InfluenceMatrix> {
    let mut triplets: Vec<(&str, &str, Score)> = Vec::new();
    for c in subset {
        let ci = m
            .subchar_index(c)
            .ok_or_else(|| Error::validation(format!("unknown sub-characteristic {c}")))?;
        for (pi, p) in m.practices().iter().enumerate() {
            triplets.push((c.as_str(), p.as_str(), m.value_at(pi, ci)));
        }
    }
    InfluenceMatrix::from_triplets(m.scale_state(), &triplets)
}

fn cmd_coverage(args: CoverageArgs) -> Result<()> {
    let (mut m, w, params) = objective_inputs(&args.input, &args.objective)?;
    if !args.subchars.is_empty() {
        m = project_subchars(&m, &args.subchars)?;
    }
    let selection: Vec<String> = if args.practices.is_empty() {
        m.practices().to_vec()
    } else {
        args.practices.clone()
    };
    let report = coverage_report(&selection, &m, &w, params)?;
    match args.format {
        ReportFormat::Json => emit_json(args.output.as_ref(), &report),
        ReportFormat::Csv => emit(args.output.as_ref(), &report_to_csv(&report)),
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    if args.legacy_gain && args.algorithm != Algorithm::Greedy {
        return Err(Error::validation(
            "--legacy-gain applies to the greedy algorithm only".to_string(),
        ));
    }
    if args.costs.is_some() && args.algorithm != Algorithm::Knapsack {
        return Err(Error::validation(
            "--costs applies to the knapsack algorithm only".to_string(),
        ));
    }
    let (m, w, params) = objective_inputs(&args.input, &args.objective)?;
    let result = match args.algorithm {
        Algorithm::Greedy => {
            let budget = parse_count_budget(&args.budget)?;
            let rule = if args.legacy_gain {
                GainRule::LegacyRawSum
            } else {
                GainRule::Weighted
            };
            greedy_select_with(&m, &w, params, budget, rule)?
        }
        Algorithm::Brute => {
            let budget = parse_count_budget(&args.budget)?;
            brute_force_select(&m, &w, params, budget)?
        }
        Algorithm::Knapsack => {
            let costs_path = args.costs.as_ref().ok_or_else(|| {
                Error::validation("the knapsack algorithm needs --costs".to_string())
            })?;
            let costs = parse_costs(&read_file(costs_path)?)?;
            let budget: Score = args.budget.parse().map_err(Error::validation)?;
            knapsack_select(&m, &w, params, &costs, budget)?
        }
    };
    if let Some(warning) = &result.warning {
        eprintln!("warning: {warning}");
    }
    emit_json(args.output.as_ref(), &result)
}

fn parse_count_budget(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| {
        Error::validation(format!(
            "budget must be a whole number of practices, got {s}"
        ))
    })
}

fn cmd_curve(args: CurveArgs) -> Result<()> {
    let (m, w, params) = objective_inputs(&args.input, &args.objective)?;
    let points = coverage_curve(&m, &w, params)?;
    emit(args.output.as_ref(), &curve_to_csv(&points))
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    // Perturbation happens on raw levels; scaling is part of each iteration.
    let m = prepare_matrix(&args.input, true)?;
    let result = sensitivity_run(&m, args.delta, args.iterations, args.seed)?;
    if result.skipped_iterations > 0 {
        eprintln!(
            "warning: {} of {} iterations had a constant perturbed ranking and were skipped",
            result.skipped_iterations, args.iterations
        );
    }
    match args.format {
        ReportFormat::Json => emit_json(args.output.as_ref(), &result),
        ReportFormat::Csv => emit(args.output.as_ref(), &sensitivity_to_csv(&result)),
    }
}

fn cmd_check_submodular(args: CheckSubmodularArgs) -> Result<()> {
    let (m, w, params) = objective_inputs(&args.input, &args.objective)?;
    let check = verify_submodularity(&m, &w, params, args.trials, args.seed)?;
    emit_json(args.output.as_ref(), &check)
}

fn cmd_search_space(args: SearchSpaceArgs) -> Result<()> {
    let count = search_space_size(args.n, args.b)?;
    emit(args.output.as_ref(), &format!("{count}\n"))
}
