//! Command-line front end. [`run`] parses arguments, dispatches, prints
//! and returns the process exit code.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::budget::{inf_epsilon, max_arms, max_leaves, sup_confidence, BudgetSpec, InversionResult};
use crate::error::{Error, Result};
use crate::formats::{
    params_to_csv, partition_from_str, partition_to_string, read_dataset, report_to_csv, table_to_csv,
};
use crate::math::Probability;
use crate::partition::{fit_honest_means, learn_tree, DataRole, Dataset, LearnerConfig};
use crate::planning::{power_curve, required_cell_size, CltVariant, GuaranteeScope, Method, OutcomeBounds, PlanningSpec};
use crate::simulate::{preset, run_simulation_with_threads, EventCoverage, SimulationPlan};
use crate::variance::{binary_outcome_variance, rare_deviation_variance, worst_case_variance, RareDeviationKnowledge};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

/// Caps the number of replicate worker threads.
pub const THREADS_ENV: &str = "PARTITION_POWER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "partition-power", version, about = "Sample-size planning for partitioned arm means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum cell size and total experiment size for a design.
    Plan(PlanArgs),
    /// Solve for one design parameter given an honest-sample budget.
    Invert(InvertArgs),
    /// Upper bound on the conditional outcome variance.
    BoundVariance(VarianceArgs),
    /// Learn an honest policy tree and write the partition document.
    LearnTree(LearnArgs),
    /// Fit honest cell means over a partition and query them.
    Estimate(EstimateArgs),
    /// Monte Carlo coverage of the planned guarantees.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Clt,
    Hoeffding,
    Bennett,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CltVariantArg {
    TwoSided,
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Random,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveFor {
    Arms,
    Leaves,
    Confidence,
    Epsilon,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    arms: Option<u32>,
    #[arg(long)]
    leaves: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "clt")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "two-sided")]
    clt_variant: CltVariantArg,
    #[arg(long, value_enum, default_value = "random")]
    scope: ScopeArg,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    honest_fraction: f64,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Comma-separated confidence levels for a power curve.
    #[arg(long, value_delimiter = ',')]
    curve: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InvertArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, value_enum)]
    solve_for: SolveFor,
    /// Honest-sample budget.
    #[arg(long)]
    budget: u64,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    anchor: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    honest: PathBuf,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long, default_value_t = 8)]
    max_leaves: usize,
    #[arg(long, default_value_t = 16)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_cell_size: usize,
    #[arg(long, default_value_t = 32)]
    candidates: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    required_cell_size: Option<usize>,
    /// Comma-separated feature vector; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    at: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with = "plan_file")]
    preset: Option<String>,
    /// JSON simulation plan.
    #[arg(long)]
    plan_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    test_points: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    params_out: Option<PathBuf>,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Estimation { .. } | Error::Learner(_) | Error::Convergence { .. } | Error::Bracket { .. } => {
            EXIT_ESTIMATION
        }
        Error::Replicate { source, .. } => exit_code(source),
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Plan(a) => cmd_plan(a),
        Command::Invert(a) => cmd_invert(a),
        Command::BoundVariance(a) => cmd_bound_variance(a),
        Command::LearnTree(a) => cmd_learn_tree(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn missing(flag: &str) -> Error {
    Error::Config(format!("missing --{flag}"))
}

/// Builds a planning spec; `fill` supplies placeholders for the parameter
/// being solved for.
fn build_spec(d: &DesignArgs, fill: Option<SolveFor>) -> Result<PlanningSpec> {
    let arms = match (d.arms, fill) {
        (Some(k), _) => k,
        (None, Some(SolveFor::Arms)) => 1,
        (None, _) => return Err(missing("arms")),
    };
    let leaves = match (d.leaves, fill) {
        (Some(l), _) => l,
        (None, Some(SolveFor::Leaves)) => 1,
        (None, None) => 1,
        (None, _) => return Err(missing("leaves")),
    };
    let alpha = match (d.alpha, fill) {
        (Some(a), _) => a,
        (None, Some(SolveFor::Confidence)) => 0.5,
        (None, _) => return Err(missing("alpha")),
    };
    let epsilon = match (d.epsilon, fill) {
        (Some(e), _) => e,
        (None, Some(SolveFor::Epsilon)) => 1.0,
        (None, _) => return Err(missing("epsilon")),
    };
    let method = match d.method {
        MethodArg::Clt => Method::Clt {
            variant: match d.clt_variant {
                CltVariantArg::TwoSided => CltVariant::TwoSidedLemma,
                CltVariantArg::OneSided => CltVariant::OneSidedProposition,
            },
        },
        MethodArg::Hoeffding => Method::Hoeffding,
        MethodArg::Bennett => Method::Bennett,
    };
    let bounds = match (d.lo, d.hi) {
        (Some(lo), Some(hi)) => Some(OutcomeBounds::new(lo, hi)?),
        (None, None) => None,
        (Some(_), None) => return Err(missing("hi")),
        (None, Some(_)) => return Err(missing("lo")),
    };
    let spec = PlanningSpec {
        arms,
        leaves,
        alpha,
        epsilon,
        bounds,
        sigma_sq: d.sigma_sq,
        scope: match d.scope {
            ScopeArg::Random => GuaranteeScope::RandomPoint,
            ScopeArg::Uniform => GuaranteeScope::UniformOverLeaves,
        },
        method,
        honest_fraction: d.honest_fraction,
    };
    if fill.is_none() {
        spec.validate()?;
    }
    Ok(spec)
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path, role: DataRole) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(file), role)
}

fn cmd_plan(a: PlanArgs) -> Result<String> {
    let spec = build_spec(&a.design, None)?;
    let req = required_cell_size(&spec)?;
    let mut out = String::new();
    if let Some(levels) = &a.curve {
        let grid = levels.iter().map(|&c| Probability::new(c)).collect::<Result<Vec<_>>>()?;
        let rows = power_curve(&spec, &grid)?;
        let mut csv = String::from("confidence,total_n\n");
        for (c, n) in rows {
            let _ = writeln!(csv, "{c},{n}");
        }
        match &a.out {
            Some(path) => write_out(path, &csv)?,
            None => out.push_str(&csv),
        }
        if a.out.is_none() {
            return Ok(out);
        }
    }
    match a.design.format {
        Format::Human => {
            let _ = writeln!(out, "method: {}", spec.method.name());
            let _ = writeln!(out, "min_cell_size: {}", req.min_cell_size);
            let _ = writeln!(out, "total_experiment_size: {}", req.total_experiment_size);
            let _ = writeln!(out, "exponent: {:.6}", req.exponent_used);
            let _ = writeln!(out, "raw_bound: {:.6}", req.raw_bound);
        }
        Format::Csv => {
            out.push_str("min_cell_size,total_experiment_size,exponent,raw_bound\n");
            let _ = writeln!(
                out,
                "{},{},{},{}",
                req.min_cell_size, req.total_experiment_size, req.exponent_used, req.raw_bound
            );
        }
    }
    Ok(out)
}

fn solve_name(s: SolveFor) -> &'static str {
    match s {
        SolveFor::Arms => "arms",
        SolveFor::Leaves => "leaves",
        SolveFor::Confidence => "confidence",
        SolveFor::Epsilon => "epsilon",
    }
}

fn cmd_invert(a: InvertArgs) -> Result<String> {
    let base = build_spec(&a.design, Some(a.solve_for))?;
    let budget = BudgetSpec::new(a.budget, base);
    let r: InversionResult = match a.solve_for {
        SolveFor::Arms => max_arms(&budget)?,
        SolveFor::Leaves => max_leaves(&budget)?,
        SolveFor::Confidence => sup_confidence(&budget)?,
        SolveFor::Epsilon => inf_epsilon(&budget)?,
    };
    let mut out = String::new();
    match a.design.format {
        Format::Human => {
            let _ = writeln!(out, "solve_for: {}", solve_name(a.solve_for));
            let _ = writeln!(out, "solved_value: {}", r.solved_value);
            let _ = writeln!(out, "feasible: {}", r.feasible);
            let _ = writeln!(out, "binding_bound: {:.6}", r.binding_bound);
        }
        Format::Csv => {
            out.push_str("solve_for,solved_value,feasible,binding_bound\n");
            let _ = writeln!(
                out,
                "{},{},{},{}",
                solve_name(a.solve_for),
                r.solved_value.as_f64(),
                r.feasible,
                r.binding_bound
            );
        }
    }
    Ok(out)
}

fn cmd_bound_variance(a: VarianceArgs) -> Result<String> {
    let mut candidates: Vec<(f64, &str)> = Vec::new();
    if a.binary {
        match a.rate {
            Some(rate) => candidates.push((binary_outcome_variance(rate)?, "binary_rare_outcome")),
            None => candidates.push((worst_case_variance(0.0, 1.0)?, "worst_case")),
        }
    }
    match (a.lo, a.hi) {
        (Some(lo), Some(hi)) => {
            candidates.push((worst_case_variance(lo, hi)?, "worst_case"));
            match (a.anchor, a.rate) {
                (Some(anchor), Some(rate)) => {
                    let k = RareDeviationKnowledge { anchor, rate, lo, hi };
                    candidates.push((rare_deviation_variance(&k)?, "rare_deviation"));
                }
                (Some(_), None) => return Err(missing("rate")),
                (None, Some(_)) if !a.binary => return Err(missing("anchor")),
                _ => {}
            }
        }
        (None, None) if a.binary => {}
        (None, None) => return Err(Error::Config("need --lo and --hi, or --binary".into())),
        (Some(_), None) => return Err(missing("hi")),
        (None, Some(_)) => return Err(missing("lo")),
    }
    // first minimum wins, so ties keep the more specific formula listed first
    let (value, formula) = candidates
        .iter()
        .copied()
        .fold((f64::INFINITY, ""), |best, c| if c.0 < best.0 { c } else { best });
    Ok(format!("sigma_sq: {value:.6}\nformula: {formula}\n"))
}

fn infer_arms(given: Option<usize>, sets: &[&Dataset]) -> Result<usize> {
    let arms = given.unwrap_or_else(|| sets.iter().map(|d| d.max_arm()).max().unwrap_or(0));
    if arms == 0 {
        return Err(Error::Config("cannot infer the number of arms from empty data; pass --arms".into()));
    }
    Ok(arms)
}

fn cmd_learn_tree(a: LearnArgs) -> Result<String> {
    let train = load_dataset(&a.train, DataRole::Train)?;
    let honest = load_dataset(&a.honest, DataRole::Honest)?;
    let arms = infer_arms(a.arms, &[&train, &honest])?;
    let config = LearnerConfig {
        max_leaves: a.max_leaves,
        max_depth: a.max_depth,
        min_cell_size: a.min_cell_size,
        candidate_quantiles: a.candidates,
    };
    let partition = learn_tree(&train, &honest, arms, &config)?;
    let doc = partition_to_string(&partition)?;
    match &a.out {
        Some(path) => {
            write_out(path, &doc)?;
            Ok(format!("leaves: {}\n", partition.leaf_count()))
        }
        None => Ok(doc),
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Config(format!("--at value '{t}' is not a finite number"))),
            }
        })
        .collect()
}

fn cmd_estimate(a: EstimateArgs) -> Result<String> {
    let partition = partition_from_str(&read_text(&a.partition)?)?;
    let data = load_dataset(&a.data, DataRole::Honest)?;
    let arms = infer_arms(a.arms, &[&data])?;
    let points = a.at.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?;
    let table = fit_honest_means(&partition, &data, arms)?;

    let mut out = String::new();
    let csv = table_to_csv(&table);
    match &a.out {
        Some(path) => write_out(path, &csv)?,
        None => out.push_str(&csv),
    }
    if let Some(required) = a.required_cell_size {
        let check = table.check_min_cell(required);
        let _ = writeln!(
            out,
            "check: {} (required {required}, smallest cell {})",
            check.passed, check.min_count
        );
        for v in &check.violations {
            let _ = writeln!(out, "  short: arm {} leaf {} count {}", v.arm, v.leaf, v.count);
        }
    }
    for x in &points {
        let leaf = partition.assign_leaf(x)?;
        let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "at [{}] leaf {leaf}", coords.join(", "));
        for w in 1..=arms {
            let _ = writeln!(out, "  mu_hat[{w}] = {:.6}", table.mu_hat(x, w)?);
        }
        for w in 1..=arms {
            for v in (w + 1)..=arms {
                let _ = writeln!(out, "  tau_hat[{w},{v}] = {:.6}", table.tau_hat(x, w, v)?);
            }
        }
        let (best, value) = table.best_arm(x)?;
        let _ = writeln!(out, "  best_arm = {best} ({value:.6})");
    }
    Ok(out)
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<String> {
    let mut plan: SimulationPlan = match (&a.preset, &a.plan_file) {
        (Some(name), None) => preset(name, a.seed.unwrap_or(0))?,
        (None, Some(path)) => serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?,
        _ => return Err(Error::Config("pass exactly one of --preset or --plan-file".into())),
    };
    if let Some(seed) = a.seed {
        plan.master_seed = seed;
    }
    if let Some(r) = a.replicates {
        plan.replicates = r;
    }
    if let Some(m) = a.test_points {
        plan.test_points = m;
    }
    plan.validate()?;
    let report = run_simulation_with_threads(&plan, thread_cap()?)?;
    if let Some(path) = &a.out {
        write_out(path, &report_to_csv(&report))?;
    }
    if let Some(path) = &a.params_out {
        write_out(path, &params_to_csv(&report))?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "replicates: {}", report.records.len());
    for (name, value) in EventCoverage::NAMES.iter().zip(report.aggregate.values()) {
        let _ = writeln!(out, "{name}: {value:.6}");
    }
    let _ = writeln!(out, "mean_leaf_count: {:.6}", report.mean_leaf_count);
    let _ = writeln!(out, "implication_violations: {}", report.total_implication_violations);
    Ok(out)
}
