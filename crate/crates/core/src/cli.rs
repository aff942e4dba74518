//! Command-line front end for the `rr-opt` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::estimation::{mle, monte_carlo, sample_survey, SurveyDataset};
use crate::exponents::{chernoff_exponent, han_kobayashi, hoeffding_exponent, stein_exponent, ExponentResult};
use crate::information::{
    fisher_information, max_f_divergence, max_fisher, renyi_divergence, ConvexGenerator,
};
use crate::mechanisms::{
    greenberg, holohan, optimal_family, optimal_three_symbol, optimal_two_symbol, warner,
    OptimalFamilyParams,
};
use crate::model::{MechanismPair, MixtureParameter, PrivacyBudget};
use crate::privacy::{dp_delta, uc_security};
use crate::verify::{brute_force_max, SublinearObjective};

/// Largest admissible certification gap when the grid holds the optimizer.
pub const GRID_HIT_GAP: f64 = 1e-3;

/// Most negative gap tolerated before the search is said to beat the
/// closed form.
pub const SOUNDNESS_SLACK: f64 = 1e-9;

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  usage error (bad or missing flags, unreadable files)
  3  domain error (parameter or constraint violation)
  4  metric/parameter mismatch
  5  certification failure (search beat or missed the closed form)";

#[derive(Debug, Parser)]
#[command(name = "rr-opt", version, about = "Optimal binary randomized response under an l1 privacy budget", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a mechanism pair as JSON.
    Mech(MechArgs),
    /// Evaluate a metric of a mechanism read from a JSON file.
    Eval(EvalArgs),
    /// Write a CSV sweep over theta.
    Sweep(SweepArgs),
    /// Simulate surveys and estimate theta, or estimate from a counts CSV.
    Simulate(SimulateArgs),
    /// Certify a closed-form maximum against a brute-force search.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Optimal3,
    Optimal2,
    Warner,
    Greenberg,
    Holohan,
    Family,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct MechArgs {
    #[arg(long, value_enum)]
    pub scheme: Scheme,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub weight: f64,
    /// Required by optimal2 and holohan.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Greenberg innocuous-question probability.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// JSON file `{"b": [...], "r1": .., "r2": .., "r3": ..}` for the family scheme.
    #[arg(long)]
    pub family_spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Fisher,
    Uc,
    Dp,
    Renyi,
    Kl,
    Chernoff,
    Stein,
    Hoeffding,
    Hk,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct EvalArgs {
    /// Mechanism JSON file.
    #[arg(long)]
    pub mech: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    /// Weight of the l1 measure (uc only, default 0.5).
    #[arg(long)]
    pub weight: Option<f64>,
    /// Rényi order parameter; the order is 1 + s.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Type-I exponent constraint for hoeffding and hk.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Privacy loss for dp (default 0).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct SweepArgs {
    /// 2: max Fisher for two vs three symbols; 3: Fisher of each scheme;
    /// 4: max relative entropy over (theta1, theta2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    pub figure: u8,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub weight: f64,
    /// Interior grid size N; theta_i = i / (N + 1).
    #[arg(long, default_value_t = 99, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid: u32,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct SimulateArgs {
    /// Mechanism JSON file.
    #[arg(long)]
    pub mech: PathBuf,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Respondents per survey.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Estimate from this `symbol,count` CSV instead of simulating.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also write the counts of the first simulated survey to this CSV.
    #[arg(long)]
    pub save_counts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    Fisher,
    Kl,
    Renyi,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub objective: ObjectiveKind,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub weight: f64,
    /// Alphabet size (2 or 3).
    #[arg(long, default_value_t = 3)]
    pub size: usize,
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// Random feasible-pair draws.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Compare against this value instead of the closed form.
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Input(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Certification(_) => 5,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Run a parsed command, writing its output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Mech(args) => cmd_mech(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Sweep(args) => cmd_sweep(&args, out),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_pair(path: &Path) -> CliResult<MechanismPair> {
    MechanismPair::from_json(&read_file(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn theta(value: f64) -> CliResult<MixtureParameter> {
    Ok(MixtureParameter::new(value)?)
}

fn require(value: Option<f64>, flag: &str, context: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("{context} requires --{flag}")))
}

#[derive(Deserialize)]
struct FamilySpec {
    b: Vec<f64>,
    r1: usize,
    r2: usize,
    r3: usize,
}

pub fn cmd_mech(args: &MechArgs, out: &mut dyn Write) -> CliResult<()> {
    let pair = match args.scheme {
        Scheme::Optimal3 => optimal_three_symbol(&PrivacyBudget::new(args.delta, args.weight)?),
        Scheme::Optimal2 => {
            let budget = PrivacyBudget::new(args.delta, args.weight)?;
            optimal_two_symbol(&budget, theta(require(args.theta, "theta", "optimal2")?)?)?
        }
        Scheme::Warner => warner(args.delta)?,
        Scheme::Greenberg => greenberg(args.delta, args.eta)?,
        Scheme::Holohan => holohan(args.delta, theta(require(args.theta, "theta", "holohan")?)?)?,
        Scheme::Family => {
            let budget = PrivacyBudget::new(args.delta, args.weight)?;
            let path = args
                .family_spec
                .as_deref()
                .ok_or_else(|| CliError::Usage("family requires --family-spec".into()))?;
            let spec: FamilySpec = serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let params = OptimalFamilyParams::new(spec.b, spec.r1, spec.r2, spec.r3)?;
            optimal_family(&budget, &params)
        }
    };
    write_out(out, &format!("{}\n", pair.to_json()))
}

fn metric_name(metric: Metric) -> &'static str {
    match metric {
        Metric::Fisher => "fisher",
        Metric::Uc => "uc",
        Metric::Dp => "dp",
        Metric::Renyi => "renyi",
        Metric::Kl => "kl",
        Metric::Chernoff => "chernoff",
        Metric::Stein => "stein",
        Metric::Hoeffding => "hoeffding",
        Metric::Hk => "hk",
    }
}

// Flags each metric needs, and the ones it accepts beyond those.
fn metric_flags(metric: Metric) -> (&'static [&'static str], &'static [&'static str]) {
    match metric {
        Metric::Fisher => (&["theta"], &[]),
        Metric::Uc => (&[], &["weight"]),
        Metric::Dp => (&[], &["epsilon"]),
        Metric::Renyi => (&["theta1", "theta2", "s"], &[]),
        Metric::Kl | Metric::Chernoff | Metric::Stein => (&["theta1", "theta2"], &[]),
        Metric::Hoeffding | Metric::Hk => (&["theta1", "theta2", "rate"], &[]),
    }
}

fn check_metric_flags(args: &EvalArgs) -> CliResult<()> {
    let given = [
        ("theta", args.theta),
        ("theta1", args.theta1),
        ("theta2", args.theta2),
        ("weight", args.weight),
        ("s", args.s),
        ("rate", args.rate),
        ("epsilon", args.epsilon),
    ];
    let (required, optional) = metric_flags(args.metric);
    let name = metric_name(args.metric);
    for (flag, value) in given {
        let wanted = required.contains(&flag) || optional.contains(&flag);
        if value.is_some() && !wanted {
            return Err(CliError::Mismatch(format!("metric {name} does not take --{flag}")));
        }
        if value.is_none() && required.contains(&flag) {
            return Err(CliError::Mismatch(format!("metric {name} requires --{flag}")));
        }
    }
    Ok(())
}

fn exponent_json(name: &str, r: ExponentResult) -> Value {
    json!({ name: r.value, "s_star": r.s_star, "at_boundary": r.at_boundary })
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    check_metric_flags(args)?;
    let pair = load_pair(&args.mech)?;
    let name = metric_name(args.metric);
    let pick = |v: Option<f64>| theta(v.expect("checked by metric flags"));
    let value = match args.metric {
        Metric::Fisher => json!({ name: fisher_information(&pair, pick(args.theta)?)? }),
        Metric::Uc => {
            let w = args.weight.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParameter { name: "weight", value: w }.into());
            }
            json!({ name: uc_security(&pair, w) })
        }
        Metric::Dp => json!({ name: dp_delta(&pair, args.epsilon.unwrap_or(0.0))? }),
        Metric::Renyi => json!({
            name: renyi_divergence(&pair, pick(args.theta1)?, pick(args.theta2)?, args.s.expect("checked"))?
        }),
        Metric::Kl => json!({ name: renyi_divergence(&pair, pick(args.theta1)?, pick(args.theta2)?, 0.0)? }),
        Metric::Stein => json!({ name: stein_exponent(&pair, pick(args.theta1)?, pick(args.theta2)?)? }),
        Metric::Chernoff => {
            exponent_json(name, chernoff_exponent(&pair, pick(args.theta1)?, pick(args.theta2)?)?)
        }
        Metric::Hoeffding => exponent_json(
            name,
            hoeffding_exponent(&pair, pick(args.theta1)?, pick(args.theta2)?, args.rate.expect("checked"))?,
        ),
        Metric::Hk => exponent_json(
            name,
            han_kobayashi(&pair, pick(args.theta1)?, pick(args.theta2)?, args.rate.expect("checked"))?,
        ),
    };
    write_out(out, &format!("{value}\n"))
}

/// Interior grid `i / (N + 1)`, `i = 1..=N`.
pub fn sweep_grid(points: u32) -> Vec<f64> {
    let denom = f64::from(points) + 1.0;
    (1..=points).map(|i| f64::from(i) / denom).collect()
}

fn csv_line(values: &[f64]) -> String {
    let mut line = values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn sweep_csv(args: &SweepArgs) -> CliResult<String> {
    let budget = PrivacyBudget::new(args.delta, args.weight)?;
    let grid = sweep_grid(args.grid);
    let (header, rows): (&str, Vec<CliResult<Vec<f64>>>) = match args.figure {
        2 => (
            "theta,max_y2,max_y3",
            grid.par_iter()
                .map(|&t| {
                    let th = theta(t)?;
                    Ok(vec![t, max_fisher(&budget, th, 2)?, max_fisher(&budget, th, 3)?])
                })
                .collect(),
        ),
        3 => {
            let w = warner(args.delta)?;
            let g = greenberg(args.delta, 0.5)?;
            let opt = optimal_three_symbol(&budget);
            (
                "theta,warner,greenberg_eta_half,holohan,optimal3",
                grid.par_iter()
                    .map(|&t| {
                        let th = theta(t)?;
                        let h = holohan(args.delta, th)?;
                        Ok(vec![
                            t,
                            fisher_information(&w, th)?,
                            fisher_information(&g, th)?,
                            fisher_information(&h, th)?,
                            fisher_information(&opt, th)?,
                        ])
                    })
                    .collect(),
            )
        }
        _ => {
            let kl = ConvexGenerator::relative_entropy();
            let pairs: Vec<(f64, f64)> = grid
                .iter()
                .flat_map(|&t1| grid.iter().map(move |&t2| (t1, t2)))
                .collect();
            (
                "theta1,theta2,max_relative_entropy",
                pairs
                    .par_iter()
                    .map(|&(t1, t2)| Ok(vec![t1, t2, max_f_divergence(&budget, theta(t1)?, theta(t2)?, &kl)?]))
                    .collect(),
            )
        }
    };
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&csv_line(&row?));
    }
    Ok(text)
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = sweep_csv(args)?;
    match &args.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => write_out(out, &text),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let pair = load_pair(&args.mech)?;
    if let Some(path) = &args.data {
        let file = fs::File::open(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let data = SurveyDataset::from_csv(file)?;
        let estimate = mle(&pair, &data, args.alpha)?;
        let mut value = serde_json::to_value(estimate).expect("estimate serializes");
        value["n"] = json!(data.n());
        return write_out(out, &format!("{}\n", serde_json::to_string_pretty(&value).expect("json")));
    }
    let seed = args
        .seed
        .ok_or_else(|| CliError::Usage("simulate requires --seed".into()))?;
    let th = theta(require(args.theta, "theta", "simulate")?)?;
    let summary = monte_carlo(&pair, th, args.n, args.trials, seed, args.alpha)?;
    if let Some(path) = &args.save_counts {
        let file = fs::File::create(path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        sample_survey(&pair, th, args.n, seed).to_csv(file)?;
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_out(out, &format!("{text}\n"))
}

fn verify_objective(args: &VerifyArgs) -> CliResult<SublinearObjective> {
    let pick = |v: Option<f64>, flag: &str| -> CliResult<MixtureParameter> {
        theta(require(v, flag, "this objective")?)
    };
    Ok(match args.objective {
        ObjectiveKind::Fisher => SublinearObjective::fisher(pick(args.theta, "theta")?)?,
        ObjectiveKind::Kl => SublinearObjective::kl(pick(args.theta1, "theta1")?, pick(args.theta2, "theta2")?)?,
        ObjectiveKind::Renyi => {
            let (t1, t2) = (pick(args.theta1, "theta1")?, pick(args.theta2, "theta2")?);
            match require(args.s, "s", "renyi")? {
                0.0 => SublinearObjective::kl(t1, t2)?,
                s => SublinearObjective::renyi(t1, t2, s)?,
            }
        }
    })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let budget = PrivacyBudget::new(args.delta, args.weight)?;
    let obj = verify_objective(args)?;
    let mut report = brute_force_max(&budget, &obj, args.size, args.grid, args.samples, args.seed)?;
    if let Some(expect) = args.expect {
        report.closed_form_value = expect;
        report.gap = expect - report.best_value;
    }
    let mut value = serde_json::to_value(&report).expect("report serializes");
    let extra: Map<String, Value> = [
        ("acceptance_rate".to_string(), json!(report.acceptance_rate())),
        ("certified".to_string(), json!(certified(report.gap))),
    ]
    .into_iter()
    .collect();
    value.as_object_mut().expect("object").extend(extra);
    write_out(out, &format!("{}\n", serde_json::to_string_pretty(&value).expect("json")))?;
    if certified(report.gap) {
        Ok(())
    } else {
        Err(CliError::Certification(format!(
            "gap {} outside [-{SOUNDNESS_SLACK:e}, {GRID_HIT_GAP:e}]",
            report.gap
        )))
    }
}

fn certified(gap: f64) -> bool {
    (-SOUNDNESS_SLACK..=GRID_HIT_GAP).contains(&gap)
}
