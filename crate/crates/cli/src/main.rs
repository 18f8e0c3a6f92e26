//! `slope`: weight schedules, the sorted-L1 prox, model fitting and
//! Monte Carlo experiments from the command line.

mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use slope::check::{check_majorization_facts, check_prox_oracle};
use slope::estimators::{fdr_hard_threshold, sequential_fdr_soft, sure_soft_threshold};
use slope::simulation::{fdp_histogram, run_experiment, trials_csv, v_histogram, ExperimentConfig, SUPPORT_FLOOR};
use slope::weights::{inflated_bh_weights, sqrtlog_values};
use slope::{fit_slope, lasso_fit, prox_sorted_l1_with, Design, ProxMethod, SlopeFit, SolverOptions, WeightVector};

use crate::error::CliError;
use crate::io::{open_output, read_table, read_vector, read_weights, sidecar_path, write_column, write_file, write_indexed};

#[derive(Parser)]
#[command(name = "slope", version, about = "Sorted-L1 penalized regression (SLOPE)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a weight schedule as `index,lambda` rows.
    Weights(WeightsArgs),
    /// Apply the sorted-L1 prox to a vector.
    Prox(ProxArgs),
    /// Fit a model to a design and a response.
    Fit(FitArgs),
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Run the randomized property suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bh,
    Sqrtlog,
}

#[derive(Args)]
struct ScheduleArgs {
    /// FDR level of the BH schedule.
    #[arg(long, default_value_t = 0.1, value_parser = parse_probability)]
    q: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = Kind::Bh)]
    kind: Kind,
    /// Multiply the schedule by `1 + epsilon`.
    #[arg(long, default_value_t = 0.0, value_parser = parse_nonnegative)]
    epsilon: f64,
}

impl ScheduleArgs {
    /// Raw values; the sqrtlog schedule may be all zero (p = 1).
    fn values(&self, p: usize) -> Result<Vec<f64>, CliError> {
        Ok(match self.kind {
            Kind::Bh => inflated_bh_weights(self.q, self.epsilon, p, self.sigma)?.into_vec(),
            Kind::Sqrtlog => sqrtlog_values(p, self.sigma)?
                .into_iter()
                .map(|v| v * (1.0 + self.epsilon))
                .collect(),
        })
    }

    fn weights(&self, p: usize) -> Result<WeightVector, CliError> {
        Ok(WeightVector::new(self.values(p)?)?)
    }
}

#[derive(Args)]
struct WeightsArgs {
    /// Number of weights.
    #[arg(long, value_parser = parse_count)]
    p: usize,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an `index,lambda` header line.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct ProxArgs {
    /// Input vector, one column or one row.
    #[arg(long)]
    y: PathBuf,
    /// Weight vector file; otherwise the schedule flags build one.
    #[arg(long)]
    lambda: Option<PathBuf>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Run both prox algorithms and fail with exit code 3 if they disagree.
    #[arg(long)]
    check: bool,
    /// Skip one header line in each input file.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Slope,
    Lasso,
    FdrHard,
    SeqFdr,
    Sure,
}

#[derive(Args)]
struct FitArgs {
    /// Design matrix, one row per observation.
    #[arg(long)]
    x: PathBuf,
    /// Response, one value per observation.
    #[arg(long)]
    y: PathBuf,
    #[arg(long, value_enum, default_value_t = FitMethod::Slope)]
    method: FitMethod,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Lasso penalty; defaults to the first weight of the schedule.
    #[arg(long, value_parser = parse_positive)]
    lambda: Option<f64>,
    /// Target relative duality gap.
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
    tol: f64,
    #[arg(long, default_value_t = 20_000, value_parser = parse_count)]
    max_iter: usize,
    /// Skip one header line in each input file.
    #[arg(long)]
    header: bool,
    /// Coefficient file; the JSON sidecar goes next to it.
    #[arg(long, default_value = "beta_hat.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; the output does not depend on it.
    #[arg(long, value_parser = parse_count)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Random instances per property.
    #[arg(long, default_value_t = 500, value_parser = parse_count)]
    instances: usize,
    /// Largest dimension tried (at most 10).
    #[arg(long, default_value_t = 8, value_parser = parse_small_dim)]
    max_p: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be positive and finite".into())
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be nonnegative and finite".into())
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err("must be a positive integer".into()),
    }
}

fn parse_small_dim(s: &str) -> Result<usize, String> {
    match parse_count(s)? {
        v if v <= 10 => Ok(v),
        _ => Err("must be at most 10".into()),
    }
}

fn cmd_weights(args: &WeightsArgs) -> Result<(), CliError> {
    let values = args.schedule.values(args.p)?;
    let mut out = open_output(args.out.as_deref())?;
    write_indexed(&mut out, &values, args.header.then_some("lambda"))?;
    Ok(())
}

fn cmd_prox(args: &ProxArgs) -> Result<(), CliError> {
    let y = read_vector(&args.y, args.header)?;
    let lambda = match &args.lambda {
        Some(path) => WeightVector::new(read_weights(path, args.header)?)?,
        None => args.schedule.weights(y.len())?,
    };
    let method = if args.check { ProxMethod::Checked } else { ProxMethod::Stack };
    let b = prox_sorted_l1_with(&y, &lambda, method)?;
    let mut out = open_output(args.out.as_deref())?;
    write_column(&mut out, &b)?;
    Ok(())
}

fn read_problem(args: &FitArgs) -> Result<(Design, Vec<f64>), CliError> {
    let table = read_table(&args.x, args.header)?;
    let y = read_vector(&args.y, args.header)?;
    if y.len() != table.rows {
        return Err(CliError::Usage(format!(
            "{} has {} rows but {} has {} values",
            args.x.display(),
            table.rows,
            args.y.display(),
            y.len()
        )));
    }
    Ok((Design::new(table.rows, table.cols, table.data)?, y))
}

fn solver_sidecar(fit: &SlopeFit) -> serde_json::Value {
    json!({
        "converged": fit.converged,
        "iterations": fit.iterations,
        "duality_gap": fit.duality_gap,
        "relative_gap": fit.relative_gap,
        "kkt_majorization_ok": fit.kkt_majorization_ok,
        "objective": fit.objective,
    })
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let (x, y) = read_problem(args)?;
    let p = x.p();
    let opts = SolverOptions { max_iter: args.max_iter, tol: args.tol, ..SolverOptions::default() };
    let s = &args.schedule;
    let xty = || x.tr_mul_vec(&y);

    let (beta_hat, scale, mut sidecar) = match args.method {
        FitMethod::Slope => {
            let lambda = s.weights(p)?;
            let fit = fit_slope(&x, &y, &lambda, &opts)?;
            let side = solver_sidecar(&fit);
            (fit.beta_hat, lambda.first(), side)
        }
        FitMethod::Lasso => {
            let lam = match args.lambda {
                Some(l) => l,
                None => s.weights(p)?.first(),
            };
            let fit = lasso_fit(&x, &y, lam, &opts)?;
            let mut side = solver_sidecar(&fit);
            side["lambda"] = json!(lam);
            (fit.beta_hat, lam, side)
        }
        FitMethod::FdrHard => {
            let fit = fdr_hard_threshold(&xty(), s.q, s.sigma)?;
            let threshold = fit.threshold.is_finite().then_some(fit.threshold);
            (fit.beta_hat, s.sigma, json!({ "threshold": threshold, "rejections": fit.rejections }))
        }
        FitMethod::SeqFdr => (sequential_fdr_soft(&xty(), s.q, s.sigma)?, s.sigma, json!({})),
        FitMethod::Sure => {
            let fit = sure_soft_threshold(&xty(), s.sigma, &[0.0])?;
            (fit.beta_hat, s.sigma, json!({ "threshold": fit.lambda_hat }))
        }
    };
    if let Some(side) = sidecar.as_object_mut() {
        side.entry("converged").or_insert(json!(true));
        side.entry("iterations").or_insert(json!(0));
        side.entry("duality_gap").or_insert(json!(null));
        side.entry("objective").or_insert(json!(null));
        let floor = SUPPORT_FLOOR * scale;
        side.insert("support_size".into(), json!(beta_hat.iter().filter(|b| b.abs() > floor).count()));
        side.insert("method".into(), json!(method_name(args.method)));
    }

    let mut out = open_output(Some(&args.out))?;
    write_column(&mut out, &beta_hat)?;
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_file(&sidecar_path(&args.out), &(text + "\n"))
}

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Slope => "slope",
        FitMethod::Lasso => "lasso",
        FitMethod::FdrHard => "fdr-hard",
        FitMethod::SeqFdr => "seq-fdr",
        FitMethod::Sure => "sure",
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    let result = pool.install(|| run_experiment(&cfg))?;

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    write_file(&dir.join("trials.csv"), &trials_csv(&result.trials))?;

    let summary = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), &(summary + "\n"))?;
    if cfg.histograms {
        write_file(&dir.join("hist_fdp.dat"), &fdp_histogram(&result.trials, &cfg.methods, 20))?;
        write_file(&dir.join("hist_v.dat"), &v_histogram(&result.trials, &cfg.methods))?;
    }
    for m in &result.summary.methods {
        println!(
            "{}: mean FDP {:.4}, mean V {:.3}, mean MSE {:.4}, converged {:.3}",
            m.method, m.fdp.mean, m.v.mean, m.mse.mean, m.converged_fraction
        );
    }
    Ok(())
}

fn cmd_selfcheck(args: &SelfcheckArgs) -> Result<(), CliError> {
    let mut reports = check_prox_oracle(args.instances, args.max_p, args.seed, 1e-8);
    reports.extend(check_majorization_facts(args.instances, args.max_p, args.seed));
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<46} instances={:<6} failures={:<4} worst={:.3e}",
            r.name, r.instances, r.failures, r.worst
        );
        if !r.passed() {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Weights(a) => cmd_weights(a),
        Command::Prox(a) => cmd_prox(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
