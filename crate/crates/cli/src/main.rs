use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use profile_sampler::csvio::{read_dataset, write_dataset};
use profile_sampler::inference::{build_report, ReportConfig};
use profile_sampler::partly_linear::generate_partly_linear;
use profile_sampler::rates::RateSpec;
use profile_sampler::types::{ModelKind, ParameterPoint};
use profile_sampler::{cox_current, cox_right};
use profile_sampler_cli::config::{parse_prior, StudyConfig};
use profile_sampler_cli::study::{calibrated_tn, parse_summary_csv, run_study, write_outputs};
use profile_sampler_cli::table::render_summary;

#[derive(Parser)]
#[command(
    name = "profile-sampler",
    about = "Semiparametric profile-posterior inference: simulation, single-dataset fits and replication studies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit one dataset: sample the profile posterior and report estimates.
    Fit(FitArgs),
    /// Run a replication study from a config file.
    Study(StudyArgs),
    /// Render the summary table from a study summary CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// cox_right, cox_current or partly_linear
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    /// Comma-separated coordinates of the generating parameter.
    #[arg(long)]
    theta0: String,
    /// Censoring/examination horizon (cox models).
    #[arg(long)]
    tn: Option<f64>,
    /// Calibrate the horizon to this event fraction instead of passing --tn.
    #[arg(long)]
    target_frac: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Lower censoring support (partly_linear).
    #[arg(long, default_value_t = -2.0)]
    lc: f64,
    /// Upper censoring support (partly_linear).
    #[arg(long, default_value_t = 4.0)]
    uc: f64,
    /// Regression curve for partly_linear data: zero | sine
    #[arg(long, default_value = "sine")]
    k0: String,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: String,
    /// Dataset CSV path.
    #[arg(long)]
    data: PathBuf,
    /// Nuisance convergence rate; default 1/2, 1/3 or 2/5 by model.
    #[arg(long)]
    rate_r: Option<f64>,
    /// Total chain length.
    #[arg(long, default_value_t = 5000)]
    chain: usize,
    #[arg(long, default_value_t = 2000)]
    burn_in: usize,
    #[arg(long)]
    seed: u64,
    /// flat or gaussian:<mean>:<sd>
    #[arg(long, default_value = "flat")]
    prior: String,
    /// Step-size constant for the numeric information estimate.
    #[arg(long, default_value_t = 1.0)]
    step_constant: f64,
    /// Two-sided interval level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Write the key=value report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the retained chain as CSV.
    #[arg(long)]
    dump_chain: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; overrides the config value. The environment variable
    /// PROFILE_SAMPLER_THREADS overrides both.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "study-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a study summary.csv.
    summary: PathBuf,
}

fn parse_theta(spec: &str) -> anyhow::Result<ParameterPoint> {
    let coords = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("invalid theta coordinate '{t}'")))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    Ok(ParameterPoint::new(coords)?)
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let model: ModelKind = args.model.parse()?;
    let theta0 = parse_theta(&args.theta0)?;
    let data = match model {
        ModelKind::CoxRight | ModelKind::CoxCurrent => {
            let tn = match (args.tn, args.target_frac) {
                (Some(tn), None) => tn,
                (None, Some(frac)) => calibrated_tn(model, &theta0, frac)?,
                (Some(_), Some(_)) => bail!("pass either --tn or --target-frac, not both"),
                (None, None) => bail!("cox models need --tn or --target-frac"),
            };
            match model {
                ModelKind::CoxRight => cox_right::generate_right_censored(args.n, &theta0, tn, args.seed)?,
                _ => cox_current::generate_current_status(args.n, &theta0, tn, args.seed)?,
            }
        }
        ModelKind::PartlyLinear => {
            let k0: Box<dyn Fn(f64) -> f64> = match args.k0.as_str() {
                "zero" => Box::new(|_| 0.0),
                "sine" => Box::new(|z: f64| (2.0 * std::f64::consts::PI * z).sin()),
                other => bail!("unknown k0 '{other}' (expected zero or sine)"),
            };
            generate_partly_linear(args.n, &theta0, k0.as_ref(), args.lc, args.uc, args.seed)?
        }
    };
    write_dataset(&args.out, &data)?;
    eprintln!("wrote {} observations to {}", data.n(), args.out.display());
    Ok(())
}

fn fit(args: &FitArgs) -> anyhow::Result<()> {
    let model: ModelKind = args.model.parse()?;
    let data = read_dataset(&args.data)?;
    let mut config = ReportConfig::for_model(model, args.seed);
    if let Some(r) = args.rate_r {
        config.rate = RateSpec::new(r)?;
    }
    config.chain_total = args.chain;
    config.chain_burn_in = args.burn_in;
    config.prior = parse_prior(&args.prior)?;
    config.step_constant = args.step_constant;
    config.level = args.level;
    config.chain_dump = args.dump_chain.clone();

    let report = build_report(model, &data, &config)?;
    let text = report.to_key_value();
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn study(args: &StudyArgs) -> anyhow::Result<()> {
    let mut config = StudyConfig::load(&args.config)?;
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Ok(env_threads) = std::env::var("PROFILE_SAMPLER_THREADS") {
        config.threads = env_threads
            .parse()
            .with_context(|| format!("invalid PROFILE_SAMPLER_THREADS '{env_threads}'"))?;
    }
    config.validate()?;

    let output = run_study(&config)?;
    write_outputs(&output, config.model, &args.out_dir)?;

    let summary_text = std::fs::read_to_string(args.out_dir.join("summary.csv"))?;
    print!("{}", render_summary(&parse_summary_csv(&summary_text)?));
    eprintln!(
        "study complete in {:.1}s; outputs in {}",
        output.wall_time_s,
        args.out_dir.display()
    );
    Ok(())
}

fn report(args: &ReportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.summary)
        .with_context(|| format!("cannot read summary '{}'", args.summary.display()))?;
    print!("{}", render_summary(&parse_summary_csv(&text)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit(args),
        Command::Study(args) => study(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
