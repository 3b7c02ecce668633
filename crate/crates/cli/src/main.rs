use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use funloc::diagnostics::{b2cond_value, decompose_error, u0_monte_carlo};
use funloc::estimator::{estimate_at, EstimatorConfig};
use funloc::experiments::{check_conditions, run_rate_study, LocalPolynomial, TuningRule};
use funloc::function_space::{Basis, FunctionVec};
use funloc::io::{
    config_digest, load_config, load_diagnose_config, read_curve, read_dataset, write_dataset, write_json, write_results,
    RunManifest,
};
use funloc::simulation::simulate;
use funloc::{Error, Result};

#[derive(Parser)]
#[command(name = "funloc", version, about = "Functional local polynomial regression")]
struct Cli {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for rate studies.
    #[arg(long, global = true, env = "FUNLOC_THREADS")]
    threads: Option<usize>,
    /// Output directory. Reports and a run manifest are written here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Trig,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate g(x) at one site from a dataset CSV.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// CSV file with one curve, or comma-separated basis coefficients.
        #[arg(long, allow_hyphen_values = true)]
        site: String,
        #[arg(long)]
        delta: f64,
        #[arg(long = "J")]
        j: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, value_enum, default_value = "trig")]
        basis: BasisArg,
        /// Basis functions used when projecting grid-valued curves.
        #[arg(long = "L")]
        l: Option<usize>,
    },
    /// Draw a dataset from the model in a diagnose config and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Write curves as values on this many midpoint-grid points instead of coefficients.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Error decomposition and bound checks on one simulated dataset.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo convergence-rate study.
    RateStudy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the rate conditions for tuning constants.
    CheckConditions {
        #[arg(long = "D0")]
        d0: f64,
        #[arg(long = "D1")]
        d1: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn to_value<S: serde::Serialize>(s: &S) -> Result<Value> {
    serde_json::to_value(s).map_err(|e| Error::Data(e.to_string()))
}

/// Writes `report.json` and the manifest when an output directory was given.
fn emit_report(out: Option<&Path>, report: &Value, digest: String, seed: u64) -> Result<()> {
    print_json(report)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), report)?;
        RunManifest::new(digest, seed, vec!["report.json".into(), "manifest.json".into()]).write(dir)?;
    }
    Ok(())
}

fn parse_site(site: &str, basis: &Basis<f64>, l: Option<usize>) -> Result<FunctionVec<f64>> {
    let path = Path::new(site);
    if path.is_file() {
        return read_curve(path, basis, l);
    }
    let coeffs = site
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("site", format!("neither a file nor a coefficient list: {site:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    FunctionVec::new(coeffs).map_err(|e| Error::config("site", e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Estimate { data, site, delta, j, k, basis, l } => {
            let basis = match basis {
                BasisArg::Trig => Basis::TrigonometricFourier,
            };
            let dataset = read_dataset(&data, &basis, l)?;
            let x = parse_site(&site, &basis, l)?;
            let cfg = EstimatorConfig::new(j, k, delta)?.with_basis(basis);
            let res = estimate_at(&dataset, &x, &cfg)?;
            let report = json!({
                "g_hat": res.g_hat,
                "n_local": res.n_local,
                "alpha": res.alpha,
                "solver_report": res.solver_report,
            });
            let args = json!({
                "command": "estimate",
                "data": data.display().to_string(),
                "site": site,
                "delta": delta,
                "J": j,
                "K": k,
                "basis": "trig",
                "L": l,
            });
            emit_report(out, &report, config_digest(&args.to_string())?, cli.seed.unwrap_or(0))
        }
        Command::Simulate { config, grid } => {
            let dir = out.ok_or_else(|| Error::config("--out", "simulate needs an output directory"))?;
            let text = fs::read_to_string(&config)?;
            let cfg = load_diagnose_config(&config)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            let model = cfg.model.build::<f64>()?;
            let target = cfg.target.build::<f64>()?;
            let noise = cfg.noise.build::<f64>()?;
            let sim = simulate(&model, &target, &noise, cfg.n, seed, &[])?;
            fs::create_dir_all(dir)?;
            write_dataset(&dir.join("dataset.csv"), &sim.data, &Basis::TrigonometricFourier, grid)?;
            RunManifest::new(config_digest(&text)?, seed, vec!["dataset.csv".into(), "manifest.json".into()])
                .write(dir)?;
            Ok(())
        }
        Command::Diagnose { config } => {
            let text = fs::read_to_string(&config)?;
            let cfg = load_diagnose_config(&config)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            let model = cfg.model.build::<f64>()?;
            let target = cfg.target.build::<f64>()?;
            let noise = cfg.noise.build::<f64>()?;
            let x = cfg.site(&model)?;
            let est = EstimatorConfig::new(cfg.j, cfg.k, cfg.delta)?;
            let sim = simulate(&model, &target, &noise, cfg.n, seed, &[])?;
            let decomposition = decompose_error(&sim.data, &x, &est, &target, &sim.noise)?;
            let mut bounds = u0_monte_carlo(&model, &x, &est, cfg.u0_samples, seed, cfg.c2_star)?;
            bounds.variance_proxy = Some(decomposition.variance_proxy);
            bounds.b2cond_value = Some(b2cond_value(&target, &x, &est)?);
            let mut report = to_value(&decomposition)?;
            if let (Value::Object(map), Value::Object(extra)) = (&mut report, to_value(&bounds)?) {
                map.extend(extra);
            }
            emit_report(out, &report, config_digest(&text)?, seed)
        }
        Command::RateStudy { config } => {
            let dir = out.ok_or_else(|| Error::config("--out", "rate-study needs an output directory"))?;
            let text = fs::read_to_string(&config)?;
            let (mut cfg, notices) = load_config(&config)?;
            for n in notices {
                eprintln!("notice: {n}");
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let spec = cfg.to_spec::<f64>(cli.threads)?;
            let result = run_rate_study(&spec, &LocalPolynomial)?;
            for a in &result.advisories {
                eprintln!("advisory: {a}");
            }
            write_results(&result, &spec.rule, &config_digest(&text)?, dir)?;
            print_json(&json!({
                "kappa_hat": result.kappa_hat,
                "baseline_kappa_hat": result.baseline_kappa_hat,
                "out": dir.display().to_string(),
            }))
        }
        Command::CheckConditions { d0, d1, gamma, c1 } => {
            let check = check_conditions(&TuningRule::new(d0, d1, gamma, c1));
            let args = json!({"command": "check-conditions", "D0": d0, "D1": d1, "gamma": gamma, "c1": c1});
            emit_report(out, &to_value(&check)?, config_digest(&args.to_string())?, cli.seed.unwrap_or(0))
        }
    }
}
