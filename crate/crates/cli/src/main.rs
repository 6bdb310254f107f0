use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robustq::analysis::BiasReport;
use robustq::harness::{
    emit_results, load_config, read_runs_csv, render_svg, run_amse, run_bias, run_experiment,
    summarize, AmseComparison, EmitOptions,
};
use robustq::mdp::{greedy_policy, value_iteration};
use robustq::{Error, TabularMdp};

#[derive(Parser)]
#[command(
    name = "robustq",
    version,
    about = "Robust multi-estimate Q-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured agent over all seeds and write CSV/SVG results.
    Run {
        config: PathBuf,
        /// Override the number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Output directory (defaults to the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the SVG plot.
        #[arg(long)]
        no_svg: bool,
        /// Linear y-axis in the plot.
        #[arg(long)]
        linear: bool,
    },
    /// Optimal action values and greedy policy of an MDP file (JSON).
    SolveQ {
        mdp: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Bias of each configured estimator at the `bias` section's snapshot.
    Bias { config: PathBuf },
    /// Predicted versus empirical asymptotic error of the averaged estimate.
    Amse { config: PathBuf },
    /// Render an SVG from a runs.csv file.
    Plot {
        runs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        linear: bool,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            }
            Failure::Runtime(e) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e)
}

fn runtime_err(e: Error) -> Failure {
    match e {
        Error::Parse(_) | Error::Validation(_) | Error::UnknownKey(_) => Failure::Config(e),
        other => Failure::Runtime(other),
    }
}

fn run(
    path: &Path,
    seeds: Option<usize>,
    parallel: usize,
    out: Option<PathBuf>,
    options: EmitOptions,
) -> Result<(), Failure> {
    let mut config = load_config(path).map_err(config_err)?;
    if let Some(k) = seeds {
        if k == 0 {
            return Err(Failure::Config(Error::Validation(vec![
                "num_seeds: must be at least 1".into(),
            ])));
        }
        config.num_seeds = k;
    }
    let out = out.unwrap_or_else(|| config.output_dir.clone());
    let records = run_experiment(&config, parallel).map_err(runtime_err)?;
    let files = emit_results(&records, &out, options).map_err(runtime_err)?;
    eprintln!("{} runs, config {}", records.len(), config.hash());
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn solve_q(path: &Path, tol: f64) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| config_err(e.into()))?;
    let mdp = TabularMdp::from_json(&text).map_err(config_err)?;
    let vi = value_iteration(&mdp, tol);
    let policy = greedy_policy(&vi.q, mdp.num_states(), mdp.num_actions()).map_err(runtime_err)?;
    println!("state,action,q,greedy");
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let greedy = policy.probs(s)[a] > 0.0;
            println!("{s},{a},{:.16e},{}", vi.q[mdp.pair(s, a)], u8::from(greedy));
        }
    }
    Ok(())
}

fn bias(path: &Path) -> Result<(), Failure> {
    let config = load_config(path).map_err(config_err)?;
    let reports = run_bias(&config).map_err(runtime_err)?;
    println!("{}", BiasReport::CSV_HEADER);
    for r in reports {
        println!("{}", r.csv_row());
    }
    Ok(())
}

fn amse(path: &Path) -> Result<(), Failure> {
    let config = load_config(path).map_err(config_err)?;
    let c = run_amse(&config).map_err(runtime_err)?;
    eprintln!(
        "g0 = {:.6e}, g = {:.6e}, empirical se = {:.3e} over {} seeds",
        c.g0, c.g, c.empirical_se, c.num_seeds
    );
    print!("{}\n{}", AmseComparison::CSV_HEADER, c.csv_rows());
    Ok(())
}

fn plot(runs: &Path, out: Option<PathBuf>, linear: bool) -> Result<(), Failure> {
    let text = fs::read_to_string(runs).map_err(|e| config_err(e.into()))?;
    let rows = read_runs_csv(&text).map_err(config_err)?;
    let svg = render_svg(&summarize(&rows), !linear);
    let out = out.unwrap_or_else(|| runs.with_extension("svg"));
    fs::write(&out, svg).map_err(|e| Failure::Runtime(e.into()))?;
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seeds,
            parallel,
            out,
            no_svg,
            linear,
        } => run(
            &config,
            seeds,
            parallel,
            out,
            EmitOptions {
                svg: !no_svg,
                log_y: !linear,
            },
        ),
        Command::SolveQ { mdp, tol } => solve_q(&mdp, tol),
        Command::Bias { config } => bias(&config),
        Command::Amse { config } => amse(&config),
        Command::Plot { runs, out, linear } => plot(&runs, out, linear),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
