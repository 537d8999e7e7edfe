use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{ArgAction, Parser, Subcommand};

use uis_tuning::calculi::Calculus;
use uis_tuning::sampler::DEFAULT_NETWORK_COUNT;
use uis_tuning::stats::AnovaOutcome;
use uis_tuning::study::{
    run_study, stage_generate, stage_report, stage_solve, stage_tune, StudyConfig, StudyReport,
};
use uis_tuning::tuner::DEFAULT_GRID;

#[derive(Parser)]
#[command(
    name = "uis-tuning",
    about = "Tune uncertain-inference calculi against a minimum cross-entropy norm",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random networks into a CSV file.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How many networks to sample.
        #[arg(long, default_value_t = DEFAULT_NETWORK_COUNT)]
        networks: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the posterior norm at every probe of the evidence grid.
    Solve {
        /// Networks CSV from `generate`.
        #[arg(long)]
        networks: PathBuf,
        /// Comma-separated evidence levels; probes are their Cartesian square.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID)]
        grid: Vec<f64>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune each selected calculus on every network.
    Tune {
        /// Networks CSV from `generate`.
        #[arg(long)]
        networks: PathBuf,
        /// Norms CSV from `solve`.
        #[arg(long)]
        norms: PathBuf,
        /// Comma-separated calculi, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        methods: Vec<String>,
        /// Random starts tried in addition to the theoretical one.
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clamp negative MYCIN evidence weight to zero (true/false).
        #[arg(long, default_value_t = false, action = ArgAction::Set)]
        mycin_clamp: bool,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate tuned results into the per-network table and the report.
    Report {
        /// Networks CSV from `generate`.
        #[arg(long)]
        networks: PathBuf,
        /// Tuned parameter JSON from `tune`.
        #[arg(long)]
        tuned: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline into one output directory.
    Study {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How many networks to sample.
        #[arg(long, default_value_t = DEFAULT_NETWORK_COUNT)]
        networks: usize,
        /// Comma-separated evidence levels; probes are their Cartesian square.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID)]
        grid: Vec<f64>,
        /// Comma-separated calculi, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        methods: Vec<String>,
        /// Random starts tried in addition to the theoretical one.
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        /// Clamp negative MYCIN evidence weight to zero (true/false).
        #[arg(long, default_value_t = false, action = ArgAction::Set)]
        mycin_clamp: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_methods(values: &[String]) -> anyhow::Result<Vec<Calculus>> {
    if values.iter().any(|v| v.trim().eq_ignore_ascii_case("all")) {
        if values.len() > 1 {
            bail!("`all` cannot be combined with individual method names");
        }
        return Ok(Calculus::ALL.to_vec());
    }
    values
        .iter()
        .map(|v| v.parse::<Calculus>().map_err(anyhow::Error::msg))
        .collect()
}

fn print_summary(report: &StudyReport) {
    for m in &report.methods {
        println!(
            "{:<13} average rmse {:.5}  (low {:.5}, high {:.5})",
            m.calculus.name(),
            m.average_rmse,
            m.low_rmse,
            m.high_rmse
        );
    }
    match &report.anova {
        Some(AnovaOutcome::Statistic { f, df1, df2, p }) => {
            println!("anova F({df1}, {df2}) = {f:.2}, p = {p:.3e}");
        }
        Some(AnovaOutcome::Infinite { df1, df2 }) => {
            println!("anova F({df1}, {df2}) diverges: zero within-network error");
        }
        Some(AnovaOutcome::NotSignificant { df1, df2 }) => {
            println!("anova F({df1}, {df2}) undefined: no variance anywhere");
        }
        None => {}
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { seed, networks, out } => {
            stage_generate(seed, networks, &out).context("generate stage failed")?;
            println!("wrote {} ({networks} networks)", out.display());
        }
        Command::Solve { networks, grid, out } => {
            stage_solve(&networks, &grid, &out).context("solve stage failed")?;
            println!("wrote {}", out.display());
        }
        Command::Tune {
            networks,
            norms,
            methods,
            restarts,
            seed,
            mycin_clamp,
            out,
        } => {
            let methods = parse_methods(&methods).context("tune stage failed")?;
            stage_tune(&networks, &norms, &methods, restarts, seed, mycin_clamp, &out)
                .context("tune stage failed")?;
            println!("wrote {}", out.display());
        }
        Command::Report { networks, tuned, out } => {
            let report =
                stage_report(&networks, &tuned, &out).context("report stage failed")?;
            println!("wrote report to {}", out.display());
            print_summary(&report);
        }
        Command::Study {
            seed,
            networks,
            grid,
            methods,
            restarts,
            mycin_clamp,
            out,
        } => {
            let config = StudyConfig {
                seed,
                networks,
                grid,
                methods: parse_methods(&methods).context("study failed")?,
                restarts,
                mycin_clamp,
                out_dir: out.clone(),
            };
            let report = run_study(&config).context("study failed")?;
            println!("wrote report to {}", out.display());
            print_summary(&report);
        }
    }
    Ok(())
}
