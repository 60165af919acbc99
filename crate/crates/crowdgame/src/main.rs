use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdgame::commands::{self, EntropyArgs, ImpossibilityArgs};
use crowdgame::{CliError, Loaded, Output, Overrides};

/// Simulator for the crowd-labelling game with prejudiced agents.
#[derive(Debug, Parser)]
#[command(name = "crowdgame", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Number of trials; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    /// Write the CSV here instead of stdout; overrides the config.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the world in a config against the information constraints.
    Validate,
    /// Estimate how well the mechanism identifies informed truthful agents.
    Simulate,
    /// Test the configured profile for profitable unilateral deviations.
    Equilibrium,
    /// Run the paired truthful/prejudiced scenarios.
    Impossibility {
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated probabilities, e.g. 0.5,0.5.
        #[arg(long, value_delimiter = ',')]
        base_dist: Option<Vec<f64>>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        /// agreement, pairwise, gold or prejudice-anchored.
        #[arg(long)]
        mechanism: Option<String>,
    },
    /// Misclassification of the gold mechanism against gold-set size.
    GoldSweep {
        /// Comma-separated gold-set sizes.
        #[arg(long, value_delimiter = ',')]
        g: Option<Vec<usize>>,
    },
    /// Basins of best-response dynamics for several prejudice distributions.
    EntropySweep {
        /// A prejudice distribution, e.g. 0.9,0.1. Repeat for several.
        #[arg(long = "p-u", value_name = "PROBS")]
        p_u: Vec<String>,
        /// Maximum passes of the dynamics.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
}

fn parse_probs(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("--p-u {text}: {e}")))
        })
        .collect()
}

fn run(cli: &Cli) -> Result<(Output, Option<PathBuf>), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
    };
    let loaded = cli.config.as_deref().map(Loaded::from_path).transpose()?;
    let need = || {
        loaded
            .as_ref()
            .ok_or_else(|| CliError::Usage("this subcommand needs --config".to_string()))
    };
    let output = match &cli.command {
        Command::Validate => commands::validate(need()?)?,
        Command::Simulate => commands::simulate(need()?, &overrides)?,
        Command::Equilibrium => commands::equilibrium(need()?, &overrides)?,
        Command::Impossibility {
            k,
            base_dist,
            agents,
            items,
            mechanism,
        } => {
            let args = ImpossibilityArgs {
                k: *k,
                base_dist: base_dist.clone(),
                agents: *agents,
                items: *items,
                mechanism: mechanism.clone(),
            };
            commands::impossibility(loaded.as_ref(), &args, &overrides)?
        }
        Command::GoldSweep { g } => commands::gold_sweep_cmd(need()?, g.as_deref(), &overrides)?,
        Command::EntropySweep {
            p_u,
            steps,
            restarts,
        } => {
            let args = EntropyArgs {
                p_u: p_u
                    .iter()
                    .map(|s| parse_probs(s))
                    .collect::<Result<_, _>>()?,
                steps: *steps,
                restarts: *restarts,
            };
            commands::entropy_sweep(need()?, &args, &overrides)?
        }
    };
    let out = cli.out.clone().or_else(|| {
        loaded
            .as_ref()
            .and_then(|l| l.config.out.as_ref().map(PathBuf::from))
    });
    Ok((output, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("crowdgame: {e}");
            return ExitCode::from(2);
        }
    }
    let (output, out) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("crowdgame: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match (&output.csv, out) {
        (Some(csv), Some(path)) => {
            if let Err(e) = std::fs::write(&path, csv) {
                eprintln!("crowdgame: {}: {e}", path.display());
                return ExitCode::from(2);
            }
            eprint!("{}", output.report);
        }
        (Some(csv), None) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(csv.as_bytes())
                .and_then(|()| stdout.flush())
                .is_err()
            {
                return ExitCode::from(2);
            }
            eprint!("{}", output.report);
        }
        (None, _) => print!("{}", output.report),
    }
    if output.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
