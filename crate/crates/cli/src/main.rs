use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use stoflow_cli::{config::ExperimentConfig, output, runner};

/// Stochastic-flow experiment runner.
#[derive(Parser)]
#[command(name = "stoflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration and write CSV + JSON results.
    Run {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Master seed override (beats STOFLOW_SEED and the config).
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path (beats the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit empirical convergence orders from a results CSV.
    Order {
        /// Results CSV produced by `stoflow run`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the experiment catalogue and the corpus registry.
    List,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => run_command(&config, seed, out, workers),
        Command::Order { input } => order_command(&input),
        Command::List => {
            list_command();
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_command(
    config_path: &PathBuf,
    seed_flag: Option<u64>,
    out_flag: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;

    // seed precedence: CLI flag > STOFLOW_SEED > config
    if let Ok(env_seed) = std::env::var("STOFLOW_SEED") {
        config.seed = env_seed
            .parse()
            .map_err(|_| format!("STOFLOW_SEED is not a u64: `{env_seed}`"))?;
    }
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }

    let started = Instant::now();
    let outcome = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| format!("cannot build worker pool: {e}"))?;
            pool.install(|| runner::run(&config))
        }
        None => runner::run(&config),
    };
    let outcome = match outcome {
        Ok(outcome) => outcome,
        Err(runner::RunError::Config(msg)) => return Err(msg),
        Err(e) => return Err(e.to_string()),
    };

    let csv_path = out_flag
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    output::write_outputs(&csv_path, &outcome.rows, &outcome.summary)
        .map_err(|e| format!("cannot write results: {e}"))?;

    for note in &outcome.notes {
        eprintln!("note: {note}");
    }
    eprintln!(
        "{}: {} (max residual {:.3e}{}) in {:?} -> {}",
        outcome.summary.experiment,
        if outcome.summary.pass { "pass" } else { "FAIL" },
        outcome.summary.max_residual,
        outcome
            .summary
            .order_estimate
            .map(|o| format!(", order {o:.3}"))
            .unwrap_or_default(),
        started.elapsed(),
        csv_path.display(),
    );
    Ok(if outcome.summary.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Print without panicking when the consumer closes the pipe early.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn order_command(input: &PathBuf) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
    let rows = output::parse_csv(&text)?;
    let mut experiments: Vec<String> = rows.iter().map(|r| r.experiment.clone()).collect();
    experiments.sort();
    experiments.dedup();
    if experiments.is_empty() {
        return Err("no rows in the CSV".into());
    }
    for experiment in experiments {
        let subset: Vec<_> = rows
            .iter()
            .filter(|r| r.experiment == experiment)
            .cloned()
            .collect();
        match runner::estimate_order(&subset) {
            Ok(order) => emit(&format!("{experiment} order {order:.4}\n")),
            Err(e) => return Err(format!("{experiment}: {e}")),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn list_command() {
    let mut text = String::from("experiments:\n");
    for name in runner::experiment_names() {
        text.push_str(&format!("  {name}\n"));
    }
    text.push_str("\nfields:\n");
    for entry in stoflow_core::corpus::field_entries() {
        text.push_str(&format!("  {:24} {}\n", entry.signature, entry.summary));
    }
    text.push_str("\nforms:\n");
    for entry in stoflow_core::corpus::form_entries() {
        text.push_str(&format!("  {:24} {}\n", entry.signature, entry.summary));
    }
    text.push_str("\ndensities:\n");
    for entry in stoflow_core::corpus::density_entries() {
        text.push_str(&format!("  {:24} {}\n", entry.signature, entry.summary));
    }
    emit(&text);
}
