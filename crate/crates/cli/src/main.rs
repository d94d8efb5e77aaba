use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cogspeech::config::ExperimentConfig;
use cogspeech::error::Error;
use cogspeech::pipeline::{self, CmdOutcome};

/// HC / MCI / dementia classification from speech recordings.
#[derive(Parser)]
#[command(name = "cogspeech", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the default configuration and exit.
    #[arg(long)]
    dump_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with an experiment.toml next to it.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove impulsive noise from every recording.
    Denoise,
    /// Extract pause, fluency, linguistic and macrodescriptor tables.
    Features,
    /// Cross-validate every configured system.
    Run,
    /// Search score-level fusions and select ensembles.
    Ensemble,
    /// Rebuild figures and the summary from the saved tables.
    Report,
    /// Word error rate of hypothesis transcripts against references.
    Wer {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        /// One disfluency token per line.
        #[arg(long)]
        disfluencies: Option<PathBuf>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn finish(outcome: CmdOutcome) -> ExitCode {
    for p in &outcome.written {
        println!("wrote {}", p.display());
    }
    for f in &outcome.failures {
        eprintln!("failed: {f}");
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} failure(s)", outcome.failures.len());
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if cli.dump_defaults {
        print!("{}", ExperimentConfig::default().to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = cli.command else {
        return Err(Error::Config("no command given; see --help".into()));
    };
    let cfg = || load_config(&cli.config, cli.seed);
    match command {
        Command::Synth { out } => {
            let m = pipeline::cmd_synth(&out, cli.seed.unwrap_or(ExperimentConfig::default().seed))?;
            println!(
                "wrote {} subjects, {} recordings to {}",
                m.subjects.len(),
                m.recordings.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Denoise => Ok(finish(pipeline::cmd_denoise(&cfg()?)?)),
        Command::Features => Ok(finish(pipeline::cmd_features(&cfg()?)?)),
        Command::Run => Ok(finish(pipeline::cmd_run(&cfg()?)?)),
        Command::Ensemble => Ok(finish(pipeline::cmd_ensemble(&cfg()?)?)),
        Command::Report => Ok(finish(pipeline::cmd_report(&cfg()?)?)),
        Command::Wer {
            reference,
            hyp,
            disfluencies,
        } => {
            let (table, outcome) = pipeline::cmd_wer(&reference, &hyp, disfluencies.as_deref())?;
            print!("{}", table.to_csv());
            Ok(finish(outcome))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
