use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use votestack::commands::{self, KfoldOverrides, SplitName};
use votestack::report::{class_table, metrics_table};
use votestack::{load_config, Overrides, Result};

#[derive(Parser)]
#[command(
    name = "votestack",
    version,
    about = "Train text classifiers and combine them by priority voting"
)]
struct Cli {
    /// JSON run configuration
    #[arg(long, global = true, default_value = "votestack.json")]
    config: PathBuf,
    /// Fixed sequence length, overriding the config
    #[arg(long, global = true)]
    max_len: Option<usize>,
    /// Seed, overriding the config and VOTESTACK_SEED
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize and tokenize the dataset, writing preprocessed.tsv
    Preprocess,
    /// Train every declared model
    Train,
    /// Write predictions of one trained model
    Predict {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
    },
    /// Rank members on validation and vote on test
    Ensemble,
    /// Cross-validate the declared models
    Kfold {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        no_stratify: bool,
    },
    /// Score a predictions file against gold labels
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(
        &cli.config,
        &Overrides {
            max_len: cli.max_len,
            seed: cli.seed,
        },
    )?;
    match cli.command {
        Command::Preprocess => {
            let s = commands::cmd_preprocess(&cfg)?;
            println!(
                "{} examples, max_len {}, {} of {} tokens out of vocabulary",
                s.examples, s.max_len, s.oov_tokens, s.tokens
            );
            println!("wrote {}", s.output.display());
        }
        Command::Train => {
            let s = commands::cmd_train(&cfg)?;
            for m in &s.models {
                println!(
                    "{} ({}): {} epochs, best validation {:.4} -> {}",
                    m.id,
                    m.kind,
                    m.epochs_run,
                    m.best_validation_score,
                    m.file.display()
                );
            }
            println!("wrote {}", s.manifest.display());
        }
        Command::Predict { model, split } => {
            let s = commands::cmd_predict(&cfg, &model, split)?;
            print!("{}", metrics_table(&[(model, &s.report)]));
            println!("wrote {}", s.output.display());
        }
        Command::Ensemble => {
            let s = commands::cmd_ensemble(&cfg)?;
            println!("priority: {}", s.priority.join(" > "));
            let mut rows: Vec<_> = s
                .members
                .iter()
                .map(|m| (m.id.clone(), &m.report))
                .collect();
            rows.push(("ensemble".into(), &s.ensemble));
            print!("{}", metrics_table(&rows));
            println!("wrote {}", s.output_dir.display());
        }
        Command::Kfold {
            model,
            k,
            no_stratify,
        } => {
            let s = commands::cmd_kfold(&cfg, model.as_deref(), KfoldOverrides { k, no_stratify })?;
            print!("{}", votestack::report::kfold_table(&s));
            println!("wrote {}", s.output_dir.display());
        }
        Command::Evaluate { predictions, split } => {
            let s = commands::cmd_evaluate(&cfg, &predictions, split)?;
            print!(
                "{}",
                metrics_table(&[(split.name().to_string(), &s.report)])
            );
            print!("\n{}", class_table(&s.report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
