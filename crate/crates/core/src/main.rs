use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qa_forge::config::PipelineConfig;
use qa_forge::pipeline::{Pipeline, PipelineError, Stage};

/// Build fine-tuning Q/A datasets from document corpora and evaluate models on them.
#[derive(Debug, Parser)]
#[command(name = "qa-forge", version)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, short, global = true, default_value = "qa-forge.toml")]
    config: PathBuf,

    /// Run only this stage; with `pipeline`, start from it.
    #[arg(long, global = true)]
    stage: Option<Stage>,

    /// Replace the config's seed for this run.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Validate the config and stage inputs, then exit without running.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract and normalize the corpus listed in the manifest.
    Ingest,
    /// Split documents into overlapping, sentence-aligned chunks.
    Chunk,
    /// Generate 12 Q/A pairs per chunk through the chat endpoint.
    Generate,
    /// Dedup, augment, split and serialize pairs; export the training config.
    Build,
    /// Score the model under test on the held-out split.
    Evaluate,
    /// Render the evaluation report, optionally beside other reports.
    Report {
        /// Further eval_report.json files to compare against.
        #[arg(long, num_args = 1..)]
        compare: Vec<PathBuf>,
    },
    /// Run every stage in order.
    Pipeline,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed_override {
        cfg = cfg.with_seed(seed);
    }
    let (stages, compare) = match (cli.command, cli.stage) {
        (Some(Command::Pipeline), from) => {
            let from = from.unwrap_or(Stage::Ingest);
            (Stage::ALL.into_iter().filter(|s| *s >= from).collect(), Vec::new())
        }
        (Some(Command::Report { compare }), _) => (vec![Stage::Report], compare),
        (Some(cmd), _) => (
            vec![match cmd {
                Command::Ingest => Stage::Ingest,
                Command::Chunk => Stage::Chunk,
                Command::Generate => Stage::Generate,
                Command::Build => Stage::Build,
                Command::Evaluate => Stage::Evaluate,
                Command::Report { .. } | Command::Pipeline => unreachable!(),
            }],
            Vec::new(),
        ),
        (None, Some(stage)) => (vec![stage], Vec::new()),
        (None, None) => {
            return Err(PipelineError::Invalid(
                "nothing to do: give a subcommand or --stage".into(),
            ))
        }
    };
    let pipeline = Pipeline::new(cfg).with_comparison(compare);

    if cli.dry_run {
        // Later stages of a multi-stage run get their inputs from earlier ones.
        pipeline.check_inputs(stages[0])?;
        let names: Vec<&str> = stages.iter().map(|s| s.as_str()).collect();
        println!("config ok; would run: {}", names.join(", "));
        return Ok(());
    }
    for stage in stages {
        let summary = pipeline.run_stage(stage)?;
        println!("{}", summary.trim_end());
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors exit 1 like other validation failures; 2 is reserved for
    // endpoint failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qa-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
