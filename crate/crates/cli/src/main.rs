use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use sld::metrics::evaluate;
use sld::motion::{Manifest, PoseSequence};
use sld::net::{AblationMode, Checkpoint, Profile};
use sld::train::{train_from, TrainConfig};
use sld_cli::corpus::{write_corpus, CorpusOptions};
use sld_cli::{exit, prediction_json, server, Session};

#[derive(Parser)]
#[command(name = "sld", version, about = "Diverse, editable human motion prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motion corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "tiny")]
        profile: String,
        /// Frames per sequence (default: two windows).
        #[arg(long)]
        frames: Option<usize>,
        /// Window stride written to the manifest (default: future length).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Train a model; prints one JSON line per epoch.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `ablation_mode` from the config (MQ, MQ+SLD, MQ-P+SLD).
        #[arg(long)]
        ablation: Option<AblationMode>,
        /// Continue from an intermediate checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Print the metrics report of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Write K predicted futures for a past motion.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Samples to draw (default: every motion query).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the prediction and editing API over HTTP.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<sld::Error>() {
                Some(e) => exit::code_for(e),
                None if err.downcast_ref::<std::io::Error>().is_some() => exit::IO,
                None => exit::FAILURE,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth {
            out,
            sequences,
            seed,
            profile,
            frames,
            stride,
        } => {
            let opts = CorpusOptions {
                sequences,
                seed,
                profile: Profile::named(&profile)?,
                frames,
                stride,
            };
            let manifest = write_corpus(&out, &opts)?;
            println!("{}", manifest.display());
        }
        Command::Train {
            data,
            config,
            out,
            ablation,
            resume,
        } => cmd_train(&data, &config, &out, ablation, resume.as_deref())?,
        Command::Eval { ckpt, data } => {
            let model = Checkpoint::load(&ckpt)?.model;
            let dataset = Manifest::load(&data)?.dataset()?;
            println!("{}", evaluate(&model, &dataset)?.to_json_string());
        }
        Command::Predict { ckpt, input, k, out } => {
            let model = Checkpoint::load(&ckpt)?.model;
            let past = PoseSequence::load(&input)?;
            let set = model.predict_first(&past, k.unwrap_or(model.k()))?;
            fs::write(&out, prediction_json(&set)).map_err(|e| sld::Error::Io { path: out, source: e })?;
        }
        Command::Serve { ckpt, port, host } => {
            let session = Arc::new(Session::new(Checkpoint::load(&ckpt)?)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("cannot listen on {host}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                server::serve(listener, session).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn cmd_train(data: &Path, config: &Path, out: &Path, ablation: Option<AblationMode>, resume: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = TrainConfig::load(config)?;
    if let Some(mode) = ablation {
        cfg.ablation_mode = mode;
    }
    let dataset = Manifest::load(data)?.dataset()?;
    let resume = resume.map(Checkpoint::load).transpose()?;
    let every = cfg.checkpoint_every;
    let stdout = std::io::stdout();
    let outcome = train_from(&cfg, &dataset, resume, |trainer, log| {
        let mut lock = stdout.lock();
        let line = serde_json::to_string(log).expect("epoch log serializes");
        writeln!(lock, "{line}").map_err(|e| sld::Error::Io { path: "<stdout>".into(), source: e })?;
        if every > 0 && trainer.epoch() % every == 0 && !trainer.is_done() {
            trainer.checkpoint().save(out)?;
        }
        Ok(())
    })?;
    outcome.checkpoint.save(out)?;
    println!("{}", json!({ "heldout": outcome.heldout }));
    Ok(())
}
