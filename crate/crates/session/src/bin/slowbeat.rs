use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use slowbeat_core::rpeak::detect_batch_with;
use slowbeat_core::{ChannelKind, Signal};
use slowbeat_session::block::replay;
use slowbeat_session::config::Fidelity;
use slowbeat_session::contrast::{run_contrasts, write_results_csv, ContrastSpec};
use slowbeat_session::experiment::{run_experiment, ExperimentConfig};
use slowbeat_session::serve::{serve_blocking, ServeConfig};
use slowbeat_session::store::{
    list_logs, read_log, read_participants, table_from_logs, write_experiment, PARTICIPANTS_FILE,
};
use slowbeat_session::table::{CohortTable, FeatureScope};

#[derive(Parser)]
#[command(name = "slowbeat", version, about = "Closed-loop heart-rate biofeedback experiment engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    Waveform,
    BeatLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Full,
    Cardiac,
}

impl From<ScopeArg> for FeatureScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Full => FeatureScope::Full,
            ScopeArg::Cardiac => FeatureScope::Cardiac,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a headless experiment with simulated participants.
    Simulate {
        /// Experiment config (JSON); command-line flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for logs, signals and the feature table.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        participants: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trigger interval over the IBI estimate.
        #[arg(long)]
        bf_factor: Option<f64>,
        /// Cardiac entrainment to the triggers, 0 disables it.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, value_enum)]
        fidelity: Option<FidelityArg>,
        #[arg(long, value_enum)]
        scope: Option<ScopeArg>,
        #[arg(long)]
        no_training: bool,
        /// Also write ECG, respiration and EDA CSVs next to each log.
        #[arg(long)]
        signals: bool,
    },
    /// Serve the live participant session.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Experiment config whose block settings are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Let the client drive time with `advance` messages.
        #[arg(long)]
        virtual_clock: bool,
        #[arg(long)]
        bf_factor: Option<f64>,
    },
    /// Detect R peaks in an ECG CSV (`time_s,value`) and write beat JSONL.
    Detect {
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compute the feature table of block logs.
    Features {
        /// Log files, or directories searched for `*.jsonl`.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        scope: ScopeArg,
        /// Participant summaries; defaults to the one beside the logs.
        #[arg(long)]
        participants: Option<PathBuf>,
    },
    /// Run planned contrasts on a feature table.
    Stats {
        table: PathBuf,
        contrasts: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Replay a block log from its inputs and compare it with the original.
    Replay {
        log: PathBuf,
        /// Write the replayed log here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Simulate { config, out, participants, seed, bf_factor, kappa, fidelity, scope, no_training, signals } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = participants {
                cfg.participants = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = bf_factor {
                cfg.blocks.scheduler.factor = f;
            }
            if let Some(k) = kappa {
                cfg.population.kappa = k;
            }
            if let Some(f) = fidelity {
                cfg.blocks.fidelity = match f {
                    FidelityArg::Waveform => Fidelity::Waveform,
                    FidelityArg::BeatLevel => Fidelity::BeatLevel,
                };
            }
            if let Some(s) = scope {
                cfg.scope = s.into();
            }
            cfg.training &= !no_training;
            cfg.keep_signals |= signals;
            let t0 = Instant::now();
            let rec = run_experiment(&cfg)?;
            let paths = write_experiment(&rec, &out)?;
            eprintln!(
                "{} participants, {} blocks in {:.1} s -> {}",
                cfg.participants,
                paths.len(),
                t0.elapsed().as_secs_f64(),
                out.display()
            );
        }
        Cmd::Serve { addr, config, virtual_clock, bf_factor } => {
            let mut blocks = load_config(config.as_deref())?.blocks;
            if let Some(f) = bf_factor {
                blocks.scheduler.factor = f;
            }
            blocks.scheduler.validate()?;
            eprintln!("serving on ws://{addr}/ws");
            serve_blocking(addr, ServeConfig { blocks, virtual_clock })?;
        }
        Cmd::Detect { input, out } => {
            let f = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let ecg = Signal::read_csv(BufReader::new(f), ChannelKind::Ecg)?;
            let beats = detect_batch_with(&ecg, Default::default())?;
            let mut w = output(out.as_deref())?;
            for b in &beats {
                serde_json::to_writer(&mut w, &serde_json::json!({"t": b.t, "amp": b.amplitude}))?;
                writeln!(w)?;
            }
            w.flush()?;
            eprintln!("{} beats", beats.len());
        }
        Cmd::Features { logs, out, scope, participants } => {
            let mut paths = Vec::new();
            for p in &logs {
                if p.is_dir() {
                    paths.extend(list_logs(p)?);
                } else {
                    paths.push(p.clone());
                }
            }
            if paths.is_empty() {
                bail!("no block logs found");
            }
            let summary = participants.or_else(|| {
                let guess = paths[0].parent()?.join(PARTICIPANTS_FILE);
                guess.exists().then_some(guess)
            });
            let summary = match summary {
                Some(p) => read_participants(&p)?,
                None => Vec::new(),
            };
            let table = table_from_logs(&paths, &summary, scope.into(), &ExperimentConfig::default().quality)?;
            let mut w = output(out.as_deref())?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        Cmd::Stats { table, contrasts, out } => {
            let t = CohortTable::read_csv(BufReader::new(File::open(&table)?))
                .with_context(|| format!("reading {}", table.display()))?;
            let spec = ContrastSpec::from_json(&std::fs::read_to_string(&contrasts)?)
                .with_context(|| format!("parsing {}", contrasts.display()))?;
            let results = run_contrasts(&t, &spec)?;
            let mut w = output(out.as_deref())?;
            write_results_csv(&results, &mut w)?;
            w.flush()?;
        }
        Cmd::Replay { log, out } => {
            let record = read_log(&log)?;
            let again = replay(&record)?.record;
            if let Some(p) = out {
                again.write_jsonl(BufWriter::new(File::create(&p)?))?;
            }
            if again != record {
                let k = record.events.iter().zip(&again.events).position(|(a, b)| a != b);
                bail!(
                    "replay differs from {} (first difference at event {})",
                    log.display(),
                    k.map_or("past the shorter log".to_string(), |k| k.to_string())
                );
            }
            eprintln!("{}: {} events replay identically", log.display(), record.events.len());
        }
    }
    Ok(())
}
