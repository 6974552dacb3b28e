use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use eca_core::behavior::{BehaviorEvent, BehaviorKind};
use eca_core::eliza::ElizaScript;
use eca_core::expression::PresetTable;
use eca_core::lipsync::{read_wav, write_csv, LipsyncConfig, LipsyncStream};
use eca_core::session::{bench, load_corpus, Emission, Session, SessionConfig, SessionEvent, BENCH_CORPUS};

use crate::AppState;

#[derive(Debug, Parser)]
#[command(name = "eca", version, about = "Embodied conversational agent server and tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the WebSocket/HTTP service.
    Serve(ServeArgs),
    /// Talk to the agent on stdin/stdout.
    Repl(ReplArgs),
    /// Compute mouth shapes for a WAV file and write them as CSV.
    Lipsync(LipsyncArgs),
    /// Time full conversational turns and print a latency table.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "ECA_PORT", default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// ELIZA script (JSON). Defaults to the bundled DOCTOR script.
    #[arg(long, env = "ECA_SCRIPT")]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub presets: Option<PathBuf>,
    #[arg(long)]
    pub lipsync_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "info")]
    pub log_level: String,
    /// Directory of client files served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    #[arg(long, env = "ECA_SCRIPT")]
    pub script: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LipsyncArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub turns: u64,
    #[arg(long, env = "ECA_SCRIPT")]
    pub script: Option<PathBuf>,
    /// One utterance per line. Defaults to the bundled 30-utterance corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn load_script(path: Option<&Path>) -> Result<ElizaScript> {
    match path {
        None => Ok(ElizaScript::doctor()),
        Some(p) => ElizaScript::from_path(p).with_context(|| format!("cannot load script {}", p.display())),
    }
}

fn load_presets(path: Option<&Path>) -> Result<PresetTable> {
    match path {
        None => Ok(PresetTable::default()),
        Some(p) => PresetTable::from_path(p).with_context(|| format!("cannot load presets {}", p.display())),
    }
}

fn load_lipsync(path: Option<&Path>) -> Result<LipsyncConfig> {
    match path {
        None => Ok(LipsyncConfig::default()),
        Some(p) => LipsyncConfig::from_path(p).with_context(|| format!("cannot load lip-sync config {}", p.display())),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Repl(args) => {
            let stdin = std::io::stdin();
            repl(args, stdin.lock(), std::io::stdout().lock())
        }
        Command::Lipsync(args) => lipsync(args),
        Command::Bench(args) => run_bench(args, std::io::stdout().lock()),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&args.log_level).context("invalid --log-level")?)
        .init();
    let state = AppState::new(
        load_script(args.script.as_deref())?,
        load_presets(args.presets.as_deref())?,
        load_lipsync(args.lipsync_config.as_deref())?,
        SessionConfig {
            seed: args.seed,
            ..SessionConfig::default()
        },
    );
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        crate::serve(listener, state, args.static_dir, shutdown).await?;
        Ok(())
    })
}

fn annotate(e: &BehaviorEvent) -> String {
    let name = match e.kind {
        BehaviorKind::HeadNod => "nod",
        BehaviorKind::HeadShake => "shake",
        BehaviorKind::Gaze => "gaze",
    };
    format!("{name} {:.0}-{:.0}ms", e.start_ms, e.end_ms)
}

/// Line-oriented conversation. Each reply is followed by its behavior
/// schedule in brackets.
pub fn repl(args: ReplArgs, input: impl BufRead, mut out: impl Write) -> Result<()> {
    let script = std::sync::Arc::new(load_script(args.script.as_deref())?);
    let config = SessionConfig {
        seed: args.seed,
        ..SessionConfig::default()
    };
    let mut session = Session::new(script, Default::default(), config);
    for emission in session.handle_event(SessionEvent::SessionStart)? {
        if let Emission::Greeting(text) = emission {
            writeln!(out, "{text}")?;
        }
    }
    session.handle_event(SessionEvent::ListenStart)?;
    for line in input.lines() {
        let line = line?;
        write!(out, "> ")?;
        for emission in session.handle_event(SessionEvent::FinalTranscript(line))? {
            match emission {
                Emission::AgentReply(turn) => {
                    let notes: Vec<String> = turn.schedule.events.iter().map(annotate).collect();
                    writeln!(out, "{}  [{}]", turn.reply, notes.join(", "))?;
                    session.handle_event(SessionEvent::TtsStart)?;
                    session.handle_event(SessionEvent::TtsEnd)?;
                }
                Emission::SessionEnd(text) => {
                    writeln!(out, "{text}")?;
                    return Ok(());
                }
                Emission::Greeting(_) | Emission::Gaze(_) => {}
            }
        }
        out.flush()?;
    }
    Ok(())
}

fn lipsync(args: LipsyncArgs) -> Result<()> {
    let (samples, rate) = read_wav(&args.wav)?;
    let config = load_lipsync(args.config.as_deref())?.with_sample_rate(rate);
    let mut stream = LipsyncStream::new(config)?;
    let frames = stream.process(&samples, rate)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            write_csv(&frames, BufWriter::new(file))?;
        }
        None => write_csv(&frames, std::io::stdout().lock())?,
    }
    Ok(())
}

pub fn run_bench(args: BenchArgs, mut out: impl Write) -> Result<()> {
    let script = load_script(args.script.as_deref())?;
    let corpus = match &args.corpus {
        Some(p) => load_corpus(&std::fs::read_to_string(p).with_context(|| format!("cannot read corpus {}", p.display()))?),
        None => load_corpus(BENCH_CORPUS),
    };
    anyhow::ensure!(!corpus.is_empty(), "corpus has no utterances");
    let started = Instant::now();
    let report = bench(
        args.turns as usize,
        &corpus,
        std::sync::Arc::new(script),
        Default::default(),
        SessionConfig {
            seed: args.seed,
            ..SessionConfig::default()
        },
    )?;
    write!(out, "{}", report.summary.table())?;
    writeln!(out, "wall time: {:.1} ms", started.elapsed().as_secs_f64() * 1000.0)?;
    Ok(())
}
