use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flexmind_cli::{parse_script, report, RunError, Runner};
use flexmind_core::orchestrator::{fixture_key, parse_reply, HttpProvider, HttpProviderConfig, Provider, API_KEY_ENV};
use flexmind_core::store::{replay, replay_text, EventStore, DATA_DIR_ENV};
use flexmind_core::{MockProvider, OpKind, OrchestratorConfig};
use flexmind_service::{AppState, ServiceConfig, DEFAULT_LISTEN};

/// Opt-in AI support for ideation: run the service, drive sessions from
/// scripts, and inspect session logs.
#[derive(Parser)]
#[command(name = "flexmind", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    /// OpenAI-compatible chat completions endpoint; key from FLEXMIND_API_KEY.
    Http,
    /// Replies from fixture files.
    Mock,
}

#[derive(Args)]
struct EngineArgs {
    /// Directory holding session logs.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderKind,
    /// Fixture directory for the mock provider.
    #[arg(long, default_value = "fixtures/mock")]
    fixtures: PathBuf,
    /// Let the mock provider make up schema-valid replies for missing fixtures.
    #[arg(long)]
    placeholders: bool,
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    /// Per-call provider timeout.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Also record every model exchange next to the session log.
    #[arg(long)]
    debug_exchanges: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = DEFAULT_LISTEN)]
        listen: String,
        #[command(flatten)]
        engine: EngineArgs,
        /// Seconds between heartbeat comments on idle event streams.
        #[arg(long, default_value_t = 15)]
        heartbeat_secs: u64,
        /// Seconds a write waits for a busy session before answering 409.
        #[arg(long, default_value_t = 30)]
        lock_wait_secs: u64,
    },
    /// Run a session script. Exit 0 on success, 1 if a step fails, 2 if the script does not parse.
    Run {
        script: PathBuf,
        /// Print the final snapshot as JSON on stdout (the transcript goes to stderr).
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Fold a session log and print the resulting state.
    Replay {
        log: PathBuf,
        /// Stop after this event.
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Check that a session log folds cleanly and its graph is consistent.
    Verify { log: PathBuf },
    /// Manage mock provider fixtures.
    #[command(subcommand)]
    Fixture(FixtureCommand),
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Validate a raw reply and store it under its fixture key.
    New {
        op: OpKind,
        /// Name of the node the op runs on (the task statement for InitializeSpace).
        seed: String,
        /// File holding the raw reply; stdin when omitted.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Overwrite an existing fixture.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value = "fixtures/mock")]
        fixtures: PathBuf,
    },
}

/// Failure with the exit code to report it under.
struct Exit(u8, String);

impl Exit {
    fn failure(message: impl Into<String>) -> Self {
        Exit(1, message.into())
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Serve {
            listen,
            engine,
            heartbeat_secs,
            lock_wait_secs,
        } => serve(&listen, &engine, heartbeat_secs, lock_wait_secs),
        Command::Run { script, json, engine } => run(&script, json, &engine),
        Command::Replay { log, at, json } => replay_log(&log, at, json),
        Command::Verify { log } => verify(&log),
        Command::Fixture(FixtureCommand::New {
            op,
            seed,
            from,
            force,
            fixtures,
        }) => new_fixture(op, &seed, from.as_deref(), force, &fixtures),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn provider(args: &EngineArgs) -> Arc<dyn Provider> {
    match args.provider {
        ProviderKind::Mock => Arc::new(MockProvider::from_dir(&args.fixtures).with_placeholders(args.placeholders)),
        ProviderKind::Http => {
            let config = HttpProviderConfig::from_env(&args.base_url, Duration::from_secs(args.timeout_secs));
            if config.api_key.is_none() {
                eprintln!("warning: {API_KEY_ENV} is not set; requests go out without credentials");
            }
            Arc::new(HttpProvider::new(config))
        }
    }
}

fn orchestrator(args: &EngineArgs) -> OrchestratorConfig {
    OrchestratorConfig {
        model_name: args.model.clone(),
        ..OrchestratorConfig::default()
    }
}

fn open_store(dir: &Path, debug_exchanges: bool) -> Result<EventStore, Exit> {
    EventStore::open(dir)
        .map(|store| store.with_debug_exchanges(debug_exchanges))
        .map_err(|err| Exit::failure(format!("cannot use data directory {}: {err}", dir.display())))
}

fn serve(listen: &str, args: &EngineArgs, heartbeat_secs: u64, lock_wait_secs: u64) -> Result<(), Exit> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .init();
    let dir = args.data_dir.clone().unwrap_or_else(|| PathBuf::from("flexmind-data"));
    let store = open_store(&dir, args.debug_exchanges)?;
    let config = ServiceConfig {
        heartbeat: Duration::from_secs(heartbeat_secs.max(1)),
        lock_wait: Duration::from_secs(lock_wait_secs),
        ..ServiceConfig::default()
    };
    let state = AppState::new(store, provider(args), orchestrator(args), config);
    let runtime = tokio::runtime::Runtime::new().map_err(|err| Exit::failure(err.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|err| Exit::failure(format!("cannot listen on {listen}: {err}")))?;
        let addr = listener.local_addr().map_err(|err| Exit::failure(err.to_string()))?;
        eprintln!("flexmind listening on http://{addr} (sessions in {})", dir.display());
        flexmind_service::serve(listener, state)
            .await
            .map_err(|err| Exit::failure(format!("server stopped: {err}")))
    })
}

fn run(path: &Path, json: bool, args: &EngineArgs) -> Result<(), Exit> {
    let text = fs::read_to_string(path).map_err(|err| Exit(2, format!("cannot read {}: {err}", path.display())))?;
    let steps = parse_script(&text).map_err(|err| Exit(2, format!("{}: {err}", path.display())))?;
    let store = args
        .data_dir
        .as_deref()
        .map(|dir| open_store(dir, args.debug_exchanges))
        .transpose()?;
    let provider = provider(args);
    let runner = Runner {
        provider: provider.as_ref(),
        config: orchestrator(args),
        store,
    };
    let (mut stdout, mut stderr) = (io::stdout().lock(), io::stderr().lock());
    let transcript: &mut dyn Write = if json { &mut stderr } else { &mut stdout };
    let log = runner.run(&steps, transcript).map_err(|err| match err {
        RunError::Step(failure) => Exit::failure(failure.to_string()),
        RunError::Output(err) => Exit::failure(format!("writing output: {err}")),
    })?;
    let snapshot = log.snapshot();
    let done = if json {
        serde_json::to_writer(&mut stdout, &snapshot.to_wire())
            .map_err(io::Error::from)
            .and_then(|()| writeln!(stdout))
    } else {
        writeln!(stdout, "ok: {} step(s); {}", steps.len(), report::kind_counts(snapshot))
    };
    done.map_err(|err| Exit::failure(format!("writing output: {err}")))
}

fn replay_log(path: &Path, at: Option<u64>, json: bool) -> Result<(), Exit> {
    let text =
        fs::read_to_string(path).map_err(|err| Exit::failure(format!("cannot read {}: {err}", path.display())))?;
    let (events, mut snapshot) = replay_text(&text).map_err(|err| Exit::failure(format!("corrupt log: {err}")))?;
    if let Some(at) = at {
        if at > snapshot.last_seq {
            return Err(Exit::failure(format!(
                "--at {at} is past the last event ({})",
                snapshot.last_seq
            )));
        }
        snapshot = replay(&events[..=at as usize]).map_err(|err| Exit::failure(format!("corrupt log: {err}")))?;
    }
    let mut out = io::stdout().lock();
    let written = if json {
        serde_json::to_writer(&mut out, &snapshot.to_wire())
            .map_err(io::Error::from)
            .and_then(|()| writeln!(out))
    } else {
        writeln!(out, "{} event(s) replayed", snapshot.last_seq + 1)
            .and_then(|()| report::write_summary(&mut out, &snapshot))
    };
    written.map_err(|err| Exit::failure(format!("writing output: {err}")))
}

fn verify(path: &Path) -> Result<(), Exit> {
    let text =
        fs::read_to_string(path).map_err(|err| Exit::failure(format!("cannot read {}: {err}", path.display())))?;
    let (events, snapshot) = replay_text(&text).map_err(|err| Exit::failure(format!("corrupt log: {err}")))?;
    let violations = snapshot.graph.check_invariants();
    if !violations.is_empty() {
        let list: Vec<String> = violations
            .iter()
            .map(|v| format!("{:?}: {}", v.rule, v.detail))
            .collect();
        return Err(Exit::failure(format!(
            "graph invariants violated:\n  {}",
            list.join("\n  ")
        )));
    }
    println!("ok: {} event(s), {}", events.len(), report::kind_counts(&snapshot));
    Ok(())
}

fn new_fixture(op: OpKind, seed: &str, from: Option<&Path>, force: bool, fixtures: &Path) -> Result<(), Exit> {
    let raw = match from {
        Some(path) => {
            fs::read_to_string(path).map_err(|err| Exit::failure(format!("cannot read {}: {err}", path.display())))?
        }
        None => {
            let mut raw = String::new();
            io::stdin()
                .read_to_string(&mut raw)
                .map_err(|err| Exit::failure(format!("reading stdin: {err}")))?;
            raw
        }
    };
    parse_reply(op, &raw).map_err(|err| {
        Exit::failure(format!(
            "{} error at `{}`: {err}; nothing written",
            err.class(),
            err.path()
        ))
    })?;
    let target = fixtures.join(fixture_key(op, seed));
    if target.exists() && !force {
        return Err(Exit::failure(format!(
            "{} already exists; use --force to replace it",
            target.display()
        )));
    }
    fs::create_dir_all(fixtures)
        .and_then(|()| fs::write(&target, raw))
        .map_err(|err| Exit::failure(format!("writing {}: {err}", target.display())))?;
    println!("{}", target.display());
    Ok(())
}
