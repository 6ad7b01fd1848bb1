use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context as _};
use clap::{Parser, Subcommand, ValueEnum};
use edge_gateway::config::{resolve, GatewayConfig, RetryProfile};
use edge_gateway::daemon::{AdminCommand, Daemon};
use edge_gateway::{files, probe, sim};
use edge_gateway_core::adapter::{Protocol, RetryPolicy};
use edge_gateway_core::context::ContextRegistry;
use edge_gateway_core::convert::{self, Format};
use edge_gateway_core::dsl::list::ListRegistry;
use edge_gateway_core::dsl::{Registry, Synthesizer, DEFAULT_MAX_LEN};
use edge_gateway_core::interop::InteropRegistry;
use edge_gateway_core::stats::spearman;
use edge_gateway_core::{QTable, RegistryId};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "gateway", version, about = "Autonomic IoT edge gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Xml,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the daemon. Admin commands are read from stdin.
    Run {
        /// Config file; GATEWAY_CONFIG takes precedence.
        config: Option<PathBuf>,
    },
    /// Convert an XML file to JSON or back, writing <basename>.<target>.
    Convert { file: PathBuf, target: Target },
    /// Synthesize a program from an example file.
    Synth {
        examples: PathBuf,
        /// L (lists), I (messages) or C (contexts).
        registry: String,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        /// Also write the program to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate connection attempts with Bernoulli failures.
    Sim {
        protocol: Protocol,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "default")]
        profile: Profile,
    },
    /// Print the stats dump written by a running or finished daemon.
    Stats { config: Option<PathBuf> },
    /// Time UDP echo round trips.
    Probe {
        target: String,
        #[arg(long, default_value_t = 30)]
        count: u32,
        #[arg(long, default_value_t = 1000)]
        timeout_ms: u64,
    },
    /// Run a UDP echo server for `probe`.
    Echo {
        #[arg(default_value = "127.0.0.1:7")]
        bind: String,
    },
    /// Tie-corrected Spearman correlation of two comma-separated series.
    Spearman {
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        xs: Vec<f64>,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        ys: Vec<f64>,
    },
    /// Connection time when the working adapter sits at `rank`.
    RankCost {
        #[arg(long, default_value_t = 10)]
        rank: u32,
        #[arg(long, default_value_t = 350)]
        failure_ms: u64,
        /// Defaults to the failure cost.
        #[arg(long)]
        success_ms: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Default,
    Aggressive,
}

/// Exit 1 for failures, 2 for usage errors.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config } => run(config.as_deref())?,
        Command::Convert { file, target } => convert_file(&file, target)?,
        Command::Synth { examples, registry, max_len, out } => {
            let registry = RegistryId::parse(&registry).ok_or_else(|| Failure::Usage(format!("unknown registry {registry:?}")))?;
            if max_len == 0 {
                return Err(Failure::Usage("--max-len must be at least 1".into()));
            }
            let mut synth = Synthesizer::new(QTable::default(), max_len);
            let found = match registry {
                RegistryId::L => synth_with(&mut synth, &ListRegistry, &examples)?,
                RegistryId::I => synth_with(&mut synth, &InteropRegistry, &examples)?,
                RegistryId::C => synth_with(&mut synth, &ContextRegistry, &examples)?,
            };
            if let Some(out) = out {
                files::save_program(&out, &found.program).map_err(anyhow::Error::from)?;
            }
            print!("{}", found.program.serialize());
            eprintln!("{} ({} candidates)", found.program.describe(), found.candidates_visited);
        }
        Command::Sim { protocol, trials, rate, seed, profile } => {
            let policy = match profile {
                Profile::Default => RetryPolicy::default_for(protocol),
                Profile::Aggressive => RetryPolicy::aggressive_for(protocol),
            };
            let report = sim::simulate(protocol, policy, trials, rate, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Stats { config } => {
            let (_, cfg) = GatewayConfig::load(config.as_deref())?;
            let path = cfg.stats_path();
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    let empty = files::StatsDump::new(&Default::default(), 0, 0, 0, 0);
                    empty.to_json()
                }
                Err(e) => return Err(anyhow!("{}: {e}", path.display()).into()),
            };
            println!("{}", text.trim_end());
        }
        Command::Probe { target, count, timeout_ms } => {
            if count == 0 {
                return Err(Failure::Usage("--count must be at least 1".into()));
            }
            let addr = resolve(&target)?;
            let report = probe::probe(addr, count, Duration::from_millis(timeout_ms)).map_err(anyhow::Error::from)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Echo { bind } => {
            let server = probe::EchoServer::start(&bind).with_context(|| format!("binding {bind}"))?;
            println!("echoing on {}", server.local_addr());
            let (tx, rx) = std::sync::mpsc::channel();
            ctrlc::set_handler(move || {
                let _ = tx.send(());
            })
            .context("installing signal handler")?;
            let _ = rx.recv();
        }
        Command::Spearman { xs, ys } => {
            let rho = spearman(&xs, &ys).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("{rho:.3}");
        }
        Command::RankCost { rank, failure_ms, success_ms } => {
            if rank == 0 {
                return Err(Failure::Usage("--rank starts at 1".into()));
            }
            let failure = Duration::from_millis(failure_ms);
            let success = success_ms.map_or(failure, Duration::from_millis);
            let cost = sim::rank_cost(rank, failure, success).map_err(anyhow::Error::from)?;
            println!("{}", serde_json::to_string_pretty(&cost).expect("report serializes"));
        }
    }
    Ok(())
}

fn synth_with<R>(synth: &mut Synthesizer, registry: &R, path: &Path) -> Result<edge_gateway_core::dsl::Synthesis, Failure>
where
    R: Registry,
    R::Value: DeserializeOwned,
{
    let examples = files::load_examples::<R::Value>(path).map_err(anyhow::Error::from)?;
    Ok(synth.learn(registry, &examples).map_err(anyhow::Error::from)?)
}

fn convert_file(file: &Path, target: Target) -> Result<(), Failure> {
    let to = match target {
        Target::Xml => Format::Xml,
        Target::Json => Format::Json,
    };
    let by_extension = file.extension().and_then(|e| e.to_str()).and_then(Format::from_extension);
    if by_extension == Some(to) {
        return Err(Failure::Usage(format!("{} is already {to}", file.display())));
    }
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(anyhow!("{}: file not found", file.display()).into())
        }
        Err(e) => return Err(anyhow!("{}: {e}", file.display()).into()),
    };
    let from = by_extension.or_else(|| Format::sniff(&text)).ok_or_else(|| anyhow!("cannot tell the format of {}", file.display()))?;
    if from == to {
        return Err(Failure::Usage(format!("{} is already {to}", file.display())));
    }
    let out = convert::convert(&text, from, to).map_err(|e| anyhow!("{}: {e}", file.display()))?;
    let out_path = file.with_extension(to.extension());
    std::fs::write(&out_path, out).with_context(|| format!("writing {}", out_path.display()))?;
    println!("{}", out_path.display());
    Ok(())
}

fn run(config: Option<&Path>) -> anyhow::Result<()> {
    let (path, cfg) = match GatewayConfig::load(config) {
        Ok(c) => c,
        Err(e) if config.is_none() && std::env::var_os(edge_gateway::config::CONFIG_ENV).is_none() => {
            bail!("{e}; pass a config file or set {}", edge_gateway::config::CONFIG_ENV)
        }
        Err(e) => return Err(e),
    };
    log::info!("starting with {}", path.display());
    if cfg.retry.profile == RetryProfile::Aggressive {
        log::info!("aggressive retry profile");
    }
    let daemon = Daemon::start(cfg)?;
    for b in &daemon.harness().mqtt {
        println!("simulated mqtt broker on {}", b.local_addr());
    }
    for s in &daemon.harness().coap {
        println!("simulated coap server on {}", s.local_addr());
    }
    let stopper = daemon.handle();
    ctrlc::set_handler(move || stopper.stop()).context("installing signal handler")?;
    let admin = daemon.handle();
    std::thread::Builder::new().name("admin-stdin".into()).spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "quit" || line == "exit" {
                admin.stop();
                break;
            }
            let reply = AdminCommand::parse(line).map_err(|e| anyhow!(e)).and_then(|cmd| admin.admin(cmd));
            match reply {
                Ok(out) => println!("{out}"),
                Err(e) => println!("error: {e}"),
            }
        }
    })?;
    let report = daemon.wait()?;
    for p in &report.archived {
        println!("archived {}", p.display());
    }
    Ok(())
}
