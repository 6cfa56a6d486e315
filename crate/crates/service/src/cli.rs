//! Command-line interface of the `deptex` binary.
//!
//! Exit codes: 0 on success or an allowed gate, 1 when a gate blocks or a
//! tested policy fails, 2 on usage and runtime errors.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use deptex_core::graph::NodeId;
use deptex_core::ingest::parse_sbom;
use deptex_core::policy::{dry_run, ContextBinding, Decision, PolicyContext, PolicyScript, PrMeta, SandboxBudget};
use deptex_core::risk::AggMode;
use serde::Serialize;

use crate::api::{self, AppState};
use crate::config::{ServiceConfig, ENV_TOKEN};
use crate::dispatch::dispatch;
use crate::error::ServiceError;
use crate::gate::GateRequest;
use crate::http::UreqTransport;
use crate::service::{parse_tier_overrides, render_leaderboard, LeaderboardFormat, Service};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "deptex", version, about = "Organization-first dependency risk governance")]
pub struct Cli {
    /// Snapshot file holding the graph, policies, channels and audit log.
    #[arg(long, global = true, env = "DEPTEX_STORE", default_value = "deptex-store.json")]
    pub store: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// Load SBOMs, vulnerability feeds and reachability slices.
    #[command(subcommand)]
    Ingest(Ingest),
    /// Print the signal leaderboard of an org.
    Score {
        #[arg(long)]
        org: String,
        #[arg(long, default_value = "sum")]
        agg: AggMode,
        #[arg(long, default_value = "json")]
        format: LeaderboardFormat,
        /// Hypothetical `asset:tier[,asset:tier...]`; nothing is stored.
        #[arg(long)]
        override_tier: Option<String>,
    },
    /// Work with policy scripts.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Run the PR gate for an asset against two CycloneDX SBOMs.
    Gate(GateArgs),
}

#[derive(Debug, Subcommand)]
pub enum Ingest {
    /// Mirror a CycloneDX SBOM onto an asset's dependencies.
    Sbom {
        #[arg(long)]
        asset: String,
        file: PathBuf,
    },
    /// Match an OSV feed and deliver any resulting notifications.
    Vulns { file: PathBuf },
    /// Score a reachability slice.
    Slice { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum PolicyCmd {
    /// Dry-run a `.dpx` script against a binding fixture and print the
    /// outcome, trace and HTTP log.
    Test {
        #[arg(long)]
        context: PolicyContext,
        #[arg(long)]
        binding: PathBuf,
        /// URL prefix the script may reach; repeatable.
        #[arg(long = "allow")]
        allow: Vec<String>,
        script: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GateArgs {
    #[arg(long)]
    asset: String,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    head: PathBuf,
    #[arg(long, default_value = "")]
    repo: String,
    #[arg(long, default_value_t = 0)]
    number: u64,
    #[arg(long, default_value = "")]
    author: String,
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| ServiceError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn print_json(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("output values serialize")
    );
}

fn open_service(store: &Path) -> Result<Service, ServiceError> {
    Ok(Service::new(
        Store::open(store)?,
        ServiceConfig::from_env()?,
        Arc::new(UreqTransport::new()),
    )
    .with_actor("cli"))
}

fn node_id(raw: &str) -> Result<NodeId, ServiceError> {
    Ok(NodeId::new(raw)?)
}

pub fn run(cli: Cli) -> ExitCode {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, ServiceError> {
    match cli.command {
        Command::Serve { listen } => serve(&cli.store, listen),
        Command::Ingest(Ingest::Sbom { asset, file }) => {
            let mut svc = open_service(&cli.store)?;
            print_json(&svc.ingest_sbom(&node_id(&asset)?, &read(&file)?)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest(Ingest::Vulns { file }) => {
            let mut svc = open_service(&cli.store)?;
            let report = svc.ingest_feed(&read(&file)?)?;
            let delivery = dispatch(
                &report.dispatches(),
                &svc.state().channels,
                svc.transport().as_ref(),
                &svc.config().retry,
            )?;
            svc.record_delivery(&delivery)?;
            print_json(&serde_json::json!({"feed": report, "delivery": delivery}));
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest(Ingest::Slice { file }) => {
            let mut svc = open_service(&cli.store)?;
            print_json(&svc.ingest_slice(&read(&file)?)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            org,
            agg,
            format,
            override_tier,
        } => {
            let svc = open_service(&cli.store)?;
            let overrides = parse_tier_overrides(override_tier.as_deref().unwrap_or_default())?;
            let rows = svc.leaderboard(&node_id(&org)?, agg, &overrides)?;
            print!("{}", render_leaderboard(&rows, format));
            Ok(ExitCode::SUCCESS)
        }
        Command::Policy(PolicyCmd::Test {
            context,
            binding,
            allow,
            script,
        }) => {
            let source = String::from_utf8(read(&script)?)
                .map_err(|_| ServiceError::Validation(format!("{} is not UTF-8", script.display())))?;
            let id = script
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "script".into());
            let budget = SandboxBudget::default().with_allowlist(allow);
            let script = PolicyScript::new(id, context, source)?.with_budget(budget)?;
            let binding: ContextBinding = serde_json::from_slice(&read(&binding)?)
                .map_err(|e| ServiceError::Validation(format!("binding: {e}")))?;
            let report = dry_run(&script, &binding, &script.budget, &UreqTransport::new());
            print_json(&report);
            Ok(if report.error.is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Gate(args) => {
            let mut svc = open_service(&cli.store)?;
            let req = GateRequest {
                asset_ref: node_id(&args.asset)?,
                base_sbom: parse_sbom(&read(&args.base)?)?,
                head_sbom: parse_sbom(&read(&args.head)?)?,
                pr_meta: PrMeta {
                    repo: args.repo,
                    number: args.number,
                    author: args.author,
                },
            };
            let result = svc.gate(&req)?;
            print_json(&result);
            Ok(match result.decision {
                Decision::Allow => ExitCode::SUCCESS,
                Decision::Block => ExitCode::from(1),
            })
        }
    }
}

fn serve(store: &Path, listen: SocketAddr) -> Result<ExitCode, ServiceError> {
    let svc = open_service(store)?.with_actor("api");
    let token = std::env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
    if token.is_none() {
        log::warn!("{ENV_TOKEN} is not set; the API accepts unauthenticated requests");
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Unavailable(e.to_string()))?;
    runtime
        .block_on(async move {
            let listener = api::bind(listen).await?;
            log::info!("listening on {}", listener.local_addr()?);
            api::serve(listener, AppState::new(svc, token)).await
        })
        .map_err(|e| ServiceError::Unavailable(e.to_string()))?;
    Ok(ExitCode::SUCCESS)
}
