use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use hitl_core::acquisition::{ReviewStatus, Strategy};
use hitl_core::analysis::write_report_csv;
use hitl_core::bundled;
use hitl_core::campaign::{run_script, Campaign, CampaignConfig, CampaignScript, CandidateRef, Phase};
use hitl_core::dataset::load_dataset;
use hitl_core::replication::{self, StudyConfig};
use hitl_core::sampling::{ConditionPoint, SurrogateSpaceSpec};
use hitl_crystal::server;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "hitl-crystal", version, about = "Human-in-the-loop active learning for Li2CO3 crystallization")]
struct Cli {
    /// Campaign directory (state.json + events.jsonl).
    #[arg(long, global = true, default_value = "campaign")]
    state: PathBuf,
    /// Campaign config JSON; used when a campaign is created.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the command's randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty campaign.
    Init {
        /// Surrogate spaces JSON (defaults to the bundled spaces A-F).
        #[arg(long)]
        spaces: Option<PathBuf>,
        #[arg(long, default_value = "A")]
        active: String,
    },
    /// Bulk-import records from CSV (the bundled table when no path is given).
    /// Creates the campaign if needed.
    Import { csv: Option<PathBuf> },
    /// Train models and generate a candidate batch.
    Iterate {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
    },
    /// Record an expert decision on a candidate.
    Review {
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        candidate: usize,
        #[arg(long, value_enum)]
        decision: Decision,
        /// Replacement ConditionPoint JSON, for `edit`.
        #[arg(long)]
        point: Option<PathBuf>,
    },
    /// Give up on an approved candidate.
    Abandon {
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        candidate: usize,
        #[arg(long)]
        reason: String,
    },
    /// Add experiment results from CSV, optionally linked to one candidate.
    Ingest {
        csv: PathBuf,
        #[arg(long, requires = "candidate")]
        batch: Option<usize>,
        #[arg(long, requires = "batch")]
        candidate: Option<usize>,
    },
    /// Print an iteration report (latest by default).
    Report {
        #[arg(long)]
        iteration: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
    },
    /// Switch between exploration and exploitation.
    Phase {
        #[arg(value_enum)]
        phase: PhaseArg,
    },
    /// Manage surrogate spaces.
    Space {
        #[command(subcommand)]
        action: SpaceAction,
    },
    /// Replay a campaign script into a fresh campaign directory.
    Replay {
        /// Script JSON (defaults to the bundled historical replay).
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Run the informed/uninformed pool replication study.
    Replicate {
        /// Study config JSON (defaults to the bundled one).
        #[arg(long)]
        study: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Subcommand)]
enum SpaceAction {
    Activate { label: String },
    /// Add or replace a space from a SurrogateSpaceSpec JSON file.
    Save {
        file: PathBuf,
        #[arg(long)]
        activate: bool,
    },
    /// Change the active space's temperature-gap constraint.
    MinDeltaT { value: f64 },
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Pareto,
    Walk,
    Midpoint,
    Ucb,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Pareto => Strategy::ParetoExploration,
            StrategyArg::Walk => Strategy::RandomWalkVerification,
            StrategyArg::Midpoint => Strategy::BoundaryMidpoint,
            StrategyArg::Ucb => Strategy::Ucb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Decision {
    Approve,
    Reject,
    Edit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    /// Long-format analysis CSV.
    Csv,
    /// Candidate batch of the iteration as CSV.
    Candidates,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Exploration,
    Exploitation,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn campaign_config(cli: &Cli) -> anyhow::Result<CampaignConfig> {
    match &cli.config {
        Some(p) => read_json(p),
        None => Ok(CampaignConfig::default()),
    }
}

fn open(cli: &Cli) -> anyhow::Result<Campaign> {
    Campaign::open(&cli.state).with_context(|| format!("opening campaign at {}", cli.state.display()))
}

fn read_records(path: &Path) -> anyhow::Result<Vec<hitl_core::dataset::ExperimentRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_dataset(f)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Init { spaces, active } => {
            let spaces: Vec<SurrogateSpaceSpec> = match spaces {
                Some(p) => read_json(p)?,
                None => bundled::spaces()?,
            };
            Campaign::create(&cli.state, campaign_config(&cli)?, spaces, active)?;
            println!("created campaign at {}", cli.state.display());
        }
        Command::Import { csv } => {
            let records = match csv {
                Some(p) => read_records(p)?,
                None => bundled::records()?,
            };
            let mut c = if cli.state.join(hitl_core::campaign::EVENT_LOG).exists() {
                open(&cli)?
            } else {
                Campaign::create(&cli.state, campaign_config(&cli)?, bundled::spaces()?, "A")?
            };
            c.import_records(&records)?;
            println!("imported {} records ({} total)", records.len(), c.state().records.len());
        }
        Command::Iterate { strategy } => {
            let mut c = open(&cli)?;
            let (batch, report) = c.run_iteration((*strategy).into(), cli.seed.unwrap_or(0))?;
            println!(
                "iteration {}: batch {} with {} {} candidates",
                report.iteration,
                batch.id,
                batch.candidates.len(),
                batch.strategy.name()
            );
            for f in &report.flags {
                println!("flag: {f}");
            }
            for n in &batch.notes {
                println!("note: {n}");
            }
        }
        Command::Review {
            batch,
            candidate,
            decision,
            point,
        } => {
            let mut c = open(&cli)?;
            let edited: Option<ConditionPoint> = point.as_deref().map(read_json).transpose()?;
            let status = match decision {
                Decision::Approve => ReviewStatus::Approved,
                Decision::Reject => ReviewStatus::Rejected,
                Decision::Edit => ReviewStatus::Edited,
            };
            let cref = CandidateRef {
                batch_id: *batch,
                candidate_id: *candidate,
            };
            c.review(cref, status, edited)?;
            println!("batch {batch} candidate {candidate}: {status:?}");
        }
        Command::Abandon { batch, candidate, reason } => {
            let mut c = open(&cli)?;
            c.abandon(
                CandidateRef {
                    batch_id: *batch,
                    candidate_id: *candidate,
                },
                reason,
            )?;
            println!("batch {batch} candidate {candidate}: abandoned");
        }
        Command::Ingest { csv, batch, candidate } => {
            let records = read_records(csv)?;
            let mut c = open(&cli)?;
            let link = match (batch, candidate) {
                (Some(b), Some(j)) => {
                    if records.len() != 1 {
                        bail!("a linked ingest takes exactly one record, got {}", records.len());
                    }
                    Some(CandidateRef {
                        batch_id: *b,
                        candidate_id: *j,
                    })
                }
                _ => None,
            };
            for r in &records {
                c.ingest(r, link)?;
                let stored = c.state().records.last().expect("just ingested");
                println!("experiment {}: battery grade {:?}", stored.exp_id, stored.battery_grade.unwrap_or(false));
                for w in &stored.warnings {
                    println!("warning: {w}");
                }
            }
        }
        Command::Report { iteration, format } => {
            let c = open(&cli)?;
            let rec = match iteration {
                Some(i) => c.state().iteration_record(*i)?,
                None => c.state().latest_iteration().context("no iterations yet")?,
            };
            match format {
                ReportFormat::Json => print_json(&rec.report)?,
                ReportFormat::Csv => write_report_csv(io::stdout().lock(), &rec.report.analysis)?,
                ReportFormat::Candidates => c.state().batch(rec.batch_id)?.write_csv(io::stdout().lock())?,
            }
        }
        Command::Phase { phase } => {
            let mut c = open(&cli)?;
            let phase = match phase {
                PhaseArg::Exploration => Phase::Exploration,
                PhaseArg::Exploitation => Phase::Exploitation,
            };
            c.set_phase(phase)?;
            println!("phase: {phase:?}");
        }
        Command::Space { action } => {
            let mut c = open(&cli)?;
            match action {
                SpaceAction::Activate { label } => c.activate_space(label)?,
                SpaceAction::Save { file, activate } => c.save_space(read_json(file)?, *activate)?,
                SpaceAction::MinDeltaT { value } => {
                    let mut spec = c.state().active_spec()?.clone();
                    spec.min_delta_t = *value;
                    c.set_active_space(spec)?;
                }
                SpaceAction::List => {}
            }
            let s = c.state();
            for spec in &s.spaces {
                let mark = if spec.label == s.active_space { "*" } else { " " };
                println!("{mark} {} n_points={} min_delta_t={}", spec.label, spec.n_points, spec.min_delta_t);
            }
        }
        Command::Replay { script } => {
            let script: CampaignScript = match script {
                Some(p) => read_json(p)?,
                None => bundled::campaign_script()?,
            };
            let (c, log) = run_script(
                &script,
                &bundled::records()?,
                campaign_config(&cli)?,
                bundled::spaces()?,
                Some(&cli.state),
            )?;
            for l in &log {
                println!("{:>3} {:<60} iteration {} {:?} records {}", l.step, l.action, l.iteration, l.phase, l.n_records);
            }
            println!("campaign written to {} (version {})", cli.state.display(), c.state().version());
        }
        Command::Replicate {
            study,
            out,
            pool_size,
            instances,
        } => {
            let mut cfg: StudyConfig = match study {
                Some(p) => read_json(p)?,
                None => bundled::study_config()?,
            };
            if let Some(n) = pool_size {
                cfg.pool_size = *n;
            }
            if let Some(n) = instances {
                cfg.n_instances = *n;
            }
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            let result = replication::run_study(&cfg)?;
            for a in &result.arms {
                println!(
                    "{:<18} {:>3}/{:<3} rate {:.3}  95% CI [{:.3}, {:.3}]",
                    a.arm.to_string(),
                    a.successes,
                    a.n_instances,
                    a.rate,
                    a.ci_low,
                    a.ci_high
                );
            }
            println!("ordering holds: {}", result.ordering_holds());
            if let Some(dir) = out {
                replication::write_outputs(dir, &result)?;
                println!("outputs written to {}", dir.display());
            }
        }
        Command::Serve { addr } => {
            let c = open(&cli)?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(c, addr))?;
        }
    }
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
