use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use citysim_core::config::RunConfig;
use citysim_core::experiment::{emit_outputs, regenerate_report, run_plan, ExperimentPlan};
use citysim_core::harness::{replay_transcript, run_trial, CognitiveConfig, TrialSetup, Transcript};
use citysim_core::policy::{Cassette, CassetteHandle, CassettePolicy, HeuristicPolicy, HttpPolicy, Policy};
use citysim_core::sim::ResourceKind;
use citysim_core::verify::{verify, FixedTheory, VerificationReport};

#[derive(Parser)]
#[command(name = "citysim", version, about = "City resource-allocation simulation with verified agent beliefs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Heuristic,
    Llm,
    Replay,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its transcript.
    Simulate {
        /// TOML or JSON file with sim, topology, endpoint and prompt_dir settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "heuristic")]
        policy: PolicyKind,
        /// Enable theory-of-mind reasoning.
        #[arg(long)]
        tom: bool,
        /// Enable internal beliefs with verification.
        #[arg(long)]
        ib: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transcript output path.
        #[arg(long, default_value = "transcript.json")]
        out: PathBuf,
        /// Cassette to replay (required with --policy replay).
        #[arg(long)]
        cassette: Option<PathBuf>,
        /// Record every policy response into this cassette.
        #[arg(long, conflicts_with = "cassette")]
        record: Option<PathBuf>,
        /// Print the trial summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment plan and write results, summaries and a chart.
    Experiment {
        plan: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Maximum number of trials running in parallel.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a belief program (file or stdin) for consistency.
    Verify {
        /// Belief file; reads stdin when omitted or "-".
        file: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Agent whose carried resource plan_supply refers to.
        #[arg(long, default_value = "food")]
        role: ResourceKind,
        /// Config file supplying topology and capacity.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Recompute a transcript and confirm every snapshot matches.
    Replay { transcript: PathBuf },
    /// Regenerate summary.csv, summary.json and chart.svg from results.csv.
    Report { dir: PathBuf },
}

type Failure = String;

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(RunConfig::default()),
    }
}

fn simulate(
    config: Option<PathBuf>,
    policy: PolicyKind,
    cognitive: CognitiveConfig,
    seed: u64,
    out: PathBuf,
    cassette: Option<PathBuf>,
    record: Option<PathBuf>,
    json: bool,
) -> Result<ExitCode, Failure> {
    let cfg = load_config(config.as_deref())?;
    let templates = cfg.templates().map_err(|e| e.to_string())?;

    let base: Box<dyn Fn() -> Result<Box<dyn Policy>, Failure>> = match policy {
        PolicyKind::Heuristic => Box::new(|| Ok(Box::new(HeuristicPolicy) as Box<dyn Policy>)),
        PolicyKind::Llm => {
            let endpoint = cfg.endpoint.clone().ok_or("--policy llm needs an [endpoint] section in --config")?;
            Box::new(move || Ok(Box::new(HttpPolicy::new(endpoint.clone())) as Box<dyn Policy>))
        }
        PolicyKind::Replay => Box::new(|| Err("unreachable".to_string())),
    };

    let mut recorder = None;
    let mut policies: BTreeMap<ResourceKind, Box<dyn Policy>> = BTreeMap::new();
    if policy == PolicyKind::Replay {
        let path = cassette.as_ref().ok_or("--policy replay needs --cassette")?;
        let c = Cassette::load(path).map_err(|e| format!("cannot load cassette {}: {e}", path.display()))?;
        let handle = CassetteHandle::replaying(c);
        for role in ResourceKind::ALL {
            policies.insert(role, Box::new(CassettePolicy::replay(handle.clone(), "replay")));
        }
    } else {
        let handle = record.as_ref().map(|_| CassetteHandle::recording());
        for role in ResourceKind::ALL {
            let inner = base()?;
            let p: Box<dyn Policy> = match &handle {
                Some(h) => Box::new(CassettePolicy::record(inner, h.clone())),
                None => inner,
            };
            policies.insert(role, p);
        }
        recorder = handle.zip(record);
    }

    let setup = TrialSetup { params: cfg.sim.clone(), topology: cfg.topology.clone(), config: cognitive, seed, templates };
    let (transcript, error) = match run_trial(&setup, &mut policies) {
        Ok(t) => (t, None),
        Err(abort) => match abort.transcript() {
            Some(t) => (t.clone(), Some(abort.to_string())),
            None => return Err(abort.to_string()),
        },
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    std::fs::write(&out, transcript.to_json()).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    if let Some((handle, path)) = recorder {
        handle.cassette().save(&path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    if let Some(e) = error {
        return Err(format!("trial aborted ({e}); partial transcript written to {}", out.display()));
    }

    let score = transcript.final_score.unwrap_or_default();
    if json {
        let v = serde_json::json!({
            "config": cognitive.label(),
            "seed": seed,
            "turns": transcript.turns.len(),
            "final_score": score,
            "verified_turn_fraction": transcript.verified_turn_fraction(),
            "invalid_actions": transcript.invalid_actions(),
            "transcript": out,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
    } else {
        println!(
            "config {} seed {seed}: {} turns, final score {score:.2}, verified turns {:.0}%, invalid actions {}",
            cognitive.display_name(),
            transcript.turns.len(),
            transcript.verified_turn_fraction() * 100.0,
            transcript.invalid_actions()
        );
        println!("transcript written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(plan_path: PathBuf, out: PathBuf, workers: Option<usize>) -> Result<ExitCode, Failure> {
    let plan = ExperimentPlan::load(&plan_path).map_err(|e| e.to_string())?;
    let outcome = run_plan(&plan, &out, workers).map_err(|e| e.to_string())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    emit_outputs(&outcome, plan.master_seed, plan.trials, plan.resamples, plan.confidence, &out).map_err(|e| e.to_string())?;
    println!("{:<24} {:>3} {:>8} {:>8} {:>8}", "cell", "n", "median", "ci_low", "ci_high");
    for s in &outcome.summaries {
        println!("{:<24} {:>3} {:>8.2} {:>8.2} {:>8.2}", s.cell_id, s.n, s.median, s.ci_low, s.ci_high);
    }
    println!("outputs written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(file: Option<PathBuf>, json: bool, role: ResourceKind, config: Option<PathBuf>) -> Result<ExitCode, Failure> {
    let text = match file.as_deref() {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| format!("cannot read stdin: {e}"))?;
            s
        }
    };
    let cfg = load_config(config.as_deref())?;
    let theory = FixedTheory::new(cfg.topology.clone(), cfg.sim.capacity, role);
    let report = verify(&text, &theory);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        match &report {
            VerificationReport::Consistent { derived_fact_count } => {
                println!("consistent ({derived_fact_count} derived facts)")
            }
            VerificationReport::Inconsistent { .. } => println!("inconsistent\n{}", report.feedback()),
            VerificationReport::Malformed { .. } => println!("malformed\n{}", report.feedback()),
        }
    }
    Ok(if report.is_consistent() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn replay_cmd(path: PathBuf) -> Result<ExitCode, Failure> {
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let transcript = Transcript::from_json(&text).map_err(|e| format!("{}: invalid transcript: {e}", path.display()))?;
    replay_transcript(&transcript).map_err(|e| format!("replay failed: {e}"))?;
    println!(
        "replay ok: {} turns, {} snapshots match{}",
        transcript.turns.len(),
        transcript.snapshots.len(),
        transcript.final_score.map(|s| format!(", final score {s:.2}")).unwrap_or_default()
    );
    Ok(ExitCode::SUCCESS)
}

fn report_cmd(dir: PathBuf) -> Result<ExitCode, Failure> {
    let summary = regenerate_report(&dir).map_err(|e| e.to_string())?;
    println!("regenerated {} cell summaries in {}", summary.summaries.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, policy, tom, ib, seed, out, cassette, record, json } => simulate(
            config,
            policy,
            CognitiveConfig { tom_enabled: tom, ib_enabled: ib },
            seed,
            out,
            cassette,
            record,
            json,
        ),
        Command::Experiment { plan, out, workers } => experiment(plan, out, workers),
        Command::Verify { file, json, role, config } => verify_cmd(file, json, role, config),
        Command::Replay { transcript } => replay_cmd(transcript),
        Command::Report { dir } => report_cmd(dir),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
