//! Configuration × policy matrix runner with bootstrapped medians.

mod bootstrap;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bootstrap::{bootstrap_median, median_sorted, BootstrapError, MedianEstimate};
pub use output::{emit_outputs, load_results, regenerate_report, render_chart, SummaryFile};

use crate::config::{load_file, ConfigError};
use crate::harness::{run_trial, CognitiveConfig, PromptTemplates, TrialSetup, Transcript};
use crate::policy::{Cassette, CassetteHandle, CassettePolicy, EndpointConfig, HeuristicPolicy, HttpPolicy, Policy};
use crate::sim::{ResourceKind, SimParams, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Heuristic {
        name: String,
        /// Write one cassette per trial under this directory.
        #[serde(default)]
        record_dir: Option<PathBuf>,
    },
    Llm {
        name: String,
        endpoint: EndpointConfig,
        #[serde(default)]
        record_dir: Option<PathBuf>,
    },
    /// Replays `<dir>/<cell id>/trial_<index>.json`.
    Cassette { name: String, dir: PathBuf },
}

impl PolicySpec {
    pub fn name(&self) -> &str {
        match self {
            PolicySpec::Heuristic { name, .. } | PolicySpec::Llm { name, .. } | PolicySpec::Cassette { name, .. } => name,
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            PolicySpec::Heuristic { record_dir, .. } | PolicySpec::Llm { record_dir, .. } => record_dir.iter_mut().collect(),
            PolicySpec::Cassette { dir, .. } => vec![dir],
        }
    }
}

fn default_trials() -> usize {
    10
}
fn default_resamples() -> usize {
    10_000
}
fn default_confidence() -> f64 {
    0.95
}
fn default_configs() -> Vec<String> {
    CognitiveConfig::ALL.iter().map(|c| c.label().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub master_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Configuration labels: base, tom, ib, tom_ib.
    #[serde(default = "default_configs")]
    pub configs: Vec<String>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub prompt_dir: Option<PathBuf>,
    /// Worker cap for parallel trials; defaults to the number of CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub policy_index: usize,
    pub config: CognitiveConfig,
}

impl ExperimentPlan {
    /// Loads a TOML or JSON plan; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut plan: ExperimentPlan = load_file(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in plan.policies.iter_mut().flat_map(PolicySpec::paths_mut).chain(plan.prompt_dir.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if self.resamples < 100 {
            return invalid("resamples must be at least 100".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return invalid(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        if self.policies.is_empty() {
            return invalid("at least one policy is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for p in &self.policies {
            let ok = !p.name().is_empty() && p.name().chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
            if !ok {
                return invalid(format!("policy name '{}' must be non-empty and use [A-Za-z0-9-_.]", p.name()));
            }
            if !names.insert(p.name()) {
                return invalid(format!("duplicate policy name '{}'", p.name()));
            }
        }
        self.parsed_configs()?;
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    fn parsed_configs(&self) -> Result<Vec<CognitiveConfig>, ConfigError> {
        let configs = self
            .configs
            .iter()
            .map(|c| c.parse::<CognitiveConfig>().map_err(ConfigError::Invalid))
            .collect::<Result<Vec<_>, _>>()?;
        if configs.is_empty() {
            return Err(ConfigError::Invalid("at least one configuration is required".into()));
        }
        Ok(configs)
    }

    /// Cells in policy-major order.
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        let configs = self.parsed_configs()?;
        Ok(self
            .policies
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                configs.iter().map(move |c| Cell { id: format!("{}-{}", p.name(), c.label()), policy_index: i, config: *c })
            })
            .collect())
    }

    pub fn templates(&self) -> Result<PromptTemplates, ConfigError> {
        match &self.prompt_dir {
            None => Ok(PromptTemplates::default()),
            Some(dir) => PromptTemplates::from_dir(dir).map_err(|source| ConfigError::Io { path: dir.clone(), source }),
        }
    }
}

/// First eight bytes (little endian) of SHA-256 over the master seed, the
/// cell id and the index.
pub fn derive_seed(master_seed: u64, cell_id: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((cell_id.len() as u64).to_le_bytes());
    h.update(cell_id.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of the bootstrap for one cell, disjoint from the trial seeds.
pub fn bootstrap_seed(master_seed: u64, cell_id: &str) -> u64 {
    derive_seed(master_seed, &format!("bootstrap/{cell_id}"), 0)
}

pub fn cassette_path(dir: &Path, cell_id: &str, trial: usize) -> PathBuf {
    dir.join(cell_id).join(format!("trial_{trial:02}.json"))
}

fn transcript_rel_path(cell_id: &str, trial: usize) -> String {
    format!("transcripts/{cell_id}/trial_{trial:02}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub cell_id: String,
    pub config: String,
    pub policy: String,
    pub trial: usize,
    pub seed: u64,
    pub final_score: f64,
    pub verified_turn_fraction: f64,
    pub invalid_actions: usize,
    /// Relative to the output directory.
    pub transcript_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub cell_id: String,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
    pub transcript_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub cell_id: String,
    pub config: String,
    pub policy: String,
    pub n: usize,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    /// Trials excluded because they failed.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub summaries: Vec<BootstrapSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn write_transcript(out_dir: &Path, rel: &str, t: &Transcript) -> Result<(), ExperimentError> {
    let path = out_dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(&path, t.to_json()).map_err(io_err(&path))
}

enum TrialOutput {
    Done(TrialResult),
    Failed(TrialFailure),
}

struct Job<'a> {
    cell: &'a Cell,
    spec: &'a PolicySpec,
    trial: usize,
    seed: u64,
}

fn build_policies(spec: &PolicySpec, cell_id: &str, trial: usize) -> Result<(BTreeMap<ResourceKind, Box<dyn Policy>>, Option<(CassetteHandle, PathBuf)>), String> {
    let inner = |spec: &PolicySpec| -> Box<dyn Policy> {
        match spec {
            PolicySpec::Llm { endpoint, .. } => Box::new(HttpPolicy::new(endpoint.clone())),
            _ => Box::new(HeuristicPolicy),
        }
    };
    match spec {
        PolicySpec::Heuristic { record_dir, .. } | PolicySpec::Llm { record_dir, .. } => match record_dir {
            None => Ok((ResourceKind::ALL.into_iter().map(|r| (r, inner(spec))).collect(), None)),
            Some(dir) => {
                let handle = CassetteHandle::recording();
                let policies = ResourceKind::ALL
                    .into_iter()
                    .map(|r| (r, Box::new(CassettePolicy::record(inner(spec), handle.clone())) as Box<dyn Policy>))
                    .collect();
                Ok((policies, Some((handle, cassette_path(dir, cell_id, trial)))))
            }
        },
        PolicySpec::Cassette { name, dir } => {
            let path = cassette_path(dir, cell_id, trial);
            let cassette = Cassette::load(&path).map_err(|e| format!("cannot load cassette {}: {e}", path.display()))?;
            let handle = CassetteHandle::replaying(cassette);
            let policies = ResourceKind::ALL
                .into_iter()
                .map(|r| (r, Box::new(CassettePolicy::replay(handle.clone(), name.clone())) as Box<dyn Policy>))
                .collect();
            Ok((policies, None))
        }
    }
}

fn run_job(job: &Job<'_>, plan: &ExperimentPlan, templates: &PromptTemplates, out_dir: &Path) -> Result<TrialOutput, ExperimentError> {
    let cell = job.cell;
    let rel = transcript_rel_path(&cell.id, job.trial);
    let fail = |error: String, transcript_path: Option<String>| {
        TrialOutput::Failed(TrialFailure { cell_id: cell.id.clone(), trial: job.trial, seed: job.seed, error, transcript_path })
    };
    let (mut policies, recorder) = match build_policies(job.spec, &cell.id, job.trial) {
        Ok(p) => p,
        Err(e) => return Ok(fail(e, None)),
    };
    let setup = TrialSetup {
        params: plan.sim.clone(),
        topology: plan.topology.clone(),
        config: cell.config,
        seed: job.seed,
        templates: templates.clone(),
    };
    match run_trial(&setup, &mut policies) {
        Ok(t) => {
            write_transcript(out_dir, &rel, &t)?;
            if let Some((handle, path)) = recorder {
                handle.cassette().save(&path).map_err(io_err(&path))?;
            }
            Ok(TrialOutput::Done(TrialResult {
                cell_id: cell.id.clone(),
                config: cell.config.label().to_string(),
                policy: job.spec.name().to_string(),
                trial: job.trial,
                seed: job.seed,
                final_score: t.final_score.expect("completed trial has a score"),
                verified_turn_fraction: t.verified_turn_fraction(),
                invalid_actions: t.invalid_actions(),
                transcript_path: rel,
            }))
        }
        Err(abort) => {
            let path = match abort.transcript() {
                Some(t) => {
                    write_transcript(out_dir, &rel, t)?;
                    Some(rel)
                }
                None => None,
            };
            Ok(fail(abort.to_string(), path))
        }
    }
}

pub fn summarize(plan: &ExperimentPlan, cells: &[Cell], results: &[TrialResult], failures: &[TrialFailure]) -> Result<(Vec<BootstrapSummary>, Vec<String>), ExperimentError> {
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for cell in cells {
        let scores: Vec<f64> = results.iter().filter(|r| r.cell_id == cell.id).map(|r| r.final_score).collect();
        let failed = failures.iter().filter(|f| f.cell_id == cell.id).count();
        if failed > 0 {
            warnings.push(format!("{}: {failed} of {} trials failed and were excluded", cell.id, plan.trials));
        }
        if scores.is_empty() {
            warnings.push(format!("{}: no completed trials, cell has no summary", cell.id));
            continue;
        }
        let est = bootstrap_median(&scores, plan.resamples, plan.confidence, bootstrap_seed(plan.master_seed, &cell.id))?;
        summaries.push(BootstrapSummary {
            cell_id: cell.id.clone(),
            config: cell.config.label().to_string(),
            policy: plan.policies[cell.policy_index].name().to_string(),
            n: est.n,
            median: est.median,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            resamples: est.resamples,
            failed,
        });
    }
    Ok((summaries, warnings))
}

/// Runs every trial of every cell, writing transcripts under `out_dir`.
/// `workers` overrides the plan's worker cap.
pub fn run_plan(plan: &ExperimentPlan, out_dir: &Path, workers: Option<usize>) -> Result<ExperimentOutcome, ExperimentError> {
    plan.validate()?;
    let cells = plan.cells()?;
    let templates = plan.templates()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let jobs: Vec<Job<'_>> = cells
        .iter()
        .flat_map(|cell| {
            (0..plan.trials).map(move |trial| Job {
                cell,
                spec: &plan.policies[cell.policy_index],
                trial,
                seed: derive_seed(plan.master_seed, &cell.id, trial as u64),
            })
        })
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.or(plan.workers) {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let outputs: Vec<Result<TrialOutput, ExperimentError>> =
        pool.install(|| jobs.par_iter().map(|job| run_job(job, plan, &templates, out_dir)).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for out in outputs {
        match out? {
            TrialOutput::Done(r) => results.push(r),
            TrialOutput::Failed(f) => failures.push(f),
        }
    }
    let (summaries, warnings) = summarize(plan, &cells, &results, &failures)?;
    Ok(ExperimentOutcome { results, failures, summaries, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn heuristic_plan(trials: usize) -> ExperimentPlan {
        ExperimentPlan {
            master_seed: 11,
            trials,
            resamples: 500,
            confidence: 0.95,
            configs: default_configs(),
            policies: vec![PolicySpec::Heuristic { name: "heuristic".into(), record_dir: None }],
            sim: SimParams::default(),
            topology: Topology::default(),
            prompt_dir: None,
            workers: Some(2),
        }
    }

    #[test]
    fn seeds_differ_by_cell_and_trial() {
        let a = derive_seed(1, "x-base", 0);
        assert_ne!(a, derive_seed(1, "x-base", 1));
        assert_ne!(a, derive_seed(1, "x-tom", 0));
        assert_ne!(a, derive_seed(2, "x-base", 0));
        assert_eq!(a, derive_seed(1, "x-base", 0));
    }

    #[test]
    fn cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_plan(&heuristic_plan(3), dir.path(), None).unwrap();
        assert_eq!(out.results.len(), 12);
        assert_eq!(out.summaries.len(), 4);
        assert!(out.failures.is_empty() && out.warnings.is_empty());
        for s in &out.summaries {
            assert!(s.ci_low <= s.median && s.median <= s.ci_high);
            assert_eq!(s.n, 3);
        }
        assert!(dir.path().join("transcripts/heuristic-tom_ib/trial_02.json").exists());
    }

    #[test]
    fn missing_cassette_counts_as_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = heuristic_plan(2);
        plan.configs = vec!["base".into()];
        plan.policies = vec![PolicySpec::Cassette { name: "gone".into(), dir: dir.path().join("nowhere") }];
        let out = run_plan(&plan, dir.path(), Some(1)).unwrap();
        assert_eq!(out.failures.len(), 2);
        assert!(out.summaries.is_empty());
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn plan_validation() {
        let mut p = heuristic_plan(0);
        assert!(p.validate().is_err());
        p.trials = 1;
        p.resamples = 10;
        assert!(p.validate().is_err());
        p.resamples = 100;
        p.configs = vec!["everything".into()];
        assert!(p.validate().is_err());
        p.configs = vec!["ToM + IB".into()];
        assert!(p.validate().is_ok());
    }
}
