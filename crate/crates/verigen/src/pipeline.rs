//! End-to-end orchestration: split → prompt → generate → correct → measure →
//! rank/select, persisted stage by stage through the run store so any prefix
//! can be resumed without repeating work (in particular, without re-invoking
//! the LLM backend for candidates that already exist).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llmclient::{
    complete, sample_candidates_with_transcripts, Backend, Candidate, DialogueTranscript,
    GenerationParams, HttpBackend, HttpBackendConfig, LlmError, Provenance, ReplayBackend,
};
use crate::metrics::{count_loc, quality};
use crate::ppa::{
    build_program_list, measure_ppa, ExtractorSet, Metric, MetricExtractor, PpaError, PpaRecord,
    PpaReport, ProgramList,
};
use crate::promptgen::{
    build_arch_sequence, build_rank_prompt, build_repair_prompt, PromptError, PromptSequence,
    TemplateSet, DEFAULT_DIAGNOSTIC_BUDGET,
};
use crate::runstore::{self, CandidateRecord, RunLock, RunManifest, Selection, Stage, StoreError};
use crate::search::{rank, ranking_table, select_best, SearchError, SearchTarget};
use crate::specdoc::{parse_spec, validate_spec, DesignSpec, ModuleSpec, SpecError, Violation};
use crate::toolchain::{ToolError, ToolchainConfig};
use crate::verify::{
    human_checkpoint, machine_correct, Reviewer, StdinReviewer, Verdict, VerifyError,
};

pub const DEFAULT_REPAIR_RETRIES: u32 = 2;

/// Which LLM endpoint a run talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendChoice {
    Replay {
        replay_dir: PathBuf,
    },
    Http {
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token.
        #[serde(default = "default_token_env")]
        token_env: String,
    },
}

fn default_token_env() -> String {
    "VERIGEN_API_TOKEN".to_string()
}

/// Extractor patterns/scales as configuration; `None` fields fall back to the
/// bundled open-source profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub power_pattern: Option<String>,
    pub power_scale: Option<f64>,
    pub area_pattern: Option<String>,
    pub area_scale: Option<f64>,
    pub latency_pattern: Option<String>,
    pub latency_scale: Option<f64>,
}

impl ExtractorConfig {
    pub fn build(&self) -> Result<ExtractorSet, PpaError> {
        let defaults = ExtractorSet::default_profile();
        let pick = |metric: Metric,
                    pattern: &Option<String>,
                    scale: &Option<f64>,
                    fallback: &MetricExtractor|
         -> Result<MetricExtractor, PpaError> {
            MetricExtractor::new(
                metric,
                pattern.as_deref().unwrap_or(fallback.pattern_str()),
                scale.unwrap_or(fallback.scale),
            )
        };
        Ok(ExtractorSet {
            power: pick(
                Metric::Power,
                &self.power_pattern,
                &self.power_scale,
                &defaults.power,
            )?,
            area: pick(
                Metric::Area,
                &self.area_pattern,
                &self.area_scale,
                &defaults.area,
            )?,
            latency: pick(
                Metric::Latency,
                &self.latency_pattern,
                &self.latency_scale,
                &defaults.latency,
            )?,
        })
    }
}

/// Everything one run needs. Built from a TOML config file plus command-line
/// overrides, or assembled directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec_path: PathBuf,
    pub run_dir: PathBuf,
    pub backend: BackendChoice,
    pub toolchain: ToolchainConfig,
    #[serde(default)]
    pub extractors: ExtractorConfig,
    pub target: TargetKind,
    /// Required (and only meaningful) when `target` is `direct` and no rank
    /// query should be sent: an explicit best-to-worst candidate order.
    #[serde(default)]
    pub direct_order: Option<Vec<String>>,
    #[serde(default = "default_samples")]
    pub samples_per_query: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub human_checkpoint: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_repair_retries")]
    pub repair_retries: u32,
    #[serde(default = "default_diagnostic_budget")]
    pub diagnostic_budget: usize,
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub run_id: Option<String>,
}

fn default_samples() -> u32 {
    crate::llmclient::DEFAULT_SAMPLES_PER_QUERY
}

fn default_temperature() -> f64 {
    1.0
}

fn default_parallelism() -> usize {
    1
}

fn default_repair_retries() -> u32 {
    DEFAULT_REPAIR_RETRIES
}

fn default_diagnostic_budget() -> usize {
    DEFAULT_DIAGNOSTIC_BUDGET
}

/// The search target as named in configuration; `direct` picks up its order
/// from `direct_order` or a rank query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Power,
    Area,
    Performance,
    Direct,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Power => "power",
            TargetKind::Area => "area",
            TargetKind::Performance => "performance",
            TargetKind::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "power" => Some(TargetKind::Power),
            "area" => Some(TargetKind::Area),
            "performance" => Some(TargetKind::Performance),
            "direct" => Some(TargetKind::Direct),
            _ => None,
        }
    }
}

/// On-disk shape of the config file.
#[derive(Debug, Clone, Deserialize)]
struct RunConfigFile {
    run: RunSection,
    backend: BackendChoice,
    toolchain: ToolchainConfig,
    #[serde(default)]
    extractors: ExtractorConfig,
}

#[derive(Debug, Clone, Deserialize)]
struct RunSection {
    spec: PathBuf,
    run_dir: PathBuf,
    target: String,
    #[serde(default)]
    direct_order: Option<Vec<String>>,
    #[serde(default = "default_samples")]
    samples_per_query: u32,
    #[serde(default = "default_temperature")]
    temperature: f64,
    #[serde(default)]
    human_checkpoint: bool,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default = "default_repair_retries")]
    repair_retries: u32,
    #[serde(default = "default_diagnostic_budget")]
    diagnostic_budget: usize,
    #[serde(default)]
    template_dir: Option<PathBuf>,
    #[serde(default)]
    run_id: Option<String>,
}

impl RunConfig {
    /// Parses a config file; relative paths are resolved against the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: RunConfigFile = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let target = TargetKind::parse(&file.run.target).ok_or_else(|| {
            PipelineError::Config(format!(
                "unknown target `{}` (expected power|area|performance|direct)",
                file.run.target
            ))
        })?;
        let backend = match file.backend {
            BackendChoice::Replay { replay_dir } => BackendChoice::Replay {
                replay_dir: resolve(replay_dir),
            },
            http => http,
        };
        Ok(RunConfig {
            spec_path: resolve(file.run.spec),
            run_dir: resolve(file.run.run_dir),
            backend,
            toolchain: file.toolchain,
            extractors: file.extractors,
            target,
            direct_order: file.run.direct_order,
            samples_per_query: file.run.samples_per_query,
            temperature: file.run.temperature,
            human_checkpoint: file.run.human_checkpoint,
            parallelism: file.run.parallelism.max(1),
            repair_retries: file.run.repair_retries,
            diagnostic_budget: file.run.diagnostic_budget,
            template_dir: file.run.template_dir.map(resolve),
            run_id: file.run.run_id,
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("spec has {} violation(s):\n{}", violations.len(), violations.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    SpecInvalid { violations: Vec<Violation> },
    #[error("run directory belongs to a different spec (manifest digest {on_disk}, current spec {current})")]
    SpecChanged { on_disk: String, current: String },
    #[error("no candidates were generated")]
    NoCandidates,
    #[error("no candidate survived correction and measurement")]
    AllCandidatesFailed,
    #[error("{stage} stage: {source}")]
    StageFailed {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Ppa(#[from] PpaError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Exit codes: 0 success, 2 spec errors, 3 no candidates, 4 every candidate
/// failed, 5 tool-environment faults, 1 anything else.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_NO_CANDIDATES: i32 = 3;
pub const EXIT_ALL_FAILED: i32 = 4;
pub const EXIT_TOOL_ENV: i32 = 5;

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::StageFailed { source, .. } => source.exit_code(),
            PipelineError::NoCandidates | PipelineError::Llm(LlmError::NoCandidates) => {
                EXIT_NO_CANDIDATES
            }
            PipelineError::AllCandidatesFailed => EXIT_ALL_FAILED,
            PipelineError::Spec(_) | PipelineError::SpecInvalid { .. } => EXIT_SPEC,
            PipelineError::Prompt(PromptError::Spec(_)) => EXIT_SPEC,
            PipelineError::Verify(VerifyError::Tool(e)) | PipelineError::Ppa(PpaError::Tool(e)) => {
                match e {
                    ToolError::NotFound { .. } | ToolError::Timeout { .. } => EXIT_TOOL_ENV,
                    _ => EXIT_ERROR,
                }
            }
            _ => EXIT_ERROR,
        }
    }
}

fn at(stage: &'static str) -> impl Fn(PipelineError) -> PipelineError {
    move |e| match e {
        e @ PipelineError::StageFailed { .. } => e,
        e => PipelineError::StageFailed {
            stage,
            source: Box::new(e),
        },
    }
}

/// Result of a completed pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub selected_id: String,
    pub selected_ppa: PpaReport,
    pub report_paths: Vec<PathBuf>,
    pub run_dir: PathBuf,
}

/// Per-candidate entry in the run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub id: String,
    pub verdict: Option<String>,
    pub rejected: bool,
    pub raw_loc: u64,
    pub correction_loc: u64,
    pub prompt_queries: u64,
    pub quality: i64,
    pub ppa: Option<PpaReport>,
}

/// The run report persisted as `reports/run_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub spec_digest: String,
    pub target: String,
    pub selection: Option<Selection>,
    pub prompt_queries: u64,
    pub candidates: Vec<CandidateSummary>,
}

/// An open run: parsed spec, templates, manifest, and the writer lock.
pub struct Pipeline {
    config: RunConfig,
    spec: DesignSpec,
    spec_digest: String,
    templates: TemplateSet,
    manifest: RunManifest,
    _lock: RunLock,
}

fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}

/// Deterministic run id from the spec digest and the generation-relevant
/// config, so identical runs produce identical manifests.
fn derive_run_id(spec_digest: &str, config: &RunConfig) -> String {
    let backend_tag = match &config.backend {
        BackendChoice::Replay { .. } => "replay".to_string(),
        BackendChoice::Http { model, .. } => format!("http:{model}"),
    };
    let seed = format!(
        "{spec_digest}\n{backend_tag}\n{}\n{}",
        config.samples_per_query,
        config.target.name()
    );
    format!("run-{}", &sha256_hex(&seed)[..12])
}

impl Pipeline {
    /// Parses the spec, validates it, loads templates, takes the run lock,
    /// and loads or initializes the manifest. A pre-existing manifest must
    /// belong to the same spec text.
    pub fn open(config: RunConfig) -> Result<Self, PipelineError> {
        config.toolchain.validate().map_err(VerifyError::Tool)?;
        let spec_text = fs::read_to_string(&config.spec_path).map_err(|e| {
            PipelineError::Config(format!(
                "cannot read spec {}: {e}",
                config.spec_path.display()
            ))
        })?;
        let spec_digest = sha256_hex(&spec_text);
        let spec = parse_spec(&spec_text).map_err(|e| at("split")(PipelineError::Spec(e)))?;
        let violations = validate_spec(&spec);
        if !violations.is_empty() {
            return Err(at("split")(PipelineError::SpecInvalid { violations }));
        }
        let templates = match &config.template_dir {
            Some(dir) => TemplateSet::from_dir(dir)?,
            None => TemplateSet::default(),
        };
        let lock = RunLock::acquire(&config.run_dir)?;
        let manifest = match runstore::load(&config.run_dir) {
            Ok(existing) => {
                if existing.spec_digest != spec_digest {
                    return Err(PipelineError::SpecChanged {
                        on_disk: existing.spec_digest,
                        current: spec_digest,
                    });
                }
                existing
            }
            Err(StoreError::NotFound) => {
                let run_id = config
                    .run_id
                    .clone()
                    .unwrap_or_else(|| derive_run_id(&spec_digest, &config));
                let mut manifest = RunManifest::new(run_id, &spec_digest);
                manifest.stamp(Stage::Split);
                runstore::record(&manifest, &config.run_dir)
                    .map_err(|e| at("split")(PipelineError::Store(e)))?;
                manifest
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Pipeline {
            config,
            spec,
            spec_digest,
            templates,
            manifest,
            _lock: lock,
        })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn sequence(&self) -> Result<PromptSequence, PipelineError> {
        Ok(build_arch_sequence(&self.spec, &self.templates)?)
    }

    /// The module machine feedback checks candidates against: the declared
    /// top module when the design composes one, otherwise the last module in
    /// document order. An undeclared top yields a placeholder without
    /// examples, which routes candidates to the human checkpoint.
    pub fn module_under_test(&self) -> ModuleSpec {
        if let Some(comp) = &self.spec.composition {
            if let Some(m) = self.spec.module(&comp.top_name) {
                return m.clone();
            }
            return ModuleSpec {
                name: comp.top_name.clone(),
                function_desc: String::new(),
                ports: Vec::new(),
                examples: Vec::new(),
                addition: None,
            };
        }
        self.spec
            .modules
            .last()
            .expect("validated spec has modules")
            .clone()
    }

    fn backend(&self) -> Result<Box<dyn Backend>, PipelineError> {
        match &self.config.backend {
            BackendChoice::Replay { replay_dir } => {
                if !replay_dir.is_dir() {
                    return Err(PipelineError::Config(format!(
                        "replay directory {} does not exist",
                        replay_dir.display()
                    )));
                }
                Ok(Box::new(ReplayBackend::new(replay_dir.clone())))
            }
            BackendChoice::Http {
                endpoint,
                model,
                token_env,
            } => {
                let token = std::env::var(token_env).ok();
                Ok(Box::new(HttpBackend::new(HttpBackendConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    token,
                })?))
            }
        }
    }

    fn params(&self, backend: &dyn Backend) -> Result<GenerationParams, PipelineError> {
        Ok(GenerationParams::new(
            self.config.samples_per_query,
            self.config.temperature,
            backend.id(),
        )?)
    }

    fn reports_dir(&self) -> PathBuf {
        self.config.run_dir.join("reports")
    }

    fn candidate_dir(&self, id: &str) -> PathBuf {
        self.config.run_dir.join("candidates").join(id)
    }

    fn transcript_path(&self, id: &str) -> PathBuf {
        self.candidate_dir(id).join("transcript.json")
    }

    fn record_manifest(&mut self) -> Result<(), PipelineError> {
        runstore::record(&self.manifest, &self.config.run_dir)?;
        Ok(())
    }

    /// Runs every stage up to and including `want`. Stages at or below the
    /// manifest's current stage are skipped, never re-executed.
    pub fn ensure_stage(&mut self, want: Stage) -> Result<(), PipelineError> {
        while self.manifest.stage < want {
            match self.manifest.stage {
                Stage::Split => self.stage_prompt().map_err(at("prompt"))?,
                Stage::Prompted => self.stage_generate().map_err(at("generate"))?,
                Stage::Generated => self.stage_correct().map_err(at("verify"))?,
                Stage::Corrected => self.stage_measure().map_err(at("measure"))?,
                Stage::Measured => self.stage_rank().map_err(at("rank"))?,
                Stage::Selected => break,
            }
        }
        Ok(())
    }

    fn stage_prompt(&mut self) -> Result<(), PipelineError> {
        let sequence = self.sequence()?;
        let reports = self.reports_dir();
        fs::create_dir_all(&reports)?;
        fs::write(
            reports.join("prompt_sequence.json"),
            serde_json::to_string_pretty(&sequence).expect("sequence serializes") + "\n",
        )?;
        fs::write(
            reports.join("prompts.txt"),
            format_prompt_sequence(&sequence),
        )?;
        self.manifest.stamp(Stage::Prompted);
        self.record_manifest()
    }

    fn stage_generate(&mut self) -> Result<(), PipelineError> {
        let sequence = self.sequence()?;
        let backend = self.backend()?;
        let params = self.params(backend.as_ref())?;
        let sampled = sample_candidates_with_transcripts(&sequence, &params, backend.as_ref())?;
        if sampled.is_empty() {
            return Err(PipelineError::NoCandidates);
        }
        let mut records = Vec::with_capacity(sampled.len());
        for item in &sampled {
            let rel = runstore::store_source(&self.config.run_dir, &item.candidate.source)?;
            fs::create_dir_all(self.candidate_dir(&item.candidate.id))?;
            fs::write(
                self.transcript_path(&item.candidate.id),
                item.transcript.to_json() + "\n",
            )?;
            records.push(CandidateRecord {
                id: item.candidate.id.clone(),
                path: rel,
                module_name: item.candidate.module_name.clone(),
                provenance: Some(item.candidate.provenance.clone()),
                verdict: None,
                rejected: false,
                ppa: None,
                correction_loc: 0,
            });
        }
        self.manifest.candidates = records;
        self.manifest.stamp(Stage::Generated);
        self.record_manifest()
    }

    /// Reconstructs a full candidate from its manifest record.
    fn load_candidate(&self, record: &CandidateRecord) -> Result<Candidate, PipelineError> {
        let source = runstore::load_source(&self.config.run_dir, &record.path)?;
        Ok(Candidate {
            id: record.id.clone(),
            source,
            module_name: record.module_name.clone(),
            provenance: record.provenance.clone().unwrap_or(Provenance {
                sequence_digest: String::new(),
                sample_index: 0,
                backend_id: String::new(),
            }),
            correction_loc: record.correction_loc,
        })
    }

    fn stage_correct(&mut self) -> Result<(), PipelineError> {
        let module = self.module_under_test();
        let toolchain = self.config.toolchain.clone();
        let ids: Vec<String> = self
            .manifest
            .candidates
            .iter()
            .filter(|r| !r.rejected)
            .map(|r| r.id.clone())
            .collect();

        // First machine pass, parallel up to the configured bound.
        let mut loaded = Vec::new();
        for id in &ids {
            let record = self.manifest.candidate(id).expect("known candidate");
            loaded.push((self.load_candidate(record)?, self.candidate_dir(id)));
        }
        let first_pass = parallel_map(loaded, self.config.parallelism, |(candidate, dir)| {
            let verdict = machine_correct(&candidate, &module, &toolchain, &dir);
            (candidate, verdict)
        });

        // Repair loop per failing candidate, then escalation and checkpoint.
        let mut needs_human: Vec<String> = Vec::new();
        for (mut candidate, verdict) in first_pass {
            let mut verdict = verdict?;
            let mut retries = 0;
            while matches!(
                verdict,
                Verdict::CompileError { .. } | Verdict::SimMismatch { .. }
            ) && retries < self.config.repair_retries
            {
                match self.repair_once(&mut candidate, &verdict)? {
                    true => {
                        verdict = machine_correct(
                            &candidate,
                            &module,
                            &toolchain,
                            &self.candidate_dir(&candidate.id),
                        )?;
                    }
                    false => break,
                }
                retries += 1;
            }
            if let Verdict::SimMismatch { detail, .. } = &verdict {
                verdict = Verdict::NeedsHuman {
                    detail: format!(
                        "simulation mismatch persisted after {retries} repair attempt(s): {detail}"
                    ),
                };
            }
            if matches!(verdict, Verdict::NeedsHuman { .. }) {
                needs_human.push(candidate.id.clone());
            }
            let rel = runstore::store_source(&self.config.run_dir, &candidate.source)?;
            let record = self
                .manifest
                .candidate_mut(&candidate.id)
                .expect("known candidate");
            record.path = rel;
            record.correction_loc = candidate.correction_loc;
            record.verdict = Some(verdict);
        }

        if self.config.human_checkpoint && !needs_human.is_empty() {
            let mut reviewer = StdinReviewer;
            self.review_candidates(&needs_human, &mut reviewer)?;
        }

        self.manifest.stamp(Stage::Corrected);
        self.record_manifest()
    }

    /// Sends one repair query on the candidate's own transcript and swaps in
    /// the replacement source. Returns false when the dialogue cannot
    /// continue (no fixture recorded, or the answer had no code), leaving the
    /// verdict as is.
    fn repair_once(
        &self,
        candidate: &mut Candidate,
        verdict: &Verdict,
    ) -> Result<bool, PipelineError> {
        let backend = self.backend()?;
        let params = self.params(backend.as_ref())?;
        let query = build_repair_prompt(verdict, &self.templates, self.config.diagnostic_budget)?;
        let transcript_path = self.transcript_path(&candidate.id);
        let mut transcript = DialogueTranscript::from_json(&fs::read_to_string(&transcript_path)?)?;
        let answer = match complete(&mut transcript, query, &params, backend.as_ref()) {
            Ok(answer) => answer,
            Err(LlmError::MissingFixture { digest, .. }) => {
                log::warn!(
                    "no repair fixture recorded for {} (digest {digest}); keeping verdict",
                    candidate.id
                );
                return Ok(false);
            }
            Err(e) => return Err(e.into()),
        };
        fs::write(&transcript_path, transcript.to_json() + "\n")?;
        let blocks = match crate::llmclient::extract_code(&answer) {
            Ok(blocks) => blocks,
            Err(LlmError::EmptyExtraction) => {
                log::warn!(
                    "repair answer for {} had no code; keeping verdict",
                    candidate.id
                );
                return Ok(false);
            }
            Err(e) => return Err(e.into()),
        };
        let replacement = blocks.join("\n\n");
        candidate.correction_loc += crate::metrics::changed_lines(&candidate.source, &replacement);
        candidate.source = replacement;
        Ok(true)
    }

    /// Interactive review over the named candidates; used by the correct
    /// stage (when enabled) and the standalone review command.
    pub fn review_candidates(
        &mut self,
        ids: &[String],
        reviewer: &mut dyn Reviewer,
    ) -> Result<(), PipelineError> {
        for id in ids {
            let record = self.manifest.candidate(id).expect("known candidate");
            if record.rejected {
                continue;
            }
            let candidate = self.load_candidate(record)?;
            match human_checkpoint(&candidate, &self.config.run_dir, reviewer) {
                Ok(updated) => {
                    let rel = runstore::store_source(&self.config.run_dir, &updated.source)?;
                    let record = self.manifest.candidate_mut(id).expect("known candidate");
                    record.path = rel;
                    record.correction_loc = updated.correction_loc;
                }
                Err(VerifyError::CandidateRejected(_)) => {
                    let record = self.manifest.candidate_mut(id).expect("known candidate");
                    record.rejected = true;
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.record_manifest()
    }

    /// True when a corrected candidate may proceed to measurement.
    fn measurable(record: &CandidateRecord) -> bool {
        !record.rejected
            && matches!(
                record.verdict,
                Some(Verdict::Pass) | Some(Verdict::NeedsHuman { .. })
            )
    }

    fn stage_measure(&mut self) -> Result<(), PipelineError> {
        let extractors = self.config.extractors.build()?;
        let toolchain = self.config.toolchain.clone();
        let ids: Vec<String> = self
            .manifest
            .candidates
            .iter()
            .filter(|r| Self::measurable(r))
            .map(|r| r.id.clone())
            .collect();
        let mut loaded = Vec::new();
        for id in &ids {
            let record = self.manifest.candidate(id).expect("known candidate");
            loaded.push((self.load_candidate(record)?, self.candidate_dir(id)));
        }
        let results = parallel_map(loaded, self.config.parallelism, |(candidate, dir)| {
            let report = measure_ppa(&candidate, &toolchain, &extractors, &dir);
            (candidate.id.clone(), report)
        });
        let reports_dir = self.reports_dir();
        fs::create_dir_all(&reports_dir)?;
        for (id, result) in results {
            match result {
                Ok(report) => {
                    let record_json =
                        serde_json::to_string(&PpaRecord::new(&id, &report)).expect("ppa record");
                    fs::write(
                        reports_dir.join(format!("{id}.ppa.json")),
                        record_json + "\n",
                    )?;
                    self.manifest
                        .candidate_mut(&id)
                        .expect("known candidate")
                        .ppa = Some(report);
                }
                Err(e @ (PpaError::IncompleteReport(_) | PpaError::SynthFailed { .. })) => {
                    log::warn!("candidate {id} excluded from program list: {e}");
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.manifest.stamp(Stage::Measured);
        self.record_manifest()
    }

    /// Builds the program list from measured records.
    pub fn program_list(&self) -> Result<ProgramList, PipelineError> {
        let mut measured = Vec::new();
        for record in &self.manifest.candidates {
            if record.rejected {
                continue;
            }
            if let Some(report) = &record.ppa {
                measured.push((self.load_candidate(record)?, report.clone()));
            }
        }
        Ok(build_program_list(measured)?)
    }

    /// Resolves the configured target into a concrete [`SearchTarget`],
    /// sending a rank query when `direct` has no explicit order.
    fn resolve_target(&self, list: &ProgramList) -> Result<SearchTarget, PipelineError> {
        match self.config.target {
            TargetKind::Power => Ok(SearchTarget::Power),
            TargetKind::Area => Ok(SearchTarget::Area),
            TargetKind::Performance => Ok(SearchTarget::Performance),
            TargetKind::Direct => {
                let order = match &self.config.direct_order {
                    Some(order) => order.clone(),
                    None => {
                        let candidates: Vec<Candidate> =
                            list.entries().iter().map(|(c, _)| c.clone()).collect();
                        let query = build_rank_prompt(&candidates, &self.templates)?;
                        let backend = self.backend()?;
                        let params = self.params(backend.as_ref())?;
                        let mut transcript = DialogueTranscript::new();
                        let answer = complete(&mut transcript, query, &params, backend.as_ref())?;
                        parse_rank_answer(&answer, &list.ids()).ok_or_else(|| {
                            PipelineError::Search(SearchError::InvalidDirectOrder(format!(
                                "rank answer is not a permutation of the program list: {answer}"
                            )))
                        })?
                    }
                };
                Ok(SearchTarget::Direct { order })
            }
        }
    }

    fn stage_rank(&mut self) -> Result<(), PipelineError> {
        let list = self.program_list()?;
        if list.is_empty() {
            return Err(PipelineError::AllCandidatesFailed);
        }
        let target = self.resolve_target(&list)?;
        let ranking = rank(&list, &target)?;
        let direct_order = match &target {
            SearchTarget::Direct { order } => Some(order.clone()),
            _ => None,
        };
        let table = ranking_table(&list, direct_order.as_deref())?;
        let (chosen, _) = select_best(&list, &target)?;

        let reports_dir = self.reports_dir();
        fs::create_dir_all(&reports_dir)?;
        let ranking_json = serde_json::json!({
            "target": target.kind_name(),
            "ordered": ranking.ordered,
            "table": table,
        });
        fs::write(
            reports_dir.join("ranking.json"),
            serde_json::to_string_pretty(&ranking_json).expect("ranking serializes") + "\n",
        )?;
        fs::write(reports_dir.join("ranking.txt"), table.to_text())?;

        self.manifest.selection = Some(Selection {
            target: target.kind_name().to_string(),
            chosen,
        });
        self.manifest.stamp(Stage::Selected);
        let report = self.run_report()?;
        fs::write(
            reports_dir.join("run_report.json"),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        )?;
        self.record_manifest()
    }

    /// The metrics summary over every candidate: generated lines, corrected
    /// lines, prompt-query count, and the quality score.
    pub fn run_report(&self) -> Result<RunReport, PipelineError> {
        let prompt_queries = self.sequence()?.len() as u64;
        let mut candidates = Vec::new();
        for record in &self.manifest.candidates {
            let source = runstore::load_source(&self.config.run_dir, &record.path)?;
            let raw = count_loc(&source).code;
            candidates.push(CandidateSummary {
                id: record.id.clone(),
                verdict: record.verdict.as_ref().map(|v| v.kind_name().to_string()),
                rejected: record.rejected,
                raw_loc: raw,
                correction_loc: record.correction_loc,
                prompt_queries,
                quality: quality(raw, record.correction_loc, prompt_queries),
                ppa: record.ppa.clone(),
            });
        }
        Ok(RunReport {
            run_id: self.manifest.run_id.clone(),
            spec_digest: self.spec_digest.clone(),
            target: self.config.target.name().to_string(),
            selection: self.manifest.selection.clone(),
            prompt_queries,
            candidates,
        })
    }

    /// Runs any remaining stages through selection and returns the outcome.
    pub fn run_to_selection(&mut self) -> Result<PipelineOutcome, PipelineError> {
        self.ensure_stage(Stage::Selected)?;
        let selection = self
            .manifest
            .selection
            .clone()
            .ok_or(PipelineError::AllCandidatesFailed)?;
        let ppa = self
            .manifest
            .candidate(&selection.chosen)
            .and_then(|r| r.ppa.clone())
            .ok_or(PipelineError::AllCandidatesFailed)?;
        let reports = self.reports_dir();
        Ok(PipelineOutcome {
            selected_id: selection.chosen,
            selected_ppa: ppa,
            report_paths: vec![
                reports.join("ranking.json"),
                reports.join("ranking.txt"),
                reports.join("run_report.json"),
            ],
            run_dir: self.config.run_dir.clone(),
        })
    }
}

/// Runs the whole pipeline for `config`: split → prompt → generate → correct
/// → measure → rank/select, resuming from whatever stage the run directory
/// already holds.
pub fn run_pipeline(config: RunConfig) -> Result<PipelineOutcome, PipelineError> {
    Pipeline::open(config)?.run_to_selection()
}

/// Builds the prompt sequence for a config without touching the run
/// directory or any backend — the `--dry-run` path.
pub fn dry_run_sequence(config: &RunConfig) -> Result<PromptSequence, PipelineError> {
    let spec_text = fs::read_to_string(&config.spec_path).map_err(|e| {
        PipelineError::Config(format!(
            "cannot read spec {}: {e}",
            config.spec_path.display()
        ))
    })?;
    let spec = parse_spec(&spec_text)?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        return Err(PipelineError::SpecInvalid { violations });
    }
    let templates = match &config.template_dir {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::default(),
    };
    Ok(build_arch_sequence(&spec, &templates)?)
}

/// Human-readable rendering of a prompt sequence (the `--dry-run` view).
pub fn format_prompt_sequence(sequence: &PromptSequence) -> String {
    let mut out = String::new();
    for (i, q) in sequence.queries.iter().enumerate() {
        let subject = q
            .subject
            .as_deref()
            .map(|s| format!(" [{s}]"))
            .unwrap_or_default();
        out.push_str(&format!(
            "--- query {} ({}){} ---\n",
            i + 1,
            q.kind,
            subject
        ));
        out.push_str(&q.text);
        out.push_str("\n\n");
    }
    out
}

static LABEL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bP\d+\b").expect("label regex"));

/// Extracts a candidate-label permutation from a rank answer: labels in
/// first-mention order, which must cover the program list exactly.
pub fn parse_rank_answer(answer: &str, ids: &[&str]) -> Option<Vec<String>> {
    let mut seen = HashSet::new();
    let mut order = Vec::new();
    for m in LABEL_RE.find_iter(answer) {
        let label = m.as_str().to_string();
        if seen.insert(label.clone()) {
            order.push(label);
        }
    }
    if order.len() != ids.len() {
        return None;
    }
    let want: HashSet<&str> = ids.iter().copied().collect();
    if order.iter().all(|l| want.contains(l.as_str())) {
        Some(order)
    } else {
        None
    }
}

/// Applies `f` to every item, at most `bound` at a time, preserving order.
fn parallel_map<T, R, F>(items: Vec<T>, bound: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let bound = bound.max(1);
    if bound == 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let mut results: Vec<Option<R>> = Vec::new();
    results.resize_with(items.len(), || None);
    let mut remaining: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    while !remaining.is_empty() {
        let chunk: Vec<(usize, T)> = remaining.drain(..bound.min(remaining.len())).collect();
        let chunk_results = std::thread::scope(|scope| {
            let f = &f;
            let handles: Vec<_> = chunk
                .into_iter()
                .map(|(idx, item)| scope.spawn(move || (idx, f(item))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker thread"))
                .collect::<Vec<_>>()
        });
        for (idx, r) in chunk_results {
            results[idx] = Some(r);
        }
    }
    results
        .into_iter()
        .map(|r| r.expect("filled slot"))
        .collect()
}
