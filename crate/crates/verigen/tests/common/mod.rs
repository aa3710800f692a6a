//! Shared fixture plumbing for the integration suites: replay-fixture
//! recording for the bundled button-count session and run-config assembly
//! against the mock toolchain scripts.
//!
//! Compiled once per test binary; not every binary uses every helper.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use verigen::llmclient::{
    sample_candidates, Backend, DialogueTranscript, GenerationParams, LlmError, RecordingBackend,
    ReplayRecorder,
};
use verigen::pipeline::{BackendChoice, RunConfig, TargetKind};
use verigen::promptgen::{build_arch_sequence, build_rank_prompt, Query, TemplateSet};
use verigen::specdoc::{parse_spec, DesignSpec};
use verigen::toolchain::ToolchainConfig;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn button_spec_path() -> PathBuf {
    fixtures_dir().join("button_count/spec.toml")
}

pub fn load_button_spec() -> DesignSpec {
    let text = fs::read_to_string(button_spec_path()).expect("bundled spec");
    parse_spec(&text).expect("bundled spec parses")
}

fn answer(name: &str) -> String {
    fs::read_to_string(fixtures_dir().join("button_count/answers").join(name))
        .unwrap_or_else(|e| panic!("bundled answer {name}: {e}"))
}

/// Replays the bundled five-trial dialogue through a scripted backend and a
/// recording wrapper, leaving digest-keyed replay fixtures under `root`.
struct ScriptedSession {
    setup: String,
    bodies: Vec<String>,
    calls: AtomicUsize,
}

impl Backend for ScriptedSession {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete_raw(
        &self,
        _transcript: &DialogueTranscript,
        query: &Query,
        _params: &GenerationParams,
    ) -> Result<String, LlmError> {
        match query.kind {
            verigen::promptgen::QueryKind::Setup => Ok(self.setup.clone()),
            _ => {
                let n = self.calls.fetch_add(1, Ordering::SeqCst);
                Ok(self.bodies[n % self.bodies.len()].clone())
            }
        }
    }
}

/// Writes the replay fixtures the button-count pipeline run consumes,
/// including the rank answer for direct-target runs. Returns the replay root.
pub fn record_button_fixtures(replay_root: &Path) {
    fs::create_dir_all(replay_root).expect("replay root");
    let spec = load_button_spec();
    let templates = TemplateSet::default();
    let sequence = build_arch_sequence(&spec, &templates).expect("sequence builds");

    let scripted = ScriptedSession {
        setup: answer("setup.txt"),
        bodies: (0..5).map(|i| answer(&format!("body_{i}.txt"))).collect(),
        calls: AtomicUsize::new(0),
    };
    let recording = RecordingBackend::new(scripted, replay_root);
    let params = GenerationParams::new(5, 1.0, "replay").expect("params");
    let candidates = sample_candidates(&sequence, &params, &recording).expect("recording session");
    assert_eq!(candidates.len(), 5, "five distinct bundled answers");

    // Rank answer for direct-target runs: keyed by a fresh transcript plus
    // the rank query over the recorded candidates.
    let rank_query = build_rank_prompt(&candidates, &templates).expect("rank prompt");
    ReplayRecorder::new(replay_root)
        .record(&DialogueTranscript::new(), &rank_query, &answer("rank.txt"))
        .expect("rank fixture");
}

/// Toolchain config pointing at the bundled mock scripts.
pub fn mock_toolchain() -> ToolchainConfig {
    let bin = fixtures_dir().join("button_count/bin");
    ToolchainConfig {
        compile_cmd: format!(
            "sh {} {{input}} {{testbench}} {{outdir}}",
            bin.join("compile.sh").display()
        ),
        simulate_cmd: format!("sh {} {{input}}", bin.join("simulate.sh").display()),
        synth_cmd: format!("sh {} {{input}} {{outdir}}", bin.join("synth.sh").display()),
        timeout_secs: 30,
    }
}

pub fn button_config(run_dir: &Path, replay_dir: &Path, target: TargetKind) -> RunConfig {
    RunConfig {
        spec_path: button_spec_path(),
        run_dir: run_dir.to_path_buf(),
        backend: BackendChoice::Replay {
            replay_dir: replay_dir.to_path_buf(),
        },
        toolchain: mock_toolchain(),
        extractors: Default::default(),
        target,
        direct_order: None,
        samples_per_query: 5,
        temperature: 1.0,
        human_checkpoint: false,
        parallelism: 1,
        repair_retries: 2,
        diagnostic_budget: 2000,
        template_dir: None,
        run_id: None,
    }
}

/// Manifest bytes with the timestamps zeroed out, for byte-level comparison.
pub fn normalized_manifest(run_dir: &Path) -> String {
    let body = fs::read_to_string(run_dir.join("manifest.json")).expect("manifest");
    let mut value: serde_json::Value = serde_json::from_str(&body).expect("manifest json");
    value["timestamps"] = serde_json::json!({});
    serde_json::to_string_pretty(&value).expect("normalized manifest")
}
