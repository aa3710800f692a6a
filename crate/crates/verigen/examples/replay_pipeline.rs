//! The whole pipeline, end to end and fully deterministic: record the
//! bundled five-answer dialogue into a temporary replay store, then run
//! split → prompt → generate → correct → measure → rank against the mock
//! toolchain and print the selection for each target.
//!
//! ```bash
//! cargo run -p verigen --example replay_pipeline
//! ```

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use verigen::llmclient::{
    sample_candidates, Backend, DialogueTranscript, GenerationParams, LlmError, RecordingBackend,
    ReplayRecorder,
};
use verigen::pipeline::{run_pipeline, BackendChoice, RunConfig, TargetKind};
use verigen::promptgen::{build_arch_sequence, build_rank_prompt, Query, QueryKind, TemplateSet};
use verigen::specdoc::parse_spec;
use verigen::toolchain::ToolchainConfig;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/button_count")
}

fn answer(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("answers").join(name)).expect("bundled answer")
}

/// Stands in for a live LLM while recording: setup queries get the canned
/// acknowledgement, each body query gets the next bundled implementation.
struct BundledSession {
    bodies: Vec<String>,
    calls: AtomicUsize,
}

impl Backend for BundledSession {
    fn id(&self) -> &str {
        "bundled"
    }

    fn complete_raw(
        &self,
        _transcript: &DialogueTranscript,
        query: &Query,
        _params: &GenerationParams,
    ) -> Result<String, LlmError> {
        match query.kind {
            QueryKind::Setup => Ok(answer("setup.txt")),
            _ => {
                let n = self.calls.fetch_add(1, Ordering::SeqCst);
                Ok(self.bodies[n % self.bodies.len()].clone())
            }
        }
    }
}

fn record_fixtures(replay_root: &Path) -> anyhow::Result<()> {
    let spec = parse_spec(&std::fs::read_to_string(fixtures().join("spec.toml"))?)?;
    let templates = TemplateSet::default();
    let sequence = build_arch_sequence(&spec, &templates)?;
    let session = BundledSession {
        bodies: (0..5).map(|i| answer(&format!("body_{i}.txt"))).collect(),
        calls: AtomicUsize::new(0),
    };
    let recording = RecordingBackend::new(session, replay_root);
    let params = GenerationParams::new(5, 1.0, "replay")?;
    let candidates = sample_candidates(&sequence, &params, &recording)?;
    println!(
        "recorded a {}-candidate session into the replay store",
        candidates.len()
    );

    // Also record the model-side ranking answer so `target = direct` works.
    let rank_query = build_rank_prompt(&candidates, &templates)?;
    ReplayRecorder::new(replay_root).record(
        &DialogueTranscript::new(),
        &rank_query,
        &answer("rank.txt"),
    )?;
    Ok(())
}

fn mock_toolchain() -> ToolchainConfig {
    let bin = fixtures().join("bin");
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

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let replay = tmp.path().join("replay");
    std::fs::create_dir_all(&replay)?;
    record_fixtures(&replay)?;

    for target in [
        TargetKind::Power,
        TargetKind::Area,
        TargetKind::Performance,
        TargetKind::Direct,
    ] {
        let run_dir = tmp.path().join(format!("run_{}", target.name()));
        let config = RunConfig {
            spec_path: fixtures().join("spec.toml"),
            run_dir: run_dir.clone(),
            backend: BackendChoice::Replay {
                replay_dir: replay.clone(),
            },
            toolchain: mock_toolchain(),
            extractors: Default::default(),
            target,
            direct_order: None,
            samples_per_query: 5,
            temperature: 1.0,
            human_checkpoint: false,
            parallelism: 2,
            repair_retries: 2,
            diagnostic_budget: 2000,
            template_dir: None,
            run_id: None,
        };
        let outcome = run_pipeline(config)?;
        println!(
            "target {:<12} -> {} (power={} mW, area={} um^2, latency={})",
            target.name(),
            outcome.selected_id,
            outcome.selected_ppa.power_mw,
            outcome.selected_ppa.area_um2,
            outcome.selected_ppa.latency_cycles
        );
    }

    let ranking = std::fs::read_to_string(tmp.path().join("run_direct/reports/ranking.txt"))?;
    println!("\nranking table of the direct-target run:\n{ranking}");
    Ok(())
}
