//! Thin command-line front end over the pipeline library. Each subcommand
//! runs one stage (or the whole flow) against a run directory; stages
//! compose through the persisted manifest, not through shell pipes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use verigen::pipeline::{
    format_prompt_sequence, Pipeline, PipelineError, RunConfig, TargetKind, EXIT_ERROR,
};
use verigen::runstore::{self, Stage};
use verigen::specdoc::split_spec;
use verigen::verify::{StdinReviewer, Verdict};

#[derive(Parser)]
#[command(
    name = "verigen",
    about = "Compile a structured chip spec into verified, PPA-ranked Verilog via an LLM dialogue",
    version
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Specification document (TOML).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    /// Run directory holding the manifest and artifacts.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    /// Search target: power | area | performance | direct.
    #[arg(long, global = true)]
    target: Option<String>,

    /// Generation trials per query (1..=10).
    #[arg(long, global = true)]
    samples: Option<u32>,

    /// Replay fixture directory (switches the backend to replay).
    #[arg(long, global = true)]
    replay_dir: Option<PathBuf>,

    /// Enable the interactive human checkpoint during `run`.
    #[arg(long, global = true)]
    human_checkpoint: bool,

    /// Prompt template override directory.
    #[arg(long, global = true)]
    template_dir: Option<PathBuf>,

    /// Explicit run id (defaults to a digest of spec + config).
    #[arg(long, global = true)]
    run_id: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the spec; print each module's split partitions.
    Split,
    /// Build the prompt sequence and persist it under reports/.
    Prompt,
    /// Sample candidates from the backend (or print prompts with --dry-run).
    Generate {
        /// Print the full prompt sequence without contacting any backend.
        #[arg(long)]
        dry_run: bool,
    },
    /// Machine-correct every candidate (compile, simulate, repair loop).
    Verify,
    /// Synthesize and extract power/area/latency per candidate.
    Measure,
    /// Rank the program list and select the best candidate.
    Rank {
        /// Explicit best-to-worst order for target=direct, e.g. P4,P3,P2,P1,P0.
        #[arg(long, value_delimiter = ',')]
        direct_order: Option<Vec<String>>,
    },
    /// Run every stage end to end.
    Run,
    /// Interactively review candidates that need human feedback.
    Review,
    /// Print the ranking table and metrics summary of a finished run.
    Report,
}

fn build_config(common: &CommonArgs) -> Result<RunConfig, PipelineError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let spec = common.spec.clone().ok_or_else(|| {
                PipelineError::Config("--spec is required without --config".into())
            })?;
            let run_dir = common.run_dir.clone().ok_or_else(|| {
                PipelineError::Config("--run-dir is required without --config".into())
            })?;
            let replay_dir = common.replay_dir.clone().ok_or_else(|| {
                PipelineError::Config(
                    "--replay-dir (or a [backend] section in --config) is required".into(),
                )
            })?;
            RunConfig {
                spec_path: spec,
                run_dir,
                backend: verigen::pipeline::BackendChoice::Replay { replay_dir },
                toolchain: verigen::toolchain::ToolchainConfig {
                    compile_cmd: "iverilog -g2012 -s tb -o {outdir}/sim.out {input} {testbench}"
                        .into(),
                    simulate_cmd: "vvp {input}".into(),
                    synth_cmd: "yosys -p \"read_verilog {input}; synth -top {top}; stat\"".into(),
                    timeout_secs: 60,
                },
                extractors: Default::default(),
                target: TargetKind::Area,
                direct_order: None,
                samples_per_query: verigen::llmclient::DEFAULT_SAMPLES_PER_QUERY,
                temperature: 1.0,
                human_checkpoint: false,
                parallelism: 1,
                repair_retries: verigen::pipeline::DEFAULT_REPAIR_RETRIES,
                diagnostic_budget: verigen::promptgen::DEFAULT_DIAGNOSTIC_BUDGET,
                template_dir: None,
                run_id: None,
            }
        }
    };
    if let Some(spec) = &common.spec {
        config.spec_path = spec.clone();
    }
    if let Some(run_dir) = &common.run_dir {
        config.run_dir = run_dir.clone();
    }
    if let Some(target) = &common.target {
        config.target = TargetKind::parse(target).ok_or_else(|| {
            PipelineError::Config(format!(
                "unknown target `{target}` (expected power|area|performance|direct)"
            ))
        })?;
    }
    if let Some(samples) = common.samples {
        config.samples_per_query = samples;
    }
    if let Some(replay_dir) = &common.replay_dir {
        config.backend = verigen::pipeline::BackendChoice::Replay {
            replay_dir: replay_dir.clone(),
        };
    }
    if common.human_checkpoint {
        config.human_checkpoint = true;
    }
    if let Some(dir) = &common.template_dir {
        config.template_dir = Some(dir.clone());
    }
    if let Some(run_id) = &common.run_id {
        config.run_id = Some(run_id.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = build_config(&cli.common)?;
    match cli.command {
        Command::Split => {
            let pipeline = Pipeline::open(config)?;
            let spec = pipeline.spec();
            println!(
                "design `{}`: {} module(s)",
                spec.design_name,
                spec.modules.len()
            );
            for module in &spec.modules {
                let split = split_spec(spec, &module.name).expect("declared module");
                println!(
                    "  {}: {} port(s), {} example row(s), compose={}",
                    module.name,
                    split.iface.len(),
                    split.eg.len(),
                    if split.compose.is_some() { "yes" } else { "no" }
                );
            }
            if let Some(comp) = &spec.composition {
                println!(
                    "  top `{}` composes [{}]",
                    comp.top_name,
                    comp.submodule_names.join(", ")
                );
            }
            Ok(())
        }
        Command::Prompt => {
            let mut pipeline = Pipeline::open(config)?;
            pipeline.ensure_stage(Stage::Prompted)?;
            let sequence = pipeline.sequence()?;
            println!(
                "prompt sequence: {} queries (persisted under reports/)",
                sequence.len()
            );
            Ok(())
        }
        Command::Generate { dry_run } => {
            if dry_run {
                let sequence = verigen::pipeline::dry_run_sequence(&config)?;
                print!("{}", format_prompt_sequence(&sequence));
                return Ok(());
            }
            let mut pipeline = Pipeline::open(config)?;
            pipeline.ensure_stage(Stage::Generated)?;
            for record in &pipeline.manifest().candidates {
                println!("{}\t{}", record.id, record.path);
            }
            Ok(())
        }
        Command::Verify => {
            let mut pipeline = Pipeline::open(config)?;
            pipeline.ensure_stage(Stage::Corrected)?;
            for record in &pipeline.manifest().candidates {
                let verdict = record
                    .verdict
                    .as_ref()
                    .map(Verdict::kind_name)
                    .unwrap_or("unverified");
                println!(
                    "{}\t{}{}",
                    record.id,
                    verdict,
                    if record.rejected { " (rejected)" } else { "" }
                );
            }
            Ok(())
        }
        Command::Measure => {
            let mut pipeline = Pipeline::open(config)?;
            pipeline.ensure_stage(Stage::Measured)?;
            for record in &pipeline.manifest().candidates {
                match &record.ppa {
                    Some(ppa) => println!(
                        "{}\tpower={} mW\tarea={} um^2\tlatency={}",
                        record.id, ppa.power_mw, ppa.area_um2, ppa.latency_cycles
                    ),
                    None => println!("{}\t(not measured)", record.id),
                }
            }
            Ok(())
        }
        Command::Rank { direct_order } => {
            let mut config = config;
            if direct_order.is_some() {
                config.direct_order = direct_order;
            }
            let mut pipeline = Pipeline::open(config)?;
            let outcome = pipeline.run_to_selection()?;
            print_outcome(&outcome);
            Ok(())
        }
        Command::Run => {
            let mut pipeline = Pipeline::open(config)?;
            let outcome = pipeline.run_to_selection()?;
            print_outcome(&outcome);
            Ok(())
        }
        Command::Review => {
            let mut pipeline = Pipeline::open(config)?;
            if pipeline.manifest().stage != Stage::Corrected {
                return Err(PipelineError::Config(format!(
                    "review applies at the corrected stage (run is at `{}`); run `verify` first, measure after reviewing",
                    pipeline.manifest().stage.name()
                )));
            }
            let pending: Vec<String> = pipeline
                .manifest()
                .candidates
                .iter()
                .filter(|r| !r.rejected && matches!(r.verdict, Some(Verdict::NeedsHuman { .. })))
                .map(|r| r.id.clone())
                .collect();
            if pending.is_empty() {
                println!("no candidates awaiting review");
                return Ok(());
            }
            let mut reviewer = StdinReviewer;
            pipeline.review_candidates(&pending, &mut reviewer)?;
            for id in &pending {
                let record = pipeline.manifest().candidate(id).expect("known candidate");
                println!(
                    "{id}\t{}",
                    if record.rejected {
                        "rejected"
                    } else {
                        "accepted"
                    }
                );
            }
            Ok(())
        }
        Command::Report => {
            // Read-only: prints persisted reports without taking the run lock.
            let run_dir = &config.run_dir;
            let manifest = runstore::load(run_dir)?;
            println!("run {} (stage: {})", manifest.run_id, manifest.stage.name());
            let ranking_txt = run_dir.join("reports/ranking.txt");
            if let Ok(table) = std::fs::read_to_string(&ranking_txt) {
                print!("{table}");
            }
            let report_json = run_dir.join("reports/run_report.json");
            match std::fs::read_to_string(&report_json) {
                Ok(body) => {
                    let report: verigen::pipeline::RunReport = serde_json::from_str(&body)
                        .map_err(|e| PipelineError::Config(format!("bad run report: {e}")))?;
                    println!("prompt queries: {}", report.prompt_queries);
                    for c in &report.candidates {
                        println!(
                            "{}\traw_loc={}\tcorrection_loc={}\tquality={}\tverdict={}{}",
                            c.id,
                            c.raw_loc,
                            c.correction_loc,
                            c.quality,
                            c.verdict.as_deref().unwrap_or("unverified"),
                            if c.rejected { " (rejected)" } else { "" }
                        );
                    }
                    if let Some(sel) = &report.selection {
                        println!("selected: {} (target: {})", sel.chosen, sel.target);
                    }
                }
                Err(_) => {
                    for record in &manifest.candidates {
                        let verdict = record
                            .verdict
                            .as_ref()
                            .map(Verdict::kind_name)
                            .unwrap_or("unverified");
                        println!("{}\t{}", record.id, verdict);
                    }
                    println!("(no run report yet; finish the run to produce one)");
                }
            }
            Ok(())
        }
    }
}

fn print_outcome(outcome: &verigen::pipeline::PipelineOutcome) {
    println!(
        "selected {}: power={} mW, area={} um^2, latency={} cycle(s)",
        outcome.selected_id,
        outcome.selected_ppa.power_mw,
        outcome.selected_ppa.area_um2,
        outcome.selected_ppa.latency_cycles
    );
    for path in &outcome.report_paths {
        println!("report: {}", path.display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            let code = e.exit_code();
            ExitCode::from(u8::try_from(code).unwrap_or(EXIT_ERROR as u8))
        }
    }
}
