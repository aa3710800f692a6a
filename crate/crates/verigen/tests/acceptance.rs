//! Acceptance suite: one test per criterion, each ending with a PASS line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};

use common::*;
use verigen::llmclient::{Candidate, Provenance};
use verigen::metrics::{count_loc, quality};
use verigen::pipeline::{run_pipeline, TargetKind};
use verigen::ppa::{
    build_program_list, measure_ppa, parse_metric, ExtractorSet, Metric, PpaError, PpaReport,
};
use verigen::promptgen::{build_arch_sequence, interface_block, TemplateSet};
use verigen::search::{rank, select_best, SearchTarget};
use verigen::specdoc::{CompositionSpec, DesignSpec, Direction, ModuleSpec, PortSpec};
use verigen::toolchain::ToolchainConfig;
use verigen::verify::{check_conformance, machine_correct, Verdict};

fn candidate(id: &str, source: &str) -> Candidate {
    Candidate {
        id: id.into(),
        source: source.into(),
        module_name: "m".into(),
        provenance: Provenance {
            sequence_digest: "d".into(),
            sample_index: 0,
            backend_id: "test".into(),
        },
        correction_loc: 0,
    }
}

fn report(power: f64, area: f64, latency: u64) -> PpaReport {
    PpaReport {
        power_mw: power,
        area_um2: area,
        latency_cycles: latency,
    }
}

// --- criterion 1: ranking reproduces the published five-candidate table ---

#[test]
fn criterion_1_search_table_reproduction() {
    let start = Instant::now();
    let list = build_program_list(vec![
        (
            candidate("P0", "module a(); endmodule"),
            report(4.2900e-2, 139.199999, 1),
        ),
        (
            candidate("P1", "module b(); endmodule"),
            report(1.3593e-2, 265.200006, 1),
        ),
        (
            candidate("P2", "module c(); endmodule"),
            report(1.0704e-2, 193.600004, 1),
        ),
        (
            candidate("P3", "module d(); endmodule"),
            report(9.7253e-3, 187.200004, 1),
        ),
        (
            candidate("P4", "module e(); endmodule"),
            report(1.0283e-2, 196.000003, 1),
        ),
    ])
    .unwrap();

    assert_eq!(
        rank(&list, &SearchTarget::Power).unwrap().ids(),
        vec!["P3", "P4", "P2", "P1", "P0"]
    );
    assert_eq!(
        rank(&list, &SearchTarget::Area).unwrap().ids(),
        vec!["P0", "P3", "P2", "P4", "P1"]
    );
    assert_eq!(
        rank(&list, &SearchTarget::Performance).unwrap().ids(),
        vec!["P0", "P1", "P2", "P3", "P4"]
    );
    let direct = SearchTarget::Direct {
        order: ["P4", "P3", "P2", "P1", "P0"].map(String::from).to_vec(),
    };
    assert_eq!(select_best(&list, &direct).unwrap().0, "P4");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 (search table reproduction): PASS ({elapsed:?})");
}

// --- criterion 2: prompt-principle invariants over random specs ---

fn arb_direction() -> impl Strategy<Value = Direction> {
    prop_oneof![
        Just(Direction::Input),
        Just(Direction::Output),
        Just(Direction::Inout)
    ]
}

fn arb_ports(max: usize) -> impl Strategy<Value = Vec<PortSpec>> {
    prop::collection::vec(
        (
            arb_direction(),
            1u32..=64,
            prop_oneof![3 => Just(1u32), 1 => 2u32..=4],
            prop_oneof![Just(String::new()), "[a-z][a-z ]{0,10}"],
        ),
        1..=max,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(
                |(i, (direction, width, array_size, description))| PortSpec {
                    direction,
                    width,
                    name: format!("p{i}"),
                    array_size,
                    description,
                },
            )
            .collect()
    })
}

type RawModule = (Vec<PortSpec>, String, Option<String>);

fn arb_raw_module() -> impl Strategy<Value = RawModule> {
    (arb_ports(5), "[a-z]{3,24}", prop::option::of("[a-z]{3,24}"))
}

fn arb_spec() -> impl Strategy<Value = DesignSpec> {
    (
        prop::collection::vec(arb_raw_module(), 1..=8),
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec(any::<bool>(), 8),
        "[a-z]{3,24}",
    )
        .prop_map(|(raw, want_top, top_declared, sub_mask, connection)| {
            let modules: Vec<ModuleSpec> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (ports, function_desc, addition))| ModuleSpec {
                    name: format!("m{i}"),
                    function_desc,
                    ports,
                    examples: vec![],
                    addition,
                })
                .collect();
            let composition = if want_top {
                if top_declared && modules.len() >= 2 {
                    // Last module is the declared top; submodules come from
                    // the rest.
                    let top_name = modules.last().unwrap().name.clone();
                    let pool: Vec<String> = modules[..modules.len() - 1]
                        .iter()
                        .map(|m| m.name.clone())
                        .collect();
                    let picked: Vec<String> = pool
                        .iter()
                        .zip(&sub_mask)
                        .filter(|(_, keep)| **keep)
                        .map(|(n, _)| n.clone())
                        .collect();
                    let submodule_names = if picked.is_empty() { pool } else { picked };
                    Some(CompositionSpec {
                        top_name,
                        submodule_names,
                        connection_desc: connection.clone(),
                    })
                } else {
                    let pool: Vec<String> = modules.iter().map(|m| m.name.clone()).collect();
                    let picked: Vec<String> = pool
                        .iter()
                        .zip(&sub_mask)
                        .filter(|(_, keep)| **keep)
                        .map(|(n, _)| n.clone())
                        .collect();
                    let submodule_names = if picked.is_empty() { pool } else { picked };
                    Some(CompositionSpec {
                        top_name: "top_module".into(),
                        submodule_names,
                        connection_desc: connection.clone(),
                    })
                }
            } else {
                None
            };
            DesignSpec {
                design_name: "generated".into(),
                modules,
                composition,
            }
        })
}

#[test]
fn criterion_2_prompt_principle_invariants() {
    use verigen::promptgen::QueryKind;

    let start = Instant::now();
    let templates = TemplateSet::default();
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 500,
        ..ProptestConfig::default()
    });
    runner
        .run(&arb_spec(), |spec| {
            prop_assert_eq!(verigen::specdoc::validate_spec(&spec), vec![]);
            let sequence = build_arch_sequence(&spec, &templates).expect("sequence builds");
            let queries = &sequence.queries;

            // Setup first, and only once.
            prop_assert_eq!(queries[0].kind, QueryKind::Setup);
            prop_assert_eq!(
                queries
                    .iter()
                    .filter(|q| q.kind == QueryKind::Setup)
                    .count(),
                1
            );

            let top = spec.top_name();
            let index_of = |kind: QueryKind, subject: &str| {
                queries
                    .iter()
                    .position(|q| q.kind == kind && q.subject.as_deref() == Some(subject))
            };
            let compose_idx = queries.iter().position(|q| q.kind == QueryKind::Compose);
            prop_assert_eq!(compose_idx.is_some(), spec.composition.is_some());

            for module in &spec.modules {
                if Some(module.name.as_str()) == top {
                    prop_assert!(index_of(QueryKind::ModuleBody, &module.name).is_none());
                    continue;
                }
                let body = index_of(QueryKind::ModuleBody, &module.name);
                prop_assert!(body.is_some(), "missing body for {}", module.name);
                // Body precedes its addition; addition exists iff declared.
                let addition = index_of(QueryKind::Addition, &module.name);
                prop_assert_eq!(
                    addition.is_some(),
                    module
                        .addition
                        .as_deref()
                        .is_some_and(|a| !a.trim().is_empty())
                );
                if let Some(add_idx) = addition {
                    prop_assert!(body.unwrap() < add_idx);
                }
                // Every body/addition precedes the compose query.
                if let Some(c) = compose_idx {
                    prop_assert!(body.unwrap() < c);
                    if let Some(add_idx) = addition {
                        prop_assert!(add_idx < c);
                    }
                }
            }

            // The compose query re-declares every submodule interface.
            if let (Some(c), Some(comp)) = (compose_idx, &spec.composition) {
                let text = &queries[c].text;
                for sub in &comp.submodule_names {
                    let module = spec.module(sub).unwrap();
                    let block = interface_block(&module.name, &module.ports).unwrap();
                    prop_assert!(
                        text.contains(&block),
                        "compose query lacks interface of {sub}"
                    );
                }
            }
            Ok(())
        })
        .unwrap();

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 2 (prompt-principle invariants, 500 specs): PASS ({elapsed:?})");
}

// --- criterion 3: interface render→parse→conformance round trip ---

fn canonical(ports: &[PortSpec]) -> std::collections::BTreeSet<(String, String, u32, u32)> {
    ports
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                p.direction.keyword().to_string(),
                p.width,
                p.array_size,
            )
        })
        .collect()
}

fn wrap(ports: &[PortSpec]) -> String {
    format!("{}\nendmodule\n", interface_block("dut", ports).unwrap())
}

#[test]
fn criterion_3_interface_round_trip() {
    let start = Instant::now();
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    });
    runner
        .run(&(arb_ports(12), arb_ports(12)), |(a, b)| {
            let wrapped = wrap(&a);
            let violations = check_conformance(&wrapped, &a).expect("parseable");
            prop_assert_eq!(violations, vec![]);
            if canonical(&a) != canonical(&b) {
                let cross = check_conformance(&wrapped, &b).expect("parseable");
                prop_assert!(
                    !cross.is_empty(),
                    "distinct port lists produced no violations"
                );
            }
            Ok(())
        })
        .unwrap();

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 3 (interface round trip, 1000 port lists): PASS ({elapsed:?})");
}

// --- criterion 4: deterministic end-to-end replay run ---

#[test]
fn criterion_4_deterministic_end_to_end() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let replay = tmp.path().join("replay");
    record_button_fixtures(&replay);

    // Same fixtures, two run directories: byte-identical manifests
    // (timestamps excluded) and the same selection.
    let dir_a = tmp.path().join("run_power_a");
    let dir_b = tmp.path().join("run_power_b");
    let out_a = run_pipeline(button_config(&dir_a, &replay, TargetKind::Power)).unwrap();
    let out_b = run_pipeline(button_config(&dir_b, &replay, TargetKind::Power)).unwrap();
    assert_eq!(out_a.selected_id, "P3");
    assert_eq!(out_b.selected_id, "P3");
    assert_eq!(normalized_manifest(&dir_a), normalized_manifest(&dir_b));

    // Per-target selections over the same fixture set.
    let dir_area = tmp.path().join("run_area");
    let out_area = run_pipeline(button_config(&dir_area, &replay, TargetKind::Area)).unwrap();
    assert_eq!(out_area.selected_id, "P0");

    let dir_perf = tmp.path().join("run_perf");
    let out_perf =
        run_pipeline(button_config(&dir_perf, &replay, TargetKind::Performance)).unwrap();
    assert_eq!(out_perf.selected_id, "P0");

    let dir_direct = tmp.path().join("run_direct");
    let out_direct = run_pipeline(button_config(&dir_direct, &replay, TargetKind::Direct)).unwrap();
    assert_eq!(out_direct.selected_id, "P4");

    // Resume never re-invokes the backend: empty the replay store, then
    // rerun both a finished directory and one stopped after generation.
    let replay2 = tmp.path().join("replay2");
    record_button_fixtures(&replay2);
    let dir_resume = tmp.path().join("run_resume");
    {
        let mut pipeline = verigen::pipeline::Pipeline::open(button_config(
            &dir_resume,
            &replay2,
            TargetKind::Power,
        ))
        .unwrap();
        pipeline
            .ensure_stage(verigen::runstore::Stage::Generated)
            .unwrap();
    }
    for entry in fs::read_dir(&replay2).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            fs::remove_dir_all(path).unwrap();
        } else {
            fs::remove_file(path).unwrap();
        }
    }
    let resumed = run_pipeline(button_config(&dir_resume, &replay2, TargetKind::Power)).unwrap();
    assert_eq!(resumed.selected_id, "P3");
    let rerun = run_pipeline(button_config(&dir_a, &replay2, TargetKind::Power)).unwrap();
    assert_eq!(rerun.selected_id, "P3");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("ACCEPTANCE 4 (deterministic end-to-end replay): PASS ({elapsed:?})");
}

// --- criterion 5: report-parser oracle on golden fixtures ---

#[test]
fn criterion_5_report_parser_oracle() {
    let extractors = ExtractorSet::default_profile();
    let reports = fixtures_dir().join("reports");
    let synth = fs::read_to_string(reports.join("synth_button_p3.log")).unwrap();
    let sim = fs::read_to_string(reports.join("sim_button.log")).unwrap();

    // Exact values embedded in the fixtures, including µW→mW scaling.
    assert_eq!(parse_metric(&synth, &extractors.area).unwrap(), 187.200004);
    assert_eq!(
        parse_metric(&synth, &extractors.power).unwrap(),
        9.7253 * 1.0e-3
    );
    assert_eq!(parse_metric(&sim, &extractors.latency).unwrap(), 1.0);

    // Full measure path against the same fixtures.
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("w");
    fs::create_dir_all(&work).unwrap();
    fs::copy(reports.join("sim_button.log"), work.join("sim.log")).unwrap();
    let synth_cat = ToolchainConfig {
        compile_cmd: "true # {input}".into(),
        simulate_cmd: "true # {input}".into(),
        synth_cmd: format!(
            "cat {} # {{input}}",
            reports.join("synth_button_p3.log").display()
        ),
        timeout_secs: 10,
    };
    let measured = measure_ppa(
        &candidate("P3", "module m(); endmodule"),
        &synth_cat,
        &extractors,
        &work,
    )
    .unwrap();
    assert_eq!(
        measured,
        PpaReport {
            power_mw: 9.7253 * 1.0e-3,
            area_um2: 187.200004,
            latency_cycles: 1
        }
    );

    // Missing metrics surface as IncompleteReport naming the gaps.
    let missing_power = fs::read_to_string(reports.join("synth_missing_power.log")).unwrap();
    assert!(matches!(
        parse_metric(&missing_power, &extractors.power),
        Err(PpaError::MetricNotFound(Metric::Power))
    ));
    let work2 = tmp.path().join("w2");
    fs::create_dir_all(&work2).unwrap();
    fs::copy(
        reports.join("sim_missing_marker.log"),
        work2.join("sim.log"),
    )
    .unwrap();
    let incomplete = ToolchainConfig {
        synth_cmd: format!(
            "cat {} # {{input}}",
            reports.join("synth_missing_power.log").display()
        ),
        ..synth_cat
    };
    match measure_ppa(
        &candidate("P0", "module m(); endmodule"),
        &incomplete,
        &extractors,
        &work2,
    ) {
        Err(PpaError::IncompleteReport(missing)) => {
            assert_eq!(missing, vec![Metric::Power, Metric::Latency]);
        }
        other => panic!("expected IncompleteReport, got {other:?}"),
    }

    println!("ACCEPTANCE 5 (report-parser oracle): PASS");
}

// --- criterion 6: quality formula and LOC counting vs the cloc tool ---

/// Code-line counts for the bundled corpus, frozen from a cloc 2.06 run.
const CLOC_CODE_COUNTS: [(&str, u64); 10] = [
    ("f01_adder.v", 7),
    ("f02_counter.v", 12),
    ("f03_decoder.v", 9),
    ("f04_register_file.v", 15),
    ("f05_fsm.v", 30),
    ("f06_shift.v", 6),
    ("f07_parity.v", 6),
    ("f08_mux_tree.v", 9),
    ("f09_sat_add.v", 8),
    ("f10_blinker.v", 9),
];

#[test]
fn criterion_6_metrics_and_cloc_agreement() {
    // Exact formula cases, including the negative-result admissibility.
    assert_eq!(quality(50, 3, 5), 48);
    assert_eq!(quality(0, 0, 0), 0);
    assert_eq!(quality(10, 0, 12), -2);

    // Linearity in each argument.
    let mut runner = TestRunner::new(ProptestConfig::default());
    runner
        .run(
            &(0u64..100_000, 0u64..100_000, 0u64..100_000, 1u64..1_000),
            |(r, c, p, k)| {
                prop_assert_eq!(quality(r + k, c, p), quality(r, c, p) + k as i64);
                prop_assert_eq!(quality(r, c + k, p), quality(r, c, p) + k as i64);
                prop_assert_eq!(quality(r, c, p + k), quality(r, c, p) - k as i64);
                Ok(())
            },
        )
        .unwrap();

    // count_loc partition invariant over arbitrary printable texts.
    let mut runner = TestRunner::new(ProptestConfig::default());
    runner
        .run(&"[ -~\n]{0,400}", |text| {
            let count = count_loc(&text);
            prop_assert_eq!(count.total, count.blank + count.comment + count.code);
            prop_assert_eq!(count.total, text.lines().count() as u64);
            Ok(())
        })
        .unwrap();

    // Agreement with cloc on the bundled corpus: frozen counts always, a
    // live cloc run when the tool is installed.
    let corpus = fixtures_dir().join("loc_corpus");
    for (file, expected_code) in CLOC_CODE_COUNTS {
        let source = fs::read_to_string(corpus.join(file)).unwrap();
        let count = count_loc(&source);
        assert_eq!(
            count.code, expected_code,
            "{file}: count_loc disagrees with frozen cloc code count"
        );
    }
    match live_cloc_code_counts(&corpus) {
        Some(live) => {
            assert_eq!(live.len(), 10, "cloc did not report all corpus files");
            for (file, code) in live {
                let source = fs::read_to_string(corpus.join(&file)).unwrap();
                assert_eq!(
                    count_loc(&source).code,
                    code,
                    "{file}: count_loc disagrees with live cloc"
                );
            }
            println!("ACCEPTANCE 6 (metrics + cloc agreement, live cloc run): PASS");
        }
        None => {
            println!(
                "ACCEPTANCE 6 (metrics + cloc agreement, frozen cloc counts; cloc not installed): PASS"
            );
        }
    }
}

fn live_cloc_code_counts(corpus: &Path) -> Option<Vec<(String, u64)>> {
    let output = std::process::Command::new("cloc")
        .args(["--by-file", "--csv", "--quiet"])
        .arg(corpus)
        .output()
        .ok()?;
    if !output.status.success() {
        return None;
    }
    let text = String::from_utf8_lossy(&output.stdout);
    let mut counts = Vec::new();
    for line in text.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() >= 5 && fields[0].starts_with("Verilog") {
            let name = Path::new(fields[1])
                .file_name()?
                .to_string_lossy()
                .into_owned();
            counts.push((name, fields[4].parse().ok()?));
        }
    }
    counts.sort();
    Some(counts)
}

// --- criterion 7: machine feedback against a real simulator (optional) ---

#[test]
fn criterion_7_simulator_integration() {
    let start = Instant::now();
    let have_iverilog = std::process::Command::new("sh")
        .args(["-c", "command -v iverilog && command -v vvp"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    if !have_iverilog {
        println!(
            "ACCEPTANCE 7 (simulator integration): SKIPPED — no Verilog simulator installed (optional-environment criterion)"
        );
        return;
    }

    let spec_text = fs::read_to_string(fixtures_dir().join("mux4x1/spec.toml")).unwrap();
    let spec = verigen::specdoc::parse_spec(&spec_text).unwrap();
    let module = spec.module("mux4x1").unwrap();
    let source = fs::read_to_string(fixtures_dir().join("mux4x1/candidate.v")).unwrap();
    let toolchain = ToolchainConfig {
        compile_cmd: "iverilog -g2012 -s tb -o {outdir}/sim.out {input} {testbench}".into(),
        simulate_cmd: "vvp {input}".into(),
        synth_cmd: "true # {input}".into(),
        timeout_secs: 60,
    };

    let tmp = tempfile::tempdir().unwrap();
    let good = candidate("P0", &source);
    let verdict = machine_correct(&good, module, &toolchain, &tmp.path().join("good")).unwrap();
    assert_eq!(verdict, Verdict::Pass, "known-correct mux must pass");

    // Single-bit mutation: the last case arm indexes d[2] instead of d[3].
    let mutated = source.replace("2'd3: y = d[3];", "2'd3: y = d[2];");
    assert_ne!(mutated, source);
    let bad = candidate("P1", &mutated);
    let verdict = machine_correct(&bad, module, &toolchain, &tmp.path().join("bad")).unwrap();
    match verdict {
        Verdict::SimMismatch { mismatch, .. } => {
            assert_eq!(mismatch.cycle, 3);
            assert_eq!(mismatch.port, "y");
        }
        other => panic!("expected SimMismatch, got {other:?}"),
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("ACCEPTANCE 7 (simulator integration): PASS ({elapsed:?})");
}

// --- criterion 8: scope note ---

#[test]
fn criterion_8_scope_note() {
    // Absolute power/area/latency figures depend on a licensed synthesis
    // flow, a specific technology library, and a live LLM; none of those are
    // bundled, so absolute numbers are not acceptance targets. The bundled
    // fixtures reproduce the mechanisms (ranking, parsing, correction,
    // selection), which criteria 1-7 cover.
    println!(
        "ACCEPTANCE 8 (scope note): absolute PPA figures require a licensed synthesis flow and a live LLM; mechanisms are covered by criteria 1-7"
    );
}
