//! The cost-manager half of the output manager: run synthesis, pull power,
//! area, and latency out of tool reports, and assemble the program list the
//! search stage ranks.
//!
//! Canonical units are mW, µm², and cycles; extractor `scale` factors absorb
//! tool-side unit variance (W→mW is 1e3, µW→mW is 1e-3). The per-candidate
//! record interchange format is JSON:
//! `{"id": "P3", "power_mw": …, "area_um2": …, "latency_cycles": …}`.

use std::fmt;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llmclient::Candidate;
use crate::toolchain::{run_command, substitute, ToolError, ToolchainConfig};

/// Power (mW), area (µm²), and latency (cycles) for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaReport {
    pub power_mw: f64,
    pub area_um2: f64,
    pub latency_cycles: u64,
}

/// The persisted per-candidate metrics record; field order is part of the
/// interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaRecord {
    pub id: String,
    pub power_mw: f64,
    pub area_um2: f64,
    pub latency_cycles: u64,
}

impl PpaRecord {
    pub fn new(id: impl Into<String>, report: &PpaReport) -> Self {
        PpaRecord {
            id: id.into(),
            power_mw: report.power_mw,
            area_um2: report.area_um2,
            latency_cycles: report.latency_cycles,
        }
    }

    pub fn report(&self) -> PpaReport {
        PpaReport {
            power_mw: self.power_mw,
            area_um2: self.area_um2,
            latency_cycles: self.latency_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Power,
    Area,
    Latency,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Power => "power",
            Metric::Area => "area",
            Metric::Latency => "latency",
        })
    }
}

/// A regex with exactly one numeric capture group plus a positive scale
/// factor into canonical units.
#[derive(Debug, Clone)]
pub struct MetricExtractor {
    pub metric: Metric,
    pattern: Regex,
    pub scale: f64,
}

impl MetricExtractor {
    pub fn new(metric: Metric, pattern: &str, scale: f64) -> Result<Self, PpaError> {
        let compiled = Regex::new(pattern)
            .map_err(|e| PpaError::InvalidExtractor(format!("{metric}: {e}")))?;
        if compiled.captures_len() != 2 {
            return Err(PpaError::InvalidExtractor(format!(
                "{metric}: pattern must have exactly one capture group (has {})",
                compiled.captures_len() - 1
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(PpaError::InvalidExtractor(format!(
                "{metric}: scale must be a positive real (got {scale})"
            )));
        }
        Ok(MetricExtractor {
            metric,
            pattern: compiled,
            scale,
        })
    }

    pub fn pattern_str(&self) -> &str {
        self.pattern.as_str()
    }
}

/// One extractor per metric.
#[derive(Debug, Clone)]
pub struct ExtractorSet {
    pub power: MetricExtractor,
    pub area: MetricExtractor,
    pub latency: MetricExtractor,
}

/// Number pattern shared by the default profiles.
const NUMBER: &str = r"([0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)";

impl ExtractorSet {
    /// Profile for the bundled open-source flow: a `Total cell area:` line in
    /// µm², a `Total Dynamic Power = … uW` line scaled to mW, and the
    /// testbench's `TB_DONE cycle=` marker.
    pub fn default_profile() -> Self {
        ExtractorSet {
            power: MetricExtractor::new(
                Metric::Power,
                &format!(r"Total Dynamic Power\s*=\s*{NUMBER}\s*uW"),
                1e-3,
            )
            .expect("default power extractor"),
            area: MetricExtractor::new(Metric::Area, &format!(r"Total cell area:\s*{NUMBER}"), 1.0)
                .expect("default area extractor"),
            latency: MetricExtractor::new(Metric::Latency, r"TB_DONE cycle=([0-9]+)", 1.0)
                .expect("default latency extractor"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PpaError {
    #[error("metric {0} not found in report")]
    MetricNotFound(Metric),
    #[error("captured value `{0}` is not a number")]
    MalformedNumber(String),
    #[error("invalid extractor: {0}")]
    InvalidExtractor(String),
    #[error("synthesis failed (exit {status}): {detail}")]
    SynthFailed { status: i32, detail: String },
    #[error("incomplete report, missing: {}", .0.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "))]
    IncompleteReport(Vec<Metric>),
    #[error("duplicate candidate id `{0}`")]
    DuplicateCandidate(String),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Applies `extractor` to `report_text`: the first match's captured number
/// times the scale. Latency values are rounded to the nearest integer and
/// floored at 1. Prepending non-matching lines never changes the result.
pub fn parse_metric(report_text: &str, extractor: &MetricExtractor) -> Result<f64, PpaError> {
    let caps = extractor
        .pattern
        .captures(report_text)
        .ok_or(PpaError::MetricNotFound(extractor.metric))?;
    let raw = caps.get(1).map(|m| m.as_str()).unwrap_or_default();
    let value: f64 = raw
        .parse()
        .map_err(|_| PpaError::MalformedNumber(raw.to_string()))?;
    let scaled = value * extractor.scale;
    if extractor.metric == Metric::Latency {
        Ok(scaled.round().max(1.0))
    } else {
        Ok(scaled)
    }
}

/// Measures one corrected candidate: runs the synthesis command in
/// `work_dir`, parses power and area from its output (also saved to
/// `synth.log`), and reads latency from the `sim.log` the machine-feedback
/// stage left behind. Either every metric is present or the whole
/// measurement fails with [`PpaError::IncompleteReport`].
pub fn measure_ppa(
    candidate: &Candidate,
    config: &ToolchainConfig,
    extractors: &ExtractorSet,
    work_dir: &Path,
) -> Result<PpaReport, PpaError> {
    config.validate()?;
    fs::create_dir_all(work_dir)?;
    let design_path = work_dir.join("design.v");
    if !design_path.is_file() {
        fs::write(&design_path, &candidate.source)?;
    }
    let work = work_dir.to_string_lossy().into_owned();
    let design = design_path.to_string_lossy().into_owned();
    let synth_cmd = substitute(
        &config.synth_cmd,
        &[
            ("input", design.as_str()),
            ("top", candidate.module_name.as_str()),
            ("outdir", work.as_str()),
        ],
    );
    let output = run_command(&synth_cmd, config.timeout())?;
    let synth_log = output.combined();
    fs::write(work_dir.join("synth.log"), &synth_log)?;
    if !output.success() {
        return Err(PpaError::SynthFailed {
            status: output.status,
            detail: synth_log.chars().take(2000).collect(),
        });
    }

    let sim_log = fs::read_to_string(work_dir.join("sim.log")).unwrap_or_default();

    let mut missing = Vec::new();
    let power = match parse_metric(&synth_log, &extractors.power) {
        Ok(v) => Some(v),
        Err(PpaError::MetricNotFound(m)) => {
            missing.push(m);
            None
        }
        Err(e) => return Err(e),
    };
    let area = match parse_metric(&synth_log, &extractors.area) {
        Ok(v) => Some(v),
        Err(PpaError::MetricNotFound(m)) => {
            missing.push(m);
            None
        }
        Err(e) => return Err(e),
    };
    let latency = match parse_metric(&sim_log, &extractors.latency) {
        Ok(v) => Some(v),
        Err(PpaError::MetricNotFound(m)) => {
            missing.push(m);
            None
        }
        Err(e) => return Err(e),
    };
    if !missing.is_empty() {
        return Err(PpaError::IncompleteReport(missing));
    }

    let (power, area, latency) = (power.unwrap(), area.unwrap(), latency.unwrap());
    if !power.is_finite() || power < 0.0 || !area.is_finite() || area < 0.0 {
        return Err(PpaError::MalformedNumber(format!(
            "power={power} area={area} out of range"
        )));
    }
    Ok(PpaReport {
        power_mw: power,
        area_um2: area,
        latency_cycles: latency as u64,
    })
}

/// Corrected candidates paired with complete PPA reports; ids are unique and
/// entries sit in candidate-label order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProgramList {
    entries: Vec<(Candidate, PpaReport)>,
}

impl ProgramList {
    pub fn entries(&self) -> &[(Candidate, PpaReport)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|(c, _)| c.id.as_str()).collect()
    }
}

/// Numeric part of a dense candidate label (`"P3"` → 3), used for ordering.
pub fn label_index(id: &str) -> Option<u64> {
    id.strip_prefix('P').and_then(|n| n.parse().ok())
}

fn label_key(id: &str) -> (u64, String) {
    (label_index(id).unwrap_or(u64::MAX), id.to_string())
}

/// Assembles the program list, ordering entries by candidate label (P0, P1,
/// …). The input multiset is preserved exactly; duplicate ids are rejected.
pub fn build_program_list(measured: Vec<(Candidate, PpaReport)>) -> Result<ProgramList, PpaError> {
    let mut seen = std::collections::HashSet::new();
    for (candidate, _) in &measured {
        if !seen.insert(candidate.id.clone()) {
            return Err(PpaError::DuplicateCandidate(candidate.id.clone()));
        }
    }
    let mut entries = measured;
    entries.sort_by_key(|(c, _)| label_key(&c.id));
    Ok(ProgramList { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::Provenance;

    fn candidate(id: &str) -> Candidate {
        Candidate {
            id: id.into(),
            source: format!("module m_{id}(); endmodule"),
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

    #[test]
    fn parses_area_line_exactly() {
        let extractors = ExtractorSet::default_profile();
        let value = parse_metric("Total cell area: 139.199999\n", &extractors.area).unwrap();
        assert_eq!(value, 139.199999);
    }

    #[test]
    fn parses_power_with_unit_scaling() {
        let extractors = ExtractorSet::default_profile();
        let value = parse_metric("Total Dynamic Power = 42.900 uW\n", &extractors.power).unwrap();
        assert_eq!(value, 42.900 * 1e-3);
    }

    #[test]
    fn empty_report_is_metric_not_found() {
        let extractors = ExtractorSet::default_profile();
        assert!(matches!(
            parse_metric("", &extractors.area),
            Err(PpaError::MetricNotFound(Metric::Area))
        ));
    }

    #[test]
    fn latency_rounds_and_floors_at_one() {
        let extractor = MetricExtractor::new(Metric::Latency, r"cycles=([0-9]+)", 1.0).unwrap();
        assert_eq!(parse_metric("cycles=7", &extractor).unwrap(), 7.0);
        assert_eq!(parse_metric("cycles=0", &extractor).unwrap(), 1.0);
    }

    #[test]
    fn first_match_wins() {
        let extractors = ExtractorSet::default_profile();
        let text = "Total cell area: 10.5\nTotal cell area: 99.9\n";
        assert_eq!(parse_metric(text, &extractors.area).unwrap(), 10.5);
    }

    #[test]
    fn extractor_requires_exactly_one_capture_group() {
        assert!(MetricExtractor::new(Metric::Area, r"area: [0-9]+", 1.0).is_err());
        assert!(
            MetricExtractor::new(Metric::Area, r"area: ([0-9]+) um \(([0-9]+)\)", 1.0).is_err()
        );
        assert!(MetricExtractor::new(Metric::Area, r"area: ([0-9]+)", 0.0).is_err());
    }

    #[test]
    fn malformed_capture_is_reported() {
        let extractor = MetricExtractor::new(Metric::Area, r"area: (\S+)", 1.0).unwrap();
        assert!(matches!(
            parse_metric("area: huge", &extractor),
            Err(PpaError::MalformedNumber(_))
        ));
    }

    fn synth_toolchain(dir: &Path, report: &str) -> ToolchainConfig {
        let synth = dir.join("synth.sh");
        std::fs::write(&synth, format!("#!/bin/sh\nprintf '{report}'\n")).unwrap();
        ToolchainConfig {
            compile_cmd: "echo {input}".into(),
            simulate_cmd: "echo {input}".into(),
            synth_cmd: format!("sh {} {{input}} {{outdir}}", synth.display()),
            timeout_secs: 20,
        }
    }

    #[test]
    fn measure_reads_synth_output_and_sim_log() {
        let dir = tempfile::tempdir().unwrap();
        let work = dir.path().join("w");
        std::fs::create_dir_all(&work).unwrap();
        std::fs::write(work.join("sim.log"), "TB_PASS\nTB_DONE cycle=1\n").unwrap();
        let config = synth_toolchain(
            dir.path(),
            "Total cell area: 187.200004\\nTotal Dynamic Power = 9.7253 uW\\n",
        );
        let report = measure_ppa(
            &candidate("P3"),
            &config,
            &ExtractorSet::default_profile(),
            &work,
        )
        .unwrap();
        assert_eq!(report.area_um2, 187.200004);
        assert_eq!(report.power_mw, 9.7253 * 1e-3);
        assert_eq!(report.latency_cycles, 1);
    }

    #[test]
    fn missing_cycle_marker_is_incomplete_latency() {
        let dir = tempfile::tempdir().unwrap();
        let work = dir.path().join("w");
        std::fs::create_dir_all(&work).unwrap();
        std::fs::write(work.join("sim.log"), "TB_PASS\n").unwrap();
        let config = synth_toolchain(
            dir.path(),
            "Total cell area: 1.0\\nTotal Dynamic Power = 1.0 uW\\n",
        );
        match measure_ppa(
            &candidate("P0"),
            &config,
            &ExtractorSet::default_profile(),
            &work,
        ) {
            Err(PpaError::IncompleteReport(missing)) => {
                assert_eq!(missing, vec![Metric::Latency])
            }
            other => panic!("expected IncompleteReport, got {other:?}"),
        }
    }

    #[test]
    fn program_list_orders_by_label() {
        let list = build_program_list(vec![
            (candidate("P2"), report(1.0, 2.0, 1)),
            (candidate("P0"), report(3.0, 1.0, 1)),
            (candidate("P10"), report(2.0, 3.0, 1)),
            (candidate("P1"), report(2.0, 3.0, 1)),
        ])
        .unwrap();
        assert_eq!(list.ids(), vec!["P0", "P1", "P2", "P10"]);
    }

    #[test]
    fn empty_input_is_empty_list() {
        let list = build_program_list(vec![]).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let result = build_program_list(vec![
            (candidate("P1"), report(1.0, 1.0, 1)),
            (candidate("P1"), report(2.0, 2.0, 1)),
        ]);
        assert!(matches!(result, Err(PpaError::DuplicateCandidate(id)) if id == "P1"));
    }

    #[test]
    fn record_serializes_in_interchange_field_order() {
        let record = PpaRecord::new("P3", &report(9.7253e-3, 187.200004, 1));
        let json = serde_json::to_string(&record).unwrap();
        assert_eq!(
            json,
            r#"{"id":"P3","power_mw":0.0097253,"area_um2":187.200004,"latency_cycles":1}"#
        );
    }
}
