//! Pull power, area, and latency out of tool reports with the bundled
//! extractor profile, including the µW→mW unit scaling, and emit the
//! canonical per-candidate JSON record.
//!
//! ```bash
//! cargo run -p verigen --example parse_reports
//! ```

use verigen::ppa::{parse_metric, ExtractorSet, PpaRecord, PpaReport};

const SYNTH_REPORT: &str = "\
Design: button_count
Number of cells: 42
Total cell area: 187.200004
Cell internal power = 7.1020 uW
Net switching power = 2.6233 uW
Total Dynamic Power = 9.7253 uW
";

const SIM_LOG: &str = "\
TB_PASS
TB_DONE cycle=1
";

fn main() -> anyhow::Result<()> {
    let extractors = ExtractorSet::default_profile();
    let area = parse_metric(SYNTH_REPORT, &extractors.area)?;
    let power = parse_metric(SYNTH_REPORT, &extractors.power)?;
    let latency = parse_metric(SIM_LOG, &extractors.latency)?;

    println!("area    = {area} um^2");
    println!(
        "power   = {power} mW (scaled from uW by {})",
        extractors.power.scale
    );
    println!("latency = {latency} cycle(s)");

    let record = PpaRecord::new(
        "P3",
        &PpaReport {
            power_mw: power,
            area_um2: area,
            latency_cycles: latency as u64,
        },
    );
    println!("\ncanonical record: {}", serde_json::to_string(&record)?);
    Ok(())
}
