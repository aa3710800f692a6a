//! Enumerative search over a measured program list: rank five candidates
//! under every target and print the side-by-side selection table.
//!
//! ```bash
//! cargo run -p verigen --example rank_candidates
//! ```

use verigen::llmclient::{Candidate, Provenance};
use verigen::ppa::{build_program_list, PpaReport};
use verigen::search::{ranking_table, select_best, SearchTarget};

fn candidate(id: &str) -> Candidate {
    Candidate {
        id: id.into(),
        source: format!("module button_count(); // {id}\nendmodule"),
        module_name: "button_count".into(),
        provenance: Provenance {
            sequence_digest: "example".into(),
            sample_index: 0,
            backend_id: "example".into(),
        },
        correction_loc: 0,
    }
}

fn main() -> anyhow::Result<()> {
    // Five measured variants of the same counter, as a cost stage would
    // produce them: same latency, very different power and area.
    let measurements = [
        (4.2900e-2, 139.199999),
        (1.3593e-2, 265.200006),
        (1.0704e-2, 193.600004),
        (9.7253e-3, 187.200004),
        (1.0283e-2, 196.000003),
    ];
    let list = build_program_list(
        measurements
            .iter()
            .enumerate()
            .map(|(i, (power_mw, area_um2))| {
                (
                    candidate(&format!("P{i}")),
                    PpaReport {
                        power_mw: *power_mw,
                        area_um2: *area_um2,
                        latency_cycles: 1,
                    },
                )
            })
            .collect(),
    )?;

    let model_order: Vec<String> = ["P4", "P3", "P2", "P1", "P0"].map(String::from).to_vec();
    let table = ranking_table(&list, Some(&model_order))?;
    print!("{}", table.to_text());

    for target in [
        SearchTarget::Power,
        SearchTarget::Area,
        SearchTarget::Performance,
    ] {
        let (id, ppa) = select_best(&list, &target)?;
        println!(
            "best by {:<12} -> {id} (power={} mW, area={} um^2, latency={})",
            target.kind_name(),
            ppa.power_mw,
            ppa.area_um2,
            ppa.latency_cycles
        );
    }
    let direct = SearchTarget::Direct { order: model_order };
    println!("direct select      -> {}", select_best(&list, &direct)?.0);
    Ok(())
}
