//! Turn a module's I/O example table into a self-checking Verilog testbench.
//!
//! The clocked module below gets a generated clock, a one-cycle reset
//! lead-in, per-cycle stimulus, and output checks sampled just before each
//! rising edge, ending in the `TB_PASS` / `TB_FAIL …` / `TB_DONE cycle=…`
//! line grammar the verdict parser and latency extractor read.
//!
//! ```bash
//! cargo run -p verigen --example generate_testbench
//! ```

use std::collections::BTreeMap;

use verigen::specdoc::{Direction, ExampleRow, ModuleSpec, PortSpec};
use verigen::verify::generate_testbench;

fn row(cycle: u64, inputs: &[(&str, u64)], outputs: &[(&str, u64)]) -> ExampleRow {
    ExampleRow {
        cycle,
        inputs: inputs
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
        outputs: outputs
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
    }
}

fn main() -> anyhow::Result<()> {
    let counter = ModuleSpec {
        name: "button_count".into(),
        function_desc: "Counts the number of button presses.".into(),
        ports: vec![
            PortSpec::new(Direction::Input, 1, "clk").with_description("clock"),
            PortSpec::new(Direction::Input, 1, "rst").with_description("synchronous reset"),
            PortSpec::new(Direction::Input, 1, "btn").with_description("button level"),
            PortSpec::new(Direction::Output, 8, "count").with_description("presses counted"),
        ],
        examples: vec![
            row(0, &[("btn", 1)], &[("count", 0)]),
            row(1, &[("btn", 0)], &[("count", 1)]),
            row(2, &[("btn", 1)], &[("count", 1)]),
            row(3, &[("btn", 0)], &[("count", 2)]),
        ],
        addition: None,
    };
    print!("{}", generate_testbench(&counter)?);
    Ok(())
}
