//! Serialize a composed design into its full prompt sequence and print it —
//! the same view `verigen generate --dry-run` gives.
//!
//! The ordering rules are visible in the output: the setup query comes
//! first, each submodule body merges the function text with the complete
//! interface declaration, the handshake addition arrives as its own later
//! query, and the final compose query re-declares every submodule interface
//! before asking for the top module.
//!
//! ```bash
//! cargo run -p verigen --example prompt_sequence
//! ```

use std::path::Path;

use verigen::pipeline::format_prompt_sequence;
use verigen::promptgen::{build_arch_sequence, TemplateSet};
use verigen::specdoc::parse_spec;

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/complex.toml");
    let spec = parse_spec(&std::fs::read_to_string(&path)?)?;
    let sequence = build_arch_sequence(&spec, &TemplateSet::default())?;
    println!(
        "{} queries for design `{}` (digest {}):\n",
        sequence.len(),
        spec.design_name,
        &sequence.digest()[..12]
    );
    print!("{}", format_prompt_sequence(&sequence));
    Ok(())
}
