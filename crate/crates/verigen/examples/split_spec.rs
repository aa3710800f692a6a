//! Parse a specification document, validate it, and show each module's four
//! partitions: example rows, interface ports, function text, composition.
//!
//! ```bash
//! cargo run -p verigen --example split_spec
//! ```

use std::path::Path;

use verigen::specdoc::{parse_spec, split_spec, validate_spec};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/complex.toml");
    let text = std::fs::read_to_string(&path)?;
    let spec = parse_spec(&text)?;

    let violations = validate_spec(&spec);
    println!(
        "design `{}`: {} modules, {} violation(s)",
        spec.design_name,
        spec.modules.len(),
        violations.len()
    );
    for v in &violations {
        println!("  violation: {v}");
    }

    for module in &spec.modules {
        let split = split_spec(&spec, &module.name)?;
        println!("\n== {} ==", module.name);
        println!("func    | {}", split.func.lines().next().unwrap_or(""));
        println!("iface   | {} port(s)", split.iface.len());
        for port in &split.iface {
            println!(
                "        |   {} [{} bit(s) x {}] {}",
                port.direction, port.width, port.array_size, port.name
            );
        }
        println!("eg      | {} example row(s)", split.eg.len());
        for row in &split.eg {
            println!(
                "        |   cycle {}: in={:?} out={:?}",
                row.cycle, row.inputs, row.outputs
            );
        }
        match &split.compose {
            Some(c) => println!("compose | top of [{}]", c.submodule_names.join(", ")),
            None => println!("compose | (not the top module)"),
        }
    }

    if let Some(top) = &spec.composition {
        println!("\ntop `{}` connects: {}", top.top_name, top.connection_desc);
    }
    Ok(())
}
