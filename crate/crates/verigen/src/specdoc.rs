//! Structured specification documents: parsing, validation, and the
//! per-module split into examples, interface, function text, and composition.
//!
//! The on-disk format is TOML: a `[design]` table, one `[[module]]` table per
//! module (with nested `[[module.port]]` and `[[module.example]]` arrays), and
//! an optional `[top]` table naming the composition. Unknown top-level
//! sections are discarded with a warning.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static IDENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_]\w*$").expect("identifier regex"));

/// Returns true when `name` is a legal (non-escaped) Verilog identifier.
pub fn is_legal_identifier(name: &str) -> bool {
    IDENT_RE.is_match(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// One port of a module interface: direction, bit width, name, element count
/// for array ports (1 = scalar), and a free-text description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub direction: Direction,
    pub width: u32,
    pub name: String,
    pub array_size: u32,
    pub description: String,
}

impl PortSpec {
    pub fn new(direction: Direction, width: u32, name: impl Into<String>) -> Self {
        PortSpec {
            direction,
            width,
            name: name.into(),
            array_size: 1,
            description: String::new(),
        }
    }

    pub fn with_array(mut self, array_size: u32) -> Self {
        self.array_size = array_size;
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    /// Total number of bits a value for this port may occupy.
    pub fn total_bits(&self) -> u64 {
        self.width as u64 * self.array_size as u64
    }
}

/// One row of an I/O example table: input and output values observed in a
/// single clock cycle. Maps are ordered by port name so derived artifacts
/// (testbenches, digests) are deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub cycle: u64,
    pub inputs: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub name: String,
    pub function_desc: String,
    pub ports: Vec<PortSpec>,
    pub examples: Vec<ExampleRow>,
    pub addition: Option<String>,
}

impl ModuleSpec {
    pub fn port(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }
}

/// How submodules combine into a top-level module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub top_name: String,
    pub submodule_names: Vec<String>,
    pub connection_desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design_name: String,
    pub modules: Vec<ModuleSpec>,
    pub composition: Option<CompositionSpec>,
}

impl DesignSpec {
    pub fn module(&self, name: &str) -> Option<&ModuleSpec> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Name of the top module when a composition is declared.
    pub fn top_name(&self) -> Option<&str> {
        self.composition.as_ref().map(|c| c.top_name.as_str())
    }
}

/// The four partitions of one module's specification: example rows, interface
/// ports, function text, and (for the top module only) the composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub eg: Vec<ExampleRow>,
    pub iface: Vec<PortSpec>,
    pub func: String,
    pub compose: Option<CompositionSpec>,
}

/// A broken invariant reported by [`validate_spec`]. Violations are values,
/// not failures: validation always runs to completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub module: String,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}: {}", self.module, self.field, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
}

/// Sections the document grammar defines; anything else at top level is
/// discarded (with a warning), never an error.
const KNOWN_SECTIONS: [&str; 3] = ["design", "module", "top"];

/// Parses a specification document into a [`DesignSpec`].
///
/// Structural problems are reported as [`SpecError::Syntax`] (malformed TOML),
/// [`SpecError::Schema`] (missing or mistyped fields), or
/// [`SpecError::Reference`] (composition naming an undeclared module).
/// Semantic invariants such as duplicate port names or example values that
/// overflow a port are left to [`validate_spec`].
pub fn parse_spec(text: &str) -> Result<DesignSpec, SpecError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(1);
        SpecError::Syntax {
            line,
            message: e.message().to_string(),
        }
    })?;

    for key in table.keys() {
        if !KNOWN_SECTIONS.contains(&key.as_str()) {
            log::warn!("discarding extraneous specification section [{key}]");
        }
    }

    let design = table
        .get("design")
        .ok_or_else(|| SpecError::Schema("missing [design] section".into()))?;
    let design_name = require_str(design, "design", "name")?;
    require_identifier("design", "name", &design_name)?;

    let module_items = match table.get("module") {
        Some(toml::Value::Array(items)) => items.as_slice(),
        Some(_) => {
            return Err(SpecError::Schema(
                "[[module]] must be an array of tables".into(),
            ))
        }
        None => &[],
    };
    if module_items.is_empty() {
        return Err(SpecError::Schema(
            "specification declares no [[module]] sections".into(),
        ));
    }

    let mut modules = Vec::with_capacity(module_items.len());
    for item in module_items {
        modules.push(parse_module(item)?);
    }

    let composition = match table.get("top") {
        None => None,
        Some(top) => Some(parse_top(top, &modules)?),
    };

    Ok(DesignSpec {
        design_name,
        modules,
        composition,
    })
}

fn parse_module(value: &toml::Value) -> Result<ModuleSpec, SpecError> {
    let name = require_str(value, "module", "name")?;
    require_identifier("module", "name", &name)?;
    let ctx = format!("module `{name}`");
    let function_desc = require_str(value, &ctx, "function")?;
    let addition = optional_str(value, &ctx, "addition")?.filter(|s| !s.trim().is_empty());

    let mut ports = Vec::new();
    if let Some(items) = value.get("port") {
        let items = items
            .as_array()
            .ok_or_else(|| SpecError::Schema(format!("{ctx}: port must be an array of tables")))?;
        for item in items {
            ports.push(parse_port(item, &ctx)?);
        }
    }
    if ports.is_empty() {
        return Err(SpecError::Schema(format!(
            "{ctx}: at least one [[module.port]] is required"
        )));
    }

    let mut examples = Vec::new();
    if let Some(items) = value.get("example") {
        let items = items.as_array().ok_or_else(|| {
            SpecError::Schema(format!("{ctx}: example must be an array of tables"))
        })?;
        for item in items {
            examples.push(parse_example(item, &ctx)?);
        }
    }

    Ok(ModuleSpec {
        name,
        function_desc,
        ports,
        examples,
        addition,
    })
}

fn parse_port(value: &toml::Value, ctx: &str) -> Result<PortSpec, SpecError> {
    let name = require_str(value, &format!("{ctx} port"), "name")?;
    let pctx = format!("{ctx} port `{name}`");
    require_identifier(&pctx, "name", &name)?;
    let direction_raw = require_str(value, &pctx, "direction")?;
    let direction = Direction::from_keyword(&direction_raw).ok_or_else(|| {
        SpecError::Schema(format!(
            "{pctx}: direction must be input, output, or inout (got `{direction_raw}`)"
        ))
    })?;
    let width = optional_positive_int(value, &pctx, "width")?.unwrap_or(1);
    let array_size = optional_positive_int(value, &pctx, "array_size")?.unwrap_or(1);
    let description = optional_str(value, &pctx, "description")?.unwrap_or_default();
    Ok(PortSpec {
        direction,
        width,
        name,
        array_size,
        description,
    })
}

fn parse_example(value: &toml::Value, ctx: &str) -> Result<ExampleRow, SpecError> {
    let cycle = match value.get("cycle") {
        Some(toml::Value::Integer(n)) if *n >= 0 => *n as u64,
        Some(toml::Value::Integer(_)) => {
            return Err(SpecError::Schema(format!(
                "{ctx} example: cycle must be non-negative"
            )))
        }
        _ => {
            return Err(SpecError::Schema(format!(
                "{ctx} example: missing integer field `cycle`"
            )))
        }
    };
    let inputs = parse_value_map(value, ctx, "inputs")?;
    let outputs = parse_value_map(value, ctx, "outputs")?;
    Ok(ExampleRow {
        cycle,
        inputs,
        outputs,
    })
}

fn parse_value_map(
    value: &toml::Value,
    ctx: &str,
    field: &str,
) -> Result<BTreeMap<String, u64>, SpecError> {
    let table = match value.get(field) {
        Some(toml::Value::Table(t)) => t,
        Some(_) => {
            return Err(SpecError::Schema(format!(
                "{ctx} example: `{field}` must be a table of port values"
            )))
        }
        None => {
            return Err(SpecError::Schema(format!(
                "{ctx} example: missing `{field}` table"
            )))
        }
    };
    let mut map = BTreeMap::new();
    for (port, v) in table {
        let n = v.as_integer().ok_or_else(|| {
            SpecError::Schema(format!(
                "{ctx} example: value for `{port}` must be an integer"
            ))
        })?;
        if n < 0 {
            return Err(SpecError::Schema(format!(
                "{ctx} example: value for `{port}` must be unsigned"
            )));
        }
        map.insert(port.clone(), n as u64);
    }
    Ok(map)
}

fn parse_top(value: &toml::Value, modules: &[ModuleSpec]) -> Result<CompositionSpec, SpecError> {
    let top_name = require_str(value, "top", "name")?;
    require_identifier("top", "name", &top_name)?;
    let subs = match value.get("submodules") {
        Some(toml::Value::Array(items)) => items,
        _ => return Err(SpecError::Schema("top: missing `submodules` array".into())),
    };
    if subs.is_empty() {
        return Err(SpecError::Schema(
            "top: `submodules` must be non-empty".into(),
        ));
    }
    let mut submodule_names = Vec::with_capacity(subs.len());
    for sub in subs {
        let name = sub
            .as_str()
            .ok_or_else(|| SpecError::Schema("top: submodule names must be strings".into()))?;
        if modules.iter().all(|m| m.name != name) {
            return Err(SpecError::Reference(format!(
                "top module `{top_name}` references undeclared submodule `{name}`"
            )));
        }
        submodule_names.push(name.to_string());
    }
    let connection_desc = optional_str(value, "top", "connection")?.unwrap_or_default();
    Ok(CompositionSpec {
        top_name,
        submodule_names,
        connection_desc,
    })
}

fn require_str(value: &toml::Value, ctx: &str, field: &str) -> Result<String, SpecError> {
    match value.get(field) {
        Some(toml::Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(SpecError::Schema(format!(
            "{ctx}: `{field}` must be a string"
        ))),
        None => Err(SpecError::Schema(format!("{ctx}: missing field `{field}`"))),
    }
}

fn optional_str(value: &toml::Value, ctx: &str, field: &str) -> Result<Option<String>, SpecError> {
    match value.get(field) {
        Some(toml::Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(SpecError::Schema(format!(
            "{ctx}: `{field}` must be a string"
        ))),
        None => Ok(None),
    }
}

fn optional_positive_int(
    value: &toml::Value,
    ctx: &str,
    field: &str,
) -> Result<Option<u32>, SpecError> {
    match value.get(field) {
        Some(toml::Value::Integer(n)) if *n >= 1 && *n <= u32::MAX as i64 => Ok(Some(*n as u32)),
        Some(toml::Value::Integer(n)) => Err(SpecError::Schema(format!(
            "{ctx}: `{field}` must be a positive integer (got {n})"
        ))),
        Some(_) => Err(SpecError::Schema(format!(
            "{ctx}: `{field}` must be an integer"
        ))),
        None => Ok(None),
    }
}

fn require_identifier(ctx: &str, field: &str, name: &str) -> Result<(), SpecError> {
    if is_legal_identifier(name) {
        Ok(())
    } else {
        Err(SpecError::Schema(format!(
            "{ctx}: `{field}` value `{name}` is not a legal Verilog identifier"
        )))
    }
}

/// Projects one module out of the design: its examples, ports, and function
/// text, plus the design composition when `module_name` is the top module.
pub fn split_spec(spec: &DesignSpec, module_name: &str) -> Result<SplitSpec, SpecError> {
    let module = spec
        .module(module_name)
        .ok_or_else(|| SpecError::UnknownModule(module_name.to_string()))?;
    let compose = spec
        .composition
        .as_ref()
        .filter(|c| c.top_name == module_name)
        .cloned();
    Ok(SplitSpec {
        eg: module.examples.clone(),
        iface: module.ports.clone(),
        func: module.function_desc.clone(),
        compose,
    })
}

/// Checks every domain invariant and returns the violations found (empty when
/// the spec is sound). Parse-produced and programmatically built specs go
/// through the same checks.
pub fn validate_spec(spec: &DesignSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_modules = HashSet::new();
    for module in &spec.modules {
        if !seen_modules.insert(module.name.as_str()) {
            out.push(Violation {
                module: module.name.clone(),
                field: "name".into(),
                reason: "duplicate module name".into(),
            });
        }
        validate_module(module, &mut out);
    }
    if let Some(comp) = &spec.composition {
        for sub in &comp.submodule_names {
            if spec.module(sub).is_none() {
                out.push(Violation {
                    module: comp.top_name.clone(),
                    field: "submodules".into(),
                    reason: format!("undeclared submodule `{sub}`"),
                });
            }
        }
        if comp.submodule_names.is_empty() {
            out.push(Violation {
                module: comp.top_name.clone(),
                field: "submodules".into(),
                reason: "composition lists no submodules".into(),
            });
        }
        if comp.submodule_names.contains(&comp.top_name) {
            out.push(Violation {
                module: comp.top_name.clone(),
                field: "submodules".into(),
                reason: "top module lists itself as a submodule".into(),
            });
        }
    }
    out
}

fn validate_module(module: &ModuleSpec, out: &mut Vec<Violation>) {
    let push = |out: &mut Vec<Violation>, field: &str, reason: String| {
        out.push(Violation {
            module: module.name.clone(),
            field: field.into(),
            reason,
        });
    };

    if !is_legal_identifier(&module.name) {
        push(
            out,
            "name",
            format!("`{}` is not a legal identifier", module.name),
        );
    }
    if module.function_desc.trim().is_empty() {
        push(out, "function", "function description is empty".into());
    }
    if module.ports.is_empty() {
        push(out, "ports", "module declares no ports".into());
    }

    let mut seen_ports = HashSet::new();
    for port in &module.ports {
        if !seen_ports.insert(port.name.as_str()) {
            push(out, "ports", format!("duplicate name `{}`", port.name));
        }
        if !is_legal_identifier(&port.name) {
            push(
                out,
                "ports",
                format!("`{}` is not a legal identifier", port.name),
            );
        }
        if port.width < 1 {
            push(out, "ports", format!("port `{}` has width 0", port.name));
        }
        if port.array_size < 1 {
            push(
                out,
                "ports",
                format!("port `{}` has array_size 0", port.name),
            );
        }
    }

    let mut last_cycle: Option<u64> = None;
    for (idx, row) in module.examples.iter().enumerate() {
        if let Some(prev) = last_cycle {
            if row.cycle <= prev {
                push(
                    out,
                    "examples",
                    format!(
                        "row {idx}: cycle {} does not increase past {prev}",
                        row.cycle
                    ),
                );
            }
        }
        last_cycle = Some(row.cycle);
        validate_row_map(module, &row.inputs, idx, true, out, &push);
        validate_row_map(module, &row.outputs, idx, false, out, &push);
    }
}

fn validate_row_map(
    module: &ModuleSpec,
    map: &BTreeMap<String, u64>,
    row_idx: usize,
    is_input: bool,
    out: &mut Vec<Violation>,
    push: &impl Fn(&mut Vec<Violation>, &str, String),
) {
    let side = if is_input { "inputs" } else { "outputs" };
    for (name, value) in map {
        let Some(port) = module.port(name) else {
            push(
                out,
                "examples",
                format!("row {row_idx} {side}: `{name}` is not a declared port"),
            );
            continue;
        };
        let direction_ok = match port.direction {
            Direction::Input => is_input,
            Direction::Output => !is_input,
            Direction::Inout => true,
        };
        if !direction_ok {
            push(
                out,
                "examples",
                format!(
                    "row {row_idx} {side}: port `{name}` has direction {}",
                    port.direction
                ),
            );
        }
        let bits = port.total_bits();
        if bits < 64 && *value >= 1u64 << bits {
            push(
                out,
                "examples",
                format!("row {row_idx} {side}: value {value} exceeds {bits}-bit port `{name}`"),
            );
        }
    }
}

/// Writes a [`DesignSpec`] back out in the document grammar. Round-trips
/// through [`parse_spec`] exactly; used as the fixture writer in tests and by
/// anything that produces spec documents programmatically.
pub fn render_document(spec: &DesignSpec) -> String {
    let mut out = String::new();
    out.push_str("[design]\n");
    out.push_str(&format!("name = {}\n", toml_string(&spec.design_name)));
    for module in &spec.modules {
        out.push_str("\n[[module]]\n");
        out.push_str(&format!("name = {}\n", toml_string(&module.name)));
        out.push_str(&format!(
            "function = {}\n",
            toml_string(&module.function_desc)
        ));
        if let Some(addition) = &module.addition {
            out.push_str(&format!("addition = {}\n", toml_string(addition)));
        }
        for port in &module.ports {
            out.push_str("\n[[module.port]]\n");
            out.push_str(&format!("direction = \"{}\"\n", port.direction.keyword()));
            out.push_str(&format!("width = {}\n", port.width));
            out.push_str(&format!("name = {}\n", toml_string(&port.name)));
            if port.array_size != 1 {
                out.push_str(&format!("array_size = {}\n", port.array_size));
            }
            if !port.description.is_empty() {
                out.push_str(&format!(
                    "description = {}\n",
                    toml_string(&port.description)
                ));
            }
        }
        for row in &module.examples {
            out.push_str("\n[[module.example]]\n");
            out.push_str(&format!("cycle = {}\n", row.cycle));
            out.push_str(&format!("inputs = {}\n", inline_value_table(&row.inputs)));
            out.push_str(&format!("outputs = {}\n", inline_value_table(&row.outputs)));
        }
    }
    if let Some(comp) = &spec.composition {
        out.push_str("\n[top]\n");
        out.push_str(&format!("name = {}\n", toml_string(&comp.top_name)));
        let subs: Vec<String> = comp
            .submodule_names
            .iter()
            .map(|s| toml_string(s))
            .collect();
        out.push_str(&format!("submodules = [{}]\n", subs.join(", ")));
        if !comp.connection_desc.is_empty() {
            out.push_str(&format!(
                "connection = {}\n",
                toml_string(&comp.connection_desc)
            ));
        }
    }
    out
}

fn inline_value_table(map: &BTreeMap<String, u64>) -> String {
    let entries: Vec<String> = map.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    if entries.is_empty() {
        "{}".to_string()
    } else {
        format!("{{ {} }}", entries.join(", "))
    }
}

/// A TOML basic string literal for `s`, escaping as the grammar requires.
fn toml_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04X}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MUX_DOC: &str = r#"
[design]
name = "mux_design"

[[module]]
name = "mux"
function = "A 2x1 multiplexer."

[[module.port]]
direction = "input"
width = 1
name = "a"

[[module.port]]
direction = "input"
width = 1
name = "sel"

[[module.port]]
direction = "output"
width = 1
name = "y"
"#;

    fn two_module_doc() -> String {
        r#"
[design]
name = "complex_design"

[[module]]
name = "add"
function = "Adds the two operands."

[[module.port]]
direction = "input"
width = 8
name = "a"

[[module.port]]
direction = "input"
width = 8
name = "b"

[[module.port]]
direction = "output"
width = 8
name = "sum"

[[module]]
name = "minus"
function = "Subtracts the second operand from the first."

[[module.port]]
direction = "input"
width = 8
name = "a"

[[module.port]]
direction = "input"
width = 8
name = "b"

[[module.port]]
direction = "output"
width = 8
name = "diff"

[top]
name = "complex"
submodules = ["add", "minus"]
connection = "Feed both inputs to each submodule and expose both results."
"#
        .to_string()
    }

    #[test]
    fn parses_minimal_document() {
        let spec = parse_spec(MUX_DOC).unwrap();
        assert_eq!(spec.design_name, "mux_design");
        assert_eq!(spec.modules.len(), 1);
        assert!(spec.composition.is_none());
        let mux = &spec.modules[0];
        assert_eq!(mux.name, "mux");
        assert_eq!(mux.ports.len(), 3);
        assert!(mux.examples.is_empty());
        assert_eq!(mux.ports[0].width, 1);
        assert_eq!(mux.ports[0].array_size, 1);
    }

    #[test]
    fn parses_composition_document() {
        let spec = parse_spec(&two_module_doc()).unwrap();
        let comp = spec.composition.as_ref().unwrap();
        assert_eq!(comp.top_name, "complex");
        assert_eq!(comp.submodule_names, vec!["add", "minus"]);
        assert_eq!(spec.modules.len(), 2);
    }

    #[test]
    fn undeclared_submodule_is_reference_error() {
        let doc = two_module_doc().replace("\"add\", \"minus\"", "\"add\", \"mul\"");
        match parse_spec(&doc) {
            Err(SpecError::Reference(msg)) => assert!(msg.contains("mul")),
            other => panic!("expected ReferenceError, got {other:?}"),
        }
    }

    #[test]
    fn malformed_toml_reports_line() {
        let doc = "[design]\nname = \"x\"\n[[module]\nname = \"m\"\n";
        match parse_spec(doc) {
            Err(SpecError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected SyntaxError, got {other:?}"),
        }
    }

    #[test]
    fn zero_modules_is_schema_error() {
        let doc = "[design]\nname = \"empty\"\n";
        match parse_spec(doc) {
            Err(SpecError::Schema(msg)) => assert!(msg.contains("module")),
            other => panic!("expected SchemaError, got {other:?}"),
        }
    }

    #[test]
    fn extraneous_sections_are_discarded() {
        let doc = format!("{MUX_DOC}\n[revision_history]\nauthor = \"nobody\"\n");
        let spec = parse_spec(&doc).unwrap();
        assert_eq!(spec.modules.len(), 1);
    }

    #[test]
    fn hex_example_values_accepted() {
        let doc = r#"
[design]
name = "d"

[[module]]
name = "m"
function = "f"

[[module.port]]
direction = "input"
width = 8
name = "a"

[[module.port]]
direction = "output"
width = 8
name = "y"

[[module.example]]
cycle = 0
inputs = { a = 0xff }
outputs = { y = 255 }
"#;
        let spec = parse_spec(doc).unwrap();
        assert_eq!(spec.modules[0].examples[0].inputs["a"], 255);
    }

    #[test]
    fn split_projects_function_text_verbatim() {
        let doc = r#"
[design]
name = "button"

[[module]]
name = "button_count"
function = "Counts the number of button presses"

[[module.port]]
direction = "input"
width = 1
name = "btn"

[[module.port]]
direction = "output"
width = 8
name = "count"
"#;
        let spec = parse_spec(doc).unwrap();
        let split = split_spec(&spec, "button_count").unwrap();
        assert_eq!(split.func, "Counts the number of button presses");
        assert!(split.eg.is_empty());
        assert!(split.compose.is_none());
        assert_eq!(split.iface.len(), 2);
    }

    #[test]
    fn split_attaches_composition_to_top_only() {
        let spec = parse_spec(&two_module_doc()).unwrap();
        let add = split_spec(&spec, "add").unwrap();
        assert!(add.compose.is_none());
        // "complex" is not a declared module in this document.
        match split_spec(&spec, "complex") {
            Err(SpecError::UnknownModule(name)) => assert_eq!(name, "complex"),
            other => panic!("expected UnknownModule, got {other:?}"),
        }
    }

    #[test]
    fn split_on_declared_top_includes_composition() {
        let mut spec = parse_spec(&two_module_doc()).unwrap();
        spec.modules.push(ModuleSpec {
            name: "complex".into(),
            function_desc: "Combines add and minus.".into(),
            ports: vec![PortSpec::new(Direction::Input, 8, "a")],
            examples: vec![],
            addition: None,
        });
        let split = split_spec(&spec, "complex").unwrap();
        let comp = split.compose.unwrap();
        assert_eq!(comp.submodule_names.len(), 2);
    }

    #[test]
    fn validate_accepts_valid_fixture() {
        let spec = parse_spec(&two_module_doc()).unwrap();
        assert_eq!(validate_spec(&spec), vec![]);
    }

    #[test]
    fn validate_flags_value_exceeding_width() {
        let mut spec = parse_spec(MUX_DOC).unwrap();
        spec.modules[0].ports[0].width = 8;
        spec.modules[0].examples.push(ExampleRow {
            cycle: 0,
            inputs: BTreeMap::from([("a".to_string(), 300u64)]),
            outputs: BTreeMap::new(),
        });
        let violations = validate_spec(&spec);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "examples");
        assert!(violations[0].reason.contains("exceeds"));
    }

    #[test]
    fn validate_flags_duplicate_port_name() {
        let mut spec = parse_spec(MUX_DOC).unwrap();
        spec.modules[0]
            .ports
            .push(PortSpec::new(Direction::Input, 1, "a"));
        let violations = validate_spec(&spec);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "ports");
        assert!(violations[0].reason.contains("duplicate"));
    }

    #[test]
    fn validate_flags_non_increasing_cycles() {
        let mut spec = parse_spec(MUX_DOC).unwrap();
        for cycle in [2, 2] {
            spec.modules[0].examples.push(ExampleRow {
                cycle,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            });
        }
        let violations = validate_spec(&spec);
        assert!(violations.iter().any(|v| v.reason.contains("increase")));
    }

    #[test]
    fn validate_flags_wrong_direction_in_example() {
        let mut spec = parse_spec(MUX_DOC).unwrap();
        spec.modules[0].examples.push(ExampleRow {
            cycle: 0,
            inputs: BTreeMap::from([("y".to_string(), 0u64)]),
            outputs: BTreeMap::new(),
        });
        let violations = validate_spec(&spec);
        assert!(violations.iter().any(|v| v.reason.contains("direction")));
    }

    #[test]
    fn render_parse_round_trip_on_fixture() {
        let spec = parse_spec(&two_module_doc()).unwrap();
        let rendered = render_document(&spec);
        let reparsed = parse_spec(&rendered).unwrap();
        assert_eq!(spec, reparsed);
    }

    #[test]
    fn partition_counts_reconstruct_the_module() {
        let doc = r#"
[design]
name = "d"

[[module]]
name = "m"
function = "f"
addition = "ready/valid handshake"

[[module.port]]
direction = "input"
width = 4
name = "a"

[[module.port]]
direction = "output"
width = 4
name = "y"

[[module.example]]
cycle = 0
inputs = { a = 3 }
outputs = { y = 3 }

[[module.example]]
cycle = 1
inputs = { a = 5 }
outputs = { y = 5 }
"#;
        let spec = parse_spec(doc).unwrap();
        let module = &spec.modules[0];
        let split = split_spec(&spec, "m").unwrap();
        // Every declared element lands in exactly one partition.
        assert_eq!(split.eg.len(), module.examples.len());
        assert_eq!(split.iface.len(), module.ports.len());
        assert_eq!(split.func, module.function_desc);
        assert!(!split.compose.is_some());
    }
}
