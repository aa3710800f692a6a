//! The correction half of the output manager: interface conformance against
//! the spec, example-driven machine feedback through an external
//! compile/simulate toolchain, and the human checkpoint.
//!
//! The machine interface between generated testbenches and the verdict
//! parser is a fixed line grammar on simulator output:
//! `TB_PASS` on success, `TB_FAIL cycle=<c> port=<p> expected=<e> got=<g>` on
//! the first mismatch, and `TB_DONE cycle=<c>` as the final-cycle marker the
//! cost stage reads latency from.

use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llmclient::Candidate;
use crate::metrics::changed_lines;
use crate::specdoc::{Direction, ModuleSpec, PortSpec};
use crate::toolchain::{self, run_command, substitute, ToolError, ToolchainConfig};

/// The first failing check in a simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub cycle: u64,
    pub port: String,
    pub expected: u64,
    pub got: u64,
}

/// Outcome of machine feedback for one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    CompileError { detail: String },
    SimMismatch { detail: String, mismatch: Mismatch },
    NeedsHuman { detail: String },
}

impl Verdict {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::CompileError { .. } => "compile_error",
            Verdict::SimMismatch { .. } => "sim_mismatch",
            Verdict::NeedsHuman { .. } => "needs_human",
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported module style: {0}")]
    UnsupportedStyle(String),
    #[error("module has no I/O examples")]
    NoExamples,
    #[error("candidate `{0}` rejected at human checkpoint")]
    CandidateRejected(String),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A port-level difference between a candidate's parsed header and the spec
/// interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub port: String,
    pub attr: Attr,
    pub expected: String,
    pub got: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attr {
    Presence,
    Direction,
    Width,
    ArraySize,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let attr = match self.attr {
            Attr::Presence => "presence",
            Attr::Direction => "direction",
            Attr::Width => "width",
            Attr::ArraySize => "array_size",
        };
        write!(
            f,
            "port `{}` {}: expected {}, got {}",
            self.port, attr, self.expected, self.got
        )
    }
}

/// Replaces comment content with spaces, preserving newlines so line numbers
/// survive.
fn strip_comments(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let mut chars = source.chars().peekable();
    let mut state = 0u8; // 0 = code, 1 = line comment, 2 = block comment
    while let Some(c) = chars.next() {
        match state {
            0 => {
                if c == '/' {
                    match chars.peek() {
                        Some('/') => {
                            chars.next();
                            out.push_str("  ");
                            state = 1;
                        }
                        Some('*') => {
                            chars.next();
                            out.push_str("  ");
                            state = 2;
                        }
                        _ => out.push(c),
                    }
                } else {
                    out.push(c);
                }
            }
            1 => {
                if c == '\n' {
                    out.push('\n');
                    state = 0;
                } else {
                    out.push(' ');
                }
            }
            _ => {
                if c == '*' && chars.peek() == Some(&'/') {
                    chars.next();
                    out.push_str("  ");
                    state = 0;
                } else if c == '\n' {
                    out.push('\n');
                } else {
                    out.push(' ');
                }
            }
        }
    }
    out
}

fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

static MODULE_KW_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bmodule\b").expect("module keyword regex"));
static IDENT_TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_$]*").expect("ident regex"));

const NET_TYPE_WORDS: [&str; 9] = [
    "wire", "reg", "logic", "var", "bit", "tri", "wand", "wor", "integer",
];

/// Parses the first ANSI-style module header in `source` into the module
/// name and its ports (descriptions empty). Packed ranges `[msb:lsb]` give
/// width `msb-lsb+1`; unpacked ranges `[lo:hi]` after the name give array
/// size `hi-lo+1`. Headers that declare ports without inline directions
/// (the non-ANSI style) are rejected as [`VerifyError::UnsupportedStyle`].
pub fn parse_module_header(source: &str) -> Result<(String, Vec<PortSpec>), VerifyError> {
    let text = strip_comments(source);
    let kw = MODULE_KW_RE.find(&text).ok_or_else(|| VerifyError::Parse {
        line: 1,
        message: "no module declaration found".into(),
    })?;
    let mut pos = kw.end();
    skip_ws(&text, &mut pos);
    let name = take_ident(&text, &mut pos).ok_or_else(|| VerifyError::Parse {
        line: line_of(&text, pos),
        message: "expected module name after `module`".into(),
    })?;
    skip_ws(&text, &mut pos);

    // Parameter list, skipped wholesale.
    if text[pos..].starts_with('#') {
        pos += 1;
        skip_ws(&text, &mut pos);
        if !text[pos..].starts_with('(') {
            return Err(VerifyError::Parse {
                line: line_of(&text, pos),
                message: "expected `(` after `#`".into(),
            });
        }
        pos = skip_balanced_parens(&text, pos).ok_or_else(|| VerifyError::Parse {
            line: line_of(&text, pos),
            message: "unbalanced parameter list".into(),
        })?;
        skip_ws(&text, &mut pos);
    }

    if text[pos..].starts_with(';') {
        // `module m;` with no port list at all.
        return Ok((name, Vec::new()));
    }
    if !text[pos..].starts_with('(') {
        return Err(VerifyError::Parse {
            line: line_of(&text, pos),
            message: "expected `(` opening the port list".into(),
        });
    }
    let close = skip_balanced_parens(&text, pos).ok_or_else(|| VerifyError::Parse {
        line: line_of(&text, pos),
        message: "unbalanced port list".into(),
    })?;
    let list_start = pos + 1;
    let list_text = &text[list_start..close - 1];

    let mut ports = Vec::new();
    let mut current_dir: Option<Direction> = None;
    if list_text.trim().is_empty() {
        return Ok((name, ports));
    }
    let mut offset = 0usize;
    for chunk in list_text.split(',') {
        let chunk_pos = list_start + offset;
        offset += chunk.len() + 1;
        let port = parse_port_chunk(chunk, &text, chunk_pos, &mut current_dir)?;
        if ports.iter().any(|p: &PortSpec| p.name == port.name) {
            return Err(VerifyError::Parse {
                line: line_of(&text, chunk_pos),
                message: format!("duplicate port name `{}`", port.name),
            });
        }
        ports.push(port);
    }
    Ok((name, ports))
}

fn parse_port_chunk(
    chunk: &str,
    full_text: &str,
    chunk_pos: usize,
    current_dir: &mut Option<Direction>,
) -> Result<PortSpec, VerifyError> {
    let err_at = |pos: usize, message: String| VerifyError::Parse {
        line: line_of(full_text, chunk_pos + pos),
        message,
    };

    let mut pos = 0usize;
    let text = chunk;
    skip_ws(text, &mut pos);

    let mut direction: Option<Direction> = None;
    let mut packed: Option<(u64, u64)> = None;
    let mut name: Option<String> = None;
    let mut unpacked: Option<(u64, u64)> = None;

    while pos < text.len() {
        skip_ws(text, &mut pos);
        if pos >= text.len() {
            break;
        }
        let token_pos = pos;
        if text[pos..].starts_with('[') {
            let (lo_hi, next) = parse_range(text, pos).map_err(|m| err_at(token_pos, m))?;
            pos = next;
            if name.is_none() {
                if packed.is_some() {
                    return Err(err_at(
                        token_pos,
                        "multi-dimensional packed ranges are not supported".into(),
                    ));
                }
                packed = Some(lo_hi);
            } else {
                if unpacked.is_some() {
                    return Err(err_at(
                        token_pos,
                        "multi-dimensional unpacked ranges are not supported".into(),
                    ));
                }
                unpacked = Some(lo_hi);
            }
            continue;
        }
        let Some(word) = take_ident(text, &mut pos) else {
            return Err(err_at(
                token_pos,
                format!(
                    "unexpected token near `{}`",
                    text[pos..].chars().take(12).collect::<String>()
                ),
            ));
        };
        if let Some(dir) = match word.as_str() {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        } {
            if name.is_some() {
                return Err(err_at(
                    token_pos,
                    "direction keyword after port name".into(),
                ));
            }
            direction = Some(dir);
            continue;
        }
        if name.is_none() && NET_TYPE_WORDS.contains(&word.as_str()) {
            continue;
        }
        if word == "signed" || word == "unsigned" {
            continue;
        }
        if name.is_some() {
            return Err(err_at(token_pos, format!("unexpected identifier `{word}`")));
        }
        name = Some(word);
    }

    let name = name.ok_or_else(|| err_at(0, "port chunk has no name".into()))?;
    let direction = match direction {
        Some(d) => {
            *current_dir = Some(d);
            d
        }
        None => current_dir.ok_or_else(|| {
            VerifyError::UnsupportedStyle(format!(
                "port `{name}` has no inline direction (non-ANSI header)"
            ))
        })?,
    };

    let width = match packed {
        None => 1,
        Some((msb, lsb)) => {
            if msb < lsb {
                return Err(err_at(
                    0,
                    format!("ascending packed range [{msb}:{lsb}] is not supported"),
                ));
            }
            u32::try_from(msb - lsb + 1).map_err(|_| err_at(0, "packed range too wide".into()))?
        }
    };
    let array_size = match unpacked {
        None => 1,
        Some((lo, hi)) => {
            if hi < lo {
                return Err(err_at(
                    0,
                    format!("descending unpacked range [{lo}:{hi}] is not supported"),
                ));
            }
            u32::try_from(hi - lo + 1).map_err(|_| err_at(0, "unpacked range too large".into()))?
        }
    };

    Ok(PortSpec {
        direction,
        width,
        name,
        array_size,
        description: String::new(),
    })
}

fn parse_range(text: &str, open: usize) -> Result<((u64, u64), usize), String> {
    let rest = &text[open..];
    let close_rel = rest
        .find(']')
        .ok_or_else(|| "unbalanced `[` in port range".to_string())?;
    let inner = &rest[1..close_rel];
    let parts: Vec<&str> = inner.split(':').collect();
    if parts.len() != 2 {
        return Err(format!("range `[{inner}]` must be `[a:b]`"));
    }
    let a = parts[0]
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("range bound `{}` is not a plain integer", parts[0].trim()))?;
    let b = parts[1]
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("range bound `{}` is not a plain integer", parts[1].trim()))?;
    Ok(((a, b), open + close_rel + 1))
}

fn skip_ws(text: &str, pos: &mut usize) {
    while *pos < text.len() {
        let c = text.as_bytes()[*pos];
        if c.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
}

fn take_ident(text: &str, pos: &mut usize) -> Option<String> {
    let m = IDENT_TOKEN_RE.find(&text[*pos..])?;
    let word = m.as_str().to_string();
    *pos += m.end();
    Some(word)
}

fn skip_balanced_parens(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Compares the candidate's parsed header ports against the spec interface as
/// sets keyed by name; empty means conformant. Each mismatched attribute of a
/// shared port yields one violation; ports on only one side yield presence
/// violations.
pub fn check_conformance(source: &str, iface: &[PortSpec]) -> Result<Vec<Violation>, VerifyError> {
    let (_, parsed) = parse_module_header(source)?;
    let mut violations = Vec::new();
    for want in iface {
        let Some(got) = parsed.iter().find(|p| p.name == want.name) else {
            violations.push(Violation {
                port: want.name.clone(),
                attr: Attr::Presence,
                expected: "present".into(),
                got: "missing".into(),
            });
            continue;
        };
        if got.direction != want.direction {
            violations.push(Violation {
                port: want.name.clone(),
                attr: Attr::Direction,
                expected: want.direction.to_string(),
                got: got.direction.to_string(),
            });
        }
        if got.width != want.width {
            violations.push(Violation {
                port: want.name.clone(),
                attr: Attr::Width,
                expected: want.width.to_string(),
                got: got.width.to_string(),
            });
        }
        if got.array_size != want.array_size {
            violations.push(Violation {
                port: want.name.clone(),
                attr: Attr::ArraySize,
                expected: want.array_size.to_string(),
                got: got.array_size.to_string(),
            });
        }
    }
    for extra in &parsed {
        if iface.iter().all(|p| p.name != extra.name) {
            violations.push(Violation {
                port: extra.name.clone(),
                attr: Attr::Presence,
                expected: "absent".into(),
                got: "present".into(),
            });
        }
    }
    Ok(violations)
}

/// Clock inputs get a generated two-time-unit clock; these names select them.
const CLOCK_NAMES: [&str; 2] = ["clk", "clock"];
/// Reset inputs are asserted for one lead-in cycle before cycle 0.
const RESET_NAMES: [&str; 2] = ["rst", "reset"];

fn is_clock(port: &PortSpec) -> bool {
    port.direction == Direction::Input && CLOCK_NAMES.contains(&port.name.as_str())
}

fn is_reset(port: &PortSpec) -> bool {
    port.direction == Direction::Input && RESET_NAMES.contains(&port.name.as_str())
}

fn decl_for(port: &PortSpec, kind: &str) -> String {
    let mut s = format!("  {kind} ");
    if port.width > 1 {
        s.push_str(&format!("[{}:0] ", port.width - 1));
    }
    s.push_str(&port.name);
    if port.array_size > 1 {
        s.push_str(&format!(" [0:{}]", port.array_size - 1));
    }
    s.push(';');
    s
}

fn element_slice(value: u64, index: u32, width: u32) -> u64 {
    let shift = index as u64 * width as u64;
    if shift >= 64 {
        return 0;
    }
    let shifted = value >> shift;
    if width >= 64 {
        shifted
    } else {
        shifted & ((1u64 << width) - 1)
    }
}

/// `#<delay>` text for a half-time-unit count.
fn delay_text(halves: u64) -> String {
    if halves.is_multiple_of(2) {
        format!("#{};", halves / 2)
    } else {
        format!("#{}.5;", halves / 2)
    }
}

fn flat_concat(port: &PortSpec) -> String {
    let parts: Vec<String> = (0..port.array_size)
        .rev()
        .map(|i| format!("{}[{i}]", port.name))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

/// Generates a self-checking testbench for `module` from its example table.
///
/// The testbench instantiates the module, generates a clock iff an input
/// named `clk`/`clock` exists, asserts any `rst`/`reset` input for one
/// lead-in cycle before cycle 0, applies each row's inputs at its cycle, and
/// samples outputs just before the rising clock edge of that cycle. It prints
/// `TB_PASS` when every row matches, `TB_FAIL cycle=<c> port=<p>
/// expected=<e> got=<g>` at the first mismatch, and a final `TB_DONE
/// cycle=<c>` marker before terminating. Clock and reset ports are driven by
/// the testbench itself and are never taken from example rows. Output is a
/// pure function of the module spec.
pub fn generate_testbench(module: &ModuleSpec) -> Result<String, VerifyError> {
    if module.examples.is_empty() {
        return Err(VerifyError::NoExamples);
    }
    let clock = module.ports.iter().find(|p| is_clock(p));
    let reset = module.ports.iter().find(|p| is_reset(p));
    let tb_managed = |p: &PortSpec| is_clock(p) || is_reset(p);

    let mut tb = String::new();
    tb.push_str("`timescale 1ns / 1ps\n\n");
    tb.push_str(&format!("// self-checking testbench for {}\n", module.name));
    tb.push_str("module tb;\n");

    for port in &module.ports {
        let kind = match port.direction {
            Direction::Input => "reg",
            Direction::Output | Direction::Inout => "wire",
        };
        tb.push_str(&decl_for(port, kind));
        tb.push('\n');
    }
    tb.push('\n');

    let connections: Vec<String> = module
        .ports
        .iter()
        .map(|p| format!("    .{}({})", p.name, p.name))
        .collect();
    tb.push_str(&format!(
        "  {} dut (\n{}\n  );\n\n",
        module.name,
        connections.join(",\n")
    ));

    if let Some(clk) = clock {
        tb.push_str(&format!("  initial {} = 1'b0;\n", clk.name));
        tb.push_str(&format!("  always #1 {0} = ~{0};\n\n", clk.name));
    }

    tb.push_str("  initial begin\n");
    let mut cursor = 0u64; // current time in half units

    // t = 0: assert reset, zero every row-driven input.
    if let Some(rst) = reset {
        tb.push_str(&format!("    {} = 1'b1;\n", rst.name));
    }
    for port in &module.ports {
        if port.direction != Direction::Input || tb_managed(port) {
            continue;
        }
        if port.array_size > 1 {
            for i in 0..port.array_size {
                tb.push_str(&format!("    {}[{i}] = 0;\n", port.name));
            }
        } else {
            tb.push_str(&format!("    {} = 0;\n", port.name));
        }
    }

    // t = 2 (4 half units): release reset; cycle 0 starts here.
    if let Some(rst) = reset {
        tb.push_str(&format!("    {} ", delay_text(4 - cursor)));
        cursor = 4;
        tb.push_str(&format!("{} = 1'b0;\n", rst.name));
    }

    let mut last_cycle = 0u64;
    for row in &module.examples {
        last_cycle = row.cycle;
        let input_at = 4 * (row.cycle + 1);
        if input_at > cursor {
            tb.push_str(&format!("    {}\n", delay_text(input_at - cursor)));
            cursor = input_at;
        }
        for (name, value) in &row.inputs {
            let Some(port) = module.port(name) else {
                continue;
            };
            if tb_managed(port) {
                continue;
            }
            let assign = |target: &str, v: u64| match port.direction {
                Direction::Inout => format!("    force {target} = {v};\n"),
                _ => format!("    {target} = {v};\n"),
            };
            if port.array_size > 1 {
                for i in 0..port.array_size {
                    let v = element_slice(*value, i, port.width);
                    tb.push_str(&assign(&format!("{name}[{i}]"), v));
                }
            } else {
                tb.push_str(&assign(name, *value));
            }
        }
        if !row.outputs.is_empty() {
            // Sample just before the rising edge of this cycle.
            tb.push_str(&format!("    {}\n", delay_text(1)));
            cursor += 1;
            for (name, value) in &row.outputs {
                let Some(port) = module.port(name) else {
                    continue;
                };
                let bits = port.total_bits().clamp(1, 64);
                let (expr, display_expr) = if port.array_size > 1 {
                    let concat = flat_concat(port);
                    (concat.clone(), concat)
                } else {
                    (name.clone(), name.clone())
                };
                tb.push_str(&format!(
                    "    if ({expr} !== {bits}'d{value}) begin\n      $display(\"TB_FAIL cycle={cycle} port={name} expected={value} got=%0d\", {display_expr});\n      $finish;\n    end\n",
                    cycle = row.cycle,
                ));
            }
        }
    }

    tb.push_str(&format!("    {}\n", delay_text(1)));
    tb.push_str("    $display(\"TB_PASS\");\n");
    tb.push_str(&format!("    $display(\"TB_DONE cycle={last_cycle}\");\n"));
    tb.push_str("    $finish;\n");
    tb.push_str("  end\nendmodule\n");
    Ok(tb)
}

static TB_FAIL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"TB_FAIL cycle=(\d+) port=(\S+) expected=(\d+) got=(\S+)").expect("TB_FAIL regex")
});

/// Parses a simulation log into a verdict fragment: a mismatch when a
/// `TB_FAIL` line is present, `Some(Pass)` on `TB_PASS`, `None` otherwise.
fn parse_sim_log(log: &str) -> Option<Verdict> {
    if let Some(caps) = TB_FAIL_RE.captures(log) {
        let line = caps
            .get(0)
            .map(|m| m.as_str().to_string())
            .unwrap_or_default();
        let mismatch = Mismatch {
            cycle: caps[1].parse().unwrap_or(0),
            port: caps[2].to_string(),
            expected: caps[3].parse().unwrap_or(0),
            // `got` may print as x/z when the net is undriven.
            got: caps[4].parse().unwrap_or(0),
        };
        return Some(Verdict::SimMismatch {
            detail: line,
            mismatch,
        });
    }
    if log.lines().any(|l| l.trim() == "TB_PASS") {
        return Some(Verdict::Pass);
    }
    None
}

fn log_tail(text: &str, max_bytes: usize) -> String {
    if text.len() <= max_bytes {
        return text.to_string();
    }
    let mut start = text.len() - max_bytes;
    while start < text.len() && !text.is_char_boundary(start) {
        start += 1;
    }
    format!("…{}", &text[start..])
}

/// Runs the correction pipeline for one candidate in `work_dir`:
/// interface conformance, then the compile command, then the simulate
/// command on a generated testbench. The first failure determines the
/// verdict; `Pass` requires conformance plus a `TB_PASS` line from the
/// simulator. Modules without examples go straight to `NeedsHuman` — machine
/// feedback has nothing to check them against. Tool faults (timeout, missing
/// executable) are errors, not verdicts.
///
/// Scratch layout inside `work_dir`: `design.v`, `tb.v`, `compile.log`,
/// `sim.log`.
pub fn machine_correct(
    candidate: &Candidate,
    module: &ModuleSpec,
    config: &ToolchainConfig,
    work_dir: &Path,
) -> Result<Verdict, VerifyError> {
    config.validate()?;
    if module.examples.is_empty() {
        return Ok(Verdict::NeedsHuman {
            detail: "module has no I/O examples; machine feedback cannot check it".into(),
        });
    }

    match check_conformance(&candidate.source, &module.ports) {
        Ok(violations) if violations.is_empty() => {}
        Ok(violations) => {
            let listing: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Ok(Verdict::CompileError {
                detail: format!("interface conformance failed:\n{}", listing.join("\n")),
            });
        }
        Err(e @ (VerifyError::Parse { .. } | VerifyError::UnsupportedStyle(_))) => {
            return Ok(Verdict::CompileError {
                detail: format!("interface header unparseable: {e}"),
            });
        }
        Err(e) => return Err(e),
    }

    fs::create_dir_all(work_dir)?;
    let design_path = work_dir.join("design.v");
    let tb_path = work_dir.join("tb.v");
    fs::write(&design_path, &candidate.source)?;
    fs::write(&tb_path, generate_testbench(module)?)?;

    let work = work_dir.to_string_lossy().into_owned();
    let design = design_path.to_string_lossy().into_owned();
    let tb = tb_path.to_string_lossy().into_owned();

    let compile_cmd = substitute(
        &config.compile_cmd,
        &[
            ("input", design.as_str()),
            ("testbench", tb.as_str()),
            ("top", module.name.as_str()),
            ("outdir", work.as_str()),
        ],
    );
    let compiled = run_command(&compile_cmd, config.timeout())?;
    fs::write(work_dir.join("compile.log"), compiled.combined())?;
    if !compiled.success() {
        return Ok(Verdict::CompileError {
            detail: log_tail(&compiled.combined(), 4000),
        });
    }

    let sim_image = work_dir
        .join(toolchain::SIM_IMAGE_NAME)
        .to_string_lossy()
        .into_owned();
    let sim_cmd = substitute(
        &config.simulate_cmd,
        &[
            ("input", sim_image.as_str()),
            ("testbench", tb.as_str()),
            ("top", module.name.as_str()),
            ("outdir", work.as_str()),
        ],
    );
    let simulated = run_command(&sim_cmd, config.timeout())?;
    let sim_log = simulated.combined();
    fs::write(work_dir.join("sim.log"), &sim_log)?;

    match parse_sim_log(&sim_log) {
        Some(verdict) => Ok(verdict),
        None => Ok(Verdict::CompileError {
            detail: format!(
                "simulation produced neither TB_PASS nor TB_FAIL (exit {}):\n{}",
                simulated.status,
                log_tail(&sim_log, 2000)
            ),
        }),
    }
}

/// What a reviewer decided about one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointDecision {
    /// Keep the candidate; the review file (possibly edited in place) is the
    /// new source.
    Accept,
    /// Drop the candidate from the program list.
    Reject,
}

/// The interactive seam of the human checkpoint.
pub trait Reviewer {
    fn review(&mut self, candidate_id: &str, file: &Path) -> std::io::Result<CheckpointDecision>;
}

/// Prompts on stdin: writes the candidate path, then reads
/// `a`ccept / `e`dited / `r`eject (accept and edited both re-read the file;
/// edits are detected by diffing).
pub struct StdinReviewer;

impl Reviewer for StdinReviewer {
    fn review(&mut self, candidate_id: &str, file: &Path) -> std::io::Result<CheckpointDecision> {
        use std::io::{BufRead, Write};
        let stdout = std::io::stdout();
        let stdin = std::io::stdin();
        loop {
            {
                let mut out = stdout.lock();
                writeln!(
                    out,
                    "review candidate {candidate_id}: edit {} as needed, then type a(ccept), e(dited), or r(eject)",
                    file.display()
                )?;
                out.flush()?;
            }
            let mut line = String::new();
            if stdin.lock().read_line(&mut line)? == 0 {
                return Ok(CheckpointDecision::Reject);
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "a" | "accept" | "e" | "edited" => return Ok(CheckpointDecision::Accept),
                "r" | "reject" => return Ok(CheckpointDecision::Reject),
                _ => {}
            }
        }
    }
}

/// The human half of the correction chain: writes the candidate source to an
/// editable file under `<run_dir>/review/`, waits for the reviewer's
/// decision, and folds any edits back into the candidate, adding the number
/// of changed lines to `correction_loc`. Rejection surfaces as
/// [`VerifyError::CandidateRejected`].
pub fn human_checkpoint(
    candidate: &Candidate,
    run_dir: &Path,
    reviewer: &mut dyn Reviewer,
) -> Result<Candidate, VerifyError> {
    let review_dir = run_dir.join("review");
    fs::create_dir_all(&review_dir)?;
    let file = review_dir.join(format!("{}.v", candidate.id));
    fs::write(&file, &candidate.source)?;

    match reviewer.review(&candidate.id, &file)? {
        CheckpointDecision::Reject => Err(VerifyError::CandidateRejected(candidate.id.clone())),
        CheckpointDecision::Accept => {
            let edited = fs::read_to_string(&file)?;
            let delta = changed_lines(&candidate.source, &edited);
            let mut updated = candidate.clone();
            updated.source = edited;
            updated.correction_loc += delta;
            Ok(updated)
        }
    }
}
