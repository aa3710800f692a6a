//! Prompt sequence construction.
//!
//! A design spec is serialized into an ordered dialogue: one setup query,
//! then one body query per submodule (function text merged with the full
//! interface declaration), additions strictly after the body they extend,
//! and the composition query last, with every submodule interface re-declared
//! inline so the top module is generated bottom-up.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llmclient::Candidate;
use crate::specdoc::{validate_spec, DesignSpec, ModuleSpec, PortSpec, SpecError};
use crate::verify::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Setup,
    ModuleBody,
    Addition,
    Compose,
    Repair,
    Rank,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryKind::Setup => "setup",
            QueryKind::ModuleBody => "module_body",
            QueryKind::Addition => "addition",
            QueryKind::Compose => "compose",
            QueryKind::Repair => "repair",
            QueryKind::Rank => "rank",
        };
        f.write_str(s)
    }
}

/// One prompt to send. `subject` names the module a body/addition/compose
/// query is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub kind: QueryKind,
    pub text: String,
    pub subject: Option<String>,
}

impl Query {
    pub fn new(kind: QueryKind, text: impl Into<String>, subject: Option<String>) -> Self {
        Query {
            kind,
            text: text.into(),
            subject,
        }
    }
}

/// The ordered queries for one design: setup first, bodies before their
/// additions, everything before the compose query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSequence {
    pub queries: Vec<Query>,
}

impl PromptSequence {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Stable content digest, used as candidate provenance.
    pub fn digest(&self) -> String {
        let canonical: Vec<(String, Option<&str>, &str)> = self
            .queries
            .iter()
            .map(|q| (q.kind.to_string(), q.subject.as_deref(), q.text.as_str()))
            .collect();
        let bytes = serde_json::to_vec(&canonical).expect("prompt sequence serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("interface has no ports")]
    EmptyInterface,
    #[error("verdict is not repairable")]
    NotRepairable,
    #[error("ranking needs at least two candidates (got {0})")]
    TooFewCandidates(usize),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// The six prompt templates. Defaults are embedded; any file of the same name
/// in an override directory replaces the embedded text. Placeholders are
/// written `{name}`; unknown braces are left untouched.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub setup: String,
    pub module_body: String,
    pub addition: String,
    pub compose: String,
    pub repair: String,
    pub rank: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            setup: include_str!("../templates/setup.txt").to_string(),
            module_body: include_str!("../templates/module_body.txt").to_string(),
            addition: include_str!("../templates/addition.txt").to_string(),
            compose: include_str!("../templates/compose.txt").to_string(),
            repair: include_str!("../templates/repair.txt").to_string(),
            rank: include_str!("../templates/rank.txt").to_string(),
        }
    }
}

impl TemplateSet {
    /// Loads overrides from `dir`; files that are absent fall back to the
    /// embedded defaults.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut set = TemplateSet::default();
        for (name, slot) in [
            ("setup.txt", &mut set.setup),
            ("module_body.txt", &mut set.module_body),
            ("addition.txt", &mut set.addition),
            ("compose.txt", &mut set.compose),
            ("repair.txt", &mut set.repair),
            ("rank.txt", &mut set.rank),
        ] {
            let path = dir.join(name);
            if path.is_file() {
                *slot = fs::read_to_string(&path)?;
            }
        }
        Ok(set)
    }
}

/// Substitutes `{key}` placeholders. Keys not in `vars` stay literal.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out.trim_end().to_string()
}

/// Renders a port list as Verilog ANSI declarations, one port per line:
/// direction, `[W-1:0]` when the width exceeds one bit, the name, `[0:S-1]`
/// when the port is an array, a separating comma, and the description as a
/// trailing `//` comment.
pub fn render_interface_decl(ports: &[PortSpec]) -> Result<String, PromptError> {
    if ports.is_empty() {
        return Err(PromptError::EmptyInterface);
    }
    let last = ports.len() - 1;
    let lines: Vec<String> = ports
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut line = String::new();
            line.push_str(p.direction.keyword());
            if p.width > 1 {
                line.push_str(&format!(" [{}:0]", p.width - 1));
            }
            line.push(' ');
            line.push_str(&p.name);
            if p.array_size > 1 {
                line.push_str(&format!(" [0:{}]", p.array_size - 1));
            }
            if i != last {
                line.push(',');
            }
            let description = p.description.replace(['\n', '\r'], " ");
            if !description.trim().is_empty() {
                line.push_str(" // ");
                line.push_str(description.trim());
            }
            line
        })
        .collect();
    Ok(lines.join("\n"))
}

/// The interface rendered inside a `module <name> ( … );` header block, as
/// embedded in compose queries and test harnesses.
pub fn interface_block(name: &str, ports: &[PortSpec]) -> Result<String, PromptError> {
    Ok(format!(
        "module {name} (\n{}\n);",
        render_interface_decl(ports)?
    ))
}

/// Builds the queries for one module: a body query merging the function text
/// with the interface declaration, and, when the spec declares an addition,
/// a second query sent strictly after the body — handshake and extension
/// signals are never folded into the first prompt.
pub fn build_module_prompts(
    module: &ModuleSpec,
    templates: &TemplateSet,
) -> Result<Vec<Query>, PromptError> {
    if module.function_desc.trim().is_empty() {
        return Err(SpecError::Schema(format!(
            "module `{}`: empty function description",
            module.name
        ))
        .into());
    }
    let interface = render_interface_decl(&module.ports)?;
    let body_text = fill(
        &templates.module_body,
        &[
            ("module", module.name.as_str()),
            ("function", module.function_desc.trim()),
            ("interface", interface.as_str()),
        ],
    );
    let mut queries = vec![Query::new(
        QueryKind::ModuleBody,
        body_text,
        Some(module.name.clone()),
    )];
    if let Some(addition) = module.addition.as_deref().filter(|a| !a.trim().is_empty()) {
        let addition_text = fill(
            &templates.addition,
            &[
                ("module", module.name.as_str()),
                ("addition", addition.trim()),
            ],
        );
        queries.push(Query::new(
            QueryKind::Addition,
            addition_text,
            Some(module.name.clone()),
        ));
    }
    Ok(queries)
}

/// Serializes a whole design into its prompt sequence: setup, then each
/// non-top module in document order, then the compose query with every
/// submodule interface declared before the top module is requested.
pub fn build_arch_sequence(
    spec: &DesignSpec,
    templates: &TemplateSet,
) -> Result<PromptSequence, PromptError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        let summary: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(SpecError::Schema(format!(
            "spec has {} violation(s): {}",
            summary.len(),
            summary.join("; ")
        ))
        .into());
    }

    let top_name = spec.top_name().map(str::to_owned);
    let mut queries = vec![Query::new(
        QueryKind::Setup,
        templates.setup.trim_end(),
        None,
    )];
    for module in &spec.modules {
        if Some(module.name.as_str()) == top_name.as_deref() {
            continue;
        }
        queries.extend(build_module_prompts(module, templates)?);
    }

    if let Some(comp) = &spec.composition {
        let mut blocks = Vec::with_capacity(comp.submodule_names.len());
        for sub in &comp.submodule_names {
            let module = spec
                .module(sub)
                .ok_or_else(|| SpecError::Reference(format!("undeclared submodule `{sub}`")))?;
            blocks.push(interface_block(&module.name, &module.ports)?);
        }
        let top_interface = match spec.module(&comp.top_name) {
            Some(top) => format!(
                "\nThe top module must use exactly this interface:\n\n{}\n",
                interface_block(&top.name, &top.ports)?
            ),
            None => String::new(),
        };
        let text = fill(
            &templates.compose,
            &[
                ("module", comp.top_name.as_str()),
                ("submodule_interfaces", blocks.join("\n\n").as_str()),
                ("connection", comp.connection_desc.trim()),
                ("top_interface", top_interface.as_str()),
            ],
        );
        queries.push(Query::new(
            QueryKind::Compose,
            text,
            Some(comp.top_name.clone()),
        ));
    }

    Ok(PromptSequence { queries })
}

/// Default byte budget for quoting tool diagnostics in repair prompts.
pub const DEFAULT_DIAGNOSTIC_BUDGET: usize = 2000;

/// Truncates to at most `budget` bytes on a char boundary.
fn truncate_bytes(text: &str, budget: usize) -> &str {
    if text.len() <= budget {
        return text;
    }
    let mut end = budget;
    while end > 0 && !text.is_char_boundary(end) {
        end -= 1;
    }
    &text[..end]
}

/// Turns a failing verdict into a repair query quoting the tool diagnostic
/// (truncated to `budget` bytes) and asking for a corrected module with the
/// identical interface.
pub fn build_repair_prompt(
    verdict: &Verdict,
    templates: &TemplateSet,
    budget: usize,
) -> Result<Query, PromptError> {
    let diagnostic = match verdict {
        Verdict::CompileError { detail } => detail.clone(),
        Verdict::SimMismatch { detail, mismatch } => format!(
            "simulation mismatch at cycle={} port={} expected={} got={}\n{}",
            mismatch.cycle, mismatch.port, mismatch.expected, mismatch.got, detail
        ),
        Verdict::Pass | Verdict::NeedsHuman { .. } => return Err(PromptError::NotRepairable),
    };
    let text = fill(
        &templates.repair,
        &[("diagnostic", truncate_bytes(diagnostic.trim(), budget))],
    );
    Ok(Query::new(QueryKind::Repair, text, None))
}

/// Asks the model for a best-to-worst ordering of the candidate labels.
pub fn build_rank_prompt(
    candidates: &[Candidate],
    templates: &TemplateSet,
) -> Result<Query, PromptError> {
    if candidates.len() < 2 {
        return Err(PromptError::TooFewCandidates(candidates.len()));
    }
    let labels: Vec<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    let listing: Vec<String> = candidates
        .iter()
        .map(|c| format!("{}:\n{}", c.id, c.source.trim_end()))
        .collect();
    let count = candidates.len().to_string();
    let text = fill(
        &templates.rank,
        &[
            ("count", count.as_str()),
            ("labels", labels.join(", ").as_str()),
            ("candidates", listing.join("\n\n").as_str()),
        ],
    );
    Ok(Query::new(QueryKind::Rank, text, None))
}
