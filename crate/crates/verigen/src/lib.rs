//! Compile structured chip specifications into verified, PPA-ranked Verilog.
//!
//! The pipeline drives an external large language model through a templated
//! dialogue, checks every raw answer against the specification's interface
//! and I/O examples, measures power/area/latency with an external toolchain,
//! and enumeratively selects the best candidate under a single target metric.
//!
//! Stages, each usable on its own and orchestrated end to end by
//! [`pipeline::run_pipeline`]:
//!
//! 1. [`specdoc`] — parse the spec document and split each module into
//!    examples, interface, function text, and composition.
//! 2. [`promptgen`] — serialize the split spec into an ordered prompt
//!    sequence (setup first, one body per submodule, additions after bodies,
//!    composition last with every submodule interface declared).
//! 3. [`llmclient`] — run the dialogue against a pluggable backend (HTTP
//!    chat-completion or deterministic record/replay) and extract Verilog
//!    candidates from the answers.
//! 4. [`verify`] — interface conformance, generated self-checking
//!    testbenches, machine feedback verdicts, and the human checkpoint.
//! 5. [`ppa`] — synthesis/simulation report parsing into per-candidate
//!    power/area/latency records.
//! 6. [`search`] — enumerative ranking of the program list under a target.
//! 7. [`metrics`] — LOC counting and the quality score.
//! 8. [`runstore`] — resumable, auditable run manifests.
//!
//! See the crate examples for one runnable program per capability.

pub mod llmclient;
pub mod metrics;
pub mod pipeline;
pub mod ppa;
pub mod promptgen;
pub mod runstore;
pub mod search;
pub mod specdoc;
pub mod toolchain;
pub mod verify;
