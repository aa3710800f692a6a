//! External tool invocation: command templates with placeholder substitution,
//! executed through the system shell with a timeout.
//!
//! Placeholders: `{input}` (the file a stage consumes — the candidate source
//! for compile and synthesis, the compiled image at `{outdir}/sim.out` for
//! simulation), `{testbench}`, `{top}`, and `{outdir}`. Every template must
//! contain `{input}`.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conventional name of the compile stage's output inside `{outdir}`; the
/// simulate template receives it as `{input}`.
pub const SIM_IMAGE_NAME: &str = "sim.out";

/// Exit status the shell reports when a command is not found.
const SHELL_NOT_FOUND: i32 = 127;

pub const DEFAULT_TOOL_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolchainConfig {
    #[serde(alias = "compile")]
    pub compile_cmd: String,
    #[serde(alias = "simulate")]
    pub simulate_cmd: String,
    #[serde(alias = "synth")]
    pub synth_cmd: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TOOL_TIMEOUT.as_secs()
}

impl ToolchainConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), ToolError> {
        for (name, template) in [
            ("compile", &self.compile_cmd),
            ("simulate", &self.simulate_cmd),
            ("synth", &self.synth_cmd),
        ] {
            if !template.contains("{input}") {
                return Err(ToolError::InvalidTemplate(format!(
                    "{name} command template must contain {{input}}"
                )));
            }
        }
        if self.timeout_secs == 0 {
            return Err(ToolError::InvalidTemplate(
                "timeout must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("tool not found (exit 127): {command}")]
    NotFound { command: String },
    #[error("tool timed out after {seconds}s: {command}")]
    Timeout { command: String, seconds: u64 },
    #[error("invalid toolchain config: {0}")]
    InvalidTemplate(String),
    #[error("tool io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Captured result of one tool run. `status` is the exit code (-1 when the
/// process was killed by a signal).
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    pub fn success(&self) -> bool {
        self.status == 0
    }

    /// stdout and stderr concatenated, the form logs are written in.
    pub fn combined(&self) -> String {
        let mut out = self.stdout.clone();
        if !self.stderr.is_empty() {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(&self.stderr);
        }
        out
    }
}

/// Replaces each `{key}` placeholder in a command template.
pub fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Runs `command` via `sh -c`, capturing output, killing the process when
/// `timeout` elapses. Exit status 127 is reported as [`ToolError::NotFound`]
/// so environment faults stay distinct from candidate faults.
pub fn run_command(command: &str, timeout: Duration) -> Result<CommandOutput, ToolError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let stdout_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let stderr_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = stdout_thread.join();
                    let _ = stderr_thread.join();
                    return Err(ToolError::Timeout {
                        command: command.to_string(),
                        seconds: timeout.as_secs(),
                    });
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };

    let stdout = String::from_utf8_lossy(&stdout_thread.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&stderr_thread.join().unwrap_or_default()).into_owned();
    let code = status.code().unwrap_or(-1);
    if code == SHELL_NOT_FOUND {
        return Err(ToolError::NotFound {
            command: command.to_string(),
        });
    }
    Ok(CommandOutput {
        status: code,
        stdout,
        stderr,
    })
}
