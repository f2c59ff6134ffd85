//! Command execution behind an injectable interface.
//!
//! Build steps and execute-mode audits never spawn processes directly; they go
//! through a [`CommandExecutor`], so the whole pipeline can run against a
//! recording executor in tests and dry runs.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;

use thiserror::Error;

/// A shell command line to run, tagged with the package it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandSpec {
    pub label: String,
    pub command: String,
    pub cwd: Option<PathBuf>,
}

impl CommandSpec {
    pub fn new(label: impl Into<String>, command: impl Into<String>) -> Self {
        CommandSpec {
            label: label.into(),
            command: command.into(),
            cwd: None,
        }
    }

    pub fn in_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cwd = Some(dir.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    /// Exit code; `None` when the process was killed by a signal.
    pub status: Option<i32>,
    /// Captured stdout followed by stderr.
    pub output: String,
}

impl CommandOutput {
    pub fn success() -> Self {
        CommandOutput {
            status: Some(0),
            output: String::new(),
        }
    }

    pub fn failure(code: i32) -> Self {
        CommandOutput {
            status: Some(code),
            output: String::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.status == Some(0)
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("could not launch `{command}`: {source}")]
    Launch {
        command: String,
        #[source]
        source: std::io::Error,
    },
}

/// Runs commands. Must be callable from several worker threads at once.
pub trait CommandExecutor: Send + Sync {
    fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError>;
}

impl<T: CommandExecutor + ?Sized> CommandExecutor for &T {
    fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError> {
        (**self).run(spec)
    }
}

/// Runs each command line through `sh -c`.
#[derive(Debug, Default, Clone, Copy)]
pub struct ShellExecutor;

impl CommandExecutor for ShellExecutor {
    fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(&spec.command);
        if let Some(dir) = &spec.cwd {
            cmd.current_dir(dir);
        }
        let out = cmd.output().map_err(|source| ExecError::Launch {
            command: spec.command.clone(),
            source,
        })?;
        let mut output = String::from_utf8_lossy(&out.stdout).into_owned();
        output.push_str(&String::from_utf8_lossy(&out.stderr));
        Ok(CommandOutput {
            status: out.status.code(),
            output,
        })
    }
}

/// Records every command and reports success without running anything.
#[derive(Debug, Default)]
pub struct DryRunExecutor {
    recorded: Mutex<Vec<CommandSpec>>,
}

impl DryRunExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn recorded(&self) -> Vec<CommandSpec> {
        self.recorded.lock().expect("recorder poisoned").clone()
    }
}

impl CommandExecutor for DryRunExecutor {
    fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError> {
        self.recorded.lock().expect("recorder poisoned").push(spec.clone());
        Ok(CommandOutput::success())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_executor_reports_status_and_output() {
        let ok = ShellExecutor.run(&CommandSpec::new("t", "echo hello")).unwrap();
        assert!(ok.succeeded());
        assert_eq!(ok.output, "hello\n");
        let bad = ShellExecutor.run(&CommandSpec::new("t", "exit 3")).unwrap();
        assert_eq!(bad.status, Some(3));
    }

    #[test]
    fn shell_executor_honors_cwd() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("marker"), "").unwrap();
        let out = ShellExecutor
            .run(&CommandSpec::new("t", "ls").in_dir(dir.path()))
            .unwrap();
        assert_eq!(out.output, "marker\n");
    }

    #[test]
    fn shell_executor_launch_error_for_missing_cwd() {
        let err = ShellExecutor
            .run(&CommandSpec::new("t", "true").in_dir("/definitely/not/here"))
            .unwrap_err();
        assert!(matches!(err, ExecError::Launch { .. }));
    }

    #[test]
    fn dry_run_records_in_order() {
        let dry = DryRunExecutor::new();
        dry.run(&CommandSpec::new("a", "one")).unwrap();
        dry.run(&CommandSpec::new("b", "two")).unwrap();
        let cmds: Vec<String> = dry.recorded().into_iter().map(|c| c.command).collect();
        assert_eq!(cmds, ["one", "two"]);
    }
}
