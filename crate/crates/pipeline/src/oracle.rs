//! Oracle selection for scale-search: `builtin:<name>` picks a bundled
//! synthetic oracle, `exec:<command>` talks to a child process over a
//! line protocol: one `depth width resolution` triple per request line on
//! stdin, one score per response line on stdout.

use std::cell::RefCell;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use detkit_core::scaling::{oracles, EvalOracle, OracleError, ScaleTriple};

use crate::error::PipelineError;

pub fn make_oracle(spec: &str) -> Result<Box<dyn EvalOracle>, PipelineError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return oracles::builtin(name).ok_or_else(|| {
            PipelineError::usage(format!(
                "unknown builtin oracle {name:?} (available: separable-concave, rosenbrock, noisy-plateau)"
            ))
        });
    }
    if let Some(command) = spec.strip_prefix("exec:") {
        return Ok(Box::new(ExecOracle::spawn(command)?));
    }
    Err(PipelineError::usage(format!(
        "oracle spec {spec:?} must start with builtin: or exec:"
    )))
}

/// Child-process oracle; the child stays alive across evaluations.
pub struct ExecOracle {
    command: String,
    child: RefCell<Child>,
    pipes: RefCell<(ChildStdin, BufReader<ChildStdout>)>,
}

impl ExecOracle {
    pub fn spawn(command: &str) -> Result<Self, PipelineError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| PipelineError::data(format!("cannot spawn oracle {command:?}: {e}")))?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| PipelineError::data(format!("oracle {command:?} has no stdin")))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| PipelineError::data(format!("oracle {command:?} has no stdout")))?;
        Ok(ExecOracle {
            command: command.to_string(),
            child: RefCell::new(child),
            pipes: RefCell::new((stdin, BufReader::new(stdout))),
        })
    }
}

impl EvalOracle for ExecOracle {
    fn score(&self, triple: ScaleTriple) -> Result<f64, OracleError> {
        let mut pipes = self.pipes.borrow_mut();
        let (stdin, stdout) = &mut *pipes;
        writeln!(
            stdin,
            "{} {} {}",
            triple.depth, triple.width, triple.resolution
        )
        .map_err(|e| OracleError(format!("{}: write failed: {e}", self.command)))?;
        stdin
            .flush()
            .map_err(|e| OracleError(format!("{}: flush failed: {e}", self.command)))?;
        let mut line = String::new();
        let read = stdout
            .read_line(&mut line)
            .map_err(|e| OracleError(format!("{}: read failed: {e}", self.command)))?;
        if read == 0 {
            return Err(OracleError(format!(
                "{}: oracle closed its output",
                self.command
            )));
        }
        line.trim().parse::<f64>().map_err(|_| {
            OracleError(format!(
                "{}: response {line:?} is not a number",
                self.command
            ))
        })
    }
}

impl Drop for ExecOracle {
    fn drop(&mut self) {
        let mut child = self.child.borrow_mut();
        let _ = child.kill();
        let _ = child.wait();
    }
}
