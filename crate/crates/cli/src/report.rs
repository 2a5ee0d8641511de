use std::fmt;
use std::io::Write;
use std::path::Path;

use qinstrument::IdentityCheck;
use serde::Serialize;
use serde_json::Value;

/// Exit status contract: 0 pass, 1 semantic failure, 2 I/O or parse failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Fail = 1,
    Input = 2,
}

/// A command failure that never got as far as producing a report.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Input,
            message: message.into(),
        }
    }

    pub fn semantic(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::Fail,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<qinstrument::Error> for Failure {
    fn from(e: qinstrument::Error) -> Self {
        match e {
            qinstrument::Error::Json(e) => Failure::input(e.to_string()),
            e => Failure::semantic(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<IdentityCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            pass: true,
            checks: Vec::new(),
            payload: None,
        }
    }

    pub fn check(&mut self, name: &str, max_deviation: f64, tolerance: f64) -> bool {
        self.push(IdentityCheck::new(name, max_deviation, tolerance))
    }

    pub fn push(&mut self, check: IdentityCheck) -> bool {
        let pass = check.pass;
        self.pass &= pass;
        self.checks.push(check);
        pass
    }

    pub fn exit(&self) -> Exit {
        if self.pass {
            Exit::Pass
        } else {
            Exit::Fail
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summarize(&self, err: &mut impl Write) {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(err, "{}: {verdict} ({} checks)", self.command, self.checks.len());
        for c in &self.checks {
            let mark = if c.pass { "ok  " } else { "FAIL" };
            let _ = writeln!(
                err,
                "  {mark} {:<28} max deviation {:.3e} (tolerance {:.1e})",
                c.name, c.max_deviation, c.tolerance
            );
        }
    }
}

/// Writes `text` to `path`; any failure is an I/O failure.
pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}
