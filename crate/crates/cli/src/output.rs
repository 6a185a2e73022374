use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub enum Failure {
    Core(slowfast::Error),
    /// Unreadable or malformed input.
    Input { stage: &'static str, msg: String },
    Output(String),
    /// A verification did not reproduce its expected value.
    Check(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 3,
            Failure::Core(_) | Failure::Input { .. } => 2,
            Failure::Output(_) | Failure::Check(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Input { stage, msg } => write!(f, "{stage}: invalid input: {msg}"),
            Failure::Output(m) => write!(f, "output: {m}"),
            Failure::Check(m) => write!(f, "verification failed: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Output sink: files under a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> CliResult<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| Failure::Output(format!("{}: {e}", d.display())))?;
        }
        Ok(Sink { dir: dir.map(Path::to_path_buf) })
    }

    pub fn is_dir(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `name` under the directory; prints to stdout when there is none.
    pub fn emit(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                fs::write(&p, bytes).map_err(|e| Failure::Output(format!("{}: {e}", p.display())))
            }
            None => std::io::stdout().write_all(bytes).map_err(|e| Failure::Output(e.to_string())),
        }
    }

    /// Writes only when a directory was given.
    pub fn file(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        if self.is_dir() {
            self.emit(name, bytes)?;
        }
        Ok(())
    }
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Output(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Failure::Output(e.to_string()))
}

pub fn read_json(path: &str, stage: &'static str) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input { stage, msg: format!("{path}: {e}") })?;
    serde_json::from_str(&text).map_err(|e| Failure::Input { stage, msg: format!("{path}: {e}") })
}
