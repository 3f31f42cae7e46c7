use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or parameter values.
    Input(String),
    /// A solver or classification failure.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<rfmagic::Error> for CliError {
    fn from(e: rfmagic::Error) -> Self {
        use rfmagic::Error as E;
        match e {
            E::InvalidSpin(_) | E::UnsupportedAtom(_) | E::InvalidState { .. } | E::InvalidParameter { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
pub struct Manifest<'a, P: Serialize> {
    pub command: &'a str,
    pub tool: &'static str,
    pub version: &'static str,
    /// RFC 3339, UTC; taken from SOURCE_DATE_EPOCH when set.
    pub timestamp: String,
    pub atom: &'a rfmagic::AtomSpec,
    pub parameters: &'a P,
}

pub fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    OffsetDateTime::from_unix_timestamp(secs)
        .ok()
        .and_then(|t| t.format(&Rfc3339).ok())
        .unwrap_or_else(|| secs.to_string())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Write `data` to `out` (plus manifest) or to stdout.
pub fn emit<P: Serialize>(
    out: Option<&Path>,
    data: &[u8],
    manifest: &Manifest<'_, P>,
) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, data).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let mut m = serde_json::to_vec_pretty(manifest)?;
            m.push(b'\n');
            let mp = manifest_path(path);
            fs::write(&mp, m).map_err(|e| CliError::Input(format!("{}: {e}", mp.display())))?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(data)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// CSV with a single header line.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))
}

/// Shortest round-trip decimal representation.
pub fn num(v: f64) -> String {
    v.to_string()
}
