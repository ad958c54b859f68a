//! Command-line front end: argument handling, config files, run manifests
//! and the exit-code map. The subcommands live in [`commands`].

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub mod args;
mod commands;

pub use args::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_INCONCLUSIVE: u8 = 5;

const SUBCOMMANDS: [&str; 7] = ["race", "density", "explicit", "independence", "barrier", "chebyshev", "shanks"];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Validation(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Validation(m) => f.write_str(m),
        }
    }
}

impl From<primerace::Error> for CliError {
    fn from(e: primerace::Error) -> Self {
        use primerace::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) => CliError::Io(msg),
            E::SinkAborted { ref message, .. } if message.contains("os error") => CliError::Io(msg),
            E::Parse { .. }
            | E::InsufficientData { .. }
            | E::OffLineZero { .. }
            | E::Checkpoint(_)
            | E::Json(_)
            | E::SinkAborted { .. } => CliError::Validation(msg),
            _ => CliError::Usage(msg),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Splices `--config FILE` entries in right after the subcommand name, so
/// flags given on the command line override them.
pub fn expand_config(argv: &[OsString]) -> CliResult<(Vec<OsString>, Option<PathBuf>)> {
    let mut path = None;
    let mut i = 0;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok((argv.to_vec(), None));
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut extra: Vec<OsString> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let key = key.trim().trim_start_matches('-');
        let value = value.trim();
        match value {
            "true" => extra.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                extra.push(format!("--{key}").into());
                extra.push(value.into());
            }
        }
    }
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok((out, Some(path)))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_hash: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub exit_code: u8,
}

/// Files written by one run; removed again if the run fails.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    plot: bool,
}

impl Outputs {
    fn new(dir: PathBuf, plot: bool) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir, written: Vec::new(), inputs: Vec::new(), seed: None, plot })
    }

    pub fn plot(&self) -> bool {
        self.plot
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Creates `name` in the output directory and tracks it.
    pub fn create(&mut self, name: &str) -> CliResult<fs::File> {
        let p = self.path(name);
        let f = fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(f)
    }

    pub fn track(&mut self, path: PathBuf) {
        if !self.written.contains(&path) {
            self.written.push(path);
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let mut f = self.create(name)?;
        f.write_all(bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

/// Outcome of a successful command.
pub enum Outcome {
    Done,
    Inconclusive,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run(argv: Vec<OsString>) -> u8 {
    let (argv, config) = match expand_config(&argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let started = chrono::Utc::now();
    let mut out = match Outputs::new(cli.out_dir.clone(), cli.plot) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code();
        }
    };
    if let Some(c) = &config {
        if let Err(e) = out.input(c) {
            eprintln!("error: {e}");
            return e.code();
        }
    }
    let threads = cli.threads.max(1);
    let result = commands::dispatch(&cli.command, threads, &mut out);
    let code = match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Inconclusive) => EXIT_INCONCLUSIVE,
        Err(e) => {
            eprintln!("error: {e}");
            out.discard();
            return e.code();
        }
    };

    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let command = SUBCOMMANDS
        .iter()
        .find(|s| args.iter().any(|a| a == *s))
        .map_or_else(String::new, |s| s.to_string());
    let manifest = RunManifest {
        command,
        config_hash: hex::encode(Sha256::digest(args.join("\n").as_bytes())),
        argv: args,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        inputs: std::mem::take(&mut out.inputs),
        seed: out.seed,
        outputs: out
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        exit_code: code,
    };
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        eprintln!("error: {e}");
        out.discard();
        return e.code();
    }
    code
}
