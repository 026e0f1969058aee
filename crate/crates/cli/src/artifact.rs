//! Output files. Every artifact carries the tool version, the config hash and
//! the seed: CSV files as leading `#` lines, JSON files under `provenance`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, config_sha256: String, seed: u64) -> Self {
        Self { tool: "lifschitz", version: VERSION, command: command.to_string(), config_sha256, seed }
    }

    fn csv_header(&self) -> String {
        format!(
            "# {} {} command={}\n# config_sha256={}\n# seed={}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        )
    }
}

/// Writes artifacts into one directory and remembers their paths.
pub struct Artifacts {
    dir: PathBuf,
    provenance: Provenance,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

impl Artifacts {
    pub fn new(dir: &Path, provenance: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), provenance, written: Vec::new() })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    /// CSV body produced by `fill`, after the provenance lines.
    pub fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<(), CliError> {
        let mut buf = self.provenance.csv_header().into_bytes();
        fill(&mut buf)?;
        let path = self.path(name);
        fs::write(path, buf)?;
        Ok(())
    }

    /// Pretty JSON of `body` (an object) with a `provenance` field added.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&Wrapped { provenance: &self.provenance, body })?;
        let path = self.path(name);
        let mut f = fs::File::create(path)?;
        writeln!(f, "{text}")?;
        Ok(())
    }

    pub fn svg(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        let text = format!(
            "<!-- {} {} command={} config_sha256={} seed={} -->\n{svg}",
            self.provenance.tool,
            self.provenance.version,
            self.provenance.command,
            self.provenance.config_sha256,
            self.provenance.seed
        );
        let path = self.path(name);
        fs::write(path, text)?;
        Ok(())
    }
}

/// The seed recorded in an artifact's provenance lines.
pub fn embedded_seed(text: &str) -> Option<u64> {
    text.lines()
        .take_while(|l| l.starts_with('#') || l.starts_with("<!--"))
        .find_map(|l| l.split_whitespace().find_map(|w| w.strip_prefix("seed=")))
        .and_then(|s| s.parse().ok())
}

/// The config hash recorded in an artifact's provenance lines.
pub fn embedded_hash(text: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#') || l.starts_with("<!--"))
        .find_map(|l| l.split_whitespace().find_map(|w| w.strip_prefix("config_sha256=")))
        .map(str::to_string)
}
