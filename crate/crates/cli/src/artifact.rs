//! Output files. Every file carries the tool version and config hash and
//! nothing that varies between runs of the same config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "pwkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_hash: String, seed: Option<u64>) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            config_hash,
            seed,
        }
    }

    pub fn tag(&self) -> String {
        format!("{} {} config={}", self.tool, self.version, self.config_hash)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub struct ArtifactWriter {
    dir: PathBuf,
    stem: String,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, stem: &str, provenance: Provenance) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            provenance,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `<stem><suffix>`, e.g. `run-spectrum.csv` for suffix `-spectrum.csv`.
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    pub fn file_stem(&self, suffix: &str) -> String {
        format!("{}{suffix}", self.stem)
    }

    fn put(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<PathBuf> {
        fs::write(&path, bytes).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON with a leading `provenance` object; `body` must serialise
    /// to a map.
    pub fn json<T: Serialize>(&mut self, suffix: &str, body: &T) -> CliResult<PathBuf> {
        let env = Envelope {
            provenance: &self.provenance,
            body,
        };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.put(self.path(suffix), text.as_bytes())
    }

    /// CSV preceded by a `# pwkit <version> config=<hash>` comment line.
    pub fn csv(&mut self, suffix: &str, body: &[u8]) -> CliResult<PathBuf> {
        let mut bytes = format!("# {}\n", self.provenance.tag()).into_bytes();
        bytes.extend_from_slice(body);
        self.put(self.path(suffix), &bytes)
    }

    /// SVG with the provenance tag as its first comment.
    pub fn svg(&mut self, suffix: &str, document: &str) -> CliResult<PathBuf> {
        let text = document.replacen("<svg", &format!("<!-- {} -->\n<svg", self.provenance.tag()), 1);
        self.put(self.path(suffix), text.as_bytes())
    }

    /// Records a file written by someone else (e.g. a signal companion).
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}
