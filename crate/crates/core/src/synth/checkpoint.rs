use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::DropRecord;
use super::{CandidateExample, SynthExample};

/// Progress of one screenshot through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub screenshot: String,
    pub seed: u64,
    /// Stage-1 output, once complete.
    pub candidates: Option<Vec<CandidateExample>>,
    /// One entry per finished candidate, in candidate order.
    pub outcomes: Vec<CandidateOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CandidateOutcome {
    Emitted { example: SynthExample },
    Dropped { record: DropRecord },
}

impl Checkpoint {
    pub fn new(screenshot: &str, seed: u64) -> Self {
        Self {
            screenshot: screenshot.to_string(),
            seed,
            candidates: None,
            outcomes: Vec::new(),
        }
    }

    /// `Ok(None)` when no checkpoint exists yet.
    pub fn load(path: &Path) -> io::Result<Option<Self>> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes to a sibling temp file and renames it over `path`.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        write_atomic(path, &json)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
