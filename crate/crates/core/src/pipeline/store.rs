//! Chain store on disk: JSONL records in commit order plus a per-household
//! index, and atomic JSON writes for checkpoints and manifests.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::HouseholdId;
use crate::record::ChainRecord;

use super::PipelineError;

pub const CHAINS_FILE: &str = "chains.jsonl";
pub const INDEX_FILE: &str = "chains.index.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputPaths { dir: dir.into() }
    }
    pub fn chains(&self) -> PathBuf {
        self.dir.join(CHAINS_FILE)
    }
    pub fn index(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }
    pub fn manifest(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where one household's lines sit in the chain store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub household_id: HouseholdId,
    /// Zero-based line number of the household's first record.
    pub first_line: u64,
    pub line_count: u64,
    pub byte_offset: u64,
}

/// Append-only writer; the only place chain lines are written.
#[derive(Debug)]
pub struct ChainWriter {
    path: PathBuf,
    file: File,
    pub lines: u64,
    pub bytes: u64,
    pub index: Vec<IndexEntry>,
}

impl ChainWriter {
    /// Opens the store, truncated to `bytes` (0 for a fresh run).
    pub fn open(path: &Path, lines: u64, bytes: u64, index: Vec<IndexEntry>) -> Result<Self, PipelineError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(io_err(path))?;
        file.set_len(bytes).map_err(io_err(path))?;
        let mut file = file;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::End(0)).map_err(io_err(path))?;
        Ok(ChainWriter {
            path: path.to_path_buf(),
            file,
            lines,
            bytes,
            index,
        })
    }

    pub fn append_household(&mut self, household_id: &HouseholdId, records: &[ChainRecord]) -> Result<(), PipelineError> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&r.to_json_line());
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        if !records.is_empty() {
            self.index.push(IndexEntry {
                household_id: household_id.clone(),
                first_line: self.lines,
                line_count: records.len() as u64,
                byte_offset: self.bytes,
            });
        }
        self.lines += records.len() as u64;
        self.bytes += buf.len() as u64;
        Ok(())
    }

    pub fn sync(&mut self) -> Result<(), PipelineError> {
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

pub fn write_index(path: &Path, index: &[IndexEntry]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in index {
        w.serialize(e).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Checkpoint(e.to_string()))
}

/// Writes via a temporary sibling and rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Reads every record of a chain store.
pub fn read_chain_store(path: &Path) -> Result<Vec<ChainRecord>, PipelineError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChainRecord = serde_json::from_str(&line).map_err(|e| PipelineError::Store {
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
