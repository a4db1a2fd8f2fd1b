//! Append-only JSON-lines event log plus a periodic snapshot.
//!
//! `config.json` pins the schedule parameters, `snapshot.json` holds every
//! post as of the last snapshot and `events.jsonl` everything since. Schedules
//! are not stored: they are regenerated from the seed and the post's
//! sequence number, then extended to the recorded coverage.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{StoreConfig, StoreError};

const CONFIG: &str = "config.json";
const SNAPSHOT: &str = "snapshot.json";
const EVENTS: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Put {
        seq: u64,
        token_hash: String,
        content: String,
        created_at: u64,
    },
    Delete {
        post_id: String,
        at: u64,
    },
    Extend {
        post_id: String,
        covered_until: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SnapshotPost {
    pub seq: u64,
    pub token_hash: String,
    pub content: Option<String>,
    pub created_at: u64,
    pub covered_until: u64,
    pub deleted_at: Option<u64>,
}

pub(crate) struct Log {
    dir: PathBuf,
    out: BufWriter<File>,
}

fn corrupt(e: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt(e.to_string())
}

/// Checks the pinned configuration (writing it on first use) and reads the
/// snapshot and events.
pub(crate) fn load(
    dir: &Path,
    config: &StoreConfig,
) -> Result<(Vec<SnapshotPost>, Vec<Event>), StoreError> {
    fs::create_dir_all(dir)?;
    let pinned = dir.join(CONFIG);
    if pinned.exists() {
        let found: StoreConfig = serde_json::from_slice(&fs::read(&pinned)?).map_err(corrupt)?;
        if &found != config {
            return Err(StoreError::ConfigMismatch);
        }
    } else {
        fs::write(&pinned, serde_json::to_vec_pretty(config).map_err(corrupt)?)?;
    }
    let snapshot = match fs::read(dir.join(SNAPSHOT)) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(corrupt)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let mut events = Vec::new();
    match File::open(dir.join(EVENTS)) {
        Ok(f) => {
            let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>()?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(line) {
                    Ok(e) => events.push(e),
                    // a torn final line is an append that never completed
                    Err(_) if i + 1 == last => break,
                    Err(e) => {
                        return Err(StoreError::Corrupt(format!("{EVENTS} line {}: {e}", i + 1)))
                    }
                }
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    Ok((snapshot, events))
}

impl Log {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(EVENTS))?;
        Ok(Log {
            dir: dir.to_path_buf(),
            out: BufWriter::new(f),
        })
    }

    pub fn append(&mut self, e: &Event) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, e)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    /// Writes the snapshot atomically, then starts an empty event log.
    pub fn snapshot(&mut self, posts: &[SnapshotPost]) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut w, posts).map_err(corrupt)?;
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(SNAPSHOT))?;
        let f = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(self.dir.join(EVENTS))?;
        self.out = BufWriter::new(f);
        Ok(())
    }
}
