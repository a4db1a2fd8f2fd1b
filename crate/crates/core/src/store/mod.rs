//! Visibility-gated post store.
//!
//! Non-owners see a post only while its schedule is up. Owners always see
//! their live posts. Hidden, deleted and unknown posts all read as the same
//! null, and a delete that fails for any reason returns the same
//! authorization error.

mod clock;
mod persist;
mod server;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schedule::{generate_schedule, observable, rng_stream, PostRecord, YEAR_SECONDS};
use crate::tuning::{build_mechanism, Mechanism, TuningError, TuningSpec};

pub use clock::{Clock, ManualClock, SystemClock};
pub use persist::Event;
pub use server::{handle_line, serve, Server};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
    #[error("corrupt store data: {0}")]
    Corrupt(String),
    #[error("data directory was written with a different configuration")]
    ConfigMismatch,
    #[error(transparent)]
    Tuning(#[from] TuningError),
}

/// Everything that fixes the schedules a store hands out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreConfig {
    pub availability: f64,
    /// Seconds.
    pub mean_down: f64,
    /// Seconds.
    pub theta_star: f64,
    pub seed: u64,
}

impl StoreConfig {
    fn mechanism(&self) -> Result<Mechanism, TuningError> {
        build_mechanism(TuningSpec {
            availability_target: self.availability,
            mean_down: self.mean_down,
            decision_threshold_estimate: self.theta_star,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UpdateReport {
    pub extended: usize,
    pub skipped_unknown: usize,
}

struct Slot {
    seq: u64,
    record: PostRecord,
}

pub struct Store {
    config: StoreConfig,
    mechanism: Mechanism,
    clock: Arc<dyn Clock>,
    posts: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    /// Live posts keyed by (coverage end, id): soonest expiry first.
    expiry: Mutex<BTreeSet<(u64, String)>>,
    next_seq: AtomicU64,
    log: Option<Mutex<persist::Log>>,
    /// Held shared by every mutation from log append to apply, exclusively by snapshots.
    gate: RwLock<()>,
}

fn token_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn post_id(seed: u64, seq: u64) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(seq.to_le_bytes());
    hex::encode(&h.finalize()[..16])
}

impl Store {
    /// Store without persistence.
    pub fn in_memory(config: StoreConfig, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        Ok(Store {
            mechanism: config.mechanism()?,
            config,
            clock,
            posts: RwLock::new(HashMap::new()),
            expiry: Mutex::new(BTreeSet::new()),
            next_seq: AtomicU64::new(0),
            log: None,
            gate: RwLock::new(()),
        })
    }

    /// Opens (or creates) a store backed by `dir`, replaying its snapshot and event log.
    pub fn open(
        dir: &Path,
        config: StoreConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StoreError> {
        let mut store = Store::in_memory(config, clock)?;
        let (snapshot, events) = persist::load(dir, &store.config)?;
        for p in snapshot {
            store.restore(p)?;
        }
        for e in events {
            store.apply(e)?;
        }
        store.log = Some(Mutex::new(persist::Log::open(dir)?));
        Ok(store)
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mechanism
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    fn record(&self, e: &Event) -> Result<(), StoreError> {
        if let Some(log) = &self.log {
            log.lock().append(e)?;
        }
        Ok(())
    }

    fn fresh_record(
        &self,
        seq: u64,
        token_hash: String,
        content: &str,
        created_at: u64,
    ) -> PostRecord {
        let schedule = generate_schedule(
            &self.mechanism.up,
            &self.mechanism.down,
            created_at,
            YEAR_SECONDS,
            rng_stream(self.config.seed, seq),
        )
        .expect("non-empty horizon");
        PostRecord::new(
            post_id(self.config.seed, seq),
            token_hash,
            content.as_bytes().to_vec(),
            schedule,
        )
    }

    fn insert(&self, seq: u64, record: PostRecord) {
        let id = record.post_id.clone();
        if record.deleted_at().is_none() {
            self.expiry
                .lock()
                .insert((record.schedule.covered_until(), id.clone()));
        }
        self.posts
            .write()
            .insert(id, Arc::new(Mutex::new(Slot { seq, record })));
        self.next_seq.fetch_max(seq + 1, Ordering::SeqCst);
    }

    fn slot(&self, id: &str) -> Option<Arc<Mutex<Slot>>> {
        self.posts.read().get(id).cloned()
    }

    pub fn put(&self, content: &str, token: &str) -> Result<String, StoreError> {
        if content.is_empty() {
            return Err(StoreError::Empty("content"));
        }
        if token.is_empty() {
            return Err(StoreError::Empty("token"));
        }
        let _gate = self.gate.read();
        let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
        let created_at = self.clock.now();
        let hash = token_hash(token);
        self.record(&Event::Put {
            seq,
            token_hash: hash.clone(),
            content: content.to_string(),
            created_at,
        })?;
        let record = self.fresh_record(seq, hash, content, created_at);
        let id = record.post_id.clone();
        self.insert(seq, record);
        Ok(id)
    }

    /// Content if `token` owns the live post or the post is currently up, else `None`.
    pub fn get(&self, id: &str, token: &str) -> Option<String> {
        let _gate = self.gate.read();
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let now = self.clock.now();
        let content = slot.record.content.as_ref()?;
        let text = String::from_utf8(content.clone()).expect("stored from a string");
        if slot.record.owner_token == token_hash(token) {
            return Some(text);
        }
        if now > slot.record.schedule.covered_until() {
            // the updater fell behind; extend on demand
            if self.extend_locked(&mut slot, now).is_err() {
                return None;
            }
        }
        observable(&slot.record, now).ok()?.then_some(text)
    }

    pub fn delete(&self, id: &str, token: &str) -> Result<(), StoreError> {
        let _gate = self.gate.read();
        let slot = self.slot(id).ok_or(StoreError::Unauthorized)?;
        let mut slot = slot.lock();
        if slot.record.deleted_at().is_some() || slot.record.owner_token != token_hash(token) {
            return Err(StoreError::Unauthorized);
        }
        let at = self.clock.now();
        self.record(&Event::Delete {
            post_id: id.to_string(),
            at,
        })?;
        let covered = slot.record.schedule.covered_until();
        slot.record.mark_deleted(at).expect("checked above");
        self.expiry.lock().remove(&(covered, id.to_string()));
        Ok(())
    }

    /// Extends the schedule of a locked live post to `until`, logging the new coverage.
    fn extend_locked(&self, slot: &mut Slot, until: u64) -> Result<bool, StoreError> {
        let old = slot.record.schedule.covered_until();
        if old >= until {
            return Ok(false);
        }
        let mut next = slot.record.schedule.clone();
        next.extend_until(&self.mechanism.up, &self.mechanism.down, until);
        let covered = next.covered_until();
        self.record(&Event::Extend {
            post_id: slot.record.post_id.clone(),
            covered_until: covered,
        })?;
        slot.record.schedule = next;
        let mut expiry = self.expiry.lock();
        expiry.remove(&(old, slot.record.post_id.clone()));
        expiry.insert((covered, slot.record.post_id.clone()));
        Ok(true)
    }

    /// Brings every live post in `ids` to at least one year of coverage past now.
    pub fn update_ts(&self, ids: &[String]) -> Result<UpdateReport, StoreError> {
        let until = self.clock.now() + YEAR_SECONDS;
        let mut report = UpdateReport::default();
        for id in ids {
            let _gate = self.gate.read();
            let Some(slot) = self.slot(id) else {
                report.skipped_unknown += 1;
                continue;
            };
            let mut slot = slot.lock();
            if slot.record.deleted_at().is_some() {
                continue;
            }
            if self.extend_locked(&mut slot, until)? {
                report.extended += 1;
            }
        }
        Ok(report)
    }

    /// One updater pass over the live posts whose coverage ends within a year.
    pub fn update_expiring(&self) -> Result<UpdateReport, StoreError> {
        let until = self.clock.now() + YEAR_SECONDS;
        let due: Vec<String> = self
            .expiry
            .lock()
            .iter()
            .take_while(|(covered, _)| *covered < until)
            .map(|(_, id)| id.clone())
            .collect();
        self.update_ts(&due)
    }

    /// Runs `update_expiring` every `period` until the returned handle is stopped.
    pub fn spawn_updater(self: &Arc<Self>, period: Duration) -> UpdaterHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let store = Arc::clone(self);
        let flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                if let Err(e) = store.update_expiring() {
                    eprintln!("schedule update failed: {e}");
                }
                std::thread::park_timeout(period);
            }
        });
        UpdaterHandle { stop, thread }
    }

    /// Schedule coverage end of a live post (test and maintenance hook).
    pub fn coverage(&self, id: &str) -> Option<u64> {
        let slot = self.slot(id)?;
        let slot = slot.lock();
        slot.record
            .deleted_at()
            .is_none()
            .then(|| slot.record.schedule.covered_until())
    }

    /// Copy of the stored record (test and maintenance hook).
    pub fn inspect(&self, id: &str) -> Option<PostRecord> {
        Some(self.slot(id)?.lock().record.clone())
    }

    pub fn len(&self) -> usize {
        self.posts.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes a snapshot of every post and truncates the event log.
    pub fn snapshot(&self) -> Result<(), StoreError> {
        let Some(log) = &self.log else {
            return Ok(());
        };
        let _gate = self.gate.write();
        let slots: Vec<_> = self.posts.read().values().cloned().collect();
        let mut posts: Vec<persist::SnapshotPost> = slots
            .iter()
            .map(|s| {
                let s = s.lock();
                persist::SnapshotPost {
                    seq: s.seq,
                    token_hash: s.record.owner_token.clone(),
                    content: s
                        .record
                        .content
                        .as_ref()
                        .map(|c| String::from_utf8(c.clone()).expect("utf-8")),
                    created_at: s.record.schedule.created_at(),
                    covered_until: s.record.schedule.covered_until(),
                    deleted_at: s.record.deleted_at(),
                }
            })
            .collect();
        posts.sort_by_key(|p| p.seq);
        log.lock().snapshot(&posts)?;
        Ok(())
    }

    fn restore(&self, p: persist::SnapshotPost) -> Result<(), StoreError> {
        let content = p.content.as_deref().unwrap_or("");
        let mut record = self.fresh_record(p.seq, p.token_hash, content, p.created_at);
        record
            .schedule
            .extend_until(&self.mechanism.up, &self.mechanism.down, p.covered_until);
        if record.schedule.covered_until() != p.covered_until {
            return Err(StoreError::Corrupt(format!(
                "coverage of post {} does not replay",
                p.seq
            )));
        }
        if let Some(at) = p.deleted_at {
            record.mark_deleted(at).expect("fresh record");
        }
        self.insert(p.seq, record);
        Ok(())
    }

    fn apply(&self, e: Event) -> Result<(), StoreError> {
        match e {
            Event::Put {
                seq,
                token_hash,
                content,
                created_at,
            } => {
                let record = self.fresh_record(seq, token_hash, &content, created_at);
                self.insert(seq, record);
            }
            Event::Delete { post_id, at } => {
                let slot = self
                    .slot(&post_id)
                    .ok_or_else(|| StoreError::Corrupt(format!("delete of unknown {post_id}")))?;
                let mut slot = slot.lock();
                let covered = slot.record.schedule.covered_until();
                slot.record
                    .mark_deleted(at)
                    .map_err(|e| StoreError::Corrupt(e.to_string()))?;
                self.expiry.lock().remove(&(covered, post_id));
            }
            Event::Extend {
                post_id,
                covered_until,
            } => {
                let slot = self.slot(&post_id).ok_or_else(|| {
                    StoreError::Corrupt(format!("extension of unknown {post_id}"))
                })?;
                let mut slot = slot.lock();
                let old = slot.record.schedule.covered_until();
                slot.record.schedule.extend_until(
                    &self.mechanism.up,
                    &self.mechanism.down,
                    covered_until,
                );
                if slot.record.schedule.covered_until() != covered_until {
                    return Err(StoreError::Corrupt(format!(
                        "coverage of {post_id} does not replay"
                    )));
                }
                if slot.record.deleted_at().is_none() {
                    let mut expiry = self.expiry.lock();
                    expiry.remove(&(old, post_id.clone()));
                    expiry.insert((covered_until, post_id));
                }
            }
        }
        Ok(())
    }
}

pub struct UpdaterHandle {
    stop: Arc<AtomicBool>,
    thread: JoinHandle<()>,
}

impl UpdaterHandle {
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        self.thread.thread().unpark();
        let _ = self.thread.join();
    }
}
