//! Durable trial storage: one append-only JSON-lines event log per trial.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::ApiError;
use crate::trial::{Event, EventKind, TrialState};

pub type TrialHandle = Arc<tokio::sync::Mutex<TrialState>>;

/// All trials under one data directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    trials: Mutex<HashMap<String, TrialHandle>>,
    by_key: Mutex<HashMap<String, String>>,
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

/// Read a trial's events. A torn final line left by a crash mid-append is
/// dropped and truncated away.
pub fn read_log(path: &Path) -> Result<Vec<Event>, ApiError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        if !line.ends_with('\n') {
            break;
        }
        let event: Event = serde_json::from_str(line.trim_end())
            .map_err(|e| ApiError::internal(format!("{}: corrupt event: {e}", path.display())))?;
        events.push(event);
        good_len += n as u64;
    }
    if fs::metadata(path)?.len() != good_len {
        OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
    }
    Ok(events)
}

fn append(path: &Path, event: &Event, create: bool) -> Result<(), ApiError> {
    let mut line = serde_json::to_vec(event).map_err(ApiError::internal)?;
    line.push(b'\n');
    let mut file = if create {
        OpenOptions::new().write(true).create_new(true).open(path)?
    } else {
        OpenOptions::new().append(true).open(path)?
    };
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

impl Store {
    /// Open `dir`, replaying every trial log found there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut trials = HashMap::new();
        let mut by_key = HashMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        entries.sort();
        for path in entries {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            let events = read_log(&path)?;
            if events.is_empty() {
                continue;
            }
            let state = TrialState::replay(id.clone(), &events)?;
            if let Some(k) = &state.idempotency_key {
                by_key.insert(k.clone(), id.clone());
            }
            trials.insert(id, Arc::new(tokio::sync::Mutex::new(state)));
        }
        Ok(Store {
            dir,
            trials: Mutex::new(trials),
            by_key: Mutex::new(by_key),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, id: &str) -> Result<TrialHandle, ApiError> {
        self.trials
            .lock()
            .expect("trial map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no trial {id:?}")))
    }

    /// Persist a creation event and register the trial. Returns the existing
    /// trial instead when the idempotency key was seen before.
    pub fn create(&self, id: String, kind: EventKind) -> Result<(TrialHandle, bool), ApiError> {
        if !is_valid_id(&id) {
            return Err(ApiError::internal(format!("bad trial id {id:?}")));
        }
        let key = match &kind {
            EventKind::Created { idempotency_key, .. } => idempotency_key.clone(),
            _ => return Err(ApiError::internal("create needs a creation event")),
        };
        let mut by_key = self.by_key.lock().expect("key map poisoned");
        if let Some(existing) = key.as_ref().and_then(|k| by_key.get(k)) {
            return Ok((self.get(existing)?, false));
        }
        let event = Event {
            seq: 0,
            at_unix_ms: now_unix_ms(),
            kind,
        };
        let state = TrialState::created(id.clone(), &event)?;
        append(&log_path(&self.dir, &id), &event, true)?;
        let handle = Arc::new(tokio::sync::Mutex::new(state));
        self.trials
            .lock()
            .expect("trial map poisoned")
            .insert(id.clone(), handle.clone());
        if let Some(k) = key {
            by_key.insert(k, id);
        }
        Ok((handle, true))
    }

    /// Persist `kind` as the trial's next event, then apply it.
    pub fn commit(&self, state: &mut TrialState, kind: EventKind) -> Result<(), ApiError> {
        let event = Event {
            seq: state.next_seq(),
            at_unix_ms: now_unix_ms(),
            kind,
        };
        let mut next = state.clone();
        next.apply(&event)?;
        append(&log_path(&self.dir, &state.id), &event, false)?;
        *state = next;
        Ok(())
    }
}
