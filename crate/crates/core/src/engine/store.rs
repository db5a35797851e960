//! Append-only JSON-lines persistence.
//!
//! An experiment directory holds `events.jsonl` (one [`InteractionEvent`]
//! per line) and `sessions.jsonl` (one [`SessionRecord`] per line). State is
//! rebuilt by replaying both files. A final line without its newline is a
//! torn write and is dropped; any other unparsable line is corruption.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AttributeSet, ClaimId, InteractionEvent, InterventionArm, InterventionText, SessionId,
    SurveyAnswer, UserId,
};

use super::Stage;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt log {path} at line {line}: {message}; run `feedlab recover --log {dir}` to set bad lines aside", dir = .path.parent().map(|p| p.display().to_string()).unwrap_or_default())]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn recovery_command(&self) -> Option<String> {
        match self {
            StoreError::CorruptLog { path, .. } => Some(format!(
                "feedlab recover --log {}",
                path.parent().unwrap_or(Path::new(".")).display()
            )),
            _ => None,
        }
    }
}

/// One line of the session index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionRecord {
    Created {
        session_id: SessionId,
        user_id: UserId,
        arm: InterventionArm,
        feed: Vec<ClaimId>,
        trial: u32,
        created_at: u64,
    },
    Profile {
        session_id: SessionId,
        self_reported: AttributeSet,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inferred: Option<AttributeSet>,
        survey_answers: Vec<SurveyAnswer>,
        attention_passed: bool,
    },
    Interventions {
        session_id: SessionId,
        items: Vec<InterventionText>,
    },
    Stage {
        session_id: SessionId,
        stage: Stage,
        at: u64,
    },
}

impl SessionRecord {
    pub fn session_id(&self) -> &SessionId {
        match self {
            SessionRecord::Created { session_id, .. }
            | SessionRecord::Profile { session_id, .. }
            | SessionRecord::Interventions { session_id, .. }
            | SessionRecord::Stage { session_id, .. } => session_id,
        }
    }
}

/// Everything a session index says about one session, folded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub arm: InterventionArm,
    pub feed: Vec<ClaimId>,
    pub trial: u32,
    pub created_at: u64,
    pub stage: Stage,
    pub self_reported: Option<AttributeSet>,
    pub inferred: Option<AttributeSet>,
    pub survey_answers: Vec<SurveyAnswer>,
    pub attention_passed: Option<bool>,
    pub interventions: BTreeMap<ClaimId, InterventionText>,
}

impl SessionInfo {
    pub fn completed(&self) -> bool {
        self.stage == Stage::Done
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogSnapshot {
    pub sessions: Vec<SessionRecord>,
    pub events: Vec<InteractionEvent>,
}

impl LogSnapshot {
    /// Fold the session index, ordered by session id. The result does not
    /// depend on the order of lines in the file.
    pub fn session_index(&self) -> Vec<SessionInfo> {
        let mut map: BTreeMap<SessionId, SessionInfo> = BTreeMap::new();
        for r in &self.sessions {
            if let SessionRecord::Created {
                session_id,
                user_id,
                arm,
                feed,
                trial,
                created_at,
            } = r
            {
                map.insert(
                    session_id.clone(),
                    SessionInfo {
                        session_id: session_id.clone(),
                        user_id: user_id.clone(),
                        arm: *arm,
                        feed: feed.clone(),
                        trial: *trial,
                        created_at: *created_at,
                        stage: Stage::Consent,
                        self_reported: None,
                        inferred: None,
                        survey_answers: Vec::new(),
                        attention_passed: None,
                        interventions: BTreeMap::new(),
                    },
                );
            }
        }
        for r in &self.sessions {
            let Some(s) = map.get_mut(r.session_id()) else {
                continue;
            };
            match r {
                SessionRecord::Created { .. } => {}
                SessionRecord::Profile {
                    self_reported,
                    inferred,
                    survey_answers,
                    attention_passed,
                    ..
                } => {
                    s.self_reported = Some(self_reported.clone());
                    s.inferred = inferred.clone();
                    s.survey_answers = survey_answers.clone();
                    s.attention_passed = Some(*attention_passed);
                }
                SessionRecord::Interventions { items, .. } => {
                    for t in items {
                        s.interventions.insert(t.claim_id.clone(), t.clone());
                    }
                }
                // stages only move forward
                SessionRecord::Stage { stage, .. } => s.stage = s.stage.max(*stage),
            }
        }
        map.into_values().collect()
    }
}

struct Parsed<T> {
    records: Vec<T>,
    /// Byte length of the complete, valid prefix.
    valid_len: u64,
    torn: bool,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Parsed<T>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Ok(Parsed {
                records,
                valid_len: offset as u64,
                torn: true,
            });
        };
        let line = &bytes[offset..offset + nl];
        offset += nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record = serde_json::from_slice(line).map_err(|e| StoreError::CorruptLog {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(Parsed {
        records,
        valid_len: offset as u64,
        torn: false,
    })
}

/// Read a log directory without modifying it.
pub fn read_log(dir: &Path) -> Result<LogSnapshot, StoreError> {
    Ok(LogSnapshot {
        sessions: read_jsonl(&dir.join(SESSIONS_FILE))?.records,
        events: read_jsonl(&dir.join(EVENTS_FILE))?.records,
    })
}

pub fn log_exists(dir: &Path) -> bool {
    dir.join(EVENTS_FILE).exists() || dir.join(SESSIONS_FILE).exists()
}

/// Append handle over an experiment's two log files.
pub struct EventStore {
    dir: PathBuf,
    events: Mutex<File>,
    sessions: Mutex<File>,
    fsync_every: usize,
    appended: AtomicUsize,
}

impl EventStore {
    /// Open for appending, returning the replayed contents. Torn tails are
    /// truncated away first.
    pub fn open(dir: &Path, fsync_every: usize) -> Result<(EventStore, LogSnapshot), StoreError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        let sessions_path = dir.join(SESSIONS_FILE);
        let events_path = dir.join(EVENTS_FILE);
        let sessions = read_jsonl::<SessionRecord>(&sessions_path)?;
        let events = read_jsonl::<InteractionEvent>(&events_path)?;
        let open = |path: &Path, parsed_len: u64, torn: bool| -> Result<File, StoreError> {
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| StoreError::io(path, e))?;
            if torn {
                f.set_len(parsed_len).map_err(|e| StoreError::io(path, e))?;
                f.sync_all().map_err(|e| StoreError::io(path, e))?;
            }
            Ok(f)
        };
        let store = EventStore {
            dir: dir.to_path_buf(),
            sessions: Mutex::new(open(&sessions_path, sessions.valid_len, sessions.torn)?),
            events: Mutex::new(open(&events_path, events.valid_len, events.torn)?),
            fsync_every: fsync_every.max(1),
            appended: AtomicUsize::new(0),
        };
        Ok((
            store,
            LogSnapshot {
                sessions: sessions.records,
                events: events.records,
            },
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append<T: Serialize>(&self, file: &Mutex<File>, name: &str, record: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).expect("log records serialize");
        line.push(b'\n');
        let path = self.dir.join(name);
        let mut f = file.lock().expect("log lock");
        f.write_all(&line).map_err(|e| StoreError::io(&path, e))?;
        let n = self.appended.fetch_add(1, Ordering::Relaxed) + 1;
        if n % self.fsync_every == 0 {
            f.sync_data().map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(())
    }

    pub fn append_event(&self, event: &InteractionEvent) -> Result<(), StoreError> {
        self.append(&self.events, EVENTS_FILE, event)
    }

    pub fn append_session(&self, record: &SessionRecord) -> Result<(), StoreError> {
        self.append(&self.sessions, SESSIONS_FILE, record)
    }

    /// Flush both files to disk.
    pub fn sync(&self) -> Result<(), StoreError> {
        for (file, name) in [(&self.events, EVENTS_FILE), (&self.sessions, SESSIONS_FILE)] {
            file.lock()
                .expect("log lock")
                .sync_all()
                .map_err(|e| StoreError::io(&self.dir.join(name), e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub kept: usize,
    pub set_aside: usize,
    pub torn_tails: usize,
}

fn recover_file<T: DeserializeOwned>(path: &Path, report: &mut RecoveryReport) -> Result<(), StoreError> {
    let text = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut keep = Vec::new();
    let mut rejected = Vec::new();
    let complete = text.ends_with(b"\n");
    let mut lines: Vec<&[u8]> = text.split(|&b| b == b'\n').collect();
    if complete {
        lines.pop();
    } else if let Some(tail) = lines.pop() {
        if !tail.is_empty() {
            report.torn_tails += 1;
            rejected.extend_from_slice(tail);
            rejected.push(b'\n');
        }
    }
    for line in lines {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        if serde_json::from_slice::<T>(line).is_ok() {
            keep.extend_from_slice(line);
            keep.push(b'\n');
            report.kept += 1;
        } else {
            rejected.extend_from_slice(line);
            rejected.push(b'\n');
            report.set_aside += 1;
        }
    }
    if !rejected.is_empty() {
        let mut aside = path.as_os_str().to_owned();
        aside.push(".rejected");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&aside)
            .map_err(|e| StoreError::io(path, e))?;
        f.write_all(&rejected).map_err(|e| StoreError::io(path, e))?;
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, &keep).map_err(|e| StoreError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))?;
    }
    Ok(())
}

/// Move unparsable lines of both log files into `*.rejected` siblings.
pub fn recover(dir: &Path) -> Result<RecoveryReport, StoreError> {
    let mut report = RecoveryReport::default();
    recover_file::<SessionRecord>(&dir.join(SESSIONS_FILE), &mut report)?;
    recover_file::<InteractionEvent>(&dir.join(EVENTS_FILE), &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EventKind, Payload, Phase};

    fn event(seq: u64) -> InteractionEvent {
        InteractionEvent {
            seq,
            session_id: "s000001".into(),
            claim_id: Some("c1".into()),
            timestamp: seq,
            kind: EventKind::Like,
            phase: Phase::Pre,
            payload: Payload::None,
        }
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (store, snap) = EventStore::open(dir.path(), 1).unwrap();
            assert!(snap.events.is_empty());
            store.append_event(&event(0)).unwrap();
            store.append_event(&event(1)).unwrap();
        }
        let (_, snap) = EventStore::open(dir.path(), 1).unwrap();
        assert_eq!(snap.events, vec![event(0), event(1)]);
    }

    #[test]
    fn torn_tail_is_dropped_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        let mut text = serde_json::to_string(&event(0)).unwrap();
        text.push('\n');
        text.push_str("{\"seq\":1,\"sess");
        fs::write(&path, &text).unwrap();
        assert_eq!(read_log(dir.path()).unwrap().events.len(), 1);
        let (store, snap) = EventStore::open(dir.path(), 1).unwrap();
        assert_eq!(snap.events.len(), 1);
        store.append_event(&event(2)).unwrap();
        drop(store);
        assert_eq!(read_log(dir.path()).unwrap().events, vec![event(0), event(2)]);
    }

    #[test]
    fn corrupt_middle_line_is_reported_and_recoverable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        let good = serde_json::to_string(&event(0)).unwrap();
        fs::write(&path, format!("{good}\nnot json\n{good}\n")).unwrap();
        let err = EventStore::open(dir.path(), 1).err().unwrap();
        match &err {
            StoreError::CorruptLog { line, .. } => assert_eq!(*line, 2),
            other => panic!("{other:?}"),
        }
        assert!(err.recovery_command().unwrap().starts_with("feedlab recover --log"));
        let report = recover(dir.path()).unwrap();
        assert_eq!((report.kept, report.set_aside), (2, 1));
        assert_eq!(read_log(dir.path()).unwrap().events.len(), 2);
        assert!(dir.path().join("events.jsonl.rejected").exists());
    }

    #[test]
    fn session_index_folds_records() {
        let sid: SessionId = "s000001".into();
        let snap = LogSnapshot {
            sessions: vec![
                SessionRecord::Created {
                    session_id: sid.clone(),
                    user_id: "u1".into(),
                    arm: InterventionArm::LabelOnly,
                    feed: vec!["c1".into()],
                    trial: 1,
                    created_at: 0,
                },
                SessionRecord::Stage {
                    session_id: sid.clone(),
                    stage: Stage::Done,
                    at: 5,
                },
            ],
            events: vec![],
        };
        let idx = snap.session_index();
        assert_eq!(idx.len(), 1);
        assert!(idx[0].completed());
    }
}
