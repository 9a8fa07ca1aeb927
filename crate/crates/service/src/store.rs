use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rckl::Kernel;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::{
    embedding_of, now_secs, AnswerOutcome, AnswerRecord, CheckpointState, Embedding, PendingQuery, Session,
    SessionInfo, SessionMeta, SessionObject, SessionSettings, SessionStats,
};

const META: &str = "meta.json";
const ANSWERS: &str = "answers.jsonl";
const CHECKPOINT: &str = "checkpoint.json";

/// Parameters of a new session.
#[derive(Clone, Debug, Default)]
pub struct NewSession {
    pub objects: Vec<(String, Option<String>)>,
    pub settings: SessionSettings,
}

/// All sessions of one service instance, optionally backed by a directory
/// with one subdirectory per session.
#[derive(Debug, Default)]
pub struct SessionStore {
    root: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock_err<T>(_: T) -> ServiceError {
    ServiceError::Storage("session lock poisoned".into())
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a store directory and recovers every
    /// session found in it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.join(META).is_file() {
                continue;
            }
            let session = load_session(&dir)?;
            tracing::info!(id = session.id(), answers = session.answers().len(), "recovered session");
            sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        Ok(Self {
            root: Some(root),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .map(|s| s.keys().cloned().collect())
            .unwrap_or_default();
        ids.sort();
        ids
    }

    pub fn create(&self, spec: NewSession) -> Result<String> {
        let id = format!("{:032x}", rand::random::<u128>());
        let objects = spec
            .objects
            .into_iter()
            .enumerate()
            .map(|(index, (label, media_url))| SessionObject {
                index,
                label,
                media_url,
            })
            .collect();
        let meta = SessionMeta {
            id: id.clone(),
            objects,
            settings: spec.settings,
            created_at: now_secs(),
        };
        let session = Session::new(meta)?;
        if let Some(dir) = self.session_dir(&id) {
            fs::create_dir_all(&dir)?;
            write_atomic(&dir.join(META), &serde_json::to_vec_pretty(session.meta())?)?;
            File::create(dir.join(ANSWERS))?;
        }
        tracing::info!(id = %id, objects = session.n(), "created session");
        self.sessions
            .write()
            .map_err(lock_err)?
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(id))
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .map_err(lock_err)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<R>) -> Result<R> {
        let handle = self.get(id)?;
        let mut guard = handle.lock().map_err(lock_err)?;
        f(&mut guard)
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo> {
        self.with_session(id, |s| Ok(s.info()))
    }

    pub fn next_query(&self, id: &str) -> Result<PendingQuery> {
        self.with_session(id, |s| Ok(s.next_query()))
    }

    /// Applies an answer, appends it to the log and writes a checkpoint when
    /// one is due.
    pub fn submit_answer(&self, id: &str, query_id: u64, chosen: usize) -> Result<AnswerOutcome> {
        let dir = self.session_dir(id);
        self.with_session(id, |s| {
            let (record, outcome) = s.submit_answer(query_id, chosen)?;
            if let Some(dir) = &dir {
                append_answer(dir, &record)?;
                if s.checkpoint_due() {
                    write_checkpoint(dir, s.kernel(), &s.checkpoint_state())?;
                }
            }
            Ok(outcome)
        })
    }

    pub fn stats(&self, id: &str) -> Result<SessionStats> {
        self.with_session(id, |s| s.stats())
    }

    pub fn embedding(&self, id: &str, k: usize) -> Result<Embedding> {
        let (kernel, meta) = self.with_session(id, |s| Ok((s.kernel().clone(), s.meta().clone())))?;
        embedding_of(&kernel, &meta.objects, k)
    }

    pub fn kernel_checkpoint(&self, id: &str) -> Result<String> {
        self.with_session(id, |s| Ok(s.kernel().to_checkpoint_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn append_answer(dir: &Path, record: &AnswerRecord) -> Result<()> {
    let mut f = OpenOptions::new().append(true).create(true).open(dir.join(ANSWERS))?;
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    state: CheckpointState,
    kernel: String,
}

fn write_checkpoint(dir: &Path, kernel: &Kernel, state: &CheckpointState) -> Result<()> {
    let file = CheckpointFile {
        state: *state,
        kernel: kernel.to_checkpoint_string(),
    };
    write_atomic(&dir.join(CHECKPOINT), &serde_json::to_vec_pretty(&file)?)
}

/// Reads the answer log, dropping a torn final line left by a crash.
fn read_answers(path: &Path) -> Result<Vec<AnswerRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => {
                tracing::warn!(path = %path.display(), "ignoring truncated final log line");
            }
            Err(e) => {
                return Err(ServiceError::Storage(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn load_session(dir: &Path) -> Result<Session> {
    let meta: SessionMeta = serde_json::from_slice(&fs::read(dir.join(META))?)?;
    let answers = read_answers(&dir.join(ANSWERS))?;
    let path = dir.join(CHECKPOINT);
    let checkpoint = if path.is_file() {
        let file: CheckpointFile = serde_json::from_slice(&fs::read(&path)?)?;
        Some((Kernel::from_checkpoint_str(&file.kernel)?, file.state))
    } else {
        None
    };
    Session::recover(meta, answers, checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> NewSession {
        NewSession {
            objects: (0..n).map(|i| (format!("item {i}"), None)).collect(),
            settings: SessionSettings {
                seed: 11,
                checkpoint_every: 5,
                ..SessionSettings::default()
            },
        }
    }

    #[test]
    fn reopen_restores_kernel_and_log() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(spec(6)).unwrap();
        for i in 0..13 {
            let q = store.next_query(&id).unwrap();
            store.submit_answer(&id, q.query_id, q.options[i % 2]).unwrap();
        }
        let before = store.kernel_checkpoint(&id).unwrap();
        let ckpt: CheckpointFile =
            serde_json::from_slice(&fs::read(dir.path().join(&id).join(CHECKPOINT)).unwrap())
                .unwrap();
        assert_eq!(ckpt.state.answers, 10);
        drop(store);

        let reopened = SessionStore::open(dir.path()).unwrap();
        assert_eq!(reopened.ids(), vec![id.clone()]);
        let after = reopened.kernel_checkpoint(&id).unwrap();
        let (a, b) = (
            Kernel::from_checkpoint_str(&before).unwrap(),
            Kernel::from_checkpoint_str(&after).unwrap(),
        );
        assert!(a.matrix().max_abs_diff(b.matrix()) <= 1e-12);
        assert_eq!(reopened.stats(&id).unwrap().answers, 13);
    }

    #[test]
    fn torn_last_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ANSWERS);
        let rec = AnswerRecord {
            query_id: 0,
            head: 0,
            chosen: 1,
            other: 2,
        };
        fs::write(&path, format!("{}\n{{\"query_id\":1,\"he", serde_json::to_string(&rec).unwrap())).unwrap();
        assert_eq!(read_answers(&path).unwrap(), vec![rec]);
        fs::write(&path, format!("garbage\n{}\n", serde_json::to_string(&rec).unwrap())).unwrap();
        assert!(read_answers(&path).is_err());
    }

    #[test]
    fn unknown_session_is_reported() {
        let store = SessionStore::in_memory();
        assert!(matches!(
            store.stats("nope"),
            Err(ServiceError::SessionNotFound(_))
        ));
    }
}
