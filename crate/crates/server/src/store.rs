//! File-backed session logs: one JSONL file per session under
//! `<data_dir>/sessions/`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use kcat_core::session::{LogEntry, PERSISTED_HISTORY};
use kcat_core::{AnnotationSession, KnowledgeBase};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(SessionStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    /// Starts a new log holding only the session header.
    pub fn create(&self, session: &AnnotationSession) -> Result<(), StoreError> {
        let path = self.log_path(session.session_id());
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(io_err)?;
        f.write_all(&line(&LogEntry::Open(session.header())))
            .and_then(|_| f.sync_data())
            .map_err(io_err)
    }

    /// Appends one entry and syncs it to disk.
    pub fn append(&self, session_id: &str, entry: &LogEntry) -> Result<(), StoreError> {
        let path = self.log_path(session_id);
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        f.write_all(&line(entry))
            .and_then(|_| f.sync_data())
            .map_err(io_err)
    }

    /// Atomically replaces a log.
    pub fn rewrite(&self, session_id: &str, entries: &[LogEntry]) -> Result<(), StoreError> {
        let path = self.log_path(session_id);
        let tmp = path.with_extension("jsonl.tmp");
        let io_err = |source| StoreError::Io {
            path: tmp.clone(),
            source,
        };
        let mut f = File::create(&tmp).map_err(io_err)?;
        for e in entries {
            f.write_all(&line(e)).map_err(io_err)?;
        }
        f.sync_data().map_err(io_err)?;
        fs::rename(&tmp, &path).map_err(io_err)
    }

    pub fn read(&self, path: &Path) -> Result<Vec<LogEntry>, StoreError> {
        let f = File::open(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, l) in BufReader::new(f).lines().enumerate() {
            let l = l.map_err(|source| StoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if l.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&l).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })?;
            entries.push(entry);
        }
        Ok(entries)
    }

    /// Replays a session's log without modifying it.
    pub fn load(
        &self,
        kb: &KnowledgeBase,
        session_id: &str,
    ) -> Result<AnnotationSession, StoreError> {
        let path = self.log_path(session_id);
        let entries = self.read(&path)?;
        AnnotationSession::replay(kb, entries).map_err(|e| StoreError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    /// Replays one log. Logs longer than their compacted form are rewritten,
    /// keeping the last [`PERSISTED_HISTORY`] commands.
    pub fn restore(
        &self,
        kb: &KnowledgeBase,
        path: &Path,
    ) -> Result<AnnotationSession, StoreError> {
        let entries = self.read(path)?;
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.to_path_buf(),
            message,
        };
        let n = entries.len();
        let session = AnnotationSession::replay(kb, entries).map_err(|e| corrupt(e.to_string()))?;
        let expected = self.log_path(session.session_id());
        if expected != path {
            return Err(corrupt(format!(
                "header names session `{}`",
                session.session_id()
            )));
        }
        let compacted = session.compacted_log(PERSISTED_HISTORY);
        if compacted.len() >= n {
            return Ok(session);
        }
        let session =
            AnnotationSession::replay(kb, compacted.clone()).map_err(|e| corrupt(e.to_string()))?;
        self.rewrite(session.session_id(), &compacted)?;
        Ok(session)
    }

    /// Every `*.jsonl` log in the store, in file-name order.
    pub fn log_files(&self) -> Result<Vec<PathBuf>, StoreError> {
        let io_err = |source| StoreError::Io {
            path: self.dir.clone(),
            source,
        };
        let mut out = Vec::new();
        for e in fs::read_dir(&self.dir).map_err(io_err)? {
            let p = e.map_err(io_err)?.path();
            if p.extension().is_some_and(|x| x == "jsonl") {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }
}

fn line(entry: &LogEntry) -> Vec<u8> {
    let mut v = serde_json::to_vec(entry).expect("log entries serialize");
    v.push(b'\n');
    v
}
