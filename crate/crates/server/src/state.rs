use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use axum::http::StatusCode;
use kcat_core::analytics::{group_by_annotator, AnnotationFile};
use kcat_core::session::{LogEntry, SessionMeta};
use kcat_core::{AnnotationSession, SessionConfig, SessionError};

use crate::error::ApiError;
use crate::project::Project;
use crate::store::{SessionStore, StoreError};

type Slot = Arc<Mutex<AnnotationSession>>;

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    project: Project,
    store: SessionStore,
    sessions: RwLock<BTreeMap<String, Slot>>,
}

impl AppState {
    /// Replays every session log in the store. Unreadable logs are skipped
    /// with a warning.
    pub fn new(project: Project, store: SessionStore) -> Result<Self, StoreError> {
        let mut sessions = BTreeMap::new();
        for path in store.log_files()? {
            match store.restore(&project.kb, &path) {
                Ok(s) => {
                    sessions.insert(s.session_id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::warn!("skipping session log: {e}"),
            }
        }
        tracing::info!(sessions = sessions.len(), "session logs replayed");
        Ok(AppState {
            inner: Arc::new(Inner {
                project,
                store,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn project(&self) -> &Project {
        &self.inner.project
    }

    pub fn store(&self) -> &SessionStore {
        &self.inner.store
    }

    fn slot(&self, session_id: &str) -> Result<Slot, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session map lock poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(session_id))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.inner
            .sessions
            .read()
            .expect("session map lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Opens a session and writes its log header before publishing it.
    pub fn create_session(&self, annotator: &str, doc_id: &str) -> Result<String, ApiError> {
        if annotator.trim().is_empty() {
            return Err(ApiError::bad_request("annotator must not be empty"));
        }
        let project = self.project();
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let session = AnnotationSession::open(
            &project.kb,
            &project.corpus,
            SessionMeta {
                session_id: session_id.clone(),
                annotator_id: annotator.to_string(),
                doc_id: doc_id.to_string(),
            },
            &project.linker(),
            SessionConfig {
                k_max: project.k_max,
                ..SessionConfig::default()
            },
        )?;
        self.store().create(&session)?;
        self.inner
            .sessions
            .write()
            .expect("session map lock poisoned")
            .insert(session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(session_id)
    }

    /// Runs `f` on a snapshot of the session.
    pub fn read<T>(
        &self,
        session_id: &str,
        f: impl FnOnce(&AnnotationSession) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let slot = self.slot(session_id)?;
        let session = slot.lock().map_err(|_| poisoned())?;
        f(&session)
    }

    /// Applies a mutation owned by `annotator`. The resulting log entry is
    /// on disk before this returns; if writing it fails the session is
    /// rolled back. A session already being mutated yields 409.
    pub fn mutate<T>(
        &self,
        session_id: &str,
        annotator: Option<&str>,
        f: impl FnOnce(&mut AnnotationSession, &Project) -> Result<LogEntry, SessionError>,
        view: impl FnOnce(&AnnotationSession) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let slot = self.slot(session_id)?;
        let mut session = match slot.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "SessionBusy",
                    "another request is modifying this session",
                ))
            }
            Err(TryLockError::Poisoned(_)) => return Err(poisoned()),
        };
        if annotator != Some(session.annotator_id()) {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                "NotOwner",
                format!(
                    "session `{session_id}` belongs to another annotator; send its id in `{}`",
                    crate::api::ANNOTATOR_HEADER
                ),
            ));
        }
        let snapshot = session.clone();
        let entry = f(&mut session, self.project())?;
        if let Err(e) = self.store().append(session_id, &entry) {
            *session = snapshot;
            return Err(e.into());
        }
        view(&session)
    }

    /// One annotation file per annotator over the given sessions (all
    /// sessions when `ids` is `None`), in the order the annotators first
    /// appear.
    pub fn annotation_files(
        &self,
        ids: Option<&[String]>,
    ) -> Result<Vec<AnnotationFile>, ApiError> {
        let ids = match ids {
            Some(ids) => ids.to_vec(),
            None => self.session_ids(),
        };
        let project = self.project();
        let mut files = Vec::with_capacity(ids.len());
        for id in &ids {
            let exported = self.read(id, |s| {
                let doc = project
                    .corpus
                    .doc(s.doc_id())
                    .ok_or_else(|| SessionError::UnknownDoc(s.doc_id().to_string()))?;
                Ok(s.export_document(doc)?)
            })?;
            files.push(AnnotationFile::from_export(
                &exported,
                project.kb.hierarchy(),
            )?);
        }
        Ok(group_by_annotator(files)?)
    }
}

fn poisoned() -> ApiError {
    ApiError::internal("session lock poisoned")
}
