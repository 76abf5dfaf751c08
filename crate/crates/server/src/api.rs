use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kcat_core::analytics::{
    accuracy_matrix, error_report, integrate, AnnotationFile, IntegrationResult,
};
use kcat_core::session::{Action, ExportFormat, LogEntry, Phase};
use kcat_core::{AnnotationSession, SessionError, TypeId};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::project::{report_json, Project};
use crate::state::AppState;

/// Header carrying the annotator id on mutating requests.
pub const ANNOTATOR_HEADER: &str = "x-kcat-annotator";

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/docs", get(list_docs))
        .route("/docs/{doc_id}", get(get_doc))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{sid}", get(get_session))
        .route(
            "/sessions/{sid}/mentions/{mid}/select-type",
            post(select_type),
        )
        .route("/sessions/{sid}/mentions/{mid}/revise", post(revise))
        .route("/sessions/{sid}/mentions/{mid}/accept", post(accept))
        .route("/sessions/{sid}/mentions/{mid}/label", post(label))
        .route("/sessions/{sid}/mentions/{mid}/reset", post(reset_mention))
        .route("/sessions/{sid}/undo", post(undo))
        .route("/sessions/{sid}/redo", post(redo))
        .route("/sessions/{sid}/reset", post(reset_all))
        .route("/sessions/{sid}/export", get(export))
        .route("/manage/matrix", get(matrix))
        .route("/manage/errors", get(errors))
        .route("/manage/integrate", post(integrate_labels))
        .route("/stats/reduction", get(reduction))
        .with_state(state)
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn annotator(headers: &HeaderMap) -> Option<&str> {
    headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok())
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    let p = state.project();
    Json(json!({
        "status": "ok",
        "types": p.kb.hierarchy().len(),
        "docs": p.corpus.len(),
    }))
}

#[derive(Serialize)]
struct DocSummary<'a> {
    doc_id: &'a str,
    mentions: usize,
    chars: usize,
}

async fn list_docs(State(state): State<AppState>) -> Json<serde_json::Value> {
    let docs: Vec<DocSummary> = state
        .project()
        .corpus
        .docs()
        .iter()
        .map(|d| DocSummary {
            doc_id: &d.doc_id,
            mentions: d.mentions.len(),
            chars: d.char_len(),
        })
        .collect();
    Json(json!({ "docs": docs }))
}

async fn get_doc(State(state): State<AppState>, Path(doc_id): Path<String>) -> ApiResult<Response> {
    let doc = state
        .project()
        .corpus
        .doc(&doc_id)
        .ok_or(SessionError::UnknownDoc(doc_id))?;
    Ok(Json(doc).into_response())
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    annotator_id: String,
    doc_id: String,
    labeled: usize,
    mentions: usize,
}

async fn list_sessions(State(state): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let mut out = Vec::new();
    for id in state.session_ids() {
        out.push(state.read(&id, |s| {
            Ok(SessionSummary {
                session_id: s.session_id().to_string(),
                annotator_id: s.annotator_id().to_string(),
                doc_id: s.doc_id().to_string(),
                labeled: s.states().filter(|m| m.final_label.is_some()).count(),
                mentions: s.states().count(),
            })
        })?);
    }
    Ok(Json(json!({ "sessions": out })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    annotator: String,
    doc_id: String,
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let req = body(payload)?;
    let session_id = state.create_session(&req.annotator, &req.doc_id)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": session_id })),
    ))
}

/// Everything the annotation screen shows for one session.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub session_id: String,
    pub annotator_id: String,
    pub doc_id: String,
    pub text: String,
    pub can_undo: bool,
    pub can_redo: bool,
    pub mentions: Vec<MentionView>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MentionView {
    pub mention_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub phase: Phase,
    pub selected_types: Vec<TypeId>,
    pub final_label: Option<TypeId>,
    pub final_entity: Option<String>,
    pub predicted: Option<String>,
    /// False when the whole hierarchy is offered.
    pub constrained: bool,
    pub candidates: Vec<CandidateView>,
    pub offered_types: Vec<TypeView>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CandidateView {
    pub entity_id: String,
    pub name: String,
    pub score: f64,
    pub description: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TypeView {
    pub type_id: TypeId,
    pub parents: Vec<TypeId>,
    pub definition: String,
}

fn session_view(p: &Project, s: &AnnotationSession) -> ApiResult<SessionView> {
    let kb = &p.kb;
    let doc = p
        .corpus
        .doc(s.doc_id())
        .ok_or_else(|| SessionError::UnknownDoc(s.doc_id().to_string()))?;
    let h = kb.hierarchy();
    let mut mentions = Vec::with_capacity(doc.mentions.len());
    for m in &doc.mentions {
        let st = s
            .state(&m.mention_id)
            .ok_or_else(|| SessionError::UnknownMention(m.mention_id.clone()))?;
        let candidates = st
            .working_candidates
            .candidates()
            .iter()
            .map(|c| {
                let e = kb.entity(&c.entity_id);
                CandidateView {
                    entity_id: c.entity_id.clone(),
                    name: e.map(|e| e.name.clone()).unwrap_or_default(),
                    score: c.score,
                    description: e.map(|e| e.description.clone()).unwrap_or_default(),
                }
            })
            .collect();
        let offered_types = st
            .offered_types(kb)
            .into_iter()
            .map(|t| TypeView {
                parents: h
                    .parents(&t)
                    .map(|ps| ps.into_iter().cloned().collect())
                    .unwrap_or_default(),
                definition: h.definition(&t).unwrap_or_default().to_string(),
                type_id: t,
            })
            .collect();
        mentions.push(MentionView {
            mention_id: m.mention_id.clone(),
            start: m.start,
            end: m.end,
            surface: m.surface.clone(),
            phase: st.phase,
            selected_types: st.selected_types.clone(),
            final_label: st.final_label.clone(),
            final_entity: st.final_entity.clone(),
            predicted: st.working_candidates.predicted().map(str::to_string),
            constrained: st.is_constrained(),
            candidates,
            offered_types,
        });
    }
    Ok(SessionView {
        session_id: s.session_id().to_string(),
        annotator_id: s.annotator_id().to_string(),
        doc_id: s.doc_id().to_string(),
        text: doc.text.clone(),
        can_undo: s.can_undo(),
        can_redo: s.can_redo(),
        mentions,
    })
}

async fn get_session(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> ApiResult<Json<SessionView>> {
    state
        .read(&sid, |s| session_view(state.project(), s))
        .map(Json)
}

fn apply(
    state: &AppState,
    sid: &str,
    headers: &HeaderMap,
    action: Action,
) -> ApiResult<Json<SessionView>> {
    state
        .mutate(
            sid,
            annotator(headers),
            |s, p| {
                s.apply(&p.kb, action.clone())?;
                Ok(LogEntry::Apply { action })
            },
            |s| session_view(state.project(), s),
        )
        .map(Json)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeBody {
    #[serde(rename = "type")]
    type_id: TypeId,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityBody {
    entity: String,
}

async fn select_type(
    State(state): State<AppState>,
    Path((sid, mention_id)): Path<(String, String)>,
    headers: HeaderMap,
    payload: Result<Json<TypeBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let type_id = body(payload)?.type_id;
    apply(
        &state,
        &sid,
        &headers,
        Action::SelectType {
            mention_id,
            type_id,
        },
    )
}

async fn label(
    State(state): State<AppState>,
    Path((sid, mention_id)): Path<(String, String)>,
    headers: HeaderMap,
    payload: Result<Json<TypeBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let type_id = body(payload)?.type_id;
    apply(
        &state,
        &sid,
        &headers,
        Action::SetLabel {
            mention_id,
            type_id,
        },
    )
}

async fn revise(
    State(state): State<AppState>,
    Path((sid, mention_id)): Path<(String, String)>,
    headers: HeaderMap,
    payload: Result<Json<EntityBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let entity_id = body(payload)?.entity;
    apply(
        &state,
        &sid,
        &headers,
        Action::ReviseEntity {
            mention_id,
            entity_id,
        },
    )
}

async fn accept(
    State(state): State<AppState>,
    Path((sid, mention_id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    apply(&state, &sid, &headers, Action::AcceptEntity { mention_id })
}

async fn reset_mention(
    State(state): State<AppState>,
    Path((sid, mention_id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    apply(&state, &sid, &headers, Action::ResetMention { mention_id })
}

async fn reset_all(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    apply(&state, &sid, &headers, Action::ResetAll)
}

fn history(
    state: &AppState,
    sid: &str,
    headers: &HeaderMap,
    redo: bool,
) -> ApiResult<Json<SessionView>> {
    state
        .mutate(
            sid,
            annotator(headers),
            |s, _| {
                if redo {
                    s.redo().map(|_| LogEntry::Redo)
                } else {
                    s.undo().map(|_| LogEntry::Undo)
                }
            },
            |s| session_view(state.project(), s),
        )
        .map(Json)
}

async fn undo(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    history(&state, &sid, &headers, false)
}

async fn redo(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    history(&state, &sid, &headers, true)
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format: ExportFormat = q.format.as_deref().unwrap_or("json").parse()?;
    let corpus = &state.project().corpus;
    let (bytes, name) = state.read(&sid, |s| {
        let doc = corpus
            .doc(s.doc_id())
            .ok_or_else(|| SessionError::UnknownDoc(s.doc_id().to_string()))?;
        let name = format!("{}.{}.{}", s.doc_id(), s.annotator_id(), format.extension());
        Ok((s.export(doc, format)?, name))
    })?;
    let content_type = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Txt => "text/plain; charset=utf-8",
    };
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{}\"", name.replace('"', "_")),
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Deserialize)]
struct MatrixQuery {
    sessions: Option<String>,
}

fn split_ids(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if !out.iter().any(|x| x == id) {
            out.push(id.to_string());
        }
    }
    out
}

async fn matrix(
    State(state): State<AppState>,
    Query(q): Query<MatrixQuery>,
) -> ApiResult<Response> {
    let ids = q.sessions.as_deref().map(split_ids);
    let files = state.annotation_files(ids.as_deref())?;
    Ok(Json(accuracy_matrix(&files)?).into_response())
}

#[derive(Deserialize)]
struct ErrorsQuery {
    gold: String,
    pred: String,
    sessions: Option<String>,
    format: Option<String>,
}

fn annotator_file(files: &[AnnotationFile], id: &str) -> ApiResult<AnnotationFile> {
    files
        .iter()
        .find(|f| f.annotator_id == id)
        .cloned()
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UnknownAnnotator",
                format!("no sessions for annotator `{id}`"),
            )
        })
}

async fn errors(
    State(state): State<AppState>,
    Query(q): Query<ErrorsQuery>,
) -> ApiResult<Response> {
    let ids = q.sessions.as_deref().map(split_ids);
    let files = state.annotation_files(ids.as_deref())?;
    let gold = annotator_file(&files, &q.gold)?;
    let pred = annotator_file(&files, &q.pred)?;
    let p = state.project();
    let report = error_report(p.kb.hierarchy(), &gold, &pred, &p.corpus)?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(report).into_response()),
        "tex" => Ok((
            [(header::CONTENT_TYPE, "application/x-tex; charset=utf-8")],
            report.to_tex(&p.corpus),
        )
            .into_response()),
        other => Err(SessionError::UnknownFormat(other.to_string()).into()),
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IntegrateBody {
    #[serde(default)]
    sessions: Option<Vec<String>>,
}

async fn integrate_labels(
    State(state): State<AppState>,
    payload: Result<Json<IntegrateBody>, JsonRejection>,
) -> ApiResult<Response> {
    let req = match payload {
        Err(JsonRejection::MissingJsonContentType(_)) => IntegrateBody::default(),
        other => body(other)?,
    };
    let ids = req.sessions.map(|v| split_ids(&v.join(",")));
    let files = state.annotation_files(ids.as_deref())?;
    let result = integrate(state.project().kb.hierarchy(), &files)?;
    Ok(Json(IntegrationReport::new(&files, result)).into_response())
}

/// Integrated labels together with the annotators that were merged.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct IntegrationReport {
    pub annotators: Vec<String>,
    #[serde(flatten)]
    pub result: IntegrationResult,
}

impl IntegrationReport {
    pub fn new(files: &[AnnotationFile], result: IntegrationResult) -> Self {
        IntegrationReport {
            annotators: files.iter().map(|f| f.annotator_id.clone()).collect(),
            result,
        }
    }
}

async fn reduction(State(state): State<AppState>) -> ApiResult<Response> {
    let report = state.project().reduction()?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        report_json(&report),
    )
        .into_response())
}
