use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use chrono::{DateTime, Utc};
use mindreader_core::dataset::Sentiment;
use mindreader_core::interview::{InterviewEngine, InterviewSession, Phase};
use mindreader_core::kg::EntityId;
use mindreader_core::sampling::Popularity;
use mindreader_core::Error as CoreError;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::api::{AnswerRequest, SessionView};
use crate::journal::{Journal, LoggedAnswer, Record};
use crate::{ServiceConfig, ServiceError};

const LOG_FILE: &str = "answers.ndjson";

/// Everything the interview needs, loaded once at start-up.
pub struct InterviewData {
    pub engine: InterviewEngine,
    pub popularity: Popularity,
}

struct SessionEntry {
    session: InterviewSession,
    /// Answers and resulting view of every applied batch, by batch number.
    applied: BTreeMap<u32, (Vec<(EntityId, Sentiment)>, SessionView)>,
}

struct Ready {
    data: Arc<InterviewData>,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<SessionEntry>>>>,
    /// Session ids per token, oldest first. Its lock also serializes session
    /// creation.
    tokens: tokio::sync::Mutex<HashMap<String, Vec<String>>>,
}

impl Ready {
    fn entry(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<SessionEntry>>> {
        self.sessions.read().unwrap().get(id).cloned()
    }
}

struct ExportRow {
    at: DateTime<Utc>,
    user: String,
    entity: String,
    is_item: bool,
    sentiment: i8,
}

struct Inner {
    config: ServiceConfig,
    ready: OnceLock<Arc<Ready>>,
    journal: tokio::sync::Mutex<Journal>,
    /// Records read at open time, replayed by `install`.
    backlog: Mutex<Option<Vec<Record>>>,
    rows: Mutex<Vec<ExportRow>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

/// Pseudonymous export id of a token, so the export never reveals the token
/// that would let someone resume a participant's session.
pub(crate) fn export_user_id(token: &str) -> String {
    let digest = Sha256::digest(token.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn mint_id() -> String {
    let bytes: [u8; 16] = rand::rng().random();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn valid_token(t: &str) -> bool {
    (1..=128).contains(&t.len()) && t.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn map_core(e: CoreError) -> ServiceError {
    match e {
        CoreError::AnswerMismatch(m) => ServiceError::Conflict(m),
        CoreError::UnknownEntity(id) => ServiceError::Conflict(format!("unknown entity {id}")),
        CoreError::SessionDone => ServiceError::Gone,
        e @ CoreError::NotEnoughMovies { .. } => ServiceError::Conflict(e.to_string()),
        e => ServiceError::Internal(e.to_string()),
    }
}

fn to_logged(data: &InterviewData, answers: &[(EntityId, Sentiment)]) -> Vec<LoggedAnswer> {
    let graph = data.engine.graph();
    answers
        .iter()
        .map(|&(id, s)| LoggedAnswer {
            entity: graph.uri(id).to_string(),
            is_item: graph.is_recommendable(id),
            sentiment: s.value(),
        })
        .collect()
}

fn from_logged(data: &InterviewData, answers: &[LoggedAnswer]) -> Result<Vec<(EntityId, Sentiment)>, ServiceError> {
    answers
        .iter()
        .map(|a| {
            let id = data.engine.graph().lookup(&a.entity).ok_or_else(|| {
                ServiceError::Storage(format!("logged entity `{}` is not in the graph", a.entity))
            })?;
            let s = Sentiment::from_value(a.sentiment.into())
                .ok_or_else(|| ServiceError::Storage(format!("bad logged sentiment {}", a.sentiment)))?;
            Ok((id, s))
        })
        .collect()
}

fn same_answers(a: &[(EntityId, Sentiment)], b: &[(EntityId, Sentiment)]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

impl Service {
    /// Opens the answer log under `config.data_dir`. Sessions become available
    /// once [`Service::install`] has run.
    pub fn open(config: ServiceConfig) -> Result<Service, ServiceError> {
        std::fs::create_dir_all(&config.data_dir)
            .map_err(|e| ServiceError::Storage(format!("{}: {e}", config.data_dir.display())))?;
        let (journal, records) = Journal::open(&config.data_dir.join(LOG_FILE))?;
        let mut rows = Vec::new();
        for r in &records {
            if let Record::Answers { at, token, answers, .. } = r {
                let user = export_user_id(token);
                rows.extend(answers.iter().map(|a| ExportRow {
                    at: *at,
                    user: user.clone(),
                    entity: a.entity.clone(),
                    is_item: a.is_item,
                    sentiment: a.sentiment,
                }));
            }
        }
        Ok(Service {
            inner: Arc::new(Inner {
                config,
                ready: OnceLock::new(),
                journal: tokio::sync::Mutex::new(journal),
                backlog: Mutex::new(Some(records)),
                rows: Mutex::new(rows),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn is_ready(&self) -> bool {
        self.inner.ready.get().is_some()
    }

    /// Replays the log against `data` and opens the session endpoints. Blocking.
    pub fn install(&self, data: InterviewData) -> Result<(), ServiceError> {
        let records = self
            .inner
            .backlog
            .lock()
            .unwrap()
            .take()
            .ok_or_else(|| ServiceError::Internal("interview data already installed".into()))?;
        let data = Arc::new(data);
        let mut sessions: HashMap<String, SessionEntry> = HashMap::new();
        let mut tokens: HashMap<String, Vec<String>> = HashMap::new();
        for record in records {
            match record {
                Record::Session {
                    session_id,
                    token,
                    seed,
                    previously_asked,
                    ..
                } => {
                    let prev = previously_asked
                        .iter()
                        .map(|u| {
                            data.engine
                                .graph()
                                .lookup(u)
                                .ok_or_else(|| ServiceError::Storage(format!("logged entity `{u}` is not in the graph")))
                        })
                        .collect::<Result<BTreeSet<_>, _>>()?;
                    let session = data
                        .engine
                        .new_session(&session_id, &token, seed, prev)
                        .map_err(|e| ServiceError::Storage(format!("replaying session {session_id}: {e}")))?;
                    tokens.entry(token).or_default().push(session_id.clone());
                    sessions.insert(
                        session_id,
                        SessionEntry {
                            session,
                            applied: BTreeMap::new(),
                        },
                    );
                }
                Record::Answers {
                    session_id,
                    batch_number,
                    answers,
                    ..
                } => {
                    let entry = sessions
                        .get_mut(&session_id)
                        .ok_or_else(|| ServiceError::Storage(format!("answers for unknown session {session_id}")))?;
                    if entry.session.batch_number != batch_number {
                        return Err(ServiceError::Storage(format!(
                            "session {session_id}: logged batch {batch_number}, expected {}",
                            entry.session.batch_number
                        )));
                    }
                    let answers = from_logged(&data, &answers)?;
                    entry.session = data
                        .engine
                        .submit_batch(&entry.session, &answers)
                        .map_err(|e| ServiceError::Storage(format!("replaying session {session_id}: {e}")))?;
                    let view = SessionView::build(&data, &entry.session);
                    entry.applied.insert(batch_number, (answers, view));
                }
            }
        }
        log::info!("restored {} sessions for {} tokens", sessions.len(), tokens.len());
        let ready = Ready {
            data,
            sessions: RwLock::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(tokio::sync::Mutex::new(v))))
                    .collect(),
            ),
            tokens: tokio::sync::Mutex::new(tokens),
        };
        self.inner
            .ready
            .set(Arc::new(ready))
            .map_err(|_| ServiceError::Internal("interview data already installed".into()))
    }

    fn ready(&self) -> Result<&Arc<Ready>, ServiceError> {
        self.inner.ready.get().ok_or(ServiceError::NotReady)
    }

    /// Resumes the token's open session, or starts a new one that skips
    /// everything the token was already shown.
    pub async fn create_session(&self, token: Option<String>) -> Result<SessionView, ServiceError> {
        let ready = self.ready()?;
        let token = match token {
            Some(t) if valid_token(&t) => t,
            Some(_) => {
                return Err(ServiceError::BadRequest(
                    "token must be 1-128 characters of [A-Za-z0-9_-]".into(),
                ))
            }
            None => mint_id(),
        };
        let mut tokens = ready.tokens.lock().await;
        let mut previously_asked = BTreeSet::new();
        for id in tokens.get(&token).into_iter().flatten() {
            let Some(entry) = ready.entry(id) else { continue };
            let entry = entry.lock().await;
            if entry.session.phase != Phase::Done {
                return Ok(SessionView::build(&ready.data, &entry.session));
            }
            previously_asked.extend(entry.session.asked.iter().copied());
            previously_asked.extend(entry.session.previously_asked.iter().copied());
        }

        let session_id = mint_id();
        let seed: u64 = rand::rng().random();
        let session = ready
            .data
            .engine
            .new_session(&session_id, &token, seed, previously_asked.clone())
            .map_err(map_core)?;
        let graph = ready.data.engine.graph();
        let record = Record::Session {
            at: Utc::now(),
            session_id: session_id.clone(),
            token: token.clone(),
            seed,
            previously_asked: previously_asked.iter().map(|&id| graph.uri(id).to_string()).collect(),
        };
        self.inner.journal.lock().await.append(&record)?;

        let view = SessionView::build(&ready.data, &session);
        ready.sessions.write().unwrap().insert(
            session_id.clone(),
            Arc::new(tokio::sync::Mutex::new(SessionEntry {
                session,
                applied: BTreeMap::new(),
            })),
        );
        tokens.entry(token).or_default().push(session_id);
        Ok(view)
    }

    pub async fn get_session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let ready = self.ready()?;
        let entry = ready.entry(id).ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        let entry = entry.lock().await;
        Ok(SessionView::build(&ready.data, &entry.session))
    }

    /// Applies one batch. The batch is logged before the new state becomes
    /// visible; resending an applied batch returns the original response.
    pub async fn submit(&self, id: &str, req: AnswerRequest) -> Result<SessionView, ServiceError> {
        let ready = self.ready()?;
        let entry = ready.entry(id).ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        let mut entry = entry.lock().await;
        let graph = ready.data.engine.graph();
        let answers = req
            .answers
            .iter()
            .map(|a| {
                graph
                    .lookup(&a.entity)
                    .map(|e| (e, a.sentiment))
                    .ok_or_else(|| ServiceError::Conflict(format!("unknown entity `{}`", a.entity)))
            })
            .collect::<Result<Vec<_>, _>>()?;

        if let Some((applied, view)) = entry.applied.get(&req.batch_number) {
            return if same_answers(applied, &answers) {
                Ok(view.clone())
            } else {
                Err(ServiceError::Conflict(format!(
                    "batch {} was already answered differently",
                    req.batch_number
                )))
            };
        }
        if entry.session.phase == Phase::Done {
            return Err(ServiceError::Gone);
        }
        if req.batch_number != entry.session.batch_number {
            return Err(ServiceError::Conflict(format!(
                "batch {} is not pending; pending batch is {}",
                req.batch_number, entry.session.batch_number
            )));
        }
        let next = ready.data.engine.submit_batch(&entry.session, &answers).map_err(map_core)?;

        let at = Utc::now();
        let logged = to_logged(&ready.data, &answers);
        let record = Record::Answers {
            at,
            session_id: id.to_string(),
            token: entry.session.token.clone(),
            batch_number: req.batch_number,
            answers: logged.clone(),
        };
        self.inner.journal.lock().await.append(&record)?;

        let user = export_user_id(&entry.session.token);
        self.inner.rows.lock().unwrap().extend(logged.into_iter().map(|a| ExportRow {
            at,
            user: user.clone(),
            entity: a.entity,
            is_item: a.is_item,
            sentiment: a.sentiment,
        }));
        let view = SessionView::build(&ready.data, &next);
        entry.session = next;
        entry.applied.insert(req.batch_number, (answers, view.clone()));
        Ok(view)
    }

    /// Ratings logged at or after `since` as `user_id,entity_uri,is_item,sentiment`,
    /// ordered by user then uri. A later answer to the same entity replaces an
    /// earlier one.
    pub fn export_csv(&self, since: Option<DateTime<Utc>>) -> Result<Vec<u8>, ServiceError> {
        let rows = self.inner.rows.lock().unwrap();
        let mut latest: BTreeMap<(&str, &str), (bool, i8)> = BTreeMap::new();
        for r in rows.iter().filter(|r| since.is_none_or(|s| r.at >= s)) {
            latest.insert((&r.user, &r.entity), (r.is_item, r.sentiment));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| ServiceError::Internal(e.to_string());
        w.write_record(["user_id", "entity_uri", "is_item", "sentiment"]).map_err(io)?;
        for ((user, entity), (is_item, sentiment)) in latest {
            w.write_record([user, entity, if is_item { "true" } else { "false" }, &sentiment.to_string()])
                .map_err(io)?;
        }
        w.into_inner().map_err(|e| ServiceError::Internal(e.to_string()))
    }
}
