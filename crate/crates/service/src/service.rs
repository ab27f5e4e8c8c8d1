//! Session lifecycle operations over decks and event logs.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use teach_core::{derive_seed, ConceptParams, PolicyKind};
use uuid::Uuid;

use crate::deck::{Deck, Difficulty};
use crate::error::{Result, ServiceError};
use crate::grading::{Grader, NormalizedMatch};
use crate::session::{
    CardView, GainSummary, Phase, SessionCard, SessionCreated, SessionEvent, SessionRecord,
    SessionView,
};
use crate::store::{load_deck_dir, EventStore};

pub const DEFAULT_N: usize = 15;
pub const DEFAULT_T: usize = 40;
pub const DEFAULT_ANSWER_WINDOW_MS: u64 = 20_000;
pub const DEFAULT_REVIEW_WINDOW_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Where logs and uploaded decks are kept; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Decks loaded at startup, in addition to those in the data directory.
    pub deck_dirs: Vec<PathBuf>,
    /// Learning answers slower than this are graded incorrect.
    pub answer_window_ms: u64,
    /// Time the client should show the correct answer after grading.
    pub review_window_ms: u64,
    /// When set, cards answered correctly in the prequiz start at this recall in the teacher's model.
    pub prequiz_prior: Option<f64>,
    pub case_sensitive: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            deck_dirs: Vec::new(),
            answer_window_ms: DEFAULT_ANSWER_WINDOW_MS,
            review_window_ms: DEFAULT_REVIEW_WINDOW_MS,
            prequiz_prior: None,
            case_sensitive: false,
        }
    }
}

/// How the teacher's memory parameters are assigned to cards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaProfile {
    /// Card override, else by difficulty tag (common easy, rare hard), else the robust triple.
    #[default]
    Auto,
    /// The same triple for every card.
    Uniform { theta: ConceptParams },
    /// Every card must carry its own triple.
    PerCard,
}

fn assign_theta(
    profile: &ThetaProfile,
    cards: &[&crate::deck::Card],
) -> Result<Vec<ConceptParams>> {
    cards
        .iter()
        .map(|card| match profile {
            ThetaProfile::Uniform { theta } => Ok(*theta),
            ThetaProfile::PerCard => card.theta.ok_or_else(|| {
                ServiceError::InvalidArgument(format!("card {:?} has no theta", card.id))
            }),
            ThetaProfile::Auto => Ok(card.theta.unwrap_or(match card.difficulty {
                Difficulty::Common => ConceptParams::EASY,
                Difficulty::Rare => ConceptParams::HARD,
                Difficulty::None => ConceptParams::ROBUST,
            })),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub deck_id: String,
    /// `GR` (default), `RR`, `RD` or `LR`.
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default, rename = "T")]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub theta: ThetaProfile,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Defaults to true.
    #[serde(default)]
    pub no_consecutive_repeat: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session: SessionView,
    pub prequiz_cards: Vec<CardView>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub card_id: String,
    #[serde(default)]
    pub text: String,
    /// Client-measured time from showing the card to submitting.
    #[serde(default)]
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub correct: bool,
    pub timed_out: bool,
    pub canonical_answer: String,
    pub review_ms: u64,
    pub phase: Phase,
    pub step: usize,
    pub phase_complete: bool,
    pub next_card: Option<CardView>,
}

/// Shared service state: decks, live sessions and their logs.
pub struct SessionService {
    config: ServiceConfig,
    decks: RwLock<BTreeMap<String, Deck>>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<SessionRecord>>>>,
    store: EventStore,
    grader: Arc<dyn Grader>,
}

impl SessionService {
    /// Opens the store, loads decks and replays every stored session.
    pub fn new(config: ServiceConfig) -> Result<Self> {
        let store = match &config.data_dir {
            Some(dir) => EventStore::open(dir)?,
            None => EventStore::in_memory(),
        };
        if let Some(p) = config.prequiz_prior {
            if !(0.0..=1.0).contains(&p) {
                return Err(ServiceError::InvalidArgument(format!(
                    "prequiz prior {p} outside [0, 1]"
                )));
            }
        }
        let grader = Arc::new(NormalizedMatch {
            case_sensitive: config.case_sensitive,
        });
        let service = Self {
            decks: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(HashMap::new()),
            store,
            grader,
            config,
        };
        let mut decks = service.store.load_decks()?;
        for dir in &service.config.deck_dirs {
            decks.extend(load_deck_dir(dir)?);
        }
        {
            let mut map = service.decks.write().expect("deck lock poisoned");
            for deck in decks {
                map.insert(deck.deck_id.clone(), deck);
            }
        }
        for id in service.store.session_ids()? {
            let record = SessionRecord::replay(&service.store.read(id)?)?;
            service
                .sessions
                .write()
                .expect("session lock poisoned")
                .insert(id, Arc::new(Mutex::new(record)));
        }
        Ok(service)
    }

    pub fn with_grader(mut self, grader: Arc<dyn Grader>) -> Self {
        self.grader = grader;
        self
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn add_deck(&self, deck: Deck) -> Result<Deck> {
        deck.validate()?;
        let mut decks = self.decks.write().expect("deck lock poisoned");
        if decks.contains_key(&deck.deck_id) {
            return Err(ServiceError::Conflict(format!(
                "deck {:?} already exists",
                deck.deck_id
            )));
        }
        self.store.save_deck(&deck)?;
        decks.insert(deck.deck_id.clone(), deck.clone());
        Ok(deck)
    }

    pub fn deck(&self, deck_id: &str) -> Result<Deck> {
        self.decks
            .read()
            .expect("deck lock poisoned")
            .get(deck_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("deck {deck_id:?}")))
    }

    pub fn deck_ids(&self) -> Vec<String> {
        self.decks
            .read()
            .expect("deck lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    pub fn create_session(&self, request: CreateSessionRequest) -> Result<CreatedSession> {
        let deck = self.deck(&request.deck_id)?;
        let policy: PolicyKind = match &request.policy {
            Some(label) => label
                .parse()
                .map_err(|e: teach_core::Error| ServiceError::InvalidArgument(e.to_string()))?,
            None => PolicyKind::Greedy,
        };
        let n = request.n.unwrap_or(DEFAULT_N.min(deck.len()));
        let horizon = request.horizon.unwrap_or(DEFAULT_T);
        if n == 0 || n > deck.len() {
            return Err(ServiceError::InvalidArgument(format!(
                "n = {n} must be between 1 and the deck size {}",
                deck.len()
            )));
        }
        if horizon == 0 {
            return Err(ServiceError::InvalidArgument("T must be at least 1".into()));
        }
        let mut warnings = Vec::new();
        if horizon < n {
            warnings.push(format!(
                "T = {horizon} is below n = {n}; some cards will not be taught"
            ));
        }
        let seed = request.seed.unwrap_or_else(rand::random);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let picked: Vec<&crate::deck::Card> = rand::seq::index::sample(&mut rng, deck.len(), n)
            .into_iter()
            .map(|k| &deck.cards[k])
            .collect();
        let theta = assign_theta(&request.theta, &picked)?;
        let order = |stream: u64| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream])));
            order
        };
        let created = SessionCreated {
            session_id: Uuid::new_v4(),
            deck_id: deck.deck_id.clone(),
            policy: policy.reseeded(derive_seed(seed, &[3])),
            no_consecutive_repeat: request.no_consecutive_repeat.unwrap_or(true),
            n,
            horizon,
            seed,
            cards: picked
                .iter()
                .map(|c| SessionCard {
                    card_id: c.id.clone(),
                    prompt: c.prompt.clone(),
                    answer: c.answer.clone(),
                    image: c.image.clone(),
                    difficulty: c.difficulty,
                })
                .collect(),
            theta,
            prequiz_order: order(1),
            postquiz_order: order(2),
            answer_window_ms: self.config.answer_window_ms,
            prequiz_prior: self.config.prequiz_prior,
            at: Utc::now(),
        };
        let record = SessionRecord::from_created(&created)?;
        let id = created.session_id;
        self.store
            .append(id, &SessionEvent::Created(Box::new(created)))?;
        let view = record.view(self.config.review_window_ms);
        let prequiz_cards = record
            .prequiz_order
            .iter()
            .map(|&c| record.card_view(c))
            .collect();
        self.sessions
            .write()
            .expect("session lock poisoned")
            .insert(id, Arc::new(Mutex::new(record)));
        Ok(CreatedSession {
            session: view,
            prequiz_cards,
            seed,
            warnings,
        })
    }

    fn handle(&self, id: Uuid) -> Result<Arc<Mutex<SessionRecord>>> {
        self.sessions
            .read()
            .expect("session lock poisoned")
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    /// Persists an event and then applies it, under the session's lock.
    fn commit(&self, record: &mut SessionRecord, event: SessionEvent) -> Result<()> {
        self.store.append(record.session_id, &event)?;
        record.apply(&event)
    }

    pub fn record(&self, id: Uuid) -> Result<SessionRecord> {
        Ok(self
            .handle(id)?
            .lock()
            .expect("session lock poisoned")
            .clone())
    }

    pub fn session(&self, id: Uuid) -> Result<SessionView> {
        Ok(self.record(id)?.view(self.config.review_window_ms))
    }

    pub fn submit_answer(&self, id: Uuid, request: AnswerRequest) -> Result<AnswerResponse> {
        let handle = self.handle(id)?;
        let mut record = handle.lock().expect("session lock poisoned");
        let event = record.answer_event(
            &request.card_id,
            &request.text,
            request.elapsed_ms,
            self.grader.as_ref(),
            Utc::now(),
        )?;
        let SessionEvent::Answered { answer, .. } = &event else {
            unreachable!("answer_event returns an answer")
        };
        let (correct, timed_out, concept) = (answer.correct, answer.timed_out, answer.concept);
        self.commit(&mut record, event)?;
        Ok(AnswerResponse {
            correct,
            timed_out,
            canonical_answer: record.cards[concept].answer.clone(),
            review_ms: self.config.review_window_ms,
            phase: record.phase,
            step: record.step(),
            phase_complete: record.phase_complete(),
            next_card: record.current.map(|c| record.card_view(c)),
        })
    }

    pub fn advance(&self, id: Uuid) -> Result<SessionView> {
        let handle = self.handle(id)?;
        let mut record = handle.lock().expect("session lock poisoned");
        let event = record.advance_event(Utc::now())?;
        self.commit(&mut record, event)?;
        Ok(record.view(self.config.review_window_ms))
    }

    pub fn gain(&self, id: Uuid) -> Result<GainSummary> {
        self.record(id)?.gain_summary()
    }

    pub fn events(&self, id: Uuid) -> Result<Vec<SessionEvent>> {
        self.handle(id)?;
        self.store.read(id)
    }

    /// Rebuilds a session from its stored log, independently of the live state.
    pub fn replay(&self, id: Uuid) -> Result<SessionRecord> {
        SessionRecord::replay(&self.events(id)?)
    }

    pub fn session_log_path(&self, id: Uuid) -> Option<PathBuf> {
        self.store.session_log_path(id)
    }
}
