//! Session state, its event log, and the transitions between phases.
//!
//! A session is rebuilt by folding its events with [`SessionRecord::apply`].
//! Every choice the service makes, including the next card, is stored in the
//! event that caused it, so replay never consults the policy.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use teach_core::{ConceptParams, History, Policy, PolicyKind, TeachingInstance};
use uuid::Uuid;

use crate::deck::Difficulty;
use crate::error::{Result, ServiceError};
use crate::grading::Grader;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prequiz,
    Learning,
    Postquiz,
    Done,
}

impl Phase {
    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::Prequiz => Some(Phase::Learning),
            Phase::Learning => Some(Phase::Postquiz),
            Phase::Postquiz => Some(Phase::Done),
            Phase::Done => None,
        }
    }
}

/// Snapshot of a deck card taken when the session is created.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCard {
    pub card_id: String,
    pub prompt: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub phase: Phase,
    pub card_id: String,
    /// Position of the card in the session, the concept index of the teacher's model.
    pub concept: usize,
    pub submitted: String,
    /// Final grade; a timed-out learning answer is incorrect.
    pub correct: bool,
    pub timed_out: bool,
    pub elapsed_ms: u64,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: Uuid,
    pub deck_id: String,
    pub policy: PolicyKind,
    pub no_consecutive_repeat: bool,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Seed used for card sampling, quiz orders and the random policy.
    pub seed: u64,
    pub cards: Vec<SessionCard>,
    pub theta: Vec<ConceptParams>,
    pub prequiz_order: Vec<usize>,
    pub postquiz_order: Vec<usize>,
    pub answer_window_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prequiz_prior: Option<f64>,
    pub at: DateTime<Utc>,
}

/// One record per state change, in the order they happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created(Box<SessionCreated>),
    Answered {
        #[serde(flatten)]
        answer: AnswerRecord,
        next_concept: Option<usize>,
    },
    Advanced {
        from: Phase,
        to: Phase,
        next_concept: Option<usize>,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: Uuid,
    pub deck_id: String,
    pub policy: PolicyKind,
    pub no_consecutive_repeat: bool,
    pub seed: u64,
    pub cards: Vec<SessionCard>,
    pub theta: Vec<ConceptParams>,
    pub prequiz_order: Vec<usize>,
    pub postquiz_order: Vec<usize>,
    pub answer_window_ms: u64,
    pub prequiz_prior: Option<f64>,
    pub phase: Phase,
    /// Learning-phase presentations and outcomes.
    pub history: History,
    pub answers: Vec<AnswerRecord>,
    /// Concept the session expects an answer for, if any.
    pub current: Option<usize>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

fn corrupt(msg: impl Into<String>) -> ServiceError {
    ServiceError::CorruptLog(msg.into())
}

impl SessionRecord {
    pub fn from_created(c: &SessionCreated) -> Result<Self> {
        Ok(Self {
            session_id: c.session_id,
            deck_id: c.deck_id.clone(),
            policy: c.policy,
            no_consecutive_repeat: c.no_consecutive_repeat,
            seed: c.seed,
            cards: c.cards.clone(),
            theta: c.theta.clone(),
            prequiz_order: c.prequiz_order.clone(),
            postquiz_order: c.postquiz_order.clone(),
            answer_window_ms: c.answer_window_ms,
            prequiz_prior: c.prequiz_prior,
            phase: Phase::Prequiz,
            history: History::new(c.n, c.horizon)?,
            answers: Vec::new(),
            current: c.prequiz_order.first().copied(),
            created_at: c.at,
            updated_at: c.at,
        })
    }

    /// Rebuilds a session from its full event log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<Self> {
        let mut events = events.into_iter();
        let mut record = match events.next() {
            Some(SessionEvent::Created(c)) => Self::from_created(c)?,
            Some(_) => return Err(corrupt("log does not start with a creation event")),
            None => return Err(corrupt("empty log")),
        };
        for event in events {
            record.apply(event)?;
        }
        Ok(record)
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<()> {
        match event {
            SessionEvent::Created(_) => return Err(corrupt("duplicate creation event")),
            SessionEvent::Answered {
                answer,
                next_concept,
            } => {
                if answer.phase != self.phase || Some(answer.concept) != self.current {
                    return Err(corrupt("answer does not match the expected card"));
                }
                if self.phase == Phase::Learning {
                    self.history
                        .push(answer.concept, answer.correct)
                        .map_err(|e| corrupt(e.to_string()))?;
                }
                self.answers.push(answer.clone());
                self.current = *next_concept;
                self.updated_at = answer.at;
            }
            SessionEvent::Advanced {
                from,
                to,
                next_concept,
                at,
            } => {
                if *from != self.phase || from.next() != Some(*to) {
                    return Err(corrupt(format!("invalid transition {from:?} -> {to:?}")));
                }
                self.phase = *to;
                self.current = *next_concept;
                self.updated_at = *at;
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.cards.len()
    }

    pub fn horizon(&self) -> usize {
        self.history.horizon()
    }

    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn answers_in(&self, phase: Phase) -> impl Iterator<Item = &AnswerRecord> {
        self.answers.iter().filter(move |a| a.phase == phase)
    }

    pub fn phase_complete(&self) -> bool {
        match self.phase {
            Phase::Prequiz | Phase::Postquiz => self.answers_in(self.phase).count() == self.n(),
            Phase::Learning => self.history.is_full(),
            Phase::Done => true,
        }
    }

    pub fn policy(&self) -> Policy {
        Policy {
            kind: self.policy,
            no_consecutive_repeat: self.no_consecutive_repeat,
        }
    }

    /// The teacher's model; with a prequiz prior, cards recalled in the prequiz start at that recall.
    pub fn teacher(&self) -> Result<TeachingInstance> {
        let instance = TeachingInstance::new(self.horizon(), self.theta.clone())?;
        let Some(prior) = self.prequiz_prior else {
            return Ok(instance);
        };
        let mut priors = vec![0.0; self.n()];
        for a in self.answers_in(Phase::Prequiz).filter(|a| a.correct) {
            priors[a.concept] = prior;
        }
        Ok(instance.with_priors(priors)?)
    }

    fn next_learning_card(&self, history: &History) -> Result<Option<usize>> {
        if history.is_full() {
            return Ok(None);
        }
        Ok(Some(self.policy().next(&self.teacher()?, history)?))
    }

    fn quiz_card(&self, phase: Phase, answered: usize) -> Option<usize> {
        let order = match phase {
            Phase::Prequiz => &self.prequiz_order,
            Phase::Postquiz => &self.postquiz_order,
            _ => return None,
        };
        order.get(answered).copied()
    }

    /// Grades an answer for the expected card and decides what comes next.
    pub fn answer_event(
        &self,
        card_id: &str,
        text: &str,
        elapsed_ms: u64,
        grader: &dyn Grader,
        at: DateTime<Utc>,
    ) -> Result<SessionEvent> {
        if self.phase == Phase::Done {
            return Err(ServiceError::Gone(format!(
                "session {} is finished",
                self.session_id
            )));
        }
        let Some(concept) = self.current else {
            return Err(ServiceError::Conflict(format!(
                "{:?} phase is complete; advance to continue",
                self.phase
            )));
        };
        let card = &self.cards[concept];
        if card.card_id != card_id {
            return Err(ServiceError::Conflict(format!(
                "expected an answer for card {:?}, got {card_id:?}",
                card.card_id
            )));
        }
        let matched = grader.grade(text, &card.answer);
        let timed_out = self.phase == Phase::Learning && elapsed_ms > self.answer_window_ms;
        let correct = matched && !timed_out;
        let next_concept = match self.phase {
            Phase::Learning => {
                let mut history = self.history.clone();
                history.push(concept, correct)?;
                self.next_learning_card(&history)?
            }
            phase => self.quiz_card(phase, self.answers_in(phase).count() + 1),
        };
        Ok(SessionEvent::Answered {
            answer: AnswerRecord {
                phase: self.phase,
                card_id: card_id.to_string(),
                concept,
                submitted: text.to_string(),
                correct,
                timed_out,
                elapsed_ms,
                at,
            },
            next_concept,
        })
    }

    /// Moves to the next phase once the current one is complete.
    pub fn advance_event(&self, at: DateTime<Utc>) -> Result<SessionEvent> {
        let Some(to) = self.phase.next() else {
            return Err(ServiceError::Gone(format!(
                "session {} is finished",
                self.session_id
            )));
        };
        if !self.phase_complete() {
            return Err(ServiceError::Conflict(format!(
                "{:?} phase is not complete",
                self.phase
            )));
        }
        let next_concept = match to {
            Phase::Learning => {
                // the teacher model must see the prequiz answers, so build it from this state
                self.next_learning_card(&self.history)?
            }
            Phase::Postquiz => self.quiz_card(Phase::Postquiz, 0),
            Phase::Prequiz | Phase::Done => None,
        };
        Ok(SessionEvent::Advanced {
            from: self.phase,
            to,
            next_concept,
            at,
        })
    }

    pub fn gain_summary(&self) -> Result<GainSummary> {
        if self.phase != Phase::Done {
            return Err(ServiceError::Conflict(format!(
                "gain is available once the session is done (now {:?})",
                self.phase
            )));
        }
        let outcome = |phase: Phase| {
            let mut v = vec![false; self.n()];
            for a in self.answers_in(phase) {
                v[a.concept] = a.correct;
            }
            v
        };
        let pre = outcome(Phase::Prequiz);
        let post = outcome(Phase::Postquiz);
        let cards: Vec<CardGain> = self
            .cards
            .iter()
            .enumerate()
            .map(|(i, c)| CardGain {
                card_id: c.card_id.clone(),
                difficulty: c.difficulty,
                prequiz_correct: pre[i],
                postquiz_correct: post[i],
                gain: i8::from(post[i]) - i8::from(pre[i]),
            })
            .collect();
        let n = self.n() as f64;
        let prequiz_correct = pre.iter().filter(|&&x| x).count();
        let postquiz_correct = post.iter().filter(|&&x| x).count();
        let mut by_difficulty = BTreeMap::new();
        if self.cards.iter().any(|c| c.difficulty != Difficulty::None) {
            for c in &cards {
                let entry = by_difficulty
                    .entry(c.difficulty.to_string())
                    .or_insert((0usize, 0i64));
                entry.0 += 1;
                entry.1 += i64::from(c.gain);
            }
        }
        Ok(GainSummary {
            session_id: self.session_id,
            prequiz_correct,
            postquiz_correct,
            prequiz_fraction: prequiz_correct as f64 / n,
            postquiz_fraction: postquiz_correct as f64 / n,
            average_gain: (postquiz_correct as f64 - prequiz_correct as f64) / n,
            by_difficulty: by_difficulty
                .into_iter()
                .map(|(k, (count, total))| {
                    (
                        k,
                        DifficultyGain {
                            cards: count,
                            average_gain: total as f64 / count as f64,
                        },
                    )
                })
                .collect(),
            cards,
        })
    }

    pub fn card_view(&self, concept: usize) -> CardView {
        let c = &self.cards[concept];
        CardView {
            card_id: c.card_id.clone(),
            prompt: c.prompt.clone(),
            image: c.image.clone(),
        }
    }

    pub fn view(&self, review_window_ms: u64) -> SessionView {
        SessionView {
            session_id: self.session_id,
            deck_id: self.deck_id.clone(),
            policy: self.policy.label().to_string(),
            n: self.n(),
            horizon: self.horizon(),
            phase: self.phase,
            step: self.step(),
            phase_complete: self.phase_complete(),
            current_card: self.current.map(|c| self.card_view(c)),
            answer_window_ms: self.answer_window_ms,
            review_window_ms,
            answers: self
                .answers
                .iter()
                .map(|a| AnswerView {
                    phase: a.phase,
                    card_id: a.card_id.clone(),
                    submitted: a.submitted.clone(),
                    correct: a.correct,
                    timed_out: a.timed_out,
                    elapsed_ms: a.elapsed_ms,
                    canonical_answer: self.cards[a.concept].answer.clone(),
                    at: a.at,
                })
                .collect(),
            created_at: self.created_at,
        }
    }
}

/// A card as shown to the learner, without its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardView {
    pub card_id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerView {
    pub phase: Phase,
    pub card_id: String,
    pub submitted: String,
    pub correct: bool,
    pub timed_out: bool,
    pub elapsed_ms: u64,
    pub canonical_answer: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: Uuid,
    pub deck_id: String,
    pub policy: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub phase: Phase,
    pub step: usize,
    pub phase_complete: bool,
    pub current_card: Option<CardView>,
    pub answer_window_ms: u64,
    pub review_window_ms: u64,
    pub answers: Vec<AnswerView>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardGain {
    pub card_id: String,
    pub difficulty: Difficulty,
    pub prequiz_correct: bool,
    pub postquiz_correct: bool,
    /// `postquiz_correct - prequiz_correct`, in `{-1, 0, 1}`.
    pub gain: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyGain {
    pub cards: usize,
    pub average_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub session_id: Uuid,
    pub cards: Vec<CardGain>,
    pub prequiz_correct: usize,
    pub postquiz_correct: usize,
    pub prequiz_fraction: f64,
    pub postquiz_fraction: f64,
    pub average_gain: f64,
    /// Present for decks with difficulty tags.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_difficulty: BTreeMap<String, DifficultyGain>,
}
