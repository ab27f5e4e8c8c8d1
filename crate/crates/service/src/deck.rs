//! Flashcard decks.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use teach_core::ConceptParams;

use crate::error::{Result, ServiceError};

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Common,
    Rare,
    #[default]
    None,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Common => "common",
            Difficulty::Rare => "rare",
            Difficulty::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub id: String,
    pub prompt: String,
    pub answer: String,
    /// Opaque image reference, typically a URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default)]
    pub difficulty: Difficulty,
    /// Memory-model parameters overriding the profile default for this card.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ConceptParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deck {
    pub deck_id: String,
    pub cards: Vec<Card>,
}

impl Deck {
    pub fn from_json(text: &str) -> Result<Self> {
        let deck: Deck = serde_json::from_str(text)
            .map_err(|e| ServiceError::InvalidArgument(format!("deck: {e}")))?;
        deck.validate()?;
        Ok(deck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(ServiceError::InvalidArgument(msg));
        if self.deck_id.trim().is_empty() {
            return invalid("deck_id must not be empty".into());
        }
        if self.cards.is_empty() {
            return invalid(format!("deck {} has no cards", self.deck_id));
        }
        let mut seen = HashSet::new();
        for card in &self.cards {
            if card.id.trim().is_empty() {
                return invalid("card ids must not be empty".into());
            }
            if !seen.insert(card.id.as_str()) {
                return invalid(format!("duplicate card id {:?}", card.id));
            }
            if card.answer.trim().is_empty() {
                return invalid(format!("card {:?} has an empty answer", card.id));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    /// True when some card carries a difficulty tag.
    pub fn is_tagged(&self) -> bool {
        self.cards.iter().any(|c| c.difficulty != Difficulty::None)
    }
}
