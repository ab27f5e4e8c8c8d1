//! Append-only JSON-lines event logs, one per session.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use uuid::Uuid;

use crate::deck::Deck;
use crate::error::{Result, ServiceError};
use crate::session::SessionEvent;

#[derive(Debug)]
enum Backend {
    Memory(Mutex<BTreeMap<Uuid, Vec<String>>>),
    Dir(PathBuf),
}

/// Session logs and uploaded decks, on disk or in memory.
///
/// The directory layout is `sessions/<id>.jsonl` and `decks/<deck_id>.json`.
#[derive(Debug)]
pub struct EventStore {
    backend: Backend,
}

impl EventStore {
    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory(Mutex::new(BTreeMap::new())),
        }
    }

    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("sessions"))?;
        fs::create_dir_all(dir.join("decks"))?;
        Ok(Self {
            backend: Backend::Dir(dir.to_path_buf()),
        })
    }

    pub fn session_log_path(&self, id: Uuid) -> Option<PathBuf> {
        match &self.backend {
            Backend::Dir(dir) => Some(dir.join("sessions").join(format!("{id}.jsonl"))),
            Backend::Memory(_) => None,
        }
    }

    pub fn append(&self, id: Uuid, event: &SessionEvent) -> Result<()> {
        let line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        match &self.backend {
            Backend::Memory(logs) => {
                logs.lock()
                    .expect("event store lock poisoned")
                    .entry(id)
                    .or_default()
                    .push(line);
            }
            Backend::Dir(_) => {
                let path = self.session_log_path(id).expect("directory backend");
                let mut file = OpenOptions::new().create(true).append(true).open(path)?;
                writeln!(file, "{line}")?;
                file.sync_data()?;
            }
        }
        Ok(())
    }

    pub fn read(&self, id: Uuid) -> Result<Vec<SessionEvent>> {
        let lines: Vec<String> = match &self.backend {
            Backend::Memory(logs) => logs
                .lock()
                .expect("event store lock poisoned")
                .get(&id)
                .cloned()
                .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))?,
            Backend::Dir(_) => {
                let path = self.session_log_path(id).expect("directory backend");
                if !path.exists() {
                    return Err(ServiceError::NotFound(format!("session {id}")));
                }
                BufReader::new(fs::File::open(path)?)
                    .lines()
                    .collect::<std::io::Result<_>>()?
            }
        };
        parse_log(&lines)
    }

    pub fn session_ids(&self) -> Result<Vec<Uuid>> {
        match &self.backend {
            Backend::Memory(logs) => Ok(logs
                .lock()
                .expect("event store lock poisoned")
                .keys()
                .copied()
                .collect()),
            Backend::Dir(dir) => {
                let mut ids = Vec::new();
                for entry in fs::read_dir(dir.join("sessions"))? {
                    let path = entry?.path();
                    if path.extension().is_some_and(|e| e == "jsonl") {
                        if let Some(id) = path
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .and_then(|s| Uuid::parse_str(s).ok())
                        {
                            ids.push(id);
                        }
                    }
                }
                ids.sort();
                Ok(ids)
            }
        }
    }

    pub fn save_deck(&self, deck: &Deck) -> Result<()> {
        if let Backend::Dir(dir) = &self.backend {
            let text = serde_json::to_string_pretty(deck).map_err(std::io::Error::other)?;
            fs::write(dir.join("decks").join(deck_file_name(&deck.deck_id)), text)?;
        }
        Ok(())
    }

    pub fn load_decks(&self) -> Result<Vec<Deck>> {
        let Backend::Dir(dir) = &self.backend else {
            return Ok(Vec::new());
        };
        load_deck_dir(&dir.join("decks"))
    }
}

/// Every `*.json` deck in a directory, sorted by file name.
pub fn load_deck_dir(dir: &Path) -> Result<Vec<Deck>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths.iter().map(|p| Deck::load(p)).collect()
}

fn deck_file_name(deck_id: &str) -> String {
    let safe: String = deck_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

pub fn parse_log(lines: &[String]) -> Result<Vec<SessionEvent>> {
    lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l)
                .map_err(|e| ServiceError::CorruptLog(format!("line {}: {e}", k + 1)))
        })
        .collect()
}
