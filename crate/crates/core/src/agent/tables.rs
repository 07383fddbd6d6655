use std::collections::{BTreeMap, BTreeSet};

use super::Face;
use crate::names::{Label, ServiceName};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub name: ServiceName,
    /// Canonical text of the Data name that satisfies this entry.
    pub data_key: String,
    pub in_faces: BTreeSet<Face>,
    pub nonces: BTreeSet<u64>,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PitInsert {
    New,
    Aggregated,
}

/// Pending Interest Table keyed by the canonical Interest name.
#[derive(Debug, Default, Clone)]
pub struct Pit {
    entries: BTreeMap<String, PitEntry>,
}

impl Pit {
    pub fn insert(&mut self, name: &ServiceName, face: Face, nonce: u64, now: u64) -> PitInsert {
        let key = name.to_string();
        match self.entries.get_mut(&key) {
            Some(entry) => {
                entry.in_faces.insert(face);
                entry.nonces.insert(nonce);
                PitInsert::Aggregated
            }
            None => {
                self.entries.insert(
                    key,
                    PitEntry {
                        name: name.clone(),
                        data_key: name.data_name().to_string(),
                        in_faces: BTreeSet::from([face]),
                        nonces: BTreeSet::from([nonce]),
                        created_at: now,
                    },
                );
                PitInsert::New
            }
        }
    }

    /// Replaces any entry under the name's key.
    pub fn reset(&mut self, name: &ServiceName, face: Face, nonce: u64, now: u64) {
        self.entries.remove(&name.to_string());
        self.insert(name, face, nonce, now);
    }

    pub fn get(&self, key: &str) -> Option<&PitEntry> {
        self.entries.get(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<PitEntry> {
        self.entries.remove(key)
    }

    /// Keys of the entries satisfied by Data named `data_key`.
    pub fn matching(&self, data_key: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.data_key == data_key)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &PitEntry)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PstEntry {
    pub awaited: ServiceName,
    pub data_key: String,
    /// (microservice, canonical name of the exec Interest it serves)
    pub waiting: BTreeSet<(Label, String)>,
    pub created_at: u64,
}

/// Pending Service Table: awaited child name to the local microservices
/// blocked on it.
#[derive(Debug, Default, Clone)]
pub struct Pst {
    entries: BTreeMap<String, PstEntry>,
}

impl Pst {
    /// Returns true when the entry is new.
    pub fn insert(&mut self, awaited: &ServiceName, microservice: Label, origin: String, now: u64) -> bool {
        let key = awaited.to_string();
        let fresh = !self.entries.contains_key(&key);
        self.entries
            .entry(key)
            .or_insert_with(|| PstEntry {
                awaited: awaited.clone(),
                data_key: awaited.data_name().to_string(),
                waiting: BTreeSet::new(),
                created_at: now,
            })
            .waiting
            .insert((microservice, origin));
        fresh
    }

    pub fn get(&self, key: &str) -> Option<&PstEntry> {
        self.entries.get(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<PstEntry> {
        self.entries.remove(key)
    }

    pub fn matching(&self, data_key: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.data_key == data_key)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &PstEntry)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataStoreEntry {
    pub payload: Vec<u8>,
    pub stored_at: u64,
    /// `None` never expires.
    pub freshness: Option<u64>,
}

impl DataStoreEntry {
    pub fn is_fresh(&self, now: u64) -> bool {
        self.freshness
            .is_none_or(|f| self.stored_at.saturating_add(f) >= now)
    }
}

/// Unbounded data store keyed by canonical Data name.
#[derive(Debug, Default, Clone)]
pub struct DataStore {
    entries: BTreeMap<String, DataStoreEntry>,
}

impl DataStore {
    pub fn put(&mut self, key: String, payload: Vec<u8>, now: u64, freshness: Option<u64>) {
        self.entries.insert(
            key,
            DataStoreEntry {
                payload,
                stored_at: now,
                freshness,
            },
        );
    }

    pub fn get(&self, key: &str, now: u64) -> Option<&[u8]> {
        self.entries
            .get(key)
            .filter(|e| e.is_fresh(now))
            .map(|e| e.payload.as_slice())
    }

    pub fn contains(&self, key: &str, now: u64) -> bool {
        self.get(key, now).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
