//! Simulated token-hosting service: the DNS record / service-platform entry
//! where operators place challenge tokens and validators retrieve them.
//!
//! Write access to a drone's entry models control of the drone's
//! infrastructure: a `place_token` call succeeds only when the caller's key
//! matches the access-control entry for that name. Adversary scenarios may
//! bypass the check explicitly through [`TokenRegistry::force_place`], which
//! stands in for DNS poisoning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::model::{DroneName, Tick};

/// Registry return code: 1 = present/accepted, 0 = absent/refused.
pub const STATUS_PRESENT: u8 = 1;
/// See [`STATUS_PRESENT`].
pub const STATUS_ABSENT: u8 = 0;

/// One hosted token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    #[serde(with = "crate::crypto::hex_bytes")]
    pub token: Vec<u8>,
    pub owner: PublicKey,
    pub placed: Tick,
}

/// Token store plus the access-control list that models infrastructure
/// ownership.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TokenRegistry {
    entries: BTreeMap<DroneName, TokenEntry>,
    acl: BTreeMap<DroneName, PublicKey>,
}

impl TokenRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grants control of a drone name's entry to a key.
    pub fn grant(&mut self, name: DroneName, controller: PublicKey) {
        self.acl.insert(name, controller);
    }

    pub fn controller(&self, name: &DroneName) -> Option<&PublicKey> {
        self.acl.get(name)
    }

    /// Places a token under a drone name. Returns 1 and stores the entry iff
    /// the caller controls the name (last write wins); returns 0 otherwise.
    pub fn place_token(
        &mut self,
        caller: &PublicKey,
        name: &DroneName,
        token: Vec<u8>,
        now: Tick,
    ) -> u8 {
        if self.acl.get(name) != Some(caller) {
            return STATUS_ABSENT;
        }
        self.entries.insert(
            name.clone(),
            TokenEntry {
                token,
                owner: *caller,
                placed: now,
            },
        );
        STATUS_PRESENT
    }

    /// Reads a drone name's token. Side-effect free.
    pub fn retrieve_token(&self, name: &DroneName) -> (Option<&[u8]>, u8) {
        match self.entries.get(name) {
            Some(entry) => (Some(entry.token.as_slice()), STATUS_PRESENT),
            None => (None, STATUS_ABSENT),
        }
    }

    pub fn entry(&self, name: &DroneName) -> Option<&TokenEntry> {
        self.entries.get(name)
    }

    /// Adversary hook: writes an entry without consulting the ACL, modeling a
    /// poisoned record.
    pub fn force_place(&mut self, name: DroneName, token: Vec<u8>, owner: PublicKey, now: Tick) {
        self.entries.insert(
            name,
            TokenEntry {
                token,
                owner,
                placed: now,
            },
        );
    }

    /// Removes a drone name's entry (e.g. the owner cleaning up after a
    /// completed challenge).
    pub fn clear(&mut self, name: &DroneName) {
        self.entries.remove(name);
    }
}
