//! Client-side verification: a synchronized array answering "is this drone's
//! certificate valid right now?" in constant time.
//!
//! The plugin keeps one record per drone (latest request type and expiry) and
//! folds new blocks in on every sync. Validity is re-evaluated against the
//! query tick as well, so expiry flips are never missed between syncs.
//! Unregistered, revoked, and expired certificates all answer `false`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::LedgerState;
use crate::model::{CrtType, DroneName, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct DroneRecord {
    latest: CrtType,
    expiry: Tick,
}

/// The synchronized status array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationArray {
    records: BTreeMap<DroneName, DroneRecord>,
    statuses: BTreeMap<DroneName, bool>,
    synced_serial: Option<u64>,
    synced_at: Tick,
}

impl VerificationArray {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serial of the last ledger block incorporated, if any.
    pub fn synced_serial(&self) -> Option<u64> {
        self.synced_serial
    }

    /// Incorporates all blocks after `synced_serial` and re-evaluates every
    /// tracked drone's expiry against `now`.
    pub fn sync(&mut self, ledger: &LedgerState, now: Tick) {
        let from = self.synced_serial.map(|s| s + 1).unwrap_or(0);
        for block in &ledger.blocks()[from as usize..] {
            self.records.insert(
                block.body.drone_name.clone(),
                DroneRecord {
                    latest: block.header.crt_type,
                    expiry: block.body.expiry,
                },
            );
            self.synced_serial = Some(block.header.serial_number);
        }
        self.synced_at = now;
        self.statuses = self
            .records
            .iter()
            .map(|(name, rec)| (name.clone(), Self::record_valid(rec, now)))
            .collect();
    }

    fn record_valid(rec: &DroneRecord, now: Tick) -> bool {
        rec.latest == CrtType::Initial && now < rec.expiry
    }

    /// Constant-time validity lookup. Unknown names are invalid; a
    /// certificate is invalid from its expiry tick onward.
    pub fn is_valid(&self, name: &DroneName, now: Tick) -> bool {
        self.records
            .get(name)
            .map(|rec| Self::record_valid(rec, now))
            .unwrap_or(false)
    }

    /// The raw boolean array as of the last sync.
    pub fn statuses(&self) -> &BTreeMap<DroneName, bool> {
        &self.statuses
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{digest, KeyPair};
    use crate::testutil::{build_block, validator_set, validators};
    use crate::ledger::CertStatus;
    use crate::model::make_transaction;

    fn name(s: &str) -> DroneName {
        DroneName::new(s).unwrap()
    }

    fn lifecycle_ledger() -> (LedgerState, Vec<KeyPair>) {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = KeyPair::from_seed([1; 32]);
        let tx1 = make_transaction(CrtType::Initial, "Drone_1", &op, 1_000, digest(b"a")).unwrap();
        ledger.append(build_block(&ledger, &tx1, &vs, 3), 0).unwrap();
        let tx2 = make_transaction(CrtType::Initial, "Drone_2", &op, 1_000, digest(b"b")).unwrap();
        ledger.append(build_block(&ledger, &tx2, &vs, 3), 1).unwrap();
        let rev = make_transaction(CrtType::Revoke, "Drone_2", &op, 0, digest(b"c")).unwrap();
        ledger.append(build_block(&ledger, &rev, &vs, 3), 2).unwrap();
        (ledger, vs)
    }

    #[test]
    fn active_true_revoked_false_unknown_false() {
        let (ledger, _) = lifecycle_ledger();
        let mut plugin = VerificationArray::new();
        plugin.sync(&ledger, 10);
        assert!(plugin.is_valid(&name("Drone_1"), 10));
        assert!(!plugin.is_valid(&name("Drone_2"), 10));
        assert!(!plugin.is_valid(&name("Drone_99"), 10));
        assert_eq!(plugin.statuses().get(&name("Drone_1")), Some(&true));
        assert_eq!(plugin.statuses().get(&name("Drone_2")), Some(&false));
    }

    #[test]
    fn expiry_tick_is_invalid() {
        let (ledger, _) = lifecycle_ledger();
        let mut plugin = VerificationArray::new();
        plugin.sync(&ledger, 10);
        assert!(plugin.is_valid(&name("Drone_1"), 999));
        assert!(!plugin.is_valid(&name("Drone_1"), 1_000));
        assert!(!plugin.is_valid(&name("Drone_1"), 1_001));
        // Matches the ledger's status fold at the boundary.
        assert_eq!(
            ledger.certificate_status(&name("Drone_1"), 1_000),
            CertStatus::Expired
        );
    }

    #[test]
    fn sync_is_idempotent_without_new_blocks() {
        let (ledger, _) = lifecycle_ledger();
        let mut plugin = VerificationArray::new();
        plugin.sync(&ledger, 10);
        let snapshot = plugin.clone();
        plugin.sync(&ledger, 10);
        assert_eq!(plugin, snapshot);
    }

    #[test]
    fn incremental_syncs_equal_full_resync() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = KeyPair::from_seed([2; 32]);

        let mut incremental = VerificationArray::new();
        for i in 0..12u64 {
            let drone = format!("svc-{}", i % 4);
            let dn = name(&drone);
            let crt = if ledger.certificate_status(&dn, i) == CertStatus::Active && i % 3 == 2 {
                CrtType::Revoke
            } else if ledger.certificate_status(&dn, i) == CertStatus::Active {
                continue;
            } else {
                CrtType::Initial
            };
            let tx = make_transaction(crt, &drone, &op, i + 50, digest(&[i as u8])).unwrap();
            ledger.append(build_block(&ledger, &tx, &vs, 3), i).unwrap();
            // Sync after every block: any partition of the stream must agree.
            incremental.sync(&ledger, 20);
        }
        let mut full = VerificationArray::new();
        full.sync(&ledger, 20);
        assert_eq!(incremental, full);
    }

    #[test]
    fn plugin_matches_status_fold_for_all_names_and_ticks() {
        let (ledger, _) = lifecycle_ledger();
        let mut plugin = VerificationArray::new();
        plugin.sync(&ledger, 0);
        for drone in ["Drone_1", "Drone_2", "Drone_x"] {
            let dn = name(drone);
            for tick in 0..1_200 {
                let expected = ledger.certificate_status(&dn, tick) == CertStatus::Active;
                assert_eq!(plugin.is_valid(&dn, tick), expected, "{drone} at {tick}");
            }
        }
    }

    #[test]
    fn revocation_refusal_is_monotone_until_reregistration() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = KeyPair::from_seed([3; 32]);
        let tx = make_transaction(CrtType::Initial, "svc", &op, 10_000, digest(b"a")).unwrap();
        ledger.append(build_block(&ledger, &tx, &vs, 3), 0).unwrap();
        let rev = make_transaction(CrtType::Revoke, "svc", &op, 0, digest(b"b")).unwrap();
        ledger.append(build_block(&ledger, &rev, &vs, 3), 5).unwrap();

        let mut plugin = VerificationArray::new();
        plugin.sync(&ledger, 5);
        for tick in 5..200 {
            assert!(!plugin.is_valid(&name("svc"), tick));
        }

        // A fresh initial flips it back.
        let again = make_transaction(CrtType::Initial, "svc", &op, 10_000, digest(b"c")).unwrap();
        ledger.append(build_block(&ledger, &again, &vs, 3), 210).unwrap();
        plugin.sync(&ledger, 210);
        assert!(plugin.is_valid(&name("svc"), 211));
    }
}
