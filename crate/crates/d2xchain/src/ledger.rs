//! Append-only block ledger with a global hash chain and per-drone service
//! chains, plus the pending-transaction pool.
//!
//! The ledger starts empty; the first committed block has serial 0 and an
//! all-zero global predecessor. Appends re-validate everything a block claims
//! (chain pointers, footer signatures, approval threshold, certificate-state
//! rules), so a ledger built through [`LedgerState::append`] always satisfies
//! [`LedgerState::verify_chain`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest, PublicKey};
use crate::model::{Block, BlockHeader, CrtType, DroneName, Tick, Transaction};

/// Stable identifier of a pending-pool entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PendingId(pub u64);

impl std::fmt::Display for PendingId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pending#{}", self.0)
    }
}

/// One entry in the pending-transaction pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingEntry {
    pub id: PendingId,
    pub tx: Transaction,
    pub submitted: Tick,
    /// Consecutive rounds in which a majority rejected this transaction.
    pub consecutive_rejections: u32,
}

/// Validator membership effective from a given block serial onward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatorEpoch {
    pub from_serial: u64,
    pub validators: BTreeSet<PublicKey>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("malformed transaction: {0}")]
    MalformedTransaction(String),
    #[error("block {serial}: global hash pointer does not match the ledger tip")]
    BrokenGlobalChain { serial: u64 },
    #[error("block {serial}: service hash pointer does not match the drone's chain")]
    BrokenServiceChain { serial: u64 },
    #[error("block {serial}: {approvals} approvals do not exceed half of {validators} validators")]
    InsufficientApprovals {
        serial: u64,
        approvals: usize,
        validators: usize,
    },
    #[error("block {serial}: approval signed by a key outside the validator set")]
    UnknownValidatorSignature { serial: u64 },
    #[error("block {serial}: approval signature does not verify")]
    InvalidApprovalSignature { serial: u64 },
    #[error("block {serial}: duplicate approver in footer")]
    DuplicateApprover { serial: u64 },
    #[error("block {serial}: serial number does not match ledger position")]
    SerialMismatch { serial: u64 },
    #[error("initial certificate while an active binding exists for {0}")]
    DuplicateActiveCertificate(DroneName),
    #[error("revocation without a prior binding for {0}")]
    RevokeWithoutBinding(DroneName),
    #[error("ledger file: {0}")]
    BadFile(String),
}

/// Verdict of the certificate-status fold over one drone's chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Active,
    Revoked,
    Expired,
    Unknown,
}

/// First failure found by [`LedgerState::verify_chain`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chain verification failed at block {serial}: {fault}")]
pub struct ChainViolation {
    pub serial: u64,
    pub fault: ChainFault,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainFault {
    #[error("serial number does not match position")]
    SerialMismatch,
    #[error("global hash pointer mismatch")]
    GlobalPointer,
    #[error("service hash pointer mismatch")]
    ServicePointer,
    #[error("operator signature does not verify")]
    OperatorSignature,
    #[error("footer approval signature does not verify")]
    ApprovalSignature,
    #[error("footer contains a key outside the validator set")]
    UnknownValidator,
    #[error("footer contains a duplicate approver")]
    DuplicateApprover,
    #[error("approvals do not exceed half the validator set")]
    Threshold,
}

/// The ledger: committed blocks, the pending pool, per-drone chain heads,
/// and the validator-set history.
#[derive(Debug, Clone)]
pub struct LedgerState {
    blocks: Vec<Block>,
    pending: Vec<PendingEntry>,
    head_by_drone: BTreeMap<DroneName, usize>,
    epochs: Vec<ValidatorEpoch>,
    next_pending: u64,
}

impl LedgerState {
    /// Creates an empty ledger governed by the given validator set.
    pub fn new(validators: BTreeSet<PublicKey>) -> Self {
        LedgerState {
            blocks: Vec::new(),
            pending: Vec::new(),
            head_by_drone: BTreeMap::new(),
            epochs: vec![ValidatorEpoch {
                from_serial: 0,
                validators,
            }],
            next_pending: 0,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip_serial(&self) -> Option<u64> {
        self.blocks.last().map(|b| b.header.serial_number)
    }

    /// Digest the next block's `global_prev` must carry.
    pub fn tip_digest(&self) -> Digest {
        self.blocks
            .last()
            .map(|b| b.block_digest())
            .unwrap_or(Digest::ZERO)
    }

    /// Latest committed block for a drone, if any.
    pub fn latest_block_for(&self, name: &DroneName) -> Option<&Block> {
        self.head_by_drone.get(name).map(|&i| &self.blocks[i])
    }

    /// Current validator set (the most recent epoch).
    pub fn validator_set(&self) -> &BTreeSet<PublicKey> {
        &self.epochs.last().expect("at least one epoch").validators
    }

    /// Validator set in force when block `serial` was committed.
    pub fn validator_set_at(&self, serial: u64) -> &BTreeSet<PublicKey> {
        let epoch = self
            .epochs
            .iter()
            .rev()
            .find(|e| e.from_serial <= serial)
            .expect("epoch 0 covers serial 0");
        &epoch.validators
    }

    pub fn epochs(&self) -> &[ValidatorEpoch] {
        &self.epochs
    }

    /// Replaces the validator set from the next block onward.
    pub fn push_epoch(&mut self, validators: BTreeSet<PublicKey>) {
        let from_serial = self.blocks.len() as u64;
        if let Some(last) = self.epochs.last_mut() {
            if last.from_serial == from_serial {
                last.validators = validators;
                return;
            }
        }
        self.epochs.push(ValidatorEpoch {
            from_serial,
            validators,
        });
    }

    // -- pending pool --------------------------------------------------------

    /// Enqueues a transaction. Structural checks only; duplicates are allowed
    /// here and weeded out during validation.
    pub fn submit(&mut self, tx: Transaction, now: Tick) -> Result<PendingId, LedgerError> {
        if !tx.verify_signature() {
            return Err(LedgerError::MalformedTransaction(
                "operator signature does not verify".into(),
            ));
        }
        if tx.crt_type == CrtType::Initial && tx.expiry <= now {
            return Err(LedgerError::MalformedTransaction(
                "expiry must lie beyond the submission tick".into(),
            ));
        }
        let id = PendingId(self.next_pending);
        self.next_pending += 1;
        self.pending.push(PendingEntry {
            id,
            tx,
            submitted: now,
            consecutive_rejections: 0,
        });
        Ok(id)
    }

    pub fn pending(&self) -> &[PendingEntry] {
        &self.pending
    }

    pub fn pending_entry(&self, id: PendingId) -> Option<&PendingEntry> {
        self.pending.iter().find(|e| e.id == id)
    }

    pub fn remove_pending(&mut self, id: PendingId) -> Option<PendingEntry> {
        let idx = self.pending.iter().position(|e| e.id == id)?;
        Some(self.pending.remove(idx))
    }

    /// Records a majority rejection; returns the updated consecutive count.
    pub fn record_rejection(&mut self, id: PendingId) -> Option<u32> {
        let entry = self.pending.iter_mut().find(|e| e.id == id)?;
        entry.consecutive_rejections += 1;
        Some(entry.consecutive_rejections)
    }

    /// Pending entries at least `age_threshold` ticks old, oldest first.
    pub fn pending_aged(&self, now: Tick, age_threshold: Tick) -> Vec<PendingId> {
        let mut aged: Vec<&PendingEntry> = self
            .pending
            .iter()
            .filter(|e| now.saturating_sub(e.submitted) >= age_threshold)
            .collect();
        aged.sort_by_key(|e| (e.submitted, e.id));
        aged.into_iter().map(|e| e.id).collect()
    }

    // -- blocks --------------------------------------------------------------

    /// Header for the next block committing a transaction of this type for
    /// this drone, bound to the current chain tips.
    pub fn header_for(&self, crt_type: CrtType, drone: &DroneName) -> BlockHeader {
        BlockHeader {
            serial_number: self.blocks.len() as u64,
            crt_type,
            global_prev: self.tip_digest(),
            service_prev: self.latest_block_for(drone).map(|b| b.block_digest()),
        }
    }

    /// Appends a block after re-validating every invariant it must satisfy
    /// against the current tip, the validator set, and certificate state.
    /// Also clears a matching pending entry, if one exists.
    pub fn append(&mut self, block: Block, now: Tick) -> Result<(), LedgerError> {
        let serial = block.header.serial_number;
        if serial != self.blocks.len() as u64 {
            return Err(LedgerError::SerialMismatch { serial });
        }
        if block.header.global_prev != self.tip_digest() {
            return Err(LedgerError::BrokenGlobalChain { serial });
        }
        let expected_service = self
            .latest_block_for(&block.body.drone_name)
            .map(|b| b.block_digest());
        if block.header.service_prev != expected_service {
            return Err(LedgerError::BrokenServiceChain { serial });
        }
        if !block.transaction().verify_signature() {
            return Err(LedgerError::MalformedTransaction(
                "operator signature does not verify".into(),
            ));
        }

        let validators = self.validator_set();
        let n = validators.len();
        let content = block.content_digest();
        let mut seen: BTreeSet<PublicKey> = BTreeSet::new();
        for approval in &block.footer.approvals {
            if !seen.insert(approval.validator) {
                return Err(LedgerError::DuplicateApprover { serial });
            }
            if !validators.contains(&approval.validator) {
                return Err(LedgerError::UnknownValidatorSignature { serial });
            }
            if !crypto::verify(&approval.validator, content.as_bytes(), &approval.signature) {
                return Err(LedgerError::InvalidApprovalSignature { serial });
            }
        }
        if block.footer.approvals.len() * 2 <= n {
            return Err(LedgerError::InsufficientApprovals {
                serial,
                approvals: block.footer.approvals.len(),
                validators: n,
            });
        }

        // Certificate-state rules, re-checked at append as defense in depth.
        match block.header.crt_type {
            CrtType::Initial => {
                if self.certificate_status(&block.body.drone_name, now) == CertStatus::Active {
                    return Err(LedgerError::DuplicateActiveCertificate(
                        block.body.drone_name.clone(),
                    ));
                }
            }
            CrtType::Revoke => {
                let status = self.certificate_status(&block.body.drone_name, now);
                if !matches!(status, CertStatus::Active | CertStatus::Expired) {
                    return Err(LedgerError::RevokeWithoutBinding(
                        block.body.drone_name.clone(),
                    ));
                }
            }
        }

        let tx = block.transaction();
        self.head_by_drone
            .insert(block.body.drone_name.clone(), self.blocks.len());
        self.blocks.push(block);
        if let Some(id) = self
            .pending
            .iter()
            .find(|e| e.tx == tx)
            .map(|e| e.id)
        {
            self.remove_pending(id);
        }
        Ok(())
    }

    /// Re-verifies the whole chain from genesis. Hash pointers are checked
    /// first (cheap, catches any byte-level tamper via the chained digests),
    /// then signatures and thresholds.
    pub fn verify_chain(&self) -> Result<(), ChainViolation> {
        let fail = |serial: u64, fault: ChainFault| ChainViolation { serial, fault };

        // Pass 1: positions and hash pointers.
        let mut prev_digest = Digest::ZERO;
        let mut service_heads: BTreeMap<&DroneName, Digest> = BTreeMap::new();
        for (i, block) in self.blocks.iter().enumerate() {
            let serial = i as u64;
            if block.header.serial_number != serial {
                return Err(fail(serial, ChainFault::SerialMismatch));
            }
            if block.header.global_prev != prev_digest {
                return Err(fail(serial, ChainFault::GlobalPointer));
            }
            let expected_service = service_heads.get(&block.body.drone_name).copied();
            if block.header.service_prev != expected_service {
                return Err(fail(serial, ChainFault::ServicePointer));
            }
            let d = block.block_digest();
            service_heads.insert(&block.body.drone_name, d);
            prev_digest = d;
        }

        // Pass 2: signatures and approval thresholds.
        for (i, block) in self.blocks.iter().enumerate() {
            let serial = i as u64;
            if !block.transaction().verify_signature() {
                return Err(fail(serial, ChainFault::OperatorSignature));
            }
            let validators = self.validator_set_at(serial);
            let content = block.content_digest();
            let mut seen: BTreeSet<PublicKey> = BTreeSet::new();
            for approval in &block.footer.approvals {
                if !seen.insert(approval.validator) {
                    return Err(fail(serial, ChainFault::DuplicateApprover));
                }
                if !validators.contains(&approval.validator) {
                    return Err(fail(serial, ChainFault::UnknownValidator));
                }
                if !crypto::verify(&approval.validator, content.as_bytes(), &approval.signature) {
                    return Err(fail(serial, ChainFault::ApprovalSignature));
                }
            }
            if block.footer.approvals.len() * 2 <= validators.len() {
                return Err(fail(serial, ChainFault::Threshold));
            }
        }
        Ok(())
    }

    /// Status of a drone's certificate at tick `now`: a fold over the drone's
    /// chain. Unknown if the drone has no block; Revoked if the latest block
    /// is a revocation; Expired if the latest initial's expiry has passed
    /// (expiry tick itself counts as expired); Active otherwise.
    pub fn certificate_status(&self, name: &DroneName, now: Tick) -> CertStatus {
        match self.latest_block_for(name) {
            None => CertStatus::Unknown,
            Some(block) => match block.header.crt_type {
                CrtType::Revoke => CertStatus::Revoked,
                CrtType::Initial => {
                    if block.body.expiry <= now {
                        CertStatus::Expired
                    } else {
                        CertStatus::Active
                    }
                }
            },
        }
    }

    /// Operator key currently bound to a drone name (the key recorded in the
    /// drone's latest block), regardless of expiry.
    pub fn bound_operator(&self, name: &DroneName) -> Option<PublicKey> {
        self.latest_block_for(name).map(|b| b.body.operator_pubkey)
    }

    // -- export / import -----------------------------------------------------

    /// Writes the ledger as JSON lines: one epoch record, then one block per
    /// line, in commit order.
    pub fn export_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let epochs = LedgerRecord::Epochs {
            epochs: self.epochs.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&epochs)?)?;
        for block in &self.blocks {
            let record = LedgerRecord::Block {
                block: block.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&record)?)?;
        }
        Ok(())
    }

    /// Reads a ledger file produced by [`export_jsonl`](Self::export_jsonl).
    /// Reconstructs indices; run [`verify_chain`](Self::verify_chain) to
    /// check integrity.
    pub fn import_jsonl<R: BufRead>(reader: R) -> Result<LedgerState, LedgerError> {
        let mut epochs: Option<Vec<ValidatorEpoch>> = None;
        let mut blocks: Vec<Block> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| LedgerError::BadFile(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LedgerRecord = serde_json::from_str(&line)
                .map_err(|e| LedgerError::BadFile(format!("line {}: {}", lineno + 1, e)))?;
            match record {
                LedgerRecord::Epochs { epochs: e } => {
                    if epochs.is_some() {
                        return Err(LedgerError::BadFile("duplicate epochs record".into()));
                    }
                    epochs = Some(e);
                }
                LedgerRecord::Block { block } => blocks.push(block),
            }
        }
        let epochs = epochs.ok_or_else(|| LedgerError::BadFile("missing epochs record".into()))?;
        if epochs.is_empty() || epochs[0].from_serial != 0 {
            return Err(LedgerError::BadFile(
                "epochs must start at serial 0".into(),
            ));
        }
        let mut head_by_drone = BTreeMap::new();
        for (i, block) in blocks.iter().enumerate() {
            head_by_drone.insert(block.body.drone_name.clone(), i);
        }
        Ok(LedgerState {
            blocks,
            pending: Vec::new(),
            head_by_drone,
            epochs,
            next_pending: 0,
        })
    }

    /// Digest over the exported byte form; two ledgers with equal digests
    /// exported the same bytes.
    pub fn export_digest(&self) -> Digest {
        let mut buf = Vec::new();
        self.export_jsonl(&mut buf).expect("in-memory write");
        crypto::digest(&buf)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LedgerRecord {
    Epochs { epochs: Vec<ValidatorEpoch> },
    Block { block: Block },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{digest, sign, KeyPair};
    use crate::model::{make_transaction, Approval, BlockFooter};
    use crate::testutil::{build_block, validator_set, validators};

    fn operator(tag: u8) -> KeyPair {
        KeyPair::from_seed([tag; 32])
    }

    #[test]
    fn empty_ledger_verifies() {
        let ledger = LedgerState::new(BTreeSet::new());
        assert!(ledger.verify_chain().is_ok());
    }

    #[test]
    fn append_happy_path_and_status() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(1);
        let tx = make_transaction(CrtType::Initial, "Drone_1", &op, 100, digest(b"csr")).unwrap();
        let block = build_block(&ledger, &tx, &vs, 3);
        ledger.append(block, 0).unwrap();

        assert_eq!(ledger.blocks().len(), 1);
        let name = DroneName::new("Drone_1").unwrap();
        assert_eq!(ledger.certificate_status(&name, 50), CertStatus::Active);
        assert_eq!(ledger.certificate_status(&name, 100), CertStatus::Expired);
        assert_eq!(
            ledger.certificate_status(&DroneName::new("nobody").unwrap(), 0),
            CertStatus::Unknown
        );
        assert!(ledger.verify_chain().is_ok());
    }

    #[test]
    fn two_of_four_approvals_rejected() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let tx =
            make_transaction(CrtType::Initial, "svc", &operator(2), 100, digest(b"c")).unwrap();
        let block = build_block(&ledger, &tx, &vs, 2);
        assert!(matches!(
            ledger.append(block, 0),
            Err(LedgerError::InsufficientApprovals { approvals: 2, validators: 4, .. })
        ));
    }

    #[test]
    fn broken_global_pointer_rejected() {
        let vs = validators(3);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let tx =
            make_transaction(CrtType::Initial, "svc", &operator(3), 100, digest(b"c")).unwrap();
        let mut block = build_block(&ledger, &tx, &vs, 2);
        block.header.global_prev = digest(b"wrong tip");
        assert!(matches!(
            ledger.append(block, 0),
            Err(LedgerError::BrokenGlobalChain { serial: 0 })
        ));
    }

    #[test]
    fn foreign_approver_rejected() {
        let vs = validators(3);
        let outsider = KeyPair::from_seed([200; 32]);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let tx =
            make_transaction(CrtType::Initial, "svc", &operator(4), 100, digest(b"c")).unwrap();
        let mut block = build_block(&ledger, &tx, &vs, 2);
        let content = block.content_digest();
        block.footer = BlockFooter::new(
            block
                .footer
                .approvals
                .into_iter()
                .chain(std::iter::once(Approval {
                    validator: outsider.public,
                    signature: sign(&outsider.secret, content.as_bytes()),
                }))
                .collect(),
        );
        assert!(matches!(
            ledger.append(block, 0),
            Err(LedgerError::UnknownValidatorSignature { .. })
        ));
    }

    #[test]
    fn duplicate_active_certificate_rejected_but_renewal_allowed() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(5);
        let tx1 = make_transaction(CrtType::Initial, "svc", &op, 50, digest(b"a")).unwrap();
        ledger.append(build_block(&ledger, &tx1, &vs, 3), 0).unwrap();

        // Second initial while the first is active: rejected.
        let tx2 = make_transaction(CrtType::Initial, "svc", &op, 500, digest(b"b")).unwrap();
        let block2 = build_block(&ledger, &tx2, &vs, 3);
        assert!(matches!(
            ledger.append(block2, 10),
            Err(LedgerError::DuplicateActiveCertificate(_))
        ));

        // After expiry the same chain accepts a fresh initial.
        let tx3 = make_transaction(CrtType::Initial, "svc", &op, 500, digest(b"c")).unwrap();
        let block3 = build_block(&ledger, &tx3, &vs, 3);
        ledger.append(block3, 60).unwrap();
        let name = DroneName::new("svc").unwrap();
        assert_eq!(ledger.certificate_status(&name, 61), CertStatus::Active);
        // The renewal extends the same service chain.
        assert!(ledger.blocks()[1].header.service_prev.is_some());
        assert!(ledger.verify_chain().is_ok());
    }

    #[test]
    fn revoke_without_binding_rejected() {
        let vs = validators(3);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let tx = make_transaction(CrtType::Revoke, "ghost", &operator(6), 0, digest(b"r")).unwrap();
        let block = build_block(&ledger, &tx, &vs, 2);
        assert!(matches!(
            ledger.append(block, 0),
            Err(LedgerError::RevokeWithoutBinding(_))
        ));
    }

    #[test]
    fn submit_guards_and_duplicates() {
        let vs = validators(3);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(7);
        let tx = make_transaction(CrtType::Initial, "svc", &op, 100, digest(b"c")).unwrap();

        // Broken signature is refused.
        let mut bad = tx.clone();
        bad.expiry += 1;
        assert!(matches!(
            ledger.submit(bad, 0),
            Err(LedgerError::MalformedTransaction(_))
        ));

        // Expiry at the submission tick is refused.
        let stale = make_transaction(CrtType::Initial, "svc", &op, 5, digest(b"c")).unwrap();
        assert!(ledger.submit(stale, 5).is_err());

        // The same bytes may be enqueued twice; validation dedups later.
        ledger.submit(tx.clone(), 0).unwrap();
        ledger.submit(tx, 1).unwrap();
        assert_eq!(ledger.pending().len(), 2);
    }

    #[test]
    fn pending_aged_orders_and_filters() {
        let vs = validators(3);
        let mut ledger = LedgerState::new(validator_set(&vs));
        assert!(ledger.pending_aged(100, 10).is_empty());

        let op = operator(8);
        let mk = |name: &str| make_transaction(CrtType::Initial, name, &op, 1000, digest(b"c")).unwrap();
        let a = ledger.submit(mk("a"), 0).unwrap();
        let b = ledger.submit(mk("b"), 5).unwrap();
        let _c = ledger.submit(mk("c"), 9).unwrap();

        // Age exactly at the threshold is included; entries sort oldest first.
        assert_eq!(ledger.pending_aged(10, 5), vec![a, b]);

        // Brute-force oracle: filter then sort by submission tick.
        let oracle: Vec<PendingId> = {
            let mut v: Vec<_> = ledger
                .pending()
                .iter()
                .filter(|e| 10 - e.submitted >= 5)
                .collect();
            v.sort_by_key(|e| e.submitted);
            v.iter().map(|e| e.id).collect()
        };
        assert_eq!(ledger.pending_aged(10, 5), oracle);
    }

    #[test]
    fn fifty_block_chain_verifies_and_tamper_is_detected() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(9);
        for i in 0..50u64 {
            let name = format!("svc-{}", i % 7);
            let status = ledger.certificate_status(&DroneName::new(&name).unwrap(), i);
            let crt = if status == CertStatus::Active {
                CrtType::Revoke
            } else {
                CrtType::Initial
            };
            let tx = make_transaction(crt, &name, &op, i + 10_000, digest(&i.to_be_bytes())).unwrap();
            let block = build_block(&ledger, &tx, &vs, 3);
            ledger.append(block, i).unwrap();
        }
        assert!(ledger.verify_chain().is_ok());

        // Recompute-all oracle: every stored pointer matches a from-scratch digest.
        let mut prev = Digest::ZERO;
        for block in ledger.blocks() {
            assert_eq!(block.header.global_prev, prev);
            prev = digest(&block.canonical_bytes());
        }

        // Flip one byte in block 7's body: verification fails at block 8's
        // global pointer at the latest (the chain digest changed).
        let mut tampered = ledger.clone();
        let name = tampered.blocks[7].body.drone_name.as_str().to_string();
        tampered.blocks[7].body.drone_name =
            DroneName::new(format!("{}x", &name[..name.len() - 1])).unwrap();
        let violation = tampered.verify_chain().unwrap_err();
        assert!(violation.serial == 7 || violation.serial == 8);
    }

    #[test]
    fn export_import_round_trip() {
        let vs = validators(3);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(10);
        for i in 0..5u64 {
            let tx = make_transaction(
                CrtType::Initial,
                &format!("svc-{i}"),
                &op,
                1000,
                digest(&[i as u8]),
            )
            .unwrap();
            let block = build_block(&ledger, &tx, &vs, 2);
            ledger.append(block, i).unwrap();
        }
        let mut buf = Vec::new();
        ledger.export_jsonl(&mut buf).unwrap();
        let imported = LedgerState::import_jsonl(buf.as_slice()).unwrap();
        assert_eq!(imported.blocks(), ledger.blocks());
        assert_eq!(imported.epochs(), ledger.epochs());
        assert!(imported.verify_chain().is_ok());
        assert_eq!(imported.export_digest(), ledger.export_digest());
    }

    #[test]
    fn status_fold_matches_bruteforce_oracle() {
        let vs = validators(4);
        let mut ledger = LedgerState::new(validator_set(&vs));
        let op = operator(11);
        let mut now = 0;
        for i in 0..60u64 {
            let name = format!("svc-{}", i % 5);
            let dn = DroneName::new(&name).unwrap();
            let status = ledger.certificate_status(&dn, now);
            let crt = if status == CertStatus::Active && i % 3 == 0 {
                CrtType::Revoke
            } else if status == CertStatus::Active {
                now += 1;
                continue;
            } else {
                CrtType::Initial
            };
            let tx = make_transaction(crt, &name, &op, now + 20, digest(&[i as u8])).unwrap();
            let block = build_block(&ledger, &tx, &vs, 3);
            ledger.append(block, now).unwrap();
            now += 7;
        }

        // Oracle: replay the drone's chain by scanning all blocks in order.
        let fold = |name: &DroneName, at: Tick| -> CertStatus {
            let mut status = CertStatus::Unknown;
            for block in ledger.blocks() {
                if &block.body.drone_name == name {
                    status = match block.header.crt_type {
                        CrtType::Revoke => CertStatus::Revoked,
                        CrtType::Initial => {
                            if block.body.expiry <= at {
                                CertStatus::Expired
                            } else {
                                CertStatus::Active
                            }
                        }
                    };
                }
            }
            status
        };
        for i in 0..5 {
            let dn = DroneName::new(format!("svc-{i}")).unwrap();
            for at in (0..now + 30).step_by(3) {
                assert_eq!(ledger.certificate_status(&dn, at), fold(&dn, at));
            }
        }
    }
}
