//! Shared helpers for unit tests: deterministic key fixtures and direct
//! block construction without running consensus.

use std::collections::BTreeSet;

use crate::crypto::{sign, KeyPair, PublicKey};
use crate::ledger::LedgerState;
use crate::model::{content_digest, Approval, Block, BlockBody, BlockFooter, Transaction};

/// Deterministic validator key pairs.
pub fn validators(n: usize) -> Vec<KeyPair> {
    (0..n)
        .map(|i| KeyPair::from_seed([100 + i as u8; 32]))
        .collect()
}

pub fn validator_set(vs: &[KeyPair]) -> BTreeSet<PublicKey> {
    vs.iter().map(|v| v.public).collect()
}

/// Builds a block for `tx` against the ledger tip, approved by the first `k`
/// validators.
pub fn build_block(ledger: &LedgerState, tx: &Transaction, vs: &[KeyPair], k: usize) -> Block {
    let header = ledger.header_for(tx.crt_type, &tx.drone_name);
    let body = BlockBody::from_transaction(tx);
    let content = content_digest(&header, &body);
    let approvals = vs[..k]
        .iter()
        .map(|v| Approval {
            validator: v.public,
            signature: sign(&v.secret, content.as_bytes()),
        })
        .collect();
    Block {
        header,
        body,
        footer: BlockFooter::new(approvals),
    }
}
