//! Round orchestration: proposer rotation, vote collection, the
//! strictly-more-than-half commit rule, multi-signature footer assembly,
//! validator admission, strike-based eviction, and the reward tally.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest, KeyPair, PublicKey, Signature};
use crate::ledger::{LedgerState, PendingId};
use crate::model::{
    content_digest, Block, BlockBody, BlockFooter, BlockHeader, ChallengeTranscript, Tick,
};
use crate::validator::Verdict;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("validator set is empty")]
    EmptyValidatorSet,
    #[error("vote from a key outside the validator set")]
    ForeignVote,
    #[error("validator already voted in this round")]
    DoubleVote,
    #[error("round deadline has passed")]
    StaleRound,
    #[error("vote signature does not verify")]
    BadVoteSignature,
    #[error("admission credential does not verify under the root key")]
    BadCredential,
}

/// Deterministic round-robin proposer: validators sorted by key bytes,
/// index `round_id mod n`. Insertion order never matters because the set is
/// consulted in sorted order.
pub fn select_proposer(
    round_id: u64,
    validator_set: &BTreeSet<PublicKey>,
) -> Result<PublicKey, ConsensusError> {
    if validator_set.is_empty() {
        return Err(ConsensusError::EmptyValidatorSet);
    }
    let idx = (round_id % validator_set.len() as u64) as usize;
    Ok(*validator_set.iter().nth(idx).expect("index within set"))
}

/// A proposed block candidate: header and body fixed against the proposer's
/// chain view, plus the challenge evidence voters re-verify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub header: BlockHeader,
    pub body: BlockBody,
    pub transcript: ChallengeTranscript,
    /// Validator that ran the challenge and issued its token.
    pub validated_by: PublicKey,
    pub pending_id: PendingId,
}

impl Candidate {
    pub fn content_digest(&self) -> Digest {
        content_digest(&self.header, &self.body)
    }
}

/// One validator's vote. Approvals sign the candidate's content digest
/// directly (the footer reuses the same signature); rejections sign the
/// digest under a distinct domain tag so they cannot be replayed as
/// approvals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub verdict: Verdict,
    pub signature: Signature,
}

/// Builds a correctly signed vote for a candidate.
pub fn cast_vote(voter: &KeyPair, candidate: &Candidate, verdict: Verdict) -> Vote {
    let content = candidate.content_digest();
    let signature = match verdict {
        Verdict::Approve => crypto::sign(&voter.secret, content.as_bytes()),
        Verdict::Reject => crypto::sign(&voter.secret, &reject_message(&content)),
    };
    Vote { verdict, signature }
}

fn reject_message(content: &Digest) -> Vec<u8> {
    let mut buf = b"vote-reject".to_vec();
    buf.extend_from_slice(content.as_bytes());
    buf
}

/// One voting round over a candidate.
#[derive(Debug, Clone)]
pub struct Round {
    pub id: u64,
    pub proposer: PublicKey,
    pub candidate: Candidate,
    pub deadline: Tick,
    votes: BTreeMap<PublicKey, Vote>,
}

impl Round {
    pub fn new(id: u64, proposer: PublicKey, candidate: Candidate, deadline: Tick) -> Self {
        Round {
            id,
            proposer,
            candidate,
            deadline,
            votes: BTreeMap::new(),
        }
    }

    /// Registers a vote after checking membership, uniqueness, timeliness,
    /// and the vote signature.
    pub fn add_vote(
        &mut self,
        voter: PublicKey,
        vote: Vote,
        validator_set: &BTreeSet<PublicKey>,
        now: Tick,
    ) -> Result<(), ConsensusError> {
        if now > self.deadline {
            return Err(ConsensusError::StaleRound);
        }
        if !validator_set.contains(&voter) {
            return Err(ConsensusError::ForeignVote);
        }
        if self.votes.contains_key(&voter) {
            return Err(ConsensusError::DoubleVote);
        }
        let content = self.candidate.content_digest();
        let valid = match vote.verdict {
            Verdict::Approve => crypto::verify(&voter, content.as_bytes(), &vote.signature),
            Verdict::Reject => crypto::verify(&voter, &reject_message(&content), &vote.signature),
        };
        if !valid {
            return Err(ConsensusError::BadVoteSignature);
        }
        self.votes.insert(voter, vote);
        Ok(())
    }

    pub fn votes(&self) -> &BTreeMap<PublicKey, Vote> {
        &self.votes
    }

    pub fn approvals(&self) -> usize {
        self.votes
            .values()
            .filter(|v| v.verdict == Verdict::Approve)
            .count()
    }

    pub fn rejections(&self) -> usize {
        self.votes
            .values()
            .filter(|v| v.verdict == Verdict::Reject)
            .count()
    }
}

/// Why a round failed to commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitFailure {
    /// Approvals did not exceed half the validator set.
    InsufficientApprovals { approvals: usize, validators: usize },
    /// The assembled block was refused by the ledger.
    LedgerRejected(String),
}

/// Outcome of closing a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommitResult {
    Committed(Block),
    Failed(CommitFailure),
}

/// Per-validator credit balances. One credit per signature included in a
/// committed footer; credits only ever increase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardTally {
    credits: BTreeMap<PublicKey, u64>,
}

impl RewardTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn credit(&mut self, validator: PublicKey) {
        *self.credits.entry(validator).or_insert(0) += 1;
    }

    pub fn credits(&self, validator: &PublicKey) -> u64 {
        self.credits.get(validator).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.credits.values().sum()
    }
}

/// Closes a round: if approvals strictly exceed half the validator set, the
/// approving signatures become the block footer, the block is appended, and
/// each signer earns one credit. Otherwise the transaction stays pending.
pub fn collect_and_commit(
    round: &Round,
    ledger: &mut LedgerState,
    tally: &mut RewardTally,
    now: Tick,
) -> CommitResult {
    let n = ledger.validator_set().len();
    let approvals: Vec<crate::model::Approval> = round
        .votes
        .iter()
        .filter(|(_, v)| v.verdict == Verdict::Approve)
        .map(|(pk, v)| crate::model::Approval {
            validator: *pk,
            signature: v.signature,
        })
        .collect();
    if approvals.len() * 2 <= n {
        return CommitResult::Failed(CommitFailure::InsufficientApprovals {
            approvals: approvals.len(),
            validators: n,
        });
    }
    let block = Block {
        header: round.candidate.header.clone(),
        body: round.candidate.body.clone(),
        footer: BlockFooter::new(approvals),
    };
    match ledger.append(block.clone(), now) {
        Ok(()) => {
            for approval in &block.footer.approvals {
                tally.credit(approval.validator);
            }
            CommitResult::Committed(block)
        }
        Err(err) => CommitResult::Failed(CommitFailure::LedgerRejected(err.to_string())),
    }
}

/// Aged pending transactions in priority order. The simulator forces the
/// next proposer to take the head of this list; skipping it is what the
/// inactivity log records.
pub fn escalate_pending(ledger: &LedgerState, now: Tick, age_threshold: Tick) -> Vec<PendingId> {
    ledger.pending_aged(now, age_threshold)
}

/// Non-decreasing per-validator counters of skipped aged transactions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InactivityLog {
    counts: BTreeMap<PublicKey, u64>,
}

impl InactivityLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_skip(&mut self, validator: PublicKey) {
        *self.counts.entry(validator).or_insert(0) += 1;
    }

    pub fn count(&self, validator: &PublicKey) -> u64 {
        self.counts.get(validator).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Strike bookkeeping for the eviction rule: a validator whose vote
/// contradicts the validation oracle in [`STRIKE_LIMIT`] committed rounds is
/// removed from the set.
pub const STRIKE_LIMIT: u32 = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrikeBoard {
    strikes: BTreeMap<PublicKey, u32>,
}

impl StrikeBoard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a contradiction; returns true when the validator just reached
    /// the eviction limit.
    pub fn record_contradiction(&mut self, validator: PublicKey) -> bool {
        let strikes = self.strikes.entry(validator).or_insert(0);
        *strikes += 1;
        *strikes == STRIKE_LIMIT
    }

    pub fn strikes(&self, validator: &PublicKey) -> u32 {
        self.strikes.get(validator).copied().unwrap_or(0)
    }
}

/// Message an admission credential signs: the candidate key under a domain
/// tag.
pub fn admission_message(candidate: &PublicKey) -> Vec<u8> {
    let mut buf = b"validator-admission".to_vec();
    buf.extend_from_slice(&candidate.to_bytes());
    buf
}

/// Signs an admission credential with the network root key.
pub fn issue_admission_credential(root: &KeyPair, candidate: &PublicKey) -> Signature {
    crypto::sign(&root.secret, &admission_message(candidate))
}

/// Admits a validator iff its credential is a root signature over its key.
/// The new set takes effect from the next block.
pub fn admit_validator(
    ledger: &mut LedgerState,
    candidate: PublicKey,
    credential: &Signature,
    root: &PublicKey,
) -> Result<(), ConsensusError> {
    if !crypto::verify(root, &admission_message(&candidate), credential) {
        return Err(ConsensusError::BadCredential);
    }
    let mut set = ledger.validator_set().clone();
    set.insert(candidate);
    ledger.push_epoch(set);
    Ok(())
}

/// Removes a validator from the set effective from the next block.
pub fn evict_validator(ledger: &mut LedgerState, validator: &PublicKey) {
    let mut set = ledger.validator_set().clone();
    set.remove(validator);
    ledger.push_epoch(set);
}
