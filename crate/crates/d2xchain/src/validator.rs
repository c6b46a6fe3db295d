//! Service-validator logic: sanity checks, the registration and revocation
//! token challenges, the encrypt-sign handshake, and the transcript
//! verification every voter re-runs.
//!
//! Validation is pure given a ledger snapshot and registry contents, so every
//! validator examining the same evidence reaches the same verdict. The
//! challenge drivers here are synchronous; the simulator performs the same
//! steps as timed events.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, digest, Digest, KeyPair, PublicKey, Signature};
use crate::ledger::{CertStatus, LedgerState};
use crate::model::{
    BlockBody, ChallengeTranscript, CrtType, HandshakeRecord, Tick, Transaction, TranscriptKind,
};
use crate::registry::{TokenRegistry, STATUS_PRESENT};

/// A validator's verdict on a candidate transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Reject,
}

/// Why validation rejected a transaction. Serialized with stable codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Operator signature on the transaction does not verify.
    BadOperatorSignature,
    /// An initial request names a drone with an active certificate.
    DomainAlreadyBound,
    /// A revocation names a drone without a live binding.
    NoPriorBinding,
    /// The registry held no token for the drone (status 0 after retries).
    TokenMissing,
    /// A token was present but does not verify against the expected value.
    TokenMismatch,
    /// The revoking key differs from the registered operator key.
    OperatorKeyMismatch,
    /// The candidate block does not extend this validator's chain view.
    ChainMismatch,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let code = match self {
            RejectReason::BadOperatorSignature => "bad_operator_signature",
            RejectReason::DomainAlreadyBound => "domain_already_bound",
            RejectReason::NoPriorBinding => "no_prior_binding",
            RejectReason::TokenMissing => "token_missing",
            RejectReason::TokenMismatch => "token_mismatch",
            RejectReason::OperatorKeyMismatch => "operator_key_mismatch",
            RejectReason::ChainMismatch => "chain_mismatch",
        };
        f.write_str(code)
    }
}

/// Result of one full validation: verdict, evidence, and (on approval) the
/// validator's signature over the transaction digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<RejectReason>,
    pub transcript: ChallengeTranscript,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validator_signature: Option<Signature>,
}

impl ValidationOutcome {
    fn approve(sv: &KeyPair, tx: &Transaction, transcript: ChallengeTranscript) -> Self {
        let tx_digest = digest(&tx.canonical_bytes());
        ValidationOutcome {
            verdict: Verdict::Approve,
            reason: None,
            transcript,
            validator_signature: Some(crypto::sign(&sv.secret, tx_digest.as_bytes())),
        }
    }

    fn reject(reason: RejectReason, transcript: ChallengeTranscript) -> Self {
        ValidationOutcome {
            verdict: Verdict::Reject,
            reason: Some(reason),
            transcript,
            validator_signature: None,
        }
    }
}

/// Retry policy for token retrieval. The synchronous driver retries
/// immediately; the simulator spaces polls by its configured delay.
#[derive(Debug, Clone, Copy)]
pub struct ChallengeConfig {
    pub poll_retries: u32,
}

impl Default for ChallengeConfig {
    fn default() -> Self {
        ChallengeConfig { poll_retries: 3 }
    }
}

// ---------------------------------------------------------------------------
// Sanity checks
// ---------------------------------------------------------------------------

/// Check 1: the operator signature proves possession of the private key
/// matching the transaction's public key.
pub fn check_key_possession(tx: &Transaction) -> bool {
    tx.verify_signature()
}

/// Check 2 (initial requests): the drone name must not carry an active
/// certificate. Revoked and expired bindings may be re-registered.
pub fn check_domain_absent(ledger: &LedgerState, tx: &Transaction, now: Tick) -> bool {
    !matches!(
        ledger.certificate_status(&tx.drone_name, now),
        CertStatus::Active
    )
}

// ---------------------------------------------------------------------------
// Registration tokens
// ---------------------------------------------------------------------------

/// The digest a registration token signs: hash of the transaction bytes
/// concatenated with the issuing validator's key.
pub fn registration_token_digest(tx: &Transaction, issuer: &PublicKey) -> Digest {
    let mut buf = tx.canonical_bytes();
    buf.extend_from_slice(&issuer.to_bytes());
    digest(&buf)
}

/// Issues the registration challenge token `t0`: the validator's signature
/// over the token digest. Deterministic for a given (transaction, validator).
pub fn issue_registration_token(sv: &KeyPair, tx: &Transaction) -> Signature {
    let token = registration_token_digest(tx, &sv.public);
    crypto::sign(&sv.secret, token.as_bytes())
}

/// Operator countersignature `phi0` over the received token.
pub fn operator_sign_token(operator: &KeyPair, t0: &Signature) -> Signature {
    crypto::sign(&operator.secret, t0.as_bytes())
}

// ---------------------------------------------------------------------------
// Revocation tokens
// ---------------------------------------------------------------------------

/// The revocation token digest `t1`: hash of the drone's latest committed
/// block body, the current transaction, and the operator key. Both sides
/// compute it independently and must agree.
pub fn revocation_token_digest(
    prev_body: &BlockBody,
    tx_cur: &Transaction,
    operator: &PublicKey,
) -> Digest {
    let mut buf = prev_body.canonical_bytes();
    buf.extend_from_slice(&tx_cur.canonical_bytes());
    buf.extend_from_slice(&operator.to_bytes());
    digest(&buf)
}

/// Operator-side construction of the revocation token pair `(t1, phi1)`.
pub fn issue_revocation_token(
    operator: &KeyPair,
    ledger: &LedgerState,
    tx_cur: &Transaction,
) -> Result<(Digest, Signature), RejectReason> {
    let prev = ledger
        .latest_block_for(&tx_cur.drone_name)
        .ok_or(RejectReason::NoPriorBinding)?;
    let t1 = revocation_token_digest(&prev.body, tx_cur, &operator.public);
    let phi1 = crypto::sign(&operator.secret, t1.as_bytes());
    Ok((t1, phi1))
}

// ---------------------------------------------------------------------------
// Transcript verification (the voter-side oracle)
// ---------------------------------------------------------------------------

/// Re-verifies a registration transcript: key possession, domain absence,
/// the issuer's token signature, and the operator countersignature. Pure in
/// (transaction, transcript, ledger view).
pub fn verify_registration_transcript(
    tx: &Transaction,
    transcript: &ChallengeTranscript,
    issuer: &PublicKey,
    ledger: &LedgerState,
    now: Tick,
) -> Result<(), RejectReason> {
    if !check_key_possession(tx) {
        return Err(RejectReason::BadOperatorSignature);
    }
    if !check_domain_absent(ledger, tx, now) {
        return Err(RejectReason::DomainAlreadyBound);
    }
    let t0 = transcript.t0.ok_or(RejectReason::TokenMismatch)?;
    let token_digest = registration_token_digest(tx, issuer);
    if !crypto::verify(issuer, token_digest.as_bytes(), &t0) {
        return Err(RejectReason::TokenMismatch);
    }
    let phi0 = transcript.phi0.ok_or(RejectReason::TokenMissing)?;
    if !crypto::verify(&tx.operator_pubkey, t0.as_bytes(), &phi0) {
        return Err(RejectReason::TokenMismatch);
    }
    Ok(())
}

/// Re-verifies a revocation transcript: key possession, binding existence,
/// key match, the recomputed token digest, and the operator signature on it.
pub fn verify_revocation_transcript(
    tx: &Transaction,
    transcript: &ChallengeTranscript,
    ledger: &LedgerState,
    now: Tick,
) -> Result<(), RejectReason> {
    if !check_key_possession(tx) {
        return Err(RejectReason::BadOperatorSignature);
    }
    let status = ledger.certificate_status(&tx.drone_name, now);
    if !matches!(status, CertStatus::Active | CertStatus::Expired) {
        return Err(RejectReason::NoPriorBinding);
    }
    let prev = ledger
        .latest_block_for(&tx.drone_name)
        .expect("status implies a block");
    if prev.body.operator_pubkey != tx.operator_pubkey {
        return Err(RejectReason::OperatorKeyMismatch);
    }
    let expected = revocation_token_digest(&prev.body, tx, &tx.operator_pubkey);
    if transcript.t1 != Some(expected) {
        return Err(RejectReason::TokenMismatch);
    }
    let phi1 = transcript.phi1.ok_or(RejectReason::TokenMissing)?;
    if !crypto::verify(&tx.operator_pubkey, expected.as_bytes(), &phi1) {
        return Err(RejectReason::TokenMismatch);
    }
    Ok(())
}

/// What voters run. Besides the transcript itself, each voter reads the
/// drone's registry entry and checks the hosted token matches the transcript
/// evidence, so a fabricated transcript cannot pass without actual control
/// of the drone's infrastructure.
pub fn verify_with_registry(
    tx: &Transaction,
    transcript: &ChallengeTranscript,
    issuer: &PublicKey,
    ledger: &LedgerState,
    registry: &TokenRegistry,
    now: Tick,
) -> Result<(), RejectReason> {
    match transcript.kind {
        TranscriptKind::Registration => {
            verify_registration_transcript(tx, transcript, issuer, ledger, now)?;
            let (hosted, status) = registry.retrieve_token(&tx.drone_name);
            if status != STATUS_PRESENT {
                return Err(RejectReason::TokenMissing);
            }
            let phi0 = transcript.phi0.expect("checked above");
            if hosted != Some(phi0.as_bytes().as_slice()) {
                return Err(RejectReason::TokenMismatch);
            }
            Ok(())
        }
        TranscriptKind::Revocation => {
            verify_revocation_transcript(tx, transcript, ledger, now)?;
            let (hosted, status) = registry.retrieve_token(&tx.drone_name);
            if status != STATUS_PRESENT {
                return Err(RejectReason::TokenMissing);
            }
            let phi1 = transcript.phi1.expect("checked above");
            if hosted != Some(phi1.as_bytes().as_slice()) {
                return Err(RejectReason::TokenMismatch);
            }
            Ok(())
        }
        TranscriptKind::Handshake => {
            if !check_key_possession(tx) {
                return Err(RejectReason::BadOperatorSignature);
            }
            if tx.crt_type == CrtType::Initial && !check_domain_absent(ledger, tx, now) {
                return Err(RejectReason::DomainAlreadyBound);
            }
            let record = transcript
                .handshake
                .as_ref()
                .ok_or(RejectReason::TokenMismatch)?;
            verify_handshake_record(record, &tx.operator_pubkey, issuer)
                .map_err(|_| RejectReason::TokenMismatch)
        }
    }
}

// ---------------------------------------------------------------------------
// Synchronous challenge drivers
// ---------------------------------------------------------------------------

/// Operator-side behavior during a challenge. Honest operators countersign
/// and place tokens under their own key; adversarial implementations model
/// spoofing and tampering.
pub trait OperatorAgent {
    fn public(&self) -> PublicKey;

    /// Reacts to a registration challenge token `t0`.
    fn respond_registration(
        &mut self,
        tx: &Transaction,
        t0: &Signature,
        registry: &mut TokenRegistry,
        now: Tick,
    );

    /// Reacts to a revocation request by constructing and placing the
    /// revocation token.
    fn respond_revocation(
        &mut self,
        tx: &Transaction,
        ledger: &LedgerState,
        registry: &mut TokenRegistry,
        now: Tick,
    );
}

/// The honest operator: countersigns with its own key and places the token
/// at its drone's registry entry.
pub struct HonestOperator(pub KeyPair);

impl OperatorAgent for HonestOperator {
    fn public(&self) -> PublicKey {
        self.0.public
    }

    fn respond_registration(
        &mut self,
        tx: &Transaction,
        t0: &Signature,
        registry: &mut TokenRegistry,
        now: Tick,
    ) {
        let phi0 = operator_sign_token(&self.0, t0);
        registry.place_token(&self.0.public, &tx.drone_name, phi0.as_bytes().to_vec(), now);
    }

    fn respond_revocation(
        &mut self,
        tx: &Transaction,
        ledger: &LedgerState,
        registry: &mut TokenRegistry,
        now: Tick,
    ) {
        if let Ok((_t1, phi1)) = issue_revocation_token(&self.0, ledger, tx) {
            registry.place_token(&self.0.public, &tx.drone_name, phi1.as_bytes().to_vec(), now);
        }
    }
}

/// Runs the full registration validation against a responding operator:
/// sanity checks, token issuance, placement, retrieval with retries, and
/// countersignature verification.
pub fn validate_registration(
    sv: &KeyPair,
    tx: &Transaction,
    ledger: &LedgerState,
    registry: &mut TokenRegistry,
    agent: &mut dyn OperatorAgent,
    now: Tick,
    cfg: &ChallengeConfig,
) -> ValidationOutcome {
    let empty = || ChallengeTranscript::empty(TranscriptKind::Registration);
    if !check_key_possession(tx) {
        return ValidationOutcome::reject(RejectReason::BadOperatorSignature, empty());
    }
    if !check_domain_absent(ledger, tx, now) {
        return ValidationOutcome::reject(RejectReason::DomainAlreadyBound, empty());
    }

    let t0 = issue_registration_token(sv, tx);
    agent.respond_registration(tx, &t0, registry, now);

    let mut hosted: Option<Vec<u8>> = None;
    for _attempt in 0..cfg.poll_retries.max(1) {
        let (token, status) = registry.retrieve_token(&tx.drone_name);
        if status == STATUS_PRESENT {
            hosted = token.map(|t| t.to_vec());
            break;
        }
    }
    let Some(hosted) = hosted else {
        return ValidationOutcome::reject(
            RejectReason::TokenMissing,
            ChallengeTranscript::registration(t0, None),
        );
    };
    let Some(phi0) = Signature::try_from_slice(&hosted) else {
        return ValidationOutcome::reject(
            RejectReason::TokenMismatch,
            ChallengeTranscript::registration(t0, None),
        );
    };
    let transcript = ChallengeTranscript::registration(t0, Some(phi0));
    match verify_registration_transcript(tx, &transcript, &sv.public, ledger, now) {
        Ok(()) => ValidationOutcome::approve(sv, tx, transcript),
        Err(reason) => ValidationOutcome::reject(reason, transcript),
    }
}

/// Runs the full revocation validation: sanity checks, binding and key-match
/// checks, operator token placement, retrieval, and dual-computation
/// verification of the token digest.
pub fn validate_revocation(
    sv: &KeyPair,
    tx: &Transaction,
    ledger: &LedgerState,
    registry: &mut TokenRegistry,
    agent: &mut dyn OperatorAgent,
    now: Tick,
    cfg: &ChallengeConfig,
) -> ValidationOutcome {
    let empty = || ChallengeTranscript::empty(TranscriptKind::Revocation);
    if !check_key_possession(tx) {
        return ValidationOutcome::reject(RejectReason::BadOperatorSignature, empty());
    }
    let status = ledger.certificate_status(&tx.drone_name, now);
    if !matches!(status, CertStatus::Active | CertStatus::Expired) {
        return ValidationOutcome::reject(RejectReason::NoPriorBinding, empty());
    }
    let prev = ledger
        .latest_block_for(&tx.drone_name)
        .expect("status implies a block");
    if prev.body.operator_pubkey != tx.operator_pubkey {
        return ValidationOutcome::reject(RejectReason::OperatorKeyMismatch, empty());
    }

    agent.respond_revocation(tx, ledger, registry, now);

    // The validator recomputes the token digest independently of the
    // operator; only a token over this exact value passes.
    let expected = revocation_token_digest(&prev.body, tx, &tx.operator_pubkey);

    let mut hosted: Option<Vec<u8>> = None;
    for _attempt in 0..cfg.poll_retries.max(1) {
        let (token, status) = registry.retrieve_token(&tx.drone_name);
        if status == STATUS_PRESENT {
            hosted = token.map(|t| t.to_vec());
            break;
        }
    }
    let Some(hosted) = hosted else {
        return ValidationOutcome::reject(
            RejectReason::TokenMissing,
            ChallengeTranscript::revocation(expected, None),
        );
    };
    let Some(phi1) = Signature::try_from_slice(&hosted) else {
        return ValidationOutcome::reject(
            RejectReason::TokenMismatch,
            ChallengeTranscript::revocation(expected, None),
        );
    };
    let transcript = ChallengeTranscript::revocation(expected, Some(phi1));
    match verify_revocation_transcript(tx, &transcript, ledger, now) {
        Ok(()) => ValidationOutcome::approve(sv, tx, transcript),
        Err(reason) => ValidationOutcome::reject(reason, transcript),
    }
}

// ---------------------------------------------------------------------------
// Encrypt-sign handshake
// ---------------------------------------------------------------------------

/// Where a handshake run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandshakeStep {
    /// Validator-side signature check on the incoming request.
    RequestVerify,
    /// Validator-side decryption of the request.
    RequestOpen,
    /// Operator-side signature check on the token message.
    TokenVerify,
    /// Validator-side signature check on the confirmation.
    ConfirmVerify,
    /// Validator-side decryption of the confirmation.
    ConfirmOpen,
    /// Final equality assertion between the recovered and the issued token.
    TokenAssert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("handshake aborted at {step:?}")]
pub struct HandshakeAbort {
    pub step: HandshakeStep,
}

/// One of the three messages exchanged on the wire; an interceptor may
/// rewrite any of them in flight.
#[derive(Debug, Clone)]
pub enum HandshakeMessage {
    Request {
        encreq: crypto::SealedEnvelope,
        signature: Signature,
    },
    Token {
        enctoken: crypto::SealedEnvelope,
        tokensig: Signature,
    },
    Confirm {
        enctokendo: crypto::SealedEnvelope,
        sigtokendo: Signature,
    },
}

/// Entropy consumed by one handshake run, expanded from a single seed so
/// deterministic callers can derive it from their seeded stream.
#[derive(Debug, Clone, Copy)]
pub struct HandshakeEntropy {
    pub encreq: [u8; 32],
    pub tokentx: [u8; 32],
    pub enctoken: [u8; 32],
    pub enctokendo: [u8; 32],
}

impl HandshakeEntropy {
    pub fn derive(seed: [u8; 32]) -> Self {
        let expand = |label: &[u8]| *digest(&[label, &seed].concat()).as_bytes();
        HandshakeEntropy {
            encreq: expand(b"hs-encreq"),
            tokentx: expand(b"hs-tokentx"),
            enctoken: expand(b"hs-enctoken"),
            enctokendo: expand(b"hs-enctokendo"),
        }
    }
}

fn concat_certreq(csr: &[u8], drone_name: &str) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + csr.len() + drone_name.len());
    buf.extend_from_slice(&(csr.len() as u32).to_be_bytes());
    buf.extend_from_slice(csr);
    buf.extend_from_slice(drone_name.as_bytes());
    buf
}

/// Runs the honest six-message handshake between an operator and a
/// validator. Both parties know each other's public keys beforehand.
pub fn run_handshake(
    operator: &KeyPair,
    validator: &KeyPair,
    csr: &[u8],
    drone_name: &str,
    entropy: HandshakeEntropy,
) -> Result<HandshakeRecord, HandshakeAbort> {
    run_handshake_intercepted(operator, validator, csr, drone_name, entropy, |m| m)
}

/// Handshake run with an interceptor sitting on the wire: every message
/// passes through `tamper` before delivery, modeling an active attacker.
pub fn run_handshake_intercepted(
    operator: &KeyPair,
    validator: &KeyPair,
    csr: &[u8],
    drone_name: &str,
    entropy: HandshakeEntropy,
    mut tamper: impl FnMut(HandshakeMessage) -> HandshakeMessage,
) -> Result<HandshakeRecord, HandshakeAbort> {
    let abort = |step| HandshakeAbort { step };

    // Operator: build and sign the encrypted certificate request.
    let certreq = concat_certreq(csr, drone_name);
    let encreq = crypto::seal(&validator.public, &certreq, entropy.encreq);
    let signature = crypto::sign(&operator.secret, &encreq.to_bytes());
    let HandshakeMessage::Request { encreq, signature } =
        tamper(HandshakeMessage::Request { encreq, signature })
    else {
        unreachable!("interceptor must preserve the message position");
    };

    // Validator: verify, decrypt, and answer with a fresh sealed token.
    if !crypto::verify(&operator.public, &encreq.to_bytes(), &signature) {
        return Err(abort(HandshakeStep::RequestVerify));
    }
    crypto::open(&validator.secret, &encreq).map_err(|_| abort(HandshakeStep::RequestOpen))?;
    let tokentx = entropy.tokentx.to_vec();
    let mut token = validator.public.to_bytes().to_vec();
    token.extend_from_slice(&tokentx);
    let enctoken = crypto::seal(&operator.public, &token, entropy.enctoken);
    let tokensig = crypto::sign(&validator.secret, &enctoken.to_bytes());
    let issued_enctoken = enctoken.clone();
    let HandshakeMessage::Token { enctoken, tokensig } =
        tamper(HandshakeMessage::Token { enctoken, tokensig })
    else {
        unreachable!("interceptor must preserve the message position");
    };

    // Operator: verify the token message and echo it back sealed and signed.
    if !crypto::verify(&validator.public, &enctoken.to_bytes(), &tokensig) {
        return Err(abort(HandshakeStep::TokenVerify));
    }
    let enctokendo = crypto::seal(&validator.public, &enctoken.to_bytes(), entropy.enctokendo);
    let sigtokendo = crypto::sign(&operator.secret, &enctokendo.to_bytes());
    let HandshakeMessage::Confirm {
        enctokendo,
        sigtokendo,
    } = tamper(HandshakeMessage::Confirm {
        enctokendo,
        sigtokendo,
    })
    else {
        unreachable!("interceptor must preserve the message position");
    };

    // Validator: verify, recover the echoed token, and assert it matches the
    // one it issued in this run.
    if !crypto::verify(&operator.public, &enctokendo.to_bytes(), &sigtokendo) {
        return Err(abort(HandshakeStep::ConfirmVerify));
    }
    let initialtoken = crypto::open(&validator.secret, &enctokendo)
        .map_err(|_| abort(HandshakeStep::ConfirmOpen))?;
    if initialtoken != issued_enctoken.to_bytes() {
        return Err(abort(HandshakeStep::TokenAssert));
    }

    Ok(HandshakeRecord {
        certreq,
        encreq,
        signature,
        tokentx,
        token,
        enctoken: issued_enctoken,
        tokensig,
        enctokendo,
        sigtokendo,
        initialtoken,
    })
}

/// Voter-side recheck of a completed handshake record: the three signatures
/// and the final token equality. Decryption steps are vouched for by the
/// recorded plaintexts.
pub fn verify_handshake_record(
    record: &HandshakeRecord,
    operator: &PublicKey,
    validator: &PublicKey,
) -> Result<(), HandshakeAbort> {
    let abort = |step| HandshakeAbort { step };
    if !crypto::verify(operator, &record.encreq.to_bytes(), &record.signature) {
        return Err(abort(HandshakeStep::RequestVerify));
    }
    if !crypto::verify(validator, &record.enctoken.to_bytes(), &record.tokensig) {
        return Err(abort(HandshakeStep::TokenVerify));
    }
    if !crypto::verify(operator, &record.enctokendo.to_bytes(), &record.sigtokendo) {
        return Err(abort(HandshakeStep::ConfirmVerify));
    }
    if record.initialtoken != record.enctoken.to_bytes() {
        return Err(abort(HandshakeStep::TokenAssert));
    }
    Ok(())
}
