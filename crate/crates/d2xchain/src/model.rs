//! Shared domain types: certificate request transactions, ledger blocks, and
//! challenge transcripts.
//!
//! Two encodings exist side by side and must not be confused:
//!
//! * **Canonical bytes** — the deterministic, injective encoding that is
//!   hashed and signed. Fields appear in a fixed order, each prefixed with a
//!   4-byte big-endian length, so no two distinct values share an encoding.
//! * **JSON** — the human-readable form used for fixtures, traces, and ledger
//!   files, with binary fields hex-encoded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Digest, KeyPair, PublicKey, SealedEnvelope, Signature};

/// Logical simulation time. Certificate expiry is expressed in ticks and
/// compared against the current tick; no wall-clock dates exist anywhere.
pub type Tick = u64;

/// Maximum length of a drone service name.
pub const MAX_DRONE_NAME_LEN: usize = 253;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("drone name must not be empty")]
    EmptyDroneName,
    #[error("drone name exceeds {MAX_DRONE_NAME_LEN} characters")]
    DroneNameTooLong,
}

// ---------------------------------------------------------------------------
// Canonical encoding
// ---------------------------------------------------------------------------

/// Append one length-prefixed field.
fn put_field(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    buf.extend_from_slice(bytes);
}

fn put_u64(buf: &mut Vec<u8>, value: u64) {
    put_field(buf, &value.to_be_bytes());
}

// ---------------------------------------------------------------------------
// Transactions
// ---------------------------------------------------------------------------

/// Certificate request type. Exactly two variants exist; certificate renewal
/// is expressed as a fresh `Initial` after revocation or expiry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrtType {
    Initial,
    Revoke,
}

impl CrtType {
    fn tag(self) -> u8 {
        match self {
            CrtType::Initial => 0,
            CrtType::Revoke => 1,
        }
    }
}

/// Unique service identifier. Non-empty, at most [`MAX_DRONE_NAME_LEN`]
/// characters; validated on construction and on deserialization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DroneName(String);

impl DroneName {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyDroneName);
        }
        if name.chars().count() > MAX_DRONE_NAME_LEN {
            return Err(ModelError::DroneNameTooLong);
        }
        Ok(DroneName(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DroneName {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        DroneName::new(value)
    }
}

impl From<DroneName> for String {
    fn from(value: DroneName) -> String {
        value.0
    }
}

impl std::fmt::Display for DroneName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A certificate request transaction: the unit entering the pending pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub crt_type: CrtType,
    pub drone_name: DroneName,
    pub operator_pubkey: PublicKey,
    pub operator_signature: Signature,
    pub expiry: Tick,
    pub csr_digest: Digest,
}

impl Transaction {
    /// Bytes covered by the operator signature: everything but the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(128);
        put_field(&mut buf, &[self.crt_type.tag()]);
        put_field(&mut buf, self.drone_name.as_str().as_bytes());
        put_field(&mut buf, &self.operator_pubkey.to_bytes());
        put_u64(&mut buf, self.expiry);
        put_field(&mut buf, self.csr_digest.as_bytes());
        buf
    }

    /// Canonical encoding of the full transaction, signature included.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = self.signing_bytes();
        put_field(&mut buf, self.operator_signature.as_bytes());
        buf
    }

    /// True iff the operator signature verifies over the signing bytes.
    pub fn verify_signature(&self) -> bool {
        crypto::verify(
            &self.operator_pubkey,
            &self.signing_bytes(),
            &self.operator_signature,
        )
    }
}

/// Builds a transaction with a freshly computed operator signature.
pub fn make_transaction(
    crt_type: CrtType,
    drone_name: &str,
    operator: &KeyPair,
    expiry: Tick,
    csr_digest: Digest,
) -> Result<Transaction, ModelError> {
    let drone_name = DroneName::new(drone_name)?;
    let mut tx = Transaction {
        crt_type,
        drone_name,
        operator_pubkey: operator.public,
        operator_signature: Signature::from_bytes([0u8; 64]),
        expiry,
        csr_digest,
    };
    tx.operator_signature = crypto::sign(&operator.secret, &tx.signing_bytes());
    Ok(tx)
}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// Block header: position and the two hash-pointer chains. `global_prev`
/// links every block in ledger order; `service_prev` links the blocks of one
/// drone service (absent for the drone's first block).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub serial_number: u64,
    pub crt_type: CrtType,
    pub global_prev: Digest,
    pub service_prev: Option<Digest>,
}

impl BlockHeader {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(96);
        put_u64(&mut buf, self.serial_number);
        put_field(&mut buf, &[self.crt_type.tag()]);
        put_field(&mut buf, self.global_prev.as_bytes());
        match &self.service_prev {
            None => put_field(&mut buf, &[0]),
            Some(d) => {
                let mut tagged = Vec::with_capacity(33);
                tagged.push(1);
                tagged.extend_from_slice(d.as_bytes());
                put_field(&mut buf, &tagged);
            }
        }
        buf
    }
}

/// Block body: the committed transaction's fields, copied verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockBody {
    pub drone_name: DroneName,
    pub operator_pubkey: PublicKey,
    pub operator_signature: Signature,
    pub expiry: Tick,
    pub csr_digest: Digest,
}

impl BlockBody {
    pub fn from_transaction(tx: &Transaction) -> Self {
        BlockBody {
            drone_name: tx.drone_name.clone(),
            operator_pubkey: tx.operator_pubkey,
            operator_signature: tx.operator_signature,
            expiry: tx.expiry,
            csr_digest: tx.csr_digest,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(192);
        put_field(&mut buf, self.drone_name.as_str().as_bytes());
        put_field(&mut buf, &self.operator_pubkey.to_bytes());
        put_field(&mut buf, self.operator_signature.as_bytes());
        put_u64(&mut buf, self.expiry);
        put_field(&mut buf, self.csr_digest.as_bytes());
        buf
    }
}

/// One validator's approval of a block: its identity plus a signature over
/// the block's content digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approval {
    pub validator: PublicKey,
    pub signature: Signature,
}

/// Block footer: the multi-signature set. Approvals are kept sorted by
/// validator key and each validator appears at most once.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockFooter {
    pub approvals: Vec<Approval>,
}

impl BlockFooter {
    /// Builds a footer from approvals, sorting by validator key.
    pub fn new(mut approvals: Vec<Approval>) -> Self {
        approvals.sort_by(|a, b| a.validator.cmp(&b.validator));
        BlockFooter { approvals }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(8 + self.approvals.len() * 144);
        put_u64(&mut buf, self.approvals.len() as u64);
        for approval in &self.approvals {
            put_field(&mut buf, &approval.validator.to_bytes());
            put_field(&mut buf, approval.signature.as_bytes());
        }
        buf
    }
}

/// A committed ledger block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub body: BlockBody,
    pub footer: BlockFooter,
}

impl Block {
    /// Digest of header plus body: the message every footer approval signs.
    pub fn content_digest(&self) -> Digest {
        content_digest(&self.header, &self.body)
    }

    /// Digest of the whole block (footer included): the value hash pointers
    /// reference.
    pub fn block_digest(&self) -> Digest {
        crypto::digest(&self.canonical_bytes())
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(512);
        put_field(&mut buf, &self.header.canonical_bytes());
        put_field(&mut buf, &self.body.canonical_bytes());
        put_field(&mut buf, &self.footer.canonical_bytes());
        buf
    }

    /// Reconstructs the transaction this block committed.
    pub fn transaction(&self) -> Transaction {
        Transaction {
            crt_type: self.header.crt_type,
            drone_name: self.body.drone_name.clone(),
            operator_pubkey: self.body.operator_pubkey,
            operator_signature: self.body.operator_signature,
            expiry: self.body.expiry,
            csr_digest: self.body.csr_digest,
        }
    }
}

/// Digest of a (header, body) pair before footer assembly; votes sign this.
pub fn content_digest(header: &BlockHeader, body: &BlockBody) -> Digest {
    let mut buf = Vec::with_capacity(320);
    put_field(&mut buf, &header.canonical_bytes());
    put_field(&mut buf, &body.canonical_bytes());
    crypto::digest(&buf)
}

// ---------------------------------------------------------------------------
// Challenge transcripts
// ---------------------------------------------------------------------------

/// Which challenge protocol produced a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptKind {
    Registration,
    Revocation,
    Handshake,
}

/// Evidence gathered during a challenge. Registration transcripts carry
/// `t0`/`phi0`, revocation transcripts `t1`/`phi1`, handshake transcripts a
/// full [`HandshakeRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeTranscript {
    pub kind: TranscriptKind,
    /// Validator-signed registration token (signature over the token digest).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t0: Option<Signature>,
    /// Operator countersignature over `t0`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi0: Option<Signature>,
    /// Revocation token digest binding the previous and current transactions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t1: Option<Digest>,
    /// Operator signature over `t1`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi1: Option<Signature>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub handshake: Option<HandshakeRecord>,
}

impl ChallengeTranscript {
    pub fn registration(t0: Signature, phi0: Option<Signature>) -> Self {
        ChallengeTranscript {
            kind: TranscriptKind::Registration,
            t0: Some(t0),
            phi0,
            t1: None,
            phi1: None,
            handshake: None,
        }
    }

    pub fn revocation(t1: Digest, phi1: Option<Signature>) -> Self {
        ChallengeTranscript {
            kind: TranscriptKind::Revocation,
            t0: None,
            phi0: None,
            t1: Some(t1),
            phi1,
            handshake: None,
        }
    }

    pub fn handshake(record: HandshakeRecord) -> Self {
        ChallengeTranscript {
            kind: TranscriptKind::Handshake,
            t0: None,
            phi0: None,
            t1: None,
            phi1: None,
            handshake: Some(record),
        }
    }

    /// Marker transcript for a challenge that never produced evidence.
    pub fn empty(kind: TranscriptKind) -> Self {
        ChallengeTranscript {
            kind,
            t0: None,
            phi0: None,
            t1: None,
            phi1: None,
            handshake: None,
        }
    }
}

/// Full record of one encrypt-sign handshake run between a drone operator
/// and a service validator. Field names follow the protocol's message names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeRecord {
    /// Certificate request: CSR bytes concatenated with the drone name.
    #[serde(with = "crate::crypto::hex_bytes")]
    pub certreq: Vec<u8>,
    /// `certreq` sealed to the validator.
    pub encreq: SealedEnvelope,
    /// Operator signature over `encreq`.
    pub signature: Signature,
    /// Fresh token material generated by the validator.
    #[serde(with = "crate::crypto::hex_bytes")]
    pub tokentx: Vec<u8>,
    /// Validator key concatenated with `tokentx`.
    #[serde(with = "crate::crypto::hex_bytes")]
    pub token: Vec<u8>,
    /// `token` sealed to the operator.
    pub enctoken: SealedEnvelope,
    /// Validator signature over `enctoken`.
    pub tokensig: Signature,
    /// `enctoken` bytes sealed back to the validator by the operator.
    pub enctokendo: SealedEnvelope,
    /// Operator signature over `enctokendo`.
    pub sigtokendo: Signature,
    /// What the validator recovered from `enctokendo`; must equal the bytes
    /// of `enctoken` for the run to pass its final assertion.
    #[serde(with = "crate::crypto::hex_bytes")]
    pub initialtoken: Vec<u8>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::digest;
    use proptest::prelude::*;

    pub(crate) fn keypair(tag: u8) -> KeyPair {
        KeyPair::from_seed([tag; 32])
    }

    fn sample_tx(tag: u8) -> Transaction {
        make_transaction(
            CrtType::Initial,
            &format!("drone-{tag:03}"),
            &keypair(tag),
            1000,
            digest(&[tag]),
        )
        .unwrap()
    }

    #[test]
    fn make_transaction_signs_correctly() {
        let tx = sample_tx(1);
        assert!(tx.verify_signature());
    }

    #[test]
    fn empty_drone_name_rejected() {
        let err = make_transaction(CrtType::Initial, "", &keypair(1), 10, digest(b"csr"));
        assert_eq!(err.unwrap_err(), ModelError::EmptyDroneName);
        let long = "x".repeat(MAX_DRONE_NAME_LEN + 1);
        let err = make_transaction(CrtType::Initial, &long, &keypair(1), 10, digest(b"csr"));
        assert_eq!(err.unwrap_err(), ModelError::DroneNameTooLong);
    }

    #[test]
    fn tampered_expiry_breaks_signature() {
        let mut tx = sample_tx(2);
        tx.expiry += 1;
        assert!(!tx.verify_signature());
    }

    #[test]
    fn canonical_bytes_deterministic_and_field_sensitive() {
        let tx = sample_tx(3);
        assert_eq!(tx.canonical_bytes(), tx.canonical_bytes());

        let mut other = tx.clone();
        other.expiry += 1;
        assert_ne!(tx.canonical_bytes(), other.canonical_bytes());

        let mut renamed = tx.clone();
        renamed.drone_name = DroneName::new("drone-elsewhere").unwrap();
        assert_ne!(tx.canonical_bytes(), renamed.canonical_bytes());
    }

    #[test]
    fn header_option_encoding_is_injective() {
        let base = BlockHeader {
            serial_number: 1,
            crt_type: CrtType::Initial,
            global_prev: digest(b"prev"),
            service_prev: None,
        };
        let with_service = BlockHeader {
            service_prev: Some(Digest::ZERO),
            ..base.clone()
        };
        assert_ne!(base.canonical_bytes(), with_service.canonical_bytes());
    }

    #[test]
    fn footer_sorts_approvals() {
        let a = keypair(10);
        let b = keypair(11);
        let sig = crate::crypto::sign(&a.secret, b"m");
        let footer = BlockFooter::new(vec![
            Approval { validator: b.public, signature: sig },
            Approval { validator: a.public, signature: sig },
        ]);
        assert!(footer.approvals[0].validator < footer.approvals[1].validator);
    }

    #[test]
    fn deserializing_empty_drone_name_fails() {
        let err = serde_json::from_str::<DroneName>("\"\"");
        assert!(err.is_err());
    }

    prop_compose! {
        fn arb_block()(
            seed in any::<u8>(),
            serial in 0u64..1_000_000,
            revoke in any::<bool>(),
            expiry in any::<u64>(),
            approvers in prop::collection::vec(any::<u8>(), 1..5),
            name_len in 1usize..24,
        ) -> Block {
            let op = KeyPair::from_seed([seed; 32]);
            let name: String = (0..name_len).map(|i| char::from(b'a' + ((seed as usize + i) % 26) as u8)).collect();
            let crt_type = if revoke { CrtType::Revoke } else { CrtType::Initial };
            let tx = make_transaction(crt_type, &name, &op, expiry, digest(&[seed])).unwrap();
            let header = BlockHeader {
                serial_number: serial,
                crt_type,
                global_prev: digest(&serial.to_be_bytes()),
                service_prev: if serial % 2 == 0 { None } else { Some(digest(b"svc")) },
            };
            let body = BlockBody::from_transaction(&tx);
            let cd = content_digest(&header, &body);
            let approvals = approvers.iter().map(|tag| {
                let v = KeyPair::from_seed([*tag; 32]);
                Approval { validator: v.public, signature: crate::crypto::sign(&v.secret, cd.as_bytes()) }
            }).collect();
            Block { header, body, footer: BlockFooter::new(approvals) }
        }
    }

    proptest! {
        #[test]
        fn block_json_round_trip(block in arb_block()) {
            let json = serde_json::to_string(&block).unwrap();
            let back: Block = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &block);
            prop_assert_eq!(back.canonical_bytes(), block.canonical_bytes());
        }

        #[test]
        fn distinct_blocks_encode_distinctly(a in arb_block(), b in arb_block()) {
            if a != b {
                prop_assert_ne!(a.canonical_bytes(), b.canonical_bytes());
            }
        }
    }
}
