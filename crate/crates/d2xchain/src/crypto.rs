//! Cryptographic primitives used across the protocol: content digests,
//! signing key pairs, detached signatures, and public-key sealed envelopes.
//!
//! The protocol only relies on the abstract properties of these operations
//! (determinism of the digest, unforgeability of signatures, confidentiality
//! of sealed envelopes), so the concrete schemes are an implementation choice:
//! SHA-256 digests, Ed25519 signatures, and X25519 + ChaCha20-Poly1305 sealed
//! boxes. Every operation here is pure; key generation and sealing take their
//! entropy explicitly so simulations stay reproducible.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Length in bytes of a [`Digest`].
pub const DIGEST_LEN: usize = 32;
/// Length in bytes of a serialized [`PublicKey`] (signing half + sealing half).
pub const PUBLIC_KEY_LEN: usize = 64;
/// Length in bytes of a [`Signature`].
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    /// Envelope could not be opened with the supplied secret key.
    #[error("decryption failure: envelope does not open under this key")]
    DecryptionFailure,
    #[error("malformed key material: {0}")]
    MalformedKey(String),
    #[error("malformed hex string: {0}")]
    MalformedHex(String),
}

// ---------------------------------------------------------------------------
// Digest
// ---------------------------------------------------------------------------

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    /// The all-zero digest, used as the predecessor pointer of the first block.
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|e| CryptoError::MalformedHex(e.to_string()))?;
        let bytes: [u8; DIGEST_LEN] = raw
            .try_into()
            .map_err(|_| CryptoError::MalformedHex("digest must be 32 bytes".into()))?;
        Ok(Digest(bytes))
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..8])
    }
}

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Computes the SHA-256 digest of a byte sequence.
pub fn digest(message: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(message);
    Digest(hasher.finalize().into())
}

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

/// Public identity of a party: an Ed25519 verifying key plus an X25519
/// sealing key. The serialized form doubles as the party identifier
/// everywhere in the protocol.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey {
    sign: [u8; 32],
    seal: [u8; 32],
}

impl PublicKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out[..32].copy_from_slice(&self.sign);
        out[32..].copy_from_slice(&self.seal);
        out
    }

    pub fn from_bytes(bytes: &[u8; PUBLIC_KEY_LEN]) -> Self {
        let mut sign = [0u8; 32];
        let mut seal = [0u8; 32];
        sign.copy_from_slice(&bytes[..32]);
        seal.copy_from_slice(&bytes[32..]);
        PublicKey { sign, seal }
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|e| CryptoError::MalformedHex(e.to_string()))?;
        let bytes: [u8; PUBLIC_KEY_LEN] = raw
            .try_into()
            .map_err(|_| CryptoError::MalformedHex("public key must be 64 bytes".into()))?;
        Ok(PublicKey::from_bytes(&bytes))
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({}..)", &hex::encode(self.sign)[..8])
    }
}

impl std::fmt::Display for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Secret half of a key pair.
#[derive(Clone)]
pub struct SecretKey {
    sign: ed25519_dalek::SigningKey,
    seal: x25519_dalek::StaticSecret,
}

/// A signing/sealing key pair. The public half identifies the party.
#[derive(Clone)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl KeyPair {
    /// Derives a key pair deterministically from a 32-byte seed. Independent
    /// sub-seeds for the signing and sealing halves are expanded via SHA-256.
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let sign_seed = digest(&[b"keypair-sign".as_slice(), &seed].concat());
        let seal_seed = digest(&[b"keypair-seal".as_slice(), &seed].concat());
        let sign = ed25519_dalek::SigningKey::from_bytes(sign_seed.as_bytes());
        let seal = x25519_dalek::StaticSecret::from(*seal_seed.as_bytes());
        let public = PublicKey {
            sign: sign.verifying_key().to_bytes(),
            seal: x25519_dalek::PublicKey::from(&seal).to_bytes(),
        };
        KeyPair {
            secret: SecretKey { sign, seal },
            public,
        }
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyPair({:?})", self.public)
    }
}

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

/// A detached Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> Self {
        Signature(bytes)
    }

    /// Parses a signature from a byte slice; `None` if the length is wrong.
    pub fn try_from_slice(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; SIGNATURE_LEN] = bytes.try_into().ok()?;
        Some(Signature(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|e| CryptoError::MalformedHex(e.to_string()))?;
        let bytes: [u8; SIGNATURE_LEN] = raw
            .try_into()
            .map_err(|_| CryptoError::MalformedHex("signature must be 64 bytes".into()))?;
        Ok(Signature(bytes))
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({}..)", &self.to_hex()[..8])
    }
}

/// Signs a message. Ed25519 signing is deterministic: the same key and
/// message always produce the same signature, which the token protocol
/// relies on.
pub fn sign(secret: &SecretKey, message: &[u8]) -> Signature {
    Signature(secret.sign.sign(message).to_bytes())
}

/// Returns true iff `sig` was produced over `message` by the secret key
/// paired with `public`. Malformed keys or signatures verify as false.
pub fn verify(public: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&public.sign) else {
        return false;
    };
    let signature = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(message, &signature).is_ok()
}

// ---------------------------------------------------------------------------
// Sealed envelopes
// ---------------------------------------------------------------------------

/// Ciphertext addressed to one recipient. Built as an ephemeral-static
/// X25519 exchange feeding a ChaCha20-Poly1305 AEAD; only the recipient's
/// secret key opens it, and any tampering fails authentication.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedEnvelope {
    pub recipient: PublicKey,
    #[serde(with = "hex_array_32")]
    ephemeral: [u8; 32],
    #[serde(with = "hex_bytes")]
    ciphertext: Vec<u8>,
}

impl SealedEnvelope {
    /// Stable byte form of the whole envelope, used when an envelope is
    /// itself signed or compared.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PUBLIC_KEY_LEN + 32 + self.ciphertext.len());
        out.extend_from_slice(&self.recipient.to_bytes());
        out.extend_from_slice(&self.ephemeral);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    /// Returns a copy with one ciphertext byte flipped (test/adversary hook).
    pub fn tampered(&self) -> SealedEnvelope {
        let mut out = self.clone();
        if let Some(byte) = out.ciphertext.first_mut() {
            *byte ^= 0x01;
        }
        out
    }
}

impl std::fmt::Debug for SealedEnvelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SealedEnvelope(to {:?}, {} bytes)",
            self.recipient,
            self.ciphertext.len()
        )
    }
}

fn seal_key_nonce(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &PublicKey) -> ([u8; 32], [u8; 12]) {
    let key = digest(
        &[
            b"envelope-key".as_slice(),
            shared,
            ephemeral,
            &recipient.to_bytes(),
        ]
        .concat(),
    );
    let nonce_full = digest(&[b"envelope-nonce".as_slice(), ephemeral, &recipient.to_bytes()].concat());
    let mut nonce = [0u8; 12];
    nonce.copy_from_slice(&nonce_full.as_bytes()[..12]);
    (*key.as_bytes(), nonce)
}

/// Seals `plaintext` to `recipient`. `entropy` seeds the ephemeral key; pass
/// fresh random bytes (a deterministic caller such as the simulator draws
/// them from its seeded stream).
pub fn seal(recipient: &PublicKey, plaintext: &[u8], entropy: [u8; 32]) -> SealedEnvelope {
    let eph_secret = x25519_dalek::StaticSecret::from(entropy);
    let ephemeral = x25519_dalek::PublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret
        .diffie_hellman(&x25519_dalek::PublicKey::from(recipient.seal))
        .to_bytes();
    let (key, nonce) = seal_key_nonce(&shared, &ephemeral, recipient);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AEAD encryption is infallible for in-memory buffers");
    SealedEnvelope {
        recipient: *recipient,
        ephemeral,
        ciphertext,
    }
}

/// Opens an envelope with the recipient's secret key. Fails with
/// [`CryptoError::DecryptionFailure`] under any other key or after tampering.
pub fn open(secret: &SecretKey, env: &SealedEnvelope) -> Result<Vec<u8>, CryptoError> {
    let shared = secret
        .seal
        .diffie_hellman(&x25519_dalek::PublicKey::from(env.ephemeral))
        .to_bytes();
    let (key, nonce) = seal_key_nonce(&shared, &env.ephemeral, &env.recipient);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key));
    cipher
        .decrypt(Nonce::from_slice(&nonce), env.ciphertext.as_slice())
        .map_err(|_| CryptoError::DecryptionFailure)
}

// ---------------------------------------------------------------------------
// Serde helpers (hex-encoded binary fields)
// ---------------------------------------------------------------------------

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                <$ty>::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_serde!(Digest);
hex_serde!(PublicKey);
hex_serde!(Signature);

/// Serde adapter: `Vec<u8>` as a lowercase hex string.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

mod hex_array_32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(deserializer)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        raw.try_into()
            .map_err(|_| serde::de::Error::custom("expected 32 hex-encoded bytes"))
    }
}
