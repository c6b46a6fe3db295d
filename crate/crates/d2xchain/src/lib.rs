//! Decentralized PKI for drone services: certificate registration,
//! validation, revocation, and verification over a quorum of service
//! validators, backed by a dual hash-pointer ledger.
//!
//! The crate is organized around the protocol's moving parts:
//!
//! - [`crypto`] — digests, signatures, sealed envelopes.
//! - [`model`] — transactions, blocks, challenge transcripts.
//! - [`ledger`] — the append-only block store and pending pool.
//! - [`registry`] — the simulated token-hosting service (DNS stand-in).
//! - [`validator`] — sanity checks, token challenges, the encrypt-sign
//!   handshake, and transcript verification.
//! - [`consensus`] — proposer rotation, votes, the >50% commit rule,
//!   rewards, admission, and eviction.
//! - [`plugin`] — the client-side verification array.
//! - [`simnet`] — a deterministic discrete-event simulator wiring all of the
//!   above together, with adversary scenario injectors.
//! - [`bench`] — the performance harness sweeping node and transaction
//!   counts.

pub mod bench;
#[cfg(test)]
pub(crate) mod testutil;
pub mod consensus;
pub mod crypto;
pub mod ledger;
pub mod model;
pub mod plugin;
pub mod registry;
pub mod simnet;
pub mod validator;
