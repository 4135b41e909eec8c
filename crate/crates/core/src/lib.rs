//! Decentralized self-tallying anonymous voting.
//!
//! Voters sign stealth-address ballots with one-time linkable ring signatures
//! and post them to an append-only bulletin board. The election key is held
//! in escrow by several managers as a product of their secrets; once every
//! manager reveals, anyone holding the ledger can tally the result.
//!
//! Modules, bottom-up:
//!
//! - [`group`]: Ed25519 prime-order group, `hash_to_scalar`, `hash_to_point`,
//!   candidate encoding.
//! - [`ring`]: one-time ring signatures and key images.
//! - [`stealth`]: ballot construction, matching, signed-ballot wire format.
//! - [`escrow`]: multiparty key escrow with Schnorr proofs and deposits.
//! - [`board`]: the hash-chained ledger, phase machine and payload store.
//! - [`tally`]: self-tallying with an audit trail.
//! - [`bench`]: timing and storage-cost measurements.

pub mod bench;
pub mod board;
pub mod escrow;
pub mod group;
pub mod ring;
pub mod stealth;
pub mod tally;
pub mod wire;

pub use board::{BulletinBoard, ElectionConfig, EntryType, LedgerEntry, PayloadMode, PayloadStore, Phase};
pub use group::{GroupPoint, KeyPair, Scalar};
pub use ring::{Ring, RingSignature};
pub use stealth::{Ballot, SignedBallot};
pub use tally::{TallyOptions, TallyReport};
