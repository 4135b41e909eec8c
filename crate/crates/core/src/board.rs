//! Simulated public bulletin board.
//!
//! A single-writer, append-only, hash-chained log of typed entries. Every
//! append is validated against the election phase machine
//! (Setup → Voting → Tally) and the derived election state, so replaying the
//! entries from genesis on any replica rebuilds the same state.
//!
//! Ballot entries are accepted without any signature check; validity is
//! decided at tally time. Ballot payloads are stored in one of three modes:
//! inline on the ledger, in a side transaction table with the ledger holding
//! the transaction id, or in a content-addressed store with the ledger holding
//! the content digest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::escrow::{EscrowError, EscrowState, EscrowStatus, ManagerCommitment};
use crate::group::{self, GroupPoint, Scalar};
use crate::stealth::SignedBallot;
use crate::wire::{len_u32, Reader, WireError, Writer};

pub type Digest = [u8; 32];

pub const DIGEST_LEN: usize = 32;

/// Fixed per-entry bytes: index, prev hash, type, two length prefixes, entry hash.
pub const ENTRY_FRAMING: usize = 8 + DIGEST_LEN + 1 + 4 + 4 + DIGEST_LEN;

pub fn sha256(data: &[u8]) -> Digest {
    Sha256::digest(data).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryType {
    ElectionConfig,
    RosterAdd,
    EscrowCommit,
    EscrowProduct,
    Ballot,
    EscrowReveal,
    PhaseTransition,
}

impl EntryType {
    fn code(self) -> u8 {
        match self {
            EntryType::ElectionConfig => 0,
            EntryType::RosterAdd => 1,
            EntryType::EscrowCommit => 2,
            EntryType::EscrowProduct => 3,
            EntryType::Ballot => 4,
            EntryType::EscrowReveal => 5,
            EntryType::PhaseTransition => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Setup,
    Voting,
    Tally,
}

impl Phase {
    fn code(self) -> u8 {
        match self {
            Phase::Setup => 0,
            Phase::Voting => 1,
            Phase::Tally => 2,
        }
    }

    pub fn successor(self) -> Option<Self> {
        match self {
            Phase::Setup => Some(Phase::Voting),
            Phase::Voting => Some(Phase::Tally),
            Phase::Tally => None,
        }
    }

    fn admits(self, ty: EntryType) -> bool {
        use EntryType::*;
        match self {
            Phase::Setup => matches!(
                ty,
                ElectionConfig | RosterAdd | EscrowCommit | EscrowProduct | PhaseTransition
            ),
            Phase::Voting => matches!(ty, Ballot | PhaseTransition),
            Phase::Tally => matches!(ty, EscrowReveal | PhaseTransition),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadMode {
    Inline,
    TxPointer,
    CasPointer,
}

impl PayloadMode {
    pub const ALL: [PayloadMode; 3] = [PayloadMode::Inline, PayloadMode::TxPointer, PayloadMode::CasPointer];

    fn code(self) -> u8 {
        match self {
            PayloadMode::Inline => 0,
            PayloadMode::TxPointer => 1,
            PayloadMode::CasPointer => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(PayloadMode::Inline),
            1 => Some(PayloadMode::TxPointer),
            2 => Some(PayloadMode::CasPointer),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PayloadMode::Inline => "inline",
            PayloadMode::TxPointer => "tx-pointer",
            PayloadMode::CasPointer => "cas-pointer",
        }
    }
}

impl fmt::Display for PayloadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayloadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PayloadMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown payload mode {s:?} (expected inline, tx-pointer or cas-pointer)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub index: u64,
    pub prev_hash: Digest,
    pub entry_type: EntryType,
    pub payload: Vec<u8>,
    pub submitter: String,
    pub entry_hash: Digest,
}

impl LedgerEntry {
    pub fn compute_hash(
        index: u64,
        prev_hash: &Digest,
        entry_type: EntryType,
        payload: &[u8],
        submitter: &str,
    ) -> Digest {
        let mut w = Writer::new();
        w.u64(index)
            .raw(prev_hash)
            .u8(entry_type.code())
            .bytes(payload)
            .str(submitter);
        sha256(&w.finish())
    }

    fn sealed(index: u64, prev_hash: Digest, entry_type: EntryType, payload: Vec<u8>, submitter: String) -> Self {
        let entry_hash = Self::compute_hash(index, &prev_hash, entry_type, &payload, &submitter);
        Self {
            index,
            prev_hash,
            entry_type,
            payload,
            submitter,
            entry_hash,
        }
    }

    pub fn hash_is_valid(&self) -> bool {
        self.entry_hash
            == Self::compute_hash(
                self.index,
                &self.prev_hash,
                self.entry_type,
                &self.payload,
                &self.submitter,
            )
    }

    /// Bytes this entry occupies on the ledger.
    pub fn on_ledger_bytes(&self) -> usize {
        ENTRY_FRAMING + self.payload.len() + self.submitter.len()
    }
}

#[derive(Serialize, Deserialize)]
struct LedgerRecord {
    index: u64,
    prev_hash: String,
    entry_type: EntryType,
    payload: String,
    submitter: String,
    entry_hash: String,
}

impl From<&LedgerEntry> for LedgerRecord {
    fn from(e: &LedgerEntry) -> Self {
        Self {
            index: e.index,
            prev_hash: hex::encode(e.prev_hash),
            entry_type: e.entry_type,
            payload: hex::encode(&e.payload),
            submitter: e.submitter.clone(),
            entry_hash: hex::encode(e.entry_hash),
        }
    }
}

impl TryFrom<LedgerRecord> for LedgerEntry {
    type Error = String;

    fn try_from(r: LedgerRecord) -> Result<Self, Self::Error> {
        let digest = |s: &str| -> Result<Digest, String> {
            hex::decode(s)
                .map_err(|e| e.to_string())?
                .try_into()
                .map_err(|_| "digest must be 32 bytes".to_owned())
        };
        Ok(Self {
            index: r.index,
            prev_hash: digest(&r.prev_hash)?,
            entry_type: r.entry_type,
            payload: hex::decode(&r.payload).map_err(|e| e.to_string())?,
            submitter: r.submitter,
            entry_hash: digest(&r.entry_hash)?,
        })
    }
}

impl LedgerEntry {
    /// One JSON object per line; binary fields are lowercase hex.
    pub fn to_line(&self) -> String {
        serde_json::to_string(&LedgerRecord::from(self)).expect("ledger record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let record: LedgerRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        record.try_into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainFault {
    #[error("index out of sequence")]
    Index,
    #[error("prev_hash does not match the previous entry")]
    Link,
    #[error("entry hash does not match contents")]
    Hash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("hash chain broken at entry {index}: {fault}")]
pub struct ChainError {
    pub index: u64,
    pub fault: ChainFault,
}

pub const GENESIS_PREV_HASH: Digest = [0u8; DIGEST_LEN];

/// Checks indices, links and entry hashes from genesis onward.
pub fn validate_chain(entries: &[LedgerEntry]) -> Result<(), ChainError> {
    let mut prev = GENESIS_PREV_HASH;
    for (i, e) in entries.iter().enumerate() {
        let index = i as u64;
        let fail = |fault| Err(ChainError { index, fault });
        if e.index != index {
            return fail(ChainFault::Index);
        }
        if e.prev_hash != prev {
            return fail(ChainFault::Link);
        }
        if !e.hash_is_valid() {
            return fail(ChainFault::Hash);
        }
        prev = e.entry_hash;
    }
    Ok(())
}

/// Entry-index bounds: once the next index would exceed a phase's bound, that
/// phase admits nothing but the transition out of it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDeadlines {
    pub setup_end: Option<u64>,
    pub voting_end: Option<u64>,
    pub reveal_end: Option<u64>,
}

impl PhaseDeadlines {
    fn bound(&self, phase: Phase) -> Option<u64> {
        match phase {
            Phase::Setup => self.setup_end,
            Phase::Voting => self.voting_end,
            Phase::Tally => self.reveal_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("election id must be nonempty")]
    EmptyElectionId,
    #[error("at least one candidate is required")]
    NoCandidates,
    #[error("candidate names must be nonempty")]
    EmptyCandidateName,
    #[error("candidate {0:?} listed twice")]
    DuplicateCandidate(String),
    #[error("at least one voter is required")]
    EmptyRoster,
    #[error("roster key {0} listed twice")]
    DuplicateRosterKey(usize),
    #[error("at least one key manager is required")]
    NoManagers,
    #[error("manager {0:?} listed twice")]
    DuplicateManager(String),
    #[error("manager ids must be nonempty")]
    EmptyManagerId,
    #[error("min_ring_size {min} must lie in 1..={roster}")]
    MinRingSize { min: usize, roster: usize },
}

pub const DEFAULT_MIN_RING_SIZE: usize = 2;
pub const DEFAULT_DEPOSIT: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionConfig {
    pub election_id: String,
    pub candidates: Vec<String>,
    pub roster: Vec<GroupPoint>,
    pub managers: Vec<String>,
    pub min_ring_size: usize,
    pub payload_mode: PayloadMode,
    pub deadlines: PhaseDeadlines,
    pub deposit_amount: u64,
}

impl ElectionConfig {
    pub fn new(
        election_id: impl Into<String>,
        candidates: Vec<String>,
        roster: Vec<GroupPoint>,
        managers: Vec<String>,
    ) -> Self {
        Self {
            election_id: election_id.into(),
            candidates,
            roster,
            managers,
            min_ring_size: DEFAULT_MIN_RING_SIZE,
            payload_mode: PayloadMode::CasPointer,
            deadlines: PhaseDeadlines::default(),
            deposit_amount: DEFAULT_DEPOSIT,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_header(self.roster.len())?;
        let mut seen = HashSet::new();
        for (i, k) in self.roster.iter().enumerate() {
            if !seen.insert(group::encode_point(k)) {
                return Err(ConfigError::DuplicateRosterKey(i));
            }
        }
        Ok(())
    }

    fn validate_header(&self, roster_size: usize) -> Result<(), ConfigError> {
        if self.election_id.is_empty() {
            return Err(ConfigError::EmptyElectionId);
        }
        if self.candidates.is_empty() {
            return Err(ConfigError::NoCandidates);
        }
        let mut names = HashSet::new();
        for c in &self.candidates {
            if c.is_empty() {
                return Err(ConfigError::EmptyCandidateName);
            }
            if !names.insert(c) {
                return Err(ConfigError::DuplicateCandidate(c.clone()));
            }
        }
        if roster_size == 0 {
            return Err(ConfigError::EmptyRoster);
        }
        if self.managers.is_empty() {
            return Err(ConfigError::NoManagers);
        }
        let mut ids = HashSet::new();
        for m in &self.managers {
            if m.is_empty() {
                return Err(ConfigError::EmptyManagerId);
            }
            if !ids.insert(m) {
                return Err(ConfigError::DuplicateManager(m.clone()));
            }
        }
        if self.min_ring_size == 0 || self.min_ring_size > roster_size {
            return Err(ConfigError::MinRingSize {
                min: self.min_ring_size,
                roster: roster_size,
            });
        }
        Ok(())
    }

    pub fn candidate_points(&self) -> Vec<GroupPoint> {
        self.candidates
            .iter()
            .map(|c| group::encode_candidate(c).expect("validated candidate names are nonempty"))
            .collect()
    }

    /// The config entry payload. The roster travels separately as one
    /// roster-add entry per key; only its size is fixed here.
    pub fn to_payload(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.election_id);
        w.u32(len_u32(self.candidates.len()));
        for c in &self.candidates {
            w.str(c);
        }
        w.u32(len_u32(self.managers.len()));
        for m in &self.managers {
            w.str(m);
        }
        w.u32(len_u32(self.roster.len()))
            .u32(len_u32(self.min_ring_size))
            .u8(self.payload_mode.code());
        for d in [
            self.deadlines.setup_end,
            self.deadlines.voting_end,
            self.deadlines.reveal_end,
        ] {
            match d {
                Some(v) => w.u8(1).u64(v),
                None => w.u8(0),
            };
        }
        w.u64(self.deposit_amount);
        w.finish()
    }

    /// Returns the config with an empty roster plus the declared roster size.
    fn from_payload(bytes: &[u8]) -> Result<(Self, usize), WireError> {
        let mut r = Reader::new(bytes);
        let election_id = r.string()?;
        let n = r.count(4)?;
        let candidates = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
        let n = r.count(4)?;
        let managers = (0..n).map(|_| r.string()).collect::<Result<_, _>>()?;
        let roster_size = r.u32()? as usize;
        let min_ring_size = r.u32()? as usize;
        let payload_mode = PayloadMode::from_code(r.u8()?).ok_or(WireError::Invalid("unknown payload mode"))?;
        let mut bounds = [None; 3];
        for b in &mut bounds {
            *b = match r.u8()? {
                0 => None,
                1 => Some(r.u64()?),
                t => return Err(WireError::UnknownTag(t)),
            };
        }
        let deposit_amount = r.u64()?;
        r.finish()?;
        Ok((
            Self {
                election_id,
                candidates,
                roster: Vec::new(),
                managers,
                min_ring_size,
                payload_mode,
                deadlines: PhaseDeadlines {
                    setup_end: bounds[0],
                    voting_end: bounds[1],
                    reveal_end: bounds[2],
                },
                deposit_amount,
            },
            roster_size,
        ))
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("stored object {0} does not hash to its key")]
    Corrupt(String),
    #[error("invalid object file name {0:?}")]
    BadName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Off-ledger payload storage: a content-addressed object store and the side
/// table of plain transactions. Both are keyed by SHA-256 of the content.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PayloadStore {
    cas: BTreeMap<Digest, Vec<u8>>,
    transactions: BTreeMap<Digest, Vec<u8>>,
}

impl PayloadStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_cas(&mut self, bytes: Vec<u8>) -> Digest {
        let d = sha256(&bytes);
        self.cas.insert(d, bytes);
        d
    }

    /// Returns the object only if it still hashes to `digest`.
    pub fn get_cas(&self, digest: &Digest) -> Option<&[u8]> {
        self.cas.get(digest).filter(|b| sha256(b) == *digest).map(Vec::as_slice)
    }

    pub fn put_tx(&mut self, bytes: Vec<u8>) -> Digest {
        let id = sha256(&bytes);
        self.transactions.insert(id, bytes);
        id
    }

    pub fn get_tx(&self, id: &Digest) -> Option<&[u8]> {
        self.transactions
            .get(id)
            .filter(|b| sha256(b) == *id)
            .map(Vec::as_slice)
    }

    pub fn cas_len(&self) -> usize {
        self.cas.len()
    }

    pub fn tx_len(&self) -> usize {
        self.transactions.len()
    }

    /// Test hook: overwrite a stored object without rehashing.
    #[doc(hidden)]
    pub fn corrupt_cas(&mut self, digest: &Digest, bytes: Vec<u8>) {
        self.cas.insert(*digest, bytes);
    }

    /// Writes `cas/<hex digest>` and `tx/<hex id>` files under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        for (sub, map) in [("cas", &self.cas), ("tx", &self.transactions)] {
            let d = dir.join(sub);
            fs::create_dir_all(&d)?;
            for (k, v) in map {
                let p = d.join(hex::encode(k));
                if !p.exists() {
                    fs::write(p, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for (sub, map) in [("cas", &mut store.cas), ("tx", &mut store.transactions)] {
            let d = dir.join(sub);
            if !d.exists() {
                continue;
            }
            for f in fs::read_dir(&d)? {
                let f = f?;
                let name = f.file_name().to_string_lossy().into_owned();
                let key: Digest = hex::decode(&name)
                    .ok()
                    .and_then(|v| v.try_into().ok())
                    .ok_or_else(|| StoreError::BadName(name.clone()))?;
                let bytes = fs::read(f.path())?;
                if sha256(&bytes) != key {
                    return Err(StoreError::Corrupt(name));
                }
                map.insert(key, bytes);
            }
        }
        Ok(store)
    }
}

#[derive(Debug, Error)]
pub enum BoardError {
    #[error("{entry_type:?} entries are not accepted during the {phase:?} phase")]
    WrongPhase { phase: Phase, entry_type: EntryType },
    #[error("the {0:?} phase deadline has passed")]
    DeadlinePassed(Phase),
    #[error("election is already in its final phase")]
    AlreadyFinal,
    #[error("malformed {entry_type:?} payload: {source}")]
    Malformed {
        entry_type: EntryType,
        #[source]
        source: WireError,
    },
    #[error("election config must be the first entry after genesis")]
    ConfigPlacement,
    #[error("no election config on the ledger")]
    NoConfig,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("roster already holds the declared {0} keys")]
    RosterFull(usize),
    #[error("roster has {have} of {want} keys")]
    RosterIncomplete { have: usize, want: usize },
    #[error("roster key already registered")]
    DuplicateRosterKey,
    #[error(transparent)]
    Escrow(#[from] EscrowError),
    #[error("submitter id must be nonempty")]
    EmptySubmitter,
    #[error("phase transition must name phase {expected:?}")]
    BadTransition { expected: Phase },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("first entry must be the genesis transition into Setup")]
    BadGenesis,
    #[error("ledger line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("replaying entry {index}: {source}")]
    Replay {
        index: u64,
        #[source]
        source: Box<BoardError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a ballot entry keeps its signed-ballot bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BallotPayload {
    Inline(Vec<u8>),
    TxPointer(Digest),
    CasPointer(Digest),
}

impl BallotPayload {
    pub fn mode(&self) -> PayloadMode {
        match self {
            BallotPayload::Inline(_) => PayloadMode::Inline,
            BallotPayload::TxPointer(_) => PayloadMode::TxPointer,
            BallotPayload::CasPointer(_) => PayloadMode::CasPointer,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.mode().code()];
        match self {
            BallotPayload::Inline(b) => out.extend_from_slice(b),
            BallotPayload::TxPointer(d) | BallotPayload::CasPointer(d) => out.extend_from_slice(d),
        }
        out
    }

    /// Checks framing only: a known mode tag and, for pointers, a digest.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let (&tag, body) = bytes.split_first().ok_or(WireError::Truncated { needed: 1 })?;
        let digest = || -> Result<Digest, WireError> {
            body.try_into()
                .map_err(|_| WireError::Invalid("pointer payload must be a 32-byte digest"))
        };
        match PayloadMode::from_code(tag) {
            Some(PayloadMode::Inline) if body.is_empty() => Err(WireError::Invalid("empty inline ballot")),
            Some(PayloadMode::Inline) => Ok(BallotPayload::Inline(body.to_vec())),
            Some(PayloadMode::TxPointer) => Ok(BallotPayload::TxPointer(digest()?)),
            Some(PayloadMode::CasPointer) => Ok(BallotPayload::CasPointer(digest()?)),
            None => Err(WireError::UnknownTag(tag)),
        }
    }

    /// Fetches the signed-ballot bytes, from the ledger itself or the store.
    pub fn fetch<'a>(&'a self, store: &'a PayloadStore) -> Option<&'a [u8]> {
        match self {
            BallotPayload::Inline(b) => Some(b),
            BallotPayload::TxPointer(d) => store.get_tx(d),
            BallotPayload::CasPointer(d) => store.get_cas(d),
        }
    }
}

/// One row of the per-ballot storage cost report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub mode: PayloadMode,
    pub ring_size: usize,
    pub ballots: usize,
    pub on_ledger_bytes: f64,
    pub tx_table_bytes: f64,
    pub cas_bytes: f64,
}

/// Default price of a side-table byte relative to a ledger byte.
pub const DEFAULT_TX_BYTE_FACTOR: f64 = 0.1;

impl CostRow {
    /// Ledger bytes plus side-table bytes priced at `tx_factor` each.
    /// Content-addressed bytes live off chain and cost nothing.
    pub fn weighted_cost(&self, tx_factor: f64) -> f64 {
        self.on_ledger_bytes + tx_factor * self.tx_table_bytes
    }
}

#[derive(Debug, Clone)]
pub struct BulletinBoard {
    entries: Vec<LedgerEntry>,
    phase: Phase,
    config: Option<ElectionConfig>,
    roster_size: usize,
    roster_index: HashSet<[u8; 32]>,
    escrow: Option<EscrowState>,
    ballot_indices: Vec<u64>,
}

pub const GENESIS_SUBMITTER: &str = "genesis";

impl Default for BulletinBoard {
    fn default() -> Self {
        Self::new()
    }
}

impl BulletinBoard {
    /// A ledger holding only the genesis transition into Setup.
    pub fn new() -> Self {
        let genesis = LedgerEntry::sealed(
            0,
            GENESIS_PREV_HASH,
            EntryType::PhaseTransition,
            vec![Phase::Setup.code()],
            GENESIS_SUBMITTER.to_owned(),
        );
        Self {
            entries: vec![genesis],
            phase: Phase::Setup,
            config: None,
            roster_size: 0,
            roster_index: HashSet::new(),
            escrow: None,
            ballot_indices: Vec::new(),
        }
    }

    /// Genesis, the config entry and one roster-add entry per voter key.
    pub fn open(config: &ElectionConfig, submitter: &str) -> Result<Self, BoardError> {
        config.validate()?;
        let mut board = Self::new();
        board.append(EntryType::ElectionConfig, config.to_payload(), submitter)?;
        for key in &config.roster {
            board.append(EntryType::RosterAdd, group::encode_point(key).to_vec(), submitter)?;
        }
        Ok(board)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> Option<&ElectionConfig> {
        self.config.as_ref()
    }

    pub fn roster(&self) -> &[GroupPoint] {
        self.config.as_ref().map(|c| c.roster.as_slice()).unwrap_or(&[])
    }

    pub fn escrow(&self) -> Option<&EscrowState> {
        self.escrow.as_ref()
    }

    pub fn election_pubkey(&self) -> Option<GroupPoint> {
        self.escrow.as_ref().and_then(EscrowState::election_pubkey)
    }

    pub fn ballot_indices(&self) -> &[u64] {
        &self.ballot_indices
    }

    pub fn head_hash(&self) -> Digest {
        self.entries.last().expect("genesis always present").entry_hash
    }

    /// Escrow status, treating a passed reveal deadline as a default.
    pub fn escrow_status(&self) -> Option<EscrowStatus> {
        let escrow = self.escrow.as_ref()?;
        let status = escrow.status();
        match status {
            EscrowStatus::AwaitingReveals { missing } if self.deadline_passed(Phase::Tally) => {
                Some(EscrowStatus::Defaulted { missing })
            }
            other => Some(other),
        }
    }

    fn deadline_passed(&self, phase: Phase) -> bool {
        let next = self.entries.len() as u64;
        self.config
            .as_ref()
            .and_then(|c| c.deadlines.bound(phase))
            .is_some_and(|b| next > b)
    }

    /// Validates and appends one entry. Nothing is mutated on error.
    pub fn append(
        &mut self,
        entry_type: EntryType,
        payload: Vec<u8>,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        if submitter.is_empty() {
            return Err(BoardError::EmptySubmitter);
        }
        if !self.phase.admits(entry_type) {
            return Err(BoardError::WrongPhase {
                phase: self.phase,
                entry_type,
            });
        }
        if entry_type != EntryType::PhaseTransition && self.deadline_passed(self.phase) {
            return Err(BoardError::DeadlinePassed(self.phase));
        }
        let index = self.entries.len() as u64;
        self.apply(entry_type, &payload)?;

        let entry = LedgerEntry::sealed(index, self.head_hash(), entry_type, payload, submitter.to_owned());
        if entry_type == EntryType::Ballot {
            self.ballot_indices.push(index);
        }
        self.entries.push(entry);
        Ok(self.entries.last().unwrap())
    }

    /// Validates `payload` against the current state and applies it. Each arm
    /// checks everything before its first mutation.
    fn apply(&mut self, entry_type: EntryType, payload: &[u8]) -> Result<(), BoardError> {
        let malformed = |source| BoardError::Malformed { entry_type, source };
        match entry_type {
            EntryType::ElectionConfig => {
                if self.config.is_some() || self.entries.len() != 1 {
                    return Err(BoardError::ConfigPlacement);
                }
                let (config, roster_size) = ElectionConfig::from_payload(payload).map_err(malformed)?;
                config.validate_header(roster_size)?;
                self.escrow = Some(EscrowState::new(
                    config.election_id.clone(),
                    config.managers.clone(),
                    config.deposit_amount,
                ));
                self.roster_size = roster_size;
                self.config = Some(config);
            }
            EntryType::RosterAdd => {
                let roster_size = self.roster_size;
                let config = self.config.as_mut().ok_or(BoardError::NoConfig)?;
                let key = group::decode_point(payload).map_err(|_| malformed(WireError::InvalidPoint))?;
                if config.roster.len() >= roster_size {
                    return Err(BoardError::RosterFull(roster_size));
                }
                if !self.roster_index.insert(group::encode_point(&key)) {
                    return Err(BoardError::DuplicateRosterKey);
                }
                config.roster.push(key);
            }
            EntryType::EscrowCommit => {
                let escrow = self.escrow.as_mut().ok_or(BoardError::NoConfig)?;
                let mut r = Reader::new(payload);
                let commitment = ManagerCommitment::read(&mut r).map_err(malformed)?;
                r.finish().map_err(malformed)?;
                escrow.add_commitment(commitment)?;
            }
            EntryType::EscrowProduct => {
                let escrow = self.escrow.as_mut().ok_or(BoardError::NoConfig)?;
                let mut r = Reader::new(payload);
                let id = r.string().map_err(malformed)?;
                let product = r.point().map_err(malformed)?;
                r.finish().map_err(malformed)?;
                escrow.add_product(&id, product)?;
            }
            EntryType::Ballot => {
                BallotPayload::from_bytes(payload).map_err(malformed)?;
            }
            EntryType::EscrowReveal => {
                let escrow = self.escrow.as_mut().ok_or(BoardError::NoConfig)?;
                let mut r = Reader::new(payload);
                let id = r.string().map_err(malformed)?;
                let secret = r.scalar().map_err(malformed)?;
                r.finish().map_err(malformed)?;
                escrow.reveal_share(&id, secret)?;
            }
            EntryType::PhaseTransition => {
                let next = self.phase.successor().ok_or(BoardError::AlreadyFinal)?;
                if payload != [next.code()] {
                    return Err(BoardError::BadTransition { expected: next });
                }
                if next == Phase::Voting {
                    let config = self.config.as_ref().ok_or(BoardError::NoConfig)?;
                    if config.roster.len() != self.roster_size {
                        return Err(BoardError::RosterIncomplete {
                            have: config.roster.len(),
                            want: self.roster_size,
                        });
                    }
                    self.escrow
                        .as_mut()
                        .expect("escrow exists with config")
                        .close_commitments()?;
                }
                self.phase = next;
            }
        }
        Ok(())
    }

    pub fn advance_phase(&mut self, authority: &str) -> Result<&LedgerEntry, BoardError> {
        let next = self.phase.successor().ok_or(BoardError::AlreadyFinal)?;
        self.append(EntryType::PhaseTransition, vec![next.code()], authority)
    }

    pub fn commit_manager(
        &mut self,
        commitment: &ManagerCommitment,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        let mut w = Writer::new();
        commitment.write(&mut w);
        self.append(EntryType::EscrowCommit, w.finish(), submitter)
    }

    pub fn publish_product(
        &mut self,
        manager_id: &str,
        product: &GroupPoint,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        let mut w = Writer::new();
        w.str(manager_id).point(product);
        self.append(EntryType::EscrowProduct, w.finish(), submitter)
    }

    pub fn reveal(&mut self, manager_id: &str, secret: &Scalar, submitter: &str) -> Result<&LedgerEntry, BoardError> {
        let mut w = Writer::new();
        w.str(manager_id).scalar(secret);
        self.append(EntryType::EscrowReveal, w.finish(), submitter)
    }

    /// Posts a signed ballot using the election's payload mode. No
    /// cryptographic check happens here; the tally sorts out invalid ballots.
    pub fn submit_ballot(
        &mut self,
        store: &mut PayloadStore,
        ballot: &SignedBallot,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        let mode = self.config.as_ref().ok_or(BoardError::NoConfig)?.payload_mode;
        self.submit_ballot_as(store, ballot, mode, submitter)
    }

    pub fn submit_ballot_as(
        &mut self,
        store: &mut PayloadStore,
        ballot: &SignedBallot,
        mode: PayloadMode,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        self.submit_ballot_bytes(store, &ballot.to_bytes(), mode, submitter)
    }

    /// Posts raw signed-ballot bytes after a structural decode.
    pub fn submit_ballot_bytes(
        &mut self,
        store: &mut PayloadStore,
        bytes: &[u8],
        mode: PayloadMode,
        submitter: &str,
    ) -> Result<&LedgerEntry, BoardError> {
        if self.phase != Phase::Voting {
            return Err(BoardError::WrongPhase {
                phase: self.phase,
                entry_type: EntryType::Ballot,
            });
        }
        SignedBallot::from_bytes(bytes).map_err(|source| BoardError::Malformed {
            entry_type: EntryType::Ballot,
            source,
        })?;
        // Validate the append before touching the store so a rejected ballot
        // leaves no orphaned object behind.
        let payload = match mode {
            PayloadMode::Inline => BallotPayload::Inline(bytes.to_vec()),
            PayloadMode::TxPointer => BallotPayload::TxPointer(sha256(bytes)),
            PayloadMode::CasPointer => BallotPayload::CasPointer(sha256(bytes)),
        };
        let entry_index = self.entries.len();
        self.append(EntryType::Ballot, payload.to_bytes(), submitter)?;
        match mode {
            PayloadMode::Inline => {}
            PayloadMode::TxPointer => {
                store.put_tx(bytes.to_vec());
            }
            PayloadMode::CasPointer => {
                store.put_cas(bytes.to_vec());
            }
        }
        Ok(&self.entries[entry_index])
    }

    /// `(entry index, payload)` for every ballot entry in ledger order.
    pub fn ballot_payloads(&self) -> impl Iterator<Item = (u64, Result<BallotPayload, WireError>)> + '_ {
        self.ballot_indices.iter().map(move |&i| {
            let e = &self.entries[i as usize];
            (i, BallotPayload::from_bytes(&e.payload))
        })
    }

    /// Mean storage per ballot grouped by payload mode and ring size. Ballots
    /// whose bytes cannot be fetched or decoded are left out.
    pub fn ledger_bytes_per_ballot(&self, store: &PayloadStore) -> Vec<CostRow> {
        #[derive(Default)]
        struct Acc {
            n: usize,
            ledger: usize,
            tx: usize,
            cas: usize,
        }
        let mut groups: BTreeMap<(PayloadMode, usize), Acc> = BTreeMap::new();
        for (index, payload) in self.ballot_payloads() {
            let Ok(payload) = payload else { continue };
            let Some(bytes) = payload.fetch(store) else { continue };
            let Ok(sb) = SignedBallot::from_bytes(bytes) else {
                continue;
            };
            let acc = groups.entry((payload.mode(), sb.ring.len())).or_default();
            acc.n += 1;
            acc.ledger += self.entries[index as usize].on_ledger_bytes();
            match payload.mode() {
                PayloadMode::Inline => {}
                PayloadMode::TxPointer => acc.tx += bytes.len(),
                PayloadMode::CasPointer => acc.cas += bytes.len(),
            }
        }
        groups
            .into_iter()
            .map(|((mode, ring_size), a)| CostRow {
                mode,
                ring_size,
                ballots: a.n,
                on_ledger_bytes: a.ledger as f64 / a.n as f64,
                tx_table_bytes: a.tx as f64 / a.n as f64,
                cas_bytes: a.cas as f64 / a.n as f64,
            })
            .collect()
    }

    /// Rebuilds a board from an entry stream, re-validating the hash chain and
    /// every state transition.
    pub fn replay(entries: &[LedgerEntry]) -> Result<Self, BoardError> {
        validate_chain(entries)?;
        let mut board = Self::new();
        match entries.first() {
            Some(g) if *g == board.entries[0] => {}
            _ => return Err(BoardError::BadGenesis),
        }
        for e in &entries[1..] {
            board
                .append(e.entry_type, e.payload.clone(), &e.submitter)
                .map_err(|source| BoardError::Replay {
                    index: e.index,
                    source: Box::new(source),
                })?;
            debug_assert_eq!(board.head_hash(), e.entry_hash);
        }
        Ok(board)
    }

    /// Digest over the derived election state and the chain head. Two
    /// replicas that agree on this agree on everything.
    pub fn state_digest(&self) -> Digest {
        let mut w = Writer::new();
        w.u8(self.phase.code())
            .raw(&self.head_hash())
            .u64(self.entries.len() as u64);
        match &self.config {
            Some(c) => {
                w.u8(1).bytes(&c.to_payload());
                for k in &c.roster {
                    w.point(k);
                }
            }
            None => {
                w.u8(0);
            }
        }
        match &self.escrow {
            Some(e) => w.u8(1).bytes(&e.to_bytes()),
            None => w.u8(0),
        };
        w.u32(len_u32(self.ballot_indices.len()));
        for i in &self.ballot_indices {
            w.u64(*i);
        }
        sha256(&w.finish())
    }

    pub fn save(&self, path: &Path) -> Result<(), BoardError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            for e in &self.entries {
                writeln!(f, "{}", e.to_line())?;
            }
            f.flush()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn read_entries(path: &Path) -> Result<Vec<LedgerEntry>, BoardError> {
        let f = BufReader::new(fs::File::open(path)?);
        let mut entries = Vec::new();
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(LedgerEntry::from_line(&line).map_err(|message| BoardError::Parse { line: i + 1, message })?);
        }
        Ok(entries)
    }

    pub fn load(path: &Path) -> Result<Self, BoardError> {
        Self::replay(&Self::read_entries(path)?)
    }
}
