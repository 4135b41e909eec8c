//! Self-tallying.
//!
//! Anyone holding the ledger, the payload store and the reconstructed escrow
//! secret computes the same report. A ballot entry is counted iff, checked in
//! this order:
//!
//! 1. it decodes structurally;
//! 2. its ring has at least `min_ring_size` members, all on the roster;
//! 3. the ring signature verifies over `SA ∥ R`;
//! 4. its key image has not been seen on an earlier *accepted* ballot;
//! 5. the stealth pair opens to one of the candidates.
//!
//! The first failing check is the recorded reason. Steps 1–3 and 5 are pure
//! per ballot and run on a worker pool; step 4 runs afterwards in ledger order.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{sha256, BallotPayload, BulletinBoard, Digest, PayloadStore, Phase};
use crate::escrow::EscrowError;
use crate::group::{self, GroupPoint, Scalar};
use crate::ring;
use crate::stealth::{self, SignedBallot};
use crate::wire::WireError;

pub const REPORT_FORMAT: &str = "ringvote-tally-report/v1";
const FINGERPRINT_TAG: &[u8] = b"ringvote/escrow-fingerprint/v1";

#[derive(Debug, Error)]
pub enum TallyError {
    #[error("tally requires the Tally phase; ledger is in {0:?}")]
    WrongPhase(Phase),
    #[error("no election config on the ledger")]
    NoConfig,
    #[error("escrow reveals incomplete: missing {0:?}")]
    RevealsIncomplete(Vec<String>),
    #[error("escrow secret does not match the election public key on the ledger")]
    SecretMismatch,
    #[error(transparent)]
    Escrow(#[from] EscrowError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Undecodable,
    RingTooSmall,
    RingNotInRoster,
    BadSignature,
    DuplicateKeyImage,
    NoCandidateMatch,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Undecodable => "undecodable",
            RejectReason::RingTooSmall => "ring-too-small",
            RejectReason::RingNotInRoster => "ring-not-in-roster",
            RejectReason::BadSignature => "bad-signature",
            RejectReason::DuplicateKeyImage => "duplicate-key-image",
            RejectReason::NoCandidateMatch => "no-candidate-match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCount {
    pub candidate: String,
    pub votes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedBallot {
    pub entry_index: u64,
    pub candidate: String,
    pub key_image: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedBallot {
    pub entry_index: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyReport {
    pub format: String,
    pub election_id: String,
    pub ledger_head: String,
    pub ledger_entries: u64,
    pub min_ring_size: usize,
    pub escrow_secret_fingerprint: String,
    /// Candidate order as listed in the election config.
    pub counts: Vec<CandidateCount>,
    pub accepted: Vec<AcceptedBallot>,
    pub rejected: Vec<RejectedBallot>,
}

impl TallyReport {
    /// Canonical pretty-printed JSON, newline-terminated.
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn count_of(&self, candidate: &str) -> Option<u64> {
        self.counts.iter().find(|c| c.candidate == candidate).map(|c| c.votes)
    }

    pub fn total_votes(&self) -> u64 {
        self.counts.iter().map(|c| c.votes).sum()
    }
}

pub fn secret_fingerprint(secret: &Scalar) -> Digest {
    let mut buf = FINGERPRINT_TAG.to_vec();
    buf.extend_from_slice(secret.as_bytes());
    sha256(&buf)
}

#[derive(Debug, Clone, Copy)]
pub struct TallyOptions {
    /// Worker lanes for the per-ballot checks; `1` runs inline.
    pub workers: usize,
}

impl Default for TallyOptions {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

enum Verdict {
    Reject(RejectReason),
    Valid {
        key_image: GroupPoint,
        candidate: Option<usize>,
    },
}

struct Context<'a> {
    store: &'a PayloadStore,
    roster: &'a [GroupPoint],
    candidates: &'a [GroupPoint],
    min_ring_size: usize,
    secret: &'a Scalar,
}

fn evaluate(ctx: &Context<'_>, payload: &Result<BallotPayload, WireError>) -> Verdict {
    use RejectReason::*;
    let Ok(payload) = payload else {
        return Verdict::Reject(Undecodable);
    };
    let Some(bytes) = payload.fetch(ctx.store) else {
        return Verdict::Reject(Undecodable);
    };
    let Ok(sb) = SignedBallot::from_bytes(bytes) else {
        return Verdict::Reject(Undecodable);
    };
    if sb.ring.len() < ctx.min_ring_size {
        return Verdict::Reject(RingTooSmall);
    }
    let Ok(ring) = sb.ring.resolve(ctx.roster) else {
        return Verdict::Reject(RingNotInRoster);
    };
    match ring::verify(&sb.ballot.to_bytes(), &ring, &sb.signature) {
        Ok(true) => {}
        _ => return Verdict::Reject(BadSignature),
    }
    Verdict::Valid {
        key_image: sb.signature.key_image,
        candidate: stealth::match_ballot(&sb.ballot, ctx.secret, ctx.candidates),
    }
}

/// Tallies with an externally supplied escrow secret.
pub fn tally(
    board: &BulletinBoard,
    store: &PayloadStore,
    escrow_secret: &Scalar,
    options: TallyOptions,
) -> Result<TallyReport, TallyError> {
    if board.phase() != Phase::Tally {
        return Err(TallyError::WrongPhase(board.phase()));
    }
    let config = board.config().ok_or(TallyError::NoConfig)?;
    let escrow = board.escrow().ok_or(TallyError::NoConfig)?;
    let missing = escrow.missing_reveals();
    if !missing.is_empty() {
        return Err(TallyError::RevealsIncomplete(missing));
    }
    if board.election_pubkey() != Some(group::mul_base(escrow_secret)) {
        return Err(TallyError::SecretMismatch);
    }

    let candidates = config.candidate_points();
    let ctx = Context {
        store,
        roster: &config.roster,
        candidates: &candidates,
        min_ring_size: config.min_ring_size,
        secret: escrow_secret,
    };
    let payloads: Vec<(u64, Result<BallotPayload, WireError>)> = board.ballot_payloads().collect();

    let verdicts: Vec<Verdict> = if options.workers <= 1 {
        payloads.iter().map(|(_, p)| evaluate(&ctx, p)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| TallyError::Pool(e.to_string()))?;
        pool.install(|| payloads.par_iter().map(|(_, p)| evaluate(&ctx, p)).collect())
    };

    let mut votes = vec![0u64; candidates.len()];
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_images = HashSet::new();
    for ((entry_index, _), verdict) in payloads.iter().zip(verdicts) {
        let entry_index = *entry_index;
        let reason = match verdict {
            Verdict::Reject(reason) => reason,
            Verdict::Valid { key_image, candidate } => {
                let image = group::encode_point(&key_image);
                if seen_images.contains(&image) {
                    RejectReason::DuplicateKeyImage
                } else if let Some(j) = candidate {
                    seen_images.insert(image);
                    votes[j] += 1;
                    accepted.push(AcceptedBallot {
                        entry_index,
                        candidate: config.candidates[j].clone(),
                        key_image: hex::encode(image),
                    });
                    continue;
                } else {
                    RejectReason::NoCandidateMatch
                }
            }
        };
        rejected.push(RejectedBallot { entry_index, reason });
    }

    Ok(TallyReport {
        format: REPORT_FORMAT.to_owned(),
        election_id: config.election_id.clone(),
        ledger_head: hex::encode(board.head_hash()),
        ledger_entries: board.len() as u64,
        min_ring_size: config.min_ring_size,
        escrow_secret_fingerprint: hex::encode(secret_fingerprint(escrow_secret)),
        counts: config
            .candidates
            .iter()
            .zip(votes)
            .map(|(c, v)| CandidateCount {
                candidate: c.clone(),
                votes: v,
            })
            .collect(),
        accepted,
        rejected,
    })
}

/// Tallies using the secret reconstructed from the reveals on the ledger.
pub fn tally_from_reveals(
    board: &BulletinBoard,
    store: &PayloadStore,
    options: TallyOptions,
) -> Result<TallyReport, TallyError> {
    let escrow = board.escrow().ok_or(TallyError::NoConfig)?;
    let missing = escrow.missing_reveals();
    if !missing.is_empty() {
        return Err(TallyError::RevealsIncomplete(missing));
    }
    let secret = escrow.combine_secret()?;
    tally(board, store, &secret, options)
}

/// Recomputes the tally and compares canonical report text.
pub fn verify_report(
    board: &BulletinBoard,
    store: &PayloadStore,
    escrow_secret: &Scalar,
    report: &TallyReport,
) -> bool {
    match tally(board, store, escrow_secret, TallyOptions::default()) {
        Ok(fresh) => fresh.to_text() == report.to_text(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reason_names_match_report_encoding() {
        use RejectReason::*;
        for r in [
            Undecodable,
            RingTooSmall,
            RingNotInRoster,
            BadSignature,
            DuplicateKeyImage,
            NoCandidateMatch,
        ] {
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
        }
    }

    #[test]
    fn report_text_round_trips() {
        let report = TallyReport {
            format: REPORT_FORMAT.into(),
            election_id: "e".into(),
            ledger_head: "00".into(),
            ledger_entries: 12,
            min_ring_size: 2,
            escrow_secret_fingerprint: hex::encode(secret_fingerprint(&Scalar::ONE)),
            counts: vec![
                CandidateCount {
                    candidate: "a".into(),
                    votes: 2,
                },
                CandidateCount {
                    candidate: "b".into(),
                    votes: 1,
                },
            ],
            accepted: vec![],
            rejected: vec![RejectedBallot {
                entry_index: 11,
                reason: RejectReason::BadSignature,
            }],
        };
        let text = report.to_text();
        assert!(text.ends_with("}\n"));
        assert_eq!(TallyReport::from_text(&text).unwrap(), report);
        assert_eq!(report.count_of("b"), Some(1));
        assert_eq!(report.count_of("c"), None);
        assert_eq!(report.total_votes(), 3);
    }

    #[test]
    fn fingerprint_depends_on_secret() {
        assert_ne!(
            secret_fingerprint(&Scalar::ONE),
            secret_fingerprint(&Scalar::from(2u64))
        );
    }
}
