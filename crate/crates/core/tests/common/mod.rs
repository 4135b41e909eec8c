//! Election harness shared by the integration and acceptance targets.
//!
//! The harness keeps every voter's plaintext choice and the kind of each
//! submitted ballot, so expected tallies come from bookkeeping rather than
//! from the cryptography under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};
use ringvote::board::{EntryType, PayloadMode, PayloadStore};
use ringvote::group::{self, GroupPoint, KeyPair, Scalar};
use ringvote::ring::Ring;
use ringvote::stealth::{self, RingRef, SignedBallot};
use ringvote::{escrow, BulletinBoard, ElectionConfig};

pub struct Election {
    pub config: ElectionConfig,
    pub voters: Vec<KeyPair>,
    pub manager_secrets: Vec<Scalar>,
    pub board: BulletinBoard,
    pub store: PayloadStore,
    pub candidate_points: Vec<GroupPoint>,
    pub submitter_counter: u64,
}

pub fn candidate_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("candidate-{i}")).collect()
}

/// Builds an election through Setup and opens Voting.
pub fn setup<R: RngCore + CryptoRng>(
    rng: &mut R,
    voters: usize,
    candidates: usize,
    managers: usize,
    min_ring_size: usize,
    mode: PayloadMode,
) -> Election {
    let voter_keys: Vec<KeyPair> = (0..voters).map(|_| KeyPair::generate(rng)).collect();
    let manager_ids: Vec<String> = (0..managers).map(|i| format!("manager-{i}")).collect();
    let mut config = ElectionConfig::new(
        "test-election",
        candidate_names(candidates),
        voter_keys.iter().map(|k| *k.public()).collect(),
        manager_ids.clone(),
    );
    config.min_ring_size = min_ring_size;
    config.payload_mode = mode;
    let mut board = BulletinBoard::open(&config, "admin").unwrap();

    let mut head = group::basepoint();
    let mut manager_secrets = Vec::new();
    for id in &manager_ids {
        let s = group::random_nonzero_scalar(rng);
        board
            .commit_manager(&escrow::commit_share(&config.election_id, id, &s).unwrap(), id)
            .unwrap();
        head = escrow::extend_product(&head, &s);
        board.publish_product(id, &head, id).unwrap();
        manager_secrets.push(s);
    }
    board.advance_phase("admin").unwrap();
    let candidate_points = config.candidate_points();
    Election {
        config,
        voters: voter_keys,
        manager_secrets,
        board,
        store: PayloadStore::new(),
        candidate_points,
        submitter_counter: 0,
    }
}

impl Election {
    pub fn roster(&self) -> Vec<GroupPoint> {
        self.config.roster.clone()
    }

    pub fn election_secret(&self) -> Scalar {
        self.manager_secrets.iter().fold(Scalar::ONE, |a, s| a * s)
    }

    pub fn pubkey(&self) -> GroupPoint {
        self.board.election_pubkey().unwrap()
    }

    /// Random roster subset of `size` keys containing `voter`, in roster order.
    pub fn ring_for<R: Rng>(&self, voter: usize, size: usize, rng: &mut R) -> (Ring, usize) {
        let mut others: Vec<usize> = (0..self.voters.len()).filter(|&i| i != voter).collect();
        others.shuffle(rng);
        let mut idx: Vec<usize> = others.into_iter().take(size - 1).collect();
        idx.push(voter);
        idx.sort_unstable();
        let signer = idx.iter().position(|&i| i == voter).unwrap();
        let ring = Ring::new(idx.iter().map(|&i| *self.voters[i].public()).collect()).unwrap();
        (ring, signer)
    }

    pub fn honest_ballot<R: RngCore + CryptoRng>(
        &self,
        voter: usize,
        candidate: usize,
        ring_size: usize,
        rng: &mut R,
    ) -> SignedBallot {
        let (ring, signer) = self.ring_for(voter, ring_size, rng);
        let ballot = stealth::make_ballot(&self.pubkey(), &self.candidate_points[candidate], rng);
        stealth::cast(ballot, &ring, signer, &self.voters[voter], rng)
            .unwrap()
            .into_roster_subset(&self.config.roster)
            .unwrap()
    }

    pub fn next_submitter(&mut self) -> String {
        self.submitter_counter += 1;
        format!("acct-{:08}", self.submitter_counter)
    }

    pub fn submit(&mut self, sb: &SignedBallot) -> u64 {
        let submitter = self.next_submitter();
        self.board.submit_ballot(&mut self.store, sb, &submitter).unwrap().index
    }

    pub fn submit_raw_payload(&mut self, payload: Vec<u8>) -> u64 {
        let submitter = self.next_submitter();
        self.board.append(EntryType::Ballot, payload, &submitter).unwrap().index
    }

    /// Moves to Tally and reveals every manager's share.
    pub fn close_and_reveal(&mut self) {
        self.board.advance_phase("admin").unwrap();
        for (i, s) in self.manager_secrets.clone().iter().enumerate() {
            let id = format!("manager-{i}");
            self.board.reveal(&id, s, &id).unwrap();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Valid ballot; counts unless the voter already has a counted ballot.
    Honest,
    /// Ring smaller than the election minimum.
    Undersized,
    /// Ring contains a key that is not on the roster.
    OffRoster,
    /// Signature perturbed after signing.
    BadSignature,
    /// Ballot built against a different election key; signature valid.
    WrongElectionKey,
    /// Undecodable inline bytes.
    Garbage,
    /// Pointer to content that is not in the store.
    DanglingPointer,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Honest,
        Kind::Undersized,
        Kind::OffRoster,
        Kind::BadSignature,
        Kind::WrongElectionKey,
        Kind::Garbage,
        Kind::DanglingPointer,
    ];
}

#[derive(Debug, Clone)]
pub struct PlannedBallot {
    pub voter: usize,
    pub candidate: usize,
    pub kind: Kind,
}

/// Ground truth: first valid, candidate-matching ballot per voter counts.
pub fn expected_counts(plan: &[PlannedBallot], candidates: usize) -> Vec<u64> {
    let mut counts = vec![0u64; candidates];
    let mut voted = HashSet::new();
    for b in plan {
        if b.kind == Kind::Honest && voted.insert(b.voter) {
            counts[b.candidate] += 1;
        }
    }
    counts
}

pub fn random_plan<R: Rng>(rng: &mut R, voters: usize, candidates: usize, adversarial: bool) -> Vec<PlannedBallot> {
    let len = rng.gen_range(0..=voters + voters / 2 + 2);
    (0..len)
        .map(|_| PlannedBallot {
            voter: rng.gen_range(0..voters),
            candidate: rng.gen_range(0..candidates),
            kind: if adversarial && rng.gen_bool(0.4) {
                *Kind::ALL[1..].choose(rng).unwrap()
            } else {
                Kind::Honest
            },
        })
        .collect()
}

/// Submits every planned ballot, realizing its kind.
pub fn execute_plan<R: RngCore + CryptoRng>(e: &mut Election, plan: &[PlannedBallot], rng: &mut R) {
    let n = e.voters.len();
    let min = e.config.min_ring_size;
    for b in plan {
        match b.kind {
            Kind::Honest => {
                let size = rng.gen_range(min..=n);
                let sb = e.honest_ballot(b.voter, b.candidate, size, rng);
                e.submit(&sb);
            }
            Kind::Undersized => {
                let size = rng.gen_range(1..min.max(2));
                let (ring, signer) = e.ring_for(b.voter, size, rng);
                let ballot = stealth::make_ballot(&e.pubkey(), &e.candidate_points[b.candidate], rng);
                let sb = stealth::cast(ballot, &ring, signer, &e.voters[b.voter], rng).unwrap();
                if size < min {
                    e.submit(&sb);
                } else {
                    // min_ring_size 1: nothing is undersized, submit a broken one instead
                    let mut sb = sb;
                    sb.signature.r[0] += Scalar::ONE;
                    e.submit(&sb);
                }
            }
            Kind::OffRoster => {
                let outsider = KeyPair::generate(rng);
                let size = rng.gen_range(min.max(2)..=n.max(min.max(2)));
                let (ring, _) = e.ring_for(b.voter, size.min(n), rng);
                let mut members = ring.members().to_vec();
                members.push(*outsider.public());
                let ring = Ring::new(members).unwrap();
                let signer = ring.len() - 1;
                let ballot = stealth::make_ballot(&e.pubkey(), &e.candidate_points[b.candidate], rng);
                let sb = stealth::cast(ballot, &ring, signer, &outsider, rng).unwrap();
                assert!(matches!(sb.ring, RingRef::Members(_)));
                e.submit(&sb);
            }
            Kind::BadSignature => {
                let size = rng.gen_range(min..=n);
                let mut sb = e.honest_ballot(b.voter, b.candidate, size, rng);
                match rng.gen_range(0..4) {
                    0 => sb.signature.c[0] += Scalar::ONE,
                    1 => sb.signature.r[size - 1] -= Scalar::ONE,
                    2 => sb.signature.key_image += group::basepoint(),
                    _ => sb.ballot.stealth_address += group::basepoint(),
                }
                e.submit(&sb);
            }
            Kind::WrongElectionKey => {
                let size = rng.gen_range(min..=n);
                let (ring, signer) = e.ring_for(b.voter, size, rng);
                let rogue = KeyPair::generate(rng);
                let ballot = stealth::make_ballot(rogue.public(), &e.candidate_points[b.candidate], rng);
                let sb = stealth::cast(ballot, &ring, signer, &e.voters[b.voter], rng).unwrap();
                e.submit(&sb);
            }
            Kind::Garbage => {
                let len = rng.gen_range(1..200);
                let mut payload = vec![0u8]; // inline tag
                payload.extend((0..len).map(|_| rng.gen::<u8>()));
                e.submit_raw_payload(payload);
            }
            Kind::DanglingPointer => {
                let mut payload = vec![2u8]; // cas-pointer tag
                payload.extend((0..32).map(|_| rng.gen::<u8>()));
                e.submit_raw_payload(payload);
            }
        }
    }
}

pub fn counts_vec(report: &ringvote::TallyReport) -> Vec<u64> {
    report.counts.iter().map(|c| c.votes).collect()
}

/// Accepted and rejected together cover each ballot entry exactly once.
pub fn audit_partitions(report: &ringvote::TallyReport, board: &BulletinBoard) -> bool {
    let mut seen = BTreeMap::new();
    for i in report
        .accepted
        .iter()
        .map(|a| a.entry_index)
        .chain(report.rejected.iter().map(|r| r.entry_index))
    {
        *seen.entry(i).or_insert(0) += 1;
    }
    let expected: BTreeMap<u64, i32> = board.ballot_indices().iter().map(|&i| (i, 1)).collect();
    seen == expected
}
