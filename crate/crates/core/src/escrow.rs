//! Multiparty escrow of the election key `(a, A)`.
//!
//! Each manager `k` picks `r_k`, publishes `r_k·G` with a Schnorr proof of
//! knowledge, and then extends the public product chain
//! `A_k = r_k·A_{k-1}` (with `A_0 = G`). The election key is
//! `A = (Π r_k)·G`. After voting every manager reveals `r_k`; the secret
//! `a = Π r_k mod l` exists only once all of them have.

use std::collections::BTreeMap;

use curve25519_dalek::traits::IsIdentity;
use thiserror::Error;

use crate::group::{self, GroupPoint, Scalar};
use crate::wire::{Reader, WireError, Writer};

const PROOF_CHALLENGE_TAG: &[u8] = b"ringvote/escrow-proof/v1";
const PROOF_NONCE_TAG: &[u8] = b"ringvote/escrow-nonce/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EscrowError {
    #[error("manager secret must be nonzero")]
    ZeroSecret,
    #[error("manager {0:?} is not listed in the election config")]
    UnknownManager(String),
    #[error("manager {0:?} has already committed")]
    DuplicateCommitment(String),
    #[error("proof of knowledge for manager {0:?} does not verify")]
    InvalidProof(String),
    #[error("share point of manager {0:?} is the identity")]
    IdentityShare(String),
    #[error("expected the running product from manager {expected:?}, got {actual:?}")]
    OutOfOrderProduct { expected: Option<String>, actual: String },
    #[error("manager {0:?} must wait for the previous running product")]
    ProductPending(String),
    #[error("commit phase incomplete: missing {0:?}")]
    CommitIncomplete(Vec<String>),
    #[error("operation not allowed in escrow phase {0:?}")]
    WrongPhase(EscrowPhase),
    #[error("revealed secret does not open the commitment of manager {0:?}")]
    RevealMismatch(String),
    #[error("manager {0:?} has already revealed")]
    DuplicateReveal(String),
    #[error("missing reveals from {0:?}")]
    MissingReveal(Vec<String>),
    #[error("running product published by manager {0:?} is inconsistent with the revealed secret")]
    ChainMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchnorrProof {
    pub commitment: GroupPoint,
    pub challenge: Scalar,
    pub response: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerCommitment {
    pub manager_id: String,
    pub share_point: GroupPoint,
    pub proof: SchnorrProof,
}

/// Proof context binding a commitment to one election and one manager.
pub fn commitment_context(election_id: &str, manager_id: &str) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(election_id).str(manager_id);
    w.finish()
}

fn proof_challenge(context: &[u8], share: &GroupPoint, commitment: &GroupPoint) -> Scalar {
    let mut w = Writer::new();
    w.raw(PROOF_CHALLENGE_TAG).bytes(context).point(share).point(commitment);
    group::hash_to_scalar(&w.finish())
}

/// Schnorr proof of knowledge of `secret` for `secret·G`. The nonce is derived
/// from the secret and context, so proving is deterministic.
pub fn prove_knowledge(secret: &Scalar, context: &[u8]) -> SchnorrProof {
    let mut w = Writer::new();
    w.raw(PROOF_NONCE_TAG).scalar(secret).bytes(context);
    let nonce = group::hash_to_scalar(&w.finish());
    let commitment = group::mul_base(&nonce);
    let challenge = proof_challenge(context, &group::mul_base(secret), &commitment);
    SchnorrProof {
        commitment,
        challenge,
        response: nonce + challenge * secret,
    }
}

pub fn verify_knowledge(share: &GroupPoint, proof: &SchnorrProof, context: &[u8]) -> bool {
    proof.challenge == proof_challenge(context, share, &proof.commitment)
        && group::mul_base(&proof.response) == proof.commitment + proof.challenge * share
}

pub fn commit_share(
    election_id: &str,
    manager_id: &str,
    manager_secret: &Scalar,
) -> Result<ManagerCommitment, EscrowError> {
    if *manager_secret == Scalar::ZERO {
        return Err(EscrowError::ZeroSecret);
    }
    let context = commitment_context(election_id, manager_id);
    Ok(ManagerCommitment {
        manager_id: manager_id.to_owned(),
        share_point: group::mul_base(manager_secret),
        proof: prove_knowledge(manager_secret, &context),
    })
}

pub fn verify_commitment(commitment: &ManagerCommitment, election_id: &str) -> bool {
    !commitment.share_point.is_identity()
        && verify_knowledge(
            &commitment.share_point,
            &commitment.proof,
            &commitment_context(election_id, &commitment.manager_id),
        )
}

/// One step of the product chain: `manager_secret · previous`.
pub fn extend_product(previous: &GroupPoint, manager_secret: &Scalar) -> GroupPoint {
    manager_secret * previous
}

impl ManagerCommitment {
    pub fn write(&self, w: &mut Writer) {
        w.str(&self.manager_id)
            .point(&self.share_point)
            .point(&self.proof.commitment)
            .scalar(&self.proof.challenge)
            .scalar(&self.proof.response);
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Self {
            manager_id: r.string()?,
            share_point: r.point()?,
            proof: SchnorrProof {
                commitment: r.point()?,
                challenge: r.scalar()?,
                response: r.scalar()?,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscrowPhase {
    Committing,
    Revealing,
    Settled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EscrowStatus {
    Committing {
        missing: Vec<String>,
    },
    AwaitingReveals {
        missing: Vec<String>,
    },
    Complete,
    /// Reveal window closed with managers still withholding; the election
    /// secret can never be reconstructed.
    Defaulted {
        missing: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepositSettlement {
    pub refunded: BTreeMap<String, u64>,
    pub forfeited: BTreeMap<String, u64>,
}

impl DepositSettlement {
    pub fn total_refunded(&self) -> u64 {
        self.refunded.values().sum()
    }

    pub fn total_forfeited(&self) -> u64 {
        self.forfeited.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscrowState {
    election_id: String,
    managers: Vec<String>,
    deposit_amount: u64,
    commitments: Vec<ManagerCommitment>,
    running_products: Vec<GroupPoint>,
    reveals: BTreeMap<String, Scalar>,
    deposits: BTreeMap<String, u64>,
    phase: EscrowPhase,
}

impl EscrowState {
    pub fn new(election_id: impl Into<String>, managers: Vec<String>, deposit_amount: u64) -> Self {
        Self {
            election_id: election_id.into(),
            managers,
            deposit_amount,
            commitments: Vec::new(),
            running_products: Vec::new(),
            reveals: BTreeMap::new(),
            deposits: BTreeMap::new(),
            phase: EscrowPhase::Committing,
        }
    }

    pub fn phase(&self) -> EscrowPhase {
        self.phase
    }

    pub fn managers(&self) -> &[String] {
        &self.managers
    }

    pub fn commitments(&self) -> &[ManagerCommitment] {
        &self.commitments
    }

    pub fn running_products(&self) -> &[GroupPoint] {
        &self.running_products
    }

    pub fn deposits(&self) -> &BTreeMap<String, u64> {
        &self.deposits
    }

    pub fn has_revealed(&self, manager_id: &str) -> bool {
        self.reveals.contains_key(manager_id)
    }

    fn commitment_of(&self, manager_id: &str) -> Option<(usize, &ManagerCommitment)> {
        self.commitments
            .iter()
            .enumerate()
            .find(|(_, c)| c.manager_id == manager_id)
    }

    pub fn add_commitment(&mut self, commitment: ManagerCommitment) -> Result<(), EscrowError> {
        if self.phase != EscrowPhase::Committing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        let id = &commitment.manager_id;
        if !self.managers.contains(id) {
            return Err(EscrowError::UnknownManager(id.clone()));
        }
        if self.commitment_of(id).is_some() {
            return Err(EscrowError::DuplicateCommitment(id.clone()));
        }
        if self.running_products.len() != self.commitments.len() {
            return Err(EscrowError::ProductPending(id.clone()));
        }
        if commitment.share_point.is_identity() {
            return Err(EscrowError::IdentityShare(id.clone()));
        }
        if !verify_commitment(&commitment, &self.election_id) {
            return Err(EscrowError::InvalidProof(id.clone()));
        }
        self.deposits.insert(id.clone(), self.deposit_amount);
        self.commitments.push(commitment);
        Ok(())
    }

    /// Records the next running product; only the most recently committed
    /// manager may publish it.
    pub fn add_product(&mut self, manager_id: &str, product: GroupPoint) -> Result<(), EscrowError> {
        if self.phase != EscrowPhase::Committing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        let expected = (self.running_products.len() < self.commitments.len())
            .then(|| self.commitments[self.running_products.len()].manager_id.clone());
        if expected.as_deref() != Some(manager_id) {
            return Err(EscrowError::OutOfOrderProduct {
                expected,
                actual: manager_id.to_owned(),
            });
        }
        if product.is_identity() {
            return Err(EscrowError::IdentityShare(manager_id.to_owned()));
        }
        self.running_products.push(product);
        Ok(())
    }

    /// Head of the published chain once every manager has committed.
    pub fn election_pubkey(&self) -> Option<GroupPoint> {
        (self.commit_missing().is_empty() && !self.managers.is_empty())
            .then(|| *self.running_products.last().expect("chain complete"))
    }

    fn commit_missing(&self) -> Vec<String> {
        let mut missing: Vec<String> = self
            .managers
            .iter()
            .filter(|m| self.commitment_of(m).is_none())
            .cloned()
            .collect();
        if missing.is_empty() && self.running_products.len() < self.commitments.len() {
            missing.push(self.commitments[self.running_products.len()].manager_id.clone());
        }
        missing
    }

    pub fn close_commitments(&mut self) -> Result<(), EscrowError> {
        if self.phase != EscrowPhase::Committing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        let missing = self.commit_missing();
        if !missing.is_empty() || self.managers.is_empty() {
            return Err(EscrowError::CommitIncomplete(missing));
        }
        self.phase = EscrowPhase::Revealing;
        Ok(())
    }

    pub fn reveal_share(&mut self, manager_id: &str, secret: Scalar) -> Result<(), EscrowError> {
        if self.phase != EscrowPhase::Revealing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        let (_, commitment) = self
            .commitment_of(manager_id)
            .ok_or_else(|| EscrowError::UnknownManager(manager_id.to_owned()))?;
        if self.reveals.contains_key(manager_id) {
            return Err(EscrowError::DuplicateReveal(manager_id.to_owned()));
        }
        if group::mul_base(&secret) != commitment.share_point {
            return Err(EscrowError::RevealMismatch(manager_id.to_owned()));
        }
        self.reveals.insert(manager_id.to_owned(), secret);
        Ok(())
    }

    pub fn missing_reveals(&self) -> Vec<String> {
        self.commitments
            .iter()
            .filter(|c| !self.reveals.contains_key(&c.manager_id))
            .map(|c| c.manager_id.clone())
            .collect()
    }

    /// `a = Π r_k mod l`, checked against the published chain link by link.
    pub fn combine_secret(&self) -> Result<Scalar, EscrowError> {
        if self.phase == EscrowPhase::Committing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        let missing = self.missing_reveals();
        if !missing.is_empty() {
            return Err(EscrowError::MissingReveal(missing));
        }
        let mut previous = group::basepoint();
        let mut product = Scalar::ONE;
        for (commitment, published) in self.commitments.iter().zip(&self.running_products) {
            let secret = &self.reveals[&commitment.manager_id];
            let expected = extend_product(&previous, secret);
            if expected != *published {
                return Err(EscrowError::ChainMismatch(commitment.manager_id.clone()));
            }
            product *= secret;
            previous = expected;
        }
        assert_eq!(
            group::mul_base(&product),
            previous,
            "escrow product diverged from chain"
        );
        Ok(product)
    }

    pub fn status(&self) -> EscrowStatus {
        match self.phase {
            EscrowPhase::Committing => EscrowStatus::Committing {
                missing: self.commit_missing(),
            },
            EscrowPhase::Revealing | EscrowPhase::Settled => {
                let missing = self.missing_reveals();
                if missing.is_empty() {
                    EscrowStatus::Complete
                } else if self.phase == EscrowPhase::Settled {
                    EscrowStatus::Defaulted { missing }
                } else {
                    EscrowStatus::AwaitingReveals { missing }
                }
            }
        }
    }

    /// Deposits a settlement would pay out right now, without closing anything.
    pub fn settlement(&self) -> DepositSettlement {
        let mut out = DepositSettlement::default();
        for (id, amount) in &self.deposits {
            if self.reveals.contains_key(id) {
                out.refunded.insert(id.clone(), *amount);
            } else {
                out.forfeited.insert(id.clone(), *amount);
            }
        }
        out
    }

    /// Closes the reveal window. Managers without a reveal forfeit.
    pub fn settle(&mut self) -> Result<DepositSettlement, EscrowError> {
        if self.phase != EscrowPhase::Revealing {
            return Err(EscrowError::WrongPhase(self.phase));
        }
        self.phase = EscrowPhase::Settled;
        Ok(self.settlement())
    }

    /// Canonical encoding of the full escrow state, used for replica digests.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.election_id)
            .u32(self.managers.len() as u32)
            .u64(self.deposit_amount);
        for m in &self.managers {
            w.str(m);
        }
        w.u8(match self.phase {
            EscrowPhase::Committing => 0,
            EscrowPhase::Revealing => 1,
            EscrowPhase::Settled => 2,
        });
        w.u32(self.commitments.len() as u32);
        for c in &self.commitments {
            c.write(&mut w);
        }
        w.u32(self.running_products.len() as u32);
        for p in &self.running_products {
            w.point(p);
        }
        w.u32(self.reveals.len() as u32);
        for (id, s) in &self.reveals {
            w.str(id).scalar(s);
        }
        w.u32(self.deposits.len() as u32);
        for (id, d) in &self.deposits {
            w.str(id).u64(*d);
        }
        w.finish()
    }
}
