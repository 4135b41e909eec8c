//! Stealth-address ballots.
//!
//! All candidates share the escrowed election key `A = a·G`; candidate `j` is
//! the hashed point `B_j`. A ballot for `j` is `(SA, R) = (H_s(r·A)·G + B_j, r·G)`,
//! which only the holder of `a` can open, via `H_s(a·R) = H_s(r·A)`.

use curve25519_dalek::traits::IsIdentity;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::group::{self, GroupPoint, KeyPair, Scalar, POINT_LEN};
use crate::ring::{self, Ring, RingError, RingSignature};
use crate::wire::{len_u32, Reader, WireError, Writer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ballot {
    pub stealth_address: GroupPoint,
    pub nonce_point: GroupPoint,
}

pub const BALLOT_LEN: usize = 2 * POINT_LEN;

impl Ballot {
    /// `SA ∥ R`: the exact bytes the ring signature signs.
    pub fn to_bytes(&self) -> [u8; BALLOT_LEN] {
        let mut out = [0u8; BALLOT_LEN];
        out[..POINT_LEN].copy_from_slice(&group::encode_point(&self.stealth_address));
        out[POINT_LEN..].copy_from_slice(&group::encode_point(&self.nonce_point));
        out
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let stealth_address = r.point()?;
        let nonce_point = r.point()?;
        if nonce_point.is_identity() {
            return Err(WireError::Invalid("ballot nonce point is the identity"));
        }
        Ok(Self {
            stealth_address,
            nonce_point,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let b = Self::read(&mut r)?;
        r.finish()?;
        Ok(b)
    }
}

fn shared_scalar(dh: &GroupPoint) -> Scalar {
    group::hash_to_scalar(&group::encode_point(dh))
}

/// Builds a ballot for `candidate_point` under election key `election_pubkey`.
pub fn make_ballot<R: RngCore + CryptoRng>(
    election_pubkey: &GroupPoint,
    candidate_point: &GroupPoint,
    rng: &mut R,
) -> Ballot {
    let r = group::random_nonzero_scalar(rng);
    ballot_with_nonce(election_pubkey, candidate_point, &r)
}

pub(crate) fn ballot_with_nonce(a: &GroupPoint, b: &GroupPoint, r: &Scalar) -> Ballot {
    Ballot {
        stealth_address: group::mul_base(&shared_scalar(&(r * a))) + b,
        nonce_point: group::mul_base(r),
    }
}

/// Opens a ballot with the election secret: the index `j` such that
/// `SA - H_s(a·R)·G = B_j`, if any.
pub fn match_ballot(ballot: &Ballot, election_secret: &Scalar, candidates: &[GroupPoint]) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    let unmasked = ballot.stealth_address - group::mul_base(&shared_scalar(&(election_secret * ballot.nonce_point)));
    candidates.iter().position(|b| *b == unmasked)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingResolveError {
    #[error("ring member {0} is not on the roster")]
    MemberNotInRoster(usize),
    #[error("roster subset was built for a roster of {claimed} keys, roster has {actual}")]
    RosterLengthMismatch { claimed: usize, actual: usize },
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Compact ring description: bit `i` set means roster key `i` is a member.
/// Members appear in roster order. The encoding is constant-size for a given
/// roster, so on-ledger ballot size grows only with the signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterSubset {
    roster_len: u32,
    bits: Vec<u8>,
}

impl RosterSubset {
    pub fn from_indices(roster_len: usize, indices: &[usize]) -> Option<Self> {
        let mut bits = vec![0u8; roster_len.div_ceil(8)];
        for &i in indices {
            if i >= roster_len || bits[i / 8] & (1 << (i % 8)) != 0 {
                return None;
            }
            bits[i / 8] |= 1 << (i % 8);
        }
        if indices.is_empty() {
            return None;
        }
        Some(Self {
            roster_len: len_u32(roster_len),
            bits,
        })
    }

    pub fn roster_len(&self) -> usize {
        self.roster_len as usize
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.roster_len()).filter(|i| self.bits[i / 8] & (1 << (i % 8)) != 0)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let roster_len = r.u32()?;
        let bits = r.take((roster_len as usize).div_ceil(8))?.to_vec();
        let tail = roster_len % 8;
        if tail != 0 && bits.last().is_some_and(|b| b >> tail != 0) {
            return Err(WireError::Invalid("roster subset sets bits past the roster"));
        }
        let subset = Self { roster_len, bits };
        if subset.count() == 0 {
            return Err(WireError::Invalid("roster subset is empty"));
        }
        Ok(subset)
    }
}

/// How a signed ballot names its ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingRef {
    /// Full public keys, in ring order.
    Members(Ring),
    /// Positions in the election roster.
    RosterSubset(RosterSubset),
}

const RING_TAG_MEMBERS: u8 = 0;
const RING_TAG_ROSTER: u8 = 1;

impl RingRef {
    pub fn len(&self) -> usize {
        match self {
            RingRef::Members(ring) => ring.len(),
            RingRef::RosterSubset(s) => s.count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves to concrete ring keys, requiring every member to be on `roster`.
    pub fn resolve(&self, roster: &[GroupPoint]) -> Result<Ring, RingResolveError> {
        match self {
            RingRef::Members(ring) => {
                for (i, m) in ring.members().iter().enumerate() {
                    if !roster.contains(m) {
                        return Err(RingResolveError::MemberNotInRoster(i));
                    }
                }
                Ok(ring.clone())
            }
            RingRef::RosterSubset(s) => {
                if s.roster_len() != roster.len() {
                    return Err(RingResolveError::RosterLengthMismatch {
                        claimed: s.roster_len(),
                        actual: roster.len(),
                    });
                }
                Ok(Ring::new(s.indices().map(|i| roster[i]).collect())?)
            }
        }
    }

    fn write(&self, w: &mut Writer) {
        match self {
            RingRef::Members(ring) => {
                w.u8(RING_TAG_MEMBERS).u32(len_u32(ring.len()));
                for m in ring.members() {
                    w.point(m);
                }
            }
            RingRef::RosterSubset(s) => {
                w.u8(RING_TAG_ROSTER).u32(s.roster_len).raw(&s.bits);
            }
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            RING_TAG_MEMBERS => {
                let n = r.count(POINT_LEN)?;
                let members = (0..n).map(|_| r.point()).collect::<Result<Vec<_>, _>>()?;
                Ring::new(members)
                    .map(RingRef::Members)
                    .map_err(|_| WireError::Invalid("ring is empty or repeats a member"))
            }
            RING_TAG_ROSTER => Ok(RingRef::RosterSubset(RosterSubset::read(r)?)),
            t => Err(WireError::UnknownTag(t)),
        }
    }
}

/// A ballot with its ring and the one-time ring signature over `SA ∥ R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedBallot {
    pub ballot: Ballot,
    pub ring: RingRef,
    pub signature: RingSignature,
}

impl SignedBallot {
    /// Wire form: `SA ∥ R ∥ ring-ref ∥ signature`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.ballot.to_bytes());
        self.ring.write(&mut w);
        self.signature.write(&mut w);
        w.finish()
    }

    /// Structural decode only; no signature or roster check.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let ballot = Ballot::read(&mut r)?;
        let ring = RingRef::read(&mut r)?;
        let signature = RingSignature::read(&mut r)?;
        r.finish()?;
        if signature.ring_size() != ring.len() {
            return Err(WireError::Invalid("signature length does not match ring"));
        }
        Ok(Self {
            ballot,
            ring,
            signature,
        })
    }

    /// Re-expresses an explicit ring as a roster subset. Fails if a member is
    /// off-roster or the ring order differs from roster order.
    pub fn into_roster_subset(self, roster: &[GroupPoint]) -> Result<Self, RingResolveError> {
        let RingRef::Members(ring) = &self.ring else {
            return Ok(self);
        };
        let mut indices = Vec::with_capacity(ring.len());
        for (i, m) in ring.members().iter().enumerate() {
            let pos = roster
                .iter()
                .position(|k| k == m)
                .ok_or(RingResolveError::MemberNotInRoster(i))?;
            indices.push(pos);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RingResolveError::Ring(RingError::DuplicateMember(0)));
        }
        let subset = RosterSubset::from_indices(roster.len(), &indices).expect("indices validated against roster");
        Ok(Self {
            ring: RingRef::RosterSubset(subset),
            ..self
        })
    }
}

/// Signs `ballot` with a one-time ring signature.
pub fn cast<R: RngCore + CryptoRng>(
    ballot: Ballot,
    ring: &Ring,
    signer_index: usize,
    keypair: &KeyPair,
    rng: &mut R,
) -> Result<SignedBallot, RingError> {
    let signature = ring::sign(&ballot.to_bytes(), ring, signer_index, keypair, rng)?;
    Ok(SignedBallot {
        ballot,
        ring: RingRef::Members(ring.clone()),
        signature,
    })
}
