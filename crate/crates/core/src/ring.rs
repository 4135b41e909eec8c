//! One-time linkable ring signatures in the CryptoNote construction.
//!
//! A signer holding `x` with `P_s = x·G` among ring members `P_0..P_{n-1}`
//! publishes the key image `I = x·H_p(P_s)`. Every signature made with the same
//! key carries the same image, which is how a second ballot from one voter is
//! detected without learning which ring member cast it.

use std::collections::HashSet;

use curve25519_dalek::traits::IsIdentity;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::group::{self, GroupPoint, KeyPair, Scalar, POINT_LEN, SCALAR_LEN};
use crate::wire::{len_u32, Reader, WireError, Writer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("ring must contain at least one member")]
    EmptyRing,
    #[error("ring member {0} appears more than once")]
    DuplicateMember(usize),
    #[error("signer index {index} out of range for ring of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("ring member at signer index does not match the signing key")]
    SignerKeyMismatch,
    #[error("signature carries {sig} responses but the ring has {ring} members")]
    LengthMismatch { sig: usize, ring: usize },
}

/// Ordered, duplicate-free list of public keys. Member order feeds the
/// challenge hash, so two rings with the same keys in different orders are
/// different rings.
#[derive(Debug, Clone)]
pub struct Ring {
    members: Vec<GroupPoint>,
    hashed: Vec<GroupPoint>,
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for Ring {}

impl Ring {
    pub fn new(members: Vec<GroupPoint>) -> Result<Self, RingError> {
        if members.is_empty() {
            return Err(RingError::EmptyRing);
        }
        let mut seen = HashSet::with_capacity(members.len());
        for (i, m) in members.iter().enumerate() {
            if !seen.insert(group::encode_point(m)) {
                return Err(RingError::DuplicateMember(i));
            }
        }
        let hashed = members.iter().map(member_hash_point).collect();
        Ok(Self { members, hashed })
    }

    pub fn members(&self) -> &[GroupPoint] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, key: &GroupPoint) -> Option<usize> {
        self.members.iter().position(|m| m == key)
    }

    /// H_p(P_i) for every member, in ring order.
    pub fn hashed_members(&self) -> &[GroupPoint] {
        &self.hashed
    }
}

fn member_hash_point(p: &GroupPoint) -> GroupPoint {
    group::hash_to_point(&group::encode_point(p))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingSignature {
    pub key_image: GroupPoint,
    pub c: Vec<Scalar>,
    pub r: Vec<Scalar>,
}

impl RingSignature {
    pub fn ring_size(&self) -> usize {
        self.c.len()
    }

    /// Wire size for a ring of `n` members: image, `u32` count, then `c` and `r`.
    pub const fn encoded_len(n: usize) -> usize {
        POINT_LEN + 4 + 2 * SCALAR_LEN * n
    }

    pub fn write(&self, w: &mut Writer) {
        debug_assert_eq!(self.c.len(), self.r.len());
        w.point(&self.key_image).u32(len_u32(self.c.len()));
        for c in &self.c {
            w.scalar(c);
        }
        for r in &self.r {
            w.scalar(r);
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let key_image = r.point()?;
        if key_image.is_identity() {
            return Err(WireError::Invalid("key image is the identity"));
        }
        let n = r.count(2 * SCALAR_LEN)?;
        if n == 0 {
            return Err(WireError::Invalid("empty signature"));
        }
        let c = (0..n).map(|_| r.scalar()).collect::<Result<_, _>>()?;
        let rs = (0..n).map(|_| r.scalar()).collect::<Result<_, _>>()?;
        Ok(Self { key_image, c, r: rs })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let sig = Self::read(&mut r)?;
        r.finish()?;
        Ok(sig)
    }
}

/// `I = x·H_p(P)`; depends only on the key pair.
pub fn key_image(keypair: &KeyPair) -> GroupPoint {
    keypair.secret() * member_hash_point(keypair.public())
}

/// Challenge hash over `len(m) ∥ m ∥ L_0..L_{n-1} ∥ R_0..R_{n-1}`.
fn challenge(message: &[u8], ls: &[GroupPoint], rs: &[GroupPoint]) -> Scalar {
    let mut buf = Vec::with_capacity(8 + message.len() + POINT_LEN * (ls.len() + rs.len()));
    buf.extend_from_slice(&(message.len() as u64).to_le_bytes());
    buf.extend_from_slice(message);
    for p in ls.iter().chain(rs) {
        buf.extend_from_slice(&group::encode_point(p));
    }
    group::hash_to_scalar(&buf)
}

/// Signs `message` as an anonymous member of `ring`.
///
/// The rng must be fresh per signature: reusing `q_s` across two signatures
/// by the same key reveals the secret.
pub fn sign<R: RngCore + CryptoRng>(
    message: &[u8],
    ring: &Ring,
    signer_index: usize,
    keypair: &KeyPair,
    rng: &mut R,
) -> Result<RingSignature, RingError> {
    let n = ring.len();
    if signer_index >= n {
        return Err(RingError::IndexOutOfRange {
            index: signer_index,
            size: n,
        });
    }
    if ring.members[signer_index] != *keypair.public() {
        return Err(RingError::SignerKeyMismatch);
    }
    let x = keypair.secret();
    let image = x * ring.hashed[signer_index];

    let mut q = Vec::with_capacity(n);
    let mut w = vec![Scalar::ZERO; n];
    let mut ls = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    for (i, (member, hp)) in ring.members.iter().zip(&ring.hashed).enumerate() {
        let qi = Scalar::random(rng);
        if i == signer_index {
            ls.push(group::mul_base(&qi));
            rs.push(qi * hp);
        } else {
            let wi = Scalar::random(rng);
            ls.push(group::mul_base(&qi) + wi * member);
            rs.push(qi * hp + wi * image);
            w[i] = wi;
        }
        q.push(qi);
    }

    let total = challenge(message, &ls, &rs);
    let decoy_sum: Scalar = w.iter().sum();
    let cs = total - decoy_sum;

    let mut c = w;
    c[signer_index] = cs;
    let mut r = q;
    r[signer_index] -= cs * x;

    Ok(RingSignature { key_image: image, c, r })
}

/// Checks `Σ c_i = H_s(m, L'_0.., R'_0..)` with `L'_i = r_i·G + c_i·P_i` and
/// `R'_i = r_i·H_p(P_i) + c_i·I`. Stateless: a valid signature from an
/// already-seen key image still verifies.
pub fn verify(message: &[u8], ring: &Ring, sig: &RingSignature) -> Result<bool, RingError> {
    let n = ring.len();
    if sig.c.len() != n || sig.r.len() != n {
        return Err(RingError::LengthMismatch {
            sig: sig.c.len().max(sig.r.len()),
            ring: n,
        });
    }
    if sig.key_image.is_identity() || !sig.key_image.is_torsion_free() {
        return Ok(false);
    }
    let mut ls = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    for i in 0..n {
        let (ci, ri) = (&sig.c[i], &sig.r[i]);
        ls.push(group::mul_base(ri) + ci * ring.members[i]);
        rs.push(ri * ring.hashed[i] + ci * sig.key_image);
    }
    let sum: Scalar = sig.c.iter().sum();
    Ok(sum == challenge(message, &ls, &rs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys(rng: &mut ChaCha20Rng, n: usize) -> Vec<KeyPair> {
        (0..n).map(|_| KeyPair::generate(rng)).collect()
    }

    fn ring_of(keys: &[KeyPair]) -> Ring {
        Ring::new(keys.iter().map(|k| *k.public()).collect()).unwrap()
    }

    #[test]
    fn degenerate_ring_of_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let k = keys(&mut rng, 1);
        let ring = ring_of(&k);
        let sig = sign(b"m", &ring, 0, &k[0], &mut rng).unwrap();
        assert!(verify(b"m", &ring, &sig).unwrap());
    }

    #[test]
    fn every_signer_index_verifies() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k = keys(&mut rng, 5);
        let ring = ring_of(&k);
        for (i, kp) in k.iter().enumerate() {
            let sig = sign(b"ballot", &ring, i, kp, &mut rng).unwrap();
            assert!(verify(b"ballot", &ring, &sig).unwrap());
            assert_eq!(sig.key_image, key_image(kp));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = keys(&mut rng, 3);
        let ring = ring_of(&k);
        assert_eq!(
            sign(b"m", &ring, 3, &k[0], &mut rng),
            Err(RingError::IndexOutOfRange { index: 3, size: 3 })
        );
        assert_eq!(sign(b"m", &ring, 1, &k[0], &mut rng), Err(RingError::SignerKeyMismatch));
        assert_eq!(Ring::new(vec![]), Err(RingError::EmptyRing));
        assert_eq!(
            Ring::new(vec![*k[0].public(), *k[1].public(), *k[0].public()]),
            Err(RingError::DuplicateMember(2))
        );
    }

    #[test]
    fn length_mismatch_is_an_error_not_false() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let k = keys(&mut rng, 3);
        let ring = ring_of(&k);
        let mut sig = sign(b"m", &ring, 0, &k[0], &mut rng).unwrap();
        sig.r.pop();
        assert!(matches!(
            verify(b"m", &ring, &sig),
            Err(RingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn tampering_breaks_verification() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let k = keys(&mut rng, 4);
        let ring = ring_of(&k);
        let sig = sign(b"message", &ring, 2, &k[2], &mut rng).unwrap();

        assert!(!verify(b"messagf", &ring, &sig).unwrap());

        let mut bumped = sig.clone();
        bumped.c[0] += Scalar::ONE;
        assert!(!verify(b"message", &ring, &bumped).unwrap());

        let mut r_bumped = sig.clone();
        r_bumped.r[3] += Scalar::ONE;
        assert!(!verify(b"message", &ring, &r_bumped).unwrap());

        let mut image = sig.clone();
        image.key_image += group::basepoint();
        assert!(!verify(b"message", &ring, &image).unwrap());
    }

    #[test]
    fn ring_order_changes_challenge() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let k = keys(&mut rng, 3);
        let ring = ring_of(&k);
        let sig = sign(b"m", &ring, 0, &k[0], &mut rng).unwrap();
        let mut members = ring.members().to_vec();
        members.swap(1, 2);
        let reordered = Ring::new(members).unwrap();
        let mut sig2 = sig.clone();
        sig2.c.swap(1, 2);
        sig2.r.swap(1, 2);
        // Same per-member responses in permuted slots: L'/R' are permuted too,
        // so the challenge input differs.
        assert!(!verify(b"m", &reordered, &sig2).unwrap());
    }

    #[test]
    fn wire_size_and_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let k = keys(&mut rng, 6);
        let ring = ring_of(&k);
        let sig = sign(b"m", &ring, 4, &k[4], &mut rng).unwrap();
        let bytes = sig.to_bytes();
        assert_eq!(bytes.len(), RingSignature::encoded_len(6));
        assert_eq!(bytes.len(), 32 + 4 + 64 * 6);
        assert_eq!(RingSignature::from_bytes(&bytes).unwrap(), sig);

        let mut truncated = bytes.clone();
        truncated.pop();
        assert!(RingSignature::from_bytes(&truncated).is_err());
        let mut huge = bytes;
        huge[32..36].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(RingSignature::from_bytes(&huge).is_err());
    }
}
