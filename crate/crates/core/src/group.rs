//! Prime-order group over Ed25519, the two protocol hash functions, and
//! deterministic candidate encoding.
//!
//! Every hash input that contains a point uses the point's canonical 32-byte
//! compressed encoding. The domain tags below are part of the wire contract and
//! are frozen by `tests/vectors/group.json`.

use curve25519_dalek::constants::ED25519_BASEPOINT_POINT;
use curve25519_dalek::edwards::{CompressedEdwardsY, EdwardsPoint};
use curve25519_dalek::traits::IsIdentity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};
use thiserror::Error;

pub use curve25519_dalek::scalar::Scalar;

/// Element of the prime-order subgroup (identity included).
pub type GroupPoint = EdwardsPoint;

pub const POINT_LEN: usize = 32;
pub const SCALAR_LEN: usize = 32;

/// Domain tag prepended to every `hash_to_scalar` input.
pub const SCALAR_HASH_TAG: &[u8] = b"ringvote/hash-to-scalar/v1";
/// Domain tag prepended to every `hash_to_point` attempt.
pub const POINT_HASH_TAG: &[u8] = b"ringvote/hash-to-point/v1";
/// Domain tag prepended to candidate names before hashing to a point.
pub const CANDIDATE_TAG: &[u8] = b"ringvote/candidate/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("bytes do not encode a curve point")]
    NotOnCurve,
    #[error("point encoding is not canonical")]
    NonCanonicalPoint,
    #[error("point is outside the prime-order subgroup")]
    NotInSubgroup,
    #[error("scalar encoding is not reduced mod l")]
    NonCanonicalScalar,
    #[error("secret key must be nonzero")]
    ZeroSecret,
    #[error("candidate name must be nonempty")]
    EmptyCandidate,
    #[error("invalid hex: {0}")]
    Hex(String),
}

#[inline]
pub fn basepoint() -> GroupPoint {
    ED25519_BASEPOINT_POINT
}

#[inline]
pub fn mul_base(s: &Scalar) -> GroupPoint {
    EdwardsPoint::mul_base(s)
}

pub fn encode_point(p: &GroupPoint) -> [u8; POINT_LEN] {
    p.compress().to_bytes()
}

/// Decodes a canonical point encoding, rejecting anything off-curve, with a
/// non-canonical y, or carrying a small-order component.
pub fn decode_point(bytes: &[u8]) -> Result<GroupPoint, GroupError> {
    let arr: [u8; POINT_LEN] = bytes.try_into().map_err(|_| GroupError::Length {
        expected: POINT_LEN,
        actual: bytes.len(),
    })?;
    let point = CompressedEdwardsY(arr).decompress().ok_or(GroupError::NotOnCurve)?;
    if point.compress().to_bytes() != arr {
        return Err(GroupError::NonCanonicalPoint);
    }
    if !point.is_torsion_free() {
        return Err(GroupError::NotInSubgroup);
    }
    Ok(point)
}

pub fn decode_scalar(bytes: &[u8]) -> Result<Scalar, GroupError> {
    let arr: [u8; SCALAR_LEN] = bytes.try_into().map_err(|_| GroupError::Length {
        expected: SCALAR_LEN,
        actual: bytes.len(),
    })?;
    Option::from(Scalar::from_canonical_bytes(arr)).ok_or(GroupError::NonCanonicalScalar)
}

pub fn point_to_hex(p: &GroupPoint) -> String {
    hex::encode(encode_point(p))
}

pub fn point_from_hex(s: &str) -> Result<GroupPoint, GroupError> {
    decode_point(&hex::decode(s.trim()).map_err(|e| GroupError::Hex(e.to_string()))?)
}

pub fn scalar_to_hex(s: &Scalar) -> String {
    hex::encode(s.as_bytes())
}

pub fn scalar_from_hex(s: &str) -> Result<Scalar, GroupError> {
    decode_scalar(&hex::decode(s.trim()).map_err(|e| GroupError::Hex(e.to_string()))?)
}

/// H_s: SHA-512 of the tagged input, reduced mod l.
pub fn hash_to_scalar(data: &[u8]) -> Scalar {
    let mut h = Sha512::new();
    h.update(SCALAR_HASH_TAG);
    h.update(data);
    Scalar::from_hash(h)
}

/// H_p by try-and-increment: the first 32 bytes of SHA-512(tag ∥ data ∥ ctr)
/// are decompressed as an Edwards y-coordinate; the first candidate that
/// decodes and survives cofactor clearing as a non-identity point wins.
pub fn hash_to_point(data: &[u8]) -> GroupPoint {
    for counter in 0u32.. {
        let digest = Sha512::new()
            .chain_update(POINT_HASH_TAG)
            .chain_update(data)
            .chain_update(counter.to_le_bytes())
            .finalize();
        let mut candidate = [0u8; 32];
        candidate.copy_from_slice(&digest[..32]);
        if let Some(p) = CompressedEdwardsY(candidate).decompress() {
            let cleared = p.mul_by_cofactor();
            if !cleared.is_identity() {
                return cleared;
            }
        }
    }
    unreachable!("hash_to_point exhausted its counter space")
}

/// Maps a candidate name to its public point B_j. Nobody knows log_G(B_j).
pub fn encode_candidate(name: &str) -> Result<GroupPoint, GroupError> {
    if name.is_empty() {
        return Err(GroupError::EmptyCandidate);
    }
    let mut data = Vec::with_capacity(CANDIDATE_TAG.len() + name.len());
    data.extend_from_slice(CANDIDATE_TAG);
    data.extend_from_slice(name.as_bytes());
    Ok(hash_to_point(&data))
}

/// Uniform scalar in `[1, l)`.
pub fn random_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    loop {
        let s = Scalar::random(rng);
        if s != Scalar::ZERO {
            return s;
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: Scalar,
    public: GroupPoint,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = random_nonzero_scalar(rng);
        Self {
            secret,
            public: mul_base(&secret),
        }
    }

    pub fn from_secret(secret: Scalar) -> Result<Self, GroupError> {
        if secret == Scalar::ZERO {
            return Err(GroupError::ZeroSecret);
        }
        Ok(Self {
            secret,
            public: mul_base(&secret),
        })
    }

    pub fn secret(&self) -> &Scalar {
        &self.secret
    }

    pub fn public(&self) -> &GroupPoint {
        &self.public
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &point_to_hex(&self.public))
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hash_to_scalar_is_deterministic() {
        assert_eq!(hash_to_scalar(b"x"), hash_to_scalar(b"x"));
        assert_ne!(hash_to_scalar(b"x"), hash_to_scalar(b"y"));
    }

    #[test]
    fn hash_to_point_lands_in_prime_order_subgroup() {
        for i in 0u32..32 {
            let p = hash_to_point(&i.to_le_bytes());
            assert!(!p.is_identity());
            assert!(p.is_torsion_free());
        }
    }

    #[test]
    fn domain_separation_between_hashes() {
        let data = b"same input";
        let s = hash_to_scalar(data);
        let p = hash_to_point(data);
        assert_ne!(s.to_bytes(), encode_point(&p));
        assert_ne!(mul_base(&s), p);
    }

    #[test]
    fn candidate_encoding_rejects_empty_name() {
        assert_eq!(encode_candidate(""), Err(GroupError::EmptyCandidate));
        assert_eq!(encode_candidate("alice").unwrap(), encode_candidate("alice").unwrap());
        assert_ne!(encode_candidate("alice").unwrap(), encode_candidate("bob").unwrap());
    }

    #[test]
    fn decode_rejects_small_order_and_non_canonical() {
        // y = 0 decodes to a point of order 4.
        let order4 = [0u8; 32];
        assert_eq!(decode_point(&order4), Err(GroupError::NotInSubgroup));

        let mut torsioned = encode_point(&(basepoint() + curve25519_dalek::constants::EIGHT_TORSION[1]));
        assert_eq!(decode_point(&torsioned), Err(GroupError::NotInSubgroup));
        torsioned[0] ^= 1;
        assert!(decode_point(&torsioned).is_err());

        // y = p is a non-canonical encoding of y = 0.
        let mut y_eq_p = [0xffu8; 32];
        y_eq_p[0] = 0xed;
        y_eq_p[31] = 0x7f;
        assert!(decode_point(&y_eq_p).is_err());

        assert!(matches!(decode_point(&[1u8; 31]), Err(GroupError::Length { .. })));
    }

    #[test]
    fn decode_scalar_rejects_unreduced() {
        // l = 2^252 + 27742317777372353535851937790883648493, little-endian
        let l_bytes: [u8; 32] = [
            0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7, 0xa2, 0xde, 0xf9, 0xde, 0x14, 0, 0, 0, 0,
            0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x10,
        ];
        assert_eq!(decode_scalar(&l_bytes), Err(GroupError::NonCanonicalScalar));
        assert_eq!(decode_scalar(&[0xff; 32]), Err(GroupError::NonCanonicalScalar));
        let one = Scalar::ONE;
        assert_eq!(decode_scalar(one.as_bytes()), Ok(one));
    }

    #[test]
    fn identity_point_round_trips() {
        let id = EdwardsPoint::default();
        assert_eq!(decode_point(&encode_point(&id)), Ok(id));
    }

    #[test]
    fn seeded_keygen_replays() {
        let a = KeyPair::generate(&mut ChaCha20Rng::seed_from_u64(9));
        let b = KeyPair::generate(&mut ChaCha20Rng::seed_from_u64(9));
        let c = KeyPair::generate(&mut ChaCha20Rng::seed_from_u64(10));
        assert_eq!(a, b);
        assert_ne!(a.secret(), c.secret());
        assert_eq!(*a.public(), mul_base(a.secret()));
        assert_eq!(KeyPair::from_secret(Scalar::ZERO), Err(GroupError::ZeroSecret));
    }

    #[test]
    fn hex_round_trip() {
        let k = KeyPair::generate(&mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(point_from_hex(&point_to_hex(k.public())), Ok(*k.public()));
        assert_eq!(scalar_from_hex(&scalar_to_hex(k.secret())), Ok(*k.secret()));
        assert!(matches!(point_from_hex("zz"), Err(GroupError::Hex(_))));
    }
}
