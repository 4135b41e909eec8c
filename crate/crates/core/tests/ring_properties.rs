use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use ringvote::group::{self, KeyPair, Scalar};
use ringvote::ring::{self, Ring, RingSignature};

fn setup(seed: u64, n: usize) -> (ChaCha20Rng, Vec<KeyPair>, Ring) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys: Vec<KeyPair> = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
    let ring = Ring::new(keys.iter().map(|k| *k.public()).collect()).unwrap();
    (rng, keys, ring)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_then_verify(seed in any::<u64>(), n in 1usize..=16, msg in proptest::collection::vec(any::<u8>(), 0..64), idx in any::<prop::sample::Index>()) {
        let (mut rng, keys, ring) = setup(seed, n);
        let s = idx.index(n);
        let sig = ring::sign(&msg, &ring, s, &keys[s], &mut rng).unwrap();
        prop_assert!(ring::verify(&msg, &ring, &sig).unwrap());
        prop_assert_eq!(sig.key_image, ring::key_image(&keys[s]));
        prop_assert_eq!(RingSignature::from_bytes(&sig.to_bytes()).unwrap(), sig);
    }

    #[test]
    fn key_image_ignores_ring_and_message(seed in any::<u64>(), n1 in 1usize..6, n2 in 1usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let me = KeyPair::generate(&mut rng);
        let mut r1: Vec<_> = (1..n1).map(|_| *KeyPair::generate(&mut rng).public()).collect();
        r1.push(*me.public());
        let mut r2 = vec![*me.public()];
        r2.extend((1..n2).map(|_| *KeyPair::generate(&mut rng).public()));
        let ring1 = Ring::new(r1).unwrap();
        let ring2 = Ring::new(r2).unwrap();
        let a = ring::sign(b"one", &ring1, n1 - 1, &me, &mut rng).unwrap();
        let b = ring::sign(b"two", &ring2, 0, &me, &mut rng).unwrap();
        prop_assert_eq!(a.key_image, b.key_image);
        prop_assert_eq!(a.key_image, me.secret() * group::hash_to_point(&group::encode_point(me.public())));
    }
}

#[test]
fn different_signers_same_ring_are_indistinguishable_in_size() {
    let (mut rng, keys, ring) = setup(21, 7);
    let sigs: Vec<_> = (0..7)
        .map(|i| ring::sign(b"vote", &ring, i, &keys[i], &mut rng).unwrap())
        .collect();
    for s in &sigs {
        assert!(ring::verify(b"vote", &ring, s).unwrap());
        assert_eq!(s.to_bytes().len(), sigs[0].to_bytes().len());
    }
    let images: std::collections::HashSet<_> = sigs.iter().map(|s| group::encode_point(&s.key_image)).collect();
    assert_eq!(images.len(), 7);
}

#[test]
fn perturbing_any_single_field_fails() {
    let (mut rng, keys, ring) = setup(22, 5);
    let sig = ring::sign(b"ballot", &ring, 3, &keys[3], &mut rng).unwrap();
    for i in 0..5 {
        let mut s = sig.clone();
        s.c[i] += Scalar::ONE;
        assert!(!ring::verify(b"ballot", &ring, &s).unwrap(), "c[{i}]");
        let mut s = sig.clone();
        s.r[i] += Scalar::ONE;
        assert!(!ring::verify(b"ballot", &ring, &s).unwrap(), "r[{i}]");
    }
    let mut s = sig.clone();
    s.key_image = ring::key_image(&keys[0]);
    assert!(!ring::verify(b"ballot", &ring, &s).unwrap());
}

#[test]
fn signature_does_not_transfer_to_another_ring() {
    let (mut rng, keys, ring) = setup(23, 4);
    let sig = ring::sign(b"m", &ring, 0, &keys[0], &mut rng).unwrap();
    let mut members = ring.members().to_vec();
    members[3] = *KeyPair::generate(&mut rng).public();
    let other = Ring::new(members).unwrap();
    assert!(!ring::verify(b"m", &other, &sig).unwrap());
}

#[test]
fn encoded_len_matches_documented_formula() {
    for n in [1usize, 2, 8, 32] {
        assert_eq!(RingSignature::encoded_len(n), 32 + 4 + 2 * 32 * n);
    }
}
