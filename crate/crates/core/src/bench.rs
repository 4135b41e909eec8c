//! Ballot timing and storage-cost measurements.

use std::time::Instant;

use rand::{CryptoRng, RngCore};
use serde::Serialize;

use crate::board::{BulletinBoard, CostRow, ElectionConfig, PayloadMode, PayloadStore};
use crate::escrow;
use crate::group::{self, KeyPair};
use crate::ring::{self, Ring};
use crate::stealth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingRow {
    pub ring_size: usize,
    /// Mean seconds to build and sign one ballot.
    pub sign_secs: f64,
    /// Mean seconds to verify one signed ballot.
    pub verify_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need two points for a fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Times ballot generation (stealth pair plus ring signature) and
/// verification for each ring size. `warmup` iterations per size are run and
/// discarded before `repetitions` timed ones.
pub fn time_ballots<R: RngCore + CryptoRng>(
    ring_sizes: &[usize],
    repetitions: usize,
    warmup: usize,
    rng: &mut R,
) -> Vec<TimingRow> {
    assert!(repetitions > 0);
    let election = KeyPair::generate(rng);
    let candidate = group::encode_candidate("bench").expect("nonempty");
    ring_sizes
        .iter()
        .map(|&n| {
            assert!(n >= 1, "ring size must be at least 1");
            let keys: Vec<KeyPair> = (0..n).map(|_| KeyPair::generate(rng)).collect();
            let ring = Ring::new(keys.iter().map(|k| *k.public()).collect()).expect("distinct keys");
            let mut sign_total = 0.0;
            let mut verify_total = 0.0;
            for i in 0..warmup + repetitions {
                let signer = i % n;
                let t0 = Instant::now();
                let ballot = stealth::make_ballot(election.public(), &candidate, rng);
                let signed = stealth::cast(ballot, &ring, signer, &keys[signer], rng).expect("honest signer");
                let t1 = Instant::now();
                let ok = ring::verify(&signed.ballot.to_bytes(), &ring, &signed.signature).expect("sized");
                let t2 = Instant::now();
                assert!(ok, "honest signature failed to verify");
                if i >= warmup {
                    sign_total += (t1 - t0).as_secs_f64();
                    verify_total += (t2 - t1).as_secs_f64();
                }
            }
            TimingRow {
                ring_size: n,
                sign_secs: sign_total / repetitions as f64,
                verify_secs: verify_total / repetitions as f64,
            }
        })
        .collect()
}

/// Storage per ballot for every (mode, ring size): one small election per
/// mode over a roster of `roster_size` keys, one ballot per ring size.
pub fn storage_costs<R: RngCore + CryptoRng>(
    ring_sizes: &[usize],
    modes: &[PayloadMode],
    roster_size: usize,
    rng: &mut R,
) -> Vec<CostRow> {
    let max = ring_sizes.iter().copied().max().unwrap_or(1);
    let roster_size = roster_size.max(max);
    let voters: Vec<KeyPair> = (0..roster_size).map(|_| KeyPair::generate(rng)).collect();
    let roster: Vec<_> = voters.iter().map(|k| *k.public()).collect();
    let manager_secret = group::random_nonzero_scalar(rng);

    let mut rows = Vec::new();
    for &mode in modes {
        let mut config = ElectionConfig::new(
            "cost",
            vec!["yes".into(), "no".into()],
            roster.clone(),
            vec!["m".into()],
        );
        config.min_ring_size = 1;
        config.payload_mode = mode;
        let mut board = BulletinBoard::open(&config, "admin").expect("valid config");
        let commitment = escrow::commit_share("cost", "m", &manager_secret).expect("nonzero");
        board.commit_manager(&commitment, "m").expect("commit");
        board
            .publish_product("m", &escrow::extend_product(&group::basepoint(), &manager_secret), "m")
            .expect("product");
        board.advance_phase("admin").expect("to voting");
        let pubkey = board.election_pubkey().expect("escrow complete");
        let yes = group::encode_candidate("yes").expect("nonempty");

        let mut store = PayloadStore::new();
        for (i, &n) in ring_sizes.iter().enumerate() {
            let ring = Ring::new(roster[..n].to_vec()).expect("distinct");
            let ballot = stealth::make_ballot(&pubkey, &yes, rng);
            let signed = stealth::cast(ballot, &ring, 0, &voters[0], rng)
                .expect("honest")
                .into_roster_subset(&roster)
                .expect("ring drawn from roster");
            // Fixed-width submitter ids keep entry framing identical across rows.
            let submitter = format!("submitter-{i:08}");
            board
                .submit_ballot(&mut store, &signed, &submitter)
                .expect("voting open");
        }
        rows.extend(board.ledger_bytes_per_ballot(&store));
    }
    rows
}
