//! Native sponge vs. the straight-line bigint oracle, plus frozen vectors.

mod common;

use common::oracle;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use zkace_core::field::FieldElement;
use zkace_core::hash::{self, DomainTag};

// Computed with the oracle in tests/common/oracle.rs.
const HASH_3_7_11_COMMITMENT: &str = "1a4f4a07f9c3566ef353b790b504654afba7c0c2922e31b9427e9263365c1005";
const TX_HASH_0_TO_99: &str = "0c2d93e0f7b6c8b012c29dfa1be4577d8e04bb5ce6430ecabbbfc0f185f90ac3";

fn to_big(fe: &FieldElement) -> BigUint {
    oracle::from_hex(&fe.to_hex())
}

#[test]
fn frozen_vectors() {
    let input = [3u64, 7, 11].map(FieldElement::from_u64);
    assert_eq!(hash::hash(&input, DomainTag::Commitment).unwrap().to_hex(), HASH_3_7_11_COMMITMENT);
    let payload: Vec<u8> = (0..100u8).collect();
    assert_eq!(hash::tx_hash(&payload).unwrap().to_hex(), TX_HASH_0_TO_99);
}

#[test]
fn oracle_reproduces_frozen_vectors() {
    let t = oracle::load();
    let input: Vec<BigUint> = [3u64, 7, 11].iter().map(|&v| BigUint::from(v)).collect();
    assert_eq!(oracle::to_hex(&oracle::hash(&t, &input, oracle::TAG_COMMITMENT)), HASH_3_7_11_COMMITMENT);
}

#[test]
fn native_matches_oracle_on_random_inputs() {
    let t = oracle::load();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let tags = [
        (DomainTag::Commitment, oracle::TAG_COMMITMENT),
        (DomainTag::DeriveInner, oracle::TAG_DERIVE_INNER),
        (DomainTag::DeriveOuter, oracle::TAG_DERIVE_OUTER),
        (DomainTag::Auth, oracle::TAG_AUTH),
        (DomainTag::Replay, oracle::TAG_REPLAY),
        (DomainTag::Tx, oracle::TAG_TX),
        (DomainTag::Domain, oracle::TAG_DOMAIN),
    ];
    for i in 0..1_000 {
        let arity = 1 + i % 7;
        let inputs: Vec<FieldElement> = (0..arity).map(|_| FieldElement::random(&mut rng)).collect();
        let (tag, raw_tag) = tags[rng.gen_range(0..tags.len())];
        let native = hash::hash(&inputs, tag).unwrap();
        let big: Vec<BigUint> = inputs.iter().map(to_big).collect();
        assert_eq!(to_big(&native), oracle::hash(&t, &big, raw_tag), "arity {arity}");
    }
}

#[test]
fn packing_matches_oracle() {
    let t = oracle::load();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for len in [0usize, 1, 30, 31, 32, 61, 62, 63, 200] {
        let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let packed: Vec<BigUint> = hash::pack_bytes(&payload).unwrap().iter().map(to_big).collect();
        assert_eq!(packed, oracle::pack(&payload));
        let native = hash::tx_hash(&payload).unwrap();
        assert_eq!(to_big(&native), oracle::hash(&t, &oracle::pack(&payload), oracle::TAG_TX));
    }
}
