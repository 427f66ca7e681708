//! The ZK-friendly sponge hash used both natively and inside the circuit.
//!
//! Sponge layout: width 3, rate 2, capacity 1. The capacity lane is
//! initialised to `tag * 2^64 + len`, where `tag` identifies the call site
//! and `len` is the number of absorbed elements. Inputs are absorbed two at a
//! time by field addition into lanes 1 and 2 (the final block zero-padded),
//! with one permutation per block. The digest is lane 1 after the last
//! permutation.

pub mod params;

use ark_bn254::Fr;
use ark_ff::{Field, Zero};
use thiserror::Error;

use crate::field::FieldElement;
pub use params::{HashParams, ParamsError};

/// Call-site separation tags absorbed into the capacity lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum DomainTag {
    /// Identity commitment over `(rev, salt, domain)`.
    Commitment = 1,
    /// Circuit-native key derivation over `(rev, alg_id, ctx_domain, index)`.
    DeriveInner = 2,
    /// Target commitment over the derived key.
    DeriveOuter = 3,
    /// Authorization token.
    Auth = 4,
    /// Replay-prevention commitment (nonce commitment or nullifier).
    Replay = 5,
    /// Transaction payload hashing.
    Tx = 6,
    /// Domain descriptor hashing.
    Domain = 7,
}

impl DomainTag {
    pub fn capacity_iv(self, len: usize) -> Fr {
        let shift = Fr::from(1u128 << 64);
        Fr::from(self as u64) * shift + Fr::from(len as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HashError {
    #[error("hash input must not be empty")]
    EmptyInput,
    #[error("payload of {0} bytes exceeds the 2^32 - 1 byte limit")]
    PayloadTooLong(usize),
}

/// A single squeezed field element.
pub type Digest = FieldElement;

/// Applies the permutation in place.
pub fn permute(params: &HashParams, state: &mut [Fr; 3]) {
    let half = params.full_rounds / 2;
    let partial_end = half + params.partial_rounds;
    for (round, rc) in params.round_constants.iter().enumerate() {
        for (lane, c) in state.iter_mut().zip(rc) {
            *lane += c;
        }
        if round < half || round >= partial_end {
            for lane in state.iter_mut() {
                *lane = sbox(*lane, params.alpha);
            }
        } else {
            state[0] = sbox(state[0], params.alpha);
        }
        *state = mix(&params.mds, state);
    }
}

fn sbox(x: Fr, alpha: u64) -> Fr {
    x.pow([alpha])
}

fn mix(mds: &[[Fr; 3]; 3], state: &[Fr; 3]) -> [Fr; 3] {
    let mut out = [Fr::zero(); 3];
    for (o, row) in out.iter_mut().zip(mds) {
        *o = row[0] * state[0] + row[1] * state[1] + row[2] * state[2];
    }
    out
}

/// Hashes a non-empty sequence of field elements under `tag`.
pub fn hash_with(params: &HashParams, inputs: &[FieldElement], tag: DomainTag) -> Result<Digest, HashError> {
    if inputs.is_empty() {
        return Err(HashError::EmptyInput);
    }
    let mut state = [tag.capacity_iv(inputs.len()), Fr::zero(), Fr::zero()];
    for block in inputs.chunks(params.rate) {
        for (lane, x) in state[1..].iter_mut().zip(block) {
            *lane += x.to_fr();
        }
        permute(params, &mut state);
    }
    Ok(FieldElement::from_fr(state[1]))
}

/// [`hash_with`] under the reference parameters.
pub fn hash(inputs: &[FieldElement], tag: DomainTag) -> Result<Digest, HashError> {
    hash_with(&HashParams::reference(), inputs, tag)
}

pub const CHUNK_BYTES: usize = 31;

/// Packs bytes into field elements: a length prefix followed by 31-byte
/// little-endian chunks (each below 2^248).
pub fn pack_bytes(payload: &[u8]) -> Result<Vec<FieldElement>, HashError> {
    if payload.len() > u32::MAX as usize {
        return Err(HashError::PayloadTooLong(payload.len()));
    }
    let mut out = Vec::with_capacity(1 + payload.len().div_ceil(CHUNK_BYTES));
    out.push(FieldElement::from_u64(payload.len() as u64));
    out.extend(payload.chunks(CHUNK_BYTES).map(FieldElement::from_le_bytes_mod_order));
    Ok(out)
}

pub fn tx_hash_with(params: &HashParams, payload: &[u8]) -> Result<FieldElement, HashError> {
    hash_with(params, &pack_bytes(payload)?, DomainTag::Tx)
}

/// Hash of a transaction payload, as bound into the public inputs.
pub fn tx_hash(payload: &[u8]) -> Result<FieldElement, HashError> {
    tx_hash_with(&HashParams::reference(), payload)
}

/// Maps a chain/application descriptor (e.g. `"chain-1/payments"`) to a
/// domain field element.
pub fn domain_from_descriptor_with(params: &HashParams, descriptor: &[u8]) -> Result<FieldElement, HashError> {
    hash_with(params, &pack_bytes(descriptor)?, DomainTag::Domain)
}

pub fn domain_from_descriptor(descriptor: &[u8]) -> Result<FieldElement, HashError> {
    domain_from_descriptor_with(&HashParams::reference(), descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(hash(&[], DomainTag::Commitment), Err(HashError::EmptyInput));
    }

    #[test]
    fn distinct_inputs_and_tags() {
        let a = hash(&[fe(1)], DomainTag::Commitment).unwrap();
        assert_ne!(a, hash(&[fe(2)], DomainTag::Commitment).unwrap());
        assert_ne!(a, hash(&[fe(1)], DomainTag::Auth).unwrap());
    }

    #[test]
    fn arity_is_bound() {
        let (a, b) = (fe(5), fe(9));
        let two = hash(&[a, b], DomainTag::Auth).unwrap();
        assert_ne!(two, hash(&[a, b, FieldElement::zero()], DomainTag::Auth).unwrap());
        assert_ne!(hash(&[a], DomainTag::Auth).unwrap(), hash(&[a, FieldElement::zero()], DomainTag::Auth).unwrap());
    }

    #[test]
    fn determinism_over_many_random_inputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let tags = [
            DomainTag::Commitment,
            DomainTag::DeriveInner,
            DomainTag::DeriveOuter,
            DomainTag::Auth,
            DomainTag::Replay,
            DomainTag::Tx,
        ];
        for _ in 0..10_000 {
            let n = rng.gen_range(1..=7);
            let inputs: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
            let tag = tags[rng.gen_range(0..tags.len())];
            assert_eq!(hash(&inputs, tag).unwrap(), hash(&inputs, tag).unwrap());
        }
    }

    #[test]
    fn packing_rules() {
        assert_eq!(pack_bytes(&[]).unwrap(), vec![fe(0)]);
        let ff = pack_bytes(&[0xff; 31]).unwrap();
        let max248 = FieldElement::from_hex(&format!("00{}", "ff".repeat(31))).unwrap();
        assert_eq!(ff, vec![fe(31), max248]);

        let mut long = vec![7u8; 31];
        let short = pack_bytes(&long).unwrap();
        long.push(0);
        let longer = pack_bytes(&long).unwrap();
        assert_ne!(short, longer);
        assert_eq!(longer.len(), 3);
    }

    #[test]
    fn tx_hash_is_length_sensitive() {
        let b = b"transfer 10 to alice".to_vec();
        assert_eq!(tx_hash(&b).unwrap(), tx_hash(&b).unwrap());
        let mut b2 = b.clone();
        b2.push(0);
        assert_ne!(tx_hash(&b).unwrap(), tx_hash(&b2).unwrap());
        assert_ne!(tx_hash(&[]).unwrap(), tx_hash(&[0]).unwrap());
    }
}
