//! Registered parties, honest transaction pools and adversarial mixes for
//! chain-level tests.

#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use zkace_core::backend::{self, BackendId, ProvingKey, VerifyingKey};
use zkace_core::chain::{ChainConfig, ChainState, SubmittedTx};
use zkace_core::circuit::{identity_commitment_with, make_statement_with, ReplayMode, StatementRequest};
use zkace_core::didp::{DerivationContext, RootEntropy};
use zkace_core::field::FieldElement;
use zkace_core::hash::HashParams;
use zkace_core::profile::Profile;

pub struct Party {
    pub rev: RootEntropy,
    pub salt: FieldElement,
}

pub struct World {
    pub params: Arc<HashParams>,
    pub mode: ReplayMode,
    pub domain: FieldElement,
    pub pk: ProvingKey,
    pub vk: VerifyingKey,
    pub parties: Vec<Party>,
}

impl World {
    pub fn new(backend_id: BackendId, mode: ReplayMode, parties: usize, seed: u64) -> World {
        let params = HashParams::reference();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut key_seed = [0u8; 32];
        rng.fill_bytes(&mut key_seed);
        let (pk, vk) = backend::setup(backend_id, params.clone(), mode, &key_seed).unwrap();
        let domain = FieldElement::random(&mut rng);
        let parties = (0..parties)
            .map(|_| Party { rev: RootEntropy::generate(&mut rng), salt: FieldElement::random(&mut rng) })
            .collect();
        World { params, mode, domain, pk, vk, parties }
    }

    pub fn id_com(&self, i: usize) -> FieldElement {
        let p = &self.parties[i];
        identity_commitment_with(&self.params, p.rev.to_field(), p.salt, self.domain)
    }

    /// Fresh chain with every party registered.
    pub fn chain(&self) -> ChainState {
        let mut chain =
            ChainState::new(ChainConfig::new(self.domain, Profile::Test), self.vk.clone(), self.params.clone()).unwrap();
        for i in 0..self.parties.len() {
            chain.register_identity(self.id_com(i)).unwrap();
        }
        chain
    }

    pub fn honest<R: Rng>(&self, party: usize, nonce: u64, payload: &[u8], rng: &mut R) -> SubmittedTx {
        let p = &self.parties[party];
        let (w, public) = make_statement_with(
            &self.params,
            &StatementRequest {
                rev: &p.rev,
                salt: p.salt,
                ctx: DerivationContext::new(1, self.domain, 0),
                nonce: FieldElement::from_u64(nonce),
                tx_payload: payload,
                domain: self.domain,
                mode: self.mode,
            },
        )
        .unwrap();
        let mut crng = ChaCha20Rng::seed_from_u64(rng.gen());
        let proof = self.pk.prove(&w, &public, &mut crng).unwrap();
        SubmittedTx { payload: payload.to_vec(), proof, public }
    }

    /// `nonces` consecutive honest transactions per party, party-major.
    pub fn pool<R: Rng>(&self, nonces: u64, rng: &mut R) -> Vec<SubmittedTx> {
        let mut out = Vec::new();
        for party in 0..self.parties.len() {
            for nonce in 0..nonces {
                let payload = random_payload(rng);
                out.push(self.honest(party, nonce, &payload, rng));
            }
        }
        out
    }
}

pub fn random_payload<R: Rng>(rng: &mut R) -> Vec<u8> {
    let len = rng.gen_range(1..80);
    (0..len).map(|_| rng.gen()).collect()
}

/// Draws `len` transactions from `pool`, mutating a share of them:
/// duplicates, reordering, payload swaps, unregistered identities, foreign
/// domains, tampered public inputs, proof transplants and garbage proofs.
pub fn adversarial_mix<R: Rng>(pool: &[SubmittedTx], len: usize, rng: &mut R) -> Vec<SubmittedTx> {
    (0..len)
        .map(|_| {
            let mut tx = pool.choose(rng).unwrap().clone();
            match rng.gen_range(0..12) {
                0 => tx.payload = random_payload(rng),
                1 => tx.public.id_com = FieldElement::random(rng),
                2 => tx.public.domain = FieldElement::random(rng),
                3 => tx.public.target = FieldElement::random(rng),
                4 => tx.public.rp_com = FieldElement::random(rng),
                5 => tx.proof = pool.choose(rng).unwrap().proof.clone(),
                6 => {
                    let n = tx.proof.bytes.len();
                    tx.proof.bytes = (0..n).map(|_| rng.gen()).collect();
                }
                7 => {
                    let i = rng.gen_range(0..tx.proof.bytes.len());
                    tx.proof.bytes[i] ^= 1 << rng.gen_range(0..8);
                }
                _ => {}
            }
            tx
        })
        .collect()
}
