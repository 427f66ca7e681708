//! Adversarial games run against the real backend and the chain pipeline.
//!
//! Each game plays a number of independent trials; every trial builds its
//! own chain state, runs the honest controls, and then tries a fixed set of
//! structural attacks. An attack "wins" if the verifier accepts a tuple that
//! meets the game's win condition. The adversary sees every accepted tuple
//! (passive transcript) but never a root entropy value it did not create.
//!
//! These are falsification campaigns, not proofs: they catch wiring
//! mistakes (unbound inputs, missing checks), not cryptanalytic breaks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::backend::{self, AuthorizationProof, BackendError, BackendId, ProvingKey, VerifyingKey};
use crate::chain::{ChainConfig, ChainState, SubmittedTx};
use crate::circuit::{
    identity_commitment_with, make_statement_with, nonce_commitment_with, AuthorizationWitness, PublicInputs,
    ReplayMode, StatementRequest,
};
use crate::didp::{DerivationContext, RootEntropy};
use crate::field::FieldElement;
use crate::hash::{self, HashParams};
use crate::profile::Profile;

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Game {
    Auth,
    Replay,
    Subst,
    Domain,
}

impl Game {
    pub const ALL: [Game; 4] = [Game::Auth, Game::Replay, Game::Subst, Game::Domain];
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Game::Auth => "auth",
            Game::Replay => "replay",
            Game::Subst => "subst",
            Game::Domain => "domain",
        })
    }
}

impl FromStr for Game {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auth" => Ok(Game::Auth),
            "replay" => Ok(Game::Replay),
            "subst" => Ok(Game::Subst),
            "domain" => Ok(Game::Domain),
            other => Err(format!("unknown game `{other}` (expected auth|replay|subst|domain)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Tally {
    pub attempts: usize,
    pub wins: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct StrategyResult {
    pub name: String,
    pub attempts: usize,
    pub wins: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GameResult {
    pub game: Game,
    pub mode: ReplayMode,
    pub trials: usize,
    pub adversary_wins: usize,
    pub strategies_exercised: Vec<String>,
    pub strategies: Vec<StrategyResult>,
    /// Honest submissions that must be accepted.
    pub controls: Tally,
}

impl GameResult {
    pub fn controls_ok(&self) -> bool {
        self.controls.wins == self.controls.attempts
    }

    pub fn passed(&self) -> bool {
        self.adversary_wins == 0 && self.controls_ok()
    }
}

/// Per-trial bookkeeping. Controls reuse [`Tally`] with `wins` = accepted.
#[derive(Default)]
struct Trial {
    strategies: BTreeMap<&'static str, Tally>,
    controls: Tally,
}

impl Trial {
    fn attack(&mut self, name: &'static str, won: bool) {
        let t = self.strategies.entry(name).or_default();
        t.attempts += 1;
        t.wins += won as usize;
    }

    fn control(&mut self, accepted: bool) {
        self.controls.attempts += 1;
        self.controls.wins += accepted as usize;
    }
}

/// One party: its secrets and the identity commitment registered on chain.
struct Party {
    rev: RootEntropy,
    salt: FieldElement,
    domain: FieldElement,
}

impl Party {
    fn random(rng: &mut ChaCha20Rng, domain: FieldElement) -> Self {
        Self { rev: RootEntropy::generate(rng), salt: FieldElement::random(rng), domain }
    }

    fn id_com(&self, params: &HashParams) -> FieldElement {
        identity_commitment_with(params, self.rev.to_field(), self.salt, self.domain)
    }
}

fn random_payload(rng: &mut ChaCha20Rng) -> Vec<u8> {
    let len = rng.gen_range(8..64);
    (0..len).map(|_| rng.gen()).collect()
}

/// Keys and parameters shared by all trials of one replay mode.
pub struct Harness {
    params: Arc<HashParams>,
    mode: ReplayMode,
    pk: ProvingKey,
    vk: VerifyingKey,
    mock_pk: ProvingKey,
}

impl Harness {
    pub fn new(params: Arc<HashParams>, mode: ReplayMode, seed: [u8; 32]) -> Result<Self, BackendError> {
        let (pk, vk) = backend::setup(BackendId::Real, params.clone(), mode, &seed)?;
        let (mock_pk, _) = backend::setup(BackendId::Mock, params.clone(), mode, &seed)?;
        Ok(Self { params, mode, pk, vk, mock_pk })
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn run(&self, game: Game, trials: usize, seed: u64) -> GameResult {
        let per_trial: Vec<Trial> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((game as u64) << 56) ^ i as u64);
                match game {
                    Game::Auth => self.auth_trial(&mut rng),
                    Game::Replay => self.replay_trial(&mut rng),
                    Game::Subst => self.subst_trial(&mut rng),
                    Game::Domain => self.domain_trial(&mut rng),
                }
            })
            .collect();
        let mut strategies: BTreeMap<&'static str, Tally> = BTreeMap::new();
        let mut controls = Tally::default();
        for t in per_trial {
            for (name, tally) in t.strategies {
                let acc = strategies.entry(name).or_default();
                acc.attempts += tally.attempts;
                acc.wins += tally.wins;
            }
            controls.attempts += t.controls.attempts;
            controls.wins += t.controls.wins;
        }
        let strategies: Vec<StrategyResult> = strategies
            .into_iter()
            .map(|(name, t)| StrategyResult { name: name.to_string(), attempts: t.attempts, wins: t.wins })
            .collect();
        GameResult {
            game,
            mode: self.mode,
            trials,
            adversary_wins: strategies.iter().map(|s| s.wins).sum(),
            strategies_exercised: strategies.iter().map(|s| s.name.clone()).collect(),
            strategies,
            controls,
        }
    }

    fn chain(&self, domain: FieldElement) -> ChainState {
        ChainState::new(ChainConfig::new(domain, Profile::Test), self.vk.clone(), self.params.clone())
            .expect("real backend is valid in every profile")
    }

    fn statement(
        &self,
        party: &Party,
        ctx_domain: FieldElement,
        nonce: u64,
        payload: &[u8],
    ) -> (AuthorizationWitness, PublicInputs) {
        make_statement_with(
            &self.params,
            &StatementRequest {
                rev: &party.rev,
                salt: party.salt,
                ctx: DerivationContext::new(1, ctx_domain, 0),
                nonce: FieldElement::from_u64(nonce),
                tx_payload: payload,
                domain: party.domain,
                mode: self.mode,
            },
        )
        .expect("payload within bounds")
    }

    fn honest_tx(&self, rng: &mut ChaCha20Rng, party: &Party, nonce: u64, payload: &[u8]) -> SubmittedTx {
        let (w, p) = self.statement(party, party.domain, nonce, payload);
        let proof = self.pk.prove(&w, &p, rng).expect("honest statement proves");
        SubmittedTx { payload: payload.to_vec(), proof, public: p }
    }

    fn honest_fresh(&self, rng: &mut ChaCha20Rng, party: &Party, nonce: u64) -> SubmittedTx {
        let payload = random_payload(rng);
        self.honest_tx(rng, party, nonce, &payload)
    }

    /// An attack wins if the chain accepts it, or if the bare proof check
    /// accepts it (catches bindings the pipeline's earlier steps would mask).
    fn attempt(&self, chain: &mut ChainState, tx: &SubmittedTx) -> bool {
        let proof_ok = self.vk.accepts(&tx.proof, &tx.public);
        chain.process_tx(tx).is_ok() || proof_ok
    }

    fn replay_rp_com(&self, id_com: FieldElement, nonce: u64) -> FieldElement {
        nonce_commitment_with(&self.params, id_com, FieldElement::from_u64(nonce))
    }

    fn auth_trial(&self, rng: &mut ChaCha20Rng) -> Trial {
        let mut t = Trial::default();
        let domain = FieldElement::random(rng);
        let mut chain = self.chain(domain);
        let victim = Party::random(rng, domain);
        let other = Party::random(rng, domain);
        let victim_id = victim.id_com(&self.params);
        chain.register_identity(victim_id).unwrap();
        chain.register_identity(other.id_com(&self.params)).unwrap();

        // Transcript: one accepted tuple from each party.
        let v_tx = self.honest_fresh(rng, &victim, 0);
        let o_tx = self.honest_fresh(rng, &other, 0);
        t.control(chain.process_tx(&v_tx).is_ok());
        t.control(chain.process_tx(&o_tx).is_ok());
        let transcript = [v_tx, o_tx];

        // A fresh payload the victim never authorized, with public inputs
        // that would pass every non-proof check.
        let payload = random_payload(rng);
        let tx_hash = hash::tx_hash_with(&self.params, &payload).unwrap();
        let rp_com = match self.mode {
            ReplayMode::NonceRegistry => self.replay_rp_com(victim_id, 1),
            ReplayMode::NullifierSet => FieldElement::random(rng),
        };
        let forged_pub = PublicInputs { id_com: victim_id, tx_hash, domain, target: transcript[0].public.target, rp_com };

        let mut blob = vec![0u8; 192];
        rng.fill_bytes(&mut blob);
        let random_bytes = SubmittedTx {
            payload: payload.clone(),
            proof: AuthorizationProof { backend: BackendId::Real, circuit_id: self.vk.circuit_id(), bytes: blob },
            public: forged_pub,
        };
        t.attack("random_proof_bytes", self.attempt(&mut chain, &random_bytes));

        let mut short = vec![0u8; 128];
        rng.fill_bytes(&mut short);
        let random_short = SubmittedTx {
            proof: AuthorizationProof { backend: BackendId::Real, circuit_id: self.vk.circuit_id(), bytes: short },
            ..random_bytes.clone()
        };
        t.attack("random_proof_bytes", self.attempt(&mut chain, &random_short));

        // The other party's valid proof, re-targeted at the victim.
        let mut retarget = transcript[1].clone();
        retarget.public.id_com = victim_id;
        retarget.public.target = transcript[0].public.target;
        t.attack("other_identity_proof_retargeted", self.attempt(&mut chain, &retarget));

        // A statement about the victim built from a guessed root entropy.
        let guess = Party { rev: RootEntropy::generate(rng), salt: FieldElement::random(rng), domain };
        let (w, mut p) = self.statement(&guess, domain, 1, &payload);
        p.id_com = victim_id;
        p.target = transcript[0].public.target;
        if self.mode == ReplayMode::NonceRegistry {
            p.rp_com = self.replay_rp_com(victim_id, 1);
        }
        let proof = self.pk.prove_unchecked(&w, &p, rng).expect("prover runs");
        let random_rev = SubmittedTx { payload: payload.clone(), proof, public: p };
        t.attack("random_rev_witness", self.attempt(&mut chain, &random_rev));

        // Mock-backend proof for the forged statement, as labelled and relabelled.
        let mock = self.mock_pk.prove_unchecked(&w, &forged_pub, rng).expect("mock prover runs");
        let mut mock_tx = SubmittedTx { payload: payload.clone(), proof: mock, public: forged_pub };
        t.attack("mock_backend_proof", self.attempt(&mut chain, &mock_tx));
        mock_tx.proof.backend = BackendId::Real;
        t.attack("mock_backend_proof", self.attempt(&mut chain, &mock_tx));
        t
    }

    fn replay_trial(&self, rng: &mut ChaCha20Rng) -> Trial {
        let mut t = Trial::default();
        let domain = FieldElement::random(rng);
        let mut chain = self.chain(domain);
        let party = Party::random(rng, domain);
        chain.register_identity(party.id_com(&self.params)).unwrap();

        let payload = random_payload(rng);
        let first = self.honest_tx(rng, &party, 0, &payload);
        t.control(chain.process_tx(&first).is_ok());

        t.attack("direct_replay", self.attempt_chain_only(&mut chain, &first));
        t.attack("direct_replay_in_batch", chain.process_batch(std::slice::from_ref(&first))[0].is_ok());

        match self.mode {
            ReplayMode::NonceRegistry => {
                let stale = self.honest_fresh(rng, &party, 0);
                t.attack("stale_nonce_fresh_proof", self.attempt_chain_only(&mut chain, &stale));
            }
            ReplayMode::NullifierSet => {
                let again = self.honest_tx(rng, &party, 0, &payload);
                debug_assert_ne!(again.proof.bytes, first.proof.bytes);
                t.attack("same_auth_reproved", self.attempt_chain_only(&mut chain, &again));
            }
        }

        // A genuinely new authorization must still go through.
        let fresh = self.honest_fresh(rng, &party, 1);
        t.control(chain.process_tx(&fresh).is_ok());
        t
    }

    /// For resubmissions of genuine tuples the proof is valid by
    /// construction, so only the chain verdict counts.
    fn attempt_chain_only(&self, chain: &mut ChainState, tx: &SubmittedTx) -> bool {
        chain.process_tx(tx).is_ok()
    }

    fn subst_trial(&self, rng: &mut ChaCha20Rng) -> Trial {
        let mut t = Trial::default();
        let domain = FieldElement::random(rng);
        let mut chain = self.chain(domain);
        let party = Party::random(rng, domain);
        let bystander = Party::random(rng, domain);
        chain.register_identity(party.id_com(&self.params)).unwrap();
        let bystander_id = bystander.id_com(&self.params);
        chain.register_identity(bystander_id).unwrap();

        let honest = self.honest_fresh(rng, &party, 0);
        let other_payload = random_payload(rng);
        let other_tx_hash = hash::tx_hash_with(&self.params, &other_payload).unwrap();

        let mutate = |tx: &mut SubmittedTx, field: usize, rng: &mut ChaCha20Rng| match field {
            0 => tx.public.id_com = bystander_id,
            1 => {
                tx.payload = other_payload.clone();
                tx.public.tx_hash = other_tx_hash;
            }
            2 => tx.public.domain = FieldElement::random(rng),
            3 => tx.public.target = FieldElement::random(rng),
            _ => {
                tx.public.rp_com = match self.mode {
                    ReplayMode::NonceRegistry => self.replay_rp_com(tx.public.id_com, rng.gen_range(1..5)),
                    ReplayMode::NullifierSet => FieldElement::random(rng),
                }
            }
        };
        const SINGLE: [&str; 5] =
            ["mutate_id_com", "mutate_tx_hash", "mutate_domain", "mutate_target", "mutate_rp_com"];
        for (field, name) in SINGLE.iter().enumerate() {
            let mut tx = honest.clone();
            mutate(&mut tx, field, rng);
            t.attack(name, self.attempt(&mut chain, &tx));
        }
        let a = rng.gen_range(0..PublicInputs::COUNT);
        let b = (a + rng.gen_range(1..PublicInputs::COUNT)) % PublicInputs::COUNT;
        let mut tx = honest.clone();
        mutate(&mut tx, a, rng);
        mutate(&mut tx, b, rng);
        t.attack("mutate_two_fields", self.attempt(&mut chain, &tx));

        t.control(chain.process_tx(&honest).is_ok());
        t
    }

    fn domain_trial(&self, rng: &mut ChaCha20Rng) -> Trial {
        let mut t = Trial::default();
        let (d1, d2) = (FieldElement::random(rng), FieldElement::random(rng));
        let rev = RootEntropy::generate(rng);
        let on_d1 = Party { rev: rev.clone(), salt: FieldElement::random(rng), domain: d1 };
        let on_d2 = Party { rev, salt: FieldElement::random(rng), domain: d2 };
        let mut chain1 = self.chain(d1);
        let mut chain2 = self.chain(d2);
        chain1.register_identity(on_d1.id_com(&self.params)).unwrap();
        let id2 = on_d2.id_com(&self.params);
        chain2.register_identity(id2).unwrap();

        let tx1 = self.honest_fresh(rng, &on_d1, 0);
        t.control(chain1.process_tx(&tx1).is_ok());

        t.attack("raw_cross_domain_submit", self.attempt_chain_only(&mut chain2, &tx1));

        let mut rewritten = tx1.clone();
        rewritten.public.domain = d2;
        t.attack("rewrite_domain", self.attempt(&mut chain2, &rewritten));
        rewritten.public.id_com = id2;
        if self.mode == ReplayMode::NonceRegistry {
            rewritten.public.rp_com = self.replay_rp_com(id2, 0);
        }
        t.attack("rewrite_domain_and_identity", self.attempt(&mut chain2, &rewritten));

        let tx2 = self.honest_tx(rng, &on_d2, 0, &tx1.payload);
        t.control(chain2.process_tx(&tx2).is_ok());
        t
    }
}

/// Runs `games` for each mode in `modes`, with one key setup per mode.
pub fn run_games(
    params: Arc<HashParams>,
    games: &[Game],
    modes: &[ReplayMode],
    trials: usize,
    seed: u64,
) -> Result<Vec<GameResult>, BackendError> {
    let mut out = Vec::new();
    for &mode in modes {
        let mut key_seed = [0u8; 32];
        key_seed[..8].copy_from_slice(&seed.to_le_bytes());
        key_seed[8] = mode.id_byte();
        let harness = Harness::new(params.clone(), mode, key_seed)?;
        for &game in games {
            out.push(harness.run(game, trials, seed));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_campaign_has_no_wins() {
        for mode in ReplayMode::ALL {
            let harness = Harness::new(HashParams::reference(), mode, [5; 32]).unwrap();
            for game in Game::ALL {
                let r = harness.run(game, 2, 11);
                assert!(r.passed(), "{game}/{mode}: {r:?}");
                assert!(r.strategies.iter().all(|s| s.attempts >= 2));
            }
        }
    }

    #[test]
    fn strategy_names_per_mode() {
        let h = Harness::new(HashParams::reference(), ReplayMode::NullifierSet, [6; 32]).unwrap();
        let r = h.run(Game::Replay, 1, 0);
        assert_eq!(r.strategies_exercised, ["direct_replay", "direct_replay_in_batch", "same_auth_reproved"]);
        assert_eq!(r.controls, Tally { attempts: 2, wins: 2 });
    }

    #[test]
    fn game_names_parse() {
        for g in Game::ALL {
            assert_eq!(g.to_string().parse::<Game>().unwrap(), g);
        }
    }
}
