//! Verifier-side state machine: identity registry, replay state and the
//! ordered transaction checks.
//!
//! A submitted transaction passes, in order:
//!
//! 6. context binding: `tx_hash(payload) == pub.tx_hash`
//! 7. public-input validation: `id_com` registered, `domain` expected
//!    (`target` is only checked for field membership, which parsing enforces)
//! 8. proof verification
//! 9. replay predicate (expected nonce commitment, or unseen nullifier)
//! 10. state update
//!
//! The first failing step rejects and nothing is mutated.
//!
//! State file: one JSON header line `{"format_version", "checksum"}`, then
//! the JSON body. The checksum is SHA-256 over the body bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::backend::{AuthorizationProof, BackendError, BackendId, ProofBundle, Rejection, VerifyingKey};
use crate::circuit::{nonce_commitment_with, PublicInputs, ReplayMode};
use crate::field::FieldElement;
use crate::hash::{self, HashParams};
use crate::profile::Profile;

pub const STATE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("identity {0} is already registered")]
    DuplicateIdentity(FieldElement),
    #[error("the mock backend is not allowed under the production profile")]
    MockInProduction,
    #[error("verifying key is for {key} mode but the chain runs {chain} mode")]
    ModeMismatch { chain: ReplayMode, key: ReplayMode },
    #[error("state file checksum mismatch")]
    Checksum,
    #[error("unsupported state format version {0}")]
    UnsupportedVersion(u32),
    #[error("state was written with different hash parameters")]
    ParamsMismatch,
    #[error("malformed state file: {0}")]
    Malformed(String),
    #[error("nonce window must be at least 1")]
    BadNonceWindow,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// The first check a rejected transaction failed.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    #[error("payload does not hash to the declared tx_hash")]
    ContextBinding,
    #[error("identity commitment is not registered")]
    UnknownIdentity,
    #[error("domain does not match this chain")]
    DomainMismatch,
    #[error("proof rejected: {detail}")]
    InvalidProof { detail: String },
    #[error("replay: {detail}")]
    Replay { detail: String },
}

impl RejectReason {
    /// Pipeline step number of the failed check.
    pub fn step(&self) -> u8 {
        match self {
            RejectReason::ContextBinding => 6,
            RejectReason::UnknownIdentity | RejectReason::DomainMismatch => 7,
            RejectReason::InvalidProof { .. } => 8,
            RejectReason::Replay { .. } => 9,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::ContextBinding => "context_binding",
            RejectReason::UnknownIdentity => "unknown_identity",
            RejectReason::DomainMismatch => "domain_mismatch",
            RejectReason::InvalidProof { .. } => "invalid_proof",
            RejectReason::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Accepted {
    /// Chain height after this transaction.
    pub height: u64,
}

pub type TxOutcome = Result<Accepted, RejectReason>;

/// A transaction as received: raw payload plus its proof and public inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmittedTx {
    pub payload: Vec<u8>,
    pub proof: AuthorizationProof,
    pub public: PublicInputs,
}

impl SubmittedTx {
    pub fn from_bundle(bundle: &ProofBundle) -> Result<Self, BackendError> {
        let payload = bundle.payload()?.ok_or(BackendError::Malformed {
            what: "proof bundle",
            msg: "missing payload_hex".into(),
        })?;
        Ok(Self { payload, proof: bundle.proof()?, public: bundle.public_inputs() })
    }
}

/// Per-identity next expected nonce, starting at 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonceRegistry {
    counters: BTreeMap<FieldElement, u64>,
}

impl NonceRegistry {
    pub fn next_expected(&self, id_com: &FieldElement) -> u64 {
        self.counters.get(id_com).copied().unwrap_or(0)
    }

    fn advance_to(&mut self, id_com: FieldElement, next: u64) {
        self.counters.insert(id_com, next);
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }
}

/// Append-only set of spent nullifiers, kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct NullifierSet {
    order: Vec<FieldElement>,
    index: HashSet<FieldElement>,
}

impl NullifierSet {
    pub fn contains(&self, n: &FieldElement) -> bool {
        self.index.contains(n)
    }

    /// Returns false if `n` was already present.
    pub fn insert(&mut self, n: FieldElement) -> bool {
        if !self.index.insert(n) {
            return false;
        }
        self.order.push(n);
        true
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FieldElement> {
        self.order.iter()
    }
}

impl PartialEq for NullifierSet {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for NullifierSet {}

impl FromIterator<FieldElement> for NullifierSet {
    fn from_iter<I: IntoIterator<Item = FieldElement>>(iter: I) -> Self {
        let mut s = NullifierSet::default();
        for n in iter {
            s.insert(n);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayState {
    Nonce(NonceRegistry),
    Nullifier(NullifierSet),
}

impl ReplayState {
    pub fn new(mode: ReplayMode) -> Self {
        match mode {
            ReplayMode::NonceRegistry => ReplayState::Nonce(NonceRegistry::default()),
            ReplayMode::NullifierSet => ReplayState::Nullifier(NullifierSet::default()),
        }
    }

    pub fn mode(&self) -> ReplayMode {
        match self {
            ReplayState::Nonce(_) => ReplayMode::NonceRegistry,
            ReplayState::Nullifier(_) => ReplayMode::NullifierSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ChainConfig {
    pub expected_domain: FieldElement,
    pub profile: Profile,
    /// How many nonces ahead of the expected one are accepted. 1 means the
    /// nonce must equal the expected next value.
    pub nonce_window: u64,
}

impl ChainConfig {
    pub fn new(expected_domain: FieldElement, profile: Profile) -> Self {
        Self { expected_domain, profile, nonce_window: 1 }
    }
}

#[derive(Clone)]
pub struct ChainState {
    config: ChainConfig,
    params: Arc<HashParams>,
    vk: VerifyingKey,
    registered: BTreeSet<FieldElement>,
    replay: ReplayState,
    height: u64,
}

impl fmt::Debug for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainState")
            .field("config", &self.config)
            .field("mode", &self.mode())
            .field("identities", &self.registered.len())
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl PartialEq for ChainState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.params.digest() == other.params.digest()
            && self.vk.to_bytes() == other.vk.to_bytes()
            && self.registered == other.registered
            && self.replay == other.replay
            && self.height == other.height
    }
}

/// Summary for `chain status`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ChainStatus {
    pub mode: ReplayMode,
    pub profile: Profile,
    pub backend: BackendId,
    pub circuit_id: String,
    pub expected_domain: FieldElement,
    pub height: u64,
    pub identities: usize,
    pub nullifiers: usize,
    pub nonce_accounts: usize,
}

impl ChainState {
    /// Empty chain whose replay mode is the verifying key's.
    pub fn new(config: ChainConfig, vk: VerifyingKey, params: Arc<HashParams>) -> Result<Self, ChainError> {
        if config.profile == Profile::Production && vk.backend() == BackendId::Mock {
            return Err(ChainError::MockInProduction);
        }
        if config.nonce_window == 0 {
            return Err(ChainError::BadNonceWindow);
        }
        let replay = ReplayState::new(vk.mode());
        Ok(Self { config, params, vk, registered: BTreeSet::new(), replay, height: 0 })
    }

    pub fn mode(&self) -> ReplayMode {
        self.replay.mode()
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.vk
    }

    pub fn replay_state(&self) -> &ReplayState {
        &self.replay
    }

    pub fn is_registered(&self, id_com: &FieldElement) -> bool {
        self.registered.contains(id_com)
    }

    pub fn identities(&self) -> impl Iterator<Item = &FieldElement> {
        self.registered.iter()
    }

    pub fn next_nonce(&self, id_com: &FieldElement) -> Option<u64> {
        match &self.replay {
            ReplayState::Nonce(r) => Some(r.next_expected(id_com)),
            ReplayState::Nullifier(_) => None,
        }
    }

    pub fn register_identity(&mut self, id_com: FieldElement) -> Result<(), ChainError> {
        if !self.registered.insert(id_com) {
            return Err(ChainError::DuplicateIdentity(id_com));
        }
        Ok(())
    }

    pub fn status(&self) -> ChainStatus {
        let (nullifiers, nonce_accounts) = match &self.replay {
            ReplayState::Nonce(r) => (0, r.len()),
            ReplayState::Nullifier(s) => (s.len(), 0),
        };
        ChainStatus {
            mode: self.mode(),
            profile: self.config.profile,
            backend: self.vk.backend(),
            circuit_id: self.vk.circuit_id().to_hex(),
            expected_domain: self.config.expected_domain,
            height: self.height,
            identities: self.registered.len(),
            nullifiers,
            nonce_accounts,
        }
    }

    pub fn process_tx(&mut self, tx: &SubmittedTx) -> TxOutcome {
        self.process_with(tx, |vk| vk.verify(&tx.proof, &tx.public))
    }

    /// Same results and final state as calling [`Self::process_tx`] on each
    /// transaction in order. Proofs are checked up front with one batch
    /// verification.
    pub fn process_batch(&mut self, txs: &[SubmittedTx]) -> Vec<TxOutcome> {
        if txs.is_empty() {
            return Vec::new();
        }
        let items: Vec<(AuthorizationProof, PublicInputs)> =
            txs.iter().map(|t| (t.proof.clone(), t.public)).collect();
        let verdict = self.vk.batch_verify(&items).expect("non-empty batch");
        let failing: HashSet<usize> = verdict.failing.into_iter().collect();
        txs.iter()
            .enumerate()
            .map(|(i, tx)| {
                let bad = failing.contains(&i);
                self.process_with(tx, |vk| if bad { vk.verify(&tx.proof, &tx.public) } else { Ok(()) })
            })
            .collect()
    }

    fn process_with(
        &mut self,
        tx: &SubmittedTx,
        verify: impl FnOnce(&VerifyingKey) -> Result<(), Rejection>,
    ) -> TxOutcome {
        let p = &tx.public;
        match hash::tx_hash_with(&self.params, &tx.payload) {
            Ok(h) if h == p.tx_hash => {}
            _ => return Err(RejectReason::ContextBinding),
        }
        if !self.registered.contains(&p.id_com) {
            return Err(RejectReason::UnknownIdentity);
        }
        if p.domain != self.config.expected_domain {
            return Err(RejectReason::DomainMismatch);
        }
        verify(&self.vk).map_err(|e| RejectReason::InvalidProof { detail: e.to_string() })?;
        match &mut self.replay {
            ReplayState::Nonce(reg) => {
                let next = reg.next_expected(&p.id_com);
                let hit = (next..next.saturating_add(self.config.nonce_window))
                    .find(|&n| nonce_commitment_with(&self.params, p.id_com, FieldElement::from_u64(n)) == p.rp_com);
                let Some(n) = hit else {
                    return Err(RejectReason::Replay { detail: format!("nonce commitment is not for nonce {next}") });
                };
                reg.advance_to(p.id_com, n + 1);
            }
            ReplayState::Nullifier(set) => {
                if !set.insert(p.rp_com) {
                    return Err(RejectReason::Replay { detail: "nullifier already spent".into() });
                }
            }
        }
        self.height += 1;
        Ok(Accepted { height: self.height })
    }

    fn to_body(&self) -> StateBody {
        let (nonces, nullifiers) = match &self.replay {
            ReplayState::Nonce(r) => (Some(r.counters.clone()), None),
            ReplayState::Nullifier(s) => (None, Some(s.order.clone())),
        };
        StateBody {
            mode: self.mode(),
            config: self.config,
            hash_params_digest: hex::encode(self.params.digest()),
            vk_hex: hex::encode(self.vk.to_bytes()),
            height: self.height,
            identities: self.registered.iter().copied().collect(),
            nonces,
            nullifiers,
        }
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        let body = serde_json::to_vec(&self.to_body()).expect("state serializes");
        let header = StateHeader { format_version: STATE_FORMAT_VERSION, checksum: hex::encode(Sha256::digest(&body)) };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&body);
        out
    }

    pub fn from_file_bytes(bytes: &[u8], params: Arc<HashParams>) -> Result<Self, ChainError> {
        let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| ChainError::Malformed("no header".into()))?;
        let header: StateHeader =
            serde_json::from_slice(&bytes[..split]).map_err(|e| ChainError::Malformed(e.to_string()))?;
        if header.format_version != STATE_FORMAT_VERSION {
            return Err(ChainError::UnsupportedVersion(header.format_version));
        }
        let body_bytes = &bytes[split + 1..];
        if hex::encode(Sha256::digest(body_bytes)) != header.checksum {
            return Err(ChainError::Checksum);
        }
        let body: StateBody = serde_json::from_slice(body_bytes).map_err(|e| ChainError::Malformed(e.to_string()))?;
        if body.hash_params_digest != hex::encode(params.digest()) {
            return Err(ChainError::ParamsMismatch);
        }
        let vk_bytes = hex::decode(&body.vk_hex).map_err(|e| ChainError::Malformed(e.to_string()))?;
        let vk = VerifyingKey::from_bytes(&vk_bytes)?;
        if vk.mode() != body.mode {
            return Err(ChainError::ModeMismatch { chain: body.mode, key: vk.mode() });
        }
        let mut state = ChainState::new(body.config, vk, params)?;
        state.height = body.height;
        state.registered = body.identities.into_iter().collect();
        state.replay = match (body.mode, body.nonces, body.nullifiers) {
            (ReplayMode::NonceRegistry, Some(counters), None) => ReplayState::Nonce(NonceRegistry { counters }),
            (ReplayMode::NullifierSet, None, Some(list)) => {
                let set: NullifierSet = list.iter().copied().collect();
                if set.len() != list.len() {
                    return Err(ChainError::Malformed("duplicate nullifier".into()));
                }
                ReplayState::Nullifier(set)
            }
            _ => return Err(ChainError::Malformed("replay state does not match mode".into())),
        };
        Ok(state)
    }

    /// Writes the state file atomically (temp file, then rename).
    pub fn persist(&self, path: &Path) -> Result<(), ChainError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_file_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, params: Arc<HashParams>) -> Result<Self, ChainError> {
        Self::from_file_bytes(&std::fs::read(path)?, params)
    }
}

/// Schemas of the state file's header line and body.
pub fn state_file_schemas() -> [(&'static str, schemars::schema::RootSchema); 2] {
    [
        ("chain_state_header", schemars::schema_for!(StateHeader)),
        ("chain_state_body", schemars::schema_for!(StateBody)),
    ]
}

#[derive(Serialize, Deserialize, JsonSchema)]
struct StateHeader {
    format_version: u32,
    checksum: String,
}

#[derive(Serialize, Deserialize, JsonSchema)]
struct StateBody {
    mode: ReplayMode,
    config: ChainConfig,
    hash_params_digest: String,
    vk_hex: String,
    height: u64,
    identities: Vec<FieldElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nonces: Option<BTreeMap<FieldElement, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nullifiers: Option<Vec<FieldElement>>,
}
