//! Proof backends: Groth16 over BN254 (`real`) and a keyed-MAC stand-in
//! (`mock`) for pipeline tests.
//!
//! Keys carry the [`CircuitId`] of the circuit they were made for; a proof
//! is only accepted by a verifying key with the same backend and circuit id.
//! The mock backend is not sound: anyone holding its verifying key can mint
//! proofs. It exists only to exercise the verifier pipeline cheaply.

mod groth16;
mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    circuit_id, AuthorizationWitness, CircuitId, ConstraintId, PublicInputs, PublicInputsDocument, ReplayMode,
};
use crate::hash::HashParams;

pub const KEY_FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const PK_MAGIC: &[u8; 8] = b"ZKACE-PK";
const VK_MAGIC: &[u8; 8] = b"ZKACE-VK";
const HEADER_LEN: usize = 8 + 4 + 32 + 1 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum BackendId {
    Real,
    Mock,
}

impl BackendId {
    fn to_byte(self) -> u8 {
        match self {
            BackendId::Real => 1,
            BackendId::Mock => 2,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(BackendId::Real),
            2 => Some(BackendId::Mock),
            _ => None,
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendId::Real => "real",
            BackendId::Mock => "mock",
        })
    }
}

impl FromStr for BackendId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" | "groth16" => Ok(BackendId::Real),
            "mock" => Ok(BackendId::Mock),
            other => Err(format!("unknown backend `{other}` (expected real|mock)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("witness does not satisfy the circuit (failing: {0:?})")]
    UnsatisfiedWitness(Vec<ConstraintId>),
    #[error("key was made for circuit {found}, expected {expected}")]
    CircuitMismatch { expected: CircuitId, found: CircuitId },
    #[error("malformed {what}: {msg}")]
    Malformed { what: &'static str, msg: String },
    #[error("unsupported {what} format version {found}")]
    UnsupportedVersion { what: &'static str, found: u32 },
    #[error("batch verification needs at least one item")]
    EmptyBatch,
    #[error("constraint synthesis failed: {0}")]
    Synthesis(#[from] ark_relations::r1cs::SynthesisError),
}

impl BackendError {
    fn malformed(what: &'static str, msg: impl fmt::Display) -> Self {
        BackendError::Malformed { what, msg: msg.to_string() }
    }
}

/// Why a verifier refused a proof.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("proof is for backend {found}, verifier runs {expected}")]
    BackendMismatch { expected: BackendId, found: BackendId },
    #[error("proof is for a different circuit")]
    CircuitMismatch,
    #[error("malformed proof: {0}")]
    Malformed(String),
    #[error("proof does not verify")]
    Invalid,
}

/// An opaque proof tagged with the backend and circuit that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorizationProof {
    pub backend: BackendId,
    pub circuit_id: CircuitId,
    pub bytes: Vec<u8>,
}

impl AuthorizationProof {
    pub fn size(&self) -> usize {
        self.bytes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct KeyHeader {
    circuit_id: CircuitId,
    backend: BackendId,
    mode: ReplayMode,
}

impl KeyHeader {
    fn encode(&self, magic: &[u8; 8], payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(magic);
        out.extend_from_slice(&KEY_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.circuit_id.0);
        out.push(self.backend.to_byte());
        out.push(self.mode.id_byte());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
        out
    }

    fn decode<'a>(what: &'static str, magic: &[u8; 8], bytes: &'a [u8]) -> Result<(Self, &'a [u8]), BackendError> {
        if bytes.len() < HEADER_LEN {
            return Err(BackendError::malformed(what, "truncated header"));
        }
        if &bytes[..8] != magic {
            return Err(BackendError::malformed(what, "bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != KEY_FORMAT_VERSION {
            return Err(BackendError::UnsupportedVersion { what, found: version });
        }
        let circuit_id = CircuitId(bytes[12..44].try_into().unwrap());
        let backend = BackendId::from_byte(bytes[44]).ok_or_else(|| BackendError::malformed(what, "unknown backend"))?;
        let mode = match bytes[45] {
            1 => ReplayMode::NonceRegistry,
            2 => ReplayMode::NullifierSet,
            _ => return Err(BackendError::malformed(what, "unknown replay mode")),
        };
        let len = u64::from_le_bytes(bytes[46..54].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != len {
            return Err(BackendError::malformed(what, "payload length mismatch"));
        }
        Ok((Self { circuit_id, backend, mode }, payload))
    }
}

enum PkInner {
    Real(Box<groth16::RealProvingKey>),
    Mock(mock::MockKey),
}

enum VkInner {
    Real(Box<groth16::RealVerifyingKey>),
    Mock(mock::MockKey),
}

pub struct ProvingKey {
    header: KeyHeader,
    params: Arc<HashParams>,
    inner: PkInner,
}

#[derive(Clone)]
pub struct VerifyingKey {
    header: KeyHeader,
    inner: Arc<VkInner>,
}

impl fmt::Debug for ProvingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProvingKey").field("header", &self.header).finish_non_exhaustive()
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VerifyingKey").field("header", &self.header).finish_non_exhaustive()
    }
}

/// Generates a key pair for `mode` deterministically from `seed`.
pub fn setup(
    backend: BackendId,
    params: Arc<HashParams>,
    mode: ReplayMode,
    seed: &[u8; 32],
) -> Result<(ProvingKey, VerifyingKey), BackendError> {
    let header = KeyHeader { circuit_id: circuit_id(params.clone(), mode), backend, mode };
    let mut rng = ChaCha20Rng::from_seed(*seed);
    let (pk, vk) = match backend {
        BackendId::Real => {
            let pk = groth16::setup(params.clone(), mode, &mut rng)?;
            let vk = groth16::RealVerifyingKey::from_proving_key(&pk);
            (PkInner::Real(Box::new(pk)), VkInner::Real(Box::new(vk)))
        }
        BackendId::Mock => {
            let key = mock::MockKey::from_seed(seed);
            (PkInner::Mock(key.clone()), VkInner::Mock(key))
        }
    };
    Ok((ProvingKey { header, params, inner: pk }, VerifyingKey { header, inner: Arc::new(vk) }))
}

impl ProvingKey {
    pub fn backend(&self) -> BackendId {
        self.header.backend
    }

    pub fn mode(&self) -> ReplayMode {
        self.header.mode
    }

    pub fn circuit_id(&self) -> CircuitId {
        self.header.circuit_id
    }

    pub fn params(&self) -> &Arc<HashParams> {
        &self.params
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        let inner = match &self.inner {
            PkInner::Real(pk) => VkInner::Real(Box::new(groth16::RealVerifyingKey::from_proving_key(pk))),
            PkInner::Mock(k) => VkInner::Mock(k.clone()),
        };
        VerifyingKey { header: self.header, inner: Arc::new(inner) }
    }

    /// Proves an honest statement; refuses witnesses that fail C1-C5.
    pub fn prove<R: RngCore + CryptoRng>(
        &self,
        witness: &AuthorizationWitness,
        public: &PublicInputs,
        rng: &mut R,
    ) -> Result<AuthorizationProof, BackendError> {
        self.prove_inner(witness, public, rng, true)
    }

    /// Runs the prover without the satisfiability check. For adversarial
    /// testing: the result for a bad witness is a proof that should not verify.
    pub fn prove_unchecked<R: RngCore + CryptoRng>(
        &self,
        witness: &AuthorizationWitness,
        public: &PublicInputs,
        rng: &mut R,
    ) -> Result<AuthorizationProof, BackendError> {
        self.prove_inner(witness, public, rng, false)
    }

    fn prove_inner<R: RngCore + CryptoRng>(
        &self,
        witness: &AuthorizationWitness,
        public: &PublicInputs,
        rng: &mut R,
        checked: bool,
    ) -> Result<AuthorizationProof, BackendError> {
        let bytes = match &self.inner {
            PkInner::Real(pk) => groth16::prove(pk, self.params.clone(), self.mode(), witness, public, rng, checked)?,
            PkInner::Mock(key) => {
                if checked {
                    let failing = crate::circuit::check_native(&self.params, self.mode(), witness, public);
                    if !failing.is_empty() {
                        return Err(BackendError::UnsatisfiedWitness(failing));
                    }
                }
                key.tag(&self.header.circuit_id, public).to_vec()
            }
        };
        Ok(AuthorizationProof { backend: self.backend(), circuit_id: self.circuit_id(), bytes })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = match &self.inner {
            PkInner::Real(pk) => pk.to_bytes(),
            PkInner::Mock(k) => k.to_bytes(),
        };
        self.header.encode(PK_MAGIC, &payload)
    }

    /// Parses a key file and checks it belongs to the circuit built from `params`.
    pub fn from_bytes(bytes: &[u8], params: Arc<HashParams>) -> Result<Self, BackendError> {
        let (header, payload) = KeyHeader::decode("proving key", PK_MAGIC, bytes)?;
        let expected = circuit_id(params.clone(), header.mode);
        if expected != header.circuit_id {
            return Err(BackendError::CircuitMismatch { expected, found: header.circuit_id });
        }
        let inner = match header.backend {
            BackendId::Real => PkInner::Real(Box::new(groth16::RealProvingKey::from_bytes(payload)?)),
            BackendId::Mock => PkInner::Mock(mock::MockKey::from_bytes(payload)?),
        };
        Ok(Self { header, params, inner })
    }
}

/// Outcome of [`VerifyingKey::batch_verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchVerdict {
    pub accepted: bool,
    /// Indices of the items that fail individually (empty iff accepted).
    pub failing: Vec<usize>,
}

impl VerifyingKey {
    pub fn backend(&self) -> BackendId {
        self.header.backend
    }

    pub fn mode(&self) -> ReplayMode {
        self.header.mode
    }

    pub fn circuit_id(&self) -> CircuitId {
        self.header.circuit_id
    }

    fn check_header(&self, proof: &AuthorizationProof) -> Result<(), Rejection> {
        if proof.backend != self.backend() {
            return Err(Rejection::BackendMismatch { expected: self.backend(), found: proof.backend });
        }
        if proof.circuit_id != self.circuit_id() {
            return Err(Rejection::CircuitMismatch);
        }
        Ok(())
    }

    pub fn verify(&self, proof: &AuthorizationProof, public: &PublicInputs) -> Result<(), Rejection> {
        self.check_header(proof)?;
        let ok = match &*self.inner {
            VkInner::Real(vk) => vk.verify(&proof.bytes, public)?,
            VkInner::Mock(key) => key.check(&self.header.circuit_id, public, &proof.bytes),
        };
        if ok {
            Ok(())
        } else {
            Err(Rejection::Invalid)
        }
    }

    pub fn accepts(&self, proof: &AuthorizationProof, public: &PublicInputs) -> bool {
        self.verify(proof, public).is_ok()
    }

    /// Accepts iff every item verifies. For the real backend the whole batch
    /// is checked with one randomized pairing product; on failure each item
    /// is re-checked to locate the culprits.
    pub fn batch_verify(&self, items: &[(AuthorizationProof, PublicInputs)]) -> Result<BatchVerdict, BackendError> {
        let mut rng = ChaCha20Rng::from_rng(OsRng).expect("os entropy");
        self.batch_verify_with_rng(items, &mut rng)
    }

    pub fn batch_verify_with_rng<R: RngCore>(
        &self,
        items: &[(AuthorizationProof, PublicInputs)],
        rng: &mut R,
    ) -> Result<BatchVerdict, BackendError> {
        if items.is_empty() {
            return Err(BackendError::EmptyBatch);
        }
        let combined = match &*self.inner {
            VkInner::Real(vk) if items.len() > 1 => {
                let headers_ok = items.iter().all(|(p, _)| self.check_header(p).is_ok());
                headers_ok && vk.batch_verify(items.iter().map(|(p, x)| (p.bytes.as_slice(), x)), rng)
            }
            _ => false,
        };
        if combined {
            return Ok(BatchVerdict { accepted: true, failing: Vec::new() });
        }
        let failing: Vec<usize> =
            items.iter().enumerate().filter(|(_, (p, x))| !self.accepts(p, x)).map(|(i, _)| i).collect();
        Ok(BatchVerdict { accepted: failing.is_empty(), failing })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = match &*self.inner {
            VkInner::Real(vk) => vk.to_bytes(),
            VkInner::Mock(k) => k.to_bytes(),
        };
        self.header.encode(VK_MAGIC, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BackendError> {
        let (header, payload) = KeyHeader::decode("verifying key", VK_MAGIC, bytes)?;
        let inner = match header.backend {
            BackendId::Real => VkInner::Real(Box::new(groth16::RealVerifyingKey::from_bytes(payload)?)),
            BackendId::Mock => VkInner::Mock(mock::MockKey::from_bytes(payload)?),
        };
        Ok(Self { header, inner: Arc::new(inner) })
    }
}

/// The JSON unit handed to a verifier: proof, public inputs and, optionally,
/// the transaction payload they authorize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ProofBundle {
    pub format_version: u32,
    pub backend_id: BackendId,
    pub circuit_id: CircuitId,
    pub proof_b64: String,
    pub public_inputs: PublicInputsDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_hex: Option<String>,
}

impl ProofBundle {
    pub fn new(proof: &AuthorizationProof, public: &PublicInputs, mode: ReplayMode, payload: Option<&[u8]>) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            backend_id: proof.backend,
            circuit_id: proof.circuit_id,
            proof_b64: B64.encode(&proof.bytes),
            public_inputs: public.to_document(mode),
            payload_hex: payload.map(hex::encode),
        }
    }

    pub fn proof(&self) -> Result<AuthorizationProof, BackendError> {
        let bytes = B64.decode(&self.proof_b64).map_err(|e| BackendError::malformed("proof bundle", e))?;
        Ok(AuthorizationProof { backend: self.backend_id, circuit_id: self.circuit_id, bytes })
    }

    pub fn public_inputs(&self) -> PublicInputs {
        self.public_inputs.inputs()
    }

    pub fn payload(&self) -> Result<Option<Vec<u8>>, BackendError> {
        self.payload_hex
            .as_deref()
            .map(|h| hex::decode(h).map_err(|e| BackendError::malformed("proof bundle", e)))
            .transpose()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let bundle: ProofBundle =
            serde_json::from_str(text).map_err(|e| BackendError::malformed("proof bundle", e))?;
        if bundle.format_version != BUNDLE_FORMAT_VERSION {
            return Err(BackendError::UnsupportedVersion { what: "proof bundle", found: bundle.format_version });
        }
        Ok(bundle)
    }
}
