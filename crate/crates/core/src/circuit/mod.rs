//! The authorization statement and its rank-1 constraint system.
//!
//! Public inputs, in proof-system order: `id_com, tx_hash, domain, target,
//! rp_com`. Private witness: `rev, salt, ctx = (alg_id, ctx_domain, index),
//! nonce`. Enforced relations:
//!
//! - C1 `H_commit(rev, salt, domain) = id_com`
//! - C2 `H_outer(H_inner(rev, alg_id, ctx_domain, index)) = target`
//! - C3 `auth = H_auth(rev, alg_id, ctx_domain, index, tx_hash, domain, nonce)`
//! - C4 `rp_com = H_replay(id_com, nonce)` (nonce registry) or
//!   `rp_com = H_replay(auth, domain)` (nullifier set)
//! - C5 `ctx_domain = domain`
//!
//! The four equality checks against public inputs (C1, C2, C4, C5) are
//! accounted together in the C5 row of [`ConstraintReport`].

pub mod eval;
pub mod gadget;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use ark_bn254::Fr;
use ark_relations::r1cs::{
    ConstraintSynthesizer, ConstraintSystem, ConstraintSystemRef, OptimizationGoal, SynthesisError, SynthesisMode,
};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;
use zeroize::Zeroize;

use crate::didp::{self, DerivationContext, RootEntropy};
use crate::field::FieldElement;
use crate::hash::{self, DomainTag, HashError, HashParams};
use gadget::Wire;

pub const PUBLIC_INPUTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    #[serde(rename = "nonce")]
    NonceRegistry,
    #[serde(rename = "nullifier")]
    NullifierSet,
}

impl ReplayMode {
    pub const ALL: [ReplayMode; 2] = [ReplayMode::NonceRegistry, ReplayMode::NullifierSet];

    pub fn as_str(self) -> &'static str {
        match self {
            ReplayMode::NonceRegistry => "nonce",
            ReplayMode::NullifierSet => "nullifier",
        }
    }

    pub fn id_byte(self) -> u8 {
        match self {
            ReplayMode::NonceRegistry => 1,
            ReplayMode::NullifierSet => 2,
        }
    }
}

impl fmt::Display for ReplayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReplayMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonce" => Ok(ReplayMode::NonceRegistry),
            "nullifier" => Ok(ReplayMode::NullifierSet),
            other => Err(format!("unknown replay mode `{other}` (expected nonce|nullifier)")),
        }
    }
}

/// The five public inputs, in proof-system order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicInputs {
    pub id_com: FieldElement,
    pub tx_hash: FieldElement,
    pub domain: FieldElement,
    pub target: FieldElement,
    pub rp_com: FieldElement,
}

impl PublicInputs {
    pub const COUNT: usize = 5;
    pub const NAMES: [&'static str; 5] = ["id_com", "tx_hash", "domain", "target", "rp_com"];

    pub fn to_array(&self) -> [FieldElement; 5] {
        [self.id_com, self.tx_hash, self.domain, self.target, self.rp_com]
    }

    pub fn from_array(a: [FieldElement; 5]) -> Self {
        Self { id_com: a[0], tx_hash: a[1], domain: a[2], target: a[3], rp_com: a[4] }
    }

    pub fn to_fr_vec(&self) -> Vec<Fr> {
        self.to_array().iter().map(|f| f.to_fr()).collect()
    }

    /// Copy with element `index` (proof-system order) replaced.
    pub fn with_field(&self, index: usize, value: FieldElement) -> Self {
        let mut a = self.to_array();
        a[index] = value;
        Self::from_array(a)
    }

    /// Canonical bytes: the five elements' 32-byte encodings concatenated.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_array().iter().flat_map(|f| f.to_bytes()).collect()
    }

    pub fn byte_len() -> usize {
        Self::COUNT * FieldElement::BYTES
    }

    pub fn to_document(&self, mode: ReplayMode) -> PublicInputsDocument {
        PublicInputsDocument {
            format_version: PUBLIC_INPUTS_FORMAT_VERSION,
            mode,
            id_com: self.id_com,
            tx_hash: self.tx_hash,
            domain: self.domain,
            target: self.target,
            rp_com: self.rp_com,
        }
    }
}

/// JSON form of [`PublicInputs`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct PublicInputsDocument {
    pub format_version: u32,
    pub mode: ReplayMode,
    pub id_com: FieldElement,
    pub tx_hash: FieldElement,
    pub domain: FieldElement,
    pub target: FieldElement,
    pub rp_com: FieldElement,
}

impl PublicInputsDocument {
    pub fn inputs(&self) -> PublicInputs {
        PublicInputs {
            id_com: self.id_com,
            tx_hash: self.tx_hash,
            domain: self.domain,
            target: self.target,
            rp_com: self.rp_com,
        }
    }
}

/// Private half of the statement.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizationWitness {
    pub rev: FieldElement,
    pub salt: FieldElement,
    pub ctx: DerivationContext,
    pub nonce: FieldElement,
    /// Reserved; always empty in this instantiation.
    pub aux: Vec<FieldElement>,
}

impl fmt::Debug for AuthorizationWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthorizationWitness")
            .field("rev", &"<redacted>")
            .field("salt", &"<redacted>")
            .field("ctx", &self.ctx)
            .field("nonce", &self.nonce)
            .finish()
    }
}

impl Drop for AuthorizationWitness {
    fn drop(&mut self) {
        self.rev.0.zeroize();
        self.salt.0.zeroize();
    }
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error("constraint synthesis failed: {0}")]
    Synthesis(#[from] SynthesisError),
}

pub fn identity_commitment_with(
    params: &HashParams,
    rev: FieldElement,
    salt: FieldElement,
    domain: FieldElement,
) -> FieldElement {
    hash::hash_with(params, &[rev, salt, domain], DomainTag::Commitment).expect("non-empty input")
}

/// On-chain identity anchor for `(rev, salt, domain)`.
pub fn identity_commitment(rev: &RootEntropy, salt: FieldElement, domain: FieldElement) -> FieldElement {
    identity_commitment_with(&HashParams::reference(), rev.to_field(), salt, domain)
}

pub fn nonce_commitment_with(params: &HashParams, id_com: FieldElement, nonce: FieldElement) -> FieldElement {
    hash::hash_with(params, &[id_com, nonce], DomainTag::Replay).expect("non-empty input")
}

pub fn nullifier_with(params: &HashParams, auth: FieldElement, domain: FieldElement) -> FieldElement {
    hash::hash_with(params, &[auth, domain], DomainTag::Replay).expect("non-empty input")
}

/// Native evaluation of the authorization token (the C3 hash).
pub fn auth_token_with(
    params: &HashParams,
    rev: FieldElement,
    ctx: &DerivationContext,
    tx_hash: FieldElement,
    domain: FieldElement,
    nonce: FieldElement,
) -> FieldElement {
    let inputs = [rev, ctx.alg_id, ctx.ctx_domain, ctx.index, tx_hash, domain, nonce];
    hash::hash_with(params, &inputs, DomainTag::Auth).expect("non-empty input")
}

pub fn auth_token(
    rev: &RootEntropy,
    ctx: &DerivationContext,
    tx_hash: FieldElement,
    domain: FieldElement,
    nonce: FieldElement,
) -> FieldElement {
    auth_token_with(&HashParams::reference(), rev.to_field(), ctx, tx_hash, domain, nonce)
}

/// Everything a prover needs to authorize one payload.
#[derive(Debug, Clone)]
pub struct StatementRequest<'a> {
    pub rev: &'a RootEntropy,
    pub salt: FieldElement,
    pub ctx: DerivationContext,
    pub nonce: FieldElement,
    pub tx_payload: &'a [u8],
    pub domain: FieldElement,
    pub mode: ReplayMode,
}

/// Assembles a consistent witness and public-input pair.
///
/// The caller must pass `ctx.ctx_domain == domain`; otherwise the result is
/// well formed but unsatisfiable (C5).
pub fn make_statement_with(
    params: &HashParams,
    req: &StatementRequest<'_>,
) -> Result<(AuthorizationWitness, PublicInputs), HashError> {
    let rev = req.rev.to_field();
    let tx_hash = hash::tx_hash_with(params, req.tx_payload)?;
    let id_com = identity_commitment_with(params, rev, req.salt, req.domain);
    let target = didp::derive_target_with(params, req.rev, &req.ctx);
    let rp_com = match req.mode {
        ReplayMode::NonceRegistry => nonce_commitment_with(params, id_com, req.nonce),
        ReplayMode::NullifierSet => {
            let auth = auth_token_with(params, rev, &req.ctx, tx_hash, req.domain, req.nonce);
            nullifier_with(params, auth, req.domain)
        }
    };
    let witness = AuthorizationWitness { rev, salt: req.salt, ctx: req.ctx, nonce: req.nonce, aux: Vec::new() };
    Ok((witness, PublicInputs { id_com, tx_hash, domain: req.domain, target, rp_com }))
}

pub fn make_statement(req: &StatementRequest<'_>) -> Result<(AuthorizationWitness, PublicInputs), HashError> {
    make_statement_with(&HashParams::reference(), req)
}

/// Evaluates C1-C5 natively (no constraint system) and lists the groups
/// that fail. Matches the failing set of `eval::evaluate(.., p, p)`: with an
/// unmodified instance only the closing equalities can fail.
pub fn check_native(
    params: &HashParams,
    mode: ReplayMode,
    w: &AuthorizationWitness,
    p: &PublicInputs,
) -> Vec<ConstraintId> {
    let mut failing = Vec::new();
    let id_com = identity_commitment_with(params, w.rev, w.salt, p.domain);
    if id_com != p.id_com {
        failing.push(ConstraintId::C1);
    }
    let inner = [w.rev, w.ctx.alg_id, w.ctx.ctx_domain, w.ctx.index];
    let key = hash::hash_with(params, &inner, DomainTag::DeriveInner).expect("non-empty input");
    if hash::hash_with(params, &[key], DomainTag::DeriveOuter).expect("non-empty input") != p.target {
        failing.push(ConstraintId::C2);
    }
    let auth = auth_token_with(params, w.rev, &w.ctx, p.tx_hash, p.domain, w.nonce);
    let rp_com = match mode {
        ReplayMode::NonceRegistry => nonce_commitment_with(params, p.id_com, w.nonce),
        ReplayMode::NullifierSet => nullifier_with(params, auth, p.domain),
    };
    if rp_com != p.rp_com {
        failing.push(ConstraintId::C4);
    }
    if w.ctx.ctx_domain != p.domain {
        failing.push(ConstraintId::C5);
    }
    failing
}

/// Constraint groups, in synthesis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum ConstraintId {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 5] =
        [ConstraintId::C1, ConstraintId::C2, ConstraintId::C3, ConstraintId::C4, ConstraintId::C5];
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Values of the internal hash outputs, recorded during synthesis.
#[derive(Debug, Clone, Default)]
pub struct WireTrace {
    pub id_com: Option<Fr>,
    pub derived_key: Option<Fr>,
    pub target: Option<Fr>,
    pub auth: Option<Fr>,
    pub rp_com: Option<Fr>,
}

/// Layout facts gathered while synthesizing.
#[derive(Debug, Clone)]
pub struct SynthesisTrace {
    /// Constraint index range of each group.
    pub sections: [Range<usize>; 5],
    /// Arity of every hash call, per group.
    pub hash_arities: [Vec<usize>; 5],
    /// The logical group of each equality row in the final section.
    pub equalities: Vec<(usize, ConstraintId)>,
    pub wires: WireTrace,
}

impl SynthesisTrace {
    /// Logical group a row belongs to. Equality rows are attributed to the
    /// relation they close, not to the accounting section holding them.
    pub fn section_of(&self, row: usize) -> Option<ConstraintId> {
        if let Some((_, id)) = self.equalities.iter().find(|(r, _)| *r == row) {
            return Some(*id);
        }
        self.sections.iter().position(|r| r.contains(&row)).map(|i| ConstraintId::ALL[i])
    }
}

/// The authorization circuit for one replay mode.
#[derive(Clone)]
pub struct AuthorizationCircuit {
    pub params: Arc<HashParams>,
    pub mode: ReplayMode,
    pub witness: Option<AuthorizationWitness>,
    pub public: Option<PublicInputs>,
}

impl AuthorizationCircuit {
    /// Shape-only instance for setup and counting.
    pub fn blank(params: Arc<HashParams>, mode: ReplayMode) -> Self {
        Self { params, mode, witness: None, public: None }
    }

    pub fn with_assignment(
        params: Arc<HashParams>,
        mode: ReplayMode,
        witness: AuthorizationWitness,
        public: PublicInputs,
    ) -> Self {
        Self { params, mode, witness: Some(witness), public: Some(public) }
    }

    /// Emits all constraints into `cs` and reports where they landed.
    pub fn synthesize(&self, cs: &ConstraintSystemRef<Fr>) -> Result<SynthesisTrace, SynthesisError> {
        let params = &*self.params;
        let pubv = |f: fn(&PublicInputs) -> FieldElement| self.public.as_ref().map(|p| f(p).to_fr());
        let wit = |f: fn(&AuthorizationWitness) -> FieldElement| self.witness.as_ref().map(|w| f(w).to_fr());

        let id_com = Wire::input(cs, pubv(|p| p.id_com))?;
        let tx_hash = Wire::input(cs, pubv(|p| p.tx_hash))?;
        let domain = Wire::input(cs, pubv(|p| p.domain))?;
        let target = Wire::input(cs, pubv(|p| p.target))?;
        let rp_com = Wire::input(cs, pubv(|p| p.rp_com))?;

        let rev = Wire::witness(cs, wit(|w| w.rev))?;
        let salt = Wire::witness(cs, wit(|w| w.salt))?;
        let alg_id = Wire::witness(cs, wit(|w| w.ctx.alg_id))?;
        let ctx_domain = Wire::witness(cs, wit(|w| w.ctx.ctx_domain))?;
        let index = Wire::witness(cs, wit(|w| w.ctx.index))?;
        let nonce = Wire::witness(cs, wit(|w| w.nonce))?;

        let mut sections: [Range<usize>; 5] = Default::default();
        let mut hash_arities: [Vec<usize>; 5] = Default::default();
        let mut call = |group: usize, inputs: &[Wire], tag: DomainTag| {
            hash_arities[group].push(inputs.len());
            gadget::hash(cs, params, inputs, tag)
        };

        let start = cs.num_constraints();
        let id_calc = call(0, &[rev.clone(), salt, domain.clone()], DomainTag::Commitment)?;
        sections[0] = start..cs.num_constraints();

        let start = cs.num_constraints();
        let key = call(1, &[rev.clone(), alg_id.clone(), ctx_domain.clone(), index.clone()], DomainTag::DeriveInner)?;
        let target_calc = call(1, std::slice::from_ref(&key), DomainTag::DeriveOuter)?;
        sections[1] = start..cs.num_constraints();

        let start = cs.num_constraints();
        let auth_inputs = [rev, alg_id, ctx_domain.clone(), index, tx_hash, domain.clone(), nonce.clone()];
        let auth = call(2, &auth_inputs, DomainTag::Auth)?;
        sections[2] = start..cs.num_constraints();

        let start = cs.num_constraints();
        let rp_calc = match self.mode {
            ReplayMode::NonceRegistry => call(3, &[id_com.clone(), nonce], DomainTag::Replay)?,
            ReplayMode::NullifierSet => call(3, &[auth.clone(), domain.clone()], DomainTag::Replay)?,
        };
        sections[3] = start..cs.num_constraints();

        let start = cs.num_constraints();
        let mut equalities = Vec::with_capacity(4);
        for (lhs, rhs, id) in [
            (&id_calc, &id_com, ConstraintId::C1),
            (&target_calc, &target, ConstraintId::C2),
            (&rp_calc, &rp_com, ConstraintId::C4),
            (&ctx_domain, &domain, ConstraintId::C5),
        ] {
            equalities.push((cs.num_constraints(), id));
            lhs.enforce_equal(cs, rhs)?;
        }
        sections[4] = start..cs.num_constraints();

        Ok(SynthesisTrace {
            sections,
            hash_arities,
            equalities,
            wires: WireTrace {
                id_com: id_calc.value(),
                derived_key: key.value(),
                target: target_calc.value(),
                auth: auth.value(),
                rp_com: rp_calc.value(),
            },
        })
    }
}

impl ConstraintSynthesizer<Fr> for AuthorizationCircuit {
    fn generate_constraints(self, cs: ConstraintSystemRef<Fr>) -> Result<(), SynthesisError> {
        self.synthesize(&cs).map(|_| ())
    }
}

/// One row of the constraint breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ConstraintRow {
    pub constraint: ConstraintId,
    pub description: String,
    /// Input arity of each hash call in this group (empty for pure equalities).
    pub hash_input_arities: Vec<usize>,
    pub hash_calls: usize,
    pub r1cs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ConstraintReport {
    pub mode: ReplayMode,
    pub rows: Vec<ConstraintRow>,
    pub total: usize,
    pub hash_invocations: usize,
    pub public_inputs: usize,
    pub witness_variables: usize,
}

impl ConstraintReport {
    pub fn row(&self, id: ConstraintId) -> &ConstraintRow {
        &self.rows[id as usize]
    }
}

const ROW_DESCRIPTIONS: [&str; 5] = [
    "commitment consistency",
    "derivation correctness",
    "authorization binding",
    "replay prevention",
    "domain separation + equality enforcement",
];

fn setup_cs() -> ConstraintSystemRef<Fr> {
    let cs = ConstraintSystem::<Fr>::new_ref();
    cs.set_optimization_goal(OptimizationGoal::Constraints);
    cs.set_mode(SynthesisMode::Setup);
    cs
}

/// Synthesizes the circuit shape for `mode` and reports its size.
pub fn count_constraints_with(params: Arc<HashParams>, mode: ReplayMode) -> ConstraintReport {
    let cs = setup_cs();
    let trace = AuthorizationCircuit::blank(params, mode).synthesize(&cs).expect("setup synthesis is total");
    let rows: Vec<ConstraintRow> = ConstraintId::ALL
        .iter()
        .enumerate()
        .map(|(i, id)| ConstraintRow {
            constraint: *id,
            description: ROW_DESCRIPTIONS[i].to_string(),
            hash_input_arities: trace.hash_arities[i].clone(),
            hash_calls: trace.hash_arities[i].len(),
            r1cs: trace.sections[i].len(),
        })
        .collect();
    ConstraintReport {
        mode,
        total: cs.num_constraints(),
        hash_invocations: rows.iter().map(|r| r.hash_calls).sum(),
        public_inputs: cs.num_instance_variables() - 1,
        witness_variables: cs.num_witness_variables(),
        rows,
    }
}

pub fn count_constraints(mode: ReplayMode) -> ConstraintReport {
    count_constraints_with(HashParams::reference(), mode)
}

/// Identifier binding a key to (circuit matrices, mode, hash parameters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CircuitId(pub [u8; 32]);

impl CircuitId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| "circuit id must be 32 bytes".to_string())?;
        Ok(Self(arr))
    }
}

impl fmt::Display for CircuitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CircuitId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl schemars::JsonSchema for CircuitId {
    fn schema_name() -> String {
        "CircuitId".into()
    }

    fn json_schema(_: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        crate::field::hex32_schema()
    }
}

impl<'de> Deserialize<'de> for CircuitId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CircuitId::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

pub fn circuit_id(params: Arc<HashParams>, mode: ReplayMode) -> CircuitId {
    let digest = params.digest();
    let cs = setup_cs();
    AuthorizationCircuit::blank(params, mode).synthesize(&cs).expect("setup synthesis is total");
    cs.finalize();
    let m = cs.to_matrices().expect("setup mode builds matrices");
    let mut h = Sha256::new();
    h.update(b"zkace/circuit/v1");
    h.update([mode.id_byte()]);
    h.update(digest);
    for v in [m.num_instance_variables, m.num_witness_variables, m.num_constraints] {
        h.update((v as u64).to_le_bytes());
    }
    for matrix in [&m.a, &m.b, &m.c] {
        for row in matrix {
            h.update((row.len() as u64).to_le_bytes());
            for (coeff, col) in row {
                h.update(FieldElement::from_fr(*coeff).to_bytes());
                h.update((*col as u64).to_le_bytes());
            }
        }
    }
    CircuitId(h.finalize().into())
}
