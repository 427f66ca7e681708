//! Deterministic identity derivation: sealing of the root entropy value and
//! the circuit-native key derivation.
//!
//! The sealed artifact is an XChaCha20-Poly1305 encryption of the 32-byte
//! root under an Argon2id key derived from the holder's credential. The
//! envelope header (version, KDF salt and cost) is bound as associated data.

use std::fmt;

use argon2::{Algorithm, Argon2, Params, Version};
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use rand::{CryptoRng, RngCore};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zeroize::Zeroizing;

use crate::field::FieldElement;
use crate::hash::{self, DomainTag, HashParams};

pub const SEALED_FORMAT_VERSION: u32 = 1;
const KDF_SALT_BYTES: usize = 16;
const NONCE_BYTES: usize = 24;
const TAG_BYTES: usize = 16;
const MAX_M_COST_KIB: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum DidpError {
    #[error("credential must not be empty")]
    EmptyCredential,
    #[error("malformed sealed artifact: {0}")]
    Malformed(String),
    #[error("unsupported sealed artifact version {0}")]
    UnsupportedVersion(u32),
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("key derivation failed: {0}")]
    Kdf(String),
}

/// The 256-bit identity root. Zeroized on drop and never serialized.
#[derive(Clone)]
pub struct RootEntropy {
    bytes: Zeroizing<[u8; 32]>,
}

impl RootEntropy {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = Zeroizing::new([0u8; 32]);
        rng.fill_bytes(bytes.as_mut());
        Self { bytes }
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self { bytes: Zeroizing::new(bytes) }
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }

    /// Single-element circuit representation: the little-endian integer
    /// reduced mod p.
    pub fn to_field(&self) -> FieldElement {
        FieldElement::from_le_bytes_mod_order(self.bytes.as_ref())
    }
}

impl fmt::Debug for RootEntropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RootEntropy(<redacted>)")
    }
}

impl PartialEq for RootEntropy {
    fn eq(&self, other: &Self) -> bool {
        // Not constant time; only used by tests and tooling.
        self.bytes.as_ref() == other.bytes.as_ref()
    }
}

impl Eq for RootEntropy {}

/// `(alg_id, domain, index)` selecting one derived key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationContext {
    pub alg_id: FieldElement,
    pub ctx_domain: FieldElement,
    pub index: FieldElement,
}

impl DerivationContext {
    pub fn new(alg_id: u64, ctx_domain: FieldElement, index: u64) -> Self {
        Self { alg_id: alg_id.into(), ctx_domain, index: index.into() }
    }

    pub fn to_array(&self) -> [FieldElement; 3] {
        [self.alg_id, self.ctx_domain, self.index]
    }
}

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct KdfParams {
    pub m_cost_kib: u32,
    pub t_cost: u32,
    pub p_cost: u32,
}

impl KdfParams {
    /// Fast profile for tests and benchmarks.
    pub const TEST: KdfParams = KdfParams { m_cost_kib: 1024, t_cost: 1, p_cost: 1 };
    /// Default interactive profile.
    pub const INTERACTIVE: KdfParams = KdfParams { m_cost_kib: 64 * 1024, t_cost: 3, p_cost: 1 };

    pub fn by_name(name: &str) -> Option<KdfParams> {
        match name {
            "test" => Some(Self::TEST),
            "interactive" => Some(Self::INTERACTIVE),
            _ => None,
        }
    }

    fn argon2(&self) -> Result<Argon2<'static>, DidpError> {
        if self.m_cost_kib > MAX_M_COST_KIB {
            return Err(DidpError::Malformed(format!("memory cost {} KiB above limit", self.m_cost_kib)));
        }
        let params = Params::new(self.m_cost_kib, self.t_cost, self.p_cost, Some(32))
            .map_err(|e| DidpError::Kdf(e.to_string()))?;
        Ok(Argon2::new(Algorithm::Argon2id, Version::V0x13, params))
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// Encrypted envelope of a [`RootEntropy`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SealedArtifact {
    pub version: u32,
    #[serde(with = "hex_bytes")]
    #[schemars(with = "String")]
    pub kdf_salt: Vec<u8>,
    pub kdf_params: KdfParams,
    #[serde(with = "hex_bytes")]
    #[schemars(with = "String")]
    pub nonce: Vec<u8>,
    #[serde(with = "hex_bytes")]
    #[schemars(with = "String")]
    pub ciphertext: Vec<u8>,
    #[serde(with = "hex_bytes")]
    #[schemars(with = "String")]
    pub tag: Vec<u8>,
}

impl SealedArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DidpError> {
        let artifact: SealedArtifact =
            serde_json::from_str(text).map_err(|e| DidpError::Malformed(e.to_string()))?;
        artifact.check_shape()?;
        Ok(artifact)
    }

    fn check_shape(&self) -> Result<(), DidpError> {
        if self.version != SEALED_FORMAT_VERSION {
            return Err(DidpError::UnsupportedVersion(self.version));
        }
        let check = |name: &str, got: usize, want: usize| {
            if got != want {
                Err(DidpError::Malformed(format!("{name}: expected {want} bytes, got {got}")))
            } else {
                Ok(())
            }
        };
        check("kdf_salt", self.kdf_salt.len(), KDF_SALT_BYTES)?;
        check("nonce", self.nonce.len(), NONCE_BYTES)?;
        check("ciphertext", self.ciphertext.len(), 32)?;
        check("tag", self.tag.len(), TAG_BYTES)
    }

    fn associated_data(&self) -> Vec<u8> {
        let mut aad = Vec::with_capacity(48);
        aad.extend_from_slice(b"zkace-sealed");
        aad.extend_from_slice(&self.version.to_le_bytes());
        aad.extend_from_slice(&self.kdf_params.m_cost_kib.to_le_bytes());
        aad.extend_from_slice(&self.kdf_params.t_cost.to_le_bytes());
        aad.extend_from_slice(&self.kdf_params.p_cost.to_le_bytes());
        aad.extend_from_slice(&self.kdf_salt);
        aad
    }
}

fn wrapping_key(credential: &[u8], salt: &[u8], params: &KdfParams) -> Result<Zeroizing<[u8; 32]>, DidpError> {
    let mut key = Zeroizing::new([0u8; 32]);
    params
        .argon2()?
        .hash_password_into(credential, salt, key.as_mut())
        .map_err(|e| DidpError::Kdf(e.to_string()))?;
    Ok(key)
}

pub const IDENTITY_FORMAT_VERSION: u32 = 1;

/// On-disk identity: the sealed root entropy and the commitment salt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct IdentityFile {
    pub format_version: u32,
    pub salt: FieldElement,
    pub sealed: SealedArtifact,
}

impl IdentityFile {
    pub fn new(salt: FieldElement, sealed: SealedArtifact) -> Self {
        Self { format_version: IDENTITY_FORMAT_VERSION, salt, sealed }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("identity file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DidpError> {
        let file: IdentityFile = serde_json::from_str(text).map_err(|e| DidpError::Malformed(e.to_string()))?;
        if file.format_version != IDENTITY_FORMAT_VERSION {
            return Err(DidpError::UnsupportedVersion(file.format_version));
        }
        file.sealed.check_shape()?;
        Ok(file)
    }
}

/// Encrypts `rev` under `credential` with fresh salt and nonce.
pub fn seal<R: RngCore + CryptoRng + ?Sized>(
    rev: &RootEntropy,
    credential: &[u8],
    kdf_params: KdfParams,
    rng: &mut R,
) -> Result<SealedArtifact, DidpError> {
    if credential.is_empty() {
        return Err(DidpError::EmptyCredential);
    }
    let mut kdf_salt = vec![0u8; KDF_SALT_BYTES];
    rng.fill_bytes(&mut kdf_salt);
    let mut nonce = vec![0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let mut artifact = SealedArtifact {
        version: SEALED_FORMAT_VERSION,
        kdf_salt,
        kdf_params,
        nonce,
        ciphertext: Vec::new(),
        tag: Vec::new(),
    };
    let key = wrapping_key(credential, &artifact.kdf_salt, &kdf_params)?;
    let cipher = XChaCha20Poly1305::new(key.as_ref().into());
    let aad = artifact.associated_data();
    let mut sealed = cipher
        .encrypt(XNonce::from_slice(&artifact.nonce), Payload { msg: rev.as_bytes(), aad: &aad })
        .map_err(|_| DidpError::Kdf("encryption failed".into()))?;
    artifact.tag = sealed.split_off(32);
    artifact.ciphertext = sealed;
    Ok(artifact)
}

/// Recovers the root entropy; a wrong credential or any tampering yields
/// [`DidpError::AuthenticationFailed`].
pub fn unseal(artifact: &SealedArtifact, credential: &[u8]) -> Result<RootEntropy, DidpError> {
    artifact.check_shape()?;
    let key = wrapping_key(credential, &artifact.kdf_salt, &artifact.kdf_params)?;
    let cipher = XChaCha20Poly1305::new(key.as_ref().into());
    let mut combined = artifact.ciphertext.clone();
    combined.extend_from_slice(&artifact.tag);
    let aad = artifact.associated_data();
    let plain = Zeroizing::new(
        cipher
            .decrypt(XNonce::from_slice(&artifact.nonce), Payload { msg: &combined, aad: &aad })
            .map_err(|_| DidpError::AuthenticationFailed)?,
    );
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&plain);
    Ok(RootEntropy::from_bytes(bytes))
}

pub fn derive_with(params: &HashParams, rev: &RootEntropy, ctx: &DerivationContext) -> FieldElement {
    let inputs = [rev.to_field(), ctx.alg_id, ctx.ctx_domain, ctx.index];
    hash::hash_with(params, &inputs, DomainTag::DeriveInner).expect("non-empty input")
}

/// Circuit-native derived key for `ctx`.
pub fn derive(rev: &RootEntropy, ctx: &DerivationContext) -> FieldElement {
    derive_with(&HashParams::reference(), rev, ctx)
}

pub fn derive_target_with(params: &HashParams, rev: &RootEntropy, ctx: &DerivationContext) -> FieldElement {
    let key = derive_with(params, rev, ctx);
    hash::hash_with(params, &[key], DomainTag::DeriveOuter).expect("non-empty input")
}

/// Public commitment to the derived key.
pub fn derive_target(rev: &RootEntropy, ctx: &DerivationContext) -> FieldElement {
    derive_target_with(&HashParams::reference(), rev, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(11)
    }

    #[test]
    fn seal_round_trip_and_freshness() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let a = seal(&rev, b"pw", KdfParams::TEST, &mut rng).unwrap();
        let b = seal(&rev, b"pw", KdfParams::TEST, &mut rng).unwrap();
        assert_ne!(a, b);
        assert_eq!(unseal(&a, b"pw").unwrap(), rev);
        assert_eq!(unseal(&b, b"pw").unwrap(), rev);
    }

    #[test]
    fn wrong_credential_fails_authentication() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let a = seal(&rev, b"pw", KdfParams::TEST, &mut rng).unwrap();
        assert!(matches!(unseal(&a, b"pw2"), Err(DidpError::AuthenticationFailed)));
    }

    #[test]
    fn empty_credential_rejected() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        assert!(matches!(seal(&rev, b"", KdfParams::TEST, &mut rng), Err(DidpError::EmptyCredential)));
    }

    #[test]
    fn truncated_artifact_is_a_parse_error() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let a = seal(&rev, b"pw", KdfParams::TEST, &mut rng).unwrap();
        let mut short = a.clone();
        short.ciphertext.pop();
        assert!(matches!(unseal(&short, b"pw"), Err(DidpError::Malformed(_))));
        let json = a.to_json();
        assert!(matches!(SealedArtifact::from_json(&json[..json.len() / 2]), Err(DidpError::Malformed(_))));
        let mut v2 = a.clone();
        v2.version = 2;
        assert!(matches!(SealedArtifact::from_json(&v2.to_json()), Err(DidpError::UnsupportedVersion(2))));
        assert_eq!(SealedArtifact::from_json(&json).unwrap(), a);
    }

    #[test]
    fn header_tampering_detected() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let mut a = seal(&rev, b"pw", KdfParams::TEST, &mut rng).unwrap();
        a.kdf_params.t_cost = 2;
        assert!(matches!(unseal(&a, b"pw"), Err(DidpError::AuthenticationFailed)));
    }

    #[test]
    fn round_trip_and_authentication_over_random_pairs() {
        let mut rng = rng();
        for i in 0..100 {
            let rev = RootEntropy::generate(&mut rng);
            let len = rng.gen_range(1..40);
            let cred: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let sealed = seal(&rev, &cred, KdfParams::TEST, &mut rng).unwrap();
            assert_eq!(unseal(&sealed, &cred).unwrap(), rev);

            if i % 2 == 0 {
                let mut bad = cred.clone();
                let pos = rng.gen_range(0..bad.len());
                bad[pos] ^= 1 << rng.gen_range(0..8);
                assert!(matches!(unseal(&sealed, &bad), Err(DidpError::AuthenticationFailed)));
            } else {
                let mut flipped = sealed.clone();
                let pos = rng.gen_range(0..32);
                flipped.ciphertext[pos] ^= 1 << rng.gen_range(0..8);
                assert!(matches!(unseal(&flipped, &cred), Err(DidpError::AuthenticationFailed)));
            }
        }
    }

    #[test]
    fn derivation_properties() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let ctx = DerivationContext::new(1, FieldElement::from_u64(77), 0);
        assert_eq!(derive(&rev, &ctx), derive(&rev, &ctx));
        assert_eq!(derive_target(&rev, &ctx), derive_target(&rev, &ctx));
        assert_ne!(derive_target(&rev, &ctx), derive(&rev, &ctx));
        let next = DerivationContext::new(1, FieldElement::from_u64(77), 1);
        assert_ne!(derive(&rev, &ctx), derive(&rev, &next));
    }

    #[test]
    fn context_isolation() {
        let mut rng = rng();
        let rev = RootEntropy::generate(&mut rng);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1_000 {
            let ctx = DerivationContext {
                alg_id: FieldElement::random(&mut rng),
                ctx_domain: FieldElement::random(&mut rng),
                index: FieldElement::random(&mut rng),
            };
            assert!(seen.insert(derive(&rev, &ctx)));
        }
    }

    #[test]
    fn debug_redacts() {
        let rev = RootEntropy::from_bytes([9; 32]);
        assert_eq!(format!("{rev:?}"), "RootEntropy(<redacted>)");
    }
}
