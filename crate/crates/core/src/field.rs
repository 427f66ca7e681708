//! BN254 scalar-field elements with a canonical byte and hex encoding.

use std::fmt;
use std::str::FromStr;

use ark_bn254::Fr;
use ark_ff::{BigInteger, PrimeField, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised when decoding a field element.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("encoded value is not below the field modulus")]
    NonCanonical,
    #[error("expected 32 bytes, got {0}")]
    BadLength(usize),
    #[error("expected 64 hex characters, got {0}")]
    BadHexLength(usize),
    #[error("invalid hex: {0}")]
    BadHex(String),
}

/// An element of the BN254 scalar field.
///
/// Canonical byte form is 32 bytes little-endian; the text form is 64
/// lowercase hex characters, big-endian.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldElement(pub(crate) Fr);

impl FieldElement {
    pub const BYTES: usize = 32;

    pub const fn from_fr(fr: Fr) -> Self {
        Self(fr)
    }

    pub fn to_fr(self) -> Fr {
        self.0
    }

    pub fn zero() -> Self {
        Self(Fr::zero())
    }

    pub fn from_u64(v: u64) -> Self {
        Self(Fr::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Reduces an arbitrary little-endian integer modulo p.
    pub fn from_le_bytes_mod_order(bytes: &[u8]) -> Self {
        Self(Fr::from_le_bytes_mod_order(bytes))
    }

    /// Decodes the canonical 32-byte little-endian form, rejecting values `>= p`.
    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, FieldError> {
        if bytes.len() != Self::BYTES {
            return Err(FieldError::BadLength(bytes.len()));
        }
        let fr = Fr::from_le_bytes_mod_order(bytes);
        if fr.into_bigint().to_bytes_le() != bytes {
            return Err(FieldError::NonCanonical);
        }
        Ok(Self(fr))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out.copy_from_slice(&self.0.into_bigint().to_bytes_le());
        out
    }

    pub fn to_hex(&self) -> String {
        let mut be = self.to_bytes();
        be.reverse();
        hex::encode(be)
    }

    pub fn from_hex(s: &str) -> Result<Self, FieldError> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != 64 {
            return Err(FieldError::BadHexLength(s.len()));
        }
        let mut bytes = hex::decode(s).map_err(|e| FieldError::BadHex(e.to_string()))?;
        bytes.reverse();
        Self::from_canonical_bytes(&bytes)
    }

    /// Interprets the element as an unsigned counter if it fits in 64 bits.
    pub fn as_u64(&self) -> Option<u64> {
        let bytes = self.to_bytes();
        if bytes[8..].iter().any(|&b| b != 0) {
            return None;
        }
        Some(u64::from_le_bytes(bytes[..8].try_into().unwrap()))
    }

    pub fn random<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::from_le_bytes_mod_order(&wide)
    }
}

impl From<Fr> for FieldElement {
    fn from(fr: Fr) -> Self {
        Self(fr)
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

impl std::ops::Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe({})", self.to_hex())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for FieldElement {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Schema: 64 lowercase hex digits, big-endian canonical encoding.
impl schemars::JsonSchema for FieldElement {
    fn schema_name() -> String {
        "FieldElement".into()
    }

    fn json_schema(_: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        hex32_schema()
    }
}

pub(crate) fn hex32_schema() -> schemars::schema::Schema {
    use schemars::schema::{InstanceType, SchemaObject, StringValidation};
    SchemaObject {
        instance_type: Some(InstanceType::String.into()),
        string: Some(Box::new(StringValidation {
            pattern: Some("^[0-9a-f]{64}$".into()),
            ..Default::default()
        })),
        ..Default::default()
    }
    .into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // p - 1 and p, big-endian hex.
    const P_MINUS_ONE: &str = "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593f0000000";
    const P: &str = "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593f0000001";

    #[test]
    fn modulus_boundary() {
        assert!(FieldElement::from_hex(P_MINUS_ONE).is_ok());
        assert_eq!(FieldElement::from_hex(P), Err(FieldError::NonCanonical));
        let max = FieldElement::from_hex(P_MINUS_ONE).unwrap();
        assert_eq!(max + FieldElement::from_u64(1), FieldElement::zero());
    }

    #[test]
    fn hex_is_big_endian_lowercase() {
        let one = FieldElement::from_u64(1);
        assert_eq!(one.to_hex(), format!("{}1", "0".repeat(63)));
        assert_eq!(one.to_bytes()[0], 1);
        let v = FieldElement::from_u64(0xabcdef);
        assert!(v.to_hex().ends_with("abcdef"));
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(FieldElement::from_hex("00"), Err(FieldError::BadHexLength(2)));
        assert!(matches!(FieldElement::from_hex(&"zz".repeat(32)), Err(FieldError::BadHex(_))));
        assert_eq!(FieldElement::from_canonical_bytes(&[0u8; 31]), Err(FieldError::BadLength(31)));
        assert_eq!(FieldElement::from_canonical_bytes(&[0xff; 32]), Err(FieldError::NonCanonical));
    }

    #[test]
    fn counter_view() {
        assert_eq!(FieldElement::from_u64(42).as_u64(), Some(42));
        assert_eq!(FieldElement::from_hex(P_MINUS_ONE).unwrap().as_u64(), None);
    }

    proptest! {
        #[test]
        fn reduce_then_reencode_round_trips(bytes in proptest::array::uniform32(any::<u8>())) {
            let fe = FieldElement::from_le_bytes_mod_order(&bytes);
            let enc = fe.to_bytes();
            prop_assert_eq!(enc[31] & 0xc0, 0);
            prop_assert_eq!(FieldElement::from_canonical_bytes(&enc).unwrap(), fe);
            prop_assert_eq!(FieldElement::from_hex(&fe.to_hex()).unwrap(), fe);
            let json = serde_json::to_string(&fe).unwrap();
            prop_assert_eq!(serde_json::from_str::<FieldElement>(&json).unwrap(), fe);
        }
    }
}
