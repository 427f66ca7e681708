use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use zeroize::Zeroizing;

use super::BackendError;
use crate::circuit::{CircuitId, PublicInputs};

type HmacSha256 = Hmac<Sha256>;

/// Shared MAC key; the same bytes serve as proving and verifying key.
#[derive(Clone)]
pub(super) struct MockKey(Zeroizing<[u8; 32]>);

impl MockKey {
    pub(super) fn from_seed(seed: &[u8; 32]) -> Self {
        let mut h = Sha256::new();
        h.update(b"zkace/mock/key/v1");
        h.update(seed);
        Self(Zeroizing::new(h.finalize().into()))
    }

    fn mac(&self, circuit_id: &CircuitId, public: &PublicInputs) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(&*self.0).expect("any key length");
        mac.update(b"zkace/mock/v1");
        mac.update(&circuit_id.0);
        mac.update(&public.to_bytes());
        mac
    }

    pub(super) fn tag(&self, circuit_id: &CircuitId, public: &PublicInputs) -> [u8; 32] {
        self.mac(circuit_id, public).finalize().into_bytes().into()
    }

    pub(super) fn check(&self, circuit_id: &CircuitId, public: &PublicInputs, bytes: &[u8]) -> bool {
        self.mac(circuit_id, public).verify_slice(bytes).is_ok()
    }

    pub(super) fn to_bytes(&self) -> Vec<u8> {
        self.0.to_vec()
    }

    pub(super) fn from_bytes(bytes: &[u8]) -> Result<Self, BackendError> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| BackendError::malformed("mock key", "expected 32 bytes"))?;
        Ok(Self(Zeroizing::new(arr)))
    }
}
