use std::sync::Arc;

use ark_bn254::{Bn254, Fr, G1Projective};
use ark_ec::pairing::Pairing;
use ark_ec::CurveGroup;
use ark_ff::{Field, PrimeField, UniformRand, Zero};
use ark_groth16::{prepare_verifying_key, Groth16, PreparedVerifyingKey, Proof, ProvingKey, VerifyingKey};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize, Compress, Validate};
use rand::{CryptoRng, Rng, RngCore};

use super::{BackendError, Rejection};
use crate::circuit::{eval, AuthorizationCircuit, AuthorizationWitness, PublicInputs, ReplayMode};
use crate::hash::HashParams;

/// Compressed size of a BN254 Groth16 proof: two G1 points and one G2 point.
pub(super) const PROOF_BYTES: usize = 128;

pub(super) struct RealProvingKey(ProvingKey<Bn254>);

pub(super) struct RealVerifyingKey(PreparedVerifyingKey<Bn254>);

fn check_input_count(vk: &VerifyingKey<Bn254>, what: &'static str) -> Result<(), BackendError> {
    if vk.gamma_abc_g1.len() != PublicInputs::COUNT + 1 {
        return Err(BackendError::malformed(what, "wrong number of public inputs"));
    }
    Ok(())
}

pub(super) fn setup<R: RngCore + CryptoRng>(
    params: Arc<HashParams>,
    mode: ReplayMode,
    rng: &mut R,
) -> Result<RealProvingKey, BackendError> {
    let circuit = AuthorizationCircuit::blank(params, mode);
    Ok(RealProvingKey(Groth16::<Bn254>::generate_random_parameters_with_reduction(circuit, rng)?))
}

pub(super) fn prove<R: RngCore + CryptoRng>(
    pk: &RealProvingKey,
    params: Arc<HashParams>,
    mode: ReplayMode,
    witness: &AuthorizationWitness,
    public: &PublicInputs,
    rng: &mut R,
    checked: bool,
) -> Result<Vec<u8>, BackendError> {
    let a = eval::assign(params, mode, witness, public)?;
    if checked {
        let rows = a.unsatisfied_rows();
        if !rows.is_empty() {
            return Err(BackendError::UnsatisfiedWitness(a.failing(&rows).into_iter().collect()));
        }
    }
    let (r, s) = (Fr::rand(rng), Fr::rand(rng));
    let m = &a.matrices;
    let proof = Groth16::<Bn254>::create_proof_with_reduction_and_matrices(
        &pk.0,
        r,
        s,
        m,
        m.num_instance_variables,
        m.num_constraints,
        &a.z,
    )?;
    let mut out = Vec::with_capacity(PROOF_BYTES);
    proof.serialize_compressed(&mut out).expect("in-memory write");
    Ok(out)
}

fn decode_proof(bytes: &[u8]) -> Result<Proof<Bn254>, Rejection> {
    if bytes.len() != PROOF_BYTES {
        return Err(Rejection::Malformed(format!("expected {PROOF_BYTES} bytes, got {}", bytes.len())));
    }
    Proof::deserialize_compressed(bytes).map_err(|e| Rejection::Malformed(e.to_string()))
}

impl RealProvingKey {
    pub(super) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.0.serialize_uncompressed(&mut out).expect("in-memory write");
        out
    }

    /// Proving keys are local prover state; points are not re-validated on load.
    pub(super) fn from_bytes(bytes: &[u8]) -> Result<Self, BackendError> {
        let pk = ProvingKey::deserialize_with_mode(bytes, Compress::No, Validate::No)
            .map_err(|e| BackendError::malformed("proving key", e))?;
        check_input_count(&pk.vk, "proving key")?;
        Ok(Self(pk))
    }
}

impl RealVerifyingKey {
    pub(super) fn from_proving_key(pk: &RealProvingKey) -> Self {
        Self(prepare_verifying_key(&pk.0.vk))
    }

    pub(super) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.0.vk.serialize_compressed(&mut out).expect("in-memory write");
        out
    }

    pub(super) fn from_bytes(bytes: &[u8]) -> Result<Self, BackendError> {
        let vk = VerifyingKey::deserialize_compressed(bytes).map_err(|e| BackendError::malformed("verifying key", e))?;
        check_input_count(&vk, "verifying key")?;
        Ok(Self(prepare_verifying_key(&vk)))
    }

    pub(super) fn verify(&self, bytes: &[u8], public: &PublicInputs) -> Result<bool, Rejection> {
        let proof = decode_proof(bytes)?;
        Ok(Groth16::<Bn254>::verify_proof(&self.0, &proof, &public.to_fr_vec()).unwrap_or(false))
    }

    /// Checks `prod_i e(r_i A_i, B_i) * e(sum r_i IC_i, -gamma) * e(sum r_i C_i, -delta)
    /// == e(alpha, beta)^(sum r_i)` with independent 128-bit `r_i`.
    pub(super) fn batch_verify<'a, R: RngCore>(
        &self,
        items: impl Iterator<Item = (&'a [u8], &'a PublicInputs)>,
        rng: &mut R,
    ) -> bool {
        let pvk = &self.0;
        let mut g1 = Vec::new();
        let mut g2 = Vec::new();
        let mut ic_acc = G1Projective::zero();
        let mut c_acc = G1Projective::zero();
        let mut r_sum = Fr::zero();
        for (bytes, public) in items {
            let Ok(proof) = decode_proof(bytes) else { return false };
            let Ok(ic) = Groth16::<Bn254>::prepare_inputs(pvk, &public.to_fr_vec()) else { return false };
            let r = Fr::from(rng.gen::<u128>() | 1);
            g1.push(<Bn254 as Pairing>::G1Prepared::from((proof.a * r).into_affine()));
            g2.push(<Bn254 as Pairing>::G2Prepared::from(proof.b));
            ic_acc += ic * r;
            c_acc += proof.c * r;
            r_sum += r;
        }
        g1.push(ic_acc.into_affine().into());
        g2.push(pvk.gamma_g2_neg_pc.clone());
        g1.push(c_acc.into_affine().into());
        g2.push(pvk.delta_g2_neg_pc.clone());
        match Bn254::final_exponentiation(Bn254::multi_miller_loop(g1, g2)) {
            Some(out) => out.0 == pvk.alpha_g1_beta_g2.pow(r_sum.into_bigint()),
            None => false,
        }
    }
}
