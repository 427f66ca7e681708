//! Per-transaction authorization bytes: post-quantum signature schemes vs.
//! commitment + proof + public inputs.
//!
//! Byte counts cover cryptographic artifacts only; chain encodings (RLP,
//! SSZ, ABI padding) are not modelled.

use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::circuit::PublicInputs;
use crate::field::FieldElement;

/// Whether the signer's public key travels with the transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Amortization {
    /// First transaction from this key: public key included.
    #[default]
    FirstUse,
    /// Key already known to the chain: public key amortized to zero.
    RepeatSender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ArtifactProfile {
    pub name: String,
    pub signature_or_proof_bytes: u64,
    pub public_key_bytes: u64,
    pub commitment_bytes: u64,
    pub public_input_bytes: u64,
    /// The signature size is a typical value rather than a fixed one.
    #[serde(default)]
    pub approximate: bool,
    pub amortization: Amortization,
    pub total_bytes: u64,
}

impl ArtifactProfile {
    fn new(
        name: &str,
        sig: u64,
        pk: u64,
        commitment: u64,
        inputs: u64,
        approximate: bool,
        amortization: Amortization,
    ) -> Self {
        let pk_on_chain = match amortization {
            Amortization::FirstUse => pk,
            Amortization::RepeatSender => 0,
        };
        Self {
            name: name.to_string(),
            signature_or_proof_bytes: sig,
            public_key_bytes: pk,
            commitment_bytes: commitment,
            public_input_bytes: inputs,
            approximate,
            amortization,
            total_bytes: sig + pk_on_chain + commitment + inputs,
        }
    }

    /// Signature-scheme profile: signature plus (unless amortized) public key.
    pub fn signature(name: &str, sig: u64, pk: u64, approximate: bool, amortization: Amortization) -> Self {
        Self::new(name, sig, pk, 0, 0, approximate, amortization)
    }
}

/// (name, signature bytes, public key bytes, approximate)
const SIGNATURE_SCHEMES: [(&str, u64, u64, bool); 7] = [
    ("ml-dsa-44", 2420, 1312, false),
    ("ml-dsa-65", 3309, 1952, false),
    ("ml-dsa-87", 4627, 2592, false),
    ("slh-dsa-128f", 17088, 32, false),
    ("fn-dsa-512", 666, 897, true),
    ("ed25519", 64, 32, false),
    ("secp256k1", 71, 33, true),
];

pub fn builtin_profiles(amortization: Amortization) -> Vec<ArtifactProfile> {
    SIGNATURE_SCHEMES
        .iter()
        .map(|&(name, sig, pk, approx)| ArtifactProfile::signature(name, sig, pk, approx, amortization))
        .collect()
}

pub fn builtin_profile(name: &str, amortization: Amortization) -> Option<ArtifactProfile> {
    builtin_profiles(amortization).into_iter().find(|p| p.name == name)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SIGNATURE_SCHEMES.iter().map(|s| s.0)
}

/// Identity commitment, the given proof size, and the circuit's public inputs.
pub fn zkace_profile(proof_bytes: u64) -> ArtifactProfile {
    ArtifactProfile::new(
        "zkace",
        proof_bytes,
        0,
        FieldElement::BYTES as u64,
        PublicInputs::byte_len() as u64,
        false,
        Amortization::FirstUse,
    )
}

/// Caveats attached to every comparison.
pub const CAVEATS: [&str; 3] = [
    "Public-key amortization: repeat senders whose key the chain already knows pay no public-key bytes in the signature model, which shrinks the gap.",
    "Proof size depends on the proof system: Groth16 gives roughly 128-256 bytes; PLONK- or STARK-style proofs are larger.",
    "Chain encodings (RLP, SSZ, ABI) add overhead to both sides and are not counted; this is an artifact-size comparison, not a gas estimate.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReductionReport {
    pub pqc: ArtifactProfile,
    pub zk: ArtifactProfile,
    /// `pqc.total_bytes / zk.total_bytes`
    pub ratio: f64,
    pub caveats: Vec<String>,
}

pub fn reduction_report(pqc: &ArtifactProfile, zk: &ArtifactProfile) -> ReductionReport {
    ReductionReport {
        pqc: pqc.clone(),
        zk: zk.clone(),
        ratio: pqc.total_bytes as f64 / zk.total_bytes as f64,
        caveats: CAVEATS.iter().map(|s| s.to_string()).collect(),
    }
}

fn bytes(n: u64, approx: bool) -> String {
    if approx {
        format!("~{n} B")
    } else {
        format!("{n} B")
    }
}

impl ReductionReport {
    pub fn render_table(&self) -> String {
        let (p, z) = (&self.pqc, &self.zk);
        let pk = match p.amortization {
            Amortization::FirstUse => bytes(p.public_key_bytes, false),
            Amortization::RepeatSender => "0 B (amortized)".to_string(),
        };
        let rows = [
            ("Component", p.name.clone(), z.name.clone()),
            (
                "Signature / proof",
                bytes(p.signature_or_proof_bytes, p.approximate),
                bytes(z.signature_or_proof_bytes, z.approximate),
            ),
            ("Public key", pk, "0 B (commitment reused)".to_string()),
            ("Identity commitment", "-".to_string(), bytes(z.commitment_bytes, false)),
            ("Public inputs", "-".to_string(), bytes(z.public_input_bytes, false)),
            (
                "Total per tx",
                bytes(p.total_bytes, p.approximate),
                bytes(z.total_bytes, z.approximate),
            ),
        ];
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap();
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap();
        let w2 = rows.iter().map(|r| r.2.len()).max().unwrap();
        let mut out = String::new();
        for (i, (a, b, c)) in rows.iter().enumerate() {
            let _ = writeln!(out, "{a:<w0$}  {b:>w1$}  {c:>w2$}");
            if i == 0 || i == rows.len() - 2 {
                let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + w2 + 4));
            }
        }
        let _ = writeln!(out, "\nReduction: {:.1}x", self.ratio);
        for (i, c) in self.caveats.iter().enumerate() {
            let _ = writeln!(out, "({}) {c}", ["i", "ii", "iii"].get(i).unwrap_or(&"*"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_profiles_give_ratio_one() {
        let p = zkace_profile(128);
        assert_eq!(reduction_report(&p, &p).ratio, 1.0);
    }

    #[test]
    fn repeat_sender_drops_public_key() {
        let ed = builtin_profile("ed25519", Amortization::RepeatSender).unwrap();
        assert_eq!(ed.total_bytes, 64);
        let ml = builtin_profile("ml-dsa-44", Amortization::RepeatSender).unwrap();
        assert_eq!(ml.total_bytes, 2420);
    }

    #[test]
    fn public_input_bytes_follow_circuit_layout() {
        assert_eq!(zkace_profile(0).public_input_bytes, 32 * PublicInputs::COUNT as u64);
    }

    #[test]
    fn table_mentions_every_caveat() {
        let pqc = builtin_profile("ml-dsa-44", Amortization::FirstUse).unwrap();
        let text = reduction_report(&pqc, &zkace_profile(128)).render_table();
        assert!(text.contains("3732 B"));
        assert!(text.contains("320 B"));
        assert!(text.contains("(iii)"));
        assert!(text.contains("11.7x"));
    }
}
