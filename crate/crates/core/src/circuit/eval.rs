//! Direct evaluation of the constraint matrices against an assignment.
//!
//! The witness wires are generated from an honest statement; the public
//! inputs checked against them may be substituted. This is how "same
//! witness, different claim" is tested without a proof system in the loop.

use std::collections::BTreeSet;
use std::sync::Arc;

use ark_bn254::Fr;
use ark_ff::Zero;
use ark_relations::r1cs::{
    ConstraintMatrices, ConstraintSystem, Matrix, OptimizationGoal, SynthesisError, SynthesisMode,
};

use super::{
    AuthorizationCircuit, AuthorizationWitness, ConstraintId, PublicInputs, ReplayMode, SynthesisTrace, WireTrace,
};
use crate::hash::HashParams;

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub unsatisfied_rows: Vec<usize>,
    pub failing: BTreeSet<ConstraintId>,
    pub wires: WireTrace,
}

impl EvalReport {
    pub fn is_satisfied(&self) -> bool {
        self.unsatisfied_rows.is_empty()
    }
}

fn dot(row: &[(Fr, usize)], z: &[Fr]) -> Fr {
    row.iter().map(|(c, i)| *c * z[*i]).sum()
}

/// Rows `i` where `<a_i, z> * <b_i, z> != <c_i, z>`.
pub fn unsatisfied_rows(a: &Matrix<Fr>, b: &Matrix<Fr>, c: &Matrix<Fr>, z: &[Fr]) -> Vec<usize> {
    (0..a.len()).filter(|&i| dot(&a[i], z) * dot(&b[i], z) - dot(&c[i], z) != Fr::zero()).collect()
}

/// Matrices and full assignment `z = (1, instance, witness)` for one statement.
pub struct Assignment {
    pub matrices: ConstraintMatrices<Fr>,
    pub z: Vec<Fr>,
    pub trace: SynthesisTrace,
}

impl Assignment {
    pub fn unsatisfied_rows(&self) -> Vec<usize> {
        unsatisfied_rows(&self.matrices.a, &self.matrices.b, &self.matrices.c, &self.z)
    }

    pub fn failing(&self, rows: &[usize]) -> BTreeSet<ConstraintId> {
        rows.iter().filter_map(|&r| self.trace.section_of(r)).collect()
    }
}

/// Synthesizes `(witness, public)` in proving mode.
pub fn assign(
    params: Arc<HashParams>,
    mode: ReplayMode,
    witness: &AuthorizationWitness,
    public: &PublicInputs,
) -> Result<Assignment, SynthesisError> {
    let cs = ConstraintSystem::<Fr>::new_ref();
    cs.set_optimization_goal(OptimizationGoal::Constraints);
    cs.set_mode(SynthesisMode::Prove { construct_matrices: true });
    let circuit = AuthorizationCircuit::with_assignment(params, mode, witness.clone(), *public);
    let trace = circuit.synthesize(&cs)?;
    cs.finalize();
    let matrices = cs.to_matrices().ok_or(SynthesisError::AssignmentMissing)?;
    let inner = cs.borrow().ok_or(SynthesisError::MissingCS)?;
    let mut z = inner.instance_assignment.clone();
    z.extend_from_slice(&inner.witness_assignment);
    drop(inner);
    Ok(Assignment { matrices, z, trace })
}

/// Builds the assignment from `(witness, honest)` and checks every
/// constraint with the instance replaced by `claimed`.
pub fn evaluate(
    params: Arc<HashParams>,
    mode: ReplayMode,
    witness: &AuthorizationWitness,
    honest: &PublicInputs,
    claimed: &PublicInputs,
) -> Result<EvalReport, SynthesisError> {
    let mut a = assign(params, mode, witness, honest)?;
    for (slot, v) in a.z[1..=PublicInputs::COUNT].iter_mut().zip(claimed.to_fr_vec()) {
        *slot = v;
    }
    let rows = a.unsatisfied_rows();
    let failing = a.failing(&rows);
    Ok(EvalReport { unsatisfied_rows: rows, failing, wires: a.trace.wires })
}

pub fn is_satisfied(
    params: Arc<HashParams>,
    mode: ReplayMode,
    witness: &AuthorizationWitness,
    public: &PublicInputs,
) -> Result<bool, SynthesisError> {
    Ok(evaluate(params, mode, witness, public, public)?.is_satisfied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{make_statement, StatementRequest};
    use crate::didp::{DerivationContext, RootEntropy};
    use crate::field::FieldElement;
    use crate::hash;

    fn honest(mode: ReplayMode, ctx_domain: Option<FieldElement>) -> (AuthorizationWitness, PublicInputs) {
        let rev = RootEntropy::from_bytes([7; 32]);
        let domain = hash::domain_from_descriptor(b"chain/app").unwrap();
        let req = StatementRequest {
            rev: &rev,
            salt: FieldElement::from_u64(99),
            ctx: DerivationContext::new(2, ctx_domain.unwrap_or(domain), 4),
            nonce: FieldElement::from_u64(0),
            tx_payload: b"payload",
            domain,
            mode,
        };
        make_statement(&req).unwrap()
    }

    #[test]
    fn tx_hash_substitution_breaks_c3() {
        for mode in ReplayMode::ALL {
            let (w, p) = honest(mode, None);
            let claimed = p.with_field(1, p.tx_hash + FieldElement::from_u64(1));
            let r = evaluate(HashParams::reference(), mode, &w, &p, &claimed).unwrap();
            assert!(r.failing.contains(&ConstraintId::C3), "{mode}: {:?}", r.failing);
        }
    }

    #[test]
    fn context_domain_mismatch_breaks_c5_only() {
        for mode in ReplayMode::ALL {
            let (w, p) = honest(mode, Some(FieldElement::from_u64(12345)));
            let r = evaluate(HashParams::reference(), mode, &w, &p, &p).unwrap();
            assert_eq!(r.failing.iter().copied().collect::<Vec<_>>(), vec![ConstraintId::C5]);
            assert_eq!(r.unsatisfied_rows.len(), 1);
        }
    }

    #[test]
    fn degenerate_witness_values_are_legal() {
        let rev = RootEntropy::from_bytes([0; 32]);
        let domain = FieldElement::from_u64(5);
        for mode in ReplayMode::ALL {
            let req = StatementRequest {
                rev: &rev,
                salt: FieldElement::zero(),
                ctx: DerivationContext::new(0, domain, 0),
                nonce: FieldElement::zero(),
                tx_payload: b"",
                domain,
                mode,
            };
            let (w, p) = make_statement(&req).unwrap();
            assert!(is_satisfied(HashParams::reference(), mode, &w, &p).unwrap());
        }
    }
}
