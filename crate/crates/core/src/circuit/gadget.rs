//! R1CS wires and the in-circuit sponge.
//!
//! A [`Wire`] is a linear combination over constraint-system variables
//! together with its assigned value (absent during setup). Additions and
//! constant scalings are free; a product costs one constraint unless either
//! side is constant. The sponge gadget mirrors [`crate::hash::hash_with`]
//! exactly, so constant lanes in the first round fold away at no cost.

use ark_bn254::Fr;
use ark_ff::{BitIteratorBE, One, Zero};
use ark_relations::lc;
use ark_relations::r1cs::{ConstraintSystemRef, LinearCombination, SynthesisError, Variable};

use crate::hash::{DomainTag, HashParams};

#[derive(Clone, Debug)]
pub struct Wire {
    lc: LinearCombination<Fr>,
    value: Option<Fr>,
}

impl Wire {
    pub fn constant(c: Fr) -> Self {
        Self { lc: lc!() + (c, Variable::One), value: Some(c) }
    }

    pub fn from_variable(var: Variable, value: Option<Fr>) -> Self {
        Self { lc: lc!() + var, value }
    }

    pub fn witness(cs: &ConstraintSystemRef<Fr>, value: Option<Fr>) -> Result<Self, SynthesisError> {
        let var = cs.new_witness_variable(|| value.ok_or(SynthesisError::AssignmentMissing))?;
        Ok(Self::from_variable(var, value))
    }

    pub fn input(cs: &ConstraintSystemRef<Fr>, value: Option<Fr>) -> Result<Self, SynthesisError> {
        let var = cs.new_input_variable(|| value.ok_or(SynthesisError::AssignmentMissing))?;
        Ok(Self::from_variable(var, value))
    }

    pub fn value(&self) -> Option<Fr> {
        self.value
    }

    pub fn lc(&self) -> &LinearCombination<Fr> {
        &self.lc
    }

    pub fn is_constant(&self) -> bool {
        self.lc.0.iter().all(|(_, v)| *v == Variable::One)
    }

    fn constant_value(&self) -> Option<Fr> {
        if self.is_constant() {
            Some(self.lc.0.iter().map(|(c, _)| *c).sum())
        } else {
            None
        }
    }

    pub fn add(&self, other: &Wire) -> Wire {
        let mut terms = self.lc.0.clone();
        terms.extend(other.lc.0.iter().cloned());
        let mut lc = LinearCombination(terms);
        lc.compactify();
        lc.0.retain(|(c, _)| !c.is_zero());
        let value = self.value.zip(other.value).map(|(a, b)| a + b);
        Wire { lc, value }
    }

    pub fn add_constant(&self, c: Fr) -> Wire {
        self.add(&Wire::constant(c))
    }

    pub fn scale(&self, c: Fr) -> Wire {
        let mut lc = self.lc.clone();
        for (coeff, _) in lc.0.iter_mut() {
            *coeff *= c;
        }
        lc.0.retain(|(k, _)| !k.is_zero());
        Wire { lc, value: self.value.map(|v| v * c) }
    }

    pub fn mul(&self, cs: &ConstraintSystemRef<Fr>, other: &Wire) -> Result<Wire, SynthesisError> {
        if let Some(c) = self.constant_value() {
            return Ok(other.scale(c));
        }
        if let Some(c) = other.constant_value() {
            return Ok(self.scale(c));
        }
        let value = self.value.zip(other.value).map(|(a, b)| a * b);
        let product = Wire::witness(cs, value)?;
        cs.enforce_constraint(self.lc.clone(), other.lc.clone(), product.lc.clone())?;
        Ok(product)
    }

    /// `self^exp` by left-to-right square-and-multiply.
    pub fn pow(&self, cs: &ConstraintSystemRef<Fr>, exp: u64) -> Result<Wire, SynthesisError> {
        let mut acc = Wire::constant(Fr::one());
        for bit in BitIteratorBE::without_leading_zeros([exp]) {
            acc = acc.mul(cs, &acc)?;
            if bit {
                acc = acc.mul(cs, self)?;
            }
        }
        Ok(acc)
    }

    /// One constraint: `(self - other) * 1 = 0`.
    pub fn enforce_equal(&self, cs: &ConstraintSystemRef<Fr>, other: &Wire) -> Result<(), SynthesisError> {
        let diff = self.add(&other.scale(-Fr::one()));
        cs.enforce_constraint(diff.lc, lc!() + Variable::One, lc!())
    }
}

fn permute(cs: &ConstraintSystemRef<Fr>, params: &HashParams, state: &mut [Wire; 3]) -> Result<(), SynthesisError> {
    let half = params.full_rounds / 2;
    let partial_end = half + params.partial_rounds;
    for (round, rc) in params.round_constants.iter().enumerate() {
        for (lane, c) in state.iter_mut().zip(rc) {
            *lane = lane.add_constant(*c);
        }
        if round < half || round >= partial_end {
            for lane in state.iter_mut() {
                *lane = lane.pow(cs, params.alpha)?;
            }
        } else {
            state[0] = state[0].pow(cs, params.alpha)?;
        }
        let mixed: Vec<Wire> = params
            .mds
            .iter()
            .map(|row| state[0].scale(row[0]).add(&state[1].scale(row[1])).add(&state[2].scale(row[2])))
            .collect();
        *state = [mixed[0].clone(), mixed[1].clone(), mixed[2].clone()];
    }
    Ok(())
}

/// In-circuit counterpart of [`crate::hash::hash_with`].
pub fn hash(
    cs: &ConstraintSystemRef<Fr>,
    params: &HashParams,
    inputs: &[Wire],
    tag: DomainTag,
) -> Result<Wire, SynthesisError> {
    assert!(!inputs.is_empty(), "hash gadget needs at least one input");
    let mut state = [
        Wire::constant(tag.capacity_iv(inputs.len())),
        Wire::constant(Fr::zero()),
        Wire::constant(Fr::zero()),
    ];
    for block in inputs.chunks(params.rate) {
        for (lane, x) in state[1..].iter_mut().zip(block) {
            *lane = lane.add(x);
        }
        permute(cs, params, &mut state)?;
    }
    let [_, out, _] = state;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldElement;
    use ark_relations::r1cs::ConstraintSystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn gadget_matches_native_and_is_satisfied() {
        let params = HashParams::reference();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for arity in 1..=7 {
            let cs = ConstraintSystem::<Fr>::new_ref();
            let values: Vec<FieldElement> = (0..arity).map(|_| FieldElement::random(&mut rng)).collect();
            let wires: Vec<Wire> = values.iter().map(|v| Wire::witness(&cs, Some(v.to_fr())).unwrap()).collect();
            let out = hash(&cs, &params, &wires, DomainTag::Auth).unwrap();
            let native = crate::hash::hash_with(&params, &values, DomainTag::Auth).unwrap();
            assert_eq!(out.value(), Some(native.to_fr()));
            assert!(cs.is_satisfied().unwrap());
        }
    }

    #[test]
    fn permutation_costs() {
        let params = HashParams::reference();
        let count = |arity: usize, constant_tail: bool| {
            let cs = ConstraintSystem::<Fr>::new_ref();
            let mut wires: Vec<Wire> =
                (0..arity).map(|i| Wire::witness(&cs, Some(Fr::from(i as u64 + 1))).unwrap()).collect();
            if constant_tail {
                wires.push(Wire::constant(Fr::from(9u64)));
            }
            hash(&cs, &params, &wires, DomainTag::Auth).unwrap();
            cs.num_constraints()
        };
        // 81 sboxes at 5 constraints each; constant lanes in the first round are free.
        assert_eq!(count(1, false), 395);
        assert_eq!(count(2, false), 400);
        assert_eq!(count(3, false), 805);
        assert_eq!(count(4, false), 805);
        assert_eq!(count(7, false), 1615);
        assert_eq!(count(1, true), 395);
    }

    #[test]
    fn constant_folding() {
        let cs = ConstraintSystem::<Fr>::new_ref();
        let c = Wire::constant(Fr::from(3u64));
        let p = c.pow(&cs, 17).unwrap();
        assert_eq!(cs.num_constraints(), 0);
        assert_eq!(p.value(), Some(Fr::from(3u64).pow_u64(17)));
        let w = Wire::witness(&cs, Some(Fr::from(2u64))).unwrap();
        let q = w.pow(&cs, 17).unwrap();
        assert_eq!(cs.num_constraints(), 5);
        assert_eq!(q.value(), Some(Fr::from(1u64 << 17)));
        assert!(cs.is_satisfied().unwrap());
    }

    trait PowU64 {
        fn pow_u64(self, e: u64) -> Fr;
    }
    impl PowU64 for Fr {
        fn pow_u64(self, e: u64) -> Fr {
            ark_ff::Field::pow(&self, [e])
        }
    }

    #[test]
    fn enforce_equal_detects_mismatch() {
        let cs = ConstraintSystem::<Fr>::new_ref();
        let a = Wire::witness(&cs, Some(Fr::from(4u64))).unwrap();
        let b = Wire::witness(&cs, Some(Fr::from(5u64))).unwrap();
        a.enforce_equal(&cs, &b).unwrap();
        assert_eq!(cs.num_constraints(), 1);
        assert!(!cs.is_satisfied().unwrap());
    }
}
