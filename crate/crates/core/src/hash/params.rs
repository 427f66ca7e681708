//! Sponge permutation parameters: round constants and MDS matrix.
//!
//! The reference table is produced by [`generate`] and frozen in
//! `params/poseidon-bn254-t3-a17-v1.txt`. Loading the embedded table checks
//! it against a pinned SHA-256 so an accidental edit cannot silently change
//! every commitment downstream.
//!
//! Generation procedure (version 1):
//! - round constant `i` (row-major, `width` per round) is
//!   `SHA-512(seed || "/rc/" || be32(i))` read big-endian and reduced mod p;
//! - the MDS matrix is the Cauchy matrix `M[i][j] = 1 / (x_i + y_j)` with
//!   `x_i = i` and `y_j = width + j`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use ark_bn254::Fr;
use ark_ff::{Field, One, PrimeField, Zero};
use sha2::{Digest as _, Sha256, Sha512};
use thiserror::Error;

use crate::field::FieldElement;

pub const REFERENCE_TABLE: &str = include_str!("../../params/poseidon-bn254-t3-a17-v1.txt");
/// SHA-256 of [`REFERENCE_TABLE`].
pub const REFERENCE_TABLE_SHA256: &str =
    "0a06e1a57e70f0bcc1af55f02f64e6a997cecbf7d7042f64b3834cbdb00add1b";
pub const REFERENCE_SEED: &str = "zkace/poseidon/bn254/t3/a17/rf8/rp57/v1";

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("parameter table line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("reading parameter file: {0}")]
    Io(#[from] std::io::Error),
}

/// Width-3 sponge permutation parameters.
#[derive(Clone, PartialEq, Eq)]
pub struct HashParams {
    pub version: u32,
    pub width: usize,
    pub rate: usize,
    pub alpha: u64,
    pub full_rounds: usize,
    pub partial_rounds: usize,
    pub seed: String,
    /// `round_constants[r][lane]`.
    pub round_constants: Vec<[Fr; 3]>,
    pub mds: [[Fr; 3]; 3],
}

impl std::fmt::Debug for HashParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashParams")
            .field("version", &self.version)
            .field("width", &self.width)
            .field("rate", &self.rate)
            .field("alpha", &self.alpha)
            .field("full_rounds", &self.full_rounds)
            .field("partial_rounds", &self.partial_rounds)
            .field("digest", &hex::encode(self.digest()))
            .finish()
    }
}

impl HashParams {
    pub const WIDTH: usize = 3;

    /// The frozen reference table, verified against its pinned digest.
    pub fn reference() -> Arc<HashParams> {
        static REF: OnceLock<Arc<HashParams>> = OnceLock::new();
        REF.get_or_init(|| {
            let actual = hex::encode(Sha256::digest(REFERENCE_TABLE.as_bytes()));
            assert_eq!(
                actual, REFERENCE_TABLE_SHA256,
                "embedded hash parameter table does not match its pinned digest"
            );
            Arc::new(Self::parse(REFERENCE_TABLE).expect("embedded parameter table parses"))
        })
        .clone()
    }

    pub fn load(path: &Path) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn capacity(&self) -> usize {
        self.width - self.rate
    }

    pub fn total_rounds(&self) -> usize {
        self.full_rounds + self.partial_rounds
    }

    /// SHA-256 over the canonical text rendering; used in circuit identifiers.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let bad = |m: String| Err(ParamsError::Invalid(m));
        if self.width != Self::WIDTH {
            return bad(format!("width must be 3, got {}", self.width));
        }
        if self.rate == 0 || self.rate >= self.width {
            return bad(format!("rate {} incompatible with width {}", self.rate, self.width));
        }
        if self.full_rounds == 0 || !self.full_rounds.is_multiple_of(2) {
            return bad(format!("full rounds must be even and positive, got {}", self.full_rounds));
        }
        if self.round_constants.len() != self.total_rounds() {
            return bad(format!(
                "expected {} rounds of constants, got {}",
                self.total_rounds(),
                self.round_constants.len()
            ));
        }
        if self.alpha < 3 {
            return bad(format!("sbox exponent {} too small", self.alpha));
        }
        // x -> x^alpha is a permutation iff gcd(alpha, p - 1) = 1.
        if !coprime_to_p_minus_one(self.alpha) {
            return bad(format!("sbox exponent {} is not a permutation", self.alpha));
        }
        if det3(&self.mds).is_zero() {
            return bad("mds matrix is singular".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let mut version = None;
        let mut width = None;
        let mut rate = None;
        let mut alpha = None;
        let mut full = None;
        let mut partial = None;
        let mut seed = String::new();
        let mut mds_rows: Vec<[Fr; 3]> = Vec::new();
        let mut rcs: Vec<[Fr; 3]> = Vec::new();
        #[derive(PartialEq)]
        enum Section {
            Header,
            Mds,
            Rc,
        }
        let mut section = Section::Header;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| ParamsError::Parse { line: line_no, msg: msg.to_string() };
            match line {
                "mds" => {
                    section = Section::Mds;
                    continue;
                }
                "round_constants" => {
                    section = Section::Rc;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Header => {
                    let (key, value) = line.split_once(' ').ok_or_else(|| err("expected `key value`"))?;
                    let value = value.trim();
                    let num = || value.parse::<u64>().map_err(|_| err("expected integer"));
                    match key {
                        "version" => version = Some(num()? as u32),
                        "width" => width = Some(num()? as usize),
                        "rate" => rate = Some(num()? as usize),
                        "alpha" => alpha = Some(num()?),
                        "full_rounds" => full = Some(num()? as usize),
                        "partial_rounds" => partial = Some(num()? as usize),
                        "seed" => seed = value.to_string(),
                        "field" => {
                            if value != "bn254-fr" {
                                return Err(err("unsupported field"));
                            }
                        }
                        _ => return Err(err("unknown key")),
                    }
                }
                Section::Mds | Section::Rc => {
                    let row = parse_row(line).map_err(|m| err(&m))?;
                    if section == Section::Mds {
                        mds_rows.push(row);
                    } else {
                        rcs.push(row);
                    }
                }
            }
        }
        let missing = |k: &str| ParamsError::Invalid(format!("missing header `{k}`"));
        if mds_rows.len() != 3 {
            return Err(ParamsError::Invalid(format!("mds needs 3 rows, got {}", mds_rows.len())));
        }
        let params = HashParams {
            version: version.ok_or_else(|| missing("version"))?,
            width: width.ok_or_else(|| missing("width"))?,
            rate: rate.ok_or_else(|| missing("rate"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            full_rounds: full.ok_or_else(|| missing("full_rounds"))?,
            partial_rounds: partial.ok_or_else(|| missing("partial_rounds"))?,
            seed,
            round_constants: rcs,
            mds: [mds_rows[0], mds_rows[1], mds_rows[2]],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# Sponge permutation parameters (width 3, rate 2, capacity 1).\n");
        out.push_str("# Values are field elements, 64 hex characters, big-endian.\n");
        let _ = writeln!(out, "version {}", self.version);
        out.push_str("field bn254-fr\n");
        let _ = writeln!(out, "width {}", self.width);
        let _ = writeln!(out, "rate {}", self.rate);
        let _ = writeln!(out, "alpha {}", self.alpha);
        let _ = writeln!(out, "full_rounds {}", self.full_rounds);
        let _ = writeln!(out, "partial_rounds {}", self.partial_rounds);
        let _ = writeln!(out, "seed {}", self.seed);
        out.push_str("mds\n");
        for row in &self.mds {
            out.push_str(&render_row(row));
        }
        out.push_str("round_constants\n");
        for row in &self.round_constants {
            out.push_str(&render_row(row));
        }
        out
    }
}

fn render_row(row: &[Fr; 3]) -> String {
    let cells: Vec<String> = row.iter().map(|v| FieldElement::from_fr(*v).to_hex()).collect();
    format!("{}\n", cells.join(" "))
}

fn parse_row(line: &str) -> Result<[Fr; 3], String> {
    let cells: Vec<&str> = line.split_whitespace().collect();
    if cells.len() != 3 {
        return Err(format!("expected 3 values, got {}", cells.len()));
    }
    let mut row = [Fr::zero(); 3];
    for (slot, cell) in row.iter_mut().zip(cells) {
        *slot = FieldElement::from_hex(cell).map_err(|e| e.to_string())?.to_fr();
    }
    Ok(row)
}

fn coprime_to_p_minus_one(alpha: u64) -> bool {
    // Trial division of alpha's prime factors against p - 1.
    let p_minus_one = -Fr::one();
    let mut a = alpha;
    let mut f = 2u64;
    while f * f <= a {
        if a.is_multiple_of(f) {
            if divides_p_minus_one(f, p_minus_one) {
                return false;
            }
            while a.is_multiple_of(f) {
                a /= f;
            }
        }
        f += 1;
    }
    a == 1 || !divides_p_minus_one(a, p_minus_one)
}

fn divides_p_minus_one(f: u64, p_minus_one: Fr) -> bool {
    let big = p_minus_one.into_bigint();
    let mut rem: u128 = 0;
    for limb in big.as_ref().iter().rev() {
        rem = ((rem << 64) | *limb as u128) % f as u128;
    }
    rem == 0
}

fn det3(m: &[[Fr; 3]; 3]) -> Fr {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Deterministically derives a parameter set from `seed`.
pub fn generate(seed: &str, alpha: u64, full_rounds: usize, partial_rounds: usize) -> HashParams {
    let width = HashParams::WIDTH;
    let total = full_rounds + partial_rounds;
    let mut round_constants = Vec::with_capacity(total);
    let mut counter: u32 = 0;
    for _ in 0..total {
        let mut row = [Fr::zero(); 3];
        for slot in row.iter_mut() {
            let mut h = Sha512::new();
            h.update(seed.as_bytes());
            h.update(b"/rc/");
            h.update(counter.to_be_bytes());
            *slot = Fr::from_be_bytes_mod_order(&h.finalize());
            counter += 1;
        }
        round_constants.push(row);
    }
    let mut mds = [[Fr::zero(); 3]; 3];
    for (i, row) in mds.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let denom = Fr::from((i + width + j) as u64);
            *cell = denom.inverse().expect("nonzero");
        }
    }
    HashParams {
        version: 1,
        width,
        rate: 2,
        alpha,
        full_rounds,
        partial_rounds,
        seed: seed.to_string(),
        round_constants,
        mds,
    }
}

/// The reference parameterisation: alpha 17, 8 full and 57 partial rounds.
pub fn generate_reference() -> HashParams {
    generate(REFERENCE_SEED, 17, 8, 57)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_table_matches_generator() {
        assert_eq!(generate_reference().to_text(), REFERENCE_TABLE);
    }

    #[test]
    fn reference_shape() {
        let p = HashParams::reference();
        assert_eq!((p.width, p.rate, p.capacity()), (3, 2, 1));
        assert_eq!(p.alpha, 17);
        assert_eq!((p.full_rounds, p.partial_rounds), (8, 57));
        assert_eq!(p.round_constants.len() * p.width, 3 * 65);
        assert!(!det3(&p.mds).is_zero());
    }

    #[test]
    fn text_round_trip() {
        let p = HashParams::reference();
        assert_eq!(HashParams::parse(&p.to_text()).unwrap(), *p);
    }

    #[test]
    fn rejects_bad_tables() {
        let p = generate_reference();
        let mut q = p.clone();
        q.round_constants.pop();
        assert!(HashParams::parse(&q.to_text()).is_err());

        let mut q = p.clone();
        q.mds = [[Fr::one(); 3]; 3];
        assert!(matches!(HashParams::parse(&q.to_text()), Err(ParamsError::Invalid(_))));

        let mut q = p.clone();
        q.alpha = 3; // 3 divides p - 1
        assert!(matches!(q.validate(), Err(ParamsError::Invalid(_))));

        let text = p.to_text().replace("width 3", "width x");
        assert!(matches!(HashParams::parse(&text), Err(ParamsError::Parse { .. })));
    }

    #[test]
    fn sbox_exponents() {
        assert!(coprime_to_p_minus_one(17));
        assert!(coprime_to_p_minus_one(5));
        assert!(!coprime_to_p_minus_one(3));
        assert!(!coprime_to_p_minus_one(13));
    }
}
