//! Straight-line reference permutation over arbitrary-precision integers.
//!
//! Reads the parameter table text directly and shares no code with the
//! library's field or hash modules.

#![allow(dead_code)]

use num_bigint::BigUint;

pub const MODULUS_DEC: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

pub struct Table {
    pub p: BigUint,
    pub alpha: u64,
    pub full: usize,
    pub partial: usize,
    pub mds: Vec<Vec<BigUint>>,
    pub rc: Vec<BigUint>,
}

pub fn load() -> Table {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/params/poseidon-bn254-t3-a17-v1.txt");
    let text = std::fs::read_to_string(path).unwrap();
    let mut alpha = 0;
    let mut full = 0;
    let mut partial = 0;
    let mut mds = Vec::new();
    let mut rc = Vec::new();
    let mut section = "";
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if line == "mds" || line == "round_constants" {
            section = if line == "mds" { "mds" } else { "rc" };
            continue;
        }
        let words: Vec<&str> = line.split(' ').collect();
        match section {
            "" => match words[0] {
                "alpha" => alpha = words[1].parse().unwrap(),
                "full_rounds" => full = words[1].parse().unwrap(),
                "partial_rounds" => partial = words[1].parse().unwrap(),
                _ => {}
            },
            "mds" => mds.push(words.iter().map(|w| BigUint::parse_bytes(w.as_bytes(), 16).unwrap()).collect()),
            _ => rc.extend(words.iter().map(|w| BigUint::parse_bytes(w.as_bytes(), 16).unwrap())),
        }
    }
    Table { p: BigUint::parse_bytes(MODULUS_DEC.as_bytes(), 10).unwrap(), alpha, full, partial, mds, rc }
}

pub fn permute(t: &Table, s: &mut [BigUint; 3]) {
    let rounds = t.full + t.partial;
    for r in 0..rounds {
        for i in 0..3 {
            s[i] = (&s[i] + &t.rc[3 * r + i]) % &t.p;
        }
        let full = r < t.full / 2 || r >= t.full / 2 + t.partial;
        for i in 0..3 {
            if full || i == 0 {
                s[i] = s[i].modpow(&BigUint::from(t.alpha), &t.p);
            }
        }
        let mut next = [BigUint::from(0u8), BigUint::from(0u8), BigUint::from(0u8)];
        for i in 0..3 {
            let mut acc = BigUint::from(0u8);
            for j in 0..3 {
                acc += &t.mds[i][j] * &s[j];
            }
            next[i] = acc % &t.p;
        }
        *s = next;
    }
}

pub fn hash(t: &Table, inputs: &[BigUint], tag: u64) -> BigUint {
    assert!(!inputs.is_empty());
    let iv = (BigUint::from(tag) << 64u32) + BigUint::from(inputs.len() as u64);
    let mut s = [iv % &t.p, BigUint::from(0u8), BigUint::from(0u8)];
    let mut i = 0;
    while i < inputs.len() {
        s[1] = (&s[1] + &inputs[i]) % &t.p;
        if i + 1 < inputs.len() {
            s[2] = (&s[2] + &inputs[i + 1]) % &t.p;
        }
        permute(t, &mut s);
        i += 2;
    }
    s[1].clone()
}

pub fn pack(bytes: &[u8]) -> Vec<BigUint> {
    let mut out = vec![BigUint::from(bytes.len() as u64)];
    for chunk in bytes.chunks(31) {
        out.push(BigUint::from_bytes_le(chunk));
    }
    out
}

pub fn from_le_mod(t: &Table, bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_le(bytes) % &t.p
}

pub fn to_hex(v: &BigUint) -> String {
    format!("{:064x}", v)
}

pub fn from_hex(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).unwrap()
}

// Tag values as fixed by the frozen format.
pub const TAG_COMMITMENT: u64 = 1;
pub const TAG_DERIVE_INNER: u64 = 2;
pub const TAG_DERIVE_OUTER: u64 = 3;
pub const TAG_AUTH: u64 = 4;
pub const TAG_REPLAY: u64 = 5;
pub const TAG_TX: u64 = 6;
pub const TAG_DOMAIN: u64 = 7;
