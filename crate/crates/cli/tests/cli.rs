use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const SEED: &str = "1111111111111111111111111111111111111111111111111111111111111111";
const CREDENTIAL: &str = "correct horse battery staple";

fn zkace(dir: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_zkace"))
        .args(args)
        .current_dir(dir)
        .env_remove("ZKACE_PROFILE")
        .env_remove("ZKACE_HASH_PARAMS")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    if let Some(input) = stdin {
        child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn ok(dir: &Path, args: &[&str], stdin: Option<&str>) -> Value {
    let out = zkace(dir, args, stdin);
    assert!(
        out.status.success(),
        "zkace {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

fn err(dir: &Path, args: &[&str], stdin: Option<&str>) -> (i32, Value) {
    let out = zkace(dir, args, stdin);
    assert!(!out.status.success(), "zkace {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("error json on stderr");
    (out.status.code().unwrap(), serde_json::from_str(last).expect("stderr ends with json"))
}

/// Identity, keys, chain with the identity registered. Returns the temp dir.
fn world(mode: &str, backend: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["identity", "new", "--credential-stdin", "--out", "id.json", "--kdf-cost", "test"], Some(CREDENTIAL));
    ok(
        d,
        &["identity", "commit", "--identity", "id.json", "--credential-stdin", "--domain", "devnet", "--out", "com.json"],
        Some(CREDENTIAL),
    );
    ok(
        d,
        &["setup", "--mode", mode, "--backend", backend, "--seed", SEED, "--pk-out", "pk.bin", "--vk-out", "vk.bin"],
        None,
    );
    ok(d, &["chain", "init", "--state", "chain.json", "--mode", mode, "--domain", "devnet", "--vk", "vk.bin"], None);
    ok(d, &["chain", "register", "--state", "chain.json", "--commitment", "com.json"], None);
    dir
}

fn prove(d: &Path, nonce: u64, payload: &str, out: &str) -> Value {
    let nonce = nonce.to_string();
    ok(
        d,
        &[
            "prove", "--pk", "pk.bin", "--identity", "id.json", "--credential-stdin", "--domain", "devnet", "--nonce",
            &nonce, "--payload", payload, "--out", out,
        ],
        Some(CREDENTIAL),
    )
}

#[test]
fn happy_path_then_replay() {
    let dir = world("nonce", "real");
    let d = dir.path();
    let proved = prove(d, 0, "transfer 5 to bob", "tx0.json");
    assert_eq!(proved["proof_bytes"], 128);
    assert_eq!(ok(d, &["verify", "--vk", "vk.bin", "tx0.json"], None)["valid"], true);

    let accepted = ok(d, &["chain", "submit", "--state", "chain.json", "tx0.json"], None);
    assert_eq!(accepted["status"], "accepted");
    assert_eq!(ok(d, &["chain", "status", "--state", "chain.json"], None)["height"], 1);

    let (code, e) = err(d, &["chain", "submit", "--state", "chain.json", "tx0.json"], None);
    assert_eq!(code, 8);
    assert_eq!(e["reason"], "replay");
    assert_eq!(ok(d, &["chain", "status", "--state", "chain.json"], None)["height"], 1);
}

#[test]
fn batch_directory_in_nullifier_mode() {
    let dir = world("nullifier", "mock");
    let d = dir.path();
    std::fs::create_dir(d.join("txs")).unwrap();
    prove(d, 0, "a", "txs/01.json");
    prove(d, 1, "b", "txs/02.json");
    std::fs::copy(d.join("txs/01.json"), d.join("txs/03.json")).unwrap();
    let out = ok(d, &["chain", "batch", "--state", "chain.json", "txs"], None);
    assert_eq!(out["accepted"], 2);
    assert_eq!(out["rejected"], 1);
    assert_eq!(out["results"][2]["reason"], "replay");
    let status = ok(d, &["chain", "status", "--state", "chain.json"], None);
    assert_eq!(status["height"], 2);
    assert_eq!(status["nullifiers"], 2);
}

#[test]
fn verify_rejects_tampered_bundle() {
    let dir = world("nonce", "mock");
    let d = dir.path();
    prove(d, 0, "x", "tx.json");
    let mut bundle: Value = serde_json::from_str(&std::fs::read_to_string(d.join("tx.json")).unwrap()).unwrap();
    bundle["public_inputs"]["rp_com"] = Value::String(format!("{:064x}", 7));
    std::fs::write(d.join("bad.json"), bundle.to_string()).unwrap();
    let (code, e) = err(d, &["verify", "--vk", "vk.bin", "bad.json"], None);
    assert_eq!((code, e["error"].as_str().unwrap()), (7, "proof_rejected"));
}

#[test]
fn wrong_credential_and_witness_dump() {
    let dir = world("nonce", "mock");
    let d = dir.path();
    let (code, _) = err(
        d,
        &[
            "prove", "--pk", "pk.bin", "--identity", "id.json", "--credential-stdin", "--domain", "devnet", "--nonce",
            "0", "--payload", "x", "--out", "tx.json",
        ],
        Some("wrong"),
    );
    assert_eq!(code, 6);
    ok(
        d,
        &[
            "prove", "--pk", "pk.bin", "--identity", "id.json", "--credential-stdin", "--domain", "devnet", "--nonce",
            "0", "--payload", "x", "--out", "tx.json", "--dump-witness-INSECURE", "w.json",
        ],
        Some(CREDENTIAL),
    );
    let w: Value = serde_json::from_str(&std::fs::read_to_string(d.join("w.json")).unwrap()).unwrap();
    assert!(w["rev"].is_string() && w["salt"].is_string());
}

#[test]
fn distinct_exit_codes_for_file_errors() {
    let dir = world("nonce", "mock");
    let d = dir.path();

    let (code, e) = err(d, &["chain", "status", "--no-such-flag"], None);
    assert_eq!((code, e["error"].as_str().unwrap()), (2, "usage"));

    std::fs::write(d.join("junk.json"), "{not json").unwrap();
    let (code, _) = err(d, &["verify", "--vk", "vk.bin", "junk.json"], None);
    assert_eq!(code, 4);

    prove(d, 0, "x", "tx.json");
    let mut bundle: Value = serde_json::from_str(&std::fs::read_to_string(d.join("tx.json")).unwrap()).unwrap();
    bundle["format_version"] = 99.into();
    std::fs::write(d.join("v99.json"), bundle.to_string()).unwrap();
    let (code, _) = err(d, &["verify", "--vk", "vk.bin", "v99.json"], None);
    assert_eq!(code, 5);

    let (code, _) = err(d, &["chain", "status", "--state", "missing.json"], None);
    assert_eq!(code, 3);

    // One flipped byte in the body must trip the checksum.
    let mut state = std::fs::read(d.join("chain.json")).unwrap();
    let last = state.len() - 3;
    state[last] ^= 0x01;
    std::fs::write(d.join("chain.json"), state).unwrap();
    let (code, _) = err(d, &["chain", "status", "--state", "chain.json"], None);
    assert_eq!(code, 4);
}

#[test]
fn profile_rules() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // test profile: seed mandatory
    let (code, _) = err(d, &["setup", "--mode", "nonce", "--backend", "mock", "--pk-out", "p", "--vk-out", "v"], None);
    assert_eq!(code, 10);

    let out = Command::new(env!("CARGO_BIN_EXE_zkace"))
        .args(["setup", "--mode", "nonce", "--seed", SEED, "--pk-out", "p", "--vk-out", "v"])
        .current_dir(d)
        .env("ZKACE_PROFILE", "production")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("INSECURE"));

    let out = Command::new(env!("CARGO_BIN_EXE_zkace"))
        .args(["setup", "--mode", "nonce", "--backend", "mock", "--pk-out", "p", "--vk-out", "v"])
        .current_dir(d)
        .env("ZKACE_PROFILE", "production")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(10));
}

#[test]
fn constraints_report() {
    let dir = tempfile::tempdir().unwrap();
    let nonce = ok(dir.path(), &["constraints", "--mode", "nonce"], None);
    assert_eq!(nonce["hash_invocations"], 5);
    assert_eq!(nonce["total"], 4024);
    let both = ok(dir.path(), &["constraints"], None);
    assert_eq!(both.as_array().unwrap().len(), 2);
    assert_eq!(both[0]["total"], both[1]["total"]);
}

#[test]
fn hash_params_flag_and_bad_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let table = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/params/poseidon-bn254-t3-a17-v1.txt");
    let reference = ok(d, &["setup", "--mode", "nonce", "--backend", "mock", "--seed", SEED, "--pk-out", "p", "--vk-out", "v"], None);
    let explicit = ok(
        d,
        &[
            "--hash-params", table.to_str().unwrap(), "setup", "--mode", "nonce", "--backend", "mock", "--seed", SEED,
            "--pk-out", "p", "--vk-out", "v",
        ],
        None,
    );
    assert_eq!(reference["circuit_id"], explicit["circuit_id"]);
    std::fs::write(d.join("broken.txt"), "nonsense").unwrap();
    let (code, _) = err(d, &["--hash-params", "broken.txt", "constraints"], None);
    assert_eq!(code, 4);
}

#[test]
fn games_run_small() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["games", "run", "--game", "all", "--trials", "1", "--mode", "nullifier", "--out", "g.json"], None);
    assert_eq!(out["passed"], true);
    assert_eq!(out["results"].as_array().unwrap().len(), 4);
    assert!(d.join("g.json").exists());
    let (code, _) = err(d, &["games", "run", "--game", "nope"], None);
    assert_eq!(code, 2);
}

#[test]
fn accounting_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = ok(d, &["accounting", "--pqc", "ml-dsa-87", "--zk", "128", "--format", "json"], None);
    assert_eq!(r["pqc"]["total_bytes"], 7219);
    assert_eq!(r["zk"]["total_bytes"], 320);
    assert_eq!(r["caveats"].as_array().unwrap().len(), 3);
    let measured = ok(d, &["accounting", "--pqc", "ml-dsa-44", "--zk", "measured", "--format", "json"], None);
    assert!(measured["ratio"].as_f64().unwrap() >= 8.0);
    let range = ok(d, &["accounting", "--zk", "groth16-class", "--format", "json"], None);
    assert_eq!(range.as_array().unwrap().len(), 2);
    let table = zkace(d, &["accounting", "--zk", "256"], None);
    assert!(String::from_utf8_lossy(&table.stdout).contains("448 B"));
    let (code, _) = err(d, &["accounting", "--pqc", "rsa-2048"], None);
    assert_eq!(code, 2);
}

#[test]
fn bench_writes_report_in_sandbox() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["bench", "--format", "json", "--pipeline-txs", "200", "--out", "bench.json"], None);
    assert_eq!(out["iterations"], 20);
    assert!(out["measurements"].as_array().unwrap().len() >= 11);
    assert_eq!(out["references"].as_array().unwrap().len(), 4);
    let entries: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, ["bench.json"]);
    let (code, _) = err(d, &["bench", "--iterations", "3"], None);
    assert_eq!(code, 2);
}
