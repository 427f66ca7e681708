//! Timing harness: medians with order-statistic confidence intervals.
//!
//! Everything runs in memory on the calling thread unless the parallel
//! section is requested; no chain state touches disk.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{self, AuthorizationProof, BackendError, BackendId, ProvingKey, VerifyingKey};
use crate::chain::{ChainConfig, ChainState, SubmittedTx};
use crate::circuit::{
    identity_commitment_with, make_statement_with, AuthorizationWitness, PublicInputs, ReplayMode, StatementRequest,
};
use crate::didp::{self, DerivationContext, KdfParams, RootEntropy};
use crate::field::FieldElement;
use crate::hash::HashParams;
use crate::profile::Profile;

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const MIN_ITERATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least {MIN_ITERATIONS} iterations required, got {0}")]
    TooFewIterations(usize),
    #[error("batch size must be between 1 and the iteration count")]
    BadBatchSize,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("chain: {0}")]
    Chain(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub mode: ReplayMode,
    pub iterations: usize,
    pub batch_size: usize,
    pub pipeline_txs: usize,
    pub seed: [u8; 32],
    /// Adds a separately reported multi-threaded proving run.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            mode: ReplayMode::NonceRegistry,
            iterations: MIN_ITERATIONS,
            batch_size: 16,
            pipeline_txs: 2000,
            seed: [7u8; 32],
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Stat {
    pub iterations: usize,
    pub median_us: f64,
    /// 95% distribution-free interval for the median.
    pub ci_low_us: f64,
    pub ci_high_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

impl Stat {
    pub fn from_samples(samples: &[Duration]) -> Stat {
        assert!(!samples.is_empty());
        let mut us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = us.len();
        let median = if n % 2 == 1 { us[n / 2] } else { (us[n / 2 - 1] + us[n / 2]) / 2.0 };
        let (lo, hi) = median_ci_ranks(n);
        Stat {
            iterations: n,
            median_us: median,
            ci_low_us: us[lo - 1],
            ci_high_us: us[hi - 1],
            min_us: us[0],
            max_us: us[n - 1],
        }
    }

    pub fn median_ms(&self) -> f64 {
        self.median_us / 1e3
    }
}

/// 1-based ranks (j, k) with P(X(j) <= median <= X(k)) ~ 0.95 under the
/// normal approximation to Binomial(n, 1/2).
pub fn median_ci_ranks(n: usize) -> (usize, usize) {
    let half = n as f64 / 2.0;
    let spread = 1.96 * (n as f64).sqrt() / 2.0;
    let j = (half - spread).floor().max(1.0) as usize;
    let k = ((half + 1.0 + spread).ceil() as usize).min(n);
    (j, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Measurement {
    pub operation: String,
    pub backend: Option<BackendId>,
    /// Items processed per timed iteration (batch size, pipeline length).
    pub items: usize,
    pub stat: Stat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HardwareDescriptor {
    pub os: String,
    pub arch: String,
    pub cpu_model: Option<String>,
    pub logical_cpus: usize,
    pub threads_used: usize,
    pub optimized_build: bool,
}

impl HardwareDescriptor {
    pub fn detect(threads_used: usize) -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        });
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpu_model,
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            threads_used,
            optimized_build: !cfg!(debug_assertions),
        }
    }
}

/// Published single-threaded medians on an Apple M3 Pro, for orientation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReferenceLine {
    pub operation: String,
    pub median_us: f64,
    pub hardware: String,
}

pub fn reference_lines() -> Vec<ReferenceLine> {
    [("verify", 651.0), ("prove", 63_000.0), ("setup", 120_000.0), ("pipeline", 7_560.0)]
        .into_iter()
        .map(|(op, us)| ReferenceLine {
            operation: op.to_string(),
            median_us: us,
            hardware: "Apple M3 Pro, single-threaded".to_string(),
        })
        .collect()
}

/// Order-of-magnitude bound on one measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EnvelopeCheck {
    pub name: String,
    pub measured_ms: f64,
    pub bound_ms: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ParallelReport {
    pub threads: usize,
    pub proofs: usize,
    pub wall_ms: f64,
    pub per_proof_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BenchReport {
    pub format_version: u32,
    pub mode: ReplayMode,
    pub iterations: usize,
    pub batch_size: usize,
    pub pipeline_txs: usize,
    pub hardware: HardwareDescriptor,
    pub measurements: Vec<Measurement>,
    pub references: Vec<ReferenceLine>,
    pub envelope: Vec<EnvelopeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<ParallelReport>,
}

pub const PIPELINE_NOTE: &str = "mock-backend process_batch over the whole workload; \
stands in for an attestation-check pipeline, which is outside this crate";

impl BenchReport {
    pub fn get(&self, operation: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.operation == operation)
    }

    pub fn envelope_ok(&self) -> bool {
        self.envelope.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let h = &self.hardware;
        let _ = writeln!(
            out,
            "{} / {} / {} ({} logical cpus, {} thread(s) used)",
            h.os,
            h.arch,
            h.cpu_model.as_deref().unwrap_or("unknown cpu"),
            h.logical_cpus,
            h.threads_used
        );
        let _ = writeln!(out, "mode {}, {} iterations per operation\n", self.mode.as_str(), self.iterations);
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>12} {:>25}",
            "operation", "items", "median", "95% CI"
        );
        for m in &self.measurements {
            let s = &m.stat;
            let _ = writeln!(
                out,
                "{:<24} {:>6} {:>12} {:>25}",
                m.operation,
                m.items,
                fmt_us(s.median_us),
                format!("[{}, {}]", fmt_us(s.ci_low_us), fmt_us(s.ci_high_us))
            );
        }
        if let Some(p) = &self.parallel {
            let _ = writeln!(
                out,
                "\nparallel prove: {} proofs on {} threads in {:.1} ms ({:.1} ms/proof)",
                p.proofs, p.threads, p.wall_ms, p.per_proof_ms
            );
        }
        let _ = writeln!(out, "\nreference medians:");
        for r in &self.references {
            let _ = writeln!(out, "  {:<10} {:>12}  ({})", r.operation, fmt_us(r.median_us), r.hardware);
        }
        let _ = writeln!(out, "\nenvelope:");
        for c in &self.envelope {
            let _ = writeln!(
                out,
                "  {:<4} {:<20} {:>10.2} ms < {:.0} ms",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured_ms,
                c.bound_ms
            );
        }
        let _ = writeln!(out, "\npipeline: {PIPELINE_NOTE}");
        out
    }
}

fn fmt_us(us: f64) -> String {
    if us >= 1e6 {
        format!("{:.2} s", us / 1e6)
    } else if us >= 1e3 {
        format!("{:.2} ms", us / 1e3)
    } else {
        format!("{us:.1} us")
    }
}

/// One warm-up call, then `iterations` timed calls. The closure returns the
/// duration it wants counted, so per-iteration preparation can be excluded.
fn measure(iterations: usize, mut f: impl FnMut(usize) -> Duration) -> Stat {
    f(usize::MAX);
    let samples: Vec<Duration> = (0..iterations).map(&mut f).collect();
    Stat::from_samples(&samples)
}

fn time<T>(f: impl FnOnce() -> T) -> (Duration, T) {
    let start = Instant::now();
    let out = f();
    (start.elapsed(), out)
}

struct Identity {
    rev: RootEntropy,
    salt: FieldElement,
}

struct Workload {
    params: Arc<HashParams>,
    mode: ReplayMode,
    domain: FieldElement,
}

impl Workload {
    fn identity(&self, rng: &mut ChaCha20Rng) -> Identity {
        Identity { rev: RootEntropy::generate(rng), salt: FieldElement::random(rng) }
    }

    fn id_com(&self, id: &Identity) -> FieldElement {
        identity_commitment_with(&self.params, id.rev.to_field(), id.salt, self.domain)
    }

    fn statement(&self, id: &Identity, nonce: u64, payload: &[u8]) -> (AuthorizationWitness, PublicInputs) {
        let req = StatementRequest {
            rev: &id.rev,
            salt: id.salt,
            ctx: DerivationContext::new(1, self.domain, 0),
            nonce: FieldElement::from_u64(nonce),
            tx_payload: payload,
            domain: self.domain,
            mode: self.mode,
        };
        make_statement_with(&self.params, &req).expect("payload within limits")
    }

    fn chain(&self, vk: &VerifyingKey, ids: &[FieldElement]) -> Result<ChainState, BenchError> {
        let mut chain = ChainState::new(ChainConfig::new(self.domain, Profile::Test), vk.clone(), self.params.clone())
            .map_err(|e| BenchError::Chain(e.to_string()))?;
        for id in ids {
            chain.register_identity(*id).map_err(|e| BenchError::Chain(e.to_string()))?;
        }
        Ok(chain)
    }
}

fn payload(rng: &mut ChaCha20Rng) -> Vec<u8> {
    let mut p = vec![0u8; 96];
    rng.fill_bytes(&mut p);
    p
}

fn push(out: &mut Vec<Measurement>, op: &str, backend: Option<BackendId>, items: usize, stat: Stat) {
    out.push(Measurement { operation: op.to_string(), backend, items, stat, note: None });
}

/// Runs the full suite and, if `output` is given, writes the JSON report there.
pub fn run_bench(
    params: Arc<HashParams>,
    config: &BenchConfig,
    output: Option<&Path>,
) -> Result<BenchReport, BenchError> {
    let n = config.iterations;
    if n < MIN_ITERATIONS {
        return Err(BenchError::TooFewIterations(n));
    }
    if config.batch_size == 0 || config.batch_size > n {
        return Err(BenchError::BadBatchSize);
    }
    let mut rng = ChaCha20Rng::from_seed(config.seed);
    let w = Workload { params: params.clone(), mode: config.mode, domain: FieldElement::random(&mut rng) };
    let mut ms = Vec::new();

    let mut keys: Option<(ProvingKey, VerifyingKey)> = None;
    let stat = measure(n, |i| {
        let mut seed = config.seed;
        seed[..8].copy_from_slice(&(i as u64).to_le_bytes());
        let (d, k) = time(|| backend::setup(BackendId::Real, params.clone(), w.mode, &seed));
        keys = Some(k.expect("setup succeeds"));
        d
    });
    push(&mut ms, "setup", Some(BackendId::Real), 1, stat);
    let (pk, vk) = keys.expect("measured at least once");

    // One identity, consecutive nonces: the proofs double as an accepted
    // transaction sequence for the chain measurements below.
    let ident = w.identity(&mut rng);
    let id_com = w.id_com(&ident);
    let statements: Vec<(AuthorizationWitness, PublicInputs, Vec<u8>)> = (0..n as u64)
        .map(|nonce| {
            let p = payload(&mut rng);
            let (wit, public) = w.statement(&ident, nonce, &p);
            (wit, public, p)
        })
        .collect();
    let mut proofs: Vec<AuthorizationProof> = Vec::with_capacity(n);
    let stat = measure(n, |i| {
        let (wit, public, _) = &statements[i.min(n - 1)];
        let (d, proof) = time(|| pk.prove(wit, public, &mut rng).expect("honest statement proves"));
        if i != usize::MAX {
            proofs.push(proof);
        }
        d
    });
    push(&mut ms, "prove", Some(BackendId::Real), 1, stat);
    let txs: Vec<SubmittedTx> = statements
        .iter()
        .zip(&proofs)
        .map(|((_, public, p), proof)| SubmittedTx { payload: p.clone(), proof: proof.clone(), public: *public })
        .collect();

    let stat = measure(n, |i| {
        let tx = &txs[i.min(n - 1)];
        let (d, ok) = time(|| vk.accepts(&tx.proof, &tx.public));
        assert!(ok);
        d
    });
    push(&mut ms, "verify", Some(BackendId::Real), 1, stat);

    let items: Vec<_> = txs[..config.batch_size].iter().map(|t| (t.proof.clone(), t.public)).collect();
    let stat = measure(n, |_| {
        let (d, verdict) = time(|| vk.batch_verify(&items));
        assert!(verdict.expect("non-empty").accepted);
        d
    });
    push(&mut ms, "batch_verify", Some(BackendId::Real), config.batch_size, stat);

    let salt = ident.salt;
    let stat = measure(n, |_| time(|| identity_commitment_with(&params, ident.rev.to_field(), salt, w.domain)).0);
    push(&mut ms, "commitment", None, 1, stat);

    let ctx = DerivationContext::new(1, w.domain, 0);
    let stat = measure(n, |_| time(|| didp::derive_target_with(&params, &ident.rev, &ctx)).0);
    push(&mut ms, "derive", None, 1, stat);

    let credential = b"bench credential";
    let mut sealed = None;
    let stat = measure(n, |_| {
        let (d, s) = time(|| didp::seal(&ident.rev, credential, KdfParams::TEST, &mut rng));
        sealed = Some(s.expect("seal succeeds"));
        d
    });
    push(&mut ms, "seal", None, 1, stat);
    let sealed = sealed.expect("measured at least once");
    let stat = measure(n, |_| time(|| didp::unseal(&sealed, credential).expect("credential matches")).0);
    push(&mut ms, "unseal", None, 1, stat);

    // process_tx: the i-th proof is valid exactly when nonce i is next.
    let mut chain = w.chain(&vk, &[id_com])?;
    let stat = measure(n, |i| {
        if i == usize::MAX {
            let mut scratch = chain.clone();
            return time(|| scratch.process_tx(&txs[0])).0;
        }
        let (d, r) = time(|| chain.process_tx(&txs[i]));
        assert!(r.is_ok(), "{r:?}");
        d
    });
    push(&mut ms, "process_tx", Some(BackendId::Real), 1, stat);

    let fresh = w.chain(&vk, &[id_com])?;
    let batch = &txs[..config.batch_size];
    let stat = measure(n, |_| {
        let mut c = fresh.clone();
        let (d, out) = time(|| c.process_batch(batch));
        assert!(out.iter().all(|o| o.is_ok()));
        d
    });
    push(&mut ms, "process_batch", Some(BackendId::Real), config.batch_size, stat);

    let pipeline = pipeline_stat(&w, config, &mut rng)?;
    ms.push(Measurement {
        operation: "pipeline".to_string(),
        backend: Some(BackendId::Mock),
        items: config.pipeline_txs,
        stat: pipeline,
        note: Some(PIPELINE_NOTE.to_string()),
    });

    let parallel = config.parallel.then(|| parallel_prove(&pk, &statements));

    let median = |op: &str| ms.iter().find(|m| m.operation == op).map(|m| m.stat.median_ms()).unwrap_or(f64::NAN);
    let envelope = [("verify", 10.0), ("prove", 2_000.0), ("setup", 5_000.0), ("pipeline", 5_000.0)]
        .into_iter()
        .map(|(op, bound)| {
            let measured = median(op);
            EnvelopeCheck { name: op.to_string(), measured_ms: measured, bound_ms: bound, passed: measured < bound }
        })
        .collect();

    let report = BenchReport {
        format_version: REPORT_FORMAT_VERSION,
        mode: config.mode,
        iterations: n,
        batch_size: config.batch_size,
        pipeline_txs: config.pipeline_txs,
        hardware: HardwareDescriptor::detect(1),
        measurements: ms,
        references: reference_lines(),
        envelope,
        parallel,
    };
    if let Some(path) = output {
        std::fs::write(path, report.to_json())?;
    }
    Ok(report)
}

/// `pipeline_txs` mock-proved transactions spread over 20-nonce identities,
/// processed as one batch against a fresh chain each iteration.
fn pipeline_stat(w: &Workload, config: &BenchConfig, rng: &mut ChaCha20Rng) -> Result<Stat, BenchError> {
    let (pk, vk) = backend::setup(BackendId::Mock, w.params.clone(), w.mode, &config.seed)?;
    let per_identity = 20;
    let mut ids = Vec::new();
    let mut txs = Vec::with_capacity(config.pipeline_txs);
    let mut current = None;
    for i in 0..config.pipeline_txs {
        if i % per_identity == 0 {
            let id = w.identity(rng);
            ids.push(w.id_com(&id));
            current = Some(id);
        }
        let id = current.as_ref().expect("set above");
        let p = payload(rng);
        let (wit, public) = w.statement(id, (i % per_identity) as u64, &p);
        let proof = pk.prove(&wit, &public, rng)?;
        txs.push(SubmittedTx { payload: p, proof, public });
    }
    let fresh = w.chain(&vk, &ids)?;
    Ok(measure(config.iterations, |_| {
        let mut c = fresh.clone();
        let (d, out) = time(|| c.process_batch(&txs));
        assert!(out.iter().all(|o| o.is_ok()));
        d
    }))
}

fn parallel_prove(pk: &ProvingKey, statements: &[(AuthorizationWitness, PublicInputs, Vec<u8>)]) -> ParallelReport {
    let (d, _) = time(|| {
        statements
            .par_iter()
            .enumerate()
            .map(|(i, (wit, public, _))| {
                let mut rng = ChaCha20Rng::seed_from_u64(i as u64);
                pk.prove(wit, public, &mut rng).expect("honest statement proves")
            })
            .collect::<Vec<_>>()
    });
    let wall_ms = d.as_secs_f64() * 1e3;
    ParallelReport {
        threads: rayon::current_num_threads(),
        proofs: statements.len(),
        wall_ms,
        per_proof_ms: wall_ms / statements.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_ranks_for_small_samples() {
        // n = 20: j = floor(10 - 4.38) = 5, k = ceil(11 + 4.38) = 16.
        assert_eq!(median_ci_ranks(20), (5, 16));
        assert_eq!(median_ci_ranks(1), (1, 1));
        let (j, k) = median_ci_ranks(100);
        assert_eq!((j, k), (40, 61));
    }

    #[test]
    fn stat_of_known_samples() {
        let samples: Vec<Duration> = (1..=20).map(Duration::from_micros).collect();
        let s = Stat::from_samples(&samples);
        assert_eq!(s.median_us, 10.5);
        assert_eq!((s.ci_low_us, s.ci_high_us), (5.0, 16.0));
        assert_eq!((s.min_us, s.max_us), (1.0, 20.0));
    }

    #[test]
    fn rejects_short_runs() {
        let cfg = BenchConfig { iterations: 5, ..BenchConfig::default() };
        assert!(matches!(run_bench(HashParams::reference(), &cfg, None), Err(BenchError::TooFewIterations(5))));
        let cfg = BenchConfig { batch_size: 0, ..BenchConfig::default() };
        assert!(matches!(run_bench(HashParams::reference(), &cfg, None), Err(BenchError::BadBatchSize)));
    }

    #[test]
    fn reference_lines_cover_envelope_operations() {
        let names: Vec<_> = reference_lines().into_iter().map(|r| r.operation).collect();
        assert_eq!(names, ["verify", "prove", "setup", "pipeline"]);
    }
}
