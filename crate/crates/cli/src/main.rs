mod error;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use serde::Serialize;
use serde_json::{json, Value};

use error::CliError;
use zkace_core::accounting::{self, Amortization};
use zkace_core::backend::{self, BackendId, ProofBundle, ProvingKey, VerifyingKey};
use zkace_core::bench::{self, BenchConfig, BenchError};
use zkace_core::chain::{ChainConfig, ChainState, SubmittedTx, TxOutcome};
use zkace_core::circuit::{
    count_constraints_with, identity_commitment_with, make_statement_with, ReplayMode, StatementRequest,
};
use zkace_core::didp::{self, DerivationContext, IdentityFile, KdfParams, RootEntropy};
use zkace_core::field::FieldElement;
use zkace_core::games::{self, Game};
use zkace_core::hash::{self, HashParams};
use zkace_core::profile::{resolve_setup_seed, Profile, INSECURE_SETUP_WARNING};


/// Zero-knowledge transaction authorization bound to a committed identity.
#[derive(Parser)]
#[command(name = "zkace", version)]
struct Cli {
    /// Sponge parameter table overriding the built-in one.
    #[arg(long, global = true, env = "ZKACE_HASH_PARAMS")]
    hash_params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or inspect identities.
    #[command(subcommand)]
    Identity(IdentityCmd),
    /// Generate proving and verifying keys.
    Setup(SetupArgs),
    /// Produce a proof bundle for one transaction.
    Prove(ProveArgs),
    /// Check a proof bundle against a verifying key.
    Verify(VerifyArgs),
    /// Operate a local chain state file.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Adversarial security games.
    #[command(subcommand)]
    Games(GamesCmd),
    /// Per-transaction byte comparison against signature schemes.
    Accounting(AccountingArgs),
    /// Timing suite.
    Bench(BenchArgs),
    /// Constraint breakdown of the authorization circuit.
    Constraints(ConstraintsArgs),
}

#[derive(Subcommand)]
enum IdentityCmd {
    /// Generate fresh root entropy and seal it under a credential read from stdin.
    New {
        #[arg(long, required = true)]
        credential_stdin: bool,
        #[arg(long)]
        out: PathBuf,
        /// `test`, `interactive`, or `MEMORY_KIB,TIME,LANES`.
        #[arg(long, default_value = "interactive")]
        kdf_cost: String,
    },
    /// Print the identity commitment for a domain.
    Commit {
        #[arg(long)]
        identity: PathBuf,
        #[arg(long, required = true)]
        credential_stdin: bool,
        /// Domain descriptor, e.g. a chain name.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: ReplayMode,
    #[arg(long, default_value = "real", value_parser = parse_backend)]
    backend: BackendId,
    /// 32-byte hex seed. Required under the test profile.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    pk_out: PathBuf,
    #[arg(long)]
    vk_out: PathBuf,
}

#[derive(Args)]
struct ProveArgs {
    #[arg(long)]
    pk: PathBuf,
    #[arg(long)]
    identity: PathBuf,
    #[arg(long, required = true)]
    credential_stdin: bool,
    #[arg(long)]
    domain: String,
    #[arg(long)]
    nonce: u64,
    /// Transaction payload as text.
    #[arg(long, conflicts_with = "payload_hex", required_unless_present = "payload_hex")]
    payload: Option<String>,
    #[arg(long)]
    payload_hex: Option<String>,
    #[arg(long, default_value_t = 1)]
    alg_id: u64,
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the private witness in clear. For test-vector generation only.
    #[arg(long = "dump-witness-INSECURE")]
    dump_witness: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    vk: PathBuf,
    bundle: PathBuf,
}

#[derive(Args)]
struct StateArg {
    #[arg(long, default_value = "zkace-chain.json")]
    state: PathBuf,
}

#[derive(Subcommand)]
enum ChainCmd {
    /// Create an empty chain state file.
    Init {
        #[command(flatten)]
        state: StateArg,
        #[arg(long, value_parser = parse_mode)]
        mode: ReplayMode,
        /// Domain descriptor the chain accepts.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        vk: PathBuf,
        #[arg(long, default_value_t = 1)]
        nonce_window: u64,
    },
    /// Register an identity commitment.
    Register {
        #[command(flatten)]
        state: StateArg,
        /// Hex commitment, or a file written by `identity commit`.
        #[arg(long, conflicts_with = "commitment", required_unless_present = "commitment")]
        id_com: Option<String>,
        #[arg(long)]
        commitment: Option<PathBuf>,
    },
    /// Process one proof bundle.
    Submit {
        #[command(flatten)]
        state: StateArg,
        bundle: PathBuf,
    },
    /// Process every `*.json` bundle in a directory, in file-name order.
    Batch {
        #[command(flatten)]
        state: StateArg,
        dir: PathBuf,
    },
    Status {
        #[command(flatten)]
        state: StateArg,
    },
}

#[derive(Subcommand)]
enum GamesCmd {
    Run {
        /// auth, replay, subst, domain or all.
        #[arg(long, default_value = "all")]
        game: String,
        #[arg(long, default_value_t = games::DEFAULT_TRIALS)]
        trials: usize,
        /// nonce or nullifier; both when omitted.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ReplayMode>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AmortizationArg {
    FirstUse,
    RepeatSender,
}

#[derive(Args)]
struct AccountingArgs {
    #[arg(long, default_value = "ml-dsa-44")]
    pqc: String,
    /// `measured`, `groth16-class` (128 and 256 B) or a byte count.
    #[arg(long, default_value = "measured")]
    zk: String,
    #[arg(long, value_enum, default_value = "first-use")]
    amortization: AmortizationArg,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_mode, default_value = "nonce")]
    mode: ReplayMode,
    #[arg(long, default_value_t = bench::MIN_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 2000)]
    pipeline_txs: usize,
    /// Also time a multi-threaded proving run, reported separately.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct ConstraintsArgs {
    /// nonce or nullifier; both when omitted.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ReplayMode>,
}

fn parse_mode(s: &str) -> Result<ReplayMode, String> {
    s.parse()
}

fn parse_backend(s: &str) -> Result<BackendId, String> {
    s.parse()
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print_json(v: &impl Serialize) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")));
}

fn read_credential() -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    std::io::stdin().read_to_end(&mut buf).map_err(|e| CliError::io(Path::new("<stdin>"), e))?;
    if buf.ends_with(b"\n") {
        buf.pop();
        if buf.ends_with(b"\r") {
            buf.pop();
        }
    }
    Ok(buf)
}

fn parse_kdf_cost(s: &str) -> Result<KdfParams, CliError> {
    if let Some(p) = KdfParams::by_name(s) {
        return Ok(p);
    }
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad --kdf-cost `{s}`")))?;
    match parts[..] {
        [m, t, p] => Ok(KdfParams { m_cost_kib: m, t_cost: t, p_cost: p }),
        _ => Err(CliError::Usage(format!("bad --kdf-cost `{s}` (expected test|interactive|M,T,P)"))),
    }
}

fn parse_seed(s: &str) -> Result<[u8; 32], CliError> {
    let bytes = hex::decode(s).map_err(|e| CliError::Usage(format!("seed: {e}")))?;
    bytes.try_into().map_err(|_| CliError::Usage("seed must be 32 bytes of hex".into()))
}

fn load_identity(path: &Path) -> Result<(IdentityFile, RootEntropy), CliError> {
    let file = IdentityFile::from_json(&read_text(path)?).map_err(|e| match CliError::from(e) {
        CliError::Malformed(m) => CliError::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let credential = read_credential()?;
    let rev = didp::unseal(&file.sealed, &credential)?;
    Ok((file, rev))
}

fn load_bundle(path: &Path) -> Result<ProofBundle, CliError> {
    ProofBundle::from_json(&read_text(path)?).map_err(|e| match CliError::from(e) {
        CliError::Malformed(m) => CliError::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn domain(params: &HashParams, descriptor: &str) -> Result<FieldElement, CliError> {
    Ok(hash::domain_from_descriptor_with(params, descriptor.as_bytes())?)
}

fn outcome_json(o: &TxOutcome) -> Value {
    match o {
        Ok(a) => json!({ "status": "accepted", "height": a.height }),
        Err(r) => {
            let mut v = serde_json::to_value(r).expect("serializable");
            v["status"] = json!("rejected");
            v["step"] = json!(r.step());
            v
        }
    }
}

fn load_params(path: Option<&Path>) -> Result<Arc<HashParams>, CliError> {
    match path {
        None => Ok(HashParams::reference()),
        Some(p) => {
            let params = HashParams::load(p)?;
            params.validate()?;
            Ok(Arc::new(params))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let params = load_params(cli.hash_params.as_deref())?;
    match cli.command {
        Command::Identity(cmd) => identity(params, cmd),
        Command::Setup(args) => setup(params, args),
        Command::Prove(args) => prove(params, args),
        Command::Verify(args) => verify(args),
        Command::Chain(cmd) => chain(params, cmd),
        Command::Games(GamesCmd::Run { game, trials, mode, seed, out }) => {
            let games: Vec<Game> = match game.as_str() {
                "all" => Game::ALL.to_vec(),
                g => vec![g.parse().map_err(CliError::Usage)?],
            };
            let modes = mode.map(|m| vec![m]).unwrap_or_else(|| ReplayMode::ALL.to_vec());
            let results = games::run_games(params, &games, &modes, trials, seed)?;
            let failed = results.iter().filter(|r| !r.passed()).count();
            let report = json!({ "passed": failed == 0, "results": results });
            if let Some(out) = out {
                write(&out, serde_json::to_string_pretty(&report).expect("serializable"))?;
            }
            print_json(&report);
            if failed > 0 {
                return Err(CliError::GamesFailed(failed));
            }
            Ok(())
        }
        Command::Accounting(args) => accounting_cmd(params, args),
        Command::Bench(args) => bench_cmd(params, args),
        Command::Constraints(ConstraintsArgs { mode }) => {
            match mode {
                Some(m) => print_json(&count_constraints_with(params, m)),
                None => {
                    let all: Vec<_> = ReplayMode::ALL.iter().map(|&m| count_constraints_with(params.clone(), m)).collect();
                    print_json(&all)
                }
            }
            Ok(())
        }
    }
}

fn identity(params: Arc<HashParams>, cmd: IdentityCmd) -> Result<(), CliError> {
    match cmd {
        IdentityCmd::New { out, kdf_cost, .. } => {
            let kdf = parse_kdf_cost(&kdf_cost)?;
            let credential = read_credential()?;
            let rev = RootEntropy::generate(&mut OsRng);
            let sealed = didp::seal(&rev, &credential, kdf, &mut OsRng)?;
            let file = IdentityFile::new(FieldElement::random(&mut OsRng), sealed);
            write(&out, file.to_json())?;
            print_json(&json!({ "identity": out.display().to_string(), "kdf": kdf }));
            Ok(())
        }
        IdentityCmd::Commit { identity, domain: desc, out, .. } => {
            let (file, rev) = load_identity(&identity)?;
            let domain = domain(&params, &desc)?;
            let id_com = identity_commitment_with(&params, rev.to_field(), file.salt, domain);
            let doc = json!({ "id_com": id_com, "domain": domain, "domain_descriptor": desc });
            if let Some(out) = out {
                write(&out, serde_json::to_string_pretty(&doc).expect("serializable"))?;
            }
            print_json(&doc);
            Ok(())
        }
    }
}

fn setup(params: Arc<HashParams>, args: SetupArgs) -> Result<(), CliError> {
    let profile = Profile::from_env()?;
    if profile == Profile::Production && args.backend == BackendId::Mock {
        return Err(CliError::Config("the mock backend is not allowed under the production profile".into()));
    }
    let seed = args.seed.as_deref().map(parse_seed).transpose()?;
    let seed = resolve_setup_seed(profile, seed)?;
    if seed.insecure {
        eprintln!("{INSECURE_SETUP_WARNING}");
    }
    let (pk, vk) = backend::setup(args.backend, params, args.mode, &seed.bytes)?;
    write(&args.pk_out, pk.to_bytes())?;
    write(&args.vk_out, vk.to_bytes())?;
    print_json(&json!({
        "backend": pk.backend(),
        "mode": pk.mode(),
        "circuit_id": pk.circuit_id(),
        "profile": profile,
        "insecure_seed": seed.insecure,
    }));
    Ok(())
}

fn prove(params: Arc<HashParams>, args: ProveArgs) -> Result<(), CliError> {
    let pk = ProvingKey::from_bytes(&read(&args.pk)?, params.clone())?;
    let payload = match (&args.payload, &args.payload_hex) {
        (Some(text), _) => text.as_bytes().to_vec(),
        (None, Some(h)) => hex::decode(h).map_err(|e| CliError::Usage(format!("--payload-hex: {e}")))?,
        (None, None) => unreachable!("clap requires one payload flag"),
    };
    let (file, rev) = load_identity(&args.identity)?;
    let domain = domain(&params, &args.domain)?;
    let req = StatementRequest {
        rev: &rev,
        salt: file.salt,
        ctx: DerivationContext::new(args.alg_id, domain, args.index),
        nonce: FieldElement::from_u64(args.nonce),
        tx_payload: &payload,
        domain,
        mode: pk.mode(),
    };
    let (witness, public) = make_statement_with(&params, &req)?;
    if let Some(path) = &args.dump_witness {
        eprintln!("WARNING: writing the private witness in clear to {}", path.display());
        write(path, serde_json::to_string_pretty(&witness).expect("serializable"))?;
    }
    let proof = pk.prove(&witness, &public, &mut OsRng)?;
    let bundle = ProofBundle::new(&proof, &public, pk.mode(), Some(&payload));
    write(&args.out, bundle.to_json())?;
    print_json(&json!({ "bundle": args.out.display().to_string(), "proof_bytes": proof.size(), "public_inputs": bundle.public_inputs }));
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let vk = VerifyingKey::from_bytes(&read(&args.vk)?)?;
    let bundle = load_bundle(&args.bundle)?;
    let proof = bundle.proof()?;
    vk.verify(&proof, &bundle.public_inputs()).map_err(|r| CliError::ProofRejected(r.to_string()))?;
    print_json(&json!({ "valid": true, "backend": proof.backend, "circuit_id": proof.circuit_id }));
    Ok(())
}

fn submitted(bundle: &ProofBundle) -> Result<SubmittedTx, CliError> {
    Ok(SubmittedTx::from_bundle(bundle)?)
}

fn chain(params: Arc<HashParams>, cmd: ChainCmd) -> Result<(), CliError> {
    match cmd {
        ChainCmd::Init { state, mode, domain: desc, vk, nonce_window } => {
            let vk = VerifyingKey::from_bytes(&read(&vk)?)?;
            if vk.mode() != mode {
                return Err(CliError::Config(format!(
                    "verifying key is for {} mode, --mode is {}",
                    vk.mode(),
                    mode
                )));
            }
            let mut config = ChainConfig::new(domain(&params, &desc)?, Profile::from_env()?);
            config.nonce_window = nonce_window;
            let chain = ChainState::new(config, vk, params)?;
            chain.persist(&state.state)?;
            print_json(&chain.status());
        }
        ChainCmd::Register { state, id_com, commitment } => {
            let mut chain = ChainState::load(&state.state, params)?;
            let hex = match (id_com, commitment) {
                (Some(h), _) => h,
                (None, Some(path)) => {
                    let v: Value = serde_json::from_str(&read_text(&path)?)
                        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
                    v["id_com"]
                        .as_str()
                        .ok_or_else(|| CliError::Malformed(format!("{}: no id_com", path.display())))?
                        .to_string()
                }
                (None, None) => unreachable!("clap requires one of --id-com/--commitment"),
            };
            let id = FieldElement::from_hex(&hex).map_err(|e| CliError::Malformed(format!("id_com: {e}")))?;
            chain.register_identity(id)?;
            chain.persist(&state.state)?;
            print_json(&json!({ "registered": id, "identities": chain.status().identities }));
        }
        ChainCmd::Submit { state, bundle } => {
            let mut chain = ChainState::load(&state.state, params)?;
            let tx = submitted(&load_bundle(&bundle)?)?;
            let outcome = chain.process_tx(&tx);
            match outcome {
                Ok(_) => {
                    chain.persist(&state.state)?;
                    print_json(&outcome_json(&outcome));
                }
                Err(r) => return Err(CliError::TxRejected(r)),
            }
        }
        ChainCmd::Batch { state, dir } => {
            let mut chain = ChainState::load(&state.state, params)?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| CliError::io(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            let txs = files
                .iter()
                .map(|f| load_bundle(f).and_then(|b| submitted(&b)))
                .collect::<Result<Vec<_>, _>>()?;
            let outcomes = chain.process_batch(&txs);
            chain.persist(&state.state)?;
            let results: Vec<Value> = files
                .iter()
                .zip(&outcomes)
                .map(|(f, o)| {
                    let mut v = outcome_json(o);
                    v["file"] = json!(f.file_name().map(|n| n.to_string_lossy().into_owned()));
                    v
                })
                .collect();
            let accepted = outcomes.iter().filter(|o| o.is_ok()).count();
            print_json(&json!({ "accepted": accepted, "rejected": outcomes.len() - accepted, "height": chain.height(), "results": results }));
        }
        ChainCmd::Status { state } => {
            let chain = ChainState::load(&state.state, params)?;
            print_json(&chain.status());
        }
    }
    Ok(())
}

fn accounting_cmd(params: Arc<HashParams>, args: AccountingArgs) -> Result<(), CliError> {
    let amortization = match args.amortization {
        AmortizationArg::FirstUse => Amortization::FirstUse,
        AmortizationArg::RepeatSender => Amortization::RepeatSender,
    };
    let pqc = accounting::builtin_profile(&args.pqc, amortization).ok_or_else(|| {
        let names: Vec<_> = accounting::builtin_names().collect();
        CliError::Usage(format!("unknown scheme `{}` (expected one of {})", args.pqc, names.join(", ")))
    })?;
    let proof_sizes: Vec<u64> = match args.zk.as_str() {
        "measured" => vec![measured_proof_size(params)?],
        "groth16-class" => vec![128, 256],
        n => vec![n.parse().map_err(|_| CliError::Usage(format!("bad --zk `{n}`")))?],
    };
    let reports: Vec<_> =
        proof_sizes.iter().map(|&b| accounting::reduction_report(&pqc, &accounting::zkace_profile(b))).collect();
    match args.format {
        Format::Json if reports.len() == 1 => print_json(&reports[0]),
        Format::Json => print_json(&reports),
        Format::Table => {
            for r in &reports {
                emit(&format!("{}\n", r.render_table()));
            }
        }
    }
    Ok(())
}

/// Size of a real proof for a throwaway statement.
fn measured_proof_size(params: Arc<HashParams>) -> Result<u64, CliError> {
    let mode = ReplayMode::NonceRegistry;
    let (pk, _) = backend::setup(BackendId::Real, params.clone(), mode, &[0x5a; 32])?;
    let rev = RootEntropy::generate(&mut OsRng);
    let domain = FieldElement::random(&mut OsRng);
    let req = StatementRequest {
        rev: &rev,
        salt: FieldElement::random(&mut OsRng),
        ctx: DerivationContext::new(1, domain, 0),
        nonce: FieldElement::zero(),
        tx_payload: b"accounting probe",
        domain,
        mode,
    };
    let (w, p) = make_statement_with(&params, &req)?;
    Ok(pk.prove(&w, &p, &mut OsRng)?.size() as u64)
}

fn bench_cmd(params: Arc<HashParams>, args: BenchArgs) -> Result<(), CliError> {
    let mut config = BenchConfig {
        mode: args.mode,
        iterations: args.iterations,
        batch_size: args.batch_size,
        pipeline_txs: args.pipeline_txs,
        parallel: args.parallel,
        ..BenchConfig::default()
    };
    if let Some(s) = &args.seed {
        config.seed = parse_seed(s)?;
    }
    let report = bench::run_bench(params, &config, args.out.as_deref()).map_err(|e| match e {
        BenchError::Io(io) => CliError::io(args.out.as_deref().unwrap_or(Path::new("<report>")), io),
        BenchError::Backend(b) => b.into(),
        other => CliError::Usage(other.to_string()),
    })?;
    match args.format {
        Format::Table => emit(&report.render_table()),
        Format::Json => emit(&format!("{}\n", report.to_json())),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            emit(&e.render().to_string());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
