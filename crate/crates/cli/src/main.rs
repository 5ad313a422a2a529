//! `jcj`: run elections, audit transcripts, demonstrate the credential
//! probe, and benchmark tallying complexity.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use jcj_core::bench::{run_bench, slopes, write_csv, BenchConfig};
use jcj_core::board::Transcript;
use jcj_core::payload::Payload;
use jcj_core::protocol::{generate_scenario, Backend, ElectionConfig, Scenario};
use jcj_core::tally::{audit, exponent_probe_attack, tally, ProbeVerdict};
use jcj_core::Error;

#[derive(Parser)]
#[command(
    name = "jcj",
    version,
    about = "Coercion-resistant JCJ voting with interchangeable tallying backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the election described by a config file and persist its transcript.
    Run {
        #[command(flatten)]
        election: ElectionArgs,
        /// Transcript output (JSON Lines).
        #[arg(long, default_value = "transcript.jsonl")]
        out: PathBuf,
        /// Optional JSON report with the result and weeding stages.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Measure operation counts for n ballots against a roll of n.
    Bench {
        /// Ballot counts, ascending.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        sizes: Vec<usize>,
        /// Backends to run; defaults to quadratic and linear.
        #[arg(long)]
        backend: Vec<Backend>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Group size; 2048 selects the RFC 3526 group.
        #[arg(long, default_value_t = 64)]
        group_bits: u64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        canonical_counts: bool,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a transcript without secrets. Exit 0 iff it passes.
    Audit {
        transcript: PathBuf,
        /// Defaults to the backend named in the transcript.
        #[arg(long)]
        backend: Option<Backend>,
    },
    /// Probe a real and a fake credential via published blinded values.
    AttackDemo {
        /// Defaults to all backends.
        #[arg(long)]
        backend: Vec<Backend>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Honest voters registered before the probe.
        #[arg(long, default_value_t = 10)]
        voters: usize,
    },
    /// Populate a board from a config without tallying.
    ScenarioGen {
        #[command(flatten)]
        election: ElectionArgs,
        #[arg(long, default_value = "scenario.jsonl")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ElectionArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long, action = clap::ArgAction::Set)]
    canonical_counts: Option<bool>,
}

impl ElectionArgs {
    fn load(&self) -> Result<ElectionConfig, Error> {
        require_file(&self.config)?;
        let mut config = ElectionConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(backend) = self.backend {
            config.backend = backend;
        }
        if let Some(c) = self.canonical_counts {
            config.canonical = c;
        }
        config.validate()?;
        Ok(config)
    }

    fn scenario(&self) -> Result<Scenario, Error> {
        let config = self.load()?;
        let spec = config.scenario;
        generate_scenario(&config, spec)
    }
}

fn require_file(path: &Path) -> Result<(), Error> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{}: no such file", path.display())))
    }
}

fn is_usage_error(e: &Error) -> bool {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Threshold { .. } | Error::BitLength(_) => true,
        Error::Io(io) => io.kind() == io::ErrorKind::NotFound,
        _ => false,
    }
}

fn run(election: &ElectionArgs, out: &Path, report: Option<&Path>) -> Result<(), Error> {
    let mut scenario = election.scenario()?;
    let outcome = tally(&mut scenario.election)?;
    scenario.election.board.snapshot().save(out)?;
    let r = &outcome.result;
    println!("backend: {}", r.backend);
    for (c, n) in r.candidates.iter().zip(&r.counts) {
        println!("  {c}: {n}");
    }
    println!(
        "removed: {} bad proof, {} ineligible, {} duplicate, {} unregistered; {} spoiled",
        r.proof_rejected, r.ineligible_removed, r.duplicates_removed, r.invalid_credential_removed, r.spoiled
    );
    println!(
        "operations: {} PET, {} hash, {} mix, {} decrypt",
        r.counters.pet_count, r.counters.hash_eval_count, r.counters.mix_count, r.counters.decrypt_count
    );
    println!(
        "transcript: {} ({} entries)",
        out.display(),
        scenario.election.board.len()
    );
    if let Some(path) = report {
        let doc = json!({ "result": r, "weeding": outcome.weeding });
        std::fs::write(path, serde_json::to_vec_pretty(&doc)?)?;
    }
    Ok(())
}

fn bench(config: &BenchConfig, out: Option<&Path>) -> Result<(), Error> {
    if config.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("sizes must be ascending".into()));
    }
    let rows = run_bench(config, |r| eprintln!("{}", r.csv()))?;
    match out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    for (backend, slope) in slopes(&rows) {
        match slope {
            Some(s) => eprintln!("{backend}: log-log slope {s:.4}"),
            None => eprintln!("{backend}: too few sizes for a slope"),
        }
    }
    Ok(())
}

fn transcript_backend(t: &Transcript) -> Option<Backend> {
    t.entries
        .iter()
        .take(3)
        .find_map(|e| match Payload::from_bytes(&e.payload).ok()? {
            Payload::ElectionParams(p) => Some(p.backend),
            _ => None,
        })
}

fn audit_cmd(path: &Path, backend: Option<Backend>) -> Result<bool, Error> {
    require_file(path)?;
    let transcript = Transcript::load(path)?;
    let backend = backend
        .or_else(|| transcript_backend(&transcript))
        .ok_or_else(|| Error::Config("transcript names no backend; pass --backend".into()))?;
    let report = audit(&transcript, backend);
    if report.ok {
        println!("audit passed: {} entries, {backend} backend", transcript.entries.len());
        if let Some(r) = &report.recomputed {
            println!("recomputed counts: {:?}", r.counts);
        }
    } else {
        println!("audit FAILED ({} findings):", report.failures.len());
        for f in &report.failures {
            println!("  {f}");
        }
    }
    Ok(report.ok)
}

fn probe(backend: Backend, seed: u64, voters: usize, real: bool) -> Result<ProbeVerdict, Error> {
    let mut config = ElectionConfig::new(format!("attack-demo-{backend}"), &["coercer", "voter"], backend, seed);
    config.scenario.honest = voters.max(1);
    let spec = config.scenario;
    let mut s = generate_scenario(&config, spec)?;
    let candidate = if real {
        s.election.voters[0].credential.clone()
    } else {
        s.election.fresh_credential()
    };
    let params = s.election.params.clone();
    let w = params.random_nonzero_scalar(s.election.rng());
    exponent_probe_attack(&mut s.election, &candidate, &w)
}

fn attack_demo(backends: &[Backend], seed: u64, voters: usize) -> Result<(), Error> {
    for &backend in backends {
        let real = probe(backend, seed, voters, true)?;
        let fake = probe(backend, seed, voters, false)?;
        println!("[{backend}] coercer casts sigma? and sigma?^w, then scans published values for (b, b^w)");
        let describe = |v: ProbeVerdict| match v {
            ProbeVerdict::Registered => "pair found, b on the roll: credential is real",
            ProbeVerdict::NotRegistered => "pair found, b not on the roll: credential is fake",
            ProbeVerdict::Inconclusive => "no (b, b^w) relation among published values",
            ProbeVerdict::NotApplicable => "backend publishes no per-credential values",
        };
        println!("  real credential -> {}", describe(real));
        println!("  fake credential -> {}", describe(fake));
        println!("{}", json!({ "backend": backend, "real": real, "fake": fake }));
    }
    Ok(())
}

fn scenario_gen(election: &ElectionArgs, out: &Path) -> Result<(), Error> {
    let s = election.scenario()?;
    s.election.board.snapshot().save(out)?;
    println!(
        "{}",
        json!({
            "transcript": out,
            "ballots": s.casts.len(),
            "registered": s.election.voters.len(),
            "coerced": s.coercions.len(),
            "expected": s.expected,
        })
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { election, out, report } => run(election, out, report.as_deref()).map(|_| true),
        Command::Bench {
            sizes,
            backend,
            seed,
            group_bits,
            canonical_counts,
            out,
        } => {
            let config = BenchConfig {
                sizes: sizes.clone(),
                backends: if backend.is_empty() {
                    BenchConfig::default().backends
                } else {
                    backend.clone()
                },
                seed: *seed,
                group_bits: *group_bits,
                canonical: *canonical_counts,
                ..BenchConfig::default()
            };
            bench(&config, out.as_deref()).map(|_| true)
        }
        Command::Audit { transcript, backend } => audit_cmd(transcript, *backend),
        Command::AttackDemo { backend, seed, voters } => {
            let backends = if backend.is_empty() {
                Backend::ALL.to_vec()
            } else {
                backend.clone()
            };
            attack_demo(&backends, *seed, *voters).map(|_| true)
        }
        Command::ScenarioGen { election, out } => scenario_gen(election, out).map(|_| true),
    };
    let _ = io::stdout().flush();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
