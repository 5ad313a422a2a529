//! Acceptance run: one pass/fail line per criterion, nonzero exit on any
//! failure.

use std::collections::HashSet;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use num_bigint::BigUint;

use jcj_core::bench::{bench_cell, loglog_slope, BenchConfig};
use jcj_core::board::EntryKind;
use jcj_core::elgamal::KeyPair;
use jcj_core::fhe::{fhe_keygen, quorum_approvals, PlaintextTag};
use jcj_core::group::{derive_rng, random_bytes, GroupParams};
use jcj_core::nizk::ProofContext;
use jcj_core::payload::Stage;
use jcj_core::pet::{pet, verify_pet};
use jcj_core::protocol::{
    generate_scenario, Backend, Credential, DuplicatePolicy, ElectionConfig, Scenario, ScenarioSpec,
};
use jcj_core::tally::{audit, exponent_probe_attack, mutate, tally, MutationClass, ProbeVerdict};
use jcj_core::threshold::Talliers;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Runs `job(i)` for `i in 0..count` on all cores.
fn parallel<T: Send>(count: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let out = Mutex::new(Vec::with_capacity(count));
    let workers = thread::available_parallelism().map_or(4, |n| n.get());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let r = job(i);
                out.lock().unwrap().push((i, r));
            });
        }
    });
    let mut out = out.into_inner().unwrap();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

fn complexity() -> Verdict {
    let config = BenchConfig::default();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut found = Vec::new();
    for backend in [Backend::Quadratic, Backend::Linear] {
        let mut pts = Vec::new();
        for &n in &config.sizes {
            let row = match bench_cell(&config, backend, n) {
                Ok(r) => r,
                Err(e) => return verdict(false, format!("{backend} n={n}: {e}")),
            };
            let n64 = n as u64;
            let expect = match backend {
                Backend::Quadratic => n64 * (n64 - 1) / 2 + n64 * n64,
                _ => 3 * n64,
            };
            if row.work() != expect {
                failures.push(format!("{backend} n={n}: {} != {expect}", row.work()));
            }
            pts.push((n as f64, row.work() as f64));
        }
        let slope = loglog_slope(&pts).unwrap_or(f64::NAN);
        let (target, tol) = match backend {
            Backend::Quadratic => (2.0, 0.1),
            _ => (1.0, 0.01),
        };
        if (slope - target).abs() > tol {
            failures.push(format!("{backend} slope {slope:.4}"));
        }
        found.push(format!("{backend} slope {slope:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 600.0 {
        failures.push(format!("sweep took {secs:.0}s"));
    }
    let detail = format!(
        "{}; sweep {secs:.1}s on a {}-bit group",
        found.join(", "),
        config.group_bits
    );
    if failures.is_empty() {
        verdict(true, detail)
    } else {
        verdict(false, format!("{detail}; {}", failures.join("; ")))
    }
}

/// Seeded scenario `i`: n total ballots, 20% duplicates, 20% invalid,
/// 1-3 coerced voters.
fn scenario_spec(i: usize) -> (usize, ScenarioSpec) {
    let mut rng = derive_rng(i as u64, "acceptance-scenario");
    let n = rand::Rng::gen_range(&mut rng, 20..=200usize);
    let dup = (n as f64 * 0.2).round() as usize;
    let invalid = dup;
    let coerced = 1 + i % 3;
    let honest = n - dup - invalid - 2 * coerced;
    (n, ScenarioSpec::new(honest, dup, invalid, coerced))
}

fn scenario_config(i: usize, backend: Backend) -> ElectionConfig {
    let mut config = ElectionConfig::new(format!("acceptance-{i}"), &["alice", "bob", "carol"], backend, i as u64);
    if i % 2 == 1 {
        config.duplicate_policy = DuplicatePolicy::KeepFirst;
    }
    config
}

struct ScenarioOutcome {
    mismatches: Vec<String>,
    coercion_checks: usize,
    coercion_failures: Vec<String>,
    audits: usize,
    audit_failures: Vec<String>,
}

fn run_scenario(i: usize) -> ScenarioOutcome {
    let (n, spec) = scenario_spec(i);
    let mut out = ScenarioOutcome {
        mismatches: Vec::new(),
        coercion_checks: 0,
        coercion_failures: Vec::new(),
        audits: 0,
        audit_failures: Vec::new(),
    };
    for backend in Backend::ALL {
        let tag = format!("scenario {i} (n={n}) {backend}");
        let mut s = match generate_scenario(&scenario_config(i, backend), spec) {
            Ok(s) => s,
            Err(e) => {
                out.mismatches.push(format!("{tag}: {e}"));
                continue;
            }
        };
        let outcome = match tally(&mut s.election) {
            Ok(o) => o,
            Err(e) => {
                out.mismatches.push(format!("{tag}: {e}"));
                continue;
            }
        };
        if outcome.result.counts != s.expected {
            out.mismatches
                .push(format!("{tag}: {:?} != {:?}", outcome.result.counts, s.expected));
        }
        for c in &s.coercions {
            out.coercion_checks += 1;
            if outcome.trace.counted.contains(&c.fake_ballot) || !outcome.trace.counted.contains(&c.real_ballot) {
                out.coercion_failures.push(format!("{tag} voter {}", c.voter));
            }
        }
        out.audits += 1;
        let report = audit(&s.election.board.snapshot(), backend);
        if !report.ok {
            out.audit_failures.push(format!("{tag}: {:?}", report.failures));
        }
    }
    out
}

/// The first failure, formatted as a suffix.
fn first(items: &[String]) -> String {
    items.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
}

fn mutation_audit() -> Verdict {
    let mut total = 0;
    let mut failures = Vec::new();
    let mut rng = derive_rng(99, "acceptance-mutations");
    for backend in Backend::ALL {
        for seed in 0..3u64 {
            let config = ElectionConfig::new(format!("mutation-{seed}"), &["yes", "no"], backend, 1000 + seed);
            let mut s = match generate_scenario(&config, ScenarioSpec::new(6, 1, 1, 1)) {
                Ok(s) => s,
                Err(e) => return verdict(false, format!("{backend}: {e}")),
            };
            if let Err(e) = tally(&mut s.election) {
                return verdict(false, format!("{backend}: {e}"));
            }
            let honest = s.election.board.snapshot();
            let keys = s.election.authority_keys();
            for class in MutationClass::ALL {
                total += 1;
                match mutate(&honest, class, &keys, &mut rng) {
                    Ok(Some(t)) if t != honest => {
                        if audit(&t, backend).ok {
                            failures.push(format!("{backend} {class} seed {seed} accepted"));
                        }
                    }
                    Ok(_) => failures.push(format!("{backend} {class} seed {seed}: no mutation applied")),
                    Err(e) => failures.push(format!("{backend} {class}: {e}")),
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{}/{total} mutated transcripts rejected (8 classes x 3 x 3 backends){}",
            total - failures.len(),
            first(&failures)
        ),
    )
}

fn probe_trial(backend: Backend, trial: usize) -> Result<(bool, ProbeVerdict), String> {
    let config = ElectionConfig::new(
        format!("probe-{trial}"),
        &["coercer", "voter"],
        backend,
        5000 + trial as u64,
    );
    let mut s: Scenario = generate_scenario(&config, ScenarioSpec::new(5, 0, 1, 0)).map_err(|e| e.to_string())?;
    let real = trial % 2 == 0;
    let candidate = if real {
        s.election.voters[trial % 5].credential.clone()
    } else {
        s.election.fresh_credential()
    };
    let params = s.election.params.clone();
    let w = params.random_nonzero_scalar(s.election.rng());
    let v = exponent_probe_attack(&mut s.election, &candidate, &w).map_err(|e| e.to_string())?;
    Ok((real, v))
}

fn probe() -> Verdict {
    const TRIALS: usize = 60;
    let sw = parallel(TRIALS, |t| probe_trial(Backend::SmithWeber, t));
    let lin = parallel(TRIALS, |t| probe_trial(Backend::Linear, t));
    let sw_ok = sw
        .iter()
        .filter(|r| matches!(r, Ok((real, v)) if v.as_bool() == Some(*real)))
        .count();
    let lin_ok = lin
        .iter()
        .filter(|r| matches!(r, Ok((_, ProbeVerdict::Inconclusive))))
        .count();
    verdict(
        sw_ok == TRIALS && lin_ok == TRIALS,
        format!("smith_weber correct {sw_ok}/{TRIALS}; linear inconclusive {lin_ok}/{TRIALS}"),
    )
}

fn eligibility_run(run: usize) -> Result<(usize, usize, usize, usize), String> {
    let mut config = ElectionConfig::new(
        format!("eligibility-{run}"),
        &["yes", "no"],
        Backend::Linear,
        7000 + run as u64,
    );
    config.eligibility = true;
    let mut s = generate_scenario(&config, ScenarioSpec::new(8, 1, 1, 1)).map_err(|e| e.to_string())?;
    let e = &mut s.election;
    let abstainers = e.register(4).map_err(|e| e.to_string())?;
    let eid = e.config.election_id.clone().into_bytes();
    let mut stuffed = Vec::new();
    for (k, a) in abstainers.iter().enumerate() {
        let Credential::Fhe { sigma, .. } = &a.credential else {
            return Err("expected an FHE credential".into());
        };
        let forged: [u8; 32] = random_bytes(e.rng());
        let preimage = (k % 2 == 0).then_some(&forged[..]);
        let ballot = e
            .build_fhe_ballot(sigma, preimage, b"yes", &eid)
            .map_err(|e| e.to_string())?;
        stuffed.push(e.post_ballot(&ballot).map_err(|e| e.to_string())?);
    }
    let ballot_indices: Vec<u64> = e
        .board
        .entries()
        .iter()
        .filter(|x| x.kind == EntryKind::Ballot)
        .map(|x| x.index)
        .collect();
    let outcome = tally(e).map_err(|e| e.to_string())?;
    let removed: HashSet<u64> = outcome
        .weeding
        .removed_after_proof_check(Stage::Eligibility, &ballot_indices)
        .into_iter()
        .collect();
    let stuffed_set: HashSet<u64> = stuffed.iter().copied().collect();
    let flagged = stuffed_set.intersection(&removed).count();
    let honest_removed = removed.difference(&stuffed_set).count();
    let honest = ballot_indices.len() - stuffed.len();
    if outcome.result.counts != s.expected {
        return Err(format!(
            "run {run}: counts {:?} != {:?}",
            outcome.result.counts, s.expected
        ));
    }
    if !audit(&e.board.snapshot(), Backend::Linear).ok {
        return Err(format!("run {run}: audit failed"));
    }
    Ok((flagged, stuffed.len(), honest_removed, honest))
}

fn eligibility() -> Verdict {
    const RUNS: usize = 50;
    let results = parallel(RUNS, eligibility_run);
    let (mut flagged, mut stuffed, mut removed, mut honest) = (0, 0, 0, 0);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((f, s, rm, h)) => {
                flagged += f;
                stuffed += s;
                removed += rm;
                honest += h;
            }
            Err(e) => errors.push(e),
        }
    }
    verdict(
        errors.is_empty() && flagged == stuffed && removed == 0,
        format!(
            "{RUNS} runs: stuffed removed {flagged}/{stuffed}, honest removed {removed}/{honest}{}",
            first(&errors)
        ),
    )
}

/// Square-and-multiply over u64.
fn oracle_pow(b: u64, e: u64, m: u64) -> u64 {
    let (mut acc, mut b, mut e) = (1u64, b % m, e);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

fn tiny_group_oracle() -> Result<usize, String> {
    let (p, q, g1, g2) = (23u64, 11u64, 4u64, 9u64);
    let big = |x: u64| BigUint::from(x);
    let g = GroupParams::new(big(p), big(q), big(g1), big(g2)).map_err(|e| e.to_string())?;
    let subgroup: Vec<u64> = (1..p).filter(|&x| oracle_pow(x, q, p) == 1).collect();
    if subgroup.len() as u64 != q {
        return Err("subgroup size".into());
    }
    let mut checks = 0;
    for x1 in 0..q {
        for x2 in 0..q {
            let h = oracle_pow(g1, x1, p) * oracle_pow(g2, x2, p) % p;
            let key = KeyPair::from_secrets(&g, big(x1), big(x2));
            let Ok(key) = key else {
                if h != 1 {
                    return Err(format!("key ({x1},{x2}) rejected"));
                }
                continue;
            };
            if key.public.h != big(h) {
                return Err(format!("h for ({x1},{x2})"));
            }
            for &m in &subgroup {
                for r in 0..q {
                    let ct = key.public.encrypt(&g, &big(m), &big(r)).map_err(|e| e.to_string())?;
                    let expect = [oracle_pow(g1, r, p), oracle_pow(g2, r, p), m * oracle_pow(h, r, p) % p];
                    if ct.components() != [&big(expect[0]), &big(expect[1]), &big(expect[2])] {
                        return Err(format!("encrypt m={m} r={r}"));
                    }
                    if key.decrypt(&g, &ct) != big(m) {
                        return Err(format!("decrypt m={m} r={r}"));
                    }
                    let r2 = (r * 7 + 3) % q;
                    let re = key.public.reencrypt(&g, &ct, &big(r2));
                    let rr = (r + r2) % q;
                    let expect = [
                        oracle_pow(g1, rr, p),
                        oracle_pow(g2, rr, p),
                        m * oracle_pow(h, rr, p) % p,
                    ];
                    if re.components() != [&big(expect[0]), &big(expect[1]), &big(expect[2])] {
                        return Err(format!("reencrypt m={m} r={r}"));
                    }
                    checks += 3;
                }
            }
        }
    }
    let mut rng = derive_rng(23, "tiny-pet");
    let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).map_err(|e| e.to_string())?;
    let ctx = ProofContext::new(b"tiny".to_vec(), b"pet".to_vec());
    for &a in &subgroup {
        for &b in &subgroup {
            let (left, _) = full
                .public
                .encrypt_random(&g, &big(a), &mut rng)
                .map_err(|e| e.to_string())?;
            let (right, _) = full
                .public
                .encrypt_random(&g, &big(b), &mut rng)
                .map_err(|e| e.to_string())?;
            let t = pet(&g, &talliers, &left, &right, &ctx, &mut rng).map_err(|e| e.to_string())?;
            if t.evidence.verdict != (a == b) || !verify_pet(&g, &talliers.key, &t, &ctx) {
                return Err(format!("pet {a} vs {b}"));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

fn keyed_hash_birthday() -> Result<usize, String> {
    const N: usize = 10_000;
    let params = GroupParams::generate(64, b"birthday").map_err(|e| e.to_string())?;
    let (oracle, approvers) = fhe_keygen(&params, 2, 3, 11).map_err(|e| e.to_string())?;
    let key = oracle.new_hash_key();
    let mut rng = derive_rng(11, "birthday");
    let mut credentials = HashSet::with_capacity(N);
    let mut digests = HashSet::with_capacity(N);
    for _ in 0..N {
        let sigma: [u8; 32] = random_bytes(&mut rng);
        credentials.insert(sigma);
        let ct = oracle.encrypt(&sigma, PlaintextTag::Credential);
        let (out, _) = oracle.eval_keyed_hash(&ct, &key).map_err(|e| e.to_string())?;
        let (digest, _) = oracle
            .threshold_decrypt(&out, &quorum_approvals(&approvers, 2, &out))
            .map_err(|e| e.to_string())?;
        if digest.len() != 16 {
            return Err(format!("digest of {} bytes", digest.len()));
        }
        digests.insert(digest);
    }
    Ok((N - credentials.len()) + (N - digests.len()))
}

fn crypto_oracles() -> Verdict {
    let tiny = tiny_group_oracle();
    let birthday = keyed_hash_birthday();
    let pass = tiny.is_ok() && birthday == Ok(0);
    let tiny = match tiny {
        Ok(n) => format!("{n} tiny-group values match"),
        Err(e) => format!("tiny group mismatch: {e}"),
    };
    let birthday = match birthday {
        Ok(c) => format!("{c} collisions over 10^4 128-bit digests"),
        Err(e) => format!("birthday check failed: {e}"),
    };
    verdict(pass, format!("{tiny}; {birthday}"))
}

fn report(id: u32, name: &str, v: &Verdict) -> bool {
    println!(
        "[{}] {id} {name}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail.trim_end()
    );
    v.pass
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "complexity", &complexity());

    const SCENARIOS: usize = 100;
    let outcomes = parallel(SCENARIOS, run_scenario);
    let mismatches: Vec<String> = outcomes.iter().flat_map(|o| o.mismatches.clone()).collect();
    ok &= report(
        2,
        "backend equivalence",
        &verdict(
            mismatches.is_empty(),
            format!(
                "{}/{} scenario-backend tallies equal the plaintext count{}",
                3 * SCENARIOS - mismatches.len(),
                3 * SCENARIOS,
                first(&mismatches)
            ),
        ),
    );
    let checks: usize = outcomes.iter().map(|o| o.coercion_checks).sum();
    let failed: Vec<String> = outcomes.iter().flat_map(|o| o.coercion_failures.clone()).collect();
    ok &= report(
        3,
        "coercion",
        &verdict(
            failed.is_empty() && checks > 0 && mismatches.is_empty(),
            format!(
                "{}/{checks} fake weeded and real counted{}",
                checks - failed.len(),
                first(&failed)
            ),
        ),
    );
    let audits: usize = outcomes.iter().map(|o| o.audits).sum();
    let audit_failed: Vec<String> = outcomes.iter().flat_map(|o| o.audit_failures.clone()).collect();
    let mutations = mutation_audit();
    ok &= report(
        4,
        "audit",
        &verdict(
            audit_failed.is_empty() && mutations.pass,
            format!(
                "{}/{audits} honest transcripts pass{}; {}",
                audits - audit_failed.len(),
                first(&audit_failed),
                mutations.detail
            ),
        ),
    );
    ok &= report(5, "smith_weber probe", &probe());
    ok &= report(6, "eligibility", &eligibility());
    ok &= report(7, "crypto oracles", &crypto_oracles());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
