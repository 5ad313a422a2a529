//! Tallying backends, the transcript auditor, eligibility weeding and the
//! exponent-probe demonstration.
//!
//! All backends share the pipeline shape: proof check, weeding of
//! duplicates, weeding of unregistered credentials, mixing, decryption. They
//! differ in how credential equality is decided:
//!
//! * [`quadratic`]: pairwise plaintext equivalence tests;
//! * [`linear`]: keyed hashes evaluated under FHE, under fresh keys per stage;
//! * [`smith_weber`]: credentials raised to a jointly shared exponent, then
//!   decrypted and compared in the clear.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::board::{Author, AuthorityKey, Board, BoardEntry, EntryKind};
use crate::elgamal::{Ciphertext, PublicKey};
use crate::error::{Error, Result};
use crate::group::{self, GroupParams};
use crate::nizk::ProofContext;
use crate::payload::{Payload, Stage, StageReport};
use crate::protocol::{Backend, DuplicatePolicy, Election};

pub mod audit;
pub mod eligibility;
pub mod linear;
pub mod mutate;
pub mod probe;
pub mod quadratic;
pub mod smith_weber;

pub use audit::{audit, AuditReport};
pub use eligibility::eligibility_weed;
pub use linear::tally_linear;
pub use mutate::{mutate, MutationClass};
pub use probe::{exponent_probe_attack, ProbeVerdict};
pub use quadratic::tally_quadratic;
pub use smith_weber::tally_smith_weber;

/// Operation accounting. `decrypt_count` counts threshold decryptions
/// outside PETs (each PET includes exactly one).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub pet_count: u64,
    pub hash_eval_count: u64,
    pub mix_count: u64,
    pub decrypt_count: u64,
    pub exponentiation_count: u64,
}

impl OpCounters {
    /// Equality ignoring the exponentiation count, which an auditor cannot
    /// recompute from evidence.
    pub fn same_operations(&self, other: &Self) -> bool {
        (self.pet_count, self.hash_eval_count, self.mix_count, self.decrypt_count)
            == (
                other.pet_count,
                other.hash_eval_count,
                other.mix_count,
                other.decrypt_count,
            )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub backend: Backend,
    pub candidates: Vec<String>,
    pub counts: Vec<u64>,
    /// Decrypted votes that are not on the slate.
    pub spoiled: u64,
    pub proof_rejected: u64,
    pub ineligible_removed: u64,
    pub duplicates_removed: u64,
    pub invalid_credential_removed: u64,
    pub counters: OpCounters,
}

impl TallyResult {
    pub fn valid_ballots(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Equality of everything an auditor recomputes.
    pub fn matches(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            counters: OpCounters::default(),
            ..r.clone()
        };
        strip(self) == strip(other) && self.counters.same_operations(&other.counters)
    }
}

/// One weeding stage: its input size, surviving positions, and the board
/// entries that justify the removals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub input: usize,
    pub survivors: Vec<u32>,
    pub evidence: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeedingReport {
    pub stages: Vec<StageSummary>,
}

impl WeedingReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageSummary> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

/// Facts only the simulation knows: which board ballots ended up counted,
/// recovered through the secret mix permutations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulationTrace {
    pub counted: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub result: TallyResult,
    pub weeding: WeedingReport,
    pub trace: SimulationTrace,
    /// Board index of the posted result.
    pub result_entry: u64,
}

/// Runs the configured backend.
pub fn tally(election: &mut Election) -> Result<Outcome> {
    match election.backend() {
        Backend::Quadratic => tally_quadratic(election),
        Backend::Linear => tally_linear(election),
        Backend::SmithWeber => tally_smith_weber(election),
    }
}

pub(crate) const PET_DUPLICATES: &str = "pet/duplicates";
pub(crate) const PET_ROLL_MATCH: &str = "pet/roll-match";
pub(crate) const MIX_BALLOTS: &str = "mix/ballots";
pub(crate) const MIX_ROLL: &str = "mix/roll";
pub(crate) const BLIND_BALLOTS: &str = "blinding/ballots";
pub(crate) const BLIND_ROLL: &str = "blinding/roll";
pub(crate) const DECRYPT_VOTES: &str = "decrypt/votes";

pub(crate) fn context(election_id: &[u8], label: &str) -> ProofContext {
    ProofContext::new(election_id, label.as_bytes())
}

/// Appends tally evidence as the first tallier.
pub(crate) fn post(board: &mut Board, tallier: &AuthorityKey, kind: EntryKind, payload: &Payload) -> Result<u64> {
    Ok(board
        .append(kind, payload.to_bytes(), Author::Authority(tallier))?
        .index)
}

/// Positions kept after duplicate removal over comparable keys.
pub(crate) fn dedup<K: Ord + Clone>(keys: &[K], policy: DuplicatePolicy) -> Vec<u32> {
    let mut keep: BTreeMap<K, u32> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        let i = i as u32;
        match policy {
            DuplicatePolicy::KeepFirst => {
                keep.entry(k.clone()).or_insert(i);
            }
            DuplicatePolicy::KeepLast => {
                keep.insert(k.clone(), i);
            }
        }
    }
    let mut out: Vec<u32> = keep.into_values().collect();
    out.sort_unstable();
    out
}

/// Ballot positions whose key occurs in `roll`, each roll key usable once,
/// ballots taken in order.
pub(crate) fn roll_match<K: Ord + Clone>(ballots: &[K], roll: &[K]) -> Vec<u32> {
    let mut available: BTreeMap<K, usize> = BTreeMap::new();
    for k in roll {
        *available.entry(k.clone()).or_default() += 1;
    }
    ballots
        .iter()
        .enumerate()
        .filter_map(|(i, k)| match available.get_mut(k) {
            Some(n) if *n > 0 => {
                *n -= 1;
                Some(i as u32)
            }
            _ => None,
        })
        .collect()
}

/// Maps decrypted votes to candidate counts; unknown values are spoiled.
pub(crate) fn count_votes<T: PartialEq>(votes: &[T], slate: &[T]) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; slate.len()];
    let mut spoiled = 0;
    for v in votes {
        match slate.iter().position(|c| c == v) {
            Some(j) => counts[j] += 1,
            None => spoiled += 1,
        }
    }
    (counts, spoiled)
}

pub(crate) fn stage_report(stage: Stage, input: usize, survivors: &[u32]) -> Payload {
    Payload::Stage(StageReport {
        stage,
        input,
        survivors: survivors.to_vec(),
    })
}

/// Decodes every ballot entry in order; undecodable payloads are kept as
/// `None` and fail the proof check.
pub(crate) fn ballot_entries(entries: &[BoardEntry]) -> Vec<(u64, Option<Payload>)> {
    entries
        .iter()
        .filter(|e| e.kind == EntryKind::Ballot)
        .map(|e| (e.index, Payload::from_bytes(&e.payload).ok()))
        .collect()
}

#[derive(Clone, Debug)]
pub(crate) struct ClassicalBallot {
    pub board_index: u64,
    pub vote: Ciphertext,
    pub credential: Ciphertext,
}

/// Stage 1 for ElGamal ballots: well-formed ciphertexts and a valid proof
/// bundle bound to the election id.
pub(crate) fn classical_proof_check(
    params: &GroupParams,
    pk: &PublicKey,
    slate: &[BigUint],
    election_id: &[u8],
    ballots: &[(u64, Option<Payload>)],
) -> (Vec<u32>, Vec<ClassicalBallot>) {
    let mut survivors = Vec::new();
    let mut valid = Vec::new();
    for (pos, (index, payload)) in ballots.iter().enumerate() {
        if let Some(Payload::Ballot {
            vote,
            credential,
            proofs,
        }) = payload
        {
            if vote.is_valid(params)
                && credential.is_valid(params)
                && proofs.verify(params, pk, slate, election_id, vote, credential)
            {
                survivors.push(pos as u32);
                valid.push(ClassicalBallot {
                    board_index: *index,
                    vote: vote.clone(),
                    credential: credential.clone(),
                });
            }
        }
    }
    (survivors, valid)
}

/// Roll credentials of an ElGamal election, in board order.
pub(crate) fn classical_roll(entries: &[BoardEntry]) -> Result<Vec<Ciphertext>> {
    entries
        .iter()
        .filter(|e| e.kind == EntryKind::Roll)
        .map(|e| match Payload::at(&e.payload, e.index)? {
            Payload::Roll { credential, .. } => Ok(credential),
            other => Err(aborted(e.index, format!("unexpected {} in roll", other.type_name()))),
        })
        .collect()
}

pub(crate) fn aborted(index: u64, reason: impl Into<String>) -> Error {
    Error::TallyAborted {
        index,
        reason: reason.into(),
    }
}

/// Exponentiations performed since `start`.
pub(crate) fn exponentiations_since(start: u64) -> u64 {
    group::exponentiations() - start
}

/// Inverts a composite mix permutation: `out[p]` is the input row that
/// ended at output position `p`.
pub(crate) fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub(crate) fn to_u32(xs: impl IntoIterator<Item = usize>) -> Vec<u32> {
    xs.into_iter().map(|x| x as u32).collect()
}

pub(crate) fn biguint_key(x: &BigUint) -> Vec<u8> {
    x.to_bytes_be()
}
