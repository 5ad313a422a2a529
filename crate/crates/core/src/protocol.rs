//! Election orchestration: configuration, setup, registration, voting and
//! scenario generation with a plaintext ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::board::{Author, AuthorityKey, Board, EntryKind, Role};
use crate::elgamal::KeyPair;
use crate::error::{Error, Result};
use crate::fhe::{derive_credential, fhe_keygen, ApprovalKey, FheCiphertext, FheOracle, PlaintextTag};
use crate::group::{derive_rng, random_bytes, GroupParams};
use crate::mixnet::DEFAULT_SHADOW_ROUNDS;
use crate::nizk::BallotProofBundle;
use crate::payload::{ElectionParams, Payload};
use crate::threshold::Talliers;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Quadratic,
    Linear,
    SmithWeber,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Quadratic, Backend::Linear, Backend::SmithWeber];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Linear => "linear",
            Self::SmithWeber => "smith_weber",
        }
    }

    /// Whether ballots and roll use classical ElGamal (as opposed to FHE).
    pub fn is_classical(self) -> bool {
        self != Self::Linear
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown backend {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    KeepFirst,
    #[default]
    KeepLast,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub honest: usize,
    #[serde(default)]
    pub duplicate: usize,
    #[serde(default)]
    pub invalid: usize,
    #[serde(default)]
    pub coerced: usize,
}

impl ScenarioSpec {
    pub fn new(honest: usize, duplicate: usize, invalid: usize, coerced: usize) -> Self {
        Self {
            honest,
            duplicate,
            invalid,
            coerced,
        }
    }

    pub fn ballots(&self) -> usize {
        self.honest + self.duplicate + self.invalid + 2 * self.coerced
    }

    pub fn registered(&self) -> usize {
        self.honest + self.coerced
    }
}

fn default_threshold() -> usize {
    2
}
fn default_talliers() -> usize {
    3
}
fn one() -> usize {
    1
}
fn default_mix_servers() -> usize {
    2
}
fn default_group_bits() -> u64 {
    64
}
fn default_shadow_rounds() -> usize {
    DEFAULT_SHADOW_ROUNDS
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectionConfig {
    pub election_id: String,
    pub candidates: Vec<String>,
    pub backend: Backend,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default = "default_talliers")]
    pub talliers: usize,
    #[serde(default = "one")]
    pub registrars: usize,
    #[serde(default)]
    pub duplicate_policy: DuplicatePolicy,
    #[serde(default)]
    pub seed: u64,
    /// 2048 selects the fixed RFC 3526 prime; other sizes are searched.
    #[serde(default = "default_group_bits")]
    pub group_bits: u64,
    #[serde(default)]
    pub eligibility: bool,
    #[serde(default = "default_shadow_rounds")]
    pub shadow_rounds: usize,
    #[serde(default = "default_mix_servers")]
    pub mix_servers: usize,
    #[serde(default = "yes")]
    pub canonical: bool,
    #[serde(default)]
    pub scenario: ScenarioSpec,
}

impl ElectionConfig {
    pub fn new(election_id: impl Into<String>, candidates: &[&str], backend: Backend, seed: u64) -> Self {
        Self {
            election_id: election_id.into(),
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
            backend,
            threshold: default_threshold(),
            talliers: default_talliers(),
            registrars: 1,
            duplicate_policy: DuplicatePolicy::default(),
            seed,
            group_bits: default_group_bits(),
            eligibility: false,
            shadow_rounds: default_shadow_rounds(),
            mix_servers: default_mix_servers(),
            canonical: true,
            scenario: ScenarioSpec::default(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let config: Self = serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.election_id.is_empty() {
            return fail("election_id must not be empty");
        }
        if self.candidates.is_empty() {
            return fail("at least one candidate is required");
        }
        let mut names: Vec<&String> = self.candidates.iter().collect();
        names.sort();
        names.dedup();
        if names.len() != self.candidates.len() {
            return fail("candidate names must be distinct");
        }
        if self.threshold == 0 || self.threshold > self.talliers {
            return Err(Error::Threshold {
                t: self.threshold,
                n: self.talliers,
            });
        }
        if self.registrars == 0 {
            return fail("at least one registrar is required");
        }
        if self.mix_servers == 0 || self.shadow_rounds == 0 {
            return fail("mix_servers and shadow_rounds must be positive");
        }
        if self.eligibility && self.backend != Backend::Linear {
            return fail("eligibility mode requires the linear backend");
        }
        if self.scenario.duplicate > self.scenario.honest {
            return fail("duplicate count exceeds honest voters");
        }
        Ok(())
    }

    pub fn group(&self) -> Result<GroupParams> {
        if self.group_bits == 2048 {
            GroupParams::modp_2048(self.election_id.as_bytes())
        } else {
            GroupParams::generate(self.group_bits, self.election_id.as_bytes())
        }
    }
}

/// A voter's secret. Classical credentials are subgroup elements; FHE
/// credentials are byte strings, optionally derived from a preimage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Credential {
    Classical(BigUint),
    Fhe { sigma: Vec<u8>, preimage: Option<Vec<u8>> },
}

impl Credential {
    /// A comparable identity for plaintext bookkeeping.
    pub fn key(&self) -> Vec<u8> {
        match self {
            Self::Classical(s) => s.to_bytes_be(),
            Self::Fhe { sigma, .. } => sigma.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Voter {
    pub index: u32,
    pub credential: Credential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CastKind {
    Honest,
    Duplicate,
    Invalid,
    CoercedFake,
    CoercedReal,
}

#[derive(Clone, Debug)]
pub struct CastRecord {
    pub board_index: u64,
    pub kind: CastKind,
    pub voter: Option<u32>,
    pub credential: Credential,
    pub choice: usize,
}

#[derive(Clone, Debug)]
pub struct Coercion {
    pub voter: u32,
    /// Handed to the coercer.
    pub fake_credential: Credential,
    pub fake_ballot: u64,
    pub real_ballot: u64,
}

/// Public setup plus every simulated party's secrets.
pub struct Election {
    pub config: ElectionConfig,
    pub params: GroupParams,
    pub slate: Vec<BigUint>,
    pub talliers: Talliers,
    pub fhe: Option<(FheOracle, Vec<ApprovalKey>)>,
    pub registrar_keys: Vec<AuthorityKey>,
    pub tallier_keys: Vec<AuthorityKey>,
    pub board: Board,
    pub voters: Vec<Voter>,
    dealer_key: KeyPair,
    rng: ChaCha20Rng,
}

impl fmt::Debug for Election {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Election")
            .field("election_id", &self.config.election_id)
            .field("backend", &self.config.backend)
            .field("board", &self.board)
            .finish_non_exhaustive()
    }
}

fn authority(seed: u64, id: String, role: Role) -> AuthorityKey {
    let seed_bytes = random_bytes(&mut derive_rng(seed, &format!("authority/{id}")));
    AuthorityKey::from_seed(id, role, seed_bytes)
}

pub fn encode_candidates(params: &GroupParams, candidates: &[String]) -> Result<Vec<BigUint>> {
    let slate: Vec<BigUint> = candidates
        .iter()
        .map(|c| params.hash_to_group("jcj/candidate", c.as_bytes()))
        .collect();
    let mut sorted = slate.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != slate.len() || slate.iter().any(One::is_one) {
        return Err(Error::InvalidParams("candidate encodings collide"));
    }
    Ok(slate)
}

impl Election {
    /// Builds all keys and posts the roster, election parameters and the
    /// tallying key.
    pub fn setup(config: ElectionConfig) -> Result<Self> {
        Self::setup_on(config, None)
    }

    /// Like [`Election::setup`] but persists the board to `path`.
    pub fn setup_persistent(config: ElectionConfig, path: impl AsRef<Path>) -> Result<Self> {
        Self::setup_on(config, Some(path.as_ref()))
    }

    fn setup_on(config: ElectionConfig, path: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let params = config.group()?;
        let slate = encode_candidates(&params, &config.candidates)?;
        let mut key_rng = derive_rng(seed, "tallier-key");
        let (talliers, dealer_key) = Talliers::setup(&params, config.threshold, config.talliers, &mut key_rng)?;
        let fhe = if config.backend == Backend::Linear {
            Some(fhe_keygen(&params, config.threshold, config.talliers, seed)?)
        } else {
            None
        };
        let registrar_keys: Vec<AuthorityKey> = (1..=config.registrars)
            .map(|i| authority(seed, format!("registrar-{i}"), Role::Registrar))
            .collect();
        let tallier_keys: Vec<AuthorityKey> = (1..=config.talliers)
            .map(|i| authority(seed, format!("tallier-{i}"), Role::Tallier))
            .collect();
        let roster = registrar_keys
            .iter()
            .chain(&tallier_keys)
            .map(AuthorityKey::info)
            .collect();
        let mut board = match path {
            Some(p) => Board::persistent(roster, &registrar_keys[0], p)?,
            None => Board::new(roster, &registrar_keys[0])?,
        };
        let election_params = ElectionParams {
            election_id: config.election_id.clone(),
            candidates: config.candidates.clone(),
            encodings: slate.clone(),
            group: params.clone(),
            backend: config.backend,
            duplicate_policy: config.duplicate_policy,
            threshold: config.threshold,
            talliers: config.talliers,
            mix_servers: config.mix_servers,
            shadow_rounds: config.shadow_rounds,
            eligibility: config.eligibility,
            canonical: config.canonical,
        };
        board.append(
            EntryKind::Param,
            Payload::ElectionParams(election_params).to_bytes(),
            Author::Authority(&registrar_keys[0]),
        )?;
        let key_payload = match &fhe {
            Some((oracle, _)) => Payload::OracleKey {
                key: oracle.public_key(),
            },
            None => Payload::TallierKey {
                key: talliers.key.clone(),
            },
        };
        board.append(
            EntryKind::Param,
            key_payload.to_bytes(),
            Author::Authority(&tallier_keys[0]),
        )?;
        Ok(Self {
            rng: derive_rng(seed, "election"),
            config,
            params,
            slate,
            talliers,
            fhe,
            registrar_keys,
            tallier_keys,
            board,
            voters: Vec::new(),
            dealer_key,
        })
    }

    pub fn election_id(&self) -> &[u8] {
        self.config.election_id.as_bytes()
    }

    pub fn backend(&self) -> Backend {
        self.config.backend
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// The dealer's full key. Simulation and tests only.
    pub fn dealer_key(&self) -> &KeyPair {
        &self.dealer_key
    }

    /// Every authority signing key, registrars first.
    pub fn authority_keys(&self) -> Vec<AuthorityKey> {
        self.registrar_keys.iter().chain(&self.tallier_keys).cloned().collect()
    }

    pub fn oracle(&self) -> Option<&FheOracle> {
        self.fhe.as_ref().map(|(o, _)| o)
    }

    /// Simulation-only plaintext view of an FHE ciphertext via a quorum.
    pub fn fhe_open(&self, ct: &FheCiphertext) -> Result<Vec<u8>> {
        let (oracle, keys) = self.fhe.as_ref().ok_or(Error::Config("not an FHE election".into()))?;
        let approvals = crate::fhe::quorum_approvals(keys, self.config.threshold, ct);
        Ok(oracle.threshold_decrypt(ct, &approvals)?.0)
    }

    /// A fresh credential of the kind this election uses.
    pub fn fresh_credential(&mut self) -> Credential {
        if self.config.backend.is_classical() {
            Credential::Classical(self.params.random_element(&mut self.rng))
        } else if self.config.eligibility {
            let x: [u8; 32] = random_bytes(&mut self.rng);
            Credential::Fhe {
                sigma: derive_credential(&x),
                preimage: Some(x.to_vec()),
            }
        } else {
            Credential::Fhe {
                sigma: random_bytes::<_, 32>(&mut self.rng).to_vec(),
                preimage: None,
            }
        }
    }

    /// Issues `count` credentials and posts one signed roll entry per voter.
    /// Returns the new voters; credentials travel over the assumed
    /// untappable channel.
    pub fn register(&mut self, count: usize) -> Result<Vec<Voter>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let index = self.voters.len() as u32;
            let credential = self.fresh_credential();
            let payload = match &credential {
                Credential::Classical(sigma) => {
                    let (ct, _) = self
                        .talliers
                        .key
                        .public
                        .encrypt_random(&self.params, sigma, &mut self.rng)?;
                    Payload::Roll {
                        voter: index,
                        credential: ct,
                    }
                }
                Credential::Fhe { sigma, .. } => Payload::FheRoll {
                    voter: index,
                    credential: self
                        .oracle()
                        .expect("linear backend")
                        .encrypt(sigma, PlaintextTag::Credential),
                },
            };
            let registrar = &self.registrar_keys[index as usize % self.registrar_keys.len()];
            self.board
                .append(EntryKind::Roll, payload.to_bytes(), Author::Authority(registrar))?;
            let voter = Voter { index, credential };
            self.voters.push(voter.clone());
            out.push(voter);
        }
        Ok(out)
    }

    /// Builds a ballot for `election_id` without posting it.
    pub fn build_ballot(&mut self, credential: &Credential, choice: usize, election_id: &[u8]) -> Result<Payload> {
        if choice >= self.slate.len() {
            return Err(Error::NotOnSlate(choice.to_string()));
        }
        match credential {
            Credential::Classical(sigma) => {
                let pk = &self.talliers.key.public;
                let (vote, vote_r) = pk.encrypt_random(&self.params, &self.slate[choice], &mut self.rng)?;
                let (cred, cred_r) = pk.encrypt_random(&self.params, sigma, &mut self.rng)?;
                let proofs = BallotProofBundle::prove(
                    &self.params,
                    pk,
                    &self.slate,
                    election_id,
                    &vote,
                    choice,
                    &vote_r,
                    &cred,
                    &cred_r,
                    &mut self.rng,
                )?;
                Ok(Payload::Ballot {
                    vote,
                    credential: cred,
                    proofs,
                })
            }
            Credential::Fhe { sigma, preimage } => self.build_fhe_ballot(
                sigma,
                preimage.as_deref(),
                self.config.candidates[choice].as_bytes(),
                election_id,
            ),
        }
    }

    /// FHE ballot with explicit plaintexts; lets tests model stuffing and
    /// off-slate votes.
    pub fn build_fhe_ballot(
        &self,
        sigma: &[u8],
        preimage: Option<&[u8]>,
        vote: &[u8],
        election_id: &[u8],
    ) -> Result<Payload> {
        let oracle = self.oracle().ok_or(Error::Config("not an FHE election".into()))?;
        let e_vote = oracle.encrypt(vote, PlaintextTag::Vote);
        let e_cred = oracle.encrypt(sigma, PlaintextTag::Credential);
        let e_pre = preimage.map(|x| oracle.encrypt(x, PlaintextTag::Preimage));
        let mut items = vec![(&e_vote, vote), (&e_cred, sigma)];
        if let (Some(ct), Some(x)) = (&e_pre, preimage) {
            items.push((ct, x));
        }
        let attestation = oracle.attest_knowledge(election_id, &items)?;
        Ok(Payload::FheBallot {
            vote: e_vote,
            credential: e_cred,
            preimage: e_pre,
            attestation,
        })
    }

    pub fn post_ballot(&mut self, ballot: &Payload) -> Result<u64> {
        Ok(self
            .board
            .append(EntryKind::Ballot, ballot.to_bytes(), Author::Anonymous)?
            .index)
    }

    /// Casts a ballot anonymously and returns its board index.
    pub fn cast_vote(&mut self, credential: &Credential, choice: usize) -> Result<u64> {
        let eid = self.config.election_id.clone().into_bytes();
        let ballot = self.build_ballot(credential, choice, &eid)?;
        self.post_ballot(&ballot)
    }

    /// The voter hands a fresh fake credential to the coercer, who casts
    /// `coercer_choice` with it; the voter then casts `real_choice` with the
    /// true credential.
    pub fn cast_coerced(&mut self, voter: &Voter, coercer_choice: usize, real_choice: usize) -> Result<Coercion> {
        let fake_credential = self.fresh_credential();
        let fake_ballot = self.cast_vote(&fake_credential, coercer_choice)?;
        let real_ballot = self.cast_vote(&voter.credential, real_choice)?;
        Ok(Coercion {
            voter: voter.index,
            fake_credential,
            fake_ballot,
            real_ballot,
        })
    }
}

/// A populated election plus its plaintext ground truth.
#[derive(Debug)]
pub struct Scenario {
    pub election: Election,
    pub casts: Vec<CastRecord>,
    pub coercions: Vec<Coercion>,
    pub expected: Vec<u64>,
}

/// Expected tally computed from plaintext bookkeeping only: group ballots by
/// credential, keep one per the duplicate policy, drop unregistered
/// credentials, count choices.
pub fn ground_truth(
    casts: &[CastRecord],
    registered: &[Credential],
    policy: DuplicatePolicy,
    candidates: usize,
) -> Vec<u64> {
    let mut ordered: Vec<&CastRecord> = casts.iter().collect();
    ordered.sort_by_key(|c| c.board_index);
    let mut kept: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for cast in ordered {
        let key = cast.credential.key();
        match policy {
            DuplicatePolicy::KeepFirst => {
                kept.entry(key).or_insert(cast.choice);
            }
            DuplicatePolicy::KeepLast => {
                kept.insert(key, cast.choice);
            }
        }
    }
    let mut tally = vec![0u64; candidates];
    for cred in registered {
        if let Some(&choice) = kept.get(&cred.key()) {
            tally[choice] += 1;
        }
    }
    tally
}

/// Sets up an election, registers honest and coerced voters, and casts the
/// scenario's ballots in a seed-determined order.
pub fn generate_scenario(config: &ElectionConfig, spec: ScenarioSpec) -> Result<Scenario> {
    let mut config = config.clone();
    config.scenario = spec;
    config.validate()?;
    let mut election = Election::setup(config)?;
    let voters = election.register(spec.registered())?;
    let (honest, coerced) = voters.split_at(spec.honest);
    let n_c = election.slate.len();

    enum Plan {
        Single(CastKind, Option<u32>, Credential, usize),
        Coerced(Voter, usize, usize),
    }
    let mut plans = Vec::with_capacity(spec.ballots());
    let rng = &mut derive_rng(election.config.seed, "scenario");
    for v in honest {
        plans.push(Plan::Single(
            CastKind::Honest,
            Some(v.index),
            v.credential.clone(),
            rng.gen_range(0..n_c),
        ));
    }
    for v in &honest[..spec.duplicate] {
        plans.push(Plan::Single(
            CastKind::Duplicate,
            Some(v.index),
            v.credential.clone(),
            rng.gen_range(0..n_c),
        ));
    }
    for _ in 0..spec.invalid {
        let credential = election.fresh_credential();
        plans.push(Plan::Single(CastKind::Invalid, None, credential, rng.gen_range(0..n_c)));
    }
    for v in coerced {
        plans.push(Plan::Coerced(v.clone(), rng.gen_range(0..n_c), rng.gen_range(0..n_c)));
    }
    plans.shuffle(rng);

    let mut casts = Vec::with_capacity(spec.ballots());
    let mut coercions = Vec::new();
    for plan in plans {
        match plan {
            Plan::Single(kind, voter, credential, choice) => {
                let board_index = election.cast_vote(&credential, choice)?;
                casts.push(CastRecord {
                    board_index,
                    kind,
                    voter,
                    credential,
                    choice,
                });
            }
            Plan::Coerced(voter, fake_choice, real_choice) => {
                let c = election.cast_coerced(&voter, fake_choice, real_choice)?;
                casts.push(CastRecord {
                    board_index: c.fake_ballot,
                    kind: CastKind::CoercedFake,
                    voter: None,
                    credential: c.fake_credential.clone(),
                    choice: fake_choice,
                });
                casts.push(CastRecord {
                    board_index: c.real_ballot,
                    kind: CastKind::CoercedReal,
                    voter: Some(voter.index),
                    credential: voter.credential.clone(),
                    choice: real_choice,
                });
                coercions.push(c);
            }
        }
    }
    // within a duplicate pair, the later cast is labelled the duplicate
    let mut first_seen: BTreeMap<u32, usize> = BTreeMap::new();
    casts.sort_by_key(|c| c.board_index);
    for i in 0..casts.len() {
        if let (Some(v), CastKind::Honest | CastKind::Duplicate) = (casts[i].voter, casts[i].kind) {
            match first_seen.get(&v) {
                None => {
                    first_seen.insert(v, i);
                    casts[i].kind = CastKind::Honest;
                }
                Some(_) => casts[i].kind = CastKind::Duplicate,
            }
        }
    }
    let registered: Vec<Credential> = election.voters.iter().map(|v| v.credential.clone()).collect();
    let expected = ground_truth(&casts, &registered, election.config.duplicate_policy, n_c);
    Ok(Scenario {
        election,
        casts,
        coercions,
        expected,
    })
}

/// The ballot payload sent to board position `index`, if any.
pub fn ballot_at(board: &Board, index: u64) -> Option<Payload> {
    let entry = board.entries().get(index as usize)?;
    (entry.kind == EntryKind::Ballot)
        .then(|| Payload::from_bytes(&entry.payload).ok())
        .flatten()
}
