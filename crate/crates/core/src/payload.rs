//! Board payload schema. Every entry's payload is the JSON encoding of one
//! [`Payload`], tagged by `type`.
//!
//! Tally evidence refers to ciphertexts by position rather than by value:
//! positions index the list named by the entry (ballots surviving the
//! previous stage, or a mix output), all of which an auditor can rebuild
//! from earlier entries.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::board::AuthorityInfo;
use crate::elgamal::Ciphertext;
use crate::encode::{hex_bytes, hex_uint, hex_uint_vec};
use crate::error::{Error, Result};
use crate::fhe::{FheCiphertext, FhePublicKey, HashKey, OracleRecord};
use crate::group::GroupParams;
use crate::mixnet::MixBatch;
use crate::nizk::BallotProofBundle;
use crate::pet::{BlindingContribution, PetEvidence};
use crate::protocol::{Backend, DuplicatePolicy};
use crate::tally::TallyResult;
use crate::threshold::{DecryptionShare, ThresholdKey};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionParams {
    pub election_id: String,
    pub candidates: Vec<String>,
    #[serde(with = "hex_uint_vec")]
    pub encodings: Vec<BigUint>,
    pub group: GroupParams,
    pub backend: Backend,
    pub duplicate_policy: DuplicatePolicy,
    pub threshold: usize,
    pub talliers: usize,
    pub mix_servers: usize,
    pub shadow_rounds: usize,
    pub eligibility: bool,
    pub canonical: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Input: ballot entries in board order.
    ProofCheck,
    /// Input: proof-check survivors.
    Eligibility,
    /// Input: survivors of the previous weeding stage (proof-check survivors
    /// for the blinded-exponent backend).
    Duplicates,
    /// Input: ballot mix output (PET and keyed-hash backends) or proof-check
    /// survivors (blinded-exponent backend, where survivors are also
    /// duplicate-stage survivors).
    RollMatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ListKind {
    Ballots,
    Roll,
}

/// Positions (into the stage's input list) that survive the stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub input: usize,
    pub survivors: Vec<u32>,
}

/// PETs of the `left` ciphertext against each `right` ciphertext.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetRow {
    pub stage: Stage,
    pub left: u32,
    pub right: Vec<u32>,
    pub evidence: Vec<PetEvidence>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindingCommitment {
    pub index: u32,
    #[serde(with = "hex_uint")]
    pub value: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedCredential {
    pub contributions: Vec<BlindingContribution>,
    pub shares: Vec<DecryptionShare>,
    #[serde(with = "hex_uint")]
    pub value: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindingBatch {
    pub list: ListKind,
    pub items: Vec<BlindedCredential>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedHashItem {
    pub output: FheCiphertext,
    pub eval: OracleRecord,
    pub decrypt: OracleRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedHashBatch {
    pub stage: Stage,
    pub list: ListKind,
    pub key_id: u32,
    pub items: Vec<KeyedHashItem>,
}

/// `None` marks a ballot without a preimage ciphertext.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityItem {
    pub output: Option<FheCiphertext>,
    pub eval: Option<OracleRecord>,
    pub decrypt: Option<OracleRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOpening {
    #[serde(with = "hex_uint")]
    pub plaintext: BigUint,
    pub shares: Vec<DecryptionShare>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payload {
    Roster {
        authorities: Vec<AuthorityInfo>,
    },
    ElectionParams(ElectionParams),
    TallierKey {
        key: ThresholdKey,
    },
    OracleKey {
        key: FhePublicKey,
    },
    Roll {
        voter: u32,
        credential: Ciphertext,
    },
    FheRoll {
        voter: u32,
        credential: FheCiphertext,
    },
    Ballot {
        vote: Ciphertext,
        credential: Ciphertext,
        proofs: BallotProofBundle,
    },
    FheBallot {
        vote: FheCiphertext,
        credential: FheCiphertext,
        preimage: Option<FheCiphertext>,
        #[serde(with = "hex_bytes")]
        attestation: [u8; 64],
    },
    Stage(StageReport),
    PetRow(PetRow),
    Mix {
        list: ListKind,
        batch: MixBatch<Ciphertext>,
    },
    FheMix {
        list: ListKind,
        batch: MixBatch<FheCiphertext>,
    },
    BlindingKey {
        commitments: Vec<BlindingCommitment>,
    },
    Blinding(BlindingBatch),
    HashKey {
        key: HashKey,
    },
    KeyedHash(KeyedHashBatch),
    Eligibility {
        items: Vec<EligibilityItem>,
    },
    VoteDecryption {
        openings: Vec<VoteOpening>,
    },
    FheVoteDecryption {
        records: Vec<OracleRecord>,
    },
    Result(TallyResult),
}

impl Payload {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payloads serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Decodes the payload of board entry `index`.
    pub fn at(bytes: &[u8], index: u64) -> Result<Self> {
        Self::from_bytes(bytes).map_err(|e| Error::Payload {
            index,
            reason: e.to_string(),
        })
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Roster { .. } => "roster",
            Self::ElectionParams(_) => "election-params",
            Self::TallierKey { .. } => "tallier-key",
            Self::OracleKey { .. } => "oracle-key",
            Self::Roll { .. } => "roll",
            Self::FheRoll { .. } => "fhe-roll",
            Self::Ballot { .. } => "ballot",
            Self::FheBallot { .. } => "fhe-ballot",
            Self::Stage(_) => "stage",
            Self::PetRow(_) => "pet-row",
            Self::Mix { .. } => "mix",
            Self::FheMix { .. } => "fhe-mix",
            Self::BlindingKey { .. } => "blinding-key",
            Self::Blinding(_) => "blinding",
            Self::HashKey { .. } => "hash-key",
            Self::KeyedHash(_) => "keyed-hash",
            Self::Eligibility { .. } => "eligibility",
            Self::VoteDecryption { .. } => "vote-decryption",
            Self::FheVoteDecryption { .. } => "fhe-vote-decryption",
            Self::Result(_) => "result",
        }
    }
}
