//! Preimage-bound eligibility: a ballot is kept only if its credential is
//! the public hash of the preimage it carries, checked under encryption.

use crate::error::Result;
use crate::fhe::{quorum_approvals, ApprovalKey, FheCiphertext, FheOracle, FhePublicKey, PlaintextTag};
use crate::payload::{EligibilityItem, Payload, Stage};
use crate::protocol::Election;

use super::{ballot_entries, StageSummary, WeedingReport};

#[derive(Clone, Debug)]
pub(crate) struct FheBallotView {
    pub board_index: u64,
    pub vote: FheCiphertext,
    pub credential: FheCiphertext,
    pub preimage: Option<FheCiphertext>,
}

/// Stage 1 for FHE ballots: plaintext tags as expected and a knowledge
/// attestation bound to the election id.
pub(crate) fn fhe_proof_check(
    pk: &FhePublicKey,
    election_id: &[u8],
    ballots: &[(u64, Option<Payload>)],
) -> (Vec<u32>, Vec<FheBallotView>) {
    let mut survivors = Vec::new();
    let mut valid = Vec::new();
    for (pos, (index, payload)) in ballots.iter().enumerate() {
        let Some(Payload::FheBallot {
            vote,
            credential,
            preimage,
            attestation,
        }) = payload
        else {
            continue;
        };
        let tags_ok = vote.tag == PlaintextTag::Vote
            && credential.tag == PlaintextTag::Credential
            && preimage.as_ref().map_or(true, |p| p.tag == PlaintextTag::Preimage);
        let mut cts = vec![vote, credential];
        cts.extend(preimage.as_ref());
        if tags_ok && crate::fhe::verify_knowledge(pk, election_id, &cts, attestation) {
            survivors.push(pos as u32);
            valid.push(FheBallotView {
                board_index: *index,
                vote: vote.clone(),
                credential: credential.clone(),
                preimage: preimage.clone(),
            });
        }
    }
    (survivors, valid)
}

/// Runs the preimage check on every ballot. Returns surviving positions,
/// the evidence items, and the number of threshold decryptions.
pub(crate) fn weed(
    oracle: &FheOracle,
    keys: &[ApprovalKey],
    threshold: usize,
    ballots: &[FheBallotView],
) -> Result<(Vec<u32>, Vec<EligibilityItem>, u64)> {
    let mut survivors = Vec::new();
    let mut items = Vec::with_capacity(ballots.len());
    let mut decryptions = 0;
    for (i, b) in ballots.iter().enumerate() {
        let Some(pre) = &b.preimage else {
            items.push(EligibilityItem {
                output: None,
                eval: None,
                decrypt: None,
            });
            continue;
        };
        let (output, eval) = oracle.eval_hash_preimage_eq(pre, &b.credential)?;
        let (plaintext, decrypt) = oracle.threshold_decrypt(&output, &quorum_approvals(keys, threshold, &output))?;
        decryptions += 1;
        if plaintext == [1] {
            survivors.push(i as u32);
        }
        items.push(EligibilityItem {
            output: Some(output),
            eval: Some(eval),
            decrypt: Some(decrypt),
        });
    }
    Ok((survivors, items, decryptions))
}

/// Dry run of the proof-check and eligibility stages on the current board,
/// without posting. Removed ballots are possible stuffing.
pub fn eligibility_weed(election: &Election) -> Result<WeedingReport> {
    let (oracle, keys) = election
        .fhe
        .as_ref()
        .ok_or_else(|| crate::Error::Config("eligibility requires the linear backend".into()))?;
    let ballots = ballot_entries(election.board.entries());
    let (s1, valid) = fhe_proof_check(&oracle.public_key(), election.election_id(), &ballots);
    let (s2, _, _) = weed(oracle, keys, election.config.threshold, &valid)?;
    Ok(WeedingReport {
        stages: vec![
            StageSummary {
                stage: Stage::ProofCheck,
                input: ballots.len(),
                survivors: s1,
                evidence: Vec::new(),
            },
            StageSummary {
                stage: Stage::Eligibility,
                input: valid.len(),
                survivors: s2,
                evidence: Vec::new(),
            },
        ],
    })
}

impl WeedingReport {
    /// Board indices of ballots removed at `stage`, resolving positions
    /// through the proof-check stage. Only meaningful for stages whose
    /// input is the proof-check survivor list.
    pub fn removed_after_proof_check(&self, stage: Stage, ballot_indices: &[u64]) -> Vec<u64> {
        let (Some(first), Some(s)) = (self.stage(Stage::ProofCheck), self.stage(stage)) else {
            return Vec::new();
        };
        (0..s.input as u32)
            .filter(|p| !s.survivors.contains(p))
            .map(|p| ballot_indices[first.survivors[p as usize] as usize])
            .collect()
    }
}
