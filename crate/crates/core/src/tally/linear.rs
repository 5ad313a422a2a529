//! Keyed-hash weeding under FHE: hash every ballot credential under a fresh
//! key and match digests in a hash table; after mixing, hash ballots and
//! roll again under a second fresh key and match.

use crate::board::{BoardEntry, EntryKind};
use crate::error::{Error, Result};
use crate::fhe::{quorum_approvals, ApprovalKey, FheCiphertext, FheOracle, HashKey};
use crate::group::derive_rng;
use crate::mixnet::mix;
use crate::payload::{KeyedHashBatch, KeyedHashItem, ListKind, Payload, Stage};
use crate::protocol::{Backend, Election};

use super::eligibility::{fhe_proof_check, weed};
use super::{
    aborted, ballot_entries, context, count_votes, dedup, exponentiations_since, invert, post, roll_match,
    stage_report, OpCounters, Outcome, SimulationTrace, StageSummary, TallyResult, WeedingReport, MIX_BALLOTS,
    MIX_ROLL,
};

pub(crate) fn fhe_roll(entries: &[BoardEntry]) -> Result<Vec<FheCiphertext>> {
    entries
        .iter()
        .filter(|e| e.kind == EntryKind::Roll)
        .map(|e| match Payload::at(&e.payload, e.index)? {
            Payload::FheRoll { credential, .. } => Ok(credential),
            other => Err(aborted(e.index, format!("unexpected {} in roll", other.type_name()))),
        })
        .collect()
}

struct Hasher<'a> {
    oracle: &'a FheOracle,
    keys: &'a [ApprovalKey],
    threshold: usize,
}

impl Hasher<'_> {
    /// Evaluates h_k on each credential and decrypts the digests.
    fn digests(
        &self,
        cts: &[&FheCiphertext],
        key: &HashKey,
        counters: &mut OpCounters,
    ) -> Result<(Vec<Vec<u8>>, Vec<KeyedHashItem>)> {
        let mut digests = Vec::with_capacity(cts.len());
        let mut items = Vec::with_capacity(cts.len());
        for ct in cts {
            let (output, eval) = self.oracle.eval_keyed_hash(ct, key)?;
            let (digest, decrypt) = self
                .oracle
                .threshold_decrypt(&output, &quorum_approvals(self.keys, self.threshold, &output))?;
            counters.hash_eval_count += 1;
            counters.decrypt_count += 1;
            digests.push(digest);
            items.push(KeyedHashItem { output, eval, decrypt });
        }
        Ok((digests, items))
    }
}

pub fn tally_linear(election: &mut Election) -> Result<Outcome> {
    if election.backend() != Backend::Linear {
        return Err(Error::Config(format!(
            "election uses the {} backend",
            election.backend()
        )));
    }
    let start = crate::group::exponentiations();
    let eid = election.election_id().to_vec();
    let params = election.params.clone();
    let cfg = election.config.clone();
    let (oracle, keys) = election.fhe.clone().expect("linear elections carry an oracle");
    let fpk = oracle.public_key();
    let hasher = Hasher {
        oracle: &oracle,
        keys: &keys,
        threshold: cfg.threshold,
    };
    let mut rng = derive_rng(cfg.seed, "tally");
    let tallier = election.tallier_keys[0].clone();
    let mut counters = OpCounters::default();
    let mut weeding = WeedingReport::default();

    let ballots = ballot_entries(election.board.entries());
    let roll = fhe_roll(election.board.entries())?;

    // (1) attestations
    let (s1, valid) = fhe_proof_check(&fpk, &eid, &ballots);
    let n1 = valid.len();
    let e = post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::ProofCheck, ballots.len(), &s1),
    )?;
    weeding.stages.push(StageSummary {
        stage: Stage::ProofCheck,
        input: ballots.len(),
        survivors: s1,
        evidence: vec![e],
    });

    let list: Vec<usize> = if cfg.eligibility {
        let (survivors, items, decryptions) = weed(&oracle, &keys, cfg.threshold, &valid)?;
        counters.decrypt_count += decryptions;
        let mut evidence = vec![post(
            &mut election.board,
            &tallier,
            EntryKind::HashPost,
            &Payload::Eligibility { items },
        )?];
        evidence.push(post(
            &mut election.board,
            &tallier,
            EntryKind::Result,
            &stage_report(Stage::Eligibility, n1, &survivors),
        )?);
        weeding.stages.push(StageSummary {
            stage: Stage::Eligibility,
            input: n1,
            survivors: survivors.clone(),
            evidence,
        });
        survivors.into_iter().map(|p| p as usize).collect()
    } else {
        (0..n1).collect()
    };

    // (2) duplicates by digest under a fresh key k1
    let k1 = oracle.new_hash_key();
    let mut evidence = vec![post(
        &mut election.board,
        &tallier,
        EntryKind::Param,
        &Payload::HashKey { key: k1.clone() },
    )?];
    let creds: Vec<&FheCiphertext> = list.iter().map(|&p| &valid[p].credential).collect();
    let (digests, items) = hasher.digests(&creds, &k1, &mut counters)?;
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::HashPost,
        &Payload::KeyedHash(KeyedHashBatch {
            stage: Stage::Duplicates,
            list: ListKind::Ballots,
            key_id: k1.id,
            items,
        }),
    )?);
    let s2 = dedup(&digests, cfg.duplicate_policy);
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::Duplicates, list.len(), &s2),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::Duplicates,
        input: list.len(),
        survivors: s2.clone(),
        evidence,
    });

    // (3) mix ballots and roll
    let rows: Vec<Vec<FheCiphertext>> = s2
        .iter()
        .map(|&p| {
            let b = &valid[list[p as usize]];
            vec![b.vote.clone(), b.credential.clone()]
        })
        .collect();
    let (ballot_mix, perm) = mix(
        &params,
        &fpk.key,
        rows,
        2,
        cfg.mix_servers,
        cfg.shadow_rounds,
        &context(&eid, MIX_BALLOTS),
        &mut rng,
    )?;
    let roll_rows: Vec<Vec<FheCiphertext>> = roll.into_iter().map(|c| vec![c]).collect();
    let (roll_mix, _) = mix(
        &params,
        &fpk.key,
        roll_rows,
        1,
        cfg.mix_servers,
        cfg.shadow_rounds,
        &context(&eid, MIX_ROLL),
        &mut rng,
    )?;
    counters.mix_count += 2;
    let mut evidence = Vec::new();
    for (list, batch) in [(ListKind::Ballots, &ballot_mix), (ListKind::Roll, &roll_mix)] {
        evidence.push(post(
            &mut election.board,
            &tallier,
            EntryKind::Mix,
            &Payload::FheMix {
                list,
                batch: batch.clone(),
            },
        )?);
    }

    // (4) roll matching under a second fresh key k2
    let k2 = oracle.new_hash_key();
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Param,
        &Payload::HashKey { key: k2.clone() },
    )?);
    let mixed = ballot_mix.output();
    let mixed_creds: Vec<&FheCiphertext> = mixed.iter().map(|r| &r[1]).collect();
    let (ballot_digests, items) = hasher.digests(&mixed_creds, &k2, &mut counters)?;
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::HashPost,
        &Payload::KeyedHash(KeyedHashBatch {
            stage: Stage::RollMatch,
            list: ListKind::Ballots,
            key_id: k2.id,
            items,
        }),
    )?);
    let roll_creds: Vec<&FheCiphertext> = roll_mix.output().iter().map(|r| &r[0]).collect();
    let (roll_digests, items) = hasher.digests(&roll_creds, &k2, &mut counters)?;
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::HashPost,
        &Payload::KeyedHash(KeyedHashBatch {
            stage: Stage::RollMatch,
            list: ListKind::Roll,
            key_id: k2.id,
            items,
        }),
    )?);
    let s4 = roll_match(&ballot_digests, &roll_digests);
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::RollMatch, mixed.len(), &s4),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::RollMatch,
        input: mixed.len(),
        survivors: s4.clone(),
        evidence,
    });

    // (5) decrypt surviving votes
    let mut records = Vec::with_capacity(s4.len());
    let mut votes = Vec::with_capacity(s4.len());
    for &i in &s4 {
        let ct = &mixed[i as usize][0];
        let (vote, record) = oracle.threshold_decrypt(ct, &quorum_approvals(&keys, cfg.threshold, ct))?;
        counters.decrypt_count += 1;
        votes.push(vote);
        records.push(record);
    }
    let slate: Vec<Vec<u8>> = cfg.candidates.iter().map(|c| c.as_bytes().to_vec()).collect();
    let (counts, spoiled) = count_votes(&votes, &slate);
    post(
        &mut election.board,
        &tallier,
        EntryKind::Decryption,
        &Payload::FheVoteDecryption { records },
    )?;

    let inverse = invert(&perm);
    let counted = s4
        .iter()
        .map(|&i| valid[list[s2[inverse[i as usize]] as usize]].board_index)
        .collect();
    counters.exponentiation_count = exponentiations_since(start);
    let result = TallyResult {
        backend: Backend::Linear,
        candidates: cfg.candidates.clone(),
        counts,
        spoiled,
        proof_rejected: (ballots.len() - n1) as u64,
        ineligible_removed: (n1 - list.len()) as u64,
        duplicates_removed: (list.len() - s2.len()) as u64,
        invalid_credential_removed: (s2.len() - s4.len()) as u64,
        counters,
    };
    let result_entry = post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &Payload::Result(result.clone()),
    )?;
    Ok(Outcome {
        result,
        weeding,
        trace: SimulationTrace { counted },
        result_entry,
    })
}
