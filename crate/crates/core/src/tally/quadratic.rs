//! PET-based weeding: pairwise tests among ballot credentials, then every
//! mixed ballot credential against every mixed roll credential.

use crate::board::EntryKind;
use crate::elgamal::Ciphertext;
use crate::error::{Error, Result};
use crate::group::derive_rng;
use crate::mixnet::{mix, MixBatch};
use crate::payload::{ListKind, Payload, PetRow, Stage, VoteOpening};
use crate::pet::{pet, PetEvidence};
use crate::protocol::{Backend, Election};

use super::{
    ballot_entries, classical_proof_check, classical_roll, context, count_votes, dedup, exponentiations_since, invert,
    post, stage_report, OpCounters, Outcome, SimulationTrace, StageSummary, TallyResult, WeedingReport, DECRYPT_VOTES,
    MIX_BALLOTS, MIX_ROLL, PET_DUPLICATES, PET_ROLL_MATCH,
};

/// Which pairs the duplicate stage tests for row `i`. Canonical mode tests
/// all later positions; otherwise rows of known duplicates are skipped, as
/// are known duplicates on the right.
pub(crate) fn duplicate_row(i: usize, n: usize, marked: &[bool], canonical: bool) -> Vec<usize> {
    if canonical {
        (i + 1..n).collect()
    } else if marked[i] {
        Vec::new()
    } else {
        (i + 1..n).filter(|&j| !marked[j]).collect()
    }
}

/// Folds one row of duplicate-stage verdicts into the class assignment.
pub(crate) fn absorb_duplicate_row(
    i: usize,
    right: &[usize],
    verdicts: &[bool],
    marked: &mut [bool],
    class: &mut [usize],
) {
    for (&j, &v) in right.iter().zip(verdicts) {
        if v && !marked[j] {
            marked[j] = true;
            class[j] = class[i];
        }
    }
}

/// Roll-matching walk for one ballot. `test(j)` runs the PET against roll
/// position `j`. Returns the tested positions, their evidence, and whether a
/// roll entry was consumed. Canonical mode tests every roll position;
/// otherwise consumed entries are skipped and the walk stops at a match.
pub(crate) fn roll_row<E>(
    roll_len: usize,
    consumed: &mut [bool],
    canonical: bool,
    mut test: impl FnMut(usize) -> Result<(bool, E)>,
) -> Result<(Vec<usize>, Vec<E>, bool)> {
    let mut right = Vec::new();
    let mut evidence = Vec::new();
    let mut matched = false;
    for j in 0..roll_len {
        if !canonical && (matched || consumed[j]) {
            continue;
        }
        let (verdict, ev) = test(j)?;
        if verdict && !matched && !consumed[j] {
            consumed[j] = true;
            matched = true;
        }
        right.push(j);
        evidence.push(ev);
    }
    Ok((right, evidence, matched))
}

pub fn tally_quadratic(election: &mut Election) -> Result<Outcome> {
    if election.backend() != Backend::Quadratic {
        return Err(Error::Config(format!(
            "election uses the {} backend",
            election.backend()
        )));
    }
    let start = crate::group::exponentiations();
    let eid = election.election_id().to_vec();
    let params = election.params.clone();
    let pk = election.talliers.key.public.clone();
    let cfg = election.config.clone();
    let canonical = cfg.canonical;
    let mut rng = derive_rng(cfg.seed, "tally");
    let tallier = election.tallier_keys[0].clone();
    let mut counters = OpCounters::default();
    let mut weeding = WeedingReport::default();

    let ballots = ballot_entries(election.board.entries());
    let roll = classical_roll(election.board.entries())?;

    // (1) proof check
    let (s1, valid) = classical_proof_check(&params, &pk, &election.slate, &eid, &ballots);
    let e = post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::ProofCheck, ballots.len(), &s1),
    )?;
    weeding.stages.push(StageSummary {
        stage: Stage::ProofCheck,
        input: ballots.len(),
        survivors: s1.clone(),
        evidence: vec![e],
    });

    // (2) pairwise PETs over ballot credentials
    let n1 = valid.len();
    let ctx = context(&eid, PET_DUPLICATES);
    let mut marked = vec![false; n1];
    let mut class: Vec<usize> = (0..n1).collect();
    let mut evidence_entries = Vec::new();
    for i in 0..n1 {
        let right = duplicate_row(i, n1, &marked, canonical);
        let mut evidence = Vec::with_capacity(right.len());
        for &j in &right {
            let t = pet(
                &params,
                &election.talliers,
                &valid[i].credential,
                &valid[j].credential,
                &ctx,
                &mut rng,
            )?;
            counters.pet_count += 1;
            evidence.push(t.evidence);
        }
        let verdicts: Vec<bool> = evidence.iter().map(|e| e.verdict).collect();
        absorb_duplicate_row(i, &right, &verdicts, &mut marked, &mut class);
        let row = PetRow {
            stage: Stage::Duplicates,
            left: i as u32,
            right: super::to_u32(right),
            evidence,
        };
        evidence_entries.push(post(
            &mut election.board,
            &tallier,
            EntryKind::Pet,
            &Payload::PetRow(row),
        )?);
    }
    let s2 = dedup(&class, cfg.duplicate_policy);
    evidence_entries.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::Duplicates, n1, &s2),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::Duplicates,
        input: n1,
        survivors: s2.clone(),
        evidence: evidence_entries,
    });

    // (3) mix ballots and roll
    let rows: Vec<Vec<Ciphertext>> = s2
        .iter()
        .map(|&p| vec![valid[p as usize].vote.clone(), valid[p as usize].credential.clone()])
        .collect();
    let (ballot_mix, ballot_perm): (MixBatch<Ciphertext>, _) = mix(
        &params,
        &pk,
        rows,
        2,
        cfg.mix_servers,
        cfg.shadow_rounds,
        &context(&eid, MIX_BALLOTS),
        &mut rng,
    )?;
    let roll_rows: Vec<Vec<Ciphertext>> = roll.into_iter().map(|c| vec![c]).collect();
    let (roll_mix, _) = mix(
        &params,
        &pk,
        roll_rows,
        1,
        cfg.mix_servers,
        cfg.shadow_rounds,
        &context(&eid, MIX_ROLL),
        &mut rng,
    )?;
    counters.mix_count += 2;
    let mut evidence_entries = vec![
        post(
            &mut election.board,
            &tallier,
            EntryKind::Mix,
            &Payload::Mix {
                list: ListKind::Ballots,
                batch: ballot_mix.clone(),
            },
        )?,
        post(
            &mut election.board,
            &tallier,
            EntryKind::Mix,
            &Payload::Mix {
                list: ListKind::Roll,
                batch: roll_mix.clone(),
            },
        )?,
    ];

    // (4) every mixed ballot credential against every mixed roll credential
    let ctx = context(&eid, PET_ROLL_MATCH);
    let mixed_ballots = ballot_mix.output();
    let mixed_roll = roll_mix.output_column(0);
    let mut consumed = vec![false; mixed_roll.len()];
    let mut s4 = Vec::new();
    for (i, row) in mixed_ballots.iter().enumerate() {
        let (right, evidence, matched) = roll_row(mixed_roll.len(), &mut consumed, canonical, |j| {
            let t = pet(&params, &election.talliers, &row[1], &mixed_roll[j], &ctx, &mut rng)?;
            counters.pet_count += 1;
            Ok::<_, Error>((t.evidence.verdict, t.evidence))
        })?;
        if matched {
            s4.push(i as u32);
        }
        let row = PetRow {
            stage: Stage::RollMatch,
            left: i as u32,
            right: super::to_u32(right),
            evidence: evidence.into_iter().collect::<Vec<PetEvidence>>(),
        };
        evidence_entries.push(post(
            &mut election.board,
            &tallier,
            EntryKind::Pet,
            &Payload::PetRow(row),
        )?);
    }
    evidence_entries.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::RollMatch, mixed_ballots.len(), &s4),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::RollMatch,
        input: mixed_ballots.len(),
        survivors: s4.clone(),
        evidence: evidence_entries,
    });

    // (5) decrypt surviving votes
    let ctx = context(&eid, DECRYPT_VOTES);
    let mut openings = Vec::with_capacity(s4.len());
    for &i in &s4 {
        let (plaintext, shares) = election
            .talliers
            .decrypt(&params, &mixed_ballots[i as usize][0], &ctx, &mut rng)?;
        counters.decrypt_count += 1;
        openings.push(VoteOpening { plaintext, shares });
    }
    let votes: Vec<_> = openings.iter().map(|o| o.plaintext.clone()).collect();
    let (counts, spoiled) = count_votes(&votes, &election.slate);
    post(
        &mut election.board,
        &tallier,
        EntryKind::Decryption,
        &Payload::VoteDecryption { openings },
    )?;

    let inverse = invert(&ballot_perm);
    let counted = s4
        .iter()
        .map(|&i| valid[s2[inverse[i as usize]] as usize].board_index)
        .collect();
    counters.exponentiation_count = exponentiations_since(start);
    let result = TallyResult {
        backend: Backend::Quadratic,
        candidates: cfg.candidates.clone(),
        counts,
        spoiled,
        proof_rejected: (ballots.len() - n1) as u64,
        ineligible_removed: 0,
        duplicates_removed: (n1 - s2.len()) as u64,
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
