//! Blinded-exponent weeding: every credential ciphertext is raised to a
//! jointly shared non-zero exponent z = Σ z_i and decrypted, so equal credentials
//! yield equal public values σ^z that a hash table can match.

use num_bigint::BigUint;
use num_traits::One;
use rand::{CryptoRng, RngCore};

use crate::board::EntryKind;
use crate::elgamal::Ciphertext;
use crate::error::{Error, Result};
use crate::group::{derive_rng, GroupParams};
use crate::mixnet::mix;
use crate::nizk::{self, ProofContext};
use crate::payload::{BlindedCredential, BlindingBatch, BlindingCommitment, ListKind, Payload, Stage, VoteOpening};
use crate::pet::BlindingContribution;
use crate::protocol::{Backend, Election};
use crate::threshold::Talliers;

use super::{
    ballot_entries, biguint_key, classical_proof_check, classical_roll, context, count_votes, dedup,
    exponentiations_since, invert, post, roll_match, stage_report, OpCounters, Outcome, SimulationTrace, StageSummary,
    TallyResult, WeedingReport, BLIND_BALLOTS, BLIND_ROLL, DECRYPT_VOTES, MIX_BALLOTS,
};

/// Bases and powers of the per-tallier proof: the three components of the
/// credential ciphertext plus g1, whose power is the tallier's published
/// commitment, tying every contribution to one exponent.
pub(crate) fn blinding_statement(
    params: &GroupParams,
    base: &Ciphertext,
    power: &Ciphertext,
    commitment: &BigUint,
) -> (Vec<BigUint>, Vec<BigUint>) {
    let mut bases: Vec<BigUint> = base.components().into_iter().cloned().collect();
    bases.push(params.g1.clone());
    let mut powers: Vec<BigUint> = power.components().into_iter().cloned().collect();
    powers.push(commitment.clone());
    (bases, powers)
}

struct Exponent {
    index: u32,
    z: BigUint,
    commitment: BigUint,
}

fn blind<R: RngCore + CryptoRng>(
    params: &GroupParams,
    talliers: &Talliers,
    exponents: &[Exponent],
    ct: &Ciphertext,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<BlindedCredential> {
    let mut product = Ciphertext::trivial(BigUint::one());
    let mut contributions = Vec::with_capacity(exponents.len());
    for e in exponents {
        let power = ct.pow(params, &e.z);
        let (bases, powers) = blinding_statement(params, ct, &power, &e.commitment);
        let proof = nizk::prove_exponent_consistency(params, &bases, &powers, &e.z, ctx, rng)?;
        product = product.mul(params, &power);
        contributions.push(BlindingContribution {
            index: e.index,
            power,
            proof,
        });
    }
    let (value, shares) = talliers.decrypt(params, &product, ctx, rng)?;
    Ok(BlindedCredential {
        contributions,
        shares,
        value,
    })
}

pub fn tally_smith_weber(election: &mut Election) -> Result<Outcome> {
    if election.backend() != Backend::SmithWeber {
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
    let mut rng = derive_rng(cfg.seed, "tally");
    let tallier = election.tallier_keys[0].clone();
    let mut counters = OpCounters::default();
    let mut weeding = WeedingReport::default();

    let ballots = ballot_entries(election.board.entries());
    let roll = classical_roll(election.board.entries())?;

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

    // persistent per-tallier exponents with public commitments g1^{z_i};
    // a zero sum would blind every credential to the identity
    let exponents: Vec<Exponent> = loop {
        let exponents: Vec<Exponent> = election
            .talliers
            .quorum()
            .iter()
            .map(|s| {
                let z = params.random_nonzero_scalar(&mut rng);
                Exponent {
                    index: s.index,
                    commitment: params.pow(&params.g1, &z),
                    z,
                }
            })
            .collect();
        let joint = exponents
            .iter()
            .fold(BigUint::one(), |acc, e| params.mul(&acc, &e.commitment));
        if !joint.is_one() {
            break exponents;
        }
    };
    let key_entry = post(
        &mut election.board,
        &tallier,
        EntryKind::Param,
        &Payload::BlindingKey {
            commitments: exponents
                .iter()
                .map(|e| BlindingCommitment {
                    index: e.index,
                    value: e.commitment.clone(),
                })
                .collect(),
        },
    )?;

    let ctx = context(&eid, BLIND_BALLOTS);
    let ballot_items = valid
        .iter()
        .map(|b| blind(&params, &election.talliers, &exponents, &b.credential, &ctx, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let ctx = context(&eid, BLIND_ROLL);
    let roll_items = roll
        .iter()
        .map(|c| blind(&params, &election.talliers, &exponents, c, &ctx, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    counters.hash_eval_count += (ballot_items.len() + roll_items.len()) as u64;
    counters.decrypt_count += (ballot_items.len() + roll_items.len()) as u64;
    let ballot_values: Vec<Vec<u8>> = ballot_items.iter().map(|b| biguint_key(&b.value)).collect();
    let roll_values: Vec<Vec<u8>> = roll_items.iter().map(|b| biguint_key(&b.value)).collect();
    let blind_entries = vec![
        post(
            &mut election.board,
            &tallier,
            EntryKind::HashPost,
            &Payload::Blinding(BlindingBatch {
                list: ListKind::Ballots,
                items: ballot_items,
            }),
        )?,
        post(
            &mut election.board,
            &tallier,
            EntryKind::HashPost,
            &Payload::Blinding(BlindingBatch {
                list: ListKind::Roll,
                items: roll_items,
            }),
        )?,
    ];

    let n1 = valid.len();
    let s2 = dedup(&ballot_values, cfg.duplicate_policy);
    let mut evidence = vec![key_entry];
    evidence.extend(&blind_entries);
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::Duplicates, n1, &s2),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::Duplicates,
        input: n1,
        survivors: s2.clone(),
        evidence,
    });

    let kept: Vec<Vec<u8>> = s2.iter().map(|&p| ballot_values[p as usize].clone()).collect();
    let s3: Vec<u32> = roll_match(&kept, &roll_values)
        .into_iter()
        .map(|k| s2[k as usize])
        .collect();
    let mut evidence = blind_entries;
    evidence.push(post(
        &mut election.board,
        &tallier,
        EntryKind::Result,
        &stage_report(Stage::RollMatch, n1, &s3),
    )?);
    weeding.stages.push(StageSummary {
        stage: Stage::RollMatch,
        input: n1,
        survivors: s3.clone(),
        evidence,
    });

    let rows: Vec<Vec<Ciphertext>> = s3
        .iter()
        .map(|&p| vec![valid[p as usize].vote.clone(), valid[p as usize].credential.clone()])
        .collect();
    let (ballot_mix, perm) = mix(
        &params,
        &pk,
        rows,
        2,
        cfg.mix_servers,
        cfg.shadow_rounds,
        &context(&eid, MIX_BALLOTS),
        &mut rng,
    )?;
    counters.mix_count += 1;
    post(
        &mut election.board,
        &tallier,
        EntryKind::Mix,
        &Payload::Mix {
            list: ListKind::Ballots,
            batch: ballot_mix.clone(),
        },
    )?;

    let ctx = context(&eid, DECRYPT_VOTES);
    let mut openings = Vec::with_capacity(s3.len());
    for row in ballot_mix.output() {
        let (plaintext, shares) = election.talliers.decrypt(&params, &row[0], &ctx, &mut rng)?;
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

    let inverse = invert(&perm);
    let counted = (0..s3.len())
        .map(|i| valid[s3[inverse[i]] as usize].board_index)
        .collect();
    counters.exponentiation_count = exponentiations_since(start);
    let result = TallyResult {
        backend: Backend::SmithWeber,
        candidates: cfg.candidates.clone(),
        counts,
        spoiled,
        proof_rejected: (ballots.len() - n1) as u64,
        ineligible_removed: 0,
        duplicates_removed: (n1 - s2.len()) as u64,
        invalid_credential_removed: (s2.len() - s3.len()) as u64,
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
