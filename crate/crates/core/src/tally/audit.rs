//! Transcript auditor. Replays a tally from the public record alone: chain
//! and signatures, setup, every proof and PET, every mix, every oracle
//! record, each stage report, and finally the posted result.
//!
//! The auditor walks the tally phase with a cursor over the entry sequence
//! the backend must produce, so a transcript that stops early or carries
//! entries out of place fails even if its chain is intact.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::board::{roster_of, verify_chain, AuthorityInfo, BoardEntry, Digest, EntryKind, Role, Transcript};
use crate::elgamal::Ciphertext;
use crate::fhe::{verify_record, FheCiphertext, FhePublicKey, OracleRecord, PlaintextTag};
use crate::mixnet::{verify_mix, MixBatch, Mixable};
use crate::nizk::{self, ProofContext};
use crate::payload::{
    BlindedCredential, BlindingCommitment, ElectionParams, KeyedHashItem, ListKind, Payload, PetRow, Stage,
};
use crate::pet::{verify_pet, PetTranscript};
use crate::protocol::{encode_candidates, Backend};
use crate::threshold::{verify_and_combine, ThresholdKey};

use super::eligibility::{fhe_proof_check, FheBallotView};
use super::quadratic::{absorb_duplicate_row, duplicate_row, roll_row};
use super::smith_weber::blinding_statement;
use super::{
    aborted, ballot_entries, biguint_key, classical_proof_check, context, count_votes, dedup, roll_match,
    ClassicalBallot, OpCounters, TallyResult, BLIND_BALLOTS, BLIND_ROLL, DECRYPT_VOTES, MIX_BALLOTS, MIX_ROLL,
    PET_DUPLICATES, PET_ROLL_MATCH,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub ok: bool,
    pub failures: Vec<String>,
    /// The tally recomputed from evidence, when the walk got that far.
    pub recomputed: Option<TallyResult>,
}

type Check<T> = std::result::Result<T, String>;

struct Cursor<'a> {
    entries: &'a [BoardEntry],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self, kind: EntryKind, what: &str) -> Check<(u64, Payload)> {
        let e = self
            .entries
            .get(self.pos)
            .ok_or_else(|| format!("transcript ends before {what}"))?;
        self.pos += 1;
        if e.kind != kind {
            return Err(format!("entry {}: expected {what} ({kind}), found {}", e.index, e.kind));
        }
        let payload = Payload::from_bytes(&e.payload).map_err(|err| format!("entry {}: {err}", e.index))?;
        Ok((e.index, payload))
    }
}

fn unexpected(index: u64, what: &str, p: &Payload) -> String {
    format!("entry {index}: expected {what}, found {}", p.type_name())
}

struct Auditor<'a> {
    params: ElectionParams,
    eid: Vec<u8>,
    cursor: Cursor<'a>,
    failures: Vec<String>,
    counters: OpCounters,
    /// Plaintexts seen per decrypted ciphertext digest.
    opened: BTreeMap<Digest, Vec<u8>>,
    hash_keys: BTreeSet<u32>,
}

impl Auditor<'_> {
    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }

    fn ctx(&self, label: &str) -> ProofContext {
        context(&self.eid, label)
    }

    fn stage(&mut self, stage: Stage, input: usize, survivors: &[u32]) -> Check<()> {
        let (index, p) = self.cursor.next(EntryKind::Result, "stage report")?;
        let Payload::Stage(r) = p else {
            return Err(unexpected(index, "stage report", &p));
        };
        if r.stage != stage {
            return Err(format!("entry {index}: expected {stage:?} report, found {:?}", r.stage));
        }
        if r.input != input || r.survivors != survivors {
            self.fail(format!(
                "entry {index}: {stage:?} report ({} of {}) disagrees with evidence ({} of {input})",
                r.survivors.len(),
                r.input,
                survivors.len()
            ));
        }
        Ok(())
    }

    fn mix<T: Mixable>(
        &mut self,
        list: ListKind,
        rows: Vec<Vec<T>>,
        width: usize,
        label: &str,
        key: &crate::elgamal::PublicKey,
        extract: fn(Payload) -> Result<(ListKind, MixBatch<T>), Payload>,
    ) -> Check<Vec<Vec<T>>> {
        let (index, p) = self.cursor.next(EntryKind::Mix, "mix")?;
        let (l, batch) = extract(p).map_err(|p| unexpected(index, "mix", &p))?;
        if l != list {
            return Err(format!("entry {index}: expected {list:?} mix, found {l:?}"));
        }
        if batch.width != width || batch.input != rows {
            return Err(format!("entry {index}: mix input is not the previous stage's output"));
        }
        if batch.stages.len() != self.params.mix_servers {
            self.fail(format!(
                "entry {index}: {} mix stages, expected {}",
                batch.stages.len(),
                self.params.mix_servers
            ));
        }
        if !verify_mix(
            &self.params.group,
            key,
            &batch,
            self.params.shadow_rounds,
            &self.ctx(label),
        ) {
            self.fail(format!("entry {index}: mix proof fails"));
        }
        self.counters.mix_count += 1;
        Ok(batch.output().to_vec())
    }

    fn result(&mut self, expected: TallyResult) -> Check<TallyResult> {
        let (index, p) = self.cursor.next(EntryKind::Result, "result")?;
        let Payload::Result(posted) = p else {
            return Err(unexpected(index, "result", &p));
        };
        if !posted.matches(&expected) {
            self.fail(format!(
                "entry {index}: posted result disagrees with the recomputed tally"
            ));
        }
        if let Some(e) = self.cursor.entries.get(self.cursor.pos) {
            self.fail(format!("entry {}: trailing {} after the result", e.index, e.kind));
        }
        Ok(expected)
    }

    // PET backend

    fn pet_row(&mut self, stage: Stage, left: usize) -> Check<(u64, PetRow)> {
        let (index, p) = self.cursor.next(EntryKind::Pet, "PET row")?;
        let Payload::PetRow(row) = p else {
            return Err(unexpected(index, "PET row", &p));
        };
        if row.stage != stage || row.left as usize != left {
            return Err(format!("entry {index}: PET row out of sequence"));
        }
        Ok((index, row))
    }

    fn check_pet(
        &mut self,
        key: &ThresholdKey,
        l: &Ciphertext,
        r: &Ciphertext,
        ev: &crate::pet::PetEvidence,
        label: &str,
    ) -> bool {
        self.counters.pet_count += 1;
        let t = PetTranscript {
            left: l.clone(),
            right: r.clone(),
            evidence: ev.clone(),
        };
        verify_pet(&self.params.group, key, &t, &self.ctx(label))
    }

    fn decrypt_votes(&mut self, key: &ThresholdKey, cts: &[&Ciphertext]) -> Check<Vec<BigUint>> {
        let (index, p) = self.cursor.next(EntryKind::Decryption, "vote decryption")?;
        let Payload::VoteDecryption { openings } = p else {
            return Err(unexpected(index, "vote decryption", &p));
        };
        if openings.len() != cts.len() {
            return Err(format!(
                "entry {index}: {} openings for {} votes",
                openings.len(),
                cts.len()
            ));
        }
        let ctx = self.ctx(DECRYPT_VOTES);
        for (k, (o, ct)) in openings.iter().zip(cts).enumerate() {
            self.counters.decrypt_count += 1;
            if verify_and_combine(&self.params.group, key, ct, &o.shares, &ctx).as_ref() != Some(&o.plaintext) {
                self.fail(format!("entry {index}: opening {k} does not verify"));
            }
        }
        Ok(openings.into_iter().map(|o| o.plaintext).collect())
    }

    fn classical_result(
        &mut self,
        ballots: usize,
        sizes: [usize; 4],
        votes: &[BigUint],
        slate: &[BigUint],
    ) -> TallyResult {
        let (counts, spoiled) = count_votes(votes, slate);
        let [n1, n2, n3, n4] = sizes;
        TallyResult {
            backend: self.params.backend,
            candidates: self.params.candidates.clone(),
            counts,
            spoiled,
            proof_rejected: (ballots - n1) as u64,
            ineligible_removed: (n1 - n2) as u64,
            duplicates_removed: (n2 - n3) as u64,
            invalid_credential_removed: (n3 - n4) as u64,
            counters: self.counters,
        }
    }

    fn quadratic(
        &mut self,
        key: &ThresholdKey,
        ballots: &[(u64, Option<Payload>)],
        roll: Vec<Ciphertext>,
    ) -> Check<TallyResult> {
        let group = self.params.group.clone();
        let slate = self.params.encodings.clone();
        let canonical = self.params.canonical;
        let (s1, valid) = classical_proof_check(&group, &key.public, &slate, &self.eid, ballots);
        self.stage(Stage::ProofCheck, ballots.len(), &s1)?;

        let n1 = valid.len();
        let mut marked = vec![false; n1];
        let mut class: Vec<usize> = (0..n1).collect();
        for i in 0..n1 {
            let (index, row) = self.pet_row(Stage::Duplicates, i)?;
            let right = duplicate_row(i, n1, &marked, canonical);
            if super::to_u32(right.iter().copied()) != row.right || row.evidence.len() != right.len() {
                return Err(format!("entry {index}: PET row tests the wrong pairs"));
            }
            for (&j, ev) in right.iter().zip(&row.evidence) {
                if !self.check_pet(key, &valid[i].credential, &valid[j].credential, ev, PET_DUPLICATES) {
                    self.fail(format!("entry {index}: PET ({i}, {j}) does not verify"));
                }
            }
            let verdicts: Vec<bool> = row.evidence.iter().map(|e| e.verdict).collect();
            absorb_duplicate_row(i, &right, &verdicts, &mut marked, &mut class);
        }
        let s2 = dedup(&class, self.params.duplicate_policy);
        self.stage(Stage::Duplicates, n1, &s2)?;

        let rows = s2
            .iter()
            .map(|&p| vec![valid[p as usize].vote.clone(), valid[p as usize].credential.clone()])
            .collect();
        let mixed = self.mix(ListKind::Ballots, rows, 2, MIX_BALLOTS, &key.public, classical_mix)?;
        let roll_rows = roll.into_iter().map(|c| vec![c]).collect();
        let mixed_roll = self.mix(ListKind::Roll, roll_rows, 1, MIX_ROLL, &key.public, classical_mix)?;

        let mut consumed = vec![false; mixed_roll.len()];
        let mut s4 = Vec::new();
        for (i, ballot) in mixed.iter().enumerate() {
            let (index, row) = self.pet_row(Stage::RollMatch, i)?;
            let mut k = 0;
            let mut bad = Vec::new();
            let walk = roll_row(mixed_roll.len(), &mut consumed, canonical, |j| {
                let ev = row.evidence.get(k).ok_or_else(|| aborted(index, "PET row is short"))?;
                k += 1;
                if !self.check_pet(key, &ballot[1], &mixed_roll[j][0], ev, PET_ROLL_MATCH) {
                    bad.push(j);
                }
                Ok((ev.verdict, ()))
            });
            let (right, _, matched) = walk.map_err(|e| e.to_string())?;
            if super::to_u32(right) != row.right || k != row.evidence.len() {
                return Err(format!("entry {index}: PET row tests the wrong pairs"));
            }
            for j in bad {
                self.fail(format!("entry {index}: PET ({i}, {j}) does not verify"));
            }
            if matched {
                s4.push(i as u32);
            }
        }
        self.stage(Stage::RollMatch, mixed.len(), &s4)?;

        let cts: Vec<&Ciphertext> = s4.iter().map(|&i| &mixed[i as usize][0]).collect();
        let votes = self.decrypt_votes(key, &cts)?;
        let expected = self.classical_result(ballots.len(), [n1, n1, s2.len(), s4.len()], &votes, &slate);
        self.result(expected)
    }

    // blinded-exponent backend

    fn blinding(
        &mut self,
        key: &ThresholdKey,
        commitments: &[BlindingCommitment],
        list: ListKind,
        bases: &[&Ciphertext],
        label: &str,
    ) -> Check<Vec<Vec<u8>>> {
        let (index, p) = self.cursor.next(EntryKind::HashPost, "blinding batch")?;
        let Payload::Blinding(batch) = p else {
            return Err(unexpected(index, "blinding batch", &p));
        };
        if batch.list != list || batch.items.len() != bases.len() {
            return Err(format!(
                "entry {index}: blinding batch does not cover the {list:?} list"
            ));
        }
        let ctx = self.ctx(label);
        for (k, (item, base)) in batch.items.iter().zip(bases).enumerate() {
            self.counters.hash_eval_count += 1;
            self.counters.decrypt_count += 1;
            if !self.check_blinding(key, commitments, item, base, &ctx) {
                self.fail(format!("entry {index}: blinded value {k} does not verify"));
            }
        }
        Ok(batch.items.iter().map(|i| biguint_key(&i.value)).collect())
    }

    fn check_blinding(
        &self,
        key: &ThresholdKey,
        commitments: &[BlindingCommitment],
        item: &BlindedCredential,
        base: &Ciphertext,
        ctx: &ProofContext,
    ) -> bool {
        let group = &self.params.group;
        if item.contributions.len() != commitments.len() {
            return false;
        }
        let mut product = Ciphertext::trivial(BigUint::one());
        for (c, com) in item.contributions.iter().zip(commitments) {
            if c.index != com.index || !c.power.is_valid(group) {
                return false;
            }
            let (bases, powers) = blinding_statement(group, base, &c.power, &com.value);
            if !nizk::verify_exponent_consistency(group, &bases, &powers, &c.proof, ctx) {
                return false;
            }
            product = product.mul(group, &c.power);
        }
        verify_and_combine(group, key, &product, &item.shares, ctx).as_ref() == Some(&item.value)
    }

    fn smith_weber(
        &mut self,
        key: &ThresholdKey,
        ballots: &[(u64, Option<Payload>)],
        roll: Vec<Ciphertext>,
    ) -> Check<TallyResult> {
        let group = self.params.group.clone();
        let slate = self.params.encodings.clone();
        let (s1, valid) = classical_proof_check(&group, &key.public, &slate, &self.eid, ballots);
        self.stage(Stage::ProofCheck, ballots.len(), &s1)?;

        let (index, p) = self.cursor.next(EntryKind::Param, "blinding key")?;
        let Payload::BlindingKey { commitments } = p else {
            return Err(unexpected(index, "blinding key", &p));
        };
        let distinct: BTreeSet<u32> = commitments.iter().map(|c| c.index).collect();
        if distinct.len() != commitments.len()
            || distinct.len() < key.threshold
            || commitments
                .iter()
                .any(|c| key.commitment(c.index).is_none() || !group.is_element(&c.value))
            || commitments
                .iter()
                .fold(BigUint::one(), |acc, c| group.mul(&acc, &c.value))
                .is_one()
        {
            self.fail(format!("entry {index}: malformed blinding key"));
        }
        let bases: Vec<&Ciphertext> = valid.iter().map(|b: &ClassicalBallot| &b.credential).collect();
        let ballot_values = self.blinding(key, &commitments, ListKind::Ballots, &bases, BLIND_BALLOTS)?;
        let roll_refs: Vec<&Ciphertext> = roll.iter().collect();
        let roll_values = self.blinding(key, &commitments, ListKind::Roll, &roll_refs, BLIND_ROLL)?;

        let n1 = valid.len();
        let s2 = dedup(&ballot_values, self.params.duplicate_policy);
        self.stage(Stage::Duplicates, n1, &s2)?;
        let kept: Vec<Vec<u8>> = s2.iter().map(|&p| ballot_values[p as usize].clone()).collect();
        let s3: Vec<u32> = roll_match(&kept, &roll_values)
            .into_iter()
            .map(|k| s2[k as usize])
            .collect();
        self.stage(Stage::RollMatch, n1, &s3)?;

        let rows = s3
            .iter()
            .map(|&p| vec![valid[p as usize].vote.clone(), valid[p as usize].credential.clone()])
            .collect();
        let mixed = self.mix(ListKind::Ballots, rows, 2, MIX_BALLOTS, &key.public, classical_mix)?;
        let cts: Vec<&Ciphertext> = mixed.iter().map(|r| &r[0]).collect();
        let votes = self.decrypt_votes(key, &cts)?;
        let expected = self.classical_result(ballots.len(), [n1, n1, s2.len(), s3.len()], &votes, &slate);
        self.result(expected)
    }

    // keyed-hash backend

    /// Checks a decryption record for `ct` and returns its plaintext.
    fn oracle_decrypt(&mut self, pk: &FhePublicKey, rec: &OracleRecord, ct: &FheCiphertext, at: u64) -> Check<Vec<u8>> {
        let OracleRecord::Decrypt {
            ciphertext, plaintext, ..
        } = rec
        else {
            return Err(format!("entry {at}: expected a decryption record"));
        };
        self.counters.decrypt_count += 1;
        if *ciphertext != ct.digest() {
            self.fail(format!("entry {at}: decryption record is for another ciphertext"));
        } else if !verify_record(pk, rec) {
            self.fail(format!("entry {at}: decryption record does not verify"));
        }
        match self.opened.get(ciphertext) {
            Some(prev) if prev != plaintext => {
                self.fail(format!("entry {at}: inconsistent decryptions of one ciphertext"))
            }
            _ => {
                self.opened.insert(*ciphertext, plaintext.clone());
            }
        }
        Ok(plaintext.clone())
    }

    fn hash_key(&mut self) -> Check<u32> {
        let (index, p) = self.cursor.next(EntryKind::Param, "hash key")?;
        let Payload::HashKey { key } = p else {
            return Err(unexpected(index, "hash key", &p));
        };
        if key.encrypted.tag != PlaintextTag::Key || !self.hash_keys.insert(key.id) {
            self.fail(format!("entry {index}: hash key is not fresh"));
        }
        Ok(key.id)
    }

    fn keyed_hash(
        &mut self,
        pk: &FhePublicKey,
        stage: Stage,
        list: ListKind,
        key_id: u32,
        inputs: &[&FheCiphertext],
    ) -> Check<Vec<Vec<u8>>> {
        let (index, p) = self.cursor.next(EntryKind::HashPost, "keyed-hash batch")?;
        let Payload::KeyedHash(batch) = p else {
            return Err(unexpected(index, "keyed-hash batch", &p));
        };
        if batch.stage != stage || batch.list != list || batch.key_id != key_id || batch.items.len() != inputs.len() {
            return Err(format!("entry {index}: keyed-hash batch out of sequence"));
        }
        let mut digests = Vec::with_capacity(inputs.len());
        for (k, (item, input)) in batch.items.iter().zip(inputs).enumerate() {
            self.counters.hash_eval_count += 1;
            if !keyed_hash_linked(pk, item, input, key_id) {
                self.fail(format!("entry {index}: evaluation {k} does not verify"));
            }
            digests.push(self.oracle_decrypt(pk, &item.decrypt, &item.output, index)?);
        }
        Ok(digests)
    }

    fn eligibility(&mut self, pk: &FhePublicKey, valid: &[FheBallotView]) -> Check<Vec<u32>> {
        let (index, p) = self.cursor.next(EntryKind::HashPost, "eligibility batch")?;
        let Payload::Eligibility { items } = p else {
            return Err(unexpected(index, "eligibility batch", &p));
        };
        if items.len() != valid.len() {
            return Err(format!("entry {index}: eligibility batch does not cover the ballots"));
        }
        let mut survivors = Vec::new();
        for (k, (item, b)) in items.iter().zip(valid).enumerate() {
            let (Some(pre), Some(output), Some(eval), Some(decrypt)) =
                (&b.preimage, &item.output, &item.eval, &item.decrypt)
            else {
                if item.output.is_some() || item.eval.is_some() || item.decrypt.is_some() {
                    self.fail(format!("entry {index}: eligibility item {k} is malformed"));
                }
                continue;
            };
            let linked = matches!(eval, OracleRecord::EvalPreimageEq { preimage, credential, output: out, .. }
                if *preimage == pre.digest() && *credential == b.credential.digest() && *out == output.digest())
                && output.tag == PlaintextTag::Boolean
                && verify_record(pk, eval);
            if !linked {
                self.fail(format!("entry {index}: eligibility evaluation {k} does not verify"));
            }
            if self.oracle_decrypt(pk, decrypt, output, index)? == [1] {
                survivors.push(k as u32);
            }
        }
        Ok(survivors)
    }

    fn linear(
        &mut self,
        pk: &FhePublicKey,
        ballots: &[(u64, Option<Payload>)],
        roll: Vec<FheCiphertext>,
    ) -> Check<TallyResult> {
        let (s1, valid) = fhe_proof_check(pk, &self.eid, ballots);
        self.stage(Stage::ProofCheck, ballots.len(), &s1)?;
        let n1 = valid.len();

        let list: Vec<usize> = if self.params.eligibility {
            let survivors = self.eligibility(pk, &valid)?;
            self.stage(Stage::Eligibility, n1, &survivors)?;
            survivors.into_iter().map(|p| p as usize).collect()
        } else {
            (0..n1).collect()
        };

        let k1 = self.hash_key()?;
        let creds: Vec<&FheCiphertext> = list.iter().map(|&p| &valid[p].credential).collect();
        let digests = self.keyed_hash(pk, Stage::Duplicates, ListKind::Ballots, k1, &creds)?;
        let s2 = dedup(&digests, self.params.duplicate_policy);
        self.stage(Stage::Duplicates, list.len(), &s2)?;

        let rows = s2
            .iter()
            .map(|&p| {
                let b = &valid[list[p as usize]];
                vec![b.vote.clone(), b.credential.clone()]
            })
            .collect();
        let mixed = self.mix(ListKind::Ballots, rows, 2, MIX_BALLOTS, &pk.key, fhe_mix)?;
        let roll_rows = roll.into_iter().map(|c| vec![c]).collect();
        let mixed_roll = self.mix(ListKind::Roll, roll_rows, 1, MIX_ROLL, &pk.key, fhe_mix)?;

        let k2 = self.hash_key()?;
        let creds: Vec<&FheCiphertext> = mixed.iter().map(|r| &r[1]).collect();
        let ballot_digests = self.keyed_hash(pk, Stage::RollMatch, ListKind::Ballots, k2, &creds)?;
        let creds: Vec<&FheCiphertext> = mixed_roll.iter().map(|r| &r[0]).collect();
        let roll_digests = self.keyed_hash(pk, Stage::RollMatch, ListKind::Roll, k2, &creds)?;
        let s4 = roll_match(&ballot_digests, &roll_digests);
        self.stage(Stage::RollMatch, mixed.len(), &s4)?;

        let (index, p) = self.cursor.next(EntryKind::Decryption, "vote decryption")?;
        let Payload::FheVoteDecryption { records } = p else {
            return Err(unexpected(index, "vote decryption", &p));
        };
        if records.len() != s4.len() {
            return Err(format!(
                "entry {index}: {} openings for {} votes",
                records.len(),
                s4.len()
            ));
        }
        let mut votes = Vec::with_capacity(s4.len());
        for (rec, &i) in records.iter().zip(&s4) {
            let ct = &mixed[i as usize][0];
            if ct.tag != PlaintextTag::Vote {
                self.fail(format!("entry {index}: opened ciphertext is not a vote"));
            }
            votes.push(self.oracle_decrypt(pk, rec, ct, index)?);
        }
        let slate: Vec<Vec<u8>> = self.params.candidates.iter().map(|c| c.as_bytes().to_vec()).collect();
        let (counts, spoiled) = count_votes(&votes, &slate);
        let expected = TallyResult {
            backend: Backend::Linear,
            candidates: self.params.candidates.clone(),
            counts,
            spoiled,
            proof_rejected: (ballots.len() - n1) as u64,
            ineligible_removed: (n1 - list.len()) as u64,
            duplicates_removed: (list.len() - s2.len()) as u64,
            invalid_credential_removed: (s2.len() - s4.len()) as u64,
            counters: self.counters,
        };
        self.result(expected)
    }
}

fn keyed_hash_linked(pk: &FhePublicKey, item: &KeyedHashItem, input: &FheCiphertext, key_id: u32) -> bool {
    matches!(&item.eval, OracleRecord::EvalKeyedHash { key_id: k, input: i, output: o, .. }
        if *k == key_id && *i == input.digest() && *o == item.output.digest())
        && item.output.tag == PlaintextTag::HashDigest
        && verify_record(pk, &item.eval)
}

fn classical_mix(p: Payload) -> Result<(ListKind, MixBatch<Ciphertext>), Payload> {
    match p {
        Payload::Mix { list, batch } => Ok((list, batch)),
        other => Err(other),
    }
}

fn fhe_mix(p: Payload) -> Result<(ListKind, MixBatch<FheCiphertext>), Payload> {
    match p {
        Payload::FheMix { list, batch } => Ok((list, batch)),
        other => Err(other),
    }
}

enum Key {
    Classical(ThresholdKey),
    Fhe(FhePublicKey),
}

struct Setup {
    params: ElectionParams,
    key: Key,
    /// First entry of the tally phase.
    tally_start: usize,
}

fn setup(entries: &[BoardEntry], roster: &[AuthorityInfo], backend: Backend) -> Check<Setup> {
    let role = |e: &BoardEntry| roster.iter().find(|a| a.id == e.author).map(|a| a.role);
    let mut cursor = Cursor { entries, pos: 1 };
    let (index, p) = cursor.next(EntryKind::Param, "election parameters")?;
    let Payload::ElectionParams(params) = p else {
        return Err(unexpected(index, "election parameters", &p));
    };
    if role(&entries[1]) != Some(Role::Registrar) {
        return Err("election parameters not posted by a registrar".into());
    }
    if params.backend != backend {
        return Err(format!("transcript is for the {} backend", params.backend));
    }
    params.group.validate().map_err(|e| format!("entry 1: {e}"))?;
    if encode_candidates(&params.group, &params.candidates).ok().as_ref() != Some(&params.encodings) {
        return Err("entry 1: candidate encodings do not match the slate".into());
    }
    let (index, p) = cursor.next(EntryKind::Param, "tallier key")?;
    if role(&entries[2]) != Some(Role::Tallier) {
        return Err("key not posted by a tallier".into());
    }
    let key = match (p, backend) {
        (Payload::TallierKey { key }, b) if b.is_classical() => {
            if key.threshold != params.threshold || key.share_count() != params.talliers {
                return Err(format!("entry {index}: tallier key does not match the parameters"));
            }
            Key::Classical(key)
        }
        (Payload::OracleKey { key }, Backend::Linear) => {
            if key.params != params.group || key.threshold != params.threshold {
                return Err(format!("entry {index}: oracle key does not match the parameters"));
            }
            Key::Fhe(key)
        }
        (p, _) => return Err(unexpected(index, "tallier key", &p)),
    };
    let mut pos = 3;
    while pos < entries.len() && matches!(entries[pos].kind, EntryKind::Roll | EntryKind::Ballot) {
        pos += 1;
    }
    Ok(Setup {
        params,
        key,
        tally_start: pos,
    })
}

/// Audits `transcript` as a `backend` election without any secrets.
pub fn audit(transcript: &Transcript, backend: Backend) -> AuditReport {
    let mut report = AuditReport::default();
    let chain = verify_chain(transcript);
    if !chain.valid {
        report.failures.push(format!(
            "chain broken at entry {}: {}",
            chain.failed_at.unwrap_or_default(),
            chain.reason.unwrap_or_default()
        ));
        return report;
    }
    let entries = &transcript.entries;
    let roster = roster_of(entries).unwrap_or_default();
    let setup = match setup(entries, &roster, backend) {
        Ok(s) => s,
        Err(e) => {
            report.failures.push(e);
            return report;
        }
    };
    let registration = &entries[..setup.tally_start];
    let tally_phase = &entries[setup.tally_start..];
    for e in tally_phase {
        if roster.iter().find(|a| a.id == e.author).map(|a| a.role) != Some(Role::Tallier) {
            report
                .failures
                .push(format!("entry {}: tally evidence not posted by a tallier", e.index));
        }
    }

    let mut auditor = Auditor {
        eid: setup.params.election_id.as_bytes().to_vec(),
        params: setup.params,
        cursor: Cursor {
            entries: tally_phase,
            pos: 0,
        },
        failures: std::mem::take(&mut report.failures),
        counters: OpCounters::default(),
        opened: BTreeMap::new(),
        hash_keys: BTreeSet::new(),
    };
    let ballots = ballot_entries(registration);
    let walk = match &setup.key {
        Key::Classical(key) => super::classical_roll(registration)
            .map_err(|e| e.to_string())
            .and_then(|roll| match backend {
                Backend::Quadratic => auditor.quadratic(key, &ballots, roll),
                _ => auditor.smith_weber(key, &ballots, roll),
            }),
        Key::Fhe(pk) => super::linear::fhe_roll(registration)
            .map_err(|e| e.to_string())
            .and_then(|roll| auditor.linear(pk, &ballots, roll)),
    };
    match walk {
        Ok(result) => report.recomputed = Some(result),
        Err(e) => auditor.failures.push(e),
    }
    report.failures = auditor.failures;
    report.ok = report.failures.is_empty();
    report
}
