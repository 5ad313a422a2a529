//! Transcript mutations for exercising the auditor. Each class perturbs one
//! checked quantity, then re-chains and re-signs the affected suffix with
//! the authority keys so that only the semantic checks can catch it.
//! Reordering is the exception and leaves the chain broken.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::board::{Author, AuthorityKey, BoardEntry, EntryKind, Transcript, ANONYMOUS};
use crate::elgamal::Ciphertext;
use crate::error::{Error, Result};
use crate::fhe::OracleRecord;
use crate::group::GroupParams;
use crate::payload::Payload;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationClass {
    FlippedCiphertext,
    ForgedPetVerdict,
    BrokenMixPair,
    DroppedBallot,
    AlteredDigest,
    WrongDecryptionShare,
    ReorderedChain,
    TamperedResult,
}

impl MutationClass {
    pub const ALL: [Self; 8] = [
        Self::FlippedCiphertext,
        Self::ForgedPetVerdict,
        Self::BrokenMixPair,
        Self::DroppedBallot,
        Self::AlteredDigest,
        Self::WrongDecryptionShare,
        Self::ReorderedChain,
        Self::TamperedResult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FlippedCiphertext => "flipped_ciphertext",
            Self::ForgedPetVerdict => "forged_pet_verdict",
            Self::BrokenMixPair => "broken_mix_pair",
            Self::DroppedBallot => "dropped_ballot",
            Self::AlteredDigest => "altered_digest",
            Self::WrongDecryptionShare => "wrong_decryption_share",
            Self::ReorderedChain => "reordered_chain",
            Self::TamperedResult => "tampered_result",
        }
    }
}

impl fmt::Display for MutationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mutation class {s:?}")))
    }
}

/// Rebuilds entries from `from` onward with fresh indices, back-links and
/// signatures.
pub fn rechain(transcript: &mut Transcript, from: usize, keys: &[AuthorityKey]) -> Result<()> {
    for k in from..transcript.entries.len() {
        let prev = if k == 0 {
            [0u8; 32]
        } else {
            transcript.entries[k - 1].entry_hash
        };
        let e = &transcript.entries[k];
        let author = if e.author == ANONYMOUS {
            Author::Anonymous
        } else {
            Author::Authority(
                keys.iter()
                    .find(|a| a.id == e.author)
                    .ok_or_else(|| Error::UnknownAuthor(e.author.clone()))?,
            )
        };
        let rebuilt = BoardEntry::build(k as u64, prev, e.kind, e.payload.clone(), author);
        transcript.entries[k] = rebuilt;
    }
    Ok(())
}

fn group_of(transcript: &Transcript) -> Option<GroupParams> {
    transcript
        .entries
        .iter()
        .find_map(|e| match Payload::from_bytes(&e.payload).ok()? {
            Payload::ElectionParams(p) => Some(p.group),
            _ => None,
        })
}

fn nudge(group: &GroupParams, ct: &mut Ciphertext) {
    ct.w = group.mul(&ct.w, &group.g1);
}

fn flip_byte(bytes: &mut [u8]) {
    if let Some(b) = bytes.first_mut() {
        *b ^= 1;
    }
}

/// Applies `edit` to the payload of a random entry for which it returns
/// true, then re-chains from that entry.
fn edit_payload<R: Rng>(
    transcript: &Transcript,
    keys: &[AuthorityKey],
    rng: &mut R,
    mut edit: impl FnMut(&mut Payload, &mut R) -> bool,
) -> Result<Option<Transcript>> {
    let mut candidates: Vec<usize> = (0..transcript.entries.len()).collect();
    candidates.shuffle(rng);
    for k in candidates {
        let Ok(mut payload) = Payload::from_bytes(&transcript.entries[k].payload) else {
            continue;
        };
        if edit(&mut payload, rng) {
            let mut out = transcript.clone();
            out.entries[k].payload = payload.to_bytes();
            rechain(&mut out, k, keys)?;
            return Ok(Some(out));
        }
    }
    Ok(None)
}

/// A mutated copy of `transcript`, or `None` when it has nothing the class
/// can target (e.g. no ballots to drop).
pub fn mutate<R: Rng>(
    transcript: &Transcript,
    class: MutationClass,
    keys: &[AuthorityKey],
    rng: &mut R,
) -> Result<Option<Transcript>> {
    let group = group_of(transcript).ok_or_else(|| Error::Config("transcript has no election parameters".into()))?;
    match class {
        MutationClass::FlippedCiphertext => edit_payload(transcript, keys, rng, |p, _| match p {
            Payload::Ballot { credential, .. } => {
                nudge(&group, credential);
                true
            }
            Payload::FheBallot { credential, .. } => {
                nudge(&group, &mut credential.body);
                true
            }
            _ => false,
        }),
        MutationClass::ForgedPetVerdict => {
            let has_pets = transcript.entries.iter().any(|e| e.kind == EntryKind::Pet);
            edit_payload(transcript, keys, rng, |p, rng| match p {
                Payload::PetRow(row) if !row.evidence.is_empty() => {
                    let k = rng.gen_range(0..row.evidence.len());
                    row.evidence[k].verdict ^= true;
                    true
                }
                Payload::Stage(report) if !has_pets => {
                    if report.survivors.is_empty() {
                        report.survivors.push(0);
                    } else {
                        let k = rng.gen_range(0..report.survivors.len());
                        report.survivors.remove(k);
                    }
                    true
                }
                _ => false,
            })
        }
        MutationClass::BrokenMixPair => edit_payload(transcript, keys, rng, |p, rng| {
            fn swap<T>(rows: &mut [Vec<T>], rng: &mut impl Rng) -> bool {
                if rows.len() < 2 || rows[0].len() < 2 {
                    return false;
                }
                let a = rng.gen_range(0..rows.len());
                let b = (a + rng.gen_range(1..rows.len())) % rows.len();
                let (x, y) = (a.min(b), a.max(b));
                let (lo, hi) = rows.split_at_mut(y);
                std::mem::swap(&mut lo[x][1], &mut hi[0][1]);
                true
            }
            match p {
                Payload::Mix { batch, .. } => batch.stages.last_mut().is_some_and(|s| swap(&mut s.output, rng)),
                Payload::FheMix { batch, .. } => batch.stages.last_mut().is_some_and(|s| swap(&mut s.output, rng)),
                _ => false,
            }
        }),
        MutationClass::DroppedBallot => {
            let ballots: Vec<usize> = transcript
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.kind == EntryKind::Ballot)
                .map(|(k, _)| k)
                .collect();
            let Some(&k) = ballots.choose(rng) else {
                return Ok(None);
            };
            let mut out = transcript.clone();
            out.entries.remove(k);
            rechain(&mut out, k, keys)?;
            Ok(Some(out))
        }
        MutationClass::AlteredDigest => edit_payload(transcript, keys, rng, |p, rng| match p {
            Payload::PetRow(row) if !row.evidence.is_empty() => {
                let k = rng.gen_range(0..row.evidence.len());
                let ev = &mut row.evidence[k];
                ev.plaintext = group.mul(&ev.plaintext, &group.g1);
                true
            }
            Payload::Blinding(batch) if !batch.items.is_empty() => {
                let k = rng.gen_range(0..batch.items.len());
                let item = &mut batch.items[k];
                item.value = group.mul(&item.value, &group.g1);
                true
            }
            Payload::KeyedHash(batch) if !batch.items.is_empty() => {
                let k = rng.gen_range(0..batch.items.len());
                match &mut batch.items[k].decrypt {
                    OracleRecord::Decrypt { plaintext, .. } => {
                        flip_byte(plaintext);
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        }),
        MutationClass::WrongDecryptionShare => edit_payload(transcript, keys, rng, |p, rng| match p {
            Payload::VoteDecryption { openings } if !openings.is_empty() => {
                let k = rng.gen_range(0..openings.len());
                let share = &mut openings[k].shares[0];
                share.d = group.mul(&share.d, &group.g1);
                true
            }
            Payload::FheVoteDecryption { records } if !records.is_empty() => {
                let k = rng.gen_range(0..records.len());
                match &mut records[k] {
                    OracleRecord::Decrypt { approvals, .. } if !approvals.is_empty() => {
                        flip_byte(&mut approvals[0].signature);
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        }),
        MutationClass::ReorderedChain => {
            if transcript.entries.len() < 3 {
                return Ok(None);
            }
            let k = rng.gen_range(1..transcript.entries.len() - 1);
            let mut out = transcript.clone();
            out.entries.swap(k, k + 1);
            Ok(Some(out))
        }
        MutationClass::TamperedResult => edit_payload(transcript, keys, rng, |p, rng| match p {
            Payload::Result(r) if !r.counts.is_empty() => {
                let k = rng.gen_range(0..r.counts.len());
                r.counts[k] += 1;
                true
            }
            _ => false,
        }),
    }
}
