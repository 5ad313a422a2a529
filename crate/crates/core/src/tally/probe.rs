//! Credential probe against published blinded values: the coercer casts
//! σ? and (σ?)^w, then looks for a pair (b, b^w) among the published values
//! and checks whether b also appears among the blinded roll.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::board::EntryKind;
use crate::error::Result;
use crate::group::GroupParams;
use crate::payload::{ListKind, Payload};
use crate::protocol::{Backend, Credential, Election};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    /// Pair found and b matched the roll: σ? is real.
    Registered,
    /// Pair found, no roll match: σ? is fake.
    NotRegistered,
    /// No (b, b^w) relation among the published values.
    Inconclusive,
    /// The backend publishes no per-credential values.
    NotApplicable,
}

impl ProbeVerdict {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Self::Registered => Some(true),
            Self::NotRegistered => Some(false),
            _ => None,
        }
    }
}

/// (σ?)^w for either credential kind; FHE credentials are read as integers
/// modulo p.
pub fn raise_credential(params: &GroupParams, credential: &Credential, w: &BigUint) -> Credential {
    match credential {
        Credential::Classical(s) => Credential::Classical(params.pow(s, w)),
        Credential::Fhe { sigma, .. } => {
            let x = BigUint::from_bytes_be(sigma) % &params.p;
            Credential::Fhe {
                sigma: params.pow(&x, w).to_bytes_be(),
                preimage: None,
            }
        }
    }
}

/// Positions `(i, j)`, `i != j`, with `values[j] = values[i]^w mod p`.
fn find_pair(params: &GroupParams, values: &[BigUint], w: &BigUint) -> Option<usize> {
    let set: BTreeSet<&BigUint> = values.iter().collect();
    values.iter().position(|b| {
        let bw = params.pow(b, w);
        &bw != b && set.contains(&bw)
    })
}

fn published(election: &Election) -> Result<(Vec<Vec<BigUint>>, Vec<BigUint>)> {
    let p = &election.params.p;
    let mut ballot_lists = Vec::new();
    let mut roll = Vec::new();
    for e in election
        .board
        .entries()
        .iter()
        .filter(|e| e.kind == EntryKind::HashPost)
    {
        let (list, values) = match Payload::at(&e.payload, e.index)? {
            Payload::Blinding(b) => (b.list, b.items.into_iter().map(|i| i.value).collect()),
            Payload::KeyedHash(k) => (
                k.list,
                k.items
                    .iter()
                    .filter_map(|i| match &i.decrypt {
                        crate::fhe::OracleRecord::Decrypt { plaintext, .. } => {
                            Some(BigUint::from_bytes_be(plaintext) % p)
                        }
                        _ => None,
                    })
                    .collect(),
            ),
            _ => continue,
        };
        match list {
            ListKind::Ballots => ballot_lists.push(values),
            ListKind::Roll => roll.extend(values),
        }
    }
    Ok((ballot_lists, roll))
}

/// Casts the two probe ballots, runs the tally, and scans the published
/// per-credential values.
pub fn exponent_probe_attack(election: &mut Election, candidate: &Credential, w: &BigUint) -> Result<ProbeVerdict> {
    if election.backend() == Backend::Quadratic {
        return Ok(ProbeVerdict::NotApplicable);
    }
    let raised = raise_credential(&election.params, candidate, w);
    election.cast_vote(candidate, 0)?;
    election.cast_vote(&raised, 0)?;
    super::tally(election)?;

    let (ballot_lists, roll) = published(election)?;
    for values in &ballot_lists {
        if let Some(i) = find_pair(&election.params, values, w) {
            return Ok(if roll.contains(&values[i]) {
                ProbeVerdict::Registered
            } else {
                ProbeVerdict::NotRegistered
            });
        }
    }
    Ok(ProbeVerdict::Inconclusive)
}
