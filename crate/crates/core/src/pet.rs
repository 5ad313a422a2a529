//! Distributed plaintext equivalence test.
//!
//! The quotient Q = a ⊘ b encrypts m_a / m_b. Quorum talliers blind in turn:
//! tallier i raises the previous output to a secret non-zero z_i and proves
//! the same exponent was used on all three components. The final Q^{Π z_i}
//! is threshold-decrypted. The plaintext is the identity exactly when
//! m_a = m_b, and otherwise a random non-identity element.

use num_bigint::BigUint;
use num_traits::One;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::elgamal::Ciphertext;
use crate::encode::hex_uint;
use crate::error::Result;
use crate::group::GroupParams;
use crate::nizk::{self, Proof, ProofContext};
use crate::threshold::{self, DecryptionShare, Talliers, ThresholdKey};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindingContribution {
    pub index: u32,
    pub power: Ciphertext,
    pub proof: Proof,
}

/// Everything a PET publishes except its two inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetEvidence {
    pub contributions: Vec<BlindingContribution>,
    pub shares: Vec<DecryptionShare>,
    #[serde(with = "hex_uint")]
    pub plaintext: BigUint,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetTranscript {
    pub left: Ciphertext,
    pub right: Ciphertext,
    pub evidence: PetEvidence,
}

fn triple(ct: &Ciphertext) -> Vec<BigUint> {
    ct.components().into_iter().cloned().collect()
}

fn blind<R: RngCore + CryptoRng>(
    params: &GroupParams,
    talliers: &Talliers,
    base: &Ciphertext,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<(Ciphertext, Vec<BlindingContribution>)> {
    let mut current = base.clone();
    let mut contributions = Vec::with_capacity(talliers.key.threshold);
    for share in talliers.quorum() {
        let z = params.random_nonzero_scalar(rng);
        let power = current.pow(params, &z);
        let proof = nizk::prove_exponent_consistency(params, &triple(&current), &triple(&power), &z, ctx, rng)?;
        current = power.clone();
        contributions.push(BlindingContribution {
            index: share.index,
            power,
            proof,
        });
    }
    Ok((current, contributions))
}

pub fn pet<R: RngCore + CryptoRng>(
    params: &GroupParams,
    talliers: &Talliers,
    left: &Ciphertext,
    right: &Ciphertext,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<PetTranscript> {
    let quotient = left.div(params, right);
    let (blinded, contributions) = blind(params, talliers, &quotient, ctx, rng)?;
    let (plaintext, shares) = talliers.decrypt(params, &blinded, ctx, rng)?;
    let verdict = plaintext.is_one();
    Ok(PetTranscript {
        left: left.clone(),
        right: right.clone(),
        evidence: PetEvidence {
            contributions,
            shares,
            plaintext,
            verdict,
        },
    })
}

/// Public verification: blinding proofs, distinct quorum, share proofs,
/// recombined plaintext, and verdict.
pub fn verify_pet(params: &GroupParams, key: &ThresholdKey, transcript: &PetTranscript, ctx: &ProofContext) -> bool {
    let ev = &transcript.evidence;
    let quotient = transcript.left.div(params, &transcript.right);
    let identity = Ciphertext::trivial(BigUint::one());
    let mut indices: Vec<u32> = ev.contributions.iter().map(|c| c.index).collect();
    indices.sort_unstable();
    indices.dedup();
    if indices.len() != ev.contributions.len()
        || indices.len() < key.threshold
        || indices.iter().any(|&i| key.commitment(i).is_none())
    {
        return false;
    }
    let mut current = quotient;
    for c in &ev.contributions {
        // a zero exponent would force a false match
        if c.power == identity && current != identity {
            return false;
        }
        if !nizk::verify_exponent_consistency(params, &triple(&current), &triple(&c.power), &c.proof, ctx) {
            return false;
        }
        current = c.power.clone();
    }
    match threshold::verify_and_combine(params, key, &current, &ev.shares, ctx) {
        Some(m) => m == ev.plaintext && ev.verdict == m.is_one(),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::KeyPair;
    use crate::group::derive_rng;
    use crate::group::tests::tiny;

    fn ctx() -> ProofContext {
        ProofContext::new(b"e".to_vec(), b"pet".to_vec())
    }

    #[test]
    fn equal_unequal_and_reencrypted() {
        let g = GroupParams::generate(64, b"pet").unwrap();
        let mut rng = derive_rng(1, "pet");
        let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).unwrap();
        let m = g.random_element(&mut rng);
        let m2 = g.random_element(&mut rng);
        let (a, _) = full.public.encrypt_random(&g, &m, &mut rng).unwrap();
        let (b, _) = full.public.encrypt_random(&g, &m, &mut rng).unwrap();
        let (c, _) = full.public.encrypt_random(&g, &m2, &mut rng).unwrap();
        let r = g.random_scalar(&mut rng);
        let a2 = full.public.reencrypt(&g, &a, &r);

        let t = pet(&g, &talliers, &a, &b, &ctx(), &mut rng).unwrap();
        assert!(t.evidence.verdict && verify_pet(&g, &talliers.key, &t, &ctx()));
        let t = pet(&g, &talliers, &a, &c, &ctx(), &mut rng).unwrap();
        assert!(!t.evidence.verdict && verify_pet(&g, &talliers.key, &t, &ctx()));
        let t = pet(&g, &talliers, &a, &a2, &ctx(), &mut rng).unwrap();
        assert!(t.evidence.verdict && verify_pet(&g, &talliers.key, &t, &ctx()));
    }

    #[test]
    fn forged_verdict_and_share_rejected() {
        let g = GroupParams::generate(64, b"pet").unwrap();
        let mut rng = derive_rng(2, "pet");
        let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).unwrap();
        let (a, _) = full.public.encrypt_random(&g, &g.g1, &mut rng).unwrap();
        let (b, _) = full.public.encrypt_random(&g, &g.g2, &mut rng).unwrap();
        let t = pet(&g, &talliers, &a, &b, &ctx(), &mut rng).unwrap();

        let mut forged = t.clone();
        forged.evidence.verdict = true;
        assert!(!verify_pet(&g, &talliers.key, &forged, &ctx()));

        let mut forged = t.clone();
        forged.evidence.shares[0].d = g.mul(&forged.evidence.shares[0].d, &g.g1);
        assert!(!verify_pet(&g, &talliers.key, &forged, &ctx()));

        let mut forged = t.clone();
        forged.evidence.contributions.pop();
        assert!(!verify_pet(&g, &talliers.key, &forged, &ctx()));

        // zero-exponent blinding that would turn the verdict into a match
        let mut forged = t;
        for c in &mut forged.evidence.contributions {
            c.power = Ciphertext::trivial(BigUint::one());
        }
        forged.evidence.plaintext = BigUint::one();
        forged.evidence.verdict = true;
        assert!(!verify_pet(&g, &talliers.key, &forged, &ctx()));
    }

    #[test]
    fn exhaustive_tiny_group() {
        let g = tiny();
        let mut rng = derive_rng(3, "tiny-pet");
        let kp = KeyPair::from_secrets(&g, 3u32.into(), 5u32.into()).unwrap();
        let (key, shares) = threshold::deal(&g, &kp, 3, 3, &mut rng).unwrap();
        let talliers = Talliers { key, shares };
        let elements: Vec<BigUint> = (1..23u32).map(BigUint::from).filter(|x| g.is_element(x)).collect();
        assert_eq!(elements.len(), 11);
        for _ in 0..8 {
            for ma in &elements {
                for mb in &elements {
                    let (a, _) = kp.public.encrypt_random(&g, ma, &mut rng).unwrap();
                    let (b, _) = kp.public.encrypt_random(&g, mb, &mut rng).unwrap();
                    let t = pet(&g, &talliers, &a, &b, &ctx(), &mut rng).unwrap();
                    assert_eq!(t.evidence.verdict, ma == mb, "{ma} vs {mb}");
                    assert!(verify_pet(&g, &talliers.key, &t, &ctx()));
                }
            }
        }
    }
}
