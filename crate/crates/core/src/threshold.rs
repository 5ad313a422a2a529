//! Dealer-based (t, n) sharing of a two-generator ElGamal key and verifiable
//! distributed decryption.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::elgamal::{Ciphertext, KeyPair, PublicKey};
use crate::encode::hex_uint;
use crate::error::{Error, Result};
use crate::group::GroupParams;
use crate::nizk::{self, Proof, ProofContext};

/// A tallier's secret share: evaluations of the two sharing polynomials at
/// `index` (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyShare {
    pub index: u32,
    pub x1: BigUint,
    pub x2: BigUint,
}

impl KeyShare {
    pub fn commitment(&self, params: &GroupParams) -> BigUint {
        params.commit(&self.x1, &self.x2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareCommitment {
    pub index: u32,
    #[serde(with = "hex_uint")]
    pub h: BigUint,
}

/// Public half of the dealer's transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdKey {
    pub threshold: usize,
    pub public: PublicKey,
    pub commitments: Vec<ShareCommitment>,
}

impl ThresholdKey {
    pub fn share_count(&self) -> usize {
        self.commitments.len()
    }

    pub fn commitment(&self, index: u32) -> Option<&BigUint> {
        self.commitments.iter().find(|c| c.index == index).map(|c| &c.h)
    }
}

fn eval_poly(params: &GroupParams, coeffs: &[BigUint], x: u32) -> BigUint {
    let x = BigUint::from(x);
    coeffs.iter().rev().fold(BigUint::zero(), |acc, c| {
        params.scalar_add(&params.scalar_mul(&acc, &x), c)
    })
}

/// Splits `key` into `n` shares, any `t` of which reconstruct it.
pub fn deal<R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &KeyPair,
    t: usize,
    n: usize,
    rng: &mut R,
) -> Result<(ThresholdKey, Vec<KeyShare>)> {
    if t == 0 || t > n || BigUint::from(n) >= params.q {
        return Err(Error::Threshold { t, n });
    }
    let mut poly1 = vec![key.x1.clone()];
    let mut poly2 = vec![key.x2.clone()];
    for _ in 1..t {
        poly1.push(params.random_scalar(rng));
        poly2.push(params.random_scalar(rng));
    }
    let shares: Vec<KeyShare> = (1..=n as u32)
        .map(|i| KeyShare {
            index: i,
            x1: eval_poly(params, &poly1, i),
            x2: eval_poly(params, &poly2, i),
        })
        .collect();
    let commitments = shares
        .iter()
        .map(|s| ShareCommitment {
            index: s.index,
            h: s.commitment(params),
        })
        .collect();
    Ok((
        ThresholdKey {
            threshold: t,
            public: key.public.clone(),
            commitments,
        },
        shares,
    ))
}

/// Lagrange coefficient at zero for `index` over `indices`, mod q.
pub fn lagrange_at_zero(params: &GroupParams, indices: &[u32], index: u32) -> BigUint {
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for &j in indices.iter().filter(|&&j| j != index) {
        num = params.scalar_mul(&num, &BigUint::from(j));
        den = params.scalar_mul(&den, &params.scalar_sub(&BigUint::from(j), &BigUint::from(index)));
    }
    params.scalar_mul(&num, &params.scalar_inv(&den))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptionShare {
    pub index: u32,
    #[serde(with = "hex_uint")]
    pub d: BigUint,
    pub proof: Proof,
}

pub fn partial_decrypt<R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &ThresholdKey,
    share: &KeyShare,
    ct: &Ciphertext,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<DecryptionShare> {
    let commitment = key
        .commitment(share.index)
        .ok_or_else(|| Error::Proof(format!("no commitment for share {}", share.index)))?;
    if &share.commitment(params) != commitment {
        return Err(Error::Proof(format!(
            "share {} does not match its published commitment",
            share.index
        )));
    }
    let d = params.mul(&params.pow(&ct.u, &share.x1), &params.pow(&ct.v, &share.x2));
    let proof = nizk::prove_share_decryption(params, ct, commitment, &d, (&share.x1, &share.x2), ctx, rng)?;
    Ok(DecryptionShare {
        index: share.index,
        d,
        proof,
    })
}

pub fn verify_decryption_share(
    params: &GroupParams,
    key: &ThresholdKey,
    ct: &Ciphertext,
    share: &DecryptionShare,
    ctx: &ProofContext,
) -> bool {
    key.commitment(share.index)
        .is_some_and(|commitment| nizk::verify_share_decryption(params, ct, commitment, &share.d, &share.proof, ctx))
}

/// Interpolates the decryption factor from at least `t` distinct shares and
/// strips it from `ct`. Proofs are not checked here.
pub fn combine(
    params: &GroupParams,
    key: &ThresholdKey,
    ct: &Ciphertext,
    shares: &[DecryptionShare],
) -> Result<BigUint> {
    let mut indices: Vec<u32> = shares.iter().map(|s| s.index).collect();
    indices.sort_unstable();
    indices.dedup();
    if indices.len() != shares.len() || indices.len() < key.threshold {
        return Err(Error::InsufficientShares {
            needed: key.threshold,
            got: indices.len(),
        });
    }
    let mask = shares.iter().fold(BigUint::one(), |acc, s| {
        let lambda = lagrange_at_zero(params, &indices, s.index);
        params.mul(&acc, &params.pow(&s.d, &lambda))
    });
    Ok(params.div(&ct.w, &mask))
}

/// The simulated tallier collective: public key material plus every
/// tallier's secret share. Joint operations use the first `t` talliers.
#[derive(Clone, Debug)]
pub struct Talliers {
    pub key: ThresholdKey,
    pub shares: Vec<KeyShare>,
}

impl Talliers {
    pub fn setup<R: RngCore + CryptoRng>(
        params: &GroupParams,
        t: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<(Self, KeyPair)> {
        let full = KeyPair::generate(params, rng);
        let (key, shares) = deal(params, &full, t, n, rng)?;
        Ok((Self { key, shares }, full))
    }

    pub fn quorum(&self) -> &[KeyShare] {
        &self.shares[..self.key.threshold]
    }

    /// Quorum decryption with share proofs.
    pub fn decrypt<R: RngCore + CryptoRng>(
        &self,
        params: &GroupParams,
        ct: &Ciphertext,
        ctx: &ProofContext,
        rng: &mut R,
    ) -> Result<(BigUint, Vec<DecryptionShare>)> {
        let shares = self
            .quorum()
            .iter()
            .map(|s| partial_decrypt(params, &self.key, s, ct, ctx, rng))
            .collect::<Result<Vec<_>>>()?;
        let m = combine(params, &self.key, ct, &shares)?;
        Ok((m, shares))
    }
}

/// Verifies every share proof and recombines.
pub fn verify_and_combine(
    params: &GroupParams,
    key: &ThresholdKey,
    ct: &Ciphertext,
    shares: &[DecryptionShare],
    ctx: &ProofContext,
) -> Option<BigUint> {
    if !shares.iter().all(|s| verify_decryption_share(params, key, ct, s, ctx)) {
        return None;
    }
    combine(params, key, ct, shares).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::derive_rng;

    fn subsets(n: u32, t: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == t {
                out.push((0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect());
            }
        }
        out
    }

    #[test]
    fn every_t_subset_decrypts() {
        let g = GroupParams::generate(64, b"thr").unwrap();
        let mut rng = derive_rng(5, "thr");
        let (talliers, full) = Talliers::setup(&g, 3, 5, &mut rng).unwrap();
        let ctx = ProofContext::new(b"e".to_vec(), b"d".to_vec());
        for _ in 0..5 {
            let m = g.random_element(&mut rng);
            let (ct, _) = full.public.encrypt_random(&g, &m, &mut rng).unwrap();
            assert_eq!(full.decrypt(&g, &ct), m);
            for subset in subsets(5, 3) {
                let shares: Vec<DecryptionShare> = subset
                    .iter()
                    .map(|&i| {
                        partial_decrypt(&g, &talliers.key, &talliers.shares[i as usize - 1], &ct, &ctx, &mut rng)
                            .unwrap()
                    })
                    .collect();
                assert!(shares
                    .iter()
                    .all(|s| verify_decryption_share(&g, &talliers.key, &ct, s, &ctx)));
                assert_eq!(combine(&g, &talliers.key, &ct, &shares).unwrap(), m);
            }
            let (two, _) = talliers.decrypt(&g, &ct, &ctx, &mut rng).unwrap();
            assert_eq!(two, m);
        }
    }

    #[test]
    fn too_few_shares_refused() {
        let g = GroupParams::generate(64, b"thr").unwrap();
        let mut rng = derive_rng(6, "thr");
        let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).unwrap();
        let ctx = ProofContext::new(b"e".to_vec(), b"d".to_vec());
        let (ct, _) = full.public.encrypt_random(&g, &g.g1, &mut rng).unwrap();
        let s = partial_decrypt(&g, &talliers.key, &talliers.shares[0], &ct, &ctx, &mut rng).unwrap();
        assert!(matches!(
            combine(&g, &talliers.key, &ct, &[s.clone()]),
            Err(Error::InsufficientShares { needed: 2, got: 1 })
        ));
        assert!(combine(&g, &talliers.key, &ct, &[s.clone(), s]).is_err());
    }

    #[test]
    fn single_share_is_full_decryption() {
        let g = GroupParams::generate(32, b"one").unwrap();
        let mut rng = derive_rng(1, "one");
        let (talliers, full) = Talliers::setup(&g, 1, 1, &mut rng).unwrap();
        assert_eq!(talliers.shares[0].x1, full.x1);
        assert_eq!(talliers.shares[0].x2, full.x2);
    }

    #[test]
    fn tampered_share_fails_proof() {
        let g = GroupParams::generate(64, b"thr").unwrap();
        let mut rng = derive_rng(7, "thr");
        let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).unwrap();
        let ctx = ProofContext::new(b"e".to_vec(), b"d".to_vec());
        let (ct, _) = full.public.encrypt_random(&g, &g.g2, &mut rng).unwrap();
        let mut s = partial_decrypt(&g, &talliers.key, &talliers.shares[1], &ct, &ctx, &mut rng).unwrap();
        s.d = g.mul(&s.d, &g.g1);
        assert!(!verify_decryption_share(&g, &talliers.key, &ct, &s, &ctx));
    }

    #[test]
    fn mismatched_share_rejected() {
        let g = GroupParams::generate(64, b"thr").unwrap();
        let mut rng = derive_rng(8, "thr");
        let (talliers, full) = Talliers::setup(&g, 2, 3, &mut rng).unwrap();
        let ctx = ProofContext::new(b"e".to_vec(), b"d".to_vec());
        let (ct, _) = full.public.encrypt_random(&g, &g.g2, &mut rng).unwrap();
        let mut bad = talliers.shares[0].clone();
        bad.x1 = g.scalar_add(&bad.x1, &BigUint::one());
        assert!(partial_decrypt(&g, &talliers.key, &bad, &ct, &ctx, &mut rng).is_err());
    }

    #[test]
    fn invalid_threshold_rejected() {
        let g = GroupParams::generate(32, b"t").unwrap();
        let mut rng = derive_rng(1, "t");
        assert!(Talliers::setup(&g, 0, 3, &mut rng).is_err());
        assert!(Talliers::setup(&g, 4, 3, &mut rng).is_err());
    }
}
