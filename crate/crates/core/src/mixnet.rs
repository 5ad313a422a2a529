//! Verifiable re-encryption mix over rows of ciphertexts.
//!
//! A row holds one ciphertext per column (e.g. vote and credential); every
//! server applies a single secret permutation to whole rows, so column
//! associations survive. Each server proves its step by cut-and-choose: it
//! publishes `λs` shadow mixes of its input, and a Fiat–Shamir challenge
//! opens each shadow either toward the input or toward the output.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::elgamal::{Ciphertext, PublicKey};
use crate::encode::{hex_uint_vec, CanonicalHasher};
use crate::error::{Error, Result};
use crate::fhe::FheCiphertext;
use crate::group::GroupParams;
use crate::nizk::ProofContext;

pub const DEFAULT_SHADOW_ROUNDS: usize = 16;

/// A ciphertext the mix can re-randomize publicly.
pub trait Mixable: Clone + PartialEq + std::fmt::Debug + Serialize + DeserializeOwned {
    fn reencrypt(&self, params: &GroupParams, key: &PublicKey, r: &BigUint) -> Self;
    fn absorb(&self, h: &mut CanonicalHasher);
}

impl Mixable for Ciphertext {
    fn reencrypt(&self, params: &GroupParams, key: &PublicKey, r: &BigUint) -> Self {
        key.reencrypt(params, self, r)
    }

    fn absorb(&self, h: &mut CanonicalHasher) {
        Ciphertext::absorb(self, h);
    }
}

impl Mixable for FheCiphertext {
    fn reencrypt(&self, params: &GroupParams, key: &PublicKey, r: &BigUint) -> Self {
        FheCiphertext {
            tag: self.tag,
            body: key.reencrypt(params, &self.body, r),
        }
    }

    fn absorb(&self, h: &mut CanonicalHasher) {
        h.bytes(&self.bytes());
    }
}

pub type Row<T> = Vec<T>;

/// `permutation[i]` is the position input row `i` moves to; randomness is
/// row-major over the input rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "kebab-case")]
pub enum Opening {
    Input {
        permutation: Vec<u32>,
        #[serde(with = "hex_uint_vec")]
        randomness: Vec<BigUint>,
    },
    Output {
        permutation: Vec<u32>,
        #[serde(with = "hex_uint_vec")]
        randomness: Vec<BigUint>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Mixable")]
pub struct MixStage<T> {
    pub server: u32,
    pub output: Vec<Row<T>>,
    pub shadows: Vec<Vec<Row<T>>>,
    pub openings: Vec<Opening>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Mixable")]
pub struct MixBatch<T> {
    pub width: usize,
    pub input: Vec<Row<T>>,
    pub stages: Vec<MixStage<T>>,
}

impl<T: Mixable> MixBatch<T> {
    pub fn output(&self) -> &[Row<T>] {
        self.stages.last().map_or(&self.input, |s| &s.output)
    }

    /// The rows of a single column after the final stage.
    pub fn output_column(&self, col: usize) -> Vec<T> {
        self.output().iter().map(|r| r[col].clone()).collect()
    }
}

/// One server's secret step; exposed so tests can force permutations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerPlan {
    pub permutation: Vec<usize>,
    pub randomness: Vec<Vec<BigUint>>,
}

impl ServerPlan {
    pub fn random<R: RngCore + CryptoRng>(params: &GroupParams, rows: usize, width: usize, rng: &mut R) -> Self {
        let mut permutation: Vec<usize> = (0..rows).collect();
        permutation.shuffle(rng);
        let randomness = (0..rows)
            .map(|_| (0..width).map(|_| params.random_scalar(rng)).collect())
            .collect();
        Self {
            permutation,
            randomness,
        }
    }

    pub fn identity(rows: usize, width: usize) -> Self {
        Self {
            permutation: (0..rows).collect(),
            randomness: vec![vec![BigUint::default(); width]; rows],
        }
    }
}

fn apply<T: Mixable>(
    params: &GroupParams,
    key: &PublicKey,
    input: &[Row<T>],
    permutation: &[usize],
    randomness: &[Vec<BigUint>],
) -> Vec<Row<T>> {
    let mut out: Vec<Option<Row<T>>> = vec![None; input.len()];
    for (i, row) in input.iter().enumerate() {
        let mixed = row
            .iter()
            .zip(&randomness[i])
            .map(|(ct, r)| ct.reencrypt(params, key, r))
            .collect();
        out[permutation[i]] = Some(mixed);
    }
    out.into_iter()
        .map(|r| r.expect("permutation is a bijection"))
        .collect()
}

fn absorb_rows<T: Mixable>(h: &mut CanonicalHasher, rows: &[Row<T>]) {
    h.u64(rows.len() as u64);
    for row in rows {
        for ct in row {
            ct.absorb(h);
        }
    }
}

fn challenge_bits<T: Mixable>(
    ctx: &ProofContext,
    server: u32,
    input: &[Row<T>],
    output: &[Row<T>],
    shadows: &[Vec<Row<T>>],
) -> Vec<bool> {
    let mut h = ctx.hasher("jcj/mix/challenge");
    h.u64(u64::from(server));
    absorb_rows(&mut h, input);
    absorb_rows(&mut h, output);
    h.u64(shadows.len() as u64);
    for s in shadows {
        absorb_rows(&mut h, s);
    }
    let seed = h.finish();
    let mut bits = Vec::with_capacity(shadows.len());
    let mut block = 0u64;
    while bits.len() < shadows.len() {
        let mut b = CanonicalHasher::new("jcj/mix/challenge-bits");
        b.bytes(&seed).u64(block);
        let bytes = b.finish();
        bits.extend(bytes.iter().flat_map(|byte| (0..8).map(move |k| byte >> k & 1 == 1)));
        block += 1;
    }
    bits.truncate(shadows.len());
    bits
}

fn check_width<T>(rows: &[Row<T>], width: usize) -> Result<()> {
    match rows.iter().find(|r| r.len() != width) {
        Some(r) => Err(Error::LengthMismatch(width, r.len())),
        None => Ok(()),
    }
}

fn flatten(randomness: &[Vec<BigUint>]) -> Vec<BigUint> {
    randomness.iter().flatten().cloned().collect()
}

fn stage<T: Mixable, R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &PublicKey,
    server: u32,
    input: &[Row<T>],
    plan: &ServerPlan,
    shadow_rounds: usize,
    ctx: &ProofContext,
    rng: &mut R,
) -> MixStage<T> {
    let n = input.len();
    let width = input.first().map_or(0, Vec::len);
    let output = apply(params, key, input, &plan.permutation, &plan.randomness);
    let plans: Vec<ServerPlan> = (0..shadow_rounds)
        .map(|_| ServerPlan::random(params, n, width, rng))
        .collect();
    let shadows: Vec<Vec<Row<T>>> = plans
        .iter()
        .map(|s| apply(params, key, input, &s.permutation, &s.randomness))
        .collect();
    let bits = challenge_bits(ctx, server, input, &output, &shadows);
    let openings = plans
        .iter()
        .zip(bits)
        .map(|(s, bit)| {
            if !bit {
                Opening::Input {
                    permutation: s.permutation.iter().map(|&p| p as u32).collect(),
                    randomness: flatten(&s.randomness),
                }
            } else {
                // shadow[π_k(i)] ↦ output[π(i)] under r_i − ρ_{k,i}
                let mut permutation = vec![0u32; n];
                let mut randomness = vec![Vec::new(); n];
                for i in 0..n {
                    let j = s.permutation[i];
                    permutation[j] = plan.permutation[i] as u32;
                    randomness[j] = plan.randomness[i]
                        .iter()
                        .zip(&s.randomness[i])
                        .map(|(r, rho)| params.scalar_sub(r, rho))
                        .collect();
                }
                Opening::Output {
                    permutation,
                    randomness: flatten(&randomness),
                }
            }
        })
        .collect();
    MixStage {
        server,
        output,
        shadows,
        openings,
    }
}

/// Mixes `rows` through one server per plan.
#[allow(clippy::too_many_arguments)]
pub fn mix_with_plans<T: Mixable, R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &PublicKey,
    rows: Vec<Row<T>>,
    width: usize,
    plans: &[ServerPlan],
    shadow_rounds: usize,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<MixBatch<T>> {
    check_width(&rows, width)?;
    let mut stages: Vec<MixStage<T>> = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        if plan.permutation.len() != rows.len() {
            return Err(Error::LengthMismatch(rows.len(), plan.permutation.len()));
        }
        let input = stages.last().map_or(&rows, |s| &s.output);
        let next = stage(params, key, k as u32 + 1, input, plan, shadow_rounds, ctx, rng);
        stages.push(next);
    }
    Ok(MixBatch {
        width,
        input: rows,
        stages,
    })
}

/// Mixes `rows` through `servers` servers. Also returns the composite
/// permutation (input row `i` ends at output position `perm[i]`), which only
/// the simulation may use.
#[allow(clippy::too_many_arguments)]
pub fn mix<T: Mixable, R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &PublicKey,
    rows: Vec<Row<T>>,
    width: usize,
    servers: usize,
    shadow_rounds: usize,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<(MixBatch<T>, Vec<usize>)> {
    let plans: Vec<ServerPlan> = (0..servers)
        .map(|_| ServerPlan::random(params, rows.len(), width, rng))
        .collect();
    let mut composite: Vec<usize> = (0..rows.len()).collect();
    for plan in &plans {
        for pos in &mut composite {
            *pos = plan.permutation[*pos];
        }
    }
    let batch = mix_with_plans(params, key, rows, width, &plans, shadow_rounds, ctx, rng)?;
    Ok((batch, composite))
}

/// Paired mix of two equal-length lists.
#[allow(clippy::too_many_arguments)]
pub fn mix_pairs<T: Mixable, R: RngCore + CryptoRng>(
    params: &GroupParams,
    key: &PublicKey,
    a: &[T],
    b: &[T],
    servers: usize,
    shadow_rounds: usize,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<(MixBatch<T>, Vec<usize>)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let rows = a.iter().zip(b).map(|(x, y)| vec![x.clone(), y.clone()]).collect();
    mix(params, key, rows, 2, servers, shadow_rounds, ctx, rng)
}

fn as_permutation(p: &[u32], n: usize) -> Option<Vec<usize>> {
    if p.len() != n {
        return None;
    }
    let mut seen = vec![false; n];
    for &x in p {
        let x = x as usize;
        if x >= n || std::mem::replace(&mut seen[x], true) {
            return None;
        }
    }
    Some(p.iter().map(|&x| x as usize).collect())
}

fn unflatten(r: &[BigUint], n: usize, width: usize, q: &BigUint) -> Option<Vec<Vec<BigUint>>> {
    if r.len() != n * width || r.iter().any(|x| x >= q) {
        return None;
    }
    Some(if width == 0 {
        vec![Vec::new(); n]
    } else {
        r.chunks(width).map(<[BigUint]>::to_vec).collect()
    })
}

fn verify_stage<T: Mixable>(
    params: &GroupParams,
    key: &PublicKey,
    input: &[Row<T>],
    stage: &MixStage<T>,
    width: usize,
    shadow_rounds: usize,
    ctx: &ProofContext,
) -> bool {
    let n = input.len();
    if stage.output.len() != n
        || check_width(&stage.output, width).is_err()
        || stage.shadows.len() != shadow_rounds
        || stage.openings.len() != shadow_rounds
    {
        return false;
    }
    let bits = challenge_bits(ctx, stage.server, input, &stage.output, &stage.shadows);
    stage
        .shadows
        .iter()
        .zip(&stage.openings)
        .zip(bits)
        .all(|((shadow, opening), bit)| {
            if shadow.len() != n || check_width(shadow, width).is_err() {
                return false;
            }
            let (from, to, permutation, randomness) = match (opening, bit) {
                (
                    Opening::Input {
                        permutation,
                        randomness,
                    },
                    false,
                ) => (input, shadow.as_slice(), permutation, randomness),
                (
                    Opening::Output {
                        permutation,
                        randomness,
                    },
                    true,
                ) => (shadow.as_slice(), stage.output.as_slice(), permutation, randomness),
                _ => return false,
            };
            let (Some(perm), Some(rand)) = (
                as_permutation(permutation, n),
                unflatten(randomness, n, width, &params.q),
            ) else {
                return false;
            };
            apply(params, key, from, &perm, &rand) == to
        })
}

/// Checks every stage's shadow openings and the stage chaining.
pub fn verify_mix<T: Mixable>(
    params: &GroupParams,
    key: &PublicKey,
    batch: &MixBatch<T>,
    shadow_rounds: usize,
    ctx: &ProofContext,
) -> bool {
    if check_width(&batch.input, batch.width).is_err() {
        return false;
    }
    let mut input = &batch.input;
    for (k, stage) in batch.stages.iter().enumerate() {
        if stage.server != k as u32 + 1 || !verify_stage(params, key, input, stage, batch.width, shadow_rounds, ctx) {
            return false;
        }
        input = &stage.output;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::KeyPair;
    use crate::fhe::{fhe_keygen, quorum_approvals, PlaintextTag};
    use crate::group::derive_rng;
    use crate::group::tests::tiny;
    use rand_chacha::ChaCha20Rng;

    fn ctx() -> ProofContext {
        ProofContext::new(b"e".to_vec(), b"mix".to_vec())
    }

    fn setup(
        seed: u64,
        n: usize,
    ) -> (
        GroupParams,
        KeyPair,
        Vec<Row<Ciphertext>>,
        Vec<(BigUint, BigUint)>,
        ChaCha20Rng,
    ) {
        let g = GroupParams::generate(64, b"mix").unwrap();
        let mut rng = derive_rng(seed, "mix");
        let kp = KeyPair::generate(&g, &mut rng);
        let mut rows = Vec::new();
        let mut plain = Vec::new();
        for _ in 0..n {
            let (a, b) = (g.random_element(&mut rng), g.random_element(&mut rng));
            let (ea, _) = kp.public.encrypt_random(&g, &a, &mut rng).unwrap();
            let (eb, _) = kp.public.encrypt_random(&g, &b, &mut rng).unwrap();
            rows.push(vec![ea, eb]);
            plain.push((a, b));
        }
        (g, kp, rows, plain, rng)
    }

    fn decrypt_rows(g: &GroupParams, kp: &KeyPair, rows: &[Row<Ciphertext>]) -> Vec<(BigUint, BigUint)> {
        let mut out: Vec<_> = rows
            .iter()
            .map(|r| (kp.decrypt(g, &r[0]), kp.decrypt(g, &r[1])))
            .collect();
        out.sort();
        out
    }

    #[test]
    fn identity_hook_is_noop() {
        let (g, kp, rows, _, mut rng) = setup(1, 5);
        let plan = ServerPlan::identity(5, 2);
        let batch = mix_with_plans(&g, &kp.public, rows.clone(), 2, &[plan], 16, &ctx(), &mut rng).unwrap();
        assert_eq!(batch.output(), rows.as_slice());
        assert!(verify_mix(&g, &kp.public, &batch, 16, &ctx()));
    }

    #[test]
    fn multiset_and_pairs_preserved() {
        let (g, kp, rows, mut plain, mut rng) = setup(2, 12);
        let (batch, perm) = mix(&g, &kp.public, rows.clone(), 2, 3, 16, &ctx(), &mut rng).unwrap();
        assert!(verify_mix(&g, &kp.public, &batch, 16, &ctx()));
        plain.sort();
        assert_eq!(decrypt_rows(&g, &kp, batch.output()), plain);
        for (i, row) in rows.iter().enumerate() {
            let out = &batch.output()[perm[i]];
            assert_eq!(kp.decrypt(&g, &out[0]), kp.decrypt(&g, &row[0]));
            assert_eq!(kp.decrypt(&g, &out[1]), kp.decrypt(&g, &row[1]));
        }
    }

    #[test]
    fn all_six_permutations_tiny_group() {
        let g = tiny();
        let mut rng = derive_rng(3, "tiny-mix");
        let kp = KeyPair::from_secrets(&g, 3u32.into(), 5u32.into()).unwrap();
        let rows: Vec<Row<Ciphertext>> = [2u32, 3, 4]
            .iter()
            .map(|&m| vec![kp.public.encrypt_random(&g, &m.into(), &mut rng).unwrap().0])
            .collect();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let plan = ServerPlan {
                permutation: p.to_vec(),
                randomness: (0..3).map(|_| vec![g.random_scalar(&mut rng)]).collect(),
            };
            let batch = mix_with_plans(&g, &kp.public, rows.clone(), 1, &[plan], 16, &ctx(), &mut rng).unwrap();
            assert!(verify_mix(&g, &kp.public, &batch, 16, &ctx()), "{p:?}");
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(kp.decrypt(&g, &batch.output()[p[i]][0]), kp.decrypt(&g, &row[0]));
            }
        }
    }

    #[test]
    fn replaced_output_rejected() {
        let mut rejected = 0;
        for trial in 0..100 {
            let (g, kp, rows, _, mut rng) = setup(100 + trial, 4);
            let (mut batch, _) = mix(&g, &kp.public, rows, 2, 1, 16, &ctx(), &mut rng).unwrap();
            let fake = kp.public.encrypt_random(&g, &g.g1, &mut rng).unwrap().0;
            batch.stages[0].output[0][0] = fake;
            if !verify_mix(&g, &kp.public, &batch, 16, &ctx()) {
                rejected += 1;
            }
        }
        assert!(rejected >= 99, "{rejected}/100");
    }

    /// A prover that swaps a plaintext and guesses the challenge: each shadow
    /// is built to survive only the guessed side.
    #[test]
    fn guessing_prover_rejected() {
        let rounds = 16;
        let mut accepted = 0;
        for trial in 0..100u64 {
            let (g, kp, rows, _, mut rng) = setup(1000 + trial, 3);
            let n = rows.len();
            let honest = ServerPlan::random(&g, n, 2, &mut rng);
            let mut output = apply(&g, &kp.public, &rows, &honest.permutation, &honest.randomness);
            output[0][0] = kp.public.encrypt_random(&g, &g.g2, &mut rng).unwrap().0;
            let mut shadows = Vec::new();
            let mut openings = Vec::new();
            for _ in 0..rounds {
                let s = ServerPlan::random(&g, n, 2, &mut rng);
                if rng.next_u32() % 2 == 0 {
                    shadows.push(apply(&g, &kp.public, &rows, &s.permutation, &s.randomness));
                    openings.push(Opening::Input {
                        permutation: s.permutation.iter().map(|&p| p as u32).collect(),
                        randomness: flatten(&s.randomness),
                    });
                } else {
                    // shadow derived backwards from the tampered output
                    let neg: Vec<Vec<BigUint>> = s
                        .randomness
                        .iter()
                        .map(|r| r.iter().map(|x| g.scalar_sub(&BigUint::default(), x)).collect())
                        .collect();
                    let mut inverse = vec![0usize; n];
                    for (i, &p) in s.permutation.iter().enumerate() {
                        inverse[p] = i;
                    }
                    shadows.push(apply(&g, &kp.public, &output, &inverse, &neg));
                    let fwd: Vec<Vec<BigUint>> = s.permutation.iter().map(|&p| s.randomness[p].clone()).collect();
                    openings.push(Opening::Output {
                        permutation: s.permutation.iter().map(|&p| p as u32).collect(),
                        randomness: flatten(&fwd),
                    });
                }
            }
            let batch = MixBatch {
                width: 2,
                input: rows,
                stages: vec![MixStage {
                    server: 1,
                    output,
                    shadows,
                    openings,
                }],
            };
            if verify_mix(&g, &kp.public, &batch, rounds, &ctx()) {
                accepted += 1;
            }
        }
        assert!(accepted <= 1, "{accepted}/100 accepted");
    }

    #[test]
    fn broken_pairing_rejected() {
        let (g, kp, rows, _, mut rng) = setup(4, 6);
        let (batch, _) = mix(&g, &kp.public, rows, 2, 2, 16, &ctx(), &mut rng).unwrap();
        let mut broken = batch.clone();
        let out = &mut broken.stages[1].output;
        let tmp = out[0][1].clone();
        out[0][1] = out[1][1].clone();
        out[1][1] = tmp;
        assert!(!verify_mix(&g, &kp.public, &broken, 16, &ctx()));
        // wrong context or round count
        assert!(!verify_mix(
            &g,
            &kp.public,
            &batch,
            16,
            &ProofContext::new(b"x".to_vec(), b"mix".to_vec())
        ));
        assert!(!verify_mix(&g, &kp.public, &batch, 8, &ctx()));
    }

    #[test]
    fn shape_errors() {
        let (g, kp, mut rows, _, mut rng) = setup(5, 3);
        rows[1].pop();
        assert!(matches!(
            mix(&g, &kp.public, rows, 2, 1, 4, &ctx(), &mut rng),
            Err(Error::LengthMismatch(2, 1))
        ));
        let (_, _, rows, _, _) = setup(5, 3);
        let a: Vec<Ciphertext> = rows.iter().map(|r| r[0].clone()).collect();
        assert!(mix_pairs(&g, &kp.public, &a, &a[..2], 1, 4, &ctx(), &mut rng).is_err());
        let (empty, _) = mix::<Ciphertext, _>(&g, &kp.public, Vec::new(), 2, 2, 16, &ctx(), &mut rng).unwrap();
        assert!(empty.output().is_empty());
        assert!(verify_mix(&g, &kp.public, &empty, 16, &ctx()));
    }

    #[test]
    fn fhe_rows_mix() {
        let g = GroupParams::generate(64, b"mix").unwrap();
        let (oracle, keys) = fhe_keygen(&g, 2, 3, 9).unwrap();
        let pk = oracle.public_key();
        let mut rng = derive_rng(6, "fhe-mix");
        let votes: Vec<FheCiphertext> = (0..5u8).map(|i| oracle.encrypt(&[i], PlaintextTag::Vote)).collect();
        let creds: Vec<FheCiphertext> = (0..5u8)
            .map(|i| oracle.encrypt(&[100 + i], PlaintextTag::Credential))
            .collect();
        let (batch, perm) = mix_pairs(&g, &pk.key, &votes, &creds, 2, 16, &ctx(), &mut rng).unwrap();
        assert!(verify_mix(&g, &pk.key, &batch, 16, &ctx()));
        let open = |ct: &FheCiphertext| oracle.threshold_decrypt(ct, &quorum_approvals(&keys, 2, ct)).unwrap().0;
        for i in 0..5 {
            let row = &batch.output()[perm[i]];
            assert_ne!(row[0], votes[i]);
            assert_eq!(open(&row[0]), vec![i as u8]);
            assert_eq!(open(&row[1]), vec![100 + i as u8]);
        }
    }

    #[test]
    fn batch_serde_roundtrip() {
        let (g, kp, rows, _, mut rng) = setup(7, 3);
        let (batch, _) = mix(&g, &kp.public, rows, 2, 1, 4, &ctx(), &mut rng).unwrap();
        let json = serde_json::to_string(&batch).unwrap();
        let back: MixBatch<Ciphertext> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, batch);
        assert!(verify_mix(&g, &kp.public, &back, 4, &ctx()));
    }
}
