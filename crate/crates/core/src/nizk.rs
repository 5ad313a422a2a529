//! Fiat–Shamir sigma protocols.
//!
//! Everything here is an instance of one relation: knowledge of scalars
//! `w_1..w_k` such that every row `Y_j = Π_i G_{j,i}^{w_i}` holds. Plaintext
//! knowledge, equality of discrete logs across ciphertext components,
//! decryption-share correctness and (via OR-composition) slate membership are
//! all expressed as such statements. Challenges hash the domain tag, the
//! election identifier, a caller label, the full statement and the
//! commitments, and are reduced mod q.

use num_bigint::BigUint;
use num_traits::One;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::elgamal::{Ciphertext, PublicKey};
use crate::encode::{hex_uint, hex_uint_vec, CanonicalHasher};
use crate::error::{Error, Result};
use crate::group::GroupParams;

const TAG_REPRESENTATION: &str = "jcj/nizk/representation";
const TAG_EXPONENT: &str = "jcj/nizk/exponent-consistency";
const TAG_SHARE: &str = "jcj/nizk/share-decryption";
const TAG_MEMBERSHIP: &str = "jcj/nizk/membership";
const TAG_PLAINTEXT: &str = "jcj/nizk/plaintext-knowledge";

/// Binds a proof to an election and to whatever the caller labels it with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofContext {
    pub election_id: Vec<u8>,
    pub label: Vec<u8>,
}

impl ProofContext {
    pub fn new(election_id: impl Into<Vec<u8>>, label: impl Into<Vec<u8>>) -> Self {
        Self {
            election_id: election_id.into(),
            label: label.into(),
        }
    }

    pub(crate) fn hasher(&self, domain: &str) -> CanonicalHasher {
        let mut h = CanonicalHasher::new(domain);
        h.bytes(&self.election_id).bytes(&self.label);
        h
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    /// One base per witness; the identity marks an absent witness.
    pub bases: Vec<BigUint>,
    pub image: BigUint,
}

/// Linear relation over the group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Representation {
    pub rows: Vec<Row>,
}

impl Representation {
    pub fn witness_count(&self) -> usize {
        self.rows.first().map_or(0, |r| r.bases.len())
    }

    fn well_formed(&self, params: &GroupParams) -> bool {
        let k = self.witness_count();
        k > 0
            && self.rows.iter().all(|row| {
                row.bases.len() == k
                    && params.is_element(&row.image)
                    && row.bases.iter().all(|b| b.is_one() || params.is_element(b))
            })
    }

    fn absorb(&self, h: &mut CanonicalHasher) {
        h.u64(self.rows.len() as u64);
        for row in &self.rows {
            h.uints(&row.bases).uint(&row.image);
        }
    }

    /// Π_i bases_i^exps_i for one row.
    fn eval(params: &GroupParams, bases: &[BigUint], exps: &[BigUint]) -> BigUint {
        bases
            .iter()
            .zip(exps)
            .filter(|(b, _)| !b.is_one())
            .fold(BigUint::one(), |acc, (b, e)| params.mul(&acc, &params.pow(b, e)))
    }

    fn commitments(&self, params: &GroupParams, nonces: &[BigUint]) -> Vec<BigUint> {
        self.rows
            .iter()
            .map(|row| Self::eval(params, &row.bases, nonces))
            .collect()
    }

    /// Commitments a verifier reconstructs from a response and challenge:
    /// T_j = Π G^s · Y^c.
    fn reconstruct(&self, params: &GroupParams, responses: &[BigUint], c: &BigUint) -> Vec<BigUint> {
        self.rows
            .iter()
            .map(|row| {
                let base = Self::eval(params, &row.bases, responses);
                params.mul(&base, &params.pow(&row.image, c))
            })
            .collect()
    }

    fn holds(&self, params: &GroupParams, witnesses: &[BigUint]) -> bool {
        self.rows
            .iter()
            .all(|row| Self::eval(params, &row.bases, witnesses) == row.image)
    }
}

/// Commitment-form sigma proof: the verifier recomputes the challenge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    #[serde(with = "hex_uint_vec")]
    pub commitments: Vec<BigUint>,
    #[serde(with = "hex_uint_vec")]
    pub responses: Vec<BigUint>,
}

fn challenge(
    params: &GroupParams,
    domain: &str,
    stmt: &Representation,
    commitments: &[BigUint],
    ctx: &ProofContext,
) -> BigUint {
    let mut h = ctx.hasher(domain);
    stmt.absorb(&mut h);
    h.uints(commitments);
    h.finish_mod(&params.q)
}

fn prove_tagged<R: RngCore + CryptoRng>(
    params: &GroupParams,
    domain: &str,
    stmt: &Representation,
    witnesses: &[BigUint],
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<Proof> {
    if witnesses.len() != stmt.witness_count() || stmt.witness_count() == 0 {
        return Err(Error::Proof("witness count does not match statement".into()));
    }
    debug_assert!(stmt.holds(params, witnesses), "witness does not satisfy statement");
    let nonces: Vec<BigUint> = witnesses.iter().map(|_| params.random_scalar(rng)).collect();
    let commitments = stmt.commitments(params, &nonces);
    let c = challenge(params, domain, stmt, &commitments, ctx);
    let responses = nonces
        .iter()
        .zip(witnesses)
        .map(|(k, w)| params.scalar_sub(k, &params.scalar_mul(&c, w)))
        .collect();
    Ok(Proof { commitments, responses })
}

fn verify_tagged(params: &GroupParams, domain: &str, stmt: &Representation, proof: &Proof, ctx: &ProofContext) -> bool {
    if !stmt.well_formed(params)
        || proof.commitments.len() != stmt.rows.len()
        || proof.responses.len() != stmt.witness_count()
        || proof.responses.iter().any(|s| s >= &params.q)
        || !proof.commitments.iter().all(|t| params.is_element(t))
    {
        return false;
    }
    let c = challenge(params, domain, stmt, &proof.commitments, ctx);
    stmt.reconstruct(params, &proof.responses, &c) == proof.commitments
}

pub fn prove_representation<R: RngCore + CryptoRng>(
    params: &GroupParams,
    stmt: &Representation,
    witnesses: &[BigUint],
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<Proof> {
    prove_tagged(params, TAG_REPRESENTATION, stmt, witnesses, ctx, rng)
}

pub fn verify_representation(params: &GroupParams, stmt: &Representation, proof: &Proof, ctx: &ProofContext) -> bool {
    verify_tagged(params, TAG_REPRESENTATION, stmt, proof, ctx)
}

fn exponent_statement(bases: &[BigUint], powers: &[BigUint]) -> Option<Representation> {
    if bases.len() != powers.len() || bases.is_empty() {
        return None;
    }
    Some(Representation {
        rows: bases
            .iter()
            .zip(powers)
            .map(|(b, y)| Row {
                bases: vec![b.clone()],
                image: y.clone(),
            })
            .collect(),
    })
}

/// Proves `powers[i] = bases[i]^exponent` for every i with one exponent.
pub fn prove_exponent_consistency<R: RngCore + CryptoRng>(
    params: &GroupParams,
    bases: &[BigUint],
    powers: &[BigUint],
    exponent: &BigUint,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<Proof> {
    let stmt = exponent_statement(bases, powers)
        .ok_or_else(|| Error::Proof("base and power lists differ in length".into()))?;
    prove_tagged(params, TAG_EXPONENT, &stmt, std::slice::from_ref(exponent), ctx, rng)
}

pub fn verify_exponent_consistency(
    params: &GroupParams,
    bases: &[BigUint],
    powers: &[BigUint],
    proof: &Proof,
    ctx: &ProofContext,
) -> bool {
    match exponent_statement(bases, powers) {
        Some(stmt) => verify_tagged(params, TAG_EXPONENT, &stmt, proof, ctx),
        None => false,
    }
}

fn share_statement(params: &GroupParams, ct: &Ciphertext, commitment: &BigUint, d: &BigUint) -> Representation {
    Representation {
        rows: vec![
            Row {
                bases: vec![params.g1.clone(), params.g2.clone()],
                image: commitment.clone(),
            },
            Row {
                bases: vec![ct.u.clone(), ct.v.clone()],
                image: d.clone(),
            },
        ],
    }
}

/// Proves `d = u^a · v^b` for the (a, b) behind `commitment = g1^a · g2^b`.
pub fn prove_share_decryption<R: RngCore + CryptoRng>(
    params: &GroupParams,
    ct: &Ciphertext,
    commitment: &BigUint,
    d: &BigUint,
    share: (&BigUint, &BigUint),
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<Proof> {
    let stmt = share_statement(params, ct, commitment, d);
    prove_tagged(params, TAG_SHARE, &stmt, &[share.0.clone(), share.1.clone()], ctx, rng)
}

pub fn verify_share_decryption(
    params: &GroupParams,
    ct: &Ciphertext,
    commitment: &BigUint,
    d: &BigUint,
    proof: &Proof,
    ctx: &ProofContext,
) -> bool {
    verify_tagged(
        params,
        TAG_SHARE,
        &share_statement(params, ct, commitment, d),
        proof,
        ctx,
    )
}

fn plaintext_statement(params: &GroupParams, ct: &Ciphertext) -> Representation {
    Representation {
        rows: vec![
            Row {
                bases: vec![params.g1.clone()],
                image: ct.u.clone(),
            },
            Row {
                bases: vec![params.g2.clone()],
                image: ct.v.clone(),
            },
        ],
    }
}

/// Proves knowledge of the randomness r behind (u, v) = (g1^r, g2^r), and
/// hence of the plaintext w / h^r.
pub fn prove_plaintext_knowledge<R: RngCore + CryptoRng>(
    params: &GroupParams,
    ct: &Ciphertext,
    r: &BigUint,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<Proof> {
    prove_tagged(
        params,
        TAG_PLAINTEXT,
        &plaintext_statement(params, ct),
        std::slice::from_ref(r),
        ctx,
        rng,
    )
}

pub fn verify_plaintext_knowledge(params: &GroupParams, ct: &Ciphertext, proof: &Proof, ctx: &ProofContext) -> bool {
    params.is_element(&ct.w) && verify_tagged(params, TAG_PLAINTEXT, &plaintext_statement(params, ct), proof, ctx)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipBranch {
    #[serde(with = "hex_uint_vec")]
    pub commitments: Vec<BigUint>,
    #[serde(with = "hex_uint")]
    pub challenge: BigUint,
    #[serde(with = "hex_uint")]
    pub response: BigUint,
}

/// OR-composition of re-encryption proofs, one branch per slate entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipProof {
    pub branches: Vec<MembershipBranch>,
}

fn membership_statement(params: &GroupParams, pk: &PublicKey, ct: &Ciphertext, candidate: &BigUint) -> Representation {
    Representation {
        rows: vec![
            Row {
                bases: vec![params.g1.clone()],
                image: ct.u.clone(),
            },
            Row {
                bases: vec![params.g2.clone()],
                image: ct.v.clone(),
            },
            Row {
                bases: vec![pk.h.clone()],
                image: params.div(&ct.w, candidate),
            },
        ],
    }
}

fn membership_challenge(
    params: &GroupParams,
    statements: &[Representation],
    branches: &[Vec<BigUint>],
    ctx: &ProofContext,
) -> BigUint {
    let mut h = ctx.hasher(TAG_MEMBERSHIP);
    h.u64(statements.len() as u64);
    for (stmt, commitments) in statements.iter().zip(branches) {
        stmt.absorb(&mut h);
        h.uints(commitments);
    }
    h.finish_mod(&params.q)
}

/// Proves that `ct` encrypts `slate[index]` under randomness `r`.
#[allow(clippy::too_many_arguments)]
pub fn prove_membership<R: RngCore + CryptoRng>(
    params: &GroupParams,
    pk: &PublicKey,
    ct: &Ciphertext,
    slate: &[BigUint],
    index: usize,
    r: &BigUint,
    ctx: &ProofContext,
    rng: &mut R,
) -> Result<MembershipProof> {
    if index >= slate.len() {
        return Err(Error::OutOfRange {
            index,
            len: slate.len(),
        });
    }
    let statements: Vec<Representation> = slate.iter().map(|c| membership_statement(params, pk, ct, c)).collect();
    let mut challenges = vec![BigUint::default(); slate.len()];
    let mut responses = vec![BigUint::default(); slate.len()];
    let mut commitments = Vec::with_capacity(slate.len());
    let nonce = params.random_scalar(rng);
    for (k, stmt) in statements.iter().enumerate() {
        if k == index {
            commitments.push(stmt.commitments(params, std::slice::from_ref(&nonce)));
        } else {
            challenges[k] = params.random_scalar(rng);
            responses[k] = params.random_scalar(rng);
            commitments.push(stmt.reconstruct(params, std::slice::from_ref(&responses[k]), &challenges[k]));
        }
    }
    let total = membership_challenge(params, &statements, &commitments, ctx);
    let others = challenges
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != index)
        .fold(BigUint::default(), |acc, (_, c)| params.scalar_add(&acc, c));
    challenges[index] = params.scalar_sub(&total, &others);
    responses[index] = params.scalar_sub(&nonce, &params.scalar_mul(&challenges[index], r));
    let branches = commitments
        .into_iter()
        .zip(challenges)
        .zip(responses)
        .map(|((commitments, challenge), response)| MembershipBranch {
            commitments,
            challenge,
            response,
        })
        .collect();
    Ok(MembershipProof { branches })
}

pub fn verify_membership(
    params: &GroupParams,
    pk: &PublicKey,
    ct: &Ciphertext,
    slate: &[BigUint],
    proof: &MembershipProof,
    ctx: &ProofContext,
) -> bool {
    if slate.is_empty() || proof.branches.len() != slate.len() || !ct.is_valid(params) {
        return false;
    }
    if !slate.iter().all(|c| params.is_element(c)) {
        return false;
    }
    let statements: Vec<Representation> = slate.iter().map(|c| membership_statement(params, pk, ct, c)).collect();
    let mut sum = BigUint::default();
    for (stmt, branch) in statements.iter().zip(&proof.branches) {
        if branch.commitments.len() != 3
            || branch.challenge >= params.q
            || branch.response >= params.q
            || !branch.commitments.iter().all(|t| params.is_element(t))
        {
            return false;
        }
        let rebuilt = stmt.reconstruct(params, std::slice::from_ref(&branch.response), &branch.challenge);
        if rebuilt != branch.commitments {
            return false;
        }
        sum = params.scalar_add(&sum, &branch.challenge);
    }
    let commitments: Vec<Vec<BigUint>> = proof.branches.iter().map(|b| b.commitments.clone()).collect();
    sum == membership_challenge(params, &statements, &commitments, ctx)
}

/// The proofs attached to a classical ballot: plaintext knowledge for the
/// credential ciphertext and slate membership for the vote ciphertext, both
/// bound to the election identifier and to the ciphertext pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotProofBundle {
    pub credential: Proof,
    pub membership: MembershipProof,
}

fn ballot_context(election_id: &[u8], vote: &Ciphertext, credential: &Ciphertext) -> ProofContext {
    let mut label = Vec::new();
    vote.encode_into(&mut label);
    credential.encode_into(&mut label);
    ProofContext::new(election_id, label)
}

impl BallotProofBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn prove<R: RngCore + CryptoRng>(
        params: &GroupParams,
        pk: &PublicKey,
        slate: &[BigUint],
        election_id: &[u8],
        vote: &Ciphertext,
        choice: usize,
        vote_randomness: &BigUint,
        credential: &Ciphertext,
        credential_randomness: &BigUint,
        rng: &mut R,
    ) -> Result<Self> {
        let ctx = ballot_context(election_id, vote, credential);
        let membership = prove_membership(params, pk, vote, slate, choice, vote_randomness, &ctx, rng)?;
        let credential = prove_plaintext_knowledge(params, credential, credential_randomness, &ctx, rng)?;
        Ok(Self { credential, membership })
    }

    pub fn verify(
        &self,
        params: &GroupParams,
        pk: &PublicKey,
        slate: &[BigUint],
        election_id: &[u8],
        vote: &Ciphertext,
        credential: &Ciphertext,
    ) -> bool {
        let ctx = ballot_context(election_id, vote, credential);
        verify_membership(params, pk, vote, slate, &self.membership, &ctx)
            && verify_plaintext_knowledge(params, credential, &self.credential, &ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::KeyPair;
    use crate::group::derive_rng;

    fn setup() -> (GroupParams, KeyPair, rand_chacha::ChaCha20Rng) {
        let g = GroupParams::generate(64, b"nizk").unwrap();
        let mut rng = derive_rng(3, "nizk");
        let kp = KeyPair::generate(&g, &mut rng);
        (g, kp, rng)
    }

    fn ctx() -> ProofContext {
        ProofContext::new(b"election-1".to_vec(), b"label".to_vec())
    }

    fn bump(x: &BigUint, q: &BigUint) -> BigUint {
        (x + 1u32) % q
    }

    #[test]
    fn representation_honest_accepts_and_context_binds() {
        let (g, _, mut rng) = setup();
        let (a, b) = (g.random_scalar(&mut rng), g.random_scalar(&mut rng));
        let stmt = Representation {
            rows: vec![Row {
                bases: vec![g.g1.clone(), g.g2.clone()],
                image: g.commit(&a, &b),
            }],
        };
        let proof = prove_representation(&g, &stmt, &[a, b], &ctx(), &mut rng).unwrap();
        assert!(verify_representation(&g, &stmt, &proof, &ctx()));
        let other = ProofContext::new(b"election-2".to_vec(), b"label".to_vec());
        assert!(!verify_representation(&g, &stmt, &proof, &other));
        for i in 0..proof.responses.len() {
            let mut bad = proof.clone();
            bad.responses[i] = bump(&bad.responses[i], &g.q);
            assert!(!verify_representation(&g, &stmt, &bad, &ctx()));
        }
        let mut bad = proof.clone();
        bad.commitments[0] = g.mul(&bad.commitments[0], &g.g1);
        assert!(!verify_representation(&g, &stmt, &bad, &ctx()));
    }

    #[test]
    fn malformed_statement_rejected() {
        let (g, _, mut rng) = setup();
        let a = g.random_scalar(&mut rng);
        let stmt = Representation {
            rows: vec![Row {
                bases: vec![g.g1.clone()],
                image: g.pow(&g.g1, &a),
            }],
        };
        let proof = prove_representation(&g, &stmt, std::slice::from_ref(&a), &ctx(), &mut rng).unwrap();
        let mut bad = stmt.clone();
        bad.rows[0].image = g.p.clone() - 1u32; // order 2, outside the subgroup
        assert!(!verify_representation(&g, &bad, &proof, &ctx()));
        assert!(prove_representation(&g, &stmt, &[], &ctx(), &mut rng).is_err());
    }

    #[test]
    fn exponent_consistency_cases() {
        let (g, kp, mut rng) = setup();
        let m = g.random_element(&mut rng);
        let (ct, _) = kp.public.encrypt_random(&g, &m, &mut rng).unwrap();
        let base: Vec<BigUint> = ct.components().into_iter().cloned().collect();

        let one = BigUint::one();
        let proof = prove_exponent_consistency(&g, &base, &base, &one, &ctx(), &mut rng).unwrap();
        assert!(verify_exponent_consistency(&g, &base, &base, &proof, &ctx()));

        let z = g.random_nonzero_scalar(&mut rng);
        let power: Vec<BigUint> = base.iter().map(|b| g.pow(b, &z)).collect();
        let proof = prove_exponent_consistency(&g, &base, &power, &z, &ctx(), &mut rng).unwrap();
        assert!(verify_exponent_consistency(&g, &base, &power, &proof, &ctx()));

        let mut wrong = power.clone();
        wrong[2] = g.mul(&wrong[2], &g.g1);
        assert!(!verify_exponent_consistency(&g, &base, &wrong, &proof, &ctx()));

        let mut outside = power.clone();
        outside[0] = g.p.clone() - 1u32;
        assert!(!verify_exponent_consistency(&g, &base, &outside, &proof, &ctx()));
    }

    #[test]
    fn membership_cases() {
        let (g, kp, mut rng) = setup();
        let slate: Vec<BigUint> = (0..2u8).map(|i| g.hash_to_group("cand", &[i])).collect();
        let r = g.random_scalar(&mut rng);
        let ct = kp.public.encrypt(&g, &slate[1], &r).unwrap();
        let proof = prove_membership(&g, &kp.public, &ct, &slate, 1, &r, &ctx(), &mut rng).unwrap();
        assert!(verify_membership(&g, &kp.public, &ct, &slate, &proof, &ctx()));
        assert_eq!(proof.branches.len(), slate.len());

        let other: Vec<BigUint> = (5..7u8).map(|i| g.hash_to_group("cand", &[i])).collect();
        assert!(!verify_membership(&g, &kp.public, &ct, &other, &proof, &ctx()));

        // encrypt something off the slate and lie about the index
        let off = g.hash_to_group("cand", &[9]);
        let bad_ct = kp.public.encrypt(&g, &off, &r).unwrap();
        let forged = prove_membership(&g, &kp.public, &bad_ct, &slate, 0, &r, &ctx(), &mut rng).unwrap();
        assert!(!verify_membership(&g, &kp.public, &bad_ct, &slate, &forged, &ctx()));

        assert!(matches!(
            prove_membership(&g, &kp.public, &ct, &slate, 2, &r, &ctx(), &mut rng),
            Err(Error::OutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn share_decryption_cases() {
        let (g, kp, mut rng) = setup();
        let m = g.random_element(&mut rng);
        let (ct, _) = kp.public.encrypt_random(&g, &m, &mut rng).unwrap();
        let d = g.mul(&g.pow(&ct.u, &kp.x1), &g.pow(&ct.v, &kp.x2));
        let proof = prove_share_decryption(&g, &ct, &kp.public.h, &d, (&kp.x1, &kp.x2), &ctx(), &mut rng).unwrap();
        assert!(verify_share_decryption(&g, &ct, &kp.public.h, &d, &proof, &ctx()));
        let random = g.random_element(&mut rng);
        assert!(!verify_share_decryption(&g, &ct, &kp.public.h, &random, &proof, &ctx()));
        let (ct2, _) = kp.public.encrypt_random(&g, &m, &mut rng).unwrap();
        assert!(!verify_share_decryption(&g, &ct2, &kp.public.h, &d, &proof, &ctx()));
    }

    #[test]
    fn completeness_over_many_trials() {
        let (g, kp, mut rng) = setup();
        let slate: Vec<BigUint> = (0..3u8).map(|i| g.hash_to_group("cand", &[i])).collect();
        for i in 0..1000usize {
            let ctx = ProofContext::new(b"e".to_vec(), (i as u64).to_be_bytes().to_vec());
            let j = i % 3;
            let r = g.random_scalar(&mut rng);
            let ct = kp.public.encrypt(&g, &slate[j], &r).unwrap();
            let p = prove_membership(&g, &kp.public, &ct, &slate, j, &r, &ctx, &mut rng).unwrap();
            assert!(verify_membership(&g, &kp.public, &ct, &slate, &p, &ctx));
            let p = prove_plaintext_knowledge(&g, &ct, &r, &ctx, &mut rng).unwrap();
            assert!(verify_plaintext_knowledge(&g, &ct, &p, &ctx));
            let z = g.random_scalar(&mut rng);
            let base: Vec<BigUint> = ct.components().into_iter().cloned().collect();
            let pow: Vec<BigUint> = base.iter().map(|b| g.pow(b, &z)).collect();
            let p = prove_exponent_consistency(&g, &base, &pow, &z, &ctx, &mut rng).unwrap();
            assert!(verify_exponent_consistency(&g, &base, &pow, &p, &ctx));
            let d = g.mul(&g.pow(&ct.u, &kp.x1), &g.pow(&ct.v, &kp.x2));
            let p = prove_share_decryption(&g, &ct, &kp.public.h, &d, (&kp.x1, &kp.x2), &ctx, &mut rng).unwrap();
            assert!(verify_share_decryption(&g, &ct, &kp.public.h, &d, &p, &ctx));
        }
    }

    #[test]
    fn ballot_bundle_binds_election_and_pair() {
        let (g, kp, mut rng) = setup();
        let slate: Vec<BigUint> = (0..2u8).map(|i| g.hash_to_group("cand", &[i])).collect();
        let sigma = g.random_element(&mut rng);
        let (a1, r1) = (g.random_scalar(&mut rng), g.random_scalar(&mut rng));
        let vote = kp.public.encrypt(&g, &slate[0], &a1).unwrap();
        let cred = kp.public.encrypt(&g, &sigma, &r1).unwrap();
        let bundle =
            BallotProofBundle::prove(&g, &kp.public, &slate, b"eps", &vote, 0, &a1, &cred, &r1, &mut rng).unwrap();
        assert!(bundle.verify(&g, &kp.public, &slate, b"eps", &vote, &cred));
        assert!(!bundle.verify(&g, &kp.public, &slate, b"eps'", &vote, &cred));
        let other = kp.public.reencrypt(&g, &cred, &BigUint::from(5u32));
        assert!(!bundle.verify(&g, &kp.public, &slate, b"eps", &vote, &other));
    }
}
