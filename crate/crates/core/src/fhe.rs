//! Ideal threshold-FHE functionality.
//!
//! This is the substitution boundary for a real lattice scheme. The contract
//! callers rely on:
//!
//! * ciphertexts are opaque, tagged with their plaintext space, and can be
//!   re-randomized publicly; equal plaintexts are not recognisable from bytes;
//! * keyed hashing and hash-of-preimage equality are evaluated "under
//!   encryption" and yield fresh ciphertexts;
//! * decryption needs approvals from at least `t` talliers and emits a signed
//!   record that anyone can check against the published keys.
//!
//! The ideal backend realizes an opaque ciphertext as a two-generator ElGamal
//! encryption (under an oracle-held key) of a random handle; the oracle maps
//! handles to plaintexts internally. Re-randomization is ElGamal
//! re-encryption, so mixes of these ciphertexts are verified exactly like
//! classical ones. Attestations are Ed25519 signatures by the oracle standing
//! in for proofs of correct decryption.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hmac::{Hmac, Mac};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::board::Digest;
use crate::elgamal::{Ciphertext, KeyPair, PublicKey};
use crate::encode::{hex_bytes, CanonicalHasher};
use crate::error::{Error, Result};
use crate::group::{derive_rng, random_bytes, GroupParams};

/// Keyed-hash digest length in bytes (128 bits).
pub const DIGEST_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaintextTag {
    Credential,
    Vote,
    HashDigest,
    Preimage,
    Key,
    Boolean,
}

impl PlaintextTag {
    fn as_str(self) -> &'static str {
        match self {
            Self::Credential => "credential",
            Self::Vote => "vote",
            Self::HashDigest => "hash-digest",
            Self::Preimage => "preimage",
            Self::Key => "key",
            Self::Boolean => "boolean",
        }
    }

    fn expect(self, got: PlaintextTag) -> Result<()> {
        if self == got {
            Ok(())
        } else {
            Err(Error::TagMismatch {
                expected: self.as_str().into(),
                got: got.as_str().into(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FheCiphertext {
    pub tag: PlaintextTag,
    pub body: Ciphertext,
}

impl FheCiphertext {
    /// Canonical bytes: tag followed by the three body components.
    pub fn bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        crate::encode::put_bytes(&mut out, self.tag.as_str().as_bytes());
        self.body.encode_into(&mut out);
        out
    }

    pub fn digest(&self) -> Digest {
        let mut h = CanonicalHasher::new("jcj/fhe/ciphertext");
        h.bytes(&self.bytes());
        h.finish()
    }
}

/// Everything a party needs to re-randomize ciphertexts and check oracle
/// evidence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FhePublicKey {
    pub params: GroupParams,
    pub key: PublicKey,
    #[serde(with = "hex_bytes")]
    pub oracle_key: [u8; 32],
    pub approvers: Vec<ApproverInfo>,
    pub threshold: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproverInfo {
    pub index: u32,
    #[serde(with = "hex_bytes")]
    pub verifying_key: [u8; 32],
}

pub fn fhe_rerandomize<R: RngCore + CryptoRng>(pk: &FhePublicKey, ct: &FheCiphertext, rng: &mut R) -> FheCiphertext {
    let r = pk.params.random_nonzero_scalar(rng);
    rerandomize_with(pk, ct, &r)
}

pub fn rerandomize_with(pk: &FhePublicKey, ct: &FheCiphertext, r: &BigUint) -> FheCiphertext {
    FheCiphertext {
        tag: ct.tag,
        body: pk.key.reencrypt(&pk.params, &ct.body, r),
    }
}

/// Public credential-derivation hash: σ = H(x).
pub fn derive_credential(preimage: &[u8]) -> Vec<u8> {
    let mut h = CanonicalHasher::new("jcj/credential-from-preimage");
    h.bytes(preimage);
    h.finish().to_vec()
}

/// A simulated tallier's approval capability.
#[derive(Clone)]
pub struct ApprovalKey {
    pub index: u32,
    signing: SigningKey,
}

impl std::fmt::Debug for ApprovalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApprovalKey")
            .field("index", &self.index)
            .finish_non_exhaustive()
    }
}

fn approval_message(ct: &Digest) -> Vec<u8> {
    let mut msg = b"jcj/fhe/approve".to_vec();
    msg.extend_from_slice(ct);
    msg
}

impl ApprovalKey {
    pub fn approve(&self, ct: &FheCiphertext) -> Approval {
        Approval {
            tallier: self.index,
            signature: self.signing.sign(&approval_message(&ct.digest())).to_bytes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approval {
    pub tallier: u32,
    #[serde(with = "hex_bytes")]
    pub signature: [u8; 64],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashKey {
    pub id: u32,
    pub encrypted: FheCiphertext,
}

/// Oracle evidence. Every evaluation and decryption attempt is logged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum OracleRecord {
    EvalKeyedHash {
        key_id: u32,
        #[serde(with = "hex_bytes")]
        input: Digest,
        #[serde(with = "hex_bytes")]
        output: Digest,
        #[serde(with = "hex_bytes")]
        attestation: [u8; 64],
    },
    EvalPreimageEq {
        #[serde(with = "hex_bytes")]
        preimage: Digest,
        #[serde(with = "hex_bytes")]
        credential: Digest,
        #[serde(with = "hex_bytes")]
        output: Digest,
        #[serde(with = "hex_bytes")]
        attestation: [u8; 64],
    },
    Decrypt {
        #[serde(with = "hex_bytes")]
        ciphertext: Digest,
        #[serde(with = "hex_bytes")]
        plaintext: Vec<u8>,
        #[serde(with = "hex_bytes")]
        commitment: Digest,
        approvals: Vec<Approval>,
        #[serde(with = "hex_bytes")]
        attestation: [u8; 64],
    },
    Refusal {
        #[serde(with = "hex_bytes")]
        ciphertext: Digest,
        approvals: usize,
    },
}

pub fn plaintext_commitment(ct: &Digest, plaintext: &[u8]) -> Digest {
    let mut h = CanonicalHasher::new("jcj/fhe/commit");
    h.bytes(ct).bytes(plaintext);
    h.finish()
}

impl OracleRecord {
    /// The bytes the oracle signs, i.e. everything but the attestation.
    fn message(&self) -> Digest {
        let mut h = CanonicalHasher::new("jcj/fhe/record");
        match self {
            Self::EvalKeyedHash {
                key_id, input, output, ..
            } => {
                h.bytes(b"eval-keyed-hash")
                    .u64(u64::from(*key_id))
                    .bytes(input)
                    .bytes(output);
            }
            Self::EvalPreimageEq {
                preimage,
                credential,
                output,
                ..
            } => {
                h.bytes(b"eval-preimage-eq")
                    .bytes(preimage)
                    .bytes(credential)
                    .bytes(output);
            }
            Self::Decrypt {
                ciphertext,
                plaintext,
                commitment,
                approvals,
                ..
            } => {
                h.bytes(b"decrypt").bytes(ciphertext).bytes(plaintext).bytes(commitment);
                h.u64(approvals.len() as u64);
                for a in approvals {
                    h.u64(u64::from(a.tallier)).bytes(&a.signature);
                }
            }
            Self::Refusal { ciphertext, approvals } => {
                h.bytes(b"refusal").bytes(ciphertext).u64(*approvals as u64);
            }
        }
        h.finish()
    }

    fn attestation(&self) -> Option<&[u8; 64]> {
        match self {
            Self::EvalKeyedHash { attestation, .. }
            | Self::EvalPreimageEq { attestation, .. }
            | Self::Decrypt { attestation, .. } => Some(attestation),
            Self::Refusal { .. } => None,
        }
    }

    fn set_attestation(&mut self, sig: [u8; 64]) {
        match self {
            Self::EvalKeyedHash { attestation, .. }
            | Self::EvalPreimageEq { attestation, .. }
            | Self::Decrypt { attestation, .. } => *attestation = sig,
            Self::Refusal { .. } => {}
        }
    }

    pub fn output_digest(&self) -> Option<&Digest> {
        match self {
            Self::EvalKeyedHash { output, .. } | Self::EvalPreimageEq { output, .. } => Some(output),
            _ => None,
        }
    }
}

fn verifying_key(bytes: &[u8; 32]) -> Option<VerifyingKey> {
    VerifyingKey::from_bytes(bytes).ok()
}

fn count_valid_approvals(pk: &FhePublicKey, ct: &Digest, approvals: &[Approval]) -> usize {
    let msg = approval_message(ct);
    let mut seen = BTreeSet::new();
    for a in approvals {
        let Some(info) = pk.approvers.iter().find(|i| i.index == a.tallier) else {
            continue;
        };
        let ok = verifying_key(&info.verifying_key)
            .is_some_and(|vk| vk.verify(&msg, &Signature::from_bytes(&a.signature)).is_ok());
        if ok {
            seen.insert(a.tallier);
        }
    }
    seen.len()
}

/// Auditor-side check of a single record: oracle signature, and for
/// decryptions the plaintext commitment and a threshold of valid, distinct
/// approvals.
pub fn verify_record(pk: &FhePublicKey, record: &OracleRecord) -> bool {
    let Some(vk) = verifying_key(&pk.oracle_key) else {
        return false;
    };
    let Some(att) = record.attestation() else {
        return true;
    };
    if vk.verify(&record.message(), &Signature::from_bytes(att)).is_err() {
        return false;
    }
    match record {
        OracleRecord::Decrypt {
            ciphertext,
            plaintext,
            commitment,
            approvals,
            ..
        } => {
            plaintext_commitment(ciphertext, plaintext) == *commitment
                && count_valid_approvals(pk, ciphertext, approvals) >= pk.threshold
        }
        _ => true,
    }
}

fn knowledge_message(election_id: &[u8], cts: &[&FheCiphertext]) -> Digest {
    let mut h = CanonicalHasher::new("jcj/fhe/knowledge");
    h.bytes(election_id).u64(cts.len() as u64);
    for ct in cts {
        h.bytes(&ct.digest());
    }
    h.finish()
}

/// Stand-in for a proof of plaintext knowledge over a set of ciphertexts,
/// bound to the election identifier.
pub fn verify_knowledge(pk: &FhePublicKey, election_id: &[u8], cts: &[&FheCiphertext], attestation: &[u8; 64]) -> bool {
    verifying_key(&pk.oracle_key).is_some_and(|vk| {
        vk.verify(
            &knowledge_message(election_id, cts),
            &Signature::from_bytes(attestation),
        )
        .is_ok()
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleStats {
    pub encryptions: u64,
    pub keyed_hash_evals: u64,
    pub preimage_evals: u64,
    pub decryptions: u64,
    pub refusals: u64,
    /// Successful decryptions that carried fewer than `t` valid approvals.
    /// Must stay zero.
    pub under_threshold_decryptions: u64,
}

struct OracleState {
    public: FhePublicKey,
    secret: KeyPair,
    signing: SigningKey,
    handles: HashMap<BigUint, (PlaintextTag, Vec<u8>)>,
    hash_keys: Vec<[u8; 32]>,
    rng: ChaCha20Rng,
    records: Vec<OracleRecord>,
    stats: OracleStats,
}

impl OracleState {
    fn encrypt(&mut self, plaintext: &[u8], tag: PlaintextTag) -> FheCiphertext {
        let params = &self.public.params;
        let handle = loop {
            let h = params.random_element(&mut self.rng);
            if !self.handles.contains_key(&h) {
                break h;
            }
        };
        self.handles.insert(handle.clone(), (tag, plaintext.to_vec()));
        let r = params.random_scalar(&mut self.rng);
        let body = self.public.key.encrypt_unchecked(params, &handle, &r);
        self.stats.encryptions += 1;
        FheCiphertext { tag, body }
    }

    fn open(&self, ct: &FheCiphertext) -> Result<(PlaintextTag, Vec<u8>)> {
        let handle = self.secret.decrypt(&self.public.params, &ct.body);
        let (tag, plaintext) = self
            .handles
            .get(&handle)
            .ok_or_else(|| Error::OracleRefused("ciphertext was not produced by this oracle".into()))?;
        tag.expect(ct.tag)?;
        Ok((*tag, plaintext.clone()))
    }

    fn open_as(&self, ct: &FheCiphertext, tag: PlaintextTag) -> Result<Vec<u8>> {
        tag.expect(ct.tag)?;
        Ok(self.open(ct)?.1)
    }

    fn attest(&mut self, mut record: OracleRecord) -> OracleRecord {
        let sig = self.signing.sign(&record.message()).to_bytes();
        record.set_attestation(sig);
        self.records.push(record.clone());
        record
    }
}

/// Shared handle to the oracle. Calls are serialized on an internal lock.
#[derive(Clone)]
pub struct FheOracle {
    state: Arc<Mutex<OracleState>>,
}

impl std::fmt::Debug for FheOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FheOracle").finish_non_exhaustive()
    }
}

/// Sets up the oracle for a `t`-of-`n` tallier set. Everything is derived
/// from `seed`.
pub fn fhe_keygen(params: &GroupParams, t: usize, n: usize, seed: u64) -> Result<(FheOracle, Vec<ApprovalKey>)> {
    if t == 0 || t > n {
        return Err(Error::Threshold { t, n });
    }
    let mut rng = derive_rng(seed, "fhe-oracle");
    let secret = KeyPair::generate(params, &mut rng);
    let signing = SigningKey::from_bytes(&random_bytes::<_, 32>(&mut rng));
    let approval_keys: Vec<ApprovalKey> = (1..=n as u32)
        .map(|index| ApprovalKey {
            index,
            signing: SigningKey::from_bytes(&random_bytes::<_, 32>(&mut rng)),
        })
        .collect();
    let public = FhePublicKey {
        params: params.clone(),
        key: secret.public.clone(),
        oracle_key: signing.verifying_key().to_bytes(),
        approvers: approval_keys
            .iter()
            .map(|k| ApproverInfo {
                index: k.index,
                verifying_key: k.signing.verifying_key().to_bytes(),
            })
            .collect(),
        threshold: t,
    };
    let state = OracleState {
        public,
        secret,
        signing,
        handles: HashMap::new(),
        hash_keys: Vec::new(),
        rng,
        records: Vec::new(),
        stats: OracleStats::default(),
    };
    Ok((
        FheOracle {
            state: Arc::new(Mutex::new(state)),
        },
        approval_keys,
    ))
}

impl FheOracle {
    fn lock(&self) -> MutexGuard<'_, OracleState> {
        self.state.lock().expect("oracle lock poisoned")
    }

    pub fn public_key(&self) -> FhePublicKey {
        self.lock().public.clone()
    }

    pub fn encrypt(&self, plaintext: &[u8], tag: PlaintextTag) -> FheCiphertext {
        self.lock().encrypt(plaintext, tag)
    }

    /// Issues a knowledge attestation for ciphertexts whose plaintexts the
    /// caller can present.
    pub fn attest_knowledge(&self, election_id: &[u8], items: &[(&FheCiphertext, &[u8])]) -> Result<[u8; 64]> {
        let state = self.lock();
        for (ct, plaintext) in items {
            let (_, actual) = state.open(ct)?;
            if actual != *plaintext {
                return Err(Error::OracleRefused("presented plaintext does not match".into()));
            }
        }
        let cts: Vec<&FheCiphertext> = items.iter().map(|(c, _)| *c).collect();
        Ok(state.signing.sign(&knowledge_message(election_id, &cts)).to_bytes())
    }

    /// Samples a fresh hash key (trusted-dealer style) and publishes E(k).
    pub fn new_hash_key(&self) -> HashKey {
        let mut state = self.lock();
        let key: [u8; 32] = random_bytes(&mut state.rng);
        let id = state.hash_keys.len() as u32;
        state.hash_keys.push(key);
        let encrypted = state.encrypt(&key, PlaintextTag::Key);
        HashKey { id, encrypted }
    }

    /// E(σ) ↦ E(h_k(σ)).
    pub fn eval_keyed_hash(&self, ct: &FheCiphertext, key: &HashKey) -> Result<(FheCiphertext, OracleRecord)> {
        let mut state = self.lock();
        let k = *state
            .hash_keys
            .get(key.id as usize)
            .ok_or(Error::UnknownHashKey(key.id))?;
        let sigma = state.open_as(ct, PlaintextTag::Credential)?;
        let digest = keyed_hash(&k, &sigma);
        let out = state.encrypt(&digest, PlaintextTag::HashDigest);
        state.stats.keyed_hash_evals += 1;
        let record = state.attest(OracleRecord::EvalKeyedHash {
            key_id: key.id,
            input: ct.digest(),
            output: out.digest(),
            attestation: [0; 64],
        });
        Ok((out, record))
    }

    /// (E(x), E(σ)) ↦ E([H(x) = σ]).
    pub fn eval_hash_preimage_eq(
        &self,
        preimage: &FheCiphertext,
        credential: &FheCiphertext,
    ) -> Result<(FheCiphertext, OracleRecord)> {
        let mut state = self.lock();
        let x = state.open_as(preimage, PlaintextTag::Preimage)?;
        let sigma = state.open_as(credential, PlaintextTag::Credential)?;
        let equal = derive_credential(&x) == sigma;
        let out = state.encrypt(&[u8::from(equal)], PlaintextTag::Boolean);
        state.stats.preimage_evals += 1;
        let record = state.attest(OracleRecord::EvalPreimageEq {
            preimage: preimage.digest(),
            credential: credential.digest(),
            output: out.digest(),
            attestation: [0; 64],
        });
        Ok((out, record))
    }

    pub fn threshold_decrypt(&self, ct: &FheCiphertext, approvals: &[Approval]) -> Result<(Vec<u8>, OracleRecord)> {
        let mut state = self.lock();
        let digest = ct.digest();
        let valid = count_valid_approvals(&state.public, &digest, approvals);
        if valid < state.public.threshold {
            state.stats.refusals += 1;
            state.records.push(OracleRecord::Refusal {
                ciphertext: digest,
                approvals: valid,
            });
            return Err(Error::OracleRefused(format!(
                "{valid} valid approvals, {} required",
                state.public.threshold
            )));
        }
        let (_, plaintext) = state.open(ct)?;
        state.stats.decryptions += 1;
        let record = state.attest(OracleRecord::Decrypt {
            ciphertext: digest,
            commitment: plaintext_commitment(&digest, &plaintext),
            plaintext: plaintext.clone(),
            approvals: approvals.to_vec(),
            attestation: [0; 64],
        });
        Ok((plaintext, record))
    }

    pub fn records(&self) -> Vec<OracleRecord> {
        self.lock().records.clone()
    }

    pub fn stats(&self) -> OracleStats {
        self.lock().stats
    }
}

fn keyed_hash(key: &[u8; 32], credential: &[u8]) -> Vec<u8> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("any key length");
    mac.update(credential);
    mac.finalize().into_bytes()[..DIGEST_LEN].to_vec()
}

/// Approvals from the first `t` of `keys`.
pub fn quorum_approvals(keys: &[ApprovalKey], t: usize, ct: &FheCiphertext) -> Vec<Approval> {
    keys.iter().take(t).map(|k| k.approve(ct)).collect()
}
