//! Two-generator ElGamal: ciphertexts (u, v, w) = (g1^r, g2^r, m·h^r) under a
//! public key h = g1^x1 · g2^x2.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::encode::{hex_uint, put_uint, CanonicalHasher};
use crate::error::{Error, Result};
use crate::group::GroupParams;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    #[serde(with = "hex_uint")]
    pub h: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub x1: BigUint,
    pub x2: BigUint,
    pub public: PublicKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(params: &GroupParams, rng: &mut R) -> Self {
        loop {
            let x1 = params.random_scalar(rng);
            let x2 = params.random_scalar(rng);
            if let Ok(pair) = Self::from_secrets(params, x1, x2) {
                return pair;
            }
        }
    }

    pub fn from_secrets(params: &GroupParams, x1: BigUint, x2: BigUint) -> Result<Self> {
        let x1 = x1 % &params.q;
        let x2 = x2 % &params.q;
        let h = params.commit(&x1, &x2);
        if h.is_one() {
            return Err(Error::DegenerateKey);
        }
        Ok(Self {
            x1,
            x2,
            public: PublicKey { h },
        })
    }

    pub fn decrypt(&self, params: &GroupParams, ct: &Ciphertext) -> BigUint {
        let mask = params.mul(&params.pow(&ct.u, &self.x1), &params.pow(&ct.v, &self.x2));
        params.div(&ct.w, &mask)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext {
    #[serde(with = "hex_uint")]
    pub u: BigUint,
    #[serde(with = "hex_uint")]
    pub v: BigUint,
    #[serde(with = "hex_uint")]
    pub w: BigUint,
}

impl Ciphertext {
    /// Trivial encryption of `m` with zero randomness.
    pub fn trivial(m: BigUint) -> Self {
        Self {
            u: BigUint::one(),
            v: BigUint::one(),
            w: m,
        }
    }

    pub fn components(&self) -> [&BigUint; 3] {
        [&self.u, &self.v, &self.w]
    }

    pub fn from_components([u, v, w]: [BigUint; 3]) -> Self {
        Self { u, v, w }
    }

    pub fn mul(&self, params: &GroupParams, other: &Self) -> Self {
        Self {
            u: params.mul(&self.u, &other.u),
            v: params.mul(&self.v, &other.v),
            w: params.mul(&self.w, &other.w),
        }
    }

    /// Componentwise quotient; encrypts m_self / m_other.
    pub fn div(&self, params: &GroupParams, other: &Self) -> Self {
        Self {
            u: params.div(&self.u, &other.u),
            v: params.div(&self.v, &other.v),
            w: params.div(&self.w, &other.w),
        }
    }

    pub fn pow(&self, params: &GroupParams, exp: &BigUint) -> Self {
        Self {
            u: params.pow(&self.u, exp),
            v: params.pow(&self.v, exp),
            w: params.pow(&self.w, exp),
        }
    }

    pub fn is_valid(&self, params: &GroupParams) -> bool {
        self.components().into_iter().all(|c| params.is_element(c))
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        for c in self.components() {
            put_uint(buf, c);
        }
    }

    pub fn absorb(&self, h: &mut CanonicalHasher) {
        h.uints(self.components());
    }

    /// SHA-256 over the canonical encoding.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = CanonicalHasher::new("jcj/ciphertext");
        self.absorb(&mut h);
        h.finish()
    }
}

impl PublicKey {
    pub fn encrypt(&self, params: &GroupParams, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        params.check_element(m)?;
        Ok(self.encrypt_unchecked(params, m, r))
    }

    /// Encryption without the subgroup check on `m`, for callers that already
    /// hold a validated element.
    pub fn encrypt_unchecked(&self, params: &GroupParams, m: &BigUint, r: &BigUint) -> Ciphertext {
        Ciphertext {
            u: params.pow(&params.g1, r),
            v: params.pow(&params.g2, r),
            w: params.mul(m, &params.pow(&self.h, r)),
        }
    }

    pub fn encrypt_random<R: RngCore + CryptoRng>(
        &self,
        params: &GroupParams,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<(Ciphertext, BigUint)> {
        let r = params.random_scalar(rng);
        Ok((self.encrypt(params, m, &r)?, r))
    }

    /// Multiplies `ct` by an encryption of the identity under randomness `r`.
    pub fn reencrypt(&self, params: &GroupParams, ct: &Ciphertext, r: &BigUint) -> Ciphertext {
        if r.is_zero() {
            return ct.clone();
        }
        let one = self.encrypt_unchecked(params, &BigUint::one(), r);
        ct.mul(params, &one)
    }
}
