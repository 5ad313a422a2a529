//! Arithmetic in the order-q subgroup of Z_p^* for a safe prime p = 2q + 1.
//!
//! Group elements and scalars are plain `BigUint`s; [`GroupParams`] carries the
//! modulus and performs every reduction. Moduli that fit in 64 bits take a
//! native `u128` path, which is what makes exhaustive and benchmark runs on
//! small groups cheap.

use std::cell::Cell;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{hex_uint, CanonicalHasher};
use crate::error::{Error, Result};

/// Bounded number of candidates tried by [`GroupParams::generate`].
pub const MAX_PARAM_ATTEMPTS: usize = 200_000;

const MODP_2048: &str = "\
    FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
    020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
    4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
    EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
    98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
    9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
    E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
    3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

thread_local! {
    static EXPONENTIATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of modular exponentiations performed on the current thread.
pub fn exponentiations() -> u64 {
    EXPONENTIATIONS.with(Cell::get)
}

fn count_exponentiation() {
    EXPONENTIATIONS.with(|c| c.set(c.get() + 1));
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawParams", into = "RawParams")]
pub struct GroupParams {
    pub p: BigUint,
    pub q: BigUint,
    pub g1: BigUint,
    pub g2: BigUint,
    small: Option<u64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawParams {
    #[serde(with = "hex_uint")]
    p: BigUint,
    #[serde(with = "hex_uint")]
    q: BigUint,
    #[serde(with = "hex_uint")]
    g1: BigUint,
    #[serde(with = "hex_uint")]
    g2: BigUint,
}

impl From<RawParams> for GroupParams {
    fn from(raw: RawParams) -> Self {
        Self::unchecked(raw.p, raw.q, raw.g1, raw.g2)
    }
}

impl From<GroupParams> for RawParams {
    fn from(params: GroupParams) -> Self {
        Self {
            p: params.p,
            q: params.q,
            g1: params.g1,
            g2: params.g2,
        }
    }
}

impl GroupParams {
    /// Validates hand-supplied parameters.
    pub fn new(p: BigUint, q: BigUint, g1: BigUint, g2: BigUint) -> Result<Self> {
        let params = Self::unchecked(p, q, g1, g2);
        params.validate()?;
        Ok(params)
    }

    fn unchecked(p: BigUint, q: BigUint, g1: BigUint, g2: BigUint) -> Self {
        let small = p.to_u64();
        Self { p, q, g1, g2, small }
    }

    /// Deterministically searches for a `bit_length`-bit safe prime and
    /// derives both generators by hashing `seed` into the subgroup.
    pub fn generate(bit_length: u64, seed: &[u8]) -> Result<Self> {
        if bit_length < 16 {
            return Err(Error::BitLength(bit_length));
        }
        let mut h = CanonicalHasher::new("jcj/params/search");
        h.u64(bit_length).bytes(seed);
        let mut rng = ChaCha20Rng::from_seed(h.finish());
        for _ in 0..MAX_PARAM_ATTEMPTS {
            let mut q = rng.gen_biguint(bit_length - 1);
            q.set_bit(bit_length - 2, true);
            q.set_bit(0, true);
            let p: BigUint = (&q << 1u32) + 1u32;
            if glass_pumpkin::prime::check_with(&q, &mut rng) && glass_pumpkin::prime::check_with(&p, &mut rng) {
                return Self::with_derived_generators(p, q, seed);
            }
        }
        Err(Error::ParameterSearch(MAX_PARAM_ATTEMPTS))
    }

    /// The 2048-bit MODP safe prime (RFC 3526 group 14) with generators
    /// derived from `seed`.
    pub fn modp_2048(seed: &[u8]) -> Result<Self> {
        let p = BigUint::parse_bytes(MODP_2048.as_bytes(), 16).expect("constant parses");
        let q = (&p - 1u32) >> 1u32;
        Self::with_derived_generators(p, q, seed)
    }

    fn with_derived_generators(p: BigUint, q: BigUint, seed: &[u8]) -> Result<Self> {
        let g1 = hash_to_subgroup(&p, "jcj/params/g1", seed);
        let mut g2 = hash_to_subgroup(&p, "jcj/params/g2", seed);
        let mut counter = 0u64;
        while g2 == g1 {
            counter += 1;
            let mut data = seed.to_vec();
            data.extend_from_slice(&counter.to_be_bytes());
            g2 = hash_to_subgroup(&p, "jcj/params/g2", &data);
        }
        let params = Self::unchecked(p, q, g1, g2);
        params.check_generators()?;
        Ok(params)
    }

    /// Full validation: primality of p and q, p = 2q + 1, generator orders.
    pub fn validate(&self) -> Result<()> {
        let mut rng = ChaCha20Rng::from_seed([7u8; 32]);
        if !glass_pumpkin::prime::check_with(&self.p, &mut rng) {
            return Err(Error::InvalidParams("p is not prime"));
        }
        if !glass_pumpkin::prime::check_with(&self.q, &mut rng) {
            return Err(Error::InvalidParams("q is not prime"));
        }
        if (&self.q << 1u32) + 1u32 != self.p {
            return Err(Error::InvalidParams("p != 2q + 1"));
        }
        self.check_generators()
    }

    fn check_generators(&self) -> Result<()> {
        for g in [&self.g1, &self.g2] {
            if g.is_one() || !self.is_element(g) {
                return Err(Error::InvalidParams("generator does not have order q"));
            }
        }
        if self.g1 == self.g2 {
            return Err(Error::InvalidParams("g1 and g2 coincide"));
        }
        Ok(())
    }

    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        count_exponentiation();
        if let (Some(m), Some(b), Some(e)) = (self.small, base.to_u64(), exp.to_u64()) {
            return BigUint::from(pow_u64(b % m, e, m));
        }
        base.modpow(exp, &self.p)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if let (Some(m), Some(x), Some(y)) = (self.small, a.to_u64(), b.to_u64()) {
            return BigUint::from(mul_u64(x, y, m));
        }
        (a * b) % &self.p
    }

    /// Inverse of a non-zero residue (Fermat).
    pub fn inv(&self, a: &BigUint) -> BigUint {
        self.pow(a, &(&self.p - 2u32))
    }

    pub fn div(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.mul(a, &self.inv(b))
    }

    /// g1^a · g2^b
    pub fn commit(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.mul(&self.pow(&self.g1, a), &self.pow(&self.g2, b))
    }

    /// Membership in the order-q subgroup.
    pub fn is_element(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.p && self.pow(x, &self.q).is_one()
    }

    pub fn check_element(&self, x: &BigUint) -> Result<()> {
        if self.is_element(x) {
            Ok(())
        } else {
            Err(Error::NotInSubgroup)
        }
    }

    pub fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_below(&self.q)
    }

    pub fn random_nonzero_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.q)
    }

    /// Uniform element of the subgroup other than the identity.
    pub fn random_element<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        let exp = self.random_nonzero_scalar(rng);
        self.pow(&self.g1, &exp)
    }

    pub fn hash_to_group(&self, domain: &str, data: &[u8]) -> BigUint {
        hash_to_subgroup(&self.p, domain, data)
    }

    pub fn scalar_add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.q
    }

    pub fn scalar_sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a % &self.q) + &self.q - (b % &self.q)) % &self.q
    }

    pub fn scalar_mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.q
    }

    pub fn scalar_inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.q - 2u32), &self.q)
    }

    /// Reduces an arbitrary integer into the scalar field.
    pub fn scalar(&self, x: impl Into<BigUint>) -> BigUint {
        x.into() % &self.q
    }
}

/// Hashes `data` to a non-identity quadratic residue modulo the safe prime
/// `p`, i.e. an element of order q. Nobody learns its discrete logarithm.
pub fn hash_to_subgroup(p: &BigUint, domain: &str, data: &[u8]) -> BigUint {
    let wanted = (p.bits() as usize + 64).div_ceil(8);
    for counter in 0u64.. {
        let mut wide = Vec::with_capacity(wanted + 32);
        let mut block = 0u64;
        while wide.len() < wanted {
            let mut h = CanonicalHasher::new(domain);
            h.bytes(data).u64(counter).u64(block);
            wide.extend_from_slice(&h.finish());
            block += 1;
        }
        wide.truncate(wanted);
        let x = BigUint::from_bytes_be(&wide) % p;
        let e = (&x * &x) % p;
        if !e.is_zero() && !e.is_one() {
            return e;
        }
    }
    unreachable!()
}

fn mul_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_u64(acc, base, m);
        }
        base = mul_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Order-independent deterministic RNG for one labelled purpose.
pub fn derive_rng(seed: u64, label: &str) -> ChaCha20Rng {
    let mut h = CanonicalHasher::new("jcj/rng");
    h.u64(seed).bytes(label.as_bytes());
    ChaCha20Rng::from_seed(h.finish())
}

/// Fresh random bytes from a seeded stream.
pub fn random_bytes<R: RngCore, const N: usize>(rng: &mut R) -> [u8; N] {
    let mut out = [0u8; N];
    rng.fill(&mut out[..]);
    out
}
