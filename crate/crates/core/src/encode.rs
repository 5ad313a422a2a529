//! Canonical byte encoding.
//!
//! Every hash in the system (Fiat–Shamir challenges, board chaining, oracle
//! digests) is computed over this encoding, so it has to be bit-exact:
//!
//! * integers: 4-byte big-endian length, then the minimal big-endian
//!   magnitude (zero has an empty magnitude);
//! * byte strings and labels: 4-byte big-endian length, then the bytes;
//! * fixed-width counters: 8-byte big-endian.

use num_bigint::BigUint;
use num_traits::Zero;
use sha2::{Digest, Sha256};

/// Appends `x` as a length-prefixed minimal big-endian magnitude.
pub fn put_uint(buf: &mut Vec<u8>, x: &BigUint) {
    if x.is_zero() {
        put_bytes(buf, &[]);
    } else {
        put_bytes(buf, &x.to_bytes_be());
    }
}

pub fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("encoded field exceeds 4 GiB");
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(bytes);
}

pub fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_be_bytes());
}

/// Incremental SHA-256 over canonically encoded fields, opened with a
/// domain-separation tag.
#[derive(Clone)]
pub struct CanonicalHasher {
    inner: Sha256,
    scratch: Vec<u8>,
}

impl CanonicalHasher {
    pub fn new(domain: &str) -> Self {
        let mut hasher = Self {
            inner: Sha256::new(),
            scratch: Vec::with_capacity(64),
        };
        hasher.bytes(domain.as_bytes());
        hasher
    }

    pub fn uint(&mut self, x: &BigUint) -> &mut Self {
        self.scratch.clear();
        put_uint(&mut self.scratch, x);
        self.inner.update(&self.scratch);
        self
    }

    pub fn uints<'a>(&mut self, xs: impl IntoIterator<Item = &'a BigUint>) -> &mut Self {
        for x in xs {
            self.uint(x);
        }
        self
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.scratch.clear();
        put_bytes(&mut self.scratch, bytes);
        self.inner.update(&self.scratch);
        self
    }

    pub fn u64(&mut self, x: u64) -> &mut Self {
        self.inner.update(x.to_be_bytes());
        self
    }

    pub fn finish(self) -> [u8; 32] {
        self.inner.finalize().into()
    }

    /// Finishes the hash and reduces it modulo `modulus`.
    pub fn finish_mod(self, modulus: &BigUint) -> BigUint {
        BigUint::from_bytes_be(&self.finish()) % modulus
    }
}

/// Serde adapter writing a `BigUint` as a lowercase hex string.
pub mod hex_uint {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{x:x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = <&str>::deserialize(d)?;
        parse(s).ok_or_else(|| D::Error::custom(format!("invalid hex integer {s:?}")))
    }

    pub(crate) fn parse(s: &str) -> Option<BigUint> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        BigUint::parse_bytes(s.as_bytes(), 16)
    }
}

/// Serde adapter for `Vec<BigUint>` as a list of hex strings.
pub mod hex_uint_vec {
    use num_bigint::BigUint;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format!("{x:x}"))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| super::hex_uint::parse(s).ok_or_else(|| D::Error::custom(format!("invalid hex integer {s:?}"))))
            .collect()
    }
}

/// Serde adapter for byte strings as lowercase hex.
pub mod hex_bytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, T: AsRef<[u8]>>(bytes: T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: TryFrom<Vec<u8>>>(d: D) -> Result<T, D::Error> {
        let s = <&str>::deserialize(d)?;
        let bytes = hex::decode(s).map_err(D::Error::custom)?;
        T::try_from(bytes).map_err(|_| D::Error::custom("unexpected byte length"))
    }
}
