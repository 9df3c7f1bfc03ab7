//! Canonical hashing used for deterministic winner selection.
//!
//! Inputs are concatenated as fixed-width big-endian fields and hashed with
//! SHA-256. Digests order as 256-bit big-endian integers, which is the same
//! as lexicographic byte order.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::types::Address;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "hex_digest")] pub [u8; 32]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

/// `H(invocation_id ‖ intermediary ‖ gas_price)` with 8 + 20 + 8 bytes.
pub fn offer_hash(invocation_id: u64, intermediary: &Address, gas_price: u64) -> Digest {
    let mut buf = [0u8; 36];
    buf[..8].copy_from_slice(&invocation_id.to_be_bytes());
    buf[8..28].copy_from_slice(intermediary.as_bytes());
    buf[28..].copy_from_slice(&gas_price.to_be_bytes());
    Digest(Sha256::digest(buf).into())
}

/// `H(voting_id ‖ validator)` with 8 + 20 bytes.
pub fn vote_hash(voting_id: u64, validator: &Address) -> Digest {
    let mut buf = [0u8; 28];
    buf[..8].copy_from_slice(&voting_id.to_be_bytes());
    buf[8..].copy_from_slice(validator.as_bytes());
    Digest(Sha256::digest(buf).into())
}

/// SHA-256 of arbitrary bytes, hex encoded. Used to bind traces to configs.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offer_hash_covers_all_fields() {
        let a = Address::system(1);
        let base = offer_hash(1, &a, 7);
        assert_ne!(base, offer_hash(2, &a, 7));
        assert_ne!(base, offer_hash(1, &Address::system(2), 7));
        assert_ne!(base, offer_hash(1, &a, 8));
        assert_eq!(base, offer_hash(1, &a, 7));
    }

    #[test]
    fn known_vector() {
        // sha256 of 36 zero bytes
        let d = offer_hash(0, &Address::default(), 0);
        let expected = Sha256::digest([0u8; 36]);
        assert_eq!(&d.0[..], &expected[..]);
    }

    #[test]
    fn digest_order_is_big_endian_integer_order() {
        let mut lo = [0u8; 32];
        let mut hi = [0u8; 32];
        lo[31] = 0xff;
        hi[0] = 0x01;
        assert!(Digest(lo) < Digest(hi));
    }
}
