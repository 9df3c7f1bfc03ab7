//! Identifiers and the canonical value encoding shared by every chain.
//!
//! Values travel as length-prefixed byte strings: a 1-byte type tag
//! (`0` = int64, `1` = utf8 string, `2` = raw bytes), a 4-byte big-endian
//! payload length, then the payload. Integers are 8-byte big-endian.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Identifies one simulated chain within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub u32);

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain-{}", self.0)
    }
}

/// A 20-byte account or contract address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const LEN: usize = 20;

    pub const fn new(bytes: [u8; 20]) -> Self {
        Self(bytes)
    }

    /// Deterministically derives an address from a human-readable label.
    ///
    /// The scenario seed salts the derivation, so a different seed yields a
    /// different (but still reproducible) set of addresses and therefore a
    /// different hash-based tie-break order.
    pub fn derive(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"xchain/address");
        hasher.update(seed.to_be_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        Self(out)
    }

    /// Well-known address of a system contract (distribution, invocation, gas sink).
    pub const fn system(tag: u8) -> Self {
        let mut out = [0u8; 20];
        out[19] = tag;
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl FromStr for Address {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(raw).map_err(|_| DecodeError::BadAddress(s.to_string()))?;
        let arr: [u8; 20] = bytes
            .try_into()
            .map_err(|_| DecodeError::BadAddress(s.to_string()))?;
        Ok(Self(arr))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A typed parameter or return value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    String(String),
    Bytes(#[serde(with = "hex_bytes")] Vec<u8>),
}

/// Ordered argument list of a contract call.
pub type ParamList = Vec<Value>;

const TAG_INT: u8 = 0;
const TAG_STRING: u8 = 1;
const TAG_BYTES: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated value encoding at offset {0}")]
    Truncated(usize),
    #[error("unknown value tag {0}")]
    UnknownTag(u8),
    #[error("int payload must be 8 bytes, got {0}")]
    BadIntLength(usize),
    #[error("string payload is not utf8")]
    BadUtf8,
    #[error("malformed address {0:?}")]
    BadAddress(String),
}

impl Value {
    /// Canonical tag-length-payload encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let (tag, payload): (u8, &[u8]) = match self {
            Value::Int(v) => {
                out.push(TAG_INT);
                out.extend_from_slice(&8u32.to_be_bytes());
                out.extend_from_slice(&v.to_be_bytes());
                return;
            }
            Value::String(s) => (TAG_STRING, s.as_bytes()),
            Value::Bytes(b) => (TAG_BYTES, b.as_slice()),
        };
        out.push(tag);
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(payload);
    }

    /// Decodes one value from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Value, usize), DecodeError> {
        if bytes.len() < 5 {
            return Err(DecodeError::Truncated(0));
        }
        let tag = bytes[0];
        let len = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]) as usize;
        let end = 5usize
            .checked_add(len)
            .filter(|end| *end <= bytes.len())
            .ok_or(DecodeError::Truncated(5))?;
        let payload = &bytes[5..end];
        let value = match tag {
            TAG_INT => {
                let arr: [u8; 8] = payload
                    .try_into()
                    .map_err(|_| DecodeError::BadIntLength(len))?;
                Value::Int(i64::from_be_bytes(arr))
            }
            TAG_STRING => Value::String(
                String::from_utf8(payload.to_vec()).map_err(|_| DecodeError::BadUtf8)?,
            ),
            TAG_BYTES => Value::Bytes(payload.to_vec()),
            other => return Err(DecodeError::UnknownTag(other)),
        };
        Ok((value, end))
    }

    pub fn decode(bytes: &[u8]) -> Result<Value, DecodeError> {
        let (value, used) = Value::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(DecodeError::Truncated(used));
        }
        Ok(value)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Textual rendering used when composing string results.
    pub fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::String(s) => s.clone(),
            Value::Bytes(b) => format!("0x{}", hex::encode(b)),
        }
    }
}

/// Encodes a list of values back to back.
pub fn encode_values(values: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        v.encode_into(&mut out);
    }
    out
}

pub fn decode_values(mut bytes: &[u8]) -> Result<Vec<Value>, DecodeError> {
    let mut out = Vec::new();
    let mut offset = 0;
    while !bytes.is_empty() {
        let (v, used) =
            Value::decode_prefix(bytes).map_err(|e| shift_offset(e, offset))?;
        out.push(v);
        bytes = &bytes[used..];
        offset += used;
    }
    Ok(out)
}

fn shift_offset(err: DecodeError, base: usize) -> DecodeError {
    match err {
        DecodeError::Truncated(at) => DecodeError::Truncated(base + at),
        other => other,
    }
}

/// Hex (de)serialization for byte vectors, `0x`-prefixed.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(s.strip_prefix("0x").unwrap_or(&s)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn int_encoding_is_tagged_big_endian() {
        assert_eq!(
            Value::Int(258).encode(),
            vec![0, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 1, 2]
        );
    }

    #[test]
    fn string_and_bytes_layout() {
        assert_eq!(
            Value::String("ab".into()).encode(),
            vec![1, 0, 0, 0, 2, b'a', b'b']
        );
        assert_eq!(Value::Bytes(vec![0xff]).encode(), vec![2, 0, 0, 0, 1, 0xff]);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert_eq!(Value::decode(&[9, 0, 0, 0, 0]), Err(DecodeError::UnknownTag(9)));
        assert!(matches!(Value::decode(&[1, 0, 0, 0, 4, b'a']), Err(DecodeError::Truncated(_))));
        assert_eq!(
            Value::decode(&[0, 0, 0, 0, 1, 7]),
            Err(DecodeError::BadIntLength(1))
        );
    }

    #[test]
    fn address_hex_round_trip() {
        let a = Address::derive(7, "alice");
        assert_eq!(a.to_hex().parse::<Address>().unwrap(), a);
        assert_ne!(Address::derive(8, "alice"), a);
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            ".{0,16}".prop_map(Value::String),
            proptest::collection::vec(any::<u8>(), 0..32).prop_map(Value::Bytes),
        ]
    }

    proptest! {
        #[test]
        fn value_lists_round_trip(values in proptest::collection::vec(arb_value(), 0..8)) {
            let bytes = encode_values(&values);
            prop_assert_eq!(decode_values(&bytes).unwrap(), values);
        }
    }
}
