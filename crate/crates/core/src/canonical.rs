//! Canonical JSON encoding: sorted object keys, two-space indentation,
//! trailing newline. Identical values always encode to identical bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::DecodeError;

/// Versioned document envelope written around every persisted value.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Envelope<T> {
    pub format: String,
    pub version: u32,
    pub body: T,
}

pub fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    // serde_json's default `Map` is a BTreeMap, so converting through `Value`
    // sorts every object's keys.
    serde_json::to_value(value).expect("serializable value")
}

pub fn to_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&to_value(value)).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    String::from_utf8(to_bytes(value)).expect("utf-8 json")
}

/// Single-line canonical form, used for JSONL records and wire payloads.
pub fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(&to_value(value)).expect("serializable value")
}

pub fn encode_envelope<T: Serialize>(format: &str, version: u32, body: &T) -> Vec<u8> {
    #[derive(Serialize)]
    struct Borrowed<'a, T> {
        format: &'a str,
        version: u32,
        body: &'a T,
    }
    to_bytes(&Borrowed {
        format,
        version,
        body,
    })
}

/// Decodes an envelope, checking its format tag and version. Errors name the
/// JSON path of the offending field.
pub fn decode_envelope<T: DeserializeOwned>(
    bytes: &[u8],
    format: &str,
    version: u32,
) -> Result<T, DecodeError> {
    let env: Envelope<T> = decode(bytes)?;
    if env.format != format {
        return Err(DecodeError {
            path: "format".into(),
            message: format!("expected {format:?}, found {:?}", env.format),
        });
    }
    if env.version != version {
        return Err(DecodeError {
            path: "version".into(),
            message: format!("unsupported version {} (expected {version})", env.version),
        });
    }
    Ok(env.body)
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, DecodeError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| DecodeError {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
