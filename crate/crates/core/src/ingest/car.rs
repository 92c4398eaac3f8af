//! Minimal CARv1 reader/writer and CID helpers for firehose commit blocks.

use sha2::{Digest, Sha256};
use std::collections::HashMap;
use thiserror::Error;

const DAG_CBOR: u64 = 0x71;
const SHA2_256: u64 = 0x12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CarError {
    #[error("truncated varint")]
    Varint,
    #[error("truncated section: wanted {wanted} bytes, {available} left")]
    Truncated { wanted: usize, available: usize },
    #[error("malformed CID")]
    Cid,
    #[error("malformed CAR header: {0}")]
    Header(String),
}

pub fn read_varint(input: &mut &[u8]) -> Result<u64, CarError> {
    let mut value = 0u64;
    for shift in (0..64).step_by(7) {
        let (&byte, rest) = input.split_first().ok_or(CarError::Varint)?;
        *input = rest;
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(CarError::Varint)
}

pub fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn take<'a>(input: &mut &'a [u8], n: usize) -> Result<&'a [u8], CarError> {
    if input.len() < n {
        return Err(CarError::Truncated { wanted: n, available: input.len() });
    }
    let (head, rest) = input.split_at(n);
    *input = rest;
    Ok(head)
}

/// Length in bytes of the binary CID at the start of `bytes`.
pub fn cid_len(bytes: &[u8]) -> Result<usize, CarError> {
    // CIDv0 is a bare sha2-256 multihash
    if bytes.len() >= 34 && bytes[0] == 0x12 && bytes[1] == 0x20 {
        return Ok(34);
    }
    let mut cursor = bytes;
    let version = read_varint(&mut cursor)?;
    if version != 1 {
        return Err(CarError::Cid);
    }
    let _codec = read_varint(&mut cursor)?;
    let _hash = read_varint(&mut cursor)?;
    let digest = read_varint(&mut cursor)? as usize;
    take(&mut cursor, digest)?;
    Ok(bytes.len() - cursor.len())
}

/// CIDv1, dag-cbor codec, sha2-256 digest of `data`.
pub fn cid_for(data: &[u8]) -> Vec<u8> {
    let mut cid = Vec::with_capacity(36);
    write_varint(&mut cid, 1);
    write_varint(&mut cid, DAG_CBOR);
    write_varint(&mut cid, SHA2_256);
    write_varint(&mut cid, 32);
    cid.extend_from_slice(&Sha256::digest(data));
    cid
}

/// Multibase base32 (lowercase, unpadded) string form, e.g. `bafyrei...`.
pub fn cid_to_string(cid: &[u8]) -> String {
    format!("b{}", data_encoding::BASE32_NOPAD.encode(cid).to_ascii_lowercase())
}

#[derive(Debug, Default)]
pub struct CarFile {
    pub roots: Vec<Vec<u8>>,
    pub blocks: HashMap<Vec<u8>, Vec<u8>>,
}

pub fn read_car(bytes: &[u8]) -> Result<CarFile, CarError> {
    let mut input = bytes;
    let header_len = read_varint(&mut input)? as usize;
    let header = take(&mut input, header_len)?;
    let header: ciborium::Value = ciborium::de::from_reader(header).map_err(|e| CarError::Header(e.to_string()))?;
    let mut car = CarFile::default();
    let roots = header
        .as_map()
        .and_then(|m| m.iter().find(|(k, _)| k.as_text() == Some("roots")))
        .and_then(|(_, v)| v.as_array())
        .ok_or_else(|| CarError::Header("missing roots".into()))?;
    for root in roots {
        car.roots.push(link_bytes(root).ok_or(CarError::Cid)?.to_vec());
    }
    while !input.is_empty() {
        let section_len = read_varint(&mut input)? as usize;
        let mut section = take(&mut input, section_len)?;
        let cid_size = cid_len(section)?;
        let cid = take(&mut section, cid_size)?;
        car.blocks.insert(cid.to_vec(), section.to_vec());
    }
    Ok(car)
}

pub fn write_car(roots: &[Vec<u8>], blocks: &[(Vec<u8>, Vec<u8>)]) -> Vec<u8> {
    let header = ciborium::Value::Map(vec![
        (ciborium::Value::Text("roots".into()), ciborium::Value::Array(roots.iter().map(|r| link_value(r)).collect())),
        (ciborium::Value::Text("version".into()), ciborium::Value::Integer(1.into())),
    ]);
    let mut header_bytes = Vec::new();
    ciborium::ser::into_writer(&header, &mut header_bytes).expect("in-memory write");
    let mut out = Vec::new();
    write_varint(&mut out, header_bytes.len() as u64);
    out.extend_from_slice(&header_bytes);
    for (cid, data) in blocks {
        write_varint(&mut out, (cid.len() + data.len()) as u64);
        out.extend_from_slice(cid);
        out.extend_from_slice(data);
    }
    out
}

/// DAG-CBOR link: tag 42 over the CID bytes with a leading identity-multibase 0x00.
pub fn link_value(cid: &[u8]) -> ciborium::Value {
    let mut bytes = Vec::with_capacity(cid.len() + 1);
    bytes.push(0);
    bytes.extend_from_slice(cid);
    ciborium::Value::Tag(42, Box::new(ciborium::Value::Bytes(bytes)))
}

pub fn link_bytes(value: &ciborium::Value) -> Option<&[u8]> {
    match value {
        ciborium::Value::Tag(42, inner) => match inner.as_ref() {
            ciborium::Value::Bytes(b) if b.first() == Some(&0) => Some(&b[1..]),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varint_round_trip() {
        for v in [0u64, 1, 127, 128, 300, 1 << 35, u64::MAX] {
            let mut buf = Vec::new();
            write_varint(&mut buf, v);
            let mut slice = buf.as_slice();
            assert_eq!(read_varint(&mut slice).unwrap(), v);
            assert!(slice.is_empty());
        }
        assert_eq!(read_varint(&mut [0x80u8].as_slice()), Err(CarError::Varint));
    }

    #[test]
    fn car_round_trip() {
        let a = b"block a".to_vec();
        let b = b"block b".to_vec();
        let (ca, cb) = (cid_for(&a), cid_for(&b));
        assert_eq!(cid_len(&ca).unwrap(), 36);
        let car = read_car(&write_car(std::slice::from_ref(&ca), &[(ca.clone(), a.clone()), (cb.clone(), b.clone())]))
            .unwrap();
        assert_eq!(car.roots, vec![ca.clone()]);
        assert_eq!(car.blocks[&ca], a);
        assert_eq!(car.blocks[&cb], b);
        assert!(cid_to_string(&ca).starts_with("bafyrei"));
    }

    #[test]
    fn truncated_car_is_an_error() {
        let a = b"block".to_vec();
        let ca = cid_for(&a);
        let bytes = write_car(std::slice::from_ref(&ca), &[(ca.clone(), a)]);
        assert!(read_car(&bytes[..bytes.len() - 2]).is_err());
    }
}
