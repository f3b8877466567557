//! Single-file MetaImage (`.mha`) reader and writer.
//!
//! A file is a block of ASCII `Key = Value` lines terminated by the
//! `ElementDataFile = LOCAL` line, followed immediately by the voxel payload,
//! raw or zlib/deflate compressed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::bufread::{DeflateDecoder, ZlibDecoder};
use flate2::write::ZlibEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::geometry::{ElementKind, ImageGeometry, Volume, VoxelData, IDENTITY_DIRECTION};

/// Keys the reader interprets. Anything else is kept in
/// [`MhaHeader::entries`] but ignored.
pub const RECOGNIZED_KEYS: &[&str] = &[
    "ObjectType",
    "NDims",
    "BinaryData",
    "BinaryDataByteOrderMSB",
    "CompressedData",
    "CompressedDataSize",
    "TransformMatrix",
    "Offset",
    "CenterOfRotation",
    "AnatomicalOrientation",
    "ElementSpacing",
    "DimSize",
    "ElementType",
    "ElementDataFile",
];

/// Ordered header entries as they appeared in the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MhaHeader {
    pub entries: Vec<(String, String)>,
}

impl MhaHeader {
    /// Value of the first entry named `key`, also accepting the format's
    /// historical aliases (`Origin`/`Position` for `Offset`, and so on).
    pub fn get(&self, key: &str) -> Option<&str> {
        let aliases: &[&str] = match key {
            "Offset" => &["Offset", "Origin", "Position"],
            "TransformMatrix" => &["TransformMatrix", "Rotation", "Orientation"],
            "BinaryDataByteOrderMSB" => &["BinaryDataByteOrderMSB", "ElementByteOrderMSB"],
            _ => return self.lookup(key),
        };
        aliases.iter().find_map(|k| self.lookup(k))
    }

    fn lookup(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Keys outside [`RECOGNIZED_KEYS`].
    pub fn unrecognized(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| !RECOGNIZED_KEYS.contains(k))
    }
}

pub fn element_type_name(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::U8 => "MET_UCHAR",
        ElementKind::I16 => "MET_SHORT",
        ElementKind::U16 => "MET_USHORT",
        ElementKind::F32 => "MET_FLOAT",
        ElementKind::F64 => "MET_DOUBLE",
    }
}

fn parse_element_type(name: &str) -> Result<ElementKind> {
    match name {
        "MET_UCHAR" => Ok(ElementKind::U8),
        "MET_SHORT" => Ok(ElementKind::I16),
        "MET_USHORT" => Ok(ElementKind::U16),
        "MET_FLOAT" => Ok(ElementKind::F32),
        "MET_DOUBLE" => Ok(ElementKind::F64),
        other => Err(Error::UnsupportedElementType(other.to_string())),
    }
}

/// Splits `bytes` into the parsed header and the payload that follows the
/// `ElementDataFile` line.
pub fn parse_header(bytes: &[u8]) -> Result<(MhaHeader, &[u8])> {
    let mut header = MhaHeader::default();
    let mut pos = 0;
    loop {
        if pos >= bytes.len() {
            return Err(Error::Header("missing ElementDataFile line".into()));
        }
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Header("header line not terminated by a line feed".into()))?;
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::Header("non-ASCII bytes in header".into()))?
            .trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Header(format!("expected `Key = Value`, got {line:?}")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Header(format!("empty key in line {line:?}")));
        }
        header.entries.push((key.to_string(), value.trim().to_string()));
        if key == "ElementDataFile" {
            return Ok((header, &bytes[pos..]));
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Header(format!("{key}: expected True/False, got {value:?}"))),
    }
}

fn parse_numbers<T: std::str::FromStr>(key: &str, value: &str, n: usize) -> Result<Vec<T>> {
    let parsed = value
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|_| Error::Header(format!("{key}: cannot parse {value:?}")))?;
    if parsed.len() != n {
        return Err(Error::Header(format!(
            "{key}: expected {n} values, found {}",
            parsed.len()
        )));
    }
    Ok(parsed)
}

fn triple(v: Vec<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Decodes a complete `.mha` byte stream.
pub fn read_mha(bytes: &[u8]) -> Result<Volume> {
    let (header, payload) = parse_header(bytes)?;
    let required = |key: &str| {
        header.get(key).ok_or_else(|| Error::Header(format!("missing required key {key}")))
    };

    if let Some(obj) = header.get("ObjectType") {
        if obj != "Image" {
            return Err(Error::Header(format!("ObjectType {obj:?} is not Image")));
        }
    }
    let ndims: usize = required("NDims")?
        .parse()
        .map_err(|_| Error::Header("NDims is not an integer".into()))?;
    if ndims != 3 {
        return Err(Error::UnsupportedNDims(ndims));
    }
    if let Some(channels) = header.get("ElementNumberOfChannels") {
        if channels != "1" {
            return Err(Error::Header(format!(
                "multi-channel images are not supported (ElementNumberOfChannels = {channels})"
            )));
        }
    }
    let data_file = required("ElementDataFile")?;
    if data_file != "LOCAL" {
        return Err(Error::ExternalDataFile(data_file.to_string()));
    }
    if let Some(v) = header.get("BinaryData") {
        if !parse_bool("BinaryData", v)? {
            return Err(Error::Header("ASCII (BinaryData = False) payloads are not supported".into()));
        }
    }
    let kind = parse_element_type(required("ElementType")?)?;

    let dims = parse_numbers::<usize>("DimSize", required("DimSize")?, 3)?;
    if dims.contains(&0) {
        return Err(Error::Header(format!("DimSize {dims:?} must be positive")));
    }
    let spacing = match header.get("ElementSpacing") {
        Some(v) => triple(parse_numbers("ElementSpacing", v, 3)?),
        None => [1.0; 3],
    };
    let offset = match header.get("Offset") {
        Some(v) => triple(parse_numbers("Offset", v, 3)?),
        None => [0.0; 3],
    };
    let direction = match header.get("TransformMatrix") {
        Some(v) => {
            // each consecutive triple is the world direction of one index axis
            let m: Vec<f64> = parse_numbers("TransformMatrix", v, 9)?;
            let mut d = [[0.0; 3]; 3];
            for (axis, col) in m.chunks_exact(3).enumerate() {
                for r in 0..3 {
                    d[r][axis] = col[r];
                }
            }
            d
        }
        None => IDENTITY_DIRECTION,
    };
    let geometry = ImageGeometry::new([dims[0], dims[1], dims[2]], spacing, offset, direction)
        .map_err(|e| Error::Header(e.to_string()))?;

    let big_endian = match header.get("BinaryDataByteOrderMSB") {
        Some(v) => parse_bool("BinaryDataByteOrderMSB", v)?,
        None => false,
    };
    let compressed = match header.get("CompressedData") {
        Some(v) => parse_bool("CompressedData", v)?,
        None => false,
    };

    let expected = geometry
        .voxel_count()
        .checked_mul(kind.size_bytes())
        .ok_or_else(|| Error::Header("image size overflows".into()))?;
    let raw = if compressed {
        let declared = match header.get("CompressedDataSize") {
            Some(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| Error::Header(format!("CompressedDataSize: cannot parse {v:?}")))?,
            ),
            None => None,
        };
        inflate(payload, declared, expected)?
    } else {
        if payload.len() < expected {
            return Err(Error::PayloadTooShort { expected, found: payload.len() });
        }
        if payload.len() > expected {
            return Err(Error::TrailingData { extra: payload.len() - expected });
        }
        payload.to_vec()
    };

    let data = decode_elements(&raw, kind, big_endian);
    Volume::new(geometry, data)
}

fn inflate(payload: &[u8], declared: Option<usize>, expected: usize) -> Result<Vec<u8>> {
    let stream = match declared {
        Some(n) if payload.len() < n => {
            return Err(Error::PayloadTooShort { expected: n, found: payload.len() })
        }
        Some(n) if payload.len() > n => return Err(Error::TrailingData { extra: payload.len() - n }),
        _ => payload,
    };
    // zlib-wrapped (RFC 1950) is what writers emit; raw deflate (RFC 1951)
    // is accepted as a fallback.
    let (out, consumed) = match decode_stream(ZlibDecoder::new(stream), expected) {
        Ok((out, rest)) => (out, stream.len() - rest),
        Err(zlib_err) => match decode_stream(DeflateDecoder::new(stream), expected) {
            Ok((out, rest)) => (out, stream.len() - rest),
            Err(_) => return Err(zlib_err),
        },
    };
    if out.len() < expected {
        return Err(Error::PayloadTooShort { expected, found: out.len() });
    }
    if out.len() > expected {
        return Err(Error::TrailingData { extra: out.len() - expected });
    }
    if consumed < stream.len() {
        return Err(Error::TrailingData { extra: stream.len() - consumed });
    }
    Ok(out)
}

/// Reads at most `expected + 1` decoded bytes; returns them together with the
/// number of compressed bytes left unread.
fn decode_stream<D>(decoder: D, expected: usize) -> Result<(Vec<u8>, usize)>
where
    D: Read + Unconsumed,
{
    let mut decoder = decoder;
    let mut out = Vec::with_capacity(expected);
    (&mut decoder)
        .take(expected as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|e| Error::Decompress(e.to_string()))?;
    Ok((out, decoder.remaining()))
}

trait Unconsumed {
    fn remaining(&self) -> usize;
}

impl Unconsumed for ZlibDecoder<&[u8]> {
    fn remaining(&self) -> usize {
        self.get_ref().len()
    }
}

impl Unconsumed for DeflateDecoder<&[u8]> {
    fn remaining(&self) -> usize {
        self.get_ref().len()
    }
}

fn decode_elements(raw: &[u8], kind: ElementKind, big_endian: bool) -> VoxelData {
    macro_rules! decode {
        ($t:ty, $n:expr) => {
            raw.chunks_exact($n)
                .map(|c| {
                    let b: [u8; $n] = c.try_into().unwrap();
                    if big_endian {
                        <$t>::from_be_bytes(b)
                    } else {
                        <$t>::from_le_bytes(b)
                    }
                })
                .collect()
        };
    }
    match kind {
        ElementKind::U8 => VoxelData::U8(raw.to_vec()),
        ElementKind::I16 => VoxelData::I16(decode!(i16, 2)),
        ElementKind::U16 => VoxelData::U16(decode!(u16, 2)),
        ElementKind::F32 => VoxelData::F32(decode!(f32, 4)),
        ElementKind::F64 => VoxelData::F64(decode!(f64, 8)),
    }
}

fn encode_elements(data: &VoxelData) -> Vec<u8> {
    match data {
        VoxelData::U8(b) => b.clone(),
        VoxelData::I16(b) => b.iter().flat_map(|v| v.to_le_bytes()).collect(),
        VoxelData::U16(b) => b.iter().flat_map(|v| v.to_le_bytes()).collect(),
        VoxelData::F32(b) => b.iter().flat_map(|v| v.to_le_bytes()).collect(),
        VoxelData::F64(b) => b.iter().flat_map(|v| v.to_le_bytes()).collect(),
    }
}

/// Space-separated shortest round-trip decimals.
fn join<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Encodes `v` with the canonical header. The payload is little-endian and,
/// when `compress` is set, zlib-wrapped.
pub fn write_mha(v: &Volume, compress: bool) -> Result<Vec<u8>> {
    let g = v.geometry();
    let raw = encode_elements(v.data());
    let payload = if compress {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw)?;
        enc.finish()?
    } else {
        raw
    };

    let d = g.direction();
    let transform = (0..3).flat_map(|axis| (0..3).map(move |r| d[r][axis]));

    let mut header = String::new();
    let mut line = |k: &str, val: String| {
        header.push_str(k);
        header.push_str(" = ");
        header.push_str(&val);
        header.push('\n');
    };
    line("ObjectType", "Image".into());
    line("NDims", "3".into());
    line("BinaryData", "True".into());
    line("BinaryDataByteOrderMSB", "False".into());
    line("CompressedData", if compress { "True" } else { "False" }.into());
    if compress {
        line("CompressedDataSize", payload.len().to_string());
    }
    line("TransformMatrix", join(transform));
    line("Offset", join(g.offset()));
    line("ElementSpacing", join(g.spacing()));
    line("DimSize", join(g.dims()));
    line("ElementType", element_type_name(v.element_kind()).into());
    line("ElementDataFile", "LOCAL".into());

    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn read_mha_file(path: impl AsRef<Path>) -> Result<Volume> {
    read_mha(&fs::read(path)?)
}

pub fn write_mha_file(path: impl AsRef<Path>, v: &Volume, compress: bool) -> Result<()> {
    fs::write(path, write_mha(v, compress)?)?;
    Ok(())
}
