//! Named-tensor checkpoint container.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! [u64 header_len][header_len bytes of UTF-8 JSON][data section]
//! ```
//!
//! The JSON header maps each tensor name to
//! `{"dtype": "F32", "shape": [..], "data_offsets": [begin, end]}` with offsets
//! relative to the start of the data section, plus an optional
//! `"__metadata__"` object of string pairs. This is the same layout as the
//! `safetensors` format, so files written by common ML tooling load directly.
//!
//! Writing is canonical: keys sorted, tensors packed in name order, header
//! space-padded to a multiple of 8 bytes. Two equal checkpoints always
//! serialize to identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

const METADATA_KEY: &str = "__metadata__";
const HEADER_ALIGN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DType {
    F16,
    F32,
    F64,
    I32,
    I64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F16 => 2,
            DType::F32 | DType::I32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, DType::F16 | DType::F32 | DType::F64)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DType::F16 => "F16",
            DType::F32 => "F32",
            DType::F64 => "F64",
            DType::I32 => "I32",
            DType::I64 => "I64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "F16" => DType::F16,
            "F32" => DType::F32,
            "F64" => DType::F64,
            "I32" => DType::I32,
            "I64" => DType::I64,
            _ => return None,
        })
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One tensor: a name, an element type, a shape and little-endian row-major bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedTensor {
    name: String,
    dtype: DType,
    shape: Vec<usize>,
    data: Vec<u8>,
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::Integrity("tensor name is empty".into()));
    }
    if name.contains('\0') {
        return Err(Error::Integrity(format!("tensor name {name:?} contains a NUL byte")));
    }
    if name == METADATA_KEY {
        return Err(Error::Integrity(format!("tensor name `{METADATA_KEY}` is reserved")));
    }
    Ok(())
}

fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dtype: DType, shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let name = name.into();
        validate_name(&name)?;
        let expected = element_count(&shape)
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or_else(|| Error::Integrity(format!("tensor `{name}` shape {shape:?} overflows")))?;
        if data.len() != expected {
            return Err(Error::Integrity(format!(
                "tensor `{name}` has {} data bytes but {dtype} {shape:?} needs {expected}",
                data.len()
            )));
        }
        Ok(Self { name, dtype, shape, data })
    }

    pub fn from_f32(name: impl Into<String>, shape: Vec<usize>, values: &[f32]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(name, DType::F32, shape, data)
    }

    pub fn from_f64(name: impl Into<String>, shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(name, DType::F64, shape, data)
    }

    pub fn from_f16(name: impl Into<String>, shape: Vec<usize>, values: &[half::f16]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(name, DType::F16, shape, data)
    }

    pub fn from_i64(name: impl Into<String>, shape: Vec<usize>, values: &[i64]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(name, DType::I64, shape, data)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len() / self.dtype.size()
    }

    /// Element values widened to f64. `None` for integer tensors.
    pub fn to_f64_vec(&self) -> Option<Vec<f64>> {
        let out = match self.dtype {
            DType::F16 => self
                .data
                .chunks_exact(2)
                .map(|b| half::f16::from_le_bytes([b[0], b[1]]).to_f64())
                .collect(),
            DType::F32 => self
                .data
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
            DType::F64 => self
                .data
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
            DType::I32 | DType::I64 => return None,
        };
        Some(out)
    }

    /// Values of an F32 tensor. `None` for any other dtype.
    pub fn to_f32_vec(&self) -> Option<Vec<f32>> {
        (self.dtype == DType::F32).then(|| {
            self.data
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
    }

    /// Converts F16/F64 tensors to F32; other dtypes are returned unchanged.
    pub fn into_f32(self) -> Self {
        match self.dtype {
            DType::F16 | DType::F64 => {
                let values = self.to_f64_vec().expect("float dtype");
                let data = values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
                Self {
                    dtype: DType::F32,
                    data,
                    ..self
                }
            }
            _ => self,
        }
    }

    fn same_layout(&self, other: &NamedTensor) -> bool {
        self.dtype == other.dtype && self.shape == other.shape
    }
}

/// A set of uniquely named tensors plus free-form string metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Checkpoint {
    tensors: BTreeMap<String, NamedTensor>,
    metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor. Fails if the name is already present.
    pub fn insert(&mut self, tensor: NamedTensor) -> Result<()> {
        if self.tensors.contains_key(tensor.name()) {
            return Err(Error::Integrity(format!("duplicate tensor name `{}`", tensor.name())));
        }
        self.tensors.insert(tensor.name.clone(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    /// Tensors in lexicographic name order.
    pub fn tensors(&self) -> impl Iterator<Item = &NamedTensor> {
        self.tensors.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }
}

impl FromIterator<NamedTensor> for Result<Checkpoint> {
    fn from_iter<I: IntoIterator<Item = NamedTensor>>(iter: I) -> Self {
        let mut ckpt = Checkpoint::new();
        for t in iter {
            ckpt.insert(t)?;
        }
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Convert F16/F64 tensors to F32 while loading.
    pub cast_to_f32: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { cast_to_f32: true }
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    load_checkpoint_with(path, LoadOptions::default())
}

pub fn load_checkpoint_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes, opts)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(ckpt)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Canonical byte encoding of a checkpoint.
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut header = serde_json::Map::new();
    if !ckpt.metadata.is_empty() {
        header.insert(METADATA_KEY.into(), json!(ckpt.metadata));
    }
    let mut offset = 0usize;
    for (name, t) in &ckpt.tensors {
        validate_name(name)?;
        if name != &t.name {
            return Err(Error::Integrity(format!("tensor keyed `{name}` is named `{}`", t.name)));
        }
        let end = offset + t.data.len();
        header.insert(
            name.clone(),
            json!({ "dtype": t.dtype.as_str(), "shape": t.shape, "data_offsets": [offset, end] }),
        );
        offset = end;
    }
    let mut header_bytes = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
    while !header_bytes.len().is_multiple_of(HEADER_ALIGN) {
        header_bytes.push(b' ');
    }

    let mut out = Vec::with_capacity(8 + header_bytes.len() + offset);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for t in ckpt.tensors.values() {
        out.extend_from_slice(&t.data);
    }
    Ok(out)
}

/// JSON object read as an ordered list of entries so duplicate keys survive parsing.
struct RawHeader(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for RawHeader {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawHeader;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawHeader, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    entries.push((k, v));
                }
                Ok(RawHeader(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn byte_offset_of(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    text.len()
}

fn header_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

struct EntryLayout {
    dtype: DType,
    shape: Vec<usize>,
    begin: usize,
    end: usize,
}

fn parse_entry(name: &str, value: &Value) -> std::result::Result<EntryLayout, String> {
    let obj = value.as_object().ok_or_else(|| format!("entry `{name}` is not an object"))?;
    let dtype_str = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| format!("entry `{name}` has no string `dtype`"))?;
    let dtype = DType::parse(dtype_str).ok_or_else(|| format!("entry `{name}` has unsupported dtype `{dtype_str}`"))?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| format!("entry `{name}` has no `shape` array"))?
        .iter()
        .map(|d| d.as_u64().map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| format!("entry `{name}` has a non-integer dimension"))?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .and_then(|a| match a.as_slice() {
            [b, e] => Some((b.as_u64()? as usize, e.as_u64()? as usize)),
            _ => None,
        })
        .ok_or_else(|| format!("entry `{name}` needs `data_offsets: [begin, end]`"))?;
    if offsets.1 < offsets.0 {
        return Err(format!("entry `{name}` has data_offsets end before begin"));
    }
    Ok(EntryLayout {
        dtype,
        shape,
        begin: offsets.0,
        end: offsets.1,
    })
}

/// Parses container bytes. Errors carry byte offsets into `bytes`.
pub fn decode_checkpoint(bytes: &[u8], opts: LoadOptions) -> Result<Checkpoint> {
    if bytes.len() < 8 {
        return Err(header_error(0, format!("file is {} bytes, shorter than the 8-byte length prefix", bytes.len())));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let available = (bytes.len() - 8) as u64;
    if header_len > available {
        return Err(header_error(0, format!("header length {header_len} exceeds the {available} bytes that follow")));
    }
    let header_end = 8 + header_len as usize;
    let header_text =
        std::str::from_utf8(&bytes[8..header_end]).map_err(|e| header_error(8 + e.valid_up_to(), "header is not UTF-8"))?;
    let raw: RawHeader = serde_json::from_str(header_text)
        .map_err(|e| header_error(8 + byte_offset_of(header_text, e.line(), e.column()), e.to_string()))?;

    let data = &bytes[header_end..];
    let mut ckpt = Checkpoint::new();
    let mut ranges: Vec<(usize, usize, String)> = Vec::new();
    let mut seen = BTreeSet::new();

    for (name, value) in raw.0 {
        // Locating the key text gives a usable offset for per-entry errors.
        let entry_offset = header_text
            .find(&format!("\"{name}\""))
            .map(|p| 8 + p)
            .unwrap_or(8);
        if !seen.insert(name.clone()) {
            return Err(Error::Integrity(format!("duplicate tensor name `{name}` in header")));
        }
        if name == METADATA_KEY {
            let map = value
                .as_object()
                .ok_or_else(|| header_error(entry_offset, "`__metadata__` is not an object"))?;
            for (k, v) in map {
                let v = v
                    .as_str()
                    .ok_or_else(|| header_error(entry_offset, format!("metadata value for `{k}` is not a string")))?;
                ckpt.metadata.insert(k.clone(), v.to_owned());
            }
            continue;
        }

        let layout = parse_entry(&name, &value).map_err(|m| header_error(entry_offset, m))?;
        let expected = element_count(&layout.shape)
            .and_then(|n| n.checked_mul(layout.dtype.size()))
            .ok_or_else(|| header_error(entry_offset, format!("shape of `{name}` overflows")))?;
        let declared = layout.end - layout.begin;
        if layout.end > data.len() {
            return Err(Error::Truncated {
                name,
                expected: declared.max(expected) as u64,
                actual: data.len().saturating_sub(layout.begin) as u64,
            });
        }
        if declared < expected {
            return Err(Error::Truncated {
                name,
                expected: expected as u64,
                actual: declared as u64,
            });
        }
        if declared > expected {
            return Err(header_error(
                entry_offset,
                format!("`{name}` spans {declared} bytes but {} {:?} needs {expected}", layout.dtype, layout.shape),
            ));
        }
        ranges.push((layout.begin, layout.end, name.clone()));
        let tensor = NamedTensor::new(name, layout.dtype, layout.shape, data[layout.begin..layout.end].to_vec())?;
        let tensor = if opts.cast_to_f32 { tensor.into_f32() } else { tensor };
        ckpt.insert(tensor)?;
    }

    ranges.sort();
    for pair in ranges.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::Integrity(format!(
                "data ranges of `{}` and `{}` overlap",
                pair[0].2, pair[1].2
            )));
        }
    }
    Ok(ckpt)
}

/// Key-level comparison of two checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyDiff {
    pub only_left: BTreeSet<String>,
    pub only_right: BTreeSet<String>,
    /// Present in both, with different shape or dtype.
    pub shape_mismatched: BTreeSet<String>,
}

impl KeyDiff {
    pub fn is_empty(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty() && self.shape_mismatched.is_empty()
    }
}

pub fn diff_keys(left: &Checkpoint, right: &Checkpoint) -> KeyDiff {
    let mut diff = KeyDiff::default();
    for (name, lt) in &left.tensors {
        match right.tensors.get(name) {
            None => {
                diff.only_left.insert(name.clone());
            }
            Some(rt) if !lt.same_layout(rt) => {
                diff.shape_mismatched.insert(name.clone());
            }
            Some(_) => {}
        }
    }
    diff.only_right = right
        .tensors
        .keys()
        .filter(|k| !left.tensors.contains_key(*k))
        .cloned()
        .collect();
    diff
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert(NamedTensor::from_f32("backbone.w", vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        c.insert(NamedTensor::from_f32("bn.scale", vec![], &[0.5]).unwrap()).unwrap();
        c.insert(NamedTensor::from_i64("bn.num_batches_tracked", vec![], &[42]).unwrap())
            .unwrap();
        c.metadata_mut().insert("stage".into(), "zero-shot".into());
        c
    }

    fn container(header: &str, data: &[u8]) -> Vec<u8> {
        let mut out = (header.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn round_trip_preserves_everything() {
        let c = sample();
        let bytes = encode_checkpoint(&c).unwrap();
        let back = decode_checkpoint(&bytes, LoadOptions::default()).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn header_is_padded_and_sorted() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        assert_eq!(n % 8, 0);
        let text = std::str::from_utf8(&bytes[8..8 + n]).unwrap();
        let a = text.find("backbone.w").unwrap();
        let b = text.find("bn.scale").unwrap();
        assert!(a < b);
    }

    #[test]
    fn truncated_tensor_is_reported() {
        let header = r#"{"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}}"#;
        let err = decode_checkpoint(&container(header, &[0u8; 12]), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 16, actual: 12, .. }), "{err}");

        let header = r#"{"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,12]}}"#;
        let err = decode_checkpoint(&container(header, &[0u8; 12]), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 16, actual: 12, .. }), "{err}");
    }

    #[test]
    fn empty_container_loads() {
        let c = decode_checkpoint(&container("{}      ", &[]), LoadOptions::default()).unwrap();
        assert!(c.is_empty());
        assert_eq!(encode_checkpoint(&Checkpoint::new()).unwrap(), container("{}      ", &[]));
    }

    #[test]
    fn malformed_header_reports_offset() {
        let err = decode_checkpoint(&container("{\"w\": ", &[]), LoadOptions::default()).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert!(offset >= 8, "offset {offset}"),
            other => panic!("unexpected {other}"),
        }
        let err = decode_checkpoint(&[1, 2, 3], LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
        let mut bytes = 1000u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"{}");
        assert!(matches!(
            decode_checkpoint(&bytes, LoadOptions::default()).unwrap_err(),
            Error::Format { offset: 0, .. }
        ));
    }

    #[test]
    fn duplicate_names_are_integrity_errors() {
        let header = r#"{"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},"w":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#;
        let err = decode_checkpoint(&container(header, &[0u8; 8]), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");

        let mut c = Checkpoint::new();
        c.insert(NamedTensor::from_f32("a", vec![1], &[1.0]).unwrap()).unwrap();
        assert!(c.insert(NamedTensor::from_f32("a", vec![1], &[2.0]).unwrap()).is_err());
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let header = r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#;
        let err = decode_checkpoint(&container(header, &[0u8; 8]), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn names_are_validated() {
        assert!(NamedTensor::from_f32("", vec![1], &[1.0]).is_err());
        assert!(NamedTensor::from_f32("a\0b", vec![1], &[1.0]).is_err());
        assert!(NamedTensor::from_f32("__metadata__", vec![1], &[1.0]).is_err());
        assert!(NamedTensor::new("x", DType::F32, vec![2, 2], vec![0; 12]).is_err());
        let scalar = NamedTensor::from_f32("s", vec![], &[3.0]).unwrap();
        assert_eq!(scalar.numel(), 1);
        let empty = NamedTensor::from_f32("e", vec![0, 4], &[]).unwrap();
        assert_eq!(empty.numel(), 0);
    }

    #[test]
    fn dtype_policy_casts_by_default() {
        let mut c = Checkpoint::new();
        c.insert(NamedTensor::from_f64("d", vec![2], &[0.1, 2.0]).unwrap()).unwrap();
        c.insert(NamedTensor::from_f16("h", vec![1], &[half::f16::from_f32(1.5)]).unwrap())
            .unwrap();
        let bytes = encode_checkpoint(&c).unwrap();

        let cast = decode_checkpoint(&bytes, LoadOptions::default()).unwrap();
        assert_eq!(cast.get("d").unwrap().dtype(), DType::F32);
        assert_eq!(cast.get("d").unwrap().to_f32_vec().unwrap(), vec![0.1f32, 2.0]);
        assert_eq!(cast.get("h").unwrap().to_f32_vec().unwrap(), vec![1.5f32]);

        let raw = decode_checkpoint(&bytes, LoadOptions { cast_to_f32: false }).unwrap();
        assert_eq!(raw, c);
    }

    #[test]
    fn unknown_dtype_is_format_error() {
        let header = r#"{"q":{"dtype":"Q4","shape":[1],"data_offsets":[0,1]}}"#;
        let err = decode_checkpoint(&container(header, &[0u8; 1]), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 9, .. }), "{err:?}");
    }

    #[test]
    fn diff_keys_classifies() {
        let left = sample();
        assert!(diff_keys(&left, &left).is_empty());

        let mut right = sample();
        let mut extra = sample();
        extra
            .insert(NamedTensor::from_f32("head.cls", vec![1], &[0.0]).unwrap())
            .unwrap();
        let d = diff_keys(&extra, &right);
        assert_eq!(d.only_left, BTreeSet::from(["head.cls".to_string()]));
        assert!(d.only_right.is_empty() && d.shape_mismatched.is_empty());

        let mut l = Checkpoint::new();
        l.insert(NamedTensor::from_f32("head", vec![91, 256], &vec![0.0; 91 * 256]).unwrap())
            .unwrap();
        right = Checkpoint::new();
        right
            .insert(NamedTensor::from_f32("head", vec![2, 256], &vec![0.0; 2 * 256]).unwrap())
            .unwrap();
        let d = diff_keys(&l, &right);
        assert_eq!(d.shape_mismatched, BTreeSet::from(["head".to_string()]));
    }

    #[test]
    fn save_to_missing_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no/such/dir/ckpt.safetensors");
        let err = save_checkpoint(&sample(), &path).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
