//! Descriptor envelope shared by SCK, DCK and their concatenation.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic    b"SKTD"
//! version  u16 (= 1)
//! kind     u8  (1 sck, 2 dck, 3 combined)
//! pairs    u8  (0 none, 1 paper-size, 2 strict)
//! joints   u32
//! z2, z3   u32, u32
//! gamma    f64
//! label    u32
//! subject  u32
//! id       u32 byte length, UTF-8 bytes
//! subset   u32 count, u32 joint ids
//! parts    u32 count, u64 part lengths
//! payload  u64 count, f64 values
//! ```
//!
//! The text form carries the same fields as `key value` lines followed by one
//! value per line, printed with shortest round-trip formatting.

use std::io::{Read, Write};
use std::path::Path;

use crate::dck::{DckDescriptor, DckParams, PairMode};
use crate::error::{Error, Result};
use crate::preprocess::Sequence;
use crate::sck::{SckDescriptor, SckParams};

const MAGIC: &[u8; 4] = b"SKTD";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DescriptorKind {
    Sck,
    Dck,
    Combined,
}

impl DescriptorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DescriptorKind::Sck => "sck",
            DescriptorKind::Dck => "dck",
            DescriptorKind::Combined => "combined",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "sck" => Ok(DescriptorKind::Sck),
            "dck" => Ok(DescriptorKind::Dck),
            "combined" => Ok(DescriptorKind::Combined),
            other => Err(Error::invalid(format!("unknown descriptor kind {other:?}"))),
        }
    }

    fn tag(&self) -> u8 {
        match self {
            DescriptorKind::Sck => 1,
            DescriptorKind::Dck => 2,
            DescriptorKind::Combined => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(DescriptorKind::Sck),
            2 => Ok(DescriptorKind::Dck),
            3 => Ok(DescriptorKind::Combined),
            t => Err(Error::invalid(format!("unknown descriptor kind tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorHeader {
    pub kind: DescriptorKind,
    pub joint_count: u32,
    pub z2: u32,
    pub z3: u32,
    pub gamma: f64,
    pub pair_mode: Option<PairMode>,
    /// Joint ids fed to DCK; empty for SCK.
    pub subset: Vec<u32>,
    /// Lengths of the concatenated parts; a single entry unless combined.
    pub parts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub sequence_id: String,
    pub label: u32,
    pub subject: u32,
    pub header: DescriptorHeader,
    pub values: Vec<f64>,
}

impl Descriptor {
    pub fn from_sck(seq: &Sequence, d: SckDescriptor, params: &SckParams) -> Self {
        Self {
            sequence_id: seq.id.clone(),
            label: seq.label,
            subject: seq.subject,
            header: DescriptorHeader {
                kind: DescriptorKind::Sck,
                joint_count: d.joint_count as u32,
                z2: params.z2 as u32,
                z3: params.z3 as u32,
                gamma: params.gamma,
                pair_mode: None,
                subset: Vec::new(),
                parts: vec![d.values.len() as u64],
            },
            values: d.values,
        }
    }

    pub fn from_dck(seq: &Sequence, d: DckDescriptor, params: &DckParams) -> Self {
        Self {
            sequence_id: seq.id.clone(),
            label: seq.label,
            subject: seq.subject,
            header: DescriptorHeader {
                kind: DescriptorKind::Dck,
                joint_count: d.subset.len() as u32,
                z2: params.z2 as u32,
                z3: params.z3 as u32,
                gamma: params.gamma,
                pair_mode: Some(d.pair_mode),
                subset: d.subset.ids().to_vec(),
                parts: vec![d.values.len() as u64],
            },
            values: d.values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(h.kind.tag());
        out.push(match h.pair_mode {
            None => 0,
            Some(PairMode::PaperSize) => 1,
            Some(PairMode::Strict) => 2,
        });
        for v in [h.joint_count, h.z2, h.z3] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&h.gamma.to_le_bytes());
        out.extend_from_slice(&self.label.to_le_bytes());
        out.extend_from_slice(&self.subject.to_le_bytes());
        out.extend_from_slice(&(self.sequence_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.sequence_id.as_bytes());
        out.extend_from_slice(&(h.subset.len() as u32).to_le_bytes());
        h.subset
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out.extend_from_slice(&(h.parts.len() as u32).to_le_bytes());
        h.parts
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        self.values
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::invalid("not a descriptor record (bad magic)"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::invalid(format!(
                "unsupported descriptor version {version}"
            )));
        }
        let kind = DescriptorKind::from_tag(r.take(1)?[0])?;
        let pair_mode = match r.take(1)?[0] {
            0 => None,
            1 => Some(PairMode::PaperSize),
            2 => Some(PairMode::Strict),
            t => return Err(Error::invalid(format!("unknown pair mode tag {t}"))),
        };
        let joint_count = r.u32()?;
        let z2 = r.u32()?;
        let z3 = r.u32()?;
        let gamma = f64::from_le_bytes(r.array()?);
        let label = r.u32()?;
        let subject = r.u32()?;
        let id_len = r.u32()? as usize;
        let sequence_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| Error::invalid("descriptor sequence id is not UTF-8"))?;
        let n = r.u32()? as usize;
        let subset = (0..n).map(|_| r.u32()).collect::<Result<_>>()?;
        let n = r.u32()? as usize;
        let parts = (0..n)
            .map(|_| Ok(u64::from_le_bytes(r.array()?)))
            .collect::<Result<_>>()?;
        let n = u64::from_le_bytes(r.array()?) as usize;
        if r.remaining() != 8 * n {
            return Err(Error::invalid(format!(
                "descriptor payload holds {} bytes, header announces {n} values",
                r.remaining()
            )));
        }
        let values = (0..n)
            .map(|_| Ok(f64::from_le_bytes(r.array()?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            sequence_id,
            label,
            subject,
            header: DescriptorHeader {
                kind,
                joint_count,
                z2,
                z3,
                gamma,
                pair_mode,
                subset,
                parts,
            },
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    /// Header lines only.
    pub fn header_text(&self) -> String {
        let h = &self.header;
        let join = |v: &[String]| {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.join(" ")
            }
        };
        format!(
            "SKTD {VERSION}\nkind {}\nsequence {}\nlabel {}\nsubject {}\njoints {}\nz2 {}\nz3 {}\ngamma {}\npair_mode {}\nsubset {}\nparts {}\nvalues {}\n",
            h.kind.name(),
            self.sequence_id,
            self.label,
            self.subject,
            h.joint_count,
            h.z2,
            h.z3,
            h.gamma,
            h.pair_mode.map_or("-", |m| m.name()),
            join(&h.subset.iter().map(u32::to_string).collect::<Vec<_>>()),
            join(&h.parts.iter().map(u64::to_string).collect::<Vec<_>>()),
            self.values.len()
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_text();
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::invalid(format!("missing `{key}` line")))?;
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            if k != key {
                return Err(Error::invalid(format!("expected `{key}`, found {line:?}")));
            }
            Ok(v.to_string())
        };
        let version = next("SKTD")?;
        if version != VERSION.to_string() {
            return Err(Error::invalid(format!(
                "unsupported descriptor version {version}"
            )));
        }
        let num = |s: String| {
            s.parse::<u32>()
                .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
        };
        let kind = DescriptorKind::parse(&next("kind")?)?;
        let sequence_id = next("sequence")?;
        let label = num(next("label")?)?;
        let subject = num(next("subject")?)?;
        let joint_count = num(next("joints")?)?;
        let z2 = num(next("z2")?)?;
        let z3 = num(next("z3")?)?;
        let gamma_text = next("gamma")?;
        let gamma = gamma_text
            .parse()
            .map_err(|e| Error::invalid(format!("bad gamma {gamma_text:?}: {e}")))?;
        let pair_mode = match next("pair_mode")?.as_str() {
            "-" => None,
            m => Some(PairMode::parse(m)?),
        };
        let list = |s: String| -> Vec<String> {
            if s == "-" {
                Vec::new()
            } else {
                s.split_whitespace().map(String::from).collect()
            }
        };
        let subset = list(next("subset")?)
            .into_iter()
            .map(num)
            .collect::<Result<_>>()?;
        let parts = list(next("parts")?)
            .into_iter()
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|e| Error::invalid(format!("bad part length {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let count = num(next("values")?)? as usize;
        let values: Vec<f64> = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad value {l:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(Error::invalid(format!(
                "expected {count} values, found {}",
                values.len()
            )));
        }
        Ok(Self {
            sequence_id,
            label,
            subject,
            header: DescriptorHeader {
                kind,
                joint_count,
                z2,
                z3,
                gamma,
                pair_mode,
                subset,
                parts,
            },
            values,
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::invalid(format!("descriptor record truncated at byte {}", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice of requested length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales to unit Euclidean norm; zero vectors are returned unchanged.
pub fn l2_normalize(values: &mut [f64]) {
    let n = dot(values, values).sqrt();
    if n > 0.0 {
        values.iter_mut().for_each(|v| *v /= n);
    }
}

/// Concatenation of the two L2-normalized descriptors, normalized again.
pub fn combine(a: &Descriptor, b: &Descriptor) -> Result<Descriptor> {
    if a.sequence_id != b.sequence_id {
        return Err(Error::invalid(format!(
            "cannot combine descriptors of sequences {:?} and {:?}",
            a.sequence_id, b.sequence_id
        )));
    }
    let mut left = a.values.clone();
    let mut right = b.values.clone();
    l2_normalize(&mut left);
    l2_normalize(&mut right);
    left.extend(right);
    l2_normalize(&mut left);
    let mut parts = a.header.parts.clone();
    parts.extend(&b.header.parts);
    let mut subset = a.header.subset.clone();
    subset.extend(&b.header.subset);
    Ok(Descriptor {
        sequence_id: a.sequence_id.clone(),
        label: a.label,
        subject: a.subject,
        header: DescriptorHeader {
            kind: DescriptorKind::Combined,
            joint_count: a.header.joint_count,
            z2: a.header.z2,
            z3: a.header.z3,
            gamma: a.header.gamma,
            pair_mode: b.header.pair_mode.or(a.header.pair_mode),
            subset,
            parts,
        },
        values: left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(len: usize) -> Descriptor {
        Descriptor {
            sequence_id: "a01_s02_e03".into(),
            label: 1,
            subject: 2,
            header: DescriptorHeader {
                kind: DescriptorKind::Dck,
                joint_count: 6,
                z2: 5,
                z3: 6,
                gamma: 0.85,
                pair_mode: Some(PairMode::PaperSize),
                subset: vec![4, 6, 7, 9, 11, 14],
                parts: vec![len as u64],
            },
            values: (0..len).map(|i| (i as f64 * 0.37).sin() / 3.0).collect(),
        }
    }

    #[test]
    fn binary_roundtrip() {
        let d = sample(17);
        assert_eq!(Descriptor::from_bytes(&d.to_bytes()).unwrap(), d);
    }

    #[test]
    fn text_roundtrip() {
        let d = sample(9);
        assert_eq!(Descriptor::from_text(&d.to_text()).unwrap(), d);
        let mut s = sample(0);
        s.header.pair_mode = None;
        s.header.subset.clear();
        assert_eq!(Descriptor::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let bytes = sample(4).to_bytes();
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(Descriptor::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn combined_lengths_add_up() {
        let a = sample(26_565);
        let b = sample(16_920);
        let c = combine(&a, &b).unwrap();
        assert_eq!(c.len(), 43_485);
        assert_eq!(c.header.parts, vec![26_565, 16_920]);
        assert!((c.norm() - 1.0).abs() <= 1e-12);
        assert_eq!(combine(&sample(40_480), &b).unwrap().len(), 57_400);
    }

    #[test]
    fn combine_with_empty_is_normalized_input() {
        let a = sample(5);
        let c = combine(&a, &sample(0)).unwrap();
        let n = a.norm();
        for (x, y) in c.values.iter().zip(&a.values) {
            assert!((x - y / n).abs() <= 1e-15);
        }
    }

    #[test]
    fn combine_rejects_other_sequences() {
        let mut b = sample(3);
        b.sequence_id = "other".into();
        assert!(combine(&sample(3), &b).is_err());
    }
}
