//! MSR-Action3D skeleton text files.
//!
//! One joint per line with 3 or 4 numbers (`u v depth [confidence]` or
//! `x y z [confidence]`); the first three become the joint coordinates.
//! An optional first line `frames joints` is checked when present. Label and
//! subject come from the `aXX_sYY_eZZ` file name.

use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{Point3, Sequence};

pub const MSR_JOINTS: usize = 20;

/// `(action, subject, episode)` from a name such as `a03_s07_e02_skeleton.txt`.
pub fn parse_name(name: &str) -> Option<(u32, u32, u32)> {
    let mut parts = name.split('_');
    let mut field = |prefix: char| {
        parts
            .next()
            .and_then(|p| p.strip_prefix(prefix))
            .and_then(|p| {
                let digits = p
                    .find(|c: char| !c.is_ascii_digit())
                    .map_or(p, |end| &p[..end]);
                digits.parse::<u32>().ok()
            })
    };
    Some((field('a')?, field('s')?, field('e')?))
}

pub fn parse(text: &str, path: &Path, joint_count: usize) -> Result<Sequence> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let name = path
        .file_name()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let (label, subject, _) = parse_name(&name)
        .ok_or_else(|| err(0, format!("file name {name:?} does not match aXX_sYY_eZZ")))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| err(n + 1, format!("bad number {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if !values.is_empty() {
            rows.push((n + 1, values));
        }
    }
    let mut expected_frames = None;
    if let Some((n, first)) = rows.first() {
        if first.len() == 2 {
            let (frames, joints) = (first[0] as usize, first[1] as usize);
            if joints != joint_count {
                return Err(err(
                    *n,
                    format!("header announces {joints} joints, expected {joint_count}"),
                ));
            }
            expected_frames = Some(frames);
            rows.remove(0);
        }
    }
    let mut coords: Vec<Point3> = Vec::with_capacity(rows.len());
    for (n, v) in &rows {
        if v.len() != 3 && v.len() != 4 {
            return Err(err(*n, format!("expected 3 or 4 columns, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err(*n, "non-finite coordinate".into()));
        }
        coords.push([v[0], v[1], v[2]]);
    }
    let last = rows.last().map_or(1, |r| r.0);
    if coords.is_empty() || coords.len() % joint_count != 0 {
        return Err(err(
            last,
            format!(
                "{} joint rows is not a whole number of {joint_count}-joint frames",
                coords.len()
            ),
        ));
    }
    if let Some(frames) = expected_frames {
        if frames != coords.len() / joint_count {
            return Err(err(
                last,
                format!(
                    "header announces {frames} frames, found {}",
                    coords.len() / joint_count
                ),
            ));
        }
    }
    let id = path
        .file_stem()
        .map_or_else(|| name.clone(), |s| s.to_string_lossy().into_owned());
    Sequence::from_flat(id, label, subject, joint_count, coords).map_err(|e| err(0, e.to_string()))
}

pub fn load(path: &Path, joint_count: usize) -> Result<Sequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path, joint_count)
}
