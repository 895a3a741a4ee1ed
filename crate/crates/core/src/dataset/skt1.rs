//! Native text format.
//!
//! Each record is a header line `SKT1 J M label subject` followed by `M`
//! frame lines of `3 J` whitespace-separated numbers (`x y z` per joint).
//! A file may hold several records; blank lines between records are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{Point3, Sequence};

pub fn parse(text: &str, path: &Path) -> Result<Vec<Sequence>> {
    let stem = path
        .file_stem()
        .map_or_else(|| "seq".to_string(), |s| s.to_string_lossy().into_owned());
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let mut out = Vec::new();
    let mut last_line = 0;
    while let Some((n, header)) = lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "SKT1" {
            return Err(err(
                n,
                format!("expected `SKT1 J M label subject`, got {header:?}"),
            ));
        }
        let num = |s: &str, what: &str| {
            s.parse::<u32>()
                .map_err(|e| err(n, format!("bad {what} {s:?}: {e}")))
        };
        let j = num(fields[1], "joint count")? as usize;
        let m = num(fields[2], "frame count")? as usize;
        let label = num(fields[3], "label")?;
        let subject = num(fields[4], "subject")?;
        if j == 0 || m == 0 {
            return Err(err(n, "joint and frame counts must be positive".into()));
        }
        let mut coords: Vec<Point3> = Vec::with_capacity(j * m);
        last_line = n;
        for frame in 0..m {
            let (ln, line) = lines.next().ok_or_else(|| {
                err(
                    last_line + 1,
                    format!("file ends after {frame} of {m} frames"),
                )
            })?;
            last_line = ln;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| err(ln, format!("bad number {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != 3 * j {
                return Err(err(
                    ln,
                    format!(
                        "expected {} values for {j} joints, got {}",
                        3 * j,
                        values.len()
                    ),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err(ln, "non-finite coordinate".into()));
            }
            coords.extend(values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
        }
        let id = format!("{stem}#{}", out.len());
        out.push(
            Sequence::from_flat(id, label, subject, j, coords)
                .map_err(|e| err(n, e.to_string()))?,
        );
    }
    if out.is_empty() {
        return Err(err(last_line.max(1), "no SKT1 records".into()));
    }
    if out.len() == 1 {
        out[0].id = stem;
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<Sequence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

pub fn to_text(sequences: &[Sequence]) -> String {
    let mut out = String::new();
    for seq in sequences {
        let _ = writeln!(
            out,
            "SKT1 {} {} {} {}",
            seq.joint_count(),
            seq.frame_count(),
            seq.label,
            seq.subject
        );
        for frame in seq.frames() {
            let line: Vec<String> = frame.iter().flatten().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write(path: &Path, sequences: &[Sequence]) -> Result<()> {
    std::fs::write(path, to_text(sequences)).map_err(|e| Error::io(path, e))
}
