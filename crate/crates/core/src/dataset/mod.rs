//! Dataset loading, evaluation protocols and synthetic data.

pub mod msr;
pub mod skt1;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Sequence;

pub use synth::{synth_actions, synth_topology, with_bursts};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub joint_count: usize,
    pub class_names: Vec<String>,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    /// Checks that all sequences share a joint count and carry labels `>= 1`.
    pub fn new(name: impl Into<String>, sequences: Vec<Sequence>) -> Result<Self> {
        let joint_count = sequences
            .first()
            .map(Sequence::joint_count)
            .ok_or_else(|| Error::invalid("dataset has no sequences"))?;
        if let Some(s) = sequences.iter().find(|s| s.joint_count() != joint_count) {
            return Err(Error::invalid(format!(
                "sequence {} has {} joints, expected {joint_count}",
                s.id,
                s.joint_count()
            )));
        }
        if let Some(s) = sequences.iter().find(|s| s.label == 0) {
            return Err(Error::invalid(format!(
                "sequence {} has label 0; labels start at 1",
                s.id
            )));
        }
        let classes = sequences.iter().map(|s| s.label).max().unwrap_or(0);
        Ok(Self {
            name: name.into(),
            joint_count,
            class_names: (1..=classes).map(|k| format!("class{k}")).collect(),
            sequences,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.sequences.iter().map(|s| s.subject).collect()
    }

    /// Sequences whose label is in `classes`, labels unchanged.
    pub fn restrict_classes(&self, name: &str, classes: &[u32]) -> Result<Self> {
        let keep: BTreeSet<u32> = classes.iter().copied().collect();
        let sequences = self
            .sequences
            .iter()
            .filter(|s| keep.contains(&s.label))
            .cloned()
            .collect();
        let mut out = Self::new(format!("{}/{name}", self.name), sequences)?;
        out.class_names = self.class_names.clone();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Skt1,
    MsrTxt,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "skt1" => Ok(Format::Skt1),
            "msr-txt" => Ok(Format::MsrTxt),
            other => Err(Error::Config(format!(
                "unknown dataset format {other:?} (skt1, msr-txt)"
            ))),
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            Format::Skt1 => "skt1",
            Format::MsrTxt => "txt",
        }
    }

    fn load_file(&self, path: &Path, joint_count: usize) -> Result<Vec<Sequence>> {
        match self {
            Format::Skt1 => skt1::load(path),
            Format::MsrTxt => msr::load(path, joint_count).map(|s| vec![s]),
        }
    }
}

/// Loads a file, a directory of files with the format's extension (sorted by
/// name), or a `.csv` manifest. `joint_count` is used by formats without a
/// joint-count header.
pub fn load_native(path: &Path, format: Format, joint_count: usize) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    if path.extension().is_some_and(|e| e == "csv") {
        return load_manifest(path, format, joint_count);
    }
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == format.extension()))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("no .{} files in directory", format.extension()),
            });
        }
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut sequences = Vec::new();
    for f in &files {
        sequences.extend(format.load_file(f, joint_count)?);
    }
    Dataset::new(name, sequences)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: u32,
    pub subject: u32,
}

/// Reads a `path,label,subject` CSV; relative paths resolve against the
/// manifest's directory and the listed label/subject override the file's own.
pub fn load_manifest(path: &Path, format: Format, joint_count: usize) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut sequences = Vec::new();
    for (row, record) in reader.deserialize::<ManifestEntry>().enumerate() {
        let entry = record.map_err(|e| csv_error(path, e))?;
        let file = base.join(&entry.path);
        let loaded = format.load_file(&file, joint_count).map_err(|e| match e {
            Error::Io { .. } | Error::Parse { .. } => e,
            other => Error::Parse {
                path: path.to_path_buf(),
                line: row + 2,
                message: other.to_string(),
            },
        })?;
        for mut seq in loaded {
            seq.label = entry.label;
            seq.subject = entry.subject;
            sequences.push(seq);
        }
    }
    let name = path
        .file_stem()
        .map_or_else(|| "manifest".into(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, sequences)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for e in entries {
        w.serialize(e).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitKind {
    CrossSubject,
    /// Cross-subject split repeated on each action set, accuracies averaged.
    SubsetAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_subjects: Vec<u32>,
    pub test_subjects: Vec<u32>,
    /// Named class lists for the subset-average protocol.
    pub subsets: Vec<(String, Vec<u32>)>,
}

impl SplitSpec {
    /// Odd subject ids train, even ids test.
    pub fn odd_even(subjects: impl IntoIterator<Item = u32>) -> Self {
        let (train, test): (Vec<u32>, Vec<u32>) = subjects.into_iter().partition(|s| s % 2 == 1);
        Self {
            kind: SplitKind::CrossSubject,
            train_subjects: train,
            test_subjects: test,
            subsets: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let train: BTreeSet<u32> = self.train_subjects.iter().copied().collect();
        if let Some(s) = self.test_subjects.iter().find(|s| train.contains(s)) {
            return Err(Error::invalid(format!(
                "subject {s} is listed for both training and testing"
            )));
        }
        if self.kind == SplitKind::SubsetAverage && self.subsets.is_empty() {
            return Err(Error::invalid(
                "subset-average protocol needs at least one action set",
            ));
        }
        Ok(())
    }
}

/// Partitions by subject; both sides sorted by sequence id so the result does
/// not depend on input order.
pub fn cross_subject_split(
    ds: &Dataset,
    spec: &SplitSpec,
) -> Result<(Vec<Sequence>, Vec<Sequence>)> {
    spec.validate()?;
    let train_set: BTreeSet<u32> = spec.train_subjects.iter().copied().collect();
    let test_set: BTreeSet<u32> = spec.test_subjects.iter().copied().collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for seq in &ds.sequences {
        if train_set.contains(&seq.subject) {
            train.push(seq.clone());
        } else if test_set.contains(&seq.subject) {
            test.push(seq.clone());
        } else {
            return Err(Error::invalid(format!(
                "subject {} of sequence {} is in neither split",
                seq.subject, seq.id
            )));
        }
    }
    sort_sequences(&mut train);
    sort_sequences(&mut test);
    Ok((train, test))
}

fn sort_sequences(seqs: &mut [Sequence]) {
    seqs.sort_by(|a, b| (&a.id, a.label, a.subject).cmp(&(&b.id, b.label, b.subject)));
}

/// Subjects of the fitting half: sorted training subject ids alternate
/// between fitting and validation, starting with fitting.
pub fn validation_fit_subjects(train: &[Sequence]) -> Result<BTreeSet<u32>> {
    let subjects: BTreeSet<u32> = train.iter().map(|s| s.subject).collect();
    if subjects.len() < 2 {
        return Err(Error::invalid(
            "validation split needs at least two training subjects",
        ));
    }
    Ok(subjects.iter().step_by(2).copied().collect())
}

/// Halves the training subjects as in [`validation_fit_subjects`].
pub fn validation_split(train: &[Sequence]) -> Result<(Vec<Sequence>, Vec<Sequence>)> {
    let fit = validation_fit_subjects(train)?;
    let (mut a, mut b): (Vec<Sequence>, Vec<Sequence>) = train
        .iter()
        .cloned()
        .partition(|s| fit.contains(&s.subject));
    sort_sequences(&mut a);
    sort_sequences(&mut b);
    Ok((a, b))
}

/// Reads `NAME id id ...` lines (`#` comments), e.g. action sets of a protocol.
pub fn parse_action_sets(text: &str, path: &Path) -> Result<Vec<(String, Vec<u32>)>> {
    let mut sets = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        let Some(name) = fields.next() else { continue };
        let ids = fields
            .map(|t| {
                t.parse::<u32>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("bad class id {t:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if ids.is_empty() || sets.insert(name.to_string(), ids).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("action set {name:?} is empty or repeated"),
            });
        }
    }
    Ok(sets.into_iter().collect())
}

pub fn load_action_sets(path: &Path) -> Result<Vec<(String, Vec<u32>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_action_sets(&text, path)
}
