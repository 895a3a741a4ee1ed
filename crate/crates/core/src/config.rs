//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default
//! (see [`KEYS`]); unknown keys are rejected. `grid.<key> = v1, v2, ...`
//! lists values swept by the grid search, where `<key>` is any known key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::{Format, SplitKind};
use crate::dck::{DckParams, LagBandwidth, PairMode};
use crate::error::{Error, Result};
use crate::sck::SckParams;
use crate::Normalization;

/// `(key, default, description)`; an empty default means unset.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "dataset.path",
        "",
        "dataset file, directory or CSV manifest",
    ),
    ("dataset.format", "skt1", "skt1 | msr-txt | synth"),
    (
        "dataset.joints",
        "20",
        "joint count for formats without a header (msr-txt)",
    ),
    (
        "dataset.topology",
        "",
        "skeleton tree file; synthetic data uses its own tree",
    ),
    (
        "dataset.hip_joint",
        "",
        "hip joint id; defaults to the topology root",
    ),
    ("synth.classes", "5", "synthetic action classes"),
    ("synth.per_class", "20", "synthetic sequences per class"),
    ("synth.joints", "8", "synthetic joints"),
    ("synth.frames", "30", "synthetic frames per sequence"),
    (
        "synth.noise",
        "0.05",
        "standard deviation of synthetic coordinate noise",
    ),
    (
        "synth.burst_repeats",
        "1",
        "times a random segment of every sequence is played",
    ),
    (
        "synth.burst_fraction",
        "0.2",
        "length of the repeated segment as a fraction of the sequence",
    ),
    (
        "split.kind",
        "cross-subject",
        "cross-subject | subset-average",
    ),
    (
        "split.train_subjects",
        "",
        "comma-separated subject ids; default odd ids",
    ),
    (
        "split.test_subjects",
        "",
        "comma-separated subject ids; default even ids",
    ),
    (
        "split.action_sets",
        "",
        "action-set file for subset-average",
    ),
    ("sck.sigma2", "0.6", "SCK position bandwidth"),
    ("sck.sigma3", "0.5", "SCK time bandwidth"),
    ("sck.z2", "5", "SCK position pivots per axis"),
    ("sck.z3", "6", "SCK time pivots"),
    ("sck.beta1", "0.5", "SCK position weight"),
    ("sck.beta2", "0.5", "SCK time weight"),
    ("sck.gamma", "0.36", "SCK power-normalization exponent"),
    ("sck.normalization", "frame-count", "frame-count | none"),
    ("dck.sigma2", "0.6", "DCK displacement bandwidth"),
    ("dck.sigma3", "0.5", "DCK time bandwidth"),
    (
        "dck.sigma4",
        "0.25M",
        "DCK lag bandwidth in frames; suffix M for a fraction of the frame count",
    ),
    ("dck.z2", "5", "DCK displacement pivots per axis"),
    ("dck.z3", "6", "DCK time pivots"),
    ("dck.gamma", "0.85", "DCK core power-normalization exponent"),
    (
        "dck.gamma_star",
        "1",
        "DCK elementwise power-normalization exponent",
    ),
    ("dck.pair_mode", "paper-size", "paper-size | strict"),
    ("dck.normalization", "frame-count", "frame-count | none"),
    (
        "dck.subset",
        "all",
        "joints fed to DCK: all, a configuration letter A-I, or ids like 1,4-15",
    ),
    ("scaling.low_percentile", "1", "percentile mapped to -1"),
    ("scaling.high_percentile", "99", "percentile mapped to +1"),
    (
        "svm.c",
        "",
        "fixed C; when unset C is chosen on the validation split",
    ),
    (
        "svm.c_grid",
        "0.1,1,10,100",
        "C values tried on the validation split",
    ),
    (
        "svm.tol",
        "1e-4",
        "relative duality gap at which the solver stops",
    ),
    ("kind", "both", "sck | dck | both"),
    ("seed", "0", "seed for synthetic data and solver order"),
    ("workers", "0", "extraction threads; 0 uses all cores"),
    ("out", "out", "output directory"),
    ("bench.frames", "8,16,32", "frame counts N for scaling fits"),
    (
        "bench.sequences",
        "6",
        "sequences per Gram matrix in scaling fits",
    ),
    ("bench.joints", "4", "joints in scaling fits"),
    (
        "bench.repetitions",
        "5",
        "timed repetitions per measurement (median reported)",
    ),
    (
        "bench.speedup_sequences",
        "100",
        "sequences T for the speedup comparison",
    ),
    (
        "bench.speedup_frames",
        "50",
        "frame count N for the speedup comparison",
    ),
    (
        "bench.speedup_joints",
        "8",
        "joints J for the speedup comparison",
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Sck,
    Dck,
    Both,
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sck" => Ok(Kind::Sck),
            "dck" => Ok(Kind::Dck),
            "both" => Ok(Kind::Both),
            other => Err(Error::Config(format!(
                "kind must be sck, dck or both, got {other:?}"
            ))),
        }
    }
}

impl Kind {
    pub fn uses_sck(&self) -> bool {
        matches!(self, Kind::Sck | Kind::Both)
    }

    pub fn uses_dck(&self) -> bool {
        matches!(self, Kind::Dck | Kind::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    grid: BTreeMap<String, Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, d, _)| (k.to_string(), d.to_string()))
                .collect(),
            grid: BTreeMap::new(),
        }
    }
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    n + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(target) = key.strip_prefix("grid.") {
            if !is_known(target) {
                return Err(Error::Config(format!("unknown grid key {target:?}")));
            }
            let values: Vec<String> = value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Error::Config(format!("grid.{target} lists no values")));
            }
            self.grid.insert(target.to_string(), values);
            return Ok(());
        }
        if !is_known(key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.get(key).is_empty()
    }

    pub fn typed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse::<T>()
            .map_err(|e| Error::Config(format!("{key} = {raw:?}: {e}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key}: bad item {s:?}: {e}")))
            })
            .collect()
    }

    pub fn grid(&self) -> &BTreeMap<String, Vec<String>> {
        &self.grid
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.is_set(key).then(|| PathBuf::from(self.get(key)))
    }

    pub fn kind(&self) -> Result<Kind> {
        self.get("kind").parse()
    }

    /// `None` for synthetic data.
    pub fn format(&self) -> Result<Option<Format>> {
        match self.get("dataset.format") {
            "synth" => Ok(None),
            f => Format::parse(f).map(Some),
        }
    }

    pub fn split_kind(&self) -> Result<SplitKind> {
        match self.get("split.kind") {
            "cross-subject" => Ok(SplitKind::CrossSubject),
            "subset-average" => Ok(SplitKind::SubsetAverage),
            other => Err(Error::Config(format!(
                "split.kind must be cross-subject or subset-average, got {other:?}"
            ))),
        }
    }

    fn normalization(&self, key: &str) -> Result<Normalization> {
        match self.get(key) {
            "frame-count" => Ok(Normalization::FrameCount),
            "none" => Ok(Normalization::None),
            other => Err(Error::Config(format!(
                "{key} must be frame-count or none, got {other:?}"
            ))),
        }
    }

    pub fn sck_params(&self) -> Result<SckParams> {
        let p = SckParams {
            sigma2: self.typed("sck.sigma2")?,
            sigma3: self.typed("sck.sigma3")?,
            z2: self.typed("sck.z2")?,
            z3: self.typed("sck.z3")?,
            beta1: self.typed("sck.beta1")?,
            beta2: self.typed("sck.beta2")?,
            gamma: self.typed("sck.gamma")?,
            normalization: self.normalization("sck.normalization")?,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn dck_params(&self) -> Result<DckParams> {
        let raw = self.get("dck.sigma4");
        let sigma4 = match raw.strip_suffix('M') {
            Some(f) => LagBandwidth::Fraction(
                f.trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("dck.sigma4 = {raw:?}: {e}")))?,
            ),
            None => LagBandwidth::Frames(self.typed("dck.sigma4")?),
        };
        let p = DckParams {
            sigma2: self.typed("dck.sigma2")?,
            sigma3: self.typed("dck.sigma3")?,
            sigma4,
            z2: self.typed("dck.z2")?,
            z3: self.typed("dck.z3")?,
            gamma: self.typed("dck.gamma")?,
            gamma_star: self.typed("dck.gamma_star")?,
            pair_mode: PairMode::parse(self.get("dck.pair_mode"))
                .map_err(|e| Error::Config(e.to_string()))?,
            normalization: self.normalization("dck.normalization")?,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    /// Every key with its resolved value, in `key = value` form.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (k, v) in &self.grid {
            let _ = writeln!(out, "grid.{k} = {}", v.join(", "));
        }
        out
    }

    /// Commented listing of all keys and defaults.
    pub fn reference() -> String {
        let mut out = String::new();
        for (k, d, doc) in KEYS {
            let _ = writeln!(out, "# {doc}\n{k} = {d}\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.sck_params().unwrap(), SckParams::default());
        assert_eq!(cfg.dck_params().unwrap(), DckParams::default());
        assert_eq!(cfg.kind().unwrap(), Kind::Both);
        assert_eq!(
            cfg.list::<f64>("svm.c_grid").unwrap(),
            vec![0.1, 1.0, 10.0, 100.0]
        );
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = RunConfig::parse(
            "# run\nsck.gamma = 1   # off\ndck.sigma4 = 3\n\ngrid.sck.gamma = 0.36, 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.sck_params().unwrap().gamma, 1.0);
        assert_eq!(cfg.dck_params().unwrap().sigma4, LagBandwidth::Frames(3.0));
        assert_eq!(cfg.grid()["sck.gamma"], vec!["0.36", "1.0"]);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "sck.gama = 1\n",
            "grid.nope = 1\n",
            "no equals sign\n",
            "grid.sck.gamma = ,\n",
        ] {
            let e = RunConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cfg = RunConfig::parse("sck.beta1 = 0.9\n").unwrap();
        assert!(matches!(cfg.sck_params(), Err(Error::Config(_))));
        let cfg = RunConfig::parse("dck.pair_mode = both\n").unwrap();
        assert!(matches!(cfg.dck_params(), Err(Error::Config(_))));
    }

    #[test]
    fn reference_lists_every_key() {
        let text = RunConfig::reference();
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
