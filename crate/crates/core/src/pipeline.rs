//! End-to-end protocol: load, split, fit preprocessing on the training
//! split, extract descriptors, select C on a validation half, train, evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, EvalReport, ModelMeta, SvmOptions, TrainedModel};
use crate::config::{Kind, RunConfig};
use crate::dataset::{self, Dataset, SplitKind, SplitSpec};
use crate::dck::{joint_pairs, DckExtractor};
use crate::descriptor::{combine, l2_normalize, Descriptor, DescriptorKind};
use crate::error::{Error, Result};
use crate::preprocess::{
    hip_center, normalize_limbs, select_joints, AxisScaling, JointSubset, Point3, Sequence,
    SkeletonTopology,
};
use crate::sck::SckExtractor;

/// Displacements sampled per training split to fit the DCK scaling.
const DISPLACEMENT_SAMPLES: usize = 20_000;

pub struct LoadedData {
    pub dataset: Dataset,
    pub topology: Option<SkeletonTopology>,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    match cfg.format()? {
        None => {
            let joints: usize = cfg.typed("synth.joints")?;
            let seed: u64 = cfg.typed("seed")?;
            let mut ds = dataset::synth_actions(
                cfg.typed("synth.classes")?,
                cfg.typed("synth.per_class")?,
                joints,
                cfg.typed("synth.frames")?,
                cfg.typed("synth.noise")?,
                seed,
            )
            .map_err(|e| Error::Config(e.to_string()))?;
            let repeats: usize = cfg.typed("synth.burst_repeats")?;
            if repeats > 1 {
                ds = dataset::with_bursts(
                    &ds,
                    cfg.typed("synth.burst_fraction")?,
                    repeats,
                    seed.wrapping_add(1),
                )?;
            }
            Ok(LoadedData {
                dataset: ds,
                topology: Some(dataset::synth_topology(joints)?),
            })
        }
        Some(format) => {
            let path = cfg.path("dataset.path").ok_or_else(|| {
                Error::Config("dataset.path is required unless dataset.format = synth".into())
            })?;
            let dataset = dataset::load_native(&path, format, cfg.typed("dataset.joints")?)?;
            let topology = cfg
                .path("dataset.topology")
                .map(|p| SkeletonTopology::load(&p))
                .transpose()?;
            Ok(LoadedData { dataset, topology })
        }
    }
}

/// Split from `split.*` keys; subject lists default to odd/even ids.
pub fn split_spec(cfg: &RunConfig, ds: &Dataset) -> Result<SplitSpec> {
    let mut spec = SplitSpec::odd_even(ds.subjects());
    spec.kind = cfg.split_kind()?;
    if cfg.is_set("split.train_subjects") || cfg.is_set("split.test_subjects") {
        spec.train_subjects = cfg.list("split.train_subjects")?;
        spec.test_subjects = cfg.list("split.test_subjects")?;
    }
    if spec.kind == SplitKind::SubsetAverage {
        let path = cfg.path("split.action_sets").ok_or_else(|| {
            Error::Config("split.action_sets is required for subset-average".into())
        })?;
        spec.subsets = dataset::load_action_sets(&path)?;
    }
    spec.validate()?;
    Ok(spec)
}

struct SckBranch {
    extractor: SckExtractor,
    topology: SkeletonTopology,
    hip: u32,
}

impl SckBranch {
    fn prepare(&self, seq: &Sequence) -> Result<Sequence> {
        normalize_limbs(&hip_center(seq, self.hip)?, &self.topology)
    }
}

struct DckBranch {
    extractor: DckExtractor,
    subset: JointSubset,
}

/// Descriptor extractors with preprocessing state fitted on a training split.
pub struct Fitted {
    kind: Kind,
    sck: Option<SckBranch>,
    dck: Option<DckBranch>,
}

impl Fitted {
    pub fn fit(
        cfg: &RunConfig,
        topology: Option<&SkeletonTopology>,
        train: &[Sequence],
    ) -> Result<Self> {
        let kind = cfg.kind()?;
        if train.is_empty() {
            return Err(Error::invalid("training split is empty"));
        }
        let lo: f64 = cfg.typed("scaling.low_percentile")?;
        let hi: f64 = cfg.typed("scaling.high_percentile")?;
        let sck = if kind.uses_sck() {
            let topology = topology.ok_or_else(|| {
                Error::Config("SCK needs dataset.topology for limb normalization".into())
            })?;
            let hip = if cfg.is_set("dataset.hip_joint") {
                cfg.typed("dataset.hip_joint")?
            } else {
                topology.root()
            };
            let centered = train
                .iter()
                .map(|s| hip_center(s, hip))
                .collect::<Result<Vec<_>>>()?;
            let topology = topology.fit_reference_lengths(&centered)?;
            let normalized = centered
                .iter()
                .map(|s| normalize_limbs(s, &topology))
                .collect::<Result<Vec<_>>>()?;
            let points: Vec<Point3> = normalized
                .iter()
                .flat_map(|s| s.coords().iter().copied())
                .collect();
            let scaling = AxisScaling::fit_percentiles(&points, lo, hi)?;
            Some(SckBranch {
                extractor: SckExtractor::new(cfg.sck_params()?)?.with_scaling(scaling),
                topology,
                hip,
            })
        } else {
            None
        };
        let dck = if kind.uses_dck() {
            let params = cfg.dck_params()?;
            let subset = JointSubset::parse(cfg.get("dck.subset"), train[0].joint_count())?;
            let selected = train
                .iter()
                .map(|s| select_joints(s, &subset))
                .collect::<Result<Vec<_>>>()?;
            let points = sample_displacements(&selected, params.pair_mode, cfg.typed("seed")?)?;
            let scaling = AxisScaling::fit_percentiles(&points, lo, hi)?;
            Some(DckBranch {
                extractor: DckExtractor::new(params)?.with_scaling(scaling),
                subset,
            })
        } else {
            None
        };
        Ok(Self { kind, sck, dck })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Per-part and total descriptor lengths for sequences of `joint_count` joints.
    pub fn sizes(&self, joint_count: usize) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        if let Some(b) = &self.sck {
            out.insert("sck".to_string(), b.extractor.size(joint_count));
        }
        if let Some(b) = &self.dck {
            out.insert("dck".to_string(), b.extractor.size(b.subset.len()));
        }
        let total = out.values().sum();
        out.insert("total".to_string(), total);
        out
    }

    /// Unit-norm descriptor of the configured kind.
    pub fn extract(&self, seq: &Sequence) -> Result<Descriptor> {
        let sck = self
            .sck
            .as_ref()
            .map(|b| {
                let prepared = b.prepare(seq)?;
                let d = b.extractor.descriptor(&prepared)?;
                Ok::<_, Error>(Descriptor::from_sck(seq, d, b.extractor.params()))
            })
            .transpose()?;
        let dck = self
            .dck
            .as_ref()
            .map(|b| {
                let d = b.extractor.descriptor(seq, &b.subset)?;
                Ok::<_, Error>(Descriptor::from_dck(seq, d, b.extractor.params()))
            })
            .transpose()?;
        let mut out = match (sck, dck) {
            (Some(a), Some(b)) => return combine(&a, &b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("kind selects at least one descriptor"),
        };
        l2_normalize(&mut out.values);
        Ok(out)
    }

    pub fn meta(&self, cfg: &RunConfig) -> ModelMeta {
        ModelMeta {
            sck_scaling: self.sck.as_ref().map(|b| *b.extractor.scaling()),
            dck_scaling: self.dck.as_ref().map(|b| *b.extractor.scaling()),
            reference_lengths: self
                .sck
                .as_ref()
                .map(|b| b.topology.reference_lengths().to_vec()),
            config: cfg.echo(),
        }
    }

    pub fn descriptor_kind(&self) -> DescriptorKind {
        match self.kind {
            Kind::Sck => DescriptorKind::Sck,
            Kind::Dck => DescriptorKind::Dck,
            Kind::Both => DescriptorKind::Combined,
        }
    }
}

/// Deterministic sample of displacements `x_is - x_i's'` (`s > s'`) over the
/// stacked joint pairs of every sequence.
fn sample_displacements(
    seqs: &[Sequence],
    mode: crate::dck::PairMode,
    seed: u64,
) -> Result<Vec<Point3>> {
    let usable: Vec<&Sequence> = seqs.iter().filter(|s| s.frame_count() >= 2).collect();
    if usable.is_empty() {
        return Err(Error::invalid(
            "DCK needs training sequences with at least two frames",
        ));
    }
    let j = usable[0].joint_count();
    let mut pairs = joint_pairs(j, mode);
    if pairs.is_empty() {
        pairs.push((0, 0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d15b);
    Ok((0..DISPLACEMENT_SAMPLES)
        .map(|_| {
            let seq = usable[rng.random_range(0..usable.len())];
            let (i, ip) = pairs[rng.random_range(0..pairs.len())];
            let s = rng.random_range(1..seq.frame_count());
            let sp = rng.random_range(0..s);
            let (a, b) = (seq.point(s, i), seq.point(sp, ip));
            [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
        })
        .collect())
}

/// Runs `f` on a pool of `workers` threads (all cores when 0).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Descriptors in input order, extracted in parallel.
pub fn extract_all(fitted: &Fitted, seqs: &[Sequence]) -> Result<Vec<Descriptor>> {
    seqs.par_iter().map(|s| fitted.extract(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub c: f64,
    /// `(C, validation accuracy)` for every C tried.
    pub c_validation: Vec<(f64, f64)>,
    pub validation_accuracy: f64,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub dataset: String,
    pub kind: String,
    pub descriptor_sizes: BTreeMap<String, usize>,
    /// Mean over folds.
    pub accuracy: f64,
    pub validation_accuracy: f64,
    pub folds: Vec<FoldReport>,
}

pub struct FoldOutcome {
    pub report: FoldReport,
    pub model: TrainedModel,
    pub sizes: BTreeMap<String, usize>,
}

fn features(ds: &[Descriptor]) -> (Vec<Vec<f64>>, Vec<u32>) {
    (
        ds.iter().map(|d| d.values.clone()).collect(),
        ds.iter().map(|d| d.label).collect(),
    )
}

/// One cross-subject train/test run.
pub fn run_fold(
    cfg: &RunConfig,
    name: &str,
    data: &LoadedData,
    spec: &SplitSpec,
) -> Result<FoldOutcome> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |timings: &mut BTreeMap<String, f64>, stage: &str| {
        timings.insert(stage.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let (train, test) = dataset::cross_subject_split(&data.dataset, spec)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "fold {name}: empty training or test split"
        )));
    }
    let fitted = Fitted::fit(cfg, data.topology.as_ref(), &train)?;
    lap(&mut timings, "fit_preprocessing");
    let workers: usize = cfg.typed("workers")?;
    let (train_desc, test_desc) = with_workers(workers, || -> Result<_> {
        Ok((extract_all(&fitted, &train)?, extract_all(&fitted, &test)?))
    })??;
    lap(&mut timings, "extract");

    let fit_subjects = dataset::validation_fit_subjects(&train)?;
    let (fit, val): (Vec<Descriptor>, Vec<Descriptor>) = train_desc
        .iter()
        .cloned()
        .partition(|d| fit_subjects.contains(&d.subject));
    let (fit_x, fit_y) = features(&fit);
    let (val_x, val_y) = features(&val);
    let base = SvmOptions {
        c: 1.0,
        tol: cfg.typed("svm.tol")?,
        seed: cfg.typed("seed")?,
    };
    let grid: Vec<f64> = if cfg.is_set("svm.c") {
        vec![cfg.typed("svm.c")?]
    } else {
        cfg.list("svm.c_grid")?
    };
    let (c, c_validation) = classifier::select_c((&fit_x, &fit_y), (&val_x, &val_y), &grid, &base)?;
    let validation_accuracy = c_validation.iter().find(|r| r.0 == c).map_or(0.0, |r| r.1);
    lap(&mut timings, "select_c");

    let (train_x, train_y) = features(&train_desc);
    let svm = classifier::train(&train_x, &train_y, &SvmOptions { c, ..base })?;
    lap(&mut timings, "train");
    let (test_x, test_y) = features(&test_desc);
    let mut eval = classifier::evaluate(&svm, &test_x, &test_y)?;
    lap(&mut timings, "evaluate");
    eval.timings = timings;

    let sizes = fitted.sizes(data.dataset.joint_count);
    let model = TrainedModel {
        kind: fitted.descriptor_kind(),
        descriptor_len: train_x[0].len(),
        svm,
        meta: fitted.meta(cfg),
    };
    Ok(FoldOutcome {
        report: FoldReport {
            name: name.to_string(),
            train_sequences: train.len(),
            test_sequences: test.len(),
            c,
            c_validation,
            validation_accuracy,
            eval,
        },
        model,
        sizes,
    })
}

/// Full protocol: one cross-subject fold, or one fold per action set.
pub fn train_eval(
    cfg: &RunConfig,
    data: &LoadedData,
) -> Result<(ProtocolReport, Vec<FoldOutcome>)> {
    let spec = split_spec(cfg, &data.dataset)?;
    let outcomes = match spec.kind {
        SplitKind::CrossSubject => vec![run_fold(cfg, "cross-subject", data, &spec)?],
        SplitKind::SubsetAverage => spec
            .subsets
            .iter()
            .map(|(name, classes)| {
                let restricted = LoadedData {
                    dataset: data.dataset.restrict_classes(name, classes)?,
                    topology: data.topology.clone(),
                };
                run_fold(cfg, name, &restricted, &spec)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let n = outcomes.len() as f64;
    let report = ProtocolReport {
        dataset: data.dataset.name.clone(),
        kind: cfg.get("kind").to_string(),
        descriptor_sizes: outcomes[0].sizes.clone(),
        accuracy: outcomes.iter().map(|o| o.report.eval.accuracy).sum::<f64>() / n,
        validation_accuracy: outcomes
            .iter()
            .map(|o| o.report.validation_accuracy)
            .sum::<f64>()
            / n,
        folds: outcomes.iter().map(|o| o.report.clone()).collect(),
    };
    Ok((report, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub values: BTreeMap<String, String>,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub best: bool,
}

/// Cartesian sweep over `grid.*` keys; each cell runs [`train_eval`], and the
/// cell with the highest validation accuracy (first on ties) is flagged.
pub fn gridsearch(cfg: &RunConfig) -> Result<Vec<GridRow>> {
    let grid = cfg.grid();
    if grid.is_empty() {
        return Err(Error::invalid(
            "grid search needs at least one grid.<key> entry",
        ));
    }
    let keys: Vec<&String> = grid.keys().collect();
    let cells: usize = grid.values().map(Vec::len).product();
    let mut rows = Vec::with_capacity(cells);
    for cell in 0..cells {
        let mut rest = cell;
        let mut cell_cfg = cfg.clone();
        let mut values = BTreeMap::new();
        for key in keys.iter().rev() {
            let options = &grid[*key];
            let v = &options[rest % options.len()];
            rest /= options.len();
            cell_cfg.set(key, v)?;
            values.insert((*key).clone(), v.clone());
        }
        let data = load_data(&cell_cfg)?;
        let (report, _) = train_eval(&cell_cfg, &data)?;
        log::info!(
            "grid cell {values:?}: validation {:.4}, test {:.4}",
            report.validation_accuracy,
            report.accuracy
        );
        rows.push(GridRow {
            values,
            validation_accuracy: report.validation_accuracy,
            test_accuracy: report.accuracy,
            best: false,
        });
    }
    let mut best = 0;
    for (k, r) in rows.iter().enumerate() {
        if r.validation_accuracy > rows[best].validation_accuracy {
            best = k;
        }
    }
    rows[best].best = true;
    Ok(rows)
}

pub fn grid_table(rows: &[GridRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        let keys: Vec<&String> = first.values.keys().collect();
        out.push_str(
            &keys
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join("\t"),
        );
        out.push_str("\tvalidation_accuracy\ttest_accuracy\tbest\n");
        for r in rows {
            let cells: Vec<&str> = keys.iter().map(|k| r.values[*k].as_str()).collect();
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{}\n",
                cells.join("\t"),
                r.validation_accuracy,
                r.test_accuracy,
                if r.best { "*" } else { "" }
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractEntry {
    pub path: String,
    pub id: String,
    pub label: u32,
    pub subject: u32,
    pub kind: String,
    pub length: usize,
}

/// File-name-safe form of a sequence id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.#".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `path` through a sibling temporary file so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn manifest_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::invalid(format!("manifest row: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("manifest: {e}")))
}

/// Fits preprocessing on the training split, writes one descriptor file per
/// sequence under `out/descriptors`, then `out/manifest.csv`. The manifest is
/// written last, so a failed run leaves none.
pub fn extract_to_dir(cfg: &RunConfig, out: &Path) -> Result<Vec<ExtractEntry>> {
    let data = load_data(cfg)?;
    let spec = split_spec(cfg, &data.dataset)?;
    let (train, _) = dataset::cross_subject_split(&data.dataset, &spec)?;
    let fitted = Fitted::fit(cfg, data.topology.as_ref(), &train)?;
    let mut seqs = data.dataset.sequences.clone();
    seqs.sort_by(|a, b| a.id.cmp(&b.id));
    let descriptors = with_workers(cfg.typed("workers")?, || extract_all(&fitted, &seqs))??;
    let dir = out.join("descriptors");
    create_dir(&dir)?;
    let kind = cfg.get("kind").to_string();
    let mut entries = Vec::with_capacity(descriptors.len());
    for d in &descriptors {
        let rel =
            PathBuf::from("descriptors").join(format!("{}.{kind}.sktd", file_stem(&d.sequence_id)));
        d.write(&out.join(&rel))?;
        entries.push(ExtractEntry {
            path: rel.to_string_lossy().into_owned(),
            id: d.sequence_id.clone(),
            label: d.label,
            subject: d.subject,
            kind: kind.clone(),
            length: d.len(),
        });
    }
    write_atomic(&out.join("manifest.csv"), &manifest_bytes(&entries)?)?;
    Ok(entries)
}

/// Writes the configured synthetic dataset as skt1 files plus a
/// `path,label,subject` manifest and the skeleton topology.
pub fn synth_to_dir(cfg: &RunConfig, out: &Path) -> Result<Vec<dataset::ManifestEntry>> {
    let mut synth_cfg = cfg.clone();
    synth_cfg.set("dataset.format", "synth")?;
    let data = load_data(&synth_cfg)?;
    create_dir(out)?;
    let mut entries = Vec::with_capacity(data.dataset.sequences.len());
    for seq in &data.dataset.sequences {
        let name = format!("{}.skt1", file_stem(&seq.id));
        dataset::skt1::write(&out.join(&name), std::slice::from_ref(seq))?;
        entries.push(dataset::ManifestEntry {
            path: name,
            label: seq.label,
            subject: seq.subject,
        });
    }
    if let Some(t) = &data.topology {
        write_atomic(&out.join("topology.txt"), t.to_text().as_bytes())?;
    }
    write_atomic(&out.join("manifest.csv"), &manifest_bytes(&entries)?)?;
    Ok(entries)
}
