//! One-vs-rest linear SVM over descriptor vectors.

pub mod svm;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{dot, DescriptorKind};
use crate::error::{Error, Result};
use crate::preprocess::AxisScaling;

pub use svm::SolveStats;

/// Regularization values tried by [`select_c`] by default.
pub const C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 10.0,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// Per-class weights and biases; `classes` is sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub classes: Vec<u32>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    /// Value of the constant feature carrying the bias: the root mean square
    /// norm of the training vectors.
    pub bias_feature: f64,
    pub stats: Vec<SolveStats>,
}

fn check_rows(features: &[Vec<f64>], labels: &[u32]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if let Some(k) = features.iter().position(|f| f.len() != dim) {
        return Err(Error::invalid(format!(
            "feature vector {k} has length {}, expected {dim}",
            features[k].len()
        )));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature vectors must be finite"));
    }
    Ok(dim)
}

fn sorted_classes(labels: &[u32]) -> Result<Vec<u32>> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least two classes, got {classes:?}"
        )));
    }
    Ok(classes)
}

fn rms_norm(features: &[Vec<f64>]) -> f64 {
    let mean = features.iter().map(|f| dot(f, f)).sum::<f64>() / features.len() as f64;
    if mean > 0.0 {
        mean.sqrt()
    } else {
        1.0
    }
}

/// Trains one binary problem per class in parallel; the result does not
/// depend on the thread count.
pub fn train(features: &[Vec<f64>], labels: &[u32], opts: &SvmOptions) -> Result<LinearSvm> {
    check_rows(features, labels)?;
    if !(opts.c > 0.0 && opts.c.is_finite()) || !(opts.tol > 0.0) {
        return Err(Error::invalid(format!(
            "C and tol must be positive, got {} and {}",
            opts.c, opts.tol
        )));
    }
    let classes = sorted_classes(labels)?;
    let bias_feature = rms_norm(features);
    let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    let solved: Vec<(Vec<f64>, f64, SolveStats)> = classes
        .par_iter()
        .enumerate()
        .map(|(k, &class)| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            svm::solve_linear(
                &rows,
                &y,
                bias_feature,
                opts.c,
                opts.tol,
                opts.seed.wrapping_add(k as u64),
            )
        })
        .collect();
    let mut model = LinearSvm {
        classes,
        weights: Vec::new(),
        biases: Vec::new(),
        c: opts.c,
        bias_feature,
        stats: Vec::new(),
    };
    for (w, b, s) in solved {
        model.weights.push(w);
        model.biases.push(b);
        model.stats.push(s);
    }
    Ok(model)
}

/// Index of the largest score; ties go to the lowest index.
fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, s) in scores.enumerate() {
        if s > best.1 {
            best = (k, s);
        }
    }
    best.0
}

impl LinearSvm {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "descriptor length {} does not match model length {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.classes[argmax(self.scores(x).into_iter())])
    }
}

/// One-vs-rest dual solution on a precomputed Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSvm {
    pub classes: Vec<u32>,
    /// Signed dual coefficients per class.
    pub coefficients: Vec<Vec<f64>>,
    pub bias_feature: f64,
}

pub fn train_kernel(gram: &[Vec<f64>], labels: &[u32], opts: &SvmOptions) -> Result<KernelSvm> {
    let n = labels.len();
    if gram.len() != n || gram.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(
            "Gram matrix must be square and match the label count",
        ));
    }
    let classes = sorted_classes(labels)?;
    let mean_diag = (0..n).map(|i| gram[i][i]).sum::<f64>() / n as f64;
    let bias_feature = if mean_diag > 0.0 {
        mean_diag.sqrt()
    } else {
        1.0
    };
    let coefficients = classes
        .par_iter()
        .enumerate()
        .map(|(k, &class)| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            svm::solve_kernel(
                gram,
                &y,
                bias_feature,
                opts.c,
                opts.tol,
                opts.seed.wrapping_add(k as u64),
            )
            .0
        })
        .collect();
    Ok(KernelSvm {
        classes,
        coefficients,
        bias_feature,
    })
}

impl KernelSvm {
    /// `kernel_row[i]` is the kernel between the query and training example `i`.
    pub fn predict(&self, kernel_row: &[f64]) -> u32 {
        let b2 = self.bias_feature * self.bias_feature;
        let scores = self.coefficients.iter().map(|coef| {
            coef.iter()
                .zip(kernel_row)
                .map(|(a, k)| a * (k + b2))
                .sum::<f64>()
        });
        self.classes[argmax(scores)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub total: usize,
    /// Classes indexing the confusion matrix rows (truth) and columns (prediction).
    pub classes: Vec<u32>,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
    /// Seconds per named stage.
    pub timings: BTreeMap<String, f64>,
}

pub fn evaluate(model: &LinearSvm, features: &[Vec<f64>], labels: &[u32]) -> Result<EvalReport> {
    check_rows(features, labels)?;
    let predictions = features
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(&model.classes, labels, &predictions))
}

/// Confusion matrix and accuracies over the union of model and test classes.
pub fn report(model_classes: &[u32], truth: &[u32], predicted: &[u32]) -> EvalReport {
    let mut classes: Vec<u32> = model_classes.iter().chain(truth).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let index = |c: u32| classes.binary_search(&c).expect("class present");
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[index(t)][index(p)] += 1;
    }
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = (0..k)
        .map(|i| {
            let row: u64 = confusion[i].iter().sum();
            if row == 0 {
                0.0
            } else {
                confusion[i][i] as f64 / row as f64
            }
        })
        .collect();
    EvalReport {
        accuracy: if truth.is_empty() {
            0.0
        } else {
            correct as f64 / truth.len() as f64
        },
        total: truth.len(),
        classes,
        per_class_accuracy,
        confusion,
        timings: BTreeMap::new(),
    }
}

impl EvalReport {
    pub fn confusion_table(&self) -> String {
        let mut out = String::from("truth\\pred");
        for c in &self.classes {
            let _ = write!(out, "\t{c}");
        }
        out.push_str("\tacc\n");
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{}", self.classes[i]);
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            let _ = writeln!(out, "\t{:.4}", self.per_class_accuracy[i]);
        }
        let _ = writeln!(
            out,
            "accuracy {:.4} ({} sequences)",
            self.accuracy, self.total
        );
        out
    }
}

/// Validation accuracy for each C of `grid`; the best (first on ties) is returned first.
pub fn select_c(
    fit: (&[Vec<f64>], &[u32]),
    validation: (&[Vec<f64>], &[u32]),
    grid: &[f64],
    opts: &SvmOptions,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::invalid("C grid is empty"));
    }
    let mut results = Vec::with_capacity(grid.len());
    for &c in grid {
        let model = train(fit.0, fit.1, &SvmOptions { c, ..*opts })?;
        results.push((c, evaluate(&model, validation.0, validation.1)?.accuracy));
    }
    let best = results[argmax(results.iter().map(|r| r.1))].0;
    Ok((best, results))
}

/// Everything needed to classify new sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: DescriptorKind,
    pub descriptor_len: usize,
    pub svm: LinearSvm,
    pub meta: ModelMeta,
}

/// Preprocessing state fitted on the training split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub sck_scaling: Option<AxisScaling>,
    pub dck_scaling: Option<AxisScaling>,
    pub reference_lengths: Option<Vec<f64>>,
    /// Echo of the run configuration, `key = value` lines.
    pub config: String,
}

const MODEL_MAGIC: &[u8; 4] = b"SKTM";
const MODEL_VERSION: u16 = 1;

impl TrainedModel {
    /// Layout: magic, u16 version, u8 kind, u64 descriptor length, f64 C,
    /// f64 bias feature, u32 class count, classes (u32), biases (f64),
    /// weights (f64, class-major), u64 metadata length, metadata JSON.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(match self.kind {
            DescriptorKind::Sck => 1,
            DescriptorKind::Dck => 2,
            DescriptorKind::Combined => 3,
        });
        out.extend_from_slice(&(self.descriptor_len as u64).to_le_bytes());
        out.extend_from_slice(&self.svm.c.to_le_bytes());
        out.extend_from_slice(&self.svm.bias_feature.to_le_bytes());
        out.extend_from_slice(&(self.svm.classes.len() as u32).to_le_bytes());
        self.svm
            .classes
            .iter()
            .for_each(|c| out.extend_from_slice(&c.to_le_bytes()));
        self.svm
            .biases
            .iter()
            .for_each(|b| out.extend_from_slice(&b.to_le_bytes()));
        for w in &self.svm.weights {
            w.iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::invalid(format!("model record truncated at byte {pos}")))?;
            let out = &bytes[pos..end];
            pos = end;
            Ok(out)
        };
        if take(4)? != MODEL_MAGIC {
            return Err(Error::invalid("not a model record (bad magic)"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {version}"
            )));
        }
        let kind = match take(1)?[0] {
            1 => DescriptorKind::Sck,
            2 => DescriptorKind::Dck,
            3 => DescriptorKind::Combined,
            t => return Err(Error::invalid(format!("unknown descriptor kind tag {t}"))),
        };
        let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let descriptor_len = u64_at(take(8)?) as usize;
        let c = f64_at(take(8)?);
        let bias_feature = f64_at(take(8)?);
        let k = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let classes = (0..k)
            .map(|_| Ok(u32::from_le_bytes(take(4)?.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        let biases = (0..k)
            .map(|_| Ok(f64_at(take(8)?)))
            .collect::<Result<Vec<_>>>()?;
        let weights = (0..k)
            .map(|_| {
                (0..descriptor_len)
                    .map(|_| Ok(f64_at(take(8)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let meta_len = u64_at(take(8)?) as usize;
        let meta: ModelMeta = serde_json::from_slice(take(meta_len)?)
            .map_err(|e| Error::invalid(format!("model metadata: {e}")))?;
        Ok(Self {
            kind,
            descriptor_len,
            svm: LinearSvm {
                classes,
                weights,
                biases,
                c,
                bias_feature,
                stats: Vec::new(),
            },
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three clusters on the axes of R^4, offset by `shift`.
    fn clusters(per_class: usize, shift: f64) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for class in 0..3u32 {
            for r in 0..per_class {
                let mut v = vec![shift; 4];
                v[class as usize] += 2.0;
                v[3] += ((r * 7 + class as usize) % 5) as f64 * 0.1;
                x.push(v);
                y.push(class + 1);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = clusters(6, 0.3);
        let model = train(&x, &y, &SvmOptions::default()).unwrap();
        assert_eq!(evaluate(&model, &x, &y).unwrap().accuracy, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train(&x, &[1, 1], &SvmOptions::default()).is_err());
    }

    #[test]
    fn duplication_leaves_decisions_unchanged() {
        let (x, y) = clusters(5, 0.1);
        let opts = SvmOptions {
            c: 1.0,
            tol: 1e-10,
            seed: 3,
        };
        let a = train(&x, &y, &opts).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<u32> = y.iter().chain(&y).copied().collect();
        let b = train(&x2, &y2, &opts).unwrap();
        for v in &x {
            for (sa, sb) in a.scores(v).iter().zip(b.scores(v)) {
                assert!((sa - sb).abs() <= 1e-4, "{sa} vs {sb}");
            }
        }
    }

    #[test]
    fn tiny_c_falls_back_to_majority() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in 0..10 {
            x.push(vec![k as f64 * 0.1, 1.0]);
            y.push(if k < 8 { 1 } else { 2 });
        }
        let model = train(
            &x,
            &y,
            &SvmOptions {
                c: 1e-9,
                ..SvmOptions::default()
            },
        )
        .unwrap();
        assert!(model.weights.iter().flatten().all(|w| w.abs() < 1e-6));
        assert!(x.iter().all(|v| model.predict(v).unwrap() == 1));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = clusters(4, 0.2);
        let a = train(&x, &y, &SvmOptions::default()).unwrap();
        let b = train(&x, &y, &SvmOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let model = LinearSvm {
            classes: vec![2, 5, 9],
            weights: vec![vec![0.0]; 3],
            biases: vec![0.0, 1.0, 1.0],
            c: 1.0,
            bias_feature: 1.0,
            stats: vec![],
        };
        assert_eq!(model.predict(&[3.0]).unwrap(), 5);
    }

    #[test]
    fn report_is_order_free_and_consistent() {
        let r = report(&[1, 2, 3], &[1, 1, 2, 3, 3], &[1, 2, 2, 3, 1]);
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 5);
        let trace: u64 = (0..3).map(|i| r.confusion[i][i]).sum();
        assert_eq!(trace as f64 / 5.0, r.accuracy);
        let p = report(&[1, 2, 3], &[3, 2, 3, 1, 1], &[3, 2, 1, 2, 1]);
        assert_eq!(r, p);
        assert!(r.confusion_table().contains("accuracy 0.6000"));
    }

    #[test]
    fn length_mismatch_rejected() {
        let (x, y) = clusters(3, 0.0);
        let model = train(&x, &y, &SvmOptions::default()).unwrap();
        assert!(evaluate(&model, &[vec![1.0]], &[1]).is_err());
    }

    #[test]
    fn model_roundtrip() {
        let (x, y) = clusters(3, 0.0);
        let mut svm = train(&x, &y, &SvmOptions::default()).unwrap();
        svm.stats.clear();
        let model = TrainedModel {
            kind: DescriptorKind::Combined,
            descriptor_len: 4,
            svm,
            meta: ModelMeta {
                sck_scaling: Some(AxisScaling::identity()),
                reference_lengths: Some(vec![0.5, 1.5]),
                config: "seed = 1\n".into(),
                ..ModelMeta::default()
            },
        };
        assert_eq!(TrainedModel::from_bytes(&model.to_bytes()).unwrap(), model);
        assert!(TrainedModel::from_bytes(&model.to_bytes()[..30]).is_err());
    }

    #[test]
    fn c_selection_prefers_first_best() {
        let (x, y) = clusters(4, 0.2);
        let (best, table) = select_c((&x, &y), (&x, &y), &C_GRID, &SvmOptions::default()).unwrap();
        assert_eq!(table.len(), 4);
        let top = table.iter().map(|r| r.1).fold(0.0, f64::max);
        assert_eq!(table.iter().find(|r| r.1 == top).unwrap().0, best);
    }
}
