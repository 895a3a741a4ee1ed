//! Wall-clock comparison of exact-kernel Gram matrices against linearized
//! descriptors plus dot-product Gram matrices.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{synth_actions, synth_topology};
use crate::dck::{dck_exact, DckExtractor, DckParams};
use crate::descriptor::dot;
use crate::error::Result;
use crate::preprocess::{hip_center, normalize_limbs, JointSubset, Sequence};
use crate::sck::{sck_exact, SckExtractor, SckParams};

/// Exact-DCK pairs timed when the full speedup Gram is extrapolated.
const SPEEDUP_PROBE_PAIRS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ExactSck,
    ExactDck,
    LinearSck,
    LinearDck,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ExactSck,
        Method::ExactDck,
        Method::LinearSck,
        Method::LinearDck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ExactSck => "exact-sck",
            Method::ExactDck => "exact-dck",
            Method::LinearSck => "linear-sck",
            Method::LinearDck => "linear-dck",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSettings {
    pub frames: Vec<usize>,
    pub sequences: usize,
    pub joints: usize,
    pub repetitions: usize,
    pub speedup_sequences: usize,
    pub speedup_frames: usize,
    pub speedup_joints: usize,
    pub seed: u64,
}

impl BenchSettings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            frames: cfg.list("bench.frames")?,
            sequences: cfg.typed("bench.sequences")?,
            joints: cfg.typed("bench.joints")?,
            repetitions: cfg.typed("bench.repetitions")?,
            speedup_sequences: cfg.typed("bench.speedup_sequences")?,
            speedup_frames: cfg.typed("bench.speedup_frames")?,
            speedup_joints: cfg.typed("bench.speedup_joints")?,
            seed: cfg.typed("seed")?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub method: Method,
    pub sequences: usize,
    pub frames: usize,
    pub joints: usize,
    /// Rows of the Gram matrix produced.
    pub gram_rows: usize,
    pub median_seconds: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Speedup {
    pub kernel: String,
    pub sequences: usize,
    pub frames: usize,
    pub joints: usize,
    pub exact_seconds: f64,
    /// Exact time extrapolated from a sample of kernel evaluations.
    pub exact_estimated: bool,
    pub linear_seconds: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub timings: Vec<Timing>,
    /// `(method, fitted log-log exponent of time in N)`.
    pub exponents: Vec<(Method, f64)>,
    pub speedups: Vec<Speedup>,
}

impl BenchReport {
    pub fn exponent(&self, method: Method) -> Option<f64> {
        self.exponents.iter().find(|e| e.0 == method).map(|e| e.1)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("method\tT\tN\tJ\trows\tmedian_s\n");
        for t in &self.timings {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\n",
                t.method.name(),
                t.sequences,
                t.frames,
                t.joints,
                t.gram_rows,
                t.median_seconds
            ));
        }
        out.push_str("\nmethod\texponent_in_N\n");
        for (m, e) in &self.exponents {
            out.push_str(&format!("{}\t{e:.3}\n", m.name()));
        }
        out.push_str("\nkernel\tT\tN\tJ\texact_s\tlinear_s\tratio\n");
        for s in &self.speedups {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.3}{}\t{:.3}\t{:.1}\n",
                s.kernel,
                s.sequences,
                s.frames,
                s.joints,
                s.exact_seconds,
                if s.exact_estimated {
                    " (estimated)"
                } else {
                    ""
                },
                s.linear_seconds,
                s.ratio
            ));
        }
        out
    }
}

pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Synthetic sequences prepared for both descriptors: raw for DCK, limb
/// normalized for SCK.
pub struct BenchData {
    pub raw: Vec<Sequence>,
    pub normalized: Vec<Sequence>,
}

pub fn bench_data(sequences: usize, joints: usize, frames: usize, seed: u64) -> Result<BenchData> {
    let ds = synth_actions(2, sequences.div_ceil(2), joints, frames, 0.05, seed)?;
    let raw: Vec<Sequence> = ds.sequences.into_iter().take(sequences).collect();
    let topology = synth_topology(joints)?;
    let centered = raw
        .iter()
        .map(|s| hip_center(s, topology.root()))
        .collect::<Result<Vec<_>>>()?;
    let topology = topology.fit_reference_lengths(&centered)?;
    let normalized = centered
        .iter()
        .map(|s| normalize_limbs(s, &topology))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchData { raw, normalized })
}

fn time<T>(f: impl FnOnce() -> Result<T>) -> Result<(f64, T)> {
    let start = Instant::now();
    let out = f()?;
    Ok((start.elapsed().as_secs_f64(), out))
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a..n).map(move |b| (a, b)))
}

fn gram_of(features: &[Vec<f64>]) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|a| features.iter().map(|b| dot(a, b)).collect())
        .collect()
}

/// Times one Gram construction; returns `(seconds, rows)`. Extractor
/// construction (pivot calibration) is not timed.
pub fn run_once(method: Method, data: &BenchData) -> Result<(f64, usize)> {
    let sck = SckParams::default();
    let dck = DckParams::default();
    let (secs, rows) = match method {
        Method::ExactSck => time(|| {
            let s = &data.normalized;
            let mut g = vec![vec![0.0; s.len()]; s.len()];
            for (a, b) in upper_pairs(s.len()) {
                let k = sck_exact(&s[a], &s[b], &sck)?;
                g[a][b] = k;
                g[b][a] = k;
            }
            Ok(g.len())
        })?,
        Method::ExactDck => time(|| {
            let s = &data.raw;
            let subset = JointSubset::all(s[0].joint_count());
            let mut g = vec![vec![0.0; s.len()]; s.len()];
            for (a, b) in upper_pairs(s.len()) {
                let k = dck_exact(&s[a], &s[b], &subset, &dck)?;
                g[a][b] = k;
                g[b][a] = k;
            }
            Ok(g.len())
        })?,
        Method::LinearSck => {
            let ex = SckExtractor::new(sck)?;
            time(|| {
                let f = data
                    .normalized
                    .iter()
                    .map(|s| Ok(ex.descriptor(s)?.values))
                    .collect::<Result<Vec<_>>>()?;
                Ok(gram_of(&f).len())
            })?
        }
        Method::LinearDck => {
            let ex = DckExtractor::new(dck)?;
            let subset = JointSubset::all(data.raw[0].joint_count());
            time(|| {
                let f = data
                    .raw
                    .iter()
                    .map(|s| Ok(ex.descriptor(s, &subset)?.values))
                    .collect::<Result<Vec<_>>>()?;
                Ok(gram_of(&f).len())
            })?
        }
    };
    Ok((secs, rows))
}

pub fn measure(method: Method, data: &BenchData, repetitions: usize) -> Result<Timing> {
    let mut samples = Vec::with_capacity(repetitions);
    let mut rows = 0;
    for _ in 0..repetitions.max(1) {
        let (s, r) = run_once(method, data)?;
        samples.push(s);
        rows = r;
    }
    Ok(Timing {
        method,
        sequences: data.raw.len(),
        frames: data.raw[0].frame_count(),
        joints: data.raw[0].joint_count(),
        gram_rows: rows,
        median_seconds: median(&samples),
        samples,
    })
}

/// Scaling sweep over `settings.frames` for every method.
pub fn scaling(settings: &BenchSettings) -> Result<(Vec<Timing>, Vec<(Method, f64)>)> {
    let mut timings = Vec::new();
    for &n in &settings.frames {
        let data = bench_data(settings.sequences, settings.joints, n, settings.seed)?;
        for m in Method::ALL {
            let t = measure(m, &data, settings.repetitions)?;
            log::info!("{} N={n}: {:.4}s", m.name(), t.median_seconds);
            timings.push(t);
        }
    }
    let x: Vec<f64> = settings.frames.iter().map(|&n| n as f64).collect();
    let exponents = Method::ALL
        .iter()
        .map(|&m| {
            let y: Vec<f64> = timings
                .iter()
                .filter(|t| t.method == m)
                .map(|t| t.median_seconds)
                .collect();
            (m, loglog_slope(&x, &y))
        })
        .collect();
    Ok((timings, exponents))
}

/// Exact against linearized Gram time at the speedup size. The exact DCK
/// Gram is extrapolated from [`SPEEDUP_PROBE_PAIRS`] timed evaluations.
pub fn speedups(settings: &BenchSettings) -> Result<Vec<Speedup>> {
    let t = settings.speedup_sequences;
    let data = bench_data(
        t,
        settings.speedup_joints,
        settings.speedup_frames,
        settings.seed,
    )?;
    let reps = settings.repetitions;
    let linear_sck = measure(Method::LinearSck, &data, reps)?.median_seconds;
    let linear_dck = measure(Method::LinearDck, &data, reps)?.median_seconds;
    let exact_sck = measure(Method::ExactSck, &data, reps)?.median_seconds;

    let pairs = t * (t + 1) / 2;
    let subset = JointSubset::all(settings.speedup_joints);
    let params = DckParams::default();
    let mut probe = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let (secs, _) = time(|| {
            for k in 0..SPEEDUP_PROBE_PAIRS {
                dck_exact(&data.raw[k % t], &data.raw[(k + 1) % t], &subset, &params)?;
            }
            Ok(())
        })?;
        probe.push(secs);
    }
    let exact_dck = median(&probe) / SPEEDUP_PROBE_PAIRS as f64 * pairs as f64;

    let row = |kernel: &str, exact: f64, estimated: bool, linear: f64| Speedup {
        kernel: kernel.to_string(),
        sequences: t,
        frames: settings.speedup_frames,
        joints: settings.speedup_joints,
        exact_seconds: exact,
        exact_estimated: estimated,
        linear_seconds: linear,
        ratio: exact / linear,
    };
    Ok(vec![
        row("sck", exact_sck, false, linear_sck),
        row("dck", exact_dck, true, linear_dck),
    ])
}

pub fn run(settings: &BenchSettings) -> Result<BenchReport> {
    let (timings, exponents) = scaling(settings)?;
    let speedups = if settings.speedup_sequences > 0 {
        speedups(settings)?
    } else {
        Vec::new()
    };
    Ok(BenchReport {
        timings,
        exponents,
        speedups,
    })
}
