#![allow(dead_code)]

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skeltensor::dck::{DckExtractor, DckParams, LagBandwidth, PairMode};
use skeltensor::descriptor::dot;
use skeltensor::preprocess::{Sequence, Stage};
use skeltensor::sck::SckParams;
use skeltensor::tensor::Tensor3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coordinates uniform in `[-half, half]`, tagged with `stage`.
pub fn random_seq(
    rng: &mut ChaCha8Rng,
    joints: usize,
    frames: RangeInclusive<usize>,
    half: f64,
    stage: Stage,
) -> Sequence {
    let frames = rng.random_range(frames);
    let coords = (0..joints * frames)
        .map(|_| [0; 3].map(|_| rng.random_range(-half..=half)))
        .collect();
    Sequence::from_flat("r", 1, 1, joints, coords)
        .unwrap()
        .assume_stage(stage)
}

/// Fidelity settings: ten pivots per map, no power normalization.
pub fn sck_fidelity_params() -> SckParams {
    SckParams {
        z2: 10,
        z3: 10,
        gamma: 1.0,
        ..SckParams::default()
    }
}

pub fn dck_fidelity_params() -> DckParams {
    DckParams {
        z2: 10,
        z3: 10,
        gamma: 1.0,
        gamma_star: 1.0,
        pair_mode: PairMode::Strict,
        sigma4: LagBandwidth::Fraction(0.25),
        ..DckParams::default()
    }
}

pub fn rel_err(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs()
}

/// `|a - b| / max(|a|, |b|)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let n = dot(a, a).sqrt().max(dot(b, b).sqrt());
    if n == 0.0 {
        0.0
    } else {
        d / n
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// `(min, max)` eigenvalue of the dot-product Gram matrix.
pub fn gram_eigen_range(features: &[Vec<f64>]) -> (f64, f64) {
    let n = features.len();
    let g = DMatrix::from_fn(n, n, |a, b| dot(&features[a], &features[b]));
    let e = g.symmetric_eigen().eigenvalues;
    (e.min(), e.max())
}

/// Pair tensor by direct summation over `s > s'` of
/// `G4(s - s') phi3(x_is - x_i's') ⊗ z(s/M) ⊗ z(s'/M) / (J M)`.
pub fn dense_pair_tensor(seq: &Sequence, i: usize, ip: usize, ex: &DckExtractor) -> Tensor3 {
    let p = ex.params();
    let m = seq.frame_count();
    let lag = p.sigma4.resolve(m).unwrap();
    let (d1, z3) = (3 * p.z2, p.z3);
    let mut t = Tensor3::zeros([d1, z3, z3]);
    for s in 0..m {
        for sp in 0..s {
            let (a, b) = (seq.point(s, i), seq.point(sp, ip));
            let phi = ex.spatial_grid().feature_map_3d(ex.scaling().apply([
                a[0] - b[0],
                a[1] - b[1],
                a[2] - b[2],
            ]));
            let zs = ex.temporal_grid().feature_map((s + 1) as f64 / m as f64);
            let zsp = ex.temporal_grid().feature_map((sp + 1) as f64 / m as f64);
            let w = lag.eval((s - sp) as f64);
            for x in 0..d1 {
                for q in 0..z3 {
                    for r in 0..z3 {
                        t.add_at(x, q, r, w * phi[x] * zs[q] * zsp[r]);
                    }
                }
            }
        }
    }
    t.scale(1.0 / (seq.joint_count() * m) as f64);
    t
}
