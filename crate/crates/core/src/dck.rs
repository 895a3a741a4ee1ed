//! Dynamics compatibility kernel.
//!
//! For joints `i, i'` the pair tensor collects, over frame pairs `s > s'`,
//! `G4(s - s') phi(x_is - x_i's') ⊗ z(s/M) ⊗ z(s'/M)`: how one joint moved
//! relative to another, where in the sequence, and over what lag. Only
//! displacements enter, so the descriptor ignores global translation.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::error::{Error, Result};
use crate::kernel::{gauss, PivotGrid, RbfKernel};
use crate::preprocess::{select_joints, AxisScaling, JointSubset, Point3, Sequence, Stage};
use crate::tensor::{check_exponent, hosvd, sgn_power, HosvdFactors, Tensor3};
use crate::Normalization;

/// Which joint pairs are stacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairMode {
    /// Pairs `i > i'` plus same-joint blocks restricted to the strict
    /// temporal triangle (mode-2 pivot index above the mode-3 one).
    #[default]
    PaperSize,
    /// Pairs `i > i'` only.
    Strict,
}

impl PairMode {
    pub fn name(&self) -> &'static str {
        match self {
            PairMode::PaperSize => "paper-size",
            PairMode::Strict => "strict",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper-size" => Ok(PairMode::PaperSize),
            "strict" => Ok(PairMode::Strict),
            other => Err(Error::invalid(format!("unknown pair mode {other:?}"))),
        }
    }
}

/// Bandwidth of the lag kernel `G4`, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LagBandwidth {
    /// Fraction of the sequence's frame count.
    Fraction(f64),
    Frames(f64),
}

impl LagBandwidth {
    pub fn resolve(&self, frame_count: usize) -> Result<RbfKernel> {
        match *self {
            LagBandwidth::Fraction(f) => RbfKernel::new(f * frame_count as f64),
            LagBandwidth::Frames(s) => RbfKernel::new(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DckParams {
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma4: LagBandwidth,
    pub z2: usize,
    pub z3: usize,
    pub gamma: f64,
    pub gamma_star: f64,
    pub pair_mode: PairMode,
    pub normalization: Normalization,
}

impl Default for DckParams {
    fn default() -> Self {
        Self {
            sigma2: 0.6,
            sigma3: 0.5,
            sigma4: LagBandwidth::Fraction(0.25),
            z2: 5,
            z3: 6,
            gamma: 0.85,
            gamma_star: 1.0,
            pair_mode: PairMode::PaperSize,
            normalization: Normalization::FrameCount,
        }
    }
}

impl DckParams {
    pub fn validate(&self) -> Result<()> {
        RbfKernel::new(self.sigma2)?;
        RbfKernel::new(self.sigma3)?;
        self.sigma4.resolve(1)?;
        if self.z2 == 0 || self.z3 == 0 {
            return Err(Error::invalid("DCK pivot counts must be positive"));
        }
        check_exponent("DCK gamma", self.gamma)?;
        check_exponent("DCK gamma*", self.gamma_star)
    }

    pub fn pair_dims(&self) -> [usize; 3] {
        [3 * self.z2, self.z3, self.z3]
    }
}

/// Paper-size: `3 Z2 * C(J Z3, 2)`. Strict: `3 Z2 * Z3^2 * C(J, 2)`.
pub fn dck_size(joint_count: usize, z2: usize, z3: usize, mode: PairMode) -> usize {
    match mode {
        PairMode::PaperSize => 3 * z2 * binomial(joint_count * z3, 2),
        PairMode::Strict => 3 * z2 * z3 * z3 * binomial(joint_count, 2),
    }
}

/// Stacking order: `(i, i')` lexicographic with `i' < i`, or `i' <= i` in
/// paper-size mode. Indices are positions within the selected joints.
pub fn joint_pairs(joint_count: usize, mode: PairMode) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..joint_count {
        let upper = match mode {
            PairMode::PaperSize => i + 1,
            PairMode::Strict => i,
        };
        pairs.extend((0..upper).map(|ip| (i, ip)));
    }
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct DckDescriptor {
    pub subset: JointSubset,
    pub pair_mode: PairMode,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTensor {
    pub joint_pair: (usize, usize),
    pub tensor: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DckExtractor {
    params: DckParams,
    spatial: PivotGrid,
    temporal: PivotGrid,
    scaling: AxisScaling,
}

impl DckExtractor {
    pub fn new(params: DckParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            spatial: PivotGrid::calibrated(params.z2, -1.0, 1.0, params.sigma2)?,
            temporal: PivotGrid::calibrated(params.z3, 0.0, 1.0, params.sigma3)?,
            scaling: AxisScaling::identity(),
        })
    }

    /// Scaling applied to displacements `x_is - x_i's'`.
    pub fn with_scaling(mut self, scaling: AxisScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn params(&self) -> &DckParams {
        &self.params
    }

    pub fn spatial_grid(&self) -> &PivotGrid {
        &self.spatial
    }

    pub fn temporal_grid(&self) -> &PivotGrid {
        &self.temporal
    }

    pub fn scaling(&self) -> &AxisScaling {
        &self.scaling
    }

    pub fn size(&self, joint_count: usize) -> usize {
        dck_size(
            joint_count,
            self.params.z2,
            self.params.z3,
            self.params.pair_mode,
        )
    }

    /// Normalized sum over `s > s'` for joints `i` (later frame) and `ip` (earlier frame).
    pub fn pair_tensor(&self, seq: &Sequence, i: usize, ip: usize) -> Result<PairTensor> {
        check_input(seq)?;
        let j = seq.joint_count();
        if i >= j || ip >= j {
            return Err(Error::invalid(format!(
                "joint pair ({i}, {ip}) out of range for {j} joints"
            )));
        }
        let m = seq.frame_count();
        let times = self.time_maps(m);
        let lag = self.params.sigma4.resolve(m)?;
        let mut t = self.accumulate(seq, i, ip, &times, &lag);
        if self.params.normalization == Normalization::FrameCount {
            t.scale(1.0 / (j * m) as f64);
        }
        Ok(PairTensor {
            joint_pair: (i, ip),
            tensor: t,
        })
    }

    fn time_maps(&self, m: usize) -> Vec<Vec<f64>> {
        (1..=m)
            .map(|s| self.temporal.feature_map(s as f64 / m as f64))
            .collect()
    }

    fn accumulate(
        &self,
        seq: &Sequence,
        i: usize,
        ip: usize,
        times: &[Vec<f64>],
        lag: &RbfKernel,
    ) -> Tensor3 {
        let [d1, z3, _] = self.params.pair_dims();
        let m = seq.frame_count();
        let mut t = Tensor3::zeros([d1, z3, z3]);
        let mut phi = vec![0.0; d1];
        // a[x + d1 p] = sum over later frames s of G4(s - s') phi(x_is - x_i's')[x] z(s)[p]
        let mut a = vec![0.0; d1 * z3];
        for sp in 0..m.saturating_sub(1) {
            a.iter_mut().for_each(|v| *v = 0.0);
            let earlier = seq.point(sp, ip);
            for s in sp + 1..m {
                let w = lag.eval((s - sp) as f64);
                self.spatial.feature_map_3d_into(
                    self.scaling.apply(sub(seq.point(s, i), earlier)),
                    &mut phi,
                );
                for (col, &zp) in a.chunks_exact_mut(d1).zip(&times[s]) {
                    let wz = w * zp;
                    for (dst, &f) in col.iter_mut().zip(&phi) {
                        *dst += wz * f;
                    }
                }
            }
            for (slab, &zq) in t.data_mut().chunks_exact_mut(d1 * z3).zip(&times[sp]) {
                for (dst, &v) in slab.iter_mut().zip(&a) {
                    *dst += zq * v;
                }
            }
        }
        t
    }

    /// Restricts to `subset`, then stacks the power-normalized pair tensors.
    /// Normalization is skipped when `gamma = gamma* = 1`.
    pub fn descriptor(&self, seq: &Sequence, subset: &JointSubset) -> Result<DckDescriptor> {
        check_input(seq)?;
        let seq = select_joints(seq, subset)?;
        let j = seq.joint_count();
        let mode = self.params.pair_mode;
        if mode == PairMode::Strict && j < 2 {
            return Err(Error::invalid("strict DCK needs at least two joints"));
        }
        let [d1, z3, _] = self.params.pair_dims();
        let whiten = self.params.gamma < 1.0 || self.params.gamma_star < 1.0;
        let mut values = Vec::with_capacity(self.size(j));
        for (i, ip) in joint_pairs(j, mode) {
            let mut t = self.pair_tensor(&seq, i, ip)?.tensor;
            if whiten {
                t = hosvd_epn(&t, self.params.gamma, self.params.gamma_star)?;
            }
            if i == ip {
                for q in 0..z3 {
                    for p in q + 1..z3 {
                        values.extend((0..d1).map(|x| t.get(x, p, q)));
                    }
                }
            } else {
                values.extend(t.data().iter().map(|v| SQRT_2 * v));
            }
        }
        debug_assert_eq!(values.len(), self.size(j));
        Ok(DckDescriptor {
            subset: subset.clone(),
            pair_mode: mode,
            values,
        })
    }
}

#[inline]
fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn check_input(seq: &Sequence) -> Result<()> {
    if seq.stage() != Stage::Raw {
        return Err(Error::invalid(format!(
            "DCK needs raw absolute coordinates; sequence {} is {:?}",
            seq.id,
            seq.stage()
        )));
    }
    if seq.frame_count() < 2 {
        return Err(Error::invalid(format!(
            "DCK needs at least two frames; sequence {} has one",
            seq.id
        )));
    }
    Ok(())
}

/// Core entries below this fraction of the largest one are roundoff and are
/// zeroed before powering.
const CORE_FLOOR: f64 = 1e-12;

/// HOSVD, core raised to `sgn(.)|.|^gamma`, reconstruction, then the same
/// elementwise power with `gamma_star`.
pub fn hosvd_epn(t: &Tensor3, gamma: f64, gamma_star: f64) -> Result<Tensor3> {
    check_exponent("gamma", gamma)?;
    check_exponent("gamma*", gamma_star)?;
    let mut f = hosvd(t)?;
    let floor = CORE_FLOOR * f.core.data().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    f.core
        .data_mut()
        .iter_mut()
        .filter(|x| x.abs() <= floor)
        .for_each(|x| *x = 0.0);
    let rebuilt = HosvdFactors::expand(&sgn_power(&f.core, gamma), &f.factors)?;
    Ok(sgn_power(&rebuilt, gamma_star))
}

pub fn pair_tensor(
    seq: &Sequence,
    i: usize,
    ip: usize,
    extractor: &DckExtractor,
) -> Result<PairTensor> {
    extractor.pair_tensor(seq, i, ip)
}

pub fn dck_descriptor(
    seq: &Sequence,
    subset: &JointSubset,
    extractor: &DckExtractor,
) -> Result<DckDescriptor> {
    extractor.descriptor(seq, subset)
}

/// Exact kernel over ordered joint pairs `i != i'` and frame pairs `s > s'`,
/// `t > t'`:
/// `G'2((x_is - x_i's') - (y_it - y_i't')) G3(s/M - t/N) G3(s'/M - t'/N) G4(s - s') G4(t - t')`,
/// with `G'2` the sum of per-axis Gaussians, divided by `J^2 M N` under
/// frame-count normalization. Coordinates are used as given.
pub fn dck_exact(
    a: &Sequence,
    b: &Sequence,
    subset: &JointSubset,
    params: &DckParams,
) -> Result<f64> {
    params.validate()?;
    let a = select_joints(a, subset)?;
    let b = select_joints(b, subset)?;
    let space = RbfKernel::new(params.sigma2)?;
    let time = RbfKernel::new(params.sigma3)?;
    let (m, n) = (a.frame_count(), b.frame_count());
    let (lag_a, lag_b) = (params.sigma4.resolve(m)?, params.sigma4.resolve(n)?);
    let j = a.joint_count();

    // Frame-pair weights G3(s/M - t/N) G3(s'/M - t'/N) G4(s - s') G4(t - t') do not
    // depend on the joints, so they are tabulated once.
    let mut weights = Vec::new();
    for s in 1..m {
        for sp in 0..s {
            for t in 1..n {
                for tp in 0..t {
                    let w = gauss(&time, (s + 1) as f64 / m as f64 - (t + 1) as f64 / n as f64)
                        * gauss(
                            &time,
                            (sp + 1) as f64 / m as f64 - (tp + 1) as f64 / n as f64,
                        )
                        * lag_a.eval((s - sp) as f64)
                        * lag_b.eval((t - tp) as f64);
                    weights.push((s, sp, t, tp, w));
                }
            }
        }
    }
    let mut total = 0.0;
    for i in 0..j {
        for ip in (0..j).filter(|&ip| ip != i) {
            for &(s, sp, t, tp, w) in &weights {
                let da = sub(a.point(s, i), a.point(sp, ip));
                let db = sub(b.point(t, i), b.point(tp, ip));
                let g: f64 = (0..3).map(|k| gauss(&space, da[k] - db[k])).sum();
                total += g * w;
            }
        }
    }
    Ok(match params.normalization {
        Normalization::FrameCount => total / (j * j * m * n) as f64,
        Normalization::None => total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    fn random_seq(j: usize, m: usize, seed: u64) -> Sequence {
        let mut st = seed;
        let frames: Vec<Vec<Point3>> = (0..m)
            .map(|_| {
                (0..j)
                    .map(|_| [lcg(&mut st), lcg(&mut st), lcg(&mut st)])
                    .collect()
            })
            .collect();
        Sequence::new("r", 1, 1, frames).unwrap()
    }

    fn small(mode: PairMode) -> DckParams {
        DckParams {
            z2: 2,
            z3: 3,
            gamma: 1.0,
            pair_mode: mode,
            ..DckParams::default()
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(dck_size(8, 5, 6, PairMode::PaperSize), 16_920);
        assert_eq!(dck_size(6, 5, 6, PairMode::PaperSize), 9_450);
        assert_eq!(dck_size(2, 1, 1, PairMode::PaperSize), 3);
        assert_eq!(dck_size(2, 1, 2, PairMode::Strict), 12);
    }

    #[test]
    fn pair_order() {
        assert_eq!(
            joint_pairs(3, PairMode::Strict),
            vec![(1, 0), (2, 0), (2, 1)]
        );
        assert_eq!(
            joint_pairs(2, PairMode::PaperSize),
            vec![(0, 0), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn two_frames_give_one_term() {
        let ext = DckExtractor::new(small(PairMode::Strict)).unwrap();
        let seq = random_seq(2, 2, 1);
        let t = ext.pair_tensor(&seq, 1, 0).unwrap().tensor;
        let lag = ext.params().sigma4.resolve(2).unwrap();
        let phi = ext
            .spatial_grid()
            .feature_map_3d(sub(seq.point(1, 1), seq.point(0, 0)));
        let z1 = ext.temporal_grid().feature_map(0.5);
        let z2 = ext.temporal_grid().feature_map(1.0);
        let w = lag.eval(1.0) / 4.0;
        let expected = Tensor3::from_fn(ext.params().pair_dims(), |x, p, q| {
            w * phi[x] * z2[p] * z1[q]
        });
        assert!(t.relative_error(&expected) <= 1e-14);
    }

    #[test]
    fn matches_quadruple_loop() {
        let ext = DckExtractor::new(small(PairMode::Strict)).unwrap();
        let seq = random_seq(3, 4, 2);
        let lag = ext.params().sigma4.resolve(4).unwrap();
        for (i, ip) in [(2, 0), (1, 1), (0, 2)] {
            let t = ext.pair_tensor(&seq, i, ip).unwrap().tensor;
            let mut expected = Tensor3::zeros(ext.params().pair_dims());
            for s in 0..4 {
                for sp in 0..s {
                    let phi = ext
                        .spatial_grid()
                        .feature_map_3d(sub(seq.point(s, i), seq.point(sp, ip)));
                    let zs = ext.temporal_grid().feature_map((s + 1) as f64 / 4.0);
                    let zsp = ext.temporal_grid().feature_map((sp + 1) as f64 / 4.0);
                    for x in 0..6 {
                        for p in 0..3 {
                            for q in 0..3 {
                                let v = lag.eval((s - sp) as f64) * phi[x] * zs[p] * zsp[q] / 12.0;
                                expected.add_at(x, p, q, v);
                            }
                        }
                    }
                }
            }
            assert!(t.relative_error(&expected) <= 1e-10);
        }
    }

    #[test]
    fn narrow_lag_prefers_adjacent_frames() {
        let params = DckParams {
            sigma4: LagBandwidth::Frames(0.3),
            ..small(PairMode::Strict)
        };
        let lag = params.sigma4.resolve(10).unwrap();
        assert!(lag.eval(2.0) < lag.eval(1.0));
        assert!(lag.eval(1.0) < 1.0);
    }

    #[test]
    fn unit_exponents_reconstruct() {
        let ext = DckExtractor::new(small(PairMode::Strict)).unwrap();
        let t = ext.pair_tensor(&random_seq(2, 5, 3), 1, 0).unwrap().tensor;
        assert!(hosvd_epn(&t, 1.0, 1.0).unwrap().relative_error(&t) <= 1e-8);
    }

    #[test]
    fn rank_one_input_powers_single_core_value() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 0.4];
        let w = [2.0, 1.0, -1.0, 0.5];
        let t = Tensor3::from_fn([3, 2, 4], |i, j, k| u[i] * v[j] * w[k]);
        let norm = t.frobenius_norm();
        let out = hosvd_epn(&t, 0.5, 1.0).unwrap();
        let mut expected = t.clone();
        expected.scale(norm.powf(0.5) / norm);
        assert!(out.relative_error(&expected) <= 1e-10);
    }

    #[test]
    fn homogeneity() {
        let ext = DckExtractor::new(small(PairMode::Strict)).unwrap();
        let t = ext.pair_tensor(&random_seq(2, 5, 4), 1, 0).unwrap().tensor;
        let base = hosvd_epn(&t, 0.5, 1.0).unwrap();
        for alpha in [0.25, 1.0, 4.0] {
            let mut scaled = t.clone();
            scaled.scale(alpha);
            let mut expected = base.clone();
            expected.scale(alpha.sqrt());
            assert!(
                hosvd_epn(&scaled, 0.5, 1.0)
                    .unwrap()
                    .relative_error(&expected)
                    <= 1e-9
            );
        }
    }

    #[test]
    fn descriptor_lengths() {
        let seq = random_seq(4, 5, 5);
        let subset = JointSubset::all(4);
        for mode in [PairMode::PaperSize, PairMode::Strict] {
            let ext = DckExtractor::new(DckParams {
                pair_mode: mode,
                ..DckParams::default()
            })
            .unwrap();
            let d = ext.descriptor(&seq, &subset).unwrap();
            assert_eq!(d.values.len(), dck_size(4, 5, 6, mode));
        }
    }

    #[test]
    fn translation_on_dyadic_grid_is_bit_equal() {
        let frames: Vec<Vec<Point3>> = (0..5)
            .map(|s| {
                (0..3)
                    .map(|i| {
                        [
                            (s * 3 + i) as f64 / 64.0,
                            -(i as f64) / 32.0,
                            s as f64 / 128.0,
                        ]
                    })
                    .collect()
            })
            .collect();
        let seq = Sequence::new("d", 1, 1, frames).unwrap();
        let ext = DckExtractor::new(DckParams::default()).unwrap();
        let subset = JointSubset::all(3);
        let a = ext.descriptor(&seq, &subset).unwrap();
        let b = ext
            .descriptor(&seq.translated([0.5, -0.25, 2.0]), &subset)
            .unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn input_checks() {
        let ext = DckExtractor::new(small(PairMode::Strict)).unwrap();
        assert!(ext.pair_tensor(&random_seq(2, 1, 1), 1, 0).is_err());
        let centered = random_seq(2, 3, 1).assume_stage(Stage::HipCentered);
        assert!(ext.descriptor(&centered, &JointSubset::all(2)).is_err());
        assert!(ext
            .descriptor(&random_seq(1, 3, 1), &JointSubset::all(1))
            .is_err());
    }

    #[test]
    fn exact_kernel_basics() {
        let params = small(PairMode::Strict);
        let subset = JointSubset::all(3);
        let a = random_seq(3, 4, 6);
        let k = dck_exact(&a, &a, &subset, &params).unwrap();
        assert!(k > 0.0);
        let b = random_seq(3, 3, 7);
        let k_ab = dck_exact(&a, &b, &subset, &params).unwrap();
        let moved = dck_exact(
            &a.translated([0.3, 0.1, -0.2]),
            &b.translated([-1.0, 2.0, 0.5]),
            &subset,
            &params,
        )
        .unwrap();
        assert!((k_ab - moved).abs() <= 1e-12 * k_ab);
    }
}
