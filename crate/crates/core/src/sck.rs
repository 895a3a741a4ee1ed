//! Sequence compatibility kernel.
//!
//! Each frame of joint `i` is mapped to `v_s = [sqrt(b1) phi(x_is); sqrt(b2) z(s/M)]`
//! of length `d = 3 Z2 + Z3`. The joint tensor is the normalized sum of
//! `v_s ⊗ v_s ⊗ v_s`, so the dot product of two joint tensors is
//! `sum_{s,t} (v_s · w_t)^3`, the linearization of the cubed compatibility of
//! positions and time stamps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gauss, PivotGrid, RbfKernel};
use crate::preprocess::{AxisScaling, Sequence, Stage};
use crate::tensor::{psd_power, simplex_len, SymTensor3, Tensor3};
use crate::Normalization;

const BETA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SckParams {
    pub sigma2: f64,
    pub sigma3: f64,
    pub z2: usize,
    pub z3: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub normalization: Normalization,
}

impl Default for SckParams {
    fn default() -> Self {
        Self {
            sigma2: 0.6,
            sigma3: 0.5,
            z2: 5,
            z3: 6,
            beta1: 0.5,
            beta2: 0.5,
            gamma: 0.36,
            normalization: Normalization::FrameCount,
        }
    }
}

impl SckParams {
    pub fn validate(&self) -> Result<()> {
        RbfKernel::new(self.sigma2)?;
        RbfKernel::new(self.sigma3)?;
        if self.z2 == 0 || self.z3 == 0 {
            return Err(Error::invalid("SCK pivot counts must be positive"));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0)
            || (self.beta1 + self.beta2 - 1.0).abs() > BETA_TOLERANCE
        {
            return Err(Error::invalid(format!(
                "SCK weights must be non-negative and sum to 1, got {} + {}",
                self.beta1, self.beta2
            )));
        }
        crate::tensor::check_exponent("SCK gamma", self.gamma)
    }

    /// Side of each joint tensor, `3 Z2 + Z3`.
    pub fn side(&self) -> usize {
        3 * self.z2 + self.z3
    }
}

/// `J * C(3 Z2 + Z3 + 2, 3)`.
pub fn sck_size(joint_count: usize, z2: usize, z3: usize) -> usize {
    joint_count * simplex_len(3 * z2 + z3)
}

/// Per-joint upper simplices with multiplicity weights, concatenated in joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct SckDescriptor {
    pub joint_count: usize,
    pub values: Vec<f64>,
}

impl SckDescriptor {
    pub fn block_len(&self) -> usize {
        self.values.len() / self.joint_count
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.block_len())
    }
}

/// Calibrated feature maps plus the coordinate scaling fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SckExtractor {
    params: SckParams,
    spatial: PivotGrid,
    temporal: PivotGrid,
    scaling: AxisScaling,
}

impl SckExtractor {
    pub fn new(params: SckParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            spatial: PivotGrid::calibrated(params.z2, -1.0, 1.0, params.sigma2)?,
            temporal: PivotGrid::calibrated(params.z3, 0.0, 1.0, params.sigma3)?,
            scaling: AxisScaling::identity(),
        })
    }

    pub fn with_scaling(mut self, scaling: AxisScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn params(&self) -> &SckParams {
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
        sck_size(joint_count, self.params.z2, self.params.z3)
    }

    /// Feature vector of joint `joint` at frame `s` (0-based) of an `m`-frame sequence.
    fn frame_vector(&self, p: [f64; 3], s: usize, m: usize, out: &mut [f64]) {
        let split = 3 * self.params.z2;
        let (pos, time) = out.split_at_mut(split);
        self.spatial.feature_map_3d_into(self.scaling.apply(p), pos);
        self.temporal
            .feature_map_into((s + 1) as f64 / m as f64, time);
        let (b1, b2) = (self.params.beta1.sqrt(), self.params.beta2.sqrt());
        pos.iter_mut().for_each(|x| *x *= b1);
        time.iter_mut().for_each(|x| *x *= b2);
    }

    /// Normalized sum of `v_s ⊗ v_s ⊗ v_s` over the frames of one joint.
    pub fn joint_tensor(&self, seq: &Sequence, joint: usize) -> Result<SymTensor3> {
        check_stage(seq)?;
        if joint >= seq.joint_count() {
            return Err(Error::invalid(format!(
                "joint index {joint} out of range for {} joints",
                seq.joint_count()
            )));
        }
        let m = seq.frame_count();
        let mut v = vec![0.0; self.params.side()];
        let mut t = SymTensor3::zeros(v.len());
        for s in 0..m {
            self.frame_vector(seq.point(s, joint), s, m, &mut v);
            t.add_outer3(&v, 1.0);
        }
        if self.params.normalization == Normalization::FrameCount {
            t.scale(1.0 / m as f64);
        }
        Ok(t)
    }

    /// Joint tensors, slice-wise power normalized unless `gamma = 1`, then
    /// weighted and concatenated.
    pub fn descriptor(&self, seq: &Sequence) -> Result<SckDescriptor> {
        check_stage(seq)?;
        let mut values = Vec::with_capacity(self.size(seq.joint_count()));
        for joint in 0..seq.joint_count() {
            let t = self.joint_tensor(seq, joint)?;
            let t = if self.params.gamma < 1.0 {
                slice_epn(&t, self.params.gamma)?
            } else {
                t
            };
            values.extend(t.weighted_vector());
        }
        Ok(SckDescriptor {
            joint_count: seq.joint_count(),
            values,
        })
    }
}

fn check_stage(seq: &Sequence) -> Result<()> {
    if seq.stage() == Stage::LimbNormalized {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "SCK needs hip-centered, limb-normalized input; sequence {} is {:?}",
            seq.id,
            seq.stage()
        )))
    }
}

/// Replaces every slice `X[:, :, s]` by its matrix power, then restores
/// super-symmetry by averaging over index permutations.
pub fn slice_epn(t: &SymTensor3, gamma: f64) -> Result<SymTensor3> {
    crate::tensor::check_exponent("gamma", gamma)?;
    let d = t.side();
    let mut dense = Tensor3::zeros([d, d, d]);
    for s in 0..d {
        let powered = psd_power(&t.slice(s), gamma)?;
        for j in 0..d {
            for i in 0..d {
                dense.set(i, j, s, powered.get(i, j));
            }
        }
    }
    SymTensor3::symmetrize(&dense)
}

pub fn joint_tensor(seq: &Sequence, joint: usize, extractor: &SckExtractor) -> Result<SymTensor3> {
    extractor.joint_tensor(seq, joint)
}

pub fn sck_descriptor(seq: &Sequence, extractor: &SckExtractor) -> Result<SckDescriptor> {
    extractor.descriptor(seq)
}

/// Exact kernel `sum_i sum_{s,t} (b1 G'(x_is - y_it) + b2 G(s/M - t/N))^3`,
/// with `G'` the sum of per-axis Gaussians, divided by `M N` under frame-count
/// normalization. Coordinates are used as given.
pub fn sck_exact(a: &Sequence, b: &Sequence, params: &SckParams) -> Result<f64> {
    params.validate()?;
    if a.joint_count() != b.joint_count() {
        return Err(Error::invalid(format!(
            "joint counts differ: {} vs {}",
            a.joint_count(),
            b.joint_count()
        )));
    }
    let space = RbfKernel::new(params.sigma2)?;
    let time = RbfKernel::new(params.sigma3)?;
    let (m, n) = (a.frame_count(), b.frame_count());
    let mut total = 0.0;
    for i in 0..a.joint_count() {
        for s in 0..m {
            let x = a.point(s, i);
            let ts = (s + 1) as f64 / m as f64;
            for t in 0..n {
                let y = b.point(t, i);
                let g_space = (0..3).map(|k| gauss(&space, x[k] - y[k])).sum::<f64>();
                let g_time = gauss(&time, ts - (t + 1) as f64 / n as f64);
                total += (params.beta1 * g_space + params.beta2 * g_time).powi(3);
            }
        }
    }
    Ok(match params.normalization {
        Normalization::FrameCount => total / (m * n) as f64,
        Normalization::None => total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Point3;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
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
        Sequence::new("r", 1, 1, frames)
            .unwrap()
            .assume_stage(Stage::LimbNormalized)
    }

    fn small() -> SckParams {
        SckParams {
            z2: 2,
            z3: 3,
            gamma: 1.0,
            ..SckParams::default()
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(sck_size(15, 5, 6), 26_565);
        assert_eq!(sck_size(1, 1, 1), 20);
        assert_eq!(sck_size(20, 5, 7), 40_480);
    }

    #[test]
    fn params_validation() {
        assert!(SckParams::default().validate().is_ok());
        let bad = SckParams {
            beta1: 0.7,
            ..SckParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SckParams {
            gamma: 0.0,
            ..SckParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_frame_is_one_outer_product() {
        let ext = SckExtractor::new(small()).unwrap();
        let seq = random_seq(1, 1, 3);
        let t = ext.joint_tensor(&seq, 0).unwrap();
        let mut v = vec![0.0; small().side()];
        ext.frame_vector(seq.point(0, 0), 0, 1, &mut v);
        assert_eq!(t, SymTensor3::outer3(&v).unwrap());
    }

    #[test]
    fn zero_time_weight_clears_temporal_entries() {
        let params = SckParams {
            beta1: 1.0,
            beta2: 0.0,
            ..small()
        };
        let ext = SckExtractor::new(params).unwrap();
        let t = ext.joint_tensor(&random_seq(2, 4, 9), 1).unwrap();
        let d = params.side();
        for k in 0..d {
            for j in 0..=k {
                for i in 0..=j {
                    if k >= 3 * params.z2 {
                        assert_eq!(t.get(i, j, k), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn joint_tensor_matches_dense_loop() {
        let ext = SckExtractor::new(small()).unwrap();
        let seq = random_seq(2, 2, 17);
        let d = small().side();
        let mut dense = Tensor3::zeros([d, d, d]);
        let mut v = vec![0.0; d];
        for s in 0..2 {
            ext.frame_vector(seq.point(s, 1), s, 2, &mut v);
            for k in 0..d {
                for j in 0..d {
                    for i in 0..d {
                        dense.add_at(i, j, k, v[i] * v[j] * v[k] / 2.0);
                    }
                }
            }
        }
        let t = ext.joint_tensor(&seq, 1).unwrap().to_dense();
        assert!(t.relative_error(&dense) <= 1e-10);
    }

    #[test]
    fn rank_one_slices_are_powered() {
        let v = [0.5, 2.0, 1.0];
        let t = SymTensor3::outer3(&v).unwrap();
        let out = slice_epn(&t, 0.5).unwrap();
        // Slice s of v⊗v⊗v is v_s v v^T, a rank-one slice with eigenvalue v_s |v|^2.
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let d = 3;
        let mut dense = Tensor3::zeros([d, d, d]);
        for s in 0..d {
            let lambda = v[s] * norm2;
            for j in 0..d {
                for i in 0..d {
                    dense.set(i, j, s, lambda.powf(0.5) * v[i] * v[j] / norm2);
                }
            }
        }
        let expected = SymTensor3::symmetrize(&dense).unwrap();
        for (a, b) in out.simplex().iter().zip(expected.simplex()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn unit_gamma_epn_roundtrip() {
        let ext = SckExtractor::new(small()).unwrap();
        let t = ext.joint_tensor(&random_seq(1, 5, 4), 0).unwrap();
        let out = slice_epn(&t, 1.0).unwrap();
        assert!(out.to_dense().relative_error(&t.to_dense()) <= 1e-9);
    }

    #[test]
    fn descriptor_length_and_determinism() {
        let ext = SckExtractor::new(SckParams::default()).unwrap();
        let seq = random_seq(3, 6, 5);
        let a = ext.descriptor(&seq).unwrap();
        assert_eq!(a.values.len(), sck_size(3, 5, 6));
        assert_eq!(a, ext.descriptor(&seq.clone()).unwrap());
        assert_eq!(a.blocks().count(), 3);
    }

    #[test]
    fn raw_input_is_rejected() {
        let ext = SckExtractor::new(small()).unwrap();
        let seq = random_seq(1, 2, 1).assume_stage(Stage::Raw);
        assert!(ext.descriptor(&seq).is_err());
    }

    #[test]
    fn exact_single_term() {
        let params = SckParams {
            beta1: 1.0,
            beta2: 0.0,
            ..small()
        };
        let a = random_seq(1, 1, 8);
        let b = random_seq(1, 1, 9);
        let k = RbfKernel::new(params.sigma2).unwrap();
        let (x, y) = (a.point(0, 0), b.point(0, 0));
        let g: f64 = (0..3).map(|i| gauss(&k, x[i] - y[i])).sum();
        assert!((sck_exact(&a, &b, &params).unwrap() - g.powi(3)).abs() <= 1e-12);
        assert!(sck_exact(&a, &a, &params).unwrap() > 0.0);
        assert!(sck_exact(&a, &random_seq(2, 1, 1), &params).is_err());
    }
}
