//! Synthetic sinusoidal actions for desk-scale experiments.
//!
//! The body is a binary tree (`parent(j) = j / 2`, joint 1 is the hip) with
//! fixed rest offsets. Every class draws, per joint and axis, a frequency,
//! phase and amplitude; a sequence of that class is the rest pose scaled by a
//! per-subject body size, moved by the class trajectories with small
//! per-sequence phase and amplitude jitter, shifted by a random global offset,
//! plus i.i.d. Gaussian noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{Point3, Sequence, SkeletonTopology};

/// Subjects are assigned round-robin over this many performers.
pub const SYNTH_SUBJECTS: u32 = 10;

const REST_SEGMENT: f64 = 0.3;

#[derive(Debug, Clone, Copy)]
struct AxisMotion {
    freq: f64,
    phase: f64,
    amp: f64,
}

/// Tree used by [`synth_actions`] for `joint_count` joints.
pub fn synth_topology(joint_count: usize) -> Result<SkeletonTopology> {
    if joint_count < 2 {
        return Err(Error::invalid(
            "a synthetic skeleton needs at least two joints",
        ));
    }
    let edges: Vec<(u32, u32)> = (2..=joint_count as u32).map(|c| (c / 2, c)).collect();
    SkeletonTopology::from_edges(&edges)
}

pub fn synth_actions(
    classes: usize,
    per_class: usize,
    joint_count: usize,
    frames: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || joint_count < 2 || frames == 0 {
        return Err(Error::invalid(
            "synthetic dataset sizes must be positive (at least two joints)",
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!(
            "noise level must be non-negative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = rest_pose(joint_count, &mut rng);
    let subject_scale: Vec<f64> = (0..SYNTH_SUBJECTS)
        .map(|_| rng.random_range(0.9..1.1))
        .collect();
    let motions: Vec<Vec<[AxisMotion; 3]>> = (0..classes)
        .map(|_| {
            (0..joint_count)
                .map(|_| {
                    std::array::from_fn(|_| AxisMotion {
                        freq: rng.random_range(0.5..2.0),
                        phase: rng.random_range(0.0..TAU),
                        amp: rng.random_range(0.05..0.3),
                    })
                })
                .collect()
        })
        .collect();
    let gauss = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut sequences = Vec::with_capacity(classes * per_class);
    for (c, motion) in motions.iter().enumerate() {
        for r in 0..per_class {
            let subject = (r as u32 % SYNTH_SUBJECTS) + 1;
            let scale = subject_scale[subject as usize - 1];
            let offset: Point3 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let phase_jitter = rng.random_range(-0.1..0.1);
            let amp_jitter = rng.random_range(0.9..1.1);
            let mut coords = Vec::with_capacity(frames * joint_count);
            for s in 0..frames {
                let t = s as f64 / frames as f64;
                for (j, m) in motion.iter().enumerate() {
                    coords.push(std::array::from_fn(|k| {
                        let wave = amp_jitter
                            * m[k].amp
                            * (TAU * m[k].freq * t + m[k].phase + phase_jitter).sin();
                        let jitter = if noise > 0.0 {
                            gauss.sample(&mut rng)
                        } else {
                            0.0
                        };
                        offset[k] + scale * rest[j][k] + wave + jitter
                    }));
                }
            }
            let id = format!("c{:02}_s{:02}_r{:03}", c + 1, subject, r);
            sequences.push(Sequence::from_flat(
                id,
                c as u32 + 1,
                subject,
                joint_count,
                coords,
            )?);
        }
    }
    Dataset::new("synthetic", sequences)
}

/// Rest pose: joint 1 at the origin, every child offset from its parent by a
/// random direction of length `REST_SEGMENT`.
fn rest_pose(joint_count: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let mut pose = vec![[0.0; 3]; joint_count];
    for child in 2..=joint_count {
        let dir: Point3 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2])
            .sqrt()
            .max(1e-3);
        let parent = pose[child / 2 - 1];
        pose[child - 1] = std::array::from_fn(|k| parent[k] + REST_SEGMENT * dir[k] / len);
    }
    pose
}

/// Copies of `ds` where every sequence plays one random segment
/// `repeats` times in a row, modeling bursts of a sub-action.
pub fn with_bursts(
    ds: &Dataset,
    segment_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences = ds
        .sequences
        .iter()
        .map(|seq| {
            let m = seq.frame_count();
            let len = ((m as f64 * segment_fraction).round() as usize).clamp(1, m);
            let start = rng.random_range(0..=m - len);
            seq.repeat_segment(start, len, repeats)
        })
        .collect::<Result<_>>()?;
    Dataset::new(format!("{}-bursty", ds.name), sequences)
}
