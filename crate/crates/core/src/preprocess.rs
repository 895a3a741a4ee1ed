//! Skeleton sequences and their normalization.
//!
//! SCK consumes hip-centered, limb-normalized sequences; DCK consumes raw
//! absolute coordinates. Every [`Sequence`] carries a [`Stage`] tag so the
//! descriptor builders can reject input from the wrong pipeline.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Raw,
    HipCentered,
    LimbNormalized,
}

/// A time-ordered list of skeletons plus label and performer metadata.
///
/// Coordinates are stored frame-major: joint `i` of frame `s` is at
/// `s * joint_count + i`. `joint_ids` keeps the dataset numbering of the
/// joints that survive [`select_joints`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub label: u32,
    pub subject: u32,
    joint_ids: Vec<u32>,
    coords: Vec<Point3>,
    stage: Stage,
}

impl Sequence {
    /// Builds a raw sequence with joints numbered `1..=J`.
    pub fn new(
        id: impl Into<String>,
        label: u32,
        subject: u32,
        frames: Vec<Vec<Point3>>,
    ) -> Result<Self> {
        let joint_count = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != joint_count) {
            return Err(Error::invalid(
                "all frames of a sequence must have the same joint count",
            ));
        }
        let coords = frames.into_iter().flatten().collect();
        Self::from_flat(id, label, subject, joint_count, coords)
    }

    pub fn from_flat(
        id: impl Into<String>,
        label: u32,
        subject: u32,
        joint_count: usize,
        coords: Vec<Point3>,
    ) -> Result<Self> {
        if joint_count == 0 || coords.is_empty() || coords.len() % joint_count != 0 {
            return Err(Error::invalid(format!(
                "sequence needs at least one frame of {joint_count} joints, got {} points",
                coords.len()
            )));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("sequence coordinates must be finite"));
        }
        Ok(Self {
            id: id.into(),
            label,
            subject,
            joint_ids: (1..=joint_count as u32).collect(),
            coords,
            stage: Stage::Raw,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.joint_ids.len()
    }

    pub fn frame_count(&self) -> usize {
        self.coords.len() / self.joint_ids.len()
    }

    pub fn joint_ids(&self) -> &[u32] {
        &self.joint_ids
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Tags coordinates that were normalized before they reached this crate.
    pub fn assume_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    pub fn coords(&self) -> &[Point3] {
        &self.coords
    }

    /// Skeleton of frame `s`.
    pub fn frame(&self, s: usize) -> &[Point3] {
        let j = self.joint_count();
        &self.coords[s * j..(s + 1) * j]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Point3]> {
        self.coords.chunks_exact(self.joint_count())
    }

    #[inline]
    pub fn point(&self, frame: usize, joint: usize) -> Point3 {
        self.coords[frame * self.joint_ids.len() + joint]
    }

    fn joint_index(&self, id: u32) -> Option<usize> {
        self.joint_ids.iter().position(|&j| j == id)
    }

    fn with_frames(&self, frames: impl IntoIterator<Item = usize>) -> Self {
        let coords = frames
            .into_iter()
            .flat_map(|s| self.frame(s).iter().copied())
            .collect();
        Self {
            coords,
            ..self.clone()
        }
    }

    /// Every frame repeated `k` times in place.
    pub fn repeat_frames(&self, k: usize) -> Self {
        self.with_frames((0..self.frame_count()).flat_map(|s| std::iter::repeat_n(s, k)))
    }

    /// Frames `start..start + len` played `k` times in a row.
    pub fn repeat_segment(&self, start: usize, len: usize, k: usize) -> Result<Self> {
        if len == 0 || start + len > self.frame_count() || k == 0 {
            return Err(Error::invalid("segment out of range"));
        }
        let order = (0..start)
            .chain((0..k).flat_map(|_| start..start + len))
            .chain(start + len..self.frame_count());
        Ok(self.with_frames(order))
    }

    pub fn reversed(&self) -> Self {
        self.with_frames((0..self.frame_count()).rev())
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != (0..self.frame_count()).collect::<Vec<_>>() {
            return Err(Error::invalid("frame order must be a permutation"));
        }
        Ok(self.with_frames(order.iter().copied()))
    }

    /// Adds `offset` to every joint of every frame; the stage is unchanged.
    pub fn translated(&self, offset: Point3) -> Self {
        let coords = self
            .coords
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self {
            coords,
            ..self.clone()
        }
    }
}

/// Subtracts the hip joint from every joint, frame by frame.
pub fn hip_center(seq: &Sequence, hip_id: u32) -> Result<Sequence> {
    let hip = seq.joint_index(hip_id).ok_or_else(|| {
        Error::invalid(format!(
            "hip joint {hip_id} is not part of sequence {}",
            seq.id
        ))
    })?;
    let j = seq.joint_count();
    let mut coords = Vec::with_capacity(seq.coords.len());
    for frame in seq.coords.chunks_exact(j) {
        let h = frame[hip];
        coords.extend(
            frame
                .iter()
                .map(|p| [p[0] - h[0], p[1] - h[1], p[2] - h[2]]),
        );
    }
    Ok(Sequence {
        coords,
        stage: seq.stage.max(Stage::HipCentered),
        ..seq.clone()
    })
}

/// Parent-child joint pairs forming a tree, plus a reference length per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTopology {
    root: u32,
    /// Breadth-first from the root, so parents are placed before children.
    edges: Vec<(u32, u32)>,
    reference_lengths: Vec<f64>,
}

impl SkeletonTopology {
    /// Builds a tree from `(parent, child)` pairs with unit reference lengths.
    pub fn from_edges(edges: &[(u32, u32)]) -> Result<Self> {
        Self::with_lengths(edges, &vec![1.0; edges.len()])
    }

    pub fn with_lengths(edges: &[(u32, u32)], lengths: &[f64]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::invalid("topology has no edges"));
        }
        if lengths.len() != edges.len() || lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "every edge needs a positive reference length",
            ));
        }
        let mut children: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut child_set = BTreeSet::new();
        for (e, &(p, c)) in edges.iter().enumerate() {
            if p == c {
                return Err(Error::invalid(format!("edge {p}->{c} is a self loop")));
            }
            if !child_set.insert(c) {
                return Err(Error::invalid(format!(
                    "joint {c} has more than one parent"
                )));
            }
            children.entry(p).or_default().push(e);
        }
        let roots: Vec<u32> = children
            .keys()
            .copied()
            .filter(|p| !child_set.contains(p))
            .collect();
        let [root] = roots[..] else {
            return Err(Error::invalid(format!(
                "topology must have exactly one root, found {roots:?}"
            )));
        };
        let mut order = Vec::with_capacity(edges.len());
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            for &e in children.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
                order.push(e);
                queue.push_back(edges[e].1);
            }
        }
        if order.len() != edges.len() {
            return Err(Error::invalid("topology is not a connected tree"));
        }
        Ok(Self {
            root,
            edges: order.iter().map(|&e| edges[e]).collect(),
            reference_lengths: order.iter().map(|&e| lengths[e]).collect(),
        })
    }

    /// Parses `parent child [length]` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut edges = Vec::new();
        let mut lengths = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected `parent child [length]`, got {} fields",
                    fields.len()
                )));
            }
            let id = |s: &str| {
                s.parse::<u32>()
                    .map_err(|e| parse_err(format!("bad joint id {s:?}: {e}")))
            };
            edges.push((id(fields[0])?, id(fields[1])?));
            lengths.push(match fields.get(2) {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("bad length {s:?}: {e}")))?,
                None => 1.0,
            });
        }
        Self::with_lengths(&edges, &lengths).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# parent child reference_length\n");
        for (&(p, c), l) in self.edges.iter().zip(&self.reference_lengths) {
            out.push_str(&format!("{p} {c} {l}\n"));
        }
        out
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn reference_lengths(&self) -> &[f64] {
        &self.reference_lengths
    }

    fn edge_indices(&self, seq: &Sequence) -> Result<Vec<(usize, usize)>> {
        let mut covered: BTreeSet<u32> = self.edges.iter().map(|e| e.1).collect();
        covered.insert(self.root);
        let ids: BTreeSet<u32> = seq.joint_ids.iter().copied().collect();
        if covered != ids {
            return Err(Error::invalid(format!(
                "topology joints {covered:?} do not span sequence joints {ids:?}"
            )));
        }
        Ok(self
            .edges
            .iter()
            .map(|&(p, c)| (seq.joint_index(p).unwrap(), seq.joint_index(c).unwrap()))
            .collect())
    }

    /// Reference lengths set to the mean edge length over all frames of `sequences`.
    pub fn fit_reference_lengths(&self, sequences: &[Sequence]) -> Result<Self> {
        let mut sums = vec![0.0; self.edges.len()];
        let mut count = 0usize;
        for seq in sequences {
            let idx = self.edge_indices(seq)?;
            for frame in seq.frames() {
                for (e, &(p, c)) in idx.iter().enumerate() {
                    sums[e] += dist(frame[p], frame[c]);
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::invalid("no frames to fit reference lengths on"));
        }
        let lengths: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
        if let Some(e) = lengths.iter().position(|&l| !(l > 0.0)) {
            let (parent, child) = self.edges[e];
            return Err(Error::DegenerateSegment { parent, child });
        }
        Ok(Self {
            reference_lengths: lengths,
            ..self.clone()
        })
    }
}

fn dist(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Rescales every segment to its reference length, keeping its direction,
/// walking the tree outward from the root.
pub fn normalize_limbs(seq: &Sequence, topology: &SkeletonTopology) -> Result<Sequence> {
    if seq.stage < Stage::HipCentered {
        return Err(Error::invalid(format!(
            "sequence {} must be hip-centered before limb normalization",
            seq.id
        )));
    }
    let idx = topology.edge_indices(seq)?;
    let j = seq.joint_count();
    let mut coords = seq.coords.clone();
    for (src, dst) in seq.coords.chunks_exact(j).zip(coords.chunks_exact_mut(j)) {
        for (e, &(p, c)) in idx.iter().enumerate() {
            let dir = [
                src[c][0] - src[p][0],
                src[c][1] - src[p][1],
                src[c][2] - src[p][2],
            ];
            let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            if !(len > 0.0) {
                let (parent, child) = topology.edges[e];
                return Err(Error::DegenerateSegment { parent, child });
            }
            let f = topology.reference_lengths[e] / len;
            let base = dst[p];
            dst[c] = [
                base[0] + dir[0] * f,
                base[1] + dir[1] * f,
                base[2] + dir[2] * f,
            ];
        }
    }
    Ok(Sequence {
        coords,
        stage: Stage::LimbNormalized,
        ..seq.clone()
    })
}

/// Named set of joint ids in dataset numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSubset {
    pub name: String,
    ids: Vec<u32>,
}

impl JointSubset {
    pub fn new(name: impl Into<String>, ids: Vec<u32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("joint subset is empty"));
        }
        let distinct: BTreeSet<u32> = ids.iter().copied().collect();
        if distinct.len() != ids.len() || ids.contains(&0) {
            return Err(Error::invalid(format!(
                "joint ids must be distinct and 1-based, got {ids:?}"
            )));
        }
        Ok(Self {
            name: name.into(),
            ids,
        })
    }

    pub fn all(joint_count: usize) -> Self {
        Self {
            name: "all".into(),
            ids: (1..=joint_count as u32).collect(),
        }
    }

    /// Florence3D-Action joint configurations A to I.
    pub fn florence(name: char) -> Result<Self> {
        let range = |a: u32, b: u32| (a..=b).collect::<Vec<_>>();
        let ids = match name.to_ascii_uppercase() {
            'A' => vec![6, 9],
            'B' => vec![1, 6, 9],
            'C' => vec![6, 9, 12, 15],
            'D' => vec![4, 6, 7, 9, 11, 14],
            'E' => vec![4, 6, 7, 9, 11, 12, 14, 15],
            'F' => range(4, 15),
            'G' => [vec![1], range(4, 15)].concat(),
            'H' => [vec![1, 2], range(4, 15)].concat(),
            'I' => range(1, 15),
            other => {
                return Err(Error::invalid(format!(
                    "unknown joint configuration {other:?}"
                )))
            }
        };
        Self::new(name.to_ascii_uppercase().to_string(), ids)
    }

    /// `all`, a configuration letter `A`-`I`, or a list such as `1,4-15`.
    pub fn parse(spec: &str, joint_count: usize) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("all") {
            return Ok(Self::all(joint_count));
        }
        if spec.len() == 1 && spec.chars().all(|c| c.is_ascii_alphabetic()) {
            return Self::florence(spec.chars().next().unwrap());
        }
        let mut ids = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let num = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::invalid(format!("bad joint id {s:?} in subset {spec:?}")))
            };
            match part.split_once('-') {
                Some((a, b)) => ids.extend(num(a)?..=num(b)?),
                None => ids.push(num(part)?),
            }
        }
        Self::new(spec, ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Restricts a sequence to the listed joints, in subset order.
pub fn select_joints(seq: &Sequence, subset: &JointSubset) -> Result<Sequence> {
    let idx: Vec<usize> = subset
        .ids
        .iter()
        .map(|&id| {
            seq.joint_index(id).ok_or_else(|| {
                Error::invalid(format!("joint {id} is not part of sequence {}", seq.id))
            })
        })
        .collect::<Result<_>>()?;
    let coords = seq
        .frames()
        .flat_map(|f| idx.iter().map(move |&i| f[i]))
        .collect();
    Ok(Sequence {
        joint_ids: subset.ids.clone(),
        coords,
        ..seq.clone()
    })
}

/// Per-axis affine map `scale * p + offset` into the pivot interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScaling {
    pub scale: [f64; 3],
    pub offset: [f64; 3],
}

impl Default for AxisScaling {
    fn default() -> Self {
        Self::identity()
    }
}

impl AxisScaling {
    pub fn identity() -> Self {
        Self {
            scale: [1.0; 3],
            offset: [0.0; 3],
        }
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        [
            self.scale[0] * p[0] + self.offset[0],
            self.scale[1] * p[1] + self.offset[1],
            self.scale[2] * p[2] + self.offset[2],
        ]
    }

    /// Maps the `lo_pct`..`hi_pct` percentile range of each axis onto `[-1, 1]`.
    pub fn fit_percentiles(points: &[Point3], lo_pct: f64, hi_pct: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("no points to fit a scaling on"));
        }
        let mut out = Self::identity();
        for axis in 0..3 {
            let mut v: Vec<f64> = points.iter().map(|p| p[axis]).collect();
            v.sort_by(f64::total_cmp);
            let lo = percentile(&v, lo_pct);
            let hi = percentile(&v, hi_pct);
            let mid = 0.5 * (lo + hi);
            let scale = if hi > lo { 2.0 / (hi - lo) } else { 1.0 };
            out.scale[axis] = scale;
            out.offset[axis] = -scale * mid;
        }
        Ok(out)
    }
}

/// Linear-interpolated percentile of sorted values.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> SkeletonTopology {
        SkeletonTopology::with_lengths(&[(1, 2), (2, 3), (1, 4)], &[1.0, 0.5, 2.0]).unwrap()
    }

    fn seq(frames: Vec<Vec<Point3>>) -> Sequence {
        Sequence::new("s", 1, 1, frames).unwrap()
    }

    #[test]
    fn hip_center_zeroes_the_hip() {
        let s = seq(vec![
            vec![[1.0, 2.0, 3.0], [2.0, 2.0, 3.0]],
            vec![[0.5, 0.0, 1.0], [4.0, 4.0, 4.0]],
        ]);
        let c = hip_center(&s, 1).unwrap();
        assert!(c.frames().all(|f| f[0] == [0.0, 0.0, 0.0]));
        assert_eq!(c.point(0, 1), [1.0, 0.0, 0.0]);
        assert_eq!(hip_center(&c, 1).unwrap(), c);
        assert!(hip_center(&s, 9).is_err());
    }

    #[test]
    fn hip_center_removes_translation() {
        let s = seq(vec![vec![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]]);
        let moved = s.translated([5.0, -3.0, 0.25]);
        assert_eq!(
            hip_center(&moved, 1).unwrap().coords(),
            hip_center(&s, 1).unwrap().coords()
        );
    }

    #[test]
    fn topology_orders_parents_first() {
        let t = SkeletonTopology::from_edges(&[(2, 3), (1, 2)]).unwrap();
        assert_eq!(t.root(), 1);
        assert_eq!(t.edges(), &[(1, 2), (2, 3)]);
    }

    #[test]
    fn topology_rejects_non_trees() {
        assert!(SkeletonTopology::from_edges(&[(1, 2), (3, 2)]).is_err());
        assert!(SkeletonTopology::from_edges(&[(1, 2), (3, 4)]).is_err());
        assert!(SkeletonTopology::from_edges(&[(1, 1)]).is_err());
    }

    #[test]
    fn topology_parse_with_comments() {
        let t =
            SkeletonTopology::parse("# tree\n1 2\n\n2 3 0.5 # elbow\n", Path::new("t")).unwrap();
        assert_eq!(t.reference_lengths(), &[1.0, 0.5]);
        let err = SkeletonTopology::parse("1 2\n2\n", Path::new("t")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn limbs_scaled_copy_is_restored() {
        let s = seq(vec![vec![
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [1.0, 0.5, 0.0],
            [0.0, -2.0, 0.0],
        ]]);
        let s = hip_center(&s, 1).unwrap();
        let n = normalize_limbs(&s, &chain()).unwrap();
        assert_eq!(n.coords(), s.coords());
        let doubled = Sequence {
            coords: s
                .coords()
                .iter()
                .map(|p| [2.0 * p[0], 2.0 * p[1], 2.0 * p[2]])
                .collect(),
            ..s.clone()
        };
        let restored = normalize_limbs(&doubled, &chain()).unwrap();
        for (a, b) in restored.coords().iter().zip(s.coords()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn limbs_require_hip_centering() {
        let s = seq(vec![vec![
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [1.0, 0.5, 0.0],
            [0.0, -2.0, 0.0],
        ]]);
        assert!(matches!(
            normalize_limbs(&s, &chain()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn limbs_degenerate_segment_is_named() {
        let s = seq(vec![vec![
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, -2.0, 0.0],
        ]]);
        let s = hip_center(&s, 1).unwrap();
        match normalize_limbs(&s, &chain()) {
            Err(Error::DegenerateSegment {
                parent: 2,
                child: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn select_joints_behaviour() {
        let frames = vec![(0..15).map(|i| [i as f64, 0.0, 0.0]).collect::<Vec<_>>()];
        let s = seq(frames);
        let all = JointSubset::florence('I').unwrap();
        assert_eq!(select_joints(&s, &all).unwrap(), s);
        let a = JointSubset::florence('A').unwrap();
        let once = select_joints(&s, &a).unwrap();
        assert_eq!(once.joint_count(), 2);
        assert_eq!(once.point(0, 1), [8.0, 0.0, 0.0]);
        assert_eq!(select_joints(&once, &a).unwrap(), once);
        let bad = JointSubset::new("x", vec![16]).unwrap();
        assert!(select_joints(&s, &bad).is_err());
    }

    #[test]
    fn subset_parsing() {
        assert_eq!(
            JointSubset::parse("1,4-6", 15).unwrap().ids(),
            &[1, 4, 5, 6]
        );
        assert_eq!(JointSubset::parse("E", 15).unwrap().len(), 8);
        assert_eq!(JointSubset::parse("all", 4).unwrap().ids(), &[1, 2, 3, 4]);
        assert!(JointSubset::parse("1,1", 4).is_err());
        assert_eq!(JointSubset::florence('D').unwrap().len(), 6);
    }

    #[test]
    fn percentile_scaling_maps_into_unit_interval() {
        let pts: Vec<Point3> = (0..=100)
            .map(|i| [i as f64, 2.0 * i as f64 - 50.0, 3.0])
            .collect();
        let s = AxisScaling::fit_percentiles(&pts, 0.0, 100.0).unwrap();
        assert_eq!(s.apply([0.0, -50.0, 3.0])[..2], [-1.0, -1.0]);
        assert_eq!(s.apply([100.0, 150.0, 3.0])[..2], [1.0, 1.0]);
        assert_eq!(s.apply([0.0, 0.0, 3.0])[2], 0.0);
    }

    #[test]
    fn segment_repetition_layout() {
        let s = seq((0..4).map(|i| vec![[i as f64, 0.0, 0.0]]).collect());
        let r = s.repeat_segment(1, 2, 3).unwrap();
        let xs: Vec<f64> = r.coords().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.repeat_frames(2).frame_count(), 8);
        assert_eq!(s.reversed().point(0, 0), [3.0, 0.0, 0.0]);
    }
}
