use nalgebra::DMatrix;

use super::Tensor3;
use crate::binomial;
use crate::error::{Error, Result};

/// Number of index triples `i <= j <= k` over `d` values.
pub fn simplex_len(d: usize) -> usize {
    binomial(d + 2, 3)
}

#[inline]
fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn tet(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

#[inline]
fn sort3(a: usize, b: usize, c: usize) -> (usize, usize, usize) {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (b, c) = if b <= c { (b, c) } else { (c, b) };
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    (a, b, c)
}

/// Number of distinct index permutations of `(i, j, k)`.
#[inline]
pub(crate) fn multiplicity(i: usize, j: usize, k: usize) -> f64 {
    if i == j && j == k {
        1.0
    } else if i == j || j == k || i == k {
        3.0
    } else {
        6.0
    }
}

/// Symmetric `d x d` matrix, upper triangle packed column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    side: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            packed: vec![0.0; tri(side)],
        }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(tri(side));
        for j in 0..side {
            for i in 0..=j {
                packed.push(f(i, j));
            }
        }
        Self { side, packed }
    }

    /// Symmetric part `(m + m^T) / 2` of a square matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "symmetric matrix from a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| {
            0.5 * (m[(i, j)] + m[(j, i)])
        }))
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.packed[tri(j) + i]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.side, self.side, |i, j| self.get(i, j))
    }
}

/// Super-symmetric `d x d x d` tensor stored as its upper simplex.
///
/// Entry `(i, j, k)` with `i <= j <= k` lives at `k(k+1)(k+2)/6 + j(j+1)/2 + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    side: usize,
    simplex: Vec<f64>,
}

impl SymTensor3 {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            simplex: vec![0.0; simplex_len(side)],
        }
    }

    pub fn from_simplex(side: usize, simplex: Vec<f64>) -> Result<Self> {
        if side == 0 || simplex.len() != simplex_len(side) {
            return Err(Error::invalid(format!(
                "side {side} needs {} simplex entries, got {}",
                simplex_len(side),
                simplex.len()
            )));
        }
        Ok(Self { side, simplex })
    }

    /// Rank-one tensor `v ⊗ v ⊗ v`.
    pub fn outer3(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("outer3 of an empty vector"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("outer3 input must be finite"));
        }
        let mut t = Self::zeros(v.len());
        t.add_outer3(v, 1.0);
        Ok(t)
    }

    /// `self += weight * (v ⊗ v ⊗ v)`.
    pub fn add_outer3(&mut self, v: &[f64], weight: f64) {
        assert_eq!(
            v.len(),
            self.side,
            "outer3 vector length must match tensor side"
        );
        let mut o = 0;
        for k in 0..self.side {
            let wk = weight * v[k];
            for j in 0..=k {
                let wjk = wk * v[j];
                for &vi in &v[..=j] {
                    self.simplex[o] += wjk * vi;
                    o += 1;
                }
            }
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn simplex(&self) -> &[f64] {
        &self.simplex
    }

    pub fn scale(&mut self, factor: f64) {
        self.simplex.iter_mut().for_each(|x| *x *= factor);
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (i, j, k) = sort3(i, j, k);
        self.simplex[tet(k) + tri(j) + i]
    }

    pub fn to_dense(&self) -> Tensor3 {
        let d = self.side;
        Tensor3::from_fn([d, d, d], |i, j, k| self.get(i, j, k))
    }

    /// Averages a cubic tensor over all index permutations.
    pub fn symmetrize(t: &Tensor3) -> Result<Self> {
        let [d1, d2, d3] = t.dims();
        if d1 != d2 || d2 != d3 {
            return Err(Error::invalid(format!(
                "symmetrize needs a cubic tensor, got {:?}",
                t.dims()
            )));
        }
        let mut out = Self::zeros(d1);
        let mut o = 0;
        for k in 0..d1 {
            for j in 0..=k {
                for i in 0..=j {
                    let sum = t.get(i, j, k)
                        + t.get(i, k, j)
                        + t.get(j, i, k)
                        + t.get(j, k, i)
                        + t.get(k, i, j)
                        + t.get(k, j, i);
                    out.simplex[o] = sum / 6.0;
                    o += 1;
                }
            }
        }
        Ok(out)
    }

    /// Slice `X[:, :, s]`.
    pub fn slice(&self, s: usize) -> SymMatrix {
        SymMatrix::from_fn(self.side, |i, j| self.get(i, j, s))
    }

    /// Dense inner product, computed on the simplex with permutation weights.
    pub fn inner(&self, other: &SymTensor3) -> Result<f64> {
        if self.side != other.side {
            return Err(Error::invalid(format!(
                "inner product of symmetric tensors with sides {} and {}",
                self.side, other.side
            )));
        }
        let mut acc = 0.0;
        let mut o = 0;
        for k in 0..self.side {
            for j in 0..=k {
                for i in 0..=j {
                    acc += multiplicity(i, j, k) * self.simplex[o] * other.simplex[o];
                    o += 1;
                }
            }
        }
        Ok(acc)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).sqrt()
    }

    /// Simplex entries scaled by the square root of their multiplicity, so
    /// plain dot products of these vectors equal dense tensor inner products.
    pub fn weighted_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.simplex.len());
        let mut o = 0;
        for k in 0..self.side {
            for j in 0..=k {
                for i in 0..=j {
                    out.push(multiplicity(i, j, k).sqrt() * self.simplex[o]);
                    o += 1;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_outer3(v: &[f64]) -> Tensor3 {
        let d = v.len();
        let mut t = Tensor3::zeros([d, d, d]);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    t.set(i, j, k, v[i] * v[j] * v[k]);
                }
            }
        }
        t
    }

    #[test]
    fn simplex_sizes() {
        assert_eq!(simplex_len(1), 1);
        assert_eq!(simplex_len(4), 20);
        assert_eq!(simplex_len(21), 1771);
    }

    #[test]
    fn outer3_basis_vector() {
        let t = SymTensor3::outer3(&[1.0, 0.0]).unwrap();
        assert_eq!(t.get(0, 0, 0), 1.0);
        let nonzero = t.simplex().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn outer3_small_vector() {
        let t = SymTensor3::outer3(&[1.0, 2.0]).unwrap();
        assert_eq!(t.get(1, 1, 1), 8.0);
        assert_eq!(t.get(0, 1, 1), 4.0);
        assert_eq!(t.get(0, 0, 1), 2.0);
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.get(1, 0, 1), 4.0);
    }

    #[test]
    fn outer3_empty_is_invalid() {
        assert!(matches!(
            SymTensor3::outer3(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn outer3_matches_triple_loop() {
        let v = [0.37, -1.2, 2.5, 0.01];
        let t = SymTensor3::outer3(&v).unwrap().to_dense();
        assert!(t.relative_error(&dense_outer3(&v)) <= 1e-12);
    }

    #[test]
    fn symmetrize_of_symmetric_is_identity() {
        let v = [0.5, 1.5, -0.25];
        let s = SymTensor3::outer3(&v).unwrap();
        let back = SymTensor3::symmetrize(&s.to_dense()).unwrap();
        for (a, b) in back.simplex().iter().zip(s.simplex()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn sym_matrix_packing() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let s = SymMatrix::from_matrix(&m).unwrap();
        assert_eq!(s.to_matrix(), m);
        assert_eq!(s.get(2, 1), s.get(1, 2));
    }

    proptest! {
        #[test]
        fn sym_inner_matches_dense(
            a in proptest::collection::vec(-2.0f64..2.0, 1..=6),
            seed in -2.0f64..2.0,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| (x * seed + i as f64 * 0.3).cos()).collect();
            let sa = SymTensor3::outer3(&a).unwrap();
            let sb = SymTensor3::outer3(&b).unwrap();
            let dense = sa.to_dense().inner(&sb.to_dense()).unwrap();
            let sym = sa.inner(&sb).unwrap();
            prop_assert!((dense - sym).abs() <= 1e-10 * (1.0 + dense.abs()));
            let wa = sa.weighted_vector();
            let wb = sb.weighted_vector();
            let dot: f64 = wa.iter().zip(&wb).map(|(x, y)| x * y).sum();
            prop_assert!((dot - dense).abs() <= 1e-10 * (1.0 + dense.abs()));
        }

        #[test]
        fn dense_expansion_is_super_symmetric(v in proptest::collection::vec(-3.0f64..3.0, 1..=5)) {
            let t = SymTensor3::outer3(&v).unwrap().to_dense();
            let d = v.len();
            for i in 0..d { for j in 0..d { for k in 0..d {
                let x = t.get(i, j, k);
                prop_assert_eq!(x, t.get(j, i, k));
                prop_assert_eq!(x, t.get(k, j, i));
                prop_assert_eq!(x, t.get(i, k, j));
            }}}
        }
    }
}
