//! Dense and symmetric third-order tensors.
//!
//! [`Tensor3`] stores its entries mode-1 fastest: entry `(i, j, k)` of a
//! `d1 x d2 x d3` tensor lives at `i + d1 * (j + d2 * k)`. Unfoldings follow
//! the same convention; the mode-`n` unfolding has one row per index of mode
//! `n`, and its columns run over the remaining modes with the lower mode
//! varying fastest.

mod hosvd;
mod power;
mod sym;

pub use hosvd::{hosvd, hosvd_truncated, HosvdFactors};
pub(crate) use power::check_exponent;
pub use power::{psd_power, sgn_power, EIGEN_FLOOR};
pub use sym::{simplex_len, SymMatrix, SymTensor3};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

fn check_mode(mode: usize) -> Result<usize> {
    match mode {
        1..=3 => Ok(mode - 1),
        _ => Err(Error::invalid(format!(
            "tensor mode must be 1, 2 or 3, got {mode}"
        ))),
    }
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dims must be positive");
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "tensor of dims {dims:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let o = t.offset(i, j, k);
                    t.data[o] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Tensor whose slice `p` (third index) is `m * v[p]`.
    pub fn outer_asym(m: &DMatrix<f64>, v: &[f64]) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 || v.is_empty() {
            return Err(Error::invalid(
                "outer_asym needs a non-empty matrix and vector",
            ));
        }
        if m.iter().chain(v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("outer_asym inputs must be finite"));
        }
        let (d1, d2) = m.shape();
        let mut data = Vec::with_capacity(d1 * d2 * v.len());
        for &vp in v {
            for j in 0..d2 {
                for i in 0..d1 {
                    data.push(m[(i, j)] * vp);
                }
            }
        }
        Self::from_vec([d1, d2, v.len()], data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] += value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::invalid(format!(
                "inner product of tensors with dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// Relative Frobenius distance `|self - other| / max(|other|, eps)`.
    pub fn relative_error(&self, reference: &Tensor3) -> f64 {
        let diff: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / reference.frobenius_norm().max(f64::EPSILON)
    }

    fn strides(&self) -> [usize; 3] {
        [1, self.dims[0], self.dims[0] * self.dims[1]]
    }

    /// Column index of entry `idx` in the mode-`m` (0-based) unfolding.
    fn unfold_column(dims: [usize; 3], m: usize, idx: [usize; 3]) -> usize {
        match m {
            0 => idx[1] + dims[1] * idx[2],
            1 => idx[0] + dims[0] * idx[2],
            _ => idx[0] + dims[0] * idx[1],
        }
    }

    pub fn unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        let m = check_mode(mode)?;
        let cols = self.data.len() / self.dims[m];
        let mut out = DMatrix::zeros(self.dims[m], cols);
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let idx = [i, j, k];
                    out[(idx[m], Self::unfold_column(self.dims, m, idx))] = self.get(i, j, k);
                }
            }
        }
        Ok(out)
    }

    pub fn fold(matrix: &DMatrix<f64>, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let m = check_mode(mode)?;
        let total: usize = dims.iter().product();
        if dims.iter().any(|&d| d == 0)
            || matrix.nrows() != dims[m]
            || matrix.nrows() * matrix.ncols() != total
        {
            return Err(Error::invalid(format!(
                "cannot fold a {}x{} matrix along mode {mode} into dims {dims:?}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self::from_fn(dims, |i, j, k| {
            let idx = [i, j, k];
            matrix[(idx[m], Self::unfold_column(dims, m, idx))]
        }))
    }

    /// Mode-`mode` product: every mode fiber `x` is replaced by `matrix * x`.
    pub fn mode_product(&self, matrix: &DMatrix<f64>, mode: usize) -> Result<Self> {
        let m = check_mode(mode)?;
        if matrix.ncols() != self.dims[m] || matrix.nrows() == 0 {
            return Err(Error::invalid(format!(
                "mode-{mode} product needs a matrix with {} columns, got {}x{}",
                self.dims[m],
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut out_dims = self.dims;
        out_dims[m] = matrix.nrows();
        let mut out = Self::zeros(out_dims);
        let in_stride = self.strides()[m];
        let out_stride = out.strides()[m];
        let (a, b) = match m {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let fiber_len = self.dims[m];
        for q in 0..self.dims[b] {
            for p in 0..self.dims[a] {
                let mut idx = [0usize; 3];
                idx[a] = p;
                idx[b] = q;
                let in_base = self.offset(idx[0], idx[1], idx[2]);
                let out_base = out.offset(idx[0], idx[1], idx[2]);
                for r in 0..out_dims[m] {
                    let mut acc = 0.0;
                    for x in 0..fiber_len {
                        acc += matrix[(r, x)] * self.data[in_base + x * in_stride];
                    }
                    out.data[out_base + r * out_stride] = acc;
                }
            }
        }
        Ok(out)
    }
}
