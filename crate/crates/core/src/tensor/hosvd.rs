use nalgebra::{DMatrix, SVD};

use super::Tensor3;
use crate::error::{Error, Result};

/// Core tensor and per-mode orthogonal factors of a higher-order SVD.
///
/// The input is recovered as `core x1 A1 x2 A2 x3 A3`.
#[derive(Debug, Clone)]
pub struct HosvdFactors {
    pub core: Tensor3,
    pub factors: [DMatrix<f64>; 3],
}

impl HosvdFactors {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        Self::expand(&self.core, &self.factors)
    }

    /// `core x1 A1 x2 A2 x3 A3` for an arbitrary core of matching shape.
    pub fn expand(core: &Tensor3, factors: &[DMatrix<f64>; 3]) -> Result<Tensor3> {
        core.mode_product(&factors[0], 1)?
            .mode_product(&factors[1], 2)?
            .mode_product(&factors[2], 3)
    }
}

pub fn hosvd(t: &Tensor3) -> Result<HosvdFactors> {
    hosvd_truncated(t, None)
}

/// HOSVD keeping at most `ranks[n]` leading singular vectors in mode `n + 1`.
pub fn hosvd_truncated(t: &Tensor3, ranks: Option<[usize; 3]>) -> Result<HosvdFactors> {
    if t.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("hosvd input must be finite"));
    }
    let mut factors = Vec::with_capacity(3);
    for mode in 1..=3 {
        let d = t.dims()[mode - 1];
        let keep = ranks.map_or(d, |r| r[mode - 1].clamp(1, d));
        let full = left_singular_basis(&t.unfold(mode)?, mode)?;
        factors.push(full.columns(0, keep).into_owned());
    }
    let factors: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
    let core = t
        .mode_product(&factors[0].transpose(), 1)?
        .mode_product(&factors[1].transpose(), 2)?
        .mode_product(&factors[2].transpose(), 3)?;
    Ok(HosvdFactors { core, factors })
}

/// Full `d x d` orthogonal basis of left singular vectors, ordered by
/// decreasing singular value, each column signed so that its
/// largest-magnitude entry is positive.
fn left_singular_basis(unfolded: &DMatrix<f64>, mode: usize) -> Result<DMatrix<f64>> {
    let d = unfolded.nrows();
    if unfolded.iter().all(|&x| x == 0.0) {
        return Ok(DMatrix::identity(d, d));
    }
    // Tall unfoldings get zero columns so the SVD returns a square U.
    let padded = if unfolded.ncols() < d {
        let mut p = DMatrix::zeros(d, d);
        p.columns_mut(0, unfolded.ncols()).copy_from(unfolded);
        p
    } else {
        unfolded.clone()
    };
    let svd =
        SVD::try_new(padded, true, false, f64::EPSILON, 0).ok_or(Error::SvdFailure { mode })?;
    let u = svd.u.ok_or(Error::SvdFailure { mode })?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let mut pivot = 0;
        for r in 1..d {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis[(r, dst)] = sign * col[r];
        }
    }
    Ok(basis)
}
