use nalgebra::{DMatrix, SymmetricEigen};

use super::{SymMatrix, Tensor3};
use crate::error::{Error, Result};

pub(crate) fn check_exponent(name: &str, gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in (0, 1], got {gamma}"
        )))
    }
}

/// Eigenvalues at or below this fraction of the largest magnitude are
/// roundoff and are clamped to zero with the negative ones.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `U diag(max(lambda, 0)^gamma) U^T` for the eigendecomposition of `m`.
pub fn psd_power(m: &SymMatrix, gamma: f64) -> Result<SymMatrix> {
    check_exponent("gamma", gamma)?;
    let eig = SymmetricEigen::try_new(m.to_matrix(), f64::EPSILON, 0).ok_or_else(|| {
        Error::NumericalFailure("symmetric eigendecomposition did not converge".into())
    })?;
    let floor = EIGEN_FLOOR * eig.eigenvalues.amax();
    let powered: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > floor { l.powf(gamma) } else { 0.0 })
        .collect();
    let u = &eig.eigenvectors;
    let n = m.side();
    let scaled = DMatrix::from_fn(n, n, |i, j| u[(i, j)] * powered[j]);
    let out = scaled * u.transpose();
    SymMatrix::from_matrix(&out)
}

/// Elementwise `sgn(x) |x|^gamma`.
pub fn sgn_power(t: &Tensor3, gamma: f64) -> Tensor3 {
    let mut out = t.clone();
    if gamma != 1.0 {
        out.data_mut()
            .iter_mut()
            .for_each(|x| *x = x.signum() * x.abs().powf(gamma));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_psd(n: usize, seed: u64) -> SymMatrix {
        let mut s = seed;
        let b = DMatrix::from_fn(n, n, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        SymMatrix::from_matrix(&(&b * b.transpose())).unwrap()
    }

    #[test]
    fn identity_is_fixed() {
        let id = SymMatrix::from_fn(4, |i, j| (i == j) as u8 as f64);
        for gamma in [0.1, 0.5, 1.0] {
            let p = psd_power(&id, gamma).unwrap().to_matrix();
            assert!((p - DMatrix::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_square_root() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { [4.0, 9.0][i] } else { 0.0 });
        let p = psd_power(&m, 0.5).unwrap();
        assert!((p.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((p.get(1, 1) - 3.0).abs() < 1e-12);
        assert!(p.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn unit_exponent_roundtrip() {
        let m = random_psd(6, 11);
        let p = psd_power(&m, 1.0).unwrap();
        assert!((p.to_matrix() - m.to_matrix()).norm() <= 1e-10);
    }

    #[test]
    fn eigenvalues_are_powered() {
        let m = random_psd(5, 3);
        let gamma = 0.36;
        let mut want: Vec<f64> = SymmetricEigen::new(m.to_matrix())
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0).powf(gamma))
            .collect();
        let mut got: Vec<f64> = SymmetricEigen::new(psd_power(&m, gamma).unwrap().to_matrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (w, g) in want.iter().zip(&got) {
            assert!((w - g).abs() <= 1e-9, "{w} vs {g}");
        }
    }

    #[test]
    fn negative_eigenvalues_are_clamped() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { [1.0, -1e-3][i] } else { 0.0 });
        let p = psd_power(&m, 0.5).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(p.get(1, 1).abs() < 1e-12);
    }

    #[test]
    fn gamma_out_of_range() {
        let id = SymMatrix::from_fn(2, |i, j| (i == j) as u8 as f64);
        assert!(psd_power(&id, 0.0).is_err());
        assert!(psd_power(&id, 1.5).is_err());
    }

    #[test]
    fn sgn_power_fixed_points_and_closed_form() {
        let t = Tensor3::from_vec([4, 1, 1], vec![0.0, 1.0, -1.0, -4.0]).unwrap();
        let p = sgn_power(&t, 0.5);
        assert_eq!(p.data(), &[0.0, 1.0, -1.0, -2.0]);
        assert_eq!(sgn_power(&t, 1.0), t);
        let q = sgn_power(&t, 0.2);
        assert_eq!(&q.data()[..3], &[0.0, 1.0, -1.0]);
    }
}
