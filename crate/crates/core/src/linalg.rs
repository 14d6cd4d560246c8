//! Small dense linear-algebra helpers.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// Orthonormal basis of the orthogonal complement of the column span of `t`
/// (assumed full column rank).
pub fn orth_complement(t: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = t.shape();
    let mut aug = DMatrix::zeros(n, n + k);
    aug.columns_mut(0, k).copy_from(t);
    aug.columns_mut(k, n).fill_with_identity();
    let q = aug.qr().q();
    q.columns(k, n - k).into_owned()
}

/// Unit vector minimizing `|A v|`, i.e. the right singular vector of the
/// smallest singular value.
pub fn null_vector(a: &DMatrix<C64>) -> DVector<C64> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (i, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty");
    let mut v = DVector::from_fn(n, |j, _| v_t[(i, j)].conj());
    // fix the phase so the largest entry is real positive
    let (jmax, _) = v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).expect("nonempty");
    let ph = v[jmax] / v[jmax].norm();
    v /= ph;
    v
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<C64> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal() {
        let t = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]) / 3.0;
        let q = orth_complement(&t);
        assert_eq!(q.shape(), (3, 2));
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!((q.transpose() * &t).abs().max() < 1e-14);
    }

    #[test]
    fn null_vector_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let a = to_complex(&m) - DMatrix::identity(2, 2) * C64::new(0.0, 1.0);
        let v = null_vector(&a);
        assert!((&a * &v).norm() < 1e-14);
        let ev = sorted_eigenvalues(&m);
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
    }
}
