use nalgebra::DMatrix;

/// Moore-Penrose pseudo-inverse by SVD. Singular values at or below
/// `rcond * sigma_max` are treated as zero.
pub fn pinv(a: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(rcond * smax).expect("U and V were requested")
}

/// Cutoff that drops only values indistinguishable from round-off.
pub fn machine_rcond(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// `‖A A⁺ A − A‖_F / ‖A‖_F`
pub fn pinv_residual(a: &DMatrix<f64>, ap: &DMatrix<f64>) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        return 0.0;
    }
    (a * ap * a - a).norm() / n
}

pub(crate) fn col(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let d = m.nrows();
    &m.as_slice()[j * d..(j + 1) * d]
}

pub(crate) fn col_mut(m: &mut DMatrix<f64>, j: usize) -> &mut [f64] {
    let d = m.nrows();
    &mut m.as_mut_slice()[j * d..(j + 1) * d]
}

pub(crate) fn normalize_columns(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let c = col_mut(m, j);
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            c.iter_mut().for_each(|x| *x /= n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_tall_matrix() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        let ap = pinv(&a, machine_rcond(3, 2));
        let eye = &ap * &a;
        assert!((eye - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!(pinv_residual(&a, &ap) < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        let ap = pinv(&a, machine_rcond(3, 3));
        assert!(pinv_residual(&a, &ap) < 1e-12);
        assert!((&ap * &a * &ap - &ap).norm() < 1e-10);
    }
}
