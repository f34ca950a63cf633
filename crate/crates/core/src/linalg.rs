//! Small dense complex linear algebra used throughout: every matrix here is
//! M×M with M the array size, so nothing is sparse or blocked.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Absolute tolerance on max |A_ij - conj(A_ji)| before an input is rejected.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn zeros(m: usize) -> CMat {
    CMat::zeros(m, m)
}

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

/// v vᴴ.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Re tr(A B). For Hermitian A, B this is the real trace of the product.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Frobenius inner product Re tr(Aᴴ B).
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    inner(a, a).sqrt()
}

pub fn trace(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// aᴴ X a, real for Hermitian X.
pub fn quadratic_form(x: &CMat, a: &CVec) -> f64 {
    (a.adjoint() * x * a)[(0, 0)].re
}

pub fn asymmetry(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Rejects matrices whose asymmetry exceeds [`HERMITIAN_TOL`], symmetrizes the rest.
pub fn ensure_hermitian(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = asymmetry(a);
    if !(asym <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(hermitian_part(a))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// U diag(values) Uᴴ.
pub fn from_eig(values: &[f64], vectors: &CMat) -> CMat {
    let n = vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        for i in 0..n {
            let vi = v[i] * lam;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    out
}

/// Largest eigenvalue and its unit eigenvector.
pub fn principal(a: &CMat) -> (f64, CVec) {
    let (values, vectors) = eigh(a);
    (values[0], vectors.column(0).into_owned())
}

/// λ_max / tr for a PSD matrix; 1 for the zero matrix.
pub fn rank_ratio(a: &CMat) -> f64 {
    let tr = trace(a);
    if tr <= 0.0 {
        return 1.0;
    }
    let (lam, _) = principal(a);
    (lam / tr).min(1.0)
}

/// Nuclear norm (sum of singular values); equals the trace on PSD input.
pub fn nuclear_norm(a: &CMat) -> f64 {
    eigh(a).0.iter().map(|l| l.abs()).sum()
}

pub fn spectral_norm(a: &CMat) -> f64 {
    eigh(a).0.iter().fold(0.0_f64, |m, l| m.max(l.abs()))
}

pub fn cvec_norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_row_slice(
            2,
            2,
            &[C64::new(2.0, 0.0), C64::new(0.5, 0.5), C64::new(0.5, -0.5), C64::new(1.0, 0.0)],
        )
    }

    #[test]
    fn eigh_reconstructs_and_sorts() {
        let a = sample();
        let (vals, vecs) = eigh(&a);
        assert!(vals[0] >= vals[1]);
        let back = from_eig(&vals, &vecs);
        assert!(frobenius(&(back - &a)) < 1e-12);
    }

    #[test]
    fn trace_product_matches_dense_product() {
        let a = sample();
        let b = outer(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]));
        let dense = (&a * &b).trace().re;
        assert!((trace_product(&a, &b) - dense).abs() < 1e-12);
        assert!((inner(&a, &b) - dense).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut a = sample();
        a[(0, 1)] = C64::new(3.0, 0.0);
        assert!(matches!(ensure_hermitian(&a), Err(Error::NotHermitian { .. })));
        let mut b = sample();
        b[(0, 1)] += C64::new(1e-12, 0.0);
        assert!(ensure_hermitian(&b).is_ok());
    }

    #[test]
    fn rank_ratio_of_outer_product_is_one() {
        let v = CVec::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.7)]);
        assert!((rank_ratio(&outer(&v)) - 1.0).abs() < 1e-12);
        assert!((rank_ratio(&identity(4)) - 0.25).abs() < 1e-12);
        assert_eq!(rank_ratio(&zeros(3)), 1.0);
    }
}
