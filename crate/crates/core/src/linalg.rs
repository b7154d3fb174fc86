//! Dense complex linear algebra helpers: blocked products, Hermitian
//! eigendecompositions, LU with singularity detection and a Bartels-Stewart
//! Lyapunov solver.

use matrixmultiply::CGemmOption;
use nalgebra::{Dim, Matrix, RawStorage, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
pub type RMat = nalgebra::DMatrix<f64>;
pub type RVec = nalgebra::DVector<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `c = alpha * a * b + beta * c` using the cache-blocked complex kernel.
pub fn gemm<R1, C1, S1, R2, C2, S2>(
    alpha: C64,
    a: &Matrix<C64, R1, C1, S1>,
    b: &Matrix<C64, R2, C2, S2>,
    beta: C64,
    c: &mut CMat,
) where
    R1: Dim,
    C1: Dim,
    S1: RawStorage<C64, R1, C1>,
    R2: Dim,
    C2: Dim,
    S2: RawStorage<C64, R2, C2>,
{
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "gemm inner dimension");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == ZERO {
            c.fill(ZERO);
        } else {
            *c *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2];
    // pointers and strides describe valid matrices of the asserted shapes.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa as isize,
            csa as isize,
            b.as_ptr() as *const [f64; 2],
            rsb as isize,
            csb as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

/// Product `a * b`.
pub fn matmul<R1, C1, S1, R2, C2, S2>(
    a: &Matrix<C64, R1, C1, S1>,
    b: &Matrix<C64, R2, C2, S2>,
) -> CMat
where
    R1: Dim,
    C1: Dim,
    S1: RawStorage<C64, R1, C1>,
    R2: Dim,
    C2: Dim,
    S2: RawStorage<C64, R2, C2>,
{
    let mut c = CMat::zeros(a.nrows(), b.ncols());
    gemm(ONE, a, b, ZERO, &mut c);
    c
}

/// Product `a^H * b` without forming the adjoint separately from a conjugate copy.
pub fn adjoint_mul<R1, C1, S1, R2, C2, S2>(
    a: &Matrix<C64, R1, C1, S1>,
    b: &Matrix<C64, R2, C2, S2>,
) -> CMat
where
    R1: Dim,
    C1: Dim,
    S1: RawStorage<C64, R1, C1>,
    R2: Dim,
    C2: Dim,
    S2: RawStorage<C64, R2, C2>,
{
    let ac = CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj());
    // the conjugated copy is column-major; read it transposed via swapped strides
    let (m, k) = (a.ncols(), a.nrows());
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "adjoint_mul inner dimension");
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    let (rsb, csb) = b.strides();
    // SAFETY: see `gemm`; the conjugated copy has row stride 1 and column
    // stride k, so its transpose has row stride k and column stride 1.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            ac.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            rsb as isize,
            csb as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Product `a * b^H`.
pub fn mul_adjoint(a: &CMat, b: &CMat) -> CMat {
    matmul(a, &b.adjoint())
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
pub fn hermitian_eig_desc(m: CMat) -> (RVec, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (RVec::zeros(0), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Real symmetric eigendecomposition, eigenvalues descending.
pub fn symmetric_eig_desc(m: RMat) -> (RVec, RMat) {
    let n = m.nrows();
    if n == 0 {
        return (RVec::zeros(0), RMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = RMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur =
        nalgebra::Schur::try_new(m.clone(), 1e-14, 100_000).ok_or(Error::NoConvergence {
            iterations: 100_000,
        })?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// LU factorization with partial pivoting that rejects numerically singular
/// matrices instead of silently producing infinities.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseLu {
    /// Relative pivot threshold below which the matrix is declared singular.
    pub const PIVOT_TOL: f64 = 1e-14;

    pub fn new(m: CMat) -> Result<Self> {
        Self::with_freq(m, None)
    }

    pub fn with_freq(m: CMat, freq: Option<usize>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::dim(
                "LU",
                "square matrix",
                format!("{n}x{}", m.ncols()),
            ));
        }
        let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let lu = m.lu();
        let u = lu.u();
        let min_piv = (0..n)
            .map(|i| u[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        if n > 0 && (!(min_piv > Self::PIVOT_TOL * scale) || !min_piv.is_finite()) {
            return Err(Error::Singular {
                freq,
                detail: format!("pivot {min_piv:.3e} relative to scale {scale:.3e}"),
            });
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &CMat) -> CMat {
        assert_eq!(rhs.nrows(), self.n, "LU solve rhs rows");
        let mut x = rhs.clone();
        self.lu.solve_mut(&mut x);
        x
    }

    pub fn solve_vec(&self, rhs: &CVec) -> CVec {
        let mut x = rhs.clone();
        self.lu.solve_mut(&mut x);
        x
    }

    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.n, self.n))
    }
}

/// Solve `A X + X A^H + Q = 0` for stable `A` by the Bartels-Stewart method
/// on the complex Schur form.
pub fn lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::dim(
            "lyapunov",
            format!("{n}x{n}"),
            format!("{:?}", q.shape()),
        ));
    }
    let schur =
        nalgebra::Schur::try_new(a.clone(), 1e-14, 100_000).ok_or(Error::NoConvergence {
            iterations: 100_000,
        })?;
    let (u, t) = schur.unpack();
    let qt = adjoint_mul(&u, &matmul(q, &u));
    let mut y = CMat::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs: CVec = -qt.column(j);
        for l in (j + 1)..n {
            let c = t[(j, l)].conj();
            if c != ZERO {
                let yl = y.column(l).clone_owned();
                rhs.axpy(-c, &yl, ONE);
            }
        }
        let shift = t[(j, j)].conj();
        // back substitution with (T + shift I), T upper triangular
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for m in (i + 1)..n {
                s -= t[(i, m)] * y[(m, j)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() == 0.0 {
                return Err(Error::Singular {
                    freq: None,
                    detail: "Lyapunov operator singular (eigenvalues symmetric about the imaginary axis)".into(),
                });
            }
            y[(i, j)] = s / d;
        }
    }
    Ok(matmul(&u, &mul_adjoint(&y, &u)))
}

/// `m^n` by repeated squaring.
pub fn matrix_power(m: &CMat, mut n: usize) -> CMat {
    let mut result = CMat::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = matmul(&result, &base);
        }
        n >>= 1;
        if n > 0 {
            base = matmul(&base, &base);
        }
    }
    result
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm of `a - b` divided by the Frobenius norm of `b`.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let den = b.norm();
    let num = (a - b).norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Embed a real matrix into the complex field.
pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
        CMat::from_fn(m, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn gemm_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_mat(&mut rng, 7, 5);
        let b = rand_mat(&mut rng, 5, 3);
        assert!(rel_diff(&matmul(&a, &b), &(&a * &b)) < 1e-14);
        assert!(rel_diff(&adjoint_mul(&a, &a), &(a.adjoint() * &a)) < 1e-14);
        let view = a.columns(1, 3);
        let bv = b.rows(0, 3);
        assert!(rel_diff(&matmul(&view, &bv), &(view * bv)) < 1e-14);
    }

    #[test]
    fn gemm_handles_empty_dimensions() {
        let a = CMat::zeros(3, 0);
        let b = CMat::zeros(0, 2);
        assert_eq!(matmul(&a, &b), CMat::zeros(3, 2));
        assert_eq!(
            adjoint_mul(&CMat::zeros(0, 4), &CMat::zeros(0, 1)).shape(),
            (4, 1)
        );
    }

    #[test]
    fn lu_flags_singular_matrix() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        assert!(matches!(DenseLu::new(m), Err(Error::Singular { .. })));
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let a = rand_mat(&mut rng, n, n) - CMat::identity(n, n) * C64::new(3.0, 0.0);
        let b = rand_mat(&mut rng, n, 3);
        let q = mul_adjoint(&b, &b);
        let x = lyapunov(&a, &q).unwrap();
        let res = &a * &x + &x * a.adjoint() + &q;
        assert!(res.norm() / q.norm() < 1e-12);
        assert!(rel_diff(&x, &x.adjoint()) < 1e-12);
    }

    #[test]
    fn hermitian_eig_sorted_descending() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = rand_mat(&mut rng, 6, 6);
        let h = mul_adjoint(&b, &b);
        let (vals, vecs) = hermitian_eig_desc(h.clone());
        for i in 1..6 {
            assert!(vals[i - 1] >= vals[i]);
        }
        let recon = &vecs * CMat::from_diagonal(&vals.map(|x| C64::new(x, 0.0))) * vecs.adjoint();
        assert!(rel_diff(&recon, &h) < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 8, 24] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let q: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((q - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn power_by_squaring() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_mat(&mut rng, 4, 4);
        let mut direct = CMat::identity(4, 4);
        for _ in 0..13 {
            direct = &direct * &a;
        }
        assert!(rel_diff(&matrix_power(&a, 13), &direct) < 1e-12);
        assert_eq!(matrix_power(&a, 0), CMat::identity(4, 4));
    }
}
