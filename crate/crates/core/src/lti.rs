//! Linear time-invariant systems `dq/dt = A q + B f`, `y = C q`, with the
//! inner-product weight, frequency grid and resolvent machinery.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint_mul, eigenvalues, matmul, CMat, CVec, DenseLu, RVec, C64, ONE, ZERO};
use crate::sparse::{BandedLu, CsrMatrix};

/// A linear map stored densely, sparsely, or implicitly as the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Dense(CMat),
    Sparse(CsrMatrix),
    Identity(usize),
}

impl Operator {
    pub fn nrows(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Sparse(m) => m.nrows(),
            Operator::Identity(n) => *n,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Operator::Dense(m) => m.ncols(),
            Operator::Sparse(m) => m.ncols(),
            Operator::Identity(n) => *n,
        }
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Operator::Dense(m) => {
                let xv = nalgebra::DVectorView::from_slice(x, x.len());
                let mut out = CMat::zeros(m.nrows(), 1);
                crate::linalg::gemm(ONE, m, &xv, ZERO, &mut out);
                y.copy_from_slice(out.as_slice());
            }
            Operator::Sparse(m) => m.matvec_into(x, y),
            Operator::Identity(_) => y.copy_from_slice(x),
        }
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.nrows());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn apply_mat(&self, x: &CMat) -> CMat {
        match self {
            Operator::Dense(m) => matmul(m, x),
            Operator::Sparse(m) => m.matmat(x),
            Operator::Identity(_) => x.clone(),
        }
    }

    /// `self^H * x`.
    pub fn adjoint_apply_mat(&self, x: &CMat) -> CMat {
        match self {
            Operator::Dense(m) => adjoint_mul(m, x),
            Operator::Sparse(m) => m.adjoint_matmat(x),
            Operator::Identity(_) => x.clone(),
        }
    }

    /// `x * self`.
    pub fn right_apply_mat(&self, x: &CMat) -> CMat {
        match self {
            Operator::Dense(m) => matmul(x, m),
            Operator::Sparse(m) => m.adjoint_matmat(&x.adjoint()).adjoint(),
            Operator::Identity(_) => x.clone(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Sparse(m) => m.to_dense(),
            Operator::Identity(n) => CMat::identity(*n, *n),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Operator::Sparse(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageKind {
    Dense,
    SparseCsr,
}

/// The triple (A, B, C). The spectral abscissa is computed on first request
/// and cached.
#[derive(Debug)]
pub struct LtiSystem {
    pub a: Operator,
    pub b: Operator,
    pub c: Operator,
    abscissa: OnceLock<f64>,
}

impl Clone for LtiSystem {
    fn clone(&self) -> Self {
        let s = Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            abscissa: OnceLock::new(),
        };
        if let Some(v) = self.abscissa.get() {
            let _ = s.abscissa.set(*v);
        }
        s
    }
}

/// Settings for the sparse rightmost-eigenvalue iteration.
#[derive(Clone, Copy, Debug)]
pub struct ArnoldiOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 80,
            max_restarts: 400,
            tol: 1e-8,
        }
    }
}

impl LtiSystem {
    pub fn new(a: Operator, b: Operator, c: Operator) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim("A", "square", format!("{}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::dim("B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("C cols", n, c.ncols()));
        }
        Ok(Self {
            a,
            b,
            c,
            abscissa: OnceLock::new(),
        })
    }

    /// Dense system with B = C = I.
    pub fn dense_identity_io(a: CMat) -> Result<Self> {
        let n = a.nrows();
        Self::new(
            Operator::Dense(a),
            Operator::Identity(n),
            Operator::Identity(n),
        )
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nf(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    pub fn storage_kind(&self) -> StorageKind {
        if self.a.is_sparse() {
            StorageKind::SparseCsr
        } else {
            StorageKind::Dense
        }
    }

    /// Maximum real part of the spectrum of A (cached).
    pub fn stability_check(&self) -> Result<f64> {
        self.stability_check_with(ArnoldiOptions::default())
    }

    pub fn stability_check_with(&self, opts: ArnoldiOptions) -> Result<f64> {
        if let Some(v) = self.abscissa.get() {
            return Ok(*v);
        }
        let v = match &self.a {
            Operator::Sparse(m) => rightmost_eigenvalue_arnoldi(m, opts)?.re,
            other => eigenvalues(&other.to_dense())?
                .into_iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let _ = self.abscissa.set(v);
        Ok(v)
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.stability_check()? < 0.0)
    }

    /// `L_k X = (i ω_k I - A) X`.
    pub fn apply_lk(&self, omega: f64, x: &CMat) -> CMat {
        let ax = self.a.apply_mat(x);
        x * C64::new(0.0, omega) - ax
    }

    /// Factorize `i ω_k I - A`.
    pub fn factorize_resolvent(&self, grid: &FrequencyGrid, k: usize) -> Result<ResolventFactor> {
        let w = grid.omega(k);
        match &self.a {
            Operator::Sparse(m) => Ok(ResolventFactor::Banded(BandedLu::new(
                &m.shifted(C64::new(0.0, w), -ONE),
                Some(k),
            )?)),
            other => {
                let n = self.nx();
                let mut l = -other.to_dense();
                for i in 0..n {
                    l[(i, i)] += C64::new(0.0, w);
                }
                Ok(ResolventFactor::Dense(DenseLu::with_freq(l, Some(k))?))
            }
        }
    }
}

/// LU factors of `i ω_k I - A`.
#[derive(Clone, Debug)]
pub enum ResolventFactor {
    Dense(DenseLu),
    Banded(BandedLu),
}

impl ResolventFactor {
    pub fn solve(&self, rhs: &CMat) -> CMat {
        match self {
            ResolventFactor::Dense(lu) => lu.solve(rhs),
            ResolventFactor::Banded(lu) => lu.solve(rhs),
        }
    }
}

/// Lazily populated per-frequency resolvent factorizations. Each slot is
/// written at most once; concurrent callers may populate different slots.
pub struct ResolventCache<'a> {
    sys: &'a LtiSystem,
    grid: FrequencyGrid,
    slots: Vec<OnceLock<ResolventFactor>>,
}

impl<'a> ResolventCache<'a> {
    pub fn new(sys: &'a LtiSystem, grid: FrequencyGrid) -> Self {
        Self {
            sys,
            grid,
            slots: (0..grid.n_omega()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn factor(&self, k: usize) -> Result<&ResolventFactor> {
        let slot = &self.slots[k];
        if let Some(f) = slot.get() {
            return Ok(f);
        }
        let f = self.sys.factorize_resolvent(&self.grid, k)?;
        let _ = slot.set(f);
        Ok(slot.get().expect("slot populated"))
    }

    /// `R_k rhs = (i ω_k I - A)^{-1} rhs`.
    pub fn solve(&self, k: usize, rhs: &CMat) -> Result<CMat> {
        if rhs.nrows() != self.sys.nx() {
            return Err(Error::dim("resolvent rhs", self.sys.nx(), rhs.nrows()));
        }
        Ok(self.factor(k)?.solve(rhs))
    }
}

/// One-shot resolvent solve (no caching).
pub fn resolvent_solve(
    sys: &LtiSystem,
    k: usize,
    grid: &FrequencyGrid,
    rhs: &CMat,
) -> Result<CMat> {
    if rhs.nrows() != sys.nx() {
        return Err(Error::dim("resolvent rhs", sys.nx(), rhs.nrows()));
    }
    Ok(sys.factorize_resolvent(grid, k)?.solve(rhs))
}

/// Uniform sampling grid of one block: `N_ω` samples spaced by `Δt`.
///
/// Frequency index `k` maps to the signed harmonic `k` for `k ≤ N_ω/2` and
/// `k - N_ω` above, so `ω_k` is the physical frequency of the band-limited
/// interpolant. All closed forms only use `e^{i ω_k Δt}`, which is the same
/// for both readings of the index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_omega: usize,
    dt: f64,
}

impl FrequencyGrid {
    pub fn new(n_omega: usize, dt: f64) -> Result<Self> {
        if n_omega == 0 {
            return Err(Error::Invalid("N_omega must be positive".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n_omega, dt })
    }

    pub fn n_omega(&self) -> usize {
        self.n_omega
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn period(&self) -> f64 {
        self.n_omega as f64 * self.dt
    }

    /// Signed harmonic number of index `k`.
    pub fn harmonic(&self, k: usize) -> i64 {
        let n = self.n_omega as i64;
        let k = k as i64;
        if 2 * k <= n {
            k
        } else {
            k - n
        }
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * self.harmonic(k) as f64 / self.period()
    }

    /// `e^{-i ω_k Δt}` computed from the exact rational phase.
    pub fn phase(&self, k: usize) -> C64 {
        let theta = -2.0 * PI * (k % self.n_omega) as f64 / self.n_omega as f64;
        C64::new(theta.cos(), theta.sin())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_omega).map(|j| j as f64 * self.dt).collect()
    }
}

/// Hermitian positive-definite inner-product weight.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Diagonal { d: RVec, sqrt: RVec, inv_sqrt: RVec },
    Dense { w: CMat, sqrt: CMat, inv_sqrt: CMat },
}

impl Weight {
    pub fn diagonal(d: RVec) -> Result<Self> {
        if let Some((i, v)) = d
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::Invalid(format!(
                "weight entry {i} is not positive: {v}"
            )));
        }
        let sqrt = d.map(f64::sqrt);
        let inv_sqrt = sqrt.map(|x| 1.0 / x);
        Ok(Weight::Diagonal { d, sqrt, inv_sqrt })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(RVec::from_element(n, 1.0)).expect("unit weight")
    }

    pub fn dense(w: CMat) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::dim(
                "weight",
                "square",
                format!("{}x{}", n, w.ncols()),
            ));
        }
        let herm_err = (&w - w.adjoint()).norm();
        if herm_err > 1e-12 * w.norm().max(1.0) {
            return Err(Error::Invalid("weight is not Hermitian".into()));
        }
        let (vals, vecs) = crate::linalg::hermitian_eig_desc(w.clone());
        if vals.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Invalid("weight is not positive definite".into()));
        }
        let build = |f: &dyn Fn(f64) -> f64| {
            let d = CMat::from_diagonal(&vals.map(|v| C64::new(f(v), 0.0)));
            &vecs * d * vecs.adjoint()
        };
        let sqrt = build(&f64::sqrt);
        let inv_sqrt = build(&|v| 1.0 / v.sqrt());
        Ok(Weight::Dense { w, sqrt, inv_sqrt })
    }

    pub fn dim(&self) -> usize {
        match self {
            Weight::Diagonal { d, .. } => d.len(),
            Weight::Dense { w, .. } => w.nrows(),
        }
    }

    pub fn diag(&self) -> Option<&RVec> {
        match self {
            Weight::Diagonal { d, .. } => Some(d),
            Weight::Dense { .. } => None,
        }
    }

    fn scale_rows(x: &CMat, s: &RVec) -> CMat {
        let mut y = x.clone();
        for mut col in y.column_iter_mut() {
            for (v, f) in col.iter_mut().zip(s.iter()) {
                *v *= *f;
            }
        }
        y
    }

    /// `W x`.
    pub fn apply(&self, x: &CMat) -> CMat {
        match self {
            Weight::Diagonal { d, .. } => Self::scale_rows(x, d),
            Weight::Dense { w, .. } => matmul(w, x),
        }
    }

    pub fn sqrt_apply(&self, x: &CMat) -> CMat {
        match self {
            Weight::Diagonal { sqrt, .. } => Self::scale_rows(x, sqrt),
            Weight::Dense { sqrt, .. } => matmul(sqrt, x),
        }
    }

    pub fn inv_sqrt_apply(&self, x: &CMat) -> CMat {
        match self {
            Weight::Diagonal { inv_sqrt, .. } => Self::scale_rows(x, inv_sqrt),
            Weight::Dense { inv_sqrt, .. } => matmul(inv_sqrt, x),
        }
    }

    /// `X^H W Y`.
    pub fn gram(&self, x: &CMat, y: &CMat) -> CMat {
        adjoint_mul(x, &self.apply(y))
    }

    /// `‖x‖²_W` for a vector stored in a slice.
    pub fn norm_sq(&self, x: &[C64]) -> f64 {
        match self {
            Weight::Diagonal { d, .. } => {
                x.iter().zip(d.iter()).map(|(v, w)| w * v.norm_sqr()).sum()
            }
            Weight::Dense { w, .. } => {
                let v = CVec::from_column_slice(x);
                (v.adjoint() * w * &v)[(0, 0)].re
            }
        }
    }

    /// Squared W-norm of every column.
    pub fn column_norms_sq(&self, x: &CMat) -> Vec<f64> {
        x.column_iter()
            .map(|c| {
                let v: Vec<C64> = c.iter().copied().collect();
                self.norm_sq(&v)
            })
            .collect()
    }
}

/// `y^H W x`.
pub fn weighted_inner(w: &Weight, x: &CVec, y: &CVec) -> Result<C64> {
    let n = w.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::dim(
            "weighted_inner",
            n,
            format!("{} and {}", x.len(), y.len()),
        ));
    }
    Ok(match w {
        Weight::Diagonal { d, .. } => x
            .iter()
            .zip(y.iter())
            .zip(d.iter())
            .map(|((a, b), s)| b.conj() * a * *s)
            .sum(),
        Weight::Dense { w, .. } => (y.adjoint() * w * x)[(0, 0)],
    })
}

/// Rightmost eigenvalue of a sparse matrix by thick-restarted Arnoldi.
///
/// After each cycle the Krylov space is compressed onto the invariant
/// subspace of the projected matrix spanned by the `keep` rightmost Ritz
/// vectors (orthonormalized by QR), which keeps the relation
/// `A V = V H + h v e^H` intact, and the Arnoldi process is extended again.
pub fn rightmost_eigenvalue_arnoldi(a: &CsrMatrix, opts: ArnoldiOptions) -> Result<C64> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    let m = opts.krylov_dim.min(n);
    let keep = (m / 4).max(1).min(m.saturating_sub(2)).max(1);
    let dot = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(p, q)| p.conj() * q).sum() };
    let mut v0: Vec<C64> = (0..n)
        .map(|i| {
            C64::new(
                1.0 + 0.37 * ((i as f64) * 0.618).sin(),
                0.11 * ((i as f64) * 1.3).cos(),
            )
        })
        .collect();
    let nrm = dot(&v0, &v0).re.sqrt();
    v0.iter_mut().for_each(|z| *z /= nrm);
    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut h = CMat::zeros(m + 1, m);
    let mut start = 0usize;
    for _cycle in 0..opts.max_restarts {
        let mut steps = m;
        for j in start..m {
            let mut w = vec![ZERO; n];
            a.matvec_into(&basis[j], &mut w);
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = dot(vi, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(vi.iter()).for_each(|(y, x)| *y -= c * x);
                }
            }
            let beta = dot(&w, &w).re.sqrt();
            h[(j + 1, j)] = C64::new(beta, 0.0);
            if beta < 1e-13 {
                steps = j + 1;
                break;
            }
            w.iter_mut().for_each(|z| *z /= beta);
            basis.push(w);
        }
        let hm = h.view((0, 0), (steps, steps)).clone_owned();
        let schur = nalgebra::Schur::try_new(hm.clone(), 1e-15, 100_000)
            .ok_or(Error::NoConvergence { iterations: 0 })?;
        let (mut q, mut t) = schur.unpack();
        // bubble the rightmost eigenvalues to the top of the Schur form
        let nk = keep.min(steps);
        for target in 0..nk {
            let best = (target..steps)
                .max_by(|&i, &j| t[(i, i)].re.total_cmp(&t[(j, j)].re).then(j.cmp(&i)))
                .unwrap_or(target);
            for k in (target..best).rev() {
                schur_swap(&mut t, &mut q, k);
            }
        }
        let beta = h[(steps, steps - 1)].norm();
        let theta = t[(0, 0)];
        let resid = beta * q[(steps - 1, 0)].norm();
        if steps < m || resid <= opts.tol * theta.norm().max(1.0) {
            return Ok(theta);
        }
        let mut new_basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        for c in 0..nk {
            let mut v = vec![ZERO; n];
            for (i, vi) in basis.iter().take(steps).enumerate() {
                let coef = q[(i, c)];
                v.iter_mut()
                    .zip(vi.iter())
                    .for_each(|(x, b)| *x += coef * b);
            }
            new_basis.push(v);
        }
        new_basis.push(basis[steps].clone());
        basis = new_basis;
        h = CMat::zeros(m + 1, m);
        h.view_mut((0, 0), (nk, nk))
            .copy_from(&t.view((0, 0), (nk, nk)));
        for c in 0..nk {
            h[(nk, c)] = q[(steps - 1, c)] * C64::new(beta, 0.0);
        }
        start = nk;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_restarts,
    })
}

/// Swap the adjacent diagonal entries `k`, `k+1` of the upper triangular
/// Schur factor `t` by a Givens rotation, updating the Schur vectors `q`.
fn schur_swap(t: &mut CMat, q: &mut CMat, k: usize) {
    let n = t.nrows();
    let (t11, t22, t12) = (t[(k, k)], t[(k + 1, k + 1)], t[(k, k + 1)]);
    let g = t22 - t11;
    let norm = (t12.norm_sqr() + g.norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    // rotation [c s; -s̄ c] with c real mapping (t12, g) to (r, 0)
    let (c, s) = if t12.norm() == 0.0 {
        (0.0, g.conj() / g.norm())
    } else {
        let c = t12.norm() / norm;
        (c, (t12 / t12.norm()) * g.conj() / norm)
    };
    let cc = C64::new(c, 0.0);
    for j in k..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = cc * x + s * y;
        t[(k + 1, j)] = cc * y - s.conj() * x;
    }
    for i in 0..=(k + 1) {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = cc * x + s.conj() * y;
        t[(i, k + 1)] = cc * y - s * x;
    }
    for i in 0..q.nrows() {
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = cc * x + s.conj() * y;
        q[(i, k + 1)] = cc * y - s * x;
    }
    t[(k + 1, k)] = ZERO;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_sys(a: f64) -> LtiSystem {
        LtiSystem::dense_identity_io(CMat::from_element(1, 1, C64::new(a, 0.0))).unwrap()
    }

    #[test]
    fn scalar_resolvents() {
        let sys = scalar_sys(-1.0);
        let rhs = CMat::from_element(1, 1, ONE);
        let g = FrequencyGrid::new(4, 2.0 * PI / 4.0).unwrap();
        let x0 = resolvent_solve(&sys, 0, &g, &rhs).unwrap();
        assert!((x0[(0, 0)] - ONE).norm() < 1e-15);
        // omega_1 = 1 on this grid
        let x1 = resolvent_solve(&sys, 1, &g, &rhs).unwrap();
        assert!((x1[(0, 0)] - C64::new(0.5, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn resolvent_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let a = CMat::from_fn(n, n, |i, j| {
            C64::new(
                rng.random::<f64>() - 0.5 - if i == j { 3.0 } else { 0.0 },
                rng.random::<f64>() - 0.5,
            )
        });
        let sys = LtiSystem::dense_identity_io(a.clone()).unwrap();
        let g = FrequencyGrid::new(16, 0.3).unwrap();
        let rhs = CMat::from_fn(n, 2, |_, _| C64::new(rng.random(), rng.random()));
        let cache = ResolventCache::new(&sys, g);
        for k in [0, 3, 9] {
            let mut l = -a.clone();
            for i in 0..n {
                l[(i, i)] += C64::new(0.0, g.omega(k));
            }
            let oracle = l.clone().try_inverse().unwrap() * &rhs;
            let x = cache.solve(k, &rhs).unwrap();
            assert!(rel_diff(&x, &oracle) < 1e-12);
            let again = cache.solve(k, &rhs).unwrap();
            assert_eq!(x, again);
            assert!(rel_diff(&sys.apply_lk(g.omega(k), &x), &rhs) < 1e-12);
        }
    }

    #[test]
    fn stability_of_diagonal_and_unstable_scalar() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-1.0, 0.0),
            C64::new(-3.0, 0.0),
        ]));
        let sys = LtiSystem::dense_identity_io(a).unwrap();
        assert!((sys.stability_check().unwrap() + 1.0).abs() < 1e-12);
        let s = scalar_sys(0.1);
        assert!((s.stability_check().unwrap() - 0.1).abs() < 1e-14);
        assert!(!s.is_stable().unwrap());
    }

    #[test]
    fn schur_swap_preserves_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let mut t = CMat::from_fn(n, n, |i, j| {
            if i <= j {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            } else {
                ZERO
            }
        });
        let orig = t.clone();
        let mut q = CMat::identity(n, n);
        schur_swap(&mut t, &mut q, 2);
        assert!(rel_diff(&(&q * &t * q.adjoint()), &orig) < 1e-13);
        assert!((t[(2, 2)] - orig[(3, 3)]).norm() < 1e-13);
        assert!((t[(3, 3)] - orig[(2, 2)]).norm() < 1e-13);
        assert!(t[(3, 2)].norm() == 0.0);
    }

    #[test]
    fn arnoldi_finds_rightmost_eigenvalue() {
        // 2-D convection-diffusion on a 24x24 grid, compared with a dense eigensolve
        let g = 24;
        let n = g * g;
        let hh = 1.0 / (g as f64 + 1.0);
        let idx = |i: usize, j: usize| i * g + j;
        let mut trip = Vec::new();
        for i in 0..g {
            for j in 0..g {
                let p = idx(i, j);
                trip.push((p, p, C64::new(-4.0 * 0.01 / (hh * hh), 0.0)));
                let nb = [
                    (i.wrapping_sub(1), j, -1.0, 0.0),
                    (i + 1, j, 1.0, 0.0),
                    (i, j.wrapping_sub(1), 0.0, -1.0),
                    (i, j + 1, 0.0, 1.0),
                ];
                for (ii, jj, sx, sy) in nb {
                    if ii < g && jj < g {
                        let conv = -(0.2 * sx + 0.1 * sy) / (2.0 * hh);
                        trip.push((p, idx(ii, jj), C64::new(0.01 / (hh * hh) + conv, 0.0)));
                    }
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trip);
        // separable operator: sum of two tridiagonal Toeplitz spectra
        let d = 0.01 / (hh * hh);
        let (cx, cy) = (0.2 / (2.0 * hh), 0.1 / (2.0 * hh));
        let c1 = (PI / (g as f64 + 1.0)).cos();
        let exact =
            -4.0 * d + 2.0 * c1 * (((d - cx) * (d + cx)).sqrt() + ((d - cy) * (d + cy)).sqrt());
        let got = rightmost_eigenvalue_arnoldi(&a, ArnoldiOptions::default()).unwrap();
        // the eigenvalue is ill-conditioned (non-normal operator), so the tolerance is loose
        assert!(
            (got.re - exact).abs() < 1e-3 * exact.abs(),
            "{} vs {}",
            got.re,
            exact
        );
        assert!(got.im.abs() < 1e-3);
    }

    #[test]
    fn weighted_inner_examples() {
        let w = Weight::identity(3);
        let e1 = CVec::from_vec(vec![ONE, ZERO, ZERO]);
        assert_eq!(weighted_inner(&w, &e1, &e1).unwrap(), ONE);
        let w2 = Weight::diagonal(RVec::from_vec(vec![2.0, 3.0])).unwrap();
        let x = CVec::from_vec(vec![ONE, ONE]);
        assert_eq!(weighted_inner(&w2, &x, &x).unwrap(), C64::new(5.0, 0.0));
        assert!(weighted_inner(&w2, &e1, &x).is_err());
    }

    #[test]
    fn grid_harmonics_are_signed() {
        let g = FrequencyGrid::new(8, 0.5).unwrap();
        let h: Vec<i64> = (0..8).map(|k| g.harmonic(k)).collect();
        assert_eq!(h, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.omega(0), 0.0);
        for k in 0..8 {
            let p = C64::new(0.0, g.omega(k) * g.period()).exp();
            assert!((p - ONE).norm() < 1e-12);
        }
    }
}
