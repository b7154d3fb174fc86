//! Compressed sparse row matrices and a banded LU factorization used for
//! resolvent solves on finite-difference operators.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < nrows && j < ncols, "triplet out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate over stored entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |p| (i, self.indices[p], self.values[p]))
        })
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut s = ZERO;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[p] * x[self.indices[p]];
            }
            y[i] = s;
        }
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.nrows);
        self.matvec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn matmat(&self, x: &CMat) -> CMat {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = CMat::zeros(self.nrows, x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let src: Vec<C64> = col.iter().copied().collect();
            let mut dst = vec![ZERO; self.nrows];
            self.matvec_into(&src, &mut dst);
            y.column_mut(j).copy_from_slice(&dst);
        }
        y
    }

    /// `self^H * x`.
    pub fn adjoint_matmat(&self, x: &CMat) -> CMat {
        assert_eq!(x.nrows(), self.nrows);
        let mut y = CMat::zeros(self.ncols, x.ncols());
        for j in 0..x.ncols() {
            for i in 0..self.nrows {
                let xi = x[(i, j)];
                if xi == ZERO {
                    continue;
                }
                for p in self.indptr[i]..self.indptr[i + 1] {
                    y[(self.indices[p], j)] += self.values[p].conj() * xi;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect(),
        )
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (i, j, _) in self.triplets() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    /// `alpha * I + beta * self` for a square matrix.
    pub fn shifted(&self, alpha: C64, beta: C64) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut trip: Vec<(usize, usize, C64)> =
            self.triplets().map(|(i, j, v)| (i, j, beta * v)).collect();
        trip.extend((0..self.nrows).map(|i| (i, i, alpha)));
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            sums[j] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// LU factorization with partial pivoting of a banded matrix. Fill-in from
/// pivoting widens the upper band by `kl`.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<C64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn new(m: &CsrMatrix, freq: Option<usize>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::dim(
                "banded LU",
                "square matrix",
                format!("{n}x{}", m.ncols()),
            ));
        }
        let (kl, ku) = m.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut band = vec![ZERO; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut scale = 0.0f64;
        for (i, j, v) in m.triplets() {
            band[idx(i, j)] += v;
            scale = scale.max(v.norm());
        }
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[idx(k, k)].norm();
            for i in (k + 1)..=last_row {
                let v = band[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::Singular {
                    freq,
                    detail: format!("zero pivot in column {k}"),
                });
            }
            piv[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = band[idx(k, k)];
            for i in (k + 1)..=last_row {
                let l = band[idx(i, k)] / pivot;
                band[idx(i, k)] = l;
                if l == ZERO {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let akj = band[idx(k, j)];
                    band[idx(i, j)] -= l * akj;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            band,
            piv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        assert_eq!(b.len(), n);
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == ZERO {
                continue;
            }
            for i in (k + 1)..=(k + kl).min(n.saturating_sub(1)) {
                b[i] -= self.band[idx(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..=(i + ku + kl).min(n - 1) {
                s -= self.band[idx(i, j)] * b[j];
            }
            b[i] = s / self.band[idx(i, i)];
        }
    }

    pub fn solve(&self, rhs: &CMat) -> CMat {
        let mut x = rhs.clone();
        for mut col in x.column_iter_mut() {
            let mut buf: Vec<C64> = col.iter().copied().collect();
            self.solve_in_place(&mut buf);
            col.copy_from_slice(&buf);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_diff, DenseLu};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                trip.push((
                    i,
                    j,
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                ));
            }
        }
        CsrMatrix::from_triplets(n, n, trip)
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let a = random_banded(40, 3, 5, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rhs = CMat::from_fn(40, 2, |_, _| C64::new(rng.random(), rng.random()));
        let x = BandedLu::new(&a, None).unwrap().solve(&rhs);
        let xd = DenseLu::new(a.to_dense()).unwrap().solve(&rhs);
        assert!(rel_diff(&x, &xd) < 1e-10);
    }

    #[test]
    fn csr_products_match_dense() {
        let a = random_banded(15, 2, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = CMat::from_fn(15, 3, |_, _| C64::new(rng.random(), rng.random()));
        let d = a.to_dense();
        assert!(rel_diff(&a.matmat(&x), &(&d * &x)) < 1e-14);
        assert!(rel_diff(&a.adjoint_matmat(&x), &(d.adjoint() * &x)) < 1e-14);
        assert_eq!(a.adjoint().to_dense(), d.adjoint());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let one = C64::new(1.0, 0.0);
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, one), (0, 0, one), (1, 0, one)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.to_dense()[(0, 0)], C64::new(2.0, 0.0));
    }
}
