//! Discrete empirical interpolation: greedy sample selection and the
//! sampled operators of the DEIM-augmented online solve.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, DenseLu};

/// Sampled operators. `p_*` are strictly increasing index lists; per
/// frequency `k_f[k]` is `r_k × |p_f|`, `k_q0[k]` is `r_k × |p_q0|`,
/// `k_fs[k]` is `r_k × |p_fs|` and `t_fs[k]` is `|p_fs| × r_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeimBundle {
    pub p_f: Vec<usize>,
    pub p_q0: Vec<usize>,
    pub p_fs: Vec<usize>,
    pub k_f: Vec<CMat>,
    pub k_q0: Vec<CMat>,
    pub k_fs: Vec<CMat>,
    pub t_fs: Vec<CMat>,
    /// Time-domain forcing basis the forcing samples were chosen from.
    pub u_f: CMat,
    /// Condition numbers of `P_f^T U_{f̂,k}` per frequency.
    pub cond_f: Vec<f64>,
    pub cond_q0: f64,
    pub cond_fs: f64,
}

impl DeimBundle {
    /// Relative residual of the sampled reconstruction of a forcing history
    /// (columns are time samples) in the time-domain forcing basis.
    pub fn forcing_residual(&self, samples: &CMat) -> Result<f64> {
        let approx = deim_reconstruct(&self.u_f, &self.p_f, samples)?;
        let den = samples.norm();
        Ok(if den == 0.0 {
            0.0
        } else {
            (samples - approx).norm() / den
        })
    }
}

/// Greedy DEIM point selection on the columns of `u` (residual argmax).
/// The returned indices are sorted ascending.
pub fn deim_indices(u: &CMat) -> Result<Vec<usize>> {
    let (n, m) = u.shape();
    if m > n {
        return Err(Error::Invalid(format!(
            "{m} DEIM points requested from {n} entries"
        )));
    }
    let mut idx: Vec<usize> = Vec::with_capacity(m);
    for l in 0..m {
        let ul = u.column(l).clone_owned();
        let res = if l == 0 {
            ul
        } else {
            let pu = CMat::from_fn(l, l, |i, j| u[(idx[i], j)]);
            let pv = CVec::from_fn(l, |i, _| ul[idx[i]]);
            let c = DenseLu::new(pu)?.solve_vec(&pv);
            ul - u.columns(0, l) * c
        };
        let (best, val) = res
            .iter()
            .enumerate()
            .filter(|(i, _)| !idx.contains(i))
            .map(|(i, z)| (i, z.norm()))
            .fold(
                (usize::MAX, -1.0),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        if best == usize::MAX || !(val > 0.0) {
            return Err(Error::Singular {
                freq: None,
                detail: format!("DEIM residual vanished at point {l}"),
            });
        }
        idx.push(best);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// `U (P^T U)^{-1} P^T X`.
pub fn deim_reconstruct(u: &CMat, idx: &[usize], x: &CMat) -> Result<CMat> {
    let pu = select_rows(u, idx);
    let px = select_rows(x, idx);
    let c = DenseLu::new(pu)?.solve(&px);
    Ok(u * c)
}

pub(crate) fn select_rows(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// `X U (P^T U)^+` with the pseudo-inverse through the SVD, plus the
/// condition number of `P^T U`.
pub(crate) fn times_sampled_inverse(x: &CMat, u: &CMat, idx: &[usize], cutoff: f64) -> (CMat, f64) {
    let pu = select_rows(u, idx);
    if pu.nrows() == 0 || pu.ncols() == 0 {
        return (CMat::zeros(x.nrows(), idx.len()), 1.0);
    }
    let (pr, pc) = pu.shape();
    let svd = pu.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let pinv = svd
        .pseudo_inverse(cutoff * smax)
        .unwrap_or_else(|_| CMat::zeros(pc, pr));
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    (x * u * pinv, cond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_diff, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_modes_pick_their_support() {
        let mut u = CMat::zeros(8, 3);
        u[(5, 0)] = C64::new(1.0, 0.0);
        u[(1, 1)] = C64::new(1.0, 0.0);
        u[(6, 2)] = C64::new(1.0, 0.0);
        assert_eq!(deim_indices(&u).unwrap(), vec![1, 5, 6]);
    }

    #[test]
    fn exact_in_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = CMat::from_fn(30, 3, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let u = crate::modal::pod(&basis, &crate::lti::Weight::identity(30))
            .unwrap()
            .modes;
        let idx = deim_indices(&u).unwrap();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let x = &basis * CMat::from_fn(3, 5, |_, _| C64::new(rng.random::<f64>(), 0.0));
        assert!(rel_diff(&deim_reconstruct(&u, &idx, &x).unwrap(), &x) < 1e-12);
    }

    #[test]
    fn too_many_points() {
        assert!(deim_indices(&CMat::identity(2, 3)).is_err());
    }
}
