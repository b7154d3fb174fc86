//! Comparison methods: POD-Galerkin and balanced truncation time-domain
//! ROMs, and the projection errors that bound them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{fft_time, ifft_time};
use crate::forcing::covariance_factor;
use crate::freq::DENSE_CAP;
use crate::linalg::{hermitian_eig_desc, lyapunov, matmul, to_complex, CMat, CVec, RMat, C64};
use crate::lti::{LtiSystem, Operator, Weight};
use crate::ode::{integrate, OdeOptions, Signal};

/// Output of a time-domain reduced solve: reduced states (`r × N_t`) and
/// reconstructed outputs (`N_y × N_t`).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSolution {
    pub coeffs: CMat,
    pub y: CMat,
}

/// Galerkin projection onto W-orthonormal POD modes.
#[derive(Clone, Debug)]
pub struct PodGalerkinRom {
    pub basis: CMat,
    /// `Φ_r^H W`.
    pub test: CMat,
    pub reduced: LtiSystem,
}

impl PodGalerkinRom {
    pub fn new(sys: &LtiSystem, w: &Weight, basis: CMat) -> Result<Self> {
        if basis.nrows() != sys.nx() {
            return Err(Error::dim("POD basis rows", sys.nx(), basis.nrows()));
        }
        let r = basis.ncols();
        let ortho = (w.gram(&basis, &basis) - CMat::identity(r, r)).norm();
        if ortho > 1e-8 {
            return Err(Error::Invalid(format!(
                "POD basis is not W-orthonormal (defect {ortho:.2e})"
            )));
        }
        let test = w.apply(&basis).adjoint();
        let a = matmul(&test, &sys.a.apply_mat(&basis));
        let b = matmul(&test, &sys.b.to_dense());
        let c = sys.c.apply_mat(&basis);
        let reduced = LtiSystem::new(Operator::Dense(a), Operator::Dense(b), Operator::Dense(c))?;
        Ok(Self {
            basis,
            test,
            reduced,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Integrate `ȧ = Ãa + B̃f`, `a(0) = Φ_r^H W q0`.
    pub fn solve<S: Signal + ?Sized>(
        &self,
        q0: &CVec,
        forcing: &S,
        dt: f64,
        n_samples: usize,
        opts: OdeOptions,
    ) -> Result<ReducedSolution> {
        if q0.len() != self.basis.nrows() {
            return Err(Error::dim("initial state", self.basis.nrows(), q0.len()));
        }
        reduced_solve(&self.reduced, &self.test * q0, forcing, dt, n_samples, opts)
    }
}

fn reduced_solve<S: Signal + ?Sized>(
    sys: &LtiSystem,
    a0: CVec,
    forcing: &S,
    dt: f64,
    n_samples: usize,
    opts: OdeOptions,
) -> Result<ReducedSolution> {
    let traj = integrate(sys, &a0, forcing, dt, n_samples, opts)?;
    let y = sys.c.apply_mat(&traj.states);
    Ok(ReducedSolution {
        coeffs: traj.states,
        y,
    })
}

/// Balanced truncation of the whitened system `(A, B L_w, C)`.
#[derive(Clone, Debug)]
pub struct BalancedTruncationRom {
    /// `N_x × r` trial basis.
    pub right: CMat,
    /// `r × N_x` test basis with `left · right = I`.
    pub left: CMat,
    pub reduced: LtiSystem,
    pub hankel: Vec<f64>,
    /// `B L_w` projected, used to verify balancing.
    pub whitened_b: CMat,
}

/// Build a balanced-truncation ROM. The input map is whitened by a square
/// root of `forcing_cov` (identity when absent) and the observability
/// Gramian uses `C^H W_y C` with `W_y = output_weight` (identity when absent).
pub fn balanced_truncation(
    sys: &LtiSystem,
    forcing_cov: Option<&RMat>,
    output_weight: Option<&Weight>,
    r: usize,
) -> Result<BalancedTruncationRom> {
    let nx = sys.nx();
    if nx > DENSE_CAP {
        return Err(Error::SizeGuard(format!(
            "balanced truncation needs dense Gramians; N_x = {nx} exceeds {DENSE_CAP}"
        )));
    }
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let c = sys.c.to_dense();
    let bw = match forcing_cov {
        Some(cov) => {
            if cov.nrows() != sys.nf() || cov.ncols() != sys.nf() {
                return Err(Error::dim("forcing covariance", sys.nf(), cov.nrows()));
            }
            matmul(&b, &to_complex(&covariance_factor(cov)?))
        }
        None => b.clone(),
    };
    let cwc = match output_weight {
        Some(w) => {
            if w.dim() != sys.ny() {
                return Err(Error::dim("output weight", sys.ny(), w.dim()));
            }
            c.adjoint() * w.apply(&c)
        }
        None => c.adjoint() * &c,
    };
    let stage = |e: Error| e.at_stage("Lyapunov solve");
    let p = lyapunov(&a, &(&bw * bw.adjoint())).map_err(stage)?;
    let q = lyapunov(&a.adjoint(), &cwc).map_err(stage)?;
    let s = psd_factor(&p);
    let rf = psd_factor(&q);
    let svd = (rf.adjoint() * &s).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let hankel: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let positive = hankel
        .iter()
        .take_while(|&&h| h > 1e-14 * hankel[0].max(f64::MIN_POSITIVE))
        .count();
    if r > positive {
        return Err(Error::Invalid(format!(
            "rank {r} exceeds the {positive} nonzero Hankel singular values"
        )));
    }
    let mut right = CMat::zeros(nx, r);
    let mut left = CMat::zeros(r, nx);
    for (j, &i) in order.iter().take(r).enumerate() {
        let scale = C64::new(hankel[j].powf(-0.5), 0.0);
        right.set_column(j, &((&s * vt.row(i).adjoint()) * scale));
        left.set_row(j, &((u.column(i).adjoint() * rf.adjoint()) * scale));
    }
    let reduced = LtiSystem::new(
        Operator::Dense(&left * &a * &right),
        Operator::Dense(&left * &b),
        Operator::Dense(&c * &right),
    )?;
    Ok(BalancedTruncationRom {
        whitened_b: &left * &bw,
        right,
        left,
        reduced,
        hankel,
    })
}

/// `X` with `X X^H = P` for Hermitian PSD `P`, negative eigenvalues clipped.
fn psd_factor(p: &CMat) -> CMat {
    let h = (p + p.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = hermitian_eig_desc(h);
    let mut f = vecs;
    for (j, mut col) in f.column_iter_mut().enumerate() {
        col *= C64::new(vals[j].max(0.0).sqrt(), 0.0);
    }
    f
}

impl BalancedTruncationRom {
    pub fn rank(&self) -> usize {
        self.right.ncols()
    }

    /// Largest deviation of the reduced Gramians from `diag(hankel[..r])`,
    /// relative to the largest Hankel value.
    pub fn balancing_residual(&self, output_weight: Option<&Weight>) -> Result<f64> {
        let r = self.rank();
        let a = self.reduced.a.to_dense();
        let c = self.reduced.c.to_dense();
        let cwc = match output_weight {
            Some(w) => c.adjoint() * w.apply(&c),
            None => c.adjoint() * &c,
        };
        let p = lyapunov(&a, &(&self.whitened_b * self.whitened_b.adjoint()))?;
        let q = lyapunov(&a.adjoint(), &cwc)?;
        let mut sigma = CMat::zeros(r, r);
        for i in 0..r {
            sigma[(i, i)] = C64::new(self.hankel[i], 0.0);
        }
        let scale = self
            .hankel
            .first()
            .copied()
            .unwrap_or(1.0)
            .max(f64::MIN_POSITIVE);
        Ok((p - &sigma).camax().max((q - &sigma).camax()) / scale)
    }

    /// Integrate the reduced system from `a(0) = left · q0`.
    pub fn solve<S: Signal + ?Sized>(
        &self,
        q0: &CVec,
        forcing: &S,
        dt: f64,
        n_samples: usize,
        opts: OdeOptions,
    ) -> Result<ReducedSolution> {
        if q0.len() != self.left.ncols() {
            return Err(Error::dim("initial state", self.left.ncols(), q0.len()));
        }
        reduced_solve(&self.reduced, &self.left * q0, forcing, dt, n_samples, opts)
    }
}

fn norms_sq(w: &Weight, x: &CMat) -> f64 {
    w.column_norms_sq(x).iter().sum()
}

/// Mean squared W-norm error of projecting every snapshot onto the
/// W-orthonormal columns of `basis`, normalized by the mean squared norm.
pub fn pod_projection_error(basis: &CMat, w: &Weight, trajectories: &[CMat]) -> Result<f64> {
    let parts: Vec<Result<(f64, f64)>> = trajectories
        .par_iter()
        .map(|q| {
            if q.nrows() != w.dim() {
                return Err(Error::dim("trajectory rows", w.dim(), q.nrows()));
            }
            let proj = basis * w.gram(basis, q);
            Ok((norms_sq(w, &(q - proj)), norms_sq(w, q)))
        })
        .collect();
    ratio(parts)
}

/// Projection error of whole trajectories onto per-frequency SPOD modes:
/// each trajectory's DFT is projected at frequency `k` onto `modes[k]`
/// and transformed back.
pub fn spod_projection_error(modes: &[CMat], w: &Weight, trajectories: &[CMat]) -> Result<f64> {
    let n = modes.len();
    let parts: Vec<Result<(f64, f64)>> = trajectories
        .par_iter()
        .map(|q| {
            if q.ncols() != n || q.nrows() != w.dim() {
                return Err(Error::dim(
                    "trajectory",
                    format!("{}x{n}", w.dim()),
                    format!("{}x{}", q.nrows(), q.ncols()),
                ));
            }
            let qh = fft_time(q);
            let mut ph = CMat::zeros(q.nrows(), n);
            for (k, psi) in modes.iter().enumerate() {
                if psi.ncols() > 0 {
                    let col = qh.column(k).clone_owned();
                    let c = w.gram(psi, &CMat::from_column_slice(col.len(), 1, col.as_slice()));
                    ph.set_column(k, &(psi * c).column(0));
                }
            }
            let proj = ifft_time(&ph);
            Ok((norms_sq(w, &(q - proj)), norms_sq(w, q)))
        })
        .collect();
    ratio(parts)
}

fn ratio(parts: Vec<Result<(f64, f64)>>) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        num += a;
        den += b;
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Error curves against reference solutions: the per-sample mean squared
/// error over trajectories divided by the mean squared reference norm over
/// trajectories and time.
#[derive(Clone, Debug, Default)]
pub struct ErrorAccumulator {
    err: Vec<f64>,
    norm: f64,
    count: usize,
}

impl ErrorAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, w: &Weight, approx: &CMat, reference: &CMat) -> Result<()> {
        if approx.shape() != reference.shape() {
            return Err(Error::dim(
                "solution",
                format!("{:?}", reference.shape()),
                format!("{:?}", approx.shape()),
            ));
        }
        if self.err.is_empty() {
            self.err = vec![0.0; reference.ncols()];
        } else if self.err.len() != reference.ncols() {
            return Err(Error::dim(
                "solution length",
                self.err.len(),
                reference.ncols(),
            ));
        }
        let e = w.column_norms_sq(&(approx - reference));
        for (acc, v) in self.err.iter_mut().zip(e) {
            *acc += v;
        }
        self.norm += norms_sq(w, reference) / reference.ncols().max(1) as f64;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Normalized error at every sample.
    pub fn curve(&self) -> Vec<f64> {
        if self.norm == 0.0 {
            return vec![0.0; self.err.len()];
        }
        self.err.iter().map(|e| e / self.norm).collect()
    }

    /// Time average of the normalized error curve.
    pub fn mean(&self) -> f64 {
        let c = self.curve();
        if c.is_empty() {
            0.0
        } else {
            c.iter().sum::<f64>() / c.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingSignal;
    use crate::linalg::{rel_diff, RVec};
    use crate::modal::pod;
    use crate::ode::ZeroSignal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn stable(rng: &mut ChaCha8Rng, n: usize) -> LtiSystem {
        let mut a = rand_cmat(rng, n, n);
        for i in 0..n {
            a[(i, i)] -= C64::new(n as f64 * 0.5 + 1.0, 0.0);
        }
        LtiSystem::dense_identity_io(a).unwrap()
    }

    #[test]
    fn hankel_values_of_diagonal_system() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-1.0, 0.0),
            C64::new(-10.0, 0.0),
        ]));
        let sys = LtiSystem::dense_identity_io(a).unwrap();
        let bt = balanced_truncation(&sys, None, None, 2).unwrap();
        // P = Q = diag(1/2, 1/20)
        assert!((bt.hankel[0] - 0.5).abs() < 1e-12);
        assert!((bt.hankel[1] - 0.05).abs() < 1e-12);
        assert!(bt.balancing_residual(None).unwrap() < 1e-10);
    }

    #[test]
    fn balanced_gramians_are_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = stable(&mut rng, 12);
        let w = Weight::diagonal(RVec::from_fn(12, |_, _| 0.5 + rng.random::<f64>())).unwrap();
        let cov = RMat::from_fn(12, 12, |i, j| {
            (-((i as f64 - j as f64) / 3.0).powi(2)).exp()
        });
        let bt = balanced_truncation(&sys, Some(&cov), Some(&w), 5).unwrap();
        assert!(bt.hankel.windows(2).all(|h| h[0] >= h[1] && h[1] >= 0.0));
        assert!(bt.balancing_residual(Some(&w)).unwrap() < 1e-8);
        assert!(rel_diff(&(&bt.left * &bt.right), &CMat::identity(5, 5)) < 1e-10);
    }

    #[test]
    fn full_basis_reproduces_fom() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = stable(&mut rng, 6);
        let w = Weight::diagonal(RVec::from_fn(6, |_, _| 0.5 + rng.random::<f64>())).unwrap();
        let basis = pod(&rand_cmat(&mut rng, 6, 10), &w).unwrap().modes;
        let rom = PodGalerkinRom::new(&sys, &w, basis).unwrap();
        let q0 = CVec::from_fn(6, |_, _| C64::new(rng.random::<f64>(), 0.0));
        let f = ForcingSignal::from_samples(rand_cmat(&mut rng, 6, 32), 0.1);
        let opts = OdeOptions::default();
        let fom = integrate(&sys, &q0, &f, 0.1, 32, opts).unwrap();
        let sol = rom.solve(&q0, &f, 0.1, 32, opts).unwrap();
        assert!(rel_diff(&sol.y, &fom.states) < 1e-7);
        let bt = balanced_truncation(&sys, None, None, 6).unwrap();
        let sol = bt.solve(&q0, &f, 0.1, 32, opts).unwrap();
        assert!(rel_diff(&sol.y, &fom.states) < 1e-6);
    }

    #[test]
    fn orthogonal_initial_state_stays_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = stable(&mut rng, 4);
        let w = Weight::identity(4);
        let mut basis = CMat::zeros(4, 2);
        basis[(0, 0)] = C64::new(1.0, 0.0);
        basis[(1, 1)] = C64::new(1.0, 0.0);
        let rom = PodGalerkinRom::new(&sys, &w, basis).unwrap();
        let q0 = CVec::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 2.0),
        ]);
        let sol = rom
            .solve(&q0, &ZeroSignal(4), 0.1, 10, OdeOptions::default())
            .unwrap();
        assert_eq!(sol.y.norm(), 0.0);
    }

    #[test]
    fn projection_error_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Weight::diagonal(RVec::from_fn(5, |_, _| 0.5 + rng.random::<f64>())).unwrap();
        let trajs = vec![rand_cmat(&mut rng, 5, 8), rand_cmat(&mut rng, 5, 8)];
        let full = pod(&rand_cmat(&mut rng, 5, 9), &w).unwrap().modes;
        assert!(pod_projection_error(&full, &w, &trajs).unwrap() < 1e-20);
        assert!(
            (pod_projection_error(&CMat::zeros(5, 0), &w, &trajs).unwrap() - 1.0).abs() < 1e-14
        );
        let empty: Vec<CMat> = (0..8).map(|_| CMat::zeros(5, 0)).collect();
        assert!((spod_projection_error(&empty, &w, &trajs).unwrap() - 1.0).abs() < 1e-14);
        let all: Vec<CMat> = (0..8).map(|_| full.clone()).collect();
        assert!(spod_projection_error(&all, &w, &trajs).unwrap() < 1e-20);
    }

    #[test]
    fn error_accumulator_normalization() {
        let w = Weight::identity(2);
        let reference = CMat::from_element(2, 4, C64::new(1.0, 0.0));
        let mut acc = ErrorAccumulator::new();
        acc.add(&w, &CMat::zeros(2, 4), &reference).unwrap();
        assert_eq!(acc.curve(), vec![1.0; 4]);
        assert_eq!(acc.mean(), 1.0);
        assert!(acc.add(&w, &CMat::zeros(2, 3), &CMat::zeros(2, 3)).is_err());
    }
}
