//! Self-checks of the frequency-domain identities on random stable systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fft::fft_time;
use crate::freq::{
    corrected_spectrum, derivative_dft_check, geometric_sum, pg_identity_residual,
    CorrectionOperators, Synthesis,
};
use crate::linalg::{eigenvalues, rel_diff, CMat, CVec, RVec, C64};
use crate::lti::{FrequencyGrid, LtiSystem, Weight};
use crate::modal::pod;
use crate::ode::analytic_dft_reference;

pub fn random_cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Dense random system with identity input and output maps, shifted so
/// every eigenvalue sits left of `-1`.
pub fn random_stable_system<R: Rng>(rng: &mut R, n: usize) -> LtiSystem {
    let mut a = random_cmat(rng, n, n);
    for i in 0..n {
        a[(i, i)] -= C64::new(0.5 * n as f64 + 1.0, 0.0);
    }
    LtiSystem::dense_identity_io(a).expect("square")
}

pub fn random_weight<R: Rng>(rng: &mut R, n: usize) -> Weight {
    Weight::diagonal(RVec::from_fn(n, |_, _| 0.5 + rng.random::<f64>())).expect("positive")
}

/// One named check: the measured value and the bound it must not exceed.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// Worst value per check name, in first-seen order.
    pub fn summary(&self) -> Vec<Check> {
        let mut out: Vec<Check> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|o| o.name == c.name) {
                Some(o) => o.value = o.value.max(c.value),
                None => out.push(c.clone()),
            }
        }
        out
    }

    fn push(&mut self, name: &str, value: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tol,
        });
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub systems: usize,
    pub max_nx: usize,
    pub n_omegas: Vec<usize>,
    pub seed: u64,
    /// Also compare the corrected spectrum with the quadrature reference.
    pub oracle: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            systems: 20,
            max_nx: 32,
            n_omegas: vec![16, 64],
            seed: 2024,
            oracle: true,
        }
    }
}

pub const OPERATOR_SUM: &str = "operator-sum";
pub const GEOMETRIC_SUM: &str = "geometric-sum";
pub const DERIVATIVE_DFT: &str = "derivative-dft";
pub const PG_IDENTITY: &str = "pg-identity";
pub const ORACLE: &str = "oracle";

/// Runs every identity on `systems` random stable systems per grid size.
pub fn identity_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rep = VerifyReport::default();
    for s in 0..opts.systems {
        let n_omega = opts.n_omegas[s % opts.n_omegas.len()];
        let nx = rng.random_range(2..=opts.max_nx.max(2));
        let dt = 0.05 + 0.3 * rng.random::<f64>();
        let grid = FrequencyGrid::new(n_omega, dt)?;
        let sys = random_stable_system(&mut rng, nx);

        let ops = CorrectionOperators::new(&sys, grid)?;
        let target = CMat::identity(nx, nx) * C64::new(n_omega as f64, 0.0);
        rep.push(OPERATOR_SUM, rel_diff(&ops.operator_sum()?, &target), 1e-10);

        let mut m = random_cmat(&mut rng, nx, nx);
        let rho = eigenvalues(&m)?
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        m *= C64::new(0.9 / rho, 0.0);
        let mut acc = CMat::zeros(nx, nx);
        let mut p = CMat::identity(nx, nx);
        for _ in 0..n_omega {
            acc += &p;
            p = &p * &m;
        }
        rep.push(
            GEOMETRIC_SUM,
            rel_diff(&geometric_sum(&m, n_omega)?, &acc),
            1e-11,
        );

        let dim = nx.min(4);
        let mut coeffs = random_cmat(&mut rng, dim, n_omega);
        coeffs.set_column(n_omega / 2, &CVec::zeros(dim));
        let syn = Synthesis {
            grid,
            coeffs,
            ramp: random_cmat(&mut rng, dim, 1).column(0).clone_owned(),
        };
        rep.push(DERIVATIVE_DFT, derivative_dft_check(&syn), 1e-8);

        let w = random_weight(&mut rng, nx);
        let r = rng.random_range(1..=nx);
        let psi = pod(&random_cmat(&mut rng, nx, r), &w)?.modes;
        let scale = (psi.ncols() as f64).sqrt();
        let worst = (0..n_omega)
            .map(|k| pg_identity_residual(&sys, &w, &psi, &grid, k).map(|v| v / scale))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rep.push(PG_IDENTITY, worst, 1e-10);

        if opts.oracle && s < 10 {
            rep.push(ORACLE, oracle_gap(&mut rng, &sys, &grid)?, 1e-9);
        }
    }
    Ok(rep)
}

/// Relative gap between the corrected spectrum and the DFT of exactly
/// propagated samples, for a random start and random band-limited forcing.
pub fn oracle_gap<R: Rng>(rng: &mut R, sys: &LtiSystem, grid: &FrequencyGrid) -> Result<f64> {
    let n = grid.n_omega();
    let mut fhat = random_cmat(rng, sys.nf(), n);
    if n % 2 == 0 {
        fhat.set_column(n / 2, &CVec::zeros(sys.nf()));
    }
    let q0 = random_cmat(rng, sys.nx(), 1).column(0).clone_owned();
    let got = corrected_spectrum(sys, &q0, &fhat, grid)?;
    let want = analytic_dft_reference(sys, &q0, &fhat, grid)?;
    Ok(rel_diff(&got, &want))
}

/// DFT of a zero-forcing free decay, kept for quick smoke checks.
pub fn free_decay_spectrum(sys: &LtiSystem, q0: &CVec, grid: &FrequencyGrid) -> Result<CMat> {
    let samples =
        crate::ode::analytic_samples(sys, q0, &CMat::zeros(sys.nf(), grid.n_omega()), grid)?;
    Ok(fft_time(&samples))
}
