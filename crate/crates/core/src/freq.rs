//! Exact frequency-domain solution of forced LTI systems on a finite window,
//! including the transient correction for non-periodic trajectories, and the
//! identities the reduced method relies on.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::linalg::{gauss_legendre, matmul, matrix_power, CMat, CVec, DenseLu, C64, ZERO};
use crate::lti::{resolvent_solve, FrequencyGrid, LtiSystem, Weight};

/// Largest state dimension handled by the dense full-order path.
pub const DENSE_CAP: usize = 1024;

/// `Σ_{j<n} M^j` via `(I - M)^{-1}(I - M^n)`, accumulating term by term
/// when `‖I - M‖` is tiny.
pub fn geometric_sum(m: &CMat, n: usize) -> Result<CMat> {
    geometric_sum_with(m, n, true)
}

pub fn geometric_sum_with(m: &CMat, n: usize, fallback: bool) -> Result<CMat> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::dim(
            "geometric_sum",
            "square matrix",
            format!("{d}x{}", m.ncols()),
        ));
    }
    let id = CMat::identity(d, d);
    let ims = &id - m;
    let brute = || {
        let mut acc = CMat::zeros(d, d);
        let mut p = id.clone();
        for _ in 0..n {
            acc += &p;
            p = matmul(&p, m);
        }
        acc
    };
    if ims.norm() < 1e-8 {
        return if fallback {
            Ok(brute())
        } else {
            Err(Error::Singular {
                freq: None,
                detail: "I - M is numerically zero".into(),
            })
        };
    }
    match DenseLu::new(ims) {
        Ok(lu) => Ok(lu.solve(&(&id - matrix_power(m, n)))),
        Err(_) if fallback => Ok(brute()),
        Err(e) => Err(e),
    }
}

/// Full-order transient-correction factors: the shared `G = I - e^{AT}` and,
/// per frequency, `D_k = (I - e^{AΔt} e^{-iω_kΔt})^{-1}`.
pub struct CorrectionOperators {
    pub grid: FrequencyGrid,
    pub e_dt: CMat,
    pub g: CMat,
}

impl CorrectionOperators {
    pub fn new(sys: &LtiSystem, grid: FrequencyGrid) -> Result<Self> {
        let n = sys.nx();
        if n > DENSE_CAP {
            return Err(Error::SizeGuard(format!(
                "full-order correction needs dense exponentials; N_x = {n} exceeds {DENSE_CAP}"
            )));
        }
        let a = sys.a.to_dense();
        let e_dt = expm(&a, grid.dt())?;
        let g = CMat::identity(n, n) - matrix_power(&e_dt, grid.n_omega());
        Ok(Self { grid, e_dt, g })
    }

    /// LU of `I - e^{AΔt} e^{-iω_kΔt}`.
    pub fn factor(&self, k: usize) -> Result<DenseLu> {
        let n = self.e_dt.nrows();
        let m = CMat::identity(n, n) - &self.e_dt * self.grid.phase(k);
        DenseLu::with_freq(m, Some(k))
    }

    /// `D_k G x`.
    pub fn apply(&self, k: usize, x: &CMat) -> Result<CMat> {
        Ok(self.factor(k)?.solve(&matmul(&self.g, x)))
    }

    /// `Σ_k D_k G`, which equals `N_ω I`.
    pub fn operator_sum(&self) -> Result<CMat> {
        let n = self.e_dt.nrows();
        let parts: Vec<Result<CMat>> = (0..self.grid.n_omega())
            .into_par_iter()
            .map(|k| self.factor(k).map(|lu| lu.solve(&self.g)))
            .collect();
        let mut acc = CMat::zeros(n, n);
        for p in parts {
            acc += p?;
        }
        Ok(acc)
    }
}

fn check_spectrum(sys: &LtiSystem, fhat: &CMat, grid: &FrequencyGrid) -> Result<()> {
    if fhat.nrows() != sys.nf() || fhat.ncols() != grid.n_omega() {
        return Err(Error::dim(
            "forcing spectrum",
            format!("{}x{}", sys.nf(), grid.n_omega()),
            format!("{}x{}", fhat.nrows(), fhat.ncols()),
        ));
    }
    Ok(())
}

/// Stationary response `R_k B f̂_k` at every frequency (columns).
pub fn forcing_response(sys: &LtiSystem, fhat: &CMat, grid: &FrequencyGrid) -> Result<CMat> {
    check_spectrum(sys, fhat, grid)?;
    let n = grid.n_omega();
    let cols: Vec<Result<CVec>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let f = fhat.column(k).clone_owned();
            if f.iter().all(|z| *z == ZERO) {
                return Ok(CVec::zeros(sys.nx()));
            }
            let bf = sys
                .b
                .apply_mat(&CMat::from_column_slice(sys.nf(), 1, f.as_slice()));
            let x = resolvent_solve(sys, k, grid, &bf)?;
            Ok(x.column(0).clone_owned())
        })
        .collect();
    let mut out = CMat::zeros(sys.nx(), n);
    for (k, c) in cols.into_iter().enumerate() {
        out.set_column(k, &c?);
    }
    Ok(out)
}

/// Initial condition for which the forced response is exactly periodic:
/// `(1/N_ω) Σ_l R_l B f̂_l`.
pub fn in_sync_ic(sys: &LtiSystem, fhat: &CMat, grid: &FrequencyGrid) -> Result<CVec> {
    let resp = forcing_response(sys, fhat, grid)?;
    Ok(mean_column(&resp))
}

fn mean_column(m: &CMat) -> CVec {
    let n = m.ncols().max(1);
    m.column_sum() / C64::new(n as f64, 0.0)
}

/// Naive spectrum `q̂_k = R_k B f̂_k`, exact only for the in-sync start.
pub fn uncorrected_spectrum(sys: &LtiSystem, fhat: &CMat, grid: &FrequencyGrid) -> Result<CMat> {
    forcing_response(sys, fhat, grid)
}

/// DFT of the exact sampled solution:
/// `q̂_k = R_k B f̂_k + D_k G (q0 - (1/N_ω) Σ_l R_l B f̂_l)`.
pub fn corrected_spectrum(
    sys: &LtiSystem,
    q0: &CVec,
    fhat: &CMat,
    grid: &FrequencyGrid,
) -> Result<CMat> {
    if q0.len() != sys.nx() {
        return Err(Error::dim("initial state", sys.nx(), q0.len()));
    }
    let ops = CorrectionOperators::new(sys, *grid)?;
    let resp = forcing_response(sys, fhat, grid)?;
    let dev = q0 - mean_column(&resp);
    let gd = matmul(
        &ops.g,
        &CMat::from_column_slice(dev.len(), 1, dev.as_slice()),
    );
    let corr: Vec<Result<CMat>> = (0..grid.n_omega())
        .into_par_iter()
        .map(|k| ops.factor(k).map(|lu| lu.solve(&gd)))
        .collect();
    let mut out = resp;
    for (k, c) in corr.into_iter().enumerate() {
        let c = c?;
        let mut col = out.column_mut(k);
        col += c.column(0);
    }
    Ok(out)
}

/// Analytic signal `q(t) = Σ_k c_k e^{iω_k t} + s·t` used to exercise the
/// derivative identity on non-periodic data.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub grid: FrequencyGrid,
    /// `n × N_ω`; column `k` multiplies `e^{iω_k t}`.
    pub coeffs: CMat,
    pub ramp: CVec,
}

impl Synthesis {
    pub fn eval(&self, t: f64) -> CVec {
        let mut v = &self.ramp * C64::new(t, 0.0);
        for k in 0..self.grid.n_omega() {
            let e = C64::from_polar(1.0, self.grid.omega(k) * t);
            v += self.coeffs.column(k) * e;
        }
        v
    }

    pub fn derivative(&self, t: f64) -> CVec {
        let mut v = self.ramp.clone();
        for k in 0..self.grid.n_omega() {
            let w = self.grid.omega(k);
            let e = C64::from_polar(1.0, w * t) * C64::new(0.0, w);
            v += self.coeffs.column(k) * e;
        }
        v
    }

    /// `Δq = q(T) - q(0)`.
    pub fn delta(&self) -> CVec {
        &self.ramp * C64::new(self.grid.period(), 0.0)
    }
}

/// Continuous Fourier coefficients `(1/T) ∫_0^T x(t) e^{-iω_k t} dt` of a
/// vector function, by composite Gauss-Legendre quadrature.
pub fn fourier_coefficients<F>(f: F, dim: usize, grid: &FrequencyGrid) -> CMat
where
    F: Fn(f64) -> CVec + Sync,
{
    let n = grid.n_omega();
    let panels = 2 * n.max(4);
    let (x, w) = gauss_legendre(12);
    let t_len = grid.period();
    let h = t_len / panels as f64;
    let mut nodes = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push((h * (p as f64 + 0.5 * (xi + 1.0)), 0.5 * h * wi));
        }
    }
    let vals: Vec<CVec> = nodes.par_iter().map(|&(t, _)| f(t)).collect();
    let cols: Vec<CVec> = (0..n)
        .into_par_iter()
        .map(|k| {
            let wk = grid.omega(k);
            let mut acc = CVec::zeros(dim);
            for ((t, wt), v) in nodes.iter().zip(&vals) {
                acc += v * (C64::from_polar(1.0, -wk * t) * (wt / t_len));
            }
            acc
        })
        .collect();
    let mut out = CMat::zeros(dim, n);
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// Closed-form coefficients of `q(t) = t`: `T/2` at `k = 0`, `i/ω_k` otherwise.
pub fn ramp_coefficients(grid: &FrequencyGrid) -> Vec<C64> {
    (0..grid.n_omega())
        .map(|k| {
            if k == 0 {
                C64::new(grid.period() / 2.0, 0.0)
            } else {
                C64::new(0.0, 1.0 / grid.omega(k))
            }
        })
        .collect()
}

/// Largest residual of `(dq/dt)^_k = iω_k q̂_k + Δq/T` over all frequencies,
/// with both transforms taken from the analytic synthesis.
pub fn derivative_dft_check(syn: &Synthesis) -> f64 {
    let grid = syn.grid;
    let dim = syn.ramp.len();
    let qh = fourier_coefficients(|t| syn.eval(t), dim, &grid);
    let dh = fourier_coefficients(|t| syn.derivative(t), dim, &grid);
    let jump = syn.delta() / C64::new(grid.period(), 0.0);
    (0..grid.n_omega())
        .map(|k| {
            let pred = qh.column(k) * C64::new(0.0, grid.omega(k)) + &jump;
            (dh.column(k) - pred).norm()
        })
        .fold(0.0, f64::max)
}

/// `‖Ψ^H W R_k L_k Ψ - I‖_F` for a W-orthonormal basis `Ψ`.
pub fn pg_identity_residual(
    sys: &LtiSystem,
    w: &Weight,
    psi: &CMat,
    grid: &FrequencyGrid,
    k: usize,
) -> Result<f64> {
    let lpsi = sys.apply_lk(grid.omega(k), psi);
    let rl = resolvent_solve(sys, k, grid, &lpsi)?;
    let m = w.gram(psi, &rl);
    Ok((m - CMat::identity(psi.ncols(), psi.ncols())).norm())
}

/// Time-domain samples from a spectrum (inverse DFT with the 1/N factor).
pub fn to_time(spectrum: &CMat) -> CMat {
    crate::fft::ifft_time(spectrum)
}

/// Correction magnitude `Σ_k ‖q̂_k^corrected − q̂_k^naive‖²_W`.
pub fn correction_energy(corrected: &CMat, naive: &CMat, w: &Weight) -> f64 {
    let d = corrected - naive;
    w.column_norms_sq(&d).iter().sum()
}
