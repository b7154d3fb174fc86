use std::time::{Duration, Instant};

use super::deim::select_rows;
use super::RomBundle;
use crate::error::{Error, Result};
use crate::fft::{fft_time, ifft_time};
use crate::forcing::ForcingSignal;
use crate::linalg::{CMat, CVec, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub fft: Duration,
    pub coefficients: Duration,
    pub inverse_fft: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.fft + self.coefficients + self.inverse_fft
    }
}

/// Result of one online solve. `coeffs[k]` has length `r_k`; `y_hat` is the
/// `N_y × N_ω` output spectrum and `y` its time samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub coeffs: Vec<CVec>,
    pub y_hat: CMat,
    pub y: CMat,
    pub timings: Timings,
}

fn check(bundle: &RomBundle, q0: &CVec, f: &ForcingSignal) -> Result<()> {
    let n = bundle.grid.n_omega();
    if q0.len() != bundle.nx {
        return Err(Error::dim("initial state", bundle.nx, q0.len()));
    }
    if f.nf() != bundle.nf || f.len() != n {
        return Err(Error::dim(
            "forcing samples",
            format!("{}x{n}", bundle.nf),
            format!("{}x{}", f.nf(), f.len()),
        ));
    }
    if (f.dt() - bundle.grid.dt()).abs() > 1e-12 * bundle.grid.dt() {
        return Err(Error::Invalid(format!(
            "forcing step {} differs from the model step {}",
            f.dt(),
            bundle.grid.dt()
        )));
    }
    Ok(())
}

fn finish(bundle: &RomBundle, coeffs: Vec<CVec>, mut timings: Timings) -> SolveReport {
    let n = bundle.grid.n_omega();
    let t0 = Instant::now();
    let mut y_hat = CMat::zeros(bundle.ny, n);
    for (k, a) in coeffs.iter().enumerate() {
        if !a.is_empty() {
            y_hat.set_column(k, &(&bundle.c_psi[k] * a));
        }
    }
    let y = ifft_time(&y_hat);
    timings.inverse_fft = t0.elapsed();
    SolveReport {
        coeffs,
        y_hat,
        y,
        timings,
    }
}

/// Reduced solve for one initial state and forcing history of `N_ω` samples.
pub fn online(bundle: &RomBundle, q0: &CVec, forcing: &ForcingSignal) -> Result<SolveReport> {
    check(bundle, q0, forcing)?;
    let n = bundle.grid.n_omega();
    let mut timings = Timings::default();

    let t0 = Instant::now();
    let fhat = fft_time(forcing.samples());
    timings.fft = t0.elapsed();

    let t0 = Instant::now();
    let b: Vec<CVec> = (0..n)
        .map(|k| {
            if bundle.retained[k] == 0 {
                CVec::zeros(0)
            } else {
                &bundle.e[k] * fhat.column(k)
            }
        })
        .collect();
    let mut s = CVec::zeros(bundle.p());
    for (k, bk) in b.iter().enumerate() {
        if !bk.is_empty() {
            s += &bundle.t[k] * bk;
        }
    }
    s /= C64::new(n as f64, 0.0);
    let d = &bundle.phi_w * q0 - s;
    let coeffs: Vec<CVec> = b
        .into_iter()
        .enumerate()
        .map(|(k, bk)| {
            if bk.is_empty() {
                bk
            } else {
                bk + &bundle.h[k] * &d
            }
        })
        .collect();
    timings.coefficients = t0.elapsed();
    Ok(finish(bundle, coeffs, timings))
}

/// Reduced solve that reads the forcing and initial state only at the
/// sampled indices of the bundle's DEIM operators.
pub fn online_deim(bundle: &RomBundle, q0: &CVec, forcing: &ForcingSignal) -> Result<SolveReport> {
    let deim = bundle
        .deim
        .as_ref()
        .ok_or_else(|| Error::Invalid("model was built without DEIM operators".into()))?;
    check(bundle, q0, forcing)?;
    let n = bundle.grid.n_omega();
    let mut timings = Timings::default();

    let t0 = Instant::now();
    let fs = fft_time(&select_rows(forcing.samples(), &deim.p_f));
    timings.fft = t0.elapsed();

    let t0 = Instant::now();
    let b: Vec<CVec> = (0..n)
        .map(|k| {
            if bundle.retained[k] == 0 {
                CVec::zeros(0)
            } else {
                &deim.k_f[k] * fs.column(k)
            }
        })
        .collect();
    let mut s = CVec::zeros(deim.p_fs.len());
    for (k, bk) in b.iter().enumerate() {
        if !bk.is_empty() {
            s += &deim.t_fs[k] * bk;
        }
    }
    s /= C64::new(n as f64, 0.0);
    let q0s = CVec::from_iterator(deim.p_q0.len(), deim.p_q0.iter().map(|&i| q0[i]));
    let coeffs: Vec<CVec> = b
        .into_iter()
        .enumerate()
        .map(|(k, bk)| {
            if bk.is_empty() {
                bk
            } else {
                bk + &deim.k_q0[k] * &q0s - &deim.k_fs[k] * &s
            }
        })
        .collect();
    timings.coefficients = t0.elapsed();
    Ok(finish(bundle, coeffs, timings))
}

/// State spectrum `Ψ_k a_k` and its time samples (`N_x × N_ω` each).
pub fn reconstruct_state(bundle: &RomBundle, coeffs: &[CVec]) -> Result<(CMat, CMat)> {
    let psi = bundle
        .psi
        .as_ref()
        .ok_or_else(|| Error::Invalid("model was built without keeping its modes".into()))?;
    let n = bundle.grid.n_omega();
    if coeffs.len() != n {
        return Err(Error::dim("coefficient list", n, coeffs.len()));
    }
    let mut q_hat = CMat::zeros(bundle.nx, n);
    for (k, a) in coeffs.iter().enumerate() {
        if a.len() != bundle.retained[k] {
            return Err(Error::dim("coefficients", bundle.retained[k], a.len()));
        }
        if !a.is_empty() {
            q_hat.set_column(k, &(&psi[k] * a));
        }
    }
    let q = ifft_time(&q_hat);
    Ok((q_hat, q))
}
