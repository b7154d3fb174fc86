//! Stochastic forcing: Gaussian spatial correlation (optionally localized by
//! a Gaussian envelope) combined with band-limited white or Gaussian temporal
//! correlation. Realizations are shaped in the frequency domain.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_time, ifft_time};
use crate::linalg::{symmetric_eig_desc, CMat, RMat, C64, ZERO};
use crate::lti::FrequencyGrid;
use crate::ode::Signal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalKind {
    White,
    Gaussian,
}

/// Gaussian support envelope `exp(-|x - center|² / width²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub center: Vec<f64>,
    pub width: f64,
}

impl Envelope {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (-d2 / (self.width * self.width)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub kind: TemporalKind,
    /// Spatial correlation length; `inf` gives perfectly correlated points.
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    /// Temporal correlation time for `gaussian`.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Largest retained |harmonic| for `white`, counted on the grid of the
    /// record being generated; defaults to N/2 - 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_limit: Option<usize>,
    /// Largest retained |ω| for `white`; overrides `band_limit` and gives
    /// records of different lengths the same band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_omega: Option<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_true")]
    pub real: bool,
    pub seed: u64,
}

fn default_tau() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(Error::Invalid(format!(
                "xi must be positive, got {}",
                self.xi
            )));
        }
        if self.kind == TemporalKind::Gaussian && !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Invalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if let Some(w) = self.max_omega {
            if !(w >= 0.0) {
                return Err(Error::Invalid(format!(
                    "max_omega must be nonnegative, got {w}"
                )));
            }
        }
        if let Some(env) = &self.envelope {
            if !(env.width > 0.0) {
                return Err(Error::Invalid("envelope width must be positive".into()));
            }
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Invalid(
                "amplitude must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Stationary spatial covariance at the given points (rows of `points`).
    pub fn spatial_covariance(&self, points: &RMat) -> RMat {
        let n = points.nrows();
        let row = |i: usize| -> Vec<f64> { points.row(i).iter().copied().collect() };
        let env: Vec<f64> = (0..n)
            .map(|i| self.envelope.as_ref().map_or(1.0, |e| e.eval(&row(i))))
            .collect();
        let a2 = self.amplitude * self.amplitude;
        RMat::from_fn(n, n, |i, j| {
            let kern = if self.xi.is_infinite() {
                1.0
            } else {
                let d2: f64 = points
                    .row(i)
                    .iter()
                    .zip(points.row(j).iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                (-d2 / (self.xi * self.xi)).exp()
            };
            a2 * env[i] * env[j] * kern
        })
    }

    /// Unnormalized temporal power spectrum shape at each index of the grid.
    pub fn spectral_shape(&self, grid: &FrequencyGrid) -> Vec<f64> {
        let n = grid.n_omega();
        (0..n)
            .map(|k| {
                let h = grid.harmonic(k);
                if n % 2 == 0 && 2 * h.unsigned_abs() as usize == n {
                    return 0.0;
                }
                match self.kind {
                    TemporalKind::White => {
                        let keep = match self.max_omega {
                            Some(w) => grid.omega(k).abs() <= w * (1.0 + 1e-12),
                            None => {
                                h.unsigned_abs() as usize
                                    <= self.band_limit.unwrap_or((n / 2).saturating_sub(1))
                            }
                        };
                        if keep {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    TemporalKind::Gaussian => {
                        let w = grid.omega(k);
                        (-w * w * self.tau * self.tau / 4.0).exp()
                    }
                }
            })
            .collect()
    }
}

/// Hermitian square root `L = V Λ^{1/2} V^T` of a symmetric PSD matrix.
/// Eigenvalues in `[-1e-12 λ_max, 0)` are clipped to zero.
pub fn covariance_factor(c: &RMat) -> Result<RMat> {
    let (vals, vecs) = checked_eig(c)?;
    let d = RMat::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    Ok(&vecs * d * vecs.transpose())
}

/// Low-rank factor `V_r Λ_r^{1/2}` keeping eigenvalues above `1e-14 λ_max`.
pub fn low_rank_factor(c: &RMat) -> Result<RMat> {
    let (vals, vecs) = checked_eig(c)?;
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let keep = vals.iter().take_while(|&&v| v > 1e-14 * lmax).count();
    let mut l = vecs.columns(0, keep).clone_owned();
    for (j, mut col) in l.column_iter_mut().enumerate() {
        col *= vals[j].sqrt();
    }
    Ok(l)
}

fn checked_eig(c: &RMat) -> Result<(nalgebra::DVector<f64>, RMat)> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::dim(
            "covariance",
            "square",
            format!("{}x{}", n, c.ncols()),
        ));
    }
    let sym = (c + c.transpose()) * 0.5;
    let (vals, vecs) = symmetric_eig_desc(sym);
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && lmin < -1e-12 * lmax.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eig: lmin });
    }
    Ok((vals, vecs))
}

/// How a sampled signal is evaluated between samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Band-limited trigonometric interpolant of the periodic sample sequence.
    Trigonometric,
    /// Local Lagrange interpolation through this many neighbouring samples
    /// (periodic wrap). Cheap for very long signals.
    Lagrange(usize),
}

/// Where a realization came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: ForcingSpec,
    pub index: u64,
}

/// Forcing samples `f(t_j)`, their DFT, and an interpolation rule.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSignal {
    samples: CMat,
    spectrum: CMat,
    dt: f64,
    interp: Interpolation,
    real: bool,
    half: Option<HalfSpectrum>,
    pub provenance: Option<Provenance>,
}

/// Harmonics `0..=top` of a real signal without Nyquist content, as split
/// real and imaginary planes for fast evaluation.
#[derive(Clone, Debug, PartialEq)]
struct HalfSpectrum {
    top: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HalfSpectrum {
    fn new(spectrum: &CMat) -> Option<Self> {
        let (nf, n) = spectrum.shape();
        if n == 0 {
            return None;
        }
        let half = n / 2;
        // round-off level Nyquist content (from a real-part projection) is dropped
        if n % 2 == 0 && spectrum.column(half).norm() > 1e-13 * spectrum.norm() {
            return None;
        }
        let top = if n % 2 == 0 { half - 1 } else { half };
        let head = &spectrum.as_slice()[..(top + 1) * nf];
        Some(Self {
            top,
            re: head.iter().map(|z| z.re).collect(),
            im: head.iter().map(|z| z.im).collect(),
        })
    }

    fn eval(&self, n: usize, dt: f64, t: f64, out: &mut [C64]) {
        let nf = out.len();
        let base = 2.0 * PI * t / (n as f64 * dt);
        let mut acc: Vec<f64> = self.re[..nf].to_vec();
        for k in 1..=self.top {
            let (si, co) = (base * k as f64).sin_cos();
            let (pr, pi) = (2.0 * co, 2.0 * si);
            let re = &self.re[k * nf..(k + 1) * nf];
            let im = &self.im[k * nf..(k + 1) * nf];
            for ((a, &vr), &vi) in acc.iter_mut().zip(re).zip(im) {
                *a += vr * pr - vi * pi;
            }
        }
        let scale = 1.0 / n as f64;
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = C64::new(a * scale, 0.0);
        }
    }
}

impl ForcingSignal {
    pub fn from_samples(samples: CMat, dt: f64) -> Self {
        let spectrum = fft_time(&samples);
        let real = samples.iter().all(|z| z.im == 0.0);
        let half = if real {
            HalfSpectrum::new(&spectrum)
        } else {
            None
        };
        Self {
            samples,
            spectrum,
            dt,
            interp: Interpolation::Trigonometric,
            real,
            half,
            provenance: None,
        }
    }

    pub fn from_spectrum(spectrum: CMat, dt: f64) -> Self {
        let samples = ifft_time(&spectrum);
        Self {
            samples,
            spectrum,
            dt,
            interp: Interpolation::Trigonometric,
            real: false,
            half: None,
            provenance: None,
        }
    }

    pub fn zeros(nf: usize, n: usize, dt: f64) -> Self {
        Self::from_samples(CMat::zeros(nf, n), dt)
    }

    pub fn with_interpolation(mut self, interp: Interpolation) -> Self {
        self.interp = interp;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn samples(&self) -> &CMat {
        &self.samples
    }

    pub fn spectrum(&self) -> &CMat {
        &self.spectrum
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn nf(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.len(), self.dt)
    }

    /// Contiguous sub-window of samples `[start, start + len)` as a new
    /// periodic signal.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self::from_samples(self.samples.columns(start, len).clone_owned(), self.dt)
    }
}

impl Signal for ForcingSignal {
    fn dim(&self) -> usize {
        self.nf()
    }

    fn eval(&self, t: f64, out: &mut [C64]) {
        match self.interp {
            Interpolation::Trigonometric => match &self.half {
                Some(h) => h.eval(self.len(), self.dt, t, out),
                None => trig_eval(&self.spectrum, self.dt, self.real, t, out),
            },
            Interpolation::Lagrange(m) => lagrange_eval(&self.samples, self.dt, m, t, out),
        }
    }
}

/// Evaluate `(1/N) Σ_k x̂_k e^{i ω_k t}` with signed harmonics.
pub fn trig_eval(spectrum: &CMat, dt: f64, real: bool, t: f64, out: &mut [C64]) {
    let (nf, n) = spectrum.shape();
    out.iter_mut().for_each(|v| *v = ZERO);
    if n == 0 {
        return;
    }
    let base = 2.0 * PI * t / (n as f64 * dt);
    let half = n / 2;
    let nyquist = n % 2 == 0;
    let scale = 1.0 / n as f64;
    let col = |k: usize| &spectrum.as_slice()[k * nf..(k + 1) * nf];
    let nyq_zero = !nyquist || col(half).iter().all(|z| *z == ZERO);
    if real && nyq_zero {
        for (o, v) in out.iter_mut().zip(col(0)) {
            *o = C64::new(v.re, 0.0);
        }
        let top = if nyquist { half - 1 } else { half };
        for k in 1..=top {
            let p = C64::from_polar(2.0, base * k as f64);
            for (o, v) in out.iter_mut().zip(col(k)) {
                o.re += v.re * p.re - v.im * p.im;
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
        return;
    }
    for k in 0..n {
        let h = if 2 * k <= n {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let p = C64::from_polar(scale, base * h);
        for (o, v) in out.iter_mut().zip(col(k)) {
            *o += v * p;
        }
    }
}

fn lagrange_eval(samples: &CMat, dt: f64, m: usize, t: f64, out: &mut [C64]) {
    let (nf, n) = samples.shape();
    let s = t / dt;
    let j0 = s.floor();
    let frac = s - j0;
    let col = |j: i64| {
        let jj = j.rem_euclid(n as i64) as usize;
        &samples.as_slice()[jj * nf..(jj + 1) * nf]
    };
    if frac == 0.0 {
        out.copy_from_slice(col(j0 as i64));
        return;
    }
    let m = m.max(2);
    let lo = -((m as i64 - 1) / 2);
    let offsets: Vec<i64> = (0..m as i64).map(|i| lo + i).collect();
    out.iter_mut().for_each(|v| *v = ZERO);
    for &oi in &offsets {
        let mut w = 1.0;
        for &ol in &offsets {
            if ol != oi {
                w *= (frac - ol as f64) / (oi - ol) as f64;
            }
        }
        for (o, v) in out.iter_mut().zip(col(j0 as i64 + oi)) {
            *o += v * w;
        }
    }
}

/// Pre-factored generator for realizations of one spec on one sample grid.
pub struct ForcingGenerator {
    spec: ForcingSpec,
    factor: RMat,
    filter: Vec<f64>,
    n_samples: usize,
    dt: f64,
}

impl ForcingGenerator {
    pub fn new(spec: &ForcingSpec, points: &RMat, n_samples: usize, dt: f64) -> Result<Self> {
        spec.validate()?;
        let grid = FrequencyGrid::new(n_samples, dt)?;
        let cov = spec.spatial_covariance(points);
        let factor = low_rank_factor(&cov)?;
        let shape = spec.spectral_shape(&grid);
        let total: f64 = shape.iter().sum();
        // unit pointwise variance of the shaped unit-variance noise
        let filter = shape
            .iter()
            .map(|s| {
                if total > 0.0 {
                    (n_samples as f64 * s / total).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            factor,
            filter,
            n_samples,
            dt,
        })
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// Realization number `index`; depends only on (seed, index).
    pub fn realization(&self, index: u64) -> ForcingSignal {
        let n = self.n_samples;
        let rank = self.factor.ncols();
        let mut rng = ChaCha20Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index);
        let mut z = CMat::zeros(rank, n);
        for j in 0..n {
            for i in 0..rank {
                z[(i, j)] = if self.spec.real {
                    C64::new(StandardNormal.sample(&mut rng), 0.0)
                } else {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                };
            }
        }
        let mut zh = fft_time(&z);
        for (k, mut col) in zh.column_iter_mut().enumerate() {
            col *= C64::new(self.filter[k], 0.0);
        }
        let shaped = ifft_time(&zh);
        let samples = if self.spec.real {
            let re = shaped.map(|v| v.re);
            (&self.factor * re).map(|v| C64::new(v, 0.0))
        } else {
            let fc = self.factor.map(|v| C64::new(v, 0.0));
            crate::linalg::matmul(&fc, &shaped)
        };
        let mut sig = ForcingSignal::from_samples(samples, self.dt);
        sig.provenance = Some(Provenance {
            spec: self.spec.clone(),
            index,
        });
        sig
    }
}

/// Draw `n` independent realizations (indices `first..first + n`).
pub fn sample_forcing(
    spec: &ForcingSpec,
    points: &RMat,
    n_samples: usize,
    dt: f64,
    first: u64,
    n: usize,
) -> Result<Vec<ForcingSignal>> {
    let gen = ForcingGenerator::new(spec, points, n_samples, dt)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| gen.realization(first + i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;

    fn line_points(n: usize, h: f64) -> RMat {
        RMat::from_fn(n, 1, |i, _| i as f64 * h)
    }

    fn white(xi: f64, seed: u64) -> ForcingSpec {
        ForcingSpec {
            kind: TemporalKind::White,
            xi,
            envelope: None,
            tau: 1.0,
            band_limit: None,
            max_omega: None,
            amplitude: 1.0,
            real: true,
            seed,
        }
    }

    #[test]
    fn factor_examples() {
        let i = RMat::identity(4, 4);
        assert!((covariance_factor(&i).unwrap() - &i).norm() < 1e-14);
        let d = RMat::from_element(1, 1, 4.0);
        assert!((covariance_factor(&d).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        let bad = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(covariance_factor(&bad), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn infinite_correlation_length_is_rank_one() {
        let pts = line_points(6, 0.3);
        let sig = sample_forcing(&white(f64::INFINITY, 3), &pts, 32, 0.1, 0, 1)
            .unwrap()
            .remove(0);
        let s = sig.samples();
        for j in 0..32 {
            for i in 1..6 {
                assert!((s[(i, j)] - s[(0, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_is_dft_of_samples_and_band_limited() {
        let pts = line_points(5, 0.5);
        let mut spec = white(1.0, 9);
        spec.band_limit = Some(5);
        let sig = sample_forcing(&spec, &pts, 64, 0.2, 0, 1)
            .unwrap()
            .remove(0);
        assert!(rel_diff(&fft_time(sig.samples()), sig.spectrum()) < 1e-12);
        for k in 0..64 {
            let h = sig.grid().unwrap().harmonic(k).unsigned_abs();
            if h > 5 {
                assert!(sig.spectrum().column(k).norm() < 1e-10);
            }
        }
        assert!(sig.samples().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn trig_interpolant_reproduces_samples() {
        let pts = line_points(3, 0.5);
        let sig = sample_forcing(&white(1.0, 1), &pts, 16, 0.3, 0, 1)
            .unwrap()
            .remove(0);
        let mut buf = vec![ZERO; 3];
        for j in 0..16 {
            sig.eval(j as f64 * 0.3, &mut buf);
            for i in 0..3 {
                assert!((buf[i] - sig.samples()[(i, j)]).norm() < 1e-12);
            }
        }
        let c = ForcingSignal::from_samples(sig.samples().map(|z| z * C64::new(1.0, 1.0)), 0.3);
        c.eval(0.3 * 5.0, &mut buf);
        assert!((buf[1] - c.samples()[(1, 5)]).norm() < 1e-12);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let pts = line_points(4, 0.5);
        let a = sample_forcing(&white(1.0, 77), &pts, 32, 0.1, 0, 3).unwrap();
        let b = sample_forcing(&white(1.0, 77), &pts, 32, 0.1, 0, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].samples(), a[1].samples());
    }

    /// Circular autocovariance of one real channel at lags `0..=max_lag`,
    /// averaged over realizations.
    fn autocov(sigs: &[ForcingSignal], ch: usize, max_lag: usize) -> Vec<f64> {
        let n = sigs[0].len();
        (0..=max_lag)
            .map(|lag| {
                let tot: f64 = sigs
                    .iter()
                    .map(|s| {
                        let x = s.samples();
                        (0..n)
                            .map(|j| x[(ch, j)].re * x[(ch, (j + lag) % n)].re)
                            .sum::<f64>()
                    })
                    .sum();
                tot / (n * sigs.len()) as f64
            })
            .collect()
    }

    #[test]
    fn white_noise_is_uncorrelated_across_lags() {
        let pts = line_points(2, 0.5);
        let n = 64;
        let sigs = sample_forcing(&white(1.0, 11), &pts, n, 0.1, 0, 500).unwrap();
        let c = autocov(&sigs, 0, 6);
        // standard error of a lag product mean, unit variance
        let sigma = c[0] / ((n * sigs.len()) as f64).sqrt();
        for (lag, v) in c.iter().enumerate().skip(1) {
            assert!(v.abs() <= 5.0 * sigma, "lag {lag}: {v} vs {sigma}");
        }
        assert!((c[0] - 1.0).abs() < 0.05, "variance {}", c[0]);
    }

    #[test]
    fn gaussian_in_time_width_matches_tau() {
        let pts = line_points(1, 0.0);
        let dt = 0.2;
        let tau = 1.0;
        let spec = ForcingSpec {
            kind: TemporalKind::Gaussian,
            tau,
            ..white(1.0, 12)
        };
        let sigs = sample_forcing(&spec, &pts, 128, dt, 0, 500).unwrap();
        let c = autocov(&sigs, 0, 10);
        // least squares fit of ln ρ(s) = -s²/τ² over lags with ρ > 0.05
        let (mut num, mut den) = (0.0, 0.0);
        for (lag, v) in c.iter().enumerate().skip(1) {
            let rho = v / c[0];
            if rho > 0.05 {
                let s2 = (lag as f64 * dt).powi(2);
                num += s2 * s2;
                den -= s2 * rho.ln();
            }
        }
        let fitted = (num / den).sqrt();
        assert!((fitted - tau).abs() <= 0.15 * tau, "fitted width {fitted}");
    }

    #[test]
    fn realizations_are_zero_mean() {
        let pts = line_points(3, 0.4);
        let count = 400;
        let sigs = sample_forcing(&white(0.5, 13), &pts, 32, 0.1, 0, count).unwrap();
        let mut mean = CMat::zeros(3, 32);
        for s in &sigs {
            mean += s.samples();
        }
        mean /= C64::new(count as f64, 0.0);
        // unit pointwise variance: each entry of the mean has σ = 1/√n
        let bound = 5.0 * ((3 * 32) as f64).sqrt() / (count as f64).sqrt();
        assert!(mean.norm() <= bound, "{} > {bound}", mean.norm());
    }

    #[test]
    fn localized_spatial_covariance_matches_model() {
        let spec = crate::benchmarks::ScalarTransportSpec::default().forcing(21);
        let h = 1.0 / 99.0;
        let c = [0.75, 0.25];
        let offsets = [
            (0.0, 0.0),
            (3.0 * h, 0.0),
            (0.0, 6.0 * h),
            (-5.0 * h, 4.0 * h),
        ];
        let pts = RMat::from_fn(offsets.len(), 2, |i, d| {
            c[d] + if d == 0 { offsets[i].0 } else { offsets[i].1 }
        });
        let model = spec.spatial_covariance(&pts);
        let count = 1000;
        let n = 32;
        let sigs = sample_forcing(&spec, &pts, n, 0.5, 0, count).unwrap();
        let mut emp = RMat::zeros(offsets.len(), offsets.len());
        for s in &sigs {
            let x = s.samples().map(|z| z.re);
            emp += &x * x.transpose();
        }
        emp /= (count * n) as f64;
        for j in 0..offsets.len() {
            let rel = (emp[(0, j)] - model[(0, j)]).abs() / model[(0, j)];
            assert!(
                rel <= 0.1,
                "pair (0, {j}): {} vs {}",
                emp[(0, j)],
                model[(0, j)]
            );
        }
    }
}
