//! Discrete Fourier transforms along the time axis of `n × N` sample arrays.
//!
//! Forward: `x̂_k = Σ_j x_j e^{-2πi jk/N}` (unnormalized). Inverse carries `1/N`.

use rustfft::{FftDirection, FftPlanner};

use crate::linalg::{CMat, C64};

fn transform_rows(x: &CMat, dir: FftDirection) -> CMat {
    let (n, len) = x.shape();
    if n == 0 || len == 0 {
        return x.clone();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(len, dir);
    // time series of each row laid out contiguously
    let mut buf: Vec<C64> = x.transpose().as_slice().to_vec();
    fft.process(&mut buf);
    let mut out = CMat::from_column_slice(len, n, &buf).transpose();
    if dir == FftDirection::Inverse {
        out /= C64::new(len as f64, 0.0);
    }
    out
}

/// Forward DFT of each row.
pub fn fft_time(x: &CMat) -> CMat {
    transform_rows(x, FftDirection::Forward)
}

/// Inverse DFT (with the 1/N factor) of each row.
pub fn ifft_time(x: &CMat) -> CMat {
    transform_rows(x, FftDirection::Inverse)
}

/// Forward DFT of a single series.
pub fn fft_vec(x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}
