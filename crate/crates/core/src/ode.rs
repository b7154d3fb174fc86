//! Full-order time integration: Dormand-Prince 5(4) with step-size control
//! and Hairer's fourth-order continuous extension for sampling on a uniform
//! output grid.

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::fft::fft_time;
use crate::forcing::trig_eval;
use crate::linalg::{gauss_legendre, matmul, CMat, CVec, C64, ZERO};
use crate::lti::{FrequencyGrid, LtiSystem, Operator};

/// A vector-valued function of time (forcing or reduced forcing).
pub trait Signal: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, out: &mut [C64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut s = ZERO;
        for (c, k) in terms {
            s += k[i] * *c;
        }
        out[i] = y[i] + s * h;
    }
}

/// Integrate `dy/dt = f(t, y)` from `t0` and return the states at the
/// requested (ascending, `≥ t0`) sample times as columns.
pub fn dopri5<F>(
    mut rhs: F,
    t0: f64,
    y0: &[C64],
    samples: &[f64],
    opts: OdeOptions,
) -> Result<(CMat, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut out = CMat::zeros(n, samples.len());
    let mut stats = OdeStats::default();
    if samples.is_empty() {
        return Ok((out, stats));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) || samples[0] < t0 {
        return Err(Error::Invalid(
            "sample times must be ascending and not before t0".into(),
        ));
    }
    let t_end = *samples.last().unwrap();
    let mut next = 0usize;
    while next < samples.len() && samples[next] == t0 {
        out.column_mut(next).copy_from_slice(y0);
        next += 1;
    }
    if next == samples.len() {
        return Ok((out, stats));
    }
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![ZERO; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
        vec![ZERO; n],
    );
    let mut ytmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;

    let scale =
        |a: &[C64], b: &[C64], i: usize| opts.atol + opts.rtol * a[i].norm().max(b[i].norm());
    let rms = |v: &[C64], a: &[C64], b: &[C64]| -> f64 {
        if n == 0 {
            return 0.0;
        }
        (v.iter()
            .enumerate()
            .map(|(i, x)| (x.norm() / scale(a, b, i)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };

    // initial step (Hairer & Wanner, II.4)
    let mut h = {
        let d0 = rms(&y, &y, &y);
        let d1 = rms(&k1, &y, &y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(t_end - t);
        combo(&mut ytmp, &y, h0, &[(1.0, &k1)]);
        rhs(t + h0, &ytmp, &mut k2);
        stats.rhs_evals += 1;
        let diff: Vec<C64> = k2.iter().zip(&k1).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff, &y, &y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    };

    let mut err_err = vec![ZERO; n];
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t });
        }
        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        combo(&mut ytmp, &y, h, &[(A21, &k1)]);
        rhs(t + C2 * h, &ytmp, &mut k2);
        combo(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &ytmp, &mut k3);
        combo(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &ytmp, &mut k4);
        combo(
            &mut ytmp,
            &y,
            h,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        rhs(t + C5 * h, &ytmp, &mut k5);
        combo(
            &mut ytmp,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let t_new = if last { t_end } else { t + h };
        rhs(t_new, &ytmp, &mut k6);
        combo(
            &mut ynew,
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        rhs(t_new, &ynew, &mut k7);
        stats.rhs_evals += 6;
        for i in 0..n {
            err_err[i] =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let err = rms(&err_err, &y, &ynew);
        if !err.is_finite() {
            h *= 0.2;
            stats.rejected += 1;
            continue;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            // emit samples inside (t, t_new]
            let mut dense: Option<[Vec<C64>; 5]> = None;
            while next < samples.len() && samples[next] <= t_new {
                let s = samples[next];
                if s == t_new {
                    out.column_mut(next).copy_from_slice(&ynew);
                } else {
                    let r = dense.get_or_insert_with(|| {
                        let mut r1 = vec![ZERO; n];
                        let mut r2 = vec![ZERO; n];
                        let mut r3 = vec![ZERO; n];
                        let mut r4 = vec![ZERO; n];
                        for i in 0..n {
                            let ydiff = ynew[i] - y[i];
                            let bspl = k1[i] * h - ydiff;
                            r1[i] = ydiff;
                            r2[i] = bspl;
                            r3[i] = ydiff - k7[i] * h - bspl;
                            r4[i] = (k1[i] * D1
                                + k3[i] * D3
                                + k4[i] * D4
                                + k5[i] * D5
                                + k6[i] * D6
                                + k7[i] * D7)
                                * h;
                        }
                        [y.clone(), r1, r2, r3, r4]
                    });
                    let th = (s - t) / h;
                    let th1 = 1.0 - th;
                    let col: Vec<C64> = (0..n)
                        .map(|i| {
                            r[0][i]
                                + (r[1][i] + (r[2][i] + (r[3][i] + r[4][i] * th1) * th) * th1) * th
                        })
                        .collect();
                    out.column_mut(next).copy_from_slice(&col);
                }
                next += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if next >= samples.len() {
                return Ok((out, stats));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
}

/// A trajectory sampled uniformly at `t_j = j Δt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: CMat,
    pub forcings: CMat,
    pub dt: f64,
    pub q0: CVec,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn nx(&self) -> usize {
        self.states.nrows()
    }
}

/// Right-hand side `A q + B f(t)` of an LTI system.
pub struct LtiRhs<'a, S: Signal + ?Sized> {
    sys: &'a LtiSystem,
    forcing: &'a S,
    fbuf: Vec<C64>,
    bbuf: Vec<C64>,
    /// Dense `A` as separate real and imaginary column-major planes.
    dense_a: Option<(Vec<f64>, Vec<f64>)>,
    qre: Vec<f64>,
    qim: Vec<f64>,
    dre: Vec<f64>,
    dim: Vec<f64>,
}

impl<'a, S: Signal + ?Sized> LtiRhs<'a, S> {
    pub fn new(sys: &'a LtiSystem, forcing: &'a S) -> Self {
        let dense_a = match &sys.a {
            Operator::Dense(m) => Some((
                m.as_slice().iter().map(|z| z.re).collect(),
                m.as_slice().iter().map(|z| z.im).collect(),
            )),
            _ => None,
        };
        let n = sys.nx();
        Self {
            sys,
            forcing,
            fbuf: vec![ZERO; sys.nf()],
            bbuf: vec![ZERO; n],
            dense_a,
            qre: vec![0.0; n],
            qim: vec![0.0; n],
            dre: vec![0.0; n],
            dim: vec![0.0; n],
        }
    }

    pub fn eval(&mut self, t: f64, q: &[C64], dq: &mut [C64]) {
        let n = q.len();
        match &self.dense_a {
            Some((are, aim)) => {
                for (i, z) in q.iter().enumerate() {
                    self.qre[i] = z.re;
                    self.qim[i] = z.im;
                }
                self.dre.iter_mut().for_each(|v| *v = 0.0);
                self.dim.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..n {
                    let (xr, xi) = (self.qre[j], self.qim[j]);
                    if xr == 0.0 && xi == 0.0 {
                        continue;
                    }
                    let cr = &are[j * n..(j + 1) * n];
                    let ci = &aim[j * n..(j + 1) * n];
                    for (((dr, di), &ar), &ai) in
                        self.dre.iter_mut().zip(self.dim.iter_mut()).zip(cr).zip(ci)
                    {
                        *dr += ar * xr - ai * xi;
                        *di += ar * xi + ai * xr;
                    }
                }
                for (d, (&r, &i)) in dq.iter_mut().zip(self.dre.iter().zip(&self.dim)) {
                    *d = C64::new(r, i);
                }
            }
            None => self.sys.a.apply_into(q, dq),
        }
        if self.sys.nf() == 0 {
            return;
        }
        self.forcing.eval(t, &mut self.fbuf);
        match &self.sys.b {
            Operator::Identity(_) => {
                for (d, f) in dq.iter_mut().zip(&self.fbuf) {
                    *d += f;
                }
            }
            b => {
                b.apply_into(&self.fbuf, &mut self.bbuf);
                for (d, f) in dq.iter_mut().zip(&self.bbuf) {
                    *d += f;
                }
            }
        }
    }
}

/// Integrate the LTI system from `q0` at the uniform times `j Δt`,
/// `j = 0..n_samples`, recording the forcing values at the same instants.
pub fn integrate<S: Signal + ?Sized>(
    sys: &LtiSystem,
    q0: &CVec,
    forcing: &S,
    dt: f64,
    n_samples: usize,
    opts: OdeOptions,
) -> Result<Trajectory> {
    if q0.len() != sys.nx() {
        return Err(Error::dim("initial state", sys.nx(), q0.len()));
    }
    if forcing.dim() != sys.nf() {
        return Err(Error::dim("forcing dimension", sys.nf(), forcing.dim()));
    }
    let times: Vec<f64> = (0..n_samples).map(|j| j as f64 * dt).collect();
    let mut f = LtiRhs::new(sys, forcing);
    let (states, _) = dopri5(
        |t, y, dy| f.eval(t, y, dy),
        0.0,
        q0.as_slice(),
        &times,
        opts,
    )?;
    let mut forcings = CMat::zeros(sys.nf(), n_samples);
    let mut buf = vec![ZERO; sys.nf()];
    for (j, &t) in times.iter().enumerate() {
        forcing.eval(t, &mut buf);
        forcings.column_mut(j).copy_from_slice(&buf);
    }
    Ok(Trajectory {
        states,
        forcings,
        dt,
        q0: q0.clone(),
    })
}

/// Signal that is identically zero.
pub struct ZeroSignal(pub usize);

impl Signal for ZeroSignal {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _t: f64, out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
    }
}

/// Signal constant in time.
pub struct ConstantSignal(pub Vec<C64>);

impl Signal for ConstantSignal {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, _t: f64, out: &mut [C64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Largest state dimension accepted by the brute-force analytic oracle.
pub const ANALYTIC_CAP: usize = 64;

/// Exact samples of the solution for the trigonometric forcing interpolant
/// of `fhat`: `q_{j+1} = e^{AΔt} q_j + ∫_0^{Δt} e^{A(Δt-s)} B f(t_j + s) ds`,
/// the convolution done by 24-point Gauss-Legendre with exact exponentials.
pub fn analytic_samples(
    sys: &LtiSystem,
    q0: &CVec,
    fhat: &CMat,
    grid: &FrequencyGrid,
) -> Result<CMat> {
    let nx = sys.nx();
    if nx > ANALYTIC_CAP {
        return Err(Error::SizeGuard(format!(
            "analytic reference limited to N_x <= {ANALYTIC_CAP}, got {nx}"
        )));
    }
    if q0.len() != nx {
        return Err(Error::dim("initial state", nx, q0.len()));
    }
    if fhat.shape() != (sys.nf(), grid.n_omega()) {
        return Err(Error::dim(
            "forcing spectrum",
            format!("{}x{}", sys.nf(), grid.n_omega()),
            format!("{}x{}", fhat.nrows(), fhat.ncols()),
        ));
    }
    let dt = grid.dt();
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let e = expm(&a, dt)?;
    let (x, w) = gauss_legendre(24);
    let nodes: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(x, w)| (0.5 * dt * (x + 1.0), 0.5 * dt * w))
        .collect();
    let kernels = nodes
        .iter()
        .map(|&(s, _)| expm(&a, dt - s).map(|m| matmul(&m, &b)))
        .collect::<Result<Vec<_>>>()?;
    let n = grid.n_omega();
    let mut out = CMat::zeros(nx, n);
    let mut q = q0.clone();
    let mut f = vec![ZERO; sys.nf()];
    for j in 0..n {
        out.set_column(j, &q);
        if j + 1 == n {
            break;
        }
        let tj = j as f64 * dt;
        let mut next = &e * &q;
        for ((s, wt), k) in nodes.iter().zip(&kernels) {
            trig_eval(fhat, dt, false, tj + s, &mut f);
            let fv = CVec::from_column_slice(&f);
            next += k * fv * C64::new(*wt, 0.0);
        }
        q = next;
    }
    Ok(out)
}

/// DFT of [`analytic_samples`]; the independent oracle for the corrected
/// frequency-domain solution.
pub fn analytic_dft_reference(
    sys: &LtiSystem,
    q0: &CVec,
    fhat: &CMat,
    grid: &FrequencyGrid,
) -> Result<CMat> {
    Ok(fft_time(&analytic_samples(sys, q0, fhat, grid)?))
}
