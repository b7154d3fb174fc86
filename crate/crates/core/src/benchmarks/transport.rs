//! Advection-diffusion of a passive scalar in a steady recirculating flow on
//! the unit square, second-order finite differences, zero Dirichlet walls.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{Envelope, ForcingSpec, TemporalKind};
use crate::linalg::{RMat, RVec, C64};
use crate::lti::{LtiSystem, Operator, Weight};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarTransportSpec {
    /// Diffusivity.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Interior points per direction.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Forcing support width `l`.
    #[serde(default = "default_l")]
    pub support_width: f64,
    /// Forcing spatial correlation length `ξ`.
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_center")]
    pub center: [f64; 2],
    /// Points with `ln(envelope) > support_log_threshold` are forced.
    #[serde(default = "default_threshold")]
    pub support_log_threshold: f64,
    /// Text file with `u v` per interior point (row-major, x fastest);
    /// the analytic cavity-like field is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_file: Option<String>,
}

fn default_eta() -> f64 {
    1e-3
}
fn default_n() -> usize {
    98
}
fn default_l() -> f64 {
    0.1
}
fn default_xi() -> f64 {
    0.07
}
fn default_tau() -> f64 {
    1.0
}
fn default_center() -> [f64; 2] {
    [0.75, 0.25]
}
fn default_threshold() -> f64 {
    -6.8
}

impl Default for ScalarTransportSpec {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            n: default_n(),
            support_width: default_l(),
            xi: default_xi(),
            tau: default_tau(),
            center: default_center(),
            support_log_threshold: default_threshold(),
            velocity_file: None,
        }
    }
}

impl ScalarTransportSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Invalid(format!(
                "grid needs at least 3 interior points, got {}",
                self.n
            )));
        }
        if !(self.eta > 0.0) || !(self.support_width > 0.0) || !(self.xi > 0.0) || !(self.tau > 0.0)
        {
            return Err(Error::Invalid(
                "eta, support_width, xi and tau must be positive".into(),
            ));
        }
        if !(self.support_log_threshold < 0.0) {
            return Err(Error::Invalid(
                "support_log_threshold must be negative".into(),
            ));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    /// Forcing statistics with the envelope, correlation length and
    /// correlation time of this problem.
    pub fn forcing(&self, seed: u64) -> ForcingSpec {
        ForcingSpec {
            kind: TemporalKind::Gaussian,
            xi: self.xi,
            envelope: Some(Envelope {
                center: self.center.to_vec(),
                width: self.support_width,
            }),
            tau: self.tau,
            band_limit: None,
            max_omega: None,
            amplitude: 1.0,
            real: true,
            seed,
        }
    }
}

/// Velocity at the interior points, `u` and `v` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub n: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VelocityField {
    /// Velocity from the stream function `sin²(πx) sin²(πy)` through
    /// centered differences, scaled to unit maximum speed. The centered
    /// discrete divergence of this field vanishes identically.
    pub fn cavity(n: usize) -> Self {
        let h = 1.0 / (n + 1) as f64;
        let psi = |i: isize, j: isize| -> f64 {
            let x = (i + 1) as f64 * h;
            let y = (j + 1) as f64 * h;
            let s = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
            s * s
        };
        let mut u = vec![0.0; n * n];
        let mut v = vec![0.0; n * n];
        for j in 0..n as isize {
            for i in 0..n as isize {
                let p = j as usize * n + i as usize;
                u[p] = (psi(i, j + 1) - psi(i, j - 1)) / (2.0 * h);
                v[p] = -(psi(i + 1, j) - psi(i - 1, j)) / (2.0 * h);
            }
        }
        let vmax = u
            .iter()
            .zip(&v)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max);
        u.iter_mut().for_each(|a| *a /= vmax);
        v.iter_mut().for_each(|a| *a /= vmax);
        Self { n, u, v }
    }

    /// Load `u v` pairs, one interior point per non-empty line
    /// (`#` starts a comment).
    pub fn from_file(path: &Path, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut u = Vec::with_capacity(n * n);
        let mut v = Vec::with_capacity(n * n);
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), ln + 1)))?;
            if vals.len() != 2 {
                return Err(Error::Format(format!(
                    "{}:{}: expected 2 values, found {}",
                    path.display(),
                    ln + 1,
                    vals.len()
                )));
            }
            u.push(vals[0]);
            v.push(vals[1]);
        }
        if u.len() != n * n {
            return Err(Error::dim("velocity samples", n * n, u.len()));
        }
        Ok(Self { n, u, v })
    }

    pub fn max_speed(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Centered discrete divergence at each interior point, with zero
    /// velocity on the walls.
    pub fn divergence(&self) -> Vec<f64> {
        let n = self.n as isize;
        let h = 1.0 / (self.n + 1) as f64;
        let at = |f: &[f64], i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= n || j >= n {
                0.0
            } else {
                f[(j * n + i) as usize]
            }
        };
        let mut out = Vec::with_capacity(self.u.len());
        for j in 0..n {
            for i in 0..n {
                out.push(
                    (at(&self.u, i + 1, j) - at(&self.u, i - 1, j) + at(&self.v, i, j + 1)
                        - at(&self.v, i, j - 1))
                        / (2.0 * h),
                );
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ScalarTransport {
    pub sys: LtiSystem,
    pub w: Weight,
    pub velocity: VelocityField,
    /// Coordinates of all interior points (`N_x × 2`).
    pub points: RMat,
    /// State indices of the forced points.
    pub forced: Vec<usize>,
}

impl ScalarTransport {
    /// Coordinates of the forced points (`N_f × 2`).
    pub fn forced_points(&self) -> RMat {
        RMat::from_fn(self.forced.len(), 2, |i, c| {
            self.points[(self.forced[i], c)]
        })
    }
}

pub fn build_scalar_transport(spec: &ScalarTransportSpec) -> Result<ScalarTransport> {
    spec.validate()?;
    let velocity = match &spec.velocity_file {
        Some(p) => VelocityField::from_file(Path::new(p), spec.n)?,
        None => VelocityField::cavity(spec.n),
    };
    let a = transport_operator(spec.n, spec.eta, &velocity);
    let n = spec.n;
    let nx = n * n;
    let h = spec.h();
    let points = RMat::from_fn(nx, 2, |p, c| {
        if c == 0 {
            ((p % n) + 1) as f64 * h
        } else {
            ((p / n) + 1) as f64 * h
        }
    });
    let env = Envelope {
        center: spec.center.to_vec(),
        width: spec.support_width,
    };
    let forced: Vec<usize> = (0..nx)
        .filter(|&p| {
            let d2 = (points[(p, 0)] - spec.center[0]).powi(2)
                + (points[(p, 1)] - spec.center[1]).powi(2);
            let _ = &env;
            -d2 / (spec.support_width * spec.support_width) > spec.support_log_threshold
        })
        .collect();
    if forced.is_empty() {
        return Err(Error::Invalid(
            "forcing support contains no grid points".into(),
        ));
    }
    let b = CsrMatrix::from_triplets(
        nx,
        forced.len(),
        forced
            .iter()
            .enumerate()
            .map(|(j, &p)| (p, j, C64::new(1.0, 0.0)))
            .collect(),
    );
    let sys = LtiSystem::new(
        Operator::Sparse(a),
        Operator::Sparse(b),
        Operator::Identity(nx),
    )?;
    let w = Weight::diagonal(RVec::from_element(nx, h * h))?;
    Ok(ScalarTransport {
        sys,
        w,
        velocity,
        points,
        forced,
    })
}

/// `A = -½[(u·∇) + ∇·(u ·)] + η∇²` with centered differences; the
/// advective part is skew-symmetric.
pub fn transport_operator(n: usize, eta: f64, vel: &VelocityField) -> CsrMatrix {
    let h = 1.0 / (n + 1) as f64;
    let idx = |i: usize, j: usize| j * n + i;
    let mut trip = Vec::with_capacity(5 * n * n);
    let diff = eta / (h * h);
    for j in 0..n {
        for i in 0..n {
            let p = idx(i, j);
            trip.push((p, p, C64::new(-4.0 * diff, 0.0)));
            let mut nb = |q: usize, vel_p: f64, vel_q: f64, sign: f64| {
                let adv = -sign * (vel_p + vel_q) / (4.0 * h);
                trip.push((p, q, C64::new(diff + adv, 0.0)));
            };
            if i + 1 < n {
                nb(idx(i + 1, j), vel.u[p], vel.u[idx(i + 1, j)], 1.0);
            }
            if i > 0 {
                nb(idx(i - 1, j), vel.u[p], vel.u[idx(i - 1, j)], -1.0);
            }
            if j + 1 < n {
                nb(idx(i, j + 1), vel.v[p], vel.v[idx(i, j + 1)], 1.0);
            }
            if j > 0 {
                nb(idx(i, j - 1), vel.v[p], vel.v[idx(i, j - 1)], -1.0);
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, CVec};
    use std::f64::consts::PI;

    #[test]
    fn cavity_field_is_divergence_free_with_unit_speed() {
        let v = VelocityField::cavity(40);
        assert!(v.divergence().iter().all(|d| d.abs() < 1e-10));
        assert!((v.max_speed() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplacian_eigenpair() {
        let n = 30;
        let zero = VelocityField {
            n,
            u: vec![0.0; n * n],
            v: vec![0.0; n * n],
        };
        let eta = 1e-3;
        let a = transport_operator(n, eta, &zero);
        let h = 1.0 / (n + 1) as f64;
        let phi = CVec::from_fn(n * n, |p, _| {
            let (i, j) = ((p % n + 1) as f64, (p / n + 1) as f64);
            C64::new((PI * i * h).sin() * (2.0 * PI * j * h).sin(), 0.0)
        });
        let lam = eta * (-4.0 / (h * h)) * ((PI * h / 2.0).sin().powi(2) + (PI * h).sin().powi(2));
        let res = a.matvec(&phi) - &phi * C64::new(lam, 0.0);
        assert!(res.norm() / (lam.abs() * phi.norm()) < 1e-4);
        // continuum limit
        let cont = -eta * 5.0 * PI * PI;
        assert!((lam - cont).abs() / cont.abs() < 1e-2);
    }

    #[test]
    fn pure_diffusion_is_symmetric_negative() {
        let n = 8;
        let zero = VelocityField {
            n,
            u: vec![0.0; n * n],
            v: vec![0.0; n * n],
        };
        let a = transport_operator(n, 0.01, &zero).to_dense();
        assert!((&a - a.transpose()).norm() < 1e-12);
        let eig = a.map(|z| z.re).symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l < 0.0));
    }

    #[test]
    fn advection_is_skew() {
        let spec = ScalarTransportSpec {
            n: 12,
            ..Default::default()
        };
        let st = build_scalar_transport(&spec).unwrap();
        let a = st.sys.a.to_dense();
        let zero = VelocityField {
            n: 12,
            u: vec![0.0; 144],
            v: vec![0.0; 144],
        };
        let d = transport_operator(12, spec.eta, &zero).to_dense();
        let adv: CMat = &a - &d;
        assert!((&adv + adv.transpose()).norm() < 1e-12 * adv.norm());
        assert!(st.sys.stability_check().unwrap() < 0.0);
    }

    #[test]
    fn forced_region_size() {
        let st = build_scalar_transport(&ScalarTransportSpec::default()).unwrap();
        let nf = st.forced.len() as f64;
        assert!((nf - 2050.0).abs() <= 0.05 * 2050.0, "{nf}");
        assert_eq!(st.sys.nx(), 9604);
        let ab = st.sys.stability_check();
        assert!(ab.as_ref().map_or(false, |&v| v < 0.0), "{ab:?}");
    }

    #[test]
    fn velocity_file_round_trip() {
        let v = VelocityField::cavity(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vel.txt");
        let text: String =
            v.u.iter()
                .zip(&v.v)
                .map(|(a, b)| format!("{a:e} {b:e}\n"))
                .collect();
        std::fs::write(&path, format!("# u v\n{text}")).unwrap();
        assert_eq!(VelocityField::from_file(&path, 5).unwrap(), v);
        assert!(VelocityField::from_file(&path, 6).is_err());
    }
}
