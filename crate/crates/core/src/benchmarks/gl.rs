//! Linearized complex Ginzburg-Landau equation on Hermite collocation points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, RVec, C64};
use crate::lti::{LtiSystem, Weight};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GinzburgLandauSpec {
    /// Advection speed `ν` as `[re, im]`.
    #[serde(default = "default_nu")]
    pub nu: [f64; 2],
    /// Diffusion `γ` as `[re, im]`.
    #[serde(default = "default_gamma")]
    pub gamma: [f64; 2],
    #[serde(default = "default_c_mu")]
    pub c_mu: f64,
    #[serde(default = "default_mu_2")]
    pub mu_2: f64,
    #[serde(default = "default_mu_0")]
    pub mu_0: f64,
    #[serde(default = "default_nx")]
    pub n_x: usize,
    /// Position of the outermost collocation point.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_nu() -> [f64; 2] {
    [2.0, 0.2]
}
fn default_gamma() -> [f64; 2] {
    [1.0, -1.0]
}
fn default_c_mu() -> f64 {
    0.2
}
fn default_mu_2() -> f64 {
    -0.01
}
fn default_mu_0() -> f64 {
    0.229
}
fn default_nx() -> usize {
    220
}
fn default_half_width() -> f64 {
    85.0
}

impl Default for GinzburgLandauSpec {
    fn default() -> Self {
        Self {
            nu: default_nu(),
            gamma: default_gamma(),
            c_mu: default_c_mu(),
            mu_2: default_mu_2(),
            mu_0: default_mu_0(),
            n_x: default_nx(),
            half_width: default_half_width(),
        }
    }
}

impl GinzburgLandauSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_x < 4 {
            return Err(Error::Invalid(format!(
                "need at least 4 collocation points, got {}",
                self.n_x
            )));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Invalid("half_width must be positive".into()));
        }
        Ok(())
    }

    pub fn mu(&self, x: f64) -> f64 {
        (self.mu_0 - self.c_mu * self.c_mu) + 0.5 * self.mu_2 * x * x
    }

    /// Edge of the region where `μ(x) > 0` (NaN when `μ` is never positive).
    pub fn amplification_edge(&self) -> f64 {
        (-2.0 * (self.mu_0 - self.c_mu * self.c_mu) / self.mu_2).sqrt()
    }
}

/// The assembled benchmark: system, quadrature weight and nodes.
#[derive(Clone, Debug)]
pub struct GinzburgLandau {
    pub sys: LtiSystem,
    pub w: Weight,
    pub x: Vec<f64>,
    pub d1: RMat,
    pub d2: RMat,
}

impl GinzburgLandau {
    /// Node coordinates as an `N_x × 1` matrix, for forcing covariances.
    pub fn points(&self) -> RMat {
        RMat::from_column_slice(self.x.len(), 1, &self.x)
    }
}

pub fn build_gl(spec: &GinzburgLandauSpec) -> Result<GinzburgLandau> {
    spec.validate()?;
    let n = spec.n_x;
    let roots = hermite_roots(n);
    let b = roots[n - 1] / spec.half_width;
    let (d1, d2) = hermite_diff(&roots, b);
    let x: Vec<f64> = roots.iter().map(|r| r / b).collect();
    let nu = C64::new(spec.nu[0], spec.nu[1]);
    let gamma = C64::new(spec.gamma[0], spec.gamma[1]);
    let a = CMat::from_fn(n, n, |i, j| {
        let mut v = -nu * d1[(i, j)] + gamma * d2[(i, j)];
        if i == j {
            v += spec.mu(x[i]);
        }
        v
    });
    let w = Weight::diagonal(RVec::from_iterator(
        n,
        hermite_function_weights(&roots).into_iter().map(|v| v / b),
    ))?;
    Ok(GinzburgLandau {
        sys: LtiSystem::dense_identity_io(a)?,
        w,
        x,
        d1,
        d2,
    })
}

/// Roots of the physicists' Hermite polynomial `H_n`, ascending
/// (Golub-Welsch, then Newton polishing on the normalized Hermite functions).
pub fn hermite_roots(n: usize) -> Vec<f64> {
    let jac = RMat::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut r: Vec<f64> = jac.symmetric_eigen().eigenvalues.iter().copied().collect();
    r.sort_by(f64::total_cmp);
    for x in r.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = hermite_fn_and_derivative(n, *x);
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
    }
    r
}

/// `ψ_n(x)` and `p_n'(x) e^{-x²/2} = sqrt(2n) ψ_{n-1}(x)`, whose ratio is the
/// Newton step for a root of the orthonormal Hermite polynomial `p_n`.
fn hermite_fn_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let psi = hermite_functions(n + 1, x);
    let dp = if n == 0 {
        0.0
    } else {
        (2.0 * n as f64).sqrt() * psi[n - 1]
    };
    (psi[n], dp)
}

/// `ψ_0(x) .. ψ_{m-1}(x)` by the stable three-term recurrence.
fn hermite_functions(m: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if m > 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for k in 1..m.saturating_sub(1) {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * out[k]
            - (k as f64 / (k + 1) as f64).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Gauss-Hermite weights times `e^{x_j²}`: the quadrature weights for
/// integrating products of Hermite functions over the real line.
pub fn hermite_function_weights(roots: &[f64]) -> Vec<f64> {
    let n = roots.len();
    roots
        .iter()
        .map(|&x| 1.0 / hermite_functions(n, x).iter().map(|p| p * p).sum::<f64>())
        .collect()
}

/// First and second differentiation matrices for weighted interpolation
/// with weight `e^{-ξ²/2}` on nodes `roots`, for the physical coordinate
/// `x = ξ / b`.
pub fn hermite_diff(roots: &[f64], b: f64) -> (RMat, RMat) {
    let alpha: Vec<f64> = roots.iter().map(|x| (-0.5 * x * x).exp()).collect();
    let beta = [
        roots.iter().map(|x| -x).collect::<Vec<f64>>(),
        roots.iter().map(|x| x * x - 1.0).collect::<Vec<f64>>(),
    ];
    let mut dm = weighted_poldif(roots, &alpha, &beta);
    dm[0] *= b;
    dm[1] *= b * b;
    let d2 = dm.pop().unwrap();
    let d1 = dm.pop().unwrap();
    (d1, d2)
}

/// Differentiation matrices of the weighted interpolant
/// `p(x) = Σ_j α(x)/α(x_j) L_j(x) f_j`; `beta[l][j] = α^{(l+1)}(x_j)/α(x_j)`.
fn weighted_poldif(x: &[f64], alpha: &[f64], beta: &[Vec<f64>]) -> Vec<RMat> {
    let n = x.len();
    let m = beta.len();
    let dx = RMat::from_fn(n, n, |i, j| if i == j { 1.0 } else { x[i] - x[j] });
    // c_i = α_i Π_{k≠i}(x_i - x_k), kept as log-magnitude and sign
    let mut logc = vec![0.0; n];
    let mut sgn = vec![1.0; n];
    for i in 0..n {
        let mut l = alpha[i].abs().ln();
        let mut s = alpha[i].signum();
        for k in 0..n {
            let v = dx[(i, k)];
            l += v.abs().ln();
            s *= v.signum();
        }
        logc[i] = l;
        sgn[i] = s;
    }
    let cratio = RMat::from_fn(n, n, |i, j| sgn[i] * sgn[j] * (logc[i] - logc[j]).exp());
    let z = RMat::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / dx[(i, j)] });
    // xcol[j] holds 1/(x_j - x_i) for i ≠ j, in order of i
    let xcol: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j).map(|i| z[(j, i)]).collect())
        .collect();
    let mut y = RMat::from_element(n, n, 1.0);
    let mut d = RMat::identity(n, n);
    let mut out = Vec::with_capacity(m);
    for l in 1..=m {
        // cumulative sums down the rows give the diagonal entries
        let mut ynew = RMat::zeros(n, n);
        for j in 0..n {
            let mut acc = beta[l - 1][j];
            ynew[(0, j)] = acc;
            for i in 1..n {
                acc += l as f64 * y[(i - 1, j)] * xcol[j][i - 1];
                ynew[(i, j)] = acc;
            }
        }
        y = ynew;
        let diag: Vec<f64> = (0..n).map(|i| d[(i, i)]).collect();
        let mut dn = RMat::from_fn(n, n, |i, j| {
            l as f64 * z[(i, j)] * (cratio[(i, j)] * diag[i] - d[(i, j)])
        });
        for j in 0..n {
            dn[(j, j)] = y[(n - 1, j)];
        }
        d = dn;
        out.push(d.clone());
    }
    out
}
