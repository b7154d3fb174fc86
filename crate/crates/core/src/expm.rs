//! Matrix exponential by scaling and squaring with Padé approximants
//! (Higham 2005 degree selection).

use crate::error::{Error, Result};
use crate::linalg::{matmul, norm1, CMat, DenseLu, C64};

/// Largest accepted `‖M t‖₁`. Accuracy of about 1e-12 relative is expected
/// up to 1e3; beyond that the squaring phase amplifies rounding.
pub const MAX_NORM: f64 = 1e6;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn scal(m: &CMat, s: f64) -> CMat {
    m * C64::new(s, 0.0)
}

fn add_identity(m: &mut CMat, s: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(s, 0.0);
    }
}

/// Evaluate the (m, m) Padé approximant for m in {3, 5, 7, 9}.
fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let a2 = matmul(a, a);
    let mut powers = vec![a2.clone()];
    let deg = b.len() - 1;
    for _ in 1..(deg / 2) {
        let next = matmul(powers.last().unwrap(), &a2);
        powers.push(next);
    }
    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    add_identity(&mut u, b[1]);
    add_identity(&mut v, b[0]);
    for (i, p) in powers.iter().enumerate() {
        let k = 2 * (i + 1);
        v += scal(p, b[k]);
        u += scal(p, b[k + 1]);
    }
    (matmul(a, &u), v)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let b = &B13;
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let mut inner_u = scal(&a6, b[13]) + scal(&a4, b[11]) + scal(&a2, b[9]);
    inner_u = matmul(&a6, &inner_u);
    inner_u += scal(&a6, b[7]) + scal(&a4, b[5]) + scal(&a2, b[3]);
    add_identity(&mut inner_u, b[1]);
    let u = matmul(a, &inner_u);
    let mut v = matmul(
        &a6,
        &(scal(&a6, b[12]) + scal(&a4, b[10]) + scal(&a2, b[8])),
    );
    v += scal(&a6, b[6]) + scal(&a4, b[4]) + scal(&a2, b[2]);
    add_identity(&mut v, b[0]);
    (u, v)
}

/// Compute `e^{M t}`.
pub fn expm(m: &CMat, t: f64) -> Result<CMat> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dim(
            "expm",
            "square matrix",
            format!("{n}x{}", m.ncols()),
        ));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let a = scal(m, t);
    let nrm = norm1(&a);
    if !nrm.is_finite() || nrm > MAX_NORM {
        return Err(Error::ExpmRange {
            norm: nrm,
            limit: MAX_NORM,
        });
    }
    if nrm == 0.0 {
        return Ok(CMat::identity(n, n));
    }
    for &(deg, theta) in THETA.iter() {
        if nrm <= theta {
            let b: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(&a, b);
            return solve_pade(u, v);
        }
    }
    let s = ((nrm / THETA_13).log2().ceil()).max(0.0) as i32;
    let a_scaled = scal(&a, 2f64.powi(-s));
    let (u, v) = pade13(&a_scaled);
    let mut r = solve_pade(u, v)?;
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpmRange {
            norm: nrm,
            limit: MAX_NORM,
        });
    }
    Ok(r)
}

fn solve_pade(u: CMat, v: CMat) -> Result<CMat> {
    let p = &v + &u;
    let q = &v - &u;
    Ok(DenseLu::new(q)?.solve(&p))
}
