use log::{info, warn};
use rayon::prelude::*;

use super::deim::{deim_indices, select_rows, times_sampled_inverse, DeimBundle};
use super::{Intermediary, RomBundle, RomConfig};
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::freq::DENSE_CAP;
use crate::linalg::{adjoint_mul, hermitian_eig_desc, matmul, matrix_power, CMat, DenseLu, C64};
use crate::lti::{FrequencyGrid, LtiSystem, Weight};
use crate::modal::{
    chunk_len, gram_eig, pod_truncated, retention, spod_frequency_with, BlockPlan, GramEig,
    SpectraSource, SpodFrequency, WelchSource,
};

/// One long training record and its block layout.
pub struct TrainingData<'a> {
    pub states: &'a CMat,
    pub forcings: &'a CMat,
    pub dt: f64,
    pub plan: BlockPlan,
}

/// Data-driven forcing operator at one frequency,
/// `E_k = Λ^r (L_k Ψ^r)^H Ψ^g (Λ^g)^{-1} Ψ^{gH} B`, evaluated through the
/// block coefficients (`Ψ = Q̂ C`, `L_k Q̂ = G`) as
/// `r_d Λ^r C_r^H (G^H G)^+ G^H B`.
pub fn build_e_operator(
    sys: &LtiSystem,
    grid: &FrequencyGrid,
    k: usize,
    q: &CMat,
    spod: &SpodFrequency,
    r_k: usize,
    cutoff: f64,
) -> Result<CMat> {
    let g = sys.apply_lk(grid.omega(k), q);
    Ok(e_from_realizations(sys, &g, spod, r_k, cutoff))
}

fn e_from_realizations(
    sys: &LtiSystem,
    g: &CMat,
    spod: &SpodFrequency,
    r_k: usize,
    cutoff: f64,
) -> CMat {
    let r_d = g.ncols();
    if r_k == 0 {
        return CMat::zeros(0, sys.nf());
    }
    let gram = adjoint_mul(g, g);
    let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = hermitian_eig_desc(gram);
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let keep = vals
        .iter()
        .take_while(|&&v| v > cutoff * lmax && v > 0.0)
        .count();
    let gb = sys.b.adjoint_apply_mat(g).adjoint();
    let cr = spod.coeffs.columns(0, r_k);
    let mut x = adjoint_mul(&cr, &vecs.columns(0, keep));
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col /= C64::new(vals[j], 0.0);
    }
    let y = adjoint_mul(&vecs.columns(0, keep), &gb);
    let mut e = matmul(&x, &y);
    for (i, mut row) in e.row_iter_mut().enumerate() {
        row *= C64::new(r_d as f64 * spod.energies[i], 0.0);
    }
    e
}

struct FreqOut {
    e: CMat,
    h: CMat,
    t: CMat,
    c_psi: CMat,
    psi: CMat,
    f_rows: Option<CMat>,
    k_f: Option<(CMat, f64)>,
    fs: Option<CMat>,
}

struct Shared<'a> {
    sys: &'a LtiSystem,
    w: &'a Weight,
    grid: FrequencyGrid,
    phi_w: &'a CMat,
    cfg: &'a RomConfig,
    m_cap: usize,
    deim: Option<(&'a [usize], usize)>,
}

impl Shared<'_> {
    fn frequency(
        &self,
        k: usize,
        q: &CMat,
        eig: &GramEig,
        r_k: usize,
        fq: Option<&CMat>,
    ) -> Result<FreqOut> {
        let sys = self.sys;
        let spod = spod_frequency_with(q, self.w, eig, self.m_cap)?;
        let m = spod.modes.ncols();
        if r_k > m {
            return Err(Error::Invalid(format!(
                "frequency {k} retains {r_k} modes but only {m} are resolved"
            )));
        }
        let psi = &spod.modes;
        let e = build_e_operator(sys, &self.grid, k, q, &spod, r_k, self.cfg.pinv_cutoff)?;

        // reduced exponentials at size m
        let apsi = sys.a.apply_mat(psi);
        let a_red = self.w.gram(psi, &apsi);
        let e1 = expm(&a_red, self.grid.dt()).map_err(|e| e.at_stage("reduced exponential"))?;
        let g = CMat::identity(m, m) - matrix_power(&e1, self.grid.n_omega());
        let lu = DenseLu::with_freq(CMat::identity(m, m) - &e1 * self.grid.phase(k), Some(k))?;
        let psi_phi = matmul(self.phi_w, psi).adjoint();
        let h = lu.solve(&matmul(&g, &psi_phi)).rows(0, r_k).clone_owned();
        let psi_r = psi.columns(0, r_k).clone_owned();
        let t = matmul(self.phi_w, &psi_r);
        let c_psi = sys.c.apply_mat(&psi_r);

        let mut out = FreqOut {
            e,
            h,
            t,
            c_psi,
            psi: psi_r,
            f_rows: None,
            k_f: None,
            fs: None,
        };
        if let (Some((p_f, p_count)), Some(fq)) = (self.deim, fq) {
            let wpsi = self.w.apply(psi).adjoint();
            out.f_rows = Some(lu.solve(&matmul(&g, &wpsi)).rows(0, r_k).clone_owned());
            let fpod = pod_truncated(fq, &Weight::identity(fq.nrows()), p_count)?;
            out.k_f = Some(times_sampled_inverse(
                &out.e,
                &fpod.modes,
                p_f,
                self.cfg.pinv_cutoff,
            ));
            let mut fs = matmul(&out.psi, &matmul(&out.e, fq));
            fs /= C64::new(self.grid.n_omega() as f64, 0.0);
            out.fs = Some(fs);
        }
        Ok(out)
    }
}

/// Build every reduced operator from one long training record.
///
/// Block spectra are produced in frequency chunks sized by
/// `cfg.chunk_mib`. A first pass ranks the energies of all frequencies to
/// fix the retained counts; the second pass forms modes and operators.
pub fn offline(
    sys: &LtiSystem,
    w: &Weight,
    data: &TrainingData,
    cfg: &RomConfig,
) -> Result<RomBundle> {
    let nx = sys.nx();
    if data.states.nrows() != nx || w.dim() != nx {
        return Err(Error::dim("training states", nx, data.states.nrows()));
    }
    if data.forcings.nrows() != sys.nf() || data.forcings.ncols() != data.states.ncols() {
        return Err(Error::dim(
            "training forcing",
            format!("{}x{}", sys.nf(), data.states.ncols()),
            format!("{}x{}", data.forcings.nrows(), data.forcings.ncols()),
        ));
    }
    let src = WelchSource::new(data.states, data.dt, data.plan.clone())?;
    let grid = src.grid();
    let n = grid.n_omega();
    let nb = src.n_blocks();
    let m_cap = cfg.r_d.unwrap_or(nb).min(nb);
    if cfg.r > m_cap {
        return Err(Error::Invalid(format!(
            "mean rank {} exceeds the {m_cap} available modes",
            cfg.r
        )));
    }

    let phi_w = intermediary(w, data, cfg)?;
    info!("intermediary basis: p = {}", phi_w.nrows());

    let deim_f = match &cfg.deim {
        Some(d) => {
            let snaps = strided(data.forcings, cfg.pod_stride);
            let fp = pod_truncated(&snaps, &Weight::identity(sys.nf()), d.p_f)?;
            if fp.modes.ncols() < d.p_f {
                warn!(
                    "forcing ensemble rank {} is below the requested {} DEIM points",
                    fp.modes.ncols(),
                    d.p_f
                );
            }
            let idx = deim_indices(&fp.modes)?;
            Some((fp.modes, idx))
        }
        None => None,
    };

    let budget = cfg.chunk_mib << 20;
    let chunk = chunk_len(
        nx + if cfg.deim.is_some() { sys.nf() } else { 0 },
        nb,
        n,
        budget,
    );
    let cache_eigs = n * nb * m_cap * std::mem::size_of::<C64>() <= budget;
    info!("offline: {n} frequencies, {nb} blocks, chunk {chunk}");

    // pass 1: energies
    let mut eigs: Vec<GramEig> = Vec::with_capacity(n);
    let mut kept_spectra: Option<Vec<CMat>> = None;
    for start in (0..n).step_by(chunk) {
        let end = (start + chunk).min(n);
        let q = src.spectra(start..end)?;
        let part: Vec<GramEig> = q
            .par_iter()
            .map(|qk| {
                let mut e = gram_eig(qk, w, nb as f64, m_cap);
                if !cache_eigs {
                    e.vecs = CMat::zeros(nb, 0);
                }
                e
            })
            .collect();
        eigs.extend(part);
        if chunk >= n {
            kept_spectra = Some(q);
        }
    }
    let energies: Vec<Vec<f64>> = eigs.iter().map(|e| e.energies.clone()).collect();
    let retained = retention(&energies, cfg.r)?;
    info!("retained modes: {}", retained.iter().sum::<usize>());

    // pass 2: operators
    let fsrc = match cfg.deim {
        Some(_) => Some(WelchSource::new(data.forcings, data.dt, data.plan.clone())?),
        None => None,
    };
    let shared = Shared {
        sys,
        w,
        grid,
        phi_w: &phi_w,
        cfg,
        m_cap,
        deim: match (&deim_f, &cfg.deim) {
            (Some((_, idx)), Some(d)) => Some((idx.as_slice(), d.p_f)),
            _ => None,
        },
    };
    let mut outs: Vec<FreqOut> = Vec::with_capacity(n);
    for start in (0..n).step_by(chunk) {
        let end = (start + chunk).min(n);
        let q = match kept_spectra.take() {
            Some(q) => q,
            None => src.spectra(start..end)?,
        };
        let fq = match &fsrc {
            Some(f) => Some(f.spectra(start..end)?),
            None => None,
        };
        let part: Vec<Result<FreqOut>> = (start..end)
            .into_par_iter()
            .map(|k| {
                let qk = &q[k - start];
                let eig = if cache_eigs {
                    eigs[k].clone()
                } else {
                    gram_eig(qk, w, nb as f64, m_cap)
                };
                shared.frequency(k, qk, &eig, retained[k], fq.as_ref().map(|f| &f[k - start]))
            })
            .collect();
        for p in part {
            outs.push(p?);
        }
    }

    let deim = match (&cfg.deim, deim_f) {
        (Some(d), Some((u_f, p_f))) => Some(build_deim(
            &mut outs,
            data,
            d,
            u_f,
            p_f,
            cfg.pinv_cutoff,
            nx,
        )?),
        _ => None,
    };

    let mut bundle = RomBundle {
        grid,
        nx,
        nf: sys.nf(),
        ny: sys.ny(),
        n_blocks: nb,
        r: cfg.r,
        retained,
        energies,
        e: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        t: Vec::with_capacity(n),
        c_psi: Vec::with_capacity(n),
        psi: if cfg.keep_modes {
            Some(Vec::with_capacity(n))
        } else {
            None
        },
        phi_w,
        deim,
    };
    for o in outs {
        bundle.e.push(o.e);
        bundle.h.push(o.h);
        bundle.t.push(o.t);
        bundle.c_psi.push(o.c_psi);
        if let Some(p) = bundle.psi.as_mut() {
            p.push(o.psi);
        }
    }
    Ok(bundle)
}

fn strided(m: &CMat, stride: usize) -> CMat {
    let stride = stride.max(1);
    let cols: Vec<usize> = (0..m.ncols()).step_by(stride).collect();
    CMat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// `Φ^H W` for the configured intermediary basis.
fn intermediary(w: &Weight, data: &TrainingData, cfg: &RomConfig) -> Result<CMat> {
    let nx = w.dim();
    match cfg.intermediary {
        Intermediary::Full => {
            if nx > DENSE_CAP {
                return Err(Error::SizeGuard(format!(
                    "full intermediary basis needs a dense N_x x N_x matrix; N_x = {nx} exceeds {DENSE_CAP}"
                )));
            }
            Ok(w.sqrt_apply(&CMat::identity(nx, nx)))
        }
        Intermediary::Pod(p) => {
            let snaps = strided(data.states, cfg.pod_stride);
            let pod = pod_truncated(&snaps, w, p)?;
            if pod.modes.ncols() < p {
                warn!(
                    "state ensemble rank {} is below the requested p = {p}",
                    pod.modes.ncols()
                );
            }
            Ok(w.apply(&pod.modes).adjoint())
        }
    }
}

fn build_deim(
    outs: &mut [FreqOut],
    data: &TrainingData,
    d: &super::DeimConfig,
    u_f: CMat,
    p_f: Vec<usize>,
    cutoff: f64,
    nx: usize,
) -> Result<DeimBundle> {
    let unit = Weight::identity(nx);
    let q0s = CMat::from_fn(nx, data.plan.n_blocks(), |i, b| {
        data.states[(i, data.plan.starts[b])]
    });
    let u_q0 = pod_truncated(&q0s, &unit, d.p_q0)?.modes;
    let p_q0 = deim_indices(&u_q0)?;
    let mut fs = CMat::zeros(nx, data.plan.n_blocks());
    for o in outs.iter() {
        if let Some(c) = &o.fs {
            fs += c;
        }
    }
    let u_fs = pod_truncated(&fs, &unit, d.p_fs)?.modes;
    let p_fs = deim_indices(&u_fs)?;
    let mut bundle = DeimBundle {
        p_f,
        p_q0,
        p_fs,
        k_f: Vec::with_capacity(outs.len()),
        k_q0: Vec::with_capacity(outs.len()),
        k_fs: Vec::with_capacity(outs.len()),
        t_fs: Vec::with_capacity(outs.len()),
        u_f,
        cond_f: Vec::with_capacity(outs.len()),
        cond_q0: 0.0,
        cond_fs: 0.0,
    };
    for o in outs.iter_mut() {
        let f = o.f_rows.take().expect("DEIM rows");
        let (kq, cq) = times_sampled_inverse(&f, &u_q0, &bundle.p_q0, cutoff);
        let (kfs, cfs) = times_sampled_inverse(&f, &u_fs, &bundle.p_fs, cutoff);
        bundle.cond_q0 = cq;
        bundle.cond_fs = cfs;
        let (kf, cf) = o.k_f.take().expect("DEIM forcing operator");
        bundle.k_f.push(kf);
        bundle.cond_f.push(cf);
        bundle.k_q0.push(kq);
        bundle.k_fs.push(kfs);
        bundle.t_fs.push(select_rows(&o.psi, &bundle.p_fs));
        o.fs = None;
    }
    let worst = bundle
        .cond_f
        .iter()
        .copied()
        .fold(bundle.cond_q0.max(bundle.cond_fs), f64::max);
    if worst > 1e8 {
        warn!("DEIM interpolation factor condition number {worst:.3e} exceeds 1e8");
    }
    Ok(bundle)
}
