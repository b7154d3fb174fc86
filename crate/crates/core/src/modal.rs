//! Modal decompositions: Welch blocking, SPOD by the method of snapshots,
//! space-only POD, small space-time POD and the cross-frequency retention rule.

use std::ops::Range;

use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft_time;
use crate::linalg::{adjoint_mul, hermitian_eig_desc, matmul, mul_adjoint, CMat, C64};
use crate::lti::{FrequencyGrid, Weight};

/// Relative energy below which snapshot modes are not formed.
pub const MODE_CUTOFF: f64 = 1e-12;

/// Largest `N_x · N_ω` accepted by [`spacetime_pod`].
pub const SPACETIME_LIMIT: usize = 1 << 15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    None,
    /// Periodic Hann window, scaled to unit mean power.
    Hann,
}

impl Window {
    pub fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => {
                let w: Vec<f64> = (0..n)
                    .map(|j| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
                    .collect();
                let power = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
                let c = 1.0 / power.sqrt();
                w.into_iter().map(|v| v * c).collect()
            }
        }
    }
}

/// How block start indices are placed along a long record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockLayout {
    /// Exactly this many blocks, starts spread as evenly as integer
    /// positions allow (first at 0, last flush with the end).
    Count(usize),
    /// Fixed stride between starts.
    Stride(usize),
    /// Fractional overlap between consecutive blocks.
    Overlap(f64),
}

impl Default for BlockLayout {
    fn default() -> Self {
        BlockLayout::Overlap(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n_omega: usize,
    pub starts: Vec<usize>,
    pub window: Window,
}

impl BlockPlan {
    pub fn new(
        n_total: usize,
        n_omega: usize,
        layout: BlockLayout,
        window: Window,
    ) -> Result<Self> {
        if n_omega == 0 {
            return Err(Error::Invalid("block length must be positive".into()));
        }
        if n_total < n_omega {
            return Err(Error::Invalid(format!(
                "record of {n_total} samples is shorter than one block of {n_omega}"
            )));
        }
        let span = n_total - n_omega;
        let from_stride = |s: usize| -> Result<Vec<usize>> {
            if s == 0 {
                return Err(Error::Invalid("block stride must be positive".into()));
            }
            Ok((0..=span / s).map(|i| i * s).collect())
        };
        let starts = match layout {
            BlockLayout::Count(0) => {
                return Err(Error::Invalid("block count must be positive".into()))
            }
            BlockLayout::Count(1) => vec![0],
            BlockLayout::Count(n) => {
                if n > span + 1 {
                    return Err(Error::Invalid(format!(
                        "{n} distinct blocks of {n_omega} do not fit in {n_total} samples"
                    )));
                }
                (0..n)
                    .map(|i| ((i * span) as f64 / (n - 1) as f64).round() as usize)
                    .collect()
            }
            BlockLayout::Stride(s) => from_stride(s)?,
            BlockLayout::Overlap(f) => {
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::Invalid(format!(
                        "overlap must lie in [0, 1), got {f}"
                    )));
                }
                from_stride(((n_omega as f64) * (1.0 - f)).round().max(1.0) as usize)?
            }
        };
        Ok(Self {
            n_omega,
            starts,
            window,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.starts.len()
    }
}

/// Anything that can hand out per-frequency block spectra `Q̂_k`
/// (`rows × n_blocks`) for a contiguous range of frequency indices.
pub trait SpectraSource: Sync {
    fn grid(&self) -> FrequencyGrid;
    fn n_rows(&self) -> usize;
    fn n_blocks(&self) -> usize;
    fn spectra(&self, freqs: Range<usize>) -> Result<Vec<CMat>>;
}

/// Block spectra computed on demand from a long uniformly sampled record.
pub struct WelchSource<'a> {
    data: &'a CMat,
    plan: BlockPlan,
    grid: FrequencyGrid,
}

impl<'a> WelchSource<'a> {
    pub fn new(data: &'a CMat, dt: f64, plan: BlockPlan) -> Result<Self> {
        let need = plan.starts.last().map_or(0, |s| s + plan.n_omega);
        if need > data.ncols() {
            return Err(Error::Invalid(format!(
                "block plan needs {need} samples, record has {}",
                data.ncols()
            )));
        }
        let grid = FrequencyGrid::new(plan.n_omega, dt)?;
        Ok(Self { data, plan, grid })
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    fn block_fft(&self, i: usize) -> CMat {
        let n = self.plan.n_omega;
        let mut block = self.data.columns(self.plan.starts[i], n).clone_owned();
        if self.plan.window != Window::None {
            let w = self.plan.window.weights(n);
            for (j, mut col) in block.column_iter_mut().enumerate() {
                col *= C64::new(w[j], 0.0);
            }
        }
        fft_time(&block)
    }
}

impl SpectraSource for WelchSource<'_> {
    fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    fn n_blocks(&self) -> usize {
        self.plan.n_blocks()
    }

    fn spectra(&self, freqs: Range<usize>) -> Result<Vec<CMat>> {
        if freqs.end > self.plan.n_omega {
            return Err(Error::Invalid("frequency range outside the grid".into()));
        }
        let rows = self.data.nrows();
        let nb = self.n_blocks();
        let mut out = vec![CMat::zeros(rows, nb); freqs.len()];
        // blocks are transformed in parallel in groups to bound memory
        let group = 64;
        for g0 in (0..nb).step_by(group) {
            let g1 = (g0 + group).min(nb);
            let parts: Vec<CMat> = (g0..g1)
                .into_par_iter()
                .map(|i| {
                    self.block_fft(i)
                        .columns(freqs.start, freqs.len())
                        .clone_owned()
                })
                .collect();
            for (off, part) in parts.into_iter().enumerate() {
                for (slot, col) in out.iter_mut().zip(part.column_iter()) {
                    slot.set_column(g0 + off, &col);
                }
            }
        }
        Ok(out)
    }
}

/// Per-frequency block spectra held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockedSpectra {
    pub grid: FrequencyGrid,
    pub plan: BlockPlan,
    /// `q[k]` is `N_x × r_d`; column `i` is the `k`-th DFT coefficient of block `i`.
    pub q: Vec<CMat>,
}

impl BlockedSpectra {
    pub fn n_blocks(&self) -> usize {
        self.plan.n_blocks()
    }
}

impl SpectraSource for BlockedSpectra {
    fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    fn n_rows(&self) -> usize {
        self.q.first().map_or(0, |m| m.nrows())
    }

    fn n_blocks(&self) -> usize {
        self.plan.n_blocks()
    }

    fn spectra(&self, freqs: Range<usize>) -> Result<Vec<CMat>> {
        if freqs.end > self.q.len() {
            return Err(Error::Invalid("frequency range outside the grid".into()));
        }
        Ok(self.q[freqs].to_vec())
    }
}

/// Segment a long record into (possibly overlapping) blocks and DFT each.
pub fn segment_blocks(
    data: &CMat,
    dt: f64,
    n_omega: usize,
    layout: BlockLayout,
    window: Window,
) -> Result<BlockedSpectra> {
    let plan = BlockPlan::new(data.ncols(), n_omega, layout, window)?;
    let src = WelchSource::new(data, dt, plan.clone())?;
    let q = src.spectra(0..n_omega)?;
    Ok(BlockedSpectra {
        grid: src.grid,
        plan,
        q,
    })
}

/// Result of a snapshot POD of one data matrix `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPod {
    /// All eigenvalues of the correlation estimate, descending and clipped at 0.
    pub energies: Vec<f64>,
    /// Leading W-orthonormal modes (at most the numerical rank).
    pub modes: CMat,
    /// `modes = X · coeffs` when the method of snapshots was used.
    pub coeffs: Option<CMat>,
}

/// Eigendecomposition of the snapshot correlation `(1/scale) X^H W X`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramEig {
    /// All eigenvalues, descending, clipped at 0.
    pub energies: Vec<f64>,
    /// Leading eigenvectors (at most the numerical rank).
    pub vecs: CMat,
    pub scale: f64,
}

pub fn gram_eig(x: &CMat, w: &Weight, scale: f64, max_vecs: usize) -> GramEig {
    let mut corr = w.gram(x, x);
    corr /= C64::new(scale, 0.0);
    corr = (&corr + corr.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = hermitian_eig_desc(corr);
    let energies: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let lmax = energies.first().copied().unwrap_or(0.0);
    let rank = energies
        .iter()
        .take_while(|&&v| v > MODE_CUTOFF * lmax && v > 0.0)
        .count();
    let keep = rank.min(max_vecs);
    GramEig {
        energies,
        vecs: vecs.columns(0, keep).clone_owned(),
        scale,
    }
}

/// Modes `X V Λ^{-1/2} / √scale` for the leading `max_modes` eigenpairs,
/// re-orthonormalized in W.
pub fn modes_from_gram(
    x: &CMat,
    w: &Weight,
    eig: &GramEig,
    max_modes: usize,
) -> Result<SnapshotPod> {
    let keep = eig.vecs.ncols().min(max_modes);
    let mut coeffs = eig.vecs.columns(0, keep).clone_owned();
    for (j, mut col) in coeffs.column_iter_mut().enumerate() {
        col /= C64::new((eig.energies[j] * eig.scale).sqrt(), 0.0);
    }
    let modes = matmul(x, &coeffs);
    let (modes, coeffs) = w_orthonormalize(modes, coeffs, w)?;
    Ok(SnapshotPod {
        energies: eig.energies.clone(),
        modes,
        coeffs: Some(coeffs),
    })
}

/// Method of snapshots: eigendecomposition of `(1/scale) X^H W X`, modes
/// formed from the data and re-orthonormalized in the W inner product.
pub fn snapshot_pod_gram(
    x: &CMat,
    w: &Weight,
    scale: f64,
    max_modes: usize,
) -> Result<SnapshotPod> {
    let eig = gram_eig(x, w, scale, max_modes);
    modes_from_gram(x, w, &eig, max_modes)
}

/// Cholesky-QR in the W inner product, applied to both the modes and the
/// coefficient matrix that generated them. Keeps the span of every leading
/// column subset.
fn w_orthonormalize(modes: CMat, coeffs: CMat, w: &Weight) -> Result<(CMat, CMat)> {
    if modes.ncols() == 0 {
        return Ok((modes, coeffs));
    }
    let g = w.gram(&modes, &modes);
    let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let chol = Cholesky::new(g).ok_or_else(|| Error::Singular {
        freq: None,
        detail: "mode Gram matrix is not positive definite".into(),
    })?;
    // G = L L^H, so X L^{-H} is W-orthonormal
    let l = chol.l();
    let n = l.nrows();
    let linv = l
        .solve_lower_triangular(&CMat::identity(n, n))
        .ok_or_else(|| Error::Singular {
            freq: None,
            detail: "triangular mode factor".into(),
        })?;
    let rinv = linv.adjoint();
    Ok((matmul(&modes, &rinv), matmul(&coeffs, &rinv)))
}

/// Space-only POD of snapshot columns, energies of `(1/m) X^H W X`.
/// Uses the `N_x × N_x` correlation when that is the smaller problem.
pub fn pod(snapshots: &CMat, w: &Weight) -> Result<SnapshotPod> {
    pod_truncated(snapshots, w, usize::MAX)
}

pub fn pod_truncated(snapshots: &CMat, w: &Weight, max_modes: usize) -> Result<SnapshotPod> {
    let (nx, m) = snapshots.shape();
    if w.dim() != nx {
        return Err(Error::dim("pod weight", nx, w.dim()));
    }
    if m == 0 {
        return Ok(SnapshotPod {
            energies: vec![],
            modes: CMat::zeros(nx, 0),
            coeffs: None,
        });
    }
    if nx > m {
        return snapshot_pod_gram(snapshots, w, m as f64, max_modes);
    }
    let ws = w.sqrt_apply(snapshots);
    let mut corr = mul_adjoint(&ws, &ws);
    corr /= C64::new(m as f64, 0.0);
    corr = (&corr + corr.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = hermitian_eig_desc(corr);
    let energies: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let lmax = energies.first().copied().unwrap_or(0.0);
    let rank = energies
        .iter()
        .take_while(|&&v| v > MODE_CUTOFF * lmax && v > 0.0)
        .count();
    let keep = rank.min(max_modes);
    let modes = w.inv_sqrt_apply(&vecs.columns(0, keep).clone_owned());
    Ok(SnapshotPod {
        energies,
        modes,
        coeffs: None,
    })
}

/// SPOD result at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SpodFrequency {
    pub energies: Vec<f64>,
    pub modes: CMat,
    /// `modes = Q̂_k · coeffs`.
    pub coeffs: CMat,
}

/// SPOD at one frequency: `modes = W^{-1/2} U`, `energies = Σ²` for the SVD
/// of `W^{1/2} Q̂_k / √r_d`.
pub fn spod_frequency(q: &CMat, w: &Weight, max_modes: usize) -> Result<SpodFrequency> {
    let r_d = q.ncols();
    if r_d == 0 {
        return Err(Error::Invalid("SPOD needs at least one block".into()));
    }
    let p = snapshot_pod_gram(q, w, r_d as f64, max_modes)?;
    Ok(SpodFrequency::from_pod(p))
}

/// SPOD at one frequency from a precomputed correlation eigendecomposition.
pub fn spod_frequency_with(
    q: &CMat,
    w: &Weight,
    eig: &GramEig,
    max_modes: usize,
) -> Result<SpodFrequency> {
    Ok(SpodFrequency::from_pod(modes_from_gram(
        q, w, eig, max_modes,
    )?))
}

impl SpodFrequency {
    fn from_pod(p: SnapshotPod) -> Self {
        SpodFrequency {
            energies: p.energies,
            modes: p.modes,
            coeffs: p.coeffs.expect("gram route"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpodBasisSet {
    pub grid: FrequencyGrid,
    pub n_blocks: usize,
    pub freqs: Vec<SpodFrequency>,
}

impl SpodBasisSet {
    pub fn energies(&self) -> Vec<Vec<f64>> {
        self.freqs.iter().map(|f| f.energies.clone()).collect()
    }

    /// Descending merge of every frequency's energies.
    pub fn ranked_energies(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .freqs
            .iter()
            .flat_map(|f| f.energies.iter().copied())
            .collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all
    }

    pub fn retention(&self, r: usize) -> Result<Vec<usize>> {
        retention(&self.energies(), r)
    }

    /// Leading `counts[k]` modes at every frequency.
    pub fn retained_modes(&self, counts: &[usize]) -> Result<Vec<CMat>> {
        self.freqs
            .iter()
            .zip(counts)
            .enumerate()
            .map(|(k, (f, &c))| {
                if c > f.modes.ncols() {
                    return Err(Error::Invalid(format!(
                        "frequency {k} retains {c} modes but only {} are resolved",
                        f.modes.ncols()
                    )));
                }
                Ok(f.modes.columns(0, c).clone_owned())
            })
            .collect()
    }
}

/// SPOD of every frequency supplied by `source`, keeping at most
/// `max_modes` modes per frequency.
pub fn spod(source: &dyn SpectraSource, w: &Weight, max_modes: usize) -> Result<SpodBasisSet> {
    let grid = source.grid();
    let n = grid.n_omega();
    let mut freqs = Vec::with_capacity(n);
    let chunk = chunk_len(source.n_rows(), source.n_blocks(), n, DEFAULT_CHUNK_BYTES);
    for start in (0..n).step_by(chunk) {
        let end = (start + chunk).min(n);
        let q = source.spectra(start..end)?;
        let part: Vec<Result<SpodFrequency>> = q
            .par_iter()
            .enumerate()
            .map(|(off, qk)| {
                spod_frequency(qk, w, max_modes).map_err(|e| match e {
                    Error::Singular { detail, .. } => Error::Singular {
                        freq: Some(start + off),
                        detail,
                    },
                    other => other,
                })
            })
            .collect();
        for p in part {
            freqs.push(p?);
        }
    }
    Ok(SpodBasisSet {
        grid,
        n_blocks: source.n_blocks(),
        freqs,
    })
}

/// Default memory budget for one chunk of block spectra.
pub const DEFAULT_CHUNK_BYTES: usize = 768 << 20;

/// Number of frequencies whose spectra fit in `budget` bytes.
pub fn chunk_len(rows: usize, blocks: usize, n_omega: usize, budget: usize) -> usize {
    let per = (rows * blocks * std::mem::size_of::<C64>()).max(1);
    (budget / per).clamp(1, n_omega.max(1))
}

/// Per-frequency counts of the `N_ω·r` most energetic modes overall.
///
/// Entries are ranked by energy. Equal energies are admitted by ascending
/// mode index, then ascending frequency index, so every count is a prefix,
/// a flat spectrum gives `r` everywhere and `Σ r_k = N_ω·r` exactly.
pub fn retention(energies: &[Vec<f64>], r: usize) -> Result<Vec<usize>> {
    let n = energies.len();
    let budget = n * r;
    let total: usize = energies.iter().map(Vec::len).sum();
    if budget > total {
        return Err(Error::Invalid(format!(
            "mean rank {r} asks for {budget} modes but only {total} exist"
        )));
    }
    let mut all: Vec<(f64, usize, usize)> = energies
        .iter()
        .enumerate()
        .flat_map(|(k, e)| e.iter().enumerate().map(move |(l, &v)| (v, k, l)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    let mut counts = vec![0; n];
    for &(_, k, _) in &all[..budget] {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Space-time POD of an ensemble of equal-length trajectories under the
/// weight `W ⊗ Δt I`. Returns descending energies and the modes, each
/// `N_x × N_ω`.
pub fn spacetime_pod(trajectories: &[CMat], w: &Weight, dt: f64) -> Result<(Vec<f64>, Vec<CMat>)> {
    let n = trajectories.len();
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    let (nx, nt) = trajectories[0].shape();
    if nx * nt > SPACETIME_LIMIT {
        return Err(Error::SizeGuard(format!(
            "space-time POD of {nx} x {nt} exceeds {SPACETIME_LIMIT} entries"
        )));
    }
    if trajectories.iter().any(|t| t.shape() != (nx, nt)) {
        return Err(Error::dim(
            "space-time ensemble",
            format!("{nx}x{nt}"),
            "mixed shapes",
        ));
    }
    let stacked = CMat::from_fn(nx * nt, n, |i, j| trajectories[j][(i % nx, i / nx)]);
    let big_w = match w {
        Weight::Diagonal { d, .. } => {
            Weight::diagonal(nalgebra::DVector::from_fn(nx * nt, |i, _| d[i % nx] * dt))?
        }
        Weight::Dense { .. } => {
            let wd = w.apply(&CMat::identity(nx, nx)) * C64::new(dt, 0.0);
            let mut full = CMat::zeros(nx * nt, nx * nt);
            for b in 0..nt {
                full.view_mut((b * nx, b * nx), (nx, nx)).copy_from(&wd);
            }
            Weight::dense(full)?
        }
    };
    let p = snapshot_pod_gram(&stacked, &big_w, n as f64, n)?;
    let modes = p
        .modes
        .column_iter()
        .map(|c| CMat::from_fn(nx, nt, |i, j| c[j * nx + i]))
        .collect();
    Ok((p.energies, modes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofBasis {
    Pod,
    Spod,
    SpaceTime,
}

/// Smallest `m` whose leading energies capture `target` of the total.
pub fn modes_for_fraction(sorted_desc: &[f64], target: f64) -> usize {
    if target <= 0.0 {
        return 0;
    }
    let total: f64 = sorted_desc.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, v) in sorted_desc.iter().enumerate() {
        acc += v;
        if acc >= target * total * (1.0 - 1e-14) {
            return i + 1;
        }
    }
    sorted_desc.len()
}

/// POD energies of the columns of `x` in the W inner product, divided by
/// `scale`, descending. Uses whichever correlation matrix is smaller and
/// skips the eigenvectors.
pub fn pod_energies(x: &CMat, w: &Weight, scale: f64) -> Vec<f64> {
    let (nx, m) = x.shape();
    if nx == 0 || m == 0 {
        return vec![];
    }
    let corr = if nx <= m {
        let ws = w.sqrt_apply(x);
        mul_adjoint(&ws, &ws)
    } else {
        w.gram(x, x)
    };
    hermitian_energies(corr, scale)
}

/// Degrees of freedom needed to represent the ensemble to `target`
/// captured-energy fraction. POD pays one coefficient per mode per time step.
pub fn dof_for_accuracy(
    basis: DofBasis,
    ensemble: &[CMat],
    w: &Weight,
    dt: f64,
    target: f64,
) -> Result<usize> {
    if ensemble.is_empty() || target <= 0.0 {
        return Ok(0);
    }
    let (nx, nt) = ensemble[0].shape();
    if ensemble.iter().any(|t| t.shape() != (nx, nt)) {
        return Err(Error::dim("ensemble", format!("{nx}x{nt}"), "mixed shapes"));
    }
    if w.dim() != nx {
        return Err(Error::dim("ensemble weight", nx, w.dim()));
    }
    let m = ensemble.len();
    let energies = match basis {
        DofBasis::Pod => {
            let mut corr = CMat::zeros(nx, nx);
            for t in ensemble {
                let ws = w.sqrt_apply(t);
                corr += mul_adjoint(&ws, &ws);
            }
            hermitian_energies(corr, (nt * m) as f64)
        }
        DofBasis::Spod => {
            let mut csd = vec![CMat::zeros(nx, nx); nt];
            for t in ensemble {
                let ws = w.sqrt_apply(&fft_time(t));
                for (k, c) in csd.iter_mut().enumerate() {
                    let col = ws.column(k);
                    *c += &col * col.adjoint();
                }
            }
            let mut e: Vec<f64> = csd
                .into_par_iter()
                .flat_map_iter(|c| hermitian_energies(c, m as f64))
                .collect();
            e.sort_by(|a, b| b.total_cmp(a));
            e
        }
        DofBasis::SpaceTime => {
            // Gram of whole trajectories, accumulated over slabs of time
            let chunk = (4096 / nx).max(1);
            let mut gram = CMat::zeros(m, m);
            for t0 in (0..nt).step_by(chunk) {
                let len = chunk.min(nt - t0);
                let mut slab = CMat::zeros(nx * len, m);
                for (j, t) in ensemble.iter().enumerate() {
                    let ws = w.sqrt_apply(&t.columns(t0, len).clone_owned());
                    slab.column_mut(j).copy_from_slice(ws.as_slice());
                }
                gram += adjoint_mul(&slab, &slab);
            }
            hermitian_energies(gram, m as f64 / dt)
        }
    };
    let dof = modes_for_fraction(&energies, target);
    Ok(if basis == DofBasis::Pod {
        dof * nt
    } else {
        dof
    })
}

/// Eigenvalues of the Hermitian part of `c / scale`, clipped at zero and
/// sorted descending.
fn hermitian_energies(c: CMat, scale: f64) -> Vec<f64> {
    let c = (&c + c.adjoint()) * C64::new(0.5 / scale, 0.0);
    let mut e: Vec<f64> = c
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}
