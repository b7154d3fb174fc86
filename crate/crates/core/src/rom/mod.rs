//! SPOD Petrov-Galerkin reduced-order model: offline operator construction
//! and the online frequency-domain solve, with an optional DEIM-sampled
//! variant.

mod deim;
mod offline;
mod online;

pub use deim::{deim_indices, deim_reconstruct, DeimBundle};
pub use offline::{build_e_operator, offline, TrainingData};
pub use online::{online, online_deim, reconstruct_state, SolveReport, Timings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::lti::FrequencyGrid;
use crate::modal::retention;

/// Basis used to carry the initial condition and forcing sum online.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intermediary {
    /// Complete W-orthonormal basis `W^{-1/2}` (p = N_x; dense systems only).
    #[default]
    Full,
    /// Leading state POD modes.
    Pod(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeimConfig {
    /// Forcing sample count.
    #[serde(default = "default_p_f")]
    pub p_f: usize,
    /// Initial-condition sample count.
    #[serde(default = "default_p_aux")]
    pub p_q0: usize,
    /// Forcing-sum sample count.
    #[serde(default = "default_p_aux")]
    pub p_fs: usize,
}

fn default_p_f() -> usize {
    200
}
fn default_p_aux() -> usize {
    50
}

impl Default for DeimConfig {
    fn default() -> Self {
        Self {
            p_f: default_p_f(),
            p_q0: default_p_aux(),
            p_fs: default_p_aux(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    /// Mean number of retained modes per frequency.
    pub r: usize,
    /// Cap on the per-frequency modes used for the reduced exponentials;
    /// all resolved modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_d: Option<usize>,
    #[serde(default)]
    pub intermediary: Intermediary,
    /// Relative eigenvalue cutoff of the forcing-realization pseudo-inverse.
    #[serde(default = "default_pinv")]
    pub pinv_cutoff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deim: Option<DeimConfig>,
    /// Memory budget for one chunk of block spectra, in MiB.
    #[serde(default = "default_chunk_mib")]
    pub chunk_mib: usize,
    /// Use every n-th training snapshot for the intermediary POD.
    #[serde(default = "default_one")]
    pub pod_stride: usize,
    /// Keep the retained modes for state reconstruction.
    #[serde(default = "default_true")]
    pub keep_modes: bool,
}

fn default_pinv() -> f64 {
    1e-12
}
fn default_chunk_mib() -> usize {
    768
}
fn default_one() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl RomConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            r_d: None,
            intermediary: Intermediary::Full,
            pinv_cutoff: default_pinv(),
            deim: None,
            chunk_mib: default_chunk_mib(),
            pod_stride: 1,
            keep_modes: true,
        }
    }
}

/// Precomputed operators of the reduced model.
///
/// Per frequency `k`: `e[k]` is `r_k × N_f`, `h[k]` is `r_k × p`, `t[k]` is
/// `p × r_k` and `c_psi[k]` is `N_y × r_k`. `phi_w = Φ^H W` is `p × N_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct RomBundle {
    pub grid: FrequencyGrid,
    pub nx: usize,
    pub nf: usize,
    pub ny: usize,
    pub n_blocks: usize,
    pub r: usize,
    pub retained: Vec<usize>,
    pub energies: Vec<Vec<f64>>,
    pub e: Vec<CMat>,
    pub h: Vec<CMat>,
    pub t: Vec<CMat>,
    pub c_psi: Vec<CMat>,
    pub psi: Option<Vec<CMat>>,
    pub phi_w: CMat,
    pub deim: Option<DeimBundle>,
}

impl RomBundle {
    pub fn p(&self) -> usize {
        self.phi_w.nrows()
    }

    /// The same model at a smaller mean rank, by dropping trailing modes.
    /// Valid because every operator row (column for `t`, `c_psi`) belongs to
    /// one mode.
    pub fn truncate(&self, r: usize) -> Result<RomBundle> {
        if r > self.r {
            return Err(Error::Invalid(format!(
                "cannot raise the rank from {} to {r} by truncation",
                self.r
            )));
        }
        let counts = retention(&self.energies, r)?;
        let counts: Vec<usize> = counts
            .iter()
            .zip(&self.retained)
            .map(|(&a, &b)| a.min(b))
            .collect();
        let rows = |v: &[CMat]| -> Vec<CMat> {
            v.iter()
                .zip(&counts)
                .map(|(m, &c)| m.rows(0, c).clone_owned())
                .collect()
        };
        let cols = |v: &[CMat]| -> Vec<CMat> {
            v.iter()
                .zip(&counts)
                .map(|(m, &c)| m.columns(0, c).clone_owned())
                .collect()
        };
        Ok(RomBundle {
            grid: self.grid,
            nx: self.nx,
            nf: self.nf,
            ny: self.ny,
            n_blocks: self.n_blocks,
            r,
            retained: counts.clone(),
            energies: self.energies.clone(),
            e: rows(&self.e),
            h: rows(&self.h),
            t: cols(&self.t),
            c_psi: cols(&self.c_psi),
            psi: self.psi.as_ref().map(|p| cols(p)),
            phi_w: self.phi_w.clone(),
            deim: self.deim.as_ref().map(|d| DeimBundle {
                k_f: rows(&d.k_f),
                k_q0: rows(&d.k_q0),
                k_fs: rows(&d.k_fs),
                t_fs: cols(&d.t_fs),
                ..d.clone()
            }),
        })
    }

    /// Total number of retained modes.
    pub fn total_modes(&self) -> usize {
        self.retained.iter().sum()
    }
}
