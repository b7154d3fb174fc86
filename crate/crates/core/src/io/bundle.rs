//! Directory artifacts: one container per logical array plus a
//! `manifest.toml` describing how to split per-frequency records.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::container::{load, save, Array};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::lti::FrequencyGrid;
use crate::modal::{SpodBasisSet, SpodFrequency};
use crate::ode::Trajectory;
use crate::rom::{DeimBundle, RomBundle};

pub const MANIFEST: &str = "manifest.toml";
pub const BUILDER: &str = concat!("spod-rom ", env!("CARGO_PKG_VERSION"));

/// Provenance recorded with every artifact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub builder: String,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// The run configuration with defaults filled in, when one was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
}

impl Provenance {
    pub fn new(seeds: Vec<u64>, config: Option<String>) -> Self {
        Self {
            builder: BUILDER.to_string(),
            seeds,
            config,
        }
    }
}

fn write_manifest<T: Serialize>(dir: &Path, m: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = toml::to_string(m).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

#[derive(Serialize)]
struct ReportManifest<'a> {
    kind: &'a str,
    provenance: &'a Provenance,
}

/// Sidecar manifest for a directory of report tables or solve outputs.
pub fn save_report_manifest(dir: &Path, kind: &str, provenance: &Provenance) -> Result<()> {
    write_manifest(dir, &ReportManifest { kind, provenance })
}

fn read_manifest<T: DeserializeOwned>(dir: &Path) -> Result<T> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn file(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.sprm"))
}

fn put(dir: &Path, name: &str, m: &CMat) -> Result<()> {
    save(&file(dir, name), &Array::from_cmat(m))
}

fn get(dir: &Path, name: &str) -> Result<CMat> {
    load(&file(dir, name))?.to_cmat()
}

/// Vertical concatenation of blocks with a common column count.
pub fn stack_rows(blocks: &[CMat], ncols: usize) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, ncols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), ncols)).copy_from(b);
        at += b.nrows();
    }
    out
}

pub fn stack_cols(blocks: &[CMat], nrows: usize) -> CMat {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(nrows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (nrows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

fn split_rows(m: &CMat, counts: &[usize]) -> Result<Vec<CMat>> {
    if counts.iter().sum::<usize>() != m.nrows() {
        return Err(Error::Format(format!(
            "record counts do not add up to {} rows",
            m.nrows()
        )));
    }
    let mut at = 0;
    Ok(counts
        .iter()
        .map(|&c| {
            let b = m.rows(at, c).clone_owned();
            at += c;
            b
        })
        .collect())
}

fn split_cols(m: &CMat, counts: &[usize]) -> Result<Vec<CMat>> {
    if counts.iter().sum::<usize>() != m.ncols() {
        return Err(Error::Format(format!(
            "record counts do not add up to {} columns",
            m.ncols()
        )));
    }
    let mut at = 0;
    Ok(counts
        .iter()
        .map(|&c| {
            let b = m.columns(at, c).clone_owned();
            at += c;
            b
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DeimManifest {
    p_f: Vec<usize>,
    p_q0: Vec<usize>,
    p_fs: Vec<usize>,
    cond_f: Vec<f64>,
    cond_q0: f64,
    cond_fs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RomManifest {
    kind: String,
    grid: FrequencyGrid,
    nx: usize,
    nf: usize,
    ny: usize,
    n_blocks: usize,
    r: usize,
    retained: Vec<usize>,
    energy_counts: Vec<usize>,
    has_modes: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deim: Option<DeimManifest>,
    provenance: Provenance,
}

pub fn save_rom(dir: &Path, b: &RomBundle, provenance: &Provenance) -> Result<()> {
    let m = RomManifest {
        kind: "rom-operators".into(),
        grid: b.grid,
        nx: b.nx,
        nf: b.nf,
        ny: b.ny,
        n_blocks: b.n_blocks,
        r: b.r,
        retained: b.retained.clone(),
        energy_counts: b.energies.iter().map(|e| e.len()).collect(),
        has_modes: b.psi.is_some(),
        deim: b.deim.as_ref().map(|d| DeimManifest {
            p_f: d.p_f.clone(),
            p_q0: d.p_q0.clone(),
            p_fs: d.p_fs.clone(),
            cond_f: d.cond_f.clone(),
            cond_q0: d.cond_q0,
            cond_fs: d.cond_fs,
        }),
        provenance: provenance.clone(),
    };
    write_manifest(dir, &m)?;
    let energies: Vec<f64> = b.energies.iter().flatten().copied().collect();
    save(&file(dir, "energies"), &Array::from_reals(&energies))?;
    put(dir, "e", &stack_rows(&b.e, b.nf))?;
    put(dir, "h", &stack_rows(&b.h, b.p()))?;
    put(dir, "t", &stack_cols(&b.t, b.p()))?;
    put(dir, "c_psi", &stack_cols(&b.c_psi, b.ny))?;
    put(dir, "phi_w", &b.phi_w)?;
    if let Some(psi) = &b.psi {
        put(dir, "psi", &stack_cols(psi, b.nx))?;
    }
    if let Some(d) = &b.deim {
        put(dir, "deim_k_f", &stack_rows(&d.k_f, d.p_f.len()))?;
        put(dir, "deim_k_q0", &stack_rows(&d.k_q0, d.p_q0.len()))?;
        put(dir, "deim_k_fs", &stack_rows(&d.k_fs, d.p_fs.len()))?;
        put(dir, "deim_t_fs", &stack_cols(&d.t_fs, d.p_fs.len()))?;
        put(dir, "deim_u_f", &d.u_f)?;
    }
    Ok(())
}

pub fn load_rom(dir: &Path) -> Result<(RomBundle, Provenance)> {
    let m: RomManifest = read_manifest(dir)?;
    if m.kind != "rom-operators" {
        return Err(Error::Format(format!(
            "{} holds '{}', not ROM operators",
            dir.display(),
            m.kind
        )));
    }
    let flat = load(&file(dir, "energies"))?;
    let flat = flat.reals()?;
    if m.energy_counts.iter().sum::<usize>() != flat.len() {
        return Err(Error::Format(
            "energy counts do not match the stored energies".into(),
        ));
    }
    let mut at = 0;
    let energies: Vec<Vec<f64>> = m
        .energy_counts
        .iter()
        .map(|&c| {
            let v = flat[at..at + c].to_vec();
            at += c;
            v
        })
        .collect();
    let rk = &m.retained;
    let deim = match &m.deim {
        Some(d) => Some(DeimBundle {
            p_f: d.p_f.clone(),
            p_q0: d.p_q0.clone(),
            p_fs: d.p_fs.clone(),
            k_f: split_rows(&get(dir, "deim_k_f")?, rk)?,
            k_q0: split_rows(&get(dir, "deim_k_q0")?, rk)?,
            k_fs: split_rows(&get(dir, "deim_k_fs")?, rk)?,
            t_fs: split_cols(&get(dir, "deim_t_fs")?, rk)?,
            u_f: get(dir, "deim_u_f")?,
            cond_f: d.cond_f.clone(),
            cond_q0: d.cond_q0,
            cond_fs: d.cond_fs,
        }),
        None => None,
    };
    let bundle = RomBundle {
        grid: m.grid,
        nx: m.nx,
        nf: m.nf,
        ny: m.ny,
        n_blocks: m.n_blocks,
        r: m.r,
        retained: rk.clone(),
        energies,
        e: split_rows(&get(dir, "e")?, rk)?,
        h: split_rows(&get(dir, "h")?, rk)?,
        t: split_cols(&get(dir, "t")?, rk)?,
        c_psi: split_cols(&get(dir, "c_psi")?, rk)?,
        psi: if m.has_modes {
            Some(split_cols(&get(dir, "psi")?, rk)?)
        } else {
            None
        },
        phi_w: get(dir, "phi_w")?,
        deim,
    };
    Ok((bundle, m.provenance))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModesManifest {
    kind: String,
    grid: FrequencyGrid,
    nx: usize,
    n_blocks: usize,
    mode_counts: Vec<usize>,
    provenance: Provenance,
}

pub fn save_modes(dir: &Path, s: &SpodBasisSet, provenance: &Provenance) -> Result<()> {
    let nx = s.freqs.first().map_or(0, |f| f.modes.nrows());
    write_manifest(
        dir,
        &ModesManifest {
            kind: "spod-modes".into(),
            grid: s.grid,
            nx,
            n_blocks: s.n_blocks,
            mode_counts: s.freqs.iter().map(|f| f.modes.ncols()).collect(),
            provenance: provenance.clone(),
        },
    )?;
    let energies: Vec<f64> = s
        .freqs
        .iter()
        .flat_map(|f| f.energies.iter().copied())
        .collect();
    save(&file(dir, "energies"), &Array::from_reals(&energies))?;
    let modes: Vec<CMat> = s.freqs.iter().map(|f| f.modes.clone()).collect();
    put(dir, "modes", &stack_cols(&modes, nx))?;
    let coeffs: Vec<CMat> = s.freqs.iter().map(|f| f.coeffs.clone()).collect();
    put(dir, "coeffs", &stack_cols(&coeffs, s.n_blocks))?;
    Ok(())
}

pub fn load_modes(dir: &Path) -> Result<(SpodBasisSet, Provenance)> {
    let m: ModesManifest = read_manifest(dir)?;
    if m.kind != "spod-modes" {
        return Err(Error::Format(format!(
            "{} holds '{}', not SPOD modes",
            dir.display(),
            m.kind
        )));
    }
    let energies = load(&file(dir, "energies"))?;
    let energies = energies.reals()?;
    let modes = split_cols(&get(dir, "modes")?, &m.mode_counts)?;
    let coeffs = split_cols(&get(dir, "coeffs")?, &m.mode_counts)?;
    if energies.len() != m.mode_counts.iter().sum::<usize>() {
        return Err(Error::Format(
            "energy count does not match the stored modes".into(),
        ));
    }
    let mut at = 0;
    let freqs = modes
        .into_iter()
        .zip(coeffs)
        .map(|(modes, coeffs)| {
            let c = modes.ncols();
            let e = energies[at..at + c].to_vec();
            at += c;
            SpodFrequency {
                energies: e,
                modes,
                coeffs,
            }
        })
        .collect();
    Ok((
        SpodBasisSet {
            grid: m.grid,
            n_blocks: m.n_blocks,
            freqs,
        },
        m.provenance,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectoryManifest {
    kind: String,
    dt: f64,
    nx: usize,
    nf: usize,
    n_samples: usize,
    provenance: Provenance,
}

pub fn save_trajectory(dir: &Path, t: &Trajectory, provenance: &Provenance) -> Result<()> {
    write_manifest(
        dir,
        &TrajectoryManifest {
            kind: "trajectory".into(),
            dt: t.dt,
            nx: t.states.nrows(),
            nf: t.forcings.nrows(),
            n_samples: t.states.ncols(),
            provenance: provenance.clone(),
        },
    )?;
    put(dir, "states", &t.states)?;
    put(dir, "forcings", &t.forcings)?;
    put(
        dir,
        "q0",
        &CMat::from_column_slice(t.q0.len(), 1, t.q0.as_slice()),
    )?;
    Ok(())
}

pub fn load_trajectory(dir: &Path) -> Result<(Trajectory, Provenance)> {
    let m: TrajectoryManifest = read_manifest(dir)?;
    if m.kind != "trajectory" {
        return Err(Error::Format(format!(
            "{} holds '{}', not a trajectory",
            dir.display(),
            m.kind
        )));
    }
    let states = get(dir, "states")?;
    let forcings = get(dir, "forcings")?;
    let q0 = get(dir, "q0")?;
    if states.shape() != (m.nx, m.n_samples) || forcings.shape() != (m.nf, m.n_samples) {
        return Err(Error::Format(
            "trajectory arrays disagree with the manifest".into(),
        ));
    }
    Ok((
        Trajectory {
            states,
            forcings,
            dt: m.dt,
            q0: CVec::from_column_slice(q0.as_slice()),
        },
        m.provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::lti::{LtiSystem, Weight};
    use crate::modal::{BlockLayout, BlockPlan, Window};
    use crate::rom::{offline, DeimConfig, RomConfig, TrainingData};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn rom_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = rand_cmat(&mut rng, 5, 5);
        for i in 0..5 {
            a[(i, i)] -= C64::new(4.0, 0.0);
        }
        let sys = LtiSystem::dense_identity_io(a).unwrap();
        let w = Weight::identity(5);
        let states = rand_cmat(&mut rng, 5, 80);
        let forcings = rand_cmat(&mut rng, 5, 80);
        let data = TrainingData {
            states: &states,
            forcings: &forcings,
            dt: 0.1,
            plan: BlockPlan::new(80, 16, BlockLayout::Count(8), Window::None).unwrap(),
        };
        let mut cfg = RomConfig::new(2);
        cfg.deim = Some(DeimConfig {
            p_f: 4,
            p_q0: 3,
            p_fs: 3,
        });
        let b = offline(&sys, &w, &data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prov = Provenance::new(vec![3, 4], Some("x = 1".into()));
        save_rom(dir.path(), &b, &prov).unwrap();
        let (back, p) = load_rom(dir.path()).unwrap();
        assert_eq!(back, b);
        assert_eq!(p, prov);
        assert!(load_modes(dir.path()).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = Trajectory {
            states: rand_cmat(&mut rng, 3, 7),
            forcings: rand_cmat(&mut rng, 2, 7),
            dt: 0.25,
            q0: CVec::from_fn(3, |i, _| C64::new(i as f64, 1.0)),
        };
        let dir = tempfile::tempdir().unwrap();
        save_trajectory(dir.path(), &t, &Provenance::default()).unwrap();
        let (back, _) = load_trajectory(dir.path()).unwrap();
        assert_eq!(back.states, t.states);
        assert_eq!(back.forcings, t.forcings);
        assert_eq!(back.q0, t.q0);
    }
}
