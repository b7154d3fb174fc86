//! End-to-end comparison runs: data generation, offline builds, reduced
//! solves over a test set, and the report tables.

use std::time::Instant;

use log::info;
use rayon::prelude::*;

use super::{build_gl, build_scalar_transport};
use crate::baselines::{
    balanced_truncation, pod_projection_error, spod_projection_error, ErrorAccumulator,
    PodGalerkinRom,
};
use crate::error::{Error, Result};
use crate::fft::fft_time;
use crate::forcing::{ForcingGenerator, ForcingSignal, ForcingSpec, Interpolation, TemporalKind};
use crate::freq::{corrected_spectrum, in_sync_ic, to_time, uncorrected_spectrum, DENSE_CAP};
use crate::io::config::{RunConfig, SystemConfig};
use crate::io::csv::{Cell, Table};
use crate::linalg::{CMat, CVec, RMat, C64};
use crate::lti::{resolvent_solve, FrequencyGrid, LtiSystem, Weight};
use crate::modal::{dof_for_accuracy, pod_truncated, BlockPlan, DofBasis};
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::rom::{offline, online, online_deim, RomBundle, TrainingData};

/// Interpolation order used for long forcing records.
const LONG_RECORD_ORDER: usize = 8;

/// A benchmark system with its forcing statistics.
#[derive(Clone, Debug)]
pub struct Problem {
    pub sys: LtiSystem,
    pub w: Weight,
    pub forcing: ForcingSpec,
    /// Coordinates of the forced degrees of freedom (`N_f × d`).
    pub forcing_points: RMat,
}

impl Problem {
    /// Weight for output errors: the state weight when the output is the
    /// full state, unit otherwise.
    pub fn output_weight(&self) -> Weight {
        if self.sys.ny() == self.sys.nx() {
            self.w.clone()
        } else {
            Weight::identity(self.sys.ny())
        }
    }
}

/// Forcing statistics for every record of a run: a white-noise band given
/// as a harmonic index refers to the `N_ω` grid, whatever the record length.
pub fn forcing_for_run(spec: &ForcingSpec, n_omega: usize, dt: f64) -> ForcingSpec {
    let mut s = spec.clone();
    if let (TemporalKind::White, Some(b), None) = (s.kind, s.band_limit, s.max_omega) {
        s.max_omega =
            Some(FrequencyGrid::new(n_omega, dt).map_or(0.0, |g| g.omega(b.min(n_omega / 2))));
    }
    s
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let mut p = build_system(cfg)?;
    p.forcing = forcing_for_run(&p.forcing, cfg.modes.n_omega, cfg.modes.dt);
    Ok(p)
}

fn build_system(cfg: &RunConfig) -> Result<Problem> {
    match &cfg.system {
        SystemConfig::GinzburgLandau(spec) => {
            let gl = build_gl(spec)?;
            let forcing = cfg
                .forcing
                .clone()
                .ok_or_else(|| Error::Config("missing [forcing] section".into()))?;
            let forcing_points = gl.points();
            Ok(Problem {
                sys: gl.sys,
                w: gl.w,
                forcing,
                forcing_points,
            })
        }
        SystemConfig::ScalarTransport(spec) => {
            let st = build_scalar_transport(spec)?;
            let forcing = cfg
                .forcing
                .clone()
                .unwrap_or_else(|| spec.forcing(cfg.experiment.seed));
            let forcing_points = st.forced_points();
            Ok(Problem {
                sys: st.sys,
                w: st.w,
                forcing,
                forcing_points,
            })
        }
    }
}

/// One held-out trajectory: initial state, forcing window and FOM states.
#[derive(Clone, Debug)]
pub struct TestCase {
    pub q0: CVec,
    pub forcing: ForcingSignal,
    pub states: CMat,
    pub fom_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub training: Trajectory,
    pub tests: Vec<TestCase>,
}

impl Dataset {
    pub fn fom_seconds(&self) -> f64 {
        self.tests.iter().map(|t| t.fom_seconds).sum()
    }
}

pub fn ode_options(cfg: &RunConfig) -> OdeOptions {
    OdeOptions {
        rtol: cfg.experiment.rtol,
        atol: cfg.experiment.atol,
        ..OdeOptions::default()
    }
}

/// Realization indices: 0 trains, `1 + 2i` spins up test `i`, `2 + 2i`
/// forces test `i`.
pub fn generate_training(problem: &Problem, cfg: &RunConfig) -> Result<Trajectory> {
    let dt = cfg.modes.dt;
    let spin = cfg.spinup();
    let total = spin + cfg.experiment.training_steps;
    let generator = ForcingGenerator::new(&problem.forcing, &problem.forcing_points, total, dt)?;
    let f = generator
        .realization(0)
        .with_interpolation(Interpolation::Lagrange(LONG_RECORD_ORDER));
    let q0 = CVec::zeros(problem.sys.nx());
    info!("training run: {total} samples");
    let traj = integrate(&problem.sys, &q0, &f, dt, total, ode_options(cfg))
        .map_err(|e| e.at_stage("training run"))?;
    let keep = cfg.experiment.training_steps;
    Ok(Trajectory {
        q0: traj.states.column(spin).clone_owned(),
        states: traj.states.columns(spin, keep).clone_owned(),
        forcings: traj.forcings.columns(spin, keep).clone_owned(),
        dt,
    })
}

pub fn generate_tests(problem: &Problem, cfg: &RunConfig) -> Result<Vec<TestCase>> {
    let dt = cfg.modes.dt;
    let n = cfg.modes.n_omega;
    let spin = cfg.spinup();
    let opts = ode_options(cfg);
    let spin_gen = if spin > 0 {
        Some(ForcingGenerator::new(
            &problem.forcing,
            &problem.forcing_points,
            spin + 1,
            dt,
        )?)
    } else {
        None
    };
    let window_gen = ForcingGenerator::new(&problem.forcing, &problem.forcing_points, n, dt)?;
    (0..cfg.experiment.n_test)
        .into_par_iter()
        .map(|i| {
            let i = i as u64;
            let q0 = match &spin_gen {
                Some(g) => {
                    let f = g
                        .realization(1 + 2 * i)
                        .with_interpolation(Interpolation::Lagrange(LONG_RECORD_ORDER));
                    let t = integrate(
                        &problem.sys,
                        &CVec::zeros(problem.sys.nx()),
                        &f,
                        dt,
                        spin + 1,
                        opts,
                    )?;
                    t.states.column(spin).clone_owned()
                }
                None => CVec::zeros(problem.sys.nx()),
            };
            let forcing = window_gen.realization(2 + 2 * i);
            let t0 = Instant::now();
            let traj = integrate(&problem.sys, &q0, &forcing, dt, n, opts)?;
            let fom_seconds = t0.elapsed().as_secs_f64();
            Ok(TestCase {
                q0,
                forcing,
                states: traj.states,
                fom_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("test runs"))
}

pub fn generate_dataset(problem: &Problem, cfg: &RunConfig) -> Result<Dataset> {
    Ok(Dataset {
        training: generate_training(problem, cfg)?,
        tests: generate_tests(problem, cfg)?,
    })
}

pub fn build_rom(problem: &Problem, cfg: &RunConfig, training: &Trajectory) -> Result<RomBundle> {
    let plan = BlockPlan::new(
        training.states.ncols(),
        cfg.modes.n_omega,
        cfg.modes.layout(),
        cfg.modes.window,
    )?;
    let data = TrainingData {
        states: &training.states,
        forcings: &training.forcings,
        dt: training.dt,
        plan,
    };
    offline(&problem.sys, &problem.w, &data, &cfg.rom).map_err(|e| e.at_stage("offline build"))
}

/// Errors and timings of one method at one rank.
#[derive(Clone, Debug)]
pub struct MethodResult {
    pub method: String,
    pub r: usize,
    pub errors: ErrorAccumulator,
    /// Online seconds over the test set; `None` for projection bounds.
    pub seconds: Option<f64>,
}

impl MethodResult {
    pub fn mean_error(&self) -> f64 {
        self.errors.mean()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub results: Vec<MethodResult>,
    pub fom_seconds: f64,
    pub grid: FrequencyGrid,
    /// Retained counts of the model at the configured rank.
    pub retained: Vec<usize>,
    /// SPOD-PG coefficients at the configured rank, one column per test
    /// (frequencies concatenated).
    pub coefficients: CMat,
    pub headline_r: usize,
}

impl ExperimentReport {
    pub fn find(&self, method: &str, r: usize) -> Option<&MethodResult> {
        self.results.iter().find(|m| m.method == method && m.r == r)
    }

    pub fn mean_error(&self, method: &str, r: usize) -> Option<f64> {
        self.find(method, r).map(|m| m.mean_error())
    }

    /// `(r, method, mean_error, cpu_fraction)`.
    pub fn mode_table(&self) -> Table {
        let mut t = Table::new(&["r", "method", "mean_error", "cpu_fraction"]);
        for m in &self.results {
            let frac = m.seconds.map_or(f64::NAN, |s| s / self.fom_seconds);
            t.push(vec![
                m.r.into(),
                m.method.as_str().into(),
                m.mean_error().into(),
                frac.into(),
            ])
            .expect("four columns");
        }
        t
    }

    /// `(t, error_<method>...)` at the configured rank, solution methods only.
    pub fn time_table(&self) -> Table {
        let methods: Vec<&MethodResult> = self
            .results
            .iter()
            .filter(|m| m.r == self.headline_r && m.seconds.is_some())
            .collect();
        let mut cols = vec!["t".to_string()];
        cols.extend(
            methods
                .iter()
                .map(|m| format!("error_{}", m.method.replace('-', "_"))),
        );
        let mut t = Table::new(&cols);
        let curves: Vec<Vec<f64>> = methods.iter().map(|m| m.errors.curve()).collect();
        let n = curves.first().map_or(0, |c| c.len());
        for j in 0..n {
            let mut row: Vec<Cell> = vec![(j as f64 * self.grid.dt()).into()];
            row.extend(curves.iter().map(|c| Cell::Float(c[j])));
            t.push(row).expect("matching columns");
        }
        t
    }

    /// `(k, harmonic, omega, r_k)`.
    pub fn retention_table(&self) -> Table {
        let mut t = Table::new(&["k", "harmonic", "omega", "r_k"]);
        for (k, &r) in self.retained.iter().enumerate() {
            t.push(vec![
                k.into(),
                self.grid.harmonic(k).into(),
                self.grid.omega(k).into(),
                r.into(),
            ])
            .expect("four columns");
        }
        t
    }
}

fn pack_coeffs(coeffs: &[CVec]) -> CVec {
    let n: usize = coeffs.iter().map(|c| c.len()).sum();
    CVec::from_iterator(n, coeffs.iter().flat_map(|c| c.iter().copied()))
}

fn spod_method(
    bundle: &RomBundle,
    data: &Dataset,
    wy: &Weight,
    sys: &LtiSystem,
    deim: bool,
) -> Result<(MethodResult, Vec<CVec>)> {
    let mut acc = ErrorAccumulator::new();
    let mut seconds = 0.0;
    let mut packed = Vec::with_capacity(data.tests.len());
    for t in &data.tests {
        let rep = if deim {
            online_deim(bundle, &t.q0, &t.forcing)?
        } else {
            online(bundle, &t.q0, &t.forcing)?
        };
        seconds += rep.timings.total().as_secs_f64();
        acc.add(wy, &rep.y, &sys.c.apply_mat(&t.states))?;
        packed.push(pack_coeffs(&rep.coeffs));
    }
    Ok((
        MethodResult {
            method: if deim { "spod-pg-deim" } else { "spod-pg" }.into(),
            r: bundle.r,
            errors: acc,
            seconds: Some(seconds),
        },
        packed,
    ))
}

/// Run every method at every rank of the sweep on an existing dataset.
pub fn evaluate(
    problem: &Problem,
    cfg: &RunConfig,
    data: &Dataset,
    bundle: &RomBundle,
) -> Result<ExperimentReport> {
    let sys = &problem.sys;
    let wy = problem.output_weight();
    let sweep = cfg.sweep();
    let r_max = *sweep.last().unwrap_or(&cfg.rom.r);
    let opts = ode_options(cfg);
    let dt = cfg.modes.dt;
    let n = cfg.modes.n_omega;
    let states: Vec<CMat> = data.tests.iter().map(|t| t.states.clone()).collect();

    let stride = cfg.rom.pod_stride.max(1);
    let cols: Vec<usize> = (0..data.training.states.ncols()).step_by(stride).collect();
    let snaps = CMat::from_fn(sys.nx(), cols.len(), |i, j| {
        data.training.states[(i, cols[j])]
    });
    let pod = pod_truncated(&snaps, &problem.w, r_max).map_err(|e| e.at_stage("POD"))?;
    let with_bt = cfg.experiment.balanced_truncation && sys.nx() <= DENSE_CAP;
    let cov = if with_bt {
        Some(problem.forcing.spatial_covariance(&problem.forcing_points))
    } else {
        None
    };

    let mut results = Vec::new();
    let mut coefficients = CMat::zeros(0, 0);
    for &r in &sweep {
        info!("evaluating r = {r}");
        let b = bundle.truncate(r)?;
        let (res, packed) =
            spod_method(&b, data, &wy, sys, false).map_err(|e| e.at_stage("SPOD-PG solve"))?;
        results.push(res);
        if r == cfg.rom.r {
            let rows = packed.first().map_or(0, |c| c.len());
            coefficients = CMat::from_fn(rows, packed.len(), |i, j| packed[j][i]);
        }
        if b.deim.is_some() {
            let (res, _) = spod_method(&b, data, &wy, sys, true)
                .map_err(|e| e.at_stage("SPOD-PG DEIM solve"))?;
            results.push(res);
        }

        let basis = pod.modes.columns(0, r.min(pod.modes.ncols())).clone_owned();
        let pg = PodGalerkinRom::new(sys, &problem.w, basis.clone())?;
        let mut acc = ErrorAccumulator::new();
        let mut secs = 0.0;
        for t in &data.tests {
            let t0 = Instant::now();
            let sol = pg
                .solve(&t.q0, &t.forcing, dt, n, opts)
                .map_err(|e| e.at_stage("POD-Galerkin solve"))?;
            secs += t0.elapsed().as_secs_f64();
            acc.add(&wy, &sol.y, &sys.c.apply_mat(&t.states))?;
        }
        results.push(MethodResult {
            method: "pod-g".into(),
            r,
            errors: acc,
            seconds: Some(secs),
        });

        if let Some(cov) = &cov {
            let bt = balanced_truncation(sys, Some(cov), Some(&wy), r)?;
            let mut acc = ErrorAccumulator::new();
            let mut secs = 0.0;
            for t in &data.tests {
                let t0 = Instant::now();
                let sol = bt
                    .solve(&t.q0, &t.forcing, dt, n, opts)
                    .map_err(|e| e.at_stage("balanced truncation solve"))?;
                secs += t0.elapsed().as_secs_f64();
                acc.add(&wy, &sol.y, &sys.c.apply_mat(&t.states))?;
            }
            results.push(MethodResult {
                method: "bt".into(),
                r,
                errors: acc,
                seconds: Some(secs),
            });
        }

        let pod_err = pod_projection_error(&basis, &problem.w, &states)?;
        results.push(projection_result("pod-projection", r, pod_err, n));
        if let Some(psi) = &b.psi {
            let spod_err = spod_projection_error(psi, &problem.w, &states)?;
            results.push(projection_result("spod-projection", r, spod_err, n));
        }
    }
    Ok(ExperimentReport {
        results,
        fom_seconds: data.fom_seconds(),
        grid: bundle.grid,
        retained: bundle.truncate(cfg.rom.r)?.retained,
        coefficients,
        headline_r: cfg.rom.r,
    })
}

/// Projection bounds are time averages already; store them as a flat curve.
fn projection_result(method: &str, r: usize, err: f64, n: usize) -> MethodResult {
    let mut acc = ErrorAccumulator::new();
    let reference = CMat::from_element(1, n, C64::new(1.0, 0.0));
    let approx = CMat::from_element(1, n, C64::new(1.0 - err.sqrt(), 0.0));
    acc.add(&Weight::identity(1), &approx, &reference)
        .expect("matching shapes");
    MethodResult {
        method: method.into(),
        r,
        errors: acc,
        seconds: None,
    }
}

/// Everything: data, offline build and evaluation.
pub fn run_experiment(cfg: &RunConfig) -> Result<(ExperimentReport, RomBundle, Dataset)> {
    let problem = build_problem(cfg)?;
    let data = generate_dataset(&problem, cfg)?;
    let bundle = build_rom(&problem, cfg, &data.training)?;
    let report = evaluate(&problem, cfg, &data, &bundle)?;
    Ok((report, bundle, data))
}

/// Corrected versus uncorrected frequency-domain solutions against the
/// FOM, for one forcing realization of `N_ω` samples.
#[derive(Clone, Debug)]
pub struct CorrectionStudy {
    pub grid: FrequencyGrid,
    /// Relative error of the corrected solution with the in-sync start.
    pub in_sync_error: f64,
    /// Pointwise relative W-norm error of the uncorrected solution from a
    /// generic start, normalized by the mean state norm.
    pub uncorrected_curve: Vec<f64>,
    /// Same for the corrected solution from the generic start.
    pub corrected_curve: Vec<f64>,
}

impl CorrectionStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["t", "error_corrected", "error_uncorrected"]);
        for (j, (c, u)) in self
            .corrected_curve
            .iter()
            .zip(&self.uncorrected_curve)
            .enumerate()
        {
            t.push(vec![
                (j as f64 * self.grid.dt()).into(),
                (*c).into(),
                (*u).into(),
            ])
            .expect("three columns");
        }
        t
    }
}

pub fn correction_study(
    problem: &Problem,
    n_omega: usize,
    dt: f64,
    q0: &CVec,
    opts: OdeOptions,
) -> Result<CorrectionStudy> {
    let sys = &problem.sys;
    let grid = FrequencyGrid::new(n_omega, dt)?;
    let generator = ForcingGenerator::new(&problem.forcing, &problem.forcing_points, n_omega, dt)?;
    let forcing = generator.realization(0);
    let fhat = fft_time(forcing.samples());

    let sync = in_sync_ic(sys, &fhat, &grid)?;
    let fom = integrate(sys, &sync, &forcing, dt, n_omega, opts)?;
    let freq = to_time(&corrected_spectrum(sys, &sync, &fhat, &grid)?);
    let in_sync_error = (&freq - &fom.states).norm() / fom.states.norm();

    let fom = integrate(sys, q0, &forcing, dt, n_omega, opts)?;
    let naive = to_time(&uncorrected_spectrum(sys, &fhat, &grid)?);
    let corrected = to_time(&corrected_spectrum(sys, q0, &fhat, &grid)?);
    let norms = problem.w.column_norms_sq(&fom.states);
    let scale = norms.iter().sum::<f64>() / norms.len() as f64;
    let curve = |approx: &CMat| -> Vec<f64> {
        problem
            .w
            .column_norms_sq(&(approx - &fom.states))
            .iter()
            .map(|e| (e / scale).sqrt())
            .collect()
    };
    Ok(CorrectionStudy {
        grid,
        in_sync_error,
        uncorrected_curve: curve(&naive),
        corrected_curve: curve(&corrected),
    })
}

/// Degrees of freedom for a target captured-energy fraction as a function
/// of the trajectory length, `(T, pod, spod, space_time)`.
///
/// Trajectories are the first `T` of the periodic forced response over a
/// period four times the longest window. That response is an exact solution
/// and a stationary sample, so no spin-up or time stepping is needed.
pub fn dof_study(
    problem: &Problem,
    lengths: &[usize],
    n_trajectories: usize,
    dt: f64,
    target: f64,
) -> Result<Table> {
    let longest = *lengths
        .iter()
        .max()
        .ok_or_else(|| Error::Invalid("no trajectory lengths".into()))?;
    let sys = &problem.sys;
    let period = 4 * longest;
    let grid = FrequencyGrid::new(period, dt)?;
    let generator = ForcingGenerator::new(&problem.forcing, &problem.forcing_points, period, dt)?;
    let b = sys.b.apply_mat(&CMat::identity(sys.nf(), sys.nf()));
    let transfer: Vec<CMat> = (0..period)
        .into_par_iter()
        .map(|k| resolvent_solve(sys, k, &grid, &b))
        .collect::<Result<_>>()?;
    let runs: Vec<CMat> = (0..n_trajectories)
        .into_par_iter()
        .map(|i| {
            let fhat = fft_time(generator.realization(i as u64).samples());
            let mut qhat = CMat::zeros(sys.nx(), period);
            for (k, t) in transfer.iter().enumerate() {
                qhat.set_column(k, &(t * fhat.column(k)));
            }
            to_time(&qhat).columns(0, longest).clone_owned()
        })
        .collect();
    let mut table = Table::new(&["T", "pod", "spod", "space_time"]);
    for &len in lengths {
        let cut: Vec<CMat>;
        let ens: &[CMat] = if len == longest {
            &runs
        } else {
            cut = runs
                .iter()
                .map(|r| r.columns(0, len).clone_owned())
                .collect();
            &cut
        };
        let pod = dof_for_accuracy(DofBasis::Pod, ens, &problem.w, dt, target)?;
        let spod = dof_for_accuracy(DofBasis::Spod, ens, &problem.w, dt, target)?;
        let st = dof_for_accuracy(DofBasis::SpaceTime, ens, &problem.w, dt, target)?;
        table.push(vec![
            (len as f64 * dt).into(),
            pod.into(),
            spod.into(),
            st.into(),
        ])?;
    }
    Ok(table)
}
