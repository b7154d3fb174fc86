use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use spod_rom::benchmarks::experiment::{
    build_problem, build_rom, correction_study, dof_study, evaluate, generate_dataset,
    generate_training, ode_options, Dataset, TestCase,
};
use spod_rom::forcing::ForcingSignal;
use spod_rom::io::{
    load_rom, load_trajectory, save, save_modes, save_report_manifest, save_rom, save_trajectory,
    Array, Provenance, RunConfig, Table,
};
use spod_rom::modal::{spod, BlockPlan, WelchSource};
use spod_rom::ode::Trajectory;
use spod_rom::rom::{online, online_deim};
use spod_rom::verify::{identity_suite, VerifyOptions};
use spod_rom::{CMat, CVec, Result};

#[derive(Parser)]
#[command(
    name = "spod-rom",
    version,
    about = "SPOD Petrov-Galerkin reduced-order models for forced LTI systems"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the training record and the test trajectories.
    GenerateData(DataArgs),
    /// SPOD modes of a training record.
    ComputeModes(ModesArgs),
    /// Offline stage: build the reduced operators.
    BuildRom(BuildArgs),
    /// Online stage on one forcing and initial state.
    Solve(SolveArgs),
    /// Full comparison run writing the report tables.
    Benchmark(BenchArgs),
    /// Check the frequency-domain identities on random stable systems.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Skip the test trajectories.
    #[arg(long)]
    training_only: bool,
}

#[derive(Args)]
struct ModesArgs {
    #[arg(long)]
    config: PathBuf,
    /// Training trajectory directory written by generate-data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Modes kept per frequency (all by default).
    #[arg(long)]
    max_modes: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the mean rank.
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// Operator directory written by build-rom.
    #[arg(long)]
    rom: PathBuf,
    /// Trajectory directory supplying q0 and forcing samples; zero input
    /// when absent. Its states, if present, are used to report the error.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Truncate to a smaller mean rank.
    #[arg(long)]
    r: Option<usize>,
    /// Use the sampled online evaluation.
    #[arg(long)]
    deim: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run at this single mean rank.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Also write the correction and degrees-of-freedom studies.
    #[arg(long)]
    studies: bool,
    /// Ensemble size for the degrees-of-freedom study.
    #[arg(long, default_value_t = 500)]
    dof_trajectories: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 20)]
    systems: usize,
    #[arg(long, default_value_t = 32)]
    max_nx: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match cli.command {
        Command::GenerateData(a) => generate_data(a),
        Command::ComputeModes(a) => compute_modes(a),
        Command::BuildRom(a) => build(a),
        Command::Solve(a) => solve(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Verify(a) => verify(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, Provenance)> {
    let cfg = RunConfig::load(path)?;
    let seeds = cfg
        .forcing
        .iter()
        .map(|f| f.seed)
        .chain([cfg.experiment.seed])
        .collect();
    let prov = Provenance::new(seeds, Some(cfg.to_text()?));
    Ok((cfg, prov))
}

fn create_dir(dir: &Path) -> Result<()> {
    Ok(fs::create_dir_all(dir)?)
}

fn test_dir(out: &Path, i: usize) -> PathBuf {
    out.join(format!("test_{i:03}"))
}

fn test_trajectory(t: &TestCase) -> Trajectory {
    Trajectory {
        states: t.states.clone(),
        forcings: t.forcing.samples().clone(),
        dt: t.forcing.dt(),
        q0: t.q0.clone(),
    }
}

fn generate_data(a: DataArgs) -> Result<ExitCode> {
    let (cfg, prov) = load_config(&a.config)?;
    let problem = build_problem(&cfg)?;
    create_dir(&a.out)?;
    let data = if a.training_only {
        Dataset {
            training: generate_training(&problem, &cfg)?,
            tests: Vec::new(),
        }
    } else {
        generate_dataset(&problem, &cfg)?
    };
    save_trajectory(&a.out.join("training"), &data.training, &prov)?;
    for (i, t) in data.tests.iter().enumerate() {
        save_trajectory(&test_dir(&a.out, i), &test_trajectory(t), &prov)?;
    }
    println!(
        "wrote training record and {} test trajectories to {}",
        data.tests.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn training_dir(data: &Path) -> PathBuf {
    let nested = data.join("training");
    if nested.is_dir() {
        nested
    } else {
        data.to_path_buf()
    }
}

fn compute_modes(a: ModesArgs) -> Result<ExitCode> {
    let (cfg, prov) = load_config(&a.config)?;
    let problem = build_problem(&cfg)?;
    let (traj, _) = load_trajectory(&training_dir(&a.data))?;
    let plan = BlockPlan::new(
        traj.states.ncols(),
        cfg.modes.n_omega,
        cfg.modes.layout(),
        cfg.modes.window,
    )?;
    let blocks = plan.n_blocks();
    let source = WelchSource::new(&traj.states, traj.dt, plan)?;
    let set =
        spod(&source, &problem.w, a.max_modes.unwrap_or(blocks)).map_err(|e| e.at_stage("SPOD"))?;
    save_modes(&a.out, &set, &prov)?;
    println!(
        "wrote SPOD modes ({} blocks, {} frequencies) to {}",
        blocks,
        set.grid.n_omega(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn build(a: BuildArgs) -> Result<ExitCode> {
    let (mut cfg, prov) = load_config(&a.config)?;
    if let Some(r) = a.r {
        cfg.rom.r = r;
    }
    let problem = build_problem(&cfg)?;
    let (traj, _) = load_trajectory(&training_dir(&a.data))?;
    let bundle = build_rom(&problem, &cfg, &traj)?;
    save_rom(&a.out, &bundle, &prov)?;
    println!(
        "wrote reduced operators (r = {}, {} modes) to {}",
        bundle.r,
        bundle.total_modes(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let (mut bundle, prov) = load_rom(&a.rom)?;
    if let Some(r) = a.r {
        bundle = bundle.truncate(r)?;
    }
    let n = bundle.grid.n_omega();
    let dt = bundle.grid.dt();
    let (q0, forcing, reference) = match &a.trajectory {
        Some(dir) => {
            let (t, _) = load_trajectory(dir)?;
            let reference = (t.states.ncols() == n).then(|| t.states.clone());
            (
                t.q0,
                ForcingSignal::from_samples(t.forcings, t.dt),
                reference,
            )
        }
        None => (
            CVec::zeros(bundle.nx),
            ForcingSignal::zeros(bundle.nf, n, dt),
            None,
        ),
    };
    let rep = if a.deim {
        online_deim(&bundle, &q0, &forcing)
    } else {
        online(&bundle, &q0, &forcing)
    }
    .map_err(|e| e.at_stage("online solve"))?;
    create_dir(&a.out)?;
    save(&a.out.join("y.sprm"), &Array::from_cmat(&rep.y))?;
    let total: usize = rep.coeffs.iter().map(|c| c.len()).sum();
    let packed = CMat::from_iterator(total, 1, rep.coeffs.iter().flat_map(|c| c.iter().copied()));
    save(&a.out.join("coefficients.sprm"), &Array::from_cmat(&packed))?;
    save_report_manifest(&a.out, "solve-report", &prov)?;

    let mut t = Table::new(&["t", "y_norm", "error"]);
    // the reference holds states; compare only when the output is the state
    let errs: Option<Vec<f64>> = reference.filter(|q| q.nrows() == rep.y.nrows()).map(|q| {
        (0..n)
            .map(|j| (rep.y.column(j) - q.column(j)).norm())
            .collect()
    });
    for j in 0..n {
        let e = errs.as_ref().map_or(f64::NAN, |v| v[j]);
        t.push(vec![
            (j as f64 * dt).into(),
            rep.y.column(j).norm().into(),
            e.into(),
        ])?;
    }
    t.save(&a.out.join("solution.csv"))?;
    let mut tt = Table::new(&["stage", "seconds"]);
    tt.push(vec!["fft".into(), rep.timings.fft.as_secs_f64().into()])?;
    tt.push(vec![
        "coefficients".into(),
        rep.timings.coefficients.as_secs_f64().into(),
    ])?;
    tt.push(vec![
        "inverse_fft".into(),
        rep.timings.inverse_fft.as_secs_f64().into(),
    ])?;
    tt.save(&a.out.join("timings.csv"))?;
    println!(
        "solved r = {} in {:.3e} s; output in {}",
        bundle.r,
        rep.timings.total().as_secs_f64(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn benchmark(a: BenchArgs) -> Result<ExitCode> {
    let (mut cfg, _) = load_config(&a.config)?;
    if let Some(r) = a.r {
        cfg.rom.r = r;
        cfg.experiment.r_values = vec![r];
    }
    if let Some(n) = a.n_test {
        cfg.experiment.n_test = n;
    }
    cfg.validate()?;
    let seeds = cfg
        .forcing
        .iter()
        .map(|f| f.seed)
        .chain([cfg.experiment.seed])
        .collect();
    let prov = Provenance::new(seeds, Some(cfg.to_text()?));
    let problem = build_problem(&cfg)?;
    info!(
        "system: N_x = {}, N_f = {}",
        problem.sys.nx(),
        problem.sys.nf()
    );
    let data = generate_dataset(&problem, &cfg)?;
    let bundle = build_rom(&problem, &cfg, &data.training)?;
    let report = evaluate(&problem, &cfg, &data, &bundle)?;

    create_dir(&a.out)?;
    fs::write(a.out.join("config.toml"), cfg.to_text()?)?;
    save_report_manifest(&a.out, "benchmark-report", &prov)?;
    report.mode_table().save(&a.out.join("modes.csv"))?;
    report.time_table().save(&a.out.join("time.csv"))?;
    report
        .retention_table()
        .save(&a.out.join("retention.csv"))?;
    save(
        &a.out.join("coefficients.sprm"),
        &Array::from_cmat(&report.coefficients),
    )?;
    let mut fom = Table::new(&["n_test", "fom_seconds"]);
    fom.push(vec![data.tests.len().into(), report.fom_seconds.into()])?;
    fom.save(&a.out.join("fom.csv"))?;

    if a.studies {
        let opts = ode_options(&cfg);
        let q0 = data
            .tests
            .first()
            .map_or_else(|| CVec::zeros(problem.sys.nx()), |t| t.q0.clone());
        let study = correction_study(&problem, cfg.modes.n_omega, cfg.modes.dt, &q0, opts)?;
        study.table().save(&a.out.join("correction.csv"))?;
        let n = cfg.modes.n_omega;
        let lengths = [n / 4, n / 2, n];
        dof_study(&problem, &lengths, a.dof_trajectories, cfg.modes.dt, 0.98)?
            .save(&a.out.join("dof.csv"))?;
    }

    println!(
        "{:>4}  {:<16} {:>12} {:>12}",
        "r", "method", "mean_error", "cpu_fraction"
    );
    for m in &report.results {
        let frac = m.seconds.map_or(f64::NAN, |s| s / report.fom_seconds);
        println!(
            "{:>4}  {:<16} {:>12.4e} {:>12.4e}",
            m.r,
            m.method,
            m.mean_error(),
            frac
        );
    }
    println!("tables written to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let rep = identity_suite(&VerifyOptions {
        systems: a.systems,
        max_nx: a.max_nx,
        seed: a.seed,
        ..VerifyOptions::default()
    })?;
    for c in rep.summary() {
        let status = if c.passed() { "pass" } else { "FAIL" };
        println!(
            "{status}  {:<16} worst {:.3e} (tolerance {:.0e})",
            c.name, c.value, c.tol
        );
    }
    Ok(if rep.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
