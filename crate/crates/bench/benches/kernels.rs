use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spod_rom::benchmarks::experiment::{build_problem, build_rom, generate_dataset, ode_options};
use spod_rom::expm::expm;
use spod_rom::fft::fft_time;
use spod_rom::io::RunConfig;
use spod_rom::ode::integrate;
use spod_rom::rom::online;
use spod_rom::verify::{random_cmat, random_stable_system};
use spod_rom::{CVec, C64};

const GL: &str = r#"
[system]
kind = "ginzburg-landau"
n_x = 64
half_width = 45.0

[forcing]
kind = "white"
xi = 16.0
band_limit = 20
seed = 1

[modes]
n_omega = 128
dt = 0.2
blocks = 16

[rom]
r = 10

[experiment]
training_steps = 640
n_test = 1
"#;

fn dense_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_stable_system(&mut rng, 64).a.to_dense();
    c.bench_function("expm 64x64", |b| {
        b.iter(|| expm(black_box(&a), 0.2).unwrap())
    });
    let x = random_cmat(&mut rng, 64, 1024);
    c.bench_function("fft 64 x 1024", |b| b.iter(|| fft_time(black_box(&x))));
}

fn gl_kernels(c: &mut Criterion) {
    let cfg = RunConfig::parse(GL).unwrap();
    let problem = build_problem(&cfg).unwrap();
    let data = generate_dataset(&problem, &cfg).unwrap();
    let bundle = build_rom(&problem, &cfg, &data.training).unwrap();
    let test = &data.tests[0];
    c.bench_function("online solve GL r=10", |b| {
        b.iter(|| online(&bundle, black_box(&test.q0), &test.forcing).unwrap())
    });
    let q0 = CVec::from_element(problem.sys.nx(), C64::new(0.1, 0.0));
    let opts = ode_options(&cfg);
    let mut g = c.benchmark_group("fom");
    g.sample_size(10);
    g.bench_function("integrate GL 128 steps", |b| {
        b.iter(|| {
            integrate(
                &problem.sys,
                black_box(&q0),
                &test.forcing,
                cfg.modes.dt,
                128,
                opts,
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, dense_kernels, gl_kernels);
criterion_main!(benches);
