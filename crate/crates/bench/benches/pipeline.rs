use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use irskey::allocation::{optimal_q_bisection, run_algorithm_1, RateMode};
use irskey::harness::{eve_positions, trial_channels, ExperimentConfig};
use irskey::irs::{mrt_phases, random_phase_config, PhaseResolution};
use irskey::keygen::{kgr_closed_form, kgr_sample_average, ObservationRecord, Observer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn channels(cfg: &ExperimentConfig) -> irskey::ChannelSet {
    trial_channels(cfg, 0, eve_positions(cfg, 0).unwrap()).unwrap()
}

fn closed_forms(c: &mut Criterion) {
    c.bench_function("kgr_closed_form", |b| {
        b.iter(|| kgr_closed_form(black_box(0.9), black_box(0.3), 1e-3))
    });
    c.bench_function("optimal_q_bisection", |b| {
        b.iter(|| optimal_q_bisection(black_box(1800.0), black_box(7000.0), 1000, 100))
    });
}

fn mrt(c: &mut Criterion) {
    let mut group = c.benchmark_group("mrt_phases");
    for n in [50, 200] {
        let cfg = ExperimentConfig {
            n,
            ..Default::default()
        };
        let cs = channels(&cfg);
        let cascade = cs.cascade();
        group.bench_with_input(BenchmarkId::new("3-bit", n), &n, |b, _| {
            b.iter(|| mrt_phases(cs.h_ab, &cascade, PhaseResolution::Bits(3)))
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let cs = channels(&cfg);
    let observer = Observer::new(&cs, cfg.noise_var()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut record = ObservationRecord::empty(cs.eves.len(), cfg.noise_var(), cfg.delta_t);
    for _ in 0..400 {
        record.push(
            observer
                .observe(&random_phase_config(cfg.n, cfg.b, &mut rng).unwrap(), &mut rng)
                .unwrap(),
        );
    }
    c.bench_function("observe_round", |b| {
        b.iter(|| {
            let config = random_phase_config(cfg.n, cfg.b, &mut rng).unwrap();
            observer.observe(&config, &mut rng).unwrap()
        })
    });
    c.bench_function("kgr_sample_average_400_rounds", |b| {
        b.iter(|| kgr_sample_average(&record, true))
    });
}

fn allocation(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let cs = channels(&cfg);
    let mut group = c.benchmark_group("algorithm_1");
    group.sample_size(10);
    for mode in [RateMode::Fast, RateMode::Faithful] {
        let params = cfg.allocation_params(mode);
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| run_algorithm_1(&cs, &params, &mut ChaCha8Rng::seed_from_u64(2)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, closed_forms, mrt, training, allocation);
criterion_main!(benches);
