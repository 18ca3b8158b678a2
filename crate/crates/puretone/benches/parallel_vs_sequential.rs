//! Parallel against sequential execution on the data-parallel kernels:
//! the resonance scan (independent profiles), the Prüfer-integrated
//! linearized boundary operator over a smooth profile (independent modes)
//! and tile assembly (independent grid rows).

use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use puretone::bifurcate::{build_decomposition, solve_pure_tone, BifurcationSettings};
use puretone::evolve::{linearized_boundary_operator, BoundaryOperatorSpec, EvolveSettings, Medium};
use puretone::exec::Execution;
use puretone::lindiv::{resonance_scan, Flavor, ProfileSampler, ScanSettings};
use puretone::profiles::{EntropyProfile, Interpolation, PiecewiseConstantProfile, SampledProfile};
use puretone::sturm::SturmSettings;
use puretone::thermo::{GammaLawGas, Gas};
use puretone::tile::assemble;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn scan(c: &mut Criterion) {
    let sampler = ProfileSampler::uniform_single_jump();
    let settings = ScanSettings {
        n_samples: 2_000,
        ..ScanSettings::default()
    };
    let mut group = c.benchmark_group("resonance_scan");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| resonance_scan(&sampler, &settings, exec).unwrap())
        });
    }
    group.finish();
}

fn boundary_operator(c: &mut Criterion) {
    let gas = Gas::GammaLaw(GammaLawGas::new(1.4, 1.0).unwrap());
    let smooth = SampledProfile::from_fn(1.0, 64, Interpolation::Linear, |x| 0.6 * (3.0 * x).sin()).unwrap();
    let medium = Medium::physical(&EntropyProfile::Sampled(smooth), gas, 1.0).unwrap();
    let spec = BoundaryOperatorSpec::new(Flavor::Acoustic, medium, 3.0).unwrap();
    let sturm = SturmSettings::default();
    let mut group = c.benchmark_group("linearized_boundary_operator");
    group.sample_size(20);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| linearized_boundary_operator(&spec, 32, &sturm, exec).unwrap())
        });
    }
    group.finish();
}

fn tile_assembly(c: &mut Criterion) {
    let cot = 1.0f64.cos() / 1.0f64.sin();
    let medium = Medium::nondim(PiecewiseConstantProfile::new(vec![1.0, 1.0], vec![cot * cot]).unwrap(), 6.0).unwrap();
    let dec = build_decomposition(medium.clone(), 1, Flavor::PeriodicTile, &BifurcationSettings::default(), Execution::Sequential)
        .unwrap();
    let sol = solve_pure_tone(&dec, 1e-3).unwrap();
    assert!((sol.period - 2.0 * PI).abs() < 1e-9);
    let evolve = EvolveSettings::default();
    let mut group = c.benchmark_group("tile_assembly");
    group.sample_size(20);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| assemble(&sol, &medium, Flavor::PeriodicTile, 128, 256, &evolve, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scan, boundary_operator, tile_assembly);
criterion_main!(benches);
