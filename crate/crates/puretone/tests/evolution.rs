use std::f64::consts::PI;

use puretone::evolve::{
    evolve, linear_evolution, linearized_boundary_operator, second_derivative_check, BoundaryOperatorSpec, EvolutionState,
    EvolveSettings, Frame, Medium, Method,
};
use puretone::exec::Execution;
use puretone::lindiv::Flavor;
use puretone::profiles::{EntropyProfile, PiecewiseConstantProfile};
use puretone::sturm::SturmSettings;
use puretone::thermo::{GammaLawGas, Gas};
use puretone::timeseries::FourierTimeSeries;

fn three_jump() -> PiecewiseConstantProfile {
    PiecewiseConstantProfile::new(vec![0.3, 0.2, 0.35, 0.15], vec![0.8, 1.3, 0.7]).unwrap()
}

fn data(period: f64, n: usize, eps: f64) -> FourierTimeSeries {
    let mut y = FourierTimeSeries::cosine(period, n, 1, eps);
    y.set_sin(2, 0.4 * eps);
    y.set_cos(3, -0.2 * eps);
    y
}

fn gap(a: &FourierTimeSeries, b: &FourierTimeSeries) -> f64 {
    a.add(&b.scale(-1.0)).unwrap().max_coeff()
}

#[test]
fn spectral_march_agrees_with_characteristics() {
    let medium = Medium::nondim(three_jump(), 6.0).unwrap();
    let settings = EvolveSettings {
        modes: 32,
        characteristic_rows: 512,
        ..EvolveSettings::default()
    };
    let start = EvolutionState::new(data(2.0 * PI, 32, 1e-2), 0.0, Frame::NondimScaled);
    let spectral = evolve(&start, &medium, medium.length(), Method::SpectralMarch, &settings).unwrap();
    let characteristics = evolve(&start, &medium, medium.length(), Method::Characteristics, &settings).unwrap();
    let g = gap(&spectral.y, &characteristics.y);
    assert!(g < 1e-6, "gap {g:e}");
}

#[test]
fn second_difference_scales_with_nu_and_width() {
    let settings = EvolveSettings::default();
    let exec = Execution::Sequential;
    let base = second_derivative_check(0.5, 1.5, 2.0 * PI, 1, 1e-3, &settings, exec).unwrap();
    let double_nu = second_derivative_check(0.5, 3.0, 2.0 * PI, 1, 1e-3, &settings, exec).unwrap();
    let double_width = second_derivative_check(1.0, 1.5, 2.0 * PI, 1, 1e-3, &settings, exec).unwrap();
    for c in [&base, &double_nu, &double_width] {
        assert!(c.rel_err < 1e-3, "rel err {:e}", c.rel_err);
    }
    let nu_ratio = double_nu.measured_coefficient / base.measured_coefficient;
    let width_ratio = double_width.measured_coefficient / base.measured_coefficient;
    assert!((nu_ratio - 2.0).abs() < 2e-2, "{nu_ratio}");
    assert!((width_ratio - 2.0).abs() < 2e-2, "{width_ratio}");
}

#[test]
fn physical_march_of_small_data_follows_the_linear_evolution() {
    let gas = Gas::GammaLaw(GammaLawGas::new(1.4, 1.0).unwrap());
    let medium = Medium::physical(&EntropyProfile::Piecewise(three_jump()), gas, 1.0).unwrap();
    let direction = data(3.0, 16, 1.0);
    let linear = linear_evolution(&medium, &direction, &SturmSettings::tight()).unwrap();
    let rest = FourierTimeSeries::constant(3.0, 16, medium.rest_value());
    let settings = EvolveSettings::default();
    let run = |y: FourierTimeSeries| {
        let start = EvolutionState::new(y, 0.0, Frame::PhysicalGeneral);
        evolve(&start, &medium, medium.length(), Method::SpectralMarch, &settings).unwrap().y
    };
    let base = run(rest.clone());
    assert!(gap(&base, &rest) < 1e-13);
    let eps = 1e-6;
    let quotient = run(rest.add(&direction.scale(eps)).unwrap()).add(&base.scale(-1.0)).unwrap().scale(1.0 / eps);
    let err = gap(&quotient, &linear) / linear.max_coeff();
    assert!(err < 1e-5, "relative gap {err:e}");
}

#[test]
fn marches_are_deterministic_across_policies() {
    let medium = Medium::nondim(three_jump(), 6.0).unwrap();
    let spec = BoundaryOperatorSpec::new(Flavor::PeriodicTile, medium, 2.0 * PI).unwrap();
    let seq = linearized_boundary_operator(&spec, 16, &SturmSettings::default(), Execution::Sequential).unwrap();
    let par = linearized_boundary_operator(&spec, 16, &SturmSettings::default(), Execution::Parallel).unwrap();
    let y = data(2.0 * PI, 16, 1.0);
    assert_eq!(seq.apply(&y), par.apply(&y));

    let start = EvolutionState::new(data(2.0 * PI, 16, 1e-2), 0.0, Frame::NondimScaled);
    let medium = spec.medium.clone();
    let a = evolve(&start, &medium, medium.length(), Method::SpectralMarch, &EvolveSettings::default()).unwrap();
    let b = evolve(&start, &medium, medium.length(), Method::SpectralMarch, &EvolveSettings::default()).unwrap();
    assert_eq!(a.y, b.y);
}
