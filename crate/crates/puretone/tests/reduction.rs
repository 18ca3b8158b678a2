use std::f64::consts::PI;

use nalgebra::Vector2;
use puretone::bifurcate::{
    bifurcation_function, build_decomposition, continuation, solve_pure_tone, solve_pure_tone_warm, AuxMethod,
    BifurcationSettings, LSDecomposition, WarmStart,
};
use puretone::error::Error;
use puretone::evolve::Medium;
use puretone::exec::Execution;
use puretone::lindiv::{readout_row, Flavor};
use puretone::profiles::{sigma_of_x, EntropyProfile, PiecewiseConstantProfile};
use puretone::sturm::{duhamel_bifurcation_coefficient, eigenfrequency, SturmSettings};
use puretone::thermo::{GammaLawGas, Gas};

const NU: f64 = 6.0;

fn diagonal(theta: f64) -> Medium {
    let cot = theta.cos() / theta.sin();
    Medium::nondim(PiecewiseConstantProfile::new(vec![theta, theta], vec![cot * cot]).unwrap(), NU).unwrap()
}

fn decomposition(settings: &BifurcationSettings) -> LSDecomposition {
    build_decomposition(diagonal(1.0), 1, Flavor::PeriodicTile, settings, Execution::Sequential).unwrap()
}

#[test]
fn g_z_finite_difference_matches_the_closed_form() {
    let dec = decomposition(&BifurcationSettings::default());
    let eps = 1e-4;
    let up = bifurcation_function(&dec, 0.0, eps, None).unwrap();
    let dn = bifurcation_function(&dec, 0.0, -eps, None).unwrap();
    let fd = (up.g - dn.g) / (2.0 * eps);
    let predicted = -NU * 2.0 * 1.0f64.cos() / 1.0f64.sin();
    assert!((fd - predicted).abs() < 0.05 * predicted.abs(), "{fd} vs {predicted}");
    assert_eq!(up.f, 0.0);
    assert_eq!(dn.f, 0.0);
}

#[test]
fn quarter_pi_profile_is_resonant() {
    let r = build_decomposition(
        diagonal(PI / 4.0),
        1,
        Flavor::PeriodicTile,
        &BifurcationSettings::default(),
        Execution::Sequential,
    );
    match r {
        Err(Error::Resonance { offenders, .. }) => assert!(offenders.iter().any(|&j| j <= 8)),
        other => panic!("expected a resonance error, got {other:?}"),
    }
}

#[test]
fn complement_correction_is_small_o_of_alpha() {
    let dec = decomposition(&BifurcationSettings::default());
    let a = solve_pure_tone(&dec, 1e-4).unwrap();
    let b = solve_pure_tone(&dec, 5e-5).unwrap();
    let (ra, rb) = (a.w_size / a.alpha, b.w_size / b.alpha);
    assert!(ra < 1e-2, "{ra:e}");
    assert!(rb <= 0.5 * ra * (1.0 + 1e-6), "{ra:e} then {rb:e}");
}

#[test]
fn warm_and_cold_starts_agree() {
    let dec = decomposition(&BifurcationSettings::default());
    let cold = solve_pure_tone(&dec, 2e-3).unwrap();
    let near = solve_pure_tone(&dec, 1.9e-3).unwrap();
    let warm = solve_pure_tone_warm(
        &dec,
        2e-3,
        &WarmStart {
            z: Some(near.z),
            w: Some(near.y0.clone()),
        },
    )
    .unwrap();
    let gap = warm.y0.add(&cold.y0.scale(-1.0)).unwrap().max_coeff();
    assert!(gap < 1e-11, "{gap:e}");
}

#[test]
fn z_is_even_in_alpha() {
    let dec = decomposition(&BifurcationSettings::default());
    let plus = solve_pure_tone(&dec, 1e-3).unwrap();
    let minus = solve_pure_tone(&dec, -1e-3).unwrap();
    assert!(plus.z.abs() > 0.0);
    assert!((plus.z - minus.z).abs() < 1e-3 * plus.z.abs(), "{} vs {}", plus.z, minus.z);
}

#[test]
fn single_step_continuation_is_a_single_solve() {
    let dec = decomposition(&BifurcationSettings::default());
    let report = continuation(&dec, 1e-4, 1);
    assert_eq!(report.alphas, vec![1e-4]);
    assert!(report.failure.is_none());
    let direct = solve_pure_tone(&dec, 1e-4).unwrap();
    assert_eq!(report.solutions[0].y0, direct.y0);
}

#[test]
fn reach_does_not_grow_when_the_tolerance_tightens() {
    let reach = |aux_tol: f64| {
        let settings = BifurcationSettings {
            aux_tol,
            ..BifurcationSettings::default()
        };
        continuation(&decomposition(&settings), 0.2, 20).reached_amplitude
    };
    let (loose, tight) = (reach(1e-10), reach(1e-13));
    assert!(loose < 0.2, "the sweep should stop before its end");
    assert!(loose > 0.0);
    assert!(tight <= loose, "{tight} > {loose}");
}

#[test]
fn newton_krylov_matches_chord_where_both_converge() {
    let chord = solve_pure_tone(&decomposition(&BifurcationSettings::default()), 1e-3).unwrap();
    let nk_settings = BifurcationSettings {
        aux_method: AuxMethod::NewtonKrylov,
        ..BifurcationSettings::default()
    };
    let nk = solve_pure_tone(&decomposition(&nk_settings), 1e-3).unwrap();
    assert!(nk.boundary_residual < 1e-9);
    assert!((nk.z - chord.z).abs() < 1e-9 * chord.z.abs().max(1e-12) + 1e-15);
    let gap = nk.y0.add(&chord.y0.scale(-1.0)).unwrap().max_coeff();
    assert!(gap < 1e-11, "{gap:e}");
}

/// `dg/dz` at the origin is the divisor readout of the Duhamel vector
/// `(phi_hat, psi_hat)`, so its sign is that of the Sturm coefficient up to
/// the orientation of the readout row.
#[test]
fn g_z_is_the_readout_of_the_duhamel_vector() {
    let gas = Gas::GammaLaw(GammaLawGas::new(1.4, 1.0).unwrap());
    let profiles = [
        (vec![0.3, 0.2, 0.35, 0.15], vec![0.8, 1.3, 0.7]),
        (vec![0.6, 0.4], vec![1.7]),
        (vec![0.2, 0.5, 0.3], vec![2.0, 0.5]),
    ];
    for (widths, jumps) in profiles {
        let profile = EntropyProfile::Piecewise(PiecewiseConstantProfile::new(widths, jumps).unwrap());
        let field = sigma_of_x(&profile, &gas, 1.0).unwrap();
        for (k, flavor) in [(1, Flavor::PeriodicTile), (2, Flavor::PeriodicTile), (3, Flavor::PeriodicTile), (2, Flavor::Acoustic)] {
            let medium = Medium::physical(&profile, gas, 1.0).unwrap();
            let dec = build_decomposition(medium, k, flavor, &BifurcationSettings::default(), Execution::Sequential)
                .unwrap();
            let pair = eigenfrequency(&field, k, flavor, &SturmSettings::tight()).unwrap();
            let d = duhamel_bifurcation_coefficient(&field, &pair, &SturmSettings::tight()).unwrap();
            let readout = (readout_row(k, flavor) * Vector2::new(d.phi_hat, d.psi_hat))[0];
            assert!(
                (dec.dg_dz - readout).abs() < 1e-6 * readout.abs(),
                "k = {k} {flavor:?}: {} vs {readout}",
                dec.dg_dz
            );
            assert_eq!(readout.abs(), d.coefficient.abs());
        }
    }
}
