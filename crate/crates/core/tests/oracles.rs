use gibbslab::classical::{density_oracle_constant_w, ClassicalModel, CutoffFunction, GibbsEnsemble};
use gibbslab::experiments::epsilon_flow_study;
use gibbslab::flow::FlowConfig;
use gibbslab::fock::{exact_n_max, OperatorKind, QuantumModel};
use gibbslab::free_field::{sample_free_field, RngStream};
use gibbslab::potentials::{build_delta_approx, DeltaProfile, Potential};
use gibbslab::spectral::{grid_point, heat_propagator, to_grid, ModeSet, SpectralField};
use gibbslab::Complex64;

#[test]
fn heat_kernel_matches_image_sum() {
    // e^{-th} δ = e^{-κt} Σ_n (4πt)^{-1/2} e^{-(x-n)²/4t}
    let (t, kappa) = (0.01, 0.5);
    let ms = ModeSet::new(40);
    let delta = SpectralField::new(ms, vec![Complex64::new(1.0, 0.0); ms.dim()]).unwrap();
    let g = to_grid(&heat_propagator(t, &delta, kappa).unwrap(), 128).unwrap();
    for (j, v) in g.values.iter().enumerate() {
        let x: f64 = grid_point(j, 128);
        let images: f64 = (-5..=5)
            .map(|n| {
                let y = x - n as f64;
                (-y * y / (4.0 * t)).exp()
            })
            .sum();
        let expect = (-kappa * t).exp() * images / (4.0 * std::f64::consts::PI * t).sqrt();
        assert!((v.re - expect).abs() < 1e-10 && v.im.abs() < 1e-10, "x = {x}: {v} vs {expect}");
    }
}

#[test]
fn delta_approximations_approach_the_local_flow() {
    let ms = ModeSet::new(2);
    let phi = sample_free_field::<f64, _>(ms, 1.0, &mut RngStream::new(31, 0).sample_rng(0)).unwrap();
    let cfg = FlowConfig::galerkin(ms, 1.0, Potential::exact_delta(), 1e-3);
    let sweep = epsilon_flow_study(
        &phi,
        &Potential::exact_delta(),
        |eps| Ok(build_delta_approx(DeltaProfile::default(), eps)?),
        &[0.2, 0.1, 0.05],
        0.5,
        &cfg,
        10,
    )
    .unwrap();
    let d: Vec<f64> = sweep.iter().map(|p| p.distance).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(d[2] > 0.0);
}

#[test]
fn monte_carlo_z_matches_density_oracle() {
    let ms = ModeSet::new(1);
    let cutoff = CutoffFunction::default();
    let model = ClassicalModel::new(ms, 1.0, Potential::constant(0.5), cutoff.clone()).unwrap();
    let z = GibbsEnsemble::build(&model, 200_000, RngStream::new(3, 0)).unwrap().partition_function();
    let oracle = density_oracle_constant_w(0.5, &cutoff, ms, 1.0, 1e-10).unwrap();
    assert!(z.z_score(oracle) < 4.5, "{z:?} vs {oracle}");
}

#[test]
fn free_quantum_partition_function_is_relative_one() {
    let ms = ModeSet::new(1);
    let tau = 1.0f64;
    let q = QuantumModel::new(ms, 1.0, tau, Potential::zero(), CutoffFunction::Diagnostic, Some(60)).unwrap();
    let state = q.thermal_state(1.0).unwrap();
    assert!((state.z_tau() / state.z_tau_0() - 1.0).abs() < 1e-10);
    let h0 = q.operator(&OperatorKind::H0).unwrap();
    assert!(h0.hermitian_defect() == 0.0);
    assert_eq!(exact_n_max(4.0, tau), 4);
}
