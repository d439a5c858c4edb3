use gibbslab::classical::{correlation_gamma_p, ClassicalModel, CutoffFunction, GibbsEnsemble};
use gibbslab::flow::{FlowConfig, NlsFlow};
use gibbslab::fock::{ccr_defect, gamma_tau_p, OperatorKind, QuantumModel};
use gibbslab::free_field::{wick_moment_oracle, RngStream, WickFactor};
use gibbslab::linalg::hermitian_eigenvalues;
use gibbslab::potentials::Potential;
use gibbslab::spectral::{from_grid, l4_pow4, to_grid, ModeSet, SpectralField};
use gibbslab::Complex64;
use proptest::prelude::*;

fn field(k_max: usize, parts: &[(f64, f64)]) -> SpectralField<f64> {
    let ms = ModeSet::new(k_max);
    SpectralField::new(ms, parts[..ms.dim()].iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 13)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_is_a_bump(k in 0.5..8.0f64, plateau in 0.05..0.95f64, x in -1.0..20.0f64) {
        let f = CutoffFunction::bump(k, plateau).unwrap();
        let v = f.eval(x);
        prop_assert!((0.0..=1.0).contains(&v));
        if x >= k {
            prop_assert_eq!(v, 0.0);
        }
        if (0.0..=plateau * k).contains(&x) {
            prop_assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn grid_round_trip_and_parseval(k_max in 0usize..=6, c in coeffs()) {
        let phi = field(k_max, &c);
        let n_x = phi.mode_set().quartic_grid();
        let g = to_grid(&phi, n_x).unwrap();
        let back = from_grid(&g, phi.mode_set()).unwrap();
        prop_assert!(back.l2_distance(&phi) < 1e-12);
        let mass: f64 = g.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n_x as f64;
        prop_assert!((mass - phi.mass()).abs() < 1e-12);
        let l4: f64 = g.values.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n_x as f64;
        prop_assert!((l4 - l4_pow4(&phi)).abs() < 1e-11 * (1.0 + l4));
    }

    #[test]
    fn two_point_wick_is_the_covariance(k_max in 0usize..=6, c in coeffs(), kappa in 0.1..3.0f64) {
        let g = field(k_max, &c);
        let f = [WickFactor::new(g.clone(), false), WickFactor::new(g.clone(), true)];
        let m = wick_moment_oracle(&f, kappa).unwrap();
        let expect: f64 = g.mode_set().modes().map(|k| g.coeff(k).norm_sqr() / (4.0 * std::f64::consts::PI.powi(2) * (k * k) as f64 + kappa)).sum();
        prop_assert!((m.re - expect).abs() < 1e-12 && m.im.abs() < 1e-12);
        let odd = wick_moment_oracle(&f[..1], kappa).unwrap();
        prop_assert_eq!(odd.norm(), 0.0);
    }

    #[test]
    fn flow_conserves_mass(k_max in 1usize..=3, c in coeffs(), galerkin: bool) {
        let phi = field(k_max, &c);
        let ms = phi.mode_set();
        let cfg = if galerkin {
            FlowConfig::galerkin(ms, 1.0, Potential::exact_delta(), 2e-3)
        } else {
            FlowConfig::pseudospectral(4 * ms.quartic_grid(), 1.0, Potential::exact_delta(), 2e-3)
        };
        let out = NlsFlow::new(cfg).unwrap().evolve(&phi, 0.2).unwrap();
        prop_assert!((out.mass() / phi.mass() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hamiltonian_is_hermitian_and_states_are_positive(c0 in -1.0..1.0f64, c1 in -1.0..1.0f64, tau in 0.5..3.0f64) {
        let ms = ModeSet::new(1);
        let w = Potential::fourier(vec![c1, c0, c1]).unwrap();
        let q = QuantumModel::new(ms, 1.0, tau, w, CutoffFunction::default(), None).unwrap();
        let h = q.hamiltonian(1.0);
        prop_assert!(h.hermitian_defect() < 1e-12);
        prop_assert!(h.is_block_diagonal());
        let state = q.thermal_state(1.0).unwrap();
        let g = gamma_tau_p(&state, 1).unwrap();
        prop_assert!(g.hermitian_defect() < 1e-12);
        prop_assert!(hermitian_eigenvalues(&g).iter().all(|e| *e > -1e-12));
        let n = state.expectation(&q.operator(&OperatorKind::N).unwrap()).unwrap();
        prop_assert!((g.trace().re - n.re).abs() < 1e-10);
    }

    #[test]
    fn ccr_holds_below_the_truncation(tau in 0.5..3.0f64) {
        let q = QuantumModel::new(ModeSet::new(1), 1.0, tau, Potential::zero(), CutoffFunction::default(), None).unwrap();
        for k in -1..=1 {
            let d: Vec<f64> = ccr_defect(q.basis(), k).unwrap();
            let n_max = q.basis().n_max();
            prop_assert!(d[..n_max].iter().all(|x| x.abs() < 1e-12), "{:?}", d);
        }
    }

    #[test]
    fn classical_gamma_is_positive(seed in 0u64..1000) {
        let model = ClassicalModel::new(ModeSet::new(2), 1.0, Potential::constant(0.3), CutoffFunction::default()).unwrap();
        let ens = GibbsEnsemble::build(&model, 2000, RngStream::new(seed, 0)).unwrap();
        let g = correlation_gamma_p(&ens, 1).unwrap();
        prop_assert!(g.matrix.hermitian_defect() < 1e-12);
        prop_assert!(g.min_eigenvalue() > -1e-12);
    }
}
