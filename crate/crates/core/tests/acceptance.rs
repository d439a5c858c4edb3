//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails that is not listed in `KNOWN_RED`.

use std::time::{Duration, Instant};

use gibbslab::classical::{density_oracle_constant_w, tail_moment_check, ClassicalModel, CutoffFunction, GibbsEnsemble, ThetaSpec};
use gibbslab::experiments::{
    classical_time_correlation, convergence_study_tau, invariance_test, quantum_time_correlation, series_study, ConvergenceReport,
    EpsilonSchedule, InvarianceObservable, Regularization, Scenario, TimedTheta,
};
use gibbslab::flow::{FlowConfig, NlsFlow};
use gibbslab::fock::{free_diagnostic, free_n_max, DuhamelQuadrature};
use gibbslab::free_field::{empirical_moment_complex, wick_moment_oracle, FreeEnsemble, RngStream, WickFactor};
use gibbslab::potentials::{DeltaProfile, Potential};
use gibbslab::spectral::{ModeSet, OneBodySpectrum, SpectralField};
use gibbslab::Complex64;

/// Criteria expected to fail, with the reason recorded alongside the code.
/// The tail of `∥φ∥₄` on the mass ball decays like `exp(-cλ⁸)`, so its
/// log-exceedance is concave in `λ²` rather than convex.
const KNOWN_RED: &[usize] = &[10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1() -> Outcome {
    let tau = 16.0f64;
    let spec = OneBodySpectrum::new(ModeSet::new(2), 1.0).unwrap();
    let n_max = free_n_max(&spec, tau, 1e-14);
    let d = free_diagnostic(&spec, tau, n_max);
    let mut ok = true;
    let mut worst_bose = 0.0f64;
    for (i, lam) in spec.eigenvalues.iter().enumerate() {
        let g = d.gamma_diag[i];
        let exact = 1.0 / (tau * (lam / tau).exp_m1());
        worst_bose = worst_bose.max((g - exact).abs());
        let bound = 1.0 / (2.0 * tau) + lam / (12.0 * tau * tau) * 1.1;
        ok &= (g - 1.0 / lam).abs() <= bound;
    }
    let z_err = (d.z_basis_sum - d.z_product).abs() / d.z_product;
    ok &= worst_bose <= 1e-10 && z_err <= 1e-10;
    outcome(ok, format!("n_max={n_max} max|γ-G|={worst_bose:.2e} Z rel err={z_err:.2e}"))
}

fn c2() -> Outcome {
    let kappa = 1.0;
    let ms = ModeSet::new(1);
    let ens = FreeEnsemble::<f64>::sample(ms, kappa, RngStream::new(2024, 0), 100_000).unwrap();
    let kinds: Vec<WickFactor<f64>> =
        ms.modes().flat_map(|k| [false, true].map(|c| WickFactor::mode(ms, k, c).unwrap())).collect();
    let (mut count, mut gauge, mut worst, mut worst_gauge) = (0usize, 0usize, 0.0f64, 0.0f64);
    let mut idx = Vec::new();
    for degree in 1..=8 {
        multisets(kinds.len(), degree, 0, &mut idx, &mut |sel| {
            let factors: Vec<WickFactor<f64>> = sel.iter().map(|&i| kinds[i].clone()).collect();
            let oracle = wick_moment_oracle(&factors, kappa).unwrap();
            let (re, im) = empirical_moment_complex(&ens.fields, |phi| gibbslab::free_field::monomial(&factors, phi)).unwrap();
            let z = re.z_score(oracle.re).max(im.z_score(oracle.im));
            count += 1;
            worst = worst.max(z);
            let plain = factors.iter().filter(|f| !f.conjugated).count();
            if 2 * plain != factors.len() {
                gauge += 1;
                worst_gauge = worst_gauge.max(z);
            }
        });
    }
    outcome(worst <= 5.0, format!("{count} monomials ({gauge} gauge-violating) max z={worst:.2} gauge max z={worst_gauge:.2}"))
}

/// Nondecreasing index sequences of length `len` over `0..n`.
fn multisets(n: usize, len: usize, start: usize, cur: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if cur.len() == len {
        visit(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        multisets(n, len, i, cur, visit);
        cur.pop();
    }
}

const TAUS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
}

fn c3() -> Outcome {
    let s = Scenario::new(1, 1.0, Potential::constant(0.2), 1_000_000, 1);
    let r = convergence_study_tau(&s, &TAUS).unwrap();
    let (ez, eg) = (r.e_z(), r.e_gamma());
    let halved = |xs: &[f64]| xs[xs.len() - 1] <= xs[0] / 2.0;
    let pass = r.e_z_decreasing() && halved(&ez) && !r.z_inconclusive() && r.e_gamma_decreasing() && halved(&eg) && !r.gamma_inconclusive();
    outcome(
        pass,
        format!("e_Z=[{}] SE={:.1e}; e_γ=[{}] SE≤{:.1e}", fmt_list(&ez), r.z_classical.std_error, fmt_list(&eg), r.gamma_std_error),
    )
}

fn trend(r: &ConvergenceReport<f64>) -> Outcome {
    outcome(r.e_z_decreasing() && !r.z_inconclusive(), format!("e_Z=[{}] SE={:.1e}", fmt_list(&r.e_z()), r.z_classical.std_error))
}

fn c4a() -> Outcome {
    let spike = Potential::grid_from_cell_averages(4096, |x: f64| 0.2 / x.abs().sqrt()).unwrap();
    let mut s = Scenario::new(1, 1.0, spike, 1_000_000, 1);
    s.schedule = Some(EpsilonSchedule { exponent: 0.25, regularization: Regularization::ClipL1 });
    trend(&convergence_study_tau(&s, &TAUS).unwrap())
}

fn c4b() -> Outcome {
    let mut s = Scenario::new(1, 1.0, Potential::exact_delta(), 1_000_000, 1);
    s.schedule = Some(EpsilonSchedule { exponent: 0.25, regularization: Regularization::DeltaApprox { profile: DeltaProfile::default() } });
    trend(&convergence_study_tau(&s, &TAUS).unwrap())
}

fn c5() -> Outcome {
    let s = Scenario::new(1, 1.0, Potential::constant(0.2), 1_000_000, 2);
    let xi = ThetaSpec::mode_projector(ModeSet::new(1), 0).unwrap();
    let r = series_study(&s, &xi, &[2.0, 4.0, 8.0], 2, DuhamelQuadrature::default()).unwrap();
    let pass = r.classical_within_bounds()
        && r.quantum_within_bounds()
        && r.differences_decreasing(0)
        && r.differences_decreasing(1)
        && r.partial_sum_agrees(4.0);
    let d0: Vec<f64> = r.quantum.iter().map(|p| p.differences[0]).collect();
    let d1: Vec<f64> = r.quantum.iter().map(|p| p.differences[1]).collect();
    let ps = &r.partial_sum;
    outcome(
        pass,
        format!(
            "|a_τ0-a_0|=[{}] |a_τ1-a_1|=[{}] partial sum {:.5} vs numerator {:.5}±{:.1e}",
            fmt_list(&d0),
            fmt_list(&d1),
            ps.partial_sum.value,
            ps.numerator.value,
            ps.numerator.std_error
        ),
    )
}

fn c6() -> Outcome {
    let ms = ModeSet::new(2);
    let cutoff = CutoffFunction::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, c) in [0.0, 0.2, 1.0].into_iter().enumerate() {
        let model = ClassicalModel::new(ms, 1.0, Potential::constant(c), cutoff.clone()).unwrap();
        let z = GibbsEnsemble::build(&model, 1_000_000, RngStream::new(6, i as u64)).unwrap().partition_function();
        let oracle = density_oracle_constant_w(c, &cutoff, ms, 1.0, 1e-10).unwrap();
        let zs = z.z_score(oracle);
        pass &= zs <= 4.0;
        parts.push(format!("c={c}: {:.5}±{:.1e} vs {oracle:.5} (z={zs:.2})", z.value, z.std_error));
    }
    outcome(pass, parts.join("; "))
}

fn c7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let ms = ModeSet::new(2);
    let mut rng = RngStream::new(7, 0).sample_rng(0);
    let phi = gibbslab::free_field::sample_free_field::<f64, _>(ms, 1.0, &mut rng).unwrap();
    for galerkin in [false, true] {
        let cfg = |dt: f64| {
            if galerkin {
                FlowConfig::galerkin(ms, 1.0, Potential::exact_delta(), dt)
            } else {
                FlowConfig::pseudospectral(32, 1.0, Potential::exact_delta(), dt)
            }
        };
        let flow = NlsFlow::new(cfg(1e-3)).unwrap();
        // i u' = (4π²k² + κ)u - |A|²u for a plane wave under local focusing
        let a = Complex64::new(0.8, 0.0);
        let wave = SpectralField::plane_wave(ms, 1, a).unwrap();
        let rate = 4.0 * std::f64::consts::PI.powi(2) + 1.0 - a.norm_sqr();
        let phase_err = (flow.evolve(&wave, 1.0).unwrap().coeff(1) - a * Complex64::from_polar(1.0, -rate)).norm();

        let fwd = flow.evolve(&phi, 10.0).unwrap();
        let mass_drift = (fwd.mass() / phi.mass() - 1.0).abs();

        let drift = |dt: f64| {
            let f = NlsFlow::new(cfg(dt)).unwrap();
            let e0 = f.energy(&phi).unwrap();
            (f.energy(&f.evolve(&phi, 1.0).unwrap()).unwrap() - e0).abs()
        };
        let energy_ratio = drift(1e-3) / drift(5e-4);

        let one = flow.evolve(&phi, 1.0).unwrap();
        let round_trip = flow.evolve(&one, -1.0).unwrap().l2_distance(&phi);

        pass &= phase_err < 1e-8 && mass_drift < 1e-12 && energy_ratio >= 3.5 && round_trip <= 1e-9;
        parts.push(format!(
            "{}: phase {phase_err:.1e} mass/1e4 steps {mass_drift:.1e} energy ratio {energy_ratio:.2} round trip {round_trip:.1e}",
            if galerkin { "galerkin" } else { "pseudospectral" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c8() -> Outcome {
    let s = Scenario::new(2, 1.0, Potential::exact_delta(), 100_000, 4);
    let model = s.classical_model().unwrap();
    let ens = s.ensemble(&model).unwrap();
    let flow = NlsFlow::new(s.flow_config()).unwrap();
    let mut obs: Vec<InvarianceObservable> = s.mode_set().modes().map(InvarianceObservable::GammaDiagonal).collect();
    obs.extend([InvarianceObservable::MassPower(1), InvarianceObservable::MassPower(2), InvarianceObservable::Interaction]);
    let r = invariance_test(&model, &ens, &flow, &obs, &[1.0]).unwrap();
    outcome(r.passes(3.0), format!("{} observables, max ratio {:.3}", r.entries.len(), r.max_ratio()))
}

fn c9() -> Outcome {
    let s = Scenario::new(1, 1.0, Potential::constant(0.2), 100_000, 3);
    let xi = ThetaSpec::mode_projector(s.mode_set(), 0).unwrap();
    let factors = [TimedTheta { xi: xi.clone(), t: 0.0 }, TimedTheta { xi, t: 0.5 }];
    let model = s.classical_model().unwrap();
    let ens = s.ensemble(&model).unwrap();
    let flow = NlsFlow::new(s.flow_config()).unwrap();
    let (classical, _) = classical_time_correlation(&ens, &factors, &flow).unwrap();
    let gaps: Vec<f64> = [2.0f64, 4.0, 8.0]
        .iter()
        .map(|&tau| (quantum_time_correlation(&s.quantum_model(tau).unwrap(), &factors).unwrap().re - classical.value).abs())
        .collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = gaps.windows(2).all(|w| w[1] < w[0]) && classical.std_error < min_gap / 2.0;
    outcome(pass, format!("gaps=[{}] classical {:.4}±{:.1e}", fmt_list(&gaps), classical.value, classical.std_error))
}

fn c10() -> Outcome {
    let r = tail_moment_check(1.0, 1.0, 0.5, 1_000_000, &[8, 16], RngStream::new(10, 0), 12).unwrap();
    let rel = r.max_rel_change().unwrap_or(f64::INFINITY);
    let worst = r.second_differences().iter().map(|(v, se)| v / se).fold(f64::INFINITY, f64::min);
    let pass = rel <= 0.05 && r.is_decreasing() && r.is_convex(3.0);
    outcome(
        pass,
        format!(
            "moment rel change {:.2}%, decreasing {}, convex {} (most negative second difference {worst:.1} SE)",
            100.0 * rel,
            r.is_decreasing(),
            r.is_convex(3.0)
        ),
    )
}

fn main() {
    let criteria: Vec<(usize, &str, u64, fn() -> Outcome)> = vec![
        (1, "free-theory exactness", 10, c1),
        (2, "Wick suite", 60, c2),
        (3, "τ-trend, constant potential", 900, c3),
        (4, "τ-trend, clipped L¹ spike", 1200, c4a),
        (4, "τ-trend, delta approximation", 1200, c4b),
        (5, "series coefficients", 600, c5),
        (6, "constant-w two-route z", 300, c6),
        (7, "NLS solver", 120, c7),
        (8, "Gibbs invariance under the flow", 1800, c8),
        (9, "time-dependent trend", 1800, c9),
        (10, "tail test", 600, c10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= Duration::from_secs(budget);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} [{:.1}s/{budget}s] {}", elapsed.as_secs_f64(), o.detail);
        if !pass && !KNOWN_RED.contains(&id) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
