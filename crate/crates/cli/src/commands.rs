use std::io::Write;
use std::time::Instant;

use gibbslab::classical::{correlation_gamma_p, tail_moment_check, ThetaSpec};
use gibbslab::experiments::{
    classical_time_correlation, convergence_study_tau, epsilon_flow_study, invariance_test, quantum_time_correlation, series_study,
    ExperimentError, ExperimentReport, InvarianceObservable, TimedTheta,
};
use gibbslab::flow::NlsFlow;
use gibbslab::fock::{gamma_tau_p, DuhamelQuadrature, FockError};
use gibbslab::free_field::{sample_free_field, RngStream};
use gibbslab::potentials::{build_delta_approx, DeltaProfile};
use gibbslab::spectral::{field_to_json, ModeSet};
use gibbslab::CMat;
use serde_json::json;

use crate::config::{ScenarioConfig, SweepKind};

/// What a command produced: a report, lines for the terminal, and extra
/// files `(name, bytes)`.
pub struct Outcome {
    pub report: ExperimentReport,
    pub summary: Vec<String>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(report: ExperimentReport) -> Self {
        Self { report, summary: Vec::new(), files: Vec::new() }
    }
}

#[derive(Debug)]
pub enum CommandError {
    Config(String),
    Resource(String),
    Failed(String),
}

impl From<ExperimentError> for CommandError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Fock(FockError::Size(m)) => CommandError::Resource(m),
            ExperimentError::Config(m) => CommandError::Config(m),
            e => CommandError::Failed(e.to_string()),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CommandError {
    CommandError::Failed(e.to_string())
}

fn sweep(cfg: &ScenarioConfig, kind: SweepKind, command: &str) -> Result<Vec<f64>, CommandError> {
    if cfg.sweep.kind != kind {
        return Err(CommandError::Config(format!("sweep.kind: `{command}` needs kind = \"{}\"", kind_name(kind))));
    }
    Ok(cfg.sweep.values.clone())
}

fn kind_name(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Tau => "tau",
        SweepKind::Epsilon => "epsilon",
        SweepKind::Time => "time",
    }
}

fn xi(cfg: &ScenarioConfig) -> Result<ThetaSpec<f64>, CommandError> {
    ThetaSpec::mode_projector(ModeSet::new(cfg.mode_set.k_max), cfg.observable.mode).map_err(CommandError::Config)
}

fn push_matrix(r: &mut ExperimentReport, sweep: f64, name: &str, m: &CMat, se: Option<&gibbslab::RMat>, runtime: f64) {
    let k = (m.rows() / 2) as i64;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.as_slice()[i * m.cols() + j];
            let s = se.map(|s| s.row(i)[j]).unwrap_or(0.0);
            let label = if m.rows() % 2 == 1 { format!("{name}({},{})", i as i64 - k, j as i64 - k) } else { format!("{name}[{i},{j}]") };
            r.push(sweep, &format!("{label}.re"), v.re, s, runtime);
            r.push(sweep, &format!("{label}.im"), v.im, s, runtime);
        }
    }
}

pub fn sample_classical(cfg: &ScenarioConfig, hash: &str) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let start = Instant::now();
    let model = s.classical_model()?;
    let ens = s.ensemble(&model)?;
    let z = ens.partition_function();
    let runtime = start.elapsed().as_secs_f64();
    let mut r = ExperimentReport::new("sample-classical", cfg, "n_samples");
    let n = ens.len() as f64;
    r.push(n, "z", z.value, z.std_error, runtime);
    r.push(n, "effective_sample_size", ens.effective_sample_size(), 0.0, runtime);
    let mut file = Vec::new();
    writeln!(file, "{}", json!({ "config_hash": hash, "meta": ens.meta })).map_err(failed)?;
    for (i, phi) in ens.fields.iter().enumerate() {
        let rec: serde_json::Value = serde_json::from_str(&field_to_json(phi, cfg.kappa)).map_err(failed)?;
        let line = json!({ "index": i, "weight": ens.weights[i], "interaction": ens.interaction[i], "mass": ens.mass[i], "field": rec });
        writeln!(file, "{line}").map_err(failed)?;
    }
    let mut o = Outcome::new(r);
    o.summary.push(format!("z = {} ± {}", z.value, z.std_error));
    o.files.push(("ensemble.jsonl".into(), file));
    Ok(o)
}

pub fn fock_partition(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let mut r = ExperimentReport::new("fock-partition", cfg, "tau");
    let mut summary = Vec::new();
    for tau in sweep(cfg, SweepKind::Tau, "fock-partition")? {
        let start = Instant::now();
        let state = s.quantum_model(tau)?.thermal_state(1.0).map_err(ExperimentError::from)?;
        let (z, z0) = (state.z_tau(), state.z_tau_0());
        let t = start.elapsed().as_secs_f64();
        r.push(tau, "Z_tau", z, 0.0, t);
        r.push(tau, "Z_tau_0", z0, 0.0, t);
        r.push(tau, "relative_Z", z / z0, 0.0, t);
        r.push(tau, "truncation_tail", state.truncation_tail(), 0.0, t);
        summary.push(format!("τ = {tau}: Z_τ = {z:?}, Z_τ,0 = {z0:?}, 𝒵 = {:?}", z / z0));
    }
    let mut o = Outcome::new(r);
    o.summary = summary;
    Ok(o)
}

pub fn correlations(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let p = cfg.correlations.p;
    if cfg.correlations.quantum {
        let mut r = ExperimentReport::new("correlations", cfg, "tau");
        for tau in sweep(cfg, SweepKind::Tau, "correlations")? {
            let start = Instant::now();
            let state = s.quantum_model(tau)?.thermal_state(1.0).map_err(ExperimentError::from)?;
            let g = gamma_tau_p(&state, p).map_err(ExperimentError::from)?;
            push_matrix(&mut r, tau, "gamma", &g, None, start.elapsed().as_secs_f64());
        }
        Ok(Outcome::new(r))
    } else {
        let start = Instant::now();
        let model = s.classical_model()?;
        let ens = s.ensemble(&model)?;
        let g = correlation_gamma_p(&ens, p).map_err(ExperimentError::from)?;
        let mut r = ExperimentReport::new("correlations", cfg, "tau");
        push_matrix(&mut r, f64::INFINITY, "gamma", &g.matrix, Some(&g.std_error), start.elapsed().as_secs_f64());
        let mut o = Outcome::new(r);
        o.summary.push(format!("classical γ_{p}: trace {:.6}, max SE {:.2e}", g.trace(), g.max_std_error()));
        Ok(o)
    }
}

pub fn series(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let taus = sweep(cfg, SweepKind::Tau, "series")?;
    let quad = DuhamelQuadrature { order: cfg.series.quadrature_order, panels: cfg.series.quadrature_panels };
    let rep = series_study(&cfg.scenario(), &xi(cfg)?, &taus, cfg.series.quantum_order, quad)?;
    let mut o = Outcome::new(rep.report());
    o.summary.push(format!(
        "classical within bounds: {}, quantum within bounds: {}, partial sum {} vs numerator {} ± {}",
        rep.classical_within_bounds(),
        rep.quantum_within_bounds(),
        rep.partial_sum.partial_sum.value,
        rep.partial_sum.numerator.value,
        rep.partial_sum.numerator.std_error
    ));
    Ok(o)
}

pub fn nls_evolve(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let ms = s.mode_set();
    let phi0 = sample_free_field::<f64, _>(ms, cfg.kappa, &mut RngStream::new(cfg.sampler.seed, 1).sample_rng(0)).map_err(failed)?;
    let flow_cfg = s.flow_config();
    match cfg.sweep.kind {
        SweepKind::Epsilon => {
            let start = Instant::now();
            let eps = cfg.sweep.values.clone();
            let pts = epsilon_flow_study(
                &phi0,
                &s.potential,
                |e| Ok(build_delta_approx(DeltaProfile::default(), e)?),
                &eps,
                cfg.evolve.t_final,
                &flow_cfg,
                cfg.evolve.stride,
            )?;
            let mut r = ExperimentReport::new("nls-evolve", cfg, "epsilon");
            for p in &pts {
                r.push(p.epsilon, "max_l2_distance", p.distance, 0.0, start.elapsed().as_secs_f64());
            }
            Ok(Outcome::new(r))
        }
        SweepKind::Time => {
            let flow = NlsFlow::new(flow_cfg).map_err(ExperimentError::from)?;
            let mut times = cfg.sweep.values.clone();
            times.sort_by(f64::total_cmp);
            let (m0, e0) = (phi0.mass(), flow.energy(&phi0).map_err(ExperimentError::from)?);
            let mut r = ExperimentReport::new("nls-evolve", cfg, "t");
            let mut traj = Vec::new();
            let (mut t_prev, mut phi) = (0.0, phi0.clone());
            let start = Instant::now();
            for t in times {
                phi = flow.evolve(&phi, t - t_prev).map_err(ExperimentError::from)?;
                t_prev = t;
                let e = flow.energy(&phi).map_err(ExperimentError::from)?;
                let rt = start.elapsed().as_secs_f64();
                r.push(t, "mass", phi.mass(), 0.0, rt);
                r.push(t, "energy", e, 0.0, rt);
                r.push(t, "mass_rel_drift", (phi.mass() - m0) / m0, 0.0, rt);
                r.push(t, "energy_rel_drift", (e - e0) / e0.abs().max(f64::MIN_POSITIVE), 0.0, rt);
                writeln!(traj, "{{\"t\":{t},\"field\":{}}}", field_to_json(&phi, cfg.kappa)).map_err(failed)?;
            }
            let mut o = Outcome::new(r);
            o.files.push(("trajectory.jsonl".into(), traj));
            o.summary.push(format!("final mass drift {:.3e}", (phi.mass() - m0) / m0));
            Ok(o)
        }
        SweepKind::Tau => Err(CommandError::Config("sweep.kind: `nls-evolve` needs kind = \"time\" or \"epsilon\"".into())),
    }
}

pub fn convergence(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let rep = convergence_study_tau(&cfg.scenario(), &sweep(cfg, SweepKind::Tau, "convergence")?)?;
    let mut o = Outcome::new(rep.report());
    for p in &rep.points {
        o.summary.push(format!("τ = {}: e_Z = {:.6}, e_γ = {:.6}", p.tau, p.e_z, p.e_gamma));
    }
    Ok(o)
}

pub fn time_correlation(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let taus = sweep(cfg, SweepKind::Tau, "time-correlation")?;
    let xi = xi(cfg)?;
    let factors: Vec<TimedTheta<f64>> = cfg.observable.times.iter().map(|&t| TimedTheta { xi: xi.clone(), t }).collect();
    let start = Instant::now();
    let model = s.classical_model()?;
    let ens = s.ensemble(&model)?;
    let flow = NlsFlow::new(s.flow_config()).map_err(ExperimentError::from)?;
    let (re, im) = classical_time_correlation(&ens, &factors, &flow)?;
    let mut r = ExperimentReport::new("time-correlation", cfg, "tau");
    r.push(f64::INFINITY, "classical.re", re.value, re.std_error, start.elapsed().as_secs_f64());
    r.push(f64::INFINITY, "classical.im", im.value, im.std_error, start.elapsed().as_secs_f64());
    let mut gaps = Vec::new();
    for tau in taus {
        let t0 = Instant::now();
        let q = quantum_time_correlation(&s.quantum_model(tau)?, &factors)?;
        let rt = t0.elapsed().as_secs_f64();
        r.push(tau, "quantum.re", q.re, 0.0, rt);
        r.push(tau, "quantum.im", q.im, 0.0, rt);
        r.push(tau, "gap", (q.re - re.value).abs(), re.std_error, rt);
        gaps.push((q.re - re.value).abs());
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if !(re.std_error < min_gap / 2.0) {
        r.flags.push("inconclusive: classical SE not below half the smallest gap".into());
    }
    let mut o = Outcome::new(r);
    o.summary.push(format!("classical {} ± {}, gaps {:?}", re.value, re.std_error, gaps));
    Ok(o)
}

pub fn invariance(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let s = cfg.scenario();
    let times = sweep(cfg, SweepKind::Time, "invariance")?;
    let model = s.classical_model()?;
    let ens = s.ensemble(&model)?;
    let flow = NlsFlow::new(s.flow_config()).map_err(ExperimentError::from)?;
    let mut obs: Vec<InvarianceObservable> = s.mode_set().modes().map(InvarianceObservable::GammaDiagonal).collect();
    obs.extend([InvarianceObservable::MassPower(1), InvarianceObservable::MassPower(2), InvarianceObservable::Interaction]);
    let rep = invariance_test(&model, &ens, &flow, &obs, &times)?;
    let mut o = Outcome::new(rep.report(cfg));
    o.summary.push(format!("max |Q(t) - Q(0)|/SE = {:.3}", rep.max_ratio()));
    Ok(o)
}

pub fn tail_check(cfg: &ScenarioConfig) -> Result<Outcome, CommandError> {
    let t = &cfg.tail;
    let start = Instant::now();
    let rep = tail_moment_check(cfg.kappa, t.b, t.c, cfg.sampler.n_samples, &t.levels, RngStream::new(cfg.sampler.seed, 0), t.n_lambda)
        .map_err(CommandError::Config)?;
    let rt = start.elapsed().as_secs_f64();
    let mut r = ExperimentReport::new("tail-check", cfg, "k_max_or_lambda_sq");
    for l in &rep.levels {
        r.push(l.k_max as f64, "moment", l.estimate.value, l.estimate.std_error, rt);
        if let Some(c) = l.rel_change {
            r.push(l.k_max as f64, "moment_rel_change", c, 0.0, rt);
        }
    }
    for p in &rep.exceedance {
        if let (Some(v), Some(se)) = (p.log_prob, p.log_prob_se) {
            r.push(p.lambda_sq, "log_exceedance", v, se, rt);
        }
    }
    r.push(f64::NAN, "decreasing", f64::from(u8::from(rep.is_decreasing())), 0.0, rt);
    r.push(f64::NAN, "convex", f64::from(u8::from(rep.is_convex(3.0))), 0.0, rt);
    if rep.exceedance.iter().filter(|p| p.log_prob.is_some()).count() < 3 {
        r.flags.push("inconclusive: fewer than three exceedance points".into());
    }
    let mut o = Outcome::new(r);
    o.summary.push(format!(
        "moment change {:.3}%, decreasing {}, convex {}",
        100.0 * rep.max_rel_change().unwrap_or(0.0),
        rep.is_decreasing(),
        rep.is_convex(3.0)
    ));
    Ok(o)
}
