//! Subcommand pipelines. Sweep points run on the rayon pool; results are
//! collected by grid index so output never depends on scheduling.

use kdsta::analysis::{
    dephasing_ratio, linear_coefficient, loglog_fit, phase_grid, power_coefficient, shot_budget,
    shot_noise_monte_carlo, BudgetInputs, ScalingFit, ShotBudget, ShotNoiseConfig, ShotNoiseReport,
    TwoBranchModel, FLOOR_FACTOR,
};
use kdsta::oscillator::{
    fock_h_off, fock_propagation_reports, phase_probe_amplitudes, phase_probe_correction,
    BogoliubovPair, EndpointCoefficients, OscillatorEndpoint, MAX_BAND,
};
use kdsta::quasiprob::{endpoint_means, EndpointReport};
use kdsta::qubit::{chi_gap_profile, phase_swept_witnesses, u_grid, BlochDecomposition, PhaseWitnesses, QubitEndpoint};
use kdsta::{ErrorKind, ProtocolSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, Artifacts};
use crate::svg::{loglog_plot, Series};
use crate::CliError;

/// Closed-form versus Fock-oracle agreement required on every oscillator run.
pub const ORACLE_TOL: f64 = 1e-6;
/// Tolerance of the `ΔW_coh = Tr(H_off ρ_off) = W_coh - W_TPM` identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance of KD trace and marginal identities.
pub const KD_TOL: f64 = 1e-10;
/// Probe phases used by the per-run consistency checks.
const CHECK_PHASES: usize = 8;

const FLOOR: &str = "floor";
const FIT: &str = "fit";

/// A scaling fit or the reason it could not be made.
#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub fit: Option<ScalingFit>,
    /// Zero-error value of the same signal.
    pub baseline: f64,
    pub error: Option<String>,
}

impl FitEntry {
    fn new(eps: &[f64], signals: &[f64], baseline: f64) -> Self {
        let (e, s): (Vec<f64>, Vec<f64>) = eps.iter().zip(signals).filter(|(e, _)| **e > 0.0).unzip();
        match loglog_fit(&e, &s, baseline) {
            Ok(fit) => Self { fit: Some(fit), baseline, error: None },
            Err(err) => Self { fit: None, baseline, error: Some(err.to_string()) },
        }
    }
}

fn flag(eps: f64, signal: f64, baseline: f64) -> &'static str {
    if eps == 0.0 || signal.abs() <= FLOOR_FACTOR * baseline.abs() {
        FLOOR
    } else {
        FIT
    }
}

fn spec(base: &ProtocolSpec, kind: ErrorKind, eps: f64) -> Result<ProtocolSpec, CliError> {
    Ok(base.with_error(kind, eps)?)
}

fn par_map<T: Send>(
    eps: &[f64],
    f: impl Fn(f64) -> Result<T, CliError> + Sync + Send,
) -> Result<Vec<T>, CliError> {
    eps.par_iter().map(|&e| f(e)).collect()
}

fn report_failures(r: &EndpointReport, label: &str, out: &mut Vec<String>) {
    let sector = (r.delta_w_coh - r.delta_w_coh_sector).abs();
    if !(sector <= IDENTITY_TOL) {
        out.push(format!("{label}: Tr(H_off rho_off) differs from the coherent correction by {sector:e}"));
    }
    let diff = (r.delta_w_coh - (r.w_coh - r.w_tpm)).abs();
    if !(diff <= IDENTITY_TOL) {
        out.push(format!("{label}: W_coh - W_TPM differs from the coherent correction by {diff:e}"));
    }
    if !(r.delta_w_coh.abs() <= r.bound + IDENTITY_TOL) {
        out.push(format!("{label}: |correction| {:e} exceeds the bound {:e}", r.delta_w_coh.abs(), r.bound));
    }
}

fn fail_on(failures: Vec<String>) -> Result<(), CliError> {
    match failures.first() {
        None => Ok(()),
        Some(first) => Err(CliError::Numerical(format!(
            "{} consistency violation(s), first: {first}",
            failures.len()
        ))),
    }
}

// ---------------------------------------------------------------- oscillator

struct OscPoint {
    eps: f64,
    end: OscillatorEndpoint,
    /// `ΔW_coh(θ)/ω_f` on the phase grid.
    phase_signal: Vec<f64>,
    max_abs_signal: f64,
    bands: Vec<(i32, f64)>,
}

fn oscillator_point(cfg: &RunConfig, eps: f64, thetas: &[f64]) -> Result<OscPoint, CliError> {
    let end = OscillatorEndpoint::compute(&spec(&cfg.oscillator, cfg.error_kind, eps)?, cfg.steps)?;
    let c = &end.coefficients;
    let phase_signal: Vec<f64> = thetas.iter().map(|&t| phase_probe_correction(c, t) / c.omega_f).collect();
    let max_abs_signal = phase_signal.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * c.omega_f;
    let bands = fock_h_off(c, cfg.fingerprint_dim)?.bands;
    Ok(OscPoint { eps, end, phase_signal, max_abs_signal, bands })
}

fn band_of(bands: &[(i32, f64)], dn: i32) -> f64 {
    bands.iter().find(|(d, _)| *d == dn).map_or(0.0, |b| b.1)
}

#[derive(Serialize)]
struct OscillatorFingerprint {
    epsilon: f64,
    pair: BogoliubovPair,
    coefficients: EndpointCoefficients,
    /// `B_Δn` for Δn = -MAX_BAND..=MAX_BAND, relative to `ω_f`.
    bands: Vec<(i32, f64)>,
    /// Off-diagonal part of the pulled-back Hamiltonian in the Fock basis.
    h_off_re: Vec<Vec<f64>>,
    h_off_im: Vec<Vec<f64>>,
}

fn oscillator_fingerprint(cfg: &RunConfig, eps: f64) -> Result<OscillatorFingerprint, CliError> {
    let end = OscillatorEndpoint::compute(&spec(&cfg.oscillator, cfg.error_kind, eps)?, cfg.steps)?;
    let fp = fock_h_off(&end.coefficients, cfg.fingerprint_dim)?;
    let n = fp.h_off.nrows();
    let part = |f: fn(&kdsta::quantum_core::CMatrix, usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f(&fp.h_off, i, j)).collect()).collect()
    };
    Ok(OscillatorFingerprint {
        epsilon: eps,
        pair: end.pair,
        coefficients: end.coefficients,
        bands: fp.bands.clone(),
        h_off_re: part(|m, i, j| m[(i, j)].re),
        h_off_im: part(|m, i, j| m[(i, j)].im),
    })
}

#[derive(Serialize)]
struct OracleRow {
    theta: f64,
    w_tpm_closed: f64,
    w_tpm_fock: f64,
    delta_w_coh_closed: f64,
    delta_w_coh_fock: f64,
}

#[derive(Serialize)]
struct OracleCheck {
    epsilon: f64,
    dim: usize,
    max_difference: f64,
    tolerance: f64,
    rows: Vec<OracleRow>,
}

/// Compares the Bogoliubov closed forms with brute-force Fock propagation at
/// `dim` (itself checked against `dim + 10` levels).
fn oscillator_oracle(cfg: &RunConfig, eps: f64) -> Result<OracleCheck, CliError> {
    let spec = spec(&cfg.oscillator, cfg.error_kind, eps)?;
    let end = OscillatorEndpoint::compute(&spec, cfg.steps)?;
    let thetas = phase_grid(4);
    let states: Vec<_> = thetas.iter().map(|&t| phase_probe_amplitudes(t)).collect();
    let reports = fock_propagation_reports(&spec, cfg.dim, cfg.steps, &states)?;
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut max_difference = 0.0_f64;
    for (&theta, r) in thetas.iter().zip(&reports) {
        report_failures(r, &format!("Fock oracle at theta = {theta}"), &mut failures);
        let closed = end.phase_probe_report(theta);
        max_difference = max_difference
            .max((closed.w_tpm - r.w_tpm).abs())
            .max((closed.delta_w_coh - r.delta_w_coh).abs());
        rows.push(OracleRow {
            theta,
            w_tpm_closed: closed.w_tpm,
            w_tpm_fock: r.w_tpm,
            delta_w_coh_closed: closed.delta_w_coh,
            delta_w_coh_fock: r.delta_w_coh,
        });
    }
    fail_on(failures)?;
    if !(max_difference <= ORACLE_TOL) {
        return Err(CliError::Numerical(format!(
            "Bogoliubov and Fock paths differ by {max_difference:e} at epsilon = {eps}"
        )));
    }
    Ok(OracleCheck { epsilon: eps, dim: cfg.dim, max_difference, tolerance: ORACLE_TOL, rows })
}

#[derive(Serialize)]
struct OscillatorSlopes {
    /// `max_θ |ΔW_coh|` versus ε.
    s_coh: FitEntry,
    /// `Q* - 1` versus ε.
    s_pop: FitEntry,
    oracle: OracleCheck,
}

pub fn oscillator_sweep(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let thetas = phase_grid(cfg.phase_points);
    let base = oscillator_point(cfg, 0.0, &thetas)?;
    let points = par_map(&cfg.epsilons, |e| oscillator_point(cfg, e, &thetas))?;
    let mut art = Artifacts::new();

    let mut heat = Vec::with_capacity(points.len() * thetas.len());
    for p in &points {
        for (t, v) in thetas.iter().zip(&p.phase_signal) {
            heat.push(vec![num(p.eps), num(*t), num(*v), num(p.end.coefficients.q_star - 1.0)]);
        }
    }
    art.csv(
        "oscillator_heatmap.csv",
        &["epsilon [1]", "theta [rad]", "delta_w_coh/omega_f [1]", "q_star_minus_one [1]"],
        &heat,
    )?;

    let base_pop = base.end.coefficients.q_star - 1.0;
    let band_names: Vec<String> = (-MAX_BAND..=MAX_BAND).map(|d| format!("band_{d:+} [1]")).collect();
    let mut header = vec![
        "epsilon [1]",
        "abs_nu [1]",
        "q_star_minus_one [1]",
        "abs_c [1]",
        "max_abs_delta_w_coh [energy]",
        "max_abs_delta_w_coh/omega_f [1]",
    ];
    header.extend(band_names.iter().map(String::as_str));
    header.extend(["coherent_flag", "population_flag"]);
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let c = &p.end.coefficients;
            let mut row = vec![
                num(p.eps),
                num(p.end.pair.nu.norm()),
                num(c.q_star - 1.0),
                num(c.c.norm()),
                num(p.max_abs_signal),
                num(p.max_abs_signal / c.omega_f),
            ];
            row.extend((-MAX_BAND..=MAX_BAND).map(|d| num(band_of(&p.bands, d))));
            row.push(flag(p.eps, p.max_abs_signal, base.max_abs_signal).into());
            row.push(flag(p.eps, c.q_star - 1.0, base_pop).into());
            row
        })
        .collect();
    art.csv("oscillator_sweep.csv", &header, &rows)?;

    let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let coh: Vec<f64> = points.iter().map(|p| p.max_abs_signal).collect();
    let pop: Vec<f64> = points.iter().map(|p| p.end.coefficients.q_star - 1.0).collect();
    let slopes = OscillatorSlopes {
        s_coh: FitEntry::new(&eps, &coh, base.max_abs_signal),
        s_pop: FitEntry::new(&eps, &pop, base_pop),
        oracle: oscillator_oracle(cfg, cfg.fingerprint_epsilon)?,
    };
    art.json("oscillator_slopes.json", cfg, &slopes)?;

    let fingerprints = vec![oscillator_fingerprint(cfg, 0.0)?, oscillator_fingerprint(cfg, cfg.fingerprint_epsilon)?];
    art.json("oscillator_fingerprints.json", cfg, &serde_json::json!({ "fingerprints": fingerprints }))?;

    if cfg.svg {
        let svg = loglog_plot(
            "Oscillator error scaling",
            "epsilon",
            "signal",
            &[
                Series { label: "max |dW_coh|", points: eps.iter().copied().zip(coh).collect() },
                Series { label: "Q* - 1", points: eps.iter().copied().zip(pop).collect() },
            ],
        );
        art.raw("oscillator_scaling.svg", svg.into_bytes());
    }
    Ok(art)
}

// --------------------------------------------------------------------- qubit

struct QubitPoint {
    eps: f64,
    end: QubitEndpoint,
    witnesses: PhaseWitnesses,
    chi_gap: Vec<(f64, f64)>,
}

impl QubitPoint {
    fn chi_gap_max(&self) -> f64 {
        self.chi_gap.iter().fold(0.0, |m, p| m.max(p.1))
    }
}

fn qubit_endpoint(cfg: &RunConfig, kind: ErrorKind, eps: f64) -> Result<QubitEndpoint, CliError> {
    Ok(QubitEndpoint::compute(&spec(&cfg.qubit, kind, eps)?, cfg.steps)?)
}

fn qubit_point(cfg: &RunConfig, eps: f64) -> Result<QubitPoint, CliError> {
    let spec = spec(&cfg.qubit, cfg.error_kind, eps)?;
    let end = QubitEndpoint::compute(&spec, cfg.steps)?;
    let witnesses = phase_swept_witnesses(&end.unitary, &spec, &phase_grid(cfg.phase_points))?;
    let rho = end.probe(end.bloch.optimal_phase())?;
    let chi_gap = chi_gap_profile(&end.unitary, &spec, &rho, &u_grid(cfg.u_points, cfg.u_max))?;
    qubit_consistency(&end, &format!("qubit epsilon = {eps}"))?;
    Ok(QubitPoint { eps, end, witnesses, chi_gap })
}

/// Moment identities and KD trace/marginal identities over a set of
/// equatorial probes.
fn qubit_consistency(end: &QubitEndpoint, label: &str) -> Result<(), CliError> {
    let eval = end.kd_evaluator()?;
    let mut failures = Vec::new();
    let mut phases = phase_grid(CHECK_PHASES);
    phases.push(end.bloch.optimal_phase());
    for phi in phases {
        let rho = end.probe(phi)?;
        let here = format!("{label}, phase {phi}");
        let r = endpoint_means(&end.unitary, &end.h0_initial, &end.h0_final, &rho)?;
        report_failures(&r, &here, &mut failures);
        let q = eval.weights(&rho)?;
        if !((q.total() - 1.0).norm() <= KD_TOL) {
            failures.push(format!("{here}: KD weights sum to {}", q.total()));
        }
        let pops = end.initial.in_eigenbasis(rho.matrix())?;
        if q.initial_marginals().iter().enumerate().any(|(n, m)| !((m - pops[(n, n)]).norm() <= KD_TOL)) {
            failures.push(format!("{here}: KD initial marginal"));
        }
        let evolved = end.unitary.evolve(&rho)?;
        let fin = end.final_spec.in_eigenbasis(evolved.matrix())?;
        if q.final_marginals().iter().enumerate().any(|(m, x)| !((x - fin[(m, m)]).norm() <= KD_TOL)) {
            failures.push(format!("{here}: KD final marginal"));
        }
    }
    fail_on(failures)
}

#[derive(Serialize)]
struct QubitFingerprint {
    epsilon: f64,
    bloch: BlochDecomposition,
    p_transition: f64,
    witnesses: PhaseWitnesses,
}

fn qubit_fingerprint(cfg: &RunConfig, eps: f64) -> Result<QubitFingerprint, CliError> {
    let spec = spec(&cfg.qubit, cfg.error_kind, eps)?;
    let end = QubitEndpoint::compute(&spec, cfg.steps)?;
    let witnesses = phase_swept_witnesses(&end.unitary, &spec, &phase_grid(cfg.phase_points))?;
    Ok(QubitFingerprint { epsilon: eps, bloch: end.bloch, p_transition: end.p_transition, witnesses })
}

#[derive(Serialize)]
struct QubitSlopes {
    /// `|h_⊥|/2` versus ε.
    s_coh: FitEntry,
    /// `P_transition` versus ε.
    s_pop: FitEntry,
    s_d_kd: FitEntry,
    s_n_mh: FitEntry,
    s_im_sum: FitEntry,
    /// `A` in `|h_⊥|/2 ≈ A ε`.
    a_coeff: Option<f64>,
    /// `B` in `P_transition ≈ B ε²`.
    b_coeff: Option<f64>,
}

pub fn qubit_sweep(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let base = qubit_point(cfg, 0.0)?;
    let points = par_map(&cfg.epsilons, |e| qubit_point(cfg, e))?;
    let mut art = Artifacts::new();

    let bw = &base.witnesses;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let w = &p.witnesses;
            vec![
                num(p.eps),
                num(p.end.bloch.half_h_perp()),
                num(p.end.p_transition),
                num(w.d_kd_max()),
                num(w.n_mh_max()),
                num(w.im_sum_max()),
                num(w.n_mh.kd.min_real()),
                num(p.end.bloch.optimal_phase()),
                num(p.chi_gap_max()),
                flag(p.eps, p.end.bloch.half_h_perp(), base.end.bloch.half_h_perp()).into(),
                flag(p.eps, p.end.p_transition, base.end.p_transition).into(),
                flag(p.eps, w.d_kd_max(), bw.d_kd_max()).into(),
                flag(p.eps, w.n_mh_max(), bw.n_mh_max()).into(),
            ]
        })
        .collect();
    art.csv(
        "qubit_sweep.csv",
        &[
            "epsilon [1]",
            "half_h_perp [energy]",
            "p_transition [1]",
            "d_kd_max [1]",
            "n_mh_max [1]",
            "im_sum_max [1]",
            "min_re_q_at_n_mh_argmax [1]",
            "optimal_phase [rad]",
            "chi_gap_max [1]",
            "coherent_flag",
            "population_flag",
            "d_kd_flag",
            "n_mh_flag",
        ],
        &rows,
    )?;

    let gap_rows: Vec<Vec<String>> = points
        .iter()
        .flat_map(|p| p.chi_gap.iter().map(move |&(u, g)| vec![num(p.eps), num(u), num(g)]))
        .collect();
    art.csv("qubit_chi_gap.csv", &["epsilon [1]", "u [1/energy]", "chi_gap [1]"], &gap_rows)?;

    let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let series = |f: &dyn Fn(&QubitPoint) -> f64| -> Vec<f64> { points.iter().map(f).collect() };
    let coh = series(&|p| p.end.bloch.half_h_perp());
    let pop = series(&|p| p.end.p_transition);
    let (a_coeff, b_coeff) = signal_coefficients(&eps, &coh, &pop);
    let slopes = QubitSlopes {
        s_coh: FitEntry::new(&eps, &coh, base.end.bloch.half_h_perp()),
        s_pop: FitEntry::new(&eps, &pop, base.end.p_transition),
        s_d_kd: FitEntry::new(&eps, &series(&|p| p.witnesses.d_kd_max()), bw.d_kd_max()),
        s_n_mh: FitEntry::new(&eps, &series(&|p| p.witnesses.n_mh_max()), bw.n_mh_max()),
        s_im_sum: FitEntry::new(&eps, &series(&|p| p.witnesses.im_sum_max()), bw.im_sum_max()),
        a_coeff,
        b_coeff,
    };
    art.json("qubit_slopes.json", cfg, &slopes)?;

    let fingerprints = vec![
        QubitFingerprint {
            epsilon: 0.0,
            bloch: base.end.bloch,
            p_transition: base.end.p_transition,
            witnesses: base.witnesses.clone(),
        },
        qubit_fingerprint(cfg, cfg.fingerprint_epsilon)?,
    ];
    art.json("qubit_fingerprints.json", cfg, &serde_json::json!({ "fingerprints": fingerprints }))?;

    if cfg.svg {
        let pts = |v: &[f64]| eps.iter().copied().zip(v.iter().copied()).collect();
        let svg = loglog_plot(
            "Qubit error scaling",
            "epsilon",
            "signal",
            &[
                Series { label: "|h_perp|/2", points: pts(&coh) },
                Series { label: "P_transition", points: pts(&pop) },
                Series { label: "D_KD max", points: pts(&series(&|p| p.witnesses.d_kd_max())) },
                Series { label: "N_MH max", points: pts(&series(&|p| p.witnesses.n_mh_max())) },
            ],
        );
        art.raw("qubit_scaling.svg", svg.into_bytes());
    }
    Ok(art)
}

/// `A` and `B` over the positive amplitudes, when the signals allow a fit.
fn signal_coefficients(eps: &[f64], coh: &[f64], pop: &[f64]) -> (Option<f64>, Option<f64>) {
    let keep: Vec<usize> = (0..eps.len()).filter(|&i| eps[i] > 0.0).collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let e = pick(eps);
    (linear_coefficient(&e, &pick(coh)).ok(), power_coefficient(&e, &pick(pop), 2.0).ok())
}

// ---------------------------------------------------------------- robustness

#[derive(Serialize)]
struct RobustnessFits {
    waveform_s_coh: FitEntry,
    waveform_s_pop: FitEntry,
    /// Coefficients of the swept error model feeding the analytic ratio.
    a_coeff: Option<f64>,
    b_coeff: Option<f64>,
    /// Coherent signal is nonincreasing in `Γτ` at every ε.
    monotone_in_gamma_tau: bool,
    /// Largest `|coherent(Γ=0) - |h_⊥|/2|`.
    undephased_deviation: f64,
}

pub fn robustness(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let tau = cfg.qubit.tau();
    let eps = cfg.positive_epsilons();
    let ends = par_map(&eps, |e| qubit_endpoint(cfg, cfg.error_kind, e))?;
    let coh: Vec<f64> = ends.iter().map(|e| e.bloch.half_h_perp()).collect();
    let pop: Vec<f64> = ends.iter().map(|e| e.p_transition).collect();
    let (a_coeff, b_coeff) = signal_coefficients(&eps, &coh, &pop);

    let mut gammas = cfg.gamma_tau_values.clone();
    gammas.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    let mut monotone = true;
    let mut undephased_deviation = 0.0_f64;
    for (i, end) in ends.iter().enumerate() {
        let phi = end.bloch.optimal_phase();
        let mut previous = f64::INFINITY;
        for &gt in &gammas {
            let gamma = gt / tau;
            let coherent = TwoBranchModel::qubit(end, phi, gamma, tau)?.exact_delta();
            if gt == 0.0 {
                undephased_deviation = undephased_deviation.max((coherent - coh[i]).abs());
            }
            monotone &= coherent.abs() <= previous.abs() + IDENTITY_TOL;
            previous = coherent;
            let analytic = match (a_coeff, b_coeff) {
                (Some(a), Some(b)) => dephasing_ratio(a, b, eps[i], gamma, tau)?,
                _ => f64::NAN,
            };
            rows.push(vec![
                num(gt),
                num(eps[i]),
                num(coherent),
                num(end.p_transition),
                num(coherent / end.p_transition),
                num(analytic),
            ]);
        }
    }
    let mut art = Artifacts::new();
    art.csv(
        "robustness_dephasing.csv",
        &[
            "gamma_tau [1]",
            "epsilon [1]",
            "coherent [energy]",
            "population [1]",
            "ratio [energy]",
            "analytic_ratio [energy]",
        ],
        &rows,
    )?;

    let base = qubit_endpoint(cfg, ErrorKind::WaveformDistortion, 0.0)?;
    let wave = par_map(&cfg.epsilons, |e| qubit_endpoint(cfg, ErrorKind::WaveformDistortion, e))?;
    let w_coh: Vec<f64> = wave.iter().map(|e| e.bloch.half_h_perp()).collect();
    let w_pop: Vec<f64> = wave.iter().map(|e| e.p_transition).collect();
    let wave_rows: Vec<Vec<String>> = cfg
        .epsilons
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            vec![
                num(e),
                num(w_coh[i]),
                num(w_pop[i]),
                flag(e, w_coh[i], base.bloch.half_h_perp()).into(),
                flag(e, w_pop[i], base.p_transition).into(),
            ]
        })
        .collect();
    art.csv(
        "robustness_waveform.csv",
        &["epsilon [1]", "half_h_perp [energy]", "p_transition [1]", "coherent_flag", "population_flag"],
        &wave_rows,
    )?;

    let fits = RobustnessFits {
        waveform_s_coh: FitEntry::new(&cfg.epsilons, &w_coh, base.bloch.half_h_perp()),
        waveform_s_pop: FitEntry::new(&cfg.epsilons, &w_pop, base.p_transition),
        a_coeff,
        b_coeff,
        monotone_in_gamma_tau: monotone,
        undephased_deviation,
    };
    art.json("robustness_fits.json", cfg, &fits)?;
    Ok(art)
}

// --------------------------------------------------------------------- shots

#[derive(Serialize)]
struct MonteCarloChecks {
    /// `|mean - exact| / ensemble standard error`.
    mean_deviation_in_se: f64,
    /// Empirical variance over `Ω_f² / (2 n_br)`.
    variance_over_bound: f64,
}

#[derive(Serialize)]
struct ShotsReport {
    seed: u64,
    a_coeff: f64,
    omega_f_bound: f64,
    budgets: Vec<ShotBudget>,
    monte_carlo: ShotNoiseReport,
    monte_carlo_epsilon: f64,
    probe_phase: f64,
    checks: MonteCarloChecks,
}

pub fn shots(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let tau = cfg.qubit.tau();
    let eps = cfg.positive_epsilons();
    let ends = par_map(&eps, |e| qubit_endpoint(cfg, cfg.error_kind, e))?;
    let coh: Vec<f64> = ends.iter().map(|e| e.bloch.half_h_perp()).collect();
    let a_coeff = linear_coefficient(&eps, &coh).map_err(|e| {
        CliError::Usage(format!(
            "error model `{}` gives no coherent signal to budget for: {e}",
            cfg.error_kind.as_str()
        ))
    })?;

    let end = qubit_endpoint(cfg, cfg.error_kind, cfg.fingerprint_epsilon)?;
    let phase = end.bloch.optimal_phase();
    let model = TwoBranchModel::qubit(&end, phase, 0.0, tau)?;
    let omega_f_bound = model.omega_bound();

    let mut budgets = Vec::new();
    for &e in &eps {
        for &gt in &cfg.gamma_tau_values {
            for &r in &cfg.shots.r_values {
                budgets.push(shot_budget(&BudgetInputs {
                    r,
                    omega_f_bound,
                    a_coeff,
                    epsilon: e,
                    gamma_phi: gt / tau,
                    tau,
                })?);
            }
        }
    }

    let mc = shot_noise_monte_carlo(
        &model,
        &ShotNoiseConfig { n_br: cfg.shots.n_br, repetitions: cfg.shots.repetitions, seed: cfg.seed },
    )?;
    let checks = MonteCarloChecks {
        mean_deviation_in_se: (mc.estimate - mc.exact).abs() / mc.ensemble_standard_error,
        variance_over_bound: mc.empirical_variance / mc.bound_variance,
    };
    let report = ShotsReport {
        seed: cfg.seed,
        a_coeff,
        omega_f_bound,
        budgets,
        monte_carlo: mc,
        monte_carlo_epsilon: cfg.fingerprint_epsilon,
        probe_phase: phase,
        checks,
    };
    let mut art = Artifacts::new();
    art.json("shots.json", cfg, &report)?;
    Ok(art)
}

// --------------------------------------------------------------- fingerprint

pub fn fingerprint(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let e = cfg.fingerprint_epsilon;
    let body = serde_json::json!({
        "epsilon": e,
        "oscillator": oscillator_fingerprint(cfg, e)?,
        "qubit": qubit_fingerprint(cfg, e)?,
    });
    let mut art = Artifacts::new();
    art.json("fingerprint.json", cfg, &body)?;
    Ok(art)
}
