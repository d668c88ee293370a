//! Scaling fits, phase optimization, shot-noise estimates and dephasing
//! robustness.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::ProtocolSpec;
use crate::quantum_core::{DensityMatrix, SpectralDecomposition, UnitaryMatrix};
use crate::qubit::{equatorial_probe_dephased, QubitEndpoint};

/// Points must exceed this multiple of the baseline to enter a fit.
pub const FLOOR_FACTOR: f64 = 10.0;
/// Smallest number of points accepted by [`loglog_fit`].
pub const MIN_FIT_POINTS: usize = 4;

/// `n` uniform points on `[0, 2π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}] x {n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Least-squares fit `ln|signal| = intercept + slope ln ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in natural-log units.
    pub residual_rms: f64,
    pub n_points_used: usize,
    pub floor_excluded: usize,
}

fn check_epsilons(epsilons: &[f64], signals: &[f64]) -> Result<()> {
    if epsilons.len() != signals.len() {
        return Err(Error::DimensionMismatch {
            expected: epsilons.len(),
            found: signals.len(),
        });
    }
    if epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("amplitudes must be positive".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("amplitudes must be strictly increasing".into()));
    }
    Ok(())
}

/// Fits only points whose magnitude exceeds `FLOOR_FACTOR × baseline`, where
/// `baseline` is the zero-error value of the same pipeline.
pub fn loglog_fit(epsilons: &[f64], signals: &[f64], baseline: f64) -> Result<ScalingFit> {
    check_epsilons(epsilons, signals)?;
    let threshold = FLOOR_FACTOR * baseline.abs();
    let points: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(signals)
        .filter(|&(_, &s)| s.abs() > threshold && s.abs() > 0.0 && s.is_finite())
        .map(|(&e, &s)| (e.ln(), s.abs().ln()))
        .collect();
    let floor_excluded = epsilons.len() - points.len();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points above the floor, need {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        residual_rms,
        n_points_used: points.len(),
        floor_excluded,
    })
}

/// Coefficient `K` of `signal ≈ K ε^exponent` with the exponent held fixed,
/// as a geometric mean over all points.
pub fn power_coefficient(epsilons: &[f64], signals: &[f64], exponent: f64) -> Result<f64> {
    check_epsilons(epsilons, signals)?;
    if signals.is_empty() || signals.iter().any(|&s| !(s.abs() > 0.0)) {
        return Err(Error::InsufficientData(
            "coefficient fit needs nonzero signals".into(),
        ));
    }
    let mean = epsilons
        .iter()
        .zip(signals)
        .map(|(&e, &s)| s.abs().ln() - exponent * e.ln())
        .sum::<f64>()
        / signals.len() as f64;
    Ok(mean.exp())
}

/// `A` in `signal ≈ A ε`.
pub fn linear_coefficient(epsilons: &[f64], signals: &[f64]) -> Result<f64> {
    power_coefficient(epsilons, signals, 1.0)
}

/// Maximum of a phase response sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMaximum {
    pub phase: f64,
    pub value: f64,
    /// `|(2/N) Σ_k v_k e^{-iθ_k}|`.
    pub fourier_amplitude: f64,
}

pub fn phase_maximize(values: &[(f64, f64)]) -> Result<PhaseMaximum> {
    let (phase, value) = values
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (p, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((p, v)),
        })
        .ok_or_else(|| Error::InsufficientData("empty phase grid".into()))?;
    let sum: Complex64 = values
        .iter()
        .map(|&(p, v)| Complex64::from_polar(v, -p))
        .sum();
    Ok(PhaseMaximum {
        phase,
        value,
        fourier_amplitude: (2.0 / values.len() as f64 * sum).norm(),
    })
}

const GOLDEN_ITERATIONS: usize = 80;

/// Polishes the grid maximum of `values` (sampled from `f` on the uniform,
/// periodic `grid`) by golden-section search between its two neighbours.
pub fn refine_phase_maximum<F: Fn(f64) -> f64>(
    grid: &[f64],
    values: &[f64],
    f: F,
) -> Result<(f64, f64)> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::InsufficientData("empty or mismatched phase grid".into()));
    }
    let (k, &v_grid) = values
        .iter()
        .enumerate()
        .fold((0, &values[0]), |best, (i, v)| if *v > *best.1 { (i, v) } else { best });
    if grid.len() < 2 {
        return Ok((grid[0], v_grid));
    }
    let step = (grid[1] - grid[0]).abs();
    let (mut a, mut b) = (grid[k] - step, grid[k] + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    if fx > v_grid {
        Ok((x.rem_euclid(2.0 * PI), fx))
    } else {
        Ok((grid[k], v_grid))
    }
}

/// `S_coh/S_pop = (A/B) e^{-Γτ}/ε`.
pub fn dephasing_ratio(a_coeff: f64, b_coeff: f64, epsilon: f64, gamma_phi: f64, tau: f64) -> Result<f64> {
    if !(epsilon > 0.0) || b_coeff == 0.0 || !(gamma_phi >= 0.0) || !(tau >= 0.0) {
        return Err(Error::InvalidParameter(
            "dephasing ratio needs ε > 0, B ≠ 0, Γ ≥ 0 and τ ≥ 0".into(),
        ));
    }
    Ok(a_coeff / b_coeff * (-gamma_phi * tau).exp() / epsilon)
}

/// Coherent signal series attenuated by `e^{-Γτ}`.
pub fn attenuate(series: &[f64], gamma_phi: f64, tau: f64) -> Vec<f64> {
    let factor = (-gamma_phi * tau).exp();
    series.iter().map(|s| s * factor).collect()
}

/// Inputs of the two-branch shot budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    /// Target signal-to-noise ratio.
    pub r: f64,
    /// Outcome span `Ω_f`.
    pub omega_f_bound: f64,
    /// Linear coefficient `A` of the coherent signal.
    pub a_coeff: f64,
    pub epsilon: f64,
    pub gamma_phi: f64,
    pub tau: f64,
}

/// Shots per branch needed to resolve `A e^{-Γτ} ε` at signal-to-noise `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotBudget {
    pub n_br: u64,
    pub r: f64,
    pub omega_f_bound: f64,
    pub a_coeff: f64,
    pub epsilon: f64,
    pub gamma_phi: f64,
    pub tau: f64,
}

impl ShotBudget {
    /// `R²Ω_f² / (2A² e^{-2Γτ} ε²)` before rounding.
    pub fn bound(&self) -> f64 {
        budget_bound(&BudgetInputs {
            r: self.r,
            omega_f_bound: self.omega_f_bound,
            a_coeff: self.a_coeff,
            epsilon: self.epsilon,
            gamma_phi: self.gamma_phi,
            tau: self.tau,
        })
    }
}

fn budget_bound(x: &BudgetInputs) -> f64 {
    let signal = x.a_coeff * (-x.gamma_phi * x.tau).exp() * x.epsilon;
    (x.r * x.omega_f_bound).powi(2) / (2.0 * signal * signal)
}

pub fn shot_budget(inputs: &BudgetInputs) -> Result<ShotBudget> {
    let ok = inputs.r > 0.0
        && inputs.omega_f_bound > 0.0
        && inputs.a_coeff != 0.0
        && inputs.epsilon > 0.0
        && inputs.gamma_phi >= 0.0
        && inputs.tau >= 0.0;
    if !ok {
        return Err(Error::InvalidParameter(
            "budget needs R, Ω_f, ε > 0, A ≠ 0 and Γ, τ ≥ 0".into(),
        ));
    }
    let bound = budget_bound(inputs);
    if !bound.is_finite() || bound >= u64::MAX as f64 {
        return Err(Error::InvalidParameter(format!("shot budget overflows: {bound:e}")));
    }
    Ok(ShotBudget {
        n_br: (bound.ceil() as u64).max(1),
        r: inputs.r,
        omega_f_bound: inputs.omega_f_bound,
        a_coeff: inputs.a_coeff,
        epsilon: inputs.epsilon,
        gamma_phi: inputs.gamma_phi,
        tau: inputs.tau,
    })
}

/// Final-energy outcome distributions for the coherent and dephased
/// preparations of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranchModel {
    pub outcomes: Vec<f64>,
    pub p_coherent: Vec<f64>,
    pub p_dephased: Vec<f64>,
}

fn outcome_distribution(
    u: &UnitaryMatrix,
    final_spec: &SpectralDecomposition,
    rho: &DensityMatrix,
) -> Result<Vec<f64>> {
    let evolved = u.evolve(rho)?;
    let p: Vec<f64> = final_spec
        .blocks()
        .iter()
        .map(|b| crate::quantum_core::trace_product(b.projector.matrix(), evolved.matrix()).re.max(0.0))
        .collect();
    let total: f64 = p.iter().sum();
    Ok(p.into_iter().map(|x| x / total).collect())
}

impl TwoBranchModel {
    pub fn new(
        u: &UnitaryMatrix,
        initial: &SpectralDecomposition,
        final_spec: &SpectralDecomposition,
        rho: &DensityMatrix,
    ) -> Result<Self> {
        let dephased = crate::quantum_core::dephase(rho, initial)?;
        Ok(Self {
            outcomes: final_spec.block_energies(),
            p_coherent: outcome_distribution(u, final_spec, rho)?,
            p_dephased: outcome_distribution(u, final_spec, &dephased)?,
        })
    }

    /// Equatorial qubit probe with coherences reduced by `e^{-Γτ}`.
    pub fn qubit(end: &QubitEndpoint, probe_phase: f64, gamma_phi: f64, tau: f64) -> Result<Self> {
        let visibility = (-gamma_phi * tau).exp();
        let rho = equatorial_probe_dephased(&end.initial, probe_phase, visibility)?;
        Self::new(&end.unitary, &end.initial, &end.final_spec, &rho)
    }

    /// Span of the outcome values, `Ω_f`.
    pub fn omega_bound(&self) -> f64 {
        let max = self.outcomes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.outcomes.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Exact difference of the branch means.
    pub fn exact_delta(&self) -> f64 {
        self.outcomes
            .iter()
            .zip(self.p_coherent.iter().zip(&self.p_dephased))
            .map(|(e, (pc, pd))| e * (pc - pd))
            .sum()
    }

    /// One two-branch experiment with `n_br` shots per branch. Returns the
    /// estimate and its standard error from the within-branch sample
    /// variances.
    pub fn sample<R: Rng>(&self, n_br: u64, rng: &mut R) -> Result<(f64, f64)> {
        let (mc, vc) = self.sample_branch(&self.p_coherent, n_br, rng)?;
        let (md, vd) = self.sample_branch(&self.p_dephased, n_br, rng)?;
        Ok((mc - md, ((vc + vd) / n_br as f64).sqrt()))
    }

    fn sample_branch<R: Rng>(&self, probs: &[f64], n: u64, rng: &mut R) -> Result<(f64, f64)> {
        if n == 0 {
            return Err(Error::InvalidParameter("at least one shot per branch".into()));
        }
        let mut remaining = n;
        let mut mass = 1.0;
        let mut counts = Vec::with_capacity(probs.len());
        for (i, &p) in probs.iter().enumerate() {
            let c = if i + 1 == probs.len() || remaining == 0 {
                remaining
            } else {
                let q = (p / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, q)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(rng)
            };
            counts.push(c);
            remaining -= c;
            mass -= p;
        }
        let nf = n as f64;
        let mean = counts
            .iter()
            .zip(&self.outcomes)
            .map(|(&c, e)| c as f64 * e)
            .sum::<f64>()
            / nf;
        let var = if n > 1 {
            counts
                .iter()
                .zip(&self.outcomes)
                .map(|(&c, e)| c as f64 * (e - mean).powi(2))
                .sum::<f64>()
                / (nf - 1.0)
        } else {
            0.0
        };
        Ok((mean, var))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseConfig {
    /// Shots per branch.
    pub n_br: u64,
    pub repetitions: usize,
    pub seed: u64,
}

/// Repeated two-branch experiments. Repetition `k` draws from a ChaCha8
/// stream seeded with `seed` on stream `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseReport {
    pub seed: u64,
    pub n_br: u64,
    pub repetitions: usize,
    /// Exact `ΔW_coh` of the sampled state.
    pub exact: f64,
    /// Mean estimate over repetitions.
    pub estimate: f64,
    /// Standard error of [`Self::estimate`].
    pub ensemble_standard_error: f64,
    /// Sample variance of the estimator across repetitions.
    pub empirical_variance: f64,
    /// `Ω_f² / (2 n_br)`.
    pub bound_variance: f64,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl ShotNoiseReport {
    /// Fraction of repetitions whose estimate exceeds `k` standard errors.
    pub fn detection_rate(&self, k: f64) -> f64 {
        let hits = self
            .estimates
            .iter()
            .zip(&self.standard_errors)
            .filter(|(e, s)| **e > k * **s)
            .count();
        hits as f64 / self.repetitions as f64
    }
}

pub fn shot_noise_monte_carlo(model: &TwoBranchModel, config: &ShotNoiseConfig) -> Result<ShotNoiseReport> {
    if config.repetitions < 2 {
        return Err(Error::InsufficientData("need at least 2 repetitions".into()));
    }
    let mut estimates = Vec::with_capacity(config.repetitions);
    let mut standard_errors = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(rep as u64);
        let (e, se) = model.sample(config.n_br, &mut rng)?;
        estimates.push(e);
        standard_errors.push(se);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ShotNoiseReport {
        seed: config.seed,
        n_br: config.n_br,
        repetitions: config.repetitions,
        exact: model.exact_delta(),
        estimate: mean,
        ensemble_standard_error: (var / n).sqrt(),
        empirical_variance: var,
        bound_variance: model.omega_bound().powi(2) / (2.0 * config.n_br as f64),
        estimates,
        standard_errors,
    })
}

/// Shot-noise run for an equatorial probe of a qubit protocol.
pub fn qubit_shot_noise(
    spec: &ProtocolSpec,
    probe_phase: f64,
    gamma_phi: f64,
    steps: usize,
    config: &ShotNoiseConfig,
) -> Result<ShotNoiseReport> {
    let end = QubitEndpoint::compute(spec, steps)?;
    let model = TwoBranchModel::qubit(&end, probe_phase, gamma_phi, spec.tau())?;
    shot_noise_monte_carlo(&model, config)
}
