//! Parametric oscillator benchmark.
//!
//! The implemented Hamiltonian is quadratic, so the Heisenberg evolution of
//! `(x, p)` is a 2×2 real symplectic matrix. The final-frame ladder operator
//! then pulls back to `μa + νa†`, and every endpoint quantity follows in
//! closed form. An independent truncated Fock-space propagation cross-checks
//! these expressions without using the quadratic structure.

use std::f64::consts::SQRT_2;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{ProtocolSpec, System};
use crate::quantum_core::{propagate_unitary, CMatrix, CVector, DensityMatrix, HermitianOperator, UnitaryMatrix};
use crate::quasiprob::{endpoint_means, EndpointReport};

/// Default Fock truncation for the propagation oracle.
pub const DEFAULT_FOCK_DIM: usize = 40;
/// Extra levels used for the truncation-sensitivity check.
pub const TRUNCATION_PROBE: usize = 10;
/// Allowed change of any reported energy between `dim` and `dim + TRUNCATION_PROBE`.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Fock levels shown in operator fingerprints.
pub const DEFAULT_FINGERPRINT_DIM: usize = 10;
/// Largest `|Δn|` reported in band weights.
pub const MAX_BAND: i32 = 4;
/// `|μ|² - |ν|²` may deviate from 1 by this much before the integration is rejected.
pub const CONSTRAINT_TOL: f64 = 1e-6;
/// `⟨a†a + ½⟩` of the phase probe `(|0⟩ + e^{iθ}|2⟩)/√2`.
pub const PHASE_PROBE_OCCUPATION: f64 = 1.5;

fn endpoints(spec: &ProtocolSpec) -> Result<(f64, f64)> {
    match spec.system {
        System::Oscillator { omega_i, omega_f } => Ok((omega_i, omega_f)),
        System::Qubit { .. } => Err(Error::Unsupported(
            "oscillator analysis of a qubit protocol".into(),
        )),
    }
}

/// Generator of `d(x, p)/dt` for `scale (p²/2 + ω²x²/2) + κ(xp + px)`.
fn flow_matrix(spec: &ProtocolSpec, t: f64) -> Result<Matrix2<f64>> {
    let terms = spec.oscillator_terms(t)?;
    let k = 2.0 * terms.dilation();
    let s = terms.energy_scale;
    Ok(Matrix2::new(k, s, -s * terms.omega * terms.omega, -k))
}

/// Heisenberg fundamental solution `S` with `(x, p)(τ) = S (x, p)(0)`.
///
/// Integrated with fixed-step RK4; the result is rescaled to unit
/// determinant.
pub fn propagate_symplectic(spec: &ProtocolSpec, steps: usize) -> Result<Matrix2<f64>> {
    endpoints(spec)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let tau = spec.tau();
    let h = tau / steps as f64;
    let time_at = |k: usize| tau * (k as f64 / steps as f64);
    let mut s = Matrix2::identity();
    let mut m_start = flow_matrix(spec, 0.0)?;
    for k in 0..steps {
        let t = time_at(k);
        let m_mid = flow_matrix(spec, t + 0.5 * h)?;
        let m_end = flow_matrix(spec, time_at(k + 1))?;
        let k1 = m_start * s;
        let k2 = m_mid * (s + k1 * (0.5 * h));
        let k3 = m_mid * (s + k2 * (0.5 * h));
        let k4 = m_end * (s + k3 * h);
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        m_start = m_end;
    }
    let det = s.determinant();
    if !(det > 0.0) {
        return Err(Error::NumericalQuality(format!(
            "symplectic propagation lost orientation (det = {det})"
        )));
    }
    Ok(s / det.sqrt())
}

/// `U† b U = μ a + ν a†`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovPair {
    pub mu: Complex64,
    pub nu: Complex64,
}

impl BogoliubovPair {
    pub const IDENTITY: BogoliubovPair = BogoliubovPair {
        mu: Complex64::new(1.0, 0.0),
        nu: Complex64::new(0.0, 0.0),
    };

    /// `|μ|² - |ν|² - 1`.
    pub fn constraint_residual(&self) -> f64 {
        self.mu.norm_sqr() - self.nu.norm_sqr() - 1.0
    }
}

/// Expresses the final-frame annihilation operator
/// `b = (√ω_f x + i p/√ω_f)/√2`, evolved by `S`, through the initial-frame
/// ladder operators.
pub fn bogoliubov_from_symplectic(
    s: &Matrix2<f64>,
    omega_i: f64,
    omega_f: f64,
) -> Result<BogoliubovPair> {
    if !(omega_i > 0.0 && omega_f > 0.0) {
        return Err(Error::InvalidParameter("frequencies must be positive".into()));
    }
    let (ri, rf) = (omega_i.sqrt(), omega_f.sqrt());
    let i = Complex64::i();
    let alpha = rf * s[(0, 0)] + i * (s[(1, 0)] / rf);
    let beta = rf * s[(0, 1)] + i * (s[(1, 1)] / rf);
    let pair = BogoliubovPair {
        mu: 0.5 * (alpha / ri - i * beta * ri),
        nu: 0.5 * (alpha / ri + i * beta * ri),
    };
    let residual = pair.constraint_residual();
    if !(residual.abs() <= CONSTRAINT_TOL) {
        return Err(Error::NumericalQuality(format!(
            "Bogoliubov constraint violated by {residual:e}"
        )));
    }
    Ok(pair)
}

/// `H_H = ω_f [Q*(a†a + ½) + C a†² + C* a²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointCoefficients {
    pub q_star: f64,
    pub c: Complex64,
    pub omega_f: f64,
}

pub fn endpoint_coefficients(pair: &BogoliubovPair, omega_f: f64) -> EndpointCoefficients {
    EndpointCoefficients {
        q_star: 1.0 + 2.0 * pair.nu.norm_sqr(),
        c: pair.mu.conj() * pair.nu,
        omega_f,
    }
}

/// Full symplectic-path result for one protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorEndpoint {
    pub symplectic: Matrix2<f64>,
    pub pair: BogoliubovPair,
    pub coefficients: EndpointCoefficients,
    pub omega_i: f64,
}

impl OscillatorEndpoint {
    pub fn compute(spec: &ProtocolSpec, steps: usize) -> Result<Self> {
        let (omega_i, omega_f) = endpoints(spec)?;
        let symplectic = propagate_symplectic(spec, steps)?;
        let pair = bogoliubov_from_symplectic(&symplectic, omega_i, omega_f)?;
        Ok(Self {
            symplectic,
            pair,
            coefficients: endpoint_coefficients(&pair, omega_f),
            omega_i,
        })
    }

    pub fn phase_probe_report(&self, theta: f64) -> PhaseProbeValues {
        PhaseProbeValues {
            w_tpm: tpm_mean(&self.coefficients, self.omega_i, PHASE_PROBE_OCCUPATION),
            delta_w_coh: phase_probe_correction(&self.coefficients, theta),
        }
    }
}

/// Closed-form means for the phase probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseProbeValues {
    pub w_tpm: f64,
    pub delta_w_coh: f64,
}

/// `(ω_f Q* - ω_i)⟨a†a + ½⟩`.
pub fn tpm_mean(coeffs: &EndpointCoefficients, omega_i: f64, occupation_plus_half: f64) -> f64 {
    (coeffs.omega_f * coeffs.q_star - omega_i) * occupation_plus_half
}

/// `ω_f (C⟨a†²⟩ + C*⟨a²⟩) = 2ω_f Re(C*⟨a²⟩)`.
pub fn coherent_correction(coeffs: &EndpointCoefficients, a_squared: Complex64) -> f64 {
    2.0 * coeffs.omega_f * (coeffs.c.conj() * a_squared).re
}

/// `⟨a²⟩ = e^{iθ}/√2` for `(|0⟩ + e^{iθ}|2⟩)/√2`.
pub fn phase_probe_a_squared(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0 / SQRT_2, theta)
}

pub fn phase_probe_correction(coeffs: &EndpointCoefficients, theta: f64) -> f64 {
    coherent_correction(coeffs, phase_probe_a_squared(theta))
}

/// Amplitude `√2 ω_f |C|` of the phase-probe response over θ.
pub fn phase_probe_amplitude(coeffs: &EndpointCoefficients) -> f64 {
    SQRT_2 * coeffs.omega_f * coeffs.c.norm()
}

/// Correction for a coherent state `|α⟩`, where `⟨a²⟩ = α²`.
pub fn coherent_state_correction(coeffs: &EndpointCoefficients, alpha: Complex64) -> f64 {
    coherent_correction(coeffs, alpha * alpha)
}

/// Upper bound `2ω_f |α|² |C|` on the coherent-state correction.
pub fn coherent_state_bound(coeffs: &EndpointCoefficients, alpha: Complex64) -> f64 {
    2.0 * coeffs.omega_f * alpha.norm_sqr() * coeffs.c.norm()
}

/// Truncated ladder matrices in the Fock basis of `ω_i`.
///
/// Quadratic operators are assembled from their exact matrix elements rather
/// than from products of truncated `a` and `a†`, so they are the exact
/// projections onto the first `dim` levels.
#[derive(Debug, Clone)]
pub struct FockOperators {
    pub dim: usize,
    pub omega: f64,
    /// `a`.
    pub a: CMatrix,
    /// `a²`.
    pub a2: CMatrix,
    /// `a†a`.
    pub number: CMatrix,
}

impl FockOperators {
    pub fn new(dim: usize, omega: f64) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidParameter(format!(
                "Fock truncation must keep at least 4 levels, got {dim}"
            )));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter("frequency must be positive".into()));
        }
        let mut a = CMatrix::zeros(dim, dim);
        let mut a2 = CMatrix::zeros(dim, dim);
        let mut number = CMatrix::zeros(dim, dim);
        for n in 0..dim {
            let nf = n as f64;
            number[(n, n)] = Complex64::new(nf, 0.0);
            if n >= 1 {
                a[(n - 1, n)] = Complex64::new(nf.sqrt(), 0.0);
            }
            if n >= 2 {
                a2[(n - 2, n)] = Complex64::new((nf * (nf - 1.0)).sqrt(), 0.0);
            }
        }
        Ok(Self {
            dim,
            omega,
            a,
            a2,
            number,
        })
    }

    fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim, self.dim)
    }

    /// `x = (a + a†)/√(2ω)`.
    pub fn x(&self) -> CMatrix {
        (&self.a + self.a.adjoint()) / Complex64::new((2.0 * self.omega).sqrt(), 0.0)
    }

    /// `p = i√(ω/2)(a† - a)`.
    pub fn p(&self) -> CMatrix {
        (self.a.adjoint() - &self.a) * Complex64::new(0.0, (0.5 * self.omega).sqrt())
    }

    /// `x² = (a² + a†² + 2a†a + 1)/(2ω)`.
    pub fn x2(&self) -> CMatrix {
        (&self.a2 + self.a2.adjoint() + &self.number * Complex64::new(2.0, 0.0) + self.identity())
            / Complex64::new(2.0 * self.omega, 0.0)
    }

    /// `p² = -(ω/2)(a² + a†² - 2a†a - 1)`.
    pub fn p2(&self) -> CMatrix {
        (&self.a2 + self.a2.adjoint() - &self.number * Complex64::new(2.0, 0.0) - self.identity())
            * Complex64::new(-0.5 * self.omega, 0.0)
    }

    /// `xp + px = i(a†² - a²)`.
    pub fn dilation(&self) -> CMatrix {
        (self.a2.adjoint() - &self.a2) * Complex64::i()
    }

    /// `ω(a†a + ½)`.
    pub fn hamiltonian(&self) -> HermitianOperator {
        let diag: Vec<f64> = (0..self.dim).map(|n| self.omega * (n as f64 + 0.5)).collect();
        HermitianOperator::from_real_diagonal(&diag)
    }
}

/// `ω_f[Q*(a†a + ½) + C a†² + C* a²]` on the first `dim` levels.
pub fn fock_endpoint_hamiltonian(
    coeffs: &EndpointCoefficients,
    dim: usize,
) -> Result<HermitianOperator> {
    let ops = FockOperators::new(dim, 1.0)?;
    let half = CMatrix::identity(dim, dim) * Complex64::new(0.5, 0.0);
    let m = ((&ops.number + half) * Complex64::new(coeffs.q_star, 0.0)
        + ops.a2.adjoint() * coeffs.c
        + &ops.a2 * coeffs.c.conj())
        * Complex64::new(coeffs.omega_f, 0.0);
    HermitianOperator::new(m)
}

/// `Σ_n |M_{n+Δn, n}| / scale` for `Δn ∈ [-MAX_BAND, MAX_BAND]`.
pub fn band_weights(m: &CMatrix, scale: f64) -> Vec<(i32, f64)> {
    let dim = m.nrows() as i64;
    (-MAX_BAND..=MAX_BAND)
        .map(|dn| {
            let total: f64 = (0..dim)
                .filter_map(|n| {
                    let row = n + dn as i64;
                    (0..dim).contains(&row).then(|| m[(row as usize, n as usize)].norm())
                })
                .sum();
            (dn, total / scale)
        })
        .collect()
}

/// Off-diagonal part of `H_H` in the Fock basis with its band weights.
#[derive(Debug, Clone)]
pub struct FockFingerprint {
    pub h_off: CMatrix,
    pub bands: Vec<(i32, f64)>,
}

impl FockFingerprint {
    pub fn band(&self, dn: i32) -> f64 {
        self.bands
            .iter()
            .find(|(d, _)| *d == dn)
            .map(|&(_, w)| w)
            .unwrap_or(0.0)
    }
}

pub fn fock_h_off(coeffs: &EndpointCoefficients, dim: usize) -> Result<FockFingerprint> {
    let h = fock_endpoint_hamiltonian(coeffs, dim)?;
    let mut h_off = h.into_matrix();
    h_off.fill_diagonal(Complex64::new(0.0, 0.0));
    let bands = band_weights(&h_off, coeffs.omega_f);
    Ok(FockFingerprint { h_off, bands })
}

/// `(|0⟩ + e^{iθ}|2⟩)/√2` as Fock amplitudes.
pub fn phase_probe_amplitudes(theta: f64) -> Vec<Complex64> {
    vec![
        Complex64::new(1.0 / SQRT_2, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0 / SQRT_2, theta),
    ]
}

fn fock_state(amplitudes: &[Complex64], dim: usize) -> Result<DensityMatrix> {
    if amplitudes.len() > dim {
        return Err(Error::InvalidParameter(format!(
            "state has {} Fock amplitudes but the truncation keeps {dim}",
            amplitudes.len()
        )));
    }
    let psi = CVector::from_fn(dim, |n, _| amplitudes.get(n).copied().unwrap_or_default());
    DensityMatrix::from_pure(&psi)
}

/// Brute-force propagation of the oscillator in a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct FockPropagation {
    pub dim: usize,
    pub unitary: UnitaryMatrix,
    pub h0_initial: HermitianOperator,
    pub h0_final: HermitianOperator,
}

impl FockPropagation {
    pub fn new(spec: &ProtocolSpec, dim: usize, steps: usize) -> Result<Self> {
        let (omega_i, omega_f) = endpoints(spec)?;
        let ops = FockOperators::new(dim, omega_i)?;
        let kinetic = ops.p2() * Complex64::new(0.5, 0.0);
        let potential = ops.x2() * Complex64::new(0.5, 0.0);
        let dilation = ops.dilation();
        let unitary = propagate_unitary(
            |t| {
                let terms = spec.oscillator_terms(t)?;
                let s = terms.energy_scale;
                let m = &kinetic * Complex64::new(s, 0.0)
                    + &potential * Complex64::new(s * terms.omega * terms.omega, 0.0)
                    + &dilation * Complex64::new(terms.dilation(), 0.0);
                Ok(HermitianOperator::from_rounded(m))
            },
            0.0,
            spec.tau(),
            steps,
        )?;
        let h0_final = HermitianOperator::from_rounded(
            &kinetic + &potential * Complex64::new(omega_f * omega_f, 0.0),
        );
        Ok(Self {
            dim,
            unitary,
            h0_initial: ops.hamiltonian(),
            h0_final,
        })
    }

    pub fn report(&self, amplitudes: &[Complex64]) -> Result<EndpointReport> {
        let rho = fock_state(amplitudes, self.dim)?;
        endpoint_means(&self.unitary, &self.h0_initial, &self.h0_final, &rho)
    }
}

fn truncation_shift(a: &EndpointReport, b: &EndpointReport) -> f64 {
    (a.w_tpm - b.w_tpm)
        .abs()
        .max((a.w_coh - b.w_coh).abs())
        .max((a.delta_w_coh - b.delta_w_coh).abs())
}

/// Endpoint reports for several Fock-basis states, checked against a
/// propagation with `TRUNCATION_PROBE` more levels.
pub fn fock_propagation_reports(
    spec: &ProtocolSpec,
    dim: usize,
    steps: usize,
    states: &[Vec<Complex64>],
) -> Result<Vec<EndpointReport>> {
    let base = FockPropagation::new(spec, dim, steps)?;
    let wide = FockPropagation::new(spec, dim + TRUNCATION_PROBE, steps)?;
    states
        .iter()
        .map(|psi| {
            let r = base.report(psi)?;
            let shift = truncation_shift(&r, &wide.report(psi)?);
            if shift > TRUNCATION_TOL {
                return Err(Error::NumericalQuality(format!(
                    "Fock truncation {dim} is not converged: results shift by {shift:e} at {}",
                    dim + TRUNCATION_PROBE
                )));
            }
            Ok(r)
        })
        .collect()
}

/// Single-state form of [`fock_propagation_reports`].
pub fn fock_propagation_oracle(
    spec: &ProtocolSpec,
    dim: usize,
    steps: usize,
    amplitudes: &[Complex64],
) -> Result<EndpointReport> {
    let mut out = fock_propagation_reports(spec, dim, steps, &[amplitudes.to_vec()])?;
    Ok(out.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ErrorKind;
    use crate::quantum_core::{max_abs, DEFAULT_STEPS};
    use proptest::prelude::*;

    fn constant_frequency(omega: f64, tau: f64) -> ProtocolSpec {
        ProtocolSpec::oscillator(omega, omega, tau).unwrap()
    }

    fn missing_cd(eps: f64) -> ProtocolSpec {
        ProtocolSpec::benchmark_oscillator()
            .with_error(ErrorKind::MissingCd, eps)
            .unwrap()
    }

    #[test]
    fn constant_frequency_is_a_rotation() {
        let (w, tau) = (1.7, 2.3);
        let s = propagate_symplectic(&constant_frequency(w, tau), 4000).unwrap();
        let (c, sn) = ((w * tau).cos(), (w * tau).sin());
        let expected = Matrix2::new(c, sn / w, -w * sn, c);
        assert!((s - expected).abs().max() < 1e-12, "{s}");
    }

    #[test]
    fn sudden_quench_mode_matching() {
        let pair = bogoliubov_from_symplectic(&Matrix2::identity(), 1.0, 2.0).unwrap();
        // (ω_f ± ω_i)/(2√(ω_i ω_f))
        let mu = 3.0 / (2.0 * SQRT_2);
        let nu = 1.0 / (2.0 * SQRT_2);
        assert!((pair.mu - Complex64::new(mu, 0.0)).norm() < 1e-12);
        assert!((pair.nu - Complex64::new(nu, 0.0)).norm() < 1e-12);
        let coeffs = endpoint_coefficients(&pair, 2.0);
        assert!((coeffs.q_star - 1.25).abs() < 1e-12);
        assert!((coeffs.c.norm() - 0.375).abs() < 1e-12);
        assert!((tpm_mean(&coeffs, 1.0, 0.5) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_extraction() {
        let pair = bogoliubov_from_symplectic(&Matrix2::identity(), 1.3, 1.3).unwrap();
        assert!((pair.mu - BogoliubovPair::IDENTITY.mu).norm() < 1e-15);
        assert!(pair.nu.norm() < 1e-15);
        let coeffs = endpoint_coefficients(&pair, 1.3);
        assert_eq!(coeffs.q_star, 1.0);
        assert_eq!(coherent_correction(&coeffs, Complex64::new(0.4, 0.9)), 0.0);
    }

    #[test]
    fn constraint_violation_is_reported() {
        let s = Matrix2::new(1.1, 0.0, 0.0, 1.0);
        assert!(matches!(
            bogoliubov_from_symplectic(&s, 1.0, 2.0),
            Err(Error::NumericalQuality(_))
        ));
    }

    #[test]
    fn adiabatic_ground_state_work() {
        let coeffs = endpoint_coefficients(&BogoliubovPair::IDENTITY, 2.0);
        assert_eq!(tpm_mean(&coeffs, 1.0, 0.5), 0.5);
    }

    #[test]
    fn exact_shortcut_is_transitionless() {
        let spec = ProtocolSpec::benchmark_oscillator();
        let end = OscillatorEndpoint::compute(&spec, DEFAULT_STEPS).unwrap();
        assert!(end.pair.nu.norm() < 1e-7, "|ν| = {}", end.pair.nu.norm());
        assert!((end.symplectic.determinant() - 1.0).abs() < 1e-10);
        // Ground-state covariance diag(1/2ω, ω/2) is transported to the final one.
        let cov = |w: f64| Matrix2::new(0.5 / w, 0.0, 0.0, 0.5 * w);
        let moved = end.symplectic * cov(1.0) * end.symplectic.transpose();
        assert!((moved - cov(2.0)).abs().max() < 1e-7, "{moved}");
        let fp = fock_h_off(&end.coefficients, DEFAULT_FINGERPRINT_DIM).unwrap();
        assert!(fp.bands.iter().all(|&(_, w)| w < 1e-7));
    }

    #[test]
    fn bare_ramp_excites() {
        let spec = ProtocolSpec::benchmark_oscillator().with_cd(false);
        let end = OscillatorEndpoint::compute(&spec, DEFAULT_STEPS).unwrap();
        assert!(end.pair.nu.norm() > 1e-3);
        assert!(end.pair.constraint_residual().abs() < 1e-9);
    }

    #[test]
    fn band_structure_of_squeezing_terms() {
        let coeffs = EndpointCoefficients {
            q_star: 1.02,
            c: Complex64::new(0.03, -0.04),
            omega_f: 2.0,
        };
        let fp = fock_h_off(&coeffs, 8).unwrap();
        for n in 0..6 {
            let expected = coeffs.c * 2.0 * (((n + 1) * (n + 2)) as f64).sqrt();
            assert!((fp.h_off[(n + 2, n)] - expected).norm() < 1e-15);
        }
        for &(dn, w) in &fp.bands {
            if dn.abs() == 2 {
                assert!(w > 0.0);
            } else {
                assert_eq!(w, 0.0);
            }
        }
        let expected: f64 = (0..6).map(|n| 0.05 * (((n + 1) * (n + 2)) as f64).sqrt()).sum();
        assert!((fp.band(2) - expected).abs() < 1e-14);
        assert!(fock_h_off(&coeffs, 3).is_err());
    }

    #[test]
    fn ladder_quadratics_match_products_away_from_edge() {
        let ops = FockOperators::new(12, 1.4).unwrap();
        let x = ops.x();
        let p = ops.p();
        let block = |m: CMatrix| m.view((0, 0), (9, 9)).into_owned();
        assert!(max_abs(&(block(&x * &x) - block(ops.x2()))) < 1e-13);
        assert!(max_abs(&(block(&p * &p) - block(ops.p2()))) < 1e-13);
        assert!(max_abs(&(block(&x * &p + &p * &x) - block(ops.dilation()))) < 1e-13);
        let h = (ops.p2() + ops.x2() * Complex64::new(1.4 * 1.4, 0.0)) * Complex64::new(0.5, 0.0);
        assert!(max_abs(&(h - ops.hamiltonian().matrix())) < 1e-13);
    }

    #[test]
    fn phase_probe_means_from_fock_state() {
        let coeffs = EndpointCoefficients {
            q_star: 1.1,
            c: Complex64::new(0.2, 0.1),
            omega_f: 2.0,
        };
        let h = fock_endpoint_hamiltonian(&coeffs, 8).unwrap();
        let h0 = FockOperators::new(8, 1.0).unwrap().hamiltonian();
        let u = UnitaryMatrix::identity(8);
        for theta in [0.0, 0.7, 2.9, 5.1] {
            let rho = fock_state(&phase_probe_amplitudes(theta), 8).unwrap();
            let r = endpoint_means(&u, &h0, &h, &rho).unwrap();
            assert!((r.w_tpm - tpm_mean(&coeffs, 1.0, PHASE_PROBE_OCCUPATION)).abs() < 1e-13);
            assert!((r.delta_w_coh - phase_probe_correction(&coeffs, theta)).abs() < 1e-13);
        }
    }

    #[test]
    fn fock_oracle_agrees_with_bogoliubov_path() {
        let spec = missing_cd(0.1);
        let end = OscillatorEndpoint::compute(&spec, DEFAULT_STEPS).unwrap();
        let thetas = [0.0, 1.1, 2.5];
        let states: Vec<_> = thetas.iter().map(|&t| phase_probe_amplitudes(t)).collect();
        let reports = fock_propagation_reports(&spec, 30, 4000, &states).unwrap();
        for (theta, r) in thetas.iter().zip(reports) {
            let closed = end.phase_probe_report(*theta);
            assert!((r.w_tpm - closed.w_tpm).abs() < 1e-6);
            assert!((r.delta_w_coh - closed.delta_w_coh).abs() < 1e-6);
        }
    }

    #[test]
    fn unconverged_truncation_is_reported() {
        // A bare ramp at this speed excites far beyond 4 levels.
        let spec = ProtocolSpec::oscillator(1.0, 4.0, 0.5).unwrap().with_cd(false);
        let err = fock_propagation_oracle(&spec, 4, 400, &phase_probe_amplitudes(0.0));
        assert!(matches!(err, Err(Error::NumericalQuality(_))));
    }

    #[test]
    fn rejects_qubit_protocols() {
        let spec = ProtocolSpec::benchmark_qubit();
        assert!(matches!(propagate_symplectic(&spec, 10), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn determinant_is_one(eps in 0.0..0.3f64, kind in 0usize..5, steps in 200usize..800) {
            let spec = ProtocolSpec::benchmark_oscillator().with_error(ErrorKind::ALL[kind], eps).unwrap();
            let s = propagate_symplectic(&spec, steps).unwrap();
            prop_assert!((s.determinant() - 1.0).abs() < 1e-10);
            let pair = bogoliubov_from_symplectic(&s, 1.0, 2.0).unwrap();
            prop_assert!(pair.constraint_residual().abs() < 1e-9);
            let coeffs = endpoint_coefficients(&pair, 2.0);
            prop_assert!((coeffs.q_star - 1.0 - 2.0 * pair.nu.norm_sqr()).abs() < 1e-15);
            prop_assert!((coeffs.c.norm() - pair.mu.norm() * pair.nu.norm()).abs() < 1e-9);
        }

        #[test]
        fn coherent_state_bound_holds(re in -2.0..2.0f64, im in -2.0..2.0f64, cr in -0.5..0.5f64, ci in -0.5..0.5f64) {
            let coeffs = EndpointCoefficients { q_star: 1.0, c: Complex64::new(cr, ci), omega_f: 2.0 };
            let alpha = Complex64::new(re, im);
            prop_assert!(coherent_state_correction(&coeffs, alpha).abs() <= coherent_state_bound(&coeffs, alpha) + 1e-12);
            // Equality when arg(α²) = arg(C).
            let aligned = Complex64::from_polar(alpha.norm(), 0.5 * coeffs.c.arg());
            let v = coherent_state_correction(&coeffs, aligned);
            prop_assert!((v - coherent_state_bound(&coeffs, aligned)).abs() < 1e-12);
        }

        #[test]
        fn phase_response_has_a_single_harmonic(cr in -0.5..0.5f64, ci in -0.5..0.5f64) {
            let coeffs = EndpointCoefficients { q_star: 1.0, c: Complex64::new(cr, ci), omega_f: 2.0 };
            let grid = crate::analysis::phase_grid(64);
            let values: Vec<f64> = grid.iter().map(|&t| phase_probe_correction(&coeffs, t)).collect();
            let total: f64 = values.iter().map(|v| v * v).sum();
            prop_assume!(total > 1e-20);
            let harmonic = |k: f64| -> Complex64 {
                grid.iter().zip(&values).map(|(&t, &v)| Complex64::from_polar(v, -k * t)).sum::<Complex64>()
            };
            // Parseval: the ±1 components carry all the power.
            let first = 2.0 * harmonic(1.0).norm_sqr() / grid.len() as f64;
            prop_assert!(((total - first) / total).abs() < 1e-9);
        }
    }
}
