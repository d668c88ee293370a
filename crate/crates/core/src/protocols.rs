//! Drive schedules, counterdiabatic terms and injectable control errors.
//!
//! Two systems are supported: a parametric oscillator
//! `H_0 = p²/2 + ω(t)² x²/2` and a driven qubit `H_0 = ½[Δσx + λ(t)σz]`.
//! In both, the swept parameter follows a quintic ramp with vanishing slope at
//! the endpoints, and the exact shortcut adds the transitionless-driving term.
//!
//! Error models perturb the implemented Hamiltonian, never the reference one:
//!
//! | kind                  | implemented Hamiltonian                         |
//! |-----------------------|-------------------------------------------------|
//! | `missing_cd`          | `H_0 + (1-ε) H_CD`                              |
//! | `transverse_spurious` | `H_0 + H_CD + ε g(t) T` with `T` off-axis       |
//! | `commuting_phase`     | `(1 + ε g(t)) H_0 + H_CD`                       |
//! | `waveform_distortion` | `H_0` with a bumped parameter, CD left nominal  |
//!
//! where `g(t) = τ ds/dt` is a smooth bump vanishing at both endpoints.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum_core::{CMatrix, HermitianOperator};

/// Relative slack allowed on the protocol window before a time is rejected.
const TIME_SLACK: f64 = 1e-12;
/// Grid used to check positivity of the oscillator frequency.
const POSITIVITY_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    #[default]
    Quintic,
}

/// Smooth interpolation of one parameter between two endpoint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub tau: f64,
    pub kind: RampKind,
    pub start: f64,
    pub end: f64,
}

impl RampSchedule {
    pub fn quintic(tau: f64, start: f64, end: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("duration must be positive, got {tau}")));
        }
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidParameter("ramp endpoints must be finite".into()));
        }
        Ok(Self {
            tau,
            kind: RampKind::Quintic,
            start,
            end,
        })
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = TIME_SLACK * self.tau;
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(Error::TimeOutOfRange { t, tau: self.tau });
        }
        Ok(t.clamp(0.0, self.tau))
    }

    /// Normalized progress `s(t)` and its time derivative.
    pub fn progress(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.check_time(t)?;
        let x = t / self.tau;
        match self.kind {
            RampKind::Quintic => {
                let x2 = x * x;
                let s = x2 * x * (10.0 - 15.0 * x + 6.0 * x2);
                let s_dot = 30.0 * x2 * (1.0 - x) * (1.0 - x) / self.tau;
                Ok((s, s_dot))
            }
        }
    }

    /// Parameter value `start + (end - start) s(t)` and its derivative.
    pub fn value(&self, t: f64) -> Result<(f64, f64)> {
        let (s, s_dot) = self.progress(t)?;
        let span = self.end - self.start;
        Ok((self.start + span * s, span * s_dot))
    }

    /// Dimensionless endpoint-vanishing bump `τ ds/dt`.
    pub fn bump(&self, t: f64) -> Result<f64> {
        Ok(self.progress(t)?.1 * self.tau)
    }

    /// `sin²(πt/τ)` and its derivative, used by the waveform distortion.
    fn distortion_profile(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.check_time(t)?;
        let arg = PI * t / self.tau;
        Ok((arg.sin().powi(2), (2.0 * arg).sin() * PI / self.tau))
    }
}

/// `(s, ds/dt)` for a schedule at time `t`.
pub fn ramp_value(schedule: &RampSchedule, t: f64) -> Result<(f64, f64)> {
    schedule.progress(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    #[default]
    None,
    MissingCd,
    TransverseSpurious,
    CommutingPhase,
    WaveformDistortion,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::None,
        ErrorKind::MissingCd,
        ErrorKind::TransverseSpurious,
        ErrorKind::CommutingPhase,
        ErrorKind::WaveformDistortion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::None => "none",
            ErrorKind::MissingCd => "missing_cd",
            ErrorKind::TransverseSpurious => "transverse_spurious",
            ErrorKind::CommutingPhase => "commuting_phase",
            ErrorKind::WaveformDistortion => "waveform_distortion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    pub epsilon: f64,
}

impl ErrorModel {
    pub const NONE: ErrorModel = ErrorModel {
        kind: ErrorKind::None,
        epsilon: 0.0,
    };

    pub fn new(kind: ErrorKind, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "error amplitude must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { kind, epsilon })
    }

    fn amplitude(&self, kind: ErrorKind) -> f64 {
        if self.kind == kind {
            self.epsilon
        } else {
            0.0
        }
    }
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    Oscillator { omega_i: f64, omega_f: f64 },
    Qubit { delta: f64, lambda_i: f64, lambda_f: f64 },
}

/// Full description of one drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProtocolJson", into = "ProtocolJson")]
pub struct ProtocolSpec {
    pub system: System,
    pub ramp: RampSchedule,
    pub include_cd: bool,
    pub error: ErrorModel,
}

impl ProtocolSpec {
    pub fn oscillator(omega_i: f64, omega_f: f64, tau: f64) -> Result<Self> {
        let spec = Self {
            system: System::Oscillator { omega_i, omega_f },
            ramp: RampSchedule::quintic(tau, omega_i, omega_f)?,
            include_cd: true,
            error: ErrorModel::NONE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn qubit(delta: f64, lambda_i: f64, lambda_f: f64, tau: f64) -> Result<Self> {
        let spec = Self {
            system: System::Qubit {
                delta,
                lambda_i,
                lambda_f,
            },
            ramp: RampSchedule::quintic(tau, lambda_i, lambda_f)?,
            include_cd: true,
            error: ErrorModel::NONE,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Oscillator benchmark: `ω_i = 1`, `ω_f = 2`, `τ = π`.
    pub fn benchmark_oscillator() -> Self {
        Self::oscillator(1.0, 2.0, PI).expect("benchmark parameters are valid")
    }

    /// Qubit benchmark: `Δ = 1`, `λ_i = -4`, `λ_f = 4`, `τ = 6`.
    pub fn benchmark_qubit() -> Self {
        Self::qubit(1.0, -4.0, 4.0, 6.0).expect("benchmark parameters are valid")
    }

    pub fn with_error(mut self, kind: ErrorKind, epsilon: f64) -> Result<Self> {
        self.error = ErrorModel::new(kind, epsilon)?;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cd(mut self, include_cd: bool) -> Self {
        self.include_cd = include_cd;
        self
    }

    pub fn tau(&self) -> f64 {
        self.ramp.tau
    }

    pub fn validate(&self) -> Result<()> {
        match self.system {
            System::Oscillator { omega_i, omega_f } => {
                if !(omega_i > 0.0 && omega_f > 0.0) {
                    return Err(Error::InvalidParameter(
                        "oscillator endpoint frequencies must be positive".into(),
                    ));
                }
                for k in 0..POSITIVITY_GRID {
                    let t = self.tau() * k as f64 / (POSITIVITY_GRID - 1) as f64;
                    self.oscillator_terms(t)?;
                }
            }
            System::Qubit { delta, .. } => {
                if !delta.is_finite() || delta == 0.0 {
                    return Err(Error::InvalidParameter(
                        "qubit gap Δ must be finite and nonzero".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reference Hamiltonian `H_0(0)` for the qubit.
    pub fn qubit_initial_reference(&self) -> Result<HermitianOperator> {
        self.qubit_reference(0.0)
    }

    /// Reference Hamiltonian `H_0(τ)` for the qubit.
    pub fn qubit_final_reference(&self) -> Result<HermitianOperator> {
        self.qubit_reference(self.tau())
    }

    /// Nominal `H_0(t) = ½[Δσx + λ(t)σz]`, without control errors.
    pub fn qubit_reference(&self, t: f64) -> Result<HermitianOperator> {
        let System::Qubit { delta, .. } = self.system else {
            return Err(Error::Unsupported("qubit reference for an oscillator protocol".into()));
        };
        let (lambda, _) = self.ramp.value(t)?;
        Ok(bloch_operator([delta, 0.0, lambda]))
    }

    /// Implemented oscillator coefficients at time `t`.
    pub fn oscillator_terms(&self, t: f64) -> Result<OscillatorTerms> {
        oscillator_hamiltonian_terms(self, t)
    }

    /// Implemented qubit Hamiltonian at time `t`.
    pub fn qubit_hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        qubit_hamiltonian(self, t)
    }
}

/// Coefficients of the implemented oscillator Hamiltonian
/// `scale (p²/2 + ω² x²/2) + (cd_coefficient + squeeze_error)(xp + px)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorTerms {
    /// Frequency in the potential, including any waveform distortion.
    pub omega: f64,
    /// Time derivative of `omega`.
    pub omega_dot: f64,
    /// Counterdiabatic coefficient. Always built from the nominal schedule.
    pub cd_coefficient: f64,
    /// Spurious squeezing coefficient from `transverse_spurious`.
    pub squeeze_error: f64,
    /// Overall factor on `H_0` from `commuting_phase`.
    pub energy_scale: f64,
}

impl OscillatorTerms {
    /// Total coefficient multiplying `xp + px`.
    pub fn dilation(&self) -> f64 {
        self.cd_coefficient + self.squeeze_error
    }
}

pub fn oscillator_hamiltonian_terms(spec: &ProtocolSpec, t: f64) -> Result<OscillatorTerms> {
    let System::Oscillator { omega_i, omega_f } = spec.system else {
        return Err(Error::Unsupported("oscillator terms for a qubit protocol".into()));
    };
    let (omega_nominal, omega_dot_nominal) = spec.ramp.value(t)?;
    if !(omega_nominal > 0.0) {
        return Err(Error::NonpositiveFrequency {
            omega: omega_nominal,
            t,
        });
    }
    let err = &spec.error;

    let cd_exact = -omega_dot_nominal / (4.0 * omega_nominal);
    let cd_coefficient = if spec.include_cd {
        cd_exact * (1.0 - err.amplitude(ErrorKind::MissingCd))
    } else {
        0.0
    };

    let (bump_shape, bump_slope) = spec.ramp.distortion_profile(t)?;
    let distortion = err.amplitude(ErrorKind::WaveformDistortion) * (omega_f - omega_i);
    let omega = omega_nominal + distortion * bump_shape;
    let omega_dot = omega_dot_nominal + distortion * bump_slope;
    if !(omega > 0.0) {
        return Err(Error::NonpositiveFrequency { omega, t });
    }

    let g = spec.ramp.bump(t)?;
    Ok(OscillatorTerms {
        omega,
        omega_dot,
        cd_coefficient,
        squeeze_error: 0.25 * err.amplitude(ErrorKind::TransverseSpurious) * g,
        energy_scale: 1.0 + err.amplitude(ErrorKind::CommutingPhase) * g,
    })
}

/// `½ b·σ`.
pub fn bloch_operator(b: [f64; 3]) -> HermitianOperator {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 * b[2], 0.0),
            Complex64::new(0.5 * b[0], -0.5 * b[1]),
            Complex64::new(0.5 * b[0], 0.5 * b[1]),
            Complex64::new(-0.5 * b[2], 0.0),
        ],
    );
    HermitianOperator::new(m).expect("Bloch operators are Hermitian")
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Counterdiabatic Bloch field `(B × Ḃ)/|B|²` of the nominal qubit schedule.
pub fn qubit_cd_field(spec: &ProtocolSpec, t: f64) -> Result<[f64; 3]> {
    let System::Qubit { delta, .. } = spec.system else {
        return Err(Error::Unsupported("qubit CD field for an oscillator protocol".into()));
    };
    let (lambda, lambda_dot) = spec.ramp.value(t)?;
    let b = [delta, 0.0, lambda];
    let b_dot = [0.0, 0.0, lambda_dot];
    let norm2 = delta * delta + lambda * lambda;
    let c = cross(b, b_dot);
    Ok([c[0] / norm2, c[1] / norm2, c[2] / norm2])
}

/// Total Bloch field `b` of the implemented qubit Hamiltonian `½ b·σ`.
pub fn qubit_field(spec: &ProtocolSpec, t: f64) -> Result<[f64; 3]> {
    let System::Qubit {
        delta,
        lambda_i,
        lambda_f,
    } = spec.system
    else {
        return Err(Error::Unsupported("qubit field for an oscillator protocol".into()));
    };
    let err = &spec.error;
    let (lambda_nominal, _) = spec.ramp.value(t)?;
    let (bump_shape, _) = spec.ramp.distortion_profile(t)?;
    let lambda = lambda_nominal
        + err.amplitude(ErrorKind::WaveformDistortion) * (lambda_f - lambda_i) * bump_shape;
    let g = spec.ramp.bump(t)?;

    let scale = 1.0 + err.amplitude(ErrorKind::CommutingPhase) * g;
    let mut field = [scale * delta, 0.0, scale * lambda];

    if spec.include_cd {
        let cd = qubit_cd_field(spec, t)?;
        let weight = 1.0 - err.amplitude(ErrorKind::MissingCd);
        for (f, c) in field.iter_mut().zip(cd) {
            *f += weight * c;
        }
    }
    field[1] += err.amplitude(ErrorKind::TransverseSpurious) * g;
    Ok(field)
}

pub fn qubit_hamiltonian(spec: &ProtocolSpec, t: f64) -> Result<HermitianOperator> {
    Ok(bloch_operator(qubit_field(spec, t)?))
}

/// Flat JSON form of [`ProtocolSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolJson {
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_f: Option<f64>,
    pub tau: f64,
    #[serde(default)]
    pub ramp: RampKind,
    #[serde(default = "default_true")]
    pub include_cd: bool,
    #[serde(default)]
    pub error_kind: ErrorKind,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_true() -> bool {
    true
}

impl TryFrom<ProtocolJson> for ProtocolSpec {
    type Error = Error;

    fn try_from(j: ProtocolJson) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("missing `{name}` for {} protocol", j.system)))
        };
        let base = match j.system.as_str() {
            "oscillator" => {
                ProtocolSpec::oscillator(need(j.omega_i, "omega_i")?, need(j.omega_f, "omega_f")?, j.tau)?
            }
            "qubit" => ProtocolSpec::qubit(
                need(j.delta, "delta")?,
                need(j.lambda_i, "lambda_i")?,
                need(j.lambda_f, "lambda_f")?,
                j.tau,
            )?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown system `{other}` (expected oscillator or qubit)"
                )))
            }
        };
        base.with_cd(j.include_cd).with_error(j.error_kind, j.epsilon)
    }
}

impl From<ProtocolSpec> for ProtocolJson {
    fn from(p: ProtocolSpec) -> Self {
        let mut j = ProtocolJson {
            system: String::new(),
            omega_i: None,
            omega_f: None,
            delta: None,
            lambda_i: None,
            lambda_f: None,
            tau: p.ramp.tau,
            ramp: p.ramp.kind,
            include_cd: p.include_cd,
            error_kind: p.error.kind,
            epsilon: p.error.epsilon,
        };
        match p.system {
            System::Oscillator { omega_i, omega_f } => {
                j.system = "oscillator".into();
                j.omega_i = Some(omega_i);
                j.omega_f = Some(omega_f);
            }
            System::Qubit {
                delta,
                lambda_i,
                lambda_f,
            } => {
                j.system = "qubit".into();
                j.delta = Some(delta);
                j.lambda_i = Some(lambda_i);
                j.lambda_f = Some(lambda_f);
            }
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::max_abs;
    use proptest::prelude::*;

    #[test]
    fn quintic_endpoints_and_midpoint() {
        let r = RampSchedule::quintic(PI, 1.0, 2.0).unwrap();
        assert_eq!(r.progress(0.0).unwrap(), (0.0, 0.0));
        let (s, sd) = r.progress(PI).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && sd.abs() < 1e-12);
        let (s, _) = r.progress(PI / 2.0).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        assert!(r.progress(-0.1).is_err());
        assert!(r.progress(PI + 0.1).is_err());
        assert!(RampSchedule::quintic(0.0, 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn quintic_derivative_matches_central_difference(x in 0.05..0.95f64) {
            let r = RampSchedule::quintic(6.0, -4.0, 4.0).unwrap();
            let t = 6.0 * x;
            let (_, sd) = ramp_value(&r, t).unwrap();
            let err = |h: f64| {
                let fd = (ramp_value(&r, t + h).unwrap().0 - ramp_value(&r, t - h).unwrap().0) / (2.0 * h);
                (fd - sd).abs()
            };
            // Second-order truncation: error falls ~4x when h halves.
            let (e1, e2) = (err(1e-2), err(5e-3));
            prop_assert!(e1 < 1e-4);
            prop_assert!(e2 < e1 / 3.0 || e1 < 1e-10);
        }
    }

    #[test]
    fn oscillator_terms_at_start() {
        let spec = ProtocolSpec::benchmark_oscillator();
        let terms = spec.oscillator_terms(0.0).unwrap();
        assert_eq!(terms.omega, 1.0);
        assert_eq!(terms.omega_dot, 0.0);
        assert_eq!(terms.cd_coefficient, 0.0);
        assert_eq!(terms.energy_scale, 1.0);
    }

    #[test]
    fn missing_cd_scales_coefficient() {
        let exact = ProtocolSpec::benchmark_oscillator();
        let partial = exact.with_error(ErrorKind::MissingCd, 0.05).unwrap();
        let bare = exact.with_error(ErrorKind::MissingCd, 1.0).unwrap();
        for k in 0..=20 {
            let t = PI * k as f64 / 20.0;
            let e = exact.oscillator_terms(t).unwrap();
            let p = partial.oscillator_terms(t).unwrap();
            assert!((p.cd_coefficient - 0.95 * e.cd_coefficient).abs() < 1e-15);
            assert_eq!(bare.oscillator_terms(t).unwrap().cd_coefficient, 0.0);
            assert_eq!(exact.with_cd(false).oscillator_terms(t).unwrap().cd_coefficient, 0.0);
        }
        let mid = exact.oscillator_terms(PI / 2.0).unwrap();
        assert!((mid.cd_coefficient + mid.omega_dot / (4.0 * mid.omega)).abs() < 1e-15);
    }

    #[test]
    fn oscillator_rejects_nonpositive_frequency() {
        assert!(ProtocolSpec::oscillator(1.0, -0.5, 1.0).is_err());
        let spec = ProtocolSpec::benchmark_oscillator();
        let j = ProtocolJson::from(spec);
        assert!(ProtocolSpec::try_from(ProtocolJson { omega_f: Some(0.0), ..j }).is_err());
    }

    #[test]
    fn qubit_reference_at_start() {
        let spec = ProtocolSpec::benchmark_qubit();
        assert_eq!(qubit_field(&spec, 0.0).unwrap(), [1.0, 0.0, -4.0]);
        let h = spec.qubit_hamiltonian(0.0).unwrap();
        let m = h.matrix();
        assert!((m[(0, 0)].re + 2.0).abs() < 1e-15);
        assert!((m[(0, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn qubit_cd_field_by_cross_product() {
        let spec = ProtocolSpec::benchmark_qubit();
        assert_eq!(qubit_cd_field(&spec, 0.0).unwrap(), [0.0, 0.0, 0.0]);
        let end = qubit_cd_field(&spec, 6.0).unwrap();
        assert!(end.iter().all(|c| c.abs() < 1e-12));

        // At τ/2: B = (1, 0, 0), Ḃ = (0, 0, λ̇) with λ̇ = 8 · 30/16/6 = 2.5.
        let lambda_dot = 8.0 * 30.0 * 0.25 * 0.25 / 6.0;
        let mid = qubit_cd_field(&spec, 3.0).unwrap();
        assert!(mid[0].abs() < 1e-15 && mid[2].abs() < 1e-15);
        assert!((mid[1] + lambda_dot).abs() < 1e-12);

        // Off-center point, expanded by hand: B × Ḃ = (0, -Δλ̇, 0).
        let t = 1.3;
        let (lambda, ld) = spec.ramp.value(t).unwrap();
        let f = qubit_cd_field(&spec, t).unwrap();
        assert!((f[1] + ld / (1.0 + lambda * lambda)).abs() < 1e-14);
    }

    #[test]
    fn zero_amplitude_reproduces_exact_protocol() {
        let exact = ProtocolSpec::benchmark_qubit();
        let osc = ProtocolSpec::benchmark_oscillator();
        for kind in ErrorKind::ALL {
            let q = exact.with_error(kind, 0.0).unwrap();
            let o = osc.with_error(kind, 0.0).unwrap();
            for k in 0..=40 {
                let t = 6.0 * k as f64 / 40.0;
                assert_eq!(q.qubit_hamiltonian(t).unwrap(), exact.qubit_hamiltonian(t).unwrap());
                let to = PI * k as f64 / 40.0;
                assert_eq!(o.oscillator_terms(to).unwrap(), osc.oscillator_terms(to).unwrap());
            }
        }
    }

    #[test]
    fn commuting_phase_commutes_with_reference() {
        let spec = ProtocolSpec::benchmark_qubit()
            .with_error(ErrorKind::CommutingPhase, 0.3)
            .unwrap();
        let exact = ProtocolSpec::benchmark_qubit();
        for t in [0.7, 3.0, 4.4, 6.0] {
            let delta = spec
                .qubit_hamiltonian(t)
                .unwrap()
                .sub(&exact.qubit_hamiltonian(t).unwrap())
                .unwrap();
            let h0 = spec.qubit_reference(t).unwrap();
            let comm = delta.matrix() * h0.matrix() - h0.matrix() * delta.matrix();
            assert!(max_abs(&comm) < 1e-14);
        }
    }

    #[test]
    fn waveform_distortion_preserves_endpoints() {
        let spec = ProtocolSpec::benchmark_qubit()
            .with_error(ErrorKind::WaveformDistortion, 0.1)
            .unwrap();
        let exact = ProtocolSpec::benchmark_qubit();
        for t in [0.0, 6.0] {
            let a = qubit_field(&spec, t).unwrap();
            let b = qubit_field(&exact, t).unwrap();
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        let mid = qubit_field(&spec, 3.0).unwrap();
        assert!((mid[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn qubit_hamiltonian_is_hermitian_for_every_model() {
        for kind in ErrorKind::ALL {
            let spec = ProtocolSpec::benchmark_qubit().with_error(kind, 0.2).unwrap();
            for k in 0..=30 {
                let h = spec.qubit_hamiltonian(6.0 * k as f64 / 30.0).unwrap();
                assert!(HermitianOperator::new(h.into_matrix()).is_ok());
            }
        }
    }

    #[test]
    fn json_round_trip_and_keys() {
        let spec = ProtocolSpec::benchmark_qubit()
            .with_error(ErrorKind::MissingCd, 0.05)
            .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        for key in ["system", "delta", "lambda_i", "lambda_f", "tau", "ramp", "include_cd", "error_kind", "epsilon"] {
            assert!(text.contains(&format!("\"{key}\"")), "{text}");
        }
        assert!(!text.contains("omega_i"));
        let back: ProtocolSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);

        let minimal: ProtocolSpec =
            serde_json::from_str(r#"{"system":"oscillator","omega_i":1,"omega_f":2,"tau":3.0}"#).unwrap();
        assert!(minimal.include_cd);
        assert_eq!(minimal.error, ErrorModel::NONE);
        assert!(serde_json::from_str::<ProtocolSpec>(r#"{"system":"qubit","tau":1}"#).is_err());
        assert!(serde_json::from_str::<ProtocolSpec>(r#"{"system":"spin","tau":1}"#).is_err());
        assert!(serde_json::from_str::<ProtocolSpec>(
            r#"{"system":"qubit","delta":1,"lambda_i":0,"lambda_f":1,"tau":1,"epsilon":-1}"#
        )
        .is_err());
    }
}
