//! Driven two-level benchmark.
//!
//! `H_H = U† H_0(τ) U` is written in the eigenbasis `(g, e)` of `H_0(0)` as
//! `½(h_0 I + h·σ)`. Its transverse part `h_⊥ = (h_x, h_y)` sets the coherent
//! endpoint signal of an equatorial probe, `ΔW_coh = ½ h_⊥·r_⊥`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::refine_phase_maximum;
pub use crate::analysis::phase_grid;
use crate::error::{Error, Result};
use crate::protocols::{ProtocolSpec, System};
use crate::quantum_core::{
    hermitian_eigensystem, propagate_unitary, pulled_back, CMatrix, DensityMatrix,
    HermitianOperator, SpectralDecomposition, UnitaryMatrix,
};
use crate::quasiprob::{kd_tpm_deviation, mh_negativity, CharacteristicFunction, KdEvaluator, KdMatrix};

/// Default number of probe phases on `[0, 2π)`.
pub const DEFAULT_PHASE_POINTS: usize = 721;
/// Default number of points of the characteristic-function grid.
pub const DEFAULT_U_POINTS: usize = 101;
/// Upper end of the default characteristic-function grid.
pub const DEFAULT_U_MAX: f64 = 10.0;

fn check_qubit(spec: &ProtocolSpec) -> Result<()> {
    match spec.system {
        System::Qubit { .. } => Ok(()),
        System::Oscillator { .. } => Err(Error::Unsupported(
            "qubit analysis of an oscillator protocol".into(),
        )),
    }
}

/// Implemented evolution `U(τ)` of a qubit protocol.
pub fn propagate(spec: &ProtocolSpec, steps: usize) -> Result<UnitaryMatrix> {
    check_qubit(spec)?;
    propagate_unitary(|t| spec.qubit_hamiltonian(t), 0.0, spec.tau(), steps)
}

/// `H_H = ½(identity_part I + h_parallel σ_z + h_perp·(σ_x, σ_y))` in the
/// initial eigenbasis ordered `(g, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDecomposition {
    pub h_parallel: f64,
    pub h_perp: [f64; 2],
    pub identity_part: f64,
}

impl BlochDecomposition {
    pub fn from_frame_matrix(m: &CMatrix) -> Self {
        Self {
            h_parallel: (m[(0, 0)] - m[(1, 1)]).re,
            h_perp: [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im],
            identity_part: (m[(0, 0)] + m[(1, 1)]).re,
        }
    }

    pub fn h_perp_norm(&self) -> f64 {
        self.h_perp[0].hypot(self.h_perp[1])
    }

    /// Largest equatorial signal `|h_⊥|/2`.
    pub fn half_h_perp(&self) -> f64 {
        0.5 * self.h_perp_norm()
    }

    /// `½ h_⊥·r_⊥` for `r_⊥ = (cos φ, sin φ)`.
    pub fn delta_w_coh(&self, phi: f64) -> f64 {
        0.5 * (self.h_perp[0] * phi.cos() + self.h_perp[1] * phi.sin())
    }

    /// Probe phase that maximizes [`Self::delta_w_coh`].
    pub fn optimal_phase(&self) -> f64 {
        self.h_perp[1].atan2(self.h_perp[0]).rem_euclid(2.0 * PI)
    }

    /// Frame matrix `½(h_0 I + h·σ)`.
    pub fn frame_matrix(&self) -> CMatrix {
        let half = 0.5;
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half * (self.identity_part + self.h_parallel), 0.0),
                Complex64::new(half * self.h_perp[0], -half * self.h_perp[1]),
                Complex64::new(half * self.h_perp[0], half * self.h_perp[1]),
                Complex64::new(half * (self.identity_part - self.h_parallel), 0.0),
            ],
        )
    }
}

pub fn bloch_endpoint(u: &UnitaryMatrix, spec: &ProtocolSpec) -> Result<BlochDecomposition> {
    check_qubit(spec)?;
    let initial = hermitian_eigensystem(&spec.qubit_initial_reference()?);
    let h_h = pulled_back(u, &spec.qubit_final_reference()?)?;
    Ok(BlochDecomposition::from_frame_matrix(&initial.in_eigenbasis(h_h.matrix())?))
}

/// `|⟨e_τ|U|g_0⟩|²`.
pub fn transition_probability(u: &UnitaryMatrix, spec: &ProtocolSpec) -> Result<f64> {
    check_qubit(spec)?;
    let g0 = hermitian_eigensystem(&spec.qubit_initial_reference()?).eigenvector(0);
    let e1 = hermitian_eigensystem(&spec.qubit_final_reference()?).eigenvector(1);
    let amp = e1.dotc(&(u.matrix() * g0));
    Ok(amp.norm_sqr().clamp(0.0, 1.0))
}

/// Equatorial probe `½(I + cos φ σ_x + sin φ σ_y)` in the initial eigenbasis,
/// returned in the computational basis.
pub fn equatorial_probe(initial: &SpectralDecomposition, phi: f64) -> Result<DensityMatrix> {
    equatorial_probe_dephased(initial, phi, 1.0)
}

/// Equatorial probe with its coherence scaled by `visibility`.
pub fn equatorial_probe_dephased(
    initial: &SpectralDecomposition,
    phi: f64,
    visibility: f64,
) -> Result<DensityMatrix> {
    if initial.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: initial.dim(),
        });
    }
    let coherence = Complex64::from_polar(0.5 * visibility, -phi);
    let frame = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(0.5, 0.0), coherence, coherence.conj(), Complex64::new(0.5, 0.0)],
    );
    let v = initial.eigenvectors();
    DensityMatrix::new(v * frame * v.adjoint())
}

/// Everything derived from one propagation of a qubit protocol.
#[derive(Debug, Clone)]
pub struct QubitEndpoint {
    pub unitary: UnitaryMatrix,
    pub h0_initial: HermitianOperator,
    pub h0_final: HermitianOperator,
    pub initial: SpectralDecomposition,
    pub final_spec: SpectralDecomposition,
    pub bloch: BlochDecomposition,
    pub p_transition: f64,
}

impl QubitEndpoint {
    pub fn compute(spec: &ProtocolSpec, steps: usize) -> Result<Self> {
        let unitary = propagate(spec, steps)?;
        Self::from_unitary(unitary, spec)
    }

    pub fn from_unitary(unitary: UnitaryMatrix, spec: &ProtocolSpec) -> Result<Self> {
        let h0_initial = spec.qubit_initial_reference()?;
        let h0_final = spec.qubit_final_reference()?;
        let bloch = bloch_endpoint(&unitary, spec)?;
        let p_transition = transition_probability(&unitary, spec)?;
        Ok(Self {
            initial: hermitian_eigensystem(&h0_initial),
            final_spec: hermitian_eigensystem(&h0_final),
            unitary,
            h0_initial,
            h0_final,
            bloch,
            p_transition,
        })
    }

    pub fn probe(&self, phi: f64) -> Result<DensityMatrix> {
        equatorial_probe(&self.initial, phi)
    }

    pub fn kd_evaluator(&self) -> Result<KdEvaluator> {
        KdEvaluator::new(&self.unitary, &self.initial, &self.final_spec)
    }
}

/// KD matrix recorded at a witness-maximizing probe phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fingerprint {
    pub phase: f64,
    pub value: f64,
    pub kd: KdMatrix,
}

/// Phase-maximized KD witnesses over equatorial probes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseWitnesses {
    /// `max_φ Σ|q - p|`.
    pub d_kd: Fingerprint,
    /// `max_φ Σ max(0, -Re q)`.
    pub n_mh: Fingerprint,
    /// `max_φ Σ|Im q|`.
    pub im_sum: Fingerprint,
}

impl PhaseWitnesses {
    pub fn d_kd_max(&self) -> f64 {
        self.d_kd.value
    }

    pub fn n_mh_max(&self) -> f64 {
        self.n_mh.value
    }

    pub fn im_sum_max(&self) -> f64 {
        self.im_sum.value
    }
}

/// Sweeps equatorial probes over `phase_grid` and maximizes the KD
/// deviation, MH negativity and imaginary weight. Each grid maximum is
/// polished by a local search between its grid neighbours.
pub fn phase_swept_witnesses(
    u: &UnitaryMatrix,
    spec: &ProtocolSpec,
    phase_grid: &[f64],
) -> Result<PhaseWitnesses> {
    if phase_grid.is_empty() {
        return Err(Error::InsufficientData("empty phase grid".into()));
    }
    let end = QubitEndpoint::from_unitary(u.clone(), spec)?;
    let eval = end.kd_evaluator()?;
    let at = |phi: f64| -> Result<(KdMatrix, f64)> {
        let rho = end.probe(phi)?;
        let q = eval.weights(&rho)?;
        let dev = kd_tpm_deviation(&q, &eval.tpm(&rho)?)?;
        Ok((q, dev))
    };

    let mut d_kd = Vec::with_capacity(phase_grid.len());
    let mut n_mh = Vec::with_capacity(phase_grid.len());
    let mut im = Vec::with_capacity(phase_grid.len());
    for &phi in phase_grid {
        let (q, dev) = at(phi)?;
        d_kd.push(dev);
        n_mh.push(mh_negativity(&q));
        im.push(q.imaginary_weight());
    }

    let fingerprint = |values: &[f64], witness: &dyn Fn(&KdMatrix, f64) -> f64| -> Result<Fingerprint> {
        let f = |phi: f64| at(phi).map(|(q, dev)| witness(&q, dev)).unwrap_or(f64::NEG_INFINITY);
        let (phase, value) = refine_phase_maximum(phase_grid, values, f)?;
        Ok(Fingerprint {
            phase,
            value,
            kd: at(phase)?.0,
        })
    };
    Ok(PhaseWitnesses {
        d_kd: fingerprint(&d_kd, &|_, dev| dev)?,
        n_mh: fingerprint(&n_mh, &|q, _| mh_negativity(q))?,
        im_sum: fingerprint(&im, &|q, _| q.imaginary_weight())?,
    })
}

/// `n` uniform points on `[0, u_max]`.
pub fn u_grid(n: usize, u_max: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| u_max * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn default_u_grid() -> Vec<f64> {
    u_grid(DEFAULT_U_POINTS, DEFAULT_U_MAX)
}

/// `|χ_ρ(u) - χ_Δρ(u)|` along `u_grid`.
pub fn chi_gap_profile(
    u: &UnitaryMatrix,
    spec: &ProtocolSpec,
    rho: &DensityMatrix,
    u_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_qubit(spec)?;
    let chi = CharacteristicFunction::new(
        u,
        &spec.qubit_initial_reference()?,
        &spec.qubit_final_reference()?,
    )?;
    u_grid
        .iter()
        .map(|&x| Ok((x, chi.gap(rho, x)?)))
        .collect()
}
