//! Endpoint work quasistatistics.
//!
//! Work is defined against the reference Hamiltonians `H_0(0)` and `H_0(τ)`.
//! For an implemented unitary `U` the final Hamiltonian is pulled back to the
//! initial frame, `H_H = U† H_0(τ) U`, and compared with `H_0(0)` either after
//! dephasing the initial state in the energy basis (two-point measurement) or
//! on the full coherent state. All indices over energies run over spectral
//! blocks, so degenerate spectra are handled blockwise.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::quantum_core::{
    dephase, dephase_operator, ensure_dim, hermitian_eigensystem, phase_from_eigen, pulled_back,
    trace, trace_product, CMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition,
    UnitaryMatrix,
};

/// First-moment comparison between the dephased and coherent branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    /// `Tr{[H_H - H_0(0)] Δ_0(ρ)}`.
    pub w_tpm: f64,
    /// `Tr{[H_H - H_0(0)] ρ}`.
    pub w_coh: f64,
    /// `w_coh - w_tpm`.
    pub delta_w_coh: f64,
    /// `Tr(H_off ρ_off)`, the same quantity from the off-diagonal sectors.
    pub delta_w_coh_sector: f64,
    /// `‖H_off‖_∞ ‖ρ_off‖_1`.
    pub bound: f64,
    /// `max_{m≠n} |(H_H)_mn| Σ_{m≠n} |ρ_mn|` in the initial eigenbasis.
    /// Only defined for a nondegenerate initial spectrum.
    pub bound_l1: Option<f64>,
}

pub fn endpoint_means(
    unitary: &UnitaryMatrix,
    h0_initial: &HermitianOperator,
    h0_final: &HermitianOperator,
    rho: &DensityMatrix,
) -> Result<EndpointReport> {
    let initial = hermitian_eigensystem(h0_initial);
    endpoint_means_in(unitary, &initial, h0_initial, h0_final, rho)
}

/// [`endpoint_means`] with a precomputed initial spectral decomposition.
pub fn endpoint_means_in(
    unitary: &UnitaryMatrix,
    initial: &SpectralDecomposition,
    h0_initial: &HermitianOperator,
    h0_final: &HermitianOperator,
    rho: &DensityMatrix,
) -> Result<EndpointReport> {
    ensure_dim(unitary.dim(), h0_initial.dim())?;
    ensure_dim(unitary.dim(), rho.dim())?;
    let h_h = pulled_back(unitary, h0_final)?;
    let work = h_h.sub(h0_initial)?;
    let rho_d = dephase(rho, initial)?;

    let w_tpm = trace_product(work.matrix(), rho_d.matrix()).re;
    let w_coh = trace_product(work.matrix(), rho.matrix()).re;

    let h_off = h_h.sub(&dephase_operator(&h_h, initial)?)?;
    let rho_off = HermitianOperator::from_rounded(rho.matrix() - rho_d.matrix());
    let sector = trace_product(h_off.matrix(), rho_off.matrix()).re;
    let bound = h_off.operator_norm() * rho_off.trace_norm();

    let bound_l1 = initial.is_nondegenerate().then(|| {
        let h = initial.in_eigenbasis(h_h.matrix()).expect("dimensions checked");
        let r = initial.in_eigenbasis(rho.matrix()).expect("dimensions checked");
        let n = h.nrows();
        let mut h_max = 0.0_f64;
        let mut r_sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    h_max = h_max.max(h[(i, j)].norm());
                    r_sum += r[(i, j)].norm();
                }
            }
        }
        h_max * r_sum
    });

    Ok(EndpointReport {
        w_tpm,
        w_coh,
        delta_w_coh: w_coh - w_tpm,
        delta_w_coh_sector: sector,
        bound,
        bound_l1,
    })
}

/// Endpoint characteristic functions `χ_ρ(u) = Tr[e^{iuH_H} e^{-iuH_0(0)} ρ]`
/// and their dephased counterparts for one protocol.
#[derive(Debug, Clone)]
pub struct CharacteristicFunction {
    initial: SpectralDecomposition,
    pulled_values: Vec<f64>,
    pulled_vectors: CMatrix,
}

impl CharacteristicFunction {
    pub fn new(
        unitary: &UnitaryMatrix,
        h0_initial: &HermitianOperator,
        h0_final: &HermitianOperator,
    ) -> Result<Self> {
        ensure_dim(unitary.dim(), h0_initial.dim())?;
        let h_h = pulled_back(unitary, h0_final)?;
        let eig = hermitian_eigensystem(&h_h);
        Ok(Self {
            initial: hermitian_eigensystem(h0_initial),
            pulled_values: eig.eigenvalues().to_vec(),
            pulled_vectors: eig.eigenvectors().clone(),
        })
    }

    fn kernel(&self, u: f64) -> CMatrix {
        let forward = phase_from_eigen(&self.pulled_values, &self.pulled_vectors, u);
        let back = phase_from_eigen(self.initial.eigenvalues(), self.initial.eigenvectors(), -u);
        forward.matrix() * back.matrix()
    }

    pub fn eval(&self, rho: &DensityMatrix, u: f64) -> Result<Complex64> {
        ensure_dim(self.initial.dim(), rho.dim())?;
        if u == 0.0 {
            // Normalization of ρ.
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(trace_product(&self.kernel(u), rho.matrix()))
    }

    /// `(χ_ρ(u), χ_Δρ(u))`.
    pub fn eval_pair(&self, rho: &DensityMatrix, u: f64) -> Result<(Complex64, Complex64)> {
        ensure_dim(self.initial.dim(), rho.dim())?;
        if u == 0.0 {
            let one = Complex64::new(1.0, 0.0);
            return Ok((one, one));
        }
        let k = self.kernel(u);
        let rho_d = dephase(rho, &self.initial)?;
        Ok((trace_product(&k, rho.matrix()), trace_product(&k, rho_d.matrix())))
    }

    /// `|χ_ρ(u) - χ_Δρ(u)|`.
    pub fn gap(&self, rho: &DensityMatrix, u: f64) -> Result<f64> {
        let (a, b) = self.eval_pair(rho, u)?;
        Ok((a - b).norm())
    }
}

pub fn characteristic_function(
    unitary: &UnitaryMatrix,
    h0_initial: &HermitianOperator,
    h0_final: &HermitianOperator,
    rho: &DensityMatrix,
    u: f64,
) -> Result<Complex64> {
    CharacteristicFunction::new(unitary, h0_initial, h0_final)?.eval(rho, u)
}

/// Kirkwood–Dirac matrix `q_mn = Tr(Π_m^H Π_n^0 ρ)` with `m` labelling final
/// energy blocks and `n` initial ones.
#[derive(Debug, Clone, PartialEq)]
pub struct KdMatrix {
    q: DMatrix<Complex64>,
    final_energies: Vec<f64>,
    initial_energies: Vec<f64>,
}

impl KdMatrix {
    pub fn q(&self) -> &DMatrix<Complex64> {
        &self.q
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.q[(m, n)]
    }

    pub fn final_energies(&self) -> &[f64] {
        &self.final_energies
    }

    pub fn initial_energies(&self) -> &[f64] {
        &self.initial_energies
    }

    /// Margenau–Hill weights, the real part of the KD matrix.
    pub fn margenau_hill(&self) -> DMatrix<f64> {
        self.q.map(|z| z.re)
    }

    pub fn imaginary(&self) -> DMatrix<f64> {
        self.q.map(|z| z.im)
    }

    pub fn total(&self) -> Complex64 {
        self.q.iter().sum()
    }

    /// `Σ_n q_mn` for each final block `m`.
    pub fn final_marginals(&self) -> Vec<Complex64> {
        self.q.row_iter().map(|r| r.iter().sum()).collect()
    }

    /// `Σ_m q_mn` for each initial block `n`.
    pub fn initial_marginals(&self) -> Vec<Complex64> {
        self.q.column_iter().map(|c| c.iter().sum()).collect()
    }

    /// Largest imaginary magnitude among all weights.
    pub fn max_imaginary(&self) -> f64 {
        self.q.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()))
    }

    /// `Σ_mn |Im q_mn|`.
    pub fn imaginary_weight(&self) -> f64 {
        self.q.iter().map(|z| z.im.abs()).sum()
    }

    /// Smallest real part among all weights.
    pub fn min_real(&self) -> f64 {
        self.q.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> KdMatrixJson {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..self.q.nrows())
                .map(|m| (0..self.q.ncols()).map(|n| f(&self.q[(m, n)])).collect())
                .collect()
        };
        KdMatrixJson {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
            final_energies: self.final_energies.clone(),
            initial_energies: self.initial_energies.clone(),
        }
    }
}

/// Serialized KD matrix: paired real and imaginary parts (row = final block,
/// column = initial block) plus the block energies labelling each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub final_energies: Vec<f64>,
    pub initial_energies: Vec<f64>,
}

impl Serialize for KdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Precomputed projector families for repeated KD evaluations of one protocol.
#[derive(Debug, Clone)]
pub struct KdEvaluator {
    initial: SpectralDecomposition,
    initial_projectors: Vec<CMatrix>,
    pulled_final: Vec<CMatrix>,
    final_energies: Vec<f64>,
}

impl KdEvaluator {
    pub fn new(
        unitary: &UnitaryMatrix,
        initial: &SpectralDecomposition,
        final_spec: &SpectralDecomposition,
    ) -> Result<Self> {
        ensure_dim(unitary.dim(), initial.dim())?;
        ensure_dim(unitary.dim(), final_spec.dim())?;
        let pulled_final = final_spec
            .blocks()
            .iter()
            .map(|b| pulled_back(unitary, &b.projector).map(HermitianOperator::into_matrix))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial: initial.clone(),
            initial_projectors: initial
                .blocks()
                .iter()
                .map(|b| b.projector.matrix().clone())
                .collect(),
            pulled_final,
            final_energies: final_spec.block_energies(),
        })
    }

    pub fn initial(&self) -> &SpectralDecomposition {
        &self.initial
    }

    /// Pulled-back final projectors `Π_m^H = U† Π_m^τ U`.
    pub fn pulled_final_projectors(&self) -> &[CMatrix] {
        &self.pulled_final
    }

    pub fn weights(&self, rho: &DensityMatrix) -> Result<KdMatrix> {
        ensure_dim(self.initial.dim(), rho.dim())?;
        let projected: Vec<CMatrix> = self
            .initial_projectors
            .iter()
            .map(|p| p * rho.matrix())
            .collect();
        let q = DMatrix::from_fn(self.pulled_final.len(), projected.len(), |m, n| {
            trace_product(&self.pulled_final[m], &projected[n])
        });
        Ok(KdMatrix {
            q,
            final_energies: self.final_energies.clone(),
            initial_energies: self.initial.block_energies(),
        })
    }

    /// TPM weights `p_mn = Tr(Π_m^H Π_n^0 Δ_0(ρ))`.
    pub fn tpm(&self, rho: &DensityMatrix) -> Result<DMatrix<f64>> {
        let dephased = dephase(rho, &self.initial)?;
        Ok(self.weights(&dephased)?.margenau_hill())
    }

    /// Largest `‖[Π_m^H, Π_n^0]‖_max` over all block pairs.
    pub fn max_commutator(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in &self.pulled_final {
            for b in &self.initial_projectors {
                let c = a * b - b * a;
                worst = worst.max(crate::quantum_core::max_abs(&c));
            }
        }
        worst
    }
}

pub fn kd_weights(
    unitary: &UnitaryMatrix,
    initial: &SpectralDecomposition,
    final_spec: &SpectralDecomposition,
    rho: &DensityMatrix,
) -> Result<KdMatrix> {
    KdEvaluator::new(unitary, initial, final_spec)?.weights(rho)
}

pub fn tpm_weights(
    unitary: &UnitaryMatrix,
    initial: &SpectralDecomposition,
    final_spec: &SpectralDecomposition,
    rho: &DensityMatrix,
) -> Result<DMatrix<f64>> {
    KdEvaluator::new(unitary, initial, final_spec)?.tpm(rho)
}

/// `Σ_mn max(0, -Re q_mn)`.
pub fn mh_negativity(q: &KdMatrix) -> f64 {
    q.q.iter().map(|z| (-z.re).max(0.0)).sum()
}

/// `Σ_mn |q_mn - p_mn|`.
pub fn kd_tpm_deviation(q: &KdMatrix, p: &DMatrix<f64>) -> Result<f64> {
    ensure_dim(q.q.nrows(), p.nrows())?;
    ensure_dim(q.q.ncols(), p.ncols())?;
    Ok(q.q
        .iter()
        .zip(p.iter())
        .map(|(z, &x)| (z - Complex64::new(x, 0.0)).norm())
        .sum())
}

#[cfg(test)]
fn population(projector: &CMatrix, rho: &DensityMatrix) -> f64 {
    trace_product(projector, rho.matrix()).re
}

/// Sanity helper: `Tr ρ` as a complex number.
pub fn state_trace(rho: &DensityMatrix) -> Complex64 {
    trace(rho.matrix())
}
