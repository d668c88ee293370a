//! First-order commutator expansion of the pulled-back endpoint Hamiltonian.
//!
//! An imperfect shortcut is modelled as `U_ε = U_STA exp(-iεK)`. With
//! `H_ad = U_STA† H_0(τ) U_STA` diagonal, the pulled-back Hamiltonian is
//! `exp(iεK) H_ad exp(-iεK) = H_ad + iε[K, H_ad] + O(ε²)`, so its off-diagonal
//! elements are linear in ε while transition probabilities start at ε².

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum_core::{
    ensure_dim, evolve_phase, max_off_diagonal, pulled_back, HermitianOperator,
};

/// Tolerance for accepting `H_ad` as diagonal.
pub const DIAGONAL_TOL: f64 = 1e-10;

/// Hermitian error generator `K` with its amplitude ε.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGenerator {
    pub generator: HermitianOperator,
    pub epsilon: f64,
}

impl ErrorGenerator {
    pub fn new(generator: HermitianOperator, epsilon: f64) -> Self {
        Self { generator, epsilon }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            generator: self.generator.clone(),
            epsilon,
        }
    }
}

/// `H_ad + iε[K, H_ad]`.
pub fn first_order_pullback(
    h_ad: &HermitianOperator,
    gen: &ErrorGenerator,
) -> Result<HermitianOperator> {
    ensure_dim(h_ad.dim(), gen.generator.dim())?;
    let off = max_off_diagonal(h_ad.matrix());
    if off > DIAGONAL_TOL {
        return Err(Error::NotDiagonal(off));
    }
    let h = h_ad.matrix();
    let k = gen.generator.matrix();
    let n = h_ad.dim();
    // Entry-wise form of the commutator against a diagonal H_ad, which keeps
    // the diagonal exactly untouched.
    let out = DMatrix::from_fn(n, n, |m, col| {
        if m == col {
            h[(m, m)]
        } else {
            Complex64::new(0.0, gen.epsilon) * (h[(col, col)] - h[(m, m)]) * k[(m, col)]
        }
    });
    HermitianOperator::new(out)
}

/// Exact conjugation `exp(iεK) H_ad exp(-iεK)`.
pub fn exact_pullback(h_ad: &HermitianOperator, gen: &ErrorGenerator) -> Result<HermitianOperator> {
    ensure_dim(h_ad.dim(), gen.generator.dim())?;
    // exp(-iεK) is the "implemented" unitary factor; pulling back through it
    // gives exp(iεK) H exp(-iεK).
    let u = evolve_phase(&gen.generator, -gen.epsilon);
    pulled_back(&u, h_ad)
}

/// Leading-order transition probabilities `ε² |K_mn|²` (zero diagonal).
pub fn predicted_transition_probabilities(gen: &ErrorGenerator) -> DMatrix<f64> {
    let k = gen.generator.matrix();
    let eps2 = gen.epsilon * gen.epsilon;
    DMatrix::from_fn(k.nrows(), k.ncols(), |m, n| {
        if m == n {
            0.0
        } else {
            eps2 * k[(m, n)].norm_sqr()
        }
    })
}
