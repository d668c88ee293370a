//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on `nalgebra` dense matrices wrapped in newtypes that
//! carry the algebraic invariant of the role they play: Hermitian operators,
//! unitaries and density matrices. Dimensions in this crate never exceed a few
//! dozen levels, so there is no sparse path; the propagator only skips zero
//! entries of the generator when forming products.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Hermiticity tolerance (absolute, per entry).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity tolerance on `max |U†U - I|`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Default degeneracy tolerance, relative to the spectral range.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;
/// Default number of fixed RK4 steps per protocol.
pub const DEFAULT_STEPS: usize = 20_000;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest entry magnitude of a matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest off-diagonal magnitude.
pub fn max_off_diagonal(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `(M + M†) / 2`.
fn hermitize(m: CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// A Hermitian operator in energy units (ħ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates squareness and Hermiticity within [`HERMITIAN_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self(m))
    }

    /// Symmetrizes a matrix that is Hermitian up to rounding.
    pub(crate) fn from_rounded(m: CMatrix) -> Self {
        Self(hermitize(m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real linear combination, which stays Hermitian.
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scale(factor))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    /// `⟨ψ|H|ψ⟩`, real for Hermitian `H`.
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        ensure_dim(self.dim(), rho.dim())?;
        Ok(trace_product(&self.0, rho.matrix()).re)
    }

    /// Operator norm, i.e. the largest eigenvalue magnitude.
    pub fn operator_norm(&self) -> f64 {
        eigenvalues(&self.0)
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(e.abs()))
    }

    /// Trace norm, i.e. the sum of eigenvalue magnitudes.
    pub fn trace_norm(&self) -> f64 {
        eigenvalues(&self.0).iter().map(|e| e.abs()).sum()
    }
}

/// A unitary matrix, `max |U†U - I| ≤ 1e-10`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let dev = unitarity_deviation(&m);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    /// Nearest unitary in Frobenius norm (the unitary polar factor `W V†` of
    /// the SVD `M = W Σ V†`).
    pub fn nearest(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let svd = SVD::new(m, true, true);
        let (Some(w), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::NumericalQuality(
                "SVD did not return singular vectors".into(),
            ));
        };
        Self::new(w * v_t)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }

    /// `U ρ U†`.
    pub fn evolve(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        ensure_dim(self.dim(), rho.dim())?;
        let out = &self.0 * rho.matrix() * self.0.adjoint();
        Ok(DensityMatrix(hermitize(out)))
    }

    /// Operator-norm distance `‖U - V‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        ensure_dim(self.dim(), other.dim())?;
        let diff = &self.0 - &other.0;
        Ok(SVD::new(diff, false, false).singular_values.max())
    }
}

fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:e})"
            )));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
        }
        let min_eig = eigenvalues(&m).iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized on the way in.
    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let psi = psi.unscale(norm);
        Ok(Self(hermitize(&psi * psi.adjoint())))
    }

    /// Diagonal (incoherent) state from populations that sum to one.
    pub fn from_populations(pops: &[f64]) -> Result<Self> {
        let diag: Vec<Complex64> = pops.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&CVector::from_vec(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect()
}

/// One degeneracy block: its energy and orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub energy: f64,
    pub projector: HermitianOperator,
    pub multiplicity: usize,
}

/// Eigenvalues in ascending order plus degeneracy-grouped projectors.
///
/// Eigenvectors are gauge-fixed so their largest-magnitude component is real
/// and positive, which makes downstream fingerprints reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    block_of: Vec<usize>,
    blocks: Vec<SpectralBlock>,
    degeneracy_tol: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors, in the order of [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, index: usize) -> CVector {
        self.eigenvectors.column(index).into_owned()
    }

    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    pub fn block_energies(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.energy).collect()
    }

    /// Block index of each eigenvector.
    pub fn block_labels(&self) -> &[usize] {
        &self.block_of
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.blocks.len() == self.eigenvalues.len()
    }

    /// Block-diagonal part `Σ_α P_α M P_α` of an arbitrary matrix.
    ///
    /// Used for both state dephasing and operator dephasing.
    pub fn block_diagonal_part(&self, m: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim(), m.nrows())?;
        ensure_dim(self.dim(), m.ncols())?;
        let v = &self.eigenvectors;
        let mut in_basis = v.adjoint() * m * v;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                if self.block_of[i] != self.block_of[j] {
                    in_basis[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(v * in_basis * v.adjoint())
    }

    /// Matrix of `M` in the eigenbasis, `V† M V`.
    pub fn in_eigenbasis(&self, m: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim(), m.nrows())?;
        Ok(self.eigenvectors.adjoint() * m * &self.eigenvectors)
    }
}

/// Eigen-decomposition with the default relative degeneracy tolerance.
pub fn hermitian_eigensystem(h: &HermitianOperator) -> SpectralDecomposition {
    hermitian_eigensystem_with_tol(h, DEFAULT_DEGENERACY_TOL)
}

/// Eigen-decomposition grouping eigenvalues closer than
/// `relative_tol * (E_max - E_min)` into one block.
pub fn hermitian_eigensystem_with_tol(
    h: &HermitianOperator,
    relative_tol: f64,
) -> SpectralDecomposition {
    let n = h.dim();
    let eig = SymmetricEigen::new(h.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        fix_gauge(&mut v);
        eigenvectors.set_column(col, &v);
    }

    let range = eigenvalues[n - 1] - eigenvalues[0];
    let scale = eigenvalues
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()));
    let degeneracy_tol = (relative_tol * range).max(64.0 * f64::EPSILON * scale);

    let mut block_of = vec![0usize; n];
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..n {
        if eigenvalues[i] - eigenvalues[i - 1] > degeneracy_tol {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("non-empty").push(i);
        block_of[i] = groups.len() - 1;
    }

    let blocks = groups
        .iter()
        .map(|members| {
            let energy = members.iter().map(|&i| eigenvalues[i]).sum::<f64>() / members.len() as f64;
            let mut p = CMatrix::zeros(n, n);
            for &i in members {
                let v = eigenvectors.column(i);
                p += v * v.adjoint();
            }
            SpectralBlock {
                energy,
                projector: HermitianOperator::from_rounded(p),
                multiplicity: members.len(),
            }
        })
        .collect();

    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        block_of,
        blocks,
        degeneracy_tol,
    }
}

fn fix_gauge(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        // Ties within rounding go to the earliest index.
        if z.norm() > best_mag + 1e-12 {
            best = i;
            best_mag = z.norm();
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Projects `rho` onto its block-diagonal part in the given spectral blocks.
pub fn dephase(rho: &DensityMatrix, spec: &SpectralDecomposition) -> Result<DensityMatrix> {
    let out = spec.block_diagonal_part(rho.matrix())?;
    Ok(DensityMatrix(hermitize(out)))
}

/// Operator analogue of [`dephase`].
pub fn dephase_operator(
    a: &HermitianOperator,
    spec: &SpectralDecomposition,
) -> Result<HermitianOperator> {
    let out = spec.block_diagonal_part(a.matrix())?;
    Ok(HermitianOperator::from_rounded(out))
}

/// `-iH` applied to a matrix, skipping zero entries when `H` is sparse.
struct Generator {
    dense: Option<CMatrix>,
    entries: Vec<(usize, usize, Complex64)>,
}

impl Generator {
    fn new(h: &CMatrix) -> Self {
        let n = h.nrows();
        let entries: Vec<(usize, usize, Complex64)> = (0..n)
            .flat_map(|k| (0..n).map(move |i| (i, k)))
            .filter_map(|(i, k)| {
                let z = h[(i, k)];
                (z != Complex64::new(0.0, 0.0)).then_some((i, k, -I * z))
            })
            .collect();
        if entries.len() * 4 > n * n {
            Self {
                dense: Some(h.map(|z| -I * z)),
                entries: Vec::new(),
            }
        } else {
            Self {
                dense: None,
                entries,
            }
        }
    }

    fn apply(&self, u: &CMatrix, out: &mut CMatrix) {
        if let Some(g) = &self.dense {
            g.mul_to(u, out);
            return;
        }
        out.fill(Complex64::new(0.0, 0.0));
        for j in 0..u.ncols() {
            let src = u.column(j);
            let mut dst = out.column_mut(j);
            for &(i, k, g) in &self.entries {
                dst[i] += g * src[k];
            }
        }
    }
}

fn add_scaled(dst: &mut CMatrix, a: Complex64, src: &CMatrix) {
    dst.zip_apply(src, |d, s| *d += a * s);
}

/// Integrates `i dU/dt = H(t) U` from `U(t0) = I` with classical fourth-order
/// Runge–Kutta on a fixed grid of `steps` intervals, then projects the result
/// onto the nearest unitary.
pub fn propagate_unitary<F>(hamiltonian: F, t0: f64, t1: f64, steps: usize) -> Result<UnitaryMatrix>
where
    F: Fn(f64) -> Result<HermitianOperator>,
{
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "invalid propagation window [{t0}, {t1}]"
        )));
    }
    let n = hamiltonian(t0)?.dim();
    let h = (t1 - t0) / steps as f64;
    let time_at = |k: usize| t0 + (t1 - t0) * (k as f64 / steps as f64);

    let mut u = CMatrix::identity(n, n);
    let mut k1 = CMatrix::zeros(n, n);
    let mut k2 = CMatrix::zeros(n, n);
    let mut k3 = CMatrix::zeros(n, n);
    let mut k4 = CMatrix::zeros(n, n);
    let mut stage = CMatrix::zeros(n, n);

    let mut g_start = Generator::new(hamiltonian(t0)?.matrix());
    for k in 0..steps {
        let t = time_at(k);
        let h_mid = hamiltonian(t + 0.5 * h)?;
        let h_end = hamiltonian(time_at(k + 1))?;
        ensure_dim(n, h_mid.dim())?;
        ensure_dim(n, h_end.dim())?;
        let g_mid = Generator::new(h_mid.matrix());
        let g_end = Generator::new(h_end.matrix());

        g_start.apply(&u, &mut k1);
        stage.copy_from(&u);
        add_scaled(&mut stage, Complex64::new(0.5 * h, 0.0), &k1);
        g_mid.apply(&stage, &mut k2);
        stage.copy_from(&u);
        add_scaled(&mut stage, Complex64::new(0.5 * h, 0.0), &k2);
        g_mid.apply(&stage, &mut k3);
        stage.copy_from(&u);
        add_scaled(&mut stage, Complex64::new(h, 0.0), &k3);
        g_end.apply(&stage, &mut k4);

        let w = Complex64::new(h / 6.0, 0.0);
        let w2 = Complex64::new(h / 3.0, 0.0);
        add_scaled(&mut u, w, &k1);
        add_scaled(&mut u, w2, &k2);
        add_scaled(&mut u, w2, &k3);
        add_scaled(&mut u, w, &k4);

        g_start = g_end;
    }
    UnitaryMatrix::nearest(u)
}

/// `U† A U`, symmetrized.
pub fn pulled_back(u: &UnitaryMatrix, a: &HermitianOperator) -> Result<HermitianOperator> {
    ensure_dim(u.dim(), a.dim())?;
    let m = u.matrix();
    Ok(HermitianOperator::from_rounded(m.adjoint() * a.matrix() * m))
}

/// `exp(i u H)` through the eigen-decomposition of `H`.
pub fn evolve_phase(h: &HermitianOperator, u: f64) -> UnitaryMatrix {
    let eig = SymmetricEigen::new(h.matrix().clone());
    phase_from_eigen(&eig.eigenvalues.iter().cloned().collect::<Vec<_>>(), &eig.eigenvectors, u)
}

pub(crate) fn phase_from_eigen(values: &[f64], vectors: &CMatrix, u: f64) -> UnitaryMatrix {
    let phases = CVector::from_iterator(
        values.len(),
        values.iter().map(|&e| Complex64::from_polar(1.0, u * e)),
    );
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * phases[j]);
    UnitaryMatrix(scaled * vectors.adjoint())
}
