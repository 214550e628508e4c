//! Dense complex linear algebra on a single auxiliary slot space.
//!
//! Inner products are conjugate-linear in the first argument:
//! `inner_product(x, y) = sum_i conj(x_i) * y_i`. Modulus-squared survival
//! quantities are independent of this choice. Units use hbar = 1, so a
//! Hamiltonian carries inverse time.

use std::ops::Mul;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{SeededRng, HAMILTONIAN_STREAM, STATE_STREAM};

/// Componentwise tolerance for Hermiticity and idempotence checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Componentwise tolerance for the unitarity check `U^dagger U = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for `trace(P)` matching an integer rank.
pub const RANK_TOL: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyDimension);
    }
    Ok(m.nrows())
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Largest componentwise deviation of `m` from its conjugate transpose.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// A vector in a `dim`-dimensional auxiliary space.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState(CVector);

impl AuxState {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(CVector::from_vec(entries)))
    }

    pub fn from_vector(v: CVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(v))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Ok(Self(v))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(CVector::zeros(dim)))
    }

    /// Unit vector with standard complex Gaussian direction.
    pub fn random(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut rng = SeededRng::new(seed, STATE_STREAM);
        let v = CVector::from_fn(dim, |_, _| rng.complex_normal());
        Self(v).normalized()
    }

    /// `count` independent unit vectors drawn in sequence from one stream.
    pub fn random_sequence(dim: usize, count: usize, seed: u64) -> Result<Vec<Self>> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut rng = SeededRng::new(seed, STATE_STREAM);
        (0..count)
            .map(|_| Self(CVector::from_fn(dim, |_, _| rng.complex_normal())).normalized())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self(&self.0 / Complex64::new(n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self(&self.0 * c)
    }

    /// Euclidean distance to `other`. Panics on dimension mismatch.
    pub fn distance(&self, other: &AuxState) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// `sum_i conj(x_i) * y_i`.
pub fn inner_product(x: &AuxState, y: &AuxState) -> Result<Complex64> {
    check_dims(x.dim(), y.dim())?;
    Ok(x.0.dotc(&y.0))
}

/// A Hermitian matrix, typically a slot Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Accepts `m` only if it equals its conjugate transpose within
    /// [`HERMITIAN_TOL`] componentwise. No symmetrization is applied.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let deviation = hermitian_deviation(&m);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(CMatrix::zeros(dim, dim)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(CMatrix::identity(dim, dim)))
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let d = CVector::from_iterator(entries.len(), entries.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(Self(CMatrix::from_diagonal(&d)))
    }

    /// `x * sigma_x + y * sigma_y + z * sigma_z + e * I` on a qubit.
    pub fn pauli_combo(x: f64, y: f64, z: f64, e: f64) -> Self {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(e + z, 0.0),
                Complex64::new(x, -y),
                Complex64::new(x, y),
                Complex64::new(e - z, 0.0),
            ],
        );
        Self(m)
    }

    pub fn pauli_x() -> Self {
        Self::pauli_combo(1.0, 0.0, 0.0, 0.0)
    }

    pub fn pauli_y() -> Self {
        Self::pauli_combo(0.0, 1.0, 0.0, 0.0)
    }

    pub fn pauli_z() -> Self {
        Self::pauli_combo(0.0, 0.0, 1.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * Complex64::new(c, 0.0))
    }

    /// Sum of two Hermitian operators of the same dimension.
    pub fn sum(&self, other: &HermitianOperator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let eig = self.0.clone().symmetric_eigen();
        eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Real eigenvalues in the order returned by the eigensolver.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.0.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    }
}

impl Mul<&AuxState> for &HermitianOperator {
    type Output = AuxState;

    fn mul(self, rhs: &AuxState) -> AuxState {
        AuxState(&self.0 * &rhs.0)
    }
}

/// A unitary matrix, typically a slot propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = check_square(&m)?;
        let deviation = max_abs(&(m.adjoint() * &m - CMatrix::identity(d, d)));
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(CMatrix::identity(dim, dim)))
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

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &UnitaryOperator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }
}

impl Mul<&AuxState> for &UnitaryOperator {
    type Output = AuxState;

    fn mul(self, rhs: &AuxState) -> AuxState {
        AuxState(&self.0 * &rhs.0)
    }
}

/// An orthogonal projector with integer rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: CMatrix,
    rank: usize,
}

impl Projector {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let herm = hermitian_deviation(&m);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotProjector {
                reason: format!("not Hermitian (deviation {herm:e})"),
            });
        }
        let idem = max_abs(&(&m * &m - &m));
        if idem > HERMITIAN_TOL {
            return Err(Error::NotProjector {
                reason: format!("not idempotent (deviation {idem:e})"),
            });
        }
        let trace = m.trace();
        let rank = trace.re.round();
        if (trace - Complex64::new(rank, 0.0)).norm() > RANK_TOL || rank < 0.0 {
            return Err(Error::NotProjector {
                reason: format!("trace {trace} is not an integer rank"),
            });
        }
        Ok(Self {
            matrix: m,
            rank: rank as usize,
        })
    }

    /// `|v><v| / <v, v>`.
    pub fn rank_one(v: &AuxState) -> Result<Self> {
        let u = v.normalized()?;
        Self::new(&u.0 * u.0.adjoint())
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim))
    }

    /// `|e_index><e_index|`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        Self::rank_one(&AuxState::basis(dim, index)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `V P V^dagger`.
    pub fn conjugated(&self, v: &UnitaryOperator) -> Result<Self> {
        check_dims(self.dim(), v.dim())?;
        Self::new(&v.0 * &self.matrix * v.0.adjoint())
    }

    /// Orthonormal basis of the range, built by pivoted Gram-Schmidt over
    /// the columns of `P`. Each step takes the column with the largest
    /// remaining component; near-ties go to the lower column index, so a
    /// diagonal projector yields its basis vectors in ascending order.
    pub fn range_basis(&self) -> Vec<AuxState> {
        let d = self.dim();
        let mut basis: Vec<CVector> = Vec::with_capacity(self.rank);
        for _ in 0..self.rank {
            let mut best: Option<(f64, CVector)> = None;
            for j in 0..d {
                let mut c = self.matrix.column(j).into_owned();
                for b in &basis {
                    let coef = b.dotc(&c);
                    c -= b * coef;
                }
                let n = c.norm();
                let better = match &best {
                    None => true,
                    Some((bn, _)) => n > bn + 1e-12,
                };
                if better {
                    best = Some((n, c));
                }
            }
            let (n, c) = best.expect("projector has at least one column");
            basis.push(c / Complex64::new(n, 0.0));
        }
        basis.into_iter().map(AuxState).collect()
    }
}

impl Mul<&AuxState> for &Projector {
    type Output = AuxState;

    fn mul(self, rhs: &AuxState) -> AuxState {
        AuxState(&self.matrix * &rhs.0)
    }
}

/// Dispersion of `h` in `H`:
/// `<h, H^2 h>/|h|^2 - <h, H h>^2/|h|^4`.
///
/// Roundoff can push the exact zero of an eigenvector slightly negative;
/// such values are clamped to zero.
pub fn variance(hamiltonian: &HermitianOperator, h: &AuxState) -> Result<f64> {
    check_dims(hamiltonian.dim(), h.dim())?;
    let norm2 = h.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let hh = hamiltonian * h;
    // <h, H^2 h> = |H h|^2 for Hermitian H.
    let second = hh.norm_squared() / norm2;
    let first = h.0.dotc(&hh.0).re / norm2;
    let v = second - first * first;
    let tol = 1e-12 * second.max(1.0);
    debug_assert!(v >= -tol, "variance {v} below clamp tolerance");
    Ok(if v < 0.0 { 0.0 } else { v })
}

/// `exp(-i * dt * H)` via the eigendecomposition of `H`.
pub fn hermitian_exponential(hamiltonian: &HermitianOperator, dt: f64) -> Result<UnitaryOperator> {
    let deviation = hermitian_deviation(&hamiltonian.0);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let d = hamiltonian.dim();
    if hamiltonian.0.iter().all(|z| *z == ZERO) || dt == 0.0 {
        return UnitaryOperator::identity(d);
    }
    let eig = hamiltonian.0.clone().symmetric_eigen();
    let phases = CVector::from_iterator(d, eig.eigenvalues.iter().map(|&lambda| (-I * dt * lambda).exp()));
    let q = &eig.eigenvectors;
    let m = q * CMatrix::from_diagonal(&phases) * q.adjoint();
    UnitaryOperator::new(m)
}

/// `I - i dt H - (dt^2 / 2) H^2`, the propagator truncated at second order.
/// Not unitary for `dt != 0`.
pub fn truncated_propagator(hamiltonian: &HermitianOperator, dt: f64) -> Result<CMatrix> {
    let deviation = hermitian_deviation(&hamiltonian.0);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let d = hamiltonian.dim();
    let h = &hamiltonian.0;
    let h2 = h * h;
    Ok(CMatrix::identity(d, d) - h * (I * dt) - h2 * Complex64::new(0.5 * dt * dt, 0.0))
}

/// `(A + A^dagger) / 2` with `A` filled by standard complex Gaussians drawn
/// from the Hamiltonian stream of `seed`, row-major.
pub fn random_hermitian(dim: usize, seed: u64) -> Result<HermitianOperator> {
    if dim == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut rng = SeededRng::new(seed, HAMILTONIAN_STREAM);
    let mut a = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = rng.complex_normal();
        }
    }
    let m = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    HermitianOperator::new(m)
}
