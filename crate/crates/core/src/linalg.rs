//! Dense complex linear algebra for finite-dimensional operators.
//!
//! Everything is stored as `nalgebra::DMatrix<Complex64>`. Matrices are
//! column-major internally, which makes `vectorize` (column stacking) a
//! plain copy of the storage.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default absolute tolerance for hermiticity, idempotence, positivity,
/// trace and normalization checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Eigenvalues closer than this are treated as one outcome.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// Rank threshold used when orthonormalizing spanning sets.
pub const RANK_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> CMatrix {
    CMatrix::zeros(dim, dim)
}

/// `|i⟩` in the computational basis.
pub fn basis_vector(dim: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[i] = c(1.0, 0.0);
    v
}

/// `|v⟩⟨w|`
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    v * w.adjoint()
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = zeros(n);
    for (i, &x) in values.iter().enumerate() {
        m[(i, i)] = c(x, 0.0);
    }
    m
}

/// Build a matrix from row-major real entries.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, rows[0].len(), |i, j| c(rows[i][j], 0.0))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization: `vec(M)[i + d·j] = M[i, j]`.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

pub(crate) fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// `‖M − M†‖_F`
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending. Column `k`
/// of the returned matrix is the eigenvector of eigenvalue `k`.
///
/// The input is symmetrized as `(M + M†)/2` first.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0[0]
}

/// `ab − ba`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let d = ensure_square(a)?;
    ensure_dim(d, ensure_square(b)?)?;
    Ok(a * b - b * a)
}

/// True iff the smallest eigenvalue of the self-adjoint `m` is at least `-tol`.
pub fn is_positive_semidefinite(m: &CMatrix, tol: f64) -> Result<bool> {
    ensure_square(m)?;
    let residual = hermitian_residual(m);
    if residual > DEFAULT_TOL.max(tol) {
        return Err(Error::NotSelfAdjoint { residual });
    }
    Ok(min_eigenvalue(m) >= -tol)
}

/// Projection onto the span of the given columns. Directions whose Gram
/// eigenvalue falls below [`RANK_TOL`] are dropped.
pub fn span_projector(dim: usize, columns: &[CVector]) -> CMatrix {
    if columns.is_empty() {
        return zeros(dim);
    }
    let mut gram = zeros(dim);
    for v in columns {
        gram += outer(v, v);
    }
    let (values, vectors) = eigh(&gram);
    let mut p = zeros(dim);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > RANK_TOL {
            let v = vectors.column(k).into_owned();
            p += outer(&v, &v);
        }
    }
    p
}

/// Self-adjoint operator (an observable).
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAdjointOperator(CMatrix);

impl SelfAdjointOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_TOL)
    }

    pub fn with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        let residual = hermitian_residual(&m);
        if residual > tol {
            return Err(Error::NotSelfAdjoint { residual });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Orthogonal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(CMatrix);

impl Projection {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_TOL)
    }

    pub fn with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        let residual = hermitian_residual(&m);
        if residual > tol {
            return Err(Error::NotSelfAdjoint { residual });
        }
        let residual = frobenius(&(&m * &m - &m));
        if residual > tol {
            return Err(Error::NotProjection { residual });
        }
        Ok(Self(m))
    }

    /// Projection onto the span of a single (not necessarily normalized) vector.
    pub fn onto(v: &CVector) -> Self {
        let n = v.norm_squared();
        Self(outer(v, v).unscale(n))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.trace().re.round() as usize
    }
}

/// Positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(CMatrix);

impl DensityOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_TOL)
    }

    pub fn with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        let residual = hermitian_residual(&m);
        if residual > tol {
            return Err(Error::InvalidDensity {
                reason: format!("not self-adjoint (residual {residual:.3e})"),
            });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensity {
                reason: format!("trace is {} (expected 1)", tr.re),
            });
        }
        let min = min_eigenvalue(&m);
        if min < -tol {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by trusted internal arithmetic. Only
    /// hermiticity is restored; callers guarantee trace and positivity.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        Self((&m + m.adjoint()).scale(0.5))
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self(outer(psi.vector(), psi.vector()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim).unscale(dim as f64))
    }

    /// `|i⟩⟨i|`
    pub fn basis(dim: usize, i: usize) -> Self {
        let v = basis_vector(dim, i);
        Self(outer(&v, &v))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `Tr[ρ a]`, real part.
    pub fn expectation(&self, a: &CMatrix) -> f64 {
        (&self.0 * a).trace().re
    }
}

/// Normalized pure state `|ψ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    pub fn new(v: CVector) -> Result<Self> {
        Self::with_tol(v, DEFAULT_TOL)
    }

    pub fn with_tol(v: CVector, tol: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; fails only on the zero vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(v.unscale(norm)))
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        Self(basis_vector(dim, i))
    }

    pub fn from_reals(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| c(x, 0.0)),
        ))
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator::pure(self)
    }
}

/// Outcome values with mutually orthogonal projections summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    outcomes: Vec<f64>,
    projections: Vec<Projection>,
}

impl SpectralDecomposition {
    pub fn new(outcomes: Vec<f64>, projections: Vec<Projection>) -> Result<Self> {
        Self::with_tol(outcomes, projections, DEFAULT_TOL)
    }

    pub fn with_tol(outcomes: Vec<f64>, projections: Vec<Projection>, tol: f64) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != projections.len() {
            return Err(Error::InvalidSpectral {
                reason: format!(
                    "{} outcomes for {} projections",
                    outcomes.len(),
                    projections.len()
                ),
            });
        }
        for (i, x) in outcomes.iter().enumerate() {
            if !x.is_finite() || outcomes[..i].contains(x) {
                return Err(Error::InvalidSpectral {
                    reason: format!("outcome {x} is repeated or not finite"),
                });
            }
        }
        let d = projections[0].dim();
        let mut sum = zeros(d);
        for (i, p) in projections.iter().enumerate() {
            ensure_dim(d, p.dim())?;
            sum += p.matrix();
            for q in &projections[..i] {
                let overlap = frobenius(&(p.matrix() * q.matrix()));
                if overlap > tol {
                    return Err(Error::InvalidSpectral {
                        reason: format!("projections not orthogonal (overlap {overlap:.3e})"),
                    });
                }
            }
        }
        let residual = frobenius(&(sum - identity(d)));
        if residual > tol {
            return Err(Error::InvalidSpectral {
                reason: format!("projections sum to identity only within {residual:.3e}"),
            });
        }
        Ok(Self {
            outcomes,
            projections,
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn dim(&self) -> usize {
        self.projections[0].dim()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn projection(&self, x: f64) -> Option<&Projection> {
        self.outcomes
            .iter()
            .position(|&o| o == x)
            .map(|i| &self.projections[i])
    }

    /// `Σ x_j E(x_j)`
    pub fn observable(&self) -> SelfAdjointOperator {
        let mut a = zeros(self.dim());
        for (x, p) in self.outcomes.iter().zip(&self.projections) {
            a += p.matrix().scale(*x);
        }
        SelfAdjointOperator(a)
    }
}

/// Groups eigenvalues closer than `cluster_tol` (chained over sorted
/// neighbours); each group's outcome is the mean of its eigenvalues.
pub fn spectral_decompose(a: &SelfAdjointOperator, cluster_tol: f64) -> Result<SpectralDecomposition> {
    let d = a.dim();
    let (values, vectors) = eigh(a.matrix());
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigenvalues not finite".into()));
    }
    let mut outcomes = Vec::new();
    let mut projections = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        let mut p = zeros(d);
        for k in start..end {
            let v = vectors.column(k).into_owned();
            p += outer(&v, &v);
        }
        outcomes.push(mean);
        projections.push(Projection(p));
        start = end;
    }
    Ok(SpectralDecomposition {
        outcomes,
        projections,
    })
}

/// Largest projection below both `p` and `q`: the complement of the span of
/// their kernels.
pub fn projection_meet(p: &Projection, q: &Projection) -> Result<Projection> {
    let d = p.dim();
    ensure_dim(d, q.dim())?;
    let mut kernel = Vec::new();
    for m in [p.matrix(), q.matrix()] {
        let (values, vectors) = eigh(m);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda < 0.5 {
                kernel.push(vectors.column(k).into_owned());
            }
        }
    }
    let union = span_projector(d, &kernel);
    Ok(Projection(identity(d) - union))
}

/// Meet of any nonempty list of projections.
pub fn projection_meet_all(ps: &[&Projection]) -> Result<Projection> {
    let mut acc = ps[0].clone();
    for p in &ps[1..] {
        acc = projection_meet(&acc, p)?;
    }
    Ok(acc)
}

/// `sqrt(Tr[ρa²] − Tr[ρa]²)`, evaluated as `Tr[ρ(a − ⟨a⟩)²]` and clamped at zero.
pub fn std_dev(a: &SelfAdjointOperator, rho: &DensityOperator) -> Result<f64> {
    ensure_dim(a.dim(), rho.dim())?;
    let m = a.matrix();
    let mean = rho.expectation(m);
    let centered = m - identity(a.dim()).scale(mean);
    Ok(rho.expectation(&(&centered * &centered)).max(0.0).sqrt())
}
