//! Completely positive instruments in Kraus form.
//!
//! An instrument assigns to each outcome `x` the map
//! `ℐ(x)ρ = Σ_k K_{x,k} ρ K_{x,k}†`; the outcome probability is `Tr[ℐ(x)ρ]` and
//! the post-measurement state is `ℐ(x)ρ / Tr[ℐ(x)ρ]`. The total map
//! `Σ_x ℐ(x)` must preserve the trace.
//!
//! Superoperators act on column-stacked operators (see
//! [`crate::linalg::vectorize`]), so `ρ ↦ KρK†` has matrix `conj(K) ⊗ K`.

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_dim, ensure_square, frobenius, identity, kron, min_eigenvalue, unvectorize, vectorize,
    zeros, CMatrix, DensityOperator, SelfAdjointOperator, DEFAULT_TOL,
};

/// Probabilities at or below this are not conditioned on.
pub const P_FLOOR: f64 = 1e-12;

/// Choi eigenvalues below this are dropped during Kraus canonicalization.
pub const KRAUS_DROP_TOL: f64 = 1e-12;

/// Distinct real outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSet(Vec<f64>);

impl OutcomeSet {
    pub fn new(labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidOutcomes {
                reason: "no outcomes".into(),
            });
        }
        for (i, x) in labels.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidOutcomes {
                    reason: format!("outcome {x} is not finite"),
                });
            }
            if labels[..i].contains(x) {
                return Err(Error::InvalidOutcomes {
                    reason: format!("outcome {x} appears twice"),
                });
            }
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position of `x`; labels are matched exactly.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        self.0
            .iter()
            .position(|&o| o == x)
            .ok_or(Error::UnknownOutcome(x))
    }
}

/// Result of [`Instrument::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `‖Σ K†K − I‖_F`
    pub trace_residual: f64,
    /// Minimum Choi eigenvalue per outcome.
    pub choi_min_eigenvalues: Vec<f64>,
    pub passed: bool,
}

/// Outcome-indexed effects `Π(x) = Σ_k K†K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub outcomes: OutcomeSet,
    pub effects: Vec<SelfAdjointOperator>,
}

impl Povm {
    pub fn effect(&self, x: f64) -> Result<&SelfAdjointOperator> {
        Ok(&self.effects[self.outcomes.index_of(x)?])
    }
}

/// `d² × d²` matrix of a superoperator on column-stacked operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperoperatorMatrix {
    pub dim: usize,
    pub matrix: CMatrix,
}

impl SuperoperatorMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: identity(dim * dim),
        }
    }

    /// Superoperator of `ρ ↦ KρK†`.
    pub fn conjugation(k: &CMatrix) -> Self {
        Self {
            dim: k.nrows(),
            matrix: kron(&k.conjugate(), k),
        }
    }

    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(m)), self.dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    outcomes: OutcomeSet,
    kraus: Vec<Vec<CMatrix>>,
}

impl Instrument {
    /// Builds and validates an instrument: Kraus operators must be
    /// `dim × dim` and `Σ K†K = I` within the default tolerance. Complete
    /// positivity holds by construction in Kraus form.
    pub fn new(outcomes: Vec<f64>, kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        let inst = Self::unchecked(outcomes, kraus)?;
        let residual = inst.trace_residual();
        if residual > DEFAULT_TOL {
            return Err(Error::InvalidInstrument {
                reason: format!("Σ K†K deviates from identity by {residual:.3e}"),
            });
        }
        Ok(inst)
    }

    /// Shape checks only; trace preservation is left to [`Self::validate`].
    pub fn unchecked(outcomes: Vec<f64>, kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        let outcomes = OutcomeSet::new(outcomes)?;
        if kraus.len() != outcomes.len() {
            return Err(Error::InvalidInstrument {
                reason: format!(
                    "{} outcomes but {} Kraus families",
                    outcomes.len(),
                    kraus.len()
                ),
            });
        }
        let mut dim = None;
        for (x, family) in outcomes.labels().iter().zip(&kraus) {
            if family.is_empty() {
                return Err(Error::InvalidInstrument {
                    reason: format!("outcome {x} has no Kraus operators"),
                });
            }
            for k in family {
                let d = ensure_square(k)?;
                match dim {
                    None => dim = Some(d),
                    Some(d0) => ensure_dim(d0, d)?,
                }
            }
        }
        Ok(Self {
            dim: dim.expect("at least one outcome"),
            outcomes,
            kraus,
        })
    }

    /// Single outcome `x` with the identity map.
    pub fn identity(dim: usize, x: f64) -> Self {
        Self {
            dim,
            outcomes: OutcomeSet(vec![x]),
            kraus: vec![vec![identity(dim)]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Kraus operators of outcome `x`.
    pub fn kraus(&self, x: f64) -> Result<&[CMatrix]> {
        Ok(&self.kraus[self.outcomes.index_of(x)?])
    }

    pub fn kraus_families(&self) -> &[Vec<CMatrix>] {
        &self.kraus
    }

    fn trace_residual(&self) -> f64 {
        let mut sum = zeros(self.dim);
        for k in self.kraus.iter().flatten() {
            sum += k.adjoint() * k;
        }
        frobenius(&(sum - identity(self.dim)))
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let trace_residual = self.trace_residual();
        let choi_min_eigenvalues: Vec<f64> = (0..self.len())
            .map(|i| min_eigenvalue(&self.choi_matrix_at(i)))
            .collect();
        let passed = trace_residual <= tol && choi_min_eigenvalues.iter().all(|&m| m >= -tol);
        ValidationReport {
            trace_residual,
            choi_min_eigenvalues,
            passed,
        }
    }

    pub(crate) fn effect_at(&self, i: usize) -> CMatrix {
        let mut e = zeros(self.dim);
        for k in &self.kraus[i] {
            e += k.adjoint() * k;
        }
        e
    }

    pub fn povm(&self) -> Result<Povm> {
        let effects: Vec<CMatrix> = (0..self.len()).map(|i| self.effect_at(i)).collect();
        let total = effects.iter().fold(zeros(self.dim), |acc, e| acc + e);
        let residual = frobenius(&(total - identity(self.dim)));
        if residual > DEFAULT_TOL {
            return Err(Error::InvalidInstrument {
                reason: format!("effects sum to identity only within {residual:.3e}"),
            });
        }
        Ok(Povm {
            outcomes: self.outcomes.clone(),
            effects: effects
                .into_iter()
                .map(|e| SelfAdjointOperator::new((&e + e.adjoint()).scale(0.5)))
                .collect::<Result<_>>()?,
        })
    }

    /// `ℐ(x_i)m` for any operator `m` (the map is linear).
    pub(crate) fn apply_at(&self, i: usize, m: &CMatrix) -> CMatrix {
        let mut out = zeros(self.dim);
        for k in &self.kraus[i] {
            out += k * m * k.adjoint();
        }
        out
    }

    /// Heisenberg-picture map `ℐ*(x_i)y = Σ K†yK`.
    pub(crate) fn dual_at(&self, i: usize, y: &CMatrix) -> CMatrix {
        let mut out = zeros(self.dim);
        for k in &self.kraus[i] {
            out += k.adjoint() * y * k;
        }
        out
    }

    /// `ℐ(X)m = Σ_x ℐ(x)m`
    pub fn apply_total(&self, m: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim, ensure_square(m)?)?;
        Ok((0..self.len()).fold(zeros(self.dim), |acc, i| acc + self.apply_at(i, m)))
    }

    /// Unnormalized post-measurement operator `ℐ(x)ρ`.
    pub fn apply_outcome(&self, x: f64, rho: &DensityOperator) -> Result<CMatrix> {
        let i = self.outcomes.index_of(x)?;
        ensure_dim(self.dim, rho.dim())?;
        Ok(self.apply_at(i, rho.matrix()))
    }

    pub(crate) fn probability_at(&self, i: usize, rho: &CMatrix) -> f64 {
        self.apply_at(i, rho).trace().re
    }

    /// `Tr[ℐ(x)ρ]`
    pub fn outcome_probability(&self, x: f64, rho: &DensityOperator) -> Result<f64> {
        Ok(self.apply_outcome(x, rho)?.trace().re)
    }

    /// Probabilities of all outcomes in label order.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        ensure_dim(self.dim, rho.dim())?;
        Ok((0..self.len())
            .map(|i| self.probability_at(i, rho.matrix()))
            .collect())
    }

    pub(crate) fn update_at(&self, i: usize, rho: &CMatrix) -> Result<DensityOperator> {
        let m = self.apply_at(i, rho);
        let p = m.trace().re;
        if p <= P_FLOOR {
            return Err(Error::ZeroProbabilityConditioning { probability: p });
        }
        Ok(DensityOperator::from_trusted(m.unscale(p)))
    }

    /// `ℐ(x)ρ / Tr[ℐ(x)ρ]`
    pub fn state_update(&self, x: f64, rho: &DensityOperator) -> Result<DensityOperator> {
        let i = self.outcomes.index_of(x)?;
        ensure_dim(self.dim, rho.dim())?;
        self.update_at(i, rho.matrix())
    }

    pub(crate) fn superoperator_at(&self, i: usize) -> SuperoperatorMatrix {
        let d2 = self.dim * self.dim;
        let mut m = CMatrix::zeros(d2, d2);
        for k in &self.kraus[i] {
            m += kron(&k.conjugate(), k);
        }
        SuperoperatorMatrix {
            dim: self.dim,
            matrix: m,
        }
    }

    pub fn superoperator_matrix(&self, x: f64) -> Result<SuperoperatorMatrix> {
        Ok(self.superoperator_at(self.outcomes.index_of(x)?))
    }

    /// Superoperator of the total map `ℐ(X)`.
    pub fn total_superoperator(&self) -> SuperoperatorMatrix {
        let d2 = self.dim * self.dim;
        let matrix = (0..self.len()).fold(CMatrix::zeros(d2, d2), |acc, i| {
            acc + self.superoperator_at(i).matrix
        });
        SuperoperatorMatrix {
            dim: self.dim,
            matrix,
        }
    }

    /// Choi matrix `Σ_k vec(K) vec(K)†`, equal to `Σ_ij |i⟩⟨j| ⊗ ℐ(x)(|i⟩⟨j|)`.
    pub(crate) fn choi_matrix_at(&self, i: usize) -> CMatrix {
        let d2 = self.dim * self.dim;
        let mut choi = CMatrix::zeros(d2, d2);
        for k in &self.kraus[i] {
            let v = vectorize(k);
            choi += &v * v.adjoint();
        }
        choi
    }

    pub fn choi_matrix(&self, x: f64) -> Result<CMatrix> {
        Ok(self.choi_matrix_at(self.outcomes.index_of(x)?))
    }

    /// Minimal Kraus representation from the eigendecomposition of each
    /// outcome's Choi matrix; eigenvalues below [`KRAUS_DROP_TOL`] are dropped.
    pub fn canonicalize(&self) -> Result<Self> {
        let mut kraus = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (values, vectors) = crate::linalg::eigh(&self.choi_matrix_at(i));
            let mut family = Vec::new();
            for (k, &lambda) in values.iter().enumerate().rev() {
                if lambda > KRAUS_DROP_TOL {
                    let v = vectors.column(k).into_owned();
                    family.push(unvectorize(&v, self.dim).scale(lambda.sqrt()));
                }
            }
            if family.is_empty() {
                family.push(zeros(self.dim));
            }
            kraus.push(family);
        }
        Ok(Self {
            dim: self.dim,
            outcomes: self.outcomes.clone(),
            kraus,
        })
    }
}

/// `Tr[ℐ_n(x_n)···ℐ_1(x_1)ρ]` with the first pair applied first.
pub fn sequential_joint(seq: &[(&Instrument, f64)], rho: &DensityOperator) -> Result<f64> {
    let mut m = rho.matrix().clone();
    for (inst, x) in seq {
        let i = inst.outcomes.index_of(*x)?;
        ensure_dim(rho.dim(), inst.dim)?;
        m = inst.apply_at(i, &m);
    }
    Ok(m.trace().re)
}

/// Index-based chain used by the diagnostics.
pub(crate) fn joint_at(seq: &[(&Instrument, usize)], rho: &CMatrix) -> f64 {
    let mut m = rho.clone();
    for (inst, i) in seq {
        m = inst.apply_at(*i, &m);
    }
    m.trace().re
}

/// `P(B=y | A=x ‖ ρ) = Tr[ℐ_B(y)ℐ_A(x)ρ] / Tr[ℐ_A(x)ρ]`
pub fn conditional_probability(
    a: &Instrument,
    x: f64,
    b: &Instrument,
    y: f64,
    rho: &DensityOperator,
) -> Result<f64> {
    ensure_dim(a.dim, b.dim)?;
    let p = a.outcome_probability(x, rho)?;
    if p <= P_FLOOR {
        return Err(Error::ZeroProbabilityConditioning { probability: p });
    }
    Ok(sequential_joint(&[(a, x), (b, y)], rho)? / p)
}
