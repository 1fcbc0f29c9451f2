//! Effect diagnostics for pairs of instruments: question order (QOE),
//! response replicability (RRE), the QQ-equality, violations of the formula
//! of total probability, both kinds of noncommutativity, and joint
//! distributions of observables.
//!
//! Sequential joints are written in temporal order: `p_AB(x, y)` means A is
//! asked first and answers `x`, then B answers `y`, i.e.
//! `Tr[ℐ_B(y)ℐ_A(x)ρ]`.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::instrument::{conditional_probability, joint_at, Instrument, P_FLOOR};
use crate::linalg::{
    commutator, ensure_dim, frobenius, projection_meet_all, spectral_decompose, std_dev,
    vectorize, CMatrix, CVector, DensityOperator, Projection, SelfAdjointOperator,
    SpectralDecomposition, StateVector, DEFAULT_CLUSTER_TOL,
};

/// Slack allowed in `σ(a)σ(b) ≥ |⟨[a,b]⟩|/2`.
pub const ROBERTSON_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QoeEntry {
    pub x: f64,
    pub y: f64,
    /// `p(A=x, B=y)`, A first.
    pub p_ab: f64,
    /// `p(B=y, A=x)`, B first.
    pub p_ba: f64,
    pub deviation: f64,
    /// `|Tr[[ℐ_A(x), ℐ_B(y)]ρ]|` from superoperator matrices.
    pub trace_commutator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoeReport {
    pub max_abs_deviation: f64,
    pub entries: Vec<QoeEntry>,
    pub shows_qoe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RreReport {
    /// `max_x |P(A=x, A=x) − P(A=x)|`
    pub aa_residual: f64,
    /// `max_y |P(B=y, B=y) − P(B=y)|`
    pub bb_residual: f64,
    /// `max_{x,y} |P(A=x, B=y, A=x) − P(A=x, B=y)|`
    pub aba_residual: f64,
    /// `max_{y,x} |P(B=y, A=x, B=y) − P(B=y, A=x)|`
    pub bab_residual: f64,
}

/// QQ statistic and the order-effect degrees.
///
/// `q = p(ByAy) + p(BnAn) − p(AyBy) − p(AnBn)`,
/// `q_alt = p(AyBn) + p(AnBy) − p(ByAn) − p(BnAy)`. Each ordered joint
/// sums to one, so `q_alt` equals `q` identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqReport {
    pub q: f64,
    pub q_alt: f64,
    /// `p(ByAy) − p(AyBy)`
    pub q_y: f64,
    /// `p(BnAn) − p(AnBn)`
    pub q_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointExistence {
    pub exists: bool,
    /// Largest spread between the ordered-product and meet expressions.
    pub max_disagreement: f64,
    /// Outcome tuple → `‖(E₁(x₁) ∧ … ∧ E_n(x_n))ψ‖²`, when the distribution exists.
    pub joint: Option<Vec<(Vec<f64>, f64)>>,
}

/// State argument accepting pure or mixed states.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl StateRef<'_> {
    fn density(&self) -> DensityOperator {
        match self {
            StateRef::Pure(psi) => psi.density(),
            StateRef::Mixed(rho) => (*rho).clone(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            StateRef::Pure(psi) => psi.dim(),
            StateRef::Mixed(rho) => rho.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCommutation {
    /// `|⟨[a1, a2]⟩|`
    pub observable_commutator: f64,
    /// `max_{x,y} ‖[ℐ₁(x), ℐ₂(y)]ρ‖_F`
    pub update_commutator: f64,
    /// `max_{x,y} ‖[E₁(x), E₂(y)]ψ‖` (for mixed states `sqrt(Tr[CρC†])`).
    pub projection_commutator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobertsonCheck {
    /// `σ(a)σ(b)`
    pub lhs: f64,
    /// `|Tr[ρ(ab − ba)]|/2`
    pub rhs: f64,
    pub holds: bool,
}

fn check_pair(a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<()> {
    ensure_dim(a.dim(), b.dim())?;
    ensure_dim(a.dim(), rho.dim())
}

fn vec_trace(v: &CVector, dim: usize) -> f64 {
    (0..dim).map(|i| v[i + dim * i].re).sum()
}

pub fn qoe_report(a: &Instrument, b: &Instrument, rho: &DensityOperator, tol: f64) -> Result<QoeReport> {
    check_pair(a, b, rho)?;
    let d = a.dim();
    let r = rho.matrix();
    let vr = vectorize(r);
    let super_a: Vec<_> = (0..a.len()).map(|i| a.superoperator_at(i).matrix).collect();
    let super_b: Vec<_> = (0..b.len()).map(|j| b.superoperator_at(j).matrix).collect();
    let mut entries = Vec::with_capacity(a.len() * b.len());
    let mut max_abs_deviation: f64 = 0.0;
    for (i, &x) in a.outcomes().labels().iter().enumerate() {
        for (j, &y) in b.outcomes().labels().iter().enumerate() {
            let p_ab = joint_at(&[(a, i), (b, j)], r);
            let p_ba = joint_at(&[(b, j), (a, i)], r);
            let deviation = (p_ab - p_ba).abs();
            let comm = &super_a[i] * (&super_b[j] * &vr) - &super_b[j] * (&super_a[i] * &vr);
            let trace_commutator = vec_trace(&comm, d).abs();
            max_abs_deviation = max_abs_deviation.max(deviation);
            entries.push(QoeEntry {
                x,
                y,
                p_ab,
                p_ba,
                deviation,
                trace_commutator,
            });
        }
    }
    Ok(QoeReport {
        max_abs_deviation,
        entries,
        shows_qoe: max_abs_deviation > tol,
    })
}

/// `max_{x,y} |p_AB(x,y) − p_BA(y,x)|`, the deviation reported by [`qoe_report`].
pub fn qoe_max_deviation(a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<f64> {
    check_pair(a, b, rho)?;
    let r = rho.matrix();
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            worst = worst.max((joint_at(&[(a, i), (b, j)], r) - joint_at(&[(b, j), (a, i)], r)).abs());
        }
    }
    Ok(worst)
}

/// `‖M_A(x)M_B(y) − M_B(y)M_A(x)‖_F` over update superoperators.
pub fn u_commutator_norm(a: &Instrument, x: f64, b: &Instrument, y: f64) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    let ma = a.superoperator_matrix(x)?.matrix;
    let mb = b.superoperator_matrix(y)?.matrix;
    Ok(frobenius(&(&ma * &mb - &mb * &ma)))
}

/// `max_{x,y} ‖[Π_A(x), Π_B(y)]‖_F` over the effects.
pub fn o_commutator_norm(a: &Instrument, b: &Instrument) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    let pa = a.povm()?;
    let pb = b.povm()?;
    let mut worst: f64 = 0.0;
    for e in &pa.effects {
        for f in &pb.effects {
            worst = worst.max(frobenius(&commutator(e.matrix(), f.matrix())?));
        }
    }
    Ok(worst)
}

fn self_repeat(a: &Instrument, r: &CMatrix) -> f64 {
    (0..a.len())
        .map(|i| (joint_at(&[(a, i), (a, i)], r) - joint_at(&[(a, i)], r)).abs())
        .fold(0.0, f64::max)
}

fn return_residual(a: &Instrument, b: &Instrument, r: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let two = joint_at(&[(a, i), (b, j)], r);
            let three = joint_at(&[(a, i), (b, j), (a, i)], r);
            worst = worst.max((three - two).abs());
        }
    }
    worst
}

pub fn rre_report(a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<RreReport> {
    check_pair(a, b, rho)?;
    let r = rho.matrix();
    Ok(RreReport {
        aa_residual: self_repeat(a, r),
        bb_residual: self_repeat(b, r),
        aba_residual: return_residual(a, b, r),
        bab_residual: return_residual(b, a, r),
    })
}

/// Index of the "yes" answer of a binary instrument: the larger label.
fn yes_no(inst: &Instrument) -> Result<(usize, usize)> {
    let labels = inst.outcomes().labels();
    if labels.len() != 2 {
        return Err(Error::NotBinaryOutcomes {
            found: labels.len(),
        });
    }
    Ok(if labels[0] > labels[1] { (0, 1) } else { (1, 0) })
}

pub fn qq_value(a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<QqReport> {
    let (ay, an) = yes_no(a)?;
    let (by, bn) = yes_no(b)?;
    check_pair(a, b, rho)?;
    let r = rho.matrix();
    // Temporal order: first pair is asked first.
    let ab = |i: usize, j: usize| joint_at(&[(a, i), (b, j)], r);
    let ba = |j: usize, i: usize| joint_at(&[(b, j), (a, i)], r);
    let q_y = ba(by, ay) - ab(ay, by);
    let q_n = ba(bn, an) - ab(an, bn);
    let q = ba(by, ay) + ba(bn, an) - (ab(ay, by) + ab(an, bn));
    let q_alt = ab(ay, bn) + ab(an, by) - (ba(by, an) + ba(bn, ay));
    Ok(QqReport { q, q_alt, q_y, q_n })
}

/// `p(B=y) − Σ_x p(A=x)·p(B=y | A=x)`; outcomes of A with probability at or
/// below [`P_FLOOR`] contribute their joint probability directly.
pub fn ftp_residual(a: &Instrument, b: &Instrument, y: f64, rho: &DensityOperator) -> Result<f64> {
    check_pair(a, b, rho)?;
    let p_b = b.outcome_probability(y, rho)?;
    let mut total = 0.0;
    for &x in a.outcomes().labels() {
        let p_a = a.outcome_probability(x, rho)?;
        total += if p_a > P_FLOOR {
            p_a * conditional_probability(a, x, b, y, rho)?
        } else {
            crate::instrument::sequential_joint(&[(a, x), (b, y)], rho)?
        };
    }
    Ok(p_b - total)
}

fn check_families(observables: &[SpectralDecomposition], dim: usize) -> Result<()> {
    if observables.is_empty() {
        return Err(Error::InvalidSpectral {
            reason: "no observables".into(),
        });
    }
    for o in observables {
        ensure_dim(dim, o.dim())?;
    }
    Ok(())
}

/// Compares, for every outcome tuple, all orderings of
/// `‖E_{σ1}(x_{σ1})···E_{σn}(x_{σn})ψ‖²` with the meet expression
/// `‖(E₁(x₁) ∧ … ∧ E_n(x_n))ψ‖²`.
pub fn joint_existence(
    observables: &[SpectralDecomposition],
    psi: &StateVector,
    tol: f64,
) -> Result<JointExistence> {
    check_families(observables, psi.dim())?;
    let n = observables.len();
    let v = psi.vector();
    let mut max_disagreement: f64 = 0.0;
    let mut joint = Vec::new();
    for tuple in observables
        .iter()
        .map(|o| 0..o.len())
        .multi_cartesian_product()
    {
        let projections: Vec<&Projection> = tuple
            .iter()
            .zip(observables)
            .map(|(&k, o)| &o.projections()[k])
            .collect();
        let meet = projection_meet_all(&projections)?;
        let meet_value = (meet.matrix() * v).norm_squared();
        let (mut lo, mut hi) = (meet_value, meet_value);
        for order in (0..n).permutations(n) {
            let mut w = v.clone();
            for &k in order.iter().rev() {
                w = projections[k].matrix() * w;
            }
            let value = w.norm_squared();
            lo = lo.min(value);
            hi = hi.max(value);
        }
        max_disagreement = max_disagreement.max(hi - lo);
        let labels = tuple
            .iter()
            .zip(observables)
            .map(|(&k, o)| o.outcomes()[k])
            .collect();
        joint.push((labels, meet_value));
    }
    let exists = max_disagreement <= tol;
    Ok(JointExistence {
        exists,
        max_disagreement,
        joint: exists.then_some(joint),
    })
}

pub fn state_dependent_commutation(
    a1: &SelfAdjointOperator,
    a2: &SelfAdjointOperator,
    i1: &Instrument,
    i2: &Instrument,
    state: StateRef<'_>,
) -> Result<StateCommutation> {
    let d = state.dim();
    ensure_dim(d, a1.dim())?;
    ensure_dim(d, a2.dim())?;
    ensure_dim(d, i1.dim())?;
    ensure_dim(d, i2.dim())?;
    let rho = state.density();
    let r = rho.matrix();

    let comm = commutator(a1.matrix(), a2.matrix())?;
    let observable_commutator = (r * &comm).trace().norm();

    let mut update_commutator: f64 = 0.0;
    for i in 0..i1.len() {
        for j in 0..i2.len() {
            let one_two = i1.apply_at(i, &i2.apply_at(j, r));
            let two_one = i2.apply_at(j, &i1.apply_at(i, r));
            update_commutator = update_commutator.max(frobenius(&(one_two - two_one)));
        }
    }

    let s1 = spectral_decompose(a1, DEFAULT_CLUSTER_TOL)?;
    let s2 = spectral_decompose(a2, DEFAULT_CLUSTER_TOL)?;
    let mut projection_commutator: f64 = 0.0;
    for e in s1.projections() {
        for f in s2.projections() {
            let c = commutator(e.matrix(), f.matrix())?;
            let value = match state {
                StateRef::Pure(psi) => (&c * psi.vector()).norm(),
                StateRef::Mixed(_) => (&c * r * c.adjoint()).trace().re.max(0.0).sqrt(),
            };
            projection_commutator = projection_commutator.max(value);
        }
    }
    Ok(StateCommutation {
        observable_commutator,
        update_commutator,
        projection_commutator,
    })
}

/// Robertson's bound with ħ = 1.
pub fn robertson_check(
    a: &SelfAdjointOperator,
    b: &SelfAdjointOperator,
    rho: &DensityOperator,
) -> Result<RobertsonCheck> {
    ensure_dim(a.dim(), b.dim())?;
    ensure_dim(a.dim(), rho.dim())?;
    let lhs = std_dev(a, rho)? * std_dev(b, rho)?;
    let comm = commutator(a.matrix(), b.matrix())?;
    let rhs = (rho.matrix() * comm).trace().norm() / 2.0;
    Ok(RobertsonCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - ROBERTSON_SLACK,
    })
}
