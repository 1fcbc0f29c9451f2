//! Measurement taxonomy: sharp, repeatable, projective and invasive instruments.
//!
//! Classes form the chain `P ⊂ SR` with `SRP̄ = SR \ P`: every projective
//! instrument is sharp and repeatable, while sharp repeatable instruments may
//! update the state by something other than `ρ ↦ EρE`.

use std::fmt;

use crate::error::Result;
use crate::instrument::Instrument;
use crate::linalg::{ensure_dim, frobenius, identity, kron, CMatrix, DensityOperator};

/// Predicate tolerance; looser than the linear-algebra defaults.
pub const CLASSIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Taxon {
    /// Projective (von Neumann–Lüders).
    Projective,
    /// Sharp, repeatable, not projective.
    SharpRepeatableNonProjective,
    /// Sharp but not repeatable.
    SharpNonRepeatable,
    Unsharp,
}

impl Taxon {
    pub fn code(self) -> &'static str {
        match self {
            Taxon::Projective => "P",
            Taxon::SharpRepeatableNonProjective => "SRPbar",
            Taxon::SharpNonRepeatable => "SRbar",
            Taxon::Unsharp => "Unsharp",
        }
    }
}

impl fmt::Display for Taxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassLabel {
    pub sharp: bool,
    pub repeatable: bool,
    pub projective: bool,
    /// Globally invasive (`ℐ(X) ≠ id`). Does not enter the taxon.
    pub invasive: bool,
    pub taxon: Taxon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Invasiveness {
    pub global_noninvasive: bool,
    pub state_noninvasive: Option<bool>,
}

/// Largest violation of projective-POVM structure: idempotence, hermiticity
/// and mutual orthogonality of the effects.
pub fn sharpness_residual(inst: &Instrument) -> Result<f64> {
    let povm = inst.povm()?;
    let effects: Vec<&CMatrix> = povm.effects.iter().map(|e| e.matrix()).collect();
    let mut worst: f64 = 0.0;
    for (i, e) in effects.iter().enumerate() {
        worst = worst.max(frobenius(&(*e * *e - *e)));
        worst = worst.max(frobenius(&(*e - e.adjoint())));
        for f in &effects[..i] {
            worst = worst.max(frobenius(&(*e * *f)));
        }
    }
    Ok(worst)
}

pub fn is_sharp(inst: &Instrument, tol: f64) -> Result<bool> {
    Ok(sharpness_residual(inst)? <= tol)
}

/// Largest distance between an outcome's update superoperator and that of
/// `ρ ↦ Π(x)ρΠ(x)`.
pub fn projectivity_residual(inst: &Instrument) -> Result<f64> {
    let povm = inst.povm()?;
    let mut worst: f64 = 0.0;
    for (i, e) in povm.effects.iter().enumerate() {
        let e = e.matrix();
        let lueders = kron(&e.conjugate(), e);
        worst = worst.max(frobenius(&(inst.superoperator_at(i).matrix - lueders)));
    }
    Ok(worst)
}

pub fn is_projective(inst: &Instrument, tol: f64) -> Result<bool> {
    Ok(is_sharp(inst, tol)? && projectivity_residual(inst)? <= tol)
}

/// `max_x ‖ℐ*(x)Π(x) − Π(x)‖_F`. Zero exactly when
/// `Tr[ℐ(x)ℐ(x)ρ] = Tr[ℐ(x)ρ]` for every operator `ρ`, i.e. on every matrix unit.
pub fn repeatability_residual(inst: &Instrument) -> Result<f64> {
    let povm = inst.povm()?;
    let mut worst: f64 = 0.0;
    for (i, e) in povm.effects.iter().enumerate() {
        let e = e.matrix();
        worst = worst.max(frobenius(&(inst.dual_at(i, e) - e)));
    }
    Ok(worst)
}

/// `max_x |Tr[ℐ(x)ℐ(x)ρ] − Tr[ℐ(x)ρ]|` at one state.
pub fn repeatability_state_residual(inst: &Instrument, rho: &DensityOperator) -> Result<f64> {
    ensure_dim(inst.dim(), rho.dim())?;
    let mut worst: f64 = 0.0;
    for i in 0..inst.len() {
        let once = inst.apply_at(i, rho.matrix());
        let twice = inst.apply_at(i, &once);
        worst = worst.max((twice.trace().re - once.trace().re).abs());
    }
    Ok(worst)
}

pub fn is_repeatable(inst: &Instrument, tol: f64) -> Result<bool> {
    Ok(repeatability_residual(inst)? <= tol)
}

/// Global flag from `‖Σ_x M(x) − 1‖_F`, state flag from `‖ℐ(X)ρ − ρ‖_F`.
pub fn invasiveness(
    inst: &Instrument,
    rho: Option<&DensityOperator>,
    tol: f64,
) -> Result<Invasiveness> {
    let d = inst.dim();
    let total = inst.total_superoperator();
    let global_noninvasive = frobenius(&(total.matrix - identity(d * d))) <= tol;
    let state_noninvasive = match rho {
        Some(rho) => {
            ensure_dim(d, rho.dim())?;
            let out = inst.apply_total(rho.matrix())?;
            Some(frobenius(&(out - rho.matrix())) <= tol)
        }
        None => None,
    };
    Ok(Invasiveness {
        global_noninvasive,
        state_noninvasive,
    })
}

pub fn classify_label(inst: &Instrument, tol: f64) -> Result<ClassLabel> {
    let sharp = is_sharp(inst, tol)?;
    let repeatable = is_repeatable(inst, tol)?;
    let projective = sharp && projectivity_residual(inst)? <= tol;
    let invasive = !invasiveness(inst, None, tol)?.global_noninvasive;
    let taxon = match (sharp, repeatable, projective) {
        (true, _, true) => Taxon::Projective,
        (true, true, false) => Taxon::SharpRepeatableNonProjective,
        (true, false, false) => Taxon::SharpNonRepeatable,
        (false, _, _) => Taxon::Unsharp,
    };
    Ok(ClassLabel {
        sharp,
        repeatable,
        projective,
        invasive,
        taxon,
    })
}
