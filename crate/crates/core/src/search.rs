//! Constraint-driven search over instrument parameter manifolds.
//!
//! A constraint set lists `(diagnostic, comparator, threshold)` targets. The
//! search minimizes `Σ max(0, violation)²` with random restarts, each refined
//! by Nelder–Mead and Gauss–Newton polishing. Infeasible results mean "no feasible point within budget",
//! nothing stronger.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::effects::{ftp_residual, o_commutator_norm, qoe_max_deviation, qq_value, rre_report, u_commutator_norm, RreReport};
use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{basis_vector, c, diag, eigh, outer, CMatrix, DensityOperator, StateVector};
use crate::models::{binary_family, ok_commuting_pair, projective_instrument, OK_PAIR_PARAMS};
use crate::random;

/// Restarts evaluated together before checking for a feasible point.
pub const SEARCH_BATCH: usize = 16;

/// Nelder–Mead iterations per stage, per parameter.
const STAGE_ITERS_PER_PARAM: usize = 30;

/// A stage that does not shrink the objective below this fraction stalls.
const STALL_RATIO: f64 = 0.5;

/// Consecutive stalled stages that end a restart.
const MAX_STALLS: usize = 3;

/// Initial simplex scales tried in turn during one restart.
const SIMPLEX_STEPS: [f64; 5] = [0.5, 0.1, 1e-2, 1e-3, 1e-4];

/// `exp(iH)` where `H` is Hermitian with `params[0..dim]` on the diagonal
/// followed by `(re, im)` pairs for the entries `H[j,k]`, `j < k`, in
/// row-major order.
pub fn unitary_from_params(dim: usize, params: &[f64]) -> Result<CMatrix> {
    if params.len() != dim * dim {
        return Err(Error::BadParameterLength {
            expected: dim * dim,
            found: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut h = diag(&params[..dim]);
    let mut rest = params[dim..].chunks(2);
    for j in 0..dim {
        for k in j + 1..dim {
            let pair = rest.next().expect("length checked");
            h[(j, k)] = c(pair[0], pair[1]);
            h[(k, j)] = c(pair[0], -pair[1]);
        }
    }
    let (values, vectors) = eigh(&h);
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        values.iter().map(|l| c(l.cos(), l.sin())),
    ));
    Ok(&vectors * phases * vectors.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Diagnostic {
    QoeDeviation,
    AbaResidual,
    BabResidual,
    AaResidual,
    BbResidual,
    QqAbs,
    FtpAbs,
    UCommNorm,
    OCommNorm,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 9] = [
        Diagnostic::QoeDeviation,
        Diagnostic::AbaResidual,
        Diagnostic::BabResidual,
        Diagnostic::AaResidual,
        Diagnostic::BbResidual,
        Diagnostic::QqAbs,
        Diagnostic::FtpAbs,
        Diagnostic::UCommNorm,
        Diagnostic::OCommNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::QoeDeviation => "qoe_deviation",
            Diagnostic::AbaResidual => "aba_residual",
            Diagnostic::BabResidual => "bab_residual",
            Diagnostic::AaResidual => "aa_residual",
            Diagnostic::BbResidual => "bb_residual",
            Diagnostic::QqAbs => "qq_abs",
            Diagnostic::FtpAbs => "ftp_abs",
            Diagnostic::UCommNorm => "u_comm_norm",
            Diagnostic::OCommNorm => "o_comm_norm",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Diagnostic {
    type Err = Error;

    /// Accepts the full names and the short forms `qoe`, `aba`, `bab`, `aa`,
    /// `bb`, `qq`, `ftp`, `u_comm`, `o_comm`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Diagnostic::ALL
            .into_iter()
            .find(|d| {
                let name = d.name();
                s == name || Some(s) == name.strip_suffix("_residual") || Some(s) == short(name)
            })
            .ok_or_else(|| Error::BadParameters {
                reason: format!("unknown diagnostic '{s}'"),
            })
    }
}

fn short(name: &str) -> Option<&str> {
    name.strip_suffix("_deviation")
        .or_else(|| name.strip_suffix("_abs"))
        .or_else(|| name.strip_suffix("_norm"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    AtMost,
    AtLeast,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::AtMost => "<=",
            Comparator::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub diagnostic: Diagnostic,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Constraint {
    pub fn new(diagnostic: Diagnostic, comparator: Comparator, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::BadParameters {
                reason: format!("threshold for {diagnostic} is not finite"),
            });
        }
        Ok(Self {
            diagnostic,
            comparator,
            threshold,
        })
    }

    pub fn at_most(diagnostic: Diagnostic, threshold: f64) -> Result<Self> {
        Self::new(diagnostic, Comparator::AtMost, threshold)
    }

    pub fn at_least(diagnostic: Diagnostic, threshold: f64) -> Result<Self> {
        Self::new(diagnostic, Comparator::AtLeast, threshold)
    }

    /// Amount by which `value` misses the target; zero when satisfied.
    pub fn violation(&self, value: f64) -> f64 {
        if !value.is_finite() {
            return f64::INFINITY;
        }
        match self.comparator {
            Comparator::AtMost => (value - self.threshold).max(0.0),
            Comparator::AtLeast => (self.threshold - value).max(0.0),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{:e}", self.diagnostic, self.comparator.symbol(), self.threshold)
    }
}

impl FromStr for Constraint {
    type Err = Error;

    /// `name>=value` or `name<=value`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, comparator, value) = if let Some((n, v)) = s.split_once(">=") {
            (n, Comparator::AtLeast, v)
        } else if let Some((n, v)) = s.split_once("<=") {
            (n, Comparator::AtMost, v)
        } else {
            return Err(Error::BadParameters {
                reason: format!("constraint '{s}' needs <= or >="),
            });
        };
        let threshold: f64 = value.trim().parse().map_err(|_| Error::BadParameters {
            reason: format!("bad threshold '{}'", value.trim()),
        })?;
        Constraint::new(name.parse()?, comparator, threshold)
    }
}

/// Comma-separated constraints, e.g. `qoe>=0.05,aba<=1e-9`.
pub fn parse_constraints(s: &str) -> Result<Vec<Constraint>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Fixed(DensityOperator),
    /// Pure state `U(θ)e₀` on the unitary chart, optimized with the instruments.
    Optimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectConstraintSet {
    pub targets: Vec<Constraint>,
    pub state: StateSpec,
}

impl EffectConstraintSet {
    pub fn new(targets: Vec<Constraint>, state: StateSpec) -> Self {
        Self { targets, state }
    }

    pub fn objective(&self, values: &Diagnostics) -> f64 {
        self.targets
            .iter()
            .map(|t| t.violation(values.get(t.diagnostic)).powi(2))
            .sum()
    }

    pub fn satisfied(&self, values: &Diagnostics) -> bool {
        self.targets
            .iter()
            .all(|t| t.violation(values.get(t.diagnostic)) == 0.0)
    }
}

/// Instrument-pair families available to the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Lüders qubit pairs with rank-one "yes" projections.
    Projective2,
    /// Lüders pairs on `C⁴` with rank-two "yes" projections.
    Projective4,
    /// [`ok_commuting_pair`].
    Ok4,
    /// Sharp qubit pairs with Kraus `V_x E(x)`, `V_x` an arbitrary unitary.
    /// The unitary chart is centred on [`SHARP_OFFSET`], so the zero vector is
    /// already a non-projective pair.
    Sharp2,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Projective2, Family::Projective4, Family::Ok4, Family::Sharp2];

    pub fn id(self) -> &'static str {
        match self {
            Family::Projective2 => "projective2",
            Family::Projective4 => "projective4",
            Family::Ok4 => "ok4",
            Family::Sharp2 => "sharp2",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Projective2 | Family::Sharp2 => 2,
            Family::Projective4 | Family::Ok4 => 4,
        }
    }

    /// Instrument parameters, not counting an optimized state.
    pub fn param_count(self) -> usize {
        match self {
            Family::Projective2 => 8,
            Family::Projective4 => 32,
            Family::Ok4 => OK_PAIR_PARAMS,
            Family::Sharp2 => 24,
        }
    }

    pub fn build(self, params: &[f64]) -> Result<(Instrument, Instrument)> {
        if params.len() != self.param_count() {
            return Err(Error::BadParameterLength {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        match self {
            Family::Projective2 | Family::Projective4 => {
                let d = self.dim();
                let rank = d / 2;
                let half = d * d;
                let a = rotated_luders(d, rank, &params[..half])?;
                let b = rotated_luders(d, rank, &params[half..])?;
                Ok((a, b))
            }
            Family::Ok4 => {
                let (a, b, _, _) = ok_commuting_pair(params)?;
                Ok((a, b))
            }
            Family::Sharp2 => Ok((sharp_qubit(&params[..12])?, sharp_qubit(&params[12..])?)),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

fn yes_projection(d: usize, rank: usize, params: &[f64]) -> Result<CMatrix> {
    let u = unitary_from_params(d, params)?;
    let mut p = diag(&vec![0.0; d]);
    for i in 0..rank {
        let v = u.column(i).into_owned();
        p += outer(&v, &v);
    }
    Ok(p)
}

fn rotated_luders(d: usize, rank: usize, params: &[f64]) -> Result<Instrument> {
    Ok(projective_instrument(&binary_family(&yes_projection(d, rank, params)?)?))
}

/// Chart origin of the Sharp2 outcome unitaries: `exp(iπ/4 σ_x)`, which moves
/// `e₀` off its own ray.
pub const SHARP_OFFSET: [f64; 4] = [0.0, 0.0, std::f64::consts::FRAC_PI_4, 0.0];

fn sharp_qubit(params: &[f64]) -> Result<Instrument> {
    let spec = binary_family(&yes_projection(2, 1, &params[..4])?)?;
    let kraus = spec
        .projections()
        .iter()
        .zip(params[4..].chunks(4))
        .map(|(p, chunk)| {
            let shifted: Vec<f64> = chunk.iter().zip(SHARP_OFFSET).map(|(c, o)| c + o).collect();
            Ok(vec![unitary_from_params(2, &shifted)? * p.matrix()])
        })
        .collect::<Result<_>>()?;
    Instrument::new(spec.outcomes().to_vec(), kraus)
}

/// Values of every diagnostic at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub qoe_deviation: f64,
    pub aba_residual: f64,
    pub bab_residual: f64,
    pub aa_residual: f64,
    pub bb_residual: f64,
    pub qq_abs: f64,
    pub ftp_abs: f64,
    pub u_comm_norm: f64,
    pub o_comm_norm: f64,
}

impl Diagnostics {
    pub fn get(&self, d: Diagnostic) -> f64 {
        match d {
            Diagnostic::QoeDeviation => self.qoe_deviation,
            Diagnostic::AbaResidual => self.aba_residual,
            Diagnostic::BabResidual => self.bab_residual,
            Diagnostic::AaResidual => self.aa_residual,
            Diagnostic::BbResidual => self.bb_residual,
            Diagnostic::QqAbs => self.qq_abs,
            Diagnostic::FtpAbs => self.ftp_abs,
            Diagnostic::UCommNorm => self.u_comm_norm,
            Diagnostic::OCommNorm => self.o_comm_norm,
        }
    }
}

/// Evaluates one diagnostic for the pair `(a, b)` at `rho`.
pub fn evaluate_diagnostic(d: Diagnostic, a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<f64> {
    Ok(match d {
        Diagnostic::QoeDeviation => qoe_max_deviation(a, b, rho)?,
        Diagnostic::AbaResidual => rre_report(a, b, rho)?.aba_residual,
        Diagnostic::BabResidual => rre_report(a, b, rho)?.bab_residual,
        Diagnostic::AaResidual => rre_report(a, b, rho)?.aa_residual,
        Diagnostic::BbResidual => rre_report(a, b, rho)?.bb_residual,
        Diagnostic::QqAbs => qq_value(a, b, rho)?.q.abs(),
        Diagnostic::FtpAbs => {
            let mut worst: f64 = 0.0;
            for &y in b.outcomes().labels() {
                worst = worst.max(ftp_residual(a, b, y, rho)?.abs());
            }
            worst
        }
        Diagnostic::UCommNorm => {
            let mut worst: f64 = 0.0;
            for &x in a.outcomes().labels() {
                for &y in b.outcomes().labels() {
                    worst = worst.max(u_commutator_norm(a, x, b, y)?);
                }
            }
            worst
        }
        Diagnostic::OCommNorm => o_commutator_norm(a, b)?,
    })
}

/// Values of the targeted diagnostics, in target order.
fn evaluate_targets(targets: &[Constraint], a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<Vec<f64>> {
    let mut rre: Option<RreReport> = None;
    let mut values = Vec::with_capacity(targets.len());
    for t in targets {
        let rre_value = |r: &RreReport| match t.diagnostic {
            Diagnostic::AbaResidual => Some(r.aba_residual),
            Diagnostic::BabResidual => Some(r.bab_residual),
            Diagnostic::AaResidual => Some(r.aa_residual),
            Diagnostic::BbResidual => Some(r.bb_residual),
            _ => None,
        };
        let value = match t.diagnostic {
            Diagnostic::AbaResidual | Diagnostic::BabResidual | Diagnostic::AaResidual | Diagnostic::BbResidual => {
                if rre.is_none() {
                    rre = Some(rre_report(a, b, rho)?);
                }
                rre_value(rre.as_ref().expect("just set")).expect("RRE diagnostic")
            }
            d => evaluate_diagnostic(d, a, b, rho)?,
        };
        values.push(value);
    }
    Ok(values)
}

pub fn evaluate_diagnostics(a: &Instrument, b: &Instrument, rho: &DensityOperator) -> Result<Diagnostics> {
    let rre = rre_report(a, b, rho)?;
    Ok(Diagnostics {
        qoe_deviation: evaluate_diagnostic(Diagnostic::QoeDeviation, a, b, rho)?,
        aba_residual: rre.aba_residual,
        bab_residual: rre.bab_residual,
        aa_residual: rre.aa_residual,
        bb_residual: rre.bb_residual,
        qq_abs: evaluate_diagnostic(Diagnostic::QqAbs, a, b, rho)?,
        ftp_abs: evaluate_diagnostic(Diagnostic::FtpAbs, a, b, rho)?,
        u_comm_norm: evaluate_diagnostic(Diagnostic::UCommNorm, a, b, rho)?,
        o_comm_norm: evaluate_diagnostic(Diagnostic::OCommNorm, a, b, rho)?,
    })
}

/// Pure state `U(params)e₀`.
pub fn state_from_params(dim: usize, params: &[f64]) -> Result<DensityOperator> {
    let u = unitary_from_params(dim, params)?;
    let psi = StateVector::normalized(&u * basis_vector(dim, 0))?;
    Ok(psi.density())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub restarts: usize,
    /// Nelder–Mead iterations per restart.
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub family: Family,
    /// Instrument parameters followed by state parameters when the state is optimized.
    pub params: Vec<f64>,
    pub state: DensityOperator,
    pub diagnostics: Diagnostics,
    pub objective: f64,
    pub feasible: bool,
    /// Nelder–Mead iterations summed over the restarts that ran.
    pub iterations: usize,
    pub restarts_run: usize,
    /// Index of the restart that produced `params`.
    pub best_restart: usize,
    pub seed: u64,
}

/// Instruments and state encoded by a parameter vector.
pub fn decode(
    family: Family,
    state: &StateSpec,
    params: &[f64],
) -> Result<(Instrument, Instrument, DensityOperator)> {
    let n = family.param_count();
    let expected = n + state_params(family, state);
    if params.len() != expected {
        return Err(Error::BadParameterLength {
            expected,
            found: params.len(),
        });
    }
    let (a, b) = family.build(&params[..n])?;
    let rho = match state {
        StateSpec::Fixed(rho) => rho.clone(),
        StateSpec::Optimize => state_from_params(family.dim(), &params[n..])?,
    };
    Ok((a, b, rho))
}

fn state_params(family: Family, state: &StateSpec) -> usize {
    match state {
        StateSpec::Fixed(_) => 0,
        StateSpec::Optimize => family.dim() * family.dim(),
    }
}

/// Constraint violations at `params`; `None` where the point cannot be evaluated.
fn violations(family: Family, constraints: &EffectConstraintSet, params: &[f64]) -> Option<Vec<f64>> {
    let (a, b, rho) = decode(family, &constraints.state, params).ok()?;
    let values = evaluate_targets(&constraints.targets, &a, &b, &rho).ok()?;
    let v: Vec<f64> = constraints
        .targets
        .iter()
        .zip(values)
        .map(|(t, value)| t.violation(value))
        .collect();
    v.iter().all(|x| x.is_finite()).then_some(v)
}

fn squared(v: &Option<Vec<f64>>) -> f64 {
    v.as_ref()
        .map_or(f64::INFINITY, |v| v.iter().map(|x| x * x).sum())
}

struct Local {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
}

/// Alternates Nelder–Mead stages (simplex scales from [`SIMPLEX_STEPS`],
/// each restarted at the current best) with Gauss–Newton polishing of the
/// violation vector, until `max_iters` is spent, the objective hits zero, or
/// [`MAX_STALLS`] stages in a row fail to halve it.
fn refine(r: &dyn Fn(&[f64]) -> Option<Vec<f64>>, x0: Vec<f64>, max_iters: usize) -> Local {
    let f = |x: &[f64]| squared(&r(x));
    // Residuals vanish quadratically at feasible points; their square roots
    // have the same zeros and a non-degenerate Jacobian there.
    let root = |x: &[f64]| r(x).map(|v| v.into_iter().map(f64::sqrt).collect::<Vec<_>>());
    let mut best = Local {
        f: f(&x0),
        x: x0,
        iterations: 0,
    };
    let mut stalls = 0;
    for &step in SIMPLEX_STEPS.iter().cycle() {
        if best.f == 0.0 || best.iterations >= max_iters || stalls >= MAX_STALLS {
            break;
        }
        let before = best.f;
        let stage = (STAGE_ITERS_PER_PARAM * best.x.len()).min(max_iters - best.iterations);
        let (x, fx, used) = nelder_mead(&f, &best.x, step, stage);
        best.iterations += used.max(1);
        if fx < best.f {
            best.x = x;
            best.f = fx;
        }
        if best.f > 0.0 && best.f.is_finite() && best.iterations < max_iters {
            let (x, _, used) = gauss_newton(&root, &best.x, max_iters - best.iterations);
            best.iterations += used;
            let fx = f(&x);
            if fx < best.f {
                best.x = x;
                best.f = fx;
            }
        }
        if best.f > STALL_RATIO * before {
            stalls += 1;
        } else {
            stalls = 0;
        }
    }
    best
}

/// Minimum-norm Gauss–Newton steps with forward-difference Jacobians and
/// halving line search.
fn gauss_newton(r: &dyn Fn(&[f64]) -> Option<Vec<f64>>, x0: &[f64], max_iters: usize) -> (Vec<f64>, f64, usize) {
    const H: f64 = 1e-7;
    let mut x = x0.to_vec();
    let Some(mut res) = r(&x) else {
        return (x, f64::INFINITY, 0);
    };
    let mut fx: f64 = res.iter().map(|v| v * v).sum();
    let mut iters = 0;
    while iters < max_iters && fx > 0.0 {
        iters += 1;
        let (m, n) = (res.len(), x.len());
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let mut xk = x.clone();
            xk[k] += H;
            let Some(rk) = r(&xk) else {
                return (x, fx, iters);
            };
            for i in 0..m {
                jac[(i, k)] = (rk[i] - res[i]) / H;
            }
        }
        let jjt = &jac * jac.transpose();
        let ridge = 1e-12 * (1.0 + jjt.diagonal().max());
        let lhs = jjt + nalgebra::DMatrix::<f64>::identity(m, m) * ridge;
        let Some(z) = lhs.cholesky().map(|ch| ch.solve(&nalgebra::DVector::from_vec(res.clone()))) else {
            break;
        };
        let delta = -(jac.transpose() * z);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, di)| xi + t * di).collect();
            if let Some(rt) = r(&trial) {
                let ft: f64 = rt.iter().map(|v| v * v).sum();
                if ft < fx {
                    x = trial;
                    res = rt;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, fx, iters)
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iters: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    // Dimension-adaptive coefficients (Gao and Han).
    let nf = n as f64;
    let expand = 2.0 / nf.max(2.0);
    let contract = 0.75 - 0.5 / nf.max(2.0);
    let shrink = 1.0 - 1.0 / nf.max(2.0);
    let mut iters = 0;
    while iters < max_iters {
        simplex.sort_by(|p, q| p.1.total_cmp(&q.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        if lo == 0.0 || (hi - lo).abs() <= 1e-30 + 1e-15 * lo.abs() && diameter(&simplex) < 1e-13 {
            break;
        }
        iters += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(1.0 + expand);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(contract);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-contract);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            for (v, b) in p.0.iter_mut().zip(&x_best) {
                *v = b + shrink * (*v - b);
            }
            p.1 = f(&p.0);
        }
    }
    let best = simplex
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty simplex");
    (best.0, best.1, iters)
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let x0 = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|p| p.0.iter().zip(x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn run_restart(
    family: Family,
    constraints: &EffectConstraintSet,
    budget: &Budget,
    index: usize,
) -> Local {
    let n = family.param_count() + state_params(family, &constraints.state);
    let x0 = if index == 0 {
        vec![0.0; n]
    } else {
        let mut rng = random::rng(budget.seed.wrapping_add(index as u64));
        (0..n)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect()
    };
    let r = |x: &[f64]| violations(family, constraints, x);
    refine(&r, x0, budget.max_iters)
}

/// One local refinement from `start`; returns the end point and its objective.
pub fn local_search(
    family: Family,
    constraints: &EffectConstraintSet,
    start: Vec<f64>,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let r = |x: &[f64]| violations(family, constraints, x);
    let local = refine(&r, start, max_iters);
    (local.x, local.f)
}

/// Restart 0 starts at the zero vector; restart `r > 0` draws its start from
/// seed `seed + r`. Restarts run in parallel batches of [`SEARCH_BATCH`] and
/// the search stops after the first batch containing a feasible point. The
/// best point (lowest objective, then lowest restart index) is re-evaluated
/// from scratch.
pub fn search_effects(family: Family, constraints: &EffectConstraintSet, budget: &Budget) -> Result<SearchResult> {
    if budget.restarts == 0 {
        return Err(Error::BadParameters {
            reason: "at least one restart is required".into(),
        });
    }
    if let StateSpec::Fixed(rho) = &constraints.state {
        crate::linalg::ensure_dim(family.dim(), rho.dim())?;
    }
    let mut best: Option<(usize, Local)> = None;
    let mut iterations = 0;
    let mut restarts_run = 0;
    let mut start = 0;
    while start < budget.restarts {
        let end = (start + SEARCH_BATCH).min(budget.restarts);
        let batch: Vec<Local> = (start..end)
            .into_par_iter()
            .map(|r| run_restart(family, constraints, budget, r))
            .collect();
        restarts_run = end;
        for (offset, local) in batch.into_iter().enumerate() {
            iterations += local.iterations;
            let better = match &best {
                None => true,
                Some((_, b)) => local.f < b.f,
            };
            if better {
                best = Some((start + offset, local));
            }
        }
        if best.as_ref().is_some_and(|(_, b)| b.f == 0.0) {
            break;
        }
        start = end;
    }
    let (best_restart, local) = best.expect("at least one restart");
    let (a, b, state) = decode(family, &constraints.state, &local.x)?;
    let diagnostics = evaluate_diagnostics(&a, &b, &state)?;
    Ok(SearchResult {
        family,
        objective: constraints.objective(&diagnostics),
        feasible: constraints.satisfied(&diagnostics),
        params: local.x,
        state,
        diagnostics,
        iterations,
        restarts_run,
        best_restart,
        seed: budget.seed,
    })
}
