//! Constructors for the canonical instrument families.
//!
//! Binary models label "yes" as `1.0` and "no" as `0.0`.

use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{
    diag, eigh, frobenius, identity, outer, zeros, CMatrix, Projection, SpectralDecomposition,
    StateVector, DEFAULT_TOL,
};
use crate::random;
use crate::search::unitary_from_params;

pub const YES: f64 = 1.0;
pub const NO: f64 = 0.0;

/// Kraus operators drawn per outcome by [`random_unsharp`].
pub const UNSHARP_KRAUS_PER_OUTCOME: usize = 2;

/// Effects closer than this to a projection are re-sampled in [`random_unsharp`].
pub const UNSHARP_REJECT_TOL: f64 = 1e-6;

/// Number of real parameters taken by [`ok_commuting_pair`].
pub const OK_PAIR_PARAMS: usize = 16;

/// One unitary per outcome of a spectral family. `W_x` must map the range
/// of `E(x)` into itself; its action on the complement never enters the
/// Kraus operator `W_x E(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraEigenspaceUnitaries(pub Vec<CMatrix>);

/// Lüders instrument: Kraus `{E(x)}`.
pub fn projective_instrument(spec: &SpectralDecomposition) -> Instrument {
    let kraus = spec
        .projections()
        .iter()
        .map(|p| vec![p.matrix().clone()])
        .collect();
    Instrument::new(spec.outcomes().to_vec(), kraus).expect("spectral family is complete")
}

/// Sharp repeatable instrument with Kraus `{W_x E(x)}`.
pub fn srp_instrument(spec: &SpectralDecomposition, w: &IntraEigenspaceUnitaries) -> Result<Instrument> {
    if w.0.len() != spec.len() {
        return Err(Error::BadParameters {
            reason: format!("{} unitaries for {} outcomes", w.0.len(), spec.len()),
        });
    }
    let d = spec.dim();
    let mut kraus = Vec::with_capacity(spec.len());
    for ((x, p), wx) in spec.outcomes().iter().zip(spec.projections()).zip(&w.0) {
        let incompatible = |reason: String| Error::IncompatibleUnitaries {
            outcome: *x,
            reason,
        };
        if wx.nrows() != d || wx.ncols() != d {
            return Err(incompatible(format!("shape {}x{}, expected {d}x{d}", wx.nrows(), wx.ncols())));
        }
        let unitarity = frobenius(&(wx.adjoint() * wx - identity(d)));
        if unitarity > DEFAULT_TOL {
            return Err(incompatible(format!("not unitary (‖W†W − I‖ = {unitarity:.3e})")));
        }
        let e = p.matrix();
        let leak = frobenius(&((identity(d) - e) * wx * e));
        if leak > DEFAULT_TOL {
            return Err(incompatible(format!("moves the eigenspace (leak {leak:.3e})")));
        }
        kraus.push(vec![wx * e]);
    }
    Instrument::new(spec.outcomes().to_vec(), kraus)
}

/// `ℐ(x) = k_x·id`, Kraus `{√k_x·I}`.
pub fn trivial_noninvasive(dim: usize, weights: &[f64]) -> Result<Instrument> {
    if weights.is_empty() {
        return Err(Error::BadWeights {
            reason: "no weights".into(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::BadWeights {
            reason: format!("weight {w} is negative or not finite"),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > DEFAULT_TOL {
        return Err(Error::BadWeights {
            reason: format!("weights sum to {total}"),
        });
    }
    let outcomes = (0..weights.len()).map(|i| i as f64).collect();
    let kraus = weights
        .iter()
        .map(|k| vec![identity(dim).scale(k.sqrt())])
        .collect();
    Instrument::new(outcomes, kraus)
}

/// Random multi-Kraus instrument with non-projective effects; outcomes
/// `0..n_outcomes`. Gaussian Kraus operators `G` are normalized as
/// `G S^{-1/2}` with `S = Σ G†G`.
pub fn random_unsharp(dim: usize, n_outcomes: usize, seed: u64) -> Result<Instrument> {
    if dim < 2 || n_outcomes < 2 {
        return Err(Error::BadParameters {
            reason: format!("need dim ≥ 2 and ≥ 2 outcomes, got dim {dim}, {n_outcomes} outcomes"),
        });
    }
    let mut rng = random::rng(seed);
    loop {
        let raw: Vec<Vec<CMatrix>> = (0..n_outcomes)
            .map(|_| {
                (0..UNSHARP_KRAUS_PER_OUTCOME)
                    .map(|_| random::ginibre(dim, dim, &mut rng))
                    .collect()
            })
            .collect();
        let mut s = zeros(dim);
        for g in raw.iter().flatten() {
            s += g.adjoint() * g;
        }
        let (values, vectors) = eigh(&s);
        let mut inv_sqrt = zeros(dim);
        for (k, lambda) in values.iter().enumerate() {
            let v = vectors.column(k).into_owned();
            inv_sqrt += outer(&v, &v).unscale(lambda.sqrt());
        }
        let kraus: Vec<Vec<CMatrix>> = raw
            .into_iter()
            .map(|family| family.into_iter().map(|g| g * &inv_sqrt).collect())
            .collect();
        let inst = Instrument::new((0..n_outcomes).map(|i| i as f64).collect(), kraus)?;
        let near_projection = (0..n_outcomes).any(|i| {
            let e = inst.effect_at(i);
            frobenius(&(&e * &e - &e)) <= UNSHARP_REJECT_TOL
        });
        if !near_projection {
            return Ok(inst);
        }
    }
}

/// Binary spectral family `{no: I − P, yes: P}`.
pub fn binary_family(yes: &CMatrix) -> Result<SpectralDecomposition> {
    let d = yes.nrows();
    SpectralDecomposition::new(
        vec![NO, YES],
        vec![
            Projection::new(identity(d) - yes)?,
            Projection::new(yes.clone())?,
        ],
    )
}

/// Lüders qubit pair: A answers "yes" on `e₀`; B answers "yes" on
/// `cos θ e₀ + sin θ e₁`.
pub fn wang_busemeyer_pair(theta: f64) -> (Instrument, Instrument) {
    let a = binary_family(&diag(&[1.0, 0.0])).expect("computational basis");
    let b_yes = StateVector::from_reals(&[theta.cos(), theta.sin()]).expect("unit vector");
    let b = binary_family(&outer(b_yes.vector(), b_yes.vector())).expect("rank-one projection");
    (projective_instrument(&a), projective_instrument(&b))
}

/// Basis indices of the four two-dimensional eigenspaces used by
/// [`ok_commuting_pair`]: A-yes, A-no, B-yes, B-no.
const OK_BLOCKS: [[usize; 2]; 4] = [[0, 1], [2, 3], [0, 2], [1, 3]];

fn embed_block(u: &CMatrix, idx: [usize; 2]) -> CMatrix {
    let mut w = identity(4);
    for (r, &i) in idx.iter().enumerate() {
        for (s, &j) in idx.iter().enumerate() {
            w[(i, j)] = u[(r, s)];
        }
    }
    w
}

/// Commuting observables `A = diag(1,1,0,0)`, `B = diag(1,0,1,0)` on
/// `C² ⊗ C²`, measured by sharp repeatable instruments whose Kraus operators
/// are `W E` with `W` a U(2) rotation inside each eigenspace. The 16
/// parameters are four consecutive U(2) charts (see
/// [`unitary_from_params`]) for A-yes, A-no, B-yes, B-no.
pub fn ok_commuting_pair(
    params: &[f64],
) -> Result<(Instrument, Instrument, SpectralDecomposition, SpectralDecomposition)> {
    if params.len() != OK_PAIR_PARAMS {
        return Err(Error::BadParameters {
            reason: format!("expected {OK_PAIR_PARAMS} parameters, got {}", params.len()),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::BadParameters {
            reason: "parameters must be finite".into(),
        });
    }
    let spec_a = binary_family(&diag(&[1.0, 1.0, 0.0, 0.0]))?;
    let spec_b = binary_family(&diag(&[1.0, 0.0, 1.0, 0.0]))?;
    let w: Vec<CMatrix> = OK_BLOCKS
        .iter()
        .zip(params.chunks(4))
        .map(|(idx, p)| Ok(embed_block(&unitary_from_params(2, p)?, *idx)))
        .collect::<Result<_>>()?;
    // Family order is [no, yes].
    let a = srp_instrument(&spec_a, &IntraEigenspaceUnitaries(vec![w[1].clone(), w[0].clone()]))?;
    let b = srp_instrument(&spec_b, &IntraEigenspaceUnitaries(vec![w[3].clone(), w[2].clone()]))?;
    Ok((a, b, spec_a, spec_b))
}
