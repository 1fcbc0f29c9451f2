//! Seeded random operators, states and spectral families.
//!
//! All generators draw from [`Rng`] (ChaCha8), so a seed fixes the output on
//! every platform.

use nalgebra::DMatrix;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{
    c, outer, CMatrix, CVector, DensityOperator, Projection, SelfAdjointOperator,
    SpectralDecomposition, StateVector,
};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn unitary(dim: usize, rng: &mut Rng) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn pure_state(dim: usize, rng: &mut Rng) -> StateVector {
    let g = ginibre(dim, 1, rng);
    StateVector::normalized(CVector::from_column_slice(g.as_slice()))
        .expect("gaussian vector is nonzero almost surely")
}

/// Random mixed state `GG†/Tr[GG†]` with `G` a `dim × dim` Ginibre matrix.
pub fn density(dim: usize, rng: &mut Rng) -> DensityOperator {
    let g = ginibre(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::from_trusted(m.unscale(tr))
}

/// Mixed or pure state with equal odds.
pub fn state(dim: usize, rng: &mut Rng) -> DensityOperator {
    if rng.random_bool(0.5) {
        pure_state(dim, rng).density()
    } else {
        density(dim, rng)
    }
}

pub fn hermitian(dim: usize, rng: &mut Rng) -> SelfAdjointOperator {
    let g = ginibre(dim, dim, rng);
    SelfAdjointOperator::new((&g + g.adjoint()).scale(0.5)).expect("hermitian by construction")
}

/// Random spectral family with the given ranks in a Haar-random basis.
/// Outcomes are `0, 1, …, ranks.len() − 1`.
pub fn spectral_family(ranks: &[usize], rng: &mut Rng) -> SpectralDecomposition {
    let dim: usize = ranks.iter().sum();
    let u = unitary(dim, rng);
    spectral_family_in_basis(ranks, &u)
}

/// Spectral family whose `k`-th projection spans the next `ranks[k]` columns of `basis`.
pub fn spectral_family_in_basis(ranks: &[usize], basis: &CMatrix) -> SpectralDecomposition {
    let dim = basis.nrows();
    let mut start = 0;
    let mut projections = Vec::with_capacity(ranks.len());
    for &r in ranks {
        let mut p = CMatrix::zeros(dim, dim);
        for k in start..start + r {
            let v = basis.column(k).into_owned();
            p += outer(&v, &v);
        }
        projections.push(Projection::new(p).expect("columns of a unitary"));
        start += r;
    }
    let outcomes = (0..ranks.len()).map(|k| k as f64).collect();
    SpectralDecomposition::new(outcomes, projections).expect("orthonormal basis")
}

/// Random partition of `dim` into `parts` positive ranks.
pub fn ranks(dim: usize, parts: usize, rng: &mut Rng) -> Vec<usize> {
    assert!(parts >= 1 && parts <= dim);
    let mut ranks = vec![1; parts];
    for _ in parts..dim {
        let k = rng.random_range(0..parts);
        ranks[k] += 1;
    }
    ranks
}
