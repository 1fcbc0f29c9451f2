//! Synthetic respondents sent through instrument sequences.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with a `u64`.
//! Trajectories are simulated in chunks of [`CHUNK`]; chunk `k` draws from
//! stream `k` of the generator seeded with `seed`, so counts do not depend
//! on the thread count. Each step draws `u ~ U[0,1)` and picks the first
//! outcome, in label order, whose cumulative probability exceeds `u`.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument::{Instrument, P_FLOOR};
use crate::linalg::{ensure_dim, DensityOperator};
use crate::random;

/// Trajectories per parallel chunk.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub outcomes: Vec<f64>,
    pub final_state: DensityOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    /// Every outcome tuple of the sequence in lexicographic label order,
    /// with its count (zero counts included).
    pub counts: Vec<(Vec<f64>, u64)>,
    pub n: u64,
    /// `counts / n`, aligned with `counts`.
    pub frequencies: Vec<f64>,
}

impl EmpiricalStats {
    pub fn count(&self, tuple: &[f64]) -> Option<u64> {
        self.counts.iter().find(|(t, _)| t == tuple).map(|(_, c)| *c)
    }

    pub fn frequency(&self, tuple: &[f64]) -> Option<f64> {
        self.count(tuple).map(|c| c as f64 / self.n as f64)
    }
}

/// Plug-in QQ estimate from two split-ballot tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqEstimate {
    pub q_hat: f64,
    pub q_se: f64,
    pub z: f64,
    pub n_ab: u64,
    pub n_ba: u64,
}

/// 2×2 answer counts indexed `[a answer][b answer]`, index 0 = yes, 1 = no.
pub type AnswerTable = [[u64; 2]; 2];

fn check_sequence(seq: &[&Instrument], rho: &DensityOperator) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::BadParameters {
            reason: "empty instrument sequence".into(),
        });
    }
    for inst in seq {
        ensure_dim(rho.dim(), inst.dim())?;
    }
    Ok(())
}

/// Inverse-CDF pick; outcomes with probability at or below [`P_FLOOR`]
/// are never chosen.
fn pick(probabilities: &[f64], u: f64) -> usize {
    let total: f64 = probabilities.iter().filter(|&&p| p > P_FLOOR).sum();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p <= P_FLOOR {
            continue;
        }
        acc += p / total;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// One respondent: sample, update, move to the next instrument.
pub fn sample_trajectory(seq: &[&Instrument], rho: &DensityOperator, rng: &mut random::Rng) -> Result<TrajectorySample> {
    check_sequence(seq, rho)?;
    let mut state = rho.clone();
    let mut outcomes = Vec::with_capacity(seq.len());
    for inst in seq {
        let i = pick(&inst.probabilities(&state)?, rng.random::<f64>());
        outcomes.push(inst.outcomes().labels()[i]);
        state = inst.update_at(i, state.matrix())?;
    }
    Ok(TrajectorySample {
        outcomes,
        final_state: state,
    })
}

/// Conditional outcome probabilities for every reachable prefix. The state
/// after a prefix is deterministic, so it is computed once per prefix.
struct PrefixTree {
    /// `probs[node]` over the outcomes of the instrument at that depth.
    probs: Vec<Vec<f64>>,
    /// `children[node][i]`, absent at the last depth or for unreachable outcomes.
    children: Vec<Vec<Option<usize>>>,
}

impl PrefixTree {
    fn build(seq: &[&Instrument], rho: &DensityOperator) -> Result<Self> {
        let mut tree = PrefixTree {
            probs: Vec::new(),
            children: Vec::new(),
        };
        tree.grow(seq, rho)?;
        Ok(tree)
    }

    fn grow(&mut self, seq: &[&Instrument], state: &DensityOperator) -> Result<usize> {
        let inst = seq[0];
        let node = self.probs.len();
        let probs = inst.probabilities(state)?;
        self.probs.push(probs.clone());
        self.children.push(vec![None; inst.len()]);
        if seq.len() > 1 {
            for (i, &p) in probs.iter().enumerate() {
                if p > P_FLOOR {
                    let next = inst.update_at(i, state.matrix())?;
                    let child = self.grow(&seq[1..], &next)?;
                    self.children[node][i] = Some(child);
                }
            }
        }
        Ok(node)
    }
}

/// Simulates `n` respondents and counts outcome tuples.
pub fn simulate_sequence(seq: &[&Instrument], rho: &DensityOperator, n: u64, seed: u64) -> Result<EmpiricalStats> {
    check_sequence(seq, rho)?;
    if n == 0 {
        return Err(Error::BadParameters {
            reason: "n must be at least 1".into(),
        });
    }
    let tree = PrefixTree::build(seq, rho)?;
    let radices: Vec<usize> = seq.iter().map(|i| i.len()).collect();
    let cells: usize = radices.iter().product();
    let chunks = n.div_ceil(CHUNK as u64);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = random::rng(seed);
            rng.set_stream(k);
            let size = (n - k * CHUNK as u64).min(CHUNK as u64);
            let mut local = vec![0u64; cells];
            for _ in 0..size {
                let mut node = 0;
                let mut cell = 0;
                for (depth, radix) in radices.iter().enumerate() {
                    let i = pick(&tree.probs[node], rng.random::<f64>());
                    cell = cell * radix + i;
                    if depth + 1 < radices.len() {
                        node = tree.children[node][i].expect("picked outcomes are reachable");
                    }
                }
                local[cell] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; cells],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
                acc
            },
        );
    let mut tuples = Vec::with_capacity(cells);
    for (cell, &count) in counts.iter().enumerate() {
        let mut rest = cell;
        let mut tuple = vec![0.0; seq.len()];
        for (depth, inst) in seq.iter().enumerate().rev() {
            tuple[depth] = inst.outcomes().labels()[rest % radices[depth]];
            rest /= radices[depth];
        }
        tuples.push((tuple, count));
    }
    let frequencies = tuples.iter().map(|(_, c)| *c as f64 / n as f64).collect();
    Ok(EmpiricalStats {
        counts: tuples,
        n,
        frequencies,
    })
}

fn yes_index(inst: &Instrument) -> Result<usize> {
    let labels = inst.outcomes().labels();
    if labels.len() != 2 {
        return Err(Error::NotBinaryOutcomes {
            found: labels.len(),
        });
    }
    Ok(if labels[0] > labels[1] { 0 } else { 1 })
}

/// Answer tables for the two arms of a split-ballot poll with `n` respondents
/// per arm. The AB arm uses `seed`, the BA arm `seed + 1`.
pub fn split_ballot_tables(
    a: &Instrument,
    b: &Instrument,
    rho: &DensityOperator,
    n: u64,
    seed: u64,
) -> Result<(AnswerTable, AnswerTable)> {
    let (ay, by) = (yes_index(a)?, yes_index(b)?);
    let ab = simulate_sequence(&[a, b], rho, n, seed)?;
    let ba = simulate_sequence(&[b, a], rho, n, seed.wrapping_add(1))?;
    let slot = |i: usize, yes: usize| usize::from(i != yes);
    let mut t_ab = [[0; 2]; 2];
    let mut t_ba = [[0; 2]; 2];
    for (idx, (_, count)) in ab.counts.iter().enumerate() {
        let (i, j) = (idx / 2, idx % 2);
        t_ab[slot(i, ay)][slot(j, by)] += count;
    }
    for (idx, (_, count)) in ba.counts.iter().enumerate() {
        let (j, i) = (idx / 2, idx % 2);
        t_ba[slot(i, ay)][slot(j, by)] += count;
    }
    Ok((t_ab, t_ba))
}

/// `q̂ = f_BA(yy) + f_BA(nn) − f_AB(yy) − f_AB(nn)` with
/// `se² = p_AB(1 − p_AB)/n_AB + p_BA(1 − p_BA)/n_BA`, `p` the diagonal share.
pub fn empirical_qq(counts_ab: &AnswerTable, counts_ba: &AnswerTable) -> Result<QqEstimate> {
    let total = |t: &AnswerTable| t.iter().flatten().sum::<u64>();
    let (n_ab, n_ba) = (total(counts_ab), total(counts_ba));
    if n_ab == 0 || n_ba == 0 {
        return Err(Error::EmptyTable);
    }
    let diagonal = |t: &AnswerTable, n: u64| (t[0][0] + t[1][1]) as f64 / n as f64;
    let p_ab = diagonal(counts_ab, n_ab);
    let p_ba = diagonal(counts_ba, n_ba);
    let q_hat = p_ba - p_ab;
    let q_se = (p_ab * (1.0 - p_ab) / n_ab as f64 + p_ba * (1.0 - p_ba) / n_ba as f64).sqrt();
    if q_se == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(QqEstimate {
        q_hat,
        q_se,
        z: q_hat / q_se,
        n_ab,
        n_ba,
    })
}
