//! JSON encodings of matrices and instruments. Complex numbers are
//! `[re, im]`; matrices are row-major arrays of rows. Floats are written in
//! shortest round-trip form, so decoding recovers every bit.

use serde::{Deserialize, Serialize};

use qmt_core::instrument::Instrument;
use qmt_core::linalg::{c, CMatrix, CVector, DEFAULT_TOL};

use crate::error::{CliError, CliResult};

pub type ComplexDoc = [f64; 2];
pub type MatrixDoc = Vec<Vec<ComplexDoc>>;

pub fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Square matrix of side `dim`; `object` names the owner in errors.
pub fn matrix_from_doc(doc: &MatrixDoc, dim: usize, object: &str) -> CliResult<CMatrix> {
    if doc.len() != dim || doc.iter().any(|row| row.len() != dim) {
        return Err(CliError::validation(
            object,
            format!("matrix must be {dim}x{dim}"),
        ));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| c(doc[i][j][0], doc[i][j][1])))
}

pub fn vector_to_doc(v: &CVector) -> Vec<ComplexDoc> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_doc(doc: &[ComplexDoc], dim: usize, object: &str) -> CliResult<CVector> {
    if doc.len() != dim {
        return Err(CliError::validation(
            object,
            format!("vector has {} entries, expected {dim}", doc.len()),
        ));
    }
    Ok(CVector::from_iterator(dim, doc.iter().map(|z| c(z[0], z[1]))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentDoc {
    pub dim: usize,
    pub outcomes: Vec<f64>,
    /// Kraus operators per outcome, aligned with `outcomes`.
    pub kraus: Vec<Vec<MatrixDoc>>,
}

impl InstrumentDoc {
    pub fn from_instrument(inst: &Instrument) -> Self {
        Self {
            dim: inst.dim(),
            outcomes: inst.outcomes().labels().to_vec(),
            kraus: inst
                .kraus_families()
                .iter()
                .map(|family| family.iter().map(matrix_to_doc).collect())
                .collect(),
        }
    }

    pub fn to_instrument(&self, object: &str) -> CliResult<Instrument> {
        let kraus = self
            .kraus
            .iter()
            .enumerate()
            .map(|(i, family)| {
                family
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix_from_doc(m, self.dim, &format!("{object}, Kraus operator {k} of outcome {i}")))
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect::<CliResult<Vec<_>>>()?;
        let inst = Instrument::new(self.outcomes.clone(), kraus).map_err(|e| CliError::validation(object, e))?;
        let report = inst.validate(DEFAULT_TOL);
        if !report.passed {
            return Err(CliError::validation(
                object,
                format!(
                    "not a valid instrument (trace residual {:.3e}, Choi minima {:?})",
                    report.trace_residual, report.choi_min_eigenvalues
                ),
            ));
        }
        Ok(inst)
    }
}

pub fn persist_instrument(inst: &Instrument) -> String {
    serde_json::to_string_pretty(&InstrumentDoc::from_instrument(inst)).expect("finite entries serialize")
}

pub fn load_instrument(text: &str) -> CliResult<Instrument> {
    let doc: InstrumentDoc = serde_json::from_str(text).map_err(|e| CliError::json("instrument document", &e))?;
    doc.to_instrument("instrument document")
}

#[cfg(test)]
mod tests {
    use super::*;
    use qmt_core::models::random_unsharp;
    use qmt_core::random;

    #[test]
    fn identity_round_trip_is_byte_identical() {
        let text = persist_instrument(&Instrument::identity(3, 1.0));
        let again = persist_instrument(&load_instrument(&text).unwrap());
        assert_eq!(text, again);
    }

    #[test]
    fn unsharp_round_trip_is_exact() {
        let inst = random_unsharp(3, 3, 7).unwrap();
        let loaded = load_instrument(&persist_instrument(&inst)).unwrap();
        assert_eq!(loaded, inst);
        let mut rng = random::rng(70);
        for _ in 0..10 {
            let rho = random::state(3, &mut rng);
            let p = inst.probabilities(&rho).unwrap();
            let q = loaded.probabilities(&rho).unwrap();
            for (x, y) in p.iter().zip(&q) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn truncated_document_fails_to_parse() {
        let text = persist_instrument(&Instrument::identity(2, 0.0));
        let err = load_instrument(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn non_trace_preserving_is_rejected() {
        let doc = r#"{"dim": 1, "outcomes": [0.0], "kraus": [[[[[0.5, 0.0]]]]]}"#;
        assert!(matches!(load_instrument(doc), Err(CliError::Validation { .. })));
        let ragged = r#"{"dim": 2, "outcomes": [0.0], "kraus": [[[[[1.0, 0.0]]]]]}"#;
        assert!(matches!(load_instrument(ragged), Err(CliError::Validation { .. })));
    }
}
