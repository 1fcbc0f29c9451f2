//! Scenario documents: states, instruments and requested analyses.

use serde::{Deserialize, Serialize};

use qmt_core::instrument::Instrument;
use qmt_core::linalg::{
    spectral_decompose, DensityOperator, Projection, SelfAdjointOperator, SpectralDecomposition, StateVector,
    DEFAULT_CLUSTER_TOL, DEFAULT_TOL,
};
use qmt_core::classify::CLASSIFY_TOL;
use qmt_core::models;

use crate::document::{matrix_from_doc, vector_from_doc, ComplexDoc, InstrumentDoc, MatrixDoc};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub states: Vec<StateDef>,
    #[serde(default)]
    pub instruments: Vec<InstrumentDef>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Numerical tolerance for effect flags.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Tolerance for the sharp/repeatable/projective tests.
    #[serde(default = "default_classify_tol")]
    pub classify: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_classify_tol() -> f64 {
    CLASSIFY_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            classify: CLASSIFY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateDef {
    Vector { name: String, amplitudes: Vec<ComplexDoc> },
    Density { name: String, matrix: MatrixDoc },
    Basis { name: String, index: usize },
    MaximallyMixed { name: String },
}

impl StateDef {
    pub fn name(&self) -> &str {
        match self {
            StateDef::Vector { name, .. }
            | StateDef::Density { name, .. }
            | StateDef::Basis { name, .. }
            | StateDef::MaximallyMixed { name } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentDef {
    Kraus {
        name: String,
        outcomes: Vec<f64>,
        kraus: Vec<Vec<MatrixDoc>>,
    },
    /// Lüders instrument of a self-adjoint observable; outcomes are its eigenvalues.
    Lueders { name: String, observable: MatrixDoc },
    Projective {
        name: String,
        outcomes: Vec<f64>,
        projections: Vec<MatrixDoc>,
    },
    TrivialNoninvasive { name: String, weights: Vec<f64> },
    RandomUnsharp { name: String, outcomes: usize, seed: u64 },
    Identity { name: String, outcome: f64 },
    WangBusemeyerPair { names: [String; 2], theta: f64 },
    OkCommutingPair { names: [String; 2], params: Vec<f64> },
}

impl InstrumentDef {
    pub fn names(&self) -> Vec<&str> {
        match self {
            InstrumentDef::Kraus { name, .. }
            | InstrumentDef::Lueders { name, .. }
            | InstrumentDef::Projective { name, .. }
            | InstrumentDef::TrivialNoninvasive { name, .. }
            | InstrumentDef::RandomUnsharp { name, .. }
            | InstrumentDef::Identity { name, .. } => vec![name],
            InstrumentDef::WangBusemeyerPair { names, .. } | InstrumentDef::OkCommutingPair { names, .. } => {
                vec![&names[0], &names[1]]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    Classify { instrument: String },
    Probabilities { instrument: String, state: String },
    Qoe { a: String, b: String, state: String },
    Rre { a: String, b: String, state: String },
    Qq { a: String, b: String, state: String },
    Ftp { a: String, b: String, state: String },
    Commutators { a: String, b: String },
    /// Every pair diagnostic at once.
    Effects { a: String, b: String, state: String },
    Simulate { sequence: Vec<String>, state: String, trials: u64 },
}

impl Analysis {
    fn references(&self) -> (Vec<&str>, Option<&str>) {
        match self {
            Analysis::Classify { instrument } => (vec![instrument], None),
            Analysis::Probabilities { instrument, state } => (vec![instrument], Some(state)),
            Analysis::Qoe { a, b, state }
            | Analysis::Rre { a, b, state }
            | Analysis::Qq { a, b, state }
            | Analysis::Ftp { a, b, state }
            | Analysis::Effects { a, b, state } => (vec![a, b], Some(state)),
            Analysis::Commutators { a, b } => (vec![a, b], None),
            Analysis::Simulate { sequence, state, .. } => (sequence.iter().map(String::as_str).collect(), Some(state)),
        }
    }
}

/// Materialized states and instruments, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub states: Vec<(String, DensityOperator)>,
    pub instruments: Vec<(String, Instrument)>,
}

impl Resolved {
    pub fn state(&self, name: &str) -> CliResult<&DensityOperator> {
        self.states
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CliError::validation(format!("state '{name}'"), "not defined"))
    }

    pub fn instrument(&self, name: &str) -> CliResult<&Instrument> {
        self.instruments
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, i)| i)
            .ok_or_else(|| CliError::validation(format!("instrument '{name}'"), "not defined"))
    }
}

fn resolve_state(def: &StateDef, dim: usize) -> CliResult<DensityOperator> {
    let object = format!("state '{}'", def.name());
    let invalid = |e: qmt_core::Error| CliError::validation(&object, e);
    match def {
        StateDef::Vector { amplitudes, .. } => {
            let v = vector_from_doc(amplitudes, dim, &object)?;
            Ok(StateVector::new(v).map_err(invalid)?.density())
        }
        StateDef::Density { matrix, .. } => DensityOperator::new(matrix_from_doc(matrix, dim, &object)?).map_err(invalid),
        StateDef::Basis { index, .. } => {
            if *index >= dim {
                return Err(CliError::validation(object, format!("basis index {index} outside dimension {dim}")));
            }
            Ok(DensityOperator::basis(dim, *index))
        }
        StateDef::MaximallyMixed { .. } => Ok(DensityOperator::maximally_mixed(dim)),
    }
}

fn require_dim(object: &str, needed: usize, dim: usize) -> CliResult<()> {
    if needed != dim {
        return Err(CliError::validation(
            object,
            format!("constructor works in dimension {needed}, scenario has {dim}"),
        ));
    }
    Ok(())
}

fn resolve_instrument(def: &InstrumentDef, dim: usize) -> CliResult<Vec<Instrument>> {
    let object = format!("instrument '{}'", def.names().join("', '"));
    let invalid = |e: qmt_core::Error| CliError::validation(&object, e);
    Ok(match def {
        InstrumentDef::Kraus { outcomes, kraus, .. } => {
            let doc = InstrumentDoc {
                dim,
                outcomes: outcomes.clone(),
                kraus: kraus.clone(),
            };
            vec![doc.to_instrument(&object)?]
        }
        InstrumentDef::Lueders { observable, .. } => {
            let a = SelfAdjointOperator::new(matrix_from_doc(observable, dim, &object)?).map_err(invalid)?;
            let spec = spectral_decompose(&a, DEFAULT_CLUSTER_TOL).map_err(invalid)?;
            vec![models::projective_instrument(&spec)]
        }
        InstrumentDef::Projective {
            outcomes, projections, ..
        } => {
            let ps = projections
                .iter()
                .map(|m| Projection::new(matrix_from_doc(m, dim, &object)?).map_err(invalid))
                .collect::<CliResult<Vec<_>>>()?;
            let spec = SpectralDecomposition::new(outcomes.clone(), ps).map_err(invalid)?;
            vec![models::projective_instrument(&spec)]
        }
        InstrumentDef::TrivialNoninvasive { weights, .. } => {
            vec![models::trivial_noninvasive(dim, weights).map_err(invalid)?]
        }
        InstrumentDef::RandomUnsharp { outcomes, seed, .. } => {
            vec![models::random_unsharp(dim, *outcomes, *seed).map_err(invalid)?]
        }
        InstrumentDef::Identity { outcome, .. } => {
            if !outcome.is_finite() {
                return Err(CliError::validation(object, "outcome must be finite"));
            }
            vec![Instrument::identity(dim, *outcome)]
        }
        InstrumentDef::WangBusemeyerPair { theta, .. } => {
            require_dim(&object, 2, dim)?;
            if !theta.is_finite() {
                return Err(CliError::validation(object, "theta must be finite"));
            }
            let (a, b) = models::wang_busemeyer_pair(*theta);
            vec![a, b]
        }
        InstrumentDef::OkCommutingPair { params, .. } => {
            require_dim(&object, 4, dim)?;
            let (a, b, _, _) = models::ok_commuting_pair(params).map_err(invalid)?;
            vec![a, b]
        }
    })
}

impl Scenario {
    /// Builds every state and instrument and checks that names are unique and
    /// analyses refer to defined objects.
    pub fn resolve(&self) -> CliResult<Resolved> {
        if self.dim == 0 {
            return Err(CliError::validation("scenario", "dim must be positive"));
        }
        for (what, t) in [("tolerances.tol", self.tolerances.tol), ("tolerances.classify", self.tolerances.classify)] {
            if !t.is_finite() || t < 0.0 {
                return Err(CliError::validation(what, format!("tolerance {t} must be finite and non-negative")));
            }
        }
        let mut states: Vec<(String, DensityOperator)> = Vec::new();
        for def in &self.states {
            let name = def.name().to_string();
            if states.iter().any(|(n, _)| *n == name) {
                return Err(CliError::validation(format!("state '{name}'"), "defined twice"));
            }
            states.push((name, resolve_state(def, self.dim)?));
        }
        let mut instruments: Vec<(String, Instrument)> = Vec::new();
        for def in &self.instruments {
            let built = resolve_instrument(def, self.dim)?;
            for (name, inst) in def.names().into_iter().zip(built) {
                if instruments.iter().any(|(n, _)| n == name) {
                    return Err(CliError::validation(format!("instrument '{name}'"), "defined twice"));
                }
                instruments.push((name.to_string(), inst));
            }
        }
        let resolved = Resolved { states, instruments };
        for (k, analysis) in self.analyses.iter().enumerate() {
            let (insts, state) = analysis.references();
            for name in insts {
                resolved
                    .instrument(name)
                    .map_err(|_| CliError::validation(format!("analysis {k}"), format!("unknown instrument '{name}'")))?;
            }
            if let Some(name) = state {
                resolved
                    .state(name)
                    .map_err(|_| CliError::validation(format!("analysis {k}"), format!("unknown state '{name}'")))?;
            }
        }
        Ok(resolved)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> CliResult<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| CliError::json("scenario", &e))?;
    scenario.resolve()?;
    Ok(scenario)
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("finite entries serialize")
}
