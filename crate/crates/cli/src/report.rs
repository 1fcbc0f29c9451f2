//! Analysis evaluation into JSON reports. Objects are `serde_json::Map`
//! (sorted keys), so output is stable.

use serde_json::{json, Map, Value};

use qmt_core::classify::{classify_label, repeatability_residual, sharpness_residual};
use qmt_core::effects::{
    ftp_residual, o_commutator_norm, qoe_report, qq_value, rre_report, u_commutator_norm,
};
use qmt_core::instrument::{sequential_joint, Instrument};
use qmt_core::linalg::DensityOperator;
use qmt_core::montecarlo::simulate_sequence;
use qmt_core::search::{evaluate_diagnostics, Diagnostic, SearchResult};

use crate::document::matrix_to_doc;
use crate::error::{CliError, CliResult};
use crate::scenario::{Analysis, Resolved, Scenario, Tolerances};

pub fn provenance(seed: u64, tolerances: &Tolerances) -> Value {
    json!({
        "tool": "qmt",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "tolerances": {"tol": tolerances.tol, "classify": tolerances.classify},
    })
}

fn num(context: &str) -> impl Fn(qmt_core::Error) -> CliError + '_ {
    move |e| CliError::numerical(context, e)
}

pub fn class_value(inst: &Instrument, tol: f64, context: &str) -> CliResult<Value> {
    let label = classify_label(inst, tol).map_err(num(context))?;
    Ok(json!({
        "taxon": label.taxon.code(),
        "sharp": label.sharp,
        "repeatable": label.repeatable,
        "projective": label.projective,
        "invasive": label.invasive,
        "sharpness_residual": sharpness_residual(inst).map_err(num(context))?,
        "repeatability_residual": repeatability_residual(inst).map_err(num(context))?,
    }))
}

pub fn classes(resolved: &Resolved, tol: f64) -> CliResult<Value> {
    let mut map = Map::new();
    for (name, inst) in &resolved.instruments {
        map.insert(name.clone(), class_value(inst, tol, &format!("instrument '{name}'"))?);
    }
    Ok(Value::Object(map))
}

pub fn validation_value(inst: &Instrument, tol: f64) -> Value {
    let report = inst.validate(tol);
    json!({
        "passed": report.passed,
        "trace_residual": report.trace_residual,
        "choi_min_eigenvalues": report.choi_min_eigenvalues,
    })
}

fn pair_effects(a: &Instrument, b: &Instrument, rho: &DensityOperator, tol: f64, context: &str) -> CliResult<Value> {
    let mut map = Map::new();
    map.insert("qoe".into(), qoe_value(a, b, rho, tol, context)?);
    map.insert("rre".into(), rre_value(a, b, rho, context)?);
    if a.len() == 2 && b.len() == 2 {
        map.insert("qq".into(), qq_json(a, b, rho, context)?);
    }
    map.insert("ftp".into(), ftp_value(a, b, rho, context)?);
    map.insert("commutators".into(), commutators_value(a, b, context)?);
    Ok(Value::Object(map))
}

fn qoe_value(a: &Instrument, b: &Instrument, rho: &DensityOperator, tol: f64, context: &str) -> CliResult<Value> {
    let rep = qoe_report(a, b, rho, tol).map_err(num(context))?;
    let entries: Vec<Value> = rep
        .entries
        .iter()
        .map(|e| {
            json!({"x": e.x, "y": e.y, "p_ab": e.p_ab, "p_ba": e.p_ba, "deviation": e.deviation, "trace_commutator": e.trace_commutator})
        })
        .collect();
    Ok(json!({"max_abs_deviation": rep.max_abs_deviation, "shows_qoe": rep.shows_qoe, "entries": entries}))
}

fn rre_value(a: &Instrument, b: &Instrument, rho: &DensityOperator, context: &str) -> CliResult<Value> {
    let r = rre_report(a, b, rho).map_err(num(context))?;
    Ok(json!({"aa_residual": r.aa_residual, "bb_residual": r.bb_residual, "aba_residual": r.aba_residual, "bab_residual": r.bab_residual}))
}

fn qq_json(a: &Instrument, b: &Instrument, rho: &DensityOperator, context: &str) -> CliResult<Value> {
    let q = qq_value(a, b, rho).map_err(num(context))?;
    Ok(json!({"q": q.q, "q_alt": q.q_alt, "q_y": q.q_y, "q_n": q.q_n}))
}

fn ftp_value(a: &Instrument, b: &Instrument, rho: &DensityOperator, context: &str) -> CliResult<Value> {
    let residuals = b
        .outcomes()
        .labels()
        .iter()
        .map(|&y| Ok(json!({"y": y, "residual": ftp_residual(a, b, y, rho).map_err(num(context))?})))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Value::Array(residuals))
}

fn commutators_value(a: &Instrument, b: &Instrument, context: &str) -> CliResult<Value> {
    let mut updates = Vec::new();
    for &x in a.outcomes().labels() {
        for &y in b.outcomes().labels() {
            updates.push(json!({"x": x, "y": y, "norm": u_commutator_norm(a, x, b, y).map_err(num(context))?}));
        }
    }
    Ok(json!({"update": updates, "effects_max": o_commutator_norm(a, b).map_err(num(context))?}))
}

fn simulate_value(seq: &[&Instrument], names: &[String], rho: &DensityOperator, trials: u64, seed: u64, context: &str) -> CliResult<Value> {
    let stats = simulate_sequence(seq, rho, trials, seed).map_err(num(context))?;
    let rows = stats
        .counts
        .iter()
        .zip(&stats.frequencies)
        .map(|((tuple, count), freq)| {
            let pairs: Vec<(&Instrument, f64)> = seq.iter().copied().zip(tuple.iter().copied()).collect();
            let p = sequential_joint(&pairs, rho).map_err(num(context))?;
            Ok(json!({"outcomes": tuple, "count": count, "frequency": freq, "probability": p}))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({"sequence": names, "n": stats.n, "seed": seed, "cells": rows}))
}

/// Evaluates one analysis. `trials` overrides the analysis' own trial count.
pub fn analysis_value(
    analysis: &Analysis,
    resolved: &Resolved,
    tolerances: &Tolerances,
    seed: u64,
    trials: Option<u64>,
) -> CliResult<Value> {
    let pair = |a: &str, b: &str| -> CliResult<(&Instrument, &Instrument, String)> {
        Ok((resolved.instrument(a)?, resolved.instrument(b)?, format!("pair ('{a}', '{b}')")))
    };
    let body = match analysis {
        Analysis::Classify { instrument } => class_value(
            resolved.instrument(instrument)?,
            tolerances.classify,
            &format!("instrument '{instrument}'"),
        )?,
        Analysis::Probabilities { instrument, state } => {
            let inst = resolved.instrument(instrument)?;
            let p = inst
                .probabilities(resolved.state(state)?)
                .map_err(num(&format!("instrument '{instrument}'")))?;
            json!({"outcomes": inst.outcomes().labels(), "probabilities": p})
        }
        Analysis::Qoe { a, b, state } => {
            let (a, b, ctx) = pair(a, b)?;
            qoe_value(a, b, resolved.state(state)?, tolerances.tol, &ctx)?
        }
        Analysis::Rre { a, b, state } => {
            let (a, b, ctx) = pair(a, b)?;
            rre_value(a, b, resolved.state(state)?, &ctx)?
        }
        Analysis::Qq { a, b, state } => {
            let (a, b, ctx) = pair(a, b)?;
            qq_json(a, b, resolved.state(state)?, &ctx)?
        }
        Analysis::Ftp { a, b, state } => {
            let (a, b, ctx) = pair(a, b)?;
            ftp_value(a, b, resolved.state(state)?, &ctx)?
        }
        Analysis::Commutators { a, b } => {
            let (a, b, ctx) = pair(a, b)?;
            commutators_value(a, b, &ctx)?
        }
        Analysis::Effects { a, b, state } => {
            let (a, b, ctx) = pair(a, b)?;
            pair_effects(a, b, resolved.state(state)?, tolerances.tol, &ctx)?
        }
        Analysis::Simulate {
            sequence,
            state,
            trials: own,
        } => {
            let seq = sequence
                .iter()
                .map(|n| resolved.instrument(n))
                .collect::<CliResult<Vec<_>>>()?;
            simulate_value(&seq, sequence, resolved.state(state)?, trials.unwrap_or(*own), seed, "simulation")?
        }
    };
    let mut value = serde_json::to_value(analysis).expect("analysis serializes");
    value
        .as_object_mut()
        .expect("tagged enum serializes to an object")
        .insert("result".into(), body);
    Ok(value)
}

/// Full report: provenance, class labels and every listed analysis.
pub fn scenario_report(
    scenario: &Scenario,
    resolved: &Resolved,
    tolerances: &Tolerances,
    seed: u64,
    trials: Option<u64>,
) -> CliResult<Value> {
    let analyses = scenario
        .analyses
        .iter()
        .map(|a| analysis_value(a, resolved, tolerances, seed, trials))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "provenance": provenance(seed, tolerances),
        "classes": classes(resolved, tolerances.classify)?,
        "analyses": analyses,
    }))
}

pub fn simulation_report(
    resolved: &Resolved,
    sequence: &[String],
    state: &str,
    trials: u64,
    seed: u64,
    tolerances: &Tolerances,
) -> CliResult<Value> {
    let seq = sequence
        .iter()
        .map(|n| resolved.instrument(n))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "provenance": provenance(seed, tolerances),
        "simulation": simulate_value(&seq, sequence, resolved.state(state)?, trials, seed, "simulation")?,
    }))
}

pub fn search_value(result: &SearchResult, constraints: &[String]) -> CliResult<Value> {
    let mut diagnostics = Map::new();
    for d in Diagnostic::ALL {
        diagnostics.insert(d.name().into(), json!(result.diagnostics.get(d)));
    }
    // Cross-check against a fresh evaluation before reporting.
    let (a, b, rho) = qmt_core::search::decode(
        result.family,
        &qmt_core::search::StateSpec::Fixed(result.state.clone()),
        &result.params[..result.family.param_count()],
    )
    .map_err(num("search result"))?;
    let fresh = evaluate_diagnostics(&a, &b, &rho).map_err(num("search result"))?;
    if fresh != result.diagnostics {
        return Err(CliError::numerical(
            "search result",
            qmt_core::Error::Numerical("diagnostics differ on re-evaluation".into()),
        ));
    }
    Ok(json!({
        "family": result.family.id(),
        "constraints": constraints,
        "feasible": result.feasible,
        "status": if result.feasible { "feasible point found" } else { "no feasible point within budget" },
        "objective": result.objective,
        "params": result.params,
        "state": matrix_to_doc(result.state.matrix()),
        "diagnostics": diagnostics,
        "iterations": result.iterations,
        "restarts_run": result.restarts_run,
        "best_restart": result.best_restart,
        "seed": result.seed,
    }))
}
