//! Argument parsing and subcommand dispatch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use qmt_core::montecarlo::empirical_qq;
use qmt_core::search::{parse_constraints, search_effects, Budget, EffectConstraintSet, Family, StateSpec};

use crate::contingency::ingest_contingency;
use crate::document::{load_instrument, persist_instrument};
use crate::error::{CliError, CliResult};
use crate::report;
use crate::scenario::{parse_scenario, Resolved, Scenario, Tolerances};

const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Parser)]
#[command(name = "qmt", version, about = "Sequential quantum measurement analysis")]
struct Cli {
    /// Numerical tolerance for effect flags (overrides the scenario value).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Random seed (overrides the scenario value).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Class labels for every instrument in a scenario.
    Classify {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run every analysis listed in a scenario.
    Report {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Check a scenario or a stored instrument.
    Validate {
        #[arg(long, conflicts_with = "instrument", required_unless_present = "instrument")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        instrument: Option<PathBuf>,
    },
    /// Write one scenario instrument as a standalone instrument document.
    Export {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        name: String,
    },
    /// Estimate the QQ statistic from split-ballot counts.
    Qq {
        #[arg(long)]
        data: PathBuf,
    },
    /// Sample a measurement sequence.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated instrument names, first measured first.
        #[arg(long, value_delimiter = ',')]
        sequence: Vec<String>,
        #[arg(long)]
        state: String,
    },
    /// Look for an instrument pair meeting diagnostic constraints.
    Search {
        #[arg(long)]
        family: String,
        /// Constraints such as "qoe>=0.05,aba<=1e-9".
        #[arg(long)]
        require: String,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 30_000)]
        max_iters: usize,
        /// Fix the state to one defined in this scenario.
        #[arg(long, requires = "state")]
        scenario: Option<PathBuf>,
        #[arg(long, requires = "scenario")]
        state: Option<String>,
    },
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok(value) => {
            let mut text = serde_json::to_string_pretty(&value).expect("report values are finite");
            text.push('\n');
            match emit(cli.out.as_deref(), &text, out) {
                Ok(()) => 0,
                Err(e) => fail(&e, err),
            }
        }
        Err(e) => fail(&e, err),
    }
}

fn fail(e: &CliError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, &e)),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: "stdout".into(),
            message: e.to_string(),
        }),
    }
}

fn io_error(path: &Path, e: &std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, &e))
}

fn load_scenario(path: &Path) -> CliResult<(Scenario, Resolved)> {
    let scenario = parse_scenario(&read(path)?)?;
    let resolved = scenario.resolve()?;
    Ok((scenario, resolved))
}

impl Cli {
    fn tolerances(&self, base: Tolerances) -> CliResult<Tolerances> {
        match self.tol {
            Some(t) if !t.is_finite() || t < 0.0 => Err(CliError::Usage(format!("--tol {t} must be finite and non-negative"))),
            Some(t) => Ok(Tolerances { tol: t, ..base }),
            None => Ok(base),
        }
    }
}

fn execute(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Classify { scenario } => {
            let (s, resolved) = load_scenario(scenario)?;
            let tolerances = cli.tolerances(s.tolerances)?;
            let seed = cli.seed.unwrap_or(s.seed);
            Ok(json!({
                "provenance": report::provenance(seed, &tolerances),
                "classes": report::classes(&resolved, tolerances.classify)?,
            }))
        }
        Command::Report { scenario } => {
            let (s, resolved) = load_scenario(scenario)?;
            let tolerances = cli.tolerances(s.tolerances)?;
            report::scenario_report(&s, &resolved, &tolerances, cli.seed.unwrap_or(s.seed), cli.trials)
        }
        Command::Validate { scenario, instrument } => {
            let tolerances = cli.tolerances(Tolerances::default())?;
            let mut checks = serde_json::Map::new();
            if let Some(path) = instrument {
                let inst = load_instrument(&read(path)?)?;
                checks.insert(path.display().to_string(), report::validation_value(&inst, tolerances.tol));
            } else if let Some(path) = scenario {
                let (_, resolved) = load_scenario(path)?;
                for (name, inst) in &resolved.instruments {
                    checks.insert(name.clone(), report::validation_value(inst, tolerances.tol));
                }
            }
            Ok(json!({"valid": true, "instruments": checks}))
        }
        Command::Export { scenario, name } => {
            let (_, resolved) = load_scenario(scenario)?;
            let text = persist_instrument(resolved.instrument(name)?);
            Ok(serde_json::from_str(&text).expect("instrument documents are valid JSON"))
        }
        Command::Qq { data } => {
            let (ab, ba) = ingest_contingency(&read(data)?)?;
            let est = empirical_qq(&ab, &ba).map_err(|e| CliError::numerical(data.display().to_string(), e))?;
            Ok(json!({
                "counts": {"ab": ab, "ba": ba},
                "q_hat": est.q_hat,
                "q_se": est.q_se,
                "z": est.z,
                "n_ab": est.n_ab,
                "n_ba": est.n_ba,
            }))
        }
        Command::Simulate {
            scenario,
            sequence,
            state,
        } => {
            let (s, resolved) = load_scenario(scenario)?;
            if sequence.is_empty() {
                return Err(CliError::Usage("--sequence needs at least one instrument".into()));
            }
            let tolerances = cli.tolerances(s.tolerances)?;
            report::simulation_report(
                &resolved,
                sequence,
                state,
                cli.trials.unwrap_or(DEFAULT_TRIALS),
                cli.seed.unwrap_or(s.seed),
                &tolerances,
            )
        }
        Command::Search {
            family,
            require,
            restarts,
            max_iters,
            scenario,
            state,
        } => {
            let family: Family = family
                .parse()
                .map_err(|e: qmt_core::Error| CliError::Usage(e.to_string()))?;
            let targets = parse_constraints(require).map_err(|e| CliError::Usage(e.to_string()))?;
            let state_spec = match (scenario, state) {
                (Some(path), Some(name)) => {
                    let (_, resolved) = load_scenario(path)?;
                    StateSpec::Fixed(resolved.state(name)?.clone())
                }
                _ => StateSpec::Optimize,
            };
            let budget = Budget {
                restarts: *restarts,
                max_iters: *max_iters,
                seed: cli.seed.unwrap_or(0),
            };
            let constraints = EffectConstraintSet::new(targets, state_spec);
            let result = search_effects(family, &constraints, &budget)
                .map_err(|e| CliError::numerical(format!("search over {}", family.id()), e))?;
            let names: Vec<String> = require.split(',').map(|c| c.trim().to_string()).collect();
            report::search_value(&result, &names)
        }
    }
}
