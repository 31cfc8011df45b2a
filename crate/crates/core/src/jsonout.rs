//! Machine-readable output documents (schema version "1"). Field order is
//! fixed by the struct declarations and every collection is ordered, so a
//! given run configuration serializes byte-identically.

use crate::covariance_verify::{CheckStatus, Residual, VerificationReport};
use crate::dirac_oracle::{ConstraintClass, Origin};
use crate::pipeline::{Derivation, OracleOutcome, RunConfig};
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, Serialize)]
pub struct ConfigDoc {
    pub subcommand: String,
    pub input: String,
    pub order: usize,
    pub degree: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl ConfigDoc {
    pub fn new(subcommand: &str, input: &str, cfg: &RunConfig) -> Self {
        ConfigDoc {
            subcommand: subcommand.to_string(),
            input: input.to_string(),
            order: cfg.order,
            degree: cfg.degree,
            samples: cfg.samples,
            seed: cfg.seed,
            tol: cfg.tol,
        }
    }
}

#[derive(Serialize)]
pub struct ConstraintDoc {
    pub eliminated: String,
    pub expression: String,
}

#[derive(Serialize)]
pub struct BracketDoc {
    pub a: String,
    pub b: String,
    pub value: String,
    pub provenance: String,
}

#[derive(Serialize)]
pub struct DeriveDoc {
    pub schema: String,
    pub config: ConfigDoc,
    pub system: String,
    pub independent: Vec<String>,
    pub constraints: Vec<ConstraintDoc>,
    pub brackets: Vec<BracketDoc>,
    pub residual: f64,
    pub nullspace_dim: usize,
    pub degree_used: usize,
    pub warnings: Vec<String>,
}

pub fn derive_doc(config: ConfigDoc, deriv: &Derivation) -> DeriveDoc {
    DeriveDoc {
        schema: SCHEMA_VERSION.to_string(),
        config,
        system: deriv.spec.name.clone(),
        independent: deriv.ics.independent.iter().map(|s| s.name().to_string()).collect(),
        constraints: deriv
            .ics
            .eliminated
            .iter()
            .map(|(s, e)| ConstraintDoc {
                eliminated: s.name().to_string(),
                expression: e.to_string(),
            })
            .collect(),
        brackets: deriv
            .table
            .iter_entries()
            .map(|(a, b, v, p)| BracketDoc {
                a: a.name().to_string(),
                b: b.name().to_string(),
                value: v.to_string(),
                provenance: match p {
                    crate::bracket_solver::Provenance::Solved => "solved".to_string(),
                    crate::bracket_solver::Provenance::Extended => "extended".to_string(),
                    crate::bracket_solver::Provenance::ZeroByParity => "zero-by-parity".to_string(),
                },
            })
            .collect(),
        residual: deriv.residual,
        nullspace_dim: deriv.nullspace_dim,
        degree_used: deriv.degree_used,
        warnings: deriv.warnings.clone(),
    }
}

#[derive(Serialize)]
pub struct CheckDoc {
    pub name: String,
    pub status: String,
    pub residual: serde_json::Value,
    pub params: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Serialize)]
pub struct VerifyDoc {
    pub schema: String,
    pub config: ConfigDoc,
    pub system: String,
    pub passed: bool,
    pub checks: Vec<CheckDoc>,
}

pub fn verify_doc(config: ConfigDoc, system: &str, report: &VerificationReport) -> VerifyDoc {
    VerifyDoc {
        schema: SCHEMA_VERSION.to_string(),
        config,
        system: system.to_string(),
        passed: report.passed(),
        checks: report
            .checks
            .iter()
            .map(|c| CheckDoc {
                name: c.name.clone(),
                status: match c.status {
                    CheckStatus::Pass => "pass".to_string(),
                    CheckStatus::Fail => "fail".to_string(),
                    CheckStatus::Skipped => "skipped".to_string(),
                },
                residual: match &c.residual {
                    Residual::SymbolicZero => serde_json::Value::String("symbolic-zero".into()),
                    Residual::Numeric(x) => serde_json::json!(x),
                    Residual::SymbolicNonZero(s) => serde_json::Value::String(s.clone()),
                },
                params: c.params.clone(),
                detail: c.detail.clone(),
            })
            .collect(),
    }
}

#[derive(Serialize)]
pub struct OracleConstraintDoc {
    pub expression: String,
    pub origin: String,
    pub class: String,
}

#[derive(Serialize)]
pub struct OracleDoc {
    pub schema: String,
    pub config: ConfigDoc,
    pub system: String,
    pub constraints: Vec<OracleConstraintDoc>,
    pub multipliers_fixed: usize,
    pub max_deviation: f64,
}

pub fn oracle_doc(config: ConfigDoc, system: &str, outcome: &OracleOutcome) -> OracleDoc {
    OracleDoc {
        schema: SCHEMA_VERSION.to_string(),
        config,
        system: system.to_string(),
        constraints: outcome
            .constraints
            .iter()
            .map(|c| OracleConstraintDoc {
                expression: c.expr.to_string(),
                origin: match c.origin {
                    Origin::Primary => "primary".to_string(),
                    Origin::Consistency(step) => format!("consistency-step-{step}"),
                },
                class: match c.class {
                    ConstraintClass::First => "first".to_string(),
                    ConstraintClass::Second => "second".to_string(),
                    ConstraintClass::Undetermined => "undetermined".to_string(),
                },
            })
            .collect(),
        multipliers_fixed: outcome.multipliers_fixed,
        max_deviation: outcome.max_deviation,
    }
}

pub fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("documents serialize");
    out.push('\n');
    out
}
