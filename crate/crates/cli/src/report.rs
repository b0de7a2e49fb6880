//! Result files written by `solve` and `qkd`.

use qre_core::ipm::{SolveResult, Status};
use qre_core::qkd::{QkdOutcome, QkdReport};
use qre_core::twophase::{Phase1Method, PhaseReport};
use serde::{Deserialize, Serialize};

use crate::error::parse_err;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub method: String,
    pub phase1_seconds: f64,
    pub phase1_iterations: usize,
    pub original_dim: usize,
    pub face_rank: usize,
    pub rounds: usize,
    pub phase2_iterations: usize,
}

impl From<&PhaseReport> for PhaseSummary {
    fn from(r: &PhaseReport) -> Self {
        PhaseSummary {
            method: match r.method {
                Phase1Method::Primal => "primal",
                Phase1Method::Dual => "dual",
            }
            .to_string(),
            phase1_seconds: r.phase1_seconds,
            phase1_iterations: r.phase1_iterations,
            original_dim: r.original_dim,
            face_rank: r.face_rank,
            rounds: r.rounds,
            phase2_iterations: r.phase2_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub status: String,
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub mu_final: f64,
    #[serde(default)]
    pub phase: Option<PhaseSummary>,
    pub wall_seconds: f64,
    pub version: String,
    pub seed: u64,
    #[serde(default)]
    pub message: Option<String>,
}

impl ResultFile {
    /// `keep` leading coordinates of x are reported.
    pub fn from_solve(res: &SolveResult, keep: usize, phase: Option<&PhaseReport>, wall_seconds: f64, seed: u64) -> Self {
        ResultFile {
            status: res.status.name().to_string(),
            objective: res.objective,
            x: res.x.iter().take(keep).copied().collect(),
            iterations: res.iterations,
            newton_steps: res.newton_steps,
            mu_final: res.mu_final,
            phase: phase.map(PhaseSummary::from),
            wall_seconds,
            version: crate::TOOL_VERSION.to_string(),
            seed,
            message: res.message.clone(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal.name()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(parse_err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkdResultFile {
    pub status: String,
    pub protocol: String,
    pub rate: f64,
    pub p_opt: f64,
    pub delta_ec: f64,
    pub report: QkdReport,
    pub wall_seconds: f64,
    pub version: String,
    pub seed: u64,
}

impl QkdResultFile {
    pub fn from_outcome(out: &QkdOutcome, protocol: &str, delta_ec: f64, wall_seconds: f64, seed: u64) -> Self {
        QkdResultFile {
            status: out.report.status.clone(),
            protocol: protocol.to_string(),
            rate: out.rate,
            p_opt: out.p_opt,
            delta_ec,
            report: out.report.clone(),
            wall_seconds,
            version: crate::TOOL_VERSION.to_string(),
            seed,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal.name()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(parse_err)
    }
}
