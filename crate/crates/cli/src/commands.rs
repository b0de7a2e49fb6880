use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use qre_core::ipm::{self, SolverOptions};
use qre_core::qkd;
use qre_core::twophase::{two_phase_solve, Phase1Method};
use serde::{Deserialize, Serialize};

use crate::problem::ProblemFile;
use crate::report::{QkdResultFile, ResultFile};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoPhase {
    #[default]
    Off,
    Primal,
    Dual,
}

#[derive(Debug, Clone)]
pub struct SolveFlags {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub two_phase: TwoPhase,
    pub fr_rounds: usize,
    pub seed: u64,
}

impl Default for SolveFlags {
    fn default() -> Self {
        SolveFlags {
            tol: 1e-8,
            max_iter: None,
            two_phase: TwoPhase::Off,
            fr_rounds: 1,
            seed: 0,
        }
    }
}

impl SolveFlags {
    pub fn options(&self) -> Result<SolverOptions, CliError> {
        let mut opts = SolverOptions {
            tol: self.tol,
            ..SolverOptions::default()
        };
        if let Some(m) = self.max_iter {
            opts.max_iters = m;
        }
        opts.validate()?;
        if self.fr_rounds == 0 {
            return Err(CliError::BadParams("--fr-rounds must be at least 1".into()));
        }
        Ok(opts)
    }
}

pub fn solve_problem(pf: &ProblemFile, flags: &SolveFlags) -> Result<ResultFile, CliError> {
    let opts = flags.options()?;
    let built = pf.build()?;
    let started = Instant::now();
    let (res, report) = match flags.two_phase {
        TwoPhase::Off => {
            let x0 = match &built.x0 {
                Some(x) => {
                    built
                        .model
                        .check_interior(x)
                        .map_err(|e| CliError::BadParams(format!("initial_point: {e}")))?;
                    x.clone()
                }
                None => ipm::initial_point_with(&built.model, &opts)?,
            };
            (ipm::solve(&built.model, &x0, &opts)?, None)
        }
        TwoPhase::Primal | TwoPhase::Dual => {
            let method = if flags.two_phase == TwoPhase::Primal {
                Phase1Method::Primal
            } else {
                Phase1Method::Dual
            };
            let (res, report) = two_phase_solve(&built.model, method, &opts, flags.fr_rounds)?;
            (res, Some(report))
        }
    };
    let wall = started.elapsed().as_secs_f64();
    Ok(ResultFile::from_solve(&res, built.num_original, report.as_ref(), wall, flags.seed))
}

pub fn cmd_solve(path: &Path, flags: &SolveFlags) -> Result<ResultFile, CliError> {
    solve_problem(&ProblemFile::load(path)?, flags)
}

pub fn cmd_qkd(path: &Path, flags: &SolveFlags) -> Result<QkdResultFile, CliError> {
    let prob = qkd::load_protocol(path)?;
    solve_protocol(&prob, flags)
}

pub fn solve_protocol(prob: &qkd::QkdProblem, flags: &SolveFlags) -> Result<QkdResultFile, CliError> {
    let opts = flags.options()?;
    let started = Instant::now();
    let out = qkd::qkd_rate(prob, &opts)?;
    let wall = started.elapsed().as_secs_f64();
    Ok(QkdResultFile::from_outcome(&out, &prob.meta.name, prob.delta_ec, wall, flags.seed))
}
