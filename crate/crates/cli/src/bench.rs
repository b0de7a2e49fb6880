//! Desk-scale benchmark suites emitting one CSV row per run.

use std::time::Instant;

use clap::ValueEnum;
use qre_core::qkd::toy_protocol;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{solve_problem, solve_protocol, SolveFlags, TwoPhase};
use crate::generate::{generate, Family, GenParams, MatrixKind, Structure};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Nearcorr,
    Twophase,
    Sqre,
    QkdToy,
}

#[derive(Debug, Clone)]
pub struct BenchParams {
    /// Matrix orders; an empty list selects the suite default.
    pub sizes: Vec<usize>,
    /// Face ranks for the twophase suite.
    pub ranks: Vec<usize>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub suite: String,
    pub instance: String,
    pub n: usize,
    pub method: String,
    pub status: String,
    pub iterations: Option<usize>,
    pub newton_steps: Option<usize>,
    pub seconds: f64,
    pub objective: Option<f64>,
    pub phase1_seconds: Option<f64>,
    pub face_rank: Option<usize>,
    pub phase2_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
enum Task {
    Problem {
        family: Family,
        params: GenParams,
        variant: usize,
        method: TwoPhase,
        label: String,
    },
    Protocol {
        noise: f64,
    },
}

fn tasks(suite: Suite, p: &BenchParams) -> Vec<Task> {
    let sizes = |default: &[usize]| if p.sizes.is_empty() { default.to_vec() } else { p.sizes.clone() };
    let params = |n: usize| GenParams {
        n: Some(n),
        ..GenParams::default()
    };
    match suite {
        Suite::Nearcorr => sizes(&[5, 10, 25])
            .into_iter()
            .map(|n| Task::Problem {
                family: Family::Nearcorr,
                params: GenParams {
                    matrix: MatrixKind::TwoIdentity,
                    structure: Structure::Tridiag,
                    ..params(n)
                },
                variant: 0,
                method: TwoPhase::Off,
                label: format!("nearcorr-2I-{n}"),
            })
            .collect(),
        Suite::Twophase => {
            let ranks = if p.ranks.is_empty() { vec![5] } else { p.ranks.clone() };
            let mut out = Vec::new();
            for n in sizes(&[25]) {
                for &r in ranks.iter().filter(|&&r| r <= n) {
                    for method in [TwoPhase::Off, TwoPhase::Primal, TwoPhase::Dual] {
                        out.push(Task::Problem {
                            family: Family::TwophaseSynth,
                            params: GenParams { r: Some(r), ..params(n) },
                            variant: 0,
                            method,
                            label: format!("twophase-{n}-{r}"),
                        });
                    }
                }
            }
            out
        }
        Suite::Sqre => sizes(&[10, 25])
            .into_iter()
            .flat_map(|n| {
                (0..2).map(move |variant| Task::Problem {
                    family: Family::SqrePair,
                    params: GenParams {
                        n: Some(n),
                        ..GenParams::default()
                    },
                    variant,
                    method: TwoPhase::Off,
                    label: format!("sqre-pair-{n}"),
                })
            })
            .collect(),
        Suite::QkdToy => [0.1, 0.3, 0.5, 0.7, 0.9].into_iter().map(|noise| Task::Protocol { noise }).collect(),
    }
}

fn run(suite: Suite, task: &Task, flags: &SolveFlags) -> Result<BenchRow, CliError> {
    let started = Instant::now();
    match task {
        Task::Problem {
            family,
            params,
            variant,
            method,
            label,
        } => {
            let gen = generate(*family, params, flags.seed)?;
            let (suffix, pf) = &gen.problems[*variant];
            let run_flags = SolveFlags {
                two_phase: *method,
                ..flags.clone()
            };
            let method_name = match method {
                TwoPhase::Off if suffix.is_empty() => "direct".to_string(),
                TwoPhase::Off => suffix.clone(),
                TwoPhase::Primal => "two-phase-primal".to_string(),
                TwoPhase::Dual => "two-phase-dual".to_string(),
            };
            let mut row = BenchRow {
                suite: suite_name(suite),
                instance: label.clone(),
                n: params.n.unwrap_or(0),
                method: method_name,
                status: String::new(),
                iterations: None,
                newton_steps: None,
                seconds: 0.0,
                objective: None,
                phase1_seconds: None,
                face_rank: None,
                phase2_iterations: None,
            };
            match solve_problem(pf, &run_flags) {
                Ok(res) => {
                    row.status = res.status.clone();
                    row.iterations = Some(res.iterations);
                    row.newton_steps = Some(res.newton_steps);
                    row.objective = Some(res.objective);
                    if let Some(ph) = &res.phase {
                        row.phase1_seconds = Some(ph.phase1_seconds);
                        row.face_rank = Some(ph.face_rank);
                        row.phase2_iterations = Some(ph.phase2_iterations);
                    }
                }
                Err(CliError::Core(e)) => row.status = format!("error: {}", CliError::Core(e).kind()),
                Err(e) => return Err(e),
            }
            row.seconds = started.elapsed().as_secs_f64();
            Ok(row)
        }
        Task::Protocol { noise } => {
            let prob = toy_protocol(Some((1.0 - noise) / 2.0), 0.0)?;
            let res = solve_protocol(&prob, flags)?;
            Ok(BenchRow {
                suite: suite_name(suite),
                instance: format!("toy-noise-{noise}"),
                n: res.report.n,
                method: "qkd".into(),
                status: res.status.clone(),
                iterations: Some(res.report.iterations),
                newton_steps: Some(res.report.newton_steps),
                seconds: started.elapsed().as_secs_f64(),
                objective: Some(res.p_opt),
                phase1_seconds: Some(res.report.phase1_seconds),
                face_rank: Some(res.report.n_bar),
                phase2_iterations: None,
            })
        }
    }
}

fn suite_name(s: Suite) -> String {
    s.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

pub fn cmd_bench(suite: Suite, params: &BenchParams, flags: &SolveFlags) -> Result<Vec<BenchRow>, CliError> {
    let list = tasks(suite, params);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.jobs.max(1))
        .build()
        .map_err(|e| CliError::BadParams(format!("--jobs: {e}")))?;
    pool.install(|| list.par_iter().map(|t| run(suite, t, flags)).collect())
}

pub fn to_csv(rows: &[BenchRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}
