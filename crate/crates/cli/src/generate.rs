//! Seeded instance generators for the benchmark families.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nalgebra::{DMatrix, DVector};
use qre_core::families;
use qre_core::ipm::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::problem::ProblemFile;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Nearcorr,
    QreLp,
    QreKl,
    TwophaseSynth,
    SqrePair,
}

/// Choice of the fixed matrix M in nearcorr.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum MatrixKind {
    #[value(name = "2I")]
    #[serde(rename = "2I")]
    TwoIdentity,
    /// M0 M0ᵀ normalized, M0 uniform.
    #[value(name = "random")]
    #[serde(rename = "random")]
    Random,
    /// Normalized Gram matrix of the [A Y; Yᵀ B] block construction.
    #[value(name = "block")]
    #[serde(rename = "block")]
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Tridiag,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub gamma: Option<f64>,
    pub matrix: MatrixKind,
    pub structure: Structure,
    pub lower: Option<f64>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n: None,
            m: None,
            k: None,
            r: None,
            gamma: None,
            matrix: MatrixKind::TwoIdentity,
            structure: Structure::Tridiag,
            lower: None,
        }
    }
}

/// Facts known about an instance by construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Known {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub family: Family,
    pub params: GenParams,
    pub seed: u64,
    pub version: String,
    pub construction: String,
    pub known: Known,
    /// Variant suffixes written next to the stem, e.g. "qre" and "sqre".
    pub variants: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// (variant suffix, problem); an empty suffix means `<stem>.json`.
    pub problems: Vec<(String, ProblemFile)>,
    pub meta: GenMeta,
}

fn need(v: Option<usize>, name: &str, family: &str) -> Result<usize, CliError> {
    match v {
        Some(0) => Err(CliError::BadParams(format!("--{name} must be positive for {family}"))),
        Some(x) => Ok(x),
        None => Err(CliError::BadParams(format!("--{name} is required for {family}"))),
    }
}

fn sparse_pairs(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<DMatrix<f64>> {
    (0..k).map(|_| families::sparse_pair_matrix(rng, n)).collect()
}

fn uniform_diagonal(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| scale * rng.random_range(0.5..1.5)))
}

pub fn generate(family: Family, params: &GenParams, seed: u64) -> Result<Generated, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut known = Known::default();
    let single = |model: Model, x0: Option<DVector<f64>>| vec![(String::new(), ProblemFile::from_model(&model, x0.as_ref()))];
    let (problems, construction) = match family {
        Family::Nearcorr => {
            let n = need(params.n, "n", "nearcorr")?;
            let m = match params.matrix {
                MatrixKind::TwoIdentity => {
                    known.optimum = Some(2.0 * n as f64 * std::f64::consts::LN_2);
                    DMatrix::identity(n, n) * 2.0
                }
                MatrixKind::Random => families::higham_random(&mut rng, n),
                MatrixKind::Block => {
                    let mb = need(params.m, "m", "nearcorr --M block")?;
                    families::higham_block(&mut rng, mb, n)
                }
            };
            let dim = m.nrows();
            known.matrix_dim = Some(dim);
            let pairs = match params.structure {
                Structure::Tridiag => families::tridiagonal_pairs(dim),
                Structure::Full => families::off_diagonal_pairs(dim),
            };
            let model = families::nearcorr_with(&m, &pairs)?;
            let x0 = families::nearcorr_start_with(&m, pairs.len())?;
            (
                single(model, Some(x0)),
                format!(
                    "min qre(M, Y) over unit-diagonal Y with {:?} free off-diagonal pattern; x = (t, Y_ij)",
                    params.structure
                ),
            )
        }
        Family::QreLp => {
            let n = need(params.n, "n", "qre-lp")?;
            let k = params.k.unwrap_or(n);
            let lower = params.lower.unwrap_or(-1.0);
            let a0 = uniform_diagonal(&mut rng, n, 1.0);
            let b0 = DMatrix::identity(n, n);
            let a_list = sparse_pairs(&mut rng, n, k);
            let b_list = sparse_pairs(&mut rng, n, k);
            let model = families::qre_pair(&a0, &a_list, &b0, &b_list, &vec![lower; k], false)?;
            let x0 = families::qre_pair_start(&a0, &b0, k, false)?;
            known.matrix_dim = Some(n);
            (
                single(model, Some(x0)),
                "min qre(A0 + Σ x_i A_i, I + Σ x_i B_i) s.t. x ≥ lower; A0 diagonal uniform in [0.5, 1.5], \
                 A_i, B_i symmetric 0-1 with one off-diagonal pair; x = (t, x)"
                    .to_string(),
            )
        }
        Family::QreKl => {
            let n = need(params.n, "n", "qre-kl")?;
            let k = params.k.unwrap_or(n);
            let gamma = params.gamma.unwrap_or(1.0);
            let scale = (k + 1) as f64;
            let a0 = uniform_diagonal(&mut rng, n, scale) * 1.5;
            let b0 = DMatrix::identity(n, n) * scale;
            let a_list = sparse_pairs(&mut rng, n, k);
            let b_list = sparse_pairs(&mut rng, n, k);
            let model = families::qre_kl(&a0, &a_list, &b0, &b_list, gamma)?;
            let x0 = families::qre_kl_start(&a0, &a_list, &b0, &b_list)?;
            known.matrix_dim = Some(n);
            (
                single(model, Some(x0)),
                "min qre(A0 + Σ x_i A_i, B0 + Σ y_i B_i) s.t. KL(x, y) ≤ gamma; A0 = (k+1)·diag(U[0.75, 2.25]), \
                 B0 = (k+1)·I, A_i, B_i symmetric 0-1 with one off-diagonal pair; x = (t, x, y)"
                    .to_string(),
            )
        }
        Family::TwophaseSynth => {
            let n = need(params.n, "n", "twophase-synth")?;
            let r = need(params.r, "r", "twophase-synth")?;
            if r > n {
                return Err(CliError::BadParams("twophase-synth needs r ≤ n".into()));
            }
            let model = families::twophase_synthetic(n, r)?;
            known.face_rank = Some(r);
            known.optimum = Some(-(r as f64) / std::f64::consts::E);
            known.matrix_dim = Some(n);
            (
                single(model, None),
                "min qre(Σ x_i E_i, I) s.t. x ≤ 1 with E_i = e_i e_iᵀ (i < r), i.e. A_i = V E_i Vᵀ for the \
                 diagonal V; feasible matrices lie on a rank-r face; x = (t, x)"
                    .to_string(),
            )
        }
        Family::SqrePair => {
            let n = need(params.n, "n", "sqre-pair")?;
            let k = params.k.unwrap_or(n);
            let lower = params.lower.unwrap_or(-2.0);
            let a_list = sparse_pairs(&mut rng, n, k);
            let b_list = sparse_pairs(&mut rng, n, k);
            let id = DMatrix::identity(n, n);
            let model = families::qre_pair(&id, &a_list, &id, &b_list, &vec![lower; k], false)?;
            let x0 = families::qre_pair_start(&id, &id, k, false)?;
            let out = vec![
                ("qre".to_string(), ProblemFile::from_model(&model, Some(&x0))),
                ("sqre".to_string(), sqre_file(&id, &a_list, &b_list, lower, k)?),
            ];
            known.matrix_dim = Some(n);
            (
                out,
                "min qre / sqre(I + Σ x_i A_i, I + Σ x_i B_i) s.t. x ≥ lower; both variants share A_i, B_i \
                 (symmetric 0-1, one off-diagonal pair each); x = (t, x)"
                    .to_string(),
            )
        }
    };
    let variants = problems.iter().map(|(s, _)| s.clone()).collect();
    Ok(Generated {
        problems,
        meta: GenMeta {
            family,
            params: params.clone(),
            seed,
            version: crate::TOOL_VERSION.to_string(),
            construction,
            known,
            variants,
        },
    })
}

/// The sqre variant written with a native `sqre` block over (t, x); the
/// reader expands it.
fn sqre_file(
    id: &DMatrix<f64>,
    a_list: &[DMatrix<f64>],
    b_list: &[DMatrix<f64>],
    lower: f64,
    k: usize,
) -> Result<ProblemFile, CliError> {
    let model = families::qre_pair(id, a_list, id, b_list, &vec![lower; k], false)?;
    let x0 = families::qre_pair_start(id, id, k, true)?.rows(0, k + 1).into_owned();
    let mut pf = ProblemFile::from_model(&model, Some(&x0));
    pf.blocks[0].kind = crate::problem::BlockType::Sqre;
    Ok(pf)
}

pub fn variant_path(stem: &Path, suffix: &str) -> PathBuf {
    let base = stem.as_os_str().to_string_lossy();
    if suffix.is_empty() {
        PathBuf::from(format!("{base}.json"))
    } else {
        PathBuf::from(format!("{base}.{suffix}.json"))
    }
}

/// Writes `<stem>[.<variant>].json` files and `<stem>.meta.json`.
pub fn write_generated(gen: &Generated, stem: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (suffix, pf) in &gen.problems {
        let path = variant_path(stem, suffix);
        std::fs::write(&path, pf.to_json()).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let meta_path = variant_path(stem, "meta");
    let meta = serde_json::to_string_pretty(&gen.meta).expect("metadata serializes");
    std::fs::write(&meta_path, meta).map_err(|e| io_err(&meta_path, e))?;
    written.push(meta_path);
    Ok(written)
}
