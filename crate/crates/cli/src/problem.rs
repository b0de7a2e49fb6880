//! Problem files: min ⟨c, x⟩ subject to b_j − A_j x in the interior-closure
//! of cone j, with optional E x = d.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use qre_core::cones::{expand_sqre, ConeBlock, ConeKind};
use qre_core::ipm::Model;
use qre_core::qre_barrier::qre_value;
use qre_core::{linalg, Error};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, parse_err, CliError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockType {
    Orthant,
    Psd,
    Kl,
    Qre,
    Sqre,
}

/// Dense rows or 0-based COO triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Coo { coo: Vec<(usize, usize, f64)> },
    Dense(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(rename = "type")]
    pub kind: BlockType,
    #[serde(rename = "A")]
    pub a: MatrixData,
    pub b: Vec<f64>,
    /// Matrix order for psd, qre and sqre blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Vector length for orthant and kl blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualitySpec {
    #[serde(rename = "E")]
    pub e: MatrixData,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub objective: Vec<f64>,
    pub blocks: Vec<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equalities: Option<EqualitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
}

/// Model assembled from a problem file. sqre blocks add two trailing
/// variables each; `num_original` is the file's variable count.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub model: Model,
    pub num_original: usize,
    pub x0: Option<DVector<f64>>,
}

impl MatrixData {
    pub fn to_dense(&self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
        let bad = |msg: String| CliError::Core(Error::Parse(format!("{what}: {msg}")));
        match self {
            MatrixData::Dense(data) => {
                if data.len() != rows {
                    return Err(bad(format!("expected {rows} rows, found {}", data.len())));
                }
                if let Some(r) = data.iter().position(|r| r.len() != cols) {
                    return Err(bad(format!("row {r} has {} entries, expected {cols}", data[r].len())));
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| data[i][j]))
            }
            MatrixData::Coo { coo } => {
                let mut m = DMatrix::zeros(rows, cols);
                for &(i, j, v) in coo {
                    if i >= rows || j >= cols {
                        return Err(bad(format!("entry ({i}, {j}) outside {rows}×{cols}")));
                    }
                    m[(i, j)] += v;
                }
                Ok(m)
            }
        }
    }

    /// COO triplets of the nonzero entries.
    pub fn coo_of(m: &DMatrix<f64>) -> Self {
        let mut coo = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    coo.push((i, j, m[(i, j)]));
                }
            }
        }
        MatrixData::Coo { coo }
    }
}

fn matrix_order(b: &DVector<f64>) -> usize {
    square_root(b.len()).unwrap_or(0)
}

fn square_root(len: usize) -> Option<usize> {
    let n = (len as f64).sqrt().round() as usize;
    (n * n == len).then_some(n)
}

impl BlockSpec {
    pub fn from_block(blk: &ConeBlock) -> Self {
        let (kind, n, m) = match blk.kind {
            ConeKind::Orthant(m) => (BlockType::Orthant, None, Some(m)),
            ConeKind::Psd(n) => (BlockType::Psd, Some(n), None),
            ConeKind::KlEpi(m) => (BlockType::Kl, None, Some(m)),
            ConeKind::QreEpi(n) => (BlockType::Qre, Some(n), None),
        };
        BlockSpec {
            kind,
            a: MatrixData::coo_of(&blk.a),
            b: blk.b.iter().copied().collect(),
            n,
            m,
        }
    }

    fn cone_kind(&self, index: usize) -> Result<ConeKind, CliError> {
        let len = self.b.len();
        let bad = |msg: &str| CliError::Core(Error::Parse(format!("blocks[{index}]: {msg}")));
        let size = |given: Option<usize>, inferred: Option<usize>, key: &str| match (given, inferred) {
            (Some(g), Some(i)) if g == i => Ok(g),
            (None, Some(i)) => Ok(i),
            (Some(g), _) => Err(bad(&format!("{key} = {g} does not match b of length {len}"))),
            (None, None) => Err(bad(&format!("length of b ({len}) does not fit the block type"))),
        };
        let wrong_key = |key: &str| Err(bad(&format!("key {key} does not apply to this block type")));
        match self.kind {
            BlockType::Orthant | BlockType::Kl if self.n.is_some() => wrong_key("n"),
            BlockType::Psd | BlockType::Qre | BlockType::Sqre if self.m.is_some() => wrong_key("m"),
            BlockType::Orthant => Ok(ConeKind::Orthant(size(self.m, Some(len), "m")?)),
            BlockType::Kl => {
                let inferred = (len % 2 == 1).then(|| (len - 1) / 2);
                Ok(ConeKind::KlEpi(size(self.m, inferred, "m")?))
            }
            BlockType::Psd => Ok(ConeKind::Psd(size(self.n, square_root(len), "n")?)),
            BlockType::Qre | BlockType::Sqre => {
                let inferred = (len % 2 == 1).then(|| square_root((len - 1) / 2)).flatten();
                Ok(ConeKind::QreEpi(size(self.n, inferred, "n")?))
            }
        }
    }
}

struct SqreLayout {
    t_col: usize,
    ax: DMatrix<f64>,
    bx: DVector<f64>,
    ay: DMatrix<f64>,
    by: DVector<f64>,
}

fn sqre_layout(a: &DMatrix<f64>, b: &DVector<f64>, n: usize, index: usize) -> Result<SqreLayout, CliError> {
    let nn = n * n;
    let t_row = a.row(0);
    let nonzero: Vec<usize> = (0..a.ncols()).filter(|&j| t_row[j] != 0.0).collect();
    if nonzero.len() != 1 || t_row[nonzero[0]] != -1.0 || b[0] != 0.0 {
        return Err(CliError::BadParams(format!(
            "blocks[{index}]: the first row of an sqre block must select one variable t (A row −e_t, b = 0)"
        )));
    }
    Ok(SqreLayout {
        t_col: nonzero[0],
        ax: a.rows(1, nn).into_owned(),
        bx: b.rows(1, nn).into_owned(),
        ay: a.rows(1 + nn, nn).into_owned(),
        by: b.rows(1 + nn, nn).into_owned(),
    })
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let pf: ProblemFile = serde_json::from_str(text).map_err(parse_err)?;
        if pf.version != FORMAT_VERSION {
            return Err(CliError::Core(Error::Parse(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                pf.version
            ))));
        }
        Ok(pf)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    /// Problem file for a model, with a stored start point when given.
    pub fn from_model(model: &Model, x0: Option<&DVector<f64>>) -> Self {
        ProblemFile {
            version: FORMAT_VERSION,
            objective: model.c.iter().copied().collect(),
            blocks: model.blocks.iter().map(BlockSpec::from_block).collect(),
            equalities: model.equalities.as_ref().map(|eq| EqualitySpec {
                e: MatrixData::coo_of(&eq.e),
                d: eq.d.iter().copied().collect(),
            }),
            initial_point: x0.map(|x| x.iter().copied().collect()),
        }
    }

    pub fn build(&self) -> Result<BuiltProblem, CliError> {
        let k = self.objective.len();
        if k == 0 {
            return Err(CliError::Core(Error::Parse("objective is empty".into())));
        }
        let mut blocks: Vec<ConeBlock> = Vec::new();
        let mut sqre: Vec<(SqreLayout, usize)> = Vec::new();
        let mut cols = k;
        for (index, spec) in self.blocks.iter().enumerate() {
            let kind = spec.cone_kind(index)?;
            let a = spec.a.to_dense(kind.dim(), k, &format!("blocks[{index}].A"))?;
            let b = DVector::from_column_slice(&spec.b);
            if spec.kind != BlockType::Sqre {
                blocks.push(ConeBlock::new(kind, a, b)?.widened(cols - k));
                continue;
            }
            let n = match kind {
                ConeKind::QreEpi(n) => n,
                _ => unreachable!(),
            };
            let mut lay = sqre_layout(&a, &b, n, index)?;
            let pad = |m: &DMatrix<f64>| m.clone().resize_horizontally(cols, 0.0);
            lay.ax = pad(&lay.ax);
            lay.ay = pad(&lay.ay);
            let exp = expand_sqre(lay.t_col, (&lay.ax, &lay.bx), (&lay.ay, &lay.by))?;
            for blk in &mut blocks {
                *blk = blk.widened(2);
            }
            blocks.extend(exp.blocks);
            sqre.push((lay, exp.t1));
            cols += 2;
        }
        let c = DVector::from_column_slice(&self.objective).resize_vertically(cols, 0.0);
        let mut model = Model::new(c, blocks)?;
        if let Some(eq) = &self.equalities {
            let e = eq.e.to_dense(eq.d.len(), k, "equalities.E")?.resize_horizontally(cols, 0.0);
            model = model.with_equalities(e, DVector::from_column_slice(&eq.d))?;
        }
        let x0 = match &self.initial_point {
            None => None,
            Some(x) if x.len() != k => {
                return Err(CliError::BadParams(format!(
                    "initial_point has {} entries, expected {k}",
                    x.len()
                )))
            }
            Some(x) => Some(extend_start(&DVector::from_column_slice(x), &sqre, cols)?),
        };
        Ok(BuiltProblem {
            model,
            num_original: k,
            x0,
        })
    }
}

/// Fills the auxiliary sqre variables so that each split epigraph is
/// strictly feasible whenever the original sqre epigraph is.
fn extend_start(x: &DVector<f64>, sqre: &[(SqreLayout, usize)], cols: usize) -> Result<DVector<f64>, CliError> {
    let mut full = x.clone().resize_vertically(cols, 0.0);
    for (lay, t1) in sqre {
        let mat = |a: &DMatrix<f64>, b: &DVector<f64>| {
            let v = b - a.columns(0, x.len()) * x;
            linalg::symmetrize(&linalg::mat(matrix_order(b), v.as_slice()))
        };
        let xm = mat(&lay.ax, &lay.bx);
        let ym = mat(&lay.ay, &lay.by);
        let fwd = qre_value(&xm, &ym)?;
        let rev = qre_value(&ym, &xm)?;
        let slack = x[lay.t_col] - fwd - rev;
        if !(slack > 0.0) {
            return Err(CliError::BadParams("initial_point is not interior to an sqre block".into()));
        }
        full[*t1] = fwd + slack / 3.0;
        full[t1 + 1] = rev + slack / 3.0;
    }
    Ok(full)
}
