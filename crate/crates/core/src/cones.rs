//! Barrier blocks composed by the solver. Each block constrains the affine
//! image z = b − A x of the decision vector to the interior of its domain.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result, Violation};
use crate::ipm::Model;
use crate::linalg;
use crate::qre_barrier::{phi_eval, phi_hess_apply, phi_hess_solve, phi_value, QreDerivs, QrePoint};

const VEC_SYM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Orthant(usize),
    Psd(usize),
    KlEpi(usize),
    QreEpi(usize),
}

impl ConeKind {
    /// Length of the block coordinate vector.
    pub fn dim(self) -> usize {
        match self {
            ConeKind::Orthant(m) => m,
            ConeKind::Psd(n) => n * n,
            ConeKind::KlEpi(n) => 1 + 2 * n,
            ConeKind::QreEpi(n) => 1 + 2 * n * n,
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            ConeKind::Orthant(m) => m as f64,
            ConeKind::Psd(n) => n as f64,
            ConeKind::KlEpi(n) | ConeKind::QreEpi(n) => (2 * n + 1) as f64,
        }
    }

    /// A direction e with z + s·e interior for all large s from any z; used by
    /// the shifted Phase-I. Epigraph domains of qre and KL are cones, so the
    /// cone's interior point (1, I, I) works.
    pub fn interior_direction(self) -> DVector<f64> {
        match self {
            ConeKind::Orthant(m) => DVector::from_element(m, 1.0),
            ConeKind::Psd(n) => linalg::vec_of(&DMatrix::identity(n, n)),
            ConeKind::KlEpi(n) => DVector::from_element(1 + 2 * n, 1.0),
            ConeKind::QreEpi(n) => {
                let i = linalg::vec_of(&DMatrix::identity(n, n));
                let mut e = DVector::zeros(1 + 2 * n * n);
                e[0] = 1.0;
                e.rows_mut(1, n * n).copy_from(&i);
                e.rows_mut(1 + n * n, n * n).copy_from(&i);
                e
            }
        }
    }

    /// Coordinate ranges holding n×n symmetric matrices.
    fn matrix_ranges(self) -> Vec<(usize, usize)> {
        match self {
            ConeKind::Psd(n) => vec![(0, n)],
            ConeKind::QreEpi(n) => vec![(1, n), (1 + n * n, n)],
            _ => vec![],
        }
    }

    pub fn eval(self, z: &DVector<f64>) -> Result<BarrierEval> {
        check_len(self.dim(), z.len())?;
        match self {
            ConeKind::Orthant(_) => orthant_eval(z),
            ConeKind::Psd(n) => psd_eval(n, z),
            ConeKind::KlEpi(n) => kl_eval(n, z),
            ConeKind::QreEpi(n) => {
                let d = phi_eval(&QrePoint::from_vec(n, z.as_slice())?)?;
                Ok(BarrierEval {
                    value: d.value,
                    grad: d.grad.clone(),
                    nu: self.nu(),
                    hess: BlockHessian::Qre(Box::new(d)),
                })
            }
        }
    }

    /// Barrier value alone.
    pub fn value(self, z: &DVector<f64>) -> Result<f64> {
        check_len(self.dim(), z.len())?;
        match self {
            ConeKind::Orthant(_) => orthant_value(z),
            ConeKind::Psd(n) => psd_chol(n, z).map(|(v, _)| v),
            ConeKind::KlEpi(n) => kl_parts(n, z).map(|p| p.value),
            ConeKind::QreEpi(n) => phi_value(&QrePoint::from_vec(n, z.as_slice())?),
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: "block coordinates",
            expected,
            found,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let blk = ConeBlock { kind, a, b };
        blk.validate(blk.a.ncols())?;
        Ok(blk)
    }

    pub fn nu(&self) -> f64 {
        self.kind.nu()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let dim = self.kind.dim();
        check_len(dim, self.a.nrows())?;
        check_len(dim, self.b.len())?;
        if self.a.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "block column count",
                expected: k,
                found: self.a.ncols(),
            });
        }
        if self.a.iter().chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (start, n) in self.kind.matrix_ranges() {
            let check = |v: &[f64]| -> Result<()> {
                let m = linalg::mat(n, v);
                let asym = linalg::asymmetry(&m);
                if asym > VEC_SYM_TOL * linalg::max_abs(&m).max(1.0) {
                    Err(Error::NonSymmetric { asymmetry: asym })
                } else {
                    Ok(())
                }
            };
            check(&self.b.as_slice()[start..start + n * n])?;
            for j in 0..k {
                check(&self.a.column(j).as_slice()[start..start + n * n])?;
            }
        }
        Ok(())
    }

    pub fn slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }

    /// Append `extra` zero columns.
    pub fn widened(&self, extra: usize) -> ConeBlock {
        let (rows, k) = self.a.shape();
        let mut a = DMatrix::zeros(rows, k + extra);
        a.columns_mut(0, k).copy_from(&self.a);
        ConeBlock {
            kind: self.kind,
            a,
            b: self.b.clone(),
        }
    }
}

#[derive(Debug)]
pub enum BlockHessian {
    Diagonal(DVector<f64>),
    /// −ln det Z: Hessian V ↦ Z⁻¹VZ⁻¹, inverse V ↦ ZVZ.
    Psd { z: DMatrix<f64>, z_inv: DMatrix<f64> },
    Dense { h: DMatrix<f64>, chol: Cholesky<f64, Dyn> },
    Qre(Box<QreDerivs>),
}

/// Relative tolerance for the inner PCG solves with QRE Hessians.
pub const QRE_SOLVE_TOL: f64 = 1e-12;

impl BlockHessian {
    pub fn apply(&self, v: &[f64]) -> Result<DVector<f64>> {
        match self {
            BlockHessian::Diagonal(d) => Ok(DVector::from_iterator(
                d.len(),
                d.iter().zip(v).map(|(a, b)| a * b),
            )),
            BlockHessian::Psd { z_inv, .. } => {
                let n = z_inv.nrows();
                Ok(linalg::vec_of(&(z_inv * linalg::mat(n, v) * z_inv)))
            }
            BlockHessian::Dense { h, .. } => Ok(h * DVector::from_column_slice(v)),
            BlockHessian::Qre(d) => phi_hess_apply(d, v),
        }
    }

    pub fn solve(&self, v: &[f64]) -> Result<DVector<f64>> {
        match self {
            BlockHessian::Diagonal(d) => Ok(DVector::from_iterator(
                d.len(),
                d.iter().zip(v).map(|(a, b)| b / a),
            )),
            BlockHessian::Psd { z, .. } => {
                let n = z.nrows();
                Ok(linalg::vec_of(&(z * linalg::mat(n, v) * z)))
            }
            BlockHessian::Dense { chol, .. } => Ok(chol.solve(&DVector::from_column_slice(v))),
            BlockHessian::Qre(d) => phi_hess_solve(d, v, QRE_SOLVE_TOL),
        }
    }
}

#[derive(Debug)]
pub struct BarrierEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub nu: f64,
    pub hess: BlockHessian,
}

impl BarrierEval {
    pub fn hess_apply(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.hess.apply(v)
    }

    pub fn hess_solve(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.hess.solve(v)
    }
}

pub fn block_eval(blk: &ConeBlock, z: &DVector<f64>) -> Result<BarrierEval> {
    blk.kind.eval(z)
}

fn orthant_value(z: &DVector<f64>) -> Result<f64> {
    let mut v = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        if !(zi > 0.0) {
            return Err(Error::NotInterior(Violation::Orthant { index: i }));
        }
        v -= zi.ln();
    }
    Ok(v)
}

fn orthant_eval(z: &DVector<f64>) -> Result<BarrierEval> {
    let value = orthant_value(z)?;
    Ok(BarrierEval {
        value,
        grad: z.map(|v| -1.0 / v),
        nu: z.len() as f64,
        hess: BlockHessian::Diagonal(z.map(|v| 1.0 / (v * v))),
    })
}

fn psd_chol(n: usize, z: &DVector<f64>) -> Result<(f64, Cholesky<f64, Dyn>)> {
    let m = linalg::symmetrize(&linalg::mat(n, z.as_slice()));
    let chol = m.cholesky().ok_or(Error::NotInterior(Violation::Psd))?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    if !logdet.is_finite() {
        return Err(Error::NotInterior(Violation::Psd));
    }
    Ok((-logdet, chol))
}

fn psd_eval(n: usize, z: &DVector<f64>) -> Result<BarrierEval> {
    let (value, chol) = psd_chol(n, z)?;
    let z_inv = linalg::symmetrize(&chol.inverse());
    Ok(BarrierEval {
        value,
        grad: -linalg::vec_of(&z_inv),
        nu: n as f64,
        hess: BlockHessian::Psd {
            z: linalg::symmetrize(&linalg::mat(n, z.as_slice())),
            z_inv,
        },
    })
}

pub fn kl_value(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "KL arguments",
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut s = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        if !(xi > 0.0) {
            return Err(Error::DomainViolation {
                function: "x ln x",
                value: xi,
            });
        }
        if !(yi > 0.0) {
            return Err(Error::DomainViolation {
                function: "ln",
                value: yi,
            });
        }
        s += xi * xi.ln() - xi * yi.ln();
    }
    Ok(s)
}

struct KlParts {
    value: f64,
    slack: f64,
    gx: DVector<f64>,
    gy: DVector<f64>,
}

fn kl_parts(n: usize, z: &DVector<f64>) -> Result<KlParts> {
    let x = z.rows(1, n).into_owned();
    let y = z.rows(1 + n, n).into_owned();
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotInterior(Violation::FirstArgument));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotInterior(Violation::SecondArgument));
    }
    let kl = kl_value(&x, &y)?;
    let slack = z[0] - kl;
    if !(slack > 0.0) {
        return Err(Error::NotInterior(Violation::Epigraph));
    }
    let value = -slack.ln() - x.iter().map(|v| v.ln()).sum::<f64>() - y.iter().map(|v| v.ln()).sum::<f64>();
    let gx = DVector::from_fn(n, |i, _| 1.0 + x[i].ln() - y[i].ln());
    let gy = DVector::from_fn(n, |i, _| -x[i] / y[i]);
    Ok(KlParts { value, slack, gx, gy })
}

fn kl_eval(n: usize, z: &DVector<f64>) -> Result<BarrierEval> {
    let p = kl_parts(n, z)?;
    let t = p.slack;
    let dim = 1 + 2 * n;
    let x = z.rows(1, n);
    let y = z.rows(1 + n, n);

    // ∇T = (1, −∇KL)
    let mut dt = DVector::zeros(dim);
    dt[0] = 1.0;
    dt.rows_mut(1, n).copy_from(&(-&p.gx));
    dt.rows_mut(1 + n, n).copy_from(&(-&p.gy));
    let mut grad = -&dt / t;
    for i in 0..n {
        grad[1 + i] -= 1.0 / x[i];
        grad[1 + n + i] -= 1.0 / y[i];
    }
    let mut h = &dt * dt.transpose() / (t * t);
    for i in 0..n {
        let (xi, yi) = (x[i], y[i]);
        h[(1 + i, 1 + i)] += 1.0 / (t * xi) + 1.0 / (xi * xi);
        h[(1 + i, 1 + n + i)] += -1.0 / (t * yi);
        h[(1 + n + i, 1 + i)] += -1.0 / (t * yi);
        h[(1 + n + i, 1 + n + i)] += xi / (t * yi * yi) + 1.0 / (yi * yi);
    }
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularBlock("KL epigraph Hessian".into()))?;
    Ok(BarrierEval {
        value: p.value,
        grad,
        nu: (2 * n + 1) as f64,
        hess: BlockHessian::Dense { h, chol },
    })
}

/// The symmetric QRE epigraph qre(X,Y) + qre(Y,X) ≤ t rewritten as
/// qre(X,Y) ≤ t₁, qre(Y,X) ≤ t₂, t₁ + t₂ ≤ t with two new trailing variables.
#[derive(Debug, Clone)]
pub struct SqreExpansion {
    pub blocks: Vec<ConeBlock>,
    /// Indices of t₁ and t₂ in the widened decision vector.
    pub t1: usize,
    pub t2: usize,
}

/// `x_map` and `y_map` are (A, b) with X(x) = mat(b − A x); both A have k
/// columns. The returned blocks have k + 2 columns.
pub fn expand_sqre(
    t_index: usize,
    x_map: (&DMatrix<f64>, &DVector<f64>),
    y_map: (&DMatrix<f64>, &DVector<f64>),
) -> Result<SqreExpansion> {
    let (ax, bx) = x_map;
    let (ay, by) = y_map;
    let k = ax.ncols();
    let nn = ax.nrows();
    let n = (nn as f64).sqrt().round() as usize;
    if n * n != nn {
        return Err(Error::DimensionMismatch {
            context: "SQRE matrix map rows",
            expected: n * n,
            found: nn,
        });
    }
    for (found, expected) in [(ay.nrows(), nn), (bx.len(), nn), (by.len(), nn), (ay.ncols(), k)] {
        if found != expected {
            return Err(Error::DimensionMismatch {
                context: "SQRE matrix maps",
                expected,
                found,
            });
        }
    }
    if t_index >= k {
        return Err(Error::DimensionMismatch {
            context: "SQRE t index",
            expected: k,
            found: t_index,
        });
    }
    let (t1, t2) = (k, k + 1);
    let epi = |t_col: usize, (a1, b1): (&DMatrix<f64>, &DVector<f64>), (a2, b2): (&DMatrix<f64>, &DVector<f64>)| {
        let mut a = DMatrix::zeros(1 + 2 * nn, k + 2);
        let mut b = DVector::zeros(1 + 2 * nn);
        a[(0, t_col)] = -1.0;
        a.view_mut((1, 0), (nn, k)).copy_from(a1);
        a.view_mut((1 + nn, 0), (nn, k)).copy_from(a2);
        b.rows_mut(1, nn).copy_from(b1);
        b.rows_mut(1 + nn, nn).copy_from(b2);
        ConeBlock::new(ConeKind::QreEpi(n), a, b)
    };
    let first = epi(t1, (ax, bx), (ay, by))?;
    let second = epi(t2, (ay, by), (ax, bx))?;
    let mut a = DMatrix::zeros(1, k + 2);
    a[(0, t_index)] = -1.0;
    a[(0, t1)] = 1.0;
    a[(0, t2)] = 1.0;
    let chain = ConeBlock::new(ConeKind::Orthant(1), a, DVector::zeros(1))?;
    Ok(SqreExpansion {
        blocks: vec![first, second, chain],
        t1,
        t2,
    })
}

/// Sum of block barriers through their affine maps.
#[derive(Debug)]
pub struct AggregateEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub nu: f64,
    pub blocks: Vec<BarrierEval>,
}

impl AggregateEval {
    /// Σ A_jᵀ Φ_j''(A_j v)
    pub fn hess_apply(&self, model: &Model, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(v.len());
        for (blk, ev) in model.blocks.iter().zip(&self.blocks) {
            let av = &blk.a * v;
            let hv = ev.hess_apply(av.as_slice())?;
            out += blk.a.transpose() * hv;
        }
        Ok(out)
    }
}

pub fn model_barrier(model: &Model, x: &DVector<f64>) -> Result<AggregateEval> {
    let mut value = 0.0;
    let mut grad = DVector::zeros(x.len());
    let mut blocks = Vec::with_capacity(model.blocks.len());
    for (j, blk) in model.blocks.iter().enumerate() {
        let z = blk.slack(x);
        let ev = blk.kind.eval(&z).map_err(|e| tag_block(j, e))?;
        value += ev.value;
        grad -= blk.a.transpose() * &ev.grad;
        blocks.push(ev);
    }
    Ok(AggregateEval {
        value,
        grad,
        nu: model.nu(),
        blocks,
    })
}

pub(crate) fn tag_block(index: usize, e: Error) -> Error {
    match e {
        Error::NotInterior(v) => Error::NotInterior(Violation::Block {
            index,
            inner: Box::new(v),
        }),
        other => other,
    }
}
