//! Facial reduction before the QRE solve: a Phase-I SDP finds a face
//! V 𝕊₊ʳ Vᵀ containing every feasible first argument, the problem is
//! restated over r×r matrices, and the reduced problem is solved.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::cones::{ConeBlock, ConeKind};
use crate::error::{Error, Result};
use crate::ipm::{self, initial_point_from, nullspace_parametrize, solve, Model, SolveResult, SolverOptions, Status};
use crate::linalg;
use crate::matcalc::{spectral_decompose, ScalarFn};

pub const RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FaceBasis {
    /// n×r with orthonormal columns.
    pub v: DMatrix<f64>,
    pub rank_tol: f64,
    /// The Phase-I matrix whose spectrum produced `v`.
    pub witness: DMatrix<f64>,
}

impl FaceBasis {
    pub fn full(n: usize, witness: DMatrix<f64>) -> Self {
        FaceBasis {
            v: DMatrix::identity(n, n),
            rank_tol: RANK_TOL,
            witness,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn is_full(&self) -> bool {
        self.rank() == self.dim()
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.v.transpose() * &self.v - DMatrix::identity(self.rank(), self.rank())).amax()
    }
}

#[derive(Debug, Clone)]
pub enum FaceOutcome {
    Face(FaceBasis),
    FullDimensional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase1Method {
    Primal,
    Dual,
}

#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub method: Phase1Method,
    pub phase1_seconds: f64,
    pub phase1_iterations: usize,
    pub original_dim: usize,
    pub face_rank: usize,
    pub rounds: usize,
    pub phase2_iterations: usize,
    pub face: Option<FaceBasis>,
}

/// Orthonormal basis of 𝕊ⁿ: E_ii and (E_ij + E_ji)/√2.
fn sym_basis(n: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let w = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            out.push((i, j, w));
        }
    }
    out
}

fn check_list(a_list: &[DMatrix<f64>]) -> Result<usize> {
    let n = a_list
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty matrix list".into()))?
        .nrows();
    for a in a_list {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "Phase-I matrix size",
                expected: n,
                found: a.nrows(),
            });
        }
        linalg::checked_symmetric(a, 1e-10)?;
    }
    Ok(n)
}

/// Maximizes λ_min(Y) subject to Tr Y = n over the witness set, which is
/// {Y : ⟨Y, A_i⟩ = 0} when `b` is None and {Σ y_i A_i : yᵀb = 0} otherwise.
/// The null space of the maximizer spans the face.
pub fn phase1_dual(a_list: &[DMatrix<f64>], b: Option<&[f64]>, opts: &SolverOptions) -> Result<FaceOutcome> {
    Ok(phase1_dual_run(a_list, b, opts)?.0)
}

fn phase1_dual_run(a_list: &[DMatrix<f64>], b: Option<&[f64]>, opts: &SolverOptions) -> Result<(FaceOutcome, usize)> {
    let n = check_list(a_list)?;
    let nn = n * n;
    // columns of `gen` map the witness coordinates y to vec(Y)
    let (gen, mut e_rows, mut d): (DMatrix<f64>, Vec<DVector<f64>>, Vec<f64>) = match b {
        None => {
            let basis = sym_basis(n);
            let p = basis.len();
            let mut gen = DMatrix::zeros(nn, p);
            for (c, &(i, j, w)) in basis.iter().enumerate() {
                gen[(i + j * n, c)] = w;
                gen[(j + i * n, c)] = w;
            }
            let rows = a_list
                .iter()
                .map(|a| gen.transpose() * linalg::vec_of(a))
                .collect::<Vec<_>>();
            let d = vec![0.0; rows.len()];
            (gen, rows, d)
        }
        Some(b) => {
            if b.len() != a_list.len() {
                return Err(Error::DimensionMismatch {
                    context: "Phase-I right-hand side",
                    expected: a_list.len(),
                    found: b.len(),
                });
            }
            let mut gen = DMatrix::zeros(nn, a_list.len());
            for (c, a) in a_list.iter().enumerate() {
                gen.set_column(c, &linalg::vec_of(a));
            }
            (gen, vec![DVector::from_column_slice(b)], vec![0.0])
        }
    };
    let p = gen.ncols();
    let trace_row = gen.transpose() * linalg::vec_of(&DMatrix::identity(n, n));
    e_rows.push(trace_row);
    d.push(n as f64);

    let mut e = DMatrix::zeros(e_rows.len(), p + 1);
    for (r, row) in e_rows.iter().enumerate() {
        for c in 0..p {
            e[(r, c)] = row[c];
        }
    }
    let d = DVector::from_vec(d);
    // Y − sI = −A·(y, s)
    let mut a = DMatrix::zeros(nn, p + 1);
    a.columns_mut(0, p).copy_from(&(-&gen));
    a.set_column(p, &linalg::vec_of(&DMatrix::identity(n, n)));
    let blk = ConeBlock::new(ConeKind::Psd(n), a, DVector::zeros(nn))?;
    let mut c = DVector::zeros(p + 1);
    c[p] = -1.0;

    let param = match nullspace_parametrize(&e, &d, None) {
        Ok(p) => p,
        // only Y = 0 satisfies the homogeneous constraints
        Err(Error::Inconsistent { .. }) => return Ok((FaceOutcome::FullDimensional, 0)),
        Err(err) => return Err(err),
    };
    let mut x0 = param.particular.clone();
    let y_p = linalg::mat(n, (&gen * x0.rows(0, p)).as_slice());
    x0[p] = spectral_decompose(&linalg::symmetrize(&y_p))?.min_eigval() - 1.0;
    let model = Model::new(c, vec![blk])?.with_equalities(e, d)?;
    let res = solve(&model, &x0, opts)?;
    if res.status == Status::NumericalTrouble {
        return Err(Error::InvariantViolation(format!(
            "dual Phase-I failed: {}",
            res.message.unwrap_or_default()
        )));
    }
    let y_star = linalg::symmetrize(&linalg::mat(n, (&gen * res.x.rows(0, p)).as_slice()));
    let eig = spectral_decompose(&y_star)?;
    let lmax = eig.max_eigval().abs().max(f64::MIN_POSITIVE);
    let s = res.x[p];
    if s < -RANK_TOL * lmax {
        return Ok((FaceOutcome::FullDimensional, res.iterations));
    }
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigvals[i] <= RANK_TOL * lmax).collect();
    if s > RANK_TOL * lmax || cols.is_empty() {
        return Err(Error::NoInteriorFace);
    }
    let mut v = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        v.set_column(c, &eig.basis.column(i));
    }
    Ok((
        FaceOutcome::Face(FaceBasis {
            v,
            rank_tol: RANK_TOL,
            witness: y_star,
        }),
        res.iterations,
    ))
}

fn affine_matrix(a0: Option<&DMatrix<f64>>, a_list: &[DMatrix<f64>], x: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = a0.cloned().unwrap_or_else(|| DMatrix::zeros(n, n));
    for (ai, xi) in a_list.iter().zip(x.iter()) {
        m += ai * *xi;
    }
    linalg::symmetrize(&m)
}

/// Stage A minimizes τ with A0 + Σ x_i A_i + τI ⪰ 0 inside the box; the
/// range of the result spans the face. Stage B maximizes ln det(Vᵀ A(x) V)
/// over the box to produce a start point.
pub fn phase1_primal(
    a_list: &[DMatrix<f64>],
    a0: Option<&DMatrix<f64>>,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
) -> Result<(DVector<f64>, FaceBasis)> {
    let (x, face, _) = phase1_primal_run(a_list, a0, lower, upper, opts)?;
    Ok((x, face))
}

fn phase1_primal_run(
    a_list: &[DMatrix<f64>],
    a0: Option<&DMatrix<f64>>,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
) -> Result<(DVector<f64>, FaceBasis, usize)> {
    let n = check_list(a_list)?;
    let k = a_list.len();
    if let Some(a0) = a0 {
        check_list(std::slice::from_ref(a0))?;
        if a0.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "A0 size",
                expected: n,
                found: a0.nrows(),
            });
        }
    }
    let nn = n * n;
    let start: DVector<f64> = DVector::from_iterator(
        k,
        lower.iter().zip(upper).map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
            (true, true) => 0.5 * (l + u),
            (true, false) => l + 1.0,
            (false, true) => u - 1.0,
            (false, false) => 0.0,
        }),
    );
    if start.len() != k || lower.len() != k {
        return Err(Error::DimensionMismatch {
            context: "Phase-I bounds",
            expected: k,
            found: lower.len().min(upper.len()),
        });
    }
    let bounds = crate::families::box_block(lower, upper, 0, k + 1)?;

    // stage A over (x, τ)
    let mut a = DMatrix::zeros(nn, k + 1);
    for (i, ai) in a_list.iter().enumerate() {
        a.set_column(i, &(-linalg::vec_of(ai)));
    }
    a.set_column(k, &(-linalg::vec_of(&DMatrix::identity(n, n))));
    let b = a0.map(linalg::vec_of).unwrap_or_else(|| DVector::zeros(nn));
    let mut blocks = vec![ConeBlock::new(ConeKind::Psd(n), a, b)?];
    let mut tau_row = DMatrix::zeros(1, k + 1);
    tau_row[(0, k)] = -1.0;
    blocks.push(ConeBlock::new(ConeKind::Orthant(1), tau_row, DVector::from_element(1, 1.0))?);
    blocks.extend(bounds.clone());
    let mut c = DVector::zeros(k + 1);
    c[k] = 1.0;
    let stage_a = Model::new(c, blocks)?;
    let lmin = spectral_decompose(&affine_matrix(a0, a_list, &start, n))?.min_eigval();
    let mut x0 = DVector::zeros(k + 1);
    x0.rows_mut(0, k).copy_from(&start);
    x0[k] = (-lmin).max(0.0) + 1.0;
    let res = solve(&stage_a, &x0, opts)?;
    if res.status == Status::NumericalTrouble {
        return Err(Error::InvariantViolation(format!(
            "primal Phase-I failed: {}",
            res.message.unwrap_or_default()
        )));
    }
    let mut iterations = res.iterations;
    let x_a = res.x.rows(0, k).into_owned();
    let m_a = affine_matrix(a0, a_list, &x_a, n);
    let eig = spectral_decompose(&m_a)?;
    let lmax = eig.max_eigval();
    if !(lmax > 0.0) {
        return Err(Error::NoInteriorFace);
    }
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigvals[i] >= RANK_TOL * lmax).collect();
    let mut v = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        v.set_column(c, &eig.basis.column(i));
    }
    let r = cols.len();

    // stage B: max ln det(Vᵀ A(x) V) over the box
    let mut x_out = x_a.clone();
    if let Some(bx) = crate::families::box_block(lower, upper, 0, k)? {
        let mut a = DMatrix::zeros(r * r, k);
        for (i, ai) in a_list.iter().enumerate() {
            a.set_column(i, &(-linalg::vec_of(&linalg::congruence_t(&v, ai))));
        }
        let b = a0
            .map(|m| linalg::vec_of(&linalg::congruence_t(&v, m)))
            .unwrap_or_else(|| DVector::zeros(r * r));
        let stage_b = Model::new(DVector::zeros(k), vec![bx])?
            .with_objective_block(ConeBlock::new(ConeKind::Psd(r), a, b)?)?;
        if stage_b.check_interior(&x_a).is_ok() {
            if let Ok(res) = solve(&stage_b, &x_a, opts) {
                if res.status == Status::Optimal {
                    iterations += res.iterations;
                    x_out = res.x;
                }
            }
        }
    }
    let witness = affine_matrix(a0, a_list, &x_out, n);
    Ok((
        x_out,
        FaceBasis {
            v,
            rank_tol: RANK_TOL,
            witness,
        },
        iterations,
    ))
}

/// A model restated over the face; decision variables are unchanged.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub model: Model,
    pub face: FaceBasis,
    pub block: usize,
}

impl ReducedProblem {
    /// V X̄(x) Vᵀ for the reduced block's face argument.
    pub fn lift(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.model.blocks[self.block];
        let r = self.face.rank();
        let z = blk.slack(x);
        let off = usize::from(matches!(blk.kind, ConeKind::QreEpi(_)));
        let xbar = linalg::mat(r, &z.as_slice()[off..off + r * r]);
        linalg::congruence(&self.face.v, &xbar)
    }
}

/// Row range of the face argument inside a block and whether the other
/// matrix argument (qre's second) is constant.
fn face_rows(blk: &ConeBlock) -> Result<(usize, usize)> {
    match blk.kind {
        ConeKind::Psd(n) => Ok((0, n)),
        ConeKind::QreEpi(n) => Ok((1, n)),
        _ => Err(Error::Unsupported("facial reduction needs a PSD or QRE block".into())),
    }
}

/// Restates `model.blocks[block]` over V 𝕊₊ʳ Vᵀ. For a QRE block the face
/// applies to the first argument; the second must be a constant M, which is
/// replaced by exp(Vᵀ ln M V) so that qre is preserved exactly on the face.
/// Linear equalities forcing the off-face part of the argument to vanish are
/// appended.
pub fn reduce_problem(model: &Model, block: usize, face: &FaceBasis) -> Result<ReducedProblem> {
    let blk = model
        .blocks
        .get(block)
        .ok_or_else(|| Error::InvalidParameter(format!("no block {block}")))?;
    let (off, n) = face_rows(blk)?;
    if face.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "face dimension",
            expected: n,
            found: face.dim(),
        });
    }
    if face.is_full() {
        return Ok(ReducedProblem {
            model: model.clone(),
            face: face.clone(),
            block,
        });
    }
    let nn = n * n;
    let k = model.num_vars();
    let v = &face.v;
    let r = face.rank();
    let w = linalg::orthonormal_complement(v);
    let arg = |col: Option<usize>| -> DMatrix<f64> {
        match col {
            None => linalg::mat(n, &blk.b.as_slice()[off..off + nn]),
            Some(j) => linalg::mat(n, &blk.a.column(j).as_slice()[off..off + nn]),
        }
    };
    let reduce = |m: &DMatrix<f64>| linalg::vec_of(&linalg::congruence_t(v, m));

    let (new_kind, new_len, rr_off) = match blk.kind {
        ConeKind::Psd(_) => (ConeKind::Psd(r), r * r, 0),
        _ => (ConeKind::QreEpi(r), 1 + 2 * r * r, 1),
    };
    let mut a = DMatrix::zeros(new_len, k);
    let mut b = DVector::zeros(new_len);
    b.rows_mut(rr_off, r * r).copy_from(&reduce(&arg(None)));
    for j in 0..k {
        a.view_mut((rr_off, j), (r * r, 1)).copy_from(&reduce(&arg(Some(j))));
    }
    if let ConeKind::QreEpi(_) = blk.kind {
        a.row_mut(0).copy_from(&blk.a.row(0));
        b[0] = blk.b[0];
        let y_rows = 1 + nn..1 + 2 * nn;
        if blk.a.rows(y_rows.start, nn).iter().any(|v| *v != 0.0) {
            return Err(Error::Unsupported(
                "facial reduction needs a constant second qre argument".into(),
            ));
        }
        let m = linalg::mat(n, &blk.b.as_slice()[y_rows]);
        let ln_m = spectral_decompose(&m)?;
        if ln_m.min_eigval() <= 0.0 {
            return Err(Error::DomainViolation {
                function: "ln",
                value: ln_m.min_eigval(),
            });
        }
        let reduced_ln = linalg::congruence_t(v, &ln_m.map(|x| ScalarFn::Ln.value(x)));
        let m_bar = spectral_decompose(&linalg::symmetrize(&reduced_ln))?.map(f64::exp);
        b.rows_mut(1 + r * r, r * r).copy_from(&linalg::vec_of(&m_bar));
    }

    // Wᵀ X(x) V = 0 and Wᵀ X(x) W = 0 with X(x) = B − Σ x_j A_j
    let coupling = |m: &DMatrix<f64>| -> Vec<f64> {
        let wv = w.transpose() * m * v;
        let ww = w.transpose() * m * &w;
        let mut out: Vec<f64> = wv.iter().copied().collect();
        for j in 0..ww.ncols() {
            for i in 0..=j {
                out.push(ww[(i, j)]);
            }
        }
        out
    };
    let rhs0 = coupling(&arg(None));
    let cols: Vec<Vec<f64>> = (0..k).map(|j| coupling(&arg(Some(j)))).collect();
    let scale = 1.0 + blk.a.amax().max(blk.b.amax());
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..rhs0.len() {
        let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        let norm = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= 1e-13 * scale {
            if rhs0[i].abs() > 1e-9 * scale {
                return Err(Error::Inconsistent { residual: rhs0[i].abs() });
            }
            continue;
        }
        // B − A x has zero coupling: A x = B
        rows.push((row, rhs0[i]));
    }
    let mut reduced = model.clone();
    reduced.blocks[block] = ConeBlock::new(new_kind, a, b)?;
    if !rows.is_empty() {
        let extra_e = DMatrix::from_fn(rows.len(), k, |i, j| rows[i].0[j]);
        let extra_d = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let (e, d) = match &model.equalities {
            None => (extra_e, extra_d),
            Some(eq) => {
                let mut e = DMatrix::zeros(eq.e.nrows() + rows.len(), k);
                e.rows_mut(0, eq.e.nrows()).copy_from(&eq.e);
                e.rows_mut(eq.e.nrows(), rows.len()).copy_from(&extra_e);
                let mut d = DVector::zeros(eq.d.len() + rows.len());
                d.rows_mut(0, eq.d.len()).copy_from(&eq.d);
                d.rows_mut(eq.d.len(), rows.len()).copy_from(&extra_d);
                (e, d)
            }
        };
        reduced.equalities = None;
        reduced = reduced.with_equalities(e, d)?;
    }
    reduced.validate()?;
    Ok(ReducedProblem {
        model: reduced,
        face: face.clone(),
        block,
    })
}

/// The Phase-I data of a model: the first QRE block with a constant second
/// argument, A0 and the A_i of its first argument over the columns that
/// touch it, and single-variable bounds read off orthant rows.
struct FaceData {
    block: usize,
    n: usize,
    a0: DMatrix<f64>,
    columns: Vec<usize>,
    a_list: Vec<DMatrix<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn extract_face_data(model: &Model) -> Result<FaceData> {
    let block = model
        .blocks
        .iter()
        .position(|b| {
            matches!(b.kind, ConeKind::QreEpi(n) if b.a.rows(1 + n * n, n * n).iter().all(|v| *v == 0.0))
        })
        .ok_or_else(|| Error::Unsupported("two-phase solve needs a QRE block with constant second argument".into()))?;
    let blk = &model.blocks[block];
    let (off, n) = face_rows(blk)?;
    let nn = n * n;
    let a0 = linalg::symmetrize(&linalg::mat(n, &blk.b.as_slice()[off..off + nn]));
    let columns: Vec<usize> = (0..model.num_vars())
        .filter(|&j| blk.a.column(j).rows(off, nn).iter().any(|v| *v != 0.0))
        .collect();
    let a_list = columns
        .iter()
        .map(|&j| -linalg::symmetrize(&linalg::mat(n, &blk.a.column(j).as_slice()[off..off + nn])))
        .collect();
    let mut lower = vec![f64::NEG_INFINITY; columns.len()];
    let mut upper = vec![f64::INFINITY; columns.len()];
    for other in &model.blocks {
        if !matches!(other.kind, ConeKind::Orthant(_)) {
            continue;
        }
        for r in 0..other.a.nrows() {
            let nz: Vec<usize> = (0..other.a.ncols()).filter(|&j| other.a[(r, j)] != 0.0).collect();
            if nz.len() != 1 {
                continue;
            }
            let Some(pos) = columns.iter().position(|&c| c == nz[0]) else { continue };
            // b − a x ≥ 0
            let (coef, rhs) = (other.a[(r, nz[0])], other.b[r]);
            if coef > 0.0 {
                upper[pos] = upper[pos].min(rhs / coef);
            } else {
                lower[pos] = lower[pos].max(rhs / coef);
            }
        }
    }
    Ok(FaceData {
        block,
        n,
        a0,
        columns,
        a_list,
        lower,
        upper,
    })
}

/// Phase-I, reduction onto the face and Phase-II. `rounds` repeats the
/// Phase-I on the reduced data.
pub fn two_phase_solve(
    model: &Model,
    method: Phase1Method,
    opts: &SolverOptions,
    rounds: usize,
) -> Result<(SolveResult, PhaseReport)> {
    model.validate()?;
    if model.equalities.is_some() {
        return Err(Error::Unsupported("two-phase solve of models with equalities".into()));
    }
    let data = extract_face_data(model)?;
    let started = Instant::now();
    let mut v = DMatrix::identity(data.n, data.n);
    let mut seed: Option<DVector<f64>> = None;
    let mut phase1_iterations = 0;
    let mut done_rounds = 0;
    for _ in 0..rounds.max(1) {
        let red = |m: &DMatrix<f64>| linalg::symmetrize(&linalg::congruence_t(&v, m));
        let a_list: Vec<DMatrix<f64>> = data.a_list.iter().map(red).collect();
        let a0 = red(&data.a0);
        let step = match method {
            Phase1Method::Primal => {
                let (x, face, its) = phase1_primal_run(&a_list, Some(&a0), &data.lower, &data.upper, opts)?;
                phase1_iterations += its;
                seed = Some(x);
                face
            }
            Phase1Method::Dual => {
                let mut list = a_list.clone();
                if a0.amax() > 0.0 {
                    list.push(a0.clone());
                }
                let (outcome, its) = phase1_dual_run(&list, None, opts)?;
                phase1_iterations += its;
                match outcome {
                    FaceOutcome::Face(f) => f,
                    FaceOutcome::FullDimensional => FaceBasis::full(v.ncols(), DMatrix::zeros(v.ncols(), v.ncols())),
                }
            }
        };
        done_rounds += 1;
        let full = step.is_full();
        v = &v * &step.v;
        if full || v.ncols() <= 1 {
            break;
        }
    }
    let face = FaceBasis {
        v,
        rank_tol: RANK_TOL,
        witness: DMatrix::zeros(0, 0),
    };
    let phase1_seconds = started.elapsed().as_secs_f64();

    let reduced = reduce_problem(model, data.block, &face)?;
    let mut seed_x = DVector::zeros(model.num_vars());
    if let Some(xs) = &seed {
        for (p, &j) in data.columns.iter().enumerate() {
            seed_x[j] = xs[p];
        }
    }
    let x0 = initial_point_from(&reduced.model, &seed_x, opts)?;
    let res = ipm::solve(&reduced.model, &x0, opts)?;
    let report = PhaseReport {
        method,
        phase1_seconds,
        phase1_iterations,
        original_dim: data.n,
        face_rank: face.rank(),
        rounds: done_rounds,
        phase2_iterations: res.iterations,
        face: Some(face),
    };
    Ok((res, report))
}
