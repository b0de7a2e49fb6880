//! Feasible-start predictor–corrector path following on
//! f_μ(x) = (⟨c, x⟩ + Ψ(x))/μ + Σ_j Φ_j(b_j − A_j x),
//! where Ψ is an optional sum of objective barrier blocks.

use nalgebra::{DMatrix, DVector};

use crate::cones::{model_barrier, tag_block, AggregateEval, BlockHessian, ConeBlock, ConeKind};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct Equalities {
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub c: DVector<f64>,
    pub blocks: Vec<ConeBlock>,
    pub equalities: Option<Equalities>,
    /// Barrier terms added to the objective with unit weight (used for
    /// max-det subproblems); they do not count towards ν.
    pub objective_blocks: Vec<ConeBlock>,
}

impl Model {
    pub fn new(c: DVector<f64>, blocks: Vec<ConeBlock>) -> Result<Self> {
        let m = Model {
            c,
            blocks,
            equalities: None,
            objective_blocks: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        self.equalities = Some(Equalities { e, d });
        self.validate()?;
        Ok(self)
    }

    pub fn with_objective_block(mut self, blk: ConeBlock) -> Result<Self> {
        self.objective_blocks.push(blk);
        self.validate()?;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn nu(&self) -> f64 {
        self.blocks.iter().map(|b| b.nu()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.c.len();
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for blk in self.blocks.iter().chain(&self.objective_blocks) {
            blk.validate(k)?;
        }
        if let Some(eq) = &self.equalities {
            if eq.e.ncols() != k {
                return Err(Error::DimensionMismatch {
                    context: "equality columns",
                    expected: k,
                    found: eq.e.ncols(),
                });
            }
            if eq.d.len() != eq.e.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "equality right-hand side",
                    expected: eq.e.nrows(),
                    found: eq.d.len(),
                });
            }
        }
        Ok(())
    }

    /// ⟨c, x⟩ + Ψ(x)
    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        let mut v = self.c.dot(x);
        for blk in &self.objective_blocks {
            v += blk.kind.value(&blk.slack(x))?;
        }
        Ok(v)
    }

    /// Ok when every block (and objective block) is strictly interior at x.
    pub fn check_interior(&self, x: &DVector<f64>) -> Result<()> {
        for (j, blk) in self.blocks.iter().enumerate() {
            blk.kind.value(&blk.slack(x)).map_err(|e| tag_block(j, e))?;
        }
        for (j, blk) in self.objective_blocks.iter().enumerate() {
            blk.kind
                .value(&blk.slack(x))
                .map_err(|e| tag_block(self.blocks.len() + j, e))?;
        }
        Ok(())
    }

    pub fn equality_residual(&self, x: &DVector<f64>) -> f64 {
        self.equalities
            .as_ref()
            .map(|eq| (&eq.e * x - &eq.d).norm())
            .unwrap_or(0.0)
    }

    /// The same model over decision vectors x = shift + basis·w.
    pub fn substitute(&self, basis: &DMatrix<f64>, shift: &DVector<f64>) -> Model {
        let pattern = column_pattern(basis);
        let map = |blk: &ConeBlock| {
            let mut a = DMatrix::zeros(blk.a.nrows(), basis.ncols());
            for (c, col) in pattern.iter().enumerate() {
                let mut out = a.column_mut(c);
                for &(j, v) in col {
                    out.axpy(v, &blk.a.column(j), 1.0);
                }
            }
            ConeBlock {
                kind: blk.kind,
                a,
                b: &blk.b - &blk.a * shift,
            }
        };
        Model {
            c: basis.transpose() * &self.c,
            blocks: self.blocks.iter().map(map).collect(),
            equalities: self.equalities.as_ref().map(|eq| Equalities {
                e: &eq.e * basis,
                d: &eq.d - &eq.e * shift,
            }),
            objective_blocks: self.objective_blocks.iter().map(map).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub mu_shrink: f64,
    pub max_iters: usize,
    pub ls_backtrack: f64,
    /// Newton-step cap for a single corrector call.
    pub corrector_cap: usize,
    /// Newton-step cap for the initial centering and for each predictor.
    pub centering_cap: usize,
    /// Centrality reached by a final cleanup after the stopping test.
    pub final_omega: f64,
    /// Aggregate Hessians larger than this are solved by Jacobi-PCG instead
    /// of a dense Cholesky factorization.
    pub dense_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            delta1: 0.1,
            delta2: 0.5,
            mu_shrink: 0.3,
            max_iters: 400,
            ls_backtrack: 0.5,
            corrector_cap: 50,
            centering_cap: 500,
            final_omega: 1e-3,
            dense_threshold: 3000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(0.0 < self.delta1 && self.delta1 < self.delta2) {
            return bad("need 0 < delta1 < delta2");
        }
        if !(0.0 < self.mu_shrink && self.mu_shrink < 1.0) {
            return bad("mu_shrink must lie in (0, 1)");
        }
        if !(0.0 < self.ls_backtrack && self.ls_backtrack < 1.0) {
            return bad("ls_backtrack must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIters,
    NumericalTrouble,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIters => "max_iters",
            Status::NumericalTrouble => "numerical_trouble",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub mu: f64,
    pub omega: f64,
    /// First predictor step length of the iteration.
    pub step: f64,
    pub objective: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: Status,
    pub iterations: usize,
    pub newton_steps: usize,
    pub mu_final: f64,
    pub nu: f64,
    pub trace: Vec<TraceRecord>,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct NullspaceParam {
    /// Orthonormal columns spanning null(E).
    pub basis: DMatrix<f64>,
    pub particular: DVector<f64>,
}

impl NullspaceParam {
    pub fn to_x(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.particular + &self.basis * w
    }

    pub fn to_w(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (x - &self.particular)
    }
}

/// Columns of E that are identically zero stay coordinate directions of the
/// null-space basis, so variables untouched by the equalities are not mixed.
pub fn nullspace_parametrize(
    e: &DMatrix<f64>,
    d: &DVector<f64>,
    x_ref: Option<&DVector<f64>>,
) -> Result<NullspaceParam> {
    let k = e.ncols();
    let touched: Vec<usize> = (0..k).filter(|&j| e.column(j).iter().any(|v| *v != 0.0)).collect();
    let free: Vec<usize> = (0..k).filter(|j| !touched.contains(j)).collect();
    let mut sub = DMatrix::zeros(e.nrows(), touched.len());
    for (c, &j) in touched.iter().enumerate() {
        sub.set_column(c, &e.column(j));
    }
    let rs = linalg::row_space(&sub, d)?;
    let comp = linalg::orthonormal_complement(&rs.basis);

    let mut particular = DVector::zeros(k);
    match x_ref {
        Some(xr) => {
            if xr.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "reference point",
                    expected: k,
                    found: xr.len(),
                });
            }
            let xr_sub = DVector::from_iterator(touched.len(), touched.iter().map(|&j| xr[j]));
            // project onto the affine set: x_ref − B Bᵀ x_ref + least-norm part
            let proj = &xr_sub - &rs.basis * (rs.basis.transpose() * &xr_sub) + &rs.least_norm;
            for (c, &j) in touched.iter().enumerate() {
                particular[j] = proj[c];
            }
            for &j in &free {
                particular[j] = xr[j];
            }
        }
        None => {
            for (c, &j) in touched.iter().enumerate() {
                particular[j] = rs.least_norm[c];
            }
        }
    }

    let p = comp.ncols() + free.len();
    let mut basis = DMatrix::zeros(k, p);
    for (c, &j) in touched.iter().enumerate() {
        for col in 0..comp.ncols() {
            basis[(j, col)] = comp[(c, col)];
        }
    }
    for (i, &j) in free.iter().enumerate() {
        basis[(j, comp.ncols() + i)] = 1.0;
    }
    Ok(NullspaceParam { basis, particular })
}

/// An equality-free model in the null-space coordinates w of the original.
struct Reduced {
    model: Model,
    param: Option<NullspaceParam>,
}

impl Reduced {
    fn new(model: &Model, x_ref: Option<&DVector<f64>>) -> Result<Self> {
        match &model.equalities {
            None => Ok(Reduced {
                model: model.clone(),
                param: None,
            }),
            Some(eq) => {
                let param = nullspace_parametrize(&eq.e, &eq.d, x_ref)?;
                let mut m = model.substitute(&param.basis, &param.particular);
                m.equalities = None;
                Ok(Reduced {
                    model: m,
                    param: Some(param),
                })
            }
        }
    }

    fn to_x(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.param {
            None => w.clone(),
            Some(p) => p.to_x(w),
        }
    }

    fn to_w(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.param {
            None => x.clone(),
            Some(p) => p.to_w(x),
        }
    }

    fn objective_offset(&self, original: &Model) -> f64 {
        self.param
            .as_ref()
            .map(|p| original.c.dot(&p.particular))
            .unwrap_or(0.0)
    }
}

/// Nonzero entries of one column, as (row, value).
type ColumnPattern = Vec<Vec<(usize, f64)>>;

fn column_pattern(a: &DMatrix<f64>) -> ColumnPattern {
    (0..a.ncols())
        .map(|j| {
            a.column(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect()
        })
        .collect()
}

/// Σ_j scale·A_jᵀ H_j A_j assembled densely.
fn add_block_hessian(
    out: &mut DMatrix<f64>,
    blk: &ConeBlock,
    hess: &BlockHessian,
    scale: f64,
) -> Result<()> {
    let a = &blk.a;
    let k = a.ncols();
    match hess {
        BlockHessian::Diagonal(d) => {
            let mut scaled = a.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= (d[i] * scale).sqrt();
            }
            *out += scaled.transpose() * &scaled;
        }
        BlockHessian::Psd { z_inv, .. } => {
            let n = z_inv.nrows();
            let pattern = column_pattern(a);
            let nnz: usize = pattern.iter().map(|c| c.len()).sum();
            let nf = n as f64;
            let active = pattern.iter().filter(|c| !c.is_empty()).count() as f64;
            let dense_cost = active * 2.0 * nf.powi(3) + active * active * nf * nf;
            if (nnz as f64).powi(2) <= dense_cost {
                // Tr(W D_p W D_q) = Σ α β W_ik W_jl over entries (i,j,α) of D_p, (k,l,β) of D_q
                for p in 0..k {
                    if pattern[p].is_empty() {
                        continue;
                    }
                    for q in p..k {
                        if pattern[q].is_empty() {
                            continue;
                        }
                        let mut acc = 0.0;
                        for &(r1, v1) in &pattern[p] {
                            let (i, j) = (r1 % n, r1 / n);
                            for &(r2, v2) in &pattern[q] {
                                let (kk, l) = (r2 % n, r2 / n);
                                acc += v1 * v2 * z_inv[(i, kk)] * z_inv[(j, l)];
                            }
                        }
                        out[(p, q)] += scale * acc;
                        if q != p {
                            out[(q, p)] += scale * acc;
                        }
                    }
                }
            } else {
                let cols: Vec<usize> = (0..k).filter(|&j| !pattern[j].is_empty()).collect();
                let mut ha = DMatrix::zeros(a.nrows(), cols.len());
                for (c, &j) in cols.iter().enumerate() {
                    let dj = linalg::mat(n, a.column(j).as_slice());
                    let w = z_inv * dj * z_inv;
                    ha.set_column(c, &DVector::from_column_slice(w.as_slice()));
                }
                let mut sub = DMatrix::zeros(a.nrows(), cols.len());
                for (c, &j) in cols.iter().enumerate() {
                    sub.set_column(c, &a.column(j));
                }
                let block = sub.transpose() * ha;
                for (ci, &i) in cols.iter().enumerate() {
                    for (cj, &j) in cols.iter().enumerate() {
                        out[(i, j)] += scale * block[(ci, cj)];
                    }
                }
            }
        }
        BlockHessian::Dense { h, .. } => {
            *out += a.transpose() * h * a * scale;
        }
        BlockHessian::Qre(_) => {
            let cols: Vec<usize> = (0..k).filter(|&j| a.column(j).iter().any(|v| *v != 0.0)).collect();
            let mut ha = DMatrix::zeros(a.nrows(), cols.len());
            let mut sub = DMatrix::zeros(a.nrows(), cols.len());
            for (c, &j) in cols.iter().enumerate() {
                let hj = hess.apply(a.column(j).as_slice())?;
                ha.set_column(c, &hj);
                sub.set_column(c, &a.column(j));
            }
            let block = sub.transpose() * ha;
            for (ci, &i) in cols.iter().enumerate() {
                for (cj, &j) in cols.iter().enumerate() {
                    // symmetrize the round-off of the operator application
                    out[(i, j)] += scale * 0.5 * (block[(ci, cj)] + block[(cj, ci)]);
                }
            }
        }
    }
    Ok(())
}

struct NewtonInfo {
    omega: f64,
    dir: DVector<f64>,
    grad: DVector<f64>,
}

struct Evaluated {
    barrier: AggregateEval,
    objective_evals: Vec<crate::cones::BarrierEval>,
}

fn evaluate(model: &Model, w: &DVector<f64>) -> Result<Evaluated> {
    let barrier = model_barrier(model, w)?;
    let mut objective_evals = Vec::with_capacity(model.objective_blocks.len());
    for (j, blk) in model.objective_blocks.iter().enumerate() {
        let ev = blk
            .kind
            .eval(&blk.slack(w))
            .map_err(|e| tag_block(model.blocks.len() + j, e))?;
        objective_evals.push(ev);
    }
    Ok(Evaluated {
        barrier,
        objective_evals,
    })
}

fn objective_gradient(model: &Model, ev: &Evaluated) -> DVector<f64> {
    let mut g = model.c.clone();
    for (blk, oe) in model.objective_blocks.iter().zip(&ev.objective_evals) {
        g -= blk.a.transpose() * &oe.grad;
    }
    g
}

/// Hessian of f_μ (objective blocks weighted by 1/μ).
fn hessian(model: &Model, ev: &Evaluated, mu: f64) -> Result<DMatrix<f64>> {
    let k = model.num_vars();
    let mut h = DMatrix::zeros(k, k);
    for (blk, be) in model.blocks.iter().zip(&ev.barrier.blocks) {
        add_block_hessian(&mut h, blk, &be.hess, 1.0)?;
    }
    for (blk, oe) in model.objective_blocks.iter().zip(&ev.objective_evals) {
        add_block_hessian(&mut h, blk, &oe.hess, 1.0 / mu)?;
    }
    Ok(h)
}

fn hessian_solve(
    model: &Model,
    ev: &Evaluated,
    mu: f64,
    rhs: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<DVector<f64>> {
    let k = model.num_vars();
    if k <= opts.dense_threshold {
        let h = hessian(model, ev, mu)?;
        return linalg::spd_solve(&h, rhs);
    }
    jacobi_pcg(model, ev, mu, rhs)
}

fn hess_apply(model: &Model, ev: &Evaluated, mu: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    let mut out = ev.barrier.hess_apply(model, v)?;
    for (blk, oe) in model.objective_blocks.iter().zip(&ev.objective_evals) {
        let av = &blk.a * v;
        out += blk.a.transpose() * oe.hess_apply(av.as_slice())? / mu;
    }
    Ok(out)
}

fn jacobi_pcg(model: &Model, ev: &Evaluated, mu: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let k = model.num_vars();
    let mut diag = DVector::zeros(k);
    for j in 0..k {
        let mut e = DVector::zeros(k);
        e[j] = 1.0;
        diag[j] = hess_apply(model, ev, mu, &e)?[j];
    }
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::SingularBlock("aggregate Hessian has a nonpositive diagonal".into()));
    }
    let bnorm = rhs.norm();
    let mut x = DVector::zeros(k);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut z = r.component_div(&diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let cap = 10 * k;
    for it in 1..=cap {
        let ap = hess_apply(model, ev, mu, &p)?;
        let curv = p.dot(&ap);
        if !(curv > 0.0) {
            return Err(Error::NoConvergence { iterations: it });
        }
        let alpha = rz / curv;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= 1e-12 * bnorm {
            return Ok(x);
        }
        z = r.component_div(&diag);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    Err(Error::NoConvergence { iterations: cap })
}

fn newton_at(model: &Model, w: &DVector<f64>, mu: f64, opts: &SolverOptions) -> Result<NewtonInfo> {
    let ev = evaluate(model, w)?;
    let grad = objective_gradient(model, &ev) / mu + &ev.barrier.grad;
    let dir = -hessian_solve(model, &ev, mu, &grad, opts)?;
    let dec = -grad.dot(&dir);
    Ok(NewtonInfo {
        omega: dec.max(0.0).sqrt(),
        dir,
        grad,
    })
}

/// f_μ(w), or None outside the domain.
fn merit(model: &Model, w: &DVector<f64>, mu: f64) -> Option<f64> {
    let mut v = 0.0;
    for blk in &model.blocks {
        v += blk.kind.value(&blk.slack(w)).ok()?;
    }
    let obj = model.objective(w).ok()?;
    let total = v + obj / mu;
    total.is_finite().then_some(total)
}

/// Armijo backtracking from a unit step; None when the step collapses.
fn line_search(
    model: &Model,
    w: &DVector<f64>,
    mu: f64,
    info: &NewtonInfo,
    opts: &SolverOptions,
) -> Option<(DVector<f64>, f64)> {
    let f0 = merit(model, w, mu)?;
    let slope = info.grad.dot(&info.dir);
    let mut alpha = 1.0;
    while alpha >= 1e-12 {
        let trial = w + &info.dir * alpha;
        if let Some(f) = merit(model, &trial, mu) {
            // the absolute slack absorbs round-off in f near convergence
            if f <= f0 + 1e-4 * alpha * slope + 1e-13 * f0.abs().max(1.0) {
                return Some((trial, alpha));
            }
        }
        alpha *= opts.ls_backtrack;
    }
    None
}

/// Damped Newton steps min(1, 1/(1+ω)) with backtracking to interiority.
fn damped_step(
    model: &Model,
    w: &DVector<f64>,
    info: &NewtonInfo,
    opts: &SolverOptions,
) -> Option<DVector<f64>> {
    let mut alpha = (1.0 / (1.0 + info.omega)).min(1.0);
    while alpha >= 1e-12 {
        let trial = w + &info.dir * alpha;
        if model.check_interior(&trial).is_ok() {
            return Some(trial);
        }
        alpha *= opts.ls_backtrack;
    }
    None
}

pub fn centrality(model: &Model, x: &DVector<f64>, mu: f64) -> Result<(f64, DVector<f64>)> {
    let red = Reduced::new(model, Some(x))?;
    let w = red.to_w(x);
    let info = newton_at(&red.model, &w, mu, &SolverOptions::default())?;
    let dir = match &red.param {
        None => info.dir,
        Some(p) => &p.basis * info.dir,
    };
    Ok((info.omega, dir))
}

pub fn corrector(model: &Model, x: &DVector<f64>, mu: f64, opts: &SolverOptions) -> Result<DVector<f64>> {
    let red = Reduced::new(model, Some(x))?;
    let mut w = red.to_w(x);
    let (w_out, _, _) = correct(&red.model, &mut w, mu, opts)?;
    Ok(red.to_x(&w_out))
}

/// Corrector loop in reduced coordinates; returns (w, ω, steps).
fn correct(model: &Model, w: &mut DVector<f64>, mu: f64, opts: &SolverOptions) -> Result<(DVector<f64>, f64, usize)> {
    let mut steps = 0;
    loop {
        let info = newton_at(model, w, mu, opts)?;
        if info.omega < opts.delta1 {
            return Ok((w.clone(), info.omega, steps));
        }
        if steps >= opts.corrector_cap {
            return Err(Error::NoConvergence { iterations: steps });
        }
        *w = damped_step(model, w, &info, opts)
            .ok_or_else(|| Error::SingularBlock("corrector step collapsed".into()))?;
        steps += 1;
    }
}

/// Armijo–Newton on f_μ until ω ≤ target; returns (ω, steps, first step length).
fn center(
    model: &Model,
    w: &mut DVector<f64>,
    mu: f64,
    target: f64,
    cap: usize,
    opts: &SolverOptions,
) -> Result<(f64, usize, f64)> {
    let mut steps = 0;
    let mut first_step = 0.0;
    loop {
        let info = newton_at(model, w, mu, opts)?;
        if info.omega <= target {
            return Ok((info.omega, steps, first_step));
        }
        if steps >= cap {
            return Err(Error::NoConvergence { iterations: steps });
        }
        let (next, alpha) = line_search(model, w, mu, &info, opts)
            .ok_or_else(|| Error::SingularBlock("line search stalled".into()))?;
        if steps == 0 {
            first_step = alpha;
        }
        *w = next;
        steps += 1;
    }
}

pub fn predictor(model: &Model, x: &DVector<f64>, mu: f64, opts: &SolverOptions) -> Result<(DVector<f64>, f64)> {
    let red = Reduced::new(model, Some(x))?;
    let mut w = red.to_w(x);
    let mu_next = opts.mu_shrink * mu;
    center(&red.model, &mut w, mu_next, opts.delta2, opts.centering_cap, opts)?;
    Ok((red.to_x(&w), mu_next))
}

/// μ minimizing the Newton decrement at w along the family f_μ.
fn initial_mu(model: &Model, w: &DVector<f64>, opts: &SolverOptions) -> Result<f64> {
    let ev = evaluate(model, w)?;
    let c = objective_gradient(model, &ev);
    let h = hessian(model, &ev, 1.0)?;
    let g = &ev.barrier.grad;
    let _ = opts;
    let hc = linalg::spd_solve(&h, &c)?;
    let a = c.dot(&hc);
    let b = g.dot(&hc);
    if !(a > 0.0) {
        return Ok(1.0);
    }
    if b < 0.0 {
        Ok(-a / b)
    } else {
        Ok(10.0 * a.sqrt())
    }
}

fn finish(
    original: &Model,
    red: &Reduced,
    w: &DVector<f64>,
    status: Status,
    iterations: usize,
    newton_steps: usize,
    mu: f64,
    trace: Vec<TraceRecord>,
    message: Option<String>,
) -> SolveResult {
    let x = red.to_x(w);
    let objective = original
        .objective(&x)
        .unwrap_or_else(|_| red.model.objective(w).unwrap_or(f64::NAN) + red.objective_offset(original));
    SolveResult {
        x,
        objective,
        status,
        iterations,
        newton_steps,
        mu_final: mu,
        nu: original.nu(),
        trace,
        message,
    }
}

pub fn solve(model: &Model, x0: &DVector<f64>, opts: &SolverOptions) -> Result<SolveResult> {
    solve_with_stop(model, x0, opts, None)
}

type StopRule<'a> = &'a dyn Fn(&DVector<f64>) -> bool;

pub(crate) fn solve_with_stop(
    model: &Model,
    x0: &DVector<f64>,
    opts: &SolverOptions,
    stop: Option<StopRule<'_>>,
) -> Result<SolveResult> {
    opts.validate()?;
    model.validate()?;
    if x0.len() != model.num_vars() {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: model.num_vars(),
            found: x0.len(),
        });
    }
    if let Some(eq) = &model.equalities {
        let res = (&eq.e * x0 - &eq.d).norm();
        if res > 1e-8 * (1.0 + eq.d.norm()) {
            return Err(Error::Inconsistent { residual: res });
        }
    }
    model.check_interior(x0)?;
    let nu = model.nu();
    if nu == 0.0 {
        return Err(Error::InvalidParameter("model has no barrier blocks".into()));
    }
    let red = Reduced::new(model, Some(x0))?;
    let rm = &red.model;
    let mut w = red.to_w(x0);
    let mut trace = Vec::new();
    let mut newton_steps = 0;

    let constant_objective = rm.objective_blocks.is_empty() && rm.c.norm() <= 1e-14 * (1.0 + model.c.norm());
    let mut mu = if constant_objective { 1.0 } else { initial_mu(rm, &w, opts)? };

    macro_rules! bail {
        ($status:expr, $msg:expr, $iters:expr) => {
            return Ok(finish(model, &red, &w, $status, $iters, newton_steps, mu, trace, Some($msg)))
        };
    }

    match center(rm, &mut w, mu, opts.delta1, opts.centering_cap, opts) {
        Ok((omega, steps, _)) => {
            newton_steps += steps;
            trace.push(TraceRecord {
                mu,
                omega,
                step: 0.0,
                objective: rm.objective(&w).unwrap_or(f64::NAN) + red.objective_offset(model),
                newton_steps: steps,
            });
        }
        Err(e) => bail!(Status::NumericalTrouble, format!("initial centering: {e}"), 0),
    }
    if constant_objective {
        let _ = center(rm, &mut w, mu, 1e-9, 50, opts).map(|(_, s, _)| newton_steps += s);
        return Ok(finish(model, &red, &w, Status::Optimal, 0, newton_steps, 0.0, trace, None));
    }

    let mut iterations = 0;
    loop {
        let obj = rm.objective(&w).unwrap_or(f64::NAN) + red.objective_offset(model);
        let stopped_early = stop.map(|f| f(&red.to_x(&w))).unwrap_or(false);
        if stopped_early || mu * nu <= opts.tol * obj.abs().max(1.0) {
            if !stopped_early {
                if let Ok((_, s, _)) = center(rm, &mut w, mu, opts.final_omega, 20, opts) {
                    newton_steps += s;
                }
            }
            return Ok(finish(model, &red, &w, Status::Optimal, iterations, newton_steps, mu, trace, None));
        }
        if iterations >= opts.max_iters {
            bail!(Status::MaxIters, "iteration limit reached".into(), iterations);
        }
        let mu_next = opts.mu_shrink * mu;
        let mut w_next = w.clone();
        let (_, pred_steps, step) = match center(rm, &mut w_next, mu_next, opts.delta2, opts.centering_cap, opts) {
            Ok(v) => v,
            Err(e) => bail!(Status::NumericalTrouble, format!("predictor: {e}"), iterations),
        };
        let (w_corr, omega, corr_steps) = match correct(rm, &mut w_next, mu_next, opts) {
            Ok(v) => v,
            Err(e) => bail!(Status::NumericalTrouble, format!("corrector: {e}"), iterations),
        };
        w = w_corr;
        mu = mu_next;
        iterations += 1;
        newton_steps += pred_steps + corr_steps;
        trace.push(TraceRecord {
            mu,
            omega,
            step,
            objective: rm.objective(&w).unwrap_or(f64::NAN) + red.objective_offset(model),
            newton_steps: pred_steps + corr_steps,
        });
    }
}

/// Try, in order: x = 0 (or the least-norm point of the equalities), lifting
/// epigraph variables that occur only in a violated epigraph row, and a
/// shifted Phase-I. Returns `Error::NoHeuristic` when none produces an
/// interior point.
pub fn initial_point(model: &Model) -> Result<DVector<f64>> {
    initial_point_with(model, &SolverOptions::default())
}

pub fn initial_point_with(model: &Model, opts: &SolverOptions) -> Result<DVector<f64>> {
    model.validate()?;
    let red = Reduced::new(model, None).map_err(|_| Error::NoHeuristic)?;
    let w = DVector::zeros(red.model.num_vars());
    heuristics_from(&red, w, opts)
}

/// The same heuristics started from `seed` (projected onto the equalities).
pub fn initial_point_from(model: &Model, seed: &DVector<f64>, opts: &SolverOptions) -> Result<DVector<f64>> {
    model.validate()?;
    if seed.len() != model.num_vars() {
        return Err(Error::DimensionMismatch {
            context: "seed point",
            expected: model.num_vars(),
            found: seed.len(),
        });
    }
    let red = Reduced::new(model, Some(seed)).map_err(|_| Error::NoHeuristic)?;
    let w = red.to_w(seed);
    heuristics_from(&red, w, opts)
}

fn heuristics_from(red: &Reduced, mut w: DVector<f64>, opts: &SolverOptions) -> Result<DVector<f64>> {
    let rm = &red.model;
    if rm.check_interior(&w).is_ok() {
        return Ok(red.to_x(&w));
    }
    lift_epigraphs(rm, &mut w);
    if rm.check_interior(&w).is_ok() {
        return Ok(red.to_x(&w));
    }
    let w = shifted_phase1(rm, &w, opts).map_err(|_| Error::NoHeuristic)?;
    Ok(red.to_x(&w))
}

fn epigraph_excess(kind: ConeKind, z: &DVector<f64>) -> Option<f64> {
    match kind {
        ConeKind::QreEpi(n) => {
            let nn = n * n;
            let x = linalg::mat(n, &z.as_slice()[1..1 + nn]);
            let y = linalg::mat(n, &z.as_slice()[1 + nn..]);
            crate::qre_barrier::qre_value(&x, &y).ok()
        }
        ConeKind::KlEpi(n) => {
            let x = z.rows(1, n).into_owned();
            let y = z.rows(1 + n, n).into_owned();
            crate::cones::kl_value(&x, &y).ok()
        }
        _ => None,
    }
}

/// Raise a variable that appears only in the t-row of a violated epigraph
/// block so that its slack becomes one.
fn lift_epigraphs(model: &Model, w: &mut DVector<f64>) {
    let k = model.num_vars();
    for (j, blk) in model.blocks.iter().enumerate() {
        if !matches!(blk.kind, ConeKind::QreEpi(_) | ConeKind::KlEpi(_)) {
            continue;
        }
        let z = blk.slack(w);
        let Some(f) = epigraph_excess(blk.kind, &z) else { continue };
        let slack = z[0] - f;
        if slack > 0.0 {
            continue;
        }
        let col = (0..k).find(|&c| {
            blk.a[(0, c)] < 0.0
                && blk.a.column(c).iter().skip(1).all(|v| *v == 0.0)
                && model
                    .blocks
                    .iter()
                    .chain(&model.objective_blocks)
                    .enumerate()
                    .all(|(i, other)| i == j || other.a.column(c).iter().all(|v| *v == 0.0))
        });
        if let Some(c) = col {
            w[c] += (1.0 - slack) / (-blk.a[(0, c)]);
        }
    }
}

/// Minimize τ subject to z_j(w) + τ e_j ∈ int K_j, τ ≥ −1, inside a large box
/// around the start, stopping once τ < 0 with some margin.
fn shifted_phase1(model: &Model, w0: &DVector<f64>, opts: &SolverOptions) -> Result<DVector<f64>> {
    let k = model.num_vars();
    let mut blocks = Vec::new();
    let mut tau0 = 1.0f64;
    for blk in &model.blocks {
        let e = blk.kind.interior_direction();
        let mut a = DMatrix::zeros(blk.a.nrows(), k + 1);
        a.columns_mut(0, k).copy_from(&blk.a);
        a.set_column(k, &(-&e));
        blocks.push(ConeBlock {
            kind: blk.kind,
            a,
            b: blk.b.clone(),
        });
    }
    // τ ≥ −1
    let mut a = DMatrix::zeros(1, k + 1);
    a[(0, k)] = -1.0;
    blocks.push(ConeBlock {
        kind: ConeKind::Orthant(1),
        a,
        b: DVector::from_element(1, 1.0),
    });
    // box |w_i − w0_i| ≤ R keeps the Phase-I bounded
    let radius = 1e4 * (1.0 + w0.amax());
    let mut a = DMatrix::zeros(2 * k, k + 1);
    let mut b = DVector::zeros(2 * k);
    for i in 0..k {
        a[(i, i)] = 1.0;
        b[i] = radius - w0[i];
        a[(k + i, i)] = -1.0;
        b[k + i] = radius + w0[i];
    }
    if k > 0 {
        blocks.push(ConeBlock {
            kind: ConeKind::Orthant(2 * k),
            a,
            b,
        });
    }
    let mut c = DVector::zeros(k + 1);
    c[k] = 1.0;
    let aux = Model {
        c,
        blocks,
        equalities: None,
        objective_blocks: Vec::new(),
    };
    let mut start = DVector::zeros(k + 1);
    start.rows_mut(0, k).copy_from(w0);
    loop {
        start[k] = tau0;
        if aux.check_interior(&start).is_ok() {
            break;
        }
        tau0 *= 2.0;
        if tau0 > 1e15 {
            return Err(Error::NoHeuristic);
        }
    }
    let stop = |x: &DVector<f64>| x[k] < -1e-2;
    let res = solve_with_stop(&aux, &start, opts, Some(&stop))?;
    let tau = res.x[k];
    if tau < 0.0 {
        let w = res.x.rows(0, k).into_owned();
        if model.check_interior(&w).is_ok() {
            return Ok(w);
        }
    }
    Err(Error::NoHeuristic)
}
