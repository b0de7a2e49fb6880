//! The quantum relative entropy, the barrier
//! Φ(t, X, Y) = −ln(t − qre(X, Y)) − ln det X − ln det Y,
//! and its derivatives. Matrices are vectorized column-major (length n²).

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result, Violation};
use crate::linalg;
use crate::matcalc::{
    div_diff2, div_diff_matrix, frechet_apply_dd, kron_conj_apply, spectral_decompose, DiagOperator,
    DivDiffMatrix, ScalarFn, SparseOperator, SymEig, VecOperator,
};

#[derive(Debug, Clone)]
pub struct QrePoint {
    pub t: f64,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl QrePoint {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Split a block coordinate vector (t, vec X, vec Y).
    pub fn from_vec(n: usize, z: &[f64]) -> Result<Self> {
        if z.len() != 1 + 2 * n * n {
            return Err(Error::DimensionMismatch {
                context: "QRE point",
                expected: 1 + 2 * n * n,
                found: z.len(),
            });
        }
        let nn = n * n;
        Ok(QrePoint {
            t: z[0],
            x: linalg::mat(n, &z[1..1 + nn]),
            y: linalg::mat(n, &z[1 + nn..]),
        })
    }

    pub fn to_vec(&self) -> DVector<f64> {
        let nn = self.x.len();
        let mut z = DVector::zeros(1 + 2 * nn);
        z[0] = self.t;
        z.rows_mut(1, nn).copy_from_slice(self.x.as_slice());
        z.rows_mut(1 + nn, nn).copy_from_slice(self.y.as_slice());
        z
    }
}

const PSD_FLOOR: f64 = -1e-12;

/// Tr(X ln X) − Tr(X ln Y) from the two eigendecompositions; eigenvalues of X
/// down to −1e−12 are treated as zero.
pub fn qre_from_eigs(x: &DMatrix<f64>, eig_x: &SymEig, eig_y: &SymEig) -> Result<f64> {
    if let Some(&bad) = eig_y.eigvals.iter().find(|&&g| !(g > 0.0)) {
        return Err(Error::DomainViolation {
            function: "ln",
            value: bad,
        });
    }
    let mut xlnx = 0.0;
    for &l in eig_x.eigvals.iter() {
        if l < PSD_FLOOR {
            return Err(Error::DomainViolation {
                function: "x ln x",
                value: l,
            });
        }
        if l > 0.0 {
            xlnx += l * l.ln();
        }
    }
    let mut xlny = 0.0;
    for (j, &g) in eig_y.eigvals.iter().enumerate() {
        let u = eig_y.basis.column(j);
        xlny += g.ln() * (u.transpose() * x * u)[(0, 0)];
    }
    Ok(xlnx - xlny)
}

pub fn qre_value(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let eig_x = spectral_decompose(x)?;
    let eig_y = spectral_decompose(y)?;
    qre_from_eigs(&linalg::symmetrize(x), &eig_x, &eig_y)
}

/// Gradient of Y ↦ Tr(X F(Y)), i.e. the Fréchet derivative of F at Y in the
/// direction X.
pub fn weighted_fn_gradient(x: &DMatrix<f64>, eig_y: &SymEig, f: ScalarFn) -> Result<DMatrix<f64>> {
    let t = div_diff_matrix(eig_y, f)?;
    frechet_apply_dd(eig_y, &t, x)
}

/// Second divided differences f[γa, γb, γm] for all index triples, stored
/// with a the fastest index.
fn dd2_table(eig_y: &SymEig, f: ScalarFn) -> Result<Vec<f64>> {
    let n = eig_y.dim();
    let g = &eig_y.eigvals;
    let mut table = vec![0.0; n * n * n];
    for m in 0..n {
        for b in 0..n {
            for a in 0..=b {
                let v = div_diff2(f, g[a], g[b], g[m])?;
                table[a + n * (b + n * m)] = v;
                table[b + n * (a + n * m)] = v;
            }
        }
    }
    Ok(table)
}

/// The eigenbasis Hessian of Y ↦ Tr(X F(Y)): the full operator is
/// (U_Y ⊗ U_Y) S (U_Yᵀ ⊗ U_Yᵀ). With X̃ = U_Yᵀ X U_Y,
/// S[a+bn, c+dn] = δ_bc X̃_da f[γa,γb,γd] + δ_ad X̃_bc f[γa,γb,γc].
pub fn build_s(eig_y: &SymEig, x: &DMatrix<f64>, f: ScalarFn) -> Result<SparseOperator> {
    let n = eig_y.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "S operator weight",
            expected: n,
            found: x.nrows(),
        });
    }
    let xt = linalg::symmetrize(&linalg::congruence_t(&eig_y.basis, x));
    let f2 = dd2_table(eig_y, f)?;
    let nn = n * n;
    let mut tri = TriMat::with_capacity((nn, nn), 2 * n * n * n);
    for b in 0..n {
        for a in 0..n {
            let row = a + b * n;
            for d in 0..n {
                let v = xt[(d, a)] * f2[a + n * (b + n * d)];
                if v != 0.0 {
                    tri.add_triplet(row, b + d * n, v);
                }
            }
            for c in 0..n {
                let v = xt[(b, c)] * f2[a + n * (b + n * c)];
                if v != 0.0 {
                    tri.add_triplet(row, c + a * n, v);
                }
            }
        }
    }
    Ok(SparseOperator(tri.to_csr()))
}

/// Hessian blocks of qre(X, Y) as operators on vec-symmetric inputs.
#[derive(Debug, Clone)]
pub struct QreHessian {
    ux: DMatrix<f64>,
    uy: DMatrix<f64>,
    h11_mid: DiagOperator,
    h12_mid: DiagOperator,
    h22_mid: SparseOperator,
}

impl QreHessian {
    pub fn apply_h11(&self, v: &[f64]) -> Result<DVector<f64>> {
        kron_conj_apply(&self.ux, &self.h11_mid, v)
    }

    pub fn apply_h12(&self, v: &[f64]) -> Result<DVector<f64>> {
        kron_conj_apply(&self.uy, &self.h12_mid, v)
    }

    pub fn apply_h22(&self, v: &[f64]) -> Result<DVector<f64>> {
        kron_conj_apply(&self.uy, &self.h22_mid, v)
    }
}

fn neg_sparse(s: &SparseOperator) -> SparseOperator {
    SparseOperator(s.0.map(|v| -v))
}

/// H11 = Hessian of Tr(X ln X): divided differences of ln in the X basis.
/// H12 = mixed block of −Tr(X ln Y): −(U_Y⊗U_Y) Diag(vec Y_ln) (U_Y⊗U_Y)ᵀ.
/// H22 = Y–Y block of −Tr(X ln Y): −(U_Y⊗U_Y) S (U_Y⊗U_Y)ᵀ.
pub fn qre_hessian_blocks(eig_x: &SymEig, eig_y: &SymEig, x: &DMatrix<f64>) -> Result<QreHessian> {
    let x_ln = div_diff_matrix(eig_x, ScalarFn::Ln)?;
    let y_ln = div_diff_matrix(eig_y, ScalarFn::Ln)?;
    let s = build_s(eig_y, x, ScalarFn::Ln)?;
    Ok(hessian_from_parts(eig_x, eig_y, &x_ln, &y_ln, &s))
}

fn hessian_from_parts(
    eig_x: &SymEig,
    eig_y: &SymEig,
    x_ln: &DivDiffMatrix,
    y_ln: &DivDiffMatrix,
    s: &SparseOperator,
) -> QreHessian {
    QreHessian {
        ux: eig_x.basis.clone(),
        uy: eig_y.basis.clone(),
        h11_mid: DiagOperator(linalg::vec_of(x_ln)),
        h12_mid: DiagOperator(-linalg::vec_of(y_ln)),
        h22_mid: neg_sparse(s),
    }
}

#[derive(Debug)]
pub struct QreDerivs {
    pub n: usize,
    pub value: f64,
    /// T = t − qre(X, Y)
    pub slack: f64,
    pub qre: f64,
    pub grad: DVector<f64>,
    /// vec(I + ln X − ln Y), the X-gradient of qre.
    pub h: DVector<f64>,
    /// The Y-gradient of qre, −U_Y (Y_ln ⊙ X̃) U_Yᵀ.
    pub hbar: DVector<f64>,
    pub eig_x: SymEig,
    pub eig_y: SymEig,
    pub x_ln: DivDiffMatrix,
    pub y_ln: DivDiffMatrix,
    pub s: SparseOperator,
    pub hess: QreHessian,
    x_inv: DMatrix<f64>,
    y_inv: DMatrix<f64>,
    y_block: OnceLock<std::result::Result<YBlockFactor, String>>,
}

fn pd_eig(m: &DMatrix<f64>, which: Violation) -> Result<SymEig> {
    let eig = spectral_decompose(m)?;
    if eig.dim() > 0 && !(eig.min_eigval() > 0.0) {
        return Err(Error::NotInterior(which));
    }
    Ok(eig)
}

/// Barrier value only; cheaper than `phi_eval` for line searches.
pub fn phi_value(p: &QrePoint) -> Result<f64> {
    let eig_x = pd_eig(&p.x, Violation::FirstArgument)?;
    let eig_y = pd_eig(&p.y, Violation::SecondArgument)?;
    let q = qre_from_eigs(&linalg::symmetrize(&p.x), &eig_x, &eig_y)?;
    let slack = p.t - q;
    if !(slack > 0.0) {
        return Err(Error::NotInterior(Violation::Epigraph));
    }
    let ldx: f64 = eig_x.eigvals.iter().map(|l| l.ln()).sum();
    let ldy: f64 = eig_y.eigvals.iter().map(|l| l.ln()).sum();
    Ok(-slack.ln() - ldx - ldy)
}

pub fn phi_eval(p: &QrePoint) -> Result<QreDerivs> {
    let n = p.dim();
    if p.y.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "QRE point",
            expected: n,
            found: p.y.nrows(),
        });
    }
    let x = linalg::symmetrize(&p.x);
    let eig_x = pd_eig(&p.x, Violation::FirstArgument)?;
    let eig_y = pd_eig(&p.y, Violation::SecondArgument)?;
    let q = qre_from_eigs(&x, &eig_x, &eig_y)?;
    let slack = p.t - q;
    if !(slack > 0.0) {
        return Err(Error::NotInterior(Violation::Epigraph));
    }
    let ldx: f64 = eig_x.eigvals.iter().map(|l| l.ln()).sum();
    let ldy: f64 = eig_y.eigvals.iter().map(|l| l.ln()).sum();
    let value = -slack.ln() - ldx - ldy;

    let x_ln = div_diff_matrix(&eig_x, ScalarFn::Ln)?;
    let y_ln = div_diff_matrix(&eig_y, ScalarFn::Ln)?;
    let ln_x = eig_x.map(f64::ln);
    let ln_y = eig_y.map(f64::ln);
    let h = linalg::vec_of(&(DMatrix::identity(n, n) + ln_x - ln_y));
    let hbar = -linalg::vec_of(&frechet_apply_dd(&eig_y, &y_ln, &x)?);
    let x_inv = eig_x.map(|l| 1.0 / l);
    let y_inv = eig_y.map(|l| 1.0 / l);

    let nn = n * n;
    let mut grad = DVector::zeros(1 + 2 * nn);
    grad[0] = -1.0 / slack;
    grad.rows_mut(1, nn)
        .copy_from(&(&h / slack - linalg::vec_of(&x_inv)));
    grad.rows_mut(1 + nn, nn)
        .copy_from(&(&hbar / slack - linalg::vec_of(&y_inv)));

    let s = build_s(&eig_y, &x, ScalarFn::Ln)?;
    let hess = hessian_from_parts(&eig_x, &eig_y, &x_ln, &y_ln, &s);
    Ok(QreDerivs {
        n,
        value,
        slack,
        qre: q,
        grad,
        h,
        hbar,
        eig_x,
        eig_y,
        x_ln,
        y_ln,
        s,
        hess,
        x_inv,
        y_inv,
        y_block: OnceLock::new(),
    })
}

impl QreDerivs {
    pub fn dim(&self) -> usize {
        1 + 2 * self.n * self.n
    }

    /// The rank-one vector r = (0, h/T, h̄/T).
    pub fn rank_one(&self) -> DVector<f64> {
        let nn = self.n * self.n;
        let mut r = DVector::zeros(1 + 2 * nn);
        r.rows_mut(1, nn).copy_from(&(&self.h / self.slack));
        r.rows_mut(1 + nn, nn).copy_from(&(&self.hbar / self.slack));
        r
    }

    /// The bar-H part of Φ'' (everything except r rᵀ).
    pub fn bar_h_apply(&self, v: &[f64]) -> Result<DVector<f64>> {
        let n = self.n;
        let nn = n * n;
        check_len(v.len(), 1 + 2 * nn)?;
        let t2 = self.slack * self.slack;
        let vt = v[0];
        let vx = &v[1..1 + nn];
        let vy = &v[1 + nn..];
        let hx = DVector::from_column_slice(vx);
        let hy = DVector::from_column_slice(vy);

        let mut out = DVector::zeros(1 + 2 * nn);
        out[0] = (vt - self.h.dot(&hx) - self.hbar.dot(&hy)) / t2;

        let h11 = self.hess.apply_h11(vx)?;
        let h12y = self.hess.apply_h12(vy)?;
        let h12x = self.hess.apply_h12(vx)?;
        let h22 = self.hess.apply_h22(vy)?;
        let xinv_term = linalg::vec_of(&(&self.x_inv * linalg::mat(n, vx) * &self.x_inv));
        let yinv_term = linalg::vec_of(&(&self.y_inv * linalg::mat(n, vy) * &self.y_inv));

        let ox = -&self.h * (vt / t2) + (h11 + h12y) / self.slack + xinv_term;
        let oy = -&self.hbar * (vt / t2) + (h12x + h22) / self.slack + yinv_term;
        out.rows_mut(1, nn).copy_from(&ox);
        out.rows_mut(1 + nn, nn).copy_from(&oy);
        Ok(out)
    }

    fn y_factor(&self) -> Result<&YBlockFactor> {
        let cell = self.y_block.get_or_init(|| {
            YBlockFactor::new(&self.eig_y, &self.s, self.slack).map_err(|e| e.to_string())
        });
        cell.as_ref().map_err(|msg| Error::SingularBlock(msg.clone()))
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: "barrier coordinate vector",
            expected,
            found,
        })
    }
}

pub fn phi_hess_apply(d: &QreDerivs, v: &[f64]) -> Result<DVector<f64>> {
    let mut out = d.bar_h_apply(v)?;
    let r = d.rank_one();
    let rv = r.dot(&DVector::from_column_slice(v));
    out.axpy(rv, &r, 1.0);
    Ok(out)
}

/// Sparse LDLᵀ of the Y-block middle matrix −S/T + Diag(1/(γa γb)), reduced to
/// symmetric coordinates (weight 1 on the diagonal, 1/√2 off it).
struct YBlockFactor {
    n: usize,
    index: Vec<usize>,
    solver: PackedSolver,
}

enum PackedSolver {
    Sparse(LdlNumeric<f64, usize>),
    // sprs-ldl cannot factor a 1×1 system
    Scalar(f64),
}

impl std::fmt::Debug for YBlockFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("YBlockFactor").field("n", &self.n).finish()
    }
}

fn svec_weight(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

impl YBlockFactor {
    fn new(eig_y: &SymEig, s: &SparseOperator, slack: f64) -> Result<Self> {
        let n = eig_y.dim();
        let mut index = vec![0usize; n * n];
        let mut next = 0;
        for b in 0..n {
            for a in 0..=b {
                index[a + b * n] = next;
                index[b + a * n] = next;
                next += 1;
            }
        }
        let g = &eig_y.eigvals;
        let mut tri = TriMat::new((next, next));
        for b in 0..n {
            for a in 0..=b {
                let p = index[a + b * n];
                tri.add_triplet(p, p, 1.0 / (g[a] * g[b]));
            }
        }
        let csr: &CsMat<f64> = &s.0;
        for (row, vec) in csr.outer_iterator().enumerate() {
            let (a, b) = (row % n, row / n);
            for (col, &val) in vec.iter() {
                let (c, d) = (col % n, col / n);
                let w = svec_weight(a, b) * svec_weight(c, d);
                tri.add_triplet(index[row], index[col], -val * w / slack);
            }
        }
        let k: CsMat<f64> = tri.to_csc();
        let not_pd = || Error::SingularBlock("Y block is not positive definite".into());
        let solver = if next == 1 {
            let v = k.get(0, 0).copied().unwrap_or(0.0);
            if !(v > 0.0 && v.is_finite()) {
                return Err(not_pd());
            }
            PackedSolver::Scalar(v)
        } else {
            let ldl = Ldl::new()
                .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
                .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
                .numeric(k.view())
                .map_err(|e| Error::SingularBlock(format!("Y block: {e}")))?;
            if ldl.d().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(not_pd());
            }
            PackedSolver::Sparse(ldl)
        };
        Ok(YBlockFactor { n, index, solver })
    }

    /// Solve in the eigenbasis for a vec-symmetric right-hand side.
    fn solve(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut packed = vec![0.0; n * (n + 1) / 2];
        for b in 0..n {
            for a in 0..n {
                packed[self.index[a + b * n]] += svec_weight(a, b) * u[a + b * n];
            }
        }
        let sol: Vec<f64> = match &self.solver {
            PackedSolver::Sparse(ldl) => ldl.solve(&packed[..]),
            PackedSolver::Scalar(v) => vec![packed[0] / v],
        };
        let mut out = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                out[a + b * n] = svec_weight(a, b) * sol[self.index[a + b * n]];
            }
        }
        out
    }
}

struct YBlockOp<'a>(&'a YBlockFactor);

impl VecOperator for YBlockOp<'_> {
    fn dim(&self) -> usize {
        self.0.n * self.0.n
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.0.solve(v)
    }
}

/// Approximate inverse of Φ''. The exact Hessian factors as
/// Lᵀ Diag(1/T², P) L with L = [1, −gᵀ; 0, I], g = (h, h̄), and P the X–Y block
/// H/T + Diag(X⁻¹⊗X⁻¹, Y⁻¹⊗Y⁻¹). The rank-one term and the t coupling are
/// therefore removed exactly; only H12 is dropped from P.
pub fn phi_hess_solve_approx(d: &QreDerivs, rhs: &[f64]) -> Result<DVector<f64>> {
    let n = d.n;
    let nn = n * n;
    check_len(rhs.len(), 1 + 2 * nn)?;
    let t = d.slack;
    let rt = rhs[0];
    let ux = DVector::from_column_slice(&rhs[1..1 + nn]) + &d.h * rt;
    let uy = DVector::from_column_slice(&rhs[1 + nn..]) + &d.hbar * rt;

    let lam = &d.eig_x.eigvals;
    let mut xdiag = DVector::zeros(nn);
    for b in 0..n {
        for a in 0..n {
            xdiag[a + b * n] = 1.0 / (d.x_ln[(a, b)] / t + 1.0 / (lam[a] * lam[b]));
        }
    }
    let vx = kron_conj_apply(&d.eig_x.basis, &DiagOperator(xdiag), ux.as_slice())?;
    let factor = d.y_factor()?;
    let vy = kron_conj_apply(&d.eig_y.basis, &YBlockOp(factor), uy.as_slice())?;

    let mut z = DVector::zeros(1 + 2 * nn);
    z[0] = t * t * rt + d.h.dot(&vx) + d.hbar.dot(&vy);
    z.rows_mut(1, nn).copy_from(&vx);
    z.rows_mut(1 + nn, nn).copy_from(&vy);
    Ok(z)
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned CG on Φ'' with the approximate solve as preconditioner.
pub fn phi_hess_solve_stats(d: &QreDerivs, rhs: &[f64], tol: f64, max_iter: Option<usize>) -> Result<PcgOutcome> {
    let dim = d.dim();
    check_len(rhs.len(), dim)?;
    let b = DVector::from_column_slice(rhs);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(PcgOutcome {
            solution: DVector::zeros(dim),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let cap = max_iter.unwrap_or(10 * d.n * d.n).max(10);
    let mut x = phi_hess_solve_approx(d, rhs)?;
    let mut r = &b - phi_hess_apply(d, x.as_slice())?;
    let mut rel = r.norm() / bnorm;
    if rel <= tol {
        return Ok(PcgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut z = phi_hess_solve_approx(d, r.as_slice())?;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=cap {
        let ap = phi_hess_apply(d, p.as_slice())?;
        let curv = p.dot(&ap);
        if !(curv > 0.0) {
            return Err(Error::NoConvergence { iterations: it });
        }
        let alpha = rz / curv;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        rel = r.norm() / bnorm;
        if rel <= tol {
            return Ok(PcgOutcome {
                solution: x,
                iterations: it,
                relative_residual: rel,
            });
        }
        z = phi_hess_solve_approx(d, r.as_slice())?;
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    Err(Error::NoConvergence { iterations: cap })
}

pub fn phi_hess_solve(d: &QreDerivs, rhs: &[f64], tol: f64) -> Result<DVector<f64>> {
    phi_hess_solve_stats(d, rhs, tol, None).map(|o| o.solution)
}
