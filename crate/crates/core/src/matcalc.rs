//! Spectral calculus for real symmetric matrices: eigendecompositions, divided
//! differences of the scalar functions used by the QRE barrier, and Fréchet
//! derivative operators in the eigenbasis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::linalg;

const SYM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SymEig {
    /// Columns are eigenvectors.
    pub basis: DMatrix<f64>,
    /// Sorted descending.
    pub eigvals: DVector<f64>,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn min_eigval(&self) -> f64 {
        self.eigvals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigval(&self) -> f64 {
        self.eigvals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// U Diag(g(λ)) Uᵀ
    pub fn map(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (j, &l) in self.eigvals.iter().enumerate() {
            let s = g(l);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.basis.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|l| l)
    }
}

pub fn spectral_decompose(x: &DMatrix<f64>) -> Result<SymEig> {
    let sym = linalg::checked_symmetric(x, SYM_TOL)?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(SymEig {
            basis: DMatrix::zeros(0, 0),
            eigvals: DVector::zeros(0),
        });
    }
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(Error::EigFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(n, n);
    let mut eigvals = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
        eigvals[dst] = eig.eigenvalues[src];
    }
    Ok(SymEig { basis, eigvals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFn {
    XLnX,
    Ln,
    NegLn,
}

impl ScalarFn {
    pub fn name(self) -> &'static str {
        match self {
            ScalarFn::XLnX => "x ln x",
            ScalarFn::Ln => "ln",
            ScalarFn::NegLn => "-ln",
        }
    }

    fn check_value_domain(self, x: f64) -> Result<()> {
        let ok = match self {
            ScalarFn::XLnX => x >= 0.0,
            ScalarFn::Ln | ScalarFn::NegLn => x > 0.0,
        };
        if ok && x.is_finite() {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                function: self.name(),
                value: x,
            })
        }
    }

    fn check_deriv_domain(self, x: f64) -> Result<()> {
        if x > 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                function: self.name(),
                value: x,
            })
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            ScalarFn::XLnX => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            ScalarFn::Ln => x.ln(),
            ScalarFn::NegLn => -x.ln(),
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            ScalarFn::XLnX => 1.0 + x.ln(),
            ScalarFn::Ln => 1.0 / x,
            ScalarFn::NegLn => -1.0 / x,
        }
    }

    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            ScalarFn::XLnX => 1.0 / x,
            ScalarFn::Ln => -1.0 / (x * x),
            ScalarFn::NegLn => 1.0 / (x * x),
        }
    }

    /// f⁽ᵖ⁾(x)/p! for p ≥ 2.
    fn taylor_coeff(self, p: u32, x: f64) -> f64 {
        let pf = p as f64;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        match self {
            ScalarFn::Ln => -sign / (pf * x.powi(p as i32)),
            ScalarFn::NegLn => sign / (pf * x.powi(p as i32)),
            ScalarFn::XLnX => sign / (pf * (pf - 1.0) * x.powi(p as i32 - 1)),
        }
    }
}

/// Divided difference of ln, switching to the atanh form when the arguments
/// are within a factor of two of each other.
pub fn div_diff1_ln_stable(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::DomainViolation {
                function: "ln",
                value: v,
            });
        }
    }
    Ok(ln_dd_sorted(a.max(b), a.min(b)))
}

fn ln_dd_sorted(a: f64, b: f64) -> f64 {
    if a == b {
        1.0 / a
    } else if b < a / 2.0 {
        (a.ln() - b.ln()) / (a - b)
    } else {
        let z = (a - b) / (a + b);
        2.0 * z.atanh() / (a - b)
    }
}

pub fn div_diff1(f: ScalarFn, a: f64, b: f64) -> Result<f64> {
    if a == b {
        f.check_deriv_domain(a)?;
        return Ok(f.deriv(a));
    }
    f.check_value_domain(a)?;
    f.check_value_domain(b)?;
    Ok(dd1_unchecked(f, a.max(b), a.min(b)))
}

// Requires a > b, both inside the value domain, or a == b > 0.
fn dd1_unchecked(f: ScalarFn, a: f64, b: f64) -> f64 {
    match f {
        ScalarFn::Ln => ln_dd_sorted(a, b),
        ScalarFn::NegLn => -ln_dd_sorted(a, b),
        ScalarFn::XLnX => {
            if a == b {
                1.0 + a.ln()
            } else if b == 0.0 {
                a.ln()
            } else {
                // (a ln a − b ln b)/(a − b) = a·ln[a,b] + ln b
                a * ln_dd_sorted(a, b) + b.ln()
            }
        }
    }
}

const TAYLOR_SPREAD: f64 = 0.05;
const TAYLOR_TERMS: u32 = 16;

pub fn div_diff2(f: ScalarFn, a: f64, b: f64, c: f64) -> Result<f64> {
    f.check_deriv_domain(a)?;
    f.check_deriv_domain(b)?;
    f.check_deriv_domain(c)?;
    Ok(dd2_unchecked(f, a, b, c))
}

fn dd2_unchecked(f: ScalarFn, a: f64, b: f64, c: f64) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = v;
    if a == c {
        return 0.5 * f.deriv2(a);
    }
    let m = (a + b + c) / 3.0;
    if (a - c) <= TAYLOR_SPREAD * m {
        return dd2_series(f, m, [a - m, b - m, c - m]);
    }
    (dd1_unchecked(f, a, b) - dd1_unchecked(f, b, c)) / (a - c)
}

// Σ_p f⁽ᵖ⁾(m)/p! · h_{p−2}(d) with h the complete homogeneous polynomials of
// the centered nodes, generated by h_k = e1 h_{k−1} − e2 h_{k−2} + e3 h_{k−3}.
fn dd2_series(f: ScalarFn, m: f64, d: [f64; 3]) -> f64 {
    let e1 = d[0] + d[1] + d[2];
    let e2 = d[0] * d[1] + d[0] * d[2] + d[1] * d[2];
    let e3 = d[0] * d[1] * d[2];
    let (mut h3, mut h2, mut h1) = (0.0, 0.0, 1.0);
    let mut sum = f.taylor_coeff(2, m);
    for p in 3..(TAYLOR_TERMS + 2) {
        let h = e1 * h1 - e2 * h2 + e3 * h3;
        sum += f.taylor_coeff(p, m) * h;
        h3 = h2;
        h2 = h1;
        h1 = h;
    }
    sum
}

pub type DivDiffMatrix = DMatrix<f64>;

pub fn div_diff_matrix(eig: &SymEig, f: ScalarFn) -> Result<DivDiffMatrix> {
    for &l in eig.eigvals.iter() {
        f.check_deriv_domain(l)?;
    }
    let n = eig.dim();
    let lam = &eig.eigvals;
    let mut t = DMatrix::zeros(n, n);
    for j in 0..n {
        t[(j, j)] = f.deriv(lam[j]);
        for i in (j + 1)..n {
            let v = dd1_unchecked(f, lam[i].max(lam[j]), lam[i].min(lam[j]));
            t[(i, j)] = v;
            t[(j, i)] = v;
        }
    }
    Ok(t)
}

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

/// U (T ⊙ UᵀHU) Uᵀ for a precomputed divided-difference matrix.
pub fn frechet_apply_dd(eig: &SymEig, t: &DivDiffMatrix, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("Fréchet direction", eig.dim(), h.nrows())?;
    check_dim("Fréchet direction", eig.dim(), h.ncols())?;
    let inner = linalg::congruence_t(&eig.basis, h).component_mul(t);
    Ok(linalg::symmetrize(&linalg::congruence(&eig.basis, &inner)))
}

pub fn frechet_apply(eig: &SymEig, f: ScalarFn, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = div_diff_matrix(eig, f)?;
    frechet_apply_dd(eig, &t, h)
}

pub fn trace_fn(eig: &SymEig, f: ScalarFn) -> Result<f64> {
    let mut s = 0.0;
    for &l in eig.eigvals.iter() {
        f.check_value_domain(l)?;
        s += f.value(l);
    }
    Ok(s)
}

pub fn trace_fn_gradient(eig: &SymEig, f: ScalarFn) -> Result<DVector<f64>> {
    for &l in eig.eigvals.iter() {
        f.check_deriv_domain(l)?;
    }
    Ok(linalg::vec_of(&eig.map(|l| f.deriv(l))))
}

/// A linear map on length-n² coordinate vectors in the eigenbasis.
pub trait VecOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct DiagOperator(pub DVector<f64>);

impl VecOperator for DiagOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(self.0.iter()).map(|(a, b)| a * b).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SparseOperator(pub CsMat<f64>);

impl VecOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.0.rows()];
        if self.0.is_csr() {
            for (row, vec) in self.0.outer_iterator().enumerate() {
                out[row] = vec.iter().map(|(col, &val)| val * v[col]).sum();
            }
        } else {
            for (col, vec) in self.0.outer_iterator().enumerate() {
                for (row, &val) in vec.iter() {
                    out[row] += val * v[col];
                }
            }
        }
        out
    }
}

/// vec(U · mat(D · vec(UᵀHU)) · Uᵀ) for v = vec(H).
pub fn kron_conj_apply(u: &DMatrix<f64>, d: &dyn VecOperator, v: &[f64]) -> Result<DVector<f64>> {
    let n = u.nrows();
    check_dim("Kronecker operator", n * n, d.dim())?;
    check_dim("Kronecker vector", n * n, v.len())?;
    let h = linalg::mat(n, v);
    let inner = linalg::congruence_t(u, &h);
    let mid = d.apply(inner.as_slice());
    let out = linalg::congruence(u, &linalg::mat(n, &mid));
    Ok(linalg::vec_of(&out))
}
