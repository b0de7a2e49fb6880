//! Small dense helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Reshape a column-major vec of length n² into an n×n matrix.
pub fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v)
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Reject non-finite or non-square input and asymmetry beyond `tol` (scaled by
/// the largest entry once it exceeds one), returning the symmetrized matrix.
pub fn checked_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "square matrix",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = asymmetry(m);
    if asym > tol * max_abs(m).max(1.0) {
        return Err(Error::NonSymmetric { asymmetry: asym });
    }
    Ok(symmetrize(m))
}

/// Uᵀ H U
pub fn congruence_t(u: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    u.transpose() * h * u
}

/// U W Uᵀ
pub fn congruence(u: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    u * w * u.transpose()
}

/// Columns completing the orthonormal columns of `q` to an orthonormal basis.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let k = q.nrows();
    let r = q.ncols();
    if r == 0 {
        return DMatrix::identity(k, k);
    }
    if r >= k {
        return DMatrix::zeros(k, 0);
    }
    let qr = q.clone().qr();
    let mut full = DMatrix::<f64>::identity(k, k);
    // q_tr_mul applies the full product of reflectors, so this yields Qᵀ.
    qr.q_tr_mul(&mut full);
    full.transpose().columns(r, k - r).into_owned()
}

/// Row-space basis (k × rank) and least-norm solution of E x = d.
pub struct RowSpace {
    pub basis: DMatrix<f64>,
    pub least_norm: DVector<f64>,
}

pub fn row_space(e: &DMatrix<f64>, d: &DVector<f64>) -> Result<RowSpace> {
    let (m, k) = e.shape();
    if d.len() != m {
        return Err(Error::DimensionMismatch {
            context: "equality right-hand side",
            expected: m,
            found: d.len(),
        });
    }
    if m == 0 {
        return Ok(RowSpace {
            basis: DMatrix::zeros(k, 0),
            least_norm: DVector::zeros(k),
        });
    }
    let svd = SVD::try_new(e.clone(), true, true, f64::EPSILON, 0).ok_or(Error::EigFailure)?;
    let u = svd.u.as_ref().ok_or(Error::EigFailure)?;
    let vt = svd.v_t.as_ref().ok_or(Error::EigFailure)?;
    let smax = svd.singular_values.max();
    let cut = smax * 1e-12 * (m.max(k) as f64);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > cut)
        .collect();
    let mut basis = DMatrix::zeros(k, keep.len());
    let mut x = DVector::zeros(k);
    for (c, &i) in keep.iter().enumerate() {
        let vi = vt.row(i).transpose();
        let coef = u.column(i).dot(d) / svd.singular_values[i];
        x += &vi * coef;
        basis.set_column(c, &vi);
    }
    let residual = (e * &x - d).norm();
    if residual > 1e-8 * (1.0 + d.norm()) {
        return Err(Error::Inconsistent { residual });
    }
    Ok(RowSpace {
        basis,
        least_norm: x,
    })
}

/// Solve H x = rhs for symmetric positive definite H after symmetric
/// diagonal scaling, with a tiny diagonal shift as a last resort.
pub fn spd_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.nrows();
    let mut scale = DVector::zeros(n);
    for i in 0..n {
        let d = h[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularBlock("aggregate Hessian has a nonpositive diagonal".into()));
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let mut scaled = h.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let b = rhs.component_mul(&scale);
    if let Some(ch) = scaled.clone().cholesky() {
        return Ok(ch.solve(&b).component_mul(&scale));
    }
    for i in 0..n {
        scaled[(i, i)] += 1e-12;
    }
    scaled
        .cholesky()
        .map(|ch| ch.solve(&b).component_mul(&scale))
        .ok_or_else(|| Error::SingularBlock("aggregate Hessian is not positive definite".into()))
}
