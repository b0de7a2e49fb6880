//! Builders for the benchmark problem families shared by tests, the
//! acceptance harness and the CLI generators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cones::{expand_sqre, ConeBlock, ConeKind};
use crate::error::{Error, Result};
use crate::ipm::Model;
use crate::linalg;
use crate::qre_barrier::qre_value;

/// Upper-triangle index pairs (i < j), column by column.
pub fn off_diagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect()
}

/// First super-diagonal pairs (i, i + 1).
pub fn tridiagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|j| (j - 1, j)).collect()
}

/// min t s.t. qre(M, Y) ≤ t, diag(Y) = 1.
/// Decision vector: (t, Y_ij for i < j in `off_diagonal_pairs` order).
pub fn nearcorr(m: &DMatrix<f64>) -> Result<Model> {
    nearcorr_with(m, &off_diagonal_pairs(m.nrows()))
}

/// Nearcorr with Y free only on `pairs`; other off-diagonal entries are 0.
pub fn nearcorr_with(m: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Result<Model> {
    let n = m.nrows();
    linalg::checked_symmetric(m, 1e-12)?;
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= j || j >= n) {
        return Err(Error::InvalidParameter(format!("pair ({i}, {j}) is not strictly upper triangular")));
    }
    let k = 1 + pairs.len();
    let nn = n * n;
    let mut a = DMatrix::zeros(1 + 2 * nn, k);
    a[(0, 0)] = -1.0;
    for (c, &(i, j)) in pairs.iter().enumerate() {
        a[(1 + nn + i + j * n, 1 + c)] = -1.0;
        a[(1 + nn + j + i * n, 1 + c)] = -1.0;
    }
    let mut b = DVector::zeros(1 + 2 * nn);
    b.rows_mut(1, nn).copy_from(&linalg::vec_of(m));
    b.rows_mut(1 + nn, nn).copy_from(&linalg::vec_of(&DMatrix::identity(n, n)));
    let mut c = DVector::zeros(k);
    c[0] = 1.0;
    Model::new(c, vec![ConeBlock::new(ConeKind::QreEpi(n), a, b)?])
}

/// The correlation matrix encoded by a nearcorr decision vector.
pub fn nearcorr_matrix(x: &DVector<f64>, n: usize) -> DMatrix<f64> {
    nearcorr_matrix_with(x, n, &off_diagonal_pairs(n))
}

pub fn nearcorr_matrix_with(x: &DVector<f64>, n: usize, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let mut y = DMatrix::identity(n, n);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        y[(i, j)] = x[1 + c];
        y[(j, i)] = x[1 + c];
    }
    y
}

/// Nearcorr start: Y = I and t one above qre(M, I).
pub fn nearcorr_start(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    nearcorr_start_with(m, n * (n.max(1) - 1) / 2)
}

pub fn nearcorr_start_with(m: &DMatrix<f64>, pairs_len: usize) -> Result<DVector<f64>> {
    let n = m.nrows();
    let q = crate::qre_barrier::qre_value(m, &DMatrix::identity(n, n))?;
    let mut x = DVector::zeros(1 + pairs_len);
    x[0] = q + 1.0;
    Ok(x)
}

/// min qre(A0 + Σ x_i A_i, M) s.t. lower ≤ x ≤ upper (infinite bounds are
/// omitted). Decision vector: (t, x).
pub fn linear_qre(
    a0: Option<&DMatrix<f64>>,
    a_list: &[DMatrix<f64>],
    m: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Result<Model> {
    let n = m.nrows();
    let k = a_list.len();
    if lower.len() != k || upper.len() != k {
        return Err(Error::DimensionMismatch {
            context: "bounds",
            expected: k,
            found: lower.len().min(upper.len()),
        });
    }
    let nn = n * n;
    let mut a = DMatrix::zeros(1 + 2 * nn, k + 1);
    a[(0, 0)] = -1.0;
    for (i, ai) in a_list.iter().enumerate() {
        if ai.nrows() != n || ai.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "A_i size",
                expected: n,
                found: ai.nrows(),
            });
        }
        let v = linalg::vec_of(ai);
        a.view_mut((1, i + 1), (nn, 1)).copy_from(&(-v));
    }
    let mut b = DVector::zeros(1 + 2 * nn);
    if let Some(a0) = a0 {
        b.rows_mut(1, nn).copy_from(&linalg::vec_of(a0));
    }
    b.rows_mut(1 + nn, nn).copy_from(&linalg::vec_of(m));
    let mut blocks = vec![ConeBlock::new(ConeKind::QreEpi(n), a, b)?];
    if let Some(bx) = box_block(lower, upper, 1, k + 1)? {
        blocks.push(bx);
    }
    let mut c = DVector::zeros(k + 1);
    c[0] = 1.0;
    Model::new(c, blocks)
}

/// Orthant rows for the finite entries of lower ≤ x[offset..] ≤ upper.
pub fn box_block(lower: &[f64], upper: &[f64], offset: usize, k: usize) -> Result<Option<ConeBlock>> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (i, (&l, &u)) in lower.iter().zip(upper).enumerate() {
        if l.is_nan() || u.is_nan() || l > u {
            return Err(Error::InvalidParameter(format!("bad bounds for variable {i}")));
        }
        if l.is_finite() {
            // x − l ≥ 0
            rows.push((offset + i, -1.0, -l));
        }
        if u.is_finite() {
            rows.push((offset + i, 1.0, u));
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let mut a = DMatrix::zeros(rows.len(), k);
    let mut b = DVector::zeros(rows.len());
    for (r, &(col, coef, rhs)) in rows.iter().enumerate() {
        a[(r, col)] = coef;
        b[r] = rhs;
    }
    ConeBlock::new(ConeKind::Orthant(rows.len()), a, b).map(Some)
}

/// A_i = e_i e_iᵀ for i < r inside n×n, M = I, x ≤ 1: every feasible
/// A(x) lives on the face spanned by the first r coordinates.
pub fn twophase_synthetic(n: usize, r: usize) -> Result<Model> {
    if r == 0 || r > n {
        return Err(Error::InvalidParameter("need 0 < r ≤ n".into()));
    }
    let a_list: Vec<DMatrix<f64>> = (0..r)
        .map(|i| {
            let mut a = DMatrix::zeros(n, n);
            a[(i, i)] = 1.0;
            a
        })
        .collect();
    linear_qre(
        None,
        &a_list,
        &DMatrix::identity(n, n),
        &vec![f64::NEG_INFINITY; r],
        &vec![1.0; r],
    )
}

/// min qre(A0 + Σ x_i A_i, B0 + Σ x_i B_i) (or its symmetrized sqre variant)
/// s.t. x ≥ lower. Decision vector: (t, x) for qre and (t, x, t1, t2) for sqre.
pub fn qre_pair(
    a0: &DMatrix<f64>,
    a_list: &[DMatrix<f64>],
    b0: &DMatrix<f64>,
    b_list: &[DMatrix<f64>],
    lower: &[f64],
    symmetric: bool,
) -> Result<Model> {
    let k = a_list.len();
    if b_list.len() != k || lower.len() != k {
        return Err(Error::DimensionMismatch {
            context: "pair family",
            expected: k,
            found: b_list.len().min(lower.len()),
        });
    }
    let n = a0.nrows();
    if b0.nrows() != n || a_list.iter().chain(b_list).any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::DimensionMismatch {
            context: "pair family matrix size",
            expected: n,
            found: b0.nrows(),
        });
    }
    let nn = n * n;
    let (ax, bx) = affine_map(a_list, a0, 1, k + 1);
    let (ay, by) = affine_map(b_list, b0, 1, k + 1);
    let lower_block = |cols: usize| box_block(lower, &vec![f64::INFINITY; k], 1, cols);
    if !symmetric {
        let mut a = DMatrix::zeros(1 + 2 * nn, k + 1);
        a[(0, 0)] = -1.0;
        a.view_mut((1, 0), (nn, k + 1)).copy_from(&ax);
        a.view_mut((1 + nn, 0), (nn, k + 1)).copy_from(&ay);
        let mut b = DVector::zeros(1 + 2 * nn);
        b.rows_mut(1, nn).copy_from(&bx);
        b.rows_mut(1 + nn, nn).copy_from(&by);
        let mut blocks = vec![ConeBlock::new(ConeKind::QreEpi(n), a, b)?];
        blocks.extend(lower_block(k + 1)?);
        return Model::new(unit(k + 1, 0), blocks);
    }
    let exp = expand_sqre(0, (&ax, &bx), (&ay, &by))?;
    let cols = k + 3;
    let mut blocks = exp.blocks;
    blocks.extend(lower_block(cols)?);
    Model::new(unit(cols, 0), blocks)
}

/// Interior start for `qre_pair`: x = 0 with the epigraph variables one
/// above their bounds. Requires A0, B0 positive definite.
pub fn qre_pair_start(a0: &DMatrix<f64>, b0: &DMatrix<f64>, k: usize, symmetric: bool) -> Result<DVector<f64>> {
    let fwd = qre_value(a0, b0)?;
    if !symmetric {
        let mut x = DVector::zeros(k + 1);
        x[0] = fwd + 1.0;
        return Ok(x);
    }
    let rev = qre_value(b0, a0)?;
    let mut x = DVector::zeros(k + 3);
    x[k + 1] = fwd + 1.0;
    x[k + 2] = rev + 1.0;
    x[0] = fwd + rev + 3.0;
    Ok(x)
}

/// min qre(A0 + Σ x_i A_i, B0 + Σ y_i B_i) s.t. KL(x, y) ≤ γ.
/// Decision vector: (t, x, y).
pub fn qre_kl(
    a0: &DMatrix<f64>,
    a_list: &[DMatrix<f64>],
    b0: &DMatrix<f64>,
    b_list: &[DMatrix<f64>],
    gamma: f64,
) -> Result<Model> {
    let k = a_list.len();
    if b_list.len() != k {
        return Err(Error::DimensionMismatch {
            context: "KL family",
            expected: k,
            found: b_list.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let n = a0.nrows();
    let nn = n * n;
    let cols = 1 + 2 * k;
    let (ax, bx) = affine_map(a_list, a0, 1, cols);
    let (ay, by) = affine_map(b_list, b0, 1 + k, cols);
    let mut a = DMatrix::zeros(1 + 2 * nn, cols);
    a[(0, 0)] = -1.0;
    a.view_mut((1, 0), (nn, cols)).copy_from(&ax);
    a.view_mut((1 + nn, 0), (nn, cols)).copy_from(&ay);
    let mut b = DVector::zeros(1 + 2 * nn);
    b.rows_mut(1, nn).copy_from(&bx);
    b.rows_mut(1 + nn, nn).copy_from(&by);
    let qre = ConeBlock::new(ConeKind::QreEpi(n), a, b)?;
    let mut akl = DMatrix::zeros(1 + 2 * k, cols);
    let mut bkl = DVector::zeros(1 + 2 * k);
    bkl[0] = gamma;
    for i in 0..2 * k {
        akl[(1 + i, 1 + i)] = -1.0;
    }
    let kl = ConeBlock::new(ConeKind::KlEpi(k), akl, bkl)?;
    Model::new(unit(cols, 0), vec![qre, kl])
}

/// Interior start for `qre_kl`: x = y = 1 (KL = 0 < γ).
pub fn qre_kl_start(a0: &DMatrix<f64>, a_list: &[DMatrix<f64>], b0: &DMatrix<f64>, b_list: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    let k = a_list.len();
    let x = a_list.iter().fold(a0.clone(), |acc, a| acc + a);
    let y = b_list.iter().fold(b0.clone(), |acc, b| acc + b);
    let mut out = DVector::from_element(1 + 2 * k, 1.0);
    out[0] = qre_value(&x, &y)? + 1.0;
    Ok(out)
}

fn unit(k: usize, i: usize) -> DVector<f64> {
    let mut c = DVector::zeros(k);
    c[i] = 1.0;
    c
}

/// (A, b) with mat(b − A x) = M0 + Σ x_{offset+i} M_i over `cols` columns.
fn affine_map(list: &[DMatrix<f64>], m0: &DMatrix<f64>, offset: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>) {
    let nn = m0.nrows() * m0.ncols();
    let mut a = DMatrix::zeros(nn, cols);
    for (i, m) in list.iter().enumerate() {
        a.set_column(offset + i, &(-linalg::vec_of(m)));
    }
    (a, linalg::vec_of(m0))
}

/// Symmetric 0-1 matrix with a single off-diagonal pair set to one.
pub fn sparse_pair_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    if n < 2 {
        return m;
    }
    let p = rng.random_range(0..n);
    let mut q = rng.random_range(0..n - 1);
    if q >= p {
        q += 1;
    }
    m[(p, q)] = 1.0;
    m[(q, p)] = 1.0;
    m
}

/// M = M0 M0ᵀ / ‖diag(M0 M0ᵀ)‖∞ with M0 uniform on (0, 1).
pub fn higham_random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m0 = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    normalized_gram(&m0)
}

/// M built from M0 = [A Y; Yᵀ B] with A a random m×m correlation matrix,
/// B symmetric uniform with unit diagonal and Y uniform m×n.
pub fn higham_block<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.5) + DMatrix::<f64>::identity(m, m);
    let gram = &g * g.transpose();
    let d = gram.diagonal().map(|v| 1.0 / v.sqrt());
    let a = DMatrix::from_fn(m, m, |i, j| gram[(i, j)] * d[i] * d[j]);
    let mut b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    b = (&b + b.transpose()) * 0.5;
    b.fill_diagonal(1.0);
    let y = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>());
    let mut m0 = DMatrix::zeros(m + n, m + n);
    m0.view_mut((0, 0), (m, m)).copy_from(&a);
    m0.view_mut((m, m), (n, n)).copy_from(&b);
    m0.view_mut((0, m), (m, n)).copy_from(&y);
    m0.view_mut((m, 0), (n, m)).copy_from(&y.transpose());
    normalized_gram(&m0)
}

fn normalized_gram(m0: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m0 * m0.transpose();
    let scale = g.diagonal().amax();
    linalg::symmetrize(&(g / scale))
}
