#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    g.qr().q()
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    (&g + g.transpose()) * 0.5
}

/// Q Diag(λ) Qᵀ with λ uniform in [lo, hi].
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let lam = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// A random symmetric direction with unit Frobenius norm.
pub fn random_sym_unit(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let s = random_sym(rng, n);
    let nrm = s.norm();
    s / nrm
}

/// Dense symmetric matrix function via an independent nalgebra eigensolver.
pub fn matrix_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = nalgebra::SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub type C64 = nalgebra::Complex<f64>;

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    g.qr().q()
}

/// U Diag(λ) U† with λ uniform in [lo, hi].
pub fn random_herm_pd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<C64> {
    let u = random_unitary(rng, n);
    let lam = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| C64::new(rng.random_range(lo..hi), 0.0)));
    let m = &u * lam * u.adjoint();
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// qre on the complex side: Σ λ ln λ − Re Tr(X ln Y), with ln Y taken on the
/// range of Y (eigenvalues above `floor`).
pub fn complex_qre(x: &DMatrix<C64>, y: &DMatrix<C64>, floor: f64) -> f64 {
    let ex = nalgebra::SymmetricEigen::new(x.clone());
    let ey = nalgebra::SymmetricEigen::new(y.clone());
    let first: f64 = ex.eigenvalues.iter().filter(|l| **l > floor).map(|l| l * l.ln()).sum();
    let ln_y = DMatrix::from_diagonal(&ey.eigenvalues.map(|l| C64::new(if l > floor { l.ln() } else { 0.0 }, 0.0)));
    let ln_ym = &ey.eigenvectors * ln_y * ey.eigenvectors.adjoint();
    first - (x * ln_ym).trace().re
}
