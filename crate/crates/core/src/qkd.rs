//! Key-rate computation: channel and pinching maps on Hermitian matrices,
//! the channel dimension reduction, the real embedding, and the solve of
//! min qre(𝒢(ρ), 𝒵(𝒢(ρ))) over a spectrahedron.

use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::{ConeBlock, ConeKind};
use crate::error::{Error, Result};
use crate::ipm::{self, Model, SolverOptions, Status};
use crate::linalg;
use crate::qre_barrier::qre_value;
use crate::twophase::{phase1_dual, FaceOutcome, RANK_TOL};

pub type C64 = Complex<f64>;

const MAP_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
pub const REDUCTION_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl ComplexMatrix {
    pub fn new(re: DMatrix<f64>, im: DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::DimensionMismatch {
                context: "real and imaginary parts",
                expected: re.nrows(),
                found: im.nrows(),
            });
        }
        Ok(ComplexMatrix { re, im })
    }

    pub fn from_real(re: DMatrix<f64>) -> Self {
        let im = DMatrix::zeros(re.nrows(), re.ncols());
        ComplexMatrix { re, im }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real(DMatrix::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn to_complex(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| C64::new(self.re[(i, j)], self.im[(i, j)]))
    }

    pub fn from_complex(m: &DMatrix<C64>) -> Self {
        ComplexMatrix {
            re: m.map(|z| z.re),
            im: m.map(|z| z.im),
        }
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix {
            re: self.re.transpose(),
            im: -self.im.transpose(),
        }
    }

    /// max |X − X†| entry.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let dr = (&self.re - self.re.transpose()).amax();
        let di = (&self.im + self.im.transpose()).amax();
        dr.max(di)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        if self.re.iter().chain(self.im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = self.hermitian_deviation();
        let scale = 1.0f64.max(self.re.amax()).max(self.im.amax());
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(())
    }

    /// [X_r, −X_i; X_i, X_r] for any complex matrix; a *-homomorphism.
    pub fn embed(&self) -> DMatrix<f64> {
        let (n, m) = (self.nrows(), self.ncols());
        let mut out = DMatrix::zeros(2 * n, 2 * m);
        out.view_mut((0, 0), (n, m)).copy_from(&self.re);
        out.view_mut((n, m), (n, m)).copy_from(&self.re);
        out.view_mut((0, m), (n, m)).copy_from(&(-&self.im));
        out.view_mut((n, 0), (n, m)).copy_from(&self.im);
        out
    }

    /// Inverse of `embed` on its image (reads the left block column).
    pub fn from_embedded(m: &DMatrix<f64>) -> Self {
        let n = m.nrows() / 2;
        let c = m.ncols() / 2;
        ComplexMatrix {
            re: m.view((0, 0), (n, c)).into_owned(),
            im: m.view((n, 0), (n, c)).into_owned(),
        }
    }

    /// Re Tr(self · other); the real inner product for Hermitian pairs.
    pub fn re_trace_product(&self, other: &ComplexMatrix) -> f64 {
        self.re.component_mul(&other.re.transpose()).sum() - self.im.component_mul(&other.im.transpose()).sum()
    }
}

pub fn herm_to_real(x: &ComplexMatrix) -> Result<DMatrix<f64>> {
    x.check_hermitian()?;
    Ok(linalg::symmetrize(&x.embed()))
}

/// Eigenvalues (descending) and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eig(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or(Error::EigFailure)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(m.nrows(), m.nrows());
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

fn sandwich_sum(ops: &[DMatrix<C64>], rho: &DMatrix<C64>) -> DMatrix<C64> {
    let k = ops.first().map(|o| o.nrows()).unwrap_or(0);
    let mut out = DMatrix::zeros(k, k);
    for op in ops {
        out += op * rho * op.adjoint();
    }
    out
}

#[derive(Debug, Clone)]
pub struct KrausChannel {
    kraus: Vec<DMatrix<C64>>,
}

impl KrausChannel {
    /// Requires a common k×n shape and Σ K_j K_j† ⪯ I.
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvariantViolation("channel has no Kraus operators".into()))?;
        let shape = (first.nrows(), first.ncols());
        for k in &kraus {
            if (k.nrows(), k.ncols()) != shape {
                return Err(Error::DimensionMismatch {
                    context: "Kraus operator shape",
                    expected: shape.0,
                    found: k.nrows(),
                });
            }
            if k.re.iter().chain(k.im.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let ch = KrausChannel {
            kraus: kraus.iter().map(|k| k.to_complex()).collect(),
        };
        let mut s = DMatrix::<C64>::zeros(shape.0, shape.0);
        for k in &ch.kraus {
            s += k * k.adjoint();
        }
        let (vals, _) = hermitian_eig(&s)?;
        if vals[0] > 1.0 + MAP_TOL {
            return Err(Error::InvariantViolation(format!(
                "Kraus bound: largest eigenvalue of sum K K^† is {}",
                vals[0]
            )));
        }
        Ok(ch)
    }

    fn unchecked(kraus: Vec<DMatrix<C64>>) -> Self {
        KrausChannel { kraus }
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn operators(&self) -> Vec<ComplexMatrix> {
        self.kraus.iter().map(ComplexMatrix::from_complex).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PinchingMap {
    z: Vec<DMatrix<C64>>,
}

impl PinchingMap {
    /// Each Z_j Hermitian and idempotent, Σ Z_j = I.
    pub fn new(z: Vec<ComplexMatrix>) -> Result<Self> {
        let first = z
            .first()
            .ok_or_else(|| Error::InvariantViolation("pinching has no projectors".into()))?;
        let k = first.nrows();
        let mut sum = DMatrix::<C64>::zeros(k, k);
        let mut out = Vec::with_capacity(z.len());
        for zj in &z {
            if zj.nrows() != k || zj.ncols() != k {
                return Err(Error::DimensionMismatch {
                    context: "pinching projector shape",
                    expected: k,
                    found: zj.nrows(),
                });
            }
            if zj.check_hermitian().is_err() {
                return Err(Error::InvariantViolation("pinching hermiticity".into()));
            }
            let c = zj.to_complex();
            if (&c * &c - &c).camax() > MAP_TOL {
                return Err(Error::InvariantViolation("pinching idempotence".into()));
            }
            sum += &c;
            out.push(c);
        }
        if (sum - DMatrix::<C64>::identity(k, k)).camax() > MAP_TOL {
            return Err(Error::InvariantViolation("pinching completeness".into()));
        }
        Ok(PinchingMap { z: out })
    }

    pub fn dim(&self) -> usize {
        self.z[0].nrows()
    }

    /// Whether Z_i Z_j = 0 for i ≠ j (then 𝒵 is idempotent).
    pub fn mutually_orthogonal(&self) -> bool {
        for (i, a) in self.z.iter().enumerate() {
            for b in &self.z[i + 1..] {
                if (a * b).camax() > MAP_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        self.z.iter().map(ComplexMatrix::from_complex).collect()
    }
}

fn check_square(m: &ComplexMatrix, n: usize, context: &'static str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: m.nrows(),
        });
    }
    Ok(())
}

pub fn apply_g(ch: &KrausChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(rho, ch.input_dim(), "channel input")?;
    Ok(ComplexMatrix::from_complex(&sandwich_sum(&ch.kraus, &rho.to_complex())))
}

pub fn apply_z(p: &PinchingMap, delta: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(delta, p.dim(), "pinching input")?;
    Ok(ComplexMatrix::from_complex(&sandwich_sum(&p.z, &delta.to_complex())))
}

/// Tr(F(X)) over the eigenvalues of a Hermitian matrix above `floor`.
fn trace_xlnx_on_range(m: &DMatrix<C64>, floor_rel: f64) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let (vals, vecs) = hermitian_eig(m)?;
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let kept: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > floor_rel * lmax).collect();
    let mut basis = DMatrix::zeros(m.nrows(), kept.len());
    for (c, &i) in kept.iter().enumerate() {
        basis.set_column(c, &vecs.column(i));
    }
    Ok((kept.iter().map(|&i| vals[i]).collect(), basis))
}

/// |Tr(δ ln 𝒵(δ)) − Tr(𝒵(δ) ln 𝒵(δ))| with the logarithm taken on the
/// range of 𝒵(δ).
pub fn pinching_identity_check(p: &PinchingMap, delta: &ComplexMatrix) -> Result<f64> {
    check_square(delta, p.dim(), "pinching input")?;
    delta.check_hermitian()?;
    let d = delta.to_complex();
    let zd = sandwich_sum(&p.z, &d);
    let (vals, basis) = trace_xlnx_on_range(&zd, 1e-14)?;
    if vals.iter().any(|v| *v <= 0.0) {
        return Err(Error::DomainViolation {
            function: "ln",
            value: vals.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    // ln 𝒵(δ) restricted to its range
    let ln_diag = DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|v| C64::new(v.ln(), 0.0))));
    let ln_zd = &basis * ln_diag * basis.adjoint();
    let lhs = (&d * &ln_zd).trace().re;
    let rhs = (&zd * &ln_zd).trace().re;
    Ok((lhs - rhs).abs())
}

/// Channel restricted to the range U of 𝒵(𝒢(I)).
#[derive(Debug, Clone)]
pub struct DimensionReduction {
    /// k×k̄ with orthonormal columns.
    pub u: ComplexMatrix,
    /// k×(k − k̄), the discarded eigenvectors.
    pub discarded: ComplexMatrix,
    /// Eigenvalues of 𝒵(𝒢(I)) in descending order.
    pub eigvals: Vec<f64>,
    g_reduced: Vec<DMatrix<C64>>,
    zg_reduced: Vec<DMatrix<C64>>,
}

impl DimensionReduction {
    pub fn reduced_dim(&self) -> usize {
        self.u.ncols()
    }

    /// U† 𝒢(ρ) U
    pub fn apply_g(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_square(rho, self.g_reduced[0].ncols(), "channel input")?;
        Ok(ComplexMatrix::from_complex(&sandwich_sum(&self.g_reduced, &rho.to_complex())))
    }

    /// U† 𝒵(𝒢(ρ)) U
    pub fn apply_zg(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_square(rho, self.zg_reduced[0].ncols(), "channel input")?;
        Ok(ComplexMatrix::from_complex(&sandwich_sum(&self.zg_reduced, &rho.to_complex())))
    }

    /// max over discarded v of ‖K_j† v‖ and ‖K_j† Z_i† v‖.
    pub fn nullspace_residual(&self, g: &KrausChannel, z: &PinchingMap) -> f64 {
        let v = self.discarded.to_complex();
        let mut worst = 0.0f64;
        for k in &g.kraus {
            worst = worst.max((k.adjoint() * &v).norm());
            for zi in &z.z {
                worst = worst.max((k.adjoint() * zi.adjoint() * &v).norm());
            }
        }
        worst
    }
}

pub fn reduce_dimension(g: &KrausChannel, z: &PinchingMap, eps: f64) -> Result<DimensionReduction> {
    if g.output_dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            context: "channel output vs pinching",
            expected: z.dim(),
            found: g.output_dim(),
        });
    }
    let k = g.output_dim();
    let g_i = sandwich_sum(&g.kraus, &DMatrix::identity(g.input_dim(), g.input_dim()));
    let zg_i = sandwich_sum(&z.z, &g_i);
    let (vals, vecs) = hermitian_eig(&zg_i)?;
    let lmax = vals[0].max(0.0);
    let kept = vals.iter().filter(|&&v| v > eps * lmax).count();
    let u = vecs.columns(0, kept).into_owned();
    let discarded = vecs.columns(kept, k - kept).into_owned();
    let g_reduced = g.kraus.iter().map(|kj| u.adjoint() * kj).collect();
    let mut zg_reduced = Vec::with_capacity(g.kraus.len() * z.z.len());
    for zi in &z.z {
        for kj in &g.kraus {
            zg_reduced.push(u.adjoint() * zi * kj);
        }
    }
    Ok(DimensionReduction {
        u: ComplexMatrix::from_complex(&u),
        discarded: ComplexMatrix::from_complex(&discarded),
        eigvals: vals,
        g_reduced,
        zg_reduced,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ProtocolMeta {
    pub name: String,
    pub pz: Option<f64>,
    pub e: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct QkdProblem {
    pub g: KrausChannel,
    pub z: PinchingMap,
    pub constraints: Vec<(ComplexMatrix, f64)>,
    pub delta_ec: f64,
    pub meta: ProtocolMeta,
}

impl QkdProblem {
    pub fn new(
        g: KrausChannel,
        z: PinchingMap,
        constraints: Vec<(ComplexMatrix, f64)>,
        delta_ec: f64,
        meta: ProtocolMeta,
    ) -> Result<Self> {
        if g.output_dim() != z.dim() {
            return Err(Error::DimensionMismatch {
                context: "channel output vs pinching",
                expected: z.dim(),
                found: g.output_dim(),
            });
        }
        let n = g.input_dim();
        let mut has_trace = false;
        for (a, b) in &constraints {
            check_square(a, n, "constraint matrix")?;
            a.check_hermitian()?;
            if !b.is_finite() {
                return Err(Error::NonFinite);
            }
            let scale = a.re[(0, 0)];
            let is_scaled_identity = scale != 0.0
                && a.im.amax() <= HERMITIAN_TOL
                && (&a.re - DMatrix::identity(n, n) * scale).amax() <= HERMITIAN_TOL * scale.abs();
            if is_scaled_identity && (b / scale - 1.0).abs() <= 1e-12 {
                has_trace = true;
            }
        }
        if !has_trace {
            return Err(Error::InvariantViolation("trace constraint Tr rho = 1 missing".into()));
        }
        if !delta_ec.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(QkdProblem {
            g,
            z,
            constraints,
            delta_ec,
            meta,
        })
    }
}

/// Two-level toy protocol: identity channel, computational-basis pinching,
/// Tr ρ = 1 and optionally Re ρ12 = `coherence`.
pub fn toy_protocol(coherence: Option<f64>, delta_ec: f64) -> Result<QkdProblem> {
    let mut cons = vec![(ComplexMatrix::identity(2), 1.0)];
    if let Some(c) = coherence {
        cons.push((ComplexMatrix::from_real(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])), c));
    }
    let proj = |i: usize| {
        let mut m = DMatrix::zeros(2, 2);
        m[(i, i)] = 1.0;
        ComplexMatrix::from_real(m)
    };
    let name = match coherence {
        Some(c) => format!("toy-coherence-{c}"),
        None => "toy-identity".to_string(),
    };
    QkdProblem::new(
        KrausChannel::new(vec![ComplexMatrix::identity(2)])?,
        PinchingMap::new(vec![proj(0), proj(1)])?,
        cons,
        delta_ec,
        ProtocolMeta {
            name,
            pz: None,
            e: None,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkdReport {
    pub n: usize,
    pub k: usize,
    pub n_bar: usize,
    pub k_bar: usize,
    pub phase1_seconds: f64,
    pub status: String,
    pub iterations: usize,
    pub newton_steps: usize,
    pub objective_embedded: f64,
    pub nullspace_residual: f64,
    pub pinching_residual: f64,
    pub rho: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone)]
pub struct QkdOutcome {
    pub rate: f64,
    pub p_opt: f64,
    pub rho: ComplexMatrix,
    pub report: QkdReport,
}

/// Orthonormal basis of n×n Hermitian matrices under Re Tr(AB).
fn hermitian_basis(n: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut re = DMatrix::zeros(n, n);
        re[(i, i)] = 1.0;
        out.push(ComplexMatrix::from_real(re));
    }
    for j in 0..n {
        for i in 0..j {
            let mut re = DMatrix::zeros(n, n);
            re[(i, j)] = s;
            re[(j, i)] = s;
            out.push(ComplexMatrix::from_real(re));
            let mut im = DMatrix::zeros(n, n);
            im[(i, j)] = s;
            im[(j, i)] = -s;
            out.push(ComplexMatrix {
                re: DMatrix::zeros(n, n),
                im,
            });
        }
    }
    out
}

fn combine(basis: &[ComplexMatrix], c: &[f64]) -> ComplexMatrix {
    let n = basis[0].nrows();
    let mut out = ComplexMatrix::from_real(DMatrix::zeros(n, n));
    for (b, &w) in basis.iter().zip(c) {
        out.re += &b.re * w;
        out.im += &b.im * w;
    }
    out
}

/// Face of the ρ-spectrahedron from the witness Y = Σ y_i A_i, yᵀb = 0,
/// computed on the real embedding; returns V (n×r) with ρ = V ρ̄ V†.
fn spectrahedron_face(prob: &QkdProblem, opts: &SolverOptions) -> Result<DMatrix<C64>> {
    let n = prob.g.input_dim();
    let embedded: Vec<DMatrix<f64>> = prob.constraints.iter().map(|(a, _)| linalg::symmetrize(&a.embed())).collect();
    let b: Vec<f64> = prob.constraints.iter().map(|(_, b)| *b).collect();
    match phase1_dual(&embedded, Some(&b), opts)? {
        FaceOutcome::FullDimensional => Ok(DMatrix::identity(n, n)),
        FaceOutcome::Face(face) => {
            let y = ComplexMatrix::from_embedded(&face.witness).to_complex();
            let (vals, vecs) = hermitian_eig(&y)?;
            let lmax = vals[0].abs().max(f64::MIN_POSITIVE);
            let cols: Vec<usize> = (0..n).filter(|&i| vals[i] <= RANK_TOL * lmax).collect();
            if cols.is_empty() {
                return Err(Error::NoInteriorFace);
            }
            let mut v = DMatrix::zeros(n, cols.len());
            for (c, &i) in cols.iter().enumerate() {
                v.set_column(c, &vecs.column(i));
            }
            Ok(v)
        }
    }
}

/// min qre(𝒢(ρ), 𝒵(𝒢(ρ))) subject to the constraints, rate = p/ln 2 − δ_EC.
pub fn qkd_rate(prob: &QkdProblem, opts: &SolverOptions) -> Result<QkdOutcome> {
    let n = prob.g.input_dim();
    let k = prob.g.output_dim();
    let started = std::time::Instant::now();
    let v = spectrahedron_face(prob, opts)?;
    let phase1_seconds = started.elapsed().as_secs_f64();
    let r = v.ncols();

    // restrict ρ to the face, then the channel to the range of 𝒵(𝒢(I))
    let face_kraus: Vec<DMatrix<C64>> = prob.g.kraus.iter().map(|kj| kj * &v).collect();
    let g_face = KrausChannel::unchecked(face_kraus);
    let red = reduce_dimension(&g_face, &prob.z, REDUCTION_EPS)?;
    let kb = red.reduced_dim();
    if kb == 0 {
        return Err(Error::InvariantViolation("channel output vanishes on the feasible face".into()));
    }

    // decision vector (t, c) with ρ̄ = Σ c_α B_α
    let basis = hermitian_basis(r);
    let p = basis.len();
    let kv = 1 + p;
    let nn = 4 * kb * kb;
    let mut a_qre = DMatrix::zeros(1 + 2 * nn, kv);
    a_qre[(0, 0)] = -1.0;
    let mut a_psd = DMatrix::zeros(4 * r * r, kv);
    for (alpha, b) in basis.iter().enumerate() {
        let gx = red.apply_g(b)?.embed();
        let gy = red.apply_zg(b)?.embed();
        a_qre.view_mut((1, 1 + alpha), (nn, 1)).copy_from(&(-linalg::vec_of(&gx)));
        a_qre.view_mut((1 + nn, 1 + alpha), (nn, 1)).copy_from(&(-linalg::vec_of(&gy)));
        a_psd.set_column(1 + alpha, &(-linalg::vec_of(&b.embed())));
    }
    let qre_block = ConeBlock::new(ConeKind::QreEpi(2 * kb), a_qre, DVector::zeros(1 + 2 * nn))?;
    let psd_block = ConeBlock::new(ConeKind::Psd(2 * r), a_psd, DVector::zeros(4 * r * r))?;
    let vc = ComplexMatrix::from_complex(&v);
    let m = prob.constraints.len();
    let mut e = DMatrix::zeros(m, kv);
    let mut d = DVector::zeros(m);
    for (i, (a, bi)) in prob.constraints.iter().enumerate() {
        let ar = ComplexMatrix::from_complex(&(vc.to_complex().adjoint() * a.to_complex() * vc.to_complex()));
        for (alpha, b) in basis.iter().enumerate() {
            e[(i, 1 + alpha)] = ar.re_trace_product(b);
        }
        d[i] = *bi;
    }

    // analytic centre of the reduced spectrahedron
    let spec = Model::new(DVector::zeros(kv), vec![psd_block.clone()])?.with_equalities(e.clone(), d.clone())?;
    let mut x0 = ipm::initial_point(&spec)?;
    let centre = ipm::solve(&spec, &x0, opts)?;
    if centre.status == Status::Optimal {
        x0 = centre.x;
    }
    let rho_bar = combine(&basis, &x0.as_slice()[1..]);
    let gx = red.apply_g(&rho_bar)?;
    let gy = red.apply_zg(&rho_bar)?;
    let q0 = qre_value(&herm_to_real(&gx)?, &herm_to_real(&gy)?)?;
    x0[0] = q0 + 1.0;

    let mut c = DVector::zeros(kv);
    c[0] = 1.0;
    let model = Model::new(c, vec![qre_block, psd_block])?.with_equalities(e, d)?;
    let res = ipm::solve(&model, &x0, opts)?;
    let rho_bar = combine(&basis, &res.x.as_slice()[1..]);
    let rho = ComplexMatrix::from_complex(&(&v * rho_bar.to_complex() * v.adjoint()));
    let p_opt = res.objective / 2.0;
    let rate = p_opt / std::f64::consts::LN_2 - prob.delta_ec;
    let pinching_residual = apply_g(&prob.g, &rho)
        .and_then(|g| pinching_identity_check(&prob.z, &g))
        .unwrap_or(f64::NAN);
    let report = QkdReport {
        n,
        k,
        n_bar: r,
        k_bar: kb,
        phase1_seconds,
        status: res.status.name().to_string(),
        iterations: res.iterations,
        newton_steps: res.newton_steps,
        objective_embedded: res.objective,
        nullspace_residual: red.nullspace_residual(&g_face, &prob.z),
        pinching_residual,
        rho: Some(
            (0..n)
                .map(|i| (0..n).map(|j| [rho.re[(i, j)], rho.im[(i, j)]]).collect())
                .collect(),
        ),
    };
    if res.status != Status::Optimal {
        return Err(Error::NoConvergence { iterations: res.iterations });
    }
    Ok(QkdOutcome {
        rate,
        p_opt,
        rho,
        report,
    })
}

#[derive(Debug, Deserialize, Serialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ConstraintJson {
    #[serde(rename = "A")]
    a: MatrixJson,
    b: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct ProtocolJson {
    name: String,
    #[serde(default)]
    pz: Option<f64>,
    #[serde(default)]
    e: Option<f64>,
    #[serde(rename = "deltaEC")]
    delta_ec: f64,
    kraus: Vec<MatrixJson>,
    pinching: Vec<MatrixJson>,
    constraints: Vec<ConstraintJson>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn matrix_from_json(m: &MatrixJson, what: &str) -> Result<ComplexMatrix> {
    let re = rows_to_matrix(&m.re, what)?;
    let im = match &m.im {
        Some(im) => rows_to_matrix(im, what)?,
        None => DMatrix::zeros(re.nrows(), re.ncols()),
    };
    ComplexMatrix::new(re, im).map_err(|_| Error::Parse(format!("{what}: re/im shapes differ")))
}

pub fn parse_protocol(text: &str) -> Result<QkdProblem> {
    let raw: ProtocolJson = serde_json::from_str(text)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let kraus = raw
        .kraus
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("kraus[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let pinching = raw
        .pinching
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("pinching[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let constraints = raw
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((matrix_from_json(&c.a, &format!("constraints[{i}].A"))?, c.b)))
        .collect::<Result<Vec<_>>>()?;
    QkdProblem::new(
        KrausChannel::new(kraus)?,
        PinchingMap::new(pinching)?,
        constraints,
        raw.delta_ec,
        ProtocolMeta {
            name: raw.name,
            pz: raw.pz,
            e: raw.e,
        },
    )
}

pub fn load_protocol(path: &Path) -> Result<QkdProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_protocol(&text)
}

fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    let rows = |x: &DMatrix<f64>| (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    MatrixJson {
        re: rows(&m.re),
        im: (m.im.amax() > 0.0).then(|| rows(&m.im)),
    }
}

/// The protocol JSON document for a problem.
pub fn protocol_to_json(prob: &QkdProblem) -> String {
    let raw = ProtocolJson {
        name: prob.meta.name.clone(),
        pz: prob.meta.pz,
        e: prob.meta.e,
        delta_ec: prob.delta_ec,
        kraus: prob.g.operators().iter().map(matrix_to_json).collect(),
        pinching: prob.z.projectors().iter().map(matrix_to_json).collect(),
        constraints: prob
            .constraints
            .iter()
            .map(|(a, b)| ConstraintJson {
                a: matrix_to_json(a),
                b: *b,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("protocol serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_pinching(k: usize) -> PinchingMap {
        PinchingMap::new(
            (0..k)
                .map(|i| {
                    let mut m = DMatrix::zeros(k, k);
                    m[(i, i)] = 1.0;
                    ComplexMatrix::from_real(m)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn projector_channel() {
        let mut k1 = DMatrix::zeros(2, 2);
        k1[(0, 0)] = 1.0;
        let ch = KrausChannel::new(vec![ComplexMatrix::from_real(k1)]).unwrap();
        let out = apply_g(&ch, &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(out.re, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn coordinate_pinching_keeps_diagonal() {
        let d = ComplexMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.1, -0.1, 0.0]),
        )
        .unwrap();
        let out = apply_z(&diag_pinching(2), &d).unwrap();
        assert_eq!(out.re, DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 0.3]));
        assert!(out.im.amax() == 0.0);
    }

    #[test]
    fn pauli_y_embedding_spectrum() {
        let y = ComplexMatrix::new(DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let e = herm_to_real(&y).unwrap();
        let mut vals = crate::matcalc::spectral_decompose(&e).unwrap().eigvals.iter().copied().collect::<Vec<_>>();
        vals.sort_by(f64::total_cmp);
        for (v, w) in vals.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((v - w).abs() < 1e-14);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let x = ComplexMatrix::from_real(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert!(matches!(herm_to_real(&x), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn pinching_invariants() {
        let bad = ComplexMatrix::from_real(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let err = PinchingMap::new(vec![bad.clone()]).unwrap_err();
        assert_eq!(err, Error::InvariantViolation("pinching completeness".into()));
        let half = ComplexMatrix::from_real(DMatrix::identity(2, 2) * 0.5);
        let err = PinchingMap::new(vec![half.clone(), half]).unwrap_err();
        assert_eq!(err, Error::InvariantViolation("pinching idempotence".into()));
    }

    #[test]
    fn identity_channel_has_no_reduction() {
        let ch = KrausChannel::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let red = reduce_dimension(&ch, &diag_pinching(2), REDUCTION_EPS).unwrap();
        assert_eq!(red.reduced_dim(), 2);
    }

    #[test]
    fn identity_channel_rate_is_minus_delta_ec() {
        let ch = KrausChannel::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let prob = QkdProblem::new(
            ch,
            diag_pinching(2),
            vec![(ComplexMatrix::identity(2), 1.0)],
            0.1,
            ProtocolMeta::default(),
        )
        .unwrap();
        let out = qkd_rate(&prob, &SolverOptions::default()).unwrap();
        assert!((out.rate + 0.1).abs() <= 1e-7, "{}", out.rate);
    }

    #[test]
    fn protocol_round_trip() {
        let ch = KrausChannel::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let prob = QkdProblem::new(
            ch,
            diag_pinching(2),
            vec![(ComplexMatrix::identity(2), 1.0)],
            0.0,
            ProtocolMeta {
                name: "toy".into(),
                pz: None,
                e: None,
            },
        )
        .unwrap();
        let back = parse_protocol(&protocol_to_json(&prob)).unwrap();
        assert_eq!(back.meta.name, "toy");
        assert_eq!(back.constraints.len(), 1);
    }

    #[test]
    fn parse_error_has_location() {
        let err = parse_protocol("{ \"name\": 3 }").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("line 1")));
    }
}
