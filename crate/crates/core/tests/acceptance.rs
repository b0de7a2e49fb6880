//! Acceptance run: one line per criterion. Hard failures make the process
//! exit nonzero; soft and conditional criteria only report.

mod common;

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use qre_core::cones::{ConeBlock, ConeKind};
use qre_core::families;
use qre_core::ipm::{self, Model, SolverOptions, Status};
use qre_core::matcalc::div_diff1_ln_stable;
use qre_core::qkd::{
    apply_g, apply_z, herm_to_real, load_protocol, pinching_identity_check, qkd_rate, reduce_dimension, toy_protocol,
    ComplexMatrix, KrausChannel, PinchingMap, REDUCTION_EPS,
};
use qre_core::qre_barrier::{phi_eval, phi_hess_apply, phi_hess_solve_stats, phi_value, qre_value, QrePoint};
use qre_core::twophase::{two_phase_solve, Phase1Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq)]
enum Grade {
    Hard,
    Soft,
    Conditional,
}

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

// ---------------------------------------------------------------------------
// independent oracles

/// Tr X ln X − Tr X ln Y for PSD X and PD Y, with 0 ln 0 = 0.
fn qre_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let ex = nalgebra::SymmetricEigen::new(x.clone());
    let first: f64 = ex.eigenvalues.iter().filter(|l| **l > 0.0).map(|l| l * l.ln()).sum();
    first - (x * matrix_fn(y, f64::ln)).trace()
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.min()
}

/// Worst violation of b − A x ∈ K over all blocks, judged without the
/// solver's barrier code.
fn feasibility_violation(model: &Model, x: &DVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for blk in &model.blocks {
        let s = &blk.b - &blk.a * x;
        let v = match blk.kind {
            ConeKind::Orthant(_) => (-s.min()).max(0.0),
            ConeKind::Psd(n) => (-lambda_min(&DMatrix::from_column_slice(n, n, s.as_slice()))).max(0.0),
            ConeKind::KlEpi(m) => {
                let (p, q) = (s.rows(1, m), s.rows(1 + m, m));
                let mut kl = 0.0;
                let mut neg = 0.0f64;
                for i in 0..m {
                    neg = neg.max(-p[i]).max(-q[i]);
                    if p[i] > 0.0 {
                        kl += p[i] * (p[i] / q[i]).ln();
                    }
                }
                neg.max(kl - s[0])
            }
            ConeKind::QreEpi(n) => {
                let nn = n * n;
                let xm = DMatrix::from_column_slice(n, n, &s.as_slice()[1..1 + nn]);
                let ym = DMatrix::from_column_slice(n, n, &s.as_slice()[1 + nn..]);
                let neg = (-lambda_min(&xm)).max(0.0).max((-lambda_min(&ym)).max(0.0));
                if lambda_min(&ym) <= 0.0 {
                    f64::INFINITY
                } else {
                    neg.max(qre_oracle(&xm, &ym) - s[0])
                }
            }
        };
        worst = worst.max(v);
    }
    worst
}

// ---------------------------------------------------------------------------
// criteria

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> QrePoint {
    let x = random_pd(rng, n, 0.5, 2.0);
    let y = random_pd(rng, n, 0.5, 2.0);
    let q = qre_value(&x, &y).unwrap();
    QrePoint {
        t: q + rng.random_range(0.5..1.5),
        x,
        y,
    }
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    QrePoint {
        t: gaussian(rng),
        x: random_sym_unit(rng, n),
        y: random_sym_unit(rng, n),
    }
    .to_vec()
}

fn moved(p: &QrePoint, v: &DVector<f64>, s: f64) -> QrePoint {
    let n = p.dim();
    QrePoint::from_vec(n, (p.to_vec() + v * s).as_slice()).unwrap()
}

fn c1_derivatives() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1001);
    let (mut g_worst, mut h_worst) = (0.0f64, 0.0f64);
    let h = 1e-5;
    for n in 2..=8 {
        for _ in 0..100 {
            let p = random_point(&mut rng, n);
            let d = phi_eval(&p).unwrap();
            let v = random_direction(&mut rng, n);
            let (plus, minus) = (moved(&p, &v, h), moved(&p, &v, -h));
            let fd = (phi_value(&plus).unwrap() - phi_value(&minus).unwrap()) / (2.0 * h);
            let an = d.grad.dot(&v);
            g_worst = g_worst.max((fd - an).abs() / an.abs().max(1.0));
            let fd_h = (&phi_eval(&plus).unwrap().grad - &phi_eval(&minus).unwrap().grad) / (2.0 * h);
            let an_h = phi_hess_apply(&d, v.as_slice()).unwrap();
            h_worst = h_worst.max(rel_err(&fd_h, &an_h));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        g_worst <= 1e-6 && h_worst <= 1e-5 && secs <= 120.0,
        format!("700 points n=2..8: grad rel {g_worst:.1e} (≤1e-6), Hessian rel {h_worst:.1e} (≤1e-5), {secs:.1}s (≤120s)"),
    )
}

/// (ln a − ln b)/(a − b) from the alternating series of ln(1+δ)/δ.
fn ln_dd_series(a: f64, b: f64) -> f64 {
    let delta = (a - b) / b;
    let mut acc = 0.0;
    for j in (0..60).rev() {
        acc = 1.0 / (j as f64 + 1.0) - delta * acc;
    }
    acc / b
}

fn c2_divided_difference() -> Outcome {
    let mut rng = rng(1002);
    let mut worst = 0.0f64;
    let mut count = 0;
    for e in 1..=12 {
        let gap = 10f64.powi(-e);
        for _ in 0..50 {
            let a: f64 = rng.random_range(0.5..4.0);
            let b = a * (1.0 - gap);
            // Sterbenz: a − b is exact for a/2 ≤ b ≤ 2a
            let (hi, lo) = (a, b);
            for (x, y) in [(hi, lo), (lo, hi)] {
                let err = (div_diff1_ln_stable(x, y).unwrap() - ln_dd_series(hi, lo)).abs();
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{count} pairs, gaps 1e-1..1e-12: max abs err {worst:.1e} (≤1e-12)"))
}

fn c3_newton_round_trip() -> Outcome {
    let mut rng = rng(1003);
    let mut worst = 0.0f64;
    let mut iters = vec![0usize; 9];
    for n in 1..=8 {
        for _ in 0..10 {
            let p = random_point(&mut rng, n);
            let d = phi_eval(&p).unwrap();
            let rhs = random_direction(&mut rng, n);
            let out = phi_hess_solve_stats(&d, rhs.as_slice(), 1e-12, None).unwrap();
            let back = phi_hess_apply(&d, out.solution.as_slice()).unwrap();
            worst = worst.max(rel_err(&back, &rhs));
            iters[n] = iters[n].max(out.iterations);
        }
    }
    let small = iters[1..=6].iter().copied().max().unwrap_or(0);
    verdict(
        worst <= 1e-7 && small <= 50,
        format!(
            "round trip rel {worst:.1e} (≤1e-7); PCG iterations n≤6 max {small} (≤50), n=7 {}, n=8 {}",
            iters[7], iters[8]
        ),
    )
}

fn cm(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_complex(m)
}

fn c4_embedding() -> Outcome {
    let mut rng = rng(1004);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let n = 1 + trial % 6;
        let x = random_herm_pd(&mut rng, n, 0.1, 3.0);
        let y = random_herm_pd(&mut rng, n, 0.1, 3.0);
        let embedded = qre_value(&herm_to_real(&cm(&x)).unwrap(), &herm_to_real(&cm(&y)).unwrap()).unwrap();
        worst = worst.max((embedded - 2.0 * complex_qre(&x, &y, 0.0)).abs());
    }
    verdict(worst <= 1e-10, format!("200 Hermitian pairs: |qre(X̄,Ȳ) − 2 qre(X,Y)| ≤ {worst:.1e} (≤1e-10)"))
}

fn projector_pinching(u: &DMatrix<C64>, sizes: &[usize]) -> PinchingMap {
    let mut start = 0;
    let mut out = Vec::new();
    for &s in sizes {
        let cols = u.columns(start, s).into_owned();
        out.push(cm(&(&cols * cols.adjoint())));
        start += s;
    }
    PinchingMap::new(out).unwrap()
}

/// Tr δ ln 𝒵(δ) − Tr 𝒵(δ) ln 𝒵(δ), computed from the projectors directly.
fn pinching_oracle(projectors: &[DMatrix<C64>], delta: &DMatrix<C64>) -> f64 {
    let mut zd = DMatrix::<C64>::zeros(delta.nrows(), delta.ncols());
    for p in projectors {
        zd += p * delta * p;
    }
    let e = nalgebra::SymmetricEigen::new(zd.clone());
    let ln = DMatrix::from_diagonal(&e.eigenvalues.map(|l| C64::new(if l > 1e-14 { l.ln() } else { 0.0 }, 0.0)));
    let ln_zd = &e.eigenvectors * ln * e.eigenvectors.adjoint();
    ((delta - &zd) * ln_zd).trace().re.abs()
}

fn c5_pinching_identity() -> Outcome {
    let mut rng = rng(1005);
    let (mut core_worst, mut oracle_worst) = (0.0f64, 0.0f64);
    for trial in 0..100 {
        let k = 2 + trial % 4;
        let u = if trial % 2 == 0 { DMatrix::identity(k, k) } else { random_unitary(&mut rng, k) };
        let sizes: Vec<usize> = if trial % 2 == 0 {
            vec![1; k]
        } else {
            let first = 1 + trial % (k - 1);
            vec![first, k - first]
        };
        let p = projector_pinching(&u, &sizes);
        let mut start = 0;
        let projectors: Vec<DMatrix<C64>> = sizes
            .iter()
            .map(|&s| {
                let cols = u.columns(start, s).into_owned();
                start += s;
                &cols * cols.adjoint()
            })
            .collect();
        // every fourth input is rank deficient
        let lo = if trial % 4 == 3 { 0.0 } else { 0.05 };
        let mut delta = random_herm_pd(&mut rng, k, lo, 2.0);
        if trial % 4 == 3 {
            let w = random_unitary(&mut rng, k);
            let mut lam = DVector::from_fn(k, |_, _| C64::new(rng.random_range(0.1..2.0), 0.0));
            lam[0] = C64::new(0.0, 0.0);
            delta = &w * DMatrix::from_diagonal(&lam) * w.adjoint();
            delta = (&delta + delta.adjoint()) * C64::new(0.5, 0.0);
        }
        core_worst = core_worst.max(pinching_identity_check(&p, &cm(&delta)).unwrap());
        oracle_worst = oracle_worst.max(pinching_oracle(&projectors, &delta));
    }
    verdict(
        core_worst <= 1e-10 && oracle_worst <= 1e-10,
        format!("100 inputs, diagonal and block pinchings: core {core_worst:.1e}, oracle {oracle_worst:.1e} (≤1e-10)"),
    )
}

/// Output on span{w0, w2} of a random unitary W, pinching blocks {w0, w1}
/// and {w2, w3}: 𝒵(𝒢(I)) has rank 2 of 4.
fn rank_deficient_toy(seed: u64) -> (KrausChannel, PinchingMap) {
    let mut r = rng(seed);
    let w = random_unitary(&mut r, 4);
    let n = 3;
    let mut ops = Vec::new();
    for _ in 0..2 {
        let small = DMatrix::from_fn(2, n, |_, _| C64::new(gaussian(&mut r), gaussian(&mut r)));
        let mut k = DMatrix::<C64>::zeros(4, n);
        k.set_row(0, &small.row(0));
        k.set_row(2, &small.row(1));
        ops.push(&w * k);
    }
    let mut s = DMatrix::<C64>::zeros(4, 4);
    for o in &ops {
        s += o * o.adjoint();
    }
    let lmax = nalgebra::SymmetricEigen::new(s).eigenvalues.max();
    let scale = C64::new(0.9 / lmax.sqrt(), 0.0);
    let ch = KrausChannel::new(ops.iter().map(|o| cm(&(o * scale))).collect()).unwrap();
    (ch, projector_pinching(&w, &[2, 2]))
}

fn c6_channel_reduction() -> Outcome {
    let (mut obj_worst, mut null_worst) = (0.0f64, 0.0f64);
    let mut dims_ok = true;
    for seed in 0..10 {
        let (ch, z) = rank_deficient_toy(1100 + seed);
        let red = reduce_dimension(&ch, &z, REDUCTION_EPS).unwrap();
        dims_ok &= red.reduced_dim() == 2;
        null_worst = null_worst.max(red.nullspace_residual(&ch, &z));
        let mut r = rng(1200 + seed);
        for _ in 0..5 {
            let rho = random_herm_pd(&mut r, 3, 0.0, 1.0);
            let g = apply_g(&ch, &cm(&rho)).unwrap();
            let zg = apply_z(&z, &g).unwrap();
            let full = complex_qre(&g.to_complex(), &zg.to_complex(), 1e-12);
            let reduced = complex_qre(
                &red.apply_g(&cm(&rho)).unwrap().to_complex(),
                &red.apply_zg(&cm(&rho)).unwrap().to_complex(),
                1e-12,
            );
            obj_worst = obj_worst.max((full - reduced).abs());
        }
    }
    verdict(
        dims_ok && obj_worst <= 1e-9 && null_worst <= 1e-8,
        format!(
            "10 channels 4→2: objective drift {obj_worst:.1e} (≤1e-9), nullspace residual {null_worst:.1e} (≤1e-8), ranks {}",
            if dims_ok { "ok" } else { "wrong" }
        ),
    )
}

struct NearcorrRun {
    n: usize,
    objective: f64,
    obj_err: f64,
    y_err: f64,
    iterations: usize,
    seconds: f64,
    optimal: bool,
}

fn nearcorr_run(n: usize) -> NearcorrRun {
    let m = DMatrix::identity(n, n) * 2.0;
    let started = Instant::now();
    let model = families::nearcorr(&m).unwrap();
    let x0 = families::nearcorr_start(&m).unwrap();
    let res = ipm::solve(&model, &x0, &opts()).unwrap();
    let seconds = started.elapsed().as_secs_f64();
    let y = families::nearcorr_matrix(&res.x, n);
    NearcorrRun {
        n,
        objective: res.objective,
        obj_err: (res.objective - 2.0 * n as f64 * std::f64::consts::LN_2).abs(),
        y_err: (y - DMatrix::<f64>::identity(n, n)).norm(),
        iterations: res.iterations,
        seconds,
        optimal: res.status == Status::Optimal,
    }
}

/// min over a grid of 3×3 correlation matrices of qre(2I, Y).
fn nearcorr3_grid() -> f64 {
    let mut best = f64::INFINITY;
    let two_i = DMatrix::identity(3, 3) * 2.0;
    let steps = 40;
    for i in -steps..=steps {
        for j in -steps..=steps {
            for k in -steps..=steps {
                let (a, b, c) = (i as f64 / 41.0, j as f64 / 41.0, k as f64 / 41.0);
                let y = DMatrix::from_row_slice(3, 3, &[1.0, a, b, a, 1.0, c, b, c, 1.0]);
                if lambda_min(&y) <= 1e-9 {
                    continue;
                }
                best = best.min(qre_oracle(&two_i, &y));
            }
        }
    }
    best
}

fn c7_nearcorr(runs: &[NearcorrRun]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        ok &= r.optimal && r.obj_err <= 1e-6 && r.y_err <= 1e-5;
        parts.push(format!("n={} obj err {:.1e} ‖Y−I‖ {:.1e} {:.1}s", r.n, r.obj_err, r.y_err, r.seconds));
    }
    let big = runs.iter().find(|r| r.n == 25).map(|r| r.seconds).unwrap_or(f64::INFINITY);
    ok &= big <= 60.0;
    let small = nearcorr_run(3);
    let grid = nearcorr3_grid();
    let solved = small.objective;
    let brute_ok = solved <= grid + 1e-6 && (grid - 6.0 * std::f64::consts::LN_2).abs() <= 1e-12;
    ok &= brute_ok;
    parts.push(format!("n=3 brute force grid min {grid:.6} vs solver {solved:.6}"));
    verdict(ok, format!("{} (tol 1e-6, 1e-5, ≤60s at n=25)", parts.join("; ")))
}

fn c8_iterations(runs: &[NearcorrRun]) -> Outcome {
    match runs.iter().find(|r| r.n == 25) {
        Some(r) => verdict(r.iterations <= 60, format!("n=25 took {} outer iterations (≤60)", r.iterations)),
        None => Outcome::Skip("no n=25 run".into()),
    }
}

fn c9_twophase() -> Outcome {
    let target = |r: usize| -(r as f64) / std::f64::consts::E;
    let mut ok = true;
    let mut parts = Vec::new();
    let (mut obj_worst, mut agree_worst, mut feas_worst) = (0.0f64, 0.0f64, 0.0f64);
    for (n, r) in [(25, 5), (25, 10), (50, 5), (50, 10)] {
        let model = families::twophase_synthetic(n, r).unwrap();
        let mut objs = Vec::new();
        for method in [Phase1Method::Primal, Phase1Method::Dual] {
            let started = Instant::now();
            match two_phase_solve(&model, method, &opts(), 1) {
                Ok((res, rep)) => {
                    obj_worst = obj_worst.max((res.objective - target(r)).abs());
                    feas_worst = feas_worst.max(feasibility_violation(&model, &res.x));
                    ok &= res.status == Status::Optimal && rep.face_rank == r;
                    objs.push(res.objective);
                    parts.push(format!(
                        "{n}/{r} {method:?} rank {} {:.1}s",
                        rep.face_rank,
                        started.elapsed().as_secs_f64()
                    ));
                }
                Err(e) => {
                    ok = false;
                    parts.push(format!("{n}/{r} {method:?} error {e}"));
                }
            }
        }
        if objs.len() == 2 {
            agree_worst = agree_worst.max((objs[0] - objs[1]).abs());
        }
    }
    ok &= obj_worst <= 1e-6 && agree_worst <= 1e-6 && feas_worst <= 1e-8;
    verdict(
        ok,
        format!(
            "obj vs −r/e {obj_worst:.1e} (≤1e-6), primal/dual gap {agree_worst:.1e} (≤1e-6), feasibility {feas_worst:.1e} (≤1e-8); {}",
            parts.join(", ")
        ),
    )
}

fn c9_soft() -> Outcome {
    let model = families::twophase_synthetic(25, 5).unwrap();
    match ipm::initial_point(&model) {
        Ok(_) => Outcome::Fail("synthetic family unexpectedly admits a one-phase start".into()),
        Err(e) => Outcome::Skip(format!("n/a: one-phase solver has no interior start ({e})")),
    }
}

fn c10_sqre() -> Outcome {
    let tol = opts().tol;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [10, 25] {
        let mut rng = ChaCha8Rng::seed_from_u64(1010 + n as u64);
        let a_list: Vec<DMatrix<f64>> = (0..n).map(|_| families::sparse_pair_matrix(&mut rng, n)).collect();
        let b_list: Vec<DMatrix<f64>> = (0..n).map(|_| families::sparse_pair_matrix(&mut rng, n)).collect();
        let id = DMatrix::identity(n, n);
        let lower = vec![-2.0; n];
        let at = |x: &DVector<f64>, list: &[DMatrix<f64>]| {
            let mut m = id.clone();
            for (i, a) in list.iter().enumerate() {
                m += a * x[1 + i];
            }
            m
        };
        let q_model = families::qre_pair(&id, &a_list, &id, &b_list, &lower, false).unwrap();
        let s_model = families::qre_pair(&id, &a_list, &id, &b_list, &lower, true).unwrap();
        let q_res = ipm::solve(&q_model, &families::qre_pair_start(&id, &id, n, false).unwrap(), &opts()).unwrap();
        let s_res = ipm::solve(&s_model, &families::qre_pair_start(&id, &id, n, true).unwrap(), &opts()).unwrap();
        ok &= q_res.status == Status::Optimal && s_res.status == Status::Optimal;
        let (xs, ys) = (at(&s_res.x, &a_list), at(&s_res.x, &b_list));
        let sqre = qre_oracle(&xs, &ys) + qre_oracle(&ys, &xs);
        let epi_gap = (s_res.x[0] - sqre).abs();
        ok &= epi_gap <= 10.0 * tol * s_res.x[0].abs().max(1.0);
        let rev = qre_oracle(&ys, &xs);
        let ordering = if rev >= 0.0 {
            let good = s_res.objective >= q_res.objective - tol;
            ok &= good;
            format!("sqre {:.3e} ≥ qre {:.3e}: {good}", s_res.objective, q_res.objective)
        } else {
            "ordering not asserted (qre(Y,X) < 0)".to_string()
        };
        parts.push(format!("n={n} |t − sqre| {epi_gap:.1e}, {ordering}"));
    }
    verdict(ok, format!("{} (epigraph ≤10·tol)", parts.join("; ")))
}

fn c11_diagonal_reduction() -> Outcome {
    let mut rng = rng(1011);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let x: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(0.05..3.0));
        let y: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(0.05..3.0));
        let kl: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * (a / b).ln()).sum();
        let q = qre_value(&DMatrix::from_diagonal(&x), &DMatrix::from_diagonal(&y)).unwrap();
        worst = worst.max((q - kl).abs());
    }
    verdict(worst <= 1e-12, format!("1000 diagonal pairs: |qre − KL| ≤ {worst:.1e} (≤1e-12)"))
}

/// min cᵀx over {A x ≤ b} by enumerating basic solutions.
fn lp_vertex_min(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let (m, k) = a.shape();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sub = DMatrix::from_fn(k, k, |i, j| a[(idx[i], j)]);
        let rhs = DVector::from_fn(k, |i, _| b[idx[i]]);
        if sub.determinant().abs() > 1e-10 {
            if let Some(x) = sub.lu().solve(&rhs) {
                if (a * &x - b).max() <= 1e-9 {
                    best = best.min(c.dot(&x));
                }
            }
        }
        // next k-subset in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn c12_lp() -> Outcome {
    let mut rng = rng(1012);
    let mut worst = 0.0f64;
    let mut ok = true;
    for trial in 0..20 {
        let k = 2 + trial % 2;
        let extra = 3;
        let m = 2 * k + extra;
        let mut a = DMatrix::zeros(m, k);
        let mut b = DVector::zeros(m);
        for j in 0..k {
            let bound = rng.random_range(1.0..3.0);
            a[(2 * j, j)] = 1.0;
            a[(2 * j + 1, j)] = -1.0;
            b[2 * j] = bound;
            b[2 * j + 1] = bound;
        }
        for i in 2 * k..m {
            for j in 0..k {
                a[(i, j)] = gaussian(&mut rng);
            }
            b[i] = rng.random_range(0.5..1.5);
        }
        let c = DVector::from_fn(k, |_, _| gaussian(&mut rng));
        let model = Model::new(c.clone(), vec![ConeBlock::new(ConeKind::Orthant(m), a.clone(), b.clone()).unwrap()]).unwrap();
        let res = ipm::solve(&model, &DVector::zeros(k), &opts()).unwrap();
        ok &= res.status == Status::Optimal;
        let exact = lp_vertex_min(&a, &b, &c);
        worst = worst.max((res.objective - exact).abs());
    }
    verdict(ok && worst <= 1e-6, format!("20 random LPs in 2–3 variables: max |ipm − vertex| {worst:.1e} (≤1e-6)"))
}

fn c13_qkd_toys() -> Outcome {
    let delta_ec = 0.1;
    let ident = qkd_rate(&toy_protocol(None, delta_ec).unwrap(), &opts()).unwrap();
    let ident_err = (ident.rate + delta_ec).abs();
    let coh = qkd_rate(&toy_protocol(Some(0.25), 0.0).unwrap(), &opts()).unwrap();
    // ρ = [[a, 1/4 + ιs], [1/4 − ιs, 1 − a]]; qre(ρ, Diag ρ) = −H(λ) + H(a)
    let ent = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    let steps = 1000;
    let mut grid = f64::INFINITY;
    for i in 1..steps {
        let a = i as f64 / steps as f64;
        for j in -steps / 2..=steps / 2 {
            let s = j as f64 / steps as f64;
            let off2 = 0.0625 + s * s;
            let disc = ((a - 0.5).powi(2) * 4.0 + 4.0 * off2).sqrt();
            let (l1, l2) = ((1.0 + disc) / 2.0, (1.0 - disc) / 2.0);
            if l2 <= 0.0 {
                continue;
            }
            grid = grid.min(ent(a) + ent(1.0 - a) - ent(l1) - ent(l2));
        }
    }
    let coh_err = (coh.p_opt - grid).abs();
    verdict(
        ident_err <= 1e-7 && coh_err <= 1e-3 && coh.p_opt <= grid + 1e-9,
        format!(
            "identity rate err {ident_err:.1e} (≤1e-7); coherence 0.25 p {:.6} vs grid {grid:.6} (≤1e-3)",
            coh.p_opt
        ),
    )
}

fn bb84_files() -> Vec<PathBuf> {
    let dir = std::env::var_os("QRE_BB84_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/bb84"));
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
                    name.starts_with("pmBB84") && name.ends_with(".json")
                })
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn c14_bb84() -> Outcome {
    let files = bb84_files();
    if files.is_empty() {
        return Outcome::Skip("no pmBB84*.json protocol files (set QRE_BB84_DIR)".into());
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for f in &files {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        match load_protocol(f).and_then(|p| qkd_rate(&p, &opts())) {
            Ok(out) => {
                let r = &out.report;
                let good = (r.n, r.k, r.k_bar) == (32, 8, 4) && r.status == "optimal";
                ok &= good;
                parts.push(format!("{name}: (n,k)=({},{}) k̄={} rate {:.6}", r.n, r.k, r.k_bar, out.rate));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(ok, parts.join("; "))
}

// ---------------------------------------------------------------------------

fn run(id: &str, grade: Grade, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check))
        .unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Outcome::Fail(format!("panicked: {msg}"))
        });
    let grade_name = match grade {
        Grade::Hard => "hard",
        Grade::Soft => "soft",
        Grade::Conditional => "cond",
    };
    let (tag, detail, hard_fail) = match outcome {
        Outcome::Pass(d) => ("PASS", d, false),
        Outcome::Fail(d) => ("FAIL", d, grade == Grade::Hard),
        Outcome::Skip(d) => ("SKIP", d, false),
    };
    println!(
        "acceptance {id:<4} [{grade_name}] {tag} {name}: {detail} [{:.1}s]",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stdout().flush();
    hard_fail
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    let mut record = |id: &'static str, hard_fail: bool| {
        if hard_fail {
            failed.push(id);
        }
    };
    record("1", run("1", Grade::Hard, "barrier derivatives vs finite differences", c1_derivatives));
    record("2", run("2", Grade::Hard, "ln divided difference near the diagonal", c2_divided_difference));
    record("3", run("3", Grade::Hard, "Newton system round trip", c3_newton_round_trip));
    record("4", run("4", Grade::Hard, "complex-to-real embedding", c4_embedding));
    record("5", run("5", Grade::Hard, "pinching trace identity", c5_pinching_identity));
    record("6", run("6", Grade::Hard, "channel dimension reduction", c6_channel_reduction));
    let runs: Vec<NearcorrRun> = [5, 10, 25].into_iter().map(nearcorr_run).collect();
    record("7", run("7", Grade::Hard, "nearest correlation, M = 2I", || c7_nearcorr(&runs)));
    record("8", run("8", Grade::Soft, "nearest correlation iteration count", || c8_iterations(&runs)));
    record("9", run("9", Grade::Hard, "two-phase synthetic family", c9_twophase));
    record("9s", run("9s", Grade::Soft, "two-phase vs one-phase iterations", c9_soft));
    record("10", run("10", Grade::Hard, "symmetrized pair family", c10_sqre));
    record("11", run("11", Grade::Hard, "diagonal inputs reduce to KL", c11_diagonal_reduction));
    record("12", run("12", Grade::Hard, "LP reduction vs vertex enumeration", c12_lp));
    record("13", run("13", Grade::Hard, "QKD toy protocols", c13_qkd_toys));
    record("14", run("14", Grade::Conditional, "prepare-and-measure BB84 reduction", c14_bb84));
    if failed.is_empty() {
        println!("acceptance: all hard criteria passed");
    } else {
        println!("acceptance: hard failures: {}", failed.join(", "));
        std::process::exit(1);
    }
}
