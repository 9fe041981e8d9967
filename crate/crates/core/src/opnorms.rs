//! Operator-norm computation and certification.
//!
//! The central object is the `q -> q*` norm of a PSD matrix, which for
//! `q = infinity` is the Grothendieck-type quantity
//! `||B||_{inf->1} = max_{x in {+-1}^n} x^T B x`. We provide
//! exact brute-force oracles for small instances, an SDP-based
//! estimator producing a certified upper bound (diagonal dual) together with
//! a rounded lower bound and witness, and the approximate separation oracle
//! consumed by the convex-relaxation solvers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::matcore::{sym_eig, Exponent};
use crate::matcore::RobustnessBudget;
use crate::rng::{derive_seed, rng, rng_for};
use crate::Result;

/// Largest `n` for which the `q = inf` sign enumeration is attempted.
pub const ENUM_MAX_N: usize = 20;
/// Below this size (and `q = inf`) the separation oracle is exact.
const SEPARATION_EXACT_N: usize = 16;

// ---------------------------------------------------------------------------
// Vector and entrywise norms
// ---------------------------------------------------------------------------

/// Standard `l_q` norm; `q = inf` returns the max absolute entry.
pub fn vector_norm(v: &DVector<f64>, q: Exponent) -> f64 {
    match q {
        Exponent::Inf => v.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        Exponent::Finite(q) if q == 1.0 => v.iter().map(|x| x.abs()).sum(),
        Exponent::Finite(q) if q == 2.0 => v.norm(),
        Exponent::Finite(q) => {
            let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            // scale for overflow safety
            let s: f64 = v.iter().map(|x| (x.abs() / m).powf(q)).sum();
            m * s.powf(1.0 / q)
        }
    }
}

/// Entrywise `l_q` norm of a matrix (the matrix flattened to a vector).
pub fn entrywise_q_norm(m: &DMatrix<f64>, q: Exponent) -> f64 {
    let v = DVector::from_iterator(m.len(), m.iter().cloned());
    vector_norm(&v, q)
}

// ---------------------------------------------------------------------------
// Gaussian moments and the approximation constant C_G(q)
// ---------------------------------------------------------------------------

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, left, tol / 2.0, depth - 1) + adaptive_simpson(f, m, b, right, tol / 2.0, depth - 1)
}

/// `gamma_p = (E |g|^p)^(1/p)` for `g ~ N(0,1)`, by numerical quadrature.
pub fn gaussian_moment_root(p: f64) -> f64 {
    assert!(p >= 1.0 && p.is_finite());
    let f = |t: f64| t.powf(p) * (-0.5 * t * t).exp();
    let hi = 12.0 + p;
    let whole = simpson(&f, 0.0, hi);
    let integral = adaptive_simpson(&f, 0.0, hi, whole, 1e-13, 40);
    let moment = (2.0 / std::f64::consts::PI).sqrt() * integral;
    moment.powf(1.0 / p)
}

/// Approximation factor `C_G(q)` of the PSD `q -> q*` oracle:
/// `pi/2` at `q = inf`, `1/gamma_{q*}^2` in general.
pub fn grothendieck_constant(q: Exponent) -> f64 {
    match q {
        Exponent::Inf => std::f64::consts::FRAC_PI_2,
        Exponent::Finite(qv) => {
            let q_star = qv / (qv - 1.0);
            let g = gaussian_moment_root(q_star);
            1.0 / (g * g)
        }
    }
}

// ---------------------------------------------------------------------------
// Exact brute-force oracles (small n)
// ---------------------------------------------------------------------------

fn check_enum_size(n: usize) -> Result<()> {
    if n > ENUM_MAX_N {
        return Err(Error::TooLarge(format!(
            "sign enumeration needs n <= {ENUM_MAX_N}, got {n}"
        )));
    }
    Ok(())
}

/// Canonical representative of a sign vector under global flip: the
/// lexicographically smaller of `s` and `-s`.
fn canonical_sign(s: &DVector<f64>) -> DVector<f64> {
    for i in 0..s.len() {
        if s[i] < 0.0 {
            return s.clone();
        }
        if s[i] > 0.0 {
            return -s;
        }
    }
    s.clone()
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for i in 0..a.len() {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

/// Replaces `(best_val, best_wit)` by `(val, wit)` if strictly better, or on
/// a tie (1e-12 relative) if the canonical witness is lexicographically
/// smaller.
fn consider_witness(best_val: &mut f64, best_wit: &mut DVector<f64>, val: f64, wit: &DVector<f64>) {
    if !best_val.is_finite() {
        *best_val = val;
        *best_wit = canonical_sign(wit);
        return;
    }
    let scale = best_val.abs().max(val.abs()).max(1e-300);
    if val > *best_val + 1e-12 * scale {
        *best_val = val;
        *best_wit = canonical_sign(wit);
    } else if (val - *best_val).abs() <= 1e-12 * scale {
        let c = canonical_sign(wit);
        if lex_less(&c, best_wit) {
            *best_wit = c;
        }
    }
}

/// Exhaustive `max_{s in {+-1}^n} s^T X s` for symmetric `X`, with the
/// maximizing sign vector. Gray-code updates keep the cost at `O(2^n n)`.
pub fn exact_psd_quadratic_max(x: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = x.nrows();
    check_enum_size(n)?;
    let mut s = DVector::from_element(n, 1.0);
    let mut t = x * &s; // t = X s
    let mut val = s.dot(&t);
    let mut best_val = val;
    let mut best_wit = canonical_sign(&s);
    // fix s[n-1] = +1: global flip leaves the value unchanged
    let steps: u64 = if n == 1 { 1 } else { 1u64 << (n - 1) };
    for k in 1..steps {
        let j = k.trailing_zeros() as usize;
        let old = s[j];
        val += -4.0 * old * t[j] + 4.0 * x[(j, j)];
        s[j] = -old;
        t.axpy(-2.0 * old, &x.column(j).into_owned(), 1.0);
        consider_witness(&mut best_val, &mut best_wit, val, &s);
    }
    Ok((best_val, best_wit))
}

/// Exhaustive `||M||_{inf->1} = max_{s in {+-1}^m} ||M s||_1` for a general
/// `n x m` matrix.
pub fn exact_inf_to_1(m: &DMatrix<f64>) -> Result<f64> {
    let cols = m.ncols();
    check_enum_size(cols)?;
    let mut s = DVector::from_element(cols, 1.0);
    let mut w = m * &s;
    let mut best = w.iter().map(|x| x.abs()).sum::<f64>();
    let steps: u64 = if cols == 1 { 1 } else { 1u64 << (cols - 1) };
    for k in 1..steps {
        let j = k.trailing_zeros() as usize;
        let old = s[j];
        s[j] = -old;
        w.axpy(-2.0 * old, &m.column(j).into_owned(), 1.0);
        let v = w.iter().map(|x| x.abs()).sum::<f64>();
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Exhaustive `||M||_{2->1} = max_{s} ||M^T s||_2` over `s in {+-1}^n`
/// (orthant enumeration; exact).
pub fn exact_2_to_1(m: &DMatrix<f64>) -> Result<f64> {
    let rows = m.nrows();
    check_enum_size(rows)?;
    let mt = m.transpose();
    let mut s = DVector::from_element(rows, 1.0);
    let mut w = &mt * &s;
    let mut best = w.norm();
    let steps: u64 = if rows == 1 { 1 } else { 1u64 << (rows - 1) };
    for k in 1..steps {
        let j = k.trailing_zeros() as usize;
        let old = s[j];
        s[j] = -old;
        w.axpy(-2.0 * old, &mt.column(j).into_owned(), 1.0);
        best = best.max(w.norm());
    }
    Ok(best)
}

/// Brute-force `||M||_{q->2}` oracle.
///
/// `q = inf` is exact via sign enumeration (requires `n_cols <= 20`).
/// Finite `q` returns a certified lower bound from a direction grid of size
/// `grid_budget` on the `l_q` sphere plus projected-ascent polishing.
pub fn exact_q_to_2_bruteforce(m: &DMatrix<f64>, q: Exponent, grid_budget: usize) -> Result<f64> {
    match q {
        Exponent::Inf => {
            let cols = m.ncols();
            check_enum_size(cols)?;
            let mut s = DVector::from_element(cols, 1.0);
            let mut w = m * &s;
            let mut best = w.norm();
            let steps: u64 = if cols == 1 { 1 } else { 1u64 << (cols - 1) };
            for k in 1..steps {
                let j = k.trailing_zeros() as usize;
                let old = s[j];
                s[j] = -old;
                w.axpy(-2.0 * old, &m.column(j).into_owned(), 1.0);
                best = best.max(w.norm());
            }
            Ok(best)
        }
        Exponent::Finite(qv) => {
            let cols = m.ncols();
            let gram = m.transpose() * m;
            let mut best = 0.0f64;
            let mut r = rng(0x9d2c_5681);
            let ascent = |x0: DVector<f64>| -> f64 {
                let mut x = x0;
                let nq = vector_norm(&x, q);
                if nq == 0.0 {
                    return 0.0;
                }
                x /= nq;
                let mut val = (x.transpose() * &gram * &x)[(0, 0)];
                let mut step = 0.5 / (gram.norm() + 1e-300);
                for _ in 0..200 {
                    let g = &gram * &x;
                    let mut xn = &x + step * 2.0 * &g;
                    let nn = vector_norm(&xn, q);
                    if nn == 0.0 {
                        break;
                    }
                    xn /= nn;
                    let vn = (xn.transpose() * &gram * &xn)[(0, 0)];
                    if vn > val + 1e-15 {
                        val = vn;
                        x = xn;
                    } else {
                        step *= 0.5;
                        if step < 1e-14 {
                            break;
                        }
                    }
                }
                val
            };
            // grid of random directions on the l_q sphere
            for _ in 0..grid_budget {
                let x0 = DVector::from_fn(cols, |_, _| {
                    let g: f64 = r.sample(StandardNormal);
                    let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                    sign * g.abs().powf(2.0 / qv)
                });
                best = best.max(ascent(x0));
            }
            // coordinate directions and sign-pattern style starts
            for i in 0..cols.min(64) {
                let mut x0 = DVector::zeros(cols);
                x0[i] = 1.0;
                best = best.max(ascent(x0));
            }
            best = best.max(ascent(DVector::from_element(cols, 1.0)));
            Ok(best.max(0.0).sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// SDP machinery: Burer-Monteiro primal, diagonal dual certificate, rounding
// ---------------------------------------------------------------------------

/// Result of a norm estimation: a certified sandwich with witness.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    /// Achievable value: the witness attains exactly this on re-evaluation.
    pub lower_bound: f64,
    /// Certified upper bound (diagonal dual feasible point).
    pub upper_bound: f64,
    /// Guaranteed ceiling on `upper_bound / true_value`, i.e. `C_G(q)`.
    pub approx_factor: f64,
    /// The vector achieving `lower_bound` (`||witness||_q <= 1`).
    pub witness: DVector<f64>,
}

/// Separation oracle outcome for the constraint `||X||_{q->q*} <= rhs`.
#[derive(Debug, Clone)]
pub enum SeparationResult {
    /// Certified `||X||_{q->q*} <= bound`.
    Certified(f64),
    /// A violated valid inequality: `<X, Z> > rhs` while `<M, Z> <= rhs`
    /// for every `M` with `||M||_{q->q*} <= rhs`.
    Hyperplane { z: DMatrix<f64>, rhs: f64 },
}

/// Eigen-clips a nearly-PSD symmetric matrix. Eigenvalues in
/// `[-1e-6 * ||B||, 0)` are clipped to zero; anything more negative is an
/// error.
pub fn clip_psd(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let bsym = 0.5 * (b + b.transpose());
    let (evals, evecs) = sym_eig(&bsym);
    let scale = evals.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return Ok(bsym);
    }
    let tol = 1e-6 * scale;
    let min_eig = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -tol {
        return Err(Error::NotPsd { min_eig, tol });
    }
    if min_eig >= 0.0 {
        return Ok(bsym);
    }
    let vals = DVector::from_fn(evals.len(), |i, _| evals[i].max(0.0));
    Ok(&evecs * DMatrix::from_diagonal(&vals) * evecs.transpose())
}

fn row_normalize(v: &mut DMatrix<f64>, r: &mut impl Rng) {
    for i in 0..v.nrows() {
        let norm = v.row(i).norm();
        if norm < 1e-300 {
            for j in 0..v.ncols() {
                v[(i, j)] = r.sample::<f64, _>(StandardNormal);
            }
            let n2 = v.row(i).norm();
            let inv = 1.0 / n2;
            for j in 0..v.ncols() {
                v[(i, j)] *= inv;
            }
        } else {
            let inv = 1.0 / norm;
            for j in 0..v.ncols() {
                v[(i, j)] *= inv;
            }
        }
    }
}

/// Projected gradient ascent on `tr(V^T B V)` with unit-norm rows
/// (the Grothendieck SDP `max <B, Y>, diag(Y) = 1, Y >= 0` in factored form).
fn bm_ascent(b: &DMatrix<f64>, p: usize, seed: u64, iters: usize) -> DMatrix<f64> {
    let n = b.nrows();
    let mut r = rng(seed);
    let mut v = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    row_normalize(&mut v, &mut r);
    let bnorm = b.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1e-300) * n as f64;
    let mut step = 1.0 / bnorm;
    let mut f = (b * &v).dot(&v);
    for _ in 0..iters {
        let g = b * &v; // gradient of tr(V^T B V) is 2 B V; factor folded into step
        let mut vn = &v + 2.0 * step * &g;
        row_normalize(&mut vn, &mut r);
        let fn_ = (b * &vn).dot(&vn);
        if fn_ >= f - 1e-14 * f.abs() {
            let gain = fn_ - f;
            v = vn;
            f = fn_;
            step *= 1.25;
            if gain <= 1e-13 * f.abs().max(1e-12) {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
    }
    v
}

/// Smallest eigenvalue and eigenvector of a symmetric matrix.
fn min_eig(sym: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eig(sym);
    let mut idx = 0;
    for i in 1..vals.len() {
        if vals[i] < vals[idx] {
            idx = i;
        }
    }
    (vals[idx], vecs.column(idx).into_owned())
}

/// Dual norm exponent for the diagonal certificate: `(q/2)*`, with the
/// convention that `q = inf` gives 1.
fn diag_dual_exponent(q: Exponent) -> Exponent {
    match q {
        Exponent::Inf => Exponent::Finite(1.0),
        Exponent::Finite(qv) => {
            let h = qv / 2.0;
            Exponent::new(h / (h - 1.0)).unwrap_or(Exponent::Inf)
        }
    }
}

/// Value of a diagonal dual certificate `d`: `||d||_{(q/2)*}`; for any
/// `diag(d) >= B` this upper-bounds `||B||_{q->q*}`.
fn dual_objective(d: &DVector<f64>, q: Exponent) -> f64 {
    vector_norm(d, diag_dual_exponent(q))
}

/// Repairs `d` so that `diag(d) - B >= 0` holds with a small margin, by a
/// uniform shift (exact: shifting `d` by `t` shifts the minimum eigenvalue
/// by `t`).
fn repair_dual(b: &DMatrix<f64>, d: &mut DVector<f64>, scale: f64) {
    let gap = DMatrix::from_diagonal(d) - b;
    let (lmin, _) = min_eig(&gap);
    if lmin < 0.0 {
        let shift = -lmin + 1e-12 * scale.max(1.0);
        for i in 0..d.len() {
            d[i] += shift;
        }
    }
}

/// One coordinate-descent sweep on the diagonal dual: each `d_i` is set to
/// its minimum feasible value given the others (Schur complement), plus a
/// tiny slack to preserve strict feasibility for later coordinates.
fn dual_coordinate_sweep(b: &DMatrix<f64>, d: &mut DVector<f64>, scale: f64) {
    let n = b.nrows();
    let slack = 1e-10 * scale.max(1.0);
    for i in 0..n {
        // minimal d_i with [[d_i - b_ii, -b_i'], [-b_i, D' - B']] >= 0
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        if others.is_empty() {
            d[i] = b[(0, 0)] + slack;
            continue;
        }
        let mut sub = DMatrix::zeros(n - 1, n - 1);
        let mut col = DVector::zeros(n - 1);
        for (a, &ja) in others.iter().enumerate() {
            col[a] = b[(ja, i)];
            for (c, &jc) in others.iter().enumerate() {
                sub[(a, c)] = if ja == jc { d[ja] - b[(ja, jc)] } else { -b[(ja, jc)] };
            }
        }
        // jitter for numerical solvability
        for a in 0..n - 1 {
            sub[(a, a)] += 1e-12 * scale.max(1.0);
        }
        if let Some(chol) = sub.clone().cholesky() {
            let z = chol.solve(&col);
            let candidate = b[(i, i)] + col.dot(&z) + slack;
            if candidate < d[i] {
                d[i] = candidate;
            }
        }
    }
}

/// Certified upper bound on `||B||_{q->q*}` for PSD `B`: a feasible diagonal
/// dual built from the complementarity relation `d_i = (B Y)_ii` at the
/// Burer-Monteiro primal `Y = V V^T`, repaired to exact feasibility, and
/// refined by coordinate descent on small instances.
fn dual_upper_bound(b: &DMatrix<f64>, v: &DMatrix<f64>, q: Exponent) -> (f64, DVector<f64>) {
    let n = b.nrows();
    let scale = b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let w = b * v;
    let mut d = DVector::from_fn(n, |i, _| w.row(i).dot(&v.row(i)));
    repair_dual(b, &mut d, scale);
    let mut best = d.clone();
    let mut best_val = dual_objective(&best, q);

    // fallback start: lambda_max * 1 is always feasible
    let lam_max = {
        let (vals, _) = sym_eig(b);
        vals.iter().cloned().fold(0.0f64, f64::max)
    };
    let mut d2 = DVector::from_element(n, lam_max + 1e-12 * scale.max(1.0));

    if n <= 60 {
        for _ in 0..2 {
            dual_coordinate_sweep(b, &mut d, scale);
            dual_coordinate_sweep(b, &mut d2, scale);
        }
        repair_dual(b, &mut d, scale);
        repair_dual(b, &mut d2, scale);
        for cand in [&d, &d2] {
            let val = dual_objective(cand, q);
            if val < best_val {
                best_val = val;
                best = cand.clone();
            }
        }
    } else {
        let v2 = dual_objective(&d2, q);
        if v2 < best_val {
            best_val = v2;
            best = d2;
        }
    }
    (best_val, best)
}

/// Gaussian rounding of the factored SDP solution into a feasible witness on
/// the unit `l_q` ball; returns the best of `rounds` seeded draws.
fn gaussian_rounding(
    b: &DMatrix<f64>,
    v: &DMatrix<f64>,
    q: Exponent,
    rounds: usize,
    seed: u64,
) -> (f64, DVector<f64>) {
    let n = b.nrows();
    let p = v.ncols();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_wit = DVector::from_element(n, 1.0);
    for round in 0..rounds.max(1) {
        let mut r = rng_for(seed, round as u64);
        let g = DVector::from_fn(p, |_, _| r.sample::<f64, _>(StandardNormal));
        let vg = v * &g;
        let x = match q {
            Exponent::Inf => DVector::from_fn(n, |i, _| if vg[i] >= 0.0 { 1.0 } else { -1.0 }),
            Exponent::Finite(qv) => {
                let q_star = qv / (qv - 1.0);
                let mut raw =
                    DVector::from_fn(n, |i, _| vg[i].signum() * vg[i].abs().powf(q_star - 1.0));
                let nq = vector_norm(&raw, q);
                if nq > 0.0 {
                    raw /= nq;
                }
                raw
            }
        };
        let val = (x.transpose() * b * &x)[(0, 0)];
        consider_witness(&mut best_val, &mut best_wit, val, &x);
    }
    (best_val, best_wit)
}

/// SDP-based estimator of `||B||_{q->q*}` for PSD `B` (Grothendieck-type):
/// a certified upper bound from the diagonal dual and a witness lower bound
/// from Gaussian rounding, with guaranteed ratio at most `C_G(q)`
/// (`pi/2` at `q = inf`).
pub fn q_to_qstar_psd_oracle(
    b: &DMatrix<f64>,
    q: Exponent,
    rounds: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if b.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch("psd oracle needs a square matrix".into()));
    }
    if q.value() < 2.0 {
        return Err(Error::InvalidParams("psd oracle needs q >= 2".into()));
    }
    let b = clip_psd(b)?;
    let n = b.nrows();
    let approx = grothendieck_constant(q);
    let scale = b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return Ok(NormEstimate {
            lower_bound: 0.0,
            upper_bound: 0.0,
            approx_factor: approx,
            witness: DVector::zeros(n),
        });
    }

    // rank-1 PSD has a closed form: max over the q-ball of (v . x)^2
    // is ||v||_{q*}^2, achieved by the dual-norm witness
    {
        let (evals, evecs) = sym_eig(&b);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
        let top = evals[order[0]];
        let second = if n > 1 { evals[order[1]].max(0.0) } else { 0.0 };
        if top > 0.0 && second <= 1e-12 * top {
            let v = evecs.column(order[0]).into_owned();
            let witness = match q {
                Exponent::Inf => {
                    canonical_sign(&DVector::from_fn(n, |i, _| if v[i] >= 0.0 { 1.0 } else { -1.0 }))
                }
                Exponent::Finite(qv) => {
                    let q_star = qv / (qv - 1.0);
                    let mut w =
                        DVector::from_fn(n, |i, _| v[i].signum() * v[i].abs().powf(q_star - 1.0));
                    let nq = vector_norm(&w, q);
                    if nq > 0.0 {
                        w /= nq;
                    }
                    w
                }
            };
            let value = top * witness.dot(&v).powi(2);
            return Ok(NormEstimate {
                lower_bound: value,
                upper_bound: value * (1.0 + 1e-12),
                approx_factor: approx,
                witness,
            });
        }
    }

    let p = ((2.0 * n as f64).sqrt().ceil() as usize + 1).clamp(2, n.max(2)).min(if n > 96 { 10 } else { usize::MAX });
    let restarts = if n <= 30 {
        4
    } else if n <= 96 {
        2
    } else {
        1
    };
    let bm_iters = if n <= 96 { 600 } else { 180 };
    let mut best_v: Option<DMatrix<f64>> = None;
    let mut best_f = f64::NEG_INFINITY;
    for k in 0..restarts {
        let v = bm_ascent(&b, p, derive_seed(seed, 1000 + k as u64), bm_iters);
        let f = (&b * &v).dot(&v);
        if f > best_f {
            best_f = f;
            best_v = Some(v);
        }
    }
    let v = best_v.expect("at least one restart");

    let (mut upper, _dual) = dual_upper_bound(&b, &v, q);
    let (mut lower, mut witness) = gaussian_rounding(&b, &v, q, rounds, seed);

    if lower < 0.0 {
        // PSD value at any point is >= 0; keep the witness but clamp
        lower = 0.0;
        witness = DVector::zeros(n);
    }
    // re-evaluate the witness so the invariant holds exactly
    if witness.norm() > 0.0 {
        lower = (witness.transpose() * &b * &witness)[(0, 0)];
    }
    if upper < lower {
        upper = lower;
    }
    if !upper.is_finite() || !lower.is_finite() {
        return Err(Error::SolverFailure("norm oracle produced non-finite bounds".into()));
    }
    Ok(NormEstimate { lower_bound: lower, upper_bound: upper, approx_factor: approx, witness })
}

/// Randomized estimator of `||M||_{q->2}` with witness, via
/// `||M||_{q->2}^2 = ||M^T M||_{q->q*}`.
pub fn q_to_2_lower_bound(m: &DMatrix<f64>, q: Exponent, rounds: usize, seed: u64) -> Result<NormEstimate> {
    if q.value() < 2.0 {
        return Err(Error::InvalidParams("q_to_2 estimation needs q >= 2".into()));
    }
    let gram = m.transpose() * m;
    let est = q_to_qstar_psd_oracle(&gram, q, rounds, seed)?;
    let witness = est.witness.clone();
    let lower = if witness.norm() > 0.0 { (m * &witness).norm() } else { 0.0 };
    Ok(NormEstimate {
        lower_bound: lower,
        upper_bound: est.upper_bound.max(0.0).sqrt().max(lower),
        approx_factor: est.approx_factor.sqrt(),
        witness,
    })
}

/// Deterministic local search for `max_s s^T X s` over sign vectors on a
/// PSD matrix: power iteration seeds `s = sign(v_top)`, then monotone
/// `s <- sign(X s)` updates (each strictly improves the quadratic form on
/// PSD inputs). A fast screening device, not a certified bound.
pub fn sign_quadratic_heuristic(x: &DMatrix<f64>, sweeps: usize) -> (f64, DVector<f64>) {
    let n = x.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 5) as f64 * 0.1);
    for _ in 0..40 {
        let w = x * &v;
        let nn = w.norm();
        if nn < 1e-300 {
            return (0.0, DVector::from_element(n, 1.0));
        }
        v = w / nn;
    }
    let mut s = DVector::from_fn(n, |i, _| if v[i] >= 0.0 { 1.0 } else { -1.0 });
    let mut val = (s.transpose() * x * &s)[(0, 0)];
    for _ in 0..sweeps {
        let xs = x * &s;
        let s_new = DVector::from_fn(n, |i, _| if xs[i] >= 0.0 { 1.0 } else { -1.0 });
        let val_new = (s_new.transpose() * x * &s_new)[(0, 0)];
        if val_new <= val + 1e-15 * val.abs() {
            break;
        }
        val = val_new;
        s = s_new;
    }
    (val, s)
}

/// Multi-start variant of [`sign_quadratic_heuristic`]: runs the monotone
/// sign iteration from the signs of the top eigenvector and the
/// largest-diagonal columns, returning distinct local maxima sorted by
/// value (descending).
pub fn sign_quadratic_multi(
    x: &DMatrix<f64>,
    sweeps: usize,
    starts: usize,
) -> Vec<(f64, DVector<f64>)> {
    let n = x.nrows();
    let polish = |mut s: DVector<f64>| -> (f64, DVector<f64>) {
        let mut val = (s.transpose() * x * &s)[(0, 0)];
        for _ in 0..sweeps {
            let xs = x * &s;
            let s_new = DVector::from_fn(n, |i, _| if xs[i] >= 0.0 { 1.0 } else { -1.0 });
            let val_new = (s_new.transpose() * x * &s_new)[(0, 0)];
            if val_new <= val + 1e-15 * val.abs() {
                break;
            }
            val = val_new;
            s = s_new;
        }
        (val, canonical_sign(&s))
    };
    let mut out: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut push = |cand: (f64, DVector<f64>)| {
        if !out.iter().any(|(_, s)| s == &cand.1) {
            out.push(cand);
        }
    };
    // start 1: top eigenvector signs (power iteration)
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 5) as f64 * 0.1);
    for _ in 0..40 {
        let w = x * &v;
        let nn = w.norm();
        if nn < 1e-300 {
            return vec![(0.0, DVector::from_element(n, 1.0))];
        }
        v = w / nn;
    }
    push(polish(DVector::from_fn(n, |i, _| if v[i] >= 0.0 { 1.0 } else { -1.0 })));
    // further starts: signs of the largest-diagonal columns
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[(b, b)].partial_cmp(&x[(a, a)]).unwrap());
    for &j in idx.iter().take(starts.saturating_sub(1)) {
        let col = x.column(j);
        push(polish(DVector::from_fn(n, |i, _| if col[i] >= 0.0 { 1.0 } else { -1.0 })));
    }
    out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    out
}

/// Approximate separation oracle for `||X||_{q->q*} <= rhs` over symmetric
/// near-PSD `X` (eigenvalues in `[-1e-6, 1 + 1e-6]`).
///
/// `Certified(b)` certifies `||X||_{q->q*} <= b`; when the true norm is at
/// most `rhs` the certificate satisfies `b <= C_G(q) * rhs` (exactly `b =
/// true value` on small `q = inf` instances, where the oracle enumerates).
/// `Hyperplane` returns `Z = x x^T` with `||x||_q <= 1` and `<X, Z> > rhs`;
/// every `M` with `||M||_{q->q*} <= rhs` satisfies `<M, Z> <= rhs`.
pub fn norm_separation_oracle(
    x: &DMatrix<f64>,
    budget: &RobustnessBudget,
    rhs: f64,
    rounds: usize,
    seed: u64,
) -> Result<SeparationResult> {
    let q = budget.q();
    let n = x.nrows();
    let xc = clip_psd(x)?;
    if q.is_inf() && n <= SEPARATION_EXACT_N {
        let (val, wit) = exact_psd_quadratic_max(&xc)?;
        if val > rhs {
            let z = &wit * wit.transpose();
            return Ok(SeparationResult::Hyperplane { z, rhs });
        }
        return Ok(SeparationResult::Certified(val.max(0.0)));
    }
    let est = q_to_qstar_psd_oracle(&xc, q, rounds, seed)?;
    if est.lower_bound > rhs {
        let z = &est.witness * est.witness.transpose();
        return Ok(SeparationResult::Hyperplane { z, rhs });
    }
    // one retry with more rounding effort when the sandwich is inconclusive
    if est.upper_bound > grothendieck_constant(q) * rhs {
        let est2 = q_to_qstar_psd_oracle(&xc, q, rounds * 4 + 64, derive_seed(seed, 77))?;
        if est2.lower_bound > rhs {
            let z = &est2.witness * est2.witness.transpose();
            return Ok(SeparationResult::Hyperplane { z, rhs });
        }
        return Ok(SeparationResult::Certified(est2.upper_bound.min(est.upper_bound)));
    }
    Ok(SeparationResult::Certified(est.upper_bound))
}
