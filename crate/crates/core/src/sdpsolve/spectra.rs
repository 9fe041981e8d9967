//! Projections used by the relaxation solvers: the spectrahedron
//! `{0 <= X <= I, tr X <= r (or = r)}` via eigenvalue projection, finite
//! intersections of halfspaces via a dual nonnegative QP, and the entrywise
//! `l_{q*}` ball.

use nalgebra::{DMatrix, DVector};

use crate::matcore::{sym_eig, Exponent};

/// Trace constraint flavor of the spectrahedron.
#[derive(Debug, Clone, Copy)]
pub enum TraceMode {
    AtMost(f64),
    Exactly(f64),
}

/// Projects eigenvalues onto `{v in [0,1]^n : sum v <= r}` or `{= r}`.
fn project_eigenvalues(vals: &mut DVector<f64>, mode: TraceMode) {
    let n = vals.len();
    match mode {
        TraceMode::AtMost(r) => {
            // KKT: v_i = clamp(lambda_i - tau, 0, 1) with tau >= 0 active
            // only when the plain clamp exceeds the trace budget
            let sum: f64 = vals.iter().map(|&v| v.clamp(0.0, 1.0)).sum();
            if sum <= r {
                for v in vals.iter_mut() {
                    *v = v.clamp(0.0, 1.0);
                }
                return;
            }
            let hi = vals.iter().cloned().fold(0.0f64, f64::max);
            let (mut lo, mut up) = (0.0, hi);
            for _ in 0..100 {
                let tau = 0.5 * (lo + up);
                let s: f64 = vals.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).sum();
                if s > r {
                    lo = tau;
                } else {
                    up = tau;
                }
            }
            let tau = 0.5 * (lo + up);
            for v in vals.iter_mut() {
                *v = (*v - tau).clamp(0.0, 1.0);
            }
        }
        TraceMode::Exactly(r) => {
            assert!(r <= n as f64 + 1e-9, "trace target exceeds dimension");
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo0 = vals.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let (mut lo, mut up) = (lo0, hi);
            for _ in 0..100 {
                let tau = 0.5 * (lo + up);
                let s: f64 = vals.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).sum();
                if s > r {
                    lo = tau;
                } else {
                    up = tau;
                }
            }
            let tau = 0.5 * (lo + up);
            for v in vals.iter_mut() {
                *v = (*v - tau).clamp(0.0, 1.0);
            }
        }
    }
}

/// Euclidean projection of a symmetric matrix onto the spectrahedron.
pub fn project_spectrahedron(x: &DMatrix<f64>, mode: TraceMode) -> DMatrix<f64> {
    let (mut vals, vecs) = sym_eig(x);
    project_eigenvalues(&mut vals, mode);
    &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose()
}

/// A halfspace `<a_mat, X> + a_t * t <= b` over pairs `(X, t)`.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub a_mat: DMatrix<f64>,
    pub a_t: f64,
    pub b: f64,
}

impl Halfspace {
    pub fn eval(&self, x: &DMatrix<f64>, t: f64) -> f64 {
        self.a_mat.dot(x) + self.a_t * t - self.b
    }
}

/// Euclidean projector onto a finite intersection of halfspaces, solved
/// through the dual nonnegative QP by cyclic coordinate descent. The Gram
/// matrix of constraint normals is precomputed once per cut set.
pub struct PolyProjector {
    hs: Vec<Halfspace>,
    gram: DMatrix<f64>,
}

impl PolyProjector {
    pub fn new(hs: Vec<Halfspace>) -> Self {
        let k = hs.len();
        let mut gram = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let g = hs[i].a_mat.dot(&hs[j].a_mat) + hs[i].a_t * hs[j].a_t;
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        PolyProjector { hs, gram }
    }

    pub fn len(&self) -> usize {
        self.hs.len()
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.hs
    }

    /// Largest constraint violation at `(x, t)`.
    pub fn max_violation(&self, x: &DMatrix<f64>, t: f64) -> f64 {
        self.hs.iter().map(|h| h.eval(x, t)).fold(0.0f64, f64::max)
    }

    pub fn project(&self, x: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, f64) {
        let mut alpha = DVector::<f64>::zeros(self.hs.len());
        self.project_warm(x, t, &mut alpha)
    }

    /// Projection with a warm-started dual vector (kept by the caller across
    /// repeated projections onto the same cut set).
    pub fn project_warm(&self, x: &DMatrix<f64>, t: f64, alpha: &mut DVector<f64>) -> (DMatrix<f64>, f64) {
        let k = self.hs.len();
        if k == 0 {
            return (x.clone(), t);
        }
        if alpha.len() != k {
            *alpha = DVector::zeros(k);
        }
        let c = DVector::from_fn(k, |i, _| self.hs[i].eval(x, t));
        if c.iter().all(|&v| v <= 0.0) && alpha.iter().all(|&v| v == 0.0) {
            return (x.clone(), t);
        }
        let scale = c.iter().fold(1e-300f64, |a, &v| a.max(v.abs())).max(1.0);
        let mut galpha = &self.gram * &*alpha;
        for sweep in 0..5000 {
            let mut delta_max = 0.0f64;
            for i in 0..k {
                let gii = self.gram[(i, i)];
                if gii <= 1e-300 {
                    continue;
                }
                let target = alpha[i] + (c[i] - galpha[i]) / gii;
                let new = target.max(0.0);
                let delta = new - alpha[i];
                if delta != 0.0 {
                    alpha[i] = new;
                    galpha.axpy(delta, &self.gram.column(i).into_owned(), 1.0);
                    delta_max = delta_max.max(delta.abs() * gii.sqrt());
                }
            }
            if sweep > 2 && delta_max <= 1e-14 * scale {
                break;
            }
        }
        let mut out = x.clone();
        let mut out_t = t;
        for i in 0..k {
            if alpha[i] > 0.0 {
                let ai = alpha[i];
                out.zip_apply(&self.hs[i].a_mat, |o, a| *o -= ai * a);
                out_t -= ai * self.hs[i].a_t;
            }
        }
        (out, out_t)
    }
}

/// The entrywise `l_{q*}` ball `{X : sum |X_ij|^{q*} <= radius_pow}` with
/// `q* in [1, 2]`.
#[derive(Debug, Clone)]
pub struct QstarBall {
    pub q_star: f64,
    /// The bound on `sum |X_ij|^{q*}` (already raised to the `q*` power).
    pub radius_pow: f64,
}

impl QstarBall {
    pub fn value(&self, x: &DMatrix<f64>) -> f64 {
        x.iter().map(|v| v.abs().powf(self.q_star)).sum()
    }

    pub fn contains(&self, x: &DMatrix<f64>, slack: f64) -> bool {
        self.value(x) <= self.radius_pow + slack
    }

    /// Euclidean projection onto the ball. `q* = 1` uses the sort-based
    /// simplex-style threshold; `q* in (1,2)` bisects the Lagrange
    /// multiplier with a per-entry inner solve.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.contains(x, 0.0) {
            return x.clone();
        }
        if (self.q_star - 1.0).abs() < 1e-12 {
            return self.project_l1(x);
        }
        self.project_qstar(x)
    }

    fn project_l1(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let radius = self.radius_pow; // q* = 1: radius_pow is the l1 radius
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = 0.0;
        let mut theta = 0.0;
        for (i, &m) in mags.iter().enumerate() {
            cum += m;
            let cand = (cum - radius) / (i as f64 + 1.0);
            if cand >= m {
                break;
            }
            theta = cand;
        }
        let theta = theta.max(0.0);
        x.map(|v| v.signum() * (v.abs() - theta).max(0.0))
    }

    fn project_qstar(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.q_star;
        // entrywise prox: z minimizes (z - a)^2/2 + lam * |z|^p, with z
        // keeping a's sign and |z| solving z + lam p z^(p-1) = |a|
        let solve_entry = |a: f64, lam: f64| -> f64 {
            let target = a.abs();
            if target == 0.0 {
                return 0.0;
            }
            let (mut lo, mut hi) = (0.0f64, target);
            for _ in 0..60 {
                let z = 0.5 * (lo + hi);
                let f = z + lam * p * z.powf(p - 1.0);
                if f > target {
                    hi = z;
                } else {
                    lo = z;
                }
            }
            a.signum() * 0.5 * (lo + hi)
        };
        let value_at = |lam: f64| -> f64 {
            x.iter().map(|&a| solve_entry(a, lam).abs().powf(p)).sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while value_at(hi) > self.radius_pow {
            hi *= 2.0;
            if hi > 1e18 {
                break;
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if value_at(mid) > self.radius_pow {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = hi;
        x.map(|a| solve_entry(a, lam))
    }
}

/// Exponent `q*` as a float for the entrywise constraint of the spiked
/// program.
pub fn q_star_float(q: Exponent) -> f64 {
    match q.dual() {
        Exponent::Finite(v) => v,
        Exponent::Inf => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigenvalue_projection_at_most() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.6, -0.5]));
        let p = project_spectrahedron(&x, TraceMode::AtMost(1.0));
        let eig = p.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(vals.iter().all(|&v| v >= -1e-12 && v <= 1.0 + 1e-12));
        assert!(vals.iter().sum::<f64>() <= 1.0 + 1e-9);
        // KKT: shift by tau = 0.6 gives (1, 0, 0)
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vals[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn eigenvalue_projection_at_most_inactive_budget() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -0.2, 1.4]));
        let p = project_spectrahedron(&x, TraceMode::AtMost(2.0));
        // plain clamp: (0.3, 0, 1)
        assert_abs_diff_eq!(p[(0, 0)], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(1, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(2, 2)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalue_projection_exact_trace() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.1, 0.0, -0.3]));
        let p = project_spectrahedron(&x, TraceMode::Exactly(2.0));
        assert_abs_diff_eq!(p.trace(), 2.0, epsilon = 1e-9);
        let eig = p.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-12 && v <= 1.0 + 1e-12));
    }

    #[test]
    fn projection_is_idempotent_and_contracts() {
        let mut r = crate::rng::rng(5);
        for _ in 0..10 {
            let g = DMatrix::from_fn(6, 6, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
            let p1 = project_spectrahedron(&g, TraceMode::AtMost(2.0));
            let p2 = project_spectrahedron(&p1, TraceMode::AtMost(2.0));
            assert!((&p1 - &p2).norm() < 1e-9);
        }
    }

    #[test]
    fn halfspace_projection_single() {
        // project (2, 2) identity-scaled onto <I, X> <= 2 in 2x2 symmetric space
        let hs = Halfspace { a_mat: DMatrix::identity(2, 2), a_t: 0.0, b: 2.0 };
        let proj = PolyProjector::new(vec![hs]);
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let (y, _) = proj.project(&x, 0.0);
        assert_abs_diff_eq!(y.trace(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(y[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn halfspace_projection_multiple_consistent() {
        // two halfspaces; verify optimality via feasibility + KKT sanity
        let h1 = Halfspace { a_mat: DMatrix::identity(2, 2), a_t: 0.0, b: 1.0 };
        let mut e11 = DMatrix::zeros(2, 2);
        e11[(0, 0)] = 1.0;
        let h2 = Halfspace { a_mat: e11, a_t: 0.0, b: 0.2 };
        let proj = PolyProjector::new(vec![h1, h2]);
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0]));
        let (y, _) = proj.project(&x, 0.0);
        assert!(y.trace() <= 1.0 + 1e-9);
        assert!(y[(0, 0)] <= 0.2 + 1e-9);
    }

    #[test]
    fn qstar_ball_l1_projection() {
        let ball = QstarBall { q_star: 1.0, radius_pow: 1.5 };
        let x = DMatrix::from_row_slice(1, 3, &[2.0, -1.0, 0.1]);
        let y = ball.project(&x);
        assert_abs_diff_eq!(ball.value(&y), 1.5, epsilon = 1e-9);
        // soft threshold at theta = 0.75: (1.25, -0.25, 0)
        assert_abs_diff_eq!(y[(0, 0)], 1.25, epsilon = 1e-9);
        assert_abs_diff_eq!(y[(0, 1)], -0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(y[(0, 2)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qstar_ball_fractional_projection() {
        let ball = QstarBall { q_star: 1.5, radius_pow: 1.0 };
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, -1.0]);
        let y = ball.project(&x);
        assert_abs_diff_eq!(ball.value(&y), 1.0, epsilon = 1e-6);
        // inside-ball points untouched
        let small = DMatrix::from_row_slice(1, 3, &[0.1, 0.0, 0.0]);
        assert_eq!(ball.project(&small), small);
    }

    #[test]
    fn qstar_ball_symmetric_input_stays_symmetric() {
        let ball = QstarBall { q_star: 1.0, radius_pow: 2.0 };
        let x = DMatrix::from_row_slice(2, 2, &[3.0, -1.5, -1.5, 0.4]);
        let y = ball.project(&x);
        assert_abs_diff_eq!(y[(0, 1)], y[(1, 0)], epsilon = 1e-12);
    }
}
