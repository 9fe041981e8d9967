//! Production first-order solver for the relaxations: two-block ADMM on
//! `min <C, X> + t  s.t.  X in spectrahedron, (X, t) in cut polyhedron,
//! X in entrywise ball`, with residual balancing and warm starts across
//! separation-oracle rounds.

use nalgebra::{DMatrix, DVector};

use super::spectra::{project_spectrahedron, PolyProjector, QstarBall, TraceMode};

pub struct AdmmProblem<'a> {
    /// Linear objective coefficient on `X` (minimized). `None` means zero.
    pub c_mat: Option<&'a DMatrix<f64>>,
    /// Whether the scalar epigraph variable `t` (with coefficient 1) exists.
    pub has_t: bool,
    pub trace: TraceMode,
    pub poly: &'a PolyProjector,
    pub ball: Option<&'a QstarBall>,
}

/// Mutable solver state, reusable across outer separation rounds.
pub struct AdmmState {
    pub zeta_x: DMatrix<f64>,
    pub zeta_t: f64,
    pub u_x: DMatrix<f64>,
    pub u_t: f64,
    pub rho: f64,
    /// Warm-started dual multipliers for the polyhedron projection.
    pub alpha: DVector<f64>,
}

impl AdmmState {
    pub fn new(x0: DMatrix<f64>, t0: f64) -> Self {
        let n = x0.nrows();
        AdmmState {
            zeta_x: x0,
            zeta_t: t0,
            u_x: DMatrix::zeros(n, n),
            u_t: 0.0,
            rho: 1.0,
            alpha: DVector::zeros(0),
        }
    }
}

pub struct AdmmOutcome {
    pub x: DMatrix<f64>,
    pub t: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projection onto the polyhedron-and-ball block; Dykstra when both are
/// present.
fn project_g(
    poly: &PolyProjector,
    ball: Option<&QstarBall>,
    x: &DMatrix<f64>,
    t: f64,
    alpha: &mut DVector<f64>,
) -> (DMatrix<f64>, f64) {
    match ball {
        None => poly.project_warm(x, t, alpha),
        Some(ball) => {
            // Dykstra between the halfspace intersection and the ball
            let mut y = x.clone();
            let mut yt = t;
            let n = x.nrows();
            let mut p_corr = DMatrix::<f64>::zeros(n, n);
            let mut p_t = 0.0;
            let mut q_corr = DMatrix::<f64>::zeros(n, n);
            for sweep in 0..60 {
                let (a, at) = poly.project(&(&y + &p_corr), yt + p_t);
                p_corr = &y + &p_corr - &a;
                p_t = yt + p_t - at;
                let b = ball.project(&(&a + &q_corr));
                q_corr = &a + &q_corr - &b;
                let moved = (&b - &y).norm();
                y = b;
                yt = at;
                if sweep > 2 && moved < 1e-12 * (1.0 + y.norm()) {
                    break;
                }
            }
            (y, yt)
        }
    }
}

/// Runs ADMM until residuals fall below `eps` (relative), the objective
/// stagnates for `window` iterations below `tol_objective`, or `max_iter`.
pub fn admm_solve(
    problem: &AdmmProblem,
    state: &mut AdmmState,
    eps: f64,
    tol_objective: f64,
    max_iter: usize,
) -> AdmmOutcome {
    let window = 50usize;
    let mut obj_history: Vec<f64> = Vec::with_capacity(max_iter.min(8192));
    let mut converged = false;
    let mut iter_done = 0;
    let mut xi_x;
    let mut xi_t = state.zeta_t;

    for iter in 0..max_iter {
        // xi-update: prox of linear objective + spectrahedron indicator
        let mut v = &state.zeta_x - &state.u_x;
        if let Some(c) = problem.c_mat {
            let inv_rho = 1.0 / state.rho;
            v.zip_apply(c, |a, b| *a -= inv_rho * b);
        }
        xi_x = project_spectrahedron(&v, problem.trace);
        if problem.has_t {
            xi_t = (state.zeta_t - state.u_t) - 1.0 / state.rho;
        }

        // zeta-update: project (xi + u) onto the cut polyhedron (and ball)
        let prev_zeta = state.zeta_x.clone();
        let prev_zeta_t = state.zeta_t;
        let (zx, zt) = project_g(
            problem.poly,
            problem.ball,
            &(&xi_x + &state.u_x),
            xi_t + state.u_t,
            &mut state.alpha,
        );
        state.zeta_x = zx;
        state.zeta_t = if problem.has_t { zt } else { 0.0 };

        // dual update
        state.u_x += &xi_x - &state.zeta_x;
        if problem.has_t {
            state.u_t += xi_t - state.zeta_t;
        }

        let pri = ((&xi_x - &state.zeta_x).norm_squared() + (xi_t - state.zeta_t).powi(2)).sqrt();
        let dua = state.rho
            * ((&state.zeta_x - &prev_zeta).norm_squared() + (state.zeta_t - prev_zeta_t).powi(2)).sqrt();
        let scale = 1.0 + state.zeta_x.norm() + state.zeta_t.abs();

        let obj = problem.c_mat.map_or(0.0, |c| c.dot(&state.zeta_x))
            + if problem.has_t { state.zeta_t } else { 0.0 };
        obj_history.push(obj);

        iter_done = iter + 1;
        if pri <= eps * scale && dua <= eps * scale {
            converged = true;
            break;
        }
        if obj_history.len() > window {
            let past = obj_history[obj_history.len() - 1 - window];
            let obj_scale = obj.abs().max(past.abs()).max(1e-9);
            if (obj - past).abs() <= tol_objective * obj_scale
                && pri <= 30.0 * eps * scale
                && dua <= 200.0 * eps * scale
            {
                converged = true;
                break;
            }
        }

        // residual balancing every 25 iterations
        if iter % 25 == 24 {
            if pri > 10.0 * dua && state.rho < 1e6 {
                state.rho *= 2.0;
                state.u_x /= 2.0;
                state.u_t /= 2.0;
            } else if dua > 10.0 * pri && state.rho > 1e-5 {
                state.rho /= 2.0;
                state.u_x *= 2.0;
                state.u_t *= 2.0;
            }
        }
    }

    // final point: spectrahedron-exact
    let x = project_spectrahedron(&state.zeta_x, problem.trace);
    let t = state.zeta_t;
    AdmmOutcome { x, t, iterations: iter_done, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn admm_unconstrained_matches_top_eigprojector() {
        // max <M, X> over {tr <= 1, 0 <= X <= I} is the top eigenprojector
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.5]));
        let c = -&m / 3.0;
        let poly = PolyProjector::new(vec![]);
        let problem = AdmmProblem {
            c_mat: Some(&c),
            has_t: false,
            trace: TraceMode::AtMost(1.0),
            poly: &poly,
            ball: None,
        };
        let mut state = AdmmState::new(DMatrix::zeros(3, 3), 0.0);
        let out = admm_solve(&problem, &mut state, 1e-9, 1e-10, 2000);
        assert!(out.converged);
        assert!((out.x[(0, 0)] - 1.0).abs() < 1e-6, "X00 = {}", out.x[(0, 0)]);
        assert!(out.x.trace() <= 1.0 + 1e-8);
    }

    #[test]
    fn admm_respects_linear_cut() {
        // max <diag(1,0), X> s.t. tr <= 1 and X_00 <= 0.5 (via halfspace)
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let c = -m;
        let mut e11 = DMatrix::zeros(2, 2);
        e11[(0, 0)] = 1.0;
        let poly = PolyProjector::new(vec![Halfspace { a_mat: e11, a_t: 0.0, b: 0.5 }]);
        let problem = AdmmProblem {
            c_mat: Some(&c),
            has_t: false,
            trace: TraceMode::AtMost(1.0),
            poly: &poly,
            ball: None,
        };
        let mut state = AdmmState::new(DMatrix::zeros(2, 2), 0.0);
        let out = admm_solve(&problem, &mut state, 1e-9, 1e-10, 4000);
        assert!(out.x[(0, 0)] <= 0.5 + 1e-6, "X00 = {}", out.x[(0, 0)]);
        assert!(out.x[(0, 0)] >= 0.5 - 1e-5, "cut should be active");
    }

    use super::super::spectra::Halfspace;
}
