//! Reference ellipsoid solver over the symmetric-matrix space, used to
//! cross-check the production solver on small instances (`q = inf`,
//! `n <= 12`, where the separation oracle is exact sign enumeration).

use nalgebra::{DMatrix, DVector};

use super::spectra::{project_spectrahedron, q_star_float, QstarBall, TraceMode};
use super::PsdSolution;
use crate::error::Error;
use crate::matcore::{spectral_norm, DataMatrix, RobustnessBudget};
use crate::opnorms::exact_psd_quadratic_max;
use crate::sdpsolve::SolveParams;
use crate::Result;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn svec_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packs a symmetric matrix so that inner products are preserved:
/// diagonal entries as-is, off-diagonal entries scaled by sqrt(2).
fn svec(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows();
    let mut out = DVector::zeros(svec_dim(n));
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            out[k] = if i == j { x[(i, j)] } else { SQRT2 * 0.5 * (x[(i, j)] + x[(j, i)]) };
            k += 1;
        }
    }
    out
}

fn smat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                out[(i, j)] = v[k];
            } else {
                out[(i, j)] = v[k] / SQRT2;
                out[(j, i)] = v[k] / SQRT2;
            }
            k += 1;
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RefKind {
    Frobenius,
    Spectral,
    Spiked,
}

struct RefProblem<'a> {
    kind: RefKind,
    r: f64,
    kappa_sq: f64,
    c_mat: DMatrix<f64>,
    gram: DMatrix<f64>,
    a: &'a DataMatrix,
    abar: Option<DMatrix<f64>>,
    spec_scale: f64,
    ball: Option<QstarBall>,
    q_star: f64,
}

impl RefProblem<'_> {
    fn trace_mode(&self) -> TraceMode {
        match self.kind {
            RefKind::Spiked => TraceMode::Exactly(self.r),
            _ => TraceMode::AtMost(self.r),
        }
    }

    /// Exact spectral residual `lambda_max(Abar^T (I - X) Abar)` and the cut
    /// vector `y = Abar v` (valid for indefinite `X` too).
    fn spectral_residual(&self, x: &DMatrix<f64>) -> (f64, DVector<f64>) {
        let ab = self.abar.as_ref().unwrap();
        let n = ab.nrows();
        let g = DMatrix::identity(n, n) - x;
        let w = ab.transpose() * &g * ab;
        let eig = (0.5 * (&w + w.transpose())).symmetric_eigen();
        let mut top = 0usize;
        for i in 1..eig.eigenvalues.len() {
            if eig.eigenvalues[i] > eig.eigenvalues[top] {
                top = i;
            }
        }
        let v = eig.eigenvectors.column(top).into_owned();
        (eig.eigenvalues[top], ab * v)
    }

    /// Cleans a candidate into exact feasibility and evaluates it; returns
    /// `(internal objective, X, lambda_for_spectral)` when feasible.
    fn candidate(&self, x: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>, f64)> {
        let mut xp = project_spectrahedron(x, self.trace_mode());
        if let Some(ball) = &self.ball {
            for _ in 0..25 {
                if ball.contains(&xp, 1e-10) {
                    break;
                }
                xp = ball.project(&xp);
                xp = project_spectrahedron(&xp, self.trace_mode());
            }
            if !ball.contains(&xp, 1e-7 * (1.0 + ball.radius_pow)) {
                return None;
            }
        }
        let norm_val = exact_psd_quadratic_max(&xp).ok()?.0;
        if norm_val > self.kappa_sq * (1.0 + 1e-7) + 1e-9 {
            return None;
        }
        match self.kind {
            RefKind::Spectral => {
                let (lam, _) = self.spectral_residual(&xp);
                Some((lam, xp, lam))
            }
            _ => {
                let obj = self.c_mat.dot(&xp);
                Some((obj, xp, 0.0))
            }
        }
    }
}

fn solve_reference(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
    kind: RefKind,
) -> Result<PsdSolution> {
    params.validate()?;
    let n = a.n();
    if !budget.q().is_inf() || n > 12 {
        return Err(Error::TooLarge(
            "reference ellipsoid solver supports q = inf and n <= 12".into(),
        ));
    }
    if r > n {
        return Err(Error::InvalidParams(format!("rank {r} exceeds dimension {n}")));
    }
    let kappa_sq = budget.kappa() * budget.kappa();
    if kind == RefKind::Spiked && (r as f64) > kappa_sq + 1e-9 {
        return Err(Error::InvalidParams("spiked trace exceeds kappa^2".into()));
    }

    let gram = a.gram();
    let gram_scale = {
        let eig = gram.clone().symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max)
    };
    let (abar, spec_scale) = if kind == RefKind::Spectral {
        let s = spectral_norm(a.matrix()).max(1e-300);
        (Some(a.matrix() / s), s)
    } else {
        (None, 1.0)
    };
    let q_star = q_star_float(budget.q());
    let ball = if kind == RefKind::Spiked {
        Some(QstarBall {
            q_star,
            radius_pow: (r as f64).powf(q_star) * budget.kappa().powf(2.0 * q_star),
        })
    } else {
        None
    };
    let c_mat = if gram_scale > 0.0 { -&gram / gram_scale } else { DMatrix::zeros(n, n) };
    let problem = RefProblem {
        kind,
        r: r as f64,
        kappa_sq,
        c_mat,
        gram: gram.clone(),
        a,
        abar,
        spec_scale,
        ball,
        q_star,
    };

    let d = svec_dim(n);
    let dim = if kind == RefKind::Spectral { d + 1 } else { d };
    let radius = (n as f64).sqrt() + 2.0;
    let mut center = DVector::<f64>::zeros(dim);
    let mut shape = DMatrix::<f64>::identity(dim, dim) * radius * radius;
    let dimf = dim as f64;
    let max_iters = (4.0 * dimf * dimf * 30.0) as usize;

    let mut best: Option<(f64, DMatrix<f64>, f64)> = None;
    let pad = |m: &DMatrix<f64>, t_coeff: f64| -> DVector<f64> {
        let body = svec(m);
        if kind == RefKind::Spectral {
            let mut g = DVector::zeros(dim);
            g.rows_mut(0, d).copy_from(&body);
            g[d] = t_coeff;
            g
        } else {
            body
        }
    };

    for _ in 0..max_iters {
        let x = smat(&center.rows(0, d).into_owned(), n);
        let t = if kind == RefKind::Spectral { center[d] } else { 0.0 };

        // find a violated constraint (feasibility cuts), else cut on the
        // objective
        let tol = 1e-9;
        let mut cut: Option<DVector<f64>> = None;

        let eig = (0.5 * (&x + x.transpose())).symmetric_eigen();
        let mut lmin_idx = 0usize;
        let mut lmax_idx = 0usize;
        for i in 1..n {
            if eig.eigenvalues[i] < eig.eigenvalues[lmin_idx] {
                lmin_idx = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[lmax_idx] {
                lmax_idx = i;
            }
        }
        if eig.eigenvalues[lmin_idx] < -tol {
            let v = eig.eigenvectors.column(lmin_idx).into_owned();
            cut = Some(pad(&(-(&v * v.transpose())), 0.0));
        } else if eig.eigenvalues[lmax_idx] > 1.0 + tol {
            let v = eig.eigenvectors.column(lmax_idx).into_owned();
            cut = Some(pad(&(&v * v.transpose()), 0.0));
        } else {
            let tr = x.trace();
            let over = tr > problem.r + tol;
            let under = kind == RefKind::Spiked && tr < problem.r - tol;
            if over {
                cut = Some(pad(&DMatrix::identity(n, n), 0.0));
            } else if under {
                cut = Some(pad(&(-DMatrix::<f64>::identity(n, n)), 0.0));
            }
        }
        if cut.is_none() {
            if let Some(ball) = &problem.ball {
                if !ball.contains(&x, tol) {
                    let grad = x.map(|v| {
                        if problem.q_star == 1.0 {
                            v.signum()
                        } else {
                            problem.q_star * v.signum() * v.abs().powf(problem.q_star - 1.0)
                        }
                    });
                    cut = Some(pad(&grad, 0.0));
                }
            }
        }
        if cut.is_none() {
            let (norm_val, s) = exact_psd_quadratic_max(&x)?;
            if norm_val > kappa_sq + tol {
                cut = Some(pad(&(&s * s.transpose()), 0.0));
            }
        }
        if cut.is_none() && kind == RefKind::Spectral {
            if t < -tol {
                cut = Some(pad(&DMatrix::zeros(n, n), -1.0));
            } else if t > 1.1 + tol {
                cut = Some(pad(&DMatrix::zeros(n, n), 1.0));
            } else {
                let (lam, y) = problem.spectral_residual(&x);
                if lam > t + tol {
                    cut = Some(pad(&(-(&y * y.transpose())), -1.0));
                }
            }
        }

        let g = match cut {
            Some(g) => g,
            None => {
                // feasible center: record candidate, then objective cut
                if let Some((obj, xp, lam)) = problem.candidate(&x) {
                    if best.as_ref().map_or(true, |(b, _, _)| obj < *b) {
                        best = Some((obj, xp, lam));
                    }
                }
                match kind {
                    RefKind::Spectral => pad(&DMatrix::zeros(n, n), 1.0),
                    _ => pad(&problem.c_mat, 0.0),
                }
            }
        };

        // central-cut ellipsoid update
        let pg = &shape * &g;
        let gpg = g.dot(&pg);
        if !(gpg > 1e-300) {
            break;
        }
        let sq = gpg.sqrt();
        let ghat = &pg / sq;
        center -= (1.0 / (dimf + 1.0)) * &ghat;
        shape = (dimf * dimf / (dimf * dimf - 1.0))
            * (&shape - (2.0 / (dimf + 1.0)) * (&ghat * ghat.transpose()));
        shape = 0.5 * (&shape + shape.transpose());
    }

    let (_, x_best, lam) = best.ok_or_else(|| {
        Error::SolverFailure("ellipsoid reference found no feasible candidate".into())
    })?;
    let norm_certificate = exact_psd_quadratic_max(&x_best)?.0;
    let (objective, lambda, entrywise) = match kind {
        RefKind::Frobenius => {
            ((problem.a.frobenius_norm().powi(2) - problem.gram.dot(&x_best)).max(0.0), None, None)
        }
        RefKind::Spiked => {
            let m = problem.a.m() as f64;
            let ew: f64 = x_best.iter().map(|v| v.abs().powf(problem.q_star)).sum();
            (
                (problem.a.frobenius_norm().powi(2) - problem.gram.dot(&x_best)).max(0.0) / m,
                None,
                Some(ew),
            )
        }
        RefKind::Spectral => {
            let lam_raw = lam.max(0.0) * problem.spec_scale * problem.spec_scale;
            (lam_raw, Some(lam_raw), None)
        }
    };
    Ok(PsdSolution {
        x: x_best,
        objective,
        norm_certificate,
        entrywise_certificate: entrywise,
        lambda,
        converged: true,
        iterations: max_iters,
        oracle_rounds: 0,
    })
}

/// Reference ellipsoid solve of the Frobenius relaxation (`q = inf`,
/// `n <= 12`).
pub fn solve_frobenius_reference(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<PsdSolution> {
    solve_reference(a, r, budget, params, RefKind::Frobenius)
}

/// Reference ellipsoid solve of the spectral relaxation.
pub fn solve_spectral_reference(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<PsdSolution> {
    solve_reference(a, r, budget, params, RefKind::Spectral)
}

/// Reference ellipsoid solve of the spiked relaxation.
pub fn solve_spiked_reference(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<PsdSolution> {
    solve_reference(a, r, budget, params, RefKind::Spiked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn svec_round_trip_preserves_inner_products() {
        let mut r = crate::rng::rng(3);
        let x = DMatrix::from_fn(4, 4, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let xs = 0.5 * (&x + x.transpose());
        let y = DMatrix::from_fn(4, 4, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let ys = 0.5 * (&y + y.transpose());
        let back = smat(&svec(&xs), 4);
        assert!((&back - &xs).norm() < 1e-12);
        let ip_mat = xs.dot(&ys);
        let ip_vec = svec(&xs).dot(&svec(&ys));
        assert!((ip_mat - ip_vec).abs() < 1e-10);
    }

    #[test]
    fn reference_matches_closed_form_unconstrained() {
        // vacuous kappa: optimum is the top eigenprojector value
        let cols: Vec<DVector<f64>> = vec![
            DVector::from_vec(vec![2.0, 0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.4, 0.0]),
            DVector::from_vec(vec![0.0, 0.3, 0.5]),
        ];
        let a = DataMatrix::from_columns(&cols).unwrap();
        let budget = RobustnessBudget::linf((3.0f64).sqrt()).unwrap();
        let sol = solve_frobenius_reference(&a, 1, &budget, &SolveParams::default()).unwrap();
        // closed form: ||A||_F^2 - lambda_1(A A^T)
        let gram = a.gram();
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let expected = a.frobenius_norm().powi(2) - top;
        assert!(
            (sol.objective - expected).abs() <= 1e-3 * a.frobenius_norm().powi(2),
            "got {}, expected {}",
            sol.objective,
            expected
        );
    }

    #[test]
    fn reference_rejects_large_instances() {
        let a = DataMatrix::new(DMatrix::identity(13, 13)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        assert!(solve_frobenius_reference(&a, 1, &budget, &SolveParams::default()).is_err());
    }
}
