//! Rounding of relaxation solutions into robust projections, and the public
//! worst-case approximation algorithms built from solver + rounding.
//!
//! The rounding keeps eigenvectors of the relaxation solution with large
//! eigenvalues (monotonicity of the `q -> q*` norm bounds the robustness
//! loss by `1/(1-delta)`) and resolves rank overflow greedily by objective
//! contribution.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::matcore::{DataMatrix, Projection, RobustnessBudget};
use crate::opnorms::{q_to_qstar_psd_oracle, NormEstimate};
use crate::sdpsolve::{solve_frobenius_relax, solve_spectral_relax, PsdSolution, SolveParams};
use crate::Result;

/// Eigenvalue truncation plus greedy rank selection.
///
/// Keeps eigenvectors of `sol.x` with eigenvalue at least `1 - delta` where
/// `delta = 1/(1+gamma)`; if more than `r` survive, the `r` vectors
/// maximizing `alpha_i = v_i^T M v_i` are kept (ties by eigenvalue order).
pub fn round_truncate_greedy(
    sol: &PsdSolution,
    m: &DMatrix<f64>,
    r: usize,
    gamma: f64,
) -> Result<Projection> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParams(format!("gamma must be in (0,1], got {gamma}")));
    }
    let delta = 1.0 / (1.0 + gamma);
    truncate_and_select(&sol.x, m, r, 1.0 - delta)
}

/// Shared truncation: keep eigenvalues `>= threshold`, then greedily select
/// `r` eigenvectors by `v^T M v`.
fn truncate_and_select(
    x: &DMatrix<f64>,
    m: &DMatrix<f64>,
    r: usize,
    threshold: f64,
) -> Result<Projection> {
    let n = x.nrows();
    let eig = (0.5 * (x + x.transpose())).symmetric_eigen();
    // candidates ordered by eigenvalue descending (tie-break index order)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let survivors: Vec<usize> =
        order.into_iter().filter(|&i| eig.eigenvalues[i] >= threshold).collect();
    if survivors.is_empty() {
        return Ok(Projection::zero(n));
    }
    let chosen: Vec<usize> = if survivors.len() <= r {
        survivors
    } else {
        let mut scored: Vec<(usize, usize, f64)> = survivors
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let v = eig.eigenvectors.column(i);
                let alpha = (v.transpose() * m * v)[(0, 0)];
                (pos, i, alpha)
            })
            .collect();
        scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
        scored.into_iter().take(r).map(|(_, i, _)| i).collect()
    };
    let basis = DMatrix::from_fn(n, chosen.len(), |i, j| eig.eigenvectors[(i, chosen[j])]);
    Projection::from_orthonormal(basis)
}

/// Truncation without rank selection: the bicriteria set `S`.
fn truncate_all(x: &DMatrix<f64>, threshold: f64) -> Result<Projection> {
    let n = x.nrows();
    truncate_and_select(x, &DMatrix::identity(n, n), n, threshold)
}

/// Robust rank-at-most-`r` approximation in Frobenius error: solves the
/// relaxation and rounds. Against any `(kappa, q)`-robust rank-`r`
/// projection of error `OPT`, the output error is at most
/// `(2 + gamma) OPT` with `||Pi||_{q->2} <= sqrt(C_G(q)(1 + 1/gamma)) kappa`.
pub fn robust_pca_frobenius(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<Projection> {
    let sol = solve_frobenius_relax(a, r, budget, params)?;
    round_truncate_greedy(&sol, &a.gram(), r, params.gamma)
}

/// Bicriteria variant: rank up to `r (1 + 1/gamma)` with error factor
/// `(1 + gamma)`.
pub fn robust_pca_frobenius_bicriteria(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<Projection> {
    let sol = solve_frobenius_relax(a, r, budget, params)?;
    let delta = 1.0 / (1.0 + params.gamma);
    truncate_all(&sol.x, 1.0 - delta)
}

/// Robust approximation in spectral error. Non-bicriteria output is the
/// top-`r` eigenspace of `Pi_S A A^T Pi_S` inside the truncated span
/// (error factor `sqrt(3 + gamma)`); with `bicriteria` the whole truncated
/// span is returned (rank up to `(1 + 2/gamma) r`, factor `sqrt(1 + gamma)`).
pub fn robust_pca_spectral(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
    bicriteria: bool,
) -> Result<Projection> {
    let sol = solve_spectral_relax(a, r, budget, params)?;
    let delta = 2.0 / (2.0 + params.gamma);
    let p_s = truncate_all(&sol.x, 1.0 - delta)?;
    if bicriteria || p_s.rank() <= r {
        return Ok(p_s);
    }
    // top-r eigenspace of Pi_S A A^T Pi_S, contained in span(Pi_S)
    let pis = p_s.matrix();
    let compressed = &pis * a.gram() * &pis;
    let eig = compressed.symmetric_eigen();
    let n = a.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
    let chosen: Vec<usize> =
        order.into_iter().take(r).filter(|&i| eig.eigenvalues[i] > 1e-12).collect();
    if chosen.is_empty() {
        return Ok(Projection::zero(n));
    }
    let basis = DMatrix::from_fn(n, chosen.len(), |i, j| eig.eigenvectors[(i, chosen[j])]);
    Projection::from_orthonormal(basis)
}

/// Subspace recovery: runs the Frobenius worst-case algorithm and returns
/// its projection. Under `sigma_r(Pi* A) >= theta > 0` the Davis-Kahan
/// bound gives `||sin Theta|| <= O(1 + alpha) eps ||A|| / theta`; `theta`
/// is only validated and recorded here.
pub fn recover_subspace(
    a: &DataMatrix,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
    theta: f64,
) -> Result<Projection> {
    if r == 0 {
        return Ok(Projection::zero(a.n()));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidParams("theta must be positive".into()));
    }
    robust_pca_frobenius(a, r, budget, params)
}

/// Oracle certification of a projection's `q -> 2` norm: square-root bounds
/// of the PSD `q -> q*` estimate of `Pi`.
pub fn certify_projection_norm(
    p: &Projection,
    budget: &RobustnessBudget,
    rounds: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let pi = p.matrix();
    let est = q_to_qstar_psd_oracle(&pi, budget.q(), rounds, seed)?;
    Ok(NormEstimate {
        lower_bound: est.lower_bound.max(0.0).sqrt(),
        upper_bound: est.upper_bound.max(0.0).sqrt(),
        approx_factor: est.approx_factor.sqrt(),
        witness: est.witness,
    })
}

/// Frobenius residual `||A - Pi A||_F^2`.
pub fn frobenius_residual_sq(p: &Projection, a: &DataMatrix) -> f64 {
    let pa = crate::matcore::apply_projection(p, a).expect("dimension checked by caller");
    (a.matrix() - pa.matrix()).norm_squared()
}

/// Spectral residual `||A - Pi A||`.
pub fn spectral_residual(p: &Projection, a: &DataMatrix) -> f64 {
    let pa = crate::matcore::apply_projection(p, a).expect("dimension checked by caller");
    crate::matcore::spectral_norm(&(a.matrix() - pa.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::Exponent;
    use crate::opnorms::{exact_psd_quadratic_max, exact_q_to_2_bruteforce};
    use crate::sdpsolve::check_solution_invariants;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn fake_solution(x: DMatrix<f64>) -> PsdSolution {
        PsdSolution {
            x,
            objective: 0.0,
            norm_certificate: 0.0,
            entrywise_certificate: None,
            lambda: None,
            converged: true,
            iterations: 0,
            oracle_rounds: 0,
        }
    }

    #[test]
    fn rounding_identity_spectrum() {
        // X already a projection: rounding returns it for any r >= rank
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]).normalize();
        let pi = &v * v.transpose();
        let sol = fake_solution(pi.clone());
        let p = round_truncate_greedy(&sol, &DMatrix::identity(3, 3), 2, 1.0).unwrap();
        assert_eq!(p.rank(), 1);
        assert!((p.matrix() - pi).norm() < 1e-9);
    }

    #[test]
    fn rounding_greedy_selection() {
        // X = diag(0.9, 0.9, 0), M = diag(5, 1, 0), r = 1, gamma = 1 -> e1
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, 0.9, 0.0]));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0, 0.0]));
        let sol = fake_solution(x);
        let p = round_truncate_greedy(&sol, &m, 1, 1.0).unwrap();
        assert_eq!(p.rank(), 1);
        assert_abs_diff_eq!(p.matrix()[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rounding_empty_truncation() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, 0.4]));
        let sol = fake_solution(x);
        let p = round_truncate_greedy(&sol, &DMatrix::identity(2, 2), 1, 1.0).unwrap();
        assert_eq!(p.rank(), 0);
    }

    #[test]
    fn truncation_inequality_lemma() {
        // For feasible X and PSD M with <M, X> >= (1 - eps) tr M, the
        // truncated projector P at threshold 1 - delta satisfies
        // <I - P, M> <= (eps / delta) tr M
        let mut r = crate::rng::rng(77);
        for trial in 0..100 {
            let n = 3 + trial % 6;
            let raw = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
            let q = raw.qr().q();
            let vals = DVector::from_fn(n, |i, _| {
                if i == 0 {
                    r.random_range(0.8..1.0)
                } else {
                    r.random_range(0.0..0.4)
                }
            });
            let x = &q * DMatrix::from_diagonal(&vals) * q.transpose();
            let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
            let m = &g * g.transpose();
            let trm = m.trace();
            let eps = 1.0 - (m.dot(&x) / trm);
            if eps < 0.0 {
                continue;
            }
            let delta = 0.5;
            let p = truncate_and_select(&x, &m, n, 1.0 - delta).unwrap();
            let resid = trm - m.dot(&p.matrix());
            assert!(
                resid <= (eps / delta) * trm + 1e-9,
                "trial {trial}: {resid} > {}",
                (eps / delta) * trm
            );
        }
    }

    #[test]
    fn monotone_rescaling_chain() {
        // inf->1 norm of the truncated projector is at most the inf->1 norm
        // of X divided by the truncation threshold
        let mut r = crate::rng::rng(78);
        for trial in 0..40 {
            let n = 3 + trial % 6;
            let raw = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
            let q = raw.qr().q();
            let vals = DVector::from_fn(n, |_, _| r.random_range(0.0..1.0));
            let x = &q * DMatrix::from_diagonal(&vals) * q.transpose();
            let delta: f64 = 0.5;
            let p = truncate_all(&x, 1.0 - delta).unwrap();
            if p.rank() == 0 {
                continue;
            }
            let lhs = exact_psd_quadratic_max(&p.matrix()).unwrap().0;
            let rhs = exact_psd_quadratic_max(&x).unwrap().0 / (1.0 - delta);
            assert!(lhs <= rhs + 1e-9, "trial {trial}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn objective_equivalence_over_column_spaces() {
        // || A - Pi A || minimizes over all B with columns in range(Pi)
        let mut r = crate::rng::rng(79);
        let n = 5;
        let m = 7;
        let a =
            DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.sample::<f64, _>(StandardNormal))).unwrap();
        let raw = DMatrix::from_fn(n, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let p = crate::matcore::orthonormalize(&raw).unwrap();
        let best = frobenius_residual_sq(&p, &a);
        for _ in 0..50 {
            let coeffs = DMatrix::from_fn(2, m, |_, _| r.sample::<f64, _>(StandardNormal));
            let b = p.basis() * coeffs;
            let resid = (a.matrix() - b).norm_squared();
            assert!(resid >= best - 1e-9);
        }
    }

    #[test]
    fn frobenius_planted_two_sparse() {
        // planted A = Pi* A with a 2-sparse rank-1 direction
        let mut r = crate::rng::rng(80);
        let n = 8;
        let mut v = DVector::zeros(n);
        v[1] = std::f64::consts::FRAC_1_SQRT_2;
        v[4] = -std::f64::consts::FRAC_1_SQRT_2;
        let cols: Vec<DVector<f64>> = (0..12).map(|_| r.random_range(0.5..2.0) * v.clone()).collect();
        let a = DataMatrix::from_columns(&cols).unwrap();
        let kappa = 2.0f64.sqrt(); // = ||Pi*||_{inf->2} for a uniform 2-sparse direction
        let budget = RobustnessBudget::linf(kappa).unwrap();
        let params = SolveParams::default();
        let p = robust_pca_frobenius(&a, 1, &budget, &params).unwrap();
        let err = frobenius_residual_sq(&p, &a);
        assert!(err <= 1e-3 * a.frobenius_norm().powi(2), "error {err}");
        // certified norm <= 2 kappa
        let cert = certify_projection_norm(&p, &budget, 100, 0).unwrap();
        assert!(cert.upper_bound <= 2.0 * kappa + 1e-6, "certified {}", cert.upper_bound);
    }

    #[test]
    fn frobenius_identity_enumerable_opt() {
        // A = I_4, r = 1, kappa = 1: OPT = 3 over coordinate directions
        let a = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let params = SolveParams::default();
        let p = robust_pca_frobenius(&a, 1, &budget, &params).unwrap();
        let err = frobenius_residual_sq(&p, &a);
        assert!(err >= 3.0 - 1e-6, "error {err} below OPT");
        assert!(err <= 3.0 * (2.0 + params.gamma) + 0.05, "error {err}");
    }

    #[test]
    fn frobenius_single_column_half_mass() {
        let u = DVector::from_element(4, 0.5);
        let a = DataMatrix::from_columns(&[u]).unwrap();
        let budget = RobustnessBudget::linf(2.0f64.sqrt()).unwrap();
        let params = SolveParams::default();
        let p = robust_pca_frobenius(&a, 1, &budget, &params).unwrap();
        let err = frobenius_residual_sq(&p, &a);
        assert!(err <= (2.0 + params.gamma) * 0.5 + 1e-3, "error {err}");
    }

    #[test]
    fn frobenius_bicriteria_identity() {
        let a = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let params = SolveParams::default(); // gamma = 1
        let p = robust_pca_frobenius_bicriteria(&a, 1, &budget, &params).unwrap();
        assert!(p.rank() <= 2, "rank {} exceeds r(1 + 1/gamma)", p.rank());
        let err = frobenius_residual_sq(&p, &a);
        assert!(err >= 2.0 - 1e-6, "rank-2 OPT is 2");
        assert!(err <= 2.0 * (1.0 + params.gamma) + 0.05, "error {err}");
    }

    #[test]
    fn bicriteria_zero_matrix() {
        let a = DataMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let p = robust_pca_frobenius_bicriteria(&a, 1, &budget, &SolveParams::default()).unwrap();
        assert_eq!(p.rank(), 0);
    }

    #[test]
    fn spectral_planted_exact() {
        let v = DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]).normalize();
        let cols: Vec<DVector<f64>> = (0..6).map(|j| (1.0 + 0.2 * j as f64) * v.clone()).collect();
        let a = DataMatrix::from_columns(&cols).unwrap();
        let budget = RobustnessBudget::linf(2.0f64.sqrt()).unwrap();
        let params = SolveParams::default();
        let p = robust_pca_spectral(&a, 1, &budget, &params, false).unwrap();
        let err = spectral_residual(&p, &a);
        assert!(err <= 1e-3 * a.spectral_norm(), "residual {err}");
    }

    #[test]
    fn spectral_identity_bounds() {
        let a = DataMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let params = SolveParams::default();
        let p = robust_pca_spectral(&a, 1, &budget, &params, false).unwrap();
        assert!(p.rank() <= 1);
        let err = spectral_residual(&p, &a);
        assert!(err >= 1.0 - 1e-6, "OPT = 1");
        assert!(err <= (3.0 + params.gamma).sqrt() + 0.05, "error {err}");
    }

    #[test]
    fn spectral_zero() {
        let a = DataMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let p = robust_pca_spectral(&a, 1, &budget, &SolveParams::default(), false).unwrap();
        assert_eq!(spectral_residual(&p, &a), 0.0);
    }

    #[test]
    fn spectral_bicriteria_rank_bound() {
        let mut r = crate::rng::rng(81);
        let a =
            DataMatrix::new(DMatrix::from_fn(6, 9, |_, _| r.sample::<f64, _>(StandardNormal))).unwrap();
        let budget = RobustnessBudget::linf(1.5).unwrap();
        let params = SolveParams::default(); // gamma = 1 -> rank <= 3r
        let p = robust_pca_spectral(&a, 1, &budget, &params, true).unwrap();
        assert!(p.rank() <= 3, "rank {}", p.rank());
        // norm certificate within sqrt(C_G (1 + 2/gamma)) kappa
        let cert = certify_projection_norm(&p, &budget, 100, 1).unwrap();
        let cap = (std::f64::consts::FRAC_PI_2 * 3.0).sqrt() * 1.5;
        assert!(cert.upper_bound <= cap + 1e-6, "certified {} vs {}", cert.upper_bound, cap);
    }

    #[test]
    fn recover_subspace_planted_noiseless() {
        let mut v = DVector::zeros(6);
        v[0] = std::f64::consts::FRAC_1_SQRT_2;
        v[3] = std::f64::consts::FRAC_1_SQRT_2;
        let cols: Vec<DVector<f64>> = (0..8).map(|j| (1.0 + j as f64 * 0.1) * v.clone()).collect();
        let a = DataMatrix::from_columns(&cols).unwrap();
        let budget = RobustnessBudget::linf(2.0f64.sqrt()).unwrap();
        let pstar = Projection::from_vector(&v).unwrap();
        let p = recover_subspace(&a, 1, &budget, &SolveParams::default(), 1.0).unwrap();
        let s = crate::matcore::sin_theta_sq(&p, &pstar).unwrap();
        assert!(s <= 1e-3, "sin theta sq {s}");
    }

    #[test]
    fn recover_subspace_rank_zero() {
        let a = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let p = recover_subspace(&a, 0, &budget, &SolveParams::default(), 1.0).unwrap();
        assert_eq!(p.rank(), 0);
        let pstar = Projection::from_vector(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        let s = crate::matcore::sin_theta_sq(&p, &pstar).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12); // = ||Pi*||_F^2
    }

    #[test]
    fn outputs_always_satisfy_projection_invariants() {
        let mut r = crate::rng::rng(82);
        for trial in 0..4 {
            let n = 5 + trial;
            let a = DataMatrix::new(DMatrix::from_fn(n, n + 2, |_, _| {
                r.sample::<f64, _>(StandardNormal)
            }))
            .unwrap();
            let budget = RobustnessBudget::linf(1.3).unwrap();
            let params = SolveParams::default().with_seed(trial as u64);
            let sol = solve_frobenius_relax(&a, 2, &budget, &params).unwrap();
            check_solution_invariants(&sol, 2, &budget).unwrap();
            let p = round_truncate_greedy(&sol, &a.gram(), 2, params.gamma).unwrap();
            assert!(p.rank() <= 2);
            // rounded projector norm within the 1/(1-delta) blow-up of X
            let bound = exact_q_to_2_bruteforce(&p.matrix(), Exponent::Inf, 0).unwrap().powi(2);
            let source = exact_psd_quadratic_max(&sol.x).unwrap().0;
            let delta = 1.0 / (1.0 + params.gamma);
            assert!(bound <= source / (1.0 - delta) + 1e-6);
        }
    }
}
