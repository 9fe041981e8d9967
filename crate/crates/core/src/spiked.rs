//! The spiked covariance model: plant constructors and samplers, SDP-based
//! detection and recovery, covariance reconstruction, and a tiny-scale
//! brute-force statistical estimator used as an oracle in tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::matcore::{DataMatrix, Exponent, Projection, RobustnessBudget};
use crate::opnorms::exact_q_to_2_bruteforce;
use crate::rng::rng_for;
use crate::sdpsolve::{solve_spiked_relax, SolveParams};
use crate::Result;

/// A spiked covariance plant: rank-`r` signal `Sigma*` with eigenvalues in
/// `[theta_min, theta_max]` whose top eigenspace is a robust projection.
#[derive(Debug, Clone)]
pub struct SpikeModel {
    pub n: usize,
    pub r: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub sigma_star: DMatrix<f64>,
    pub pi_star: Projection,
    /// Recorded robustness bound (`sqrt(r) sqrt(k)` for disjoint uniform
    /// supports; exact at `r = 1`).
    pub kappa: f64,
    /// Gaussian-width constant: `2 sqrt(log n)` for `q >= log n`,
    /// `n^{1/q} sqrt(q)` otherwise.
    pub t_q: f64,
    /// Eigenvalues of the plant, one per spike.
    pub thetas: Vec<f64>,
}

/// Gaussian-width constant for dimension `n` and exponent `q`.
pub fn gaussian_width_constant(n: usize, q: Exponent) -> f64 {
    let logn = (n as f64).ln().max(1.0);
    match q {
        Exponent::Inf => 2.0 * logn.sqrt(),
        Exponent::Finite(qv) if qv >= logn => 2.0 * logn.sqrt(),
        Exponent::Finite(qv) => (n as f64).powf(1.0 / qv) * qv.sqrt(),
    }
}

/// Builds a plant with `r` disjoint-support unit directions, each uniform
/// (random signs) on `k` coordinates, and eigenvalues sampled in
/// `[theta_min, theta_max]`. At `r = 1`, `n <= 20`, `q = inf` the recorded
/// `kappa = sqrt(k)` is verified against the brute-force oracle.
pub fn make_sparse_spike(
    n: usize,
    r: usize,
    k: usize,
    theta_min: f64,
    theta_max: f64,
    q: Exponent,
    seed: u64,
) -> Result<SpikeModel> {
    if r == 0 || k == 0 || r * k > n {
        return Err(Error::InvalidParams(format!(
            "need r k <= n with positive r, k (got r = {r}, k = {k}, n = {n})"
        )));
    }
    if !(theta_min >= 0.0 && theta_max >= theta_min) {
        return Err(Error::InvalidParams("need 0 <= theta_min <= theta_max".into()));
    }
    let mut rngs = rng_for(seed, 0);
    let inv = 1.0 / (k as f64).sqrt();
    let mut basis = DMatrix::zeros(n, r);
    for c in 0..r {
        for t in 0..k {
            basis[(c * k + t, c)] = inv * if rngs.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    let thetas: Vec<f64> = (0..r)
        .map(|_| {
            if theta_max > theta_min {
                rngs.random_range(theta_min..theta_max)
            } else {
                theta_min
            }
        })
        .collect();
    let mut sigma_star = DMatrix::zeros(n, n);
    for c in 0..r {
        let v = basis.column(c).into_owned();
        sigma_star += thetas[c] * &v * v.transpose();
    }
    let pi_star = Projection::from_orthonormal(basis)?;
    // analytic-sparsity bound: kappa = sqrt(r) * k^{1/q* - 1/2}
    let q_star = q.dual().value();
    let kappa = (r as f64).sqrt() * (k as f64).powf(1.0 / q_star - 0.5);
    if r == 1 && n <= 20 && q.is_inf() {
        let exact = exact_q_to_2_bruteforce(&pi_star.matrix(), Exponent::Inf, 0)?;
        if (exact - (k as f64).sqrt()).abs() > 1e-8 {
            return Err(Error::SolverFailure(format!(
                "plant robustness check failed: {exact} vs sqrt(k) = {}",
                (k as f64).sqrt()
            )));
        }
    }
    Ok(SpikeModel {
        n,
        r,
        theta_min,
        theta_max,
        sigma_star,
        pi_star,
        kappa,
        t_q: gaussian_width_constant(n, q),
        thetas,
    })
}

/// Draws `m` i.i.d. samples from `N(0, I + Sigma*)` as
/// `x = g0 + U diag(sqrt(theta)) g1` with `U` the plant eigenbasis.
pub fn scm_sample(model: &SpikeModel, m: usize, seed: u64) -> Result<DataMatrix> {
    if m == 0 {
        return Err(Error::InvalidParams("need m >= 1".into()));
    }
    let n = model.n;
    let mut r = rng_for(seed, 1);
    let mut out = DMatrix::zeros(n, m);
    let basis = model.pi_star.basis();
    for j in 0..m {
        for i in 0..n {
            out[(i, j)] = r.sample::<f64, _>(StandardNormal);
        }
        for c in 0..model.r {
            let g: f64 = r.sample(StandardNormal);
            let scale = model.thetas[c].sqrt() * g;
            for i in 0..n {
                out[(i, j)] += scale * basis[(i, c)];
            }
        }
    }
    DataMatrix::new(out)
}

/// SDP detection: solves the spiked relaxation and answers Yes iff
/// `<A A^T / m, X> > (1 + theta_min / 2) r`.
pub fn spike_detect_sdp(
    a: &DataMatrix,
    r: usize,
    kappa: f64,
    q: Exponent,
    theta_min: f64,
    params: &SolveParams,
) -> Result<bool> {
    if !(theta_min > 0.0) {
        return Err(Error::InvalidParams("theta_min must be positive".into()));
    }
    let budget = RobustnessBudget::new(q, kappa.max(1.0))?;
    let sol = solve_spiked_relax(a, r, &budget, params)?;
    let m = a.m() as f64;
    let statistic = a.frobenius_norm().powi(2) / m - sol.objective;
    Ok(statistic > (1.0 + theta_min / 2.0) * r as f64)
}

/// SDP recovery: rounds the relaxation solution to its top-`r`
/// eigenprojector and reconstructs `Sigma_hat = Pi (A A^T / m) Pi - Pi`,
/// clipped to a PSD matrix of rank at most `r`.
pub fn spike_recover_sdp(
    a: &DataMatrix,
    r: usize,
    kappa: f64,
    q: Exponent,
    params: &SolveParams,
) -> Result<(Projection, DMatrix<f64>)> {
    let budget = RobustnessBudget::new(q, kappa.max(1.0))?;
    let sol = solve_spiked_relax(a, r, &budget, params)?;
    let eig = (0.5 * (&sol.x + sol.x.transpose())).symmetric_eigen();
    let n = a.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap());
    let chosen: Vec<usize> = order.into_iter().take(r).collect();
    let basis = DMatrix::from_fn(n, chosen.len(), |i, j| eig.eigenvectors[(i, chosen[j])]);
    let p = Projection::from_orthonormal(basis)?;
    let pi = p.matrix();
    let m = a.m() as f64;
    let sigma_raw = &pi * (a.gram() / m) * &pi - &pi;
    // clip to PSD; the range is inside span(Pi), so rank <= r
    let seig = (0.5 * (&sigma_raw + sigma_raw.transpose())).symmetric_eigen();
    let vals = DVector::from_fn(n, |i, _| seig.eigenvalues[i].max(0.0));
    let sigma_hat = &seig.eigenvectors * DMatrix::from_diagonal(&vals) * seig.eigenvectors.transpose();
    Ok((p, sigma_hat))
}

/// Brute-force statistical estimator (tiny scale, `r = 1`, `q = inf`):
/// maximizes `||Pi A||_F^2` over uniform-sign directions supported on every
/// `k`-subset and returns the best projector.
pub fn spike_recover_bruteforce(
    a: &DataMatrix,
    r: usize,
    k: usize,
    q: Exponent,
) -> Result<Projection> {
    let n = a.n();
    if n > 12 || r != 1 || !q.is_inf() {
        return Err(Error::TooLarge(
            "brute-force recovery supports n <= 12, r = 1, q = inf".into(),
        ));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParams(format!("support size {k} out of range")));
    }
    let gram = a.gram();
    let inv = 1.0 / (k as f64).sqrt();
    let mut best: Option<(f64, DVector<f64>)> = None;
    // enumerate supports of size k, sign patterns modulo global flip
    let mut support = Vec::with_capacity(k);
    enumerate_supports(n, k, 0, &mut support, &mut |coords: &[usize]| {
        let patterns = 1u32 << (k - 1);
        for pat in 0..patterns {
            let mut v = DVector::zeros(n);
            for (idx, &c) in coords.iter().enumerate() {
                let sign = if idx == 0 {
                    1.0
                } else if pat >> (idx - 1) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                };
                v[c] = sign * inv;
            }
            let val = (v.transpose() * &gram * &v)[(0, 0)];
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, v));
            }
        }
    });
    let (_, v) = best.ok_or_else(|| Error::SolverFailure("no candidate".into()))?;
    Projection::from_vector(&v)
}

fn enumerate_supports(
    n: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == k {
        visit(current);
        return;
    }
    let remaining = k - current.len();
    for i in start..=(n - remaining) {
        current.push(i);
        enumerate_supports(n, k, i + 1, current, visit);
        current.pop();
    }
}

/// Support of a projection read from its largest diagonal entries.
pub fn support_of_projection(p: &Projection, k: usize) -> Vec<usize> {
    let pi = p.matrix();
    let mut idx: Vec<usize> = (0..p.n()).collect();
    idx.sort_by(|&a, &b| pi[(b, b)].partial_cmp(&pi[(a, a)]).unwrap());
    let mut out: Vec<usize> = idx.into_iter().take(k).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::sin_theta_sq;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plant_construction_examples() {
        // n = 8, r = 1, k = 2 -> kappa verified sqrt(2)
        let m = make_sparse_spike(8, 1, 2, 1.0, 1.0, Exponent::Inf, 3).unwrap();
        assert_abs_diff_eq!(m.kappa, 2.0f64.sqrt(), epsilon = 1e-12);
        // theta_min = theta_max -> Sigma* = theta Pi*
        let diff = &m.sigma_star - m.pi_star.matrix();
        assert!(diff.norm() < 1e-12);
        // r = 2 disjoint supports: rank 2, <Pi*, Pi*> = 2
        let m2 = make_sparse_spike(10, 2, 3, 0.5, 2.0, Exponent::Inf, 4).unwrap();
        assert_eq!(m2.pi_star.rank(), 2);
        assert_abs_diff_eq!(m2.pi_star.matrix().norm_squared(), 2.0, epsilon = 1e-10);
        assert!(make_sparse_spike(5, 2, 3, 1.0, 1.0, Exponent::Inf, 0).is_err());
    }

    #[test]
    fn scm_sampler_covariance_converges() {
        let model = make_sparse_spike(12, 1, 3, 1.0, 1.0, Exponent::Inf, 5).unwrap();
        let m = 4000;
        let a = scm_sample(&model, m, 6).unwrap();
        let emp = a.gram() / m as f64;
        let target = DMatrix::identity(12, 12) + &model.sigma_star;
        let err = crate::matcore::spectral_norm(&(&emp - &target));
        assert!(err <= 5.0 / (m as f64).sqrt() * 12.0, "covariance error {err}");
        // <A A^T / m, Pi*> ~ r (1 + theta)
        let stat = (model.pi_star.matrix().transpose() * &emp).trace();
        assert!((stat - 2.0).abs() <= 5.0 / (m as f64).sqrt() * 4.0, "stat {stat}");
    }

    #[test]
    fn scm_sampler_null_case() {
        let model = make_sparse_spike(10, 1, 2, 0.0, 0.0, Exponent::Inf, 7).unwrap();
        let a = scm_sample(&model, 2000, 8).unwrap();
        let emp = a.gram() / 2000.0;
        let err = crate::matcore::spectral_norm(&(&emp - DMatrix::identity(10, 10)));
        assert!(err <= 5.0 / (2000.0f64).sqrt() * 10.0, "null covariance error {err}");
        // single sample is fine
        let one = scm_sample(&model, 1, 9).unwrap();
        assert_eq!(one.m(), 1);
    }

    #[test]
    fn detection_separates_planted_from_null() {
        let n = 30;
        let k = 4;
        let theta = 1.5;
        let model = make_sparse_spike(n, 1, k, theta, theta, Exponent::Inf, 11).unwrap();
        let m = 600;
        let params = SolveParams::default();
        let a = scm_sample(&model, m, 12).unwrap();
        let yes = spike_detect_sdp(&a, 1, model.kappa, Exponent::Inf, theta, &params).unwrap();
        assert!(yes, "planted instance must detect");
        let null_model = make_sparse_spike(n, 1, k, 0.0, 0.0, Exponent::Inf, 13).unwrap();
        let a0 = scm_sample(&null_model, m, 14).unwrap();
        let no = spike_detect_sdp(&a0, 1, model.kappa, Exponent::Inf, theta, &params).unwrap();
        assert!(!no, "null instance must not detect");
        // tiny m must not error
        let a2 = scm_sample(&model, 2, 15).unwrap();
        let _ = spike_detect_sdp(&a2, 1, model.kappa, Exponent::Inf, theta, &params).unwrap();
    }

    #[test]
    fn recovery_exact_plant_columns() {
        // noiseless columns spanning Pi*: recovered projector matches
        let model = make_sparse_spike(10, 1, 2, 2.0, 2.0, Exponent::Inf, 17).unwrap();
        let dir = model.pi_star.basis().column(0).into_owned();
        let cols: Vec<DVector<f64>> = (0..20).map(|j| (1.0 + 0.05 * j as f64) * dir.clone()).collect();
        let a = DataMatrix::from_columns(&cols).unwrap();
        let (p, _) = spike_recover_sdp(&a, 1, model.kappa, Exponent::Inf, &SolveParams::default())
            .unwrap();
        let s = sin_theta_sq(&p, &model.pi_star).unwrap();
        assert!(s <= 1e-6, "sin theta sq {s}");
    }

    #[test]
    fn recovery_large_sample_accuracy() {
        let n = 24;
        let model = make_sparse_spike(n, 1, 3, 2.0, 2.0, Exponent::Inf, 19).unwrap();
        let a = scm_sample(&model, 6000, 20).unwrap();
        let (p, sigma_hat) =
            spike_recover_sdp(&a, 1, model.kappa, Exponent::Inf, &SolveParams::default()).unwrap();
        let s = sin_theta_sq(&p, &model.pi_star).unwrap();
        assert!(s <= 0.05, "sin theta sq {s}");
        let err = (&sigma_hat - &model.sigma_star).norm_squared();
        assert!(err <= 0.5, "sigma error {err}");
        // rounding degradation: <Pi*, Pi> >= r - 2 (r - <Pi*, X>)
        // checked indirectly through the sin-theta bound above
        let seig = sigma_hat.symmetric_eigen();
        let positive = seig.eigenvalues.iter().filter(|&&v| v > 1e-9).count();
        assert!(positive <= 1, "rank of sigma_hat");
        assert!(seig.eigenvalues.iter().all(|&v| v >= -1e-9), "PSD after clipping");
    }

    #[test]
    fn recovery_null_data_gives_small_sigma() {
        let model = make_sparse_spike(16, 1, 2, 0.0, 0.0, Exponent::Inf, 21).unwrap();
        let m = 4000;
        let a = scm_sample(&model, m, 22).unwrap();
        let (_, sigma_hat) =
            spike_recover_sdp(&a, 1, 2.0f64.sqrt(), Exponent::Inf, &SolveParams::default()).unwrap();
        let err = sigma_hat.norm();
        assert!(err <= 3.0 / (m as f64).sqrt() * 10.0, "sigma_hat norm {err}");
    }

    #[test]
    fn bruteforce_recovers_support() {
        let model = make_sparse_spike(10, 1, 2, 3.0, 3.0, Exponent::Inf, 23).unwrap();
        let a = scm_sample(&model, 3000, 24).unwrap();
        let p = spike_recover_bruteforce(&a, 1, 2, Exponent::Inf).unwrap();
        let s = sin_theta_sq(&p, &model.pi_star).unwrap();
        assert!(s <= 0.05, "sin theta sq {s}");
        let truth = support_of_projection(&model.pi_star, 2);
        let found = support_of_projection(&p, 2);
        assert_eq!(truth, found);
    }

    #[test]
    fn bruteforce_rejects_out_of_scale() {
        let a = DataMatrix::new(DMatrix::identity(13, 13)).unwrap();
        assert!(spike_recover_bruteforce(&a, 1, 2, Exponent::Inf).is_err());
        let b = DataMatrix::new(DMatrix::identity(8, 8)).unwrap();
        assert!(spike_recover_bruteforce(&b, 2, 2, Exponent::Inf).is_err());
        // theta = 0 data: runs and returns something
        let model = make_sparse_spike(8, 1, 2, 0.0, 0.0, Exponent::Inf, 25).unwrap();
        let a0 = scm_sample(&model, 50, 26).unwrap();
        let p = spike_recover_bruteforce(&a0, 1, 2, Exponent::Inf).unwrap();
        assert_eq!(p.rank(), 1);
    }

    #[test]
    fn gaussian_width_constant_regimes() {
        let n = 50;
        assert_abs_diff_eq!(
            gaussian_width_constant(n, Exponent::Inf),
            2.0 * (50.0f64).ln().sqrt(),
            epsilon = 1e-12
        );
        // small q: n^{1/q} sqrt(q)
        assert_abs_diff_eq!(
            gaussian_width_constant(n, Exponent::Finite(2.0)),
            (50.0f64).powf(0.5) * (2.0f64).sqrt(),
            epsilon = 1e-12
        );
        // q above log n falls back to the log regime
        assert_abs_diff_eq!(
            gaussian_width_constant(n, Exponent::Finite(100.0)),
            2.0 * (50.0f64).ln().sqrt(),
            epsilon = 1e-12
        );
    }
}
