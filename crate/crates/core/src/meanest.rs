//! Robust mean estimation under per-point corruption: the certify-or-
//! estimate algorithm built on the spectral certify-or-solve routine, the
//! information-theoretic lower-bound pair construction, and a tiny-scale
//! exhaustive estimator that searches over the corruption ball without
//! certification.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::matcore::{spectral_norm, DataMatrix, Exponent, Projection, RobustnessBudget};
use crate::opnorms::vector_norm;
use crate::poisoning::{certify_or_project_spectral, CertifyOutcome};
use crate::rng::rng;
use crate::sdpsolve::SolveParams;
use crate::Result;

/// A conforming mean-estimation instance: data, its mean, and certified
/// bounds. Construction re-verifies every stated invariant.
#[derive(Debug, Clone)]
pub struct MeanInstance {
    pub a: DataMatrix,
    pub mu: DVector<f64>,
    /// `||A - mu 1^T|| <= sigma sqrt(m)`.
    pub sigma: f64,
    /// Robustness bound of the mean direction (`q = inf` convention).
    pub kappa: f64,
}

impl MeanInstance {
    pub fn new(a: DataMatrix, sigma: f64, kappa: f64) -> Result<Self> {
        let mu = a.mean();
        let m = a.m() as f64;
        let centered = a.matrix() - &mu * DMatrix::from_element(1, a.m(), 1.0);
        let dev = spectral_norm(&centered);
        if dev > sigma * m.sqrt() * (1.0 + 1e-9) {
            return Err(Error::InvalidParams(format!(
                "variance bound violated: ||A - C|| = {dev} > sigma sqrt(m) = {}",
                sigma * m.sqrt()
            )));
        }
        let mu_norm = mu.norm();
        if mu_norm > 0.0 {
            let ratio = vector_norm(&mu, Exponent::Finite(1.0)) / mu_norm;
            if ratio > kappa * (1.0 + 1e-9) {
                return Err(Error::InvalidParams(format!(
                    "kappa = {kappa} below the mean direction's l1/l2 ratio {ratio}"
                )));
            }
        }
        Ok(MeanInstance { a, mu, sigma, kappa })
    }
}

/// Options for [`robust_mean`].
#[derive(Debug, Clone)]
pub struct RobustMeanOptions {
    /// Return the mean of the projected points (default). With `false` the
    /// raw mean of the input is returned instead; the output direction is
    /// then not itself robust to test-time perturbations.
    pub project: bool,
    pub params: SolveParams,
}

impl Default for RobustMeanOptions {
    fn default() -> Self {
        // a small rounding slack keeps the certification threshold
        // comfortable on conforming instances
        RobustMeanOptions { project: true, params: SolveParams { gamma: 0.25, ..SolveParams::default() } }
    }
}

/// Successful robust mean estimate.
#[derive(Debug, Clone)]
pub struct RobustMeanOutcome {
    pub mu_hat: DVector<f64>,
    pub projection: Projection,
    pub residual: f64,
    pub norm_certificate: f64,
}

/// Certify-or-estimate: runs the spectral certify-or-solve routine with
/// `tau = 2 sigma sqrt(m)` and rank 1; on success returns the mean of the
/// projected input columns.
pub fn robust_mean(
    a_tilde: &DataMatrix,
    kappa: f64,
    sigma: f64,
    q: Exponent,
) -> Result<CertifyOutcome<RobustMeanOutcome>> {
    robust_mean_with(a_tilde, kappa, sigma, q, &RobustMeanOptions::default())
}

pub fn robust_mean_with(
    a_tilde: &DataMatrix,
    kappa: f64,
    sigma: f64,
    q: Exponent,
    opts: &RobustMeanOptions,
) -> Result<CertifyOutcome<RobustMeanOutcome>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParams("sigma must be positive".into()));
    }
    let budget = RobustnessBudget::new(q, kappa.max(1.0))?;
    let tau = 2.0 * sigma * (a_tilde.m() as f64).sqrt();
    match certify_or_project_spectral(a_tilde, tau, 1, &budget, &opts.params)? {
        CertifyOutcome::BadInput { residual, tau } => Ok(CertifyOutcome::BadInput { residual, tau }),
        CertifyOutcome::Solved(s) => {
            let mu_hat = if opts.project {
                crate::matcore::apply_projection(&s.projection, a_tilde)?.mean()
            } else {
                a_tilde.mean()
            };
            Ok(CertifyOutcome::Solved(RobustMeanOutcome {
                mu_hat,
                projection: s.projection,
                residual: s.residual,
                norm_certificate: s.norm_certificate,
            }))
        }
    }
}

/// Exploratory variance estimate `||Atilde - mean 1^T|| / sqrt(m)`.
/// Non-conforming: on corrupted data this is not a valid bound for the
/// clean matrix; use only to pick a starting `sigma`.
pub fn estimate_sigma_nonconforming(a_tilde: &DataMatrix) -> f64 {
    let mu = a_tilde.mean();
    let centered = a_tilde.matrix() - &mu * DMatrix::from_element(1, a_tilde.m(), 1.0);
    spectral_norm(&centered) / (a_tilde.m() as f64).sqrt()
}

/// The information-theoretic lower-bound pair: two conforming instances
/// within entrywise distance `delta` whose means are `sqrt(3 sigma)` apart.
#[derive(Debug, Clone)]
pub struct MeanLbInstance {
    pub a: DataMatrix,
    pub a_tilde: DataMatrix,
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub k: usize,
    pub separation: f64,
}

/// Constructs the pair from `delta sqrt(k) = 3 sigma` and `delta n =
/// sqrt(k)`, giving `k = 3 sigma n`, `delta = sqrt(k)/n`, mean separation
/// `delta sqrt(n) = sqrt(3 sigma)`, and `kappa delta = 6 sigma` exactly.
pub fn mean_lb_instance(n: usize, sigma: f64, m: usize, seed: u64) -> Result<MeanLbInstance> {
    if !(sigma > 0.0 && sigma <= 1.0 / 6.0) {
        return Err(Error::InvalidParams(format!("sigma must be in (0, 1/6], got {sigma}")));
    }
    let k = (3.0 * sigma * n as f64).round() as usize;
    if k < 1 || k > n {
        return Err(Error::InvalidParams(format!(
            "k = round(3 sigma n) = {k} out of range for n = {n}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParams("need m >= 2".into()));
    }
    let delta = (k as f64).sqrt() / n as f64;
    let kappa = 2.0 * (k as f64).sqrt();
    let mut mu1 = DVector::zeros(n);
    let inv = 1.0 / (k as f64).sqrt();
    for i in 0..k {
        mu1[i] = inv;
    }
    // noise: zero on the support, Gaussian off-support, column-centered and
    // rescaled to spectral norm 0.9 sigma sqrt(m)
    let mut r = rng(seed);
    let mut g = DMatrix::zeros(n, m);
    for i in k..n {
        for j in 0..m {
            g[(i, j)] = r.sample::<f64, _>(StandardNormal);
        }
    }
    for i in k..n {
        let mean: f64 = (0..m).map(|j| g[(i, j)]).sum::<f64>() / m as f64;
        for j in 0..m {
            g[(i, j)] -= mean;
        }
    }
    let gnorm = spectral_norm(&g);
    if gnorm > 0.0 {
        g *= 0.9 * sigma * (m as f64).sqrt() / gnorm;
    }
    let ones_row = DMatrix::from_element(1, m, 1.0);
    let a_mat = &mu1 * &ones_row + &g;
    // sgn(mu1) with sgn(0) := +1 is the all-ones vector
    let shift = DVector::from_element(n, delta);
    let mu2 = &mu1 + &shift;
    let at_mat = &a_mat + &shift * &ones_row;
    let a = DataMatrix::new(a_mat)?;
    let a_tilde = DataMatrix::new(at_mat)?;
    let separation = (&mu2 - &mu1).norm();

    // re-verify the construction identities on the returned instance
    let check = |cond: bool, what: &str| -> Result<()> {
        if cond {
            Ok(())
        } else {
            Err(Error::SolverFailure(format!("lower-bound construction check failed: {what}")))
        }
    };
    check((separation - (k as f64 / n as f64).sqrt()).abs() <= 1e-9, "separation = sqrt(k)/sqrt(n)")?;
    let mu2_l1 = vector_norm(&mu2, Exponent::Finite(1.0));
    check((mu2_l1 - 2.0 * (k as f64).sqrt()).abs() <= 1e-9, "||mu2||_1 = 2 sqrt(k)")?;
    let mu2_norm = mu2.norm();
    check(mu2_norm >= 1.0 - 1e-9 && mu2_norm <= 2.0 + 1e-9, "||mu2|| in [1, 2]")?;
    check(kappa * delta <= 6.0 * sigma + 1e-9 * (1.0 + sigma), "kappa delta <= 6 sigma")?;
    let entrywise = (a.matrix() - a_tilde.matrix())
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    check(entrywise <= delta + 1e-12, "||A - Atilde||_inf <= delta")?;
    Ok(MeanLbInstance { a, a_tilde, mu1, mu2, kappa, delta, k, separation })
}

/// Exhaustive tiny-scale estimator: enumerates candidate rank-1 robust
/// directions (uniform sign vectors on every support), shrinks the input
/// toward each candidate subspace within the entrywise `delta` ball, and
/// returns the projected mean of the best (direction, shrunk-matrix) pair
/// by spectral residual. No certification: always outputs an estimate.
pub fn robust_mean_exhaustive(
    a_tilde: &DataMatrix,
    _kappa: f64,
    delta: f64,
    q: Exponent,
    budget: usize,
) -> Result<DVector<f64>> {
    let n = a_tilde.n();
    if n > 12 || !q.is_inf() {
        return Err(Error::TooLarge("exhaustive estimator needs n <= 12 and q = inf".into()));
    }
    let m = a_tilde.m();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut evaluated = 0usize;
    // supports in order of increasing size, sign patterns with first
    // support coordinate fixed positive
    for support_bits in 1u32..(1u32 << n) {
        if evaluated >= budget.max(1) {
            break;
        }
        let coords: Vec<usize> = (0..n).filter(|&i| support_bits >> i & 1 == 1).collect();
        let s = coords.len();
        let sign_patterns = 1u32 << (s - 1);
        for pat in 0..sign_patterns {
            if evaluated >= budget.max(1) {
                break;
            }
            evaluated += 1;
            let mut v = DVector::zeros(n);
            let mag = 1.0 / (s as f64).sqrt();
            for (idx, &c) in coords.iter().enumerate() {
                let sign = if idx == 0 {
                    1.0
                } else if pat >> (idx - 1) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                };
                v[c] = sign * mag;
            }
            // shrink each entry toward the candidate subspace
            let proj = &v * (v.transpose() * a_tilde.matrix());
            let mut b = a_tilde.matrix().clone();
            for i in 0..n {
                for j in 0..m {
                    let gap = proj[(i, j)] - b[(i, j)];
                    b[(i, j)] += gap.clamp(-delta, delta);
                }
            }
            let resid = spectral_norm(&(&b - &v * (v.transpose() * &b)));
            if best.as_ref().map_or(true, |(r0, _)| resid < *r0) {
                let bm = DataMatrix::new(b.clone())?;
                let mu_hat = &v * (v.transpose() * bm.mean());
                best = Some((resid, mu_hat));
            }
        }
    }
    best.map(|(_, mu)| mu)
        .ok_or_else(|| Error::SolverFailure("no candidate evaluated".into()))
}
