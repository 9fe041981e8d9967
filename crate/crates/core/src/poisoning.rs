//! Training-time corruption: per-column `l_q` corruption generators, the
//! Frobenius-minimizing shrinkage preprocessor, the poisoned-data Frobenius
//! algorithm, the spectral certify-or-solve algorithm, the test-time
//! adversarial displacement probe, and the additive-error tightness
//! construction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::lowrank::{certify_projection_norm, robust_pca_frobenius, robust_pca_spectral, spectral_residual};
use crate::matcore::{DataMatrix, Exponent, Projection, RobustnessBudget};
use crate::opnorms::{q_to_2_lower_bound, vector_norm};
use crate::rng::rng;
use crate::sdpsolve::SolveParams;
use crate::Result;

/// How the corruption generator perturbs each column (always within the
/// per-column `l_q` budget `delta`).
#[derive(Debug, Clone)]
pub enum CorruptionStrategy {
    /// Every column shifted by the same dense sign direction (a rank-1,
    /// spectrally large attack).
    SignShiftTowardDense,
    /// Each entry shrunk toward zero by up to `delta` (the attack the
    /// shrinkage preprocessor inverts).
    ShrinkSignal,
    /// Independent per-column perturbations drawn inside the `l_q` ball.
    IidUniform,
    /// Every column shifted by `delta` times the given direction, rescaled
    /// to unit `l_q` norm.
    Custom(DVector<f64>),
}

/// A column-wise corruption budget: `||Atilde_j - A_j||_q <= delta`.
#[derive(Debug, Clone)]
pub struct CorruptionSpec {
    pub delta: f64,
    pub q: Exponent,
    pub strategy: CorruptionStrategy,
}

impl CorruptionSpec {
    pub fn new(delta: f64, q: Exponent, strategy: CorruptionStrategy) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidParams(format!("delta must be >= 0, got {delta}")));
        }
        Ok(CorruptionSpec { delta, q, strategy })
    }
}

/// Tagged certify-or-solve outcome.
#[derive(Debug, Clone)]
pub enum CertifyOutcome<T> {
    Solved(T),
    /// The achieved residual exceeded the certification threshold `tau`.
    BadInput { residual: f64, tau: f64 },
}

impl<T> CertifyOutcome<T> {
    pub fn is_solved(&self) -> bool {
        matches!(self, CertifyOutcome::Solved(_))
    }

    pub fn solved(self) -> Option<T> {
        match self {
            CertifyOutcome::Solved(t) => Some(t),
            CertifyOutcome::BadInput { .. } => None,
        }
    }
}

/// Payload of a successful spectral certify-or-solve run.
#[derive(Debug, Clone)]
pub struct SolvedProjection {
    pub projection: Projection,
    /// Achieved `||Atilde - Pi Atilde||` (at most `tau` by construction).
    pub residual: f64,
    /// Oracle-certified `q -> 2` norm bound of the projection.
    pub norm_certificate: f64,
}

/// Applies the corruption strategy; every output column is verified to lie
/// within `l_q` distance `delta` of its input column (a tiny overshoot from
/// rounding is rescaled away). Deterministic per seed.
pub fn corrupt_instance(a: &DataMatrix, spec: &CorruptionSpec, seed: u64) -> DataMatrix {
    let n = a.n();
    let m = a.m();
    if spec.delta == 0.0 {
        return a.clone();
    }
    let mut r = rng(seed);
    let mut out = a.matrix().clone();
    let dense_dir: DVector<f64> = match &spec.strategy {
        CorruptionStrategy::SignShiftTowardDense => {
            let ones = DVector::from_element(n, 1.0);
            let nq = vector_norm(&ones, spec.q);
            ones / nq
        }
        CorruptionStrategy::Custom(dir) => {
            let nq = vector_norm(dir, spec.q);
            if nq > 0.0 {
                dir / nq
            } else {
                DVector::zeros(n)
            }
        }
        _ => DVector::zeros(n),
    };
    for j in 0..m {
        let col = a.column(j);
        let z: DVector<f64> = match &spec.strategy {
            CorruptionStrategy::SignShiftTowardDense | CorruptionStrategy::Custom(_) => {
                spec.delta * &dense_dir
            }
            CorruptionStrategy::ShrinkSignal => DVector::from_fn(n, |i, _| {
                let v = col[i];
                let shrink = match spec.q {
                    Exponent::Inf => v.abs().min(spec.delta),
                    _ => 0.0,
                };
                if spec.q.is_inf() {
                    -v.signum() * shrink
                } else {
                    0.0
                }
            }),
            CorruptionStrategy::IidUniform => match spec.q {
                Exponent::Inf => {
                    DVector::from_fn(n, |_, _| r.random_range(-spec.delta..spec.delta))
                }
                q => {
                    let g = DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal));
                    let nq = vector_norm(&g, q).max(1e-300);
                    let radius: f64 = r.random_range(0.0..1.0);
                    (spec.delta * radius / nq) * g
                }
            },
        };
        // finite-q ShrinkSignal: move toward zero along the ray
        let z = if matches!(spec.strategy, CorruptionStrategy::ShrinkSignal) && !spec.q.is_inf() {
            let nq = vector_norm(&col, spec.q);
            if nq <= spec.delta {
                -col.clone()
            } else {
                -(spec.delta / nq) * &col
            }
        } else {
            z
        };
        // verify and repair the budget
        let mut z = z;
        let zq = vector_norm(&z, spec.q);
        if zq > spec.delta {
            z *= spec.delta / zq;
        }
        for i in 0..n {
            out[(i, j)] += z[i];
        }
    }
    DataMatrix::new(out).expect("corruption preserves finiteness")
}

/// Euclidean projection of `v` onto the `l_q` ball of the given radius
/// (`q >= 1`; `q = inf` clamps entrywise, `q = 1` soft-thresholds, general
/// `q` bisects the Lagrange multiplier to 1e-8 accuracy).
pub fn project_onto_q_ball(v: &DVector<f64>, q: Exponent, radius: f64) -> DVector<f64> {
    if radius <= 0.0 {
        return DVector::zeros(v.len());
    }
    match q {
        Exponent::Inf => v.map(|x| x.clamp(-radius, radius)),
        Exponent::Finite(qv) if qv == 1.0 => {
            if vector_norm(v, q) <= radius {
                return v.clone();
            }
            let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
            let mut cum = 0.0;
            let mut theta = 0.0;
            for (i, &mg) in mags.iter().enumerate() {
                cum += mg;
                let cand = (cum - radius) / (i as f64 + 1.0);
                if cand >= mg {
                    break;
                }
                theta = cand;
            }
            v.map(|x| x.signum() * (x.abs() - theta.max(0.0)).max(0.0))
        }
        Exponent::Finite(qv) if qv == 2.0 => {
            let nrm = v.norm();
            if nrm <= radius {
                v.clone()
            } else {
                v * (radius / nrm)
            }
        }
        Exponent::Finite(qv) => {
            if vector_norm(v, q) <= radius {
                return v.clone();
            }
            // prox bisection: z + lam q z^{q-1} = |x| per entry
            let solve_entry = |x: f64, lam: f64| -> f64 {
                let target = x.abs();
                if target == 0.0 {
                    return 0.0;
                }
                let (mut lo, mut hi) = (0.0f64, target);
                for _ in 0..80 {
                    let z = 0.5 * (lo + hi);
                    if z + lam * qv * z.powf(qv - 1.0) > target {
                        hi = z;
                    } else {
                        lo = z;
                    }
                }
                x.signum() * 0.5 * (lo + hi)
            };
            let norm_at = |lam: f64| -> f64 {
                let z = v.map(|x| solve_entry(x, lam));
                vector_norm(&z, q)
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while norm_at(hi) > radius {
                hi *= 2.0;
                if hi > 1e18 {
                    break;
                }
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if norm_at(mid) > radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            v.map(|x| solve_entry(x, hi))
        }
    }
}

/// The shrinkage preprocessor: the minimizer of `||B||_F^2` over all `B`
/// with `||B_j - Atilde_j||_q <= delta` for every column. Columns separate,
/// and each column solves `B_j = Atilde_j - proj_{q-ball(delta)}(Atilde_j)`;
/// for `q = inf` this is the entrywise soft threshold.
pub fn shrink_gamma_q(a_tilde: &DataMatrix, delta: f64, q: Exponent) -> Result<DataMatrix> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams("delta must be >= 0".into()));
    }
    if delta == 0.0 {
        return Ok(a_tilde.clone());
    }
    let n = a_tilde.n();
    let m = a_tilde.m();
    let mut out = DMatrix::zeros(n, m);
    for j in 0..m {
        let col = a_tilde.column(j);
        let z = project_onto_q_ball(&col, q, delta);
        for i in 0..n {
            out[(i, j)] = col[i] - z[i];
        }
    }
    DataMatrix::new(out)
}

/// Poisoned-data Frobenius algorithm: shrink, then run the worst-case
/// Frobenius approximation on the shrunk matrix.
pub fn robust_pca_frobenius_poisoned(
    a_tilde: &DataMatrix,
    delta: f64,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<Projection> {
    let shrunk = shrink_gamma_q(a_tilde, delta, budget.q())?;
    robust_pca_frobenius(&shrunk, r, budget, params)
}

/// Spectral certify-or-solve: run the worst-case spectral approximation on
/// the corrupted input; output the projection when its residual on the
/// input is at most `tau`, else certify `BadInput` with the achieved
/// residual as evidence (so the caller can retry with larger `tau`).
pub fn certify_or_project_spectral(
    a_tilde: &DataMatrix,
    tau: f64,
    r: usize,
    budget: &RobustnessBudget,
    params: &SolveParams,
) -> Result<CertifyOutcome<SolvedProjection>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParams("tau must be positive".into()));
    }
    let p = robust_pca_spectral(a_tilde, r, budget, params, false)?;
    let residual = spectral_residual(&p, a_tilde);
    if residual <= tau {
        let cert = certify_projection_norm(&p, budget, 100, params.seed)?;
        Ok(CertifyOutcome::Solved(SolvedProjection {
            projection: p,
            residual,
            norm_certificate: cert.upper_bound,
        }))
    } else {
        Ok(CertifyOutcome::BadInput { residual, tau })
    }
}

/// Certified test-time displacement of a projection under `l_q`
/// perturbations of magnitude `delta`: bounds on
/// `sup_{||z||_q <= delta} ||Pi z||_2 = delta ||Pi||_{q->2}` plus the
/// achieving perturbation.
#[derive(Debug, Clone)]
pub struct Displacement {
    pub lower: f64,
    pub upper: f64,
    /// Perturbation with `||witness||_q <= delta` achieving `lower`.
    pub witness: DVector<f64>,
}

pub fn adversarial_displacement(
    p: &Projection,
    delta: f64,
    q: Exponent,
    rounds: usize,
    seed: u64,
) -> Result<Displacement> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams("delta must be >= 0".into()));
    }
    if delta == 0.0 || p.rank() == 0 {
        return Ok(Displacement { lower: 0.0, upper: 0.0, witness: DVector::zeros(p.n()) });
    }
    let est = q_to_2_lower_bound(&p.matrix(), q, rounds, seed)?;
    Ok(Displacement {
        lower: delta * est.lower_bound,
        upper: delta * est.upper_bound,
        witness: delta * est.witness,
    })
}

/// The additive-error tightness construction: a rank-1 planted instance
/// `A` with robustness exactly `kappa`, a `10 delta`-close instance `A'`
/// spanned by a strictly more robust direction, and the realized residual
/// `||A - Pi' A||_F` which is `Omega(delta kappa sqrt(m))`.
#[derive(Debug, Clone)]
pub struct TightnessInstance {
    pub a: DataMatrix,
    pub a_prime: DataMatrix,
    /// Projection spanning `A` (`l_1` mass `>= kappa`).
    pub p_star: Projection,
    /// Strictly more robust projection spanning `A'`.
    pub p_prime: Projection,
    /// `||A - Pi' A||_F`.
    pub residual: f64,
    /// `residual / (delta kappa sqrt(m))` (0 when `delta = 0`).
    pub realized_constant: f64,
}

pub fn additive_tightness_instance(
    kappa: f64,
    delta: f64,
    m: usize,
    n: usize,
) -> Result<TightnessInstance> {
    if kappa < 2.0 {
        return Err(Error::InvalidParams("construction needs kappa >= 2".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams("delta must be >= 0".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParams("m must be >= 1".into()));
    }
    let support = (kappa * kappa).ceil() as usize;
    let ell = support / 2;
    if ell == 0 || (ell as f64) < kappa * kappa / 2.0 - 1.0 {
        return Err(Error::InvalidParams("support arithmetic unsatisfiable".into()));
    }
    if n < support {
        return Err(Error::InvalidParams(format!(
            "dimension {n} too small to host support {support}"
        )));
    }
    let unit = 1.0 / (support as f64).sqrt();
    if delta > unit + 1e-12 {
        return Err(Error::InvalidParams(format!(
            "delta {delta} exceeds the smallest nonzero coordinate {unit}"
        )));
    }
    let mut v = DVector::zeros(n);
    for i in 0..support {
        v[i] = unit;
    }
    // first ell coordinates grow, next ell coordinates shrink
    let mut u = v.clone();
    for i in 0..ell {
        u[i] += delta;
    }
    for i in ell..(2 * ell).min(support) {
        u[i] -= delta;
    }
    let a = DataMatrix::new(DMatrix::from_fn(n, m, |i, _| v[i]))?;
    let a_prime = DataMatrix::new(DMatrix::from_fn(n, m, |i, _| u[i]))?;
    let p_star = Projection::from_vector(&v)?;
    let p_prime = Projection::from_vector(&u)?;
    let proj_a = crate::matcore::apply_projection(&p_prime, &a)?;
    let residual = (a.matrix() - proj_a.matrix()).norm();
    let denom = delta * kappa * (m as f64).sqrt();
    let realized_constant = if denom > 0.0 { residual / denom } else { 0.0 };
    Ok(TightnessInstance { a, a_prime, p_star, p_prime, residual, realized_constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opnorms::exact_q_to_2_bruteforce;
    use approx::assert_abs_diff_eq;

    #[test]
    fn corrupt_zero_delta_is_identity() {
        let a = DataMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let spec = CorruptionSpec::new(0.0, Exponent::Inf, CorruptionStrategy::IidUniform).unwrap();
        let b = corrupt_instance(&a, &spec, 1);
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn corrupt_respects_budget_all_strategies() {
        let mut r = crate::rng::rng(12);
        let a = DataMatrix::new(DMatrix::from_fn(5, 8, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0)))
            .unwrap();
        for q in [Exponent::Inf, Exponent::Finite(2.0), Exponent::Finite(3.0)] {
            for strat in [
                CorruptionStrategy::SignShiftTowardDense,
                CorruptionStrategy::ShrinkSignal,
                CorruptionStrategy::IidUniform,
                CorruptionStrategy::Custom(DVector::from_element(5, -1.0)),
            ] {
                let spec = CorruptionSpec::new(0.3, q, strat).unwrap();
                let b = corrupt_instance(&a, &spec, 7);
                for j in 0..a.m() {
                    let d = b.column(j) - a.column(j);
                    assert!(
                        vector_norm(&d, q) <= 0.3 + 1e-9,
                        "budget violated: {}",
                        vector_norm(&d, q)
                    );
                }
            }
        }
    }

    #[test]
    fn corrupt_sign_shift_matches_construction() {
        // on q = inf, every column moves by exactly delta in each coordinate
        let a = DataMatrix::new(DMatrix::zeros(3, 2).add_scalar(1.0)).unwrap();
        let spec =
            CorruptionSpec::new(0.1, Exponent::Inf, CorruptionStrategy::SignShiftTowardDense).unwrap();
        let b = corrupt_instance(&a, &spec, 0);
        for j in 0..2 {
            let d = b.column(j) - a.column(j);
            for i in 0..3 {
                assert_abs_diff_eq!(d[i], 0.1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn corrupt_deterministic_per_seed() {
        let a = DataMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let spec = CorruptionSpec::new(0.2, Exponent::Inf, CorruptionStrategy::IidUniform).unwrap();
        let b1 = corrupt_instance(&a, &spec, 5);
        let b2 = corrupt_instance(&a, &spec, 5);
        assert_eq!(b1.matrix(), b2.matrix());
    }

    #[test]
    fn shrink_soft_threshold_closed_form() {
        let a = DataMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 1.0, 0.05])).unwrap();
        let s = shrink_gamma_q(&a, 0.1, Exponent::Inf).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.4, -0.1, 0.9, 0.0]);
        assert!((s.matrix() - want).norm() < 1e-12);
    }

    #[test]
    fn shrink_zero_delta() {
        let a = DataMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, -2.0])).unwrap();
        let s = shrink_gamma_q(&a, 0.0, Exponent::Inf).unwrap();
        assert_eq!(a.matrix(), s.matrix());
    }

    #[test]
    fn shrink_l2_radial() {
        // single column (3,4), delta = 1, q = 2 -> (2.4, 3.2)
        let a = DataMatrix::from_columns(&[DVector::from_vec(vec![3.0, 4.0])]).unwrap();
        let s = shrink_gamma_q(&a, 1.0, Exponent::Finite(2.0)).unwrap();
        assert_abs_diff_eq!(s.matrix()[(0, 0)], 2.4, epsilon = 1e-10);
        assert_abs_diff_eq!(s.matrix()[(1, 0)], 3.2, epsilon = 1e-10);
    }

    #[test]
    fn shrink_finite_q_feasible_and_optimal_direction() {
        // result stays within the per-column ball and has smaller norm
        let mut r = crate::rng::rng(23);
        let a = DataMatrix::new(DMatrix::from_fn(4, 5, |_, _| rand::Rng::random_range(&mut r, -2.0..2.0)))
            .unwrap();
        let q = Exponent::Finite(3.0);
        let s = shrink_gamma_q(&a, 0.5, q).unwrap();
        for j in 0..a.m() {
            let d = a.column(j) - s.column(j);
            assert!(vector_norm(&d, q) <= 0.5 + 1e-7);
            assert!(s.column(j).norm() <= a.column(j).norm() + 1e-12);
        }
    }

    #[test]
    fn shrink_is_frobenius_minimal_on_grid() {
        // on 2x2 matrices the shrunk matrix beats every grid point of the
        // delta-infinity ball around the input
        let mut r = crate::rng::rng(31);
        for _ in 0..5 {
            let a = DataMatrix::new(DMatrix::from_fn(2, 2, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0)))
                .unwrap();
            let delta = 0.25;
            let s = shrink_gamma_q(&a, delta, Exponent::Inf).unwrap();
            let best = s.matrix().norm_squared();
            let steps: usize = 10; // grid step delta/5 per entry offset
            for g in 0..steps.pow(4) {
                let mut idx = g;
                let mut b = a.matrix().clone();
                for e in 0..4 {
                    let off = -delta + 2.0 * delta * ((idx % steps) as f64) / (steps as f64 - 1.0);
                    idx /= steps;
                    b[(e / 2, e % 2)] += off;
                }
                assert!(b.norm_squared() >= best - 1e-9);
            }
        }
    }

    #[test]
    fn closeness_lemma_projection_bounds() {
        // for column-close A, B and a robust projection:
        // (1-eta)||Pi A||_F^2 - (1/eta - 1) d^2 k^2 m <= ||Pi B||_F^2
        //   <= (1+eta)||Pi A||_F^2 + (1/eta + 1) d^2 k^2 m
        let mut r = crate::rng::rng(37);
        for trial in 0..100 {
            let n = 4 + trial % 7;
            let m = 6;
            let a = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0)))
                .unwrap();
            let delta = 0.2;
            let spec = CorruptionSpec::new(delta, Exponent::Inf, CorruptionStrategy::IidUniform).unwrap();
            let b = corrupt_instance(&a, &spec, trial as u64);
            // random sparse projection with brute-force certified kappa
            let mut v = DVector::zeros(n);
            v[trial % n] = 1.0;
            v[(trial + 1) % n] = if trial % 2 == 0 { 1.0 } else { -1.0 };
            let p = Projection::from_vector(&v).unwrap();
            let kappa = exact_q_to_2_bruteforce(&p.matrix(), Exponent::Inf, 0).unwrap();
            let pa = crate::matcore::apply_projection(&p, &a).unwrap().matrix().norm_squared();
            let pb = crate::matcore::apply_projection(&p, &b).unwrap().matrix().norm_squared();
            let dk2m = delta * delta * kappa * kappa * m as f64;
            for eta in [0.25, 0.5] {
                let lo = (1.0 - eta) * pa - (1.0 / eta - 1.0) * dk2m;
                let hi = (1.0 + eta) * pa + (1.0 / eta + 1.0) * dk2m;
                assert!(pb >= lo - 1e-9 && pb <= hi + 1e-9, "trial {trial}: {lo} {pb} {hi}");
            }
        }
    }

    #[test]
    fn identifiability_lemma_constructed_pairs() {
        // pairs (A, B, Pi1, Pi2) satisfying the hypotheses: the conclusion
        // holds with a factor-10 slack
        let mut r = crate::rng::rng(41);
        for trial in 0..20 {
            let n = 8;
            let m = 12;
            let mut v = DVector::zeros(n);
            v[0] = 1.0;
            v[1] = 1.0;
            let v = v.normalize();
            let mut w = DVector::zeros(n);
            w[1] = 1.0;
            w[2] = -1.0;
            let wn: DVector<f64> = w.normalize();
            let u = (&v + 0.2 * wn).normalize();
            let coeffs: Vec<f64> = (0..m).map(|_| r.random_range(0.5..1.5)).collect();
            let noise = 0.08;
            let mk = |dir: &DVector<f64>, seed: u64| -> DataMatrix {
                let mut rr = crate::rng::rng(seed);
                DataMatrix::new(DMatrix::from_fn(n, m, |i, j| {
                    coeffs[j] * dir[i] + noise * rand::Rng::random_range(&mut rr, -1.0..1.0)
                }))
                .unwrap()
            };
            let a = mk(&v, 100 + trial);
            let b = mk(&u, 100 + trial); // same noise stream: columns close
            let p1 = Projection::from_vector(&v).unwrap();
            let p2 = Projection::from_vector(&u).unwrap();
            let delta = (0..m)
                .map(|j| vector_norm(&(a.column(j) - b.column(j)), Exponent::Inf))
                .fold(0.0f64, f64::max);
            let na = a.spectral_norm();
            let eps1 = spectral_residual(&p1, &a) / na;
            let eps2 = spectral_residual(&p2, &b) / na;
            let eps = eps1 + eps2;
            let kappa = exact_q_to_2_bruteforce(&p1.matrix(), Exponent::Inf, 0).unwrap()
                + exact_q_to_2_bruteforce(&p2.matrix(), Exponent::Inf, 0).unwrap();
            let lhs = spectral_residual(&p2, &a);
            let rhs = 10.0
                * ((eps + eps.sqrt()) * na + 8.0 * kappa * delta * (m as f64).sqrt() / eps.sqrt());
            assert!(lhs <= rhs, "trial {trial}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn certify_never_solves_above_tau() {
        let mut r = crate::rng::rng(43);
        let budget = RobustnessBudget::linf(1.2).unwrap();
        for trial in 0..10 {
            let a = DataMatrix::new(DMatrix::from_fn(6, 9, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0)))
                .unwrap();
            let tau = 0.3 * a.spectral_norm();
            let out =
                certify_or_project_spectral(&a, tau, 1, &budget, &SolveParams::default().with_seed(trial))
                    .unwrap();
            if let CertifyOutcome::Solved(s) = out {
                assert!(s.residual <= tau, "solved with residual {} > tau {}", s.residual, tau);
            }
        }
    }

    #[test]
    fn certify_planted_instance_solves() {
        let v = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0, 0.0]).normalize();
        let cols: Vec<DVector<f64>> = (0..8).map(|j| (1.0 + 0.1 * j as f64) * v.clone()).collect();
        let a = DataMatrix::from_columns(&cols).unwrap();
        let budget = RobustnessBudget::linf(2.0f64.sqrt()).unwrap();
        let tau = 0.1 * a.spectral_norm();
        let out = certify_or_project_spectral(&a, tau, 1, &budget, &SolveParams::default()).unwrap();
        let s = out.solved().expect("planted instance must solve");
        assert!(s.residual <= 1e-6 * a.spectral_norm());
    }

    #[test]
    fn certify_identity_is_bad_input() {
        // c I_n with r = 1, kappa = 1, tau = c/2: every robust rank-1
        // projection leaves residual c
        let c = 2.0;
        let a = DataMatrix::new(DMatrix::identity(4, 4) * c).unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let out = certify_or_project_spectral(&a, c / 2.0, 1, &budget, &SolveParams::default()).unwrap();
        match out {
            CertifyOutcome::BadInput { residual, tau } => {
                assert!(residual >= c - 1e-6, "residual {residual}");
                assert_abs_diff_eq!(tau, c / 2.0, epsilon = 1e-12);
            }
            CertifyOutcome::Solved(_) => panic!("identity cannot be solved at this tau"),
        }
    }

    #[test]
    fn displacement_examples() {
        // P = e1 e1^T, delta = 0.1 -> displacement 0.1
        let p = Projection::from_vector(&DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let d = adversarial_displacement(&p, 0.1, Exponent::Inf, 50, 0).unwrap();
        assert_abs_diff_eq!(d.lower, 0.1, epsilon = 1e-9);
        assert!(d.upper >= d.lower - 1e-12);
        // witness achieves it
        let disp = p.apply_vector(&d.witness).unwrap().norm();
        assert_abs_diff_eq!(disp, d.lower, epsilon = 1e-9);

        // P = vv^T, v uniform on 2 coordinates, delta = 1 -> sqrt(2)
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let p2 = Projection::from_vector(&v).unwrap();
        let d2 = adversarial_displacement(&p2, 1.0, Exponent::Inf, 50, 1).unwrap();
        assert_abs_diff_eq!(d2.lower, 2.0f64.sqrt(), epsilon = 1e-9);

        // delta = 0 -> 0
        let d3 = adversarial_displacement(&p2, 0.0, Exponent::Inf, 10, 2).unwrap();
        assert_eq!(d3.lower, 0.0);
    }

    #[test]
    fn tightness_instance_realizes_additive_term() {
        let t = additive_tightness_instance(4.0, 0.01, 10, 32).unwrap();
        assert!(t.realized_constant >= 0.1, "constant {}", t.realized_constant);
        // A' is entrywise 10 delta close to A
        let diff = t.a.matrix() - t.a_prime.matrix();
        assert!(diff.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) <= 10.0 * 0.01 + 1e-12);
        // Pi' is strictly more robust and spans A' (rank-1: the inf->2
        // norm is the l1 mass of the unit direction)
        let n1 = vector_norm(&t.p_star.basis().column(0).into_owned(), Exponent::Finite(1.0));
        let n2 = vector_norm(&t.p_prime.basis().column(0).into_owned(), Exponent::Finite(1.0));
        assert!(n2 < n1, "{} !< {}", n2, n1);
        let pa = crate::matcore::apply_projection(&t.p_prime, &t.a_prime).unwrap();
        assert!((pa.matrix() - t.a_prime.matrix()).norm() < 1e-9);
    }

    #[test]
    fn tightness_zero_delta_and_minimal_kappa() {
        let t0 = additive_tightness_instance(4.0, 0.0, 5, 20).unwrap();
        assert!(t0.residual < 1e-12, "residual {}", t0.residual);
        assert!((t0.a.matrix() - t0.a_prime.matrix()).norm() == 0.0);
        // kappa = 2: support 4, ell = 2
        let t = additive_tightness_instance(2.0, 0.05, 6, 8).unwrap();
        assert!(t.residual > 0.0);
        assert!(additive_tightness_instance(1.5, 0.05, 6, 8).is_err());
        assert!(additive_tightness_instance(4.0, 0.01, 10, 8).is_err(), "n too small");
    }

    #[test]
    fn poisoned_frobenius_zero_delta_matches_plain() {
        let mut r = crate::rng::rng(53);
        let a = DataMatrix::new(DMatrix::from_fn(5, 7, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0)))
            .unwrap();
        let budget = RobustnessBudget::linf(1.4).unwrap();
        let params = SolveParams::default();
        let p1 = robust_pca_frobenius_poisoned(&a, 0.0, 1, &budget, &params).unwrap();
        let p2 = robust_pca_frobenius(&a, 1, &budget, &params).unwrap();
        assert!((p1.matrix() - p2.matrix()).norm() < 1e-9);
    }

    #[test]
    fn poisoned_frobenius_all_within_delta_of_zero() {
        // every entry within delta of zero: shrinkage empties the matrix
        let a = DataMatrix::new(DMatrix::from_fn(4, 5, |i, j| 0.05 * ((i + j) as f64 % 3.0 - 1.0)))
            .unwrap();
        let budget = RobustnessBudget::linf(1.0).unwrap();
        let p = robust_pca_frobenius_poisoned(&a, 0.2, 1, &budget, &SolveParams::default()).unwrap();
        assert_eq!(p.rank(), 0);
    }
}
