//! Robust clustering of spectrally stable instances under per-point
//! corruption: stability checking, robust initialization (certify-or-solve
//! plus constant-factor k-means on the projected points), the one-shot
//! center improvement with 1/3-margin sets, and the robust Lloyd iteration
//! with per-cluster robust mean updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Error;
use crate::matcore::{spectral_norm, DataMatrix, Exponent, Projection, RobustnessBudget};
use crate::meanest::{robust_mean_with, RobustMeanOptions};
use crate::poisoning::{certify_or_project_spectral, CertifyOutcome};
use crate::rng::{derive_seed, rng_for};
use crate::sdpsolve::SolveParams;
use crate::Result;

/// A labeled clustering instance with its stability data.
#[derive(Debug, Clone)]
pub struct ClusterInstance {
    pub a: DataMatrix,
    /// Ground-truth labels in `0..k` (test-only).
    pub labels: Vec<usize>,
    pub centers: Vec<DVector<f64>>,
    pub sigma: f64,
    pub k: usize,
    pub kappa: f64,
    pub delta: f64,
    pub mu_max: f64,
    /// `(1 + kappa delta / sigma)(1 + mu_max / sigma)^{2/3}`.
    pub alpha: f64,
}

impl ClusterInstance {
    pub fn new(
        a: DataMatrix,
        labels: Vec<usize>,
        sigma: f64,
        kappa: f64,
        delta: f64,
    ) -> Result<Self> {
        let m = a.m();
        if labels.len() != m {
            return Err(Error::KMismatch(format!("{} labels for {m} columns", labels.len())));
        }
        let k = labels.iter().copied().max().map_or(0, |x| x + 1);
        if k == 0 {
            return Err(Error::InvalidParams("no labels".into()));
        }
        let mut counts = vec![0usize; k];
        let mut centers = vec![DVector::zeros(a.n()); k];
        for (j, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            centers[l] += a.column(j);
        }
        for (r, c) in counts.iter().enumerate() {
            if *c == 0 {
                return Err(Error::EmptyCluster(r));
            }
            centers[r] /= *c as f64;
        }
        let mut centered = a.matrix().clone();
        for (j, &l) in labels.iter().enumerate() {
            for i in 0..a.n() {
                centered[(i, j)] -= centers[l][i];
            }
        }
        let dev = spectral_norm(&centered);
        if dev > sigma * (m as f64).sqrt() * (1.0 + 1e-9) {
            return Err(Error::InvalidParams(format!(
                "variance bound violated: {dev} > sigma sqrt(m) = {}",
                sigma * (m as f64).sqrt()
            )));
        }
        let mu_max = centers.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let alpha = (1.0 + kappa * delta / sigma) * (1.0 + mu_max / sigma).powf(2.0 / 3.0);
        Ok(ClusterInstance { a, labels, centers, sigma, k, kappa, delta, mu_max, alpha })
    }

    pub fn cluster_size(&self, r: usize) -> usize {
        self.labels.iter().filter(|&&l| l == r).count()
    }
}

/// Per-pair stability report.
#[derive(Debug, Clone)]
pub struct PairStability {
    pub from: usize,
    pub to: usize,
    /// Required margin `Delta_{r,s}`.
    pub required: f64,
    /// Worst realized margin over points of cluster `from`.
    pub realized: f64,
    pub stable: bool,
}

/// Checks the spectral-stability margins: every point of cluster `r`,
/// projected onto the line joining `mu_r` and `mu_s`, must be closer to
/// `mu_r` than to `mu_s` by `Delta_{r,s} = c alpha sigma sqrt(k)
/// (sqrt(m)/sqrt(|C_r|) + sqrt(m)/sqrt(|C_s|))`.
pub fn stability_margin(inst: &ClusterInstance, c: f64) -> Result<Vec<PairStability>> {
    let m = inst.a.m() as f64;
    let mut out = Vec::new();
    for r in 0..inst.k {
        let size_r = inst.cluster_size(r);
        if size_r == 0 {
            return Err(Error::EmptyCluster(r));
        }
        for s in 0..inst.k {
            if s == r {
                continue;
            }
            let size_s = inst.cluster_size(s);
            if size_s == 0 {
                return Err(Error::EmptyCluster(s));
            }
            let required = c
                * inst.alpha
                * inst.sigma
                * (inst.k as f64).sqrt()
                * (m.sqrt() / (size_r as f64).sqrt() + m.sqrt() / (size_s as f64).sqrt());
            let dir = &inst.centers[s] - &inst.centers[r];
            let dn = dir.norm();
            if dn < 1e-300 {
                out.push(PairStability { from: r, to: s, required, realized: 0.0, stable: false });
                continue;
            }
            let d = dir / dn;
            let mut worst = f64::INFINITY;
            for (j, &l) in inst.labels.iter().enumerate() {
                if l != r {
                    continue;
                }
                let x = inst.a.column(j);
                // projection onto the mu_r -- mu_s line
                let t = (&x - &inst.centers[r]).dot(&d);
                let xbar = &inst.centers[r] + t * &d;
                let margin = (&xbar - &inst.centers[s]).norm() - (&xbar - &inst.centers[r]).norm();
                worst = worst.min(margin);
            }
            out.push(PairStability {
                from: r,
                to: s,
                required,
                realized: worst,
                stable: worst >= required,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// k-means++ with Lloyd refinement (the constant-factor surrogate)
// ---------------------------------------------------------------------------

fn kmeans_cost(points: &[DVector<f64>], centers: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .map(|p| centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min))
        .sum()
}

fn nearest_center(p: &DVector<f64>, centers: &[DVector<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best_d - 1e-15 {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Seeded k-means++ with local Lloyd refinement and restarts.
pub fn kmeans_plus_plus(
    points: &[DVector<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    let m = points.len();
    if k == 0 || k > m {
        return Err(Error::KMeansFailure(format!("k = {k} with {m} points")));
    }
    let mut best: Option<(f64, Vec<DVector<f64>>)> = None;
    for restart in 0..restarts.max(1) {
        let mut r = rng_for(seed, restart as u64);
        let mut centers: Vec<DVector<f64>> = vec![points[r.random_range(0..m)].clone()];
        while centers.len() < k {
            let d2: Vec<f64> = points
                .iter()
                .map(|p| centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d2.iter().sum();
            let next = if total <= 1e-300 {
                r.random_range(0..m)
            } else {
                let mut target = r.random_range(0.0..total);
                let mut idx = m - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        idx = i;
                        break;
                    }
                    target -= w;
                }
                idx
            };
            centers.push(points[next].clone());
        }
        // Lloyd refinement
        for _ in 0..100 {
            let assign: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
            let mut sums = vec![DVector::zeros(points[0].len()); k];
            let mut counts = vec![0usize; k];
            for (j, &a) in assign.iter().enumerate() {
                sums[a] += &points[j];
                counts[a] += 1;
            }
            let mut moved = 0.0f64;
            for i in 0..k {
                if counts[i] > 0 {
                    let new = &sums[i] / counts[i] as f64;
                    moved = moved.max((&new - &centers[i]).norm());
                    centers[i] = new;
                }
            }
            if moved < 1e-12 {
                break;
            }
        }
        let cost = kmeans_cost(points, &centers);
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, centers));
        }
    }
    let (_, centers) = best.expect("at least one restart");
    let assign: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
    Ok((centers, assign))
}

// ---------------------------------------------------------------------------
// Robust initialization, center improvement, Lloyd iteration
// ---------------------------------------------------------------------------

/// Payload of a successful initialization.
#[derive(Debug, Clone)]
pub struct LloydInit {
    pub centers: Vec<DVector<f64>>,
    pub projection: Projection,
    pub residual: f64,
    pub norm_certificate: f64,
}

fn default_cluster_params(params: &SolveParams) -> SolveParams {
    // small rounding slack so the tau check is comfortable on conforming
    // instances (same convention as robust mean estimation)
    SolveParams { gamma: params.gamma.min(0.25), ..*params }
}

/// Robust initial centers: certify-or-solve a rank-`k` robust projection
/// (`tau = 2 sigma sqrt(m)`), project the input, and run seeded k-means++
/// with 10 restarts on the projected points.
pub fn lloyd_init(
    a_tilde: &DataMatrix,
    k: usize,
    kappa: f64,
    sigma: f64,
    q: Exponent,
    params: &SolveParams,
) -> Result<CertifyOutcome<LloydInit>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParams("sigma must be positive".into()));
    }
    if k == 0 || k > a_tilde.m() {
        return Err(Error::KMeansFailure(format!("k = {k} with m = {}", a_tilde.m())));
    }
    let budget = RobustnessBudget::new(q, kappa.max(1.0))?;
    let tau = 2.0 * sigma * (a_tilde.m() as f64).sqrt();
    let inner = default_cluster_params(params);
    match certify_or_project_spectral(a_tilde, tau, k, &budget, &inner)? {
        CertifyOutcome::BadInput { residual, tau } => Ok(CertifyOutcome::BadInput { residual, tau }),
        CertifyOutcome::Solved(s) => {
            let projected = crate::matcore::apply_projection(&s.projection, a_tilde)?;
            let points: Vec<DVector<f64>> = (0..projected.m()).map(|j| projected.column(j)).collect();
            let (centers, _) = kmeans_plus_plus(&points, k, 10, derive_seed(params.seed, 1))?;
            Ok(CertifyOutcome::Solved(LloydInit {
                centers,
                projection: s.projection,
                residual: s.residual,
                norm_certificate: s.norm_certificate,
            }))
        }
    }
}

/// One-shot center improvement: form the 1/3-margin sets
/// `S_r = {Pi Atilde_i : ||Pi Atilde_i - nu_r|| <= ||Pi Atilde_i - nu_s||/3
/// for all s != r}` (not a partition; unassigned points are dropped) and
/// return their means. Empty sets keep the previous center, flagged false.
pub fn center_improve(
    a_tilde: &DataMatrix,
    p: &Projection,
    centers: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<bool>)> {
    let k = centers.len();
    if k == 0 {
        return Err(Error::InvalidParams("no centers".into()));
    }
    let projected = crate::matcore::apply_projection(p, a_tilde)?;
    let mut sums = vec![DVector::zeros(a_tilde.n()); k];
    let mut counts = vec![0usize; k];
    for j in 0..projected.m() {
        let x = projected.column(j);
        let dists: Vec<f64> = centers.iter().map(|c| (&x - c).norm()).collect();
        let mut winner = 0usize;
        for i in 1..k {
            if dists[i] < dists[winner] - 1e-15 {
                winner = i;
            }
        }
        let ok = (0..k).all(|s| s == winner || dists[winner] <= dists[s] / 3.0);
        if ok {
            sums[winner] += &x;
            counts[winner] += 1;
        }
    }
    let mut out = Vec::with_capacity(k);
    let mut updated = Vec::with_capacity(k);
    for r in 0..k {
        if counts[r] > 0 {
            out.push(&sums[r] / counts[r] as f64);
            updated.push(true);
        } else {
            out.push(centers[r].clone());
            updated.push(false);
        }
    }
    Ok((out, updated))
}

/// Result of a robust Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydResult {
    pub centers: Vec<DVector<f64>>,
    pub assignment: Vec<usize>,
    pub projection: Projection,
    pub iterations: usize,
}

/// The robust Lloyd iteration: initialize robustly, improve once via the
/// 1/3-margin sets, then iterate nearest-center assignment in the projected
/// space with per-cluster robust mean updates (`sigma` bound `4 sigma`) on
/// the original input columns. Any per-cluster certification failure aborts
/// the whole run with `BadInput`.
pub fn robust_lloyd(
    a_tilde: &DataMatrix,
    k: usize,
    kappa: f64,
    sigma: f64,
    q: Exponent,
    t_iterations: usize,
    params: &SolveParams,
) -> Result<CertifyOutcome<LloydResult>> {
    let init = match lloyd_init(a_tilde, k, kappa, sigma, q, params)? {
        CertifyOutcome::BadInput { residual, tau } => {
            return Ok(CertifyOutcome::BadInput { residual, tau })
        }
        CertifyOutcome::Solved(init) => init,
    };
    let projection = init.projection;
    let (mut centers, _) = center_improve(a_tilde, &projection, &init.centers)?;
    let projected = crate::matcore::apply_projection(&projection, a_tilde)?;
    let mut iterations = 1usize;

    for t in 2..=t_iterations.max(2) {
        iterations = t;
        // assignment in the projected space, ties to the lower index
        let assign: Vec<usize> =
            (0..projected.m()).map(|j| nearest_center(&projected.column(j), &centers)).collect();
        let groups: Vec<Vec<usize>> = (0..k)
            .map(|r| (0..a_tilde.m()).filter(|&j| assign[j] == r).collect())
            .collect();
        // per-cluster robust mean on the original columns
        let updates: Vec<Result<Option<DVector<f64>>>> = groups
            .par_iter()
            .enumerate()
            .map(|(r, idx)| -> Result<Option<DVector<f64>>> {
                if idx.is_empty() {
                    return Ok(None);
                }
                let sub = a_tilde.select_columns(idx)?;
                let opts = RobustMeanOptions {
                    project: true,
                    params: SolveParams {
                        seed: derive_seed(params.seed, (t * 1000 + r) as u64),
                        gamma: 0.25,
                        ..*params
                    },
                };
                match robust_mean_with(&sub, kappa, 4.0 * sigma, q, &opts)? {
                    CertifyOutcome::Solved(s) => Ok(Some(s.mu_hat)),
                    CertifyOutcome::BadInput { residual, tau } => Err(Error::SolverFailure(format!(
                        "robust mean certified poisoning in cluster {r}: residual {residual} > tau {tau}"
                    ))),
                }
            })
            .collect();
        let mut moved = 0.0f64;
        for (r, upd) in updates.into_iter().enumerate() {
            match upd {
                Ok(Some(mu)) => {
                    moved = moved.max((&mu - &centers[r]).norm());
                    centers[r] = mu;
                }
                Ok(None) => {}
                Err(Error::SolverFailure(msg)) if msg.contains("certified poisoning") => {
                    // extract the residual for the outcome
                    let residual = msg
                        .split("residual ")
                        .nth(1)
                        .and_then(|s| s.split(' ').next())
                        .and_then(|s| s.parse::<f64>().ok())
                        .unwrap_or(f64::INFINITY);
                    let tau = 8.0 * sigma * (a_tilde.m() as f64).sqrt();
                    return Ok(CertifyOutcome::BadInput { residual, tau });
                }
                Err(e) => return Err(e),
            }
        }
        if moved <= 1e-10 * (1.0 + centers.iter().map(|c| c.norm()).fold(0.0f64, f64::max)) {
            break;
        }
    }
    let assignment: Vec<usize> =
        (0..projected.m()).map(|j| nearest_center(&projected.column(j), &centers)).collect();
    Ok(CertifyOutcome::Solved(LloydResult { centers, assignment, projection, iterations }))
}

/// Misclassification fraction: the minimum over label bijections of the
/// fraction of points assigned differently from the truth, computed from
/// the k x k overlap matrix.
pub fn misclassification(assignment: &[usize], truth: &[usize]) -> Result<f64> {
    if assignment.len() != truth.len() {
        return Err(Error::KMismatch(format!(
            "assignment length {} vs truth {}",
            assignment.len(),
            truth.len()
        )));
    }
    let m = truth.len();
    if m == 0 {
        return Ok(0.0);
    }
    let k = truth
        .iter()
        .chain(assignment.iter())
        .copied()
        .max()
        .unwrap()
        + 1;
    if k > 9 {
        return Err(Error::KMismatch(format!("permutation search supports k <= 9, got {k}")));
    }
    let mut overlap = vec![vec![0usize; k]; k];
    for (a, t) in assignment.iter().zip(truth.iter()) {
        overlap[*a][*t] += 1;
    }
    // maximize total overlap over bijections
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let total: usize = (0..k).map(|a| overlap[a][p[a]]).sum();
        if total > best {
            best = total;
        }
    });
    Ok((m - best) as f64 / m as f64)
}

fn permute(arr: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == arr.len() {
        visit(arr);
        return;
    }
    for i in start..arr.len() {
        arr.swap(start, i);
        permute(arr, start + 1, visit);
        arr.swap(start, i);
    }
}

// ---------------------------------------------------------------------------
// Stable-mixture generator (for tests and the experiment harness)
// ---------------------------------------------------------------------------

/// Parameters of a synthetic stable mixture with sparse, disjointly
/// supported centers.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Pairwise center separation (Euclidean).
    pub separation: f64,
    pub sigma: f64,
    /// Support size of each center direction.
    pub support: usize,
}

/// Samples an equal-weight Gaussian-style mixture with centers on disjoint
/// `support`-sparse directions; noise is column-centered per cluster and
/// rescaled so that `||A - C|| <= 0.97 sigma sqrt(m)` holds exactly.
pub fn sample_stable_mixture(spec: &MixtureSpec, delta: f64, kappa: f64, seed: u64) -> Result<ClusterInstance> {
    if spec.k * spec.support > spec.n {
        return Err(Error::InvalidParams("supports do not fit".into()));
    }
    if spec.m < 2 * spec.k {
        return Err(Error::InvalidParams("too few samples".into()));
    }
    let mut r = rng_for(seed, 0);
    let mut centers = Vec::with_capacity(spec.k);
    for c in 0..spec.k {
        let mut v: DVector<f64> = DVector::zeros(spec.n);
        let inv = 1.0 / (spec.support as f64).sqrt();
        for t in 0..spec.support {
            v[c * spec.support + t] = inv * if r.random::<bool>() { 1.0 } else { -1.0 };
        }
        centers.push(spec.separation * v);
    }
    let labels: Vec<usize> = (0..spec.m).map(|j| j % spec.k).collect();
    let mut noise = DMatrix::from_fn(spec.n, spec.m, |_, _| r.sample::<f64, _>(StandardNormal));
    // center noise within each cluster so centers stay exact
    for c in 0..spec.k {
        let idx: Vec<usize> = (0..spec.m).filter(|&j| labels[j] == c).collect();
        for i in 0..spec.n {
            let mean: f64 = idx.iter().map(|&j| noise[(i, j)]).sum::<f64>() / idx.len() as f64;
            for &j in &idx {
                noise[(i, j)] -= mean;
            }
        }
    }
    let nn = spectral_norm(&noise);
    if nn > 0.0 {
        noise *= 0.97 * spec.sigma * (spec.m as f64).sqrt() / nn;
    }
    let mut a = noise;
    for (j, &l) in labels.iter().enumerate() {
        for i in 0..spec.n {
            a[(i, j)] += centers[l][i];
        }
    }
    ClusterInstance::new(DataMatrix::new(a)?, labels, spec.sigma, kappa, delta)
}
