use robsub_core::matcore::{spectral_norm, DataMatrix, Exponent, RobustnessBudget};
use robsub_core::rng::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn main() {
    let n = 400; let k = 25; let sigma = 0.1; let m = 2000;
    let kappa = (k as f64).sqrt();
    let mut r = rng(0);
    let inv = 1.0 / kappa;
    let mut mu = DVector::zeros(n);
    for i in 0..k { mu[i] = inv; }
    let mut g = DMatrix::from_fn(n, m, |_, _| r.sample::<f64, _>(StandardNormal));
    for i in 0..n {
        let mean: f64 = (0..m).map(|j| g[(i, j)]).sum::<f64>() / m as f64;
        for j in 0..m { g[(i, j)] -= mean; }
    }
    let t0 = Instant::now();
    let gn = spectral_norm(&g);
    println!("spectral_norm(400x2000): {:?}", t0.elapsed());
    g *= 0.95 * sigma * (m as f64).sqrt() / gn;
    let a = DataMatrix::new(&mu * DMatrix::from_element(1, m, 1.0) + g).unwrap();
    let t1 = Instant::now();
    let gram = a.gram();
    println!("gram(400x2000): {:?} {:.1e}", t1.elapsed(), gram[(0,0)]);
    let budget = RobustnessBudget::new(Exponent::Inf, kappa).unwrap();
    let params = robsub_core::SolveParams { gamma: 0.25, ..Default::default() };
    let t2 = Instant::now();
    let sol = robsub_core::sdpsolve::solve_spectral_relax(&a, 1, &budget, &params).unwrap();
    println!("solve_spectral_relax: {:?} (iters {}, rounds {})", t2.elapsed(), sol.iterations, sol.oracle_rounds);
    let t3 = Instant::now();
    let p = robsub_core::lowrank::robust_pca_spectral(&a, 1, &budget, &params, false).unwrap();
    println!("robust_pca_spectral total: {:?} rank {}", t3.elapsed(), p.rank());
    let t4 = Instant::now();
    let resid = robsub_core::lowrank::spectral_residual(&p, &a);
    println!("spectral_residual: {:?} ({resid:.3})", t4.elapsed());
    let t5 = Instant::now();
    let cert = robsub_core::lowrank::certify_projection_norm(&p, &budget, 100, 0).unwrap();
    println!("certify: {:?} ({:.3})", t5.elapsed(), cert.upper_bound);
}
