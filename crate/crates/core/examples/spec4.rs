use robsub_core::matcore::{spectral_norm, DataMatrix, Exponent};
use robsub_core::meanest::*;
use robsub_core::poisoning::{corrupt_instance, CorruptionSpec, CorruptionStrategy};
use robsub_core::rng::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn main() {
    // acceptance-7 size: k = 25-sparse unit mean, sigma = 0.1, delta = sigma/kappa, m = 2000, n = 400
    let n = 400; let k = 25; let sigma = 0.1; let m = 2000;
    let kappa = (k as f64).sqrt();
    let delta = sigma / kappa;
    for seed in 0..3u64 {
        let mut r = rng(seed);
        let inv = 1.0 / kappa;
        let mut mu = DVector::zeros(n);
        for i in 0..k { mu[i] = inv; }
        let mut g = DMatrix::from_fn(n, m, |_, _| r.sample::<f64, _>(StandardNormal));
        for i in 0..n {
            let mean: f64 = (0..m).map(|j| g[(i, j)]).sum::<f64>() / m as f64;
            for j in 0..m { g[(i, j)] -= mean; }
        }
        let gn = spectral_norm(&g);
        g *= 0.95 * sigma * (m as f64).sqrt() / gn;
        let a = DataMatrix::new(&mu * DMatrix::from_element(1, m, 1.0) + g).unwrap();
        let spec = CorruptionSpec::new(delta, Exponent::Inf, CorruptionStrategy::IidUniform).unwrap();
        let at = corrupt_instance(&a, &spec, 1000 + seed);
        let t0 = Instant::now();
        let out = robust_mean(&at, kappa, sigma, Exponent::Inf).unwrap();
        match out {
            robsub_core::CertifyOutcome::Solved(s) => {
                let err = (&s.mu_hat - &mu).norm();
                println!("seed {seed}: solved, err {err:.4} (bound {:.3}) in {:?}", 20.0*(sigma as f64).max((sigma*mu.norm()).sqrt()), t0.elapsed());
            }
            robsub_core::CertifyOutcome::BadInput { residual, tau } => {
                println!("seed {seed}: BADINPUT residual {residual:.3} tau {tau:.3} in {:?}", t0.elapsed());
            }
        }
    }
}
