use robsub_core::matcore::Exponent;
use robsub_core::meanest::*;
use robsub_core::rng::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use robsub_core::matcore::{spectral_norm, DataMatrix};
use std::time::Instant;

fn main() {
    // replicate robust_mean_sparse_gaussian_instance
    let n = 60; let k = 9; let sigma = 0.1; let m = 300;
    let mut r = rng(11);
    let inv = 1.0 / (k as f64).sqrt();
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
    let t0 = Instant::now();
    let out = robust_mean(&a, (k as f64).sqrt(), sigma, Exponent::Inf).unwrap();
    println!("solved={} in {:?}", out.is_solved(), t0.elapsed());
}
