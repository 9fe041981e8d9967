use nalgebra::DMatrix;
use robsub_core::matcore::{DataMatrix, RobustnessBudget};
use robsub_core::sdpsolve::*;
use robsub_core::rng::rng;
use rand::Rng;

fn main() {
    let mut r = rng(42);
    // regenerate the same sequence as crosscheck: skip the 8 frob trials' draws
    for trial in 0..8 {
        let n = 4 + trial % 3;
        let m = n + 3;
        let _ = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
    }
    for trial in 0..5 {
        let n = 4 + trial % 3;
        let m = n + 2;
        let a = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let budget = RobustnessBudget::linf(1.3).unwrap();
        let params = SolveParams::default().with_seed(100 + trial as u64);
        let prod = solve_spectral_relax(&a, 1, &budget, &params).unwrap();
        println!("trial {trial}: lambda={:.6} rounds={} iters={} converged={}",
            prod.lambda.unwrap()/a.spectral_norm().powi(2), prod.oracle_rounds, prod.iterations, prod.converged);
    }
}
