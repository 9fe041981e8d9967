use nalgebra::DMatrix;
use robsub_core::matcore::{DataMatrix, RobustnessBudget};
use robsub_core::sdpsolve::*;
use robsub_core::rng::rng;
use rand::Rng;
use std::time::Instant;

fn main() {
    let mut r = rng(42);
    for trial in 0..8 {
        let n = 4 + trial % 3;
        let m = n + 3;
        let a = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let kappa = 1.0 + (trial as f64) * 0.12;
        let budget = RobustnessBudget::linf(kappa).unwrap();
        let rank = 1 + trial % 2;
        let params = SolveParams::default().with_seed(trial as u64);
        let t0 = Instant::now();
        let prod = solve_frobenius_relax(&a, rank, &budget, &params).unwrap();
        let t1 = Instant::now();
        let refr = solve_frobenius_reference(&a, rank, &budget, &params).unwrap();
        let t2 = Instant::now();
        let scale = a.frobenius_norm().powi(2);
        println!("frob trial {trial}: n={n} r={rank} kappa={kappa:.2} prod={:.6} ref={:.6} reldiff={:.2e} times {:?}/{:?}",
            prod.objective/scale, refr.objective/scale,
            (prod.objective - refr.objective).abs()/scale, t1-t0, t2-t1);
    }
    for trial in 0..5 {
        let n = 4 + trial % 3;
        let m = n + 2;
        let a = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let budget = RobustnessBudget::linf(1.3).unwrap();
        let params = SolveParams::default().with_seed(100 + trial as u64);
        let prod = solve_spectral_relax(&a, 1, &budget, &params).unwrap();
        let refr = solve_spectral_reference(&a, 1, &budget, &params).unwrap();
        let scale = a.spectral_norm().powi(2);
        println!("spec trial {trial}: n={n} prod={:.6} ref={:.6} reldiff={:.2e}",
            prod.lambda.unwrap()/scale, refr.lambda.unwrap()/scale,
            (prod.lambda.unwrap() - refr.lambda.unwrap()).abs()/scale);
    }
    for trial in 0..5 {
        let n = 5;
        let m = 8;
        let a = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let budget = RobustnessBudget::linf(1.6).unwrap();
        let params = SolveParams::default().with_seed(200 + trial as u64);
        let prod = solve_spiked_relax(&a, 2, &budget, &params).unwrap();
        let refr = solve_spiked_reference(&a, 2, &budget, &params).unwrap();
        let scale = a.frobenius_norm().powi(2) / m as f64;
        println!("spik trial {trial}: n={n} prod={:.6} ref={:.6} reldiff={:.2e}",
            prod.objective/scale, refr.objective/scale,
            (prod.objective - refr.objective).abs()/scale);
    }
}
