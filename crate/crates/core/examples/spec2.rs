use robsub_core::cluster::{sample_stable_mixture, MixtureSpec};
use robsub_core::matcore::{Exponent, RobustnessBudget};
use robsub_core::sdpsolve::*;
use std::time::Instant;

fn main() {
    let spec = MixtureSpec { n: 12, k: 2, m: 30, separation: 10.0, sigma: 0.1, support: 2 };
    let inst = sample_stable_mixture(&spec, 0.0, 2.0, 19).unwrap();
    let budget = RobustnessBudget::new(Exponent::Inf, 2.0).unwrap();
    let params = SolveParams { gamma: 0.25, ..SolveParams::default() };
    let t0 = Instant::now();
    let sol = solve_spectral_relax(&inst.a, 2, &budget, &params).unwrap();
    println!("lambda={:.9} rounds={} iters={} conv={} in {:?}", sol.lambda.unwrap(), sol.oracle_rounds, sol.iterations, sol.converged, t0.elapsed());
}
