use faer::Mat;
use std::time::Instant;

fn main() {
    for &n in &[100usize, 400] {
        let a = Mat::from_fn(n, n, |i, j| ((i * 31 + j * 17) % 97) as f64 / 97.0 - 0.5);
        let s = &a * a.transpose();
        let reps = 5;
        let t0 = Instant::now();
        let mut acc = 0.0;
        for _ in 0..reps {
            let evd = s.self_adjoint_eigen(faer::Side::Lower).unwrap();
            acc += evd.S().column_vector()[0];
        }
        println!("faer n={n}: {:.1} ms ({acc:.2e})", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
    }
}
