use socnav::nn::{eig::sym_eig, Mat};
use std::time::Instant;
fn main() {
    // Rank-15 covariance of 16 patch rows in 48 dims.
    let p = Mat::from_fn(16, 48, |r, c| ((r * 31 + c * 17) % 29) as f64 * 0.03);
    let mut cov = Mat::zeros(48, 48);
    let mean: Vec<f64> = (0..48)
        .map(|j| (0..16).map(|r| p.at(r, j)).sum::<f64>() / 16.0)
        .collect();
    for r in 0..16 {
        for i in 0..48 {
            for j in 0..48 {
                *cov.at_mut(i, j) += (p.at(r, i) - mean[i]) * (p.at(r, j) - mean[j]);
            }
        }
    }
    cov.scale_assign(1.0 / 16.0);
    let t0 = Instant::now();
    let mut sink = 0.0;
    for _ in 0..50 {
        sink += sym_eig(&cov).1[0];
    }
    println!("rank-deficient 48x48 eig: {:.2} ms (sink {sink:.2})", t0.elapsed().as_secs_f64() * 1000.0 / 50.0);

    let full = Mat::from_fn(48, 48, |r, c| ((r * 7 + c * 3) % 13) as f64 * 0.1);
    let s = full.matmul(&full.transpose());
    let t0 = Instant::now();
    for _ in 0..50 {
        sink += sym_eig(&s).1[0];
    }
    println!("full-rank 48x48 eig: {:.2} ms", t0.elapsed().as_secs_f64() * 1000.0 / 50.0);
}
