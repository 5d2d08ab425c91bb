//! Symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Used by the principal-component extraction path; small matrices only
//! (at most the embedding width), so Jacobi's simplicity wins over speed.

use super::mat::Mat;

/// Eigenvectors (columns) and eigenvalues of a symmetric matrix, sorted by
/// descending eigenvalue. Each eigenvector's largest-magnitude component is
/// made non-negative so the decomposition is a continuous function of the
/// input away from degeneracies.
pub fn sym_eig(s: &Mat) -> (Mat, Vec<f64>) {
    let n = s.rows;
    assert_eq!(s.rows, s.cols, "sym_eig needs a square matrix");
    let mut a = s.clone();
    // Eigenvectors kept transposed (one per row) so rotations touch
    // contiguous slices.
    let mut vt = Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 });
    let scale = s.data.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.at(p, q).abs();
            }
        }
        if off < 1e-13 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.at(p, p);
                let aqq = a.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;

                // A <- J^T A J using only rows p and q (A stays symmetric):
                // after the row rotation R = J^T A, the final off-block
                // entries are R's rows p and q, mirrored into the columns;
                // the 2x2 block follows from one more column rotation.
                rotate_rows(&mut a.data, n, p, q, c, s_);
                let pp_r = a.data[p * n + p];
                let pq_r = a.data[p * n + q];
                let qp_r = a.data[q * n + p];
                let qq_r = a.data[q * n + q];
                a.data[p * n + p] = c * pp_r - s_ * pq_r;
                a.data[q * n + q] = s_ * qp_r + c * qq_r;
                a.data[p * n + q] = 0.0;
                a.data[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        a.data[k * n + p] = a.data[p * n + k];
                        a.data[k * n + q] = a.data[q * n + k];
                    }
                }

                rotate_rows(&mut vt.data, n, p, q, c, s_);
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a.at(i, i), i)).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let mut vecs = Mat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (out_col, &(lambda, src_row)) in pairs.iter().enumerate() {
        vals.push(lambda);
        let row = vt.row(src_row);
        // Sign convention: largest-|component| entry positive.
        let mut best = 0;
        let mut best_abs = 0.0;
        for (r, &x) in row.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = r;
            }
        }
        let sign = if row[best] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            *vecs.at_mut(r, out_col) = sign * row[r];
        }
    }
    (vecs, vals)
}

/// Plane rotation of rows `p` and `q`: row_p' = c row_p - s row_q,
/// row_q' = s row_p + c row_q.
fn rotate_rows(data: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let (head, tail) = data.split_at_mut(hi * n);
    let row_lo = &mut head[lo * n..(lo + 1) * n];
    let row_hi = &mut tail[..n];
    let (rp, rq): (&mut [f64], &mut [f64]) = if p < q { (row_lo, row_hi) } else { (row_hi, row_lo) };
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Mean row, leading principal components (columns), and eigenvalues of the
/// row-sample covariance of `rows`. At most `m` components are returned;
/// fewer when the matrix is smaller than requested.
pub fn pca(rows: &Mat, m: usize) -> (Vec<f64>, Mat, Vec<f64>) {
    let n = rows.rows;
    let c = rows.cols;
    assert!(n >= 1);
    let mut mean = vec![0.0; c];
    for r in 0..n {
        for j in 0..c {
            mean[j] += rows.at(r, j);
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = Mat::zeros(c, c);
    for r in 0..n {
        for i in 0..c {
            let di = rows.at(r, i) - mean[i];
            for j in 0..c {
                let dj = rows.at(r, j) - mean[j];
                *cov.at_mut(i, j) += di * dj;
            }
        }
    }
    cov.scale_assign(1.0 / n as f64);
    let (vecs, vals) = sym_eig(&cov);
    let keep = m.min(c);
    let mut top = Mat::zeros(c, keep);
    for r in 0..c {
        for j in 0..keep {
            *top.at_mut(r, j) = vecs.at(r, j);
        }
    }
    (mean, top, vals[..keep].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Mat {
        // Gram-Schmidt on random vectors.
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for u in &q {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for vi in &mut v {
                    *vi /= norm;
                }
                q.push(v);
            }
        }
        Mat::from_fn(n, n, |r, c| q[c][r])
    }

    #[test]
    fn recovers_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(2..9);
            let q = random_orthogonal(n, &mut rng);
            let mut lambdas: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
            lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
            // S = Q diag(lambda) Q^T has this exact spectrum by construction.
            let mut d = Mat::zeros(n, n);
            for i in 0..n {
                *d.at_mut(i, i) = lambdas[i];
            }
            let s = q.matmul(&d).matmul(&q.transpose());
            let (vecs, vals) = sym_eig(&s);
            for i in 0..n {
                assert!(
                    (vals[i] - lambdas[i]).abs() < 1e-8,
                    "eigenvalue {i}: {} vs {}",
                    vals[i],
                    lambdas[i]
                );
            }
            // Residual check: S v = lambda v.
            for j in 0..n {
                for r in 0..n {
                    let mut sv = 0.0;
                    for k in 0..n {
                        sv += s.at(r, k) * vecs.at(k, j);
                    }
                    assert!((sv - vals[j] * vecs.at(r, j)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let raw = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = raw.matmul(&raw.transpose());
        let (vecs, _) = sym_eig(&s);
        let vtv = vecs.transpose().matmul(&vecs);
        for r in 0..n {
            for c in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((vtv.at(r, c) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pca_rank_one_explains_everything() {
        // Rows are all multiples of one direction, so the first component
        // carries 100% of the variance.
        let dir = [3.0, -1.0, 2.0];
        let rows = Mat::from_fn(6, 3, |r, c| (r as f64 - 2.5) * dir[c]);
        let (_mean, _comps, vals) = pca(&rows, 3);
        let total: f64 = vals.iter().sum();
        assert!(vals[0] / total > 1.0 - 1e-12);
        assert!(vals[1].abs() < 1e-10);
    }
}
