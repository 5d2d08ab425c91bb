//! Plain (non-tape) loss and similarity helpers. The differentiable
//! versions live on the tape; these are used for evaluation and as oracles.

use super::mat::Mat;
use crate::{Error, Result};

/// Mean cross-entropy of row logits against integer labels, stabilized by
/// max-subtraction.
pub fn softmax_ce(logits: &Mat, labels: &[usize]) -> Result<f64> {
    if logits.rows != labels.len() {
        return Err(Error::ShapeMismatch {
            ctx: "softmax_ce",
            expected: format!("{} labels", logits.rows),
            got: format!("{}", labels.len()),
        });
    }
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= logits.cols {
            return Err(Error::LabelOutOfRange {
                label,
                classes: logits.cols,
            });
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logsum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
        total += logsum - row[label];
    }
    Ok(total / labels.len() as f64)
}

/// Cosine similarity of two vectors; errors on a zero-norm input.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            ctx: "cosine_similarity",
            expected: format!("{}", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("cosine_similarity"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tape::Tape;

    #[test]
    fn uniform_logits_give_ln_m() {
        let logits = Mat::zeros(3, 7);
        let ce = softmax_ce(&logits, &[0, 3, 6]).unwrap();
        assert!((ce - (7.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_logit_is_tiny() {
        let mut logits = Mat::zeros(1, 4);
        *logits.at_mut(0, 2) = 50.0;
        let ce = softmax_ce(&logits, &[2]).unwrap();
        assert!(ce < 1e-10);
    }

    #[test]
    fn ce_nonnegative_and_label_checked() {
        let logits = Mat::from_vec(1, 3, vec![0.3, -0.1, 2.0]);
        assert!(softmax_ce(&logits, &[0]).unwrap() >= 0.0);
        assert!(softmax_ce(&logits, &[3]).is_err());
    }

    #[test]
    fn ce_gradient_is_softmax_minus_onehot() {
        let logits = Mat::from_vec(2, 3, vec![0.5, -1.0, 0.2, 1.5, 0.0, -0.5]);
        let labels = [2usize, 0];
        let mut t = Tape::new();
        let l = t.leaf(logits.clone());
        let ce = t.cross_entropy_mean(l, &labels);
        let grads = t.backward(ce);
        let g = grads.get(l).unwrap();
        for (r, &label) in labels.iter().enumerate() {
            let row = logits.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
            for c in 0..3 {
                let p = (row[c] - max).exp() / sum;
                let want = (p - if c == label { 1.0 } else { 0.0 }) / 2.0;
                assert!((g.at(r, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_basics() {
        let a = [1.0, 2.0, -1.0];
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let x = [1.0, 0.0];
        let y = [0.0, 3.0];
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
        let a2: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let b = [0.4, -0.3, 0.9];
        assert!(
            (cosine_similarity(&a2, &b).unwrap() - cosine_similarity(&a, &b).unwrap()).abs()
                < 1e-12
        );
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }
}
