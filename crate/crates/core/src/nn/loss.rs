use super::NnError;

/// Row-wise softmax of a `[rows, k]` buffer, shifted by the row max.
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut sum = 0.0;
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        for p in &mut out[start..] {
            *p /= sum;
        }
    }
    out
}

/// Mean categorical cross-entropy over the batch.
///
/// Returns `(loss, probabilities, d loss / d logits)`; the gradient is
/// `(p − y) / b`.
pub fn softmax_cross_entropy(
    logits: &[f64],
    targets: &[f64],
    k: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>), NnError> {
    if k == 0 || logits.len() != targets.len() || !logits.len().is_multiple_of(k) {
        return Err(NnError::Shape(format!(
            "logits ({}) and targets ({}) must both be [b, {k}]",
            logits.len(),
            targets.len()
        )));
    }
    let b = logits.len() / k;
    if b == 0 {
        return Err(NnError::Empty("loss batch"));
    }
    let mut target_idx = Vec::with_capacity(b);
    for (r, row) in targets.chunks(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != k {
            return Err(NnError::NotOneHot(r));
        }
        target_idx.push(row.iter().position(|&v| v == 1.0).unwrap());
    }

    let probs = softmax_rows(logits, k);
    let mut loss = 0.0;
    for (r, &t) in target_idx.iter().enumerate() {
        // log-sum-exp form keeps the loss finite when p_target underflows.
        let row = &logits[r * k..(r + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
    }
    loss /= b as f64;

    let inv_b = 1.0 / b as f64;
    let grad = probs
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * inv_b)
        .collect();
    Ok((loss, probs, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(idx: &[usize], k: usize) -> Vec<f64> {
        let mut t = vec![0.0; idx.len() * k];
        for (r, &i) in idx.iter().enumerate() {
            t[r * k + i] = 1.0;
        }
        t
    }

    #[test]
    fn equal_logits_give_ln5() {
        let (loss, p, _) = softmax_cross_entropy(&[0.3; 5], &one_hot(&[2], 5), 5).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn saturated_margin_goes_to_zero() {
        let logits = [0.0, 50.0, 0.0, 0.0, 0.0];
        let (loss, _, _) = softmax_cross_entropy(&logits, &one_hot(&[1], 5), 5).unwrap();
        assert!(loss < 1e-20);
        let (loss, _, _) = softmax_cross_entropy(&logits, &one_hot(&[0], 5), 5).unwrap();
        assert!((loss - 50.0).abs() < 1e-9);
    }

    #[test]
    fn rows_sum_to_one() {
        let logits: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 * 3.1 - 12.0).collect();
        for row in softmax_rows(&logits, 5).chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let huge = softmax_rows(&[1000.0, 999.0], 2);
        assert!(huge.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_non_one_hot() {
        let t = [0.0, 0.5, 0.5, 0.0, 0.0];
        assert!(matches!(
            softmax_cross_entropy(&[0.0; 5], &t, 5),
            Err(NnError::NotOneHot(0))
        ));
        let t = [0.0, 1.0, 1.0, 0.0, 0.0];
        assert!(softmax_cross_entropy(&[0.0; 5], &t, 5).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = vec![0.2, -1.3, 0.7, 2.1, -0.4, 1.1, 0.0, -2.2, 0.5, 0.9];
        let targets = one_hot(&[3, 0], 5);
        let (_, _, grad) = softmax_cross_entropy(&logits, &targets, 5).unwrap();
        let h = 1e-5;
        for i in 0..logits.len() {
            let mut up = logits.clone();
            up[i] += h;
            let mut dn = logits.clone();
            dn[i] -= h;
            let lu = softmax_cross_entropy(&up, &targets, 5).unwrap().0;
            let ld = softmax_cross_entropy(&dn, &targets, 5).unwrap().0;
            let fd = (lu - ld) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6, "{i}: {fd} vs {}", grad[i]);
        }
    }
}
