//! Error metrics and rank correlation.

use super::EvalError;

pub fn mae(pairs: &[(f64, f64)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(pairs.iter().map(|(p, t)| (p - t).abs()).sum::<f64>() / pairs.len() as f64)
}

pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mse = pairs.iter().map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pairs.len() as f64;
    Ok(mse.sqrt())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of the average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(EvalError::TooShort(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    pearson(&average_ranks(x), &average_ranks(y)).ok_or(EvalError::Constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank by counting: rank = 1 + #less + (#equal - 1) / 2.
    fn count_ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|v| {
                let less = x.iter().filter(|w| *w < v).count() as f64;
                let eq = x.iter().filter(|w| *w == v).count() as f64;
                1.0 + less + (eq - 1.0) / 2.0
            })
            .collect()
    }

    fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (count_ranks(x), count_ranks(y));
        let n = x.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn mae_rmse_examples() {
        let same = [(2.0, 2.0), (3.5, 3.5)];
        assert_eq!(mae(&same).unwrap(), 0.0);
        assert_eq!(rmse(&same).unwrap(), 0.0);
        let sym = [(0.0, 1.0), (0.0, -1.0)];
        assert_eq!(mae(&sym).unwrap(), 1.0);
        assert_eq!(rmse(&sym).unwrap(), 1.0);
        assert_eq!(mae(&[]).unwrap_err(), EvalError::Empty);
        assert_eq!(rmse(&[]).unwrap_err(), EvalError::Empty);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let (x, y) = ([1.0, 2.0, 2.0, 4.0], [1.0, 3.0, 2.0, 4.0]);
        // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4]: cov 4.5, var 4.5 and 5
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((spearman(&x, &y).unwrap() - expected).abs() < 1e-12);
        assert!((oracle_spearman(&x, &y) - expected).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert_eq!(
            spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            EvalError::LengthMismatch { x: 2, y: 3 }
        );
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(), EvalError::TooShort(2));
        assert_eq!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            EvalError::Constant
        );
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            let v = prop::collection::vec((0i32..8).prop_map(f64::from), n);
            (v.clone(), v)
        })
    }

    proptest! {
        #[test]
        fn rmse_at_least_mae(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50)) {
            prop_assert!(rmse(&pairs).unwrap() + 1e-12 >= mae(&pairs).unwrap());
        }

        #[test]
        fn spearman_matches_oracle((x, y) in series()) {
            match spearman(&x, &y) {
                Ok(r) => {
                    prop_assert!((r - oracle_spearman(&x, &y)).abs() < 1e-9);
                    prop_assert!((-1.0..=1.0).contains(&r));
                    prop_assert!((r - spearman(&y, &x).unwrap()).abs() < 1e-12);
                }
                Err(e) => prop_assert_eq!(e, EvalError::Constant),
            }
        }

        #[test]
        fn spearman_monotone_invariance(x in prop::collection::vec(-3.0f64..3.0, 3..20), y in prop::collection::vec(-3.0f64..3.0, 3..20)) {
            let n = x.len().min(y.len());
            let (x, y) = (&x[..n], &y[..n]);
            if let Ok(r) = spearman(x, y) {
                let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
                let lin: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
                prop_assert!((spearman(&ex, y).unwrap() - r).abs() < 1e-9);
                prop_assert!((spearman(x, &lin).unwrap() - r).abs() < 1e-9);
                prop_assert!((spearman(x, x).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
