use super::EvalError;

/// Compensated (Neumaier) sum.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<(), EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    check_pair(truth, pred)?;
    Ok(stable_sum(truth.iter().zip(pred).map(|(y, p)| (y - p).abs())) / truth.len() as f64)
}

/// Root mean squared error.
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    check_pair(truth, pred)?;
    Ok((stable_sum(truth.iter().zip(pred).map(|(y, p)| (y - p).powi(2))) / truth.len() as f64).sqrt())
}

/// The RMSE formula exactly as printed in the source, where the square root
/// and the square cancel per term: the mean of `sqrt((y - p)^2)`, which is
/// the MAE.
pub fn rmse_as_printed(truth: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    check_pair(truth, pred)?;
    Ok(stable_sum(truth.iter().zip(pred).map(|(y, p)| ((y - p).powi(2)).sqrt())) / truth.len() as f64)
}

/// MAE as a percentage of the mean true value.
pub fn nmap(truth: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    let m = mae(truth, pred)?;
    let mean = stable_sum(truth.iter().copied()) / truth.len() as f64;
    if !(mean > 0.0) {
        return Err(EvalError::NonPositiveMean(mean));
    }
    Ok(100.0 * m / mean)
}

/// `1 - err_model / err_poc`. Two zero errors give 0 (a model that matches
/// a perfect baseline has no skill over it).
pub fn forecast_skill(err_model: f64, err_poc: f64) -> Result<f64, EvalError> {
    if err_poc == 0.0 && err_model == 0.0 {
        return Ok(0.0);
    }
    if !(err_poc > 0.0) {
        return Err(EvalError::NonPositiveReference(err_poc));
    }
    Ok(1.0 - err_model / err_poc)
}

/// 1-based ranks with ties given their average rank.
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
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    let n = a.len() as f64;
    let ma = stable_sum(a.iter().copied()) / n;
    let mb = stable_sum(b.iter().copied()) / n;
    let cov = stable_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)));
    let va = stable_sum(a.iter().map(|x| (x - ma).powi(2)));
    let vb = stable_sum(b.iter().map(|y| (y - mb).powi(2)));
    if va == 0.0 || vb == 0.0 {
        return Err(EvalError::ZeroRankVariance);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooShort(x.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman correlation of the series with itself shifted by each lag.
pub fn autocorrelation_profile(series: &[f64], lags: &[usize]) -> Result<Vec<f64>, EvalError> {
    lags.iter()
        .map(|&k| {
            if k >= series.len() {
                return Err(EvalError::LagTooLarge { lag: k, len: series.len() });
            }
            spearman(&series[..series.len() - k], &series[k..])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(mae(&[100.0, 200.0], &[110.0, 190.0]).unwrap(), 10.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse_as_printed(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5);
        assert_eq!(nmap(&[100.0, 100.0], &[90.0, 110.0]).unwrap(), 10.0);
        assert!(matches!(mae(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(nmap(&[0.0], &[1.0]), Err(EvalError::NonPositiveMean(_))));
    }

    #[test]
    fn skill_examples() {
        assert_eq!(forecast_skill(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(forecast_skill(0.0, 5.0).unwrap(), 1.0);
        assert!((forecast_skill(74.34, 134.35).unwrap() - 0.4467).abs() < 1e-4);
        assert_eq!(forecast_skill(0.0, 0.0).unwrap(), 0.0);
        assert!(forecast_skill(1.0, 0.0).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 5.0, 2.0, 8.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(EvalError::ZeroRankVariance)));
    }

    #[test]
    fn autocorrelation_examples() {
        let s: Vec<f64> = (0..50).map(|i| 3.0 * i as f64).collect();
        let p = autocorrelation_profile(&s, &[0, 1, 12]).unwrap();
        assert!(p.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!(autocorrelation_profile(&s, &[50]).is_err());
    }

    #[test]
    fn compensated_sum() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(stable_sum(v), 1.0);
    }
}
