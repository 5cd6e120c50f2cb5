use crate::error::{Result, SdfemError};

/// `rate[k] = log2(e[k] / e[k+1])` for errors on successively doubled meshes.
pub fn compute_rates(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(SdfemError::Config(
            "at least two errors are needed to compute a rate".into(),
        ));
    }
    if let Some((position, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(SdfemError::UndefinedRate { position, value });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Least-squares slope of `-log2(e)` against `log2(N)`.
pub fn observed_order(ns: &[usize], errors: &[f64]) -> Result<f64> {
    if ns.len() != errors.len() || ns.len() < 2 {
        return Err(SdfemError::Config(
            "need matching N and error lists of length >= 2".into(),
        ));
    }
    if let Some((position, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(SdfemError::UndefinedRate { position, value });
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
