use crate::error::{Error, Result};

/// Least-squares fit of `ln(metric) = intercept + slope · ln(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The `(T, metric)` points actually used, after burn-in.
    pub grid: Vec<(f64, f64)>,
}

/// Fits a power law to `grid` after dropping the first `burn_in` points.
///
/// Needs at least four remaining points, strictly increasing in `T`, with
/// positive metrics.
pub fn fit_rate(grid: &[(f64, f64)], burn_in: usize) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = grid.iter().skip(burn_in).copied().collect();
    if used.len() < 4 {
        return Err(Error::invalid(format!(
            "rate fit needs at least 4 grid points after burn-in, got {}",
            used.len()
        )));
    }
    if used.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("rate grid must be strictly increasing in T"));
    }
    if let Some(&(t, m)) = used.iter().find(|(t, m)| !(*t > 0.0 && *m > 0.0 && m.is_finite())) {
        return Err(Error::invalid(format!(
            "rate fit needs positive finite values, got T={t}, metric={m}"
        )));
    }

    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, m)| m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();

    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    // A constant metric is fit perfectly by slope 0.
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        grid: used,
    })
}

/// Geometric grid `start, start·ratio, …` up to `stop`, rounded to integers
/// and deduplicated.
pub fn geometric_grid(start: u64, stop: u64, ratio: f64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut v = start as f64;
    while v.round() as u64 <= stop {
        let r = v.round() as u64;
        if out.last() != Some(&r) {
            out.push(r);
        }
        v *= ratio;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(exponent: f64, c: f64, ts: &[f64]) -> Vec<(f64, f64)> {
        ts.iter().map(|&t| (t, c * t.powf(exponent))).collect()
    }

    #[test]
    fn recovers_cube_root_rate() {
        let g = planted(-1.0 / 3.0, 1.0, &[1e2, 1e3, 1e4, 1e5]);
        let fit = fit_rate(&g, 0).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_has_zero_slope() {
        let g: Vec<_> = [10.0, 20.0, 40.0, 80.0].iter().map(|&t| (t, 0.7)).collect();
        let fit = fit_rate(&g, 0).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn recovers_intercept() {
        for c in [0.01, 1.0, 37.5] {
            let g = planted(-0.5, c, &[1e3, 3162.0, 1e4, 31623.0, 1e5]);
            let fit = fit_rate(&g, 1).unwrap();
            assert!((fit.slope + 0.5).abs() < 1e-12);
            assert!((fit.intercept - f64::ln(c)).abs() < 1e-10);
            assert_eq!(fit.grid.len(), 4);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let g = planted(-0.5, 1.0, &[1.0, 2.0, 3.0]);
        assert!(fit_rate(&g, 0).is_err());
        let g = planted(-0.5, 1.0, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(fit_rate(&g, 2).is_err());
        let mut g = planted(-0.5, 1.0, &[1.0, 2.0, 3.0, 4.0]);
        g[2].1 = 0.0;
        assert!(fit_rate(&g, 0).is_err());
        let g = planted(-0.5, 1.0, &[1.0, 3.0, 2.0, 4.0]);
        assert!(fit_rate(&g, 0).is_err());
    }

    #[test]
    fn half_decade_grid() {
        let g = geometric_grid(1000, 100_000, 10f64.sqrt());
        assert_eq!(g, vec![1000, 3162, 10000, 31623, 100_000]);
    }
}
