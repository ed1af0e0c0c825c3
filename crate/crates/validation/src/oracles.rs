//! Reference computations that share no code with the integrators.

use nalgebra::DMatrix;

/// `sum_{j < terms} a^j / j!`.
pub fn taylor_expm(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..terms {
        term = &term * a / j as f64;
        sum += &term;
    }
    sum
}

/// Central differences with step `rel * max(1, |y_i|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, y: &[f64], rel: f64) -> Vec<f64> {
    let mut p = y.to_vec();
    (0..y.len())
        .map(|i| {
            let eps = rel * y[i].abs().max(1.0);
            p[i] = y[i] + eps;
            let up = f(&p);
            p[i] = y[i] - eps;
            let down = f(&p);
            p[i] = y[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Growth exponent of the running maximum of `(t, err)` samples over
/// `[t_lo, t_hi]`: about 0 for a bounded error, 1 for a linear drift.
pub fn growth_exponent(samples: &[(f64, f64)], t_lo: f64, t_hi: f64) -> f64 {
    let mut running = 0.0f64;
    let mut pts = Vec::new();
    for &(t, e) in samples {
        running = running.max(e);
        if t >= t_lo && t <= t_hi && running > 0.0 {
            pts.push((t, running));
        }
    }
    log_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
        let e = taylor_expm(&a, 30);
        assert!((e[(0, 0)] - 0.5f64.cos()).abs() < 1e-16);
        assert!((e[(0, 1)] - 0.5f64.sin()).abs() < 1e-16);
    }

    #[test]
    fn gradient_of_cubic() {
        let g = fd_gradient(|y| y[0].powi(3) + 2.0 * y[0] * y[1], &[1.5, -2.0], 1e-5);
        assert!((g[0] - (3.0 * 2.25 - 4.0)).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn growth_rates() {
        let linear: Vec<(f64, f64)> = (1..=1000).map(|i| (i as f64, 1e-9 * i as f64)).collect();
        assert!((growth_exponent(&linear, 100.0, 1000.0) - 1.0).abs() < 1e-12);
        let quadratic: Vec<(f64, f64)> = (1..=1000).map(|i| (i as f64, (i * i) as f64)).collect();
        assert!((growth_exponent(&quadratic, 100.0, 1000.0) - 2.0).abs() < 1e-12);
        let bounded: Vec<(f64, f64)> = (1..=1000).map(|i| (i as f64, 1.0 + 0.5 * (i as f64).sin())).collect();
        assert!(growth_exponent(&bounded, 100.0, 1000.0).abs() < 1e-3);
    }
}
