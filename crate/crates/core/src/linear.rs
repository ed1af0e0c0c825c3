//! Exact flow of the linear drift `y' = v, v' = alpha v + beta y, t' = 1`.
//!
//! The propagator `exp(tau M)` with `M = [[0, I], [beta, alpha]]` is computed
//! by scaling and squaring around a degree-13 diagonal Pade approximant and
//! cached per distinct `tau`. A splitting scheme only ever uses a handful of
//! distinct drift lengths, so the cache fills during the first step.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub struct LinearDrift {
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
    generator: DMatrix<f64>,
    cache: Option<RwLock<HashMap<u64, Arc<DMatrix<f64>>>>>,
    increments: Option<RwLock<HashMap<u64, Arc<DMatrix<f64>>>>>,
}

fn lookup(
    cache: &Option<RwLock<HashMap<u64, Arc<DMatrix<f64>>>>>,
    tau: f64,
    make: impl FnOnce() -> DMatrix<f64>,
) -> Arc<DMatrix<f64>> {
    let Some(cache) = cache else {
        return Arc::new(make());
    };
    let key = tau.to_bits();
    if let Some(p) = cache.read().unwrap().get(&key) {
        return Arc::clone(p);
    }
    let p = Arc::new(make());
    cache.write().unwrap().entry(key).or_insert(p).clone()
}

impl LinearDrift {
    pub fn new(alpha: DMatrix<f64>, beta: DMatrix<f64>) -> Result<Self> {
        let d = alpha.nrows();
        if alpha.ncols() != d || beta.nrows() != d || beta.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "linear part must be two square matrices of equal size, got {}x{} and {}x{}",
                alpha.nrows(),
                alpha.ncols(),
                beta.nrows(),
                beta.ncols()
            )));
        }
        if alpha.iter().chain(beta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("linear part has non-finite entries".into()));
        }
        let mut generator = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            generator[(i, d + i)] = 1.0;
            for j in 0..d {
                generator[(d + i, j)] = beta[(i, j)];
                generator[(d + i, d + j)] = alpha[(i, j)];
            }
        }
        Ok(LinearDrift {
            alpha,
            beta,
            generator,
            cache: Some(RwLock::new(HashMap::new())),
            increments: Some(RwLock::new(HashMap::new())),
        })
    }

    /// Same drift, recomputing the exponential on every call.
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self.increments = None;
        self
    }

    pub fn dimension(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.read().unwrap().len())
    }

    /// `exp(tau M)`.
    pub fn propagator(&self, tau: f64) -> Arc<DMatrix<f64>> {
        lookup(&self.cache, tau, || expm(&(&self.generator * tau)))
    }

    /// `exp(tau M) - I`, computed without cancellation for small `tau`.
    pub fn increment_matrix(&self, tau: f64) -> Arc<DMatrix<f64>> {
        lookup(&self.increments, tau, || expm_minus_identity(&(&self.generator * tau)))
    }

    /// `(exp(tau M) - I) (y, v)`, the change the drift makes to the state.
    pub fn increment(&self, tau: f64, y: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dimension();
        if tau == 0.0 {
            return vec![0.0; 2 * d];
        }
        let e = self.increment_matrix(tau);
        let x: Vec<f64> = y.iter().chain(v.iter()).copied().collect();
        (0..2 * d).map(|i| x.iter().enumerate().map(|(j, xj)| e[(i, j)] * xj).sum()).collect()
    }

    /// `(y, v) <- exp(tau M) (y, v)`.
    pub fn propagate_in_place(&self, tau: f64, y: &mut [f64], v: &mut [f64]) {
        if tau == 0.0 {
            return;
        }
        let d = self.dimension();
        let p = self.propagator(tau);
        let x: Vec<f64> = y.iter().chain(v.iter()).copied().collect();
        for i in 0..2 * d {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += p[(i, j)] * xj;
            }
            if i < d {
                y[i] = acc;
            } else {
                v[i - d] = acc;
            }
        }
    }

    pub fn propagate(&self, tau: f64, y: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut y, mut v) = (y.to_vec(), v.to_vec());
        self.propagate_in_place(tau, &mut y, &mut v);
        (y, v)
    }
}

impl Clone for LinearDrift {
    fn clone(&self) -> Self {
        LinearDrift {
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            generator: self.generator.clone(),
            cache: self.cache.as_ref().map(|_| RwLock::new(HashMap::new())),
            increments: self.increments.as_ref().map(|_| RwLock::new(HashMap::new())),
        }
    }
}

impl fmt::Debug for LinearDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearDrift")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("cached", &self.cached_entries())
            .finish()
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the degree-13 approximant is accurate to unit round-off.
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a fixed [13/13] Pade core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom.lu().solve(&numer).expect("Pade denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `exp(a) - I` by a Taylor series on a scaled argument, undone with
/// `E(2a) = 2 E(a) + E(a)^2`.
pub fn expm_minus_identity(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = one_norm(a);
    let halvings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-halvings);
    let mut term = a.clone();
    let mut sum = a.clone();
    for k in 2..40 {
        term = &term * &a / k as f64;
        sum += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-3 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..halvings {
        sum = &sum * 2.0 + &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_generator_gives_identity() {
        let z = DMatrix::zeros(3, 3);
        assert_eq!(expm(&z), DMatrix::identity(3, 3));
    }

    #[test]
    fn pure_shear_when_linear_part_vanishes() {
        let d = LinearDrift::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let (y, v) = d.propagate(0.3, &[1.0, -2.0], &[0.5, 4.0]);
        assert!((y[0] - 1.15).abs() < 1e-15 && (y[1] - (-0.8)).abs() < 1e-15);
        assert_eq!(v, vec![0.5, 4.0]);
    }

    #[test]
    fn harmonic_rotation() {
        let w = 1.7;
        let d = LinearDrift::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, -w * w)).unwrap();
        for &tau in &[0.01, 0.3, 2.5, -1.2, 40.0] {
            let (y, v) = d.propagate(tau, &[0.8], &[-0.3]);
            let ye = 0.8 * (w * tau).cos() + (-0.3 / w) * (w * tau).sin();
            let ve = -0.8 * w * (w * tau).sin() - 0.3 * (w * tau).cos();
            let scale = 1.0f64.max(tau.abs());
            assert!((y[0] - ye).abs() < 1e-13 * scale, "tau={tau}: {} vs {ye}", y[0]);
            assert!((v[0] - ve).abs() < 1e-13 * scale, "tau={tau}: {} vs {ve}", v[0]);
        }
    }

    #[test]
    fn matches_taylor_on_large_norm_after_scaling() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 6.0, -6.0, 0.0]);
        let e = expm(&a);
        let (c, s) = (6.0f64.cos(), 6.0f64.sin());
        let exact = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((e - exact).abs().max() < 1e-14);
        let small = &a * 0.05;
        assert!((expm(&small) - taylor(&small, 30)).abs().max() < 1e-15);
    }

    #[test]
    fn cache_is_transparent() {
        let alpha = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let beta = DMatrix::identity(2, 2);
        let cached = LinearDrift::new(alpha.clone(), beta.clone()).unwrap();
        let plain = LinearDrift::new(alpha, beta).unwrap().without_cache();
        for &tau in &[0.1, 0.1, -0.2, 0.1] {
            assert_eq!(
                cached.propagate(tau, &[1.0, 0.5], &[0.0, -1.0]),
                plain.propagate(tau, &[1.0, 0.5], &[0.0, -1.0])
            );
        }
        assert_eq!(cached.cached_entries(), 2);
        assert_eq!(plain.cached_entries(), 0);
    }

    #[test]
    fn increment_matches_propagator() {
        let alpha = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let drift = LinearDrift::new(alpha, DMatrix::identity(2, 2)).unwrap();
        let (y, v) = ([0.994, 0.0], [0.0, -2.0]);
        for &tau in &[1e-6, 0.01, 0.7, -3.0] {
            let inc = drift.increment(tau, &y, &v);
            let (y1, v1) = drift.propagate(tau, &y, &v);
            for i in 0..2 {
                assert!((y[i] + inc[i] - y1[i]).abs() < 1e-14 * (1.0 + tau.abs()));
                assert!((v[i] + inc[2 + i] - v1[i]).abs() < 1e-14 * (1.0 + tau.abs()));
            }
        }
        // small increments keep full relative accuracy
        let a = DMatrix::from_element(1, 1, 1e-9);
        assert!((expm_minus_identity(&a)[(0, 0)] - 1e-9f64.exp_m1()).abs() < 1e-25);
        assert_eq!(drift.increment(0.0, &y, &v), vec![0.0; 4]);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        assert!(LinearDrift::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)).is_err());
        assert!(LinearDrift::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 3)).is_err());
    }
}
