//! Radix-2 FFT. Twiddle products and phase factors are applied as three
//! shears, `x += a y; y += b x; x += a y`, which have determinant one for
//! any rounded `a`, `b`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

/// Multiplication by `exp(i phi)`: a shear rotation by the remainder
/// `|r| <= pi/4`, then `quarter` exact quarter turns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    a: f64,
    b: f64,
    quarter: u8,
}

impl Rotation {
    pub fn new(phi: f64) -> Self {
        let p = phi.rem_euclid(2.0 * PI);
        let q = (p / FRAC_PI_2).round();
        let r = p - q * FRAC_PI_2;
        Rotation { a: -(0.5 * r).tan(), b: r.sin(), quarter: (q as i64).rem_euclid(4) as u8 }
    }

    #[inline]
    pub fn apply(&self, z: Complex64) -> Complex64 {
        let (mut x, mut y) = (z.re, z.im);
        if self.b != 0.0 {
            x += self.a * y;
            y += self.b * x;
            x += self.a * y;
        }
        match self.quarter {
            0 => Complex64::new(x, y),
            1 => Complex64::new(-y, x),
            2 => Complex64::new(-x, -y),
            _ => Complex64::new(y, -x),
        }
    }

    /// Multiplication by `exp(-i phi)`.
    #[inline]
    pub fn apply_inverse(&self, z: Complex64) -> Complex64 {
        self.apply(z.conj()).conj()
    }
}

/// Unnormalised DFT of a fixed power-of-two length.
#[derive(Clone, Debug)]
pub struct Radix2Fft {
    n: usize,
    twiddles: Vec<Rotation>,
}

impl Radix2Fft {
    /// `n` must be a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2).map(|j| Rotation::new(-2.0 * PI * j as f64 / n as f64)).collect();
        Radix2Fft { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `U_m = sum_j u_j exp(-2 pi i j m / n)`.
    pub fn forward(&self, u: &mut [Complex64]) {
        self.run(u, false);
    }

    /// `u_j = sum_m U_m exp(2 pi i j m / n)`, without the `1/n`.
    pub fn inverse(&self, u: &mut [Complex64]) {
        self.run(u, true);
    }

    fn run(&self, u: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(u.len(), n);
        if n < 2 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                u.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = &self.twiddles[k * stride];
                    let b = u[start + k + half];
                    let b = if inverse { w.apply_inverse(b) } else { w.apply(b) };
                    let a = u[start + k];
                    u[start + k] = a + b;
                    u[start + k + half] = a - b;
                }
            }
            len *= 2;
        }
    }
}
