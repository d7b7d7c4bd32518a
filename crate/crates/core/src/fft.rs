//! In-crate radix-2 complex FFT. Grid sizes are powers of two by
//! construction, so Cooley-Tukey with precomputed twiddles is all we need;
//! keeping it local lets the crate build without `std`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
}

impl Add for Complex {
    type Output = Complex;
    #[inline]
    fn add(self, rhs: Complex) -> Complex {
        Complex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl AddAssign for Complex {
    #[inline]
    fn add_assign(&mut self, rhs: Complex) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Sub for Complex {
    type Output = Complex;
    #[inline]
    fn sub(self, rhs: Complex) -> Complex {
        Complex::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    #[inline]
    fn mul(self, rhs: Complex) -> Complex {
        Complex::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl Neg for Complex {
    type Output = Complex;
    #[inline]
    fn neg(self) -> Complex {
        Complex::new(-self.re, -self.im)
    }
}

/// One-axis FFT of fixed power-of-two length.
pub struct Fft {
    n: usize,
    // e^{-2*pi*i*k/n} for k in 0..n/2
    twiddle: Vec<Complex>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two() && n >= 2);
        let mut twiddle = Vec::with_capacity(n / 2);
        for k in 0..n / 2 {
            let phi = -2.0 * PI * k as f64 / n as f64;
            twiddle.push(Complex::new(math::cos(phi), math::sin(phi)));
        }
        Fft { n, twiddle }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    fn bit_reverse(data: &mut [Complex]) {
        let n = data.len();
        let mut j = 0usize;
        for i in 0..n {
            if i < j {
                data.swap(i, j);
            }
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
        }
    }

    fn butterflies(&self, data: &mut [Complex], inverse: bool) {
        let n = self.n;
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            let mut base = 0;
            while base < n {
                for k in 0..half {
                    let mut w = self.twiddle[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * data[base + half + k];
                    let u = data[base + k];
                    data[base + k] = u + t;
                    data[base + half + k] = u - t;
                }
                base += len;
            }
            len <<= 1;
        }
    }

    /// In-place DFT with kernel `e^{-2*pi*i*jk/n}` (no scaling).
    pub fn forward(&self, data: &mut [Complex]) {
        debug_assert_eq!(data.len(), self.n);
        Self::bit_reverse(data);
        self.butterflies(data, false);
    }

    /// In-place inverse DFT including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex]) {
        debug_assert_eq!(data.len(), self.n);
        Self::bit_reverse(data);
        self.butterflies(data, true);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v = v.scale(s);
        }
    }
}

/// Apply the one-axis transform along `axis` of a row-major `dim`-cube of
/// side `n` (last axis fastest).
pub fn transform_axis(fft: &Fft, data: &mut [Complex], dim: usize, axis: usize, inverse: bool) {
    let n = fft.len();
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let after: usize = n.pow((dim - 1 - axis) as u32);
    let before: usize = n.pow(axis as u32);
    let mut line = alloc::vec![Complex::ZERO; n];
    for b in 0..before {
        for a in 0..after {
            let start = b * n * after + a;
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = data[start + j * after];
            }
            if inverse {
                fft.inverse(&mut line);
            } else {
                fft.forward(&mut line);
            }
            for (j, slot) in line.iter().enumerate() {
                data[start + j * after] = *slot;
            }
        }
    }
}
