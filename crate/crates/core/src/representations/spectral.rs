//! Fourier-domain transforms: FFT magnitude, orthonormal DCT-II, Hilbert
//! envelope and the FFT-backed autocorrelation.
//!
//! Lengths are arbitrary. Powers of two go through an iterative radix-2
//! kernel; every other length is mapped onto one with Bluestein's chirp-z
//! construction.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// `exp(i * theta)`
    pub fn cis(theta: f64) -> Self {
        Self::new(math::cos(theta), math::sin(theta))
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.re, self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// Forward DFT, `X[k] = sum_t x[t] exp(-2 pi i k t / n)`, unnormalized.
pub fn fft(buf: &mut [Complex]) {
    transform(buf, false);
}

/// Inverse DFT including the `1/n` factor.
pub fn ifft(buf: &mut [Complex]) {
    transform(buf, true);
    let scale = 1.0 / buf.len() as f64;
    for z in buf.iter_mut() {
        *z = z.scale(scale);
    }
}

fn transform(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        bluestein(buf, inverse);
    }
}

fn radix2(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles computed directly per index rather than by repeated
        // multiplication so the error does not grow with `half`.
        let twiddles: Vec<Complex> = (0..half)
            .map(|j| Complex::cis(sign * 2.0 * PI * j as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let a = buf[start + j];
                let b = buf[start + j + half] * twiddles[j];
                buf[start + j] = a + b;
                buf[start + j + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    // chirp[k] = exp(sign * i * pi * k^2 / n); k^2 reduced mod 2n keeps the
    // phase argument small.
    let chirp: Vec<Complex> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            Complex::cis(sign * PI * k2 / n as f64)
        })
        .collect();

    let mut a = vec![Complex::ZERO; m];
    for k in 0..n {
        a[k] = buf[k] * chirp[k];
    }
    let mut b = vec![Complex::ZERO; m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        let c = chirp[k].conj();
        b[k] = c;
        b[m - k] = c;
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(b.iter()) {
        *x = *x * *y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = a[k].scale(scale) * chirp[k];
    }
}

fn to_complex(values: &[f64]) -> Vec<Complex> {
    values.iter().map(|&x| Complex::new(x, 0.0)).collect()
}

/// `|X[k]|` for `k = 0..=L/2`, zero-padded on the right to length `L`.
pub(crate) fn fft_magnitude_unchecked(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut spectrum = to_complex(values);
    fft(&mut spectrum);
    let mut out = vec![0.0; n];
    for k in 0..=n / 2 {
        out[k] = spectrum[k].norm();
    }
    out
}

/// Orthonormal DCT-II via a length-`L` complex FFT of the even/odd
/// reordered input.
pub(crate) fn dct_unchecked(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut v = vec![Complex::ZERO; n];
    for i in 0..n.div_ceil(2) {
        v[i] = Complex::new(values[2 * i], 0.0);
    }
    for i in 0..n / 2 {
        v[n - 1 - i] = Complex::new(values[2 * i + 1], 0.0);
    }
    fft(&mut v);
    let c0 = math::sqrt(1.0 / n as f64);
    let ck = math::sqrt(2.0 / n as f64);
    (0..n)
        .map(|k| {
            let w = Complex::cis(-PI * k as f64 / (2.0 * n as f64));
            let coeff = (v[k] * w).re;
            coeff * if k == 0 { c0 } else { ck }
        })
        .collect()
}

/// Magnitude of the analytic signal: keep DC (and Nyquist for even `L`),
/// double positive frequencies, drop negative ones, invert.
pub(crate) fn hilbert_magnitude_unchecked(values: &[f64]) -> Vec<f64> {
    let mut spectrum = to_complex(values);
    fft(&mut spectrum);
    apply_analytic_mask(&mut spectrum);
    ifft(&mut spectrum);
    spectrum.iter().map(|z| z.norm()).collect()
}

pub(crate) fn apply_analytic_mask(spectrum: &mut [Complex]) {
    let n = spectrum.len();
    let positive_end = n.div_ceil(2); // exclusive; Nyquist excluded for even n
    for z in spectrum.iter_mut().take(positive_end).skip(1) {
        *z = z.scale(2.0);
    }
    let negative_start = n / 2 + 1;
    for z in spectrum.iter_mut().skip(negative_start) {
        *z = Complex::ZERO;
    }
}

/// Raw lagged products `sum_{t < L - tau} x[t] x[t + tau]` for every lag,
/// computed as a zero-padded circular correlation.
pub(crate) fn lagged_products(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = (2 * n).next_power_of_two();
    let mut buf = vec![Complex::ZERO; m];
    for (slot, &x) in buf.iter_mut().zip(values) {
        *slot = Complex::new(x, 0.0);
    }
    fft(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    ifft(&mut buf);
    buf.iter().take(n).map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex], inverse: bool) -> Vec<Complex> {
        let n = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                let mut acc = Complex::ZERO;
                for (t, &v) in x.iter().enumerate() {
                    let phase = sign * 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    acc = acc + v * Complex::cis(phase);
                }
                acc
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex> {
        (0..n)
            .map(|i| {
                Complex::new(
                    math::sin(i as f64 * 0.7) + 0.1 * i as f64,
                    math::cos(i as f64 * 1.3),
                )
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_for_assorted_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 16, 33, 64, 100] {
            let x = signal(n);
            let mut fast = x.clone();
            fft(&mut fast);
            let slow = naive_dft(&x, false);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((*a - *b).norm() < 1e-9 * (1.0 + b.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn ifft_inverts_fft() {
        for n in [7usize, 16, 45] {
            let x = signal(n);
            let mut y = x.clone();
            fft(&mut y);
            ifft(&mut y);
            for (a, b) in x.iter().zip(&y) {
                assert!((*a - *b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lagged_products_match_direct_sum() {
        let x: Vec<f64> = (0..13).map(|i| math::sin(i as f64)).collect();
        let fast = lagged_products(&x);
        for tau in 0..x.len() {
            let direct: f64 = (0..x.len() - tau).map(|t| x[t] * x[t + tau]).sum();
            assert!((fast[tau] - direct).abs() < 1e-12);
        }
    }
}
