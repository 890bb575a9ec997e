//! FFT helpers on top of rustfft: periodic convolution of real samples
//! and application of a real Fourier multiplier on a 2-D periodic grid.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Circular convolution of two equal-length real sample vectors.
pub fn circular_convolve_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// Apply a real multiplier in Fourier space to a real 1-D periodic
/// signal: out = Re IFFT( m .* FFT(x) ). `m` is indexed by FFT bin.
pub fn apply_multiplier_1d(x: &[f64], m: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), m.len());
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (c, &mi) in buf.iter_mut().zip(m) {
        *c *= mi;
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Planned 2-D FFT on an n x n row-major grid with a cached transpose
/// buffer. Used to apply a real symbol pointwise in frequency space.
pub struct Fft2 {
    n: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        Fft2 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn fft_rows(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        for row in buf.chunks_mut(self.n) {
            plan.process(row);
        }
    }

    fn transpose(&self, buf: &mut [Complex<f64>], tmp: &mut [Complex<f64>]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                tmp[j * n + i] = buf[i * n + j];
            }
        }
        buf.copy_from_slice(tmp);
    }

    /// out = Re IFFT2( symbol .* FFT2(field) ), with `symbol` real and
    /// row-major in FFT bin order.
    pub fn apply_symbol(&self, field: &[f64], symbol: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(field.len(), n * n);
        assert_eq!(symbol.len(), n * n);
        let mut buf: Vec<Complex<f64>> =
            field.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut tmp = vec![Complex::new(0.0, 0.0); n * n];
        self.fft_rows(&mut buf, false);
        self.transpose(&mut buf, &mut tmp);
        self.fft_rows(&mut buf, false);
        self.transpose(&mut buf, &mut tmp);
        for (c, &s) in buf.iter_mut().zip(symbol) {
            *c *= s;
        }
        self.fft_rows(&mut buf, true);
        self.transpose(&mut buf, &mut tmp);
        self.fft_rows(&mut buf, true);
        self.transpose(&mut buf, &mut tmp);
        let scale = 1.0 / (n * n) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// FFT bin frequencies in cycles per period for length n: bin k maps to
/// k for k <= n/2 and k - n beyond, matching the usual DFT layout.
pub fn fft_freq(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn convolution_matches_direct() {
        let n = 64;
        let a: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 3 % 11) as f64).cos()).collect();
        let fast = circular_convolve_real(&a, &b);
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[j] * b[(n + k - j) % n];
            }
            assert!((fast[k] - s).abs() < 1e-10);
        }
    }

    #[test]
    fn multiplier_differentiates_sine() {
        // multiplier (2 pi k / L)^2 acting on sin(2 pi x / L) gives
        // (2 pi / L)^2 sin, i.e. -Laplacian of the mode
        let n = 128;
        let l = 5.0;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let m: Vec<f64> = fft_freq(n)
            .iter()
            .map(|&k| (2.0 * PI * k / l).powi(2))
            .collect();
        let y = apply_multiplier_1d(&x, &m);
        let want = (2.0 * PI / l).powi(2);
        for i in 0..n {
            assert!((y[i] - want * x[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn symbol_2d_diagonalizes_plane_wave() {
        let n = 32;
        let mut field = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                field[i * n + j] =
                    (2.0 * PI * (3.0 * i as f64 + 5.0 * j as f64) / n as f64).cos();
            }
        }
        // symbol that is 7 on the (±3, ±5) modes and 0 elsewhere
        let freqs = fft_freq(n);
        let mut symbol = vec![0.0; n * n];
        for (bi, &ki) in freqs.iter().enumerate() {
            for (bj, &kj) in freqs.iter().enumerate() {
                if ki.abs() == 3.0 && kj.abs() == 5.0 {
                    symbol[bi * n + bj] = 7.0;
                }
            }
        }
        let out = Fft2::new(n).apply_symbol(&field, &symbol);
        for i in 0..n * n {
            assert!((out[i] - 7.0 * field[i]).abs() < 1e-9);
        }
    }
}
