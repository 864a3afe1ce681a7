//! Minimal complex arithmetic, FFT, and spectral differentiation on periodic
//! grids. Radix-2 Cooley–Tukey for power-of-two sizes, naive DFT otherwise
//! (the meshes used here are tiny).

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Complex {
            re: r * theta.cos(),
            im: r * theta.sin(),
        }
    }

    pub fn conj(self) -> Self {
        Complex {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn abs_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, c: f64) -> Self {
        Complex {
            re: self.re * c,
            im: self.im * c,
        }
    }

    pub fn mul(self, other: Complex) -> Self {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn add(self, other: Complex) -> Self {
        Complex {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    pub fn sub(self, other: Complex) -> Self {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }

    /// Multiplication by i·c.
    pub fn mul_i(self, c: f64) -> Self {
        Complex {
            re: -self.im * c,
            im: self.re * c,
        }
    }
}

/// In-place FFT; `inverse` applies the 1/n normalization.
pub fn fft(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if !n.is_power_of_two() {
        let out = dft_naive(buf, inverse);
        buf.copy_from_slice(&out);
        return;
    }
    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wl = Complex::from_polar(1.0, ang);
        for start in (0..n).step_by(len) {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2].mul(w);
                buf[start + k] = a.add(b);
                buf[start + k + len / 2] = a.sub(b);
                w = w.mul(wl);
            }
        }
        len <<= 1;
    }
    if inverse {
        let inv = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v = v.scale(inv);
        }
    }
}

fn dft_naive(buf: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = buf.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    (0..n)
        .map(|k| {
            let mut acc = Complex::ZERO;
            for (j, v) in buf.iter().enumerate() {
                let ang = sign * 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc = acc.add(v.mul(Complex::from_polar(1.0, ang)));
            }
            acc.scale(scale)
        })
        .collect()
}

/// d/dx of a periodic complex field on a domain of the given length, computed
/// in Fourier space. The unmatched Nyquist mode's derivative is set to zero.
pub fn derivative(values: &[Complex], length: f64) -> Vec<Complex> {
    let n = values.len();
    let mut hat = values.to_vec();
    fft(&mut hat, false);
    for (k, v) in hat.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
        let wavenumber = if n % 2 == 0 && k == n / 2 {
            0.0
        } else {
            2.0 * std::f64::consts::PI * signed as f64 / length
        };
        *v = v.mul_i(wavenumber);
    }
    fft(&mut hat, true);
    hat
}

/// Spectral derivative of a real field (imaginary residue discarded).
pub fn derivative_real(values: &[f64], length: f64) -> Vec<f64> {
    let complex: Vec<Complex> = values.iter().map(|v| Complex::new(*v, 0.0)).collect();
    derivative(&complex, length).into_iter().map(|c| c.re).collect()
}
