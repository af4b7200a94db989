//! Complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes use an iterative radix-2 kernel. Any other size goes
//! through Bluestein's chirp-z transform on top of a power-of-two kernel.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size <<= 1;
        }
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            return Self {
                len,
                kind: Kind::Radix2(Radix2::new(len)),
            };
        }
        let m = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp[k] = exp(-i pi k^2 / n); k^2 reduced mod 2n to keep the angle small
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            len,
            kind: Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unnormalized forward DFT: `X[k] = sum_n x[n] exp(-2 pi i k n / N)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        match &self.kind {
            Kind::Radix2(r) => r.forward(buf),
            Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.len;
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for k in 0..self.len {
                    work[k] = buf[k] * chirp[k];
                }
                inner.forward(&mut work);
                for (w, h) in work.iter_mut().zip(kernel_spectrum) {
                    *w *= h;
                }
                inner.inverse(&mut work);
                let scale = 1.0 / m as f64;
                for k in 0..self.len {
                    buf[k] = work[k] * chirp[k] * scale;
                }
            }
        }
    }

    /// In-place inverse DFT including the `1/N` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

/// Linear convolution via FFT. Output length is `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let fft = Fft::new(n);
    let mut fa: Vec<Complex64> = (0..n)
        .map(|i| {
            Complex64::new(
                a.get(i).copied().unwrap_or(0.0),
                b.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    // two real transforms packed into one complex transform
    fft.forward(&mut fa);
    let mut prod = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let z = fa[k];
        let zc = fa[(n - k) % n].conj();
        let xa = (z + zc) * 0.5;
        let xb = (z - zc) * Complex64::new(0.0, -0.5);
        prod[k] = xa * xb;
    }
    fft.inverse(&mut prod);
    prod.into_iter().take(out_len).map(|c| c.re).collect()
}
