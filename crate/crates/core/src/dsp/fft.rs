//! Iterative radix-2 FFT for real input.

use num_complex::Complex64;

use super::DspError;

/// Complex spectrum of `signal` zero-padded to `size`, bins `0..=size/2`.
pub fn fft_real(signal: &[f64], size: usize) -> Result<Vec<Complex64>, DspError> {
    let plan = FftPlan::new(size)?;
    if signal.len() > size {
        return Err(DspError::BadSize(format!(
            "signal of length {} exceeds fft size {size}",
            signal.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    plan.forward_real(signal, &mut buf);
    buf.truncate(size / 2 + 1);
    Ok(buf)
}

/// Precomputed twiddles and bit-reversal table for one transform size.
/// Read-only after construction so it can be shared across threads.
#[derive(Debug, Clone)]
pub struct FftPlan {
    size: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(size: usize) -> Result<Self, DspError> {
        if size == 0 || !size.is_power_of_two() {
            return Err(DspError::BadSize(format!("{size} is not a power of two")));
        }
        let bits = size.trailing_zeros();
        let bitrev = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / size as f64))
            .collect();
        Ok(Self {
            size,
            twiddles,
            bitrev,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Full-length forward transform of a real signal (zero-padded) into `out`.
    pub fn forward_real(&self, signal: &[f64], out: &mut [Complex64]) {
        debug_assert!(signal.len() <= self.size && out.len() == self.size);
        for (i, slot) in out.iter_mut().enumerate() {
            let src = self.bitrev[i];
            *slot = Complex64::new(signal.get(src).copied().unwrap_or(0.0), 0.0);
        }
        self.butterflies(out);
    }

    fn butterflies(&self, buf: &mut [Complex64]) {
        let n = self.size;
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.twiddles[j * stride];
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
