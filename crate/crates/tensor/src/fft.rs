//! Iterative radix-2 Cooley–Tukey FFT.

use crate::counter::{self, MacCategory};
use crate::error::{Result, TensorError};
use crate::scalar::Scalar;

/// Split real/imaginary storage of a complex signal whose length is a power
/// of two.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBuffer<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexBuffer<T> {
    pub fn new(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(TensorError::Invalid(format!(
                "real part has {} samples, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        check_pow2(re.len())?;
        Ok(Self { re, im })
    }

    pub fn from_real(re: Vec<T>) -> Result<Self> {
        let im = vec![T::zero(); re.len()];
        Self::new(re, im)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(TensorError::NotPowerOfTwo(n));
    }
    Ok(())
}

/// Forward (unnormalized) or inverse (scaled by `1/len`) transform.
pub fn fft_pow2<T: Scalar>(mut buf: ComplexBuffer<T>, inverse: bool) -> Result<ComplexBuffer<T>> {
    let plan = Radix2Plan::new(buf.len())?;
    plan.run(&mut buf.re, &mut buf.im, inverse, counter::active());
    Ok(buf)
}

/// Precomputed bit-reversal permutation and twiddle factors for one length.
#[derive(Debug, Clone)]
pub struct Radix2Plan<T> {
    n: usize,
    bitrev: Vec<usize>,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Scalar> Radix2Plan<T> {
    pub fn new(n: usize) -> Result<Self> {
        check_pow2(n)?;
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let half = n / 2;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for k in 0..half {
            let theta = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
            cos.push(T::lit(theta.cos()));
            sin.push(T::lit(theta.sin()));
        }
        Ok(Self { n, bitrev, cos, sin })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of real multiplications one transform performs.
    pub fn macs(&self) -> u64 {
        let stages = self.n.trailing_zeros() as u64;
        // One complex multiply (four real) per butterfly.
        2 * self.n as u64 * stages
    }

    /// In-place transform of `re`/`im`, both of length `len()`.
    pub fn run(&self, re: &mut [T], im: &mut [T], inverse: bool, cat: MacCategory) {
        let n = self.n;
        assert_eq!(re.len(), n);
        assert_eq!(im.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { -T::one() } else { T::one() };
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let wr = self.cos[k * stride];
                    let wi = sign * self.sin[k * stride];
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
        if inverse {
            let scale = T::one() / T::lit(n as f64);
            re.iter_mut().for_each(|x| *x *= scale);
            im.iter_mut().for_each(|x| *x *= scale);
        }
        counter::record(cat, self.macs());
    }
}
