//! Parameter-free Fourier token mixing.
//!
//! `fourier_mix(x) = Re(DFT_seq(DFT_hidden(x)))`, where both axes are zero
//! padded to the next power of two before transforming and the result is
//! cropped back to the input shape. The hidden axis is transformed first.
//!
//! On the padded domain the map `X ↦ Re(F_N X F_D)` is self-adjoint (both DFT
//! matrices are symmetric and `X` is real), and padding is the adjoint of
//! cropping, so the backward pass applies the very same transform to the
//! incoming gradient.

use crate::counter::{self, MacCategory};
use crate::fft::Radix2Plan;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Applies the padded two-axis Fourier transform and keeps the real part.
pub fn fourier_mix<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    fourier_mix_counted(x, counter::active())
}

pub(crate) fn fourier_mix_counted<T: Scalar>(x: &Tensor<T>, cat: MacCategory) -> Tensor<T> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return x.clone();
    }
    let seq_len = n.next_power_of_two();
    let hid_len = d.next_power_of_two();
    let hid_plan = Radix2Plan::<T>::new(hid_len).expect("power of two");
    let seq_plan = Radix2Plan::<T>::new(seq_len).expect("power of two");

    // Hidden-axis transform of every real row; rows beyond `n` are zero and
    // stay zero, so only the first `n` are transformed.
    let mut spec_re = vec![T::zero(); n * hid_len];
    let mut spec_im = vec![T::zero(); n * hid_len];
    for r in 0..n {
        let re = &mut spec_re[r * hid_len..(r + 1) * hid_len];
        re[..d].copy_from_slice(x.row(r));
        let im = &mut spec_im[r * hid_len..(r + 1) * hid_len];
        hid_plan.run(re, im, false, cat);
    }

    // Sequence-axis transform; only the first `d` columns survive the crop.
    let mut out = Tensor::zeros(n, d);
    let mut col_re = vec![T::zero(); seq_len];
    let mut col_im = vec![T::zero(); seq_len];
    for c in 0..d {
        for r in 0..n {
            col_re[r] = spec_re[r * hid_len + c];
            col_im[r] = spec_im[r * hid_len + c];
        }
        col_re[n..].iter_mut().for_each(|v| *v = T::zero());
        col_im[n..].iter_mut().for_each(|v| *v = T::zero());
        seq_plan.run(&mut col_re, &mut col_im, false, cat);
        for r in 0..n {
            out.set(r, c, col_re[r]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_is_identity() {
        let x = Tensor::<f64>::scalar(1.0);
        assert_eq!(fourier_mix(&x).data(), &[1.0]);
    }

    #[test]
    fn all_ones_two_by_two() {
        let x = Tensor::<f64>::ones(2, 2);
        let y = fourier_mix(&x);
        assert_eq!(y.to_rows(), vec![vec![4.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn shape_preserved_for_odd_sizes() {
        let x = Tensor::<f64>::from_fn(7, 5, |r, c| (r as f64 - c as f64).sin());
        assert_eq!(fourier_mix(&x).shape(), (7, 5));
    }
}
