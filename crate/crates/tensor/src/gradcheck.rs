//! Central finite-difference gradient verification.
//!
//! The checker only ever evaluates the forward function, so it stays
//! independent of every backward rule it verifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Denominators below this are clamped when forming relative errors, so
/// entries whose true gradient is zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(input, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares tape gradients of `f` against central differences with step `h`.
///
/// Every input is recorded as a trainable leaf. Non-scalar outputs are reduced
/// to a scalar through a fixed random projection, seeded by `seed`.
pub fn check_gradients<T, F>(inputs: &[Tensor<T>], f: F, h: f64, seed: u64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let evaluate = |values: &[Tensor<T>]| -> Result<(Tape<T>, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param(v.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };

    let (mut tape, vars, out) = evaluate(inputs)?;
    let (rows, cols) = tape.shape(out);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection = Tensor::from_fn(rows, cols, |_, _| T::lit(rng.random_range(-1.0..1.0)));
    tape.backward_with(out, projection.clone())?;

    let project = |values: &[Tensor<T>]| -> Result<f64> {
        let (tape, _, out) = evaluate(values)?;
        Ok(tape
            .value(out)
            .data()
            .iter()
            .zip(projection.data())
            .map(|(&a, &w)| (a * w).as_f64())
            .sum())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    let mut perturbed = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        let zeros = Tensor::zeros(input.rows(), input.cols());
        let analytic = tape.grad(vars[which]).unwrap_or(&zeros).clone();
        for idx in 0..input.len() {
            let original = input.data()[idx];
            perturbed[which].data_mut()[idx] = original + T::lit(h);
            let plus = project(&perturbed)?;
            perturbed[which].data_mut()[idx] = original - T::lit(h);
            let minus = project(&perturbed)?;
            perturbed[which].data_mut()[idx] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.data()[idx].as_f64();
            let err = rel_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst = Some((which, idx, a, numeric));
            }
        }
    }
    Ok(report)
}
