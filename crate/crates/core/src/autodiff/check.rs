//! Finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use crate::error::Result;

/// Compare the tape gradient of `f` at `point` against central finite
/// differences with step `eps`. Returns the maximum over coordinates of
/// `|ad - fd| / (|fd| + 1e-12)`.
///
/// The caller is responsible for keeping `point` at least `eps` away from
/// kinks of `abs` and `relu`; at a kink the two sides disagree and the
/// comparison is meaningless.
pub fn grad_check<F>(f: F, point: &[f64], eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let eval = |coords: &[f64]| -> Result<f64> {
        let tape = Tape::new();
        let vars = leaves(&tape, coords)?;
        Ok(f(&tape, &vars)?.value())
    };

    // Tape gradient at the point itself.
    let tape = Tape::new();
    let vars = leaves(&tape, point)?;
    let out = f(&tape, &vars)?;
    let grads = tape.backward(out)?;
    let ad: Vec<f64> = vars.iter().map(|v| grads.scalar(*v)).collect();

    let mut max_rel = 0.0f64;
    let mut shifted = point.to_vec();
    for i in 0..point.len() {
        shifted[i] = point[i] + eps;
        let up = eval(&shifted)?;
        shifted[i] = point[i] - eps;
        let down = eval(&shifted)?;
        shifted[i] = point[i];
        let fd = (up - down) / (2.0 * eps);
        let rel = (ad[i] - fd).abs() / (fd.abs() + 1e-12);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

fn leaves<'t>(tape: &'t Tape, coords: &[f64]) -> Result<Vec<Var<'t>>> {
    coords.iter().map(|&c| tape.scalar(c)).collect()
}
