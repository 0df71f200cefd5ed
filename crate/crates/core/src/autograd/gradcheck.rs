//! Central finite-difference gradient checking at 64-bit precision.
//! Used by the unit tests and the acceptance suite; exported so downstream
//! test code can drive it against whole models.

use super::{AutogradError, Tensor};

/// One differentiable input to the function under check.
pub struct CheckInput {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
}

impl CheckInput {
    pub fn new(values: Vec<f64>, shape: &[usize]) -> Self {
        Self {
            values,
            shape: shape.to_vec(),
        }
    }
}

/// Compares backward-pass gradients against central differences with step
/// `h`, over every coordinate of every input. Returns the worst normalized
/// error `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
///
/// The function must be a deterministic map from its inputs to a scalar
/// tensor; it is rebuilt for every evaluation.
pub fn finite_difference_check<B>(
    inputs: &[CheckInput],
    build: B,
    h: f64,
) -> Result<f64, AutogradError>
where
    B: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>, AutogradError>,
{
    // Analytic gradients.
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|inp| Tensor::leaf(inp.values.clone(), &inp.shape, true))
        .collect::<Result<_, _>>()?;
    let loss = build(&leaves)?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let eval = |vals: &[Vec<f64>]| -> Result<f64, AutogradError> {
        let leaves: Vec<Tensor<f64>> = inputs
            .iter()
            .zip(vals.iter())
            .map(|(inp, v)| Tensor::leaf(v.clone(), &inp.shape, true))
            .collect::<Result<_, _>>()?;
        Ok(build(&leaves)?.item())
    };

    let base: Vec<Vec<f64>> = inputs.iter().map(|i| i.values.clone()).collect();
    let mut worst = 0.0f64;
    for (li, input) in inputs.iter().enumerate() {
        for j in 0..input.values.len() {
            let mut plus = base.clone();
            plus[li][j] += h;
            let mut minus = base.clone();
            minus[li][j] -= h;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let a = analytic[li][j];
            let err = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

/// Result of a parameter-space finite-difference sweep.
#[derive(Debug, Clone, Copy)]
pub struct ParamCheckOutcome {
    /// Worst normalized error over the smooth coordinates.
    pub max_err: f64,
    /// Coordinates where the two one-sided secants agreed (smooth point,
    /// strict central-difference comparison).
    pub smooth: usize,
    /// Coordinates with a ReLU-family kink inside the interval: there the
    /// analytic value must lie between the one-sided slopes instead.
    pub kinked: usize,
}

/// Like [`finite_difference_check`], but perturbs live parameter tensors in
/// place. `build` re-runs the model forward pass and returns the scalar
/// loss; parameters are restored afterwards. This is how whole models are
/// checked: their layers own their tensors.
///
/// Deep compositions of piecewise-linear activations put kinks arbitrarily
/// close to any parameter value, where a central difference converges to the
/// average of the one-sided slopes rather than to either subgradient. Each
/// coordinate is therefore classified by its left/right secants: where they
/// agree the usual strict comparison applies; where they differ the analytic
/// gradient must fall inside the secant envelope. A wrong backward rule
/// fails the strict branch, which dominates.
pub fn finite_difference_check_params<B>(
    params: &[Tensor<f64>],
    build: B,
    h: f64,
) -> Result<ParamCheckOutcome, AutogradError>
where
    B: Fn() -> Result<Tensor<f64>, AutogradError>,
{
    for p in params {
        p.zero_grad();
    }
    let loss = build()?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();
    let f0 = build()?.item();

    let mut outcome = ParamCheckOutcome {
        max_err: 0.0,
        smooth: 0,
        kinked: 0,
    };
    for (pi, p) in params.iter().enumerate() {
        let base = p.values();
        for j in 0..base.len() {
            let eval_at = |delta: f64| -> Result<f64, AutogradError> {
                let mut vals = base.clone();
                vals[j] += delta;
                p.set_values(vals)?;
                Ok(build()?.item())
            };
            let right = (eval_at(h)? - f0) / h;
            let left = (f0 - eval_at(-h)?) / h;
            p.set_values(base.clone())?;

            let a = analytic[pi][j];
            let scale = 1.0f64.max(right.abs()).max(left.abs());
            if (right - left).abs() / scale <= 1e-3 {
                outcome.smooth += 1;
                let numeric = 0.5 * (right + left);
                let err = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
                if err > outcome.max_err {
                    outcome.max_err = err;
                }
            } else {
                outcome.kinked += 1;
                let margin = 1e-3 * scale;
                let lo = left.min(right) - margin;
                let hi = left.max(right) + margin;
                if a < lo || a > hi {
                    // Count an out-of-envelope subgradient as a hard error.
                    let err = (a - 0.5 * (left + right)).abs() / scale;
                    if err > outcome.max_err {
                        outcome.max_err = err;
                    }
                }
            }
        }
    }
    Ok(outcome)
}
