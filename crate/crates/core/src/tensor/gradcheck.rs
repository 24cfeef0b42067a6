//! Central finite-difference verification of analytic gradients.

use super::layers::{Forward, Mode, ParamStore};
use super::{Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares the analytic gradient returned by `f` against central
/// differences `(f(θ + eps) - f(θ - eps)) / 2eps`, one coordinate at a time.
///
/// The per-coordinate error is `|analytic - numeric| / (|numeric| + 1e-12)`;
/// the worst coordinate is reported. `f` must be deterministic: it is
/// evaluated twice at `params` and any difference is an error.
pub fn grad_check<F>(mut f: F, params: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let (v0, analytic) = f(params)?;
    let (v1, _) = f(params)?;
    if v0.to_bits() != v1.to_bits() {
        return Err(Error::NonDeterministic {
            first: v0,
            second: v1,
        });
    }
    if analytic.len() != params.len() {
        return Err(Error::shape("grad_check", &[params.len()], &[analytic.len()]));
    }

    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
        checked: params.len(),
    };
    for i in 0..params.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let (plus, _) = f(&theta)?;
        theta[i] = orig - eps;
        let (minus, _) = f(&theta)?;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / (numeric.abs() + 1e-12);
        if i == 0 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    Ok(report)
}

/// Grad-checks the scalar built by `build` against the named parameters of
/// `store`. Each evaluation runs a fresh training-mode pass without an RNG,
/// so dropout is off and batch norm uses batch statistics.
pub fn grad_check_params<F>(
    store: &ParamStore,
    names: &[String],
    eps: f64,
    mut build: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Forward) -> Result<Var>,
{
    let theta = store.flatten(names)?;
    let mut work = store.clone();
    grad_check(
        |t| {
            work.unflatten(names, t)?;
            let mut fwd = Forward::new(&work, Mode::Train, None);
            let loss = build(&mut fwd)?;
            let mut grads = fwd.param_grads(loss, |n| names.iter().any(|m| m == n))?;
            let mut flat = Vec::with_capacity(t.len());
            for n in names {
                match grads.remove(n) {
                    Some(g) => flat.extend_from_slice(g.data()),
                    None => flat.extend(std::iter::repeat_n(0.0, work.get(n)?.len())),
                }
            }
            Ok((fwd.value(loss).item(), flat))
        },
        &theta,
        eps,
    )
}

/// `Σ w ⊙ x` for a fixed weight tensor: a scalar readout whose gradient is
/// generic in every coordinate.
pub fn weighted_sum(fwd: &mut Forward, x: Var, w: &Tensor) -> Result<Var> {
    let wv = fwd.input(w.clone());
    let p = fwd.graph.mul(x, wv)?;
    fwd.graph.sum(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let r = grad_check(|t| Ok((t[0] * t[0], vec![2.0 * t[0]])), &[3.0], 1e-5).unwrap();
        assert!((r.analytic - 6.0).abs() < 1e-15);
        assert!((r.numeric - 6.0).abs() < 1e-8);
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let r = grad_check(
            |t| Ok((t[0] * t[0] + t[1].sin(), vec![4.0 * t[0], 2.0 * t[1].cos()])),
            &[3.0, 0.4],
            1e-5,
        )
        .unwrap();
        assert!((r.max_rel_error - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nondeterminism_is_detected() {
        let mut calls = 0.0;
        let err = grad_check(
            |t| {
                calls += 1.0;
                Ok((t[0] + calls, vec![1.0]))
            },
            &[0.0],
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }
}
