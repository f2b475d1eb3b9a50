//! Limited-memory BFGS over finite-difference gradients, with Armijo
//! backtracking so accepted iterates never increase the objective.
//!
//! The dimension here is tiny (one transport parameter per domain), so the
//! cost lives entirely in objective evaluations; the [`Objective`] trait lets
//! an implementation shortcut evaluations that perturb a single coordinate.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A scalar objective over a small parameter vector.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;

    /// Value at `base` with coordinate `i` replaced by `xi`. Override when a
    /// single coordinate touches only a slice of the computation.
    fn value_perturbed(&mut self, base: &[f64], i: usize, xi: f64) -> Result<f64> {
        let mut x = base.to_vec();
        x[i] = xi;
        self.value(&x)
    }
}

/// Plain closure objective.
pub struct FnObjective<F: FnMut(&[f64]) -> Result<f64>>(pub F);

impl<F: FnMut(&[f64]) -> Result<f64>> Objective for FnObjective<F> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// Central-difference gradient: two evaluations per coordinate through the
/// single-coordinate fast path.
pub fn central_difference_gradient<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let hi = obj.value_perturbed(x, i, xi + step)?;
            let lo = obj.value_perturbed(x, i, xi - step)?;
            Ok((hi - lo) / (2.0 * step))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// History pairs kept for the two-loop recursion.
    pub memory: usize,
    /// Stop when the relative loss decrease over `patience` accepted
    /// iterations falls below this.
    pub loss_decrease_tol: f64,
    pub patience: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 200,
            grad_tol: 1e-7,
            fd_step: 1e-5,
            memory: 8,
            loss_decrease_tol: 1e-10,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Accepted objective values, starting with the initial one.
    /// Non-increasing by construction.
    pub trace: Vec<f64>,
    /// False only when the iteration budget ran out with a large gradient.
    pub converged: bool,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `obj` from `x0`. Fails only when the objective turns
/// non-finite at the starting point or the gradient cannot be evaluated.
pub fn minimize_lbfgs<O: Objective + ?Sized>(
    obj: &mut O,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> Result<OptimOutcome> {
    let mut x = x0.to_vec();
    let mut f = obj.value(&x)?;
    if !f.is_finite() {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let mut trace = vec![f];
    let mut grad = central_difference_gradient(obj, &x, opts.fd_step)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        if inf_norm(&grad) <= opts.grad_tol {
            converged = true;
            break;
        }

        let mut direction = two_loop_direction(&grad, &history);
        let mut slope = dot(&direction, &grad);
        if !(slope < 0.0) {
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&direction, &grad);
        }

        // Armijo backtracking: accepted steps strictly decrease the loss.
        let c1 = 1e-4;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + t * di)
                .collect();
            let fc = obj.value(&candidate)?;
            if fc.is_finite() && fc <= f + c1 * t * slope {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent step found: numerically at a stationary point.
            converged = true;
            break;
        };

        let grad_new = central_difference_gradient(obj, &x_new, opts.fd_step)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }

        x = x_new;
        f = f_new;
        grad = grad_new;
        trace.push(f);
        iterations = iter + 1;

        if trace.len() > opts.patience {
            let before = trace[trace.len() - 1 - opts.patience];
            if before - f <= opts.loss_decrease_tol * f.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }
    if inf_norm(&grad) <= opts.grad_tol {
        converged = true;
    }

    debug_assert!(
        trace.windows(2).all(|w| w[1] <= w[0]),
        "accepted iterates must not increase the loss"
    );
    Ok(OptimOutcome {
        x,
        value: f,
        trace,
        converged,
        iterations,
    })
}

/// Two-loop recursion for the L-BFGS search direction `-H·g`.
fn two_loop_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
