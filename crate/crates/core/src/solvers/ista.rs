//! Baseline iterative shrinkage-thresholding with the constant step 1/L.

use ndarray::Array1;

use super::{Context, RawSolve};
use crate::error::Result;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau = 1.0 / ctx.lipschitz;
    let mu = ctx.mu();

    let mut x = x0;
    let mut r = ctx.residual(&x);
    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        trace.push(ctx.value(&r, &x));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < ctx.max_iter() {
        let g = ctx.grad(&r);
        let x_next = ctx.shrink_step(&x, &g, tau, mu);
        let r_next = ctx.residual(&x_next);
        let f_next = ctx.value(&r_next, &x_next);
        ctx.ensure_finite(&x_next, f_next)?;
        iterations += 1;
        if ctx.trace_enabled() {
            trace.push(f_next);
        }
        let stop = ctx.iterate_converged(&x_next, &x) || ctx.residual_converged(&r_next);
        x = x_next;
        r = r_next;
        if stop {
            converged = true;
            break;
        }
    }

    Ok(RawSolve {
        x,
        iterations,
        converged,
        trace,
    })
}
