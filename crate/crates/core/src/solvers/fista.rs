//! Accelerated shrinkage with Nesterov momentum: proximal step at the
//! extrapolated point, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.

use ndarray::Array1;

use super::{Context, RawSolve};
use crate::error::Result;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau = 1.0 / ctx.lipschitz;
    let mu = ctx.mu();

    let mut x_prev = x0.clone();
    let mut y = x0;
    let mut t = 1.0f64;
    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        let r = ctx.residual(&x_prev);
        trace.push(ctx.value(&r, &x_prev));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < ctx.max_iter() {
        let ry = ctx.residual(&y);
        let g = ctx.grad(&ry);
        let x = ctx.shrink_step(&y, &g, tau, mu);
        let r = ctx.residual(&x);
        let f = ctx.value(&r, &x);
        ctx.ensure_finite(&x, f)?;
        iterations += 1;
        if ctx.trace_enabled() {
            trace.push(f);
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = &x + &((&x - &x_prev) * beta);

        let stop = ctx.iterate_converged(&x, &x_prev) || ctx.residual_converged(&r);
        x_prev = x;
        t = t_next;
        if stop {
            converged = true;
            break;
        }
    }

    Ok(RawSolve {
        x: x_prev,
        iterations,
        converged,
        trace,
    })
}
