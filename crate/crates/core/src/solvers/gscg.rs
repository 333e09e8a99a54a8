//! Shrinkage/conjugate-gradient hybrid: combines the shrinkage descent
//! direction with a Polak-Ribiere-style memory direction when a sufficient
//! descent test holds; otherwise falls back to a shrinkage step whose length
//! blends the Barzilai-Borwein step with the previous one.

use ndarray::Array1;

use super::{bb_steplength, Context, RawSolve};
use crate::error::Result;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau0 = 1.0 / ctx.lipschitz;
    let mu = ctx.mu();
    let sigma = ctx.params().gscg_sigma;
    let gamma = ctx.params().gscg_gamma;
    let clamp = ctx.params().bb_clamp;

    let mut x = x0;
    let r0 = ctx.residual(&x);
    let mut g = ctx.grad(&r0);
    let mut f = ctx.value(&r0, &x);
    let mut prev: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut dir_prev: Option<Array1<f64>> = None;
    let mut hybrid_prev: Option<Array1<f64>> = None;
    let mut tau_prev = tau0;

    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        trace.push(f);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < ctx.max_iter() {
        let tau_bb = match &prev {
            Some((px, pg)) => bb_steplength(&(&x - px), &(&g - pg), clamp),
            None => tau0,
        };
        let tau = (gamma * tau_bb + (1.0 - gamma) * tau_prev).clamp(clamp.0, clamp.1);
        let dir = &ctx.shrink_step(&x, &g, tau, mu) - &x;

        let mut step: Option<(Array1<f64>, Array1<f64>, f64)> = None;
        if let (Some(dp), Some(hp)) = (&dir_prev, &hybrid_prev) {
            let denom = dp.dot(dp);
            if denom > 0.0 {
                let beta = (dir.dot(&(&dir - dp)) / denom).max(0.0);
                let hybrid = &dir + &(hp * beta);
                if g.dot(&hybrid) <= -sigma * hybrid.dot(&hybrid) {
                    let cand = &x + &hybrid;
                    let rc = ctx.residual(&cand);
                    let fc = ctx.value(&rc, &cand);
                    if fc.is_finite() && fc < f {
                        hybrid_prev = Some(hybrid);
                        step = Some((cand, rc, fc));
                    }
                }
            }
        }
        if step.is_none() {
            // restart the direction memory and take the shrinkage step
            let mut cand = &x + &dir;
            let mut rc = ctx.residual(&cand);
            let mut fc = ctx.value(&rc, &cand);
            if !fc.is_finite() || fc > f {
                cand = ctx.shrink_step(&x, &g, tau0, mu);
                rc = ctx.residual(&cand);
                fc = ctx.value(&rc, &cand);
            }
            hybrid_prev = Some(&cand - &x);
            step = Some((cand, rc, fc));
        }

        let (x_next, r_next, f_next) = step.expect("a step is always produced");
        ctx.ensure_finite(&x_next, f_next)?;
        iterations += 1;
        if ctx.trace_enabled() {
            trace.push(f_next);
        }

        let g_next = ctx.grad(&r_next);
        let stop = ctx.iterate_converged(&x_next, &x) || ctx.residual_converged(&r_next);
        prev = Some((std::mem::replace(&mut x, x_next), std::mem::replace(&mut g, g_next)));
        f = f_next;
        dir_prev = Some(dir);
        tau_prev = tau;
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
