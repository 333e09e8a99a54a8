//! Fixed-point continuation with Barzilai-Borwein steps: operator-splitting
//! iterations `x <- S_{mu_bar * tau}(x - tau grad f(x))` on a geometrically
//! decreasing penalty schedule, warm-starting each stage.

use std::collections::VecDeque;

use ndarray::Array1;

use super::{bb_steplength, Context, RawSolve};
use crate::error::{Error, Result};

const WATCHDOG_WINDOW: usize = 5;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau0 = 1.0 / ctx.lipschitz;
    let target_mu = ctx.mu();
    let eta = ctx.params().fpc_eta;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Config(format!(
            "continuation factor must lie in (0, 1), got {eta}"
        )));
    }
    let clamp = ctx.params().bb_clamp;

    let mu_start = ctx.params().fpc_mu0_factor * ctx.zero_threshold;
    let mut stage_mu = if mu_start > target_mu { mu_start } else { target_mu };

    let mut x = x0;
    let mut r = ctx.residual(&x);
    let mut g = ctx.grad(&r);
    let mut prev: Option<(Array1<f64>, Array1<f64>)> = None;

    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        trace.push(ctx.value(&r, &x));
    }

    let mut iterations = 0;
    let mut converged = false;
    'outer: loop {
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(WATCHDOG_WINDOW);
        recent.push_back(ctx.value_at(&r, &x, stage_mu));
        loop {
            if iterations >= ctx.max_iter() {
                break 'outer;
            }
            let tau = match &prev {
                Some((px, pg)) => bb_steplength(&(&x - px), &(&g - pg), clamp),
                None => tau0,
            };
            let mut x_next = ctx.shrink_step(&x, &g, tau, stage_mu);
            let mut r_next = ctx.residual(&x_next);
            let mut f_next = ctx.value_at(&r_next, &x_next, stage_mu);
            let worst = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !f_next.is_finite() || f_next > worst {
                // BB step rejected; fall back to the safe 1/L step
                x_next = ctx.shrink_step(&x, &g, tau0, stage_mu);
                r_next = ctx.residual(&x_next);
                f_next = ctx.value_at(&r_next, &x_next, stage_mu);
            }
            ctx.ensure_finite(&x_next, f_next)?;
            iterations += 1;

            let g_next = ctx.grad(&r_next);
            let at_target = stage_mu == target_mu;
            let stage_done = ctx.iterate_converged(&x_next, &x)
                || (at_target && ctx.residual_converged(&r_next));

            prev = Some((std::mem::replace(&mut x, x_next), std::mem::replace(&mut g, g_next)));
            r = r_next;
            if ctx.trace_enabled() {
                trace.push(ctx.value(&r, &x));
            }
            if recent.len() == WATCHDOG_WINDOW {
                recent.pop_front();
            }
            recent.push_back(f_next);

            if stage_done {
                if at_target {
                    converged = true;
                    break 'outer;
                }
                stage_mu = (stage_mu * eta).max(target_mu);
                break;
            }
        }
    }

    Ok(RawSolve {
        x,
        iterations,
        converged,
        trace,
    })
}
