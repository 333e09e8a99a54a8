//! Shrinkage direction from a Barzilai-Borwein step, with the step length
//! along that direction chosen by a Goldstein-style doubling/halving search
//! on the composite objective starting from the unit step.

use ndarray::Array1;

use super::{bb_steplength, l1_norm, Context, RawSolve};
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 100;
const MAX_DOUBLINGS: usize = 60;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau0 = 1.0 / ctx.lipschitz;
    let mu = ctx.mu();
    let c1 = ctx.params().isga_c1;
    let c2 = ctx.params().isga_c2;
    let clamp = ctx.params().bb_clamp;

    let mut x = x0;
    let mut r = ctx.residual(&x);
    let mut g = ctx.grad(&r);
    let mut f = ctx.value(&r, &x);
    let mut prev: Option<(Array1<f64>, Array1<f64>)> = None;

    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        trace.push(f);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < ctx.max_iter() {
        let tau = match &prev {
            Some((px, pg)) => bb_steplength(&(&x - px), &(&g - pg), clamp),
            None => tau0,
        };
        let target = ctx.shrink_step(&x, &g, tau, mu);
        let dir = &target - &x;
        if dir.iter().all(|&v| v == 0.0) {
            // already a fixed point of the shrinkage map
            converged = true;
            break;
        }

        // model decrease of the composite objective at the unit step
        let delta = g.dot(&dir) + mu * (l1_norm(&target) - l1_norm(&x));

        let step = if delta >= 0.0 {
            // degenerate model; take the safe 1/L shrinkage step
            let cand = ctx.shrink_step(&x, &g, tau0, mu);
            let rc = ctx.residual(&cand);
            let fc = ctx.value(&rc, &cand);
            Some((cand, rc, fc))
        } else {
            // residual moves linearly along the direction: r(x + a d) = r + a D d
            let dir_img = ctx.dict().dot(&dir);
            let value_along = |alpha: f64| -> f64 {
                let mut quad = 0.0;
                for (ri, di) in r.iter().zip(dir_img.iter()) {
                    let v = ri + alpha * di;
                    quad += v * v;
                }
                let mut l1 = 0.0;
                for (xi, di) in x.iter().zip(dir.iter()) {
                    l1 += (xi + alpha * di).abs();
                }
                0.5 * quad + mu * l1
            };
            let upper_ok = |alpha: f64, fa: f64| fa <= f + c1 * alpha * delta;
            let lower_ok = |alpha: f64, fa: f64| fa >= f + c2 * alpha * delta;

            let mut found = None;
            let f1 = value_along(1.0);
            if upper_ok(1.0, f1) {
                let mut best = (1.0, f1);
                if !lower_ok(1.0, f1) {
                    // decrease beats the Goldstein window: grow while profitable
                    let mut alpha = 2.0;
                    for _ in 0..MAX_DOUBLINGS {
                        let fa = value_along(alpha);
                        if !(fa.is_finite() && upper_ok(alpha, fa) && fa < best.1) {
                            break;
                        }
                        best = (alpha, fa);
                        if lower_ok(alpha, fa) {
                            break;
                        }
                        alpha *= 2.0;
                    }
                }
                found = Some(best);
            } else {
                let mut alpha = 0.5;
                for _ in 0..MAX_HALVINGS {
                    let fa = value_along(alpha);
                    if fa.is_finite() && upper_ok(alpha, fa) {
                        found = Some((alpha, fa));
                        break;
                    }
                    alpha *= 0.5;
                }
            }

            match found {
                Some((alpha, _)) => {
                    // the unit step is the exact shrinkage point; keep its sparsity
                    let cand = if alpha == 1.0 {
                        target.clone()
                    } else {
                        &x + &(&dir * alpha)
                    };
                    let rc = ctx.residual(&cand);
                    let fc = ctx.value(&rc, &cand);
                    Some((cand, rc, fc))
                }
                None => None,
            }
        };

        let Some((x_next, r_next, f_next)) = step else {
            // exhausted line search: the iterate is either already optimal to
            // working precision or genuinely stuck
            let fp = super::check_optimality(ctx.prob, &x, tau0)?;
            if fp <= 10.0 * ctx.cfg.eps_rel * (1.0 + super::inf_norm(&x)) {
                converged = true;
                break;
            }
            return Err(Error::Stagnation(
                "Goldstein line search exhausted away from optimality".into(),
            ));
        };
        ctx.ensure_finite(&x_next, f_next)?;
        iterations += 1;
        if ctx.trace_enabled() {
            trace.push(f_next);
        }

        let g_next = ctx.grad(&r_next);
        let stop = ctx.iterate_converged(&x_next, &x) || ctx.residual_converged(&r_next);
        prev = Some((std::mem::replace(&mut x, x_next), std::mem::replace(&mut g, g_next)));
        r = r_next;
        f = f_next;
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
