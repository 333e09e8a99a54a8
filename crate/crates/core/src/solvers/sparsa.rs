//! Separable-approximation shrinkage: Barzilai-Borwein trial steps accepted
//! under a non-monotone sufficient-decrease rule, with backtracking.

use std::collections::VecDeque;

use ndarray::Array1;

use super::{bb_steplength, Context, RawSolve};
use crate::error::{Error, Result};

const MAX_BACKTRACKS: usize = 100;

pub(super) fn run(ctx: &Context, x0: Array1<f64>) -> Result<RawSolve> {
    let tau0 = 1.0 / ctx.lipschitz;
    let mu = ctx.mu();
    let window = ctx.params().sparsa_window;
    let sigma = ctx.params().sparsa_sigma;
    let contraction = ctx.params().sparsa_contraction;
    let clamp = ctx.params().bb_clamp;

    let mut x = x0;
    let r0 = ctx.residual(&x);
    let mut g = ctx.grad(&r0);
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(window);
    recent.push_back(ctx.value(&r0, &x));
    let mut prev: Option<(Array1<f64>, Array1<f64>)> = None;

    let mut trace = Vec::new();
    if ctx.trace_enabled() {
        trace.push(*recent.back().expect("seeded window"));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < ctx.max_iter() {
        let tau_bb = match &prev {
            Some((px, pg)) => bb_steplength(&(&x - px), &(&g - pg), clamp),
            None => tau0,
        };
        let worst = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut tau = tau_bb;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let cand = ctx.shrink_step(&x, &g, tau, mu);
            let rc = ctx.residual(&cand);
            let fc = ctx.value(&rc, &cand);
            if fc.is_finite() {
                let step = &cand - &x;
                if fc <= worst - (sigma / (2.0 * tau)) * step.dot(&step) {
                    accepted = Some((cand, rc, fc));
                    break;
                }
            }
            tau *= contraction;
        }
        let Some((x_next, r_next, f_next)) = accepted else {
            return Err(Error::Stagnation(
                "backtracking exhausted without an acceptable step".into(),
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
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(f_next);
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
