//! Iterative-shrinkage solvers for the basis-pursuit-denoising problem
//!
//!     min_x  0.5 * ||D x - p||^2  +  mu * ||x||_1
//!
//! Seven interchangeable methods share one contract: iterate until the
//! relative iterate change drops below `eps_rel` (optionally also until a
//! relative residual target is met) or the iteration cap is hit, and report
//! the final objective, fixed-point residual, and wall time.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

mod fista;
mod fpc_bb;
mod gscg;
mod isga;
mod ista;
mod sparsa;
mod twist;

/// One sparse-coding instance: dictionary, signal, and penalty weight.
#[derive(Debug, Clone)]
pub struct BpdnProblem {
    pub dictionary: Array2<f64>,
    pub signal: Array1<f64>,
    pub mu: f64,
}

impl BpdnProblem {
    pub fn new(dictionary: Array2<f64>, signal: Array1<f64>, mu: f64) -> Result<Self> {
        if dictionary.nrows() == 0 || dictionary.ncols() == 0 {
            return Err(Error::Argument("dictionary must be at least 1x1".into()));
        }
        if signal.len() != dictionary.nrows() {
            return Err(Error::Argument(format!(
                "signal length {} does not match dictionary rows {}",
                signal.len(),
                dictionary.nrows()
            )));
        }
        if !(mu > 0.0) {
            return Err(Error::Argument(format!("mu must be positive, got {mu}")));
        }
        Ok(Self {
            dictionary,
            signal,
            mu,
        })
    }

    pub fn code_len(&self) -> usize {
        self.dictionary.ncols()
    }
}

/// Solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ista,
    Fista,
    FpcBb,
    Twist,
    Sparsa,
    Gscg,
    Isga,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ista,
        Method::Fista,
        Method::FpcBb,
        Method::Twist,
        Method::Sparsa,
        Method::Gscg,
        Method::Isga,
    ];

    /// Iterate-change tolerance used during dictionary learning.
    pub fn learning_eps(self) -> f64 {
        match self {
            Method::Gscg | Method::Isga => 1e-7,
            _ => 1e-5,
        }
    }

    /// Tolerance used during image reconstruction.
    pub fn reconstruction_eps(self) -> f64 {
        match self {
            Method::Gscg | Method::Isga => 1e-10,
            _ => 1e-5,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Method::Ista => "ista",
            Method::Fista => "fista",
            Method::FpcBb => "fpc-bb",
            Method::Twist => "twist",
            Method::Sparsa => "sparsa",
            Method::Gscg => "gscg",
            Method::Isga => "isga",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ista" => Ok(Method::Ista),
            "fista" => Ok(Method::Fista),
            "fpc-bb" | "fpcbb" => Ok(Method::FpcBb),
            "twist" => Ok(Method::Twist),
            "sparsa" => Ok(Method::Sparsa),
            "gscg" => Ok(Method::Gscg),
            "isga" => Ok(Method::Isga),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

/// Per-method tuning constants. Defaults satisfy every stated constraint and
/// give convergent behavior across the test suite.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    /// Clamp interval for Barzilai-Borwein steps.
    pub bb_clamp: (f64, f64),
    /// Continuation factor for the fixed-point method's penalty schedule.
    pub fpc_eta: f64,
    /// Starting penalty as a fraction of the zero-solution threshold.
    pub fpc_mu0_factor: f64,
    pub twist_alpha: f64,
    pub twist_beta: f64,
    pub twist_c: f64,
    /// Non-monotone acceptance window length.
    pub sparsa_window: usize,
    /// Sufficient-decrease constant for the non-monotone acceptance rule.
    pub sparsa_sigma: f64,
    /// Step contraction factor during backtracking.
    pub sparsa_contraction: f64,
    /// Sufficient-descent constant for the hybrid direction.
    pub gscg_sigma: f64,
    /// Mixing weight between the BB step and the previous step length.
    pub gscg_gamma: f64,
    /// Goldstein constants, 0 < c1 < c2 < 1.
    pub isga_c1: f64,
    pub isga_c2: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            bb_clamp: (1e-10, 1e10),
            fpc_eta: 0.25,
            fpc_mu0_factor: 0.1,
            twist_alpha: 1.8,
            twist_beta: 1.0,
            twist_c: 1.0,
            sparsa_window: 5,
            sparsa_sigma: 1e-5,
            sparsa_contraction: 0.5,
            gscg_sigma: 1e-4,
            gscg_gamma: 0.5,
            isga_c1: 0.1,
            isga_c2: 0.9,
        }
    }
}

/// Full solver configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    /// Stop when ||x_{k+1} - x_k|| <= eps_rel * ||x_k||.
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Initial code; when unset, `||D^T p||_inf * ones` is used.
    pub x0: Option<Array1<f64>>,
    /// Optional extra stop: ||D x - p|| <= residual_tol * ||p||.
    pub residual_tol: Option<f64>,
    /// Record the objective after every iteration in `objective_trace`.
    pub trace_objective: bool,
    pub params: MethodParams,
}

impl SolverConfig {
    /// Learning-stage profile: per-method iterate tolerance, 100000-iteration cap.
    pub fn learning(method: Method) -> Self {
        Self {
            method,
            eps_rel: method.learning_eps(),
            max_iter: 100_000,
            x0: None,
            residual_tol: None,
            trace_objective: false,
            params: MethodParams::default(),
        }
    }

    /// Reconstruction profile: tighter per-method tolerance, relative-residual
    /// stop at the same level, 5000000-iteration cap.
    pub fn reconstruction(method: Method) -> Self {
        Self {
            method,
            eps_rel: method.reconstruction_eps(),
            max_iter: 5_000_000,
            x0: None,
            residual_tol: Some(method.reconstruction_eps()),
            trace_objective: false,
            params: MethodParams::default(),
        }
    }

    pub fn with_eps(mut self, eps_rel: f64) -> Self {
        self.eps_rel = eps_rel;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_rel > 0.0) {
            return Err(Error::Config(format!("eps_rel must be > 0, got {}", self.eps_rel)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        let p = &self.params;
        if !(p.bb_clamp.0 > 0.0 && p.bb_clamp.0 <= p.bb_clamp.1) {
            return Err(Error::Config(format!("invalid BB clamp {:?}", p.bb_clamp)));
        }
        if self.method == Method::Twist {
            if !(p.twist_alpha > 0.0 && p.twist_alpha < 2.0) {
                return Err(Error::Config(format!(
                    "two-step weight alpha must lie in (0, 2), got {}",
                    p.twist_alpha
                )));
            }
            if !(p.twist_beta > 0.0 && p.twist_beta < p.twist_c * p.twist_alpha) {
                return Err(Error::Config(format!(
                    "two-step weight beta must lie in (0, c*alpha) = (0, {}), got {}",
                    p.twist_c * p.twist_alpha,
                    p.twist_beta
                )));
            }
        }
        if self.method == Method::Sparsa {
            if p.sparsa_window == 0 {
                return Err(Error::Config("acceptance window must be >= 1".into()));
            }
            if !(p.sparsa_contraction > 0.0 && p.sparsa_contraction < 1.0) {
                return Err(Error::Config("contraction factor must lie in (0, 1)".into()));
            }
        }
        if self.method == Method::Isga
            && !(p.isga_c1 > 0.0 && p.isga_c1 < p.isga_c2 && p.isga_c2 < 1.0)
        {
            return Err(Error::Config(format!(
                "Goldstein constants need 0 < c1 < c2 < 1, got ({}, {})",
                p.isga_c1, p.isga_c2
            )));
        }
        if self.method == Method::Gscg && !(0.0..=1.0).contains(&self.params.gscg_gamma) {
            return Err(Error::Config("step mixing weight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Solution of one BPDN instance plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct SparseCode {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub objective: f64,
    /// Infinity norm of `x - S_{mu/L}(x - (1/L) grad f(x))`.
    pub fixed_point_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
    /// Objective after each iteration (index 0 holds the starting value);
    /// empty unless `trace_objective` was set.
    pub objective_trace: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Shared elementary operations
// ---------------------------------------------------------------------------

/// Soft-thresholding: `sgn(x_i) * max(|x_i| - lambda, 0)` component-wise.
pub fn shrink(x: &Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("shrink factor must be >= 0, got {lambda}")));
    }
    Ok(x.mapv(|v| soft(v, lambda)))
}

#[inline]
fn soft(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Objective value `0.5 ||D x - p||^2 + mu ||x||_1`.
pub fn objective(prob: &BpdnProblem, x: &Array1<f64>) -> Result<f64> {
    check_code_len(prob, x)?;
    let r = prob.dictionary.dot(x) - &prob.signal;
    Ok(0.5 * r.dot(&r) + prob.mu * l1_norm(x))
}

/// Gradient of the quadratic data-fit term: `D^T (D x - p)`.
pub fn smooth_gradient(prob: &BpdnProblem, x: &Array1<f64>) -> Result<Array1<f64>> {
    check_code_len(prob, x)?;
    let r = prob.dictionary.dot(x) - &prob.signal;
    Ok(prob.dictionary.t().dot(&r))
}

/// Shrinkage descent direction `S_{mu*tau}(x - tau grad f(x)) - x`.
pub fn ista_direction(prob: &BpdnProblem, x: &Array1<f64>, tau: f64) -> Result<Array1<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Argument(format!("step length must be > 0, got {tau}")));
    }
    let g = smooth_gradient(prob, x)?;
    let stepped = x - &(g * tau);
    Ok(shrink(&stepped, prob.mu * tau)? - x)
}

/// Barzilai-Borwein step `s^T s / s^T y`, clamped to `clamp`.
///
/// Non-positive curvature returns the clamp's upper bound; a zero difference
/// vector falls back to the clamp midpoint in log scale.
pub fn bb_steplength(s: &Array1<f64>, y: &Array1<f64>, clamp: (f64, f64)) -> f64 {
    let (lo, hi) = clamp;
    let ss = s.dot(s);
    if ss == 0.0 {
        return (lo * hi).sqrt();
    }
    let sy = s.dot(y);
    if sy <= 0.0 {
        return hi;
    }
    (ss / sy).clamp(lo, hi)
}

/// Largest eigenvalue of `D^T D` by power iteration (the gradient Lipschitz
/// constant of the data-fit term).
pub fn estimate_lipschitz(d: &Array2<f64>) -> Result<f64> {
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all-zero dictionary has no spectral norm".into()));
    }
    let n = d.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4c69_7073);
    let mut v: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
    // fall back to canonical directions if the start vector is annihilated
    let mut basis = 0usize;
    loop {
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 && d.dot(&v).iter().any(|&w| w != 0.0) {
            v.mapv_inplace(|c| c / norm);
            break;
        }
        if basis >= n {
            return Err(Error::Degenerate("power iteration found no active direction".into()));
        }
        v.fill(0.0);
        v[basis] = 1.0;
        basis += 1;
    }

    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w = d.t().dot(&d.dot(&v));
        lambda = v.dot(&w);
        let resid = (&w - &(&v * lambda)).mapv(|c| c * c).sum().sqrt();
        if resid <= 1e-10 * lambda.max(f64::MIN_POSITIVE) {
            break;
        }
        let wnorm = w.dot(&w).sqrt();
        if wnorm == 0.0 {
            break;
        }
        v = w / wnorm;
    }
    Ok(lambda)
}

/// Fixed-point optimality residual `||x - S_{mu*tau}(x - tau grad f(x))||_inf`;
/// zero exactly at minimizers.
pub fn check_optimality(prob: &BpdnProblem, x: &Array1<f64>, tau: f64) -> Result<f64> {
    let d = ista_direction(prob, x, tau)?;
    Ok(inf_norm(&d))
}

pub(crate) fn l1_norm(x: &Array1<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn inf_norm(x: &Array1<f64>) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_code_len(prob: &BpdnProblem, x: &Array1<f64>) -> Result<()> {
    if x.len() != prob.code_len() {
        return Err(Error::Argument(format!(
            "code length {} does not match dictionary columns {}",
            x.len(),
            prob.code_len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared solver scaffolding
// ---------------------------------------------------------------------------

pub(crate) struct Context<'a> {
    prob: &'a BpdnProblem,
    cfg: &'a SolverConfig,
    pub lipschitz: f64,
    signal_norm: f64,
    /// `||D^T p||_inf`: the penalty level above which zero is optimal.
    pub zero_threshold: f64,
}

impl<'a> Context<'a> {
    fn new(prob: &'a BpdnProblem, cfg: &'a SolverConfig, lipschitz: f64) -> Self {
        let dtp = prob.dictionary.t().dot(&prob.signal);
        Self {
            prob,
            cfg,
            lipschitz,
            signal_norm: prob.signal.dot(&prob.signal).sqrt(),
            zero_threshold: inf_norm(&dtp),
        }
    }

    pub fn mu(&self) -> f64 {
        self.prob.mu
    }

    pub fn max_iter(&self) -> usize {
        self.cfg.max_iter
    }

    pub fn params(&self) -> &MethodParams {
        &self.cfg.params
    }

    pub fn dict(&self) -> &Array2<f64> {
        &self.prob.dictionary
    }

    pub fn residual(&self, x: &Array1<f64>) -> Array1<f64> {
        self.prob.dictionary.dot(x) - &self.prob.signal
    }

    pub fn grad(&self, residual: &Array1<f64>) -> Array1<f64> {
        self.prob.dictionary.t().dot(residual)
    }

    pub fn value_at(&self, residual: &Array1<f64>, x: &Array1<f64>, mu: f64) -> f64 {
        0.5 * residual.dot(residual) + mu * l1_norm(x)
    }

    pub fn value(&self, residual: &Array1<f64>, x: &Array1<f64>) -> f64 {
        self.value_at(residual, x, self.prob.mu)
    }

    /// `S_{mu*tau}(x - tau g)`.
    pub fn shrink_step(&self, x: &Array1<f64>, g: &Array1<f64>, tau: f64, mu: f64) -> Array1<f64> {
        let lambda = mu * tau;
        ndarray::Zip::from(x).and(g).map_collect(|&xi, &gi| soft(xi - tau * gi, lambda))
    }

    pub fn iterate_converged(&self, x_new: &Array1<f64>, x_old: &Array1<f64>) -> bool {
        let mut diff = 0.0;
        let mut base = 0.0;
        for (a, b) in x_new.iter().zip(x_old.iter()) {
            diff += (a - b) * (a - b);
            base += b * b;
        }
        diff.sqrt() <= self.cfg.eps_rel * base.sqrt()
    }

    pub fn residual_converged(&self, residual: &Array1<f64>) -> bool {
        match self.cfg.residual_tol {
            Some(tol) => residual.dot(residual).sqrt() <= tol * self.signal_norm,
            None => false,
        }
    }

    pub fn ensure_finite(&self, x: &Array1<f64>, f: f64) -> Result<()> {
        if !f.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "{} produced non-finite iterates",
                self.cfg.method
            )));
        }
        Ok(())
    }

    pub fn trace_enabled(&self) -> bool {
        self.cfg.trace_objective
    }
}

pub(crate) struct RawSolve {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Solve one BPDN instance with the configured method.
pub fn solve(prob: &BpdnProblem, cfg: &SolverConfig) -> Result<SparseCode> {
    cfg.validate()?;
    let start = Instant::now();
    let lipschitz = estimate_lipschitz(&prob.dictionary)?;
    let ctx = Context::new(prob, cfg, lipschitz);

    let x0 = match &cfg.x0 {
        Some(x0) => {
            check_code_len(prob, x0)?;
            x0.clone()
        }
        None => Array1::from_elem(prob.code_len(), ctx.zero_threshold),
    };

    let raw = match cfg.method {
        Method::Ista => ista::run(&ctx, x0)?,
        Method::Fista => fista::run(&ctx, x0)?,
        Method::FpcBb => fpc_bb::run(&ctx, x0)?,
        Method::Twist => twist::run(&ctx, x0)?,
        Method::Sparsa => sparsa::run(&ctx, x0)?,
        Method::Gscg => gscg::run(&ctx, x0)?,
        Method::Isga => isga::run(&ctx, x0)?,
    };

    let objective = objective(prob, &raw.x)?;
    if !objective.is_finite() {
        return Err(Error::Divergence(format!(
            "{} finished with non-finite objective",
            cfg.method
        )));
    }
    let fixed_point_residual = check_optimality(prob, &raw.x, 1.0 / lipschitz)?;
    Ok(SparseCode {
        x: raw.x,
        iterations: raw.iterations,
        objective,
        fixed_point_residual,
        converged: raw.converged,
        wall_time: start.elapsed().as_secs_f64(),
        objective_trace: raw.trace,
    })
}

#[cfg(test)]
mod tests;
