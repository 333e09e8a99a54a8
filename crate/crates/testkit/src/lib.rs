//! Independent numerical oracles used by the test suites.
//!
//! Nothing in here shares code with the solver implementations it checks:
//! the BPDN oracle enumerates sign patterns and verifies KKT conditions, the
//! eigenvalue oracle is a dense Jacobi sweep, and the coordinate-descent
//! reference minimizes one coordinate at a time in closed form.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

// ---------------------------------------------------------------------------
// Dense helpers (small sizes only)
// ---------------------------------------------------------------------------

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` when the matrix is not SPD.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 1e-13 {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

// ---------------------------------------------------------------------------
// Sign-enumeration KKT oracle for BPDN
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    /// Worst KKT violation of the returned point.
    pub kkt_violation: f64,
}

pub fn bpdn_objective(d: &Array2<f64>, p: &Array1<f64>, mu: f64, x: &Array1<f64>) -> f64 {
    let r = d.dot(x) - p;
    0.5 * r.dot(&r) + mu * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// KKT violation of a candidate: on the support `|g_j + mu sgn(x_j)|`, off the
/// support `max(|g_j| - mu, 0)`, where `g = D^T (D x - p)`.
pub fn bpdn_kkt_violation(d: &Array2<f64>, p: &Array1<f64>, mu: f64, x: &Array1<f64>) -> f64 {
    let g = d.t().dot(&(d.dot(x) - p));
    let mut worst = 0.0f64;
    for (xi, gi) in x.iter().zip(g.iter()) {
        let v = if *xi != 0.0 {
            (gi + mu * xi.signum()).abs()
        } else {
            (gi.abs() - mu).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Globally solve `min_x 0.5||Dx-p||^2 + mu||x||_1` by enumerating supports
/// and sign patterns, solving the stationarity system per pattern, and
/// verifying the subgradient conditions. Exact up to floating-point rounding;
/// intended for small instances (n <= ~20).
///
/// A minimizer always exists with at most `min(m, n)` active columns, so the
/// enumeration is capped there.
pub fn bpdn_oracle(d: &Array2<f64>, p: &Array1<f64>, mu: f64) -> OracleSolution {
    let m = d.nrows();
    let n = d.ncols();
    assert!(n <= 24, "oracle enumeration is exponential in n");
    let max_support = m.min(n);

    let gram = d.t().dot(d);
    let dtp = d.t().dot(p);
    let dual_tol = 1e-9 * (1.0 + mu);
    let mut best: Option<OracleSolution> = None;

    // the empty support: x = 0 is optimal iff ||D^T p||_inf <= mu
    {
        let x = Array1::zeros(n);
        let viol = bpdn_kkt_violation(d, p, mu, &x);
        if viol <= dual_tol {
            return OracleSolution {
                objective: bpdn_objective(d, p, mu, &x),
                kkt_violation: viol,
                x,
            };
        }
    }

    for mask in 1u64..(1u64 << n) {
        let k = mask.count_ones() as usize;
        if k > max_support {
            continue;
        }
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();

        let mut gram_s = Array2::<f64>::zeros((k, k));
        for (a, &ja) in support.iter().enumerate() {
            for (b, &jb) in support.iter().enumerate() {
                gram_s[[a, b]] = gram[[ja, jb]];
            }
        }
        let Some(l) = cholesky(&gram_s) else {
            continue; // dependent columns; an extreme-point solution lives elsewhere
        };

        let mut rhs = Array1::<f64>::zeros(k);
        for signs in 0u64..(1u64 << k) {
            for (a, &ja) in support.iter().enumerate() {
                let sgn = if signs & (1 << a) != 0 { -1.0 } else { 1.0 };
                rhs[a] = dtp[ja] - mu * sgn;
            }
            let z = cholesky_solve(&l, &rhs);
            // sign consistency
            let consistent = support.iter().enumerate().all(|(a, _)| {
                let sgn = if signs & (1 << a) != 0 { -1.0 } else { 1.0 };
                z[a] * sgn > 0.0
            });
            if !consistent {
                continue;
            }
            let mut x = Array1::<f64>::zeros(n);
            for (a, &ja) in support.iter().enumerate() {
                x[ja] = z[a];
            }
            let viol = bpdn_kkt_violation(d, p, mu, &x);
            if viol <= dual_tol {
                return OracleSolution {
                    objective: bpdn_objective(d, p, mu, &x),
                    kkt_violation: viol,
                    x,
                };
            }
            let cand = OracleSolution {
                objective: bpdn_objective(d, p, mu, &x),
                kkt_violation: viol,
                x,
            };
            if best.as_ref().is_none_or(|b| cand.kkt_violation < b.kkt_violation) {
                best = Some(cand);
            }
        }
    }

    best.expect("no stationary candidate found; instance outside oracle assumptions")
}

// ---------------------------------------------------------------------------
// Coordinate-descent reference (independent route for larger instances)
// ---------------------------------------------------------------------------

/// Cyclic exact coordinate minimization for BPDN. Converges to the global
/// minimum of the convex objective; used as a high-precision reference where
/// the enumeration oracle is too large.
pub fn bpdn_coordinate_descent(
    d: &Array2<f64>,
    p: &Array1<f64>,
    mu: f64,
    tol: f64,
    max_sweeps: usize,
) -> Array1<f64> {
    let n = d.ncols();
    let mut x = Array1::<f64>::zeros(n);
    let mut residual = -p.clone(); // D x - p with x = 0
    let col_sq: Vec<f64> = (0..n).map(|j| d.column(j).dot(&d.column(j))).collect();

    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = x[j];
            // partial residual correlation with column j
            let rho = d.column(j).dot(&residual) - col_sq[j] * old;
            // minimize 0.5*a*v^2 + rho*v + mu|v| in v
            let new = if rho.abs() <= mu {
                0.0
            } else {
                -(rho - rho.signum() * mu) / col_sq[j]
            };
            if new != old {
                let delta = new - old;
                residual.scaled_add(delta, &d.column(j));
                x[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= tol {
            break;
        }
    }
    x
}

// ---------------------------------------------------------------------------
// Dense symmetric eigenvalue oracle (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Largest eigenvalue of a symmetric matrix by the cyclic Jacobi method.
pub fn max_eigenvalue_symmetric(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))) {
            break;
        }
        for i in 0..n {
            for j in i + 1..n {
                let apq = m[[i, j]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[i, i]];
                let aqq = m[[j, j]];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mik = m[[i, k]];
                    let mjk = m[[j, k]];
                    m[[i, k]] = c * mik - s * mjk;
                    m[[j, k]] = s * mik + c * mjk;
                }
                for k in 0..n {
                    let mki = m[[k, i]];
                    let mkj = m[[k, j]];
                    m[[k, i]] = c * mki - s * mkj;
                    m[[k, j]] = s * mki + c * mkj;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

pub fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

pub fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| StandardNormal.sample(rng))
}

/// Random dense BPDN instance with N(0,1/m) dictionary entries.
pub fn random_instance(seed: u64, m: usize, n: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let d = standard_normal_matrix(&mut rng, m, n).mapv(|v| v * scale);
    let p = standard_normal_vector(&mut rng, m);
    (d, p)
}

/// Orthonormalize the columns of a matrix (modified Gram-Schmidt).
fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    assert!(cols <= rows);
    let mut q = standard_normal_matrix(rng, rows, cols);
    for j in 0..cols {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).to_owned();
            q.column_mut(j).scaled_add(-proj, &qi);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q
}

/// Instance with prescribed singular values (for conditioning studies).
/// `D = U diag(singulars) V^T` with random orthonormal factors.
pub fn conditioned_instance(
    seed: u64,
    m: usize,
    n: usize,
    singulars: &[f64],
) -> (Array2<f64>, Array1<f64>) {
    assert!(singulars.len() == m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = m.min(n);
    let u = orthonormal_columns(&mut rng, m, r);
    let v = orthonormal_columns(&mut rng, n, r);
    let mut d = Array2::<f64>::zeros((m, n));
    for k in 0..r {
        let uk = u.column(k);
        let vk = v.column(k);
        for i in 0..m {
            for j in 0..n {
                d[[i, j]] += singulars[k] * uk[i] * vk[j];
            }
        }
    }
    let p = standard_normal_vector(&mut rng, m);
    (d, p)
}

/// Sparse ground-truth codes for dictionary-recovery experiments: each column
/// has `sparsity` nonzeros with magnitudes in [lo, hi] and random signs.
pub fn sparse_codes(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
    sparsity: usize,
    lo: f64,
    hi: f64,
) -> Array2<f64> {
    let mag = Uniform::new(lo, hi).expect("valid magnitude range");
    let mut codes = Array2::<f64>::zeros((n, count));
    for mut col in codes.columns_mut() {
        let mut picked = Vec::with_capacity(sparsity);
        while picked.len() < sparsity {
            let j = rand::Rng::random_range(rng, 0..n);
            if !picked.contains(&j) {
                picked.push(j);
            }
        }
        for &j in &picked {
            let sign = if rand::Rng::random::<bool>(rng) { 1.0 } else { -1.0 };
            col[j] = sign * mag.sample(rng);
        }
    }
    codes
}

/// Central finite-difference gradient of a scalar function of a matrix.
pub fn finite_difference_matrix_gradient(
    f: &dyn Fn(&Array2<f64>) -> f64,
    at: &Array2<f64>,
    h: f64,
) -> Array2<f64> {
    let mut grad = Array2::<f64>::zeros(at.raw_dim());
    let mut probe = at.clone();
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let orig = probe[[i, j]];
            probe[[i, j]] = orig + h;
            let fp = f(&probe);
            probe[[i, j]] = orig - h;
            let fm = f(&probe);
            probe[[i, j]] = orig;
            grad[[i, j]] = (fp - fm) / (2.0 * h);
        }
    }
    grad
}

/// Central finite-difference gradient of a scalar function of a vector.
pub fn finite_difference_vector_gradient(
    f: &dyn Fn(&Array1<f64>) -> f64,
    at: &Array1<f64>,
    h: f64,
) -> Array1<f64> {
    let mut grad = Array1::<f64>::zeros(at.len());
    let mut probe = at.clone();
    for i in 0..at.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_identity_dictionary_closed_form() {
        // D = I2, p = (1, 0.1), mu = 0.25 -> x = (0.75, 0)
        let d = Array2::eye(2);
        let p = Array1::from_vec(vec![1.0, 0.1]);
        let sol = bpdn_oracle(&d, &p, 0.25);
        assert!((sol.x[0] - 0.75).abs() < 1e-12);
        assert_eq!(sol.x[1], 0.0);
        assert!(sol.kkt_violation < 1e-10);
    }

    #[test]
    fn oracle_zero_when_penalty_dominates() {
        let (d, p) = random_instance(7, 4, 6);
        let thresh = d.t().dot(&p).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sol = bpdn_oracle(&d, &p, thresh * 1.01);
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coordinate_descent_matches_oracle() {
        for seed in [1u64, 2, 3, 4, 5] {
            let (d, p) = random_instance(seed, 6, 12);
            let mu = 0.05;
            let oracle = bpdn_oracle(&d, &p, mu);
            let cd = bpdn_coordinate_descent(&d, &p, mu, 1e-14, 100_000);
            let f_cd = bpdn_objective(&d, &p, mu, &cd);
            let rel = (f_cd - oracle.objective).abs() / oracle.objective.abs().max(1e-300);
            assert!(rel < 1e-9, "seed {seed}: cd {f_cd} vs oracle {}", oracle.objective);
        }
    }

    #[test]
    fn jacobi_matches_hand_computed_eigenvalues() {
        // eigenvalues of [[2, 1], [1, 2]] are 1 and 3
        let a = Array2::from_shape_vec((2, 2), vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((max_eigenvalue_symmetric(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn conditioned_instance_has_prescribed_spectrum() {
        let singulars = [2.0, 1.0, 0.5, 0.25];
        let (d, _) = conditioned_instance(11, 4, 8, &singulars);
        let gram = d.t().dot(&d);
        let top = max_eigenvalue_symmetric(&gram);
        assert!((top - 4.0).abs() < 1e-9, "largest singular value squared, got {top}");
    }
}
