//! Reference computations for tests. Nothing here calls into `csvqr-core`:
//! each routine restates its quantity from the definition so the library can
//! be checked against it.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

/// `exp(-|a - b|^2 / (2 sigma^2))` over all row pairs of `a` and `b`.
pub fn rbf_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, sigma: f64) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        let d2: f64 = a
            .row(i)
            .iter()
            .zip(b.row(j))
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

pub fn pinball(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    /// `f_m(x_i)`, levels by points.
    pub fitted: Array2<f64>,
    /// `1/2 sum_m |w_m|^2 + C * slack`.
    pub objective: f64,
    /// `sum_m sum_i rho_tau_m(y_i - f_m(x_i))`.
    pub slack: f64,
}

/// Dense column-compressed copy of `rows x cols` entries given by `entry`.
fn csc(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64) -> CscMatrix<f64> {
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for c in 0..cols {
        for r in 0..rows {
            let v = entry(r, c);
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// Solve the non-crossing kernel quantile regression primal
///
/// ```text
/// min  1/2 sum_m |w_m|^2 + C sum_m sum_i (tau_m xi+_mi + (1 - tau_m) xi-_mi)
/// s.t. y_i - f_m(x_i) = xi+_mi - xi-_mi,  xi+, xi- >= 0,
///      f_m(x_i) <= f_{m+1}(x_i)
/// ```
///
/// with a generic interior-point QP solver. The functions are parametrized
/// through a factor `G = L L'` (from the eigendecomposition): `f_m = L v_m`
/// and `|w_m|^2 = |v_m|^2`.
pub fn solve_primal(g: ArrayView2<'_, f64>, y: &[f64], taus: &[f64], c: f64) -> PrimalSolution {
    let n = y.len();
    let m_levels = taus.len();
    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| g[[i, j]]));
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > 1e-11 * top)
        .collect();
    let r = keep.len();
    let factor = DMatrix::from_fn(n, r, |i, k| {
        eig.eigenvectors[(i, keep[k])] * eig.eigenvalues[keep[k]].sqrt()
    });

    // x = [v_1 .. v_M | xi+_1 .. xi+_M | xi-_1 .. xi-_M]
    let nv = m_levels * r;
    let nx = nv + 2 * m_levels * n;
    let v_col = |m: usize, k: usize| m * r + k;
    let xp_col = |m: usize, i: usize| nv + m * n + i;
    let xm_col = |m: usize, i: usize| nv + m_levels * n + m * n + i;

    let p = csc(nx, nx, |a, b| if a == b && a < nv { 1.0 } else { 0.0 });
    let mut q = vec![0.0; nx];
    for (m, &tau) in taus.iter().enumerate() {
        for i in 0..n {
            q[xp_col(m, i)] = c * tau;
            q[xm_col(m, i)] = c * (1.0 - tau);
        }
    }

    // equality rows, then slack signs, then ordering
    let n_eq = m_levels * n;
    let n_sign = 2 * m_levels * n;
    let n_order = (m_levels - 1) * n;
    let rows = n_eq + n_sign + n_order;
    let a = csc(rows, nx, |row, col| {
        if row < n_eq {
            // L v_m + xi+ - xi- = y
            let (m, i) = (row / n, row % n);
            if col < nv && col / r == m {
                factor[(i, col % r)]
            } else if col == xp_col(m, i) {
                1.0
            } else if col == xm_col(m, i) {
                -1.0
            } else {
                0.0
            }
        } else if row < n_eq + n_sign {
            // -xi <= 0
            if col == nv + (row - n_eq) {
                -1.0
            } else {
                0.0
            }
        } else {
            // L v_m - L v_{m+1} <= 0
            let k = row - n_eq - n_sign;
            let (m, i) = (k / n, k % n);
            if col >= nv {
                0.0
            } else if col / r == m {
                factor[(i, col % r)]
            } else if col / r == m + 1 {
                -factor[(i, col % r)]
            } else {
                0.0
            }
        }
    });
    let mut b = vec![0.0; rows];
    for m in 0..m_levels {
        b[m * n..(m + 1) * n].copy_from_slice(y);
    }
    let cones = [
        SupportedConeT::ZeroConeT(n_eq),
        SupportedConeT::NonnegativeConeT(n_sign + n_order),
    ];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).expect("well-formed QP");
    solver.solve();
    let status = solver.solution.status;
    assert!(
        matches!(status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "reference QP failed: {status:?}"
    );
    let x = &solver.solution.x;

    let fitted = Array2::from_shape_fn((m_levels, n), |(m, i)| {
        (0..r).map(|k| factor[(i, k)] * x[v_col(m, k)]).sum()
    });
    let norm: f64 = x[..nv].iter().map(|v| v * v).sum();
    let slack = slack_term(fitted.view(), y, taus);
    PrimalSolution {
        fitted,
        objective: 0.5 * norm + c * slack,
        slack,
    }
}

/// `sum_m sum_i rho_tau_m(y_i - fitted[m, i])`.
pub fn slack_term(fitted: ArrayView2<'_, f64>, y: &[f64], taus: &[f64]) -> f64 {
    let mut total = 0.0;
    for (m, &tau) in taus.iter().enumerate() {
        for (i, &yi) in y.iter().enumerate() {
            total += pinball(yi - fitted[[m, i]], tau);
        }
    }
    total
}

/// Primal objective of expansion coefficients `beta` (levels by points),
/// `f_m = sum_j beta_mj K(., x_j)`, by explicit double sums.
pub fn primal_objective(
    beta: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    y: &[f64],
    taus: &[f64],
    c: f64,
) -> f64 {
    let (m_levels, n) = beta.dim();
    let mut norm = 0.0;
    let mut fitted = Array2::<f64>::zeros((m_levels, n));
    for m in 0..m_levels {
        for i in 0..n {
            for j in 0..n {
                norm += beta[[m, i]] * beta[[m, j]] * g[[i, j]];
                fitted[[m, i]] += beta[[m, j]] * g[[j, i]];
            }
        }
    }
    0.5 * norm + c * slack_term(fitted.view(), y, taus)
}

/// Dual objective from its definition,
///
/// ```text
/// sum_m sum_i (alpha+_mi - alpha-_mi) y_i
///   - 1/2 sum_m sum_i sum_j b_mi b_mj G_ij,
/// b_m = alpha+_m - alpha-_m - lambda_m + lambda_{m-1}
/// ```
///
/// with `lambda_0 = lambda_M = 0`. Lambda has one row per adjacent level pair.
pub fn dual_objective(
    alpha_plus: ArrayView2<'_, f64>,
    alpha_minus: ArrayView2<'_, f64>,
    lambda: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    y: &[f64],
) -> f64 {
    let (m_levels, n) = alpha_plus.dim();
    let lam = |m: isize, i: usize| -> f64 {
        if m < 0 || m as usize >= m_levels - 1 {
            0.0
        } else {
            lambda[[m as usize, i]]
        }
    };
    let mut value = 0.0;
    for m in 0..m_levels {
        let b: Vec<f64> = (0..n)
            .map(|i| {
                alpha_plus[[m, i]] - alpha_minus[[m, i]] - lam(m as isize, i)
                    + lam(m as isize - 1, i)
            })
            .collect();
        for i in 0..n {
            value += (alpha_plus[[m, i]] - alpha_minus[[m, i]]) * y[i];
            for j in 0..n {
                value -= 0.5 * b[i] * b[j] * g[[i, j]];
            }
        }
    }
    value
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Sample `tau`-quantile, interpolating linearly between the order statistics
/// around the 0-based position `tau (n - 1)`.
pub fn sample_quantile(sample: &[f64], tau: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let pos = tau * (s.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    s[below] + (pos - below as f64) * (s[above] - s[below])
}

/// Smallest and largest minimizers of the empirical pinball risk
/// `sum_i rho_tau(y_i - q)`: the order statistics at 1-based ranks
/// `ceil(n tau)` and `floor(n tau) + 1` (equal unless `n tau` is whole).
pub fn pinball_minimizers(sample: &[f64], tau: f64) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = s.len();
    let nt = n as f64 * tau;
    let lo = (nt.ceil() as usize).clamp(1, n);
    let hi = (nt.floor() as usize + 1).clamp(1, n);
    (s[lo.min(hi) - 1], s[lo.max(hi) - 1])
}
