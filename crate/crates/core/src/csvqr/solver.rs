use ndarray::{Array1, Array2, ArrayView2};

use super::dual::{gradient_from_fitted, kkt_from_gradient, projected};
use super::{coefficients, DualSolution, QuantileLevels};
use crate::kernels::KernelSpec;
use crate::{Error, Result};

/// Solver and model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvqrConfig {
    /// Trade-off between the norm penalty and the pinball slack.
    pub c: f64,
    pub kernel: KernelSpec,
    /// Stop when the largest projected-gradient component is at most
    /// `tol * C`.
    pub tol: f64,
    /// Cap on full coordinate sweeps.
    pub max_iter: usize,
    /// Clamp predictions to `[0, 1]`.
    pub clamp: bool,
}

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 200;

impl Default for CsvqrConfig {
    fn default() -> Self {
        CsvqrConfig {
            c: 1.0,
            kernel: KernelSpec::Rbf {
                sigma: (crate::features::N_FEATURES as f64).sqrt(),
            },
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            clamp: true,
        }
    }
}

impl CsvqrConfig {
    pub fn new(c: f64, kernel: KernelSpec) -> Result<Self> {
        let cfg = CsvqrConfig {
            c,
            kernel,
            ..CsvqrConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Absolute KKT tolerance, `tol * C`.
    pub fn abs_tol(&self) -> f64 {
        self.tol * self.c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStatus {
    pub converged: bool,
    pub sweeps: usize,
    /// Projected-gradient norm of the returned dual.
    pub kkt: f64,
}

fn check_inputs(g: ArrayView2<'_, f64>, y: &[f64]) -> Result<()> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no training points".into()));
    }
    if g.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "Gram matrix {:?} for {n} targets",
            g.dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite target".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite kernel value".into()));
    }
    Ok(())
}

/// One-dimensional maximizer of `delta * grad - 1/2 curvature * delta^2`
/// over `value + delta` in `[lo, hi]`.
#[inline]
fn clipped_step(value: f64, grad: f64, curvature: f64, lo: f64, hi: f64) -> f64 {
    let target = if curvature > 0.0 {
        value + grad / curvature
    } else if grad > 0.0 {
        hi
    } else if grad < 0.0 {
        lo
    } else {
        value
    };
    target.clamp(lo, hi)
}

/// Working state: dual variables plus the fitted values `F = beta G`.
struct DualState<'a> {
    g: ArrayView2<'a, f64>,
    y: &'a [f64],
    levels: &'a QuantileLevels,
    c: f64,
    diag: Vec<f64>,
    dual: DualSolution,
    fitted: Array2<f64>,
}

impl<'a> DualState<'a> {
    fn new(g: ArrayView2<'a, f64>, y: &'a [f64], levels: &'a QuantileLevels, c: f64) -> Self {
        let n = y.len();
        let m_levels = levels.len();
        DualState {
            g,
            y,
            levels,
            c,
            diag: (0..n).map(|i| g[[i, i]]).collect(),
            dual: DualSolution::zeros(m_levels, n),
            fitted: Array2::zeros((m_levels, n)),
        }
    }

    fn alpha(&self, m: usize, i: usize) -> f64 {
        self.dual.alpha_plus[[m, i]] - self.dual.alpha_minus[[m, i]]
    }

    fn alpha_bounds(&self, m: usize) -> (f64, f64) {
        let tau = self.levels.as_slice()[m];
        (-(1.0 - tau) * self.c, tau * self.c)
    }

    fn set_alpha(&mut self, m: usize, i: usize, value: f64) {
        self.dual.alpha_plus[[m, i]] = value.max(0.0);
        self.dual.alpha_minus[[m, i]] = (-value).max(0.0);
    }

    /// One cyclic pass of exact single-variable updates.
    fn sweep(&mut self) {
        let n = self.y.len();
        let m_levels = self.levels.len();
        for m in 0..m_levels {
            let (lo, hi) = self.alpha_bounds(m);
            for i in 0..n {
                let a = self.alpha(m, i);
                let grad = self.y[i] - self.fitted[[m, i]];
                let next = clipped_step(a, grad, self.diag[i], lo, hi);
                let delta = next - a;
                if delta != 0.0 {
                    self.fitted.row_mut(m).scaled_add(delta, &self.g.row(i));
                    self.set_alpha(m, i, next);
                }
            }
        }
        for m in 0..m_levels.saturating_sub(1) {
            for i in 0..n {
                let l = self.dual.lambda[[m, i]];
                let grad = self.fitted[[m, i]] - self.fitted[[m + 1, i]];
                let next = clipped_step(l, grad, 2.0 * self.diag[i], 0.0, f64::INFINITY);
                let delta = next - l;
                if delta != 0.0 {
                    self.fitted.row_mut(m).scaled_add(-delta, &self.g.row(i));
                    self.fitted.row_mut(m + 1).scaled_add(delta, &self.g.row(i));
                    self.dual.lambda[[m, i]] = next;
                }
            }
        }
    }

    /// Two-variable steps within each level along `e_i - e_j`, which leave
    /// the fit at other points nearly unchanged when `x_i` and `x_j` are
    /// close. Single-coordinate steps crawl along such directions because
    /// their curvature `G_ii + G_jj - 2 G_ij` is tiny. Pairs are chosen as
    /// in second-order SMO working-set selection: `i` has the largest
    /// gradient among variables that can grow, `j` the best exact gain
    /// among those that can shrink. At most `budget` steps per level; stops
    /// early once the pair gap is at most `tol`.
    fn pair_steps(&mut self, budget: usize, tol: f64) {
        let n = self.y.len();
        for m in 0..self.levels.len() {
            let (lo, hi) = self.alpha_bounds(m);
            for _ in 0..budget {
                let mut up = None;
                let mut g_up = f64::NEG_INFINITY;
                for k in 0..n {
                    let gk = self.y[k] - self.fitted[[m, k]];
                    if self.alpha(m, k) < hi && gk > g_up {
                        g_up = gk;
                        up = Some(k);
                    }
                }
                let Some(i) = up else { break };
                let room_up = hi - self.alpha(m, i);
                let mut best = None;
                let mut best_gain = 0.0;
                for k in 0..n {
                    let a = self.alpha(m, k);
                    let diff = g_up - (self.y[k] - self.fitted[[m, k]]);
                    if k == i || a <= lo || diff <= tol {
                        continue;
                    }
                    let eta = self.diag[i] + self.diag[k] - 2.0 * self.g[[i, k]];
                    let room = room_up.min(a - lo);
                    let t = if eta > 0.0 {
                        (diff / eta).min(room)
                    } else {
                        room
                    };
                    let gain = t * diff - 0.5 * eta.max(0.0) * t * t;
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some((k, t));
                    }
                }
                let Some((j, t)) = best else { break };
                if !(t > 0.0) || !t.is_finite() {
                    break;
                }
                let (ai, aj) = (self.alpha(m, i), self.alpha(m, j));
                let next_i = if t == room_up { hi } else { (ai + t).min(hi) };
                let next_j = if t == aj - lo { lo } else { (aj - t).max(lo) };
                let mut row = self.fitted.row_mut(m);
                row.scaled_add(next_i - ai, &self.g.row(i));
                row.scaled_add(next_j - aj, &self.g.row(j));
                self.set_alpha(m, i, next_i);
                self.set_alpha(m, j, next_j);
            }
        }
    }

    fn max_crossing(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for m in 0..self.levels.len().saturating_sub(1) {
            for i in 0..self.y.len() {
                worst = worst.max(self.fitted[[m, i]] - self.fitted[[m + 1, i]]);
            }
        }
        worst
    }

    /// Remove crossings at the training points by maximizing over `lambda`
    /// with the alphas frozen.
    fn close_crossings(&mut self) {
        if !self.solve_crossing_block(CROSSING_CAP) {
            for _ in 0..CROSSING_SWEEPS {
                if self.crossing_sweep() <= CROSSING_TOL {
                    break;
                }
            }
        }
    }

    /// Exact maximization over the `lambda` block with the alphas frozen.
    ///
    /// With `alpha` fixed the block is a nonnegative least-squares problem in
    /// the Gram metric. Only constraints that are active or violated take
    /// part, so it stays small; it is solved by Lawson-Hanson, then the set
    /// is cut back to the active constraints and new violators are pulled in
    /// until none is left. At most `cap` constraints take part in a round,
    /// the worst crossings first. Returns false if the rounds ran out.
    fn solve_crossing_block(&mut self, cap: usize) -> bool {
        let n = self.y.len();
        let levels = self.levels.len();
        if levels < 2 {
            return true;
        }
        let gap = |s: &Self, m: usize, i: usize| s.fitted[[m, i]] - s.fitted[[m + 1, i]];
        // Seed with every active or open constraint when that fits, else
        // with the open ones alone; lambdas left out simply stay fixed.
        let seed_active = (0..levels - 1)
            .flat_map(|m| (0..n).map(move |i| (m, i)))
            .filter(|&(m, i)| self.dual.lambda[[m, i]] > 0.0 || gap(self, m, i) > CROSSING_TOL)
            .count()
            <= cap;
        let mut set: Vec<(usize, usize)> = Vec::new();
        let mut in_set = vec![false; (levels - 1) * n];
        for round in 0..CROSSING_ROUNDS {
            let mut fresh: Vec<(f64, usize, usize)> = Vec::new();
            for m in 0..levels - 1 {
                for i in 0..n {
                    let active = round == 0 && seed_active && self.dual.lambda[[m, i]] > 0.0;
                    let g = gap(self, m, i);
                    if !in_set[m * n + i] && (active || g > CROSSING_TOL) {
                        fresh.push((g, m, i));
                    }
                }
            }
            if fresh.is_empty() {
                return true;
            }
            // worst crossings first when they do not all fit
            fresh.sort_by(|a, b| b.0.total_cmp(&a.0));
            fresh.truncate(cap.saturating_sub(set.len()).max(1));
            for &(_, m, i) in &fresh {
                in_set[m * n + i] = true;
                set.push((m, i));
            }

            let k = set.len();
            // Hessian of the negated dual in these lambdas
            let q = nalgebra::DMatrix::<f64>::from_fn(k, k, |r, c| {
                let ((m1, i), (m2, j)) = (set[r], set[c]);
                match m1.abs_diff(m2) {
                    0 => 2.0 * self.g[[i, j]],
                    1 => -self.g[[i, j]],
                    _ => 0.0,
                }
            });
            let current =
                nalgebra::DVector::<f64>::from_fn(k, |r, _| self.dual.lambda[[set[r].0, set[r].1]]);
            let grad = nalgebra::DVector::<f64>::from_fn(k, |r, _| {
                let (m, i) = set[r];
                self.fitted[[m, i]] - self.fitted[[m + 1, i]]
            });
            // minimize 1/2 x'Qx - b'x over x >= 0
            let b = &grad + &q * &current;
            let Some(x) = nnls(&q, &b, CROSSING_TOL) else {
                return false;
            };

            let gain =
                grad.dot(&(&x - &current)) - 0.5 * (&x - &current).dot(&(&q * (&x - &current)));
            if !(gain > 0.0) {
                continue;
            }
            for (r, &(m, i)) in set.iter().enumerate() {
                let delta = x[r] - current[r];
                if delta != 0.0 {
                    self.fitted.row_mut(m).scaled_add(-delta, &self.g.row(i));
                    self.fitted.row_mut(m + 1).scaled_add(delta, &self.g.row(i));
                    self.dual.lambda[[m, i]] = x[r];
                }
            }
            // keep only the active constraints; released ones come back if
            // they open again
            set.retain(|&(m, i)| {
                let keep = self.dual.lambda[[m, i]] > 0.0;
                in_set[m * n + i] = keep;
                keep
            });
        }
        false
    }

    /// Coordinate pass over `lambda` alone. Returns the largest projected
    /// gradient met.
    fn crossing_sweep(&mut self) -> f64 {
        let n = self.y.len();
        let mut worst: f64 = 0.0;
        for m in 0..self.levels.len().saturating_sub(1) {
            for i in 0..n {
                let l = self.dual.lambda[[m, i]];
                let grad = self.fitted[[m, i]] - self.fitted[[m + 1, i]];
                worst = worst.max(projected(l, grad, 0.0, f64::INFINITY));
                let next = clipped_step(l, grad, 2.0 * self.diag[i], 0.0, f64::INFINITY);
                let delta = next - l;
                if delta != 0.0 {
                    self.fitted.row_mut(m).scaled_add(-delta, &self.g.row(i));
                    self.fitted.row_mut(m + 1).scaled_add(delta, &self.g.row(i));
                    self.dual.lambda[[m, i]] = next;
                }
            }
        }
        worst
    }

    fn kkt(&self) -> f64 {
        let grad = gradient_from_fitted(self.fitted.view(), self.y);
        kkt_from_gradient(&self.dual, &grad, self.levels, self.c)
    }
}

/// Target for the closing `lambda`-only sweeps: training quantiles may cross
/// by at most this much.
pub const CROSSING_TOL: f64 = 1e-9;
const CROSSING_SWEEPS: usize = 20_000;
/// Largest lambda block solved exactly.
const CROSSING_CAP: usize = 2000;
const CROSSING_ROUNDS: usize = 50;

/// Lawson-Hanson active-set solution of `min 1/2 x'Qx - b'x, x >= 0` for a
/// positive semidefinite `q`. `None` if a subproblem cannot be factored.
fn nnls(
    q: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DVector<f64>,
    tol: f64,
) -> Option<nalgebra::DVector<f64>> {
    let k = b.len();
    let scale = (0..k)
        .map(|u| q[(u, u)])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let ridge = 1e-13 * scale;
    let solve_on = |passive: &[usize]| -> Option<nalgebra::DVector<f64>> {
        let p = passive.len();
        let mut sub = nalgebra::DMatrix::<f64>::from_fn(p, p, |r, c| q[(passive[r], passive[c])]);
        for r in 0..p {
            sub[(r, r)] += ridge;
        }
        let rhs = nalgebra::DVector::<f64>::from_fn(p, |r, _| b[passive[r]]);
        sub.cholesky().map(|c| c.solve(&rhs))
    };

    let mut x = nalgebra::DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    for _ in 0..3 * k + 10 {
        let w = b - q * &x;
        let Some(t) = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &c| w[a].total_cmp(&w[c]))
        else {
            return Some(x);
        };
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let z = solve_on(&idx)?;
            if z.iter().all(|&v| v > 0.0) {
                for (r, &j) in idx.iter().enumerate() {
                    x[j] = z[r];
                }
                break;
            }
            let mut step = 1.0f64;
            for (r, &j) in idx.iter().enumerate() {
                if z[r] <= 0.0 {
                    step = step.min(x[j] / (x[j] - z[r]));
                }
            }
            for (r, &j) in idx.iter().enumerate() {
                x[j] += step * (z[r] - x[j]);
                if x[j] <= 0.0 || (z[r] <= 0.0 && x[j] <= tol * 1e-3) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Some(x)
}

/// Solve the dual by cyclic exact coordinate ascent.
///
/// Each sweep visits every `(alpha+, alpha-)` pair, maximizing over their
/// difference in `[-(1 - tau) C, tau C]`, then every `lambda` over
/// `[0, inf)`, and finishes with SMO-style pairwise steps within each level.
/// Every update increases the dual objective and keeps the iterate feasible.
/// Fitted values `F = beta G` are maintained incrementally. Stops once the
/// KKT violation is at most `tol * C`. Whenever the iterate it would return
/// still crosses at the training points by more than [`CROSSING_TOL`], the
/// `lambda` block is maximized exactly with the alphas frozen.
pub fn solve_dual(
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
    config: &CsvqrConfig,
) -> Result<(DualSolution, SolveStatus)> {
    solve_dual_observed(g, y, levels, config, |_, _| {})
}

/// [`solve_dual`] calling `observer(sweep, dual)` after every sweep and
/// after every exact `lambda` step.
pub fn solve_dual_observed<F>(
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
    config: &CsvqrConfig,
    mut observer: F,
) -> Result<(DualSolution, SolveStatus)>
where
    F: FnMut(usize, &DualSolution),
{
    config.validate()?;
    check_inputs(g, y)?;
    let mut state = DualState::new(g, y, levels, config.c);

    let n = y.len();
    let mut sweeps = 0;
    let mut done = false;
    while sweeps < config.max_iter {
        state.sweep();
        state.pair_steps(n, config.abs_tol());
        sweeps += 1;
        observer(sweeps, &state.dual);
        if state.kkt() <= config.abs_tol() {
            // a converged iterate may still cross by up to the tolerance
            if state.max_crossing() <= CROSSING_TOL {
                done = true;
                break;
            }
            state.close_crossings();
            observer(sweeps, &state.dual);
            if state.kkt() <= config.abs_tol() {
                done = true;
                break;
            }
        }
    }
    if !done {
        // an unconverged iterate can leave training quantiles crossed by up
        // to the KKT violation
        state.close_crossings();
        observer(sweeps, &state.dual);
    }

    // refresh against accumulated rounding in the incremental updates
    let dual = state.dual;
    let exact = coefficients(&dual).dot(&g);
    let grad = gradient_from_fitted(exact.view(), y);
    let final_kkt = kkt_from_gradient(&dual, &grad, levels, config.c);
    let status = SolveStatus {
        converged: final_kkt <= config.abs_tol(),
        sweeps,
        kkt: final_kkt,
    };
    if !status.converged {
        log::warn!(
            "dual solver stopped after {} sweeps with KKT violation {:.3e} (tol {:.1e})",
            sweeps,
            final_kkt,
            config.abs_tol()
        );
    }
    Ok((dual, status))
}

/// Single-level support vector quantile regression, solved over the
/// expansion coefficients directly. Returns the coefficients `a_i` with
/// `f(x) = sum_i a_i K(x, x_i)`.
pub fn solve_single_quantile(
    g: ArrayView2<'_, f64>,
    y: &[f64],
    tau: f64,
    config: &CsvqrConfig,
) -> Result<(Array1<f64>, SolveStatus)> {
    config.validate()?;
    check_inputs(g, y)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {tau} not in (0, 1)"
        )));
    }
    let n = y.len();
    let (lo, hi) = (-(1.0 - tau) * config.c, tau * config.c);
    let mut a = Array1::<f64>::zeros(n);
    let mut fitted = Array1::<f64>::zeros(n);
    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    while sweeps < config.max_iter {
        for i in 0..n {
            let next = clipped_step(a[i], y[i] - fitted[i], g[[i, i]], lo, hi);
            let delta = next - a[i];
            if delta != 0.0 {
                fitted.scaled_add(delta, &g.row(i));
                a[i] = next;
            }
        }
        sweeps += 1;
        kkt = (0..n)
            .map(|i| projected(a[i], y[i] - fitted[i], lo, hi))
            .fold(0.0, f64::max);
        if kkt <= config.abs_tol() {
            break;
        }
    }
    Ok((
        a,
        SolveStatus {
            converged: kkt <= config.abs_tol(),
            sweeps,
            kkt,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvqr::{dual_objective, kkt_violation};
    use crate::kernels::{gram, KernelSpec};
    use ndarray::array;

    fn tight(c: f64, kernel: KernelSpec) -> CsvqrConfig {
        CsvqrConfig {
            c,
            kernel,
            tol: 1e-10,
            max_iter: 100_000,
            clamp: false,
        }
    }

    #[test]
    fn zero_targets_give_zero_dual() {
        let x = array![[0.0, 1.0], [0.5, 0.2], [1.0, 1.0]];
        let g = gram(&KernelSpec::rbf(1.0).unwrap(), x.view()).unwrap();
        let levels = QuantileLevels::new(vec![0.2, 0.5, 0.8]).unwrap();
        let (dual, status) =
            solve_dual(g.view(), &[0.0; 3], &levels, &CsvqrConfig::default()).unwrap();
        assert!(status.converged);
        assert_eq!(dual, DualSolution::zeros(3, 3));
    }

    #[test]
    fn single_point_single_level() {
        // maximize -a^2/2 + a y over a in [-(1 - tau) C, tau C]
        let g = array![[1.0]];
        let levels = QuantileLevels::new(vec![0.5]).unwrap();
        let (dual, _) =
            solve_dual(g.view(), &[0.3], &levels, &tight(1.0, KernelSpec::Linear)).unwrap();
        assert!((dual.alpha_plus[[0, 0]] - 0.3).abs() < 1e-12);
        let (dual, _) =
            solve_dual(g.view(), &[0.9], &levels, &tight(1.0, KernelSpec::Linear)).unwrap();
        assert_eq!(dual.alpha_plus[[0, 0]], 0.5);
        let (dual, _) =
            solve_dual(g.view(), &[-0.9], &levels, &tight(1.0, KernelSpec::Linear)).unwrap();
        assert_eq!(dual.alpha_minus[[0, 0]], 0.5);
    }

    #[test]
    fn single_level_matches_dedicated_path() {
        let x = array![[0.0], [0.2], [0.4], [0.6], [0.8], [1.0], [0.4]];
        let y = [0.1, 0.5, 0.2, 0.9, 0.4, 0.6, 0.3];
        let cfg = tight(3.0, KernelSpec::rbf(0.5).unwrap());
        let g = gram(&cfg.kernel, x.view()).unwrap();
        let levels = QuantileLevels::new(vec![0.5]).unwrap();
        let (dual, _) = solve_dual(g.view(), &y, &levels, &cfg).unwrap();
        let (a, status) = solve_single_quantile(g.view(), &y, 0.5, &cfg).unwrap();
        assert!(status.converged);
        let beta = coefficients(&dual);
        let f_multi = beta.row(0).dot(&g);
        let f_single = a.dot(&g);
        for (p, q) in f_multi.iter().zip(f_single.iter()) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let levels = QuantileLevels::new(vec![0.3, 0.7]).unwrap();
        let (dual, status) = solve_dual(
            g.view(),
            &[0.2, 0.8],
            &levels,
            &tight(1.0, KernelSpec::Linear),
        )
        .unwrap();
        assert!(status.converged);
        assert!(kkt_violation(&dual, g.view(), &[0.2, 0.8], &levels, 1.0).unwrap() <= 1e-9);

        assert!(solve_dual(g.view(), &[f64::NAN, 0.0], &levels, &CsvqrConfig::default()).is_err());
        assert!(solve_dual(g.view(), &[], &levels, &CsvqrConfig::default()).is_err());
        assert!(solve_dual(g.view(), &[0.0], &levels, &CsvqrConfig::default()).is_err());
        let bad = CsvqrConfig {
            max_iter: 0,
            ..CsvqrConfig::default()
        };
        assert!(solve_dual(g.view(), &[0.0, 0.0], &levels, &bad).is_err());
    }

    #[test]
    fn objective_never_decreases() {
        let x = array![
            [0.0, 0.1],
            [0.3, 0.9],
            [0.5, 0.5],
            [0.7, 0.2],
            [1.0, 0.4],
            [0.2, 0.2]
        ];
        let y = [0.9, 0.1, 0.5, 0.8, 0.05, 0.6];
        let cfg = tight(10.0, KernelSpec::rbf(0.3).unwrap());
        let g = gram(&cfg.kernel, x.view()).unwrap();
        let levels = QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap();
        let mut values = vec![0.0];
        let mut feasible = true;
        solve_dual_observed(g.view(), &y, &levels, &cfg, |_, d| {
            feasible &= d.infeasibility(&levels, cfg.c) == 0.0;
            values.push(dual_objective(d, g.view(), &y, &levels, cfg.c).unwrap());
        })
        .unwrap();
        assert!(feasible);
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn non_convergence_is_reported_not_fatal() {
        let x = array![[0.0], [0.01], [0.02], [1.0]];
        let y = [0.9, 0.1, 0.5, 0.3];
        let cfg = CsvqrConfig {
            c: 100.0,
            kernel: KernelSpec::rbf(2.0).unwrap(),
            tol: 1e-14,
            max_iter: 2,
            clamp: false,
        };
        let g = gram(&cfg.kernel, x.view()).unwrap();
        let levels = QuantileLevels::new(vec![0.25, 0.75]).unwrap();
        let (_, status) = solve_dual(g.view(), &y, &levels, &cfg).unwrap();
        assert!(!status.converged);
        assert_eq!(status.sweeps, 2);
    }

    #[test]
    fn nnls_matches_closed_forms() {
        use nalgebra::{DMatrix, DVector};
        let q = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        // interior optimum: x = Q^-1 b
        let x = nnls(&q, &DVector::from_vec(vec![1.0, 1.0]), 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
        // second coordinate pinned at zero: x0 = b0 / 2
        let x = nnls(&q, &DVector::from_vec(vec![1.0, -3.0]), 1e-12).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9 && x[1] == 0.0);
        let x = nnls(&q, &DVector::from_vec(vec![-1.0, -1.0]), 1e-12).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn early_stop_still_leaves_no_training_crossings() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 / 39.0);
        let y: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 16.0).collect();
        let levels = QuantileLevels::deciles();
        let cfg = CsvqrConfig {
            c: 100.0,
            kernel: KernelSpec::rbf(0.2).unwrap(),
            tol: 1e-12,
            max_iter: 3,
            clamp: false,
        };
        let g = gram(&cfg.kernel, x.view()).unwrap();
        let mut values = Vec::new();
        let (dual, status) = solve_dual_observed(g.view(), &y, &levels, &cfg, |_, d| {
            values.push(dual_objective(d, g.view(), &y, &levels, cfg.c).unwrap());
        })
        .unwrap();
        assert!(!status.converged);
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let fitted = coefficients(&dual).dot(&g);
        for i in 0..40 {
            for m in 0..levels.len() - 1 {
                assert!(fitted[[m, i]] <= fitted[[m + 1, i]] + 1e-6);
            }
        }
    }
}
