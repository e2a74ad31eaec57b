use ndarray::{Array2, ArrayView2, Axis};

use super::QuantileLevels;
use crate::{Error, Result};

/// Dual variables of the non-crossing problem.
///
/// `alpha_plus` and `alpha_minus` are `M x N`; `lambda` is `(M - 1) x N`,
/// row `m` coupling levels `m` and `m + 1`. The boundary multipliers
/// `lambda_0` and `lambda_M` are identically zero and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha_plus: Array2<f64>,
    pub alpha_minus: Array2<f64>,
    pub lambda: Array2<f64>,
}

impl DualSolution {
    pub fn zeros(m: usize, n: usize) -> Self {
        DualSolution {
            alpha_plus: Array2::zeros((m, n)),
            alpha_minus: Array2::zeros((m, n)),
            lambda: Array2::zeros((m.saturating_sub(1), n)),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.alpha_plus.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.alpha_plus.ncols()
    }

    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        let ok = self.alpha_plus.dim() == (m, n)
            && self.alpha_minus.dim() == (m, n)
            && self.lambda.dim() == (m.saturating_sub(1), n);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "dual shapes {:?}/{:?}/{:?} do not match M={m}, N={n}",
                self.alpha_plus.dim(),
                self.alpha_minus.dim(),
                self.lambda.dim()
            )))
        }
    }

    /// Largest amount by which any box or sign constraint is violated.
    pub fn infeasibility(&self, levels: &QuantileLevels, c: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, &tau) in levels.as_slice().iter().enumerate() {
            for &a in self.alpha_plus.row(m) {
                worst = worst.max(-a).max(a - tau * c);
            }
            for &a in self.alpha_minus.row(m) {
                worst = worst.max(-a).max(a - (1.0 - tau) * c);
            }
        }
        for &l in &self.lambda {
            worst = worst.max(-l);
        }
        worst
    }
}

/// Expansion coefficients `beta_m = (alpha+_m - alpha-_m) - (lambda_m - lambda_{m-1})`,
/// so that `f_m(x) = sum_i beta_mi K(x, x_i)`.
pub fn coefficients(dual: &DualSolution) -> Array2<f64> {
    let mut beta = &dual.alpha_plus - &dual.alpha_minus;
    let m_levels = beta.nrows();
    for m in 0..m_levels {
        let mut row = beta.row_mut(m);
        if m < m_levels - 1 {
            row -= &dual.lambda.row(m);
        }
        if m > 0 {
            row += &dual.lambda.row(m - 1);
        }
    }
    beta
}

fn check_problem(
    dual: &DualSolution,
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
) -> Result<()> {
    let n = y.len();
    if g.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "Gram matrix {:?} for {n} targets",
            g.dim()
        )));
    }
    dual.check_shape(levels.len(), n)
}

/// Value of the concave dual function
///
/// ```text
/// D = sum_m [ -1/2 a_m' G a_m + a_m' y - 1/2 d_m' G d_m + a_m' G d_m ]
/// ```
///
/// with `a_m = alpha+_m - alpha-_m` and `d_m = lambda_m - lambda_{m-1}`.
/// The solver maximizes this. `c` is only used for the feasibility check.
pub fn dual_objective(
    dual: &DualSolution,
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
    c: f64,
) -> Result<f64> {
    check_problem(dual, g, y, levels)?;
    let infeasible = dual.infeasibility(levels, c);
    if infeasible > 1e-9 * (1.0 + c) {
        return Err(Error::InvalidArgument(format!(
            "dual is infeasible by {infeasible}"
        )));
    }
    let m_levels = levels.len();
    let a = &dual.alpha_plus - &dual.alpha_minus;
    let mut d = Array2::<f64>::zeros(a.dim());
    for m in 0..m_levels {
        if m < m_levels - 1 {
            d.row_mut(m).assign(&dual.lambda.row(m));
        }
        if m > 0 {
            let mut row = d.row_mut(m);
            row -= &dual.lambda.row(m - 1);
        }
    }
    let y = ndarray::ArrayView1::from(y);
    let mut total = 0.0;
    for m in 0..m_levels {
        let am = a.row(m);
        let dm = d.row(m);
        let ga = g.dot(&am);
        let gd = g.dot(&dm);
        total += -0.5 * am.dot(&ga) + am.dot(&y) - 0.5 * dm.dot(&gd) + am.dot(&gd);
    }
    Ok(total)
}

/// Partial derivatives of [`dual_objective`], shaped like [`DualSolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualGradient {
    pub alpha_plus: Array2<f64>,
    pub alpha_minus: Array2<f64>,
    pub lambda: Array2<f64>,
}

/// Gradient from the fitted values `F = beta G` (`M x N`):
/// `dD/dalpha+_mi = y_i - F_mi`, `dD/dalpha-_mi = F_mi - y_i`,
/// `dD/dlambda_mi = F_mi - F_{m+1,i}`.
pub(crate) fn gradient_from_fitted(fitted: ArrayView2<'_, f64>, y: &[f64]) -> DualGradient {
    let y = ndarray::ArrayView1::from(y);
    let mut residual = fitted.to_owned();
    residual.axis_iter_mut(Axis(0)).for_each(|mut row| {
        row.zip_mut_with(&y, |f, &yi| *f = yi - *f);
    });
    let m_levels = fitted.nrows();
    let mut lambda = Array2::zeros((m_levels.saturating_sub(1), fitted.ncols()));
    for m in 0..m_levels.saturating_sub(1) {
        let diff = &fitted.row(m) - &fitted.row(m + 1);
        lambda.row_mut(m).assign(&diff);
    }
    DualGradient {
        alpha_minus: -&residual,
        alpha_plus: residual,
        lambda,
    }
}

pub fn dual_gradient(
    dual: &DualSolution,
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
    _c: f64,
) -> Result<DualGradient> {
    check_problem(dual, g, y, levels)?;
    let fitted = coefficients(dual).dot(&g);
    Ok(gradient_from_fitted(fitted.view(), y))
}

/// Projected-gradient magnitude of one variable for a maximization over `[lo, hi]`.
#[inline]
pub(crate) fn projected(value: f64, grad: f64, lo: f64, hi: f64) -> f64 {
    if value <= lo {
        grad.max(0.0)
    } else if value >= hi {
        (-grad).max(0.0)
    } else {
        grad.abs()
    }
}

pub(crate) fn kkt_from_gradient(
    dual: &DualSolution,
    grad: &DualGradient,
    levels: &QuantileLevels,
    c: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (m, &tau) in levels.as_slice().iter().enumerate() {
        let (hi_plus, hi_minus) = (tau * c, (1.0 - tau) * c);
        for (v, g) in dual.alpha_plus.row(m).iter().zip(grad.alpha_plus.row(m)) {
            worst = worst.max(projected(*v, *g, 0.0, hi_plus));
        }
        for (v, g) in dual.alpha_minus.row(m).iter().zip(grad.alpha_minus.row(m)) {
            worst = worst.max(projected(*v, *g, 0.0, hi_minus));
        }
    }
    for (v, g) in dual.lambda.iter().zip(grad.lambda.iter()) {
        worst = worst.max(projected(*v, *g, 0.0, f64::INFINITY));
    }
    worst
}

/// Largest projected-gradient component; zero exactly at a stationary point
/// of the box-constrained dual.
pub fn kkt_violation(
    dual: &DualSolution,
    g: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &QuantileLevels,
    c: f64,
) -> Result<f64> {
    let grad = dual_gradient(dual, g, y, levels, c)?;
    Ok(kkt_from_gradient(dual, &grad, levels, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn levels(t: &[f64]) -> QuantileLevels {
        QuantileLevels::new(t.to_vec()).unwrap()
    }

    #[test]
    fn zero_dual_has_zero_objective() {
        let g = array![[1.0, 0.5], [0.5, 1.0]];
        let d = DualSolution::zeros(2, 2);
        assert_eq!(
            dual_objective(&d, g.view(), &[0.3, 0.7], &levels(&[0.25, 0.75]), 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_point_expansion() {
        let g = array![[1.0]];
        let mut d = DualSolution::zeros(1, 1);
        d.alpha_plus[[0, 0]] = 0.3;
        let v = dual_objective(&d, g.view(), &[0.8], &levels(&[0.5]), 1.0).unwrap();
        assert!((v - (-0.5 * 0.09 + 0.3 * 0.8)).abs() < 1e-15);
    }

    #[test]
    fn zero_dual_gradient() {
        let g = array![[1.0, 0.2], [0.2, 1.0]];
        let y = [0.4, -0.1];
        let d = DualSolution::zeros(3, 2);
        let grad = dual_gradient(&d, g.view(), &y, &levels(&[0.1, 0.5, 0.9]), 1.0).unwrap();
        for m in 0..3 {
            assert_eq!(grad.alpha_plus.row(m).to_vec(), y.to_vec());
        }
        assert!(grad.lambda.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kkt_of_zero_dual_with_positive_target() {
        // alpha+ sits at its lower bound with gradient y = 0.6 pointing inward
        let g = array![[1.0]];
        let d = DualSolution::zeros(1, 1);
        let v = kkt_violation(&d, g.view(), &[0.6], &levels(&[0.5]), 1.0).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn box_corner_with_outward_gradient_is_stationary() {
        // alpha+ at its upper bound tau*C while the gradient still pushes upward
        let g = array![[1.0]];
        let mut d = DualSolution::zeros(1, 1);
        d.alpha_plus[[0, 0]] = 0.5;
        let v = kkt_violation(&d, g.view(), &[5.0], &levels(&[0.5]), 1.0).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(projected(0.0, -1.0, 0.0, 1.0), 0.0);
        assert_eq!(projected(1.0, 2.0, 0.0, 1.0), 0.0);
        assert_eq!(projected(0.5, -2.0, 0.0, 1.0), 2.0);
    }

    #[test]
    fn coefficients_combine_lambda() {
        let mut d = DualSolution::zeros(3, 1);
        d.alpha_plus[[1, 0]] = 0.4;
        d.lambda[[0, 0]] = 0.1;
        d.lambda[[1, 0]] = 0.3;
        let b = coefficients(&d);
        assert_eq!(b.column(0).to_vec(), vec![-0.1, 0.4 - 0.3 + 0.1, 0.3]);
    }

    #[test]
    fn shape_and_feasibility_errors() {
        let g = array![[1.0]];
        let d = DualSolution::zeros(2, 1);
        assert!(matches!(
            dual_objective(&d, g.view(), &[0.0], &levels(&[0.5]), 1.0),
            Err(Error::Dimension(_))
        ));
        let mut bad = DualSolution::zeros(1, 1);
        bad.alpha_plus[[0, 0]] = 2.0;
        assert!(dual_objective(&bad, g.view(), &[0.0], &levels(&[0.5]), 1.0).is_err());
    }
}
