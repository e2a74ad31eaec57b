//! Kernel functions and dense Gram matrices.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|x - x'|^2 / (2 sigma^2))`
    Rbf { sigma: f64 },
    /// Plain dot product.
    Linear,
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "RBF bandwidth must be positive, got {sigma}"
            )));
        }
        Ok(KernelSpec::Rbf { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } => KernelSpec::rbf(sigma).map(|_| ()),
            KernelSpec::Linear => Ok(()),
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Linear => x.dot(&z),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { sigma } => write!(f, "rbf(sigma={sigma})"),
            KernelSpec::Linear => write!(f, "linear"),
        }
    }
}

/// Median of pairwise Euclidean distances, an alternative RBF bandwidth.
///
/// Only the first `max_rows` rows are used to bound the cost.
pub fn median_heuristic(x: ArrayView2<'_, f64>, max_rows: usize) -> Option<f64> {
    let n = x.nrows().min(max_rows);
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = x.row(i);
            let s = x.row(j);
            d.push(
                r.iter()
                    .zip(s.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

pub fn kernel(spec: &KernelSpec, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Dimension(format!(
            "kernel arguments of length {} and {}",
            x.len(),
            z.len()
        )));
    }
    Ok(spec.eval_unchecked(x, z))
}

/// Symmetric `n x n` Gram matrix of the rows of `x`.
pub fn gram(spec: &KernelSpec, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("Gram matrix of an empty set".into()));
    }
    let n = x.nrows();
    let mut g = Array2::zeros((n, n));
    // upper triangle in parallel, then mirror so the result is exactly symmetric
    Zip::indexed(g.axis_iter_mut(Axis(0))).par_for_each(|i, mut row| {
        let xi = x.row(i);
        for j in i..n {
            row[j] = spec.eval_unchecked(xi, x.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            g[[i, j]] = g[[j, i]];
        }
    }
    Ok(g)
}

/// `m x n` matrix with entry `(q, i) = K(query_q, train_i)`.
pub fn gram_cross(
    spec: &KernelSpec,
    train: ArrayView2<'_, f64>,
    query: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if train.nrows() == 0 || query.nrows() == 0 {
        return Err(Error::InvalidArgument("Gram matrix of an empty set".into()));
    }
    if train.ncols() != query.ncols() {
        return Err(Error::Dimension(format!(
            "training rows have {} columns, query rows {}",
            train.ncols(),
            query.ncols()
        )));
    }
    let mut g = Array2::zeros((query.nrows(), train.nrows()));
    Zip::indexed(g.axis_iter_mut(Axis(0))).par_for_each(|q, mut row| {
        let xq = query.row(q);
        for (i, v) in row.iter_mut().enumerate() {
            *v = spec.eval_unchecked(xq, train.row(i));
        }
    });
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn kernel_examples() {
        let rbf = KernelSpec::rbf(1.0).unwrap();
        let x = array![0.3, -1.0];
        assert_eq!(kernel(&rbf, x.view(), x.view()).unwrap(), 1.0);
        let a = array![0.0, 0.0];
        let b = array![1.0, 1.0];
        assert!((kernel(&rbf, a.view(), b.view()).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(
            kernel(&KernelSpec::Linear, e1.view(), e2.view()).unwrap(),
            0.0
        );
        assert!(matches!(
            kernel(&rbf, e1.view(), array![1.0].view()),
            Err(Error::Dimension(_))
        ));
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(f64::NAN).is_err());
    }

    #[test]
    fn gram_examples() {
        let rbf = KernelSpec::rbf(1.0).unwrap();
        assert_eq!(
            gram(&rbf, array![[0.5, 0.5]].view()).unwrap(),
            array![[1.0]]
        );

        let x = array![[0.1, 0.2], [1.0, 0.0], [0.1, 0.2]];
        let g = gram(&rbf, x.view()).unwrap();
        assert_eq!(g.row(0), g.row(2));
        assert_eq!(g.column(0), g.column(2));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 5, 3);
        let g = gram(&rbf, x.view()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let k = kernel(&rbf, x.row(i), x.row(j)).unwrap();
                assert!((g[[i, j]] - k).abs() <= 1e-12);
            }
        }
        assert!(gram(&rbf, Array2::zeros((0, 3)).view()).is_err());
    }

    #[test]
    fn cross_gram_shape_and_mismatch() {
        let rbf = KernelSpec::rbf(0.7).unwrap();
        let train = array![[0.0, 1.0], [1.0, 1.0], [2.0, 0.0]];
        let query = array![[0.0, 0.0], [1.0, 1.0]];
        let g = gram_cross(&rbf, train.view(), query.view()).unwrap();
        assert_eq!(g.dim(), (2, 3));
        assert_eq!(g[[1, 1]], 1.0);
        assert!(gram_cross(&rbf, train.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn median_bandwidth() {
        let x = array![[0.0], [1.0], [3.0]];
        // distances 1, 2, 3
        assert_eq!(median_heuristic(x.view(), 100), Some(2.0));
        assert_eq!(median_heuristic(array![[1.0], [1.0]].view(), 100), None);
    }

    proptest! {
        #[test]
        fn rbf_gram_is_symmetric_psd(seed in any::<u64>(), n in 1usize..=10, p in 1usize..=4, sigma in 0.2..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_matrix(&mut rng, n, p);
            let spec = KernelSpec::rbf(sigma).unwrap();
            let g = gram(&spec, x.view()).unwrap();
            prop_assert_eq!(&g, &g.t().to_owned());
            for i in 0..n {
                prop_assert_eq!(g[[i, i]], 1.0);
            }
            let m = DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
            let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);

            let c = gram_cross(&spec, x.view(), x.view()).unwrap();
            for (a, b) in c.iter().zip(g.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
