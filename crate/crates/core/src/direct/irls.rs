//! Least absolute deviations by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

/// Options for [`irls_l1`].
#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    /// Smoothing in the weights `1/sqrt(r² + ε²)`. It caps the weight of a
    /// residual that is already zero, so the fit on a consistent system is
    /// exact up to roughly ε relative to the other residuals.
    pub epsilon: f64,
    /// Stop when the objective decreases by less than this, relative to
    /// `max(1, objective)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self { epsilon: 1e-8, tol: 1e-9, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct L1Fit {
    pub x: Vec<f64>,
    /// `‖b − A x‖₁` at `x`.
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `x` is then the best iterate.
    pub converged: bool,
}

fn weighted_solve(a: &DMatrix<f64>, b: &[f64], w: &[f64]) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let mut normal = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..m {
        let wi = w[i];
        for p in 0..n {
            let ap = a[(i, p)];
            if ap == 0.0 {
                continue;
            }
            rhs[p] += wi * ap * b[i];
            for q in 0..n {
                normal[(p, q)] += wi * ap * a[(i, q)];
            }
        }
    }
    // Scale to unit diagonal so that very large weights do not hurt the
    // factorization.
    let d: Vec<f64> = (0..n).map(|p| normal[(p, p)].sqrt().max(1e-300)).collect();
    let scaled = DMatrix::from_fn(n, n, |p, q| normal[(p, q)] / (d[p] * d[q]));
    let srhs = DVector::from_fn(n, |p, _| rhs[p] / d[p]);
    let sol = match scaled.clone().cholesky() {
        Some(c) => c.solve(&srhs),
        None => scaled.lu().solve(&srhs)?,
    };
    Some(DVector::from_fn(n, |p, _| sol[p] / d[p]))
}

fn l1_residual(a: &DMatrix<f64>, b: &[f64], x: &DVector<f64>) -> (Vec<f64>, f64) {
    let r: Vec<f64> = (a * x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let obj = r.iter().map(|v| v.abs()).sum();
    (r, obj)
}

/// Approximately minimizes `‖b − A x‖₁`, starting from least squares.
/// `A` must have full column rank.
pub fn irls_l1(a: &DMatrix<f64>, b: &[f64], opts: &IrlsOptions) -> L1Fit {
    let n = a.ncols();
    let ones = vec![1.0; a.nrows()];
    let mut x = weighted_solve(a, b, &ones).unwrap_or_else(|| DVector::zeros(n));
    let (mut r, mut obj) = l1_residual(a, b, &x);
    let mut best = (x.clone(), obj);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let w: Vec<f64> = r.iter().map(|v| 1.0 / (v * v + opts.epsilon * opts.epsilon).sqrt()).collect();
        let Some(next) = weighted_solve(a, b, &w) else {
            break;
        };
        x = next;
        let prev = obj;
        (r, obj) = l1_residual(a, b, &x);
        if obj < best.1 {
            best = (x.clone(), obj);
        }
        if (prev - obj).abs() < opts.tol * prev.max(1.0) {
            converged = true;
            break;
        }
    }
    L1Fit { x: best.0.iter().copied().collect(), objective: best.1, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_the_l1_location() {
        let a = DMatrix::from_element(5, 1, 1.0);
        let b = [1.0, 2.0, 3.0, 10.0, 50.0];
        let fit = irls_l1(&a, &b, &IrlsOptions::default());
        assert!((fit.x[0] - 3.0).abs() < 1e-6, "{}", fit.x[0]);
        assert!(fit.converged);
    }

    #[test]
    fn outlier_is_ignored_in_line_fit() {
        let a = DMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let mut b: Vec<f64> = (0..8).map(|i| 0.5 + 2.0 * i as f64).collect();
        b[3] += 40.0;
        let fit = irls_l1(&a, &b, &IrlsOptions::default());
        assert!((fit.x[0] - 0.5).abs() < 1e-6 && (fit.x[1] - 2.0).abs() < 1e-6, "{:?}", fit.x);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let a = DMatrix::from_element(5, 1, 1.0);
        let b = [0.0, 1.0, 5.0, 9.0, 20.0];
        let fit = irls_l1(&a, &b, &IrlsOptions { max_iter: 1, ..Default::default() });
        assert_eq!(fit.iterations, 1);
        assert!(!fit.converged);
    }
}
