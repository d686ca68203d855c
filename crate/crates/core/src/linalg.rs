//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::Dyn;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Symmetry check relative to the largest entry.
pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1e-300);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Generalized eigenvalues of `a x = λ b x` with `a` symmetric and `b` SPD,
/// ascending, by a dense reduction to a standard symmetric problem.
pub fn generalized_eigenvalues(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::arg("generalized eigenproblem: right-hand matrix is not SPD"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::arg("generalized eigenproblem: singular Cholesky factor"))?;
    let reduced = &linv * a * linv.transpose();
    Ok(symmetric_eigenvalues(&reduced))
}

/// Generalized eigenpairs of `a x = λ b x`, ascending; eigenvectors are
/// `b`-orthonormal columns.
pub fn generalized_eigenpairs(a: &Matrix, b: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::arg("generalized eigenproblem: right-hand matrix is not SPD"))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::arg("generalized eigenproblem: singular Cholesky factor"))?;
    let reduced = &linv * a * linv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = linv.transpose() * &eig.eigenvectors;
    let mut vecs = Matrix::zeros(a.nrows(), a.nrows());
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &back.column(i));
    }
    Ok((vals, vecs))
}

/// Largest generalized eigenvalue of `a x = λ b x` by power iteration, with
/// `a` symmetric positive semidefinite and `b` given through its Cholesky
/// factorization. Stops when successive Rayleigh quotients agree to `rel_tol`.
pub fn power_iteration_max(
    a: &Matrix,
    b: &Cholesky<f64, Dyn>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic, generic start vector
    let mut x = Vector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.754_877_666).sin());
    let bmat = b.l() * b.l().transpose();
    let mut lambda_prev = f64::NAN;
    for _ in 0..max_iter {
        let y = a * &x;
        let bnorm = x.dot(&(&bmat * &x)).sqrt();
        let lambda = x.dot(&y) / (bnorm * bnorm);
        let mut z = b.solve(&y);
        let zn = z.dot(&(&bmat * &z)).sqrt();
        if zn == 0.0 {
            return Ok(0.0);
        }
        z /= zn;
        if lambda_prev.is_finite() && (lambda - lambda_prev).abs() <= rel_tol * lambda.abs().max(1e-300) {
            return Ok(lambda.max(0.0));
        }
        lambda_prev = lambda;
        x = z;
    }
    Err(Error::NonConvergence {
        context: "power iteration".into(),
        node: 0,
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Operator norm of the linear map `m: (R^n, from_gram) → (R^p, to_gram)`.
pub fn operator_norm(m: &Matrix, from_gram: &Matrix, to_gram: &Matrix) -> Result<f64> {
    if m.ncols() != from_gram.nrows() || m.nrows() != to_gram.nrows() {
        return Err(Error::arg("operator_norm: shape mismatch"));
    }
    let chol = Cholesky::new(from_gram.clone())
        .ok_or_else(|| Error::arg("operator_norm: domain Gram matrix is not SPD"))?;
    let a = m.transpose() * to_gram * m;
    let a = (&a + a.transpose()) * 0.5;
    Ok(power_iteration_max(&a, &chol, 1e-13, 100_000)?.sqrt())
}

/// Spectral (Euclidean) norm.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}
