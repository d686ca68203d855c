//! Time grids, finite-dimensional spaces with Gram-matrix norms, and
//! trajectories on uniform grids.
//!
//! A [`DiscreteSpace`] carries two Gram matrices on one coefficient space: the
//! strong one defines the `V`-type norm and the weak one the pivot (`H`- or
//! `X`-type) norm. Dual vectors are plain coefficient vectors paired with
//! primal ones by the Euclidean dot product.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::{Matrix, Vector};

/// Uniform grid `t_k = k·T/N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::arg(format!("time horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::arg("number of time steps must be at least 1"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_k`; the last node is exactly `T`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }
}

/// Role of a space in the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceLabel {
    V,
    H,
    E,
    X,
    Y,
    Z,
    Q,
    /// Dual of `V`, normed by the inverse Gram of `V`.
    VDual,
    /// Dual of `E`.
    EDual,
}

/// Finite-dimensional stand-in for one leg of an evolution triple.
#[derive(Clone)]
pub struct DiscreteSpace {
    label: SpaceLabel,
    gram_strong: Matrix,
    gram_weak: Matrix,
    chol_strong: Cholesky<f64, Dyn>,
    lambda_max_strong: f64,
    lambda_max_weak: f64,
}

impl std::fmt::Debug for DiscreteSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteSpace")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .finish()
    }
}

const SYM_TOL: f64 = 1e-12;

impl DiscreteSpace {
    /// Validates symmetry, positive definiteness of the strong Gram and
    /// semidefiniteness of the weak one.
    pub fn new(label: SpaceLabel, gram_strong: Matrix, gram_weak: Matrix) -> Result<Self> {
        let n = gram_strong.nrows();
        if n == 0 {
            return Err(Error::arg("space dimension must be positive"));
        }
        if gram_strong.shape() != (n, n) || gram_weak.shape() != (n, n) {
            return Err(Error::arg(format!(
                "Gram matrices of {label:?} must both be {n}x{n}"
            )));
        }
        if !linalg::is_symmetric(&gram_strong, SYM_TOL) || !linalg::is_symmetric(&gram_weak, SYM_TOL) {
            return Err(Error::arg(format!("Gram matrices of {label:?} must be symmetric")));
        }
        let strong_ev = linalg::symmetric_eigenvalues(&gram_strong);
        if strong_ev[0] <= 0.0 {
            return Err(Error::arg(format!(
                "strong Gram of {label:?} is not positive definite (min eigenvalue {:e})",
                strong_ev[0]
            )));
        }
        let weak_ev = linalg::symmetric_eigenvalues(&gram_weak);
        let weak_scale = weak_ev.last().copied().unwrap_or(0.0).abs().max(1.0);
        if weak_ev[0] < -1e-12 * weak_scale {
            return Err(Error::arg(format!(
                "weak Gram of {label:?} is not positive semidefinite (min eigenvalue {:e})",
                weak_ev[0]
            )));
        }
        let chol_strong = Cholesky::new(gram_strong.clone())
            .ok_or_else(|| Error::arg("Cholesky factorization of strong Gram failed"))?;
        Ok(Self {
            label,
            lambda_max_strong: *strong_ev.last().unwrap(),
            lambda_max_weak: weak_ev.last().copied().unwrap_or(0.0).max(0.0),
            gram_strong,
            gram_weak,
            chol_strong,
        })
    }

    /// Both Gram matrices equal to the identity.
    pub fn euclidean(label: SpaceLabel, dim: usize) -> Result<Self> {
        Self::new(label, Matrix::identity(dim, dim), Matrix::identity(dim, dim))
    }

    /// Space whose strong norm is the weak norm of `self` (the pivot space);
    /// requires the weak Gram to be definite.
    pub fn pivot(&self, label: SpaceLabel) -> Result<Self> {
        Self::new(label, self.gram_weak.clone(), self.gram_weak.clone())
    }

    /// Dual space normed by the inverse strong Gram.
    pub fn dual(&self, label: SpaceLabel) -> Result<Self> {
        let inv = self.chol_strong.inverse();
        let inv = (&inv + inv.transpose()) * 0.5;
        Self::new(label, inv.clone(), inv)
    }

    pub fn label(&self) -> SpaceLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.gram_strong.nrows()
    }

    pub fn gram_strong(&self) -> &Matrix {
        &self.gram_strong
    }

    pub fn gram_weak(&self) -> &Matrix {
        &self.gram_weak
    }

    pub fn lambda_max_strong(&self) -> f64 {
        self.lambda_max_strong
    }

    pub fn lambda_max_weak(&self) -> f64 {
        self.lambda_max_weak
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::arg(format!(
                "dimension mismatch: vector of length {} in {:?} of dimension {}",
                v.len(),
                self.label,
                self.dim()
            )));
        }
        Ok(())
    }

    /// `sqrt(vᵀ G_strong v)`.
    pub fn norm_strong(&self, v: &Vector) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.strong_norm_unchecked(v))
    }

    /// `sqrt(vᵀ G_weak v)`.
    pub fn norm_weak(&self, v: &Vector) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.weak_norm_unchecked(v))
    }

    /// Dual norm `sqrt(fᵀ G_strong⁻¹ f)` of a functional.
    pub fn norm_dual(&self, f: &Vector) -> Result<f64> {
        self.check_dim(f)?;
        Ok(self.dual_norm_unchecked(f))
    }

    pub(crate) fn strong_norm_unchecked(&self, v: &Vector) -> f64 {
        quad_form(&self.gram_strong, v).max(0.0).sqrt()
    }

    pub(crate) fn weak_norm_unchecked(&self, v: &Vector) -> f64 {
        quad_form(&self.gram_weak, v).max(0.0).sqrt()
    }

    pub(crate) fn dual_norm_unchecked(&self, f: &Vector) -> f64 {
        f.dot(&self.chol_strong.solve(f)).max(0.0).sqrt()
    }

    /// Riesz map: the primal vector representing `f` in the strong inner product.
    pub fn riesz(&self, f: &Vector) -> Vector {
        self.chol_strong.solve(f)
    }
}

fn quad_form(g: &Matrix, v: &Vector) -> f64 {
    v.dot(&(g * v))
}

/// Euclidean free-function forms of the norms.
pub fn norm_strong(space: &DiscreteSpace, v: &Vector) -> Result<f64> {
    space.norm_strong(v)
}

/// Coefficient dot product realizing the duality pairing.
pub fn dual_pair(f: &Vector, v: &Vector) -> Result<f64> {
    if f.len() != v.len() {
        return Err(Error::arg(format!(
            "dual_pair: lengths {} and {} differ",
            f.len(),
            v.len()
        )));
    }
    Ok(f.dot(v))
}

/// Grid-indexed coefficient vectors in one space.
#[derive(Clone)]
pub struct Trajectory {
    space: Arc<DiscreteSpace>,
    grid: TimeGrid,
    values: Vec<Vector>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("space", &self.space.label())
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .finish()
    }
}

impl Trajectory {
    pub fn new(space: Arc<DiscreteSpace>, grid: TimeGrid, values: Vec<Vector>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::arg(format!(
                "trajectory needs {} values, got {}",
                grid.steps() + 1,
                values.len()
            )));
        }
        for (k, v) in values.iter().enumerate() {
            if v.len() != space.dim() {
                return Err(Error::arg(format!(
                    "trajectory value {k} has length {}, expected {}",
                    v.len(),
                    space.dim()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("trajectory value {k} is not finite")));
            }
        }
        Ok(Self { space, grid, values })
    }

    pub fn zeros(space: Arc<DiscreteSpace>, grid: TimeGrid) -> Self {
        let n = space.dim();
        Self {
            values: vec![Vector::zeros(n); grid.steps() + 1],
            space,
            grid,
        }
    }

    pub fn constant(space: Arc<DiscreteSpace>, grid: TimeGrid, value: &Vector) -> Result<Self> {
        Self::new(space, grid, vec![value.clone(); grid.steps() + 1])
    }

    /// Samples `f(t_k)` at every node.
    pub fn from_fn(
        space: Arc<DiscreteSpace>,
        grid: TimeGrid,
        f: impl Fn(f64) -> Vector,
    ) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(space, grid, values)
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        &self.space
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &Vector {
        &self.values[k]
    }

    pub fn last(&self) -> &Vector {
        self.values.last().expect("trajectory is never empty")
    }

    pub fn into_values(self) -> Vec<Vector> {
        self.values
    }

    fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.grid != other.grid || self.space.dim() != other.space.dim() {
            return Err(Error::arg("trajectories live on different grids or spaces"));
        }
        Ok(())
    }

    /// `self − other`, in the space of `self`.
    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Trajectory {
            space: self.space.clone(),
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Trajectory {
        Trajectory {
            space: self.space.clone(),
            grid: self.grid,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Same coefficients viewed in another space of equal dimension.
    pub fn with_space(&self, space: Arc<DiscreteSpace>) -> Result<Trajectory> {
        if space.dim() != self.space.dim() {
            return Err(Error::arg("with_space: dimension mismatch"));
        }
        Ok(Trajectory {
            space,
            grid: self.grid,
            values: self.values.clone(),
        })
    }

    /// Largest nodal strong-norm difference.
    pub fn max_distance(&self, other: &Trajectory) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| self.space.strong_norm_unchecked(&(a - b)))
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,c0,c1,...`, one row per node, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.space.dim() {
            let _ = write!(out, ",c{i}");
        }
        out.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            let _ = write!(out, "{:.16e}", self.grid.node(k));
            for x in v.iter() {
                let _ = write!(out, ",{:.16e}", x);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`Trajectory::to_csv`]. The grid is
    /// reconstructed from the first and last time stamps.
    pub fn from_csv(text: &str, space: Arc<DiscreteSpace>) -> Result<Trajectory> {
        let (times, values) = parse_csv(text)?;
        if times.len() < 2 {
            return Err(Error::arg("trajectory CSV needs at least two rows"));
        }
        if values[0].len() != space.dim() {
            return Err(Error::arg(format!(
                "trajectory CSV has {} columns, space dimension is {}",
                values[0].len(),
                space.dim()
            )));
        }
        let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
        Trajectory::new(space, grid, values)
    }
}

/// Raw CSV reader: returns the time column and the coefficient rows.
pub fn parse_csv(text: &str) -> Result<(Vec<f64>, Vec<Vector>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::arg("empty CSV"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first().map(|c| c.trim()) != Some("t") {
        return Err(Error::arg("CSV header must start with `t`"));
    }
    let width = cols.len() - 1;
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Result<Vec<f64>> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::arg(format!("CSV row {}: {e}", lineno + 2)))
            })
            .collect();
        let fields = fields?;
        if fields.len() != width + 1 {
            return Err(Error::arg(format!(
                "CSV row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                width + 1
            )));
        }
        times.push(fields[0]);
        rows.push(Vector::from_iterator(width, fields[1..].iter().copied()));
    }
    Ok((times, rows))
}

/// Exponentially weighted discrete `L²(0,T;·)` norm,
/// `sqrt(Σ_{k<N} dt·exp(−weight·t_k)·‖values[k]‖²)` (left-endpoint rule).
pub fn bochner_norm(traj: &Trajectory, weight: f64) -> Result<f64> {
    Ok(bochner_norm_sq(traj, weight)?.sqrt())
}

/// Square of [`bochner_norm`].
pub fn bochner_norm_sq(traj: &Trajectory, weight: f64) -> Result<f64> {
    if !(weight >= 0.0) {
        return Err(Error::arg(format!("Bochner weight must be nonnegative, got {weight}")));
    }
    let grid = traj.grid();
    let dt = grid.dt();
    let space = traj.space();
    Ok(traj.values()[..grid.steps()]
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let n = space.strong_norm_unchecked(v);
            dt * (-weight * grid.node(k)).exp() * n * n
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag_space(d: &[f64]) -> Arc<DiscreteSpace> {
        let g = Matrix::from_diagonal(&Vector::from_row_slice(d));
        Arc::new(DiscreteSpace::new(SpaceLabel::V, g.clone(), g).unwrap())
    }

    #[test]
    fn norm_strong_examples() {
        let s1 = diag_space(&[1.0]);
        assert_eq!(s1.norm_strong(&Vector::from_row_slice(&[2.0])).unwrap(), 2.0);
        let s2 = diag_space(&[1.0, 1.0]);
        assert_eq!(s2.norm_strong(&Vector::from_row_slice(&[3.0, 4.0])).unwrap(), 5.0);
        let s3 = diag_space(&[4.0, 9.0]);
        let n = s3.norm_strong(&Vector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert!((n - 13f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_strong_rejects_dimension_mismatch() {
        let s = diag_space(&[1.0, 1.0]);
        assert!(matches!(
            s.norm_strong(&Vector::from_row_slice(&[1.0])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn dual_pair_examples() {
        let p = |a: &[f64], b: &[f64]| {
            dual_pair(&Vector::from_row_slice(a), &Vector::from_row_slice(b)).unwrap()
        };
        assert_eq!(p(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(p(&[2.0], &[3.0]), 6.0);
        assert_eq!(p(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]), 3.0);
        assert!(dual_pair(&Vector::zeros(2), &Vector::zeros(3)).is_err());
    }

    #[test]
    fn space_validation() {
        let not_spd = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(DiscreteSpace::new(SpaceLabel::V, not_spd, Matrix::identity(2, 2)).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(DiscreteSpace::new(SpaceLabel::V, asym, Matrix::identity(2, 2)).is_err());
        // semidefinite weak Gram is allowed
        let weak = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(DiscreteSpace::new(SpaceLabel::V, Matrix::identity(2, 2), weak).is_ok());
    }

    #[test]
    fn dual_norm_inverts_gram() {
        let s = diag_space(&[4.0, 9.0]);
        let f = Vector::from_row_slice(&[2.0, 3.0]);
        // f = G v with v = (0.5, 1/3); ‖f‖_* = ‖v‖
        let n = s.norm_dual(&f).unwrap();
        assert!((n - (4.0 * 0.25 + 9.0 / 9.0f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bochner_examples() {
        let s = diag_space(&[1.0]);
        let g = TimeGrid::new(2.0, 64).unwrap();
        let one = Trajectory::constant(s.clone(), g, &Vector::from_row_slice(&[1.0])).unwrap();
        assert!((bochner_norm(&one, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let zero = Trajectory::zeros(s.clone(), g);
        assert_eq!(bochner_norm(&zero, 3.0).unwrap(), 0.0);

        let g = TimeGrid::new(1.0, 1024).unwrap();
        let one = Trajectory::constant(s, g, &Vector::from_row_slice(&[1.0])).unwrap();
        let exact = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        let got = bochner_norm(&one, 2.0).unwrap();
        assert!((got - exact).abs() <= 2.0 * g.dt());
        assert!((got - 0.6575).abs() < 1e-3);
        assert!(bochner_norm(&one, -1.0).is_err());
    }

    #[test]
    fn time_grid_invariants() {
        let g = TimeGrid::new(1.7, 13).unwrap();
        assert_eq!(g.node(13), 1.7);
        assert!((g.dt() * 13.0 - 1.7).abs() < 1e-15);
        let nodes: Vec<f64> = g.nodes().collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn trajectory_rejects_non_finite() {
        let s = diag_space(&[1.0]);
        let g = TimeGrid::new(1.0, 1).unwrap();
        let vals = vec![Vector::from_row_slice(&[0.0]), Vector::from_row_slice(&[f64::NAN])];
        assert!(Trajectory::new(s, g, vals).is_err());
    }

    fn arb_traj() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (1usize..6).prop_flat_map(|n| (proptest::collection::vec(-1e3f64..1e3, 2 * (n + 1)), Just(n)))
    }

    proptest! {
        #[test]
        fn parallelogram_law(a in proptest::collection::vec(-10f64..10.0, 3),
                             b in proptest::collection::vec(-10f64..10.0, 3)) {
            let g = Matrix::from_row_slice(3, 3, &[3.0, 0.5, 0.1, 0.5, 2.0, 0.3, 0.1, 0.3, 1.0]);
            let s = DiscreteSpace::new(SpaceLabel::V, g.clone(), g).unwrap();
            let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
            let n = |v: &Vector| s.norm_strong(v).unwrap().powi(2);
            let lhs = n(&(&a + &b)) + n(&(&a - &b));
            let rhs = 2.0 * (n(&a) + n(&b));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }

        #[test]
        fn bochner_monotone_and_homogeneous((vals, n) in arb_traj(), r1 in 0f64..5.0, r2 in 0f64..5.0, alpha in -3f64..3.0) {
            let s = diag_space(&[1.0, 2.0]);
            let g = TimeGrid::new(1.5, n).unwrap();
            let values = vals.chunks(2).map(Vector::from_row_slice).collect();
            let tr = Trajectory::new(s, g, values).unwrap();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(bochner_norm(&tr, lo).unwrap() >= bochner_norm(&tr, hi).unwrap());
            let base = bochner_norm(&tr, lo).unwrap();
            let scaled = bochner_norm(&tr.scaled(alpha), lo).unwrap();
            prop_assert!((scaled - alpha.abs() * base).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn constant_trajectory_norm(c in proptest::collection::vec(-5f64..5.0, 2), t in 0.1f64..4.0, n in 1usize..50) {
            let s = diag_space(&[2.0, 0.5]);
            let g = TimeGrid::new(t, n).unwrap();
            let v = Vector::from_vec(c);
            let tr = Trajectory::constant(s.clone(), g, &v).unwrap();
            let expect = t.sqrt() * s.norm_strong(&v).unwrap();
            prop_assert!((bochner_norm(&tr, 0.0).unwrap() - expect).abs() <= 1e-12 * expect.max(1e-300));
        }

        #[test]
        fn csv_round_trip((vals, n) in arb_traj(), t in 0.1f64..10.0) {
            let s = diag_space(&[1.0, 1.0]);
            let g = TimeGrid::new(t, n).unwrap();
            let values: Vec<Vector> = vals.chunks(2).map(Vector::from_row_slice).collect();
            let tr = Trajectory::new(s.clone(), g, values).unwrap();
            let back = Trajectory::from_csv(&tr.to_csv(), s).unwrap();
            prop_assert_eq!(back.values(), tr.values());
        }
    }
}
