//! Operator families, potentials and history operators, each bundled with the
//! constants it is declared to satisfy.
//!
//! Clarke potentials are represented by single-valued selections of their
//! generalized gradients. Convex potentials are represented by their proximal
//! map in the Euclidean coefficient metric, matching the coefficient duality
//! pairing used throughout the crate.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::TimeGrid;
use crate::{Matrix, Vector};

/// Nonnegative scalar function of time (the `L²(0,T)` coefficients of the
/// growth bounds).
#[derive(Clone)]
pub struct TimeFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl TimeFn {
    pub fn constant(c: f64) -> Self {
        TimeFn(Arc::new(move |_| c))
    }

    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFn(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl Default for TimeFn {
    fn default() -> Self {
        TimeFn::constant(0.0)
    }
}

impl std::fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TimeFn(t=0 -> {})", self.at(0.0))
    }
}

/// Affine growth envelope `base + Σ coeff_i · norm_i`.
pub fn growth_bound(base: f64, terms: &[(f64, f64)]) -> f64 {
    terms.iter().fold(base, |acc, (c, n)| acc + c * n)
}

type FnA = dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync;
type FnJ = dyn Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync;
type FnJUpper = dyn Fn(f64, &Vector, &Vector, &Vector, &Vector) -> f64 + Send + Sync;
type FnProx = dyn Fn(f64, &Vector, &Vector, f64, &Vector) -> Vector + Send + Sync;
type FnPhiValue = dyn Fn(f64, &Vector, &Vector, &Vector) -> f64 + Send + Sync;
type FnB = dyn Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync;
type FnG = dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync;

#[derive(Debug, Clone, Default)]
pub struct ConstantsA {
    pub m: f64,
    pub mbar: f64,
    pub a0: TimeFn,
    pub a1: f64,
    pub a2: f64,
}

/// `A(t, θ, w)`: X × V → V*.
#[derive(Clone)]
pub struct OperatorFamilyA {
    eval: Arc<FnA>,
    pub constants: ConstantsA,
}

impl OperatorFamilyA {
    pub fn new(
        constants: ConstantsA,
        eval: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), constants }
    }

    pub fn eval(&self, t: f64, theta: &Vector, w: &Vector) -> Vector {
        (self.eval)(t, theta, w)
    }

    pub fn growth_bound(&self, t: f64, theta_norm: f64, v_norm: f64) -> f64 {
        let c = &self.constants;
        growth_bound(c.a0.at(t), &[(c.a1, theta_norm), (c.a2, v_norm)])
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConstantsJ {
    pub c0: TimeFn,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m: f64,
    pub mbar: f64,
}

/// Selection of `∂J(t, θ, z, ·)`: X × Z × V → V*.
#[derive(Clone)]
pub struct ClarkePotentialJ {
    subgrad: Arc<FnJ>,
    dirderiv_upper: Option<Arc<FnJUpper>>,
    pub constants: ConstantsJ,
}

impl ClarkePotentialJ {
    pub fn new(
        constants: ConstantsJ,
        subgrad: impl Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            subgrad: Arc::new(subgrad),
            dirderiv_upper: None,
            constants,
        }
    }

    /// The zero potential.
    pub fn zero(dim_v: usize) -> Self {
        Self::new(ConstantsJ::default(), move |_, _, _, _| Vector::zeros(dim_v))
    }

    /// Supplies an explicit bound for `J⁰(t, θ, z, v; d)`.
    pub fn with_dirderiv_upper(
        mut self,
        f: impl Fn(f64, &Vector, &Vector, &Vector, &Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.dirderiv_upper = Some(Arc::new(f));
        self
    }

    pub fn subgrad(&self, t: f64, theta: &Vector, z: &Vector, v: &Vector) -> Vector {
        (self.subgrad)(t, theta, z, v)
    }

    /// Upper estimate of `J⁰(t, θ, z, v; d)`. Without an explicit bound, the
    /// largest pairing of `d` with selections at `v` and at eight points
    /// approaching `v` along `±d`.
    pub fn dirderiv_upper(&self, t: f64, theta: &Vector, z: &Vector, v: &Vector, d: &Vector) -> f64 {
        if let Some(f) = &self.dirderiv_upper {
            return f(t, theta, z, v, d);
        }
        sampled_dirderiv(|x| self.subgrad(t, theta, z, x), v, d)
    }

    pub fn growth_bound(&self, t: f64, theta_norm: f64, z_norm: f64, v_norm: f64) -> f64 {
        let c = &self.constants;
        growth_bound(c.c0.at(t), &[(c.c1, theta_norm), (c.c2, z_norm), (c.c3, v_norm)])
    }
}

/// Max of `⟨s(x), d⟩` over `x = v` and eight points `v ± 2^{-j}·1e-6·d`.
pub(crate) fn sampled_dirderiv(sel: impl Fn(&Vector) -> Vector, v: &Vector, d: &Vector) -> f64 {
    let mut best = sel(v).dot(d);
    let scale = 1e-6 / d.norm().max(1e-300);
    for j in 0..4 {
        let h = scale * 0.5f64.powi(j);
        for sign in [1.0, -1.0] {
            let x = v + d * (sign * h);
            best = best.max(sel(&x).dot(d));
        }
    }
    best
}

#[derive(Debug, Clone, Default)]
pub struct ConstantsPhi {
    pub c0: TimeFn,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m: f64,
}

/// Convex potential `φ(t, θ, y, ·)` accessed through its proximal map.
#[derive(Clone)]
pub struct ConvexPotentialPhi {
    prox: Arc<FnProx>,
    value: Option<Arc<FnPhiValue>>,
    subgrad: Option<Arc<FnJ>>,
    pub constants: ConstantsPhi,
}

impl ConvexPotentialPhi {
    /// `prox(t, θ, y, ρ, x) = argmin_v φ(t,θ,y,v) + |v − x|²/(2ρ)`.
    pub fn new(
        constants: ConstantsPhi,
        prox: impl Fn(f64, &Vector, &Vector, f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            prox: Arc::new(prox),
            value: None,
            subgrad: None,
            constants,
        }
    }

    pub fn zero() -> Self {
        Self::new(ConstantsPhi::default(), |_, _, _, _, x| x.clone())
            .with_value(|_, _, _, _| 0.0)
    }

    pub fn with_value(
        mut self,
        f: impl Fn(f64, &Vector, &Vector, &Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.value = Some(Arc::new(f));
        self
    }

    pub fn with_subgrad(
        mut self,
        f: impl Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.subgrad = Some(Arc::new(f));
        self
    }

    pub fn prox(&self, t: f64, theta: &Vector, y: &Vector, rho: f64, x: &Vector) -> Vector {
        (self.prox)(t, theta, y, rho, x)
    }

    pub fn value(&self, t: f64, theta: &Vector, y: &Vector, v: &Vector) -> Option<f64> {
        self.value.as_ref().map(|f| f(t, theta, y, v))
    }

    pub fn subgrad(&self, t: f64, theta: &Vector, y: &Vector, v: &Vector) -> Option<Vector> {
        self.subgrad.as_ref().map(|f| f(t, theta, y, v))
    }

    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    pub fn growth_bound(&self, t: f64, theta_norm: f64, y_norm: f64, v_norm: f64) -> f64 {
        let c = &self.constants;
        growth_bound(c.c0.at(t), &[(c.c1, theta_norm), (c.c2, y_norm), (c.c3, v_norm)])
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConstantsB {
    pub m: f64,
    pub mbar: f64,
    pub b0: TimeFn,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// `B(t, w, w̄, θ)`: V × Q × E → E*.
#[derive(Clone)]
pub struct OperatorFamilyB {
    eval: Arc<FnB>,
    pub constants: ConstantsB,
}

impl OperatorFamilyB {
    pub fn new(
        constants: ConstantsB,
        eval: impl Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), constants }
    }

    pub fn eval(&self, t: f64, w: &Vector, wbar: &Vector, theta: &Vector) -> Vector {
        (self.eval)(t, w, wbar, theta)
    }

    pub fn growth_bound(&self, t: f64, w_norm: f64, wbar_norm: f64, theta_norm: f64) -> f64 {
        let c = &self.constants;
        growth_bound(c.b0.at(t), &[(c.b1, w_norm), (c.b2, wbar_norm), (c.b3, theta_norm)])
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConstantsG {
    pub c0: TimeFn,
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
    pub mbar: f64,
}

/// Selection of `∂g(t, w, ·)`: V × E → E*.
#[derive(Clone)]
pub struct ClarkePotentialG {
    subgrad: Arc<FnG>,
    pub constants: ConstantsG,
}

impl ClarkePotentialG {
    pub fn new(
        constants: ConstantsG,
        subgrad: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self { subgrad: Arc::new(subgrad), constants }
    }

    pub fn zero(dim_e: usize) -> Self {
        Self::new(ConstantsG::default(), move |_, _, _| Vector::zeros(dim_e))
    }

    pub fn subgrad(&self, t: f64, w: &Vector, theta: &Vector) -> Vector {
        (self.subgrad)(t, w, theta)
    }

    pub fn growth_bound(&self, t: f64, w_norm: f64, theta_norm: f64) -> f64 {
        let c = &self.constants;
        growth_bound(c.c0.at(t), &[(c.c1, w_norm), (c.c2, theta_norm)])
    }
}

type KernelFn = dyn Fn(f64, f64) -> Matrix + Send + Sync;
type MapFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type CustomFn = dyn Fn(&TimeGrid, &[Vector], usize) -> Vector + Send + Sync;

/// How a history operator turns the past of a trajectory into a value.
#[derive(Clone)]
pub enum HistoryKind {
    /// Identically zero (the offset, if any, is still added).
    Zero,
    /// `Σ_{j<k} dt·K(t_k, t_j)·v_j`.
    VolterraKernel(Arc<KernelFn>),
    /// `Σ_{j<k} dt·map(v_j)`.
    IntegralOfMap(Arc<MapFn>),
    /// `post(start + Σ_{j<k} dt·v_j)`.
    AccumulateThenMap { post: Arc<MapFn>, start: Vector },
    /// Arbitrary causal rule; receives `values[..k]` only.
    Custom(Arc<CustomFn>),
}

/// Causal operator `L²(0,T;V) → L²(0,T;target)` with a Volterra-Lipschitz
/// constant.
#[derive(Clone)]
pub struct HistoryOperator {
    kind: HistoryKind,
    target_dim: usize,
    offset: Vector,
    lipschitz: f64,
}

impl std::fmt::Debug for HistoryOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            HistoryKind::Zero => "Zero",
            HistoryKind::VolterraKernel(_) => "VolterraKernel",
            HistoryKind::IntegralOfMap(_) => "IntegralOfMap",
            HistoryKind::AccumulateThenMap { .. } => "AccumulateThenMap",
            HistoryKind::Custom(_) => "Custom",
        };
        f.debug_struct("HistoryOperator")
            .field("kind", &kind)
            .field("target_dim", &self.target_dim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl HistoryOperator {
    /// `lipschitz` must be positive except for [`HistoryKind::Zero`].
    pub fn new(kind: HistoryKind, target_dim: usize, lipschitz: f64) -> Result<Self> {
        let zero_kind = matches!(kind, HistoryKind::Zero);
        if !(lipschitz.is_finite() && (lipschitz > 0.0 || (zero_kind && lipschitz == 0.0))) {
            return Err(Error::arg(format!(
                "history Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        if let HistoryKind::AccumulateThenMap { start, .. } = &kind {
            if start.is_empty() {
                return Err(Error::arg("AccumulateThenMap start vector is empty"));
            }
        }
        Ok(Self {
            kind,
            target_dim,
            offset: Vector::zeros(target_dim),
            lipschitz,
        })
    }

    pub fn zero(target_dim: usize) -> Self {
        Self {
            kind: HistoryKind::Zero,
            target_dim,
            offset: Vector::zeros(target_dim),
            lipschitz: 0.0,
        }
    }

    pub fn volterra(
        target_dim: usize,
        lipschitz: f64,
        kernel: impl Fn(f64, f64) -> Matrix + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(HistoryKind::VolterraKernel(Arc::new(kernel)), target_dim, lipschitz)
    }

    pub fn integral_of_map(
        target_dim: usize,
        lipschitz: f64,
        map: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(HistoryKind::IntegralOfMap(Arc::new(map)), target_dim, lipschitz)
    }

    pub fn accumulate_then_map(
        target_dim: usize,
        lipschitz: f64,
        start: Vector,
        post: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            HistoryKind::AccumulateThenMap { post: Arc::new(post), start },
            target_dim,
            lipschitz,
        )
    }

    pub fn custom(
        target_dim: usize,
        lipschitz: f64,
        eval: impl Fn(&TimeGrid, &[Vector], usize) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(HistoryKind::Custom(Arc::new(eval)), target_dim, lipschitz)
    }

    /// Constant added to every output.
    pub fn with_offset(mut self, offset: Vector) -> Result<Self> {
        if offset.len() != self.target_dim {
            return Err(Error::arg("history offset has wrong dimension"));
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn kind(&self) -> &HistoryKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, HistoryKind::Zero)
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    /// Value at node `k` from `values[0..k]` (left-rectangle rule).
    pub fn eval(&self, grid: &TimeGrid, values: &[Vector], k: usize) -> Result<Vector> {
        if k > grid.steps() {
            return Err(Error::arg(format!(
                "history node {k} out of range 0..={}",
                grid.steps()
            )));
        }
        if values.len() < k {
            return Err(Error::arg(format!(
                "history at node {k} needs {k} past values, got {}",
                values.len()
            )));
        }
        let past = &values[..k];
        let dt = grid.dt();
        let out = match &self.kind {
            HistoryKind::Zero => Vector::zeros(self.target_dim),
            HistoryKind::VolterraKernel(kernel) => {
                let tk = grid.node(k);
                let mut acc = Vector::zeros(self.target_dim);
                for (j, v) in past.iter().enumerate() {
                    acc += kernel(tk, grid.node(j)) * v * dt;
                }
                acc
            }
            HistoryKind::IntegralOfMap(map) => {
                let mut acc = Vector::zeros(self.target_dim);
                for v in past {
                    acc += map(v) * dt;
                }
                acc
            }
            HistoryKind::AccumulateThenMap { post, start } => {
                let mut acc = start.clone();
                for v in past {
                    acc += v * dt;
                }
                post(&acc)
            }
            HistoryKind::Custom(f) => f(grid, past, k),
        };
        if out.len() != self.target_dim {
            return Err(Error::arg(format!(
                "history operator produced length {}, expected {}",
                out.len(),
                self.target_dim
            )));
        }
        Ok(out + &self.offset)
    }

    /// Values at every node `0..=N`.
    pub fn eval_all(&self, grid: &TimeGrid, values: &[Vector]) -> Result<Vec<Vector>> {
        (0..=grid.steps()).map(|k| self.eval(grid, values, k)).collect()
    }
}

/// Free-function form of [`HistoryOperator::eval`].
pub fn history_eval(op: &HistoryOperator, traj: &crate::Trajectory, k: usize) -> Result<Vector> {
    op.eval(&traj.grid(), traj.values(), k)
}

/// Every structural constant used by the gates and the analytic bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct Ledger {
    pub m_a: f64,
    pub mbar_a: f64,
    pub m_j: f64,
    pub mbar_j: f64,
    pub m_phi: f64,
    pub m_b: f64,
    pub mbar_b: f64,
    pub m_g: f64,
    pub mbar_g: f64,
    pub c_r: f64,
    pub c_r1: f64,
    pub c_r2: f64,
    pub c_s: f64,
}

impl Ledger {
    /// `((m̄_B + m̄_g)² + m̄_B²·c_{R₂}²·T²) / (m_B − m_g)`.
    pub fn step3_constant(&self, horizon: f64) -> f64 {
        let num = (self.mbar_b + self.mbar_g).powi(2)
            + self.mbar_b.powi(2) * self.c_r2.powi(2) * horizon * horizon;
        num / (self.m_b - self.m_g)
    }

    /// Default exponential weight of the contraction norm.
    pub fn bielecki_weight(&self, horizon: f64) -> f64 {
        2.0 * (self.step3_constant(horizon) + self.c_r1.powi(2) + self.c_r.powi(2) + self.c_s.powi(2))
            * horizon
    }

    /// Constant of the frozen-data dependence estimate, `1/(m_A − m_J)`.
    pub fn dependence_constant(&self) -> f64 {
        1.0 / (self.m_a - self.m_j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{DiscreteSpace, SpaceLabel, Trajectory};
    use proptest::prelude::*;

    fn scalar_traj(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Trajectory {
        let s = Arc::new(DiscreteSpace::euclidean(SpaceLabel::V, 1).unwrap());
        Trajectory::from_fn(s, grid, |t| Vector::from_element(1, f(t))).unwrap()
    }

    #[test]
    fn volterra_identity_kernel_integrates_exactly() {
        for n in [1usize, 2, 4, 8, 64] {
            let g = TimeGrid::new(1.0, n).unwrap();
            let op = HistoryOperator::volterra(1, 1.0, |_, _| Matrix::identity(1, 1)).unwrap();
            let tr = scalar_traj(g, |_| 1.0);
            assert_eq!(history_eval(&op, &tr, n).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn exponential_kernel_quadrature() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let op = HistoryOperator::volterra(1, 1.0, |t, s| Matrix::from_element(1, 1, (-(t - s)).exp()))
            .unwrap();
        let tr = scalar_traj(g, |_| 1.0);
        let v = history_eval(&op, &tr, 1024).unwrap()[0];
        assert!((v - (1.0 - (-1.0f64).exp())).abs() <= 2.0 * g.dt());
    }

    #[test]
    fn zero_trajectory_gives_zero() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let tr = scalar_traj(g, |_| 0.0);
        let ops = [
            HistoryOperator::zero(1),
            HistoryOperator::volterra(1, 1.0, |_, _| Matrix::identity(1, 1)).unwrap(),
            HistoryOperator::integral_of_map(1, 1.0, |v| v.map(f64::sin)).unwrap(),
            HistoryOperator::accumulate_then_map(1, 1.0, Vector::zeros(1), |v| v.map(f64::tanh)).unwrap(),
        ];
        for op in &ops {
            for k in 0..=8 {
                assert_eq!(history_eval(op, &tr, k).unwrap()[0], 0.0);
            }
        }
    }

    #[test]
    fn history_node_out_of_range() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let tr = scalar_traj(g, |_| 1.0);
        let op = HistoryOperator::zero(1);
        assert!(matches!(history_eval(&op, &tr, 5), Err(Error::Argument(_))));
    }

    #[test]
    fn lipschitz_constant_validation() {
        assert!(HistoryOperator::volterra(1, 0.0, |_, _| Matrix::identity(1, 1)).is_err());
        assert!(HistoryOperator::new(HistoryKind::Zero, 1, 0.0).is_ok());
    }

    #[test]
    fn growth_bound_examples() {
        assert_eq!(growth_bound(1.0, &[(0.0, 5.0), (2.0, 3.0)]), 7.0);
        assert_eq!(growth_bound(0.0, &[(0.0, 4.0), (0.0, 9.0)]), 0.0);
        assert_eq!(growth_bound(0.5, &[(1.0, 2.0), (0.0, 1.0)]), 2.5);
        let a = OperatorFamilyA::new(
            ConstantsA { a0: TimeFn::constant(1.0), a2: 2.0, ..Default::default() },
            |_, _, w| w.clone(),
        );
        assert_eq!(a.growth_bound(0.3, 10.0, 3.0), 7.0);
    }

    #[test]
    fn step3_constant_formula() {
        let l = Ledger { m_b: 3.0, m_g: 1.0, mbar_b: 1.0, mbar_g: 0.5, c_r2: 2.0, ..Default::default() };
        // ((1.5)^2 + 1·4·4)/2 with T = 2
        assert!((l.step3_constant(2.0) - (2.25 + 16.0) / 2.0).abs() < 1e-15);
    }

    fn arb_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5f64..5.0, 2 * (n + 1))
    }

    fn sample_ops() -> Vec<HistoryOperator> {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        vec![
            HistoryOperator::volterra(2, 1.0, move |t, s| &rot * (-(t - s)).exp()).unwrap(),
            HistoryOperator::integral_of_map(2, 1.0, |v| v.map(f64::sin)).unwrap(),
            HistoryOperator::accumulate_then_map(2, 1.0, Vector::from_row_slice(&[0.3, -0.2]), |v| {
                v.map(f64::tanh)
            })
            .unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn causality_is_bit_exact(a in arb_values(12), b in arb_values(12), k in 0usize..=12) {
            let g = TimeGrid::new(1.0, 12).unwrap();
            let va: Vec<Vector> = a.chunks(2).map(Vector::from_row_slice).collect();
            let mut vb: Vec<Vector> = b.chunks(2).map(Vector::from_row_slice).collect();
            vb[..k].clone_from_slice(&va[..k]);
            for op in sample_ops() {
                prop_assert_eq!(op.eval(&g, &va, k).unwrap(), op.eval(&g, &vb, k).unwrap());
            }
        }

        #[test]
        fn volterra_lipschitz_bound(a in arb_values(10), b in arb_values(10)) {
            let g = TimeGrid::new(2.0, 10).unwrap();
            let va: Vec<Vector> = a.chunks(2).map(Vector::from_row_slice).collect();
            let vb: Vec<Vector> = b.chunks(2).map(Vector::from_row_slice).collect();
            for op in sample_ops() {
                for k in 0..=10 {
                    let lhs = (op.eval(&g, &va, k).unwrap() - op.eval(&g, &vb, k).unwrap()).norm();
                    let rhs: f64 = (0..k).map(|j| g.dt() * (&va[j] - &vb[j]).norm()).sum();
                    prop_assert!(lhs <= op.lipschitz() * rhs * (1.0 + 1e-12) + 1e-14);
                }
            }
        }
    }
}
