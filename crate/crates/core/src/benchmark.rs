//! Bundled problem instances with Euclidean Gram matrices and declared
//! constants that hold by construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::operators::{
    ClarkePotentialG, ClarkePotentialJ, ConstantsA, ConstantsB, ConstantsG, ConstantsJ, ConstantsPhi,
    ConvexPotentialPhi, HistoryOperator, OperatorFamilyA, OperatorFamilyB, TimeFn,
};
use crate::probes::{Sampler, SamplerConfig};
use crate::spaces::{DiscreteSpace, SpaceLabel, TimeGrid};
use crate::stepper::soft_threshold;
use crate::system::{constant_load, SystemParts, SystemProblem};
use crate::{Matrix, Vector};

/// Parameters of the coupled benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkParams {
    pub dim_v: usize,
    pub dim_e: usize,
    /// Dimension of `Y`, `Z` and `Q`.
    pub dim_aux: usize,
    pub m_a: f64,
    pub m_j: f64,
    pub m_b: f64,
    pub m_g: f64,
    /// Monotone nonlinearity `β·tanh`.
    pub beta: f64,
    /// Norm of the skew parts.
    pub skew: f64,
    /// Scale of every cross-coupling term.
    pub coupling: f64,
    /// Friction-like weight of the convex potential.
    pub phi_weight: f64,
    /// Volterra-Lipschitz constant shared by the four history operators.
    pub history: f64,
    pub load: f64,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            dim_v: 2,
            dim_e: 2,
            dim_aux: 2,
            m_a: 1.5,
            m_j: 0.5,
            m_b: 1.5,
            m_g: 0.5,
            beta: 0.5,
            skew: 0.5,
            coupling: 0.4,
            phi_weight: 0.3,
            history: 0.5,
            load: 1.0,
            horizon: 1.0,
            steps: 64,
            seed: 7,
        }
    }
}

impl BenchmarkParams {
    /// `m_A = m_B = 1`, `m_J = m_g = 1 − margin`.
    pub fn with_margin(margin: f64, seed: u64) -> Self {
        Self { m_a: 1.0, m_b: 1.0, m_j: 1.0 - margin, m_g: 1.0 - margin, seed, ..Self::default() }
    }

    /// Random dimensions up to 8 and margins in `[0.25, 1]`.
    pub fn randomized(seed: u64) -> Self {
        let mut s = Sampler::new(&SamplerConfig { seed, ..Default::default() }, 21);
        let dim = |s: &mut Sampler| 1 + (s.uniform() * 8.0) as usize;
        let (dim_v, dim_e, dim_aux) = (dim(&mut s), dim(&mut s), dim(&mut s));
        let m_a = 1.0 + s.uniform();
        let m_b = 1.0 + s.uniform();
        Self {
            dim_v: dim_v.min(8),
            dim_e: dim_e.min(8),
            dim_aux: dim_aux.min(8),
            m_a,
            m_j: m_a - (0.25 + 0.75 * s.uniform()),
            m_b,
            m_g: m_b - (0.25 + 0.75 * s.uniform()),
            coupling: 0.1 + 0.4 * s.uniform(),
            history: 0.2 + 0.8 * s.uniform(),
            seed,
            ..Self::default()
        }
    }
}

struct Mats {
    s: Sampler,
}

impl Mats {
    fn new(seed: u64) -> Self {
        Self { s: Sampler::new(&SamplerConfig { seed, ..Default::default() }, 31) }
    }

    /// Gaussian matrix scaled to unit spectral norm.
    fn unit(&mut self, rows: usize, cols: usize) -> Matrix {
        let g = Matrix::from_iterator(rows, cols, self.s.gaussian(rows * cols).iter().copied());
        let n = spectral_norm(&g);
        if n > 0.0 {
            g / n
        } else {
            g
        }
    }

    fn skew(&mut self, n: usize, norm: f64) -> Matrix {
        let g = self.unit(n, n);
        let k = &g - g.transpose();
        let s = spectral_norm(&k);
        if s > 0.0 {
            k * (norm / s)
        } else {
            k
        }
    }

    fn vector(&mut self, n: usize) -> Vector {
        self.s.gaussian(n)
    }
}

fn euclid(label: SpaceLabel, n: usize) -> Result<Arc<DiscreteSpace>> {
    Ok(Arc::new(DiscreteSpace::euclidean(label, n)?))
}

fn clamp1(v: &Vector) -> Vector {
    v.map(|x| x.clamp(-1.0, 1.0))
}

/// Coupled nonlinear benchmark: nonsmooth `φ`, nonmonotone `J` and `g`, and
/// four active history operators.
pub fn coupled_benchmark(p: &BenchmarkParams) -> Result<(SystemProblem, TimeGrid)> {
    let grid = TimeGrid::new(p.horizon, p.steps)?;
    let (n, m, a) = (p.dim_v, p.dim_e, p.dim_aux);
    let mut r = Mats::new(p.seed);
    let (sa, pm) = (r.skew(n, p.skew), r.unit(n, m));
    let (qm, wm) = (r.unit(n, m), r.unit(n, a));
    let (fm, hm) = (r.unit(n, m), r.unit(n, a));
    let (sb, cm, dm) = (r.skew(m, p.skew), r.unit(m, n), r.unit(m, a));
    let em = r.unit(m, n);
    let (ur, u1, u2, us) = (r.unit(a, n), r.unit(n, n), r.unit(a, n), r.unit(a, n));
    let (ph1, ph2) = (r.vector(n), r.vector(m));
    let (w0, th0) = (r.vector(n) * 0.5, r.vector(m) * 0.5);
    let k = p.coupling;

    let (m_a, beta) = (p.m_a, p.beta);
    let op_a = OperatorFamilyA::new(
        ConstantsA { m: m_a, mbar: k, a0: TimeFn::constant(0.0), a1: k, a2: m_a + beta + p.skew },
        move |_, th, v| v * m_a + v.map(|x| beta * x.tanh()) + &sa * v + (&pm * th).map(|x| k * x.sin()),
    );
    let m_j = p.m_j;
    let pot_j = ClarkePotentialJ::new(
        ConstantsJ { c0: TimeFn::constant(0.0), c1: k, c2: k, c3: m_j, m: m_j, mbar: k },
        move |_, th, z, v| clamp1(v) * -m_j + ((&qm * th).map(f64::tanh) + (&wm * z).map(f64::tanh)) * k,
    );
    let g0 = p.phi_weight;
    let weights = move |th: &Vector, y: &Vector| (&fm * th + &hm * y).map(|x| g0 * (1.0 + 0.5 * x.tanh()));
    let wprox = weights.clone();
    let pot_phi = ConvexPotentialPhi::new(
        ConstantsPhi { c0: TimeFn::constant(1.5 * g0 * (n as f64).sqrt()), m: 0.5 * g0, ..Default::default() },
        move |_, th, y, rho, x| {
            let w = wprox(th, y);
            Vector::from_fn(x.len(), |i, _| soft_threshold(&Vector::from_element(1, x[i]), rho * w[i])[0])
        },
    )
    .with_value(move |_, th, y, v| weights(th, y).dot(&v.abs()));
    let (m_b, m_g) = (p.m_b, p.m_g);
    let op_b = OperatorFamilyB::new(
        ConstantsB { m: m_b, mbar: k, b0: TimeFn::constant(0.0), b1: k, b2: k, b3: m_b + beta + p.skew },
        move |_, w, wb, th| th * m_b + th.map(|x| beta * x.tanh()) + &sb * th - (&cm * w + &dm * wb) * k,
    );
    let pot_g = ClarkePotentialG::new(
        ConstantsG { c0: TimeFn::constant(0.0), c1: k, c2: m_g, m: m_g, mbar: k },
        move |_, w, th| clamp1(th) * -m_g + (&em * w).map(f64::tanh) * k,
    );
    let c = p.history;
    let hist_r = HistoryOperator::volterra(a, c, move |t, s| &ur * (c * (s - t).exp()))?;
    let hist_r1 = HistoryOperator::volterra(n, c, move |t, s| &u1 * (c * (2.0 * (s - t)).exp()))?;
    let hist_r2 = HistoryOperator::accumulate_then_map(a, c, Vector::zeros(n), move |x| (&u2 * x).map(|y| c * y.tanh()))?;
    let hist_s = HistoryOperator::integral_of_map(a, c, move |v| (&us * v).map(|y| c * y.sin()))?;
    let (amp, horizon) = (p.load, p.horizon);
    let problem = SystemProblem::new(SystemParts {
        v: euclid(SpaceLabel::V, n)?,
        e: euclid(SpaceLabel::E, m)?,
        y: euclid(SpaceLabel::Y, a)?,
        z: euclid(SpaceLabel::Z, a)?,
        q: euclid(SpaceLabel::Q, a)?,
        op_a,
        pot_j,
        pot_phi,
        op_b,
        pot_g,
        hist_r,
        hist_r1,
        hist_r2,
        hist_s,
        load1: Arc::new(move |t| ph1.map(|ph| amp * (2.0 * std::f64::consts::PI * t / horizon + ph).sin())),
        load2: Arc::new(move |t| ph2.map(|ph| amp * (std::f64::consts::PI * t / horizon + ph).cos())),
        w0,
        theta0: th0,
    })?;
    Ok((problem, grid))
}

/// Linear counterpart of [`coupled_benchmark`]: every map is affine, so the
/// stability estimates are as tight as the structure allows.
pub fn linear_estimate_instance(p: &BenchmarkParams) -> Result<(SystemProblem, TimeGrid)> {
    let grid = TimeGrid::new(p.horizon, p.steps)?;
    let (n, m, a) = (p.dim_v, p.dim_e, p.dim_aux);
    let mut r = Mats::new(p.seed ^ 0xabc);
    let (sa, pm, qm, wm) = (r.skew(n, p.skew), r.unit(n, m), r.unit(n, m), r.unit(n, a));
    let (fm, hm) = (r.unit(n, m), r.unit(n, a));
    let (sb, cm, dm, em) = (r.skew(m, p.skew), r.unit(m, n), r.unit(m, a), r.unit(m, n));
    let (ur, u1, u2, us) = (r.unit(a, n), r.unit(n, n), r.unit(a, n), r.unit(a, n));
    let (w0, th0) = (r.vector(n), r.vector(m));
    let (k, c) = (p.coupling, p.history);
    let (m_a, m_j, m_b, m_g) = (p.m_a, p.m_j, p.m_b, p.m_g);
    let kphi = p.phi_weight;
    let problem = SystemProblem::new(SystemParts {
        v: euclid(SpaceLabel::V, n)?,
        e: euclid(SpaceLabel::E, m)?,
        y: euclid(SpaceLabel::Y, a)?,
        z: euclid(SpaceLabel::Z, a)?,
        q: euclid(SpaceLabel::Q, a)?,
        op_a: OperatorFamilyA::new(
            ConstantsA { m: m_a, mbar: k, a1: k, a2: m_a + p.skew, ..Default::default() },
            move |_, th, v| v * m_a + &sa * v + &pm * th * k,
        ),
        pot_j: ClarkePotentialJ::new(
            ConstantsJ { c1: k, c2: k, c3: m_j, m: m_j, mbar: k, ..Default::default() },
            move |_, th, z, v| v * -m_j + (&qm * th + &wm * z) * k,
        ),
        pot_phi: ConvexPotentialPhi::new(
            ConstantsPhi { c1: kphi, c2: kphi, m: kphi, ..Default::default() },
            move |_, th, y, rho, x| x - (&fm * th + &hm * y) * (kphi * rho),
        ),
        op_b: OperatorFamilyB::new(
            ConstantsB { m: m_b, mbar: k, b1: k, b2: k, b3: m_b + p.skew, ..Default::default() },
            move |_, w, wb, th| th * m_b + &sb * th - (&cm * w + &dm * wb) * k,
        ),
        pot_g: ClarkePotentialG::new(
            ConstantsG { c1: k, c2: m_g, m: m_g, mbar: k, ..Default::default() },
            move |_, w, th| th * -m_g + &em * w * k,
        ),
        hist_r: HistoryOperator::volterra(a, c, move |t, s| &ur * (c * (s - t).exp()))?,
        hist_r1: HistoryOperator::volterra(n, c, move |_, _| &u1 * c)?,
        hist_r2: HistoryOperator::volterra(a, c, move |_, _| &u2 * c)?,
        hist_s: HistoryOperator::volterra(a, c, move |t, s| &us * (c * (s - t).exp()))?,
        load1: Arc::new(move |t| Vector::from_element(n, t.sin())),
        load2: Arc::new(move |t| Vector::from_element(m, t.cos())),
        w0,
        theta0: th0,
    })?;
    Ok((problem, grid))
}

fn scalar_spaces() -> Result<[Arc<DiscreteSpace>; 5]> {
    Ok([
        euclid(SpaceLabel::V, 1)?,
        euclid(SpaceLabel::E, 1)?,
        euclid(SpaceLabel::Y, 1)?,
        euclid(SpaceLabel::Z, 1)?,
        euclid(SpaceLabel::Q, 1)?,
    ])
}

/// `w' + w = 0`, `θ' + θ = 0`, `w₀ = θ₀ = 1`; no potentials, no history.
pub fn linear_decay(horizon: f64, steps: usize) -> Result<(SystemProblem, TimeGrid)> {
    let [v, e, y, z, q] = scalar_spaces()?;
    let problem = SystemProblem::new(SystemParts {
        v,
        e,
        y,
        z,
        q,
        op_a: OperatorFamilyA::new(ConstantsA { m: 1.0, a2: 1.0, ..Default::default() }, |_, _, w| w.clone()),
        pot_j: ClarkePotentialJ::zero(1),
        pot_phi: ConvexPotentialPhi::zero(),
        op_b: OperatorFamilyB::new(ConstantsB { m: 1.0, b3: 1.0, ..Default::default() }, |_, _, _, th| th.clone()),
        pot_g: ClarkePotentialG::zero(1),
        hist_r: HistoryOperator::zero(1),
        hist_r1: HistoryOperator::zero(1),
        hist_r2: HistoryOperator::zero(1),
        hist_s: HistoryOperator::zero(1),
        load1: constant_load(Vector::zeros(1)),
        load2: constant_load(Vector::zeros(1)),
        w0: Vector::from_element(1, 1.0),
        theta0: Vector::from_element(1, 1.0),
    })?;
    Ok((problem, TimeGrid::new(horizon, steps)?))
}

/// `w' + w = 0`, `θ' + θ = 0` from zero data, in the given dimensions.
pub fn zero_data(dim_v: usize, dim_e: usize, horizon: f64, steps: usize) -> Result<(SystemProblem, TimeGrid)> {
    if dim_v == 0 || dim_e == 0 {
        return Err(Error::config("dimensions must be positive"));
    }
    let problem = SystemProblem::new(SystemParts {
        v: euclid(SpaceLabel::V, dim_v)?,
        e: euclid(SpaceLabel::E, dim_e)?,
        y: euclid(SpaceLabel::Y, 1)?,
        z: euclid(SpaceLabel::Z, 1)?,
        q: euclid(SpaceLabel::Q, 1)?,
        op_a: OperatorFamilyA::new(ConstantsA { m: 1.0, a2: 1.0, ..Default::default() }, |_, _, w| w.clone()),
        pot_j: ClarkePotentialJ::zero(dim_v),
        pot_phi: ConvexPotentialPhi::zero(),
        op_b: OperatorFamilyB::new(ConstantsB { m: 1.0, b3: 1.0, ..Default::default() }, |_, _, _, th| th.clone()),
        pot_g: ClarkePotentialG::zero(dim_e),
        hist_r: HistoryOperator::zero(1),
        hist_r1: HistoryOperator::zero(dim_v),
        hist_r2: HistoryOperator::zero(1),
        hist_s: HistoryOperator::zero(1),
        load1: constant_load(Vector::zeros(dim_v)),
        load2: constant_load(Vector::zeros(dim_e)),
        w0: Vector::zeros(dim_v),
        theta0: Vector::zeros(dim_e),
    })?;
    Ok((problem, TimeGrid::new(horizon, steps)?))
}

/// Coupled linear system with exact solution `w = cos t`, `θ = 1 + sin t`:
///
/// ```text
/// w' + 2w + θ/2 + ∫₀ᵗ w ds = h₁,   θ' + θ − w/2 = h₂.
/// ```
pub fn manufactured_linear(horizon: f64, steps: usize) -> Result<(SystemProblem, TimeGrid)> {
    let [v, e, y, z, q] = scalar_spaces()?;
    let problem = SystemProblem::new(SystemParts {
        v,
        e,
        y,
        z,
        q,
        op_a: OperatorFamilyA::new(
            ConstantsA { m: 2.0, mbar: 0.5, a1: 0.5, a2: 2.0, ..Default::default() },
            |_, th, w| w * 2.0 + th * 0.5,
        ),
        pot_j: ClarkePotentialJ::zero(1),
        pot_phi: ConvexPotentialPhi::zero(),
        op_b: OperatorFamilyB::new(
            ConstantsB { m: 1.0, mbar: 0.5, b1: 0.5, b3: 1.0, ..Default::default() },
            |_, w, _, th| th - w * 0.5,
        ),
        pot_g: ClarkePotentialG::zero(1),
        hist_r: HistoryOperator::zero(1),
        hist_r1: HistoryOperator::volterra(1, 1.0, |_, _| Matrix::identity(1, 1))?,
        hist_r2: HistoryOperator::zero(1),
        hist_s: HistoryOperator::zero(1),
        load1: Arc::new(|t| {
            let (s, c) = t.sin_cos();
            Vector::from_element(1, -s + 2.0 * c + 0.5 * (1.0 + s) + s)
        }),
        load2: Arc::new(|t| {
            let (s, c) = t.sin_cos();
            Vector::from_element(1, c + 1.0 + s - 0.5 * c)
        }),
        w0: Vector::from_element(1, 1.0),
        theta0: Vector::from_element(1, 1.0),
    })?;
    Ok((problem, TimeGrid::new(horizon, steps)?))
}

/// Exact `(w, θ)` of [`manufactured_linear`].
pub fn manufactured_exact(t: f64) -> (f64, f64) {
    (t.cos(), 1.0 + t.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_constants_survive_probing() {
        let (p, g) = coupled_benchmark(&BenchmarkParams::default()).unwrap();
        for r in p.probe(&g, &SamplerConfig::default()).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn randomized_params_respect_bounds() {
        for seed in 0..20 {
            let b = BenchmarkParams::randomized(seed);
            assert!(b.dim_v <= 8 && b.dim_e <= 8 && b.dim_aux <= 8);
            assert!(b.m_a - b.m_j >= 0.25 && b.m_b - b.m_g >= 0.25);
        }
    }
}
