//! Parabolic variational-hemivariational inequality driven by an evolution
//! equation, reduced to the coupled inclusion system.
//!
//! ```text
//! ⟨u' + Ā(t,u), v − u⟩ + G⁰(t, θ, Mu; Mv − Mu) + φ(t,θ,v) − φ(t,θ,u) ≥ ⟨F(t,θ), v − u⟩
//! θ' + B̄(t,θ) = f(t, θ, ϑu)
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::operator_norm;
use crate::operators::{
    ClarkePotentialG, ClarkePotentialJ, ConstantsA, ConstantsB, ConstantsJ, ConvexPotentialPhi, HistoryOperator,
    Ledger, OperatorFamilyA, OperatorFamilyB, TimeFn,
};
use crate::probes::{Sampler, SamplerConfig};
use crate::spaces::{DiscreteSpace, SpaceLabel, TimeGrid, Trajectory};
use crate::system::{constant_load, solve_system, SolveDiagnostics, SystemConfig, SystemParts, SystemProblem};
use crate::{Matrix, Vector};

type Fn1 = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync>;

/// Linear map between coefficient spaces, stored as its matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap(Matrix);

impl LinearMap {
    pub fn from_matrix(m: Matrix) -> Self {
        Self(m)
    }

    /// Materializes `f` on the unit basis and rejects it unless additivity
    /// and homogeneity hold to `1e-12` on sampled inputs.
    pub fn from_fn(dim_in: usize, dim_out: usize, f: impl Fn(&Vector) -> Vector) -> Result<Self> {
        let mut m = Matrix::zeros(dim_out, dim_in);
        for j in 0..dim_in {
            let col = f(&Vector::from_fn(dim_in, |i, _| if i == j { 1.0 } else { 0.0 }));
            if col.len() != dim_out {
                return Err(Error::arg(format!("linear map returns length {}, expected {dim_out}", col.len())));
            }
            m.set_column(j, &col);
        }
        let mut s = Sampler::new(&SamplerConfig::default(), 13);
        for _ in 0..16 {
            let (a, b, c) = (s.gaussian(dim_in), s.gaussian(dim_in), 10.0 * s.uniform() - 5.0);
            let (fa, fb) = (f(&a), f(&b));
            let scale = 1.0 + fa.norm() + fb.norm();
            let additive = (f(&(&a + &b)) - &fa - &fb).norm();
            let homogeneous = (f(&(&a * c)) - &fa * c).norm();
            let matrix = (&m * &a - &fa).norm();
            if additive.max(homogeneous).max(matrix) > 1e-12 * scale * (1.0 + c.abs()) {
                return Err(Error::config("map is not linear"));
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.0 * v
    }

    /// `M*` in coefficients.
    pub fn adjoint_apply(&self, s: &Vector) -> Vector {
        self.0.tr_mul(s)
    }
}

/// `Ā(t, v)` with modulus `m`, growth `‖Ā(t,v)‖ ≤ a0(t) + a1‖v‖`.
#[derive(Clone)]
pub struct BarOperator {
    pub m: f64,
    pub c0: TimeFn,
    pub c1: f64,
    pub eval: Fn1,
}

/// Clarke potential `G(t, θ, x)` on `X₀`, given by a gradient selection.
#[derive(Clone)]
pub struct PotentialG {
    pub m: f64,
    pub mbar: f64,
    pub c0: TimeFn,
    pub c1: f64,
    pub c2: f64,
    pub subgrad: Fn2,
}

/// `F(t, θ) ∈ V*`.
#[derive(Clone)]
pub struct SourceF {
    pub lipschitz: f64,
    pub c0: TimeFn,
    pub c1: f64,
    pub eval: Fn1,
}

/// `f(t, θ, y) ∈ E*`.
#[derive(Clone)]
pub struct SourceSmallF {
    pub lipschitz: f64,
    pub one_sided: f64,
    pub c0: TimeFn,
    pub c1: f64,
    pub c2: f64,
    pub eval: Fn2,
}

#[derive(Clone)]
pub struct DvhiProblem {
    pub v: Arc<DiscreteSpace>,
    pub e: Arc<DiscreteSpace>,
    pub x0: Arc<DiscreteSpace>,
    pub y0: Arc<DiscreteSpace>,
    pub op_abar: BarOperator,
    pub pot_g: PotentialG,
    pub map_m: LinearMap,
    pub map_theta: LinearMap,
    /// Convex potential; its `y` argument is ignored.
    pub pot_phi: ConvexPotentialPhi,
    pub rhs_big_f: SourceF,
    pub op_bbar: BarOperator,
    pub rhs_f: SourceSmallF,
    pub u0: Vector,
    pub theta0: Vector,
}

/// Constants emitted by [`build_system`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DvhiMapping {
    pub norm_m: f64,
    pub norm_theta: f64,
    pub ledger: Ledger,
}

impl DvhiProblem {
    /// Operator norms `‖M‖: V → X₀` and `‖ϑ‖: V → Y₀`.
    pub fn map_norms(&self) -> Result<(f64, f64)> {
        Ok((
            operator_norm(self.map_m.matrix(), self.v.gram_strong(), self.x0.gram_strong())?,
            operator_norm(self.map_theta.matrix(), self.v.gram_strong(), self.y0.gram_strong())?,
        ))
    }

    fn validate(&self, norm_m: f64) -> Result<()> {
        let shapes = [
            ("M rows", self.map_m.matrix().nrows(), self.x0.dim()),
            ("M cols", self.map_m.matrix().ncols(), self.v.dim()),
            ("theta-map rows", self.map_theta.matrix().nrows(), self.y0.dim()),
            ("theta-map cols", self.map_theta.matrix().ncols(), self.v.dim()),
            ("u0", self.u0.len(), self.v.dim()),
            ("theta0", self.theta0.len(), self.e.dim()),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::arg(format!("{name}: {got}, expected {want}")));
            }
        }
        let margins = vec![
            self.op_abar.m - self.pot_g.m * norm_m * norm_m,
            self.op_bbar.m - self.rhs_f.one_sided,
        ];
        if margins.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Gate { detail: "m_Abar > m_G·‖M‖², m_Bbar > L_os".into(), margins });
        }
        Ok(())
    }
}

/// Builds the equivalent inclusion system with `g = 0`, zero loads and no
/// history terms.
pub fn build_system(d: &DvhiProblem) -> Result<(SystemProblem, DvhiMapping)> {
    let (nm, nt) = d.map_norms()?;
    d.validate(nm)?;
    let aux = Arc::new(DiscreteSpace::euclidean(SpaceLabel::Z, 1)?);
    let q = Arc::new(DiscreteSpace::euclidean(SpaceLabel::Q, 1)?);
    let (g, bf) = (d.pot_g.clone(), d.rhs_big_f.clone());
    let abar = d.op_abar.eval.clone();
    let op_a = OperatorFamilyA::new(
        ConstantsA { m: d.op_abar.m, mbar: 0.0, a0: d.op_abar.c0.clone(), a1: 0.0, a2: d.op_abar.c1 },
        move |t, _, v| abar(t, v),
    );
    let (c0g, c0f) = (g.c0.clone(), bf.c0.clone());
    let mm = d.map_m.clone();
    let pot_j = ClarkePotentialJ::new(
        ConstantsJ {
            c0: TimeFn::new(move |t| c0g.at(t) * nm + c0f.at(t)),
            c1: g.c1 * nm + bf.c1,
            c2: 0.0,
            c3: g.c2 * nm * nm,
            m: g.m * nm * nm,
            mbar: g.mbar * nm + bf.lipschitz,
        },
        move |t, th, _, v| mm.adjoint_apply(&(g.subgrad)(t, th, &mm.apply(v))) - (bf.eval)(t, th),
    );
    let (bbar, f, vt) = (d.op_bbar.clone(), d.rhs_f.clone(), d.map_theta.clone());
    let c0b = bbar.c0.clone();
    let c0f = f.c0.clone();
    let op_b = OperatorFamilyB::new(
        ConstantsB {
            m: bbar.m - f.one_sided,
            mbar: f.lipschitz * nt,
            b0: TimeFn::new(move |t| c0b.at(t) + c0f.at(t)),
            b1: f.c2 * nt,
            b2: 0.0,
            b3: bbar.c1 + f.c1,
        },
        move |t, v, _, th| (bbar.eval)(t, th) - (f.eval)(t, th, &vt.apply(v)),
    );
    let (nv, ne) = (d.v.dim(), d.e.dim());
    let problem = SystemProblem::new(SystemParts {
        v: d.v.clone(),
        e: d.e.clone(),
        y: aux.clone(),
        z: aux,
        q,
        op_a,
        pot_j,
        pot_phi: d.pot_phi.clone(),
        op_b,
        pot_g: ClarkePotentialG::zero(ne),
        hist_r: HistoryOperator::zero(1),
        hist_r1: HistoryOperator::zero(nv),
        hist_r2: HistoryOperator::zero(1),
        hist_s: HistoryOperator::zero(1),
        load1: constant_load(Vector::zeros(nv)),
        load2: constant_load(Vector::zeros(ne)),
        w0: d.u0.clone(),
        theta0: d.theta0.clone(),
    })?;
    let ledger = problem.ledger();
    Ok((problem, DvhiMapping { norm_m: nm, norm_theta: nt, ledger }))
}

pub struct DvhiSolution {
    pub u: Trajectory,
    pub theta: Trajectory,
    pub diag: SolveDiagnostics,
    pub mapping: DvhiMapping,
}

pub fn solve_dvhi(d: &DvhiProblem, grid: &TimeGrid, cfg: &SystemConfig) -> Result<DvhiSolution> {
    let (problem, mapping) = build_system(d)?;
    let sol = solve_system(&problem, grid, cfg)?;
    Ok(DvhiSolution { u: sol.w, theta: sol.theta, diag: sol.diag, mapping })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InequalityReport {
    /// Smallest left-minus-right value over nodes and directions.
    pub min_slack: f64,
    pub worst_node: usize,
    pub directions: usize,
    pub nodes: usize,
    /// Largest `E*`-norm residual of the discrete θ-equation.
    pub theta_residual: f64,
}

/// Number of shrinking perturbations in the `G⁰` surrogate.
const G0_SAMPLES: i32 = 8;

/// Lower bound for `G⁰(t, θ, x; d)`: the largest pairing of `d` with the
/// selection at `x` and at points approaching `x` along `d`.
fn g0_surrogate(g: &PotentialG, t: f64, th: &Vector, x: &Vector, d: &Vector) -> f64 {
    let scale = 1e-6 * (1.0 + x.norm());
    let dn = d.norm();
    let base = (g.subgrad)(t, th, x).dot(d);
    if dn == 0.0 {
        return base;
    }
    (0..G0_SAMPLES).fold(base, |acc, j| {
        let p = x + d * (scale * 0.5f64.powi(j) / dn);
        acc.max((g.subgrad)(t, th, &p).dot(d))
    })
}

/// Evaluates the inequality at every node `k ≥ 1` against `n_dirs` test
/// elements `v = u(t_k) + r·d`, with the backward difference for `u'`.
pub fn check_inequality_residual(
    d: &DvhiProblem,
    u: &Trajectory,
    theta: &Trajectory,
    grid: &TimeGrid,
    n_dirs: usize,
) -> Result<InequalityReport> {
    if u.values().len() != grid.steps() + 1 || theta.values().len() != grid.steps() + 1 {
        return Err(Error::arg("trajectories do not match the grid"));
    }
    if !d.pot_phi.has_value() {
        return Err(Error::arg("convex potential has no value function"));
    }
    let x = d.e.pivot(SpaceLabel::X)?;
    let dt = grid.dt();
    let dummy = Vector::zeros(1);
    let mut s = Sampler::new(&SamplerConfig::default(), 14);
    let mut report = InequalityReport {
        min_slack: f64::INFINITY,
        worst_node: 0,
        directions: n_dirs,
        nodes: grid.steps(),
        theta_residual: 0.0,
    };
    for k in 1..=grid.steps() {
        let t = grid.node(k);
        let (uk, th) = (u.value(k), theta.value(k));
        let du = d.v.gram_weak() * (uk - u.value(k - 1)) / dt;
        let smooth = du + (d.op_abar.eval)(t, uk) - (d.rhs_big_f.eval)(t, th);
        let mu = d.map_m.apply(uk);
        let phi_u = d.pot_phi.value(t, th, &dummy, uk).unwrap_or(0.0);
        for _ in 0..n_dirs {
            let dir = s.direction(&d.v) * s.radius();
            let v = uk + &dir;
            let slack = smooth.dot(&dir)
                + g0_surrogate(&d.pot_g, t, th, &mu, &d.map_m.apply(&dir))
                + d.pot_phi.value(t, th, &dummy, &v).unwrap_or(0.0)
                - phi_u;
            if slack < report.min_slack {
                report.min_slack = slack;
                report.worst_node = k;
            }
        }
        let dth = x.gram_strong() * (th - theta.value(k - 1)) / dt;
        let r = dth + (d.op_bbar.eval)(t, th) - (d.rhs_f.eval)(t, th, &d.map_theta.apply(uk));
        report.theta_residual = report.theta_residual.max(d.e.dual_norm_unchecked(&r));
    }
    if n_dirs == 0 || grid.steps() == 0 {
        report.min_slack = 0.0;
    }
    Ok(report)
}

/// Parameters of the bundled inequality problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DvhiBenchmark {
    pub m_abar: f64,
    pub m_g: f64,
    pub coupling: f64,
    pub friction: f64,
    pub m_bbar: f64,
    pub one_sided: f64,
    pub lipschitz_f: f64,
    pub seed: u64,
}

impl Default for DvhiBenchmark {
    fn default() -> Self {
        Self {
            m_abar: 2.0,
            m_g: 0.5,
            coupling: 0.3,
            friction: 0.2,
            m_bbar: 2.0,
            one_sided: 0.5,
            lipschitz_f: 1.0,
            seed: 11,
        }
    }
}

fn clamp1(v: &Vector) -> Vector {
    v.map(|x| x.clamp(-1.0, 1.0))
}

/// `dim V = 3`, `dim E = dim X₀ = dim Y₀ = 2`, with `f(t, θ, y) = L_f·y + ...`.
pub fn dvhi_benchmark(p: &DvhiBenchmark) -> Result<DvhiProblem> {
    let (nv, ne) = (3, 2);
    let mut s = Sampler::new(&SamplerConfig { seed: p.seed, ..Default::default() }, 15);
    let mut mat = |r: usize, c: usize, norm: f64| {
        let g = Matrix::from_iterator(r, c, s.gaussian(r * c).iter().copied());
        let n = crate::linalg::spectral_norm(&g);
        g * (norm / n)
    };
    let m = mat(ne, nv, 1.2);
    let th_map = mat(ne, nv, 1.0);
    let pm = mat(ne, ne, 1.0);
    let km = mat(nv, ne, 1.0);
    let fm = mat(nv, ne, 1.0);
    let skew = {
        let g = mat(nv, nv, 1.0);
        (&g - g.transpose()) * 0.25
    };
    let b_vec = Vector::from_fn(nv, |i, _| 1.0 - 0.5 * i as f64);
    let c_vec = Vector::from_fn(ne, |i, _| 0.5 + i as f64);
    let sk = crate::linalg::spectral_norm(&skew);
    let v = Arc::new(DiscreteSpace::euclidean(SpaceLabel::V, nv)?);
    let e = Arc::new(DiscreteSpace::euclidean(SpaceLabel::E, ne)?);
    let (ma, mg, kg, g0) = (p.m_abar, p.m_g, p.coupling, p.friction);
    let (mb, los, lf) = (p.m_bbar, p.one_sided, p.lipschitz_f);
    let weights = move |th: &Vector| (&fm * th).map(|x| g0 * (1.0 + 0.5 * x.tanh()));
    let wp = weights.clone();
    let bn = b_vec.norm();
    let cn = c_vec.norm();
    Ok(DvhiProblem {
        v,
        e,
        x0: Arc::new(DiscreteSpace::euclidean(SpaceLabel::Y, ne)?),
        y0: Arc::new(DiscreteSpace::euclidean(SpaceLabel::Y, ne)?),
        op_abar: BarOperator {
            m: ma,
            c0: TimeFn::constant(0.0),
            c1: ma + 0.5 + sk,
            eval: Arc::new(move |_, v| v * ma + v.map(|x| 0.5 * x.tanh()) + &skew * v),
        },
        pot_g: PotentialG {
            m: mg,
            mbar: kg,
            c0: TimeFn::constant(0.0),
            c1: kg,
            c2: mg,
            subgrad: Arc::new(move |_, th, x| clamp1(x) * -mg + (&pm * th).map(|y| kg * y.tanh())),
        },
        map_m: LinearMap::from_matrix(m),
        map_theta: LinearMap::from_matrix(th_map),
        pot_phi: ConvexPotentialPhi::new(
            crate::operators::ConstantsPhi {
                c0: TimeFn::constant(1.5 * g0 * (nv as f64).sqrt()),
                m: 0.5 * g0,
                ..Default::default()
            },
            move |_, th, _, rho, x| {
                let w = wp(th);
                Vector::from_fn(x.len(), |i, _| {
                    let (a, r) = (x[i], rho * w[i]);
                    a.signum() * (a.abs() - r).max(0.0)
                })
            },
        )
        .with_value(move |_, th, _, v| weights(th).dot(&v.abs())),
        rhs_big_f: SourceF {
            lipschitz: kg,
            c0: TimeFn::constant(bn),
            c1: kg,
            eval: Arc::new(move |t, th| &b_vec * t.sin() + (&km * th).map(|y| kg * y.sin())),
        },
        op_bbar: BarOperator {
            m: mb,
            c0: TimeFn::constant(0.0),
            c1: mb,
            eval: Arc::new(move |_, th| th * mb),
        },
        rhs_f: SourceSmallF {
            lipschitz: lf,
            one_sided: los,
            c0: TimeFn::constant(cn),
            c1: los,
            c2: lf,
            eval: Arc::new(move |t, th, y| y * lf + clamp1(th) * los + &c_vec * t.cos()),
        },
        u0: Vector::from_fn(nv, |i, _| 0.5 - 0.3 * i as f64),
        theta0: Vector::from_fn(ne, |i, _| 1.0 - i as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::solve_monolithic_oracle;
    use proptest::prelude::*;

    fn decoupled() -> DvhiProblem {
        let v = Arc::new(DiscreteSpace::euclidean(SpaceLabel::V, 1).unwrap());
        let e = Arc::new(DiscreteSpace::euclidean(SpaceLabel::E, 1).unwrap());
        DvhiProblem {
            x0: v.clone(),
            y0: v.clone(),
            v,
            e,
            op_abar: BarOperator { m: 1.0, c0: TimeFn::constant(0.0), c1: 1.0, eval: Arc::new(|_, v| v.clone()) },
            pot_g: PotentialG {
                m: 0.0,
                mbar: 0.0,
                c0: TimeFn::constant(0.0),
                c1: 0.0,
                c2: 0.0,
                subgrad: Arc::new(|_, _, x| Vector::zeros(x.len())),
            },
            map_m: LinearMap::from_matrix(Matrix::identity(1, 1)),
            map_theta: LinearMap::from_matrix(Matrix::identity(1, 1)),
            pot_phi: ConvexPotentialPhi::zero(),
            rhs_big_f: SourceF {
                lipschitz: 0.0,
                c0: TimeFn::constant(0.0),
                c1: 0.0,
                eval: Arc::new(|_, _| Vector::zeros(1)),
            },
            op_bbar: BarOperator { m: 1.0, c0: TimeFn::constant(0.0), c1: 1.0, eval: Arc::new(|_, th| th.clone()) },
            rhs_f: SourceSmallF {
                lipschitz: 0.0,
                one_sided: 0.0,
                c0: TimeFn::constant(0.0),
                c1: 0.0,
                c2: 0.0,
                eval: Arc::new(|_, _, _| Vector::zeros(1)),
            },
            u0: Vector::from_element(1, 1.0),
            theta0: Vector::from_element(1, 1.0),
        }
    }

    fn with_constants(d: &DvhiProblem, mg: f64, mgbar: f64, lf_big: f64, mb: f64, los: f64, lf: f64) -> DvhiProblem {
        let mut d = d.clone();
        d.pot_g.m = mg;
        d.pot_g.mbar = mgbar;
        d.rhs_big_f.lipschitz = lf_big;
        d.op_bbar.m = mb;
        d.rhs_f.one_sided = los;
        d.rhs_f.lipschitz = lf;
        d
    }

    #[test]
    fn constant_mapping_examples() {
        let mut d = with_constants(&decoupled(), 1.0, 3.0, 5.0, 2.0, 0.5, 1.0);
        d.op_abar.m = 10.0;
        d.map_m = LinearMap::from_matrix(Matrix::from_element(1, 1, 2.0));
        d.map_theta = LinearMap::from_matrix(Matrix::from_element(1, 1, 3.0));
        let (_, map) = build_system(&d).unwrap();
        assert!((map.norm_m - 2.0).abs() < 1e-12 && (map.norm_theta - 3.0).abs() < 1e-12);
        let l = map.ledger;
        assert!((l.m_j - 4.0).abs() < 1e-11 && (l.mbar_j - 11.0).abs() < 1e-11);
        assert_eq!((l.m_b, l.m_a, l.mbar_a, l.m_g), (1.5, 10.0, 0.0, 0.0));
        assert!((l.mbar_b - 3.0).abs() < 1e-11);
    }

    #[test]
    fn smooth_gradient_only() {
        let mut d = decoupled();
        d.rhs_big_f.eval = Arc::new(|t, _| Vector::from_element(1, t + 1.0));
        let (p, map) = build_system(&d).unwrap();
        assert_eq!(map.ledger.m_j, 0.0);
        let s = p.pot_j.subgrad(0.5, &Vector::zeros(1), &Vector::zeros(1), &Vector::from_element(1, 3.0));
        assert_eq!(s[0], -1.5);
    }

    #[test]
    fn gate_rejects_violation() {
        let mut d = with_constants(&decoupled(), 1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        d.map_m = LinearMap::from_matrix(Matrix::from_element(1, 1, 1.5));
        assert!(matches!(build_system(&d), Err(Error::Gate { .. })));
        let d = with_constants(&decoupled(), 0.0, 0.0, 0.0, 1.0, 1.0, 0.0);
        assert!(matches!(build_system(&d), Err(Error::Gate { .. })));
    }

    #[test]
    fn decoupled_decays() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let sol = solve_dvhi(&decoupled(), &g, &SystemConfig::default()).unwrap();
        for k in 0..=16 {
            let want = (1.0 + g.dt()).powi(-(k as i32));
            assert!((sol.u.value(k)[0] - want).abs() < 1e-12);
            assert!((sol.theta.value(k)[0] - want).abs() < 1e-12);
        }
        let r = check_inequality_residual(&decoupled(), &sol.u, &sol.theta, &g, 16).unwrap();
        assert!(r.min_slack >= -1e-8 && r.theta_residual < 1e-8, "{r:?}");
    }

    #[test]
    fn zero_data_zero_solution() {
        let mut d = decoupled();
        d.u0 = Vector::zeros(1);
        d.theta0 = Vector::zeros(1);
        let g = TimeGrid::new(1.0, 8).unwrap();
        let sol = solve_dvhi(&d, &g, &SystemConfig::default()).unwrap();
        assert!(sol.u.values().iter().chain(sol.theta.values()).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn linear_map_check() {
        assert!(LinearMap::from_fn(2, 1, |v| Vector::from_element(1, v[0] - 2.0 * v[1])).is_ok());
        assert!(LinearMap::from_fn(2, 1, |v| Vector::from_element(1, v[0] + 1.0)).is_err());
        assert!(LinearMap::from_fn(1, 1, |v| v.map(|x| x * x)).is_err());
    }

    #[test]
    fn benchmark_matches_oracle_and_inequality() {
        let d = dvhi_benchmark(&DvhiBenchmark::default()).unwrap();
        let g = TimeGrid::new(1.0, 32).unwrap();
        let cfg = SystemConfig::default();
        let sol = solve_dvhi(&d, &g, &cfg).unwrap();
        let (p, _) = build_system(&d).unwrap();
        let (w, th) = solve_monolithic_oracle(&p, &g, &cfg).unwrap();
        let rel = crate::system::relative_distance(&sol.u, &sol.theta, &w, &th).unwrap();
        assert!(rel < 1e-6, "{rel}");
        let r = check_inequality_residual(&d, &sol.u, &sol.theta, &g, 16).unwrap();
        assert!(r.min_slack >= -1e-6 && r.theta_residual < 1e-6, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ledger_mapping_is_exact(
            mg in 0.0f64..2.0, mgbar in 0.0f64..3.0, lfb in 0.01f64..5.0,
            los in 0.01f64..1.0, lf in 0.01f64..4.0, scale in 0.1f64..2.0, tscale in 0.1f64..3.0,
        ) {
            let mut d = with_constants(&decoupled(), mg, mgbar, lfb, los + 1.0, los, lf);
            d.map_m = LinearMap::from_matrix(Matrix::from_element(1, 1, scale));
            d.map_theta = LinearMap::from_matrix(Matrix::from_element(1, 1, tscale));
            d.op_abar.m = mg * scale * scale + 0.5;
            let (_, map) = build_system(&d).unwrap();
            let (nm, nt) = (map.norm_m, map.norm_theta);
            prop_assert_eq!(map.ledger.m_j, mg * nm * nm);
            prop_assert_eq!(map.ledger.mbar_j, mgbar * nm + lfb);
            prop_assert_eq!(map.ledger.m_b, los + 1.0 - los);
            prop_assert_eq!(map.ledger.mbar_b, lf * nt);
            prop_assert!((nm - scale).abs() < 1e-12 * scale && (nt - tscale).abs() < 1e-12 * tscale);
        }
    }
}
