//! The coupled system solved by freezing `(λ, ξ, η, ζ)`, solving the
//! `w`-inclusion and then the `θ`-inclusion, and iterating the resulting map
//! `F(λ, ξ, η, ζ) = (θ, R₁w, Rw, Sw)` to its fixed point.
//!
//! A node-by-node solver is provided alongside: it resolves the `(w_k, θ_k)`
//! coupling at every node with history frozen from earlier nodes. With
//! Jacobi sweeps it serves as the monolithic oracle; with Gauss–Seidel sweeps
//! it is the staggered mode.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    ClarkePotentialG, ClarkePotentialJ, ConvexPotentialPhi, HistoryOperator, Ledger, OperatorFamilyA,
    OperatorFamilyB,
};
use crate::probes::{
    check_smallness, probe_four_point, probe_history_lipschitz, probe_monotone, MonotoneTarget, ProbeReport, Sampler,
    SamplerConfig, SmallnessReport,
};
use crate::spaces::{bochner_norm_sq, DiscreteSpace, SpaceLabel, TimeGrid, Trajectory};
use crate::stepper::{
    solve_inclusion, solve_step, with_node, InclusionRun, Node, SingleInclusionProblem, StepSolveConfig,
    StepSystem,
};
use crate::Vector;

/// Vector-valued function of time.
pub type TimeVec = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// Constant-in-time vector.
pub fn constant_load(v: Vector) -> TimeVec {
    Arc::new(move |_| v.clone())
}

/// Everything that defines an instance; spaces `X` and `V*` are derived.
#[derive(Clone)]
pub struct SystemParts {
    pub v: Arc<DiscreteSpace>,
    pub e: Arc<DiscreteSpace>,
    pub y: Arc<DiscreteSpace>,
    pub z: Arc<DiscreteSpace>,
    pub q: Arc<DiscreteSpace>,
    pub op_a: OperatorFamilyA,
    pub pot_j: ClarkePotentialJ,
    pub pot_phi: ConvexPotentialPhi,
    pub op_b: OperatorFamilyB,
    pub pot_g: ClarkePotentialG,
    /// Into `Y`.
    pub hist_r: HistoryOperator,
    /// Into `V*`.
    pub hist_r1: HistoryOperator,
    /// Into `Q`.
    pub hist_r2: HistoryOperator,
    /// Into `Z`.
    pub hist_s: HistoryOperator,
    pub load1: TimeVec,
    pub load2: TimeVec,
    pub w0: Vector,
    pub theta0: Vector,
}

#[derive(Clone)]
pub struct SystemProblem {
    pub v: Arc<DiscreteSpace>,
    pub e: Arc<DiscreteSpace>,
    /// Pivot space of `E`, normed by the weak Gram of `E`.
    pub x: Arc<DiscreteSpace>,
    /// Dual of `V`.
    pub v_dual: Arc<DiscreteSpace>,
    pub y: Arc<DiscreteSpace>,
    pub z: Arc<DiscreteSpace>,
    pub q: Arc<DiscreteSpace>,
    pub op_a: OperatorFamilyA,
    pub pot_j: ClarkePotentialJ,
    pub pot_phi: ConvexPotentialPhi,
    pub op_b: OperatorFamilyB,
    pub pot_g: ClarkePotentialG,
    pub hist_r: HistoryOperator,
    pub hist_r1: HistoryOperator,
    pub hist_r2: HistoryOperator,
    pub hist_s: HistoryOperator,
    pub load1: TimeVec,
    pub load2: TimeVec,
    pub w0: Vector,
    pub theta0: Vector,
}

impl SystemProblem {
    pub fn new(p: SystemParts) -> Result<Self> {
        let x = Arc::new(p.e.pivot(SpaceLabel::X)?);
        let v_dual = Arc::new(p.v.dual(SpaceLabel::VDual)?);
        let (nv, ne) = (p.v.dim(), p.e.dim());
        let checks = [
            ("R", p.hist_r.target_dim(), p.y.dim()),
            ("R1", p.hist_r1.target_dim(), nv),
            ("R2", p.hist_r2.target_dim(), p.q.dim()),
            ("S", p.hist_s.target_dim(), p.z.dim()),
            ("w0", p.w0.len(), nv),
            ("theta0", p.theta0.len(), ne),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::arg(format!("{name}: dimension {got}, expected {want}")));
            }
        }
        let (zv, ze) = (Vector::zeros(nv), Vector::zeros(ne));
        let (zy, zz, zq) = (Vector::zeros(p.y.dim()), Vector::zeros(p.z.dim()), Vector::zeros(p.q.dim()));
        let outputs = [
            ("A", p.op_a.eval(0.0, &ze, &zv).len(), nv),
            ("J", p.pot_j.subgrad(0.0, &ze, &zz, &zv).len(), nv),
            ("phi prox", p.pot_phi.prox(0.0, &ze, &zy, 1.0, &zv).len(), nv),
            ("B", p.op_b.eval(0.0, &zv, &zq, &ze).len(), ne),
            ("g", p.pot_g.subgrad(0.0, &zv, &ze).len(), ne),
            ("h1", (p.load1)(0.0).len(), nv),
            ("h2", (p.load2)(0.0).len(), ne),
        ];
        for (name, got, want) in outputs {
            if got != want {
                return Err(Error::arg(format!("{name} returns length {got}, expected {want}")));
            }
        }
        Ok(Self {
            v: p.v,
            e: p.e,
            x,
            v_dual,
            y: p.y,
            z: p.z,
            q: p.q,
            op_a: p.op_a,
            pot_j: p.pot_j,
            pot_phi: p.pot_phi,
            op_b: p.op_b,
            pot_g: p.pot_g,
            hist_r: p.hist_r,
            hist_r1: p.hist_r1,
            hist_r2: p.hist_r2,
            hist_s: p.hist_s,
            load1: p.load1,
            load2: p.load2,
            w0: p.w0,
            theta0: p.theta0,
        })
    }

    pub fn ledger(&self) -> Ledger {
        Ledger {
            m_a: self.op_a.constants.m,
            mbar_a: self.op_a.constants.mbar,
            m_j: self.pot_j.constants.m,
            mbar_j: self.pot_j.constants.mbar,
            m_phi: self.pot_phi.constants.m,
            m_b: self.op_b.constants.m,
            mbar_b: self.op_b.constants.mbar,
            m_g: self.pot_g.constants.m,
            mbar_g: self.pot_g.constants.mbar,
            c_r: self.hist_r.lipschitz(),
            c_r1: self.hist_r1.lipschitz(),
            c_r2: self.hist_r2.lipschitz(),
            c_s: self.hist_s.lipschitz(),
        }
    }

    pub fn smallness(&self) -> Result<SmallnessReport> {
        check_smallness(&self.ledger())
    }

    /// Samples every declared monotonicity, coupling and history constant.
    pub fn probe(&self, grid: &TimeGrid, cfg: &SamplerConfig) -> Result<Vec<ProbeReport>> {
        let mut out = Vec::new();
        let a = |t: f64, p: &[Vector], v: &Vector| self.op_a.eval(t, &p[0], v);
        let ca = &self.op_a.constants;
        out.extend(probe_monotone(
            &MonotoneTarget {
                label: "A",
                state: &self.v,
                params: vec![&self.x],
                eval: &a,
                modulus: ca.m,
                coupling: ca.mbar,
                relaxed: false,
            },
            cfg,
        )?);
        let j = |t: f64, p: &[Vector], v: &Vector| self.pot_j.subgrad(t, &p[0], &p[1], v);
        let cj = &self.pot_j.constants;
        out.extend(probe_monotone(
            &MonotoneTarget {
                label: "J",
                state: &self.v,
                params: vec![&self.x, &self.z],
                eval: &j,
                modulus: -cj.m,
                coupling: cj.mbar,
                relaxed: true,
            },
            cfg,
        )?);
        if self.pot_phi.has_value() {
            let phi = |t: f64, p: &[Vector], v: &Vector| self.pot_phi.value(t, &p[0], &p[1], v).unwrap_or(0.0);
            out.push(probe_four_point("phi", &self.v, &[&self.x, &self.y], &phi, self.pot_phi.constants.m, cfg));
        }
        let b = |t: f64, p: &[Vector], th: &Vector| self.op_b.eval(t, &p[0], &p[1], th);
        let cb = &self.op_b.constants;
        out.extend(probe_monotone(
            &MonotoneTarget {
                label: "B",
                state: &self.e,
                params: vec![&self.v, &self.q],
                eval: &b,
                modulus: cb.m,
                coupling: cb.mbar,
                relaxed: false,
            },
            cfg,
        )?);
        let g = |t: f64, p: &[Vector], th: &Vector| self.pot_g.subgrad(t, &p[0], th);
        let cg = &self.pot_g.constants;
        out.extend(probe_monotone(
            &MonotoneTarget {
                label: "g",
                state: &self.e,
                params: vec![&self.v],
                eval: &g,
                modulus: -cg.m,
                coupling: cg.mbar,
                relaxed: true,
            },
            cfg,
        )?);
        let targets: [(&str, &HistoryOperator, &DiscreteSpace, bool); 4] = [
            ("R", &self.hist_r, &self.y, false),
            ("R1", &self.hist_r1, &self.v, true),
            ("R2", &self.hist_r2, &self.q, false),
            ("S", &self.hist_s, &self.z, false),
        ];
        for (label, op, space, dual) in targets {
            if op.is_zero() {
                continue;
            }
            let norm = |v: &Vector| {
                if dual {
                    space.dual_norm_unchecked(v)
                } else {
                    space.strong_norm_unchecked(v)
                }
            };
            out.push(probe_history_lipschitz(label, op, &self.v, &norm, grid, cfg)?);
        }
        Ok(out)
    }

    fn w_lipschitz(&self, dt: f64) -> f64 {
        self.v.lambda_max_weak() / dt
            + (self.op_a.constants.a2 + self.pot_j.constants.c3) * self.v.lambda_max_strong()
    }

    fn theta_lipschitz(&self, dt: f64) -> f64 {
        self.e.lambda_max_weak() / dt
            + (self.op_b.constants.b3 + self.pot_g.constants.c2) * self.e.lambda_max_strong()
    }

    fn loads(&self, grid: &TimeGrid) -> (Vec<Vector>, Vec<Vector>) {
        grid.nodes().map(|t| ((self.load1)(t), (self.load2)(t))).unzip()
    }
}

/// The quadruple iterated by the fixed-point map.
#[derive(Debug, Clone)]
pub struct FrozenData {
    /// In `X`.
    pub lambda: Trajectory,
    /// In `V*`.
    pub xi: Trajectory,
    /// In `Y`.
    pub eta: Trajectory,
    /// In `Z`.
    pub zeta: Trajectory,
}

impl FrozenData {
    /// `(constant θ₀, 0, 0, 0)`.
    pub fn initial(problem: &SystemProblem, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            lambda: Trajectory::constant(problem.x.clone(), *grid, &problem.theta0)?,
            xi: Trajectory::zeros(problem.v_dual.clone(), *grid),
            eta: Trajectory::zeros(problem.y.clone(), *grid),
            zeta: Trajectory::zeros(problem.z.clone(), *grid),
        })
    }

    /// Gaussian values of unit scale at every node.
    pub fn random(problem: &SystemProblem, grid: &TimeGrid, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig { seed, ..Default::default() };
        let mut s = Sampler::new(&cfg, 11);
        let mut traj = |space: &Arc<DiscreteSpace>| {
            let vals = (0..=grid.steps()).map(|_| s.gaussian(space.dim())).collect();
            Trajectory::new(space.clone(), *grid, vals)
        };
        Ok(Self {
            lambda: traj(&problem.x)?,
            xi: traj(&problem.v_dual)?,
            eta: traj(&problem.y)?,
            zeta: traj(&problem.z)?,
        })
    }

    pub fn sub(&self, other: &FrozenData) -> Result<FrozenData> {
        Ok(FrozenData {
            lambda: self.lambda.sub(&other.lambda)?,
            xi: self.xi.sub(&other.xi)?,
            eta: self.eta.sub(&other.eta)?,
            zeta: self.zeta.sub(&other.zeta)?,
        })
    }

    /// `sqrt(Σ_components ‖·‖²_{weight})` on `X × V* × Y × Z`.
    pub fn bielecki_norm(&self, weight: f64) -> Result<f64> {
        Ok((bochner_norm_sq(&self.lambda, weight)?
            + bochner_norm_sq(&self.xi, weight)?
            + bochner_norm_sq(&self.eta, weight)?
            + bochner_norm_sq(&self.zeta, weight)?)
        .sqrt())
    }

    pub fn grid(&self) -> TimeGrid {
        self.lambda.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    /// Whole-trajectory fixed-point iteration.
    #[default]
    ProofFaithful,
    /// Coupling resolved node by node with Gauss–Seidel sweeps.
    Staggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub tol: f64,
    pub max_picard: usize,
    pub bielecki_weight: Option<f64>,
    pub mode: SolveMode,
    pub step: StepSolveConfig,
    /// Tolerance of the node-level coupling sweeps.
    pub coupling_tol: f64,
    pub max_coupling: usize,
    /// Relaxation of the Jacobi sweeps in the oracle.
    pub oracle_damping: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_picard: 200,
            bielecki_weight: None,
            mode: SolveMode::ProofFaithful,
            step: StepSolveConfig::default(),
            coupling_tol: 1e-12,
            max_coupling: 2000,
            oracle_damping: 0.9,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !(self.tol > 0.0) || !(self.coupling_tol > 0.0) {
            return Err(Error::config("tolerances must be positive"));
        }
        if self.max_picard == 0 || self.max_coupling == 0 {
            return Err(Error::config("iteration limits must be at least 1"));
        }
        if let Some(w) = self.bielecki_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config("bielecki_weight must be nonnegative"));
            }
        }
        if !(self.oracle_damping > 0.0 && self.oracle_damping <= 1.0) {
            return Err(Error::config("oracle_damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SolveDiagnostics {
    pub mode: SolveMode,
    pub picard_iters: usize,
    pub contraction_ratios: Vec<f64>,
    pub increments: Vec<f64>,
    pub bielecki_weight: f64,
    pub final_increment: f64,
    /// Largest accepted step residual of each pass.
    pub per_iteration_residuals: Vec<f64>,
    pub step3_constant: f64,
    pub margins: (f64, f64),
    pub inner_iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub w: Trajectory,
    pub theta: Trajectory,
    pub frozen: FrozenData,
    pub diag: SolveDiagnostics,
}

/// `w`-inclusion with `(λ, ξ, η, ζ)` frozen.
pub fn solve_frozen_w(
    problem: &SystemProblem,
    frozen: &FrozenData,
    grid: &TimeGrid,
    cfg: &StepSolveConfig,
) -> Result<InclusionRun> {
    if frozen.grid() != *grid {
        return Err(Error::arg("frozen data lives on a different grid"));
    }
    let lambda = Arc::new(frozen.lambda.values().to_vec());
    let eta = Arc::new(frozen.eta.values().to_vec());
    let zeta = Arc::new(frozen.zeta.values().to_vec());
    let op_a = problem.op_a.clone();
    let pot_j = problem.pot_j.clone();
    let pot_phi = problem.pot_phi.clone();
    let load: Vec<Vector> = grid
        .nodes()
        .zip(frozen.xi.values())
        .map(|(t, xi)| (problem.load1)(t) - xi)
        .collect();
    let lam = lambda.clone();
    let operator = Arc::new(move |n: Node, u: &Vector| op_a.eval(n.t, &lam[n.index], u));
    let lam = lambda.clone();
    let clarke = Arc::new(move |n: Node, u: &Vector| pot_j.subgrad(n.t, &lam[n.index], &zeta[n.index], u));
    let lam = lambda;
    let prox = Arc::new(move |n: Node, rho: f64, x: &Vector| pot_phi.prox(n.t, &lam[n.index], &eta[n.index], rho, x));
    let single = SingleInclusionProblem {
        space: problem.v.clone(),
        operator,
        m_operator: problem.op_a.constants.m,
        operator_growth: problem.op_a.constants.a2,
        convex_part: Some(prox),
        clarke_part: Some(clarke),
        m_clarke: problem.pot_j.constants.m,
        clarke_growth: problem.pot_j.constants.c3,
        load,
        initial: problem.w0.clone(),
    };
    solve_inclusion(&single, grid, cfg).map_err(|e| e.annotate("frozen-w"))
}

/// `θ`-inclusion driven by a given `w`.
pub fn solve_frozen_theta(
    problem: &SystemProblem,
    w: &Trajectory,
    grid: &TimeGrid,
    cfg: &StepSolveConfig,
) -> Result<InclusionRun> {
    if w.grid() != *grid {
        return Err(Error::arg("w lives on a different grid"));
    }
    let wbar = Arc::new(problem.hist_r2.eval_all(grid, w.values())?);
    let wv = Arc::new(w.values().to_vec());
    let op_b = problem.op_b.clone();
    let pot_g = problem.pot_g.clone();
    let load: Vec<Vector> = grid.nodes().map(|t| (problem.load2)(t)).collect();
    let ws = wv.clone();
    let operator = Arc::new(move |n: Node, th: &Vector| op_b.eval(n.t, &ws[n.index], &wbar[n.index], th));
    let clarke = Arc::new(move |n: Node, th: &Vector| pot_g.subgrad(n.t, &wv[n.index], th));
    let single = SingleInclusionProblem {
        space: problem.e.clone(),
        operator,
        m_operator: problem.op_b.constants.m,
        operator_growth: problem.op_b.constants.b3,
        convex_part: None,
        clarke_part: Some(clarke),
        m_clarke: problem.pot_g.constants.m,
        clarke_growth: problem.pot_g.constants.c2,
        load,
        initial: problem.theta0.clone(),
    };
    solve_inclusion(&single, grid, cfg).map_err(|e| e.annotate("frozen-θ"))
}

/// Result of one application of the fixed-point map.
#[derive(Debug, Clone)]
pub struct FPass {
    pub image: FrozenData,
    pub w: InclusionRun,
    pub theta: InclusionRun,
}

fn history_trajectory(
    op: &HistoryOperator,
    space: &Arc<DiscreteSpace>,
    grid: &TimeGrid,
    w: &Trajectory,
) -> Result<Trajectory> {
    Trajectory::new(space.clone(), *grid, op.eval_all(grid, w.values())?)
}

/// `F(λ, ξ, η, ζ)` together with the intermediate solves.
pub fn apply_f_full(
    problem: &SystemProblem,
    frozen: &FrozenData,
    grid: &TimeGrid,
    cfg: &StepSolveConfig,
) -> Result<FPass> {
    let w = solve_frozen_w(problem, frozen, grid, cfg)?;
    let theta = solve_frozen_theta(problem, &w.trajectory, grid, cfg)?;
    let image = FrozenData {
        lambda: theta.trajectory.with_space(problem.x.clone())?,
        xi: history_trajectory(&problem.hist_r1, &problem.v_dual, grid, &w.trajectory)?,
        eta: history_trajectory(&problem.hist_r, &problem.y, grid, &w.trajectory)?,
        zeta: history_trajectory(&problem.hist_s, &problem.z, grid, &w.trajectory)?,
    };
    Ok(FPass { image, w, theta })
}

/// `F(λ, ξ, η, ζ) = (θ, R₁w, Rw, Sw)`.
pub fn apply_f(
    problem: &SystemProblem,
    frozen: &FrozenData,
    grid: &TimeGrid,
    cfg: &StepSolveConfig,
) -> Result<FrozenData> {
    problem.smallness()?.require()?;
    Ok(apply_f_full(problem, frozen, grid, cfg)?.image)
}

fn max_residual(run: &InclusionRun) -> f64 {
    run.steps.iter().map(|s| s.residual).fold(0.0, f64::max)
}

fn inner_iterations(run: &InclusionRun) -> usize {
    run.steps.iter().map(|s| s.iterations).sum()
}

/// Solves the coupled system in the mode selected by `cfg`.
pub fn solve_system(problem: &SystemProblem, grid: &TimeGrid, cfg: &SystemConfig) -> Result<SystemSolution> {
    match cfg.mode {
        SolveMode::ProofFaithful => solve_system_from(problem, grid, cfg, FrozenData::initial(problem, grid)?),
        SolveMode::Staggered => solve_nodewise(problem, grid, cfg, Sweep::GaussSeidel),
    }
}

/// Fixed-point iteration from a given start.
pub fn solve_system_from(
    problem: &SystemProblem,
    grid: &TimeGrid,
    cfg: &SystemConfig,
    start: FrozenData,
) -> Result<SystemSolution> {
    cfg.validate()?;
    let ledger = problem.ledger();
    let gate = check_smallness(&ledger)?;
    gate.require()?;
    let horizon = grid.horizon();
    let weight = cfg.bielecki_weight.unwrap_or_else(|| ledger.bielecki_weight(horizon));
    let mut x = start;
    let mut increments = Vec::new();
    let mut residuals = Vec::new();
    let mut inner = 0usize;
    loop {
        let pass = apply_f_full(problem, &x, grid, &cfg.step)?;
        inner += inner_iterations(&pass.w) + inner_iterations(&pass.theta);
        residuals.push(max_residual(&pass.w).max(max_residual(&pass.theta)));
        let diff = pass.image.sub(&x)?;
        let inc = diff.bielecki_norm(weight)?;
        let scale = x.bielecki_norm(weight)?.max(1.0);
        // a large weight hides late-time error, so the plain norm must settle too
        let plain = diff.bielecki_norm(0.0)? <= cfg.tol * x.bielecki_norm(0.0)?.max(1.0);
        increments.push(inc);
        x = pass.image;
        if inc <= cfg.tol * scale && plain {
            break;
        }
        if increments.len() >= cfg.max_picard {
            return Err(Error::MaxIterations { iterations: increments.len(), increment: inc });
        }
    }
    // recompute (w, θ) at the accepted fixed point
    let last = apply_f_full(problem, &x, grid, &cfg.step)?;
    inner += inner_iterations(&last.w) + inner_iterations(&last.theta);
    let contraction_ratios = increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let diag = SolveDiagnostics {
        mode: SolveMode::ProofFaithful,
        picard_iters: increments.len(),
        contraction_ratios,
        final_increment: *increments.last().unwrap(),
        increments,
        bielecki_weight: weight,
        per_iteration_residuals: residuals,
        step3_constant: ledger.step3_constant(horizon),
        margins: (gate.margins[0], gate.margins[1]),
        inner_iterations: inner,
        warnings: gate.warnings,
    };
    Ok(SystemSolution {
        w: last.w.trajectory,
        theta: last.theta.trajectory,
        frozen: x,
        diag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Jacobi,
    GaussSeidel,
}

struct NodeHistory {
    xi: Vector,
    eta: Vector,
    zeta: Vector,
    wbar: Vector,
}

#[allow(clippy::too_many_arguments)]
fn w_step(
    problem: &SystemProblem,
    node: Node,
    dt: f64,
    prev: &Vector,
    load: &Vector,
    theta: &Vector,
    hist: &NodeHistory,
    guess: &Vector,
    cfg: &StepSolveConfig,
) -> Result<Vector> {
    let t = node.t;
    let forward = |u: &Vector| problem.op_a.eval(t, theta, u) + problem.pot_j.subgrad(t, theta, &hist.zeta, u);
    let prox = |rho: f64, x: &Vector| problem.pot_phi.prox(t, theta, &hist.eta, rho, x);
    let rhs = load - &hist.xi;
    let sys = StepSystem {
        mass: problem.v.gram_weak(),
        dt,
        prev,
        load: &rhs,
        forward: &forward,
        prox: Some(&prox),
        lipschitz: problem.w_lipschitz(dt),
    };
    solve_step(&sys, guess, cfg)
        .map(|o| o.value)
        .map_err(|e| with_node(e.annotate("node w-block"), node.index))
}

#[allow(clippy::too_many_arguments)]
fn theta_step(
    problem: &SystemProblem,
    node: Node,
    dt: f64,
    prev: &Vector,
    load: &Vector,
    w: &Vector,
    hist: &NodeHistory,
    guess: &Vector,
    cfg: &StepSolveConfig,
) -> Result<Vector> {
    let t = node.t;
    let forward = |th: &Vector| problem.op_b.eval(t, w, &hist.wbar, th) + problem.pot_g.subgrad(t, w, th);
    let sys = StepSystem {
        mass: problem.e.gram_weak(),
        dt,
        prev,
        load,
        forward: &forward,
        prox: None,
        lipschitz: problem.theta_lipschitz(dt),
    };
    solve_step(&sys, guess, cfg)
        .map(|o| o.value)
        .map_err(|e| with_node(e.annotate("node θ-block"), node.index))
}

/// Node-by-node solve of the same discrete system.
pub fn solve_nodewise(
    problem: &SystemProblem,
    grid: &TimeGrid,
    cfg: &SystemConfig,
    sweep: Sweep,
) -> Result<SystemSolution> {
    cfg.validate()?;
    let ledger = problem.ledger();
    let gate = check_smallness(&ledger)?;
    gate.require()?;
    let dt = grid.dt();
    let (h1, h2) = problem.loads(grid);
    let mut ws = vec![problem.w0.clone()];
    let mut ths = vec![problem.theta0.clone()];
    let damping = match sweep {
        Sweep::Jacobi => cfg.oracle_damping,
        Sweep::GaussSeidel => 1.0,
    };
    let mut worst_increments: Vec<f64> = Vec::new();
    for k in 1..=grid.steps() {
        let node = Node { index: k, t: grid.node(k) };
        let hist = NodeHistory {
            xi: problem.hist_r1.eval(grid, &ws, k)?,
            eta: problem.hist_r.eval(grid, &ws, k)?,
            zeta: problem.hist_s.eval(grid, &ws, k)?,
            wbar: problem.hist_r2.eval(grid, &ws, k)?,
        };
        let (wp, tp) = (ws[k - 1].clone(), ths[k - 1].clone());
        let (mut wk, mut tk) = (wp.clone(), tp.clone());
        let mut incs = Vec::new();
        loop {
            let w_new = w_step(problem, node, dt, &wp, &h1[k], &tk, &hist, &wk, &cfg.step)?;
            let w_for_theta = match sweep {
                Sweep::Jacobi => &wk,
                Sweep::GaussSeidel => &w_new,
            };
            let t_new = theta_step(problem, node, dt, &tp, &h2[k], w_for_theta, &hist, &tk, &cfg.step)?;
            let w_next = &wk * (1.0 - damping) + &w_new * damping;
            let t_next = &tk * (1.0 - damping) + &t_new * damping;
            let change = problem.v.strong_norm_unchecked(&(&w_next - &wk))
                + problem.e.strong_norm_unchecked(&(&t_next - &tk));
            let scale = (problem.v.strong_norm_unchecked(&w_next) + problem.e.strong_norm_unchecked(&t_next)).max(1.0);
            wk = w_next;
            tk = t_next;
            incs.push(change);
            if change <= cfg.coupling_tol * scale {
                break;
            }
            if incs.len() >= cfg.max_coupling {
                return Err(Error::NonConvergence {
                    context: "node coupling sweeps".into(),
                    node: k,
                    iterations: incs.len(),
                    residual: change,
                });
            }
        }
        if incs.len() > worst_increments.len() {
            worst_increments = incs;
        }
        ws.push(wk);
        ths.push(tk);
    }
    let w = Trajectory::new(problem.v.clone(), *grid, ws)?;
    let theta = Trajectory::new(problem.e.clone(), *grid, ths)?;
    let frozen = FrozenData {
        lambda: theta.with_space(problem.x.clone())?,
        xi: history_trajectory(&problem.hist_r1, &problem.v_dual, grid, &w)?,
        eta: history_trajectory(&problem.hist_r, &problem.y, grid, &w)?,
        zeta: history_trajectory(&problem.hist_s, &problem.z, grid, &w)?,
    };
    let mode = match sweep {
        Sweep::GaussSeidel => SolveMode::Staggered,
        Sweep::Jacobi => SolveMode::ProofFaithful,
    };
    let diag = SolveDiagnostics {
        mode,
        picard_iters: worst_increments.len(),
        contraction_ratios: worst_increments
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect(),
        final_increment: worst_increments.last().copied().unwrap_or(0.0),
        increments: worst_increments,
        bielecki_weight: 0.0,
        per_iteration_residuals: Vec::new(),
        step3_constant: ledger.step3_constant(grid.horizon()),
        margins: (gate.margins[0], gate.margins[1]),
        inner_iterations: 0,
        warnings: gate.warnings,
    };
    Ok(SystemSolution { w, theta, frozen, diag })
}

/// Brute-force reference: damped block-Jacobi on `(w_k, θ_k)` at every node.
pub fn solve_monolithic_oracle(
    problem: &SystemProblem,
    grid: &TimeGrid,
    cfg: &SystemConfig,
) -> Result<(Trajectory, Trajectory)> {
    let step = StepSolveConfig { tol: cfg.step.tol.min(1e-12), max_inner: cfg.step.max_inner.max(2000), ..cfg.step };
    let cfg = SystemConfig { step, ..*cfg };
    let sol = solve_nodewise(problem, grid, &cfg, Sweep::Jacobi)?;
    Ok((sol.w, sol.theta))
}

/// Relative distance `‖a − b‖ / max(‖b‖, tiny)` in the discrete
/// `L²(0,T;V) × L²(0,T;E)` norm, including the terminal node.
pub fn relative_distance(w1: &Trajectory, th1: &Trajectory, w2: &Trajectory, th2: &Trajectory) -> Result<f64> {
    let full = |a: &Trajectory| -> f64 {
        let dt = a.grid().dt();
        a.values().iter().map(|v| dt * a.space().strong_norm_unchecked(v).powi(2)).sum()
    };
    let num = (full(&w1.sub(w2)?) + full(&th1.sub(th2)?)).sqrt();
    let den = (full(w2) + full(th2)).sqrt();
    Ok(if den > 1e-300 { num / den } else { num })
}
