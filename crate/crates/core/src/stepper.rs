//! Implicit Euler for a single inclusion `u' + 𝒜(t,u) + ∂ψ(t,u) ∋ f`, where
//! `ψ` splits into a convex part (through its prox) and a Clarke part
//! (through a selection).
//!
//! Each step solves the stationary inclusion
//! `M(u − prev)/dt + 𝒜(t,u) + s_clarke(u) + ∂φ(u) ∋ f` by forward–backward
//! splitting `u ← prox_ρ(u − ρ·G(u))` with Anderson acceleration and
//! backtracking on the natural residual `‖u − prox_ρ(u − ρG(u))‖/ρ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{DiscreteSpace, TimeGrid, Trajectory};
use crate::{Matrix, Vector};

/// Time node handed to per-node closures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub index: usize,
    pub t: f64,
}

pub type NodeOp = Arc<dyn Fn(Node, &Vector) -> Vector + Send + Sync>;
pub type NodeProx = Arc<dyn Fn(Node, f64, &Vector) -> Vector + Send + Sync>;
/// Borrowed `prox(ρ, x)`.
pub type ProxRef<'a> = &'a dyn Fn(f64, &Vector) -> Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSolveConfig {
    /// Absolute tolerance on the natural residual.
    pub tol: f64,
    pub max_inner: usize,
    /// Initial step `ρ₀`; derived from the growth constants when absent.
    pub relaxation: Option<f64>,
    pub backtrack: f64,
    /// Anderson memory; 0 disables acceleration.
    pub anderson: usize,
    /// Start each step from the previous value (otherwise from zero).
    pub warm_start: bool,
}

impl Default for StepSolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_inner: 500,
            relaxation: None,
            backtrack: 0.5,
            anderson: 5,
            warm_start: true,
        }
    }
}

impl StepSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("step tolerance must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::config("backtrack factor must lie in (0, 1)"));
        }
        if self.max_inner == 0 {
            return Err(Error::config("max_inner must be at least 1"));
        }
        if let Some(r) = self.relaxation {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("relaxation must be positive"));
            }
        }
        Ok(())
    }
}

/// One stationary step, borrowed from whatever owns the data.
pub struct StepSystem<'a> {
    pub mass: &'a Matrix,
    pub dt: f64,
    pub prev: &'a Vector,
    pub load: &'a Vector,
    /// Single-valued part `𝒜(t,·) + s_clarke(·)`.
    pub forward: &'a dyn Fn(&Vector) -> Vector,
    /// `prox(ρ, x)` of the convex part.
    pub prox: Option<ProxRef<'a>>,
    /// Euclidean Lipschitz estimate of the forward map, used for `ρ₀`.
    pub lipschitz: f64,
}

impl StepSystem<'_> {
    /// `G(u) = M(u − prev)/dt + forward(u) − load`.
    pub fn smooth_residual(&self, u: &Vector) -> Vector {
        let mut g = self.mass * (u - self.prev) / self.dt;
        g += (self.forward)(u);
        g -= self.load;
        g
    }

    /// Forward–backward map.
    pub fn fb_map(&self, rho: f64, u: &Vector) -> Vector {
        let x = u - self.smooth_residual(u) * rho;
        match self.prox {
            Some(p) => p(rho, &x),
            None => x,
        }
    }

    /// Natural residual `‖u − T_ρ(u)‖/ρ`.
    pub fn residual(&self, rho: f64, u: &Vector) -> f64 {
        (u - self.fb_map(rho, u)).norm() / rho
    }

    fn default_rho(&self) -> f64 {
        let l = self.lipschitz.max(f64::MIN_POSITIVE);
        1.0 / l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    #[serde(skip)]
    pub value: Vector,
    pub residual: f64,
    pub rho: f64,
    pub iterations: usize,
}

struct Anderson {
    memory: usize,
    dx: Vec<Vector>,
    df: Vec<Vector>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, dx: Vec::new(), df: Vec::new() }
    }

    fn clear(&mut self) {
        self.dx.clear();
        self.df.clear();
    }

    fn push(&mut self, dx: Vector, df: Vector) {
        if self.memory == 0 {
            return;
        }
        if self.dx.len() == self.memory {
            self.dx.remove(0);
            self.df.remove(0);
        }
        self.dx.push(dx);
        self.df.push(df);
    }

    /// Type-II extrapolation `x + f − (ΔX + ΔF)γ`, `γ = argmin ‖f − ΔFγ‖`.
    fn extrapolate(&self, x: &Vector, f: &Vector) -> Option<Vector> {
        let m = self.df.len();
        if m == 0 {
            return None;
        }
        let n = x.len();
        let df = DMatrix::from_fn(n, m, |i, j| self.df[j][i]);
        let svd = df.clone().svd(true, true);
        let gamma = svd.solve(f, 1e-12 * svd.singular_values.max()).ok()?;
        if gamma.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let mut out = x + f;
        for j in 0..m {
            out -= (&self.dx[j] + &self.df[j]) * gamma[j];
        }
        Some(out)
    }
}

/// Solves one stationary step from `guess`.
pub fn solve_step(sys: &StepSystem<'_>, guess: &Vector, cfg: &StepSolveConfig) -> Result<StepOutcome> {
    let mut rho = cfg.relaxation.unwrap_or_else(|| sys.default_rho());
    let rho_floor = rho * 1e-12;
    let mut aa = Anderson::new(cfg.anderson);
    let mut x = guess.clone();
    let mut fx = sys.fb_map(rho, &x) - &x;
    let mut r = fx.norm() / rho;
    let mut best = (x.clone(), r);
    let mut evals = 1usize;

    loop {
        if !r.is_finite() {
            return Err(Error::NonConvergence {
                context: "step solve diverged".into(),
                node: 0,
                iterations: evals,
                residual: r,
            });
        }
        if r <= cfg.tol {
            return Ok(StepOutcome { value: x, residual: r, rho, iterations: evals });
        }
        if evals >= cfg.max_inner {
            return Err(Error::NonConvergence {
                context: "step solve".into(),
                node: 0,
                iterations: evals,
                residual: best.1,
            });
        }

        let plain = &x + &fx;
        let mut accepted: Option<(Vector, Vector, f64)> = None;
        if let Some(cand) = aa.extrapolate(&x, &fx) {
            let fc = sys.fb_map(rho, &cand) - &cand;
            evals += 1;
            let rc = fc.norm() / rho;
            if rc.is_finite() && rc < r {
                accepted = Some((cand, fc, rc));
            }
        }
        if accepted.is_none() {
            let fp = sys.fb_map(rho, &plain) - &plain;
            evals += 1;
            let rp = fp.norm() / rho;
            if rp.is_finite() && rp <= r * (1.0 + 1e-12) {
                accepted = Some((plain, fp, rp));
            } else {
                aa.clear();
            }
        }
        match accepted {
            Some((xn, fn_, rn)) => {
                aa.push(&xn - &x, &fn_ - &fx);
                x = xn;
                fx = fn_;
                r = rn;
                if r < best.1 {
                    best = (x.clone(), r);
                }
            }
            None => {
                rho *= cfg.backtrack;
                if rho < rho_floor {
                    return Err(Error::NonConvergence {
                        context: "step size underflow".into(),
                        node: 0,
                        iterations: evals,
                        residual: best.1,
                    });
                }
                aa.clear();
                x = best.0.clone();
                fx = sys.fb_map(rho, &x) - &x;
                evals += 1;
                r = fx.norm() / rho;
                best = (x.clone(), r);
            }
        }
    }
}

/// Data of `u' + 𝒜(t,u) + ∂ψ(t,u) ∋ f` on a fixed grid.
#[derive(Clone)]
pub struct SingleInclusionProblem {
    pub space: Arc<DiscreteSpace>,
    pub operator: NodeOp,
    /// Strong monotonicity constant of `𝒜(t,·)`.
    pub m_operator: f64,
    /// Linear growth coefficient of `𝒜(t,·)`.
    pub operator_growth: f64,
    pub convex_part: Option<NodeProx>,
    pub clarke_part: Option<NodeOp>,
    /// Relaxed monotonicity constant of the Clarke part.
    pub m_clarke: f64,
    pub clarke_growth: f64,
    /// Dual-space load at every node `0..=N`.
    pub load: Vec<Vector>,
    pub initial: Vector,
}

impl SingleInclusionProblem {
    /// Linear problem `u' + 𝒜u ∋ f` with no potentials.
    pub fn plain(
        space: Arc<DiscreteSpace>,
        operator: NodeOp,
        m_operator: f64,
        operator_growth: f64,
        load: Vec<Vector>,
        initial: Vector,
    ) -> Self {
        Self {
            space,
            operator,
            m_operator,
            operator_growth,
            convex_part: None,
            clarke_part: None,
            m_clarke: 0.0,
            clarke_growth: 0.0,
            load,
            initial,
        }
    }

    pub fn margin(&self) -> f64 {
        self.m_operator - self.m_clarke
    }

    fn lipschitz_estimate(&self, dt: f64) -> f64 {
        self.space.lambda_max_weak() / dt
            + (self.operator_growth + self.clarke_growth) * self.space.lambda_max_strong()
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if !(self.margin() > 0.0) {
            return Err(Error::Gate {
                detail: format!(
                    "single inclusion requires m_op > m_clarke ({} vs {})",
                    self.m_operator, self.m_clarke
                ),
                margins: vec![self.margin()],
            });
        }
        let n = self.space.dim();
        if self.initial.len() != n {
            return Err(Error::arg("initial value has wrong dimension"));
        }
        if self.load.len() != grid.steps() + 1 {
            return Err(Error::arg(format!(
                "load needs {} nodes, got {}",
                grid.steps() + 1,
                self.load.len()
            )));
        }
        if self.load.iter().any(|f| f.len() != n) {
            return Err(Error::arg("load has wrong dimension"));
        }
        Ok(())
    }

    fn with_system<R>(&self, node: Node, dt: f64, prev: &Vector, f: impl FnOnce(&StepSystem<'_>) -> R) -> R {
        let op = &self.operator;
        let clarke = &self.clarke_part;
        let forward = move |u: &Vector| {
            let mut out = op(node, u);
            if let Some(c) = clarke {
                out += c(node, u);
            }
            out
        };
        let prox_fn;
        let prox: Option<ProxRef> = match &self.convex_part {
            Some(p) => {
                prox_fn = move |rho: f64, x: &Vector| p(node, rho, x);
                Some(&prox_fn)
            }
            None => None,
        };
        let sys = StepSystem {
            mass: self.space.gram_weak(),
            dt,
            prev,
            load: &self.load[node.index],
            forward: &forward,
            prox,
            lipschitz: self.lipschitz_estimate(dt),
        };
        f(&sys)
    }
}

/// Solves the step ending at `node`.
pub fn step_solve(
    problem: &SingleInclusionProblem,
    node: Node,
    dt: f64,
    prev: &Vector,
    cfg: &StepSolveConfig,
) -> Result<StepOutcome> {
    let guess = if cfg.warm_start { prev.clone() } else { Vector::zeros(prev.len()) };
    problem
        .with_system(node, dt, prev, |sys| solve_step(sys, &guess, cfg))
        .map_err(|e| with_node(e, node.index))
}

/// Re-evaluates the natural residual of an accepted step.
pub fn step_residual(
    problem: &SingleInclusionProblem,
    node: Node,
    dt: f64,
    prev: &Vector,
    u: &Vector,
    rho: f64,
) -> f64 {
    problem.with_system(node, dt, prev, |sys| sys.residual(rho, u))
}

pub(crate) fn with_node(e: Error, node: usize) -> Error {
    match e {
        Error::NonConvergence { context, iterations, residual, .. } => Error::NonConvergence {
            context,
            node,
            iterations,
            residual,
        },
        other => other,
    }
}

/// Trajectory plus one record per implicit step.
#[derive(Debug, Clone)]
pub struct InclusionRun {
    pub trajectory: Trajectory,
    pub steps: Vec<StepOutcome>,
}

pub fn solve_inclusion(
    problem: &SingleInclusionProblem,
    grid: &TimeGrid,
    cfg: &StepSolveConfig,
) -> Result<InclusionRun> {
    cfg.validate()?;
    problem.validate(grid)?;
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.steps() + 1);
    values.push(problem.initial.clone());
    let mut steps = Vec::with_capacity(grid.steps());
    for k in 1..=grid.steps() {
        let node = Node { index: k, t: grid.node(k) };
        let out = step_solve(problem, node, dt, &values[k - 1], cfg)?;
        values.push(out.value.clone());
        steps.push(out);
    }
    let trajectory = Trajectory::new(problem.space.clone(), *grid, values)?;
    Ok(InclusionRun { trajectory, steps })
}

/// Closure adaptor for time-only operators.
pub fn node_op(f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> NodeOp {
    Arc::new(move |n: Node, u: &Vector| f(n.t, u))
}

/// Prox of `ρ·c·|·|₁` (soft thresholding).
pub fn soft_threshold(x: &Vector, thresh: f64) -> Vector {
    x.map(|xi| xi.signum() * (xi.abs() - thresh).max(0.0))
}
