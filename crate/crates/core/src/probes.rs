//! Sampling probes that estimate structural constants and the smallness gate.
//!
//! Estimates are empirical: each one is an extreme ratio observed over seeded
//! random samples, refined by a secant step toward the worst direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{HistoryOperator, Ledger};
use crate::spaces::{DiscreteSpace, TimeGrid};
use crate::{Matrix, Vector};

/// Relative tolerance of every probe verdict.
pub const PROBE_TOL: f64 = 1e-10;
/// Margins below this trigger a warning.
pub const MARGIN_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WorstPair {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProbeReport {
    pub target: String,
    pub samples: usize,
    pub estimated_constant: f64,
    pub declared_constant: f64,
    pub worst_pair: Option<WorstPair>,
    pub pass: bool,
    pub kind: &'static str,
}

impl ProbeReport {
    fn new(target: impl Into<String>, samples: usize, estimated: f64, declared: f64, pass: bool) -> Self {
        Self {
            target: target.into(),
            samples,
            estimated_constant: estimated,
            declared_constant: declared,
            worst_pair: None,
            pass,
            kind: "empirical",
        }
    }

    fn with_pair(mut self, a: &Vector, b: &Vector) -> Self {
        self.worst_pair = Some(WorstPair {
            first: a.iter().copied().collect(),
            second: b.iter().copied().collect(),
        });
        self
    }
}

/// Seeded sample generator: standard normal directions scaled to unit strong
/// norm, times a log-uniform radius in `[0.1, 10]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Times are drawn uniformly from `[0, horizon]`.
    pub horizon: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { seed: 0x5eed, n_samples: 256, horizon: 1.0 }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
    horizon: f64,
}

impl Sampler {
    pub fn new(cfg: &SamplerConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Self { rng, horizon: cfg.horizon }
    }

    pub fn time(&mut self) -> f64 {
        self.rng.random::<f64>() * self.horizon
    }

    pub fn radius(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        10f64.powf(2.0 * u - 1.0)
    }

    pub fn gaussian(&mut self, dim: usize) -> Vector {
        Vector::from_fn(dim, |_, _| self.rng.sample::<f64, _>(StandardNormal))
    }

    /// Unit vector in the strong norm of `space`.
    pub fn direction(&mut self, space: &DiscreteSpace) -> Vector {
        loop {
            let g = self.gaussian(space.dim());
            let n = space.strong_norm_unchecked(&g);
            if n > 1e-12 {
                return g / n;
            }
        }
    }

    pub fn vector(&mut self, space: &DiscreteSpace) -> Vector {
        let r = self.radius();
        self.direction(space) * r
    }

    /// A pair; one in four is a close pair at relative distance `1e-3`.
    pub fn pair(&mut self, space: &DiscreteSpace) -> (Vector, Vector) {
        let a = self.vector(space);
        let b = if self.rng.random::<f64>() < 0.25 {
            let scale = 1e-3 * space.strong_norm_unchecked(&a).max(1e-3);
            &a + self.direction(space) * scale
        } else {
            self.vector(space)
        };
        (a, b)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Outcome of a smallness gate.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SmallnessReport {
    pub pass: bool,
    pub labels: Vec<String>,
    pub margins: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SmallnessReport {
    /// Each entry `(label, lhs, rhs)` must satisfy `lhs > rhs` strictly.
    pub fn from_inequalities(entries: &[(&str, f64, f64)]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut margins = Vec::new();
        let mut warnings = Vec::new();
        for (label, lhs, rhs) in entries {
            if !lhs.is_finite() || !rhs.is_finite() {
                return Err(Error::config(format!("constant missing or non-finite in `{label}`")));
            }
            let margin = lhs - rhs;
            if margin > 0.0 && margin < MARGIN_WARNING {
                warnings.push(format!(
                    "{label}: margin {margin:e} is tiny; the contraction constant scales like 1/margin"
                ));
            }
            labels.push(label.to_string());
            margins.push(margin);
        }
        Ok(Self {
            pass: margins.iter().all(|m| *m > 0.0),
            labels,
            margins,
            warnings,
        })
    }

    /// Converts a failed gate into an error.
    pub fn require(&self) -> Result<()> {
        if self.pass {
            Ok(())
        } else {
            let failed: Vec<&str> = self
                .labels
                .iter()
                .zip(&self.margins)
                .filter(|(_, m)| **m <= 0.0)
                .map(|(l, _)| l.as_str())
                .collect();
            Err(Error::Gate {
                detail: format!("violated: {}", failed.join(", ")),
                margins: self.margins.clone(),
            })
        }
    }
}

/// `m_A > m_J` and `m_B > m_g`.
pub fn check_smallness(ledger: &Ledger) -> Result<SmallnessReport> {
    SmallnessReport::from_inequalities(&[
        ("m_A > m_J", ledger.m_a, ledger.m_j),
        ("m_B > m_g", ledger.m_b, ledger.m_g),
    ])
}

/// `m_op > m_psi` for a single inclusion.
pub fn check_single_smallness(m_op: f64, m_psi: f64) -> Result<SmallnessReport> {
    SmallnessReport::from_inequalities(&[("m_op > m_psi", m_op, m_psi)])
}

/// A map whose monotonicity in a state variable is probed, with coupling
/// through parameter vectors.
pub struct MonotoneTarget<'a> {
    pub label: &'a str,
    pub state: &'a DiscreteSpace,
    pub params: Vec<&'a DiscreteSpace>,
    /// `(t, params, state) ↦ dual vector`.
    pub eval: &'a dyn Fn(f64, &[Vector], &Vector) -> Vector,
    /// Lower modulus `μ` in `⟨ΔF, Δv⟩ ≥ μ‖Δv‖² − m̄·Σ‖Δp‖·‖Δv‖`.
    pub modulus: f64,
    pub coupling: f64,
    /// Relaxed targets report `−μ` (the `m_J`, `m_g` convention).
    pub relaxed: bool,
}

impl MonotoneTarget<'_> {
    fn pairing_ratio(&self, t: f64, p: &[Vector], a: &Vector, b: &Vector) -> Option<f64> {
        let dv = a - b;
        let n2 = self.state.strong_norm_unchecked(&dv).powi(2);
        if n2 <= 1e-300 {
            return None;
        }
        let df = (self.eval)(t, p, a) - (self.eval)(t, p, b);
        Some(df.dot(&dv) / n2)
    }
}

fn finite_difference_jacobian(f: impl Fn(&Vector) -> Vector, at: &Vector, scale: f64) -> Matrix {
    let n = at.len();
    let h = 1e-4 * scale.max(1e-8);
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = at.clone();
        let mut minus = at.clone();
        plus[i] += h;
        minus[i] -= h;
        cols.push((f(&plus) - f(&minus)) / (2.0 * h));
    }
    Matrix::from_columns(&cols)
}

/// Direction minimizing the Rayleigh quotient of the symmetrized secant
/// Jacobian against the strong Gram.
fn worst_direction(space: &DiscreteSpace, f: impl Fn(&Vector) -> Vector, at: &Vector, scale: f64) -> Option<Vector> {
    let jac = finite_difference_jacobian(f, at, scale);
    let sym = (&jac + jac.transpose()) * 0.5;
    let (_, vecs) = linalg::generalized_eigenpairs(&sym, space.gram_strong()).ok()?;
    Some(vecs.column(0).into_owned())
}

/// Mixed or relaxed monotonicity probe. Returns the modulus report and the
/// coupling report.
pub fn probe_monotone(target: &MonotoneTarget<'_>, cfg: &SamplerConfig) -> Result<Vec<ProbeReport>> {
    if cfg.n_samples == 0 {
        return Err(Error::Probe("n_samples must be at least 1".into()));
    }
    let mut s = Sampler::new(cfg, 1);
    // modulus: parameters shared within a pair
    let mut best: Option<(f64, f64, Vec<Vector>, Vector, Vector)> = None;
    let mut used = 0usize;
    for _ in 0..cfg.n_samples {
        let t = s.time();
        let p: Vec<Vector> = target.params.iter().map(|sp| s.vector(sp)).collect();
        let (a, b) = s.pair(target.state);
        if let Some(r) = target.pairing_ratio(t, &p, &a, &b) {
            used += 1;
            if best.as_ref().is_none_or(|bst| r < bst.0) {
                best = Some((r, t, p, a, b));
            }
        }
    }
    let (mut inf, t, p, mut wa, mut wb) = best.ok_or_else(|| {
        Error::Probe(format!("{}: every sample pair was degenerate", target.label))
    })?;
    let mid = (&wa + &wb) * 0.5;
    let scale = target.state.strong_norm_unchecked(&(&wa - &wb)).max(1e-6);
    if let Some(dir) = worst_direction(target.state, |v| (target.eval)(t, &p, v), &mid, scale) {
        let dn = target.state.strong_norm_unchecked(&dir);
        if dn > 0.0 {
            let step = dir * (0.5 * scale / dn);
            let (a, b) = (&mid + &step, &mid - &step);
            if let Some(r) = target.pairing_ratio(t, &p, &a, &b) {
                used += 1;
                if r < inf {
                    inf = r;
                    wa = a;
                    wb = b;
                }
            }
        }
    }
    let (estimated, declared, pass) = if target.relaxed {
        let est = -inf;
        (est, -target.modulus, est <= -target.modulus + PROBE_TOL * target.modulus.abs().max(1.0))
    } else {
        (inf, target.modulus, inf >= target.modulus - PROBE_TOL * target.modulus.abs().max(1.0))
    };
    let name = if target.relaxed { "relaxed_monotonicity" } else { "strong_monotonicity" };
    let modulus = ProbeReport::new(format!("{}.{name}", target.label), used, estimated, declared, pass)
        .with_pair(&wa, &wb);

    let mut out = vec![modulus];
    if !target.params.is_empty() {
        let mut s = Sampler::new(cfg, 2);
        let mut sup = f64::NEG_INFINITY;
        let mut worst = None;
        let mut used = 0usize;
        for _ in 0..cfg.n_samples {
            let t = s.time();
            let (p1, p2): (Vec<Vector>, Vec<Vector>) =
                target.params.iter().map(|sp| s.pair(sp)).unzip();
            let (a, b) = s.pair(target.state);
            let dv = &a - &b;
            let nv = target.state.strong_norm_unchecked(&dv);
            let np: f64 = target
                .params
                .iter()
                .zip(p1.iter().zip(&p2))
                .map(|(sp, (x, y))| sp.strong_norm_unchecked(&(x - y)))
                .sum();
            if nv <= 1e-300 || np <= 1e-300 {
                continue;
            }
            used += 1;
            let df = (target.eval)(t, &p1, &a) - (target.eval)(t, &p2, &b);
            let deficit = target.modulus * nv * nv - df.dot(&dv);
            let r = deficit / (np * nv);
            if r > sup {
                sup = r;
                worst = Some((a, b));
            }
        }
        if used == 0 {
            return Err(Error::Probe(format!("{}: every coupling pair was degenerate", target.label)));
        }
        let pass = sup <= target.coupling + PROBE_TOL * target.coupling.max(1.0);
        let mut rep = ProbeReport::new(format!("{}.coupling", target.label), used, sup.max(0.0), target.coupling, pass);
        if let Some((a, b)) = worst {
            rep = rep.with_pair(&a, &b);
        }
        out.push(rep);
    }
    Ok(out)
}

/// `(lhs, rhs)` of a growth bound at a time and sample point.
pub type GrowthEval = dyn Fn(f64, &[Vector]) -> (f64, f64);

/// Growth envelope probe: reports `sup ‖F‖ / envelope`, which must not exceed 1.
pub fn probe_growth(
    label: &str,
    spaces: &[&DiscreteSpace],
    eval: &GrowthEval,
    cfg: &SamplerConfig,
) -> ProbeReport {
    let mut s = Sampler::new(cfg, 3);
    let mut sup: f64 = 0.0;
    for _ in 0..cfg.n_samples {
        let t = s.time();
        let args: Vec<Vector> = spaces.iter().map(|sp| s.vector(sp)).collect();
        let (norm, envelope) = eval(t, &args);
        let r = if envelope > 0.0 {
            norm / envelope
        } else if norm > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        sup = sup.max(r);
    }
    ProbeReport::new(format!("{label}.growth"), cfg.n_samples, sup, 1.0, sup <= 1.0 + PROBE_TOL)
}

/// History Lipschitz probe: `sup ‖Δ(Rv)(t_k)‖ / Σ_{j<k} dt‖Δv_j‖`.
pub fn probe_history_lipschitz(
    label: &str,
    op: &HistoryOperator,
    source: &DiscreteSpace,
    target_norm: &dyn Fn(&Vector) -> f64,
    grid: &TimeGrid,
    cfg: &SamplerConfig,
) -> Result<ProbeReport> {
    let mut s = Sampler::new(cfg, 4);
    let n = grid.steps();
    let dt = grid.dt();
    let mut sup: f64 = 0.0;
    let mut used = 0usize;
    let trials = cfg.n_samples.div_ceil(8).max(1);
    for trial in 0..trials {
        let base: Vec<Vector> = (0..=n).map(|_| s.vector(source)).collect();
        let other: Vec<Vector> = if trial % 2 == 0 {
            // rank-one, sign-constant difference
            let dir = s.direction(source);
            let amp: Vec<f64> = (0..=n).map(|_| s.radius() * s.uniform()).collect();
            base.iter().zip(&amp).map(|(b, a)| b + &dir * *a).collect()
        } else {
            (0..=n).map(|_| s.vector(source)).collect()
        };
        let mut acc = 0.0;
        for k in 1..=n {
            acc += dt * source.strong_norm_unchecked(&(&base[k - 1] - &other[k - 1]));
            if acc <= 1e-300 {
                continue;
            }
            let d = op.eval(grid, &base, k)? - op.eval(grid, &other, k)?;
            used += 1;
            sup = sup.max(target_norm(&d) / acc);
        }
    }
    if used == 0 {
        return Err(Error::Probe(format!("{label}: every history pair was degenerate")));
    }
    let declared = op.lipschitz();
    let pass = sup <= declared * (1.0 + PROBE_TOL) + 1e-14;
    Ok(ProbeReport::new(format!("{label}.volterra_lipschitz"), used, sup, declared, pass))
}

/// Nonexpansiveness of a Euclidean prox in `x`, reported as `sup ‖Δprox‖/‖Δx‖`.
pub fn probe_prox_nonexpansive(
    label: &str,
    dim: usize,
    prox: &dyn Fn(f64, f64, &Vector) -> Vector,
    cfg: &SamplerConfig,
) -> ProbeReport {
    let mut s = Sampler::new(cfg, 5);
    let mut sup: f64 = 0.0;
    for _ in 0..cfg.n_samples {
        let t = s.time();
        let rho = s.radius();
        let a = s.gaussian(dim) * s.radius();
        let b = s.gaussian(dim) * s.radius();
        let dx = (&a - &b).norm();
        if dx > 0.0 {
            sup = sup.max((prox(t, rho, &a) - prox(t, rho, &b)).norm() / dx);
        }
    }
    ProbeReport::new(format!("{label}.prox_nonexpansive"), cfg.n_samples, sup, 1.0, sup <= 1.0 + PROBE_TOL)
}

/// Four-point inequality for a convex potential with parameters:
/// `sup [φ(p₁,v₂) − φ(p₁,v₁) + φ(p₂,v₁) − φ(p₂,v₂)] / (Σ‖Δp‖·‖Δv‖)`.
pub fn probe_four_point(
    label: &str,
    state: &DiscreteSpace,
    params: &[&DiscreteSpace],
    value: &dyn Fn(f64, &[Vector], &Vector) -> f64,
    declared: f64,
    cfg: &SamplerConfig,
) -> ProbeReport {
    let mut s = Sampler::new(cfg, 6);
    let mut sup: f64 = 0.0;
    for _ in 0..cfg.n_samples {
        let t = s.time();
        let (p1, p2): (Vec<Vector>, Vec<Vector>) = params.iter().map(|sp| s.pair(sp)).unzip();
        let (v1, v2) = s.pair(state);
        let np: f64 = params
            .iter()
            .zip(p1.iter().zip(&p2))
            .map(|(sp, (x, y))| sp.strong_norm_unchecked(&(x - y)))
            .sum();
        let nv = state.strong_norm_unchecked(&(&v1 - &v2));
        if np * nv <= 1e-300 {
            continue;
        }
        let lhs = value(t, &p1, &v2) - value(t, &p1, &v1) + value(t, &p2, &v1) - value(t, &p2, &v2);
        sup = sup.max(lhs / (np * nv));
    }
    ProbeReport::new(
        format!("{label}.four_point"),
        cfg.n_samples,
        sup,
        declared,
        sup <= declared + PROBE_TOL * declared.max(1.0),
    )
}

/// Consistency `x − prox(x) − ρ·s(prox(x)) = 0` of a supplied selection.
pub fn probe_prox_consistency(
    label: &str,
    dim: usize,
    prox: &dyn Fn(f64, f64, &Vector) -> Vector,
    subgrad: &dyn Fn(f64, &Vector) -> Vector,
    cfg: &SamplerConfig,
) -> ProbeReport {
    let mut s = Sampler::new(cfg, 7);
    let mut sup: f64 = 0.0;
    for _ in 0..cfg.n_samples {
        let t = s.time();
        let rho = s.radius();
        let x = s.gaussian(dim) * s.radius();
        let p = prox(t, rho, &x);
        let r = (&x - &p - subgrad(t, &p) * rho).norm() / x.norm().max(1.0);
        sup = sup.max(r);
    }
    ProbeReport::new(format!("{label}.prox_consistency"), cfg.n_samples, sup, 0.0, sup <= 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceLabel;
    use proptest::prelude::*;

    fn eucl(n: usize) -> DiscreteSpace {
        DiscreteSpace::euclidean(SpaceLabel::V, n).unwrap()
    }

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    #[test]
    fn smallness_examples() {
        let l = Ledger { m_a: 2.0, m_j: 1.0, m_b: 1.0, m_g: 0.0, ..Default::default() };
        let r = check_smallness(&l).unwrap();
        assert!(r.pass);
        assert_eq!(r.margins, vec![1.0, 1.0]);
        let l = Ledger { m_a: 1.0, m_j: 1.0, m_b: 1.0, ..Default::default() };
        assert!(!check_smallness(&l).unwrap().pass);
        let l = Ledger { m_a: f64::NAN, ..Default::default() };
        assert!(matches!(check_smallness(&l), Err(Error::Config(_))));
        let r = check_single_smallness(1.0, 1.0 - 1e-9).unwrap();
        assert!(r.pass && !r.warnings.is_empty());
    }

    fn linear_target<'a>(
        space: &'a DiscreteSpace,
        eval: &'a dyn Fn(f64, &[Vector], &Vector) -> Vector,
        relaxed: bool,
    ) -> MonotoneTarget<'a> {
        MonotoneTarget {
            label: "T",
            state: space,
            params: vec![],
            eval,
            modulus: 0.0,
            coupling: 0.0,
            relaxed,
        }
    }

    #[test]
    fn identity_operator_modulus_is_one() {
        let sp = eucl(3);
        let f = |_: f64, _: &[Vector], v: &Vector| v.clone();
        let r = probe_monotone(&linear_target(&sp, &f, false), &cfg()).unwrap();
        assert!((r[0].estimated_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_operator_modulus() {
        let sp = eucl(2);
        let f = |_: f64, _: &[Vector], v: &Vector| Vector::from_row_slice(&[v[0], 2.0 * v[1]]);
        let est = probe_monotone(&linear_target(&sp, &f, false), &cfg()).unwrap()[0].estimated_constant;
        assert!((1.0 - 1e-12..=1.0 + 1e-10).contains(&est), "{est}");
    }

    #[test]
    fn coupling_with_scalar_parameter() {
        let n = 4;
        let sp = eucl(n);
        let th = DiscreteSpace::euclidean(SpaceLabel::X, 1).unwrap();
        let f = |_: f64, p: &[Vector], v: &Vector| v + Vector::from_element(v.len(), p[0][0]);
        let target = MonotoneTarget {
            label: "A",
            state: &sp,
            params: vec![&th],
            eval: &f,
            modulus: 1.0,
            coupling: (n as f64).sqrt(),
            relaxed: false,
        };
        let r = probe_monotone(&target, &cfg()).unwrap();
        assert!(r.iter().all(|x| x.pass), "{r:?}");
        assert!(r[1].estimated_constant <= (n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn relaxed_examples() {
        let sp = eucl(1);
        // monotone selection of a convex potential (subgradient of |v|)
        let f = |_: f64, _: &[Vector], v: &Vector| v.map(f64::signum) + v * 0.1;
        let est = probe_monotone(&linear_target(&sp, &f, true), &cfg()).unwrap()[0].estimated_constant;
        assert!(est <= 1e-10);

        let f = |_: f64, _: &[Vector], v: &Vector| v * -0.7;
        let est = probe_monotone(&linear_target(&sp, &f, true), &cfg()).unwrap()[0].estimated_constant;
        assert!((est - 0.7).abs() < 1e-12);

        let f = |_: f64, _: &[Vector], v: &Vector| v.map(|x| x.clamp(-1.0, 1.0) - 0.5 * x);
        let est = probe_monotone(&linear_target(&sp, &f, true), &cfg()).unwrap()[0].estimated_constant;
        assert!((est - 0.5).abs() < 1e-12, "{est}");
    }

    #[test]
    fn history_lipschitz_examples() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let sp = eucl(2);
        let norm = |v: &Vector| v.norm();
        let id = HistoryOperator::volterra(2, 1.0, |_, _| Matrix::identity(2, 2)).unwrap();
        let r = probe_history_lipschitz("R", &id, &sp, &norm, &g, &cfg()).unwrap();
        assert!((r.estimated_constant - 1.0).abs() < 1e-12 && r.pass);
        let two = HistoryOperator::volterra(2, 2.0, |_, _| Matrix::identity(2, 2) * 2.0).unwrap();
        let r = probe_history_lipschitz("R", &two, &sp, &norm, &g, &cfg()).unwrap();
        assert!((r.estimated_constant - 2.0).abs() < 1e-12 && r.pass);
        let acc = HistoryOperator::accumulate_then_map(2, 1.0, Vector::zeros(2), |v| v.map(f64::tanh)).unwrap();
        let r = probe_history_lipschitz("R", &acc, &sp, &norm, &g, &cfg()).unwrap();
        assert!(r.estimated_constant <= 1.0 + 1e-10 && r.pass);
    }

    #[test]
    fn probes_are_deterministic() {
        let sp = eucl(3);
        let f = |_: f64, _: &[Vector], v: &Vector| v.map(|x| x + 0.3 * x.sin());
        let a = probe_monotone(&linear_target(&sp, &f, false), &cfg()).unwrap();
        let b = probe_monotone(&linear_target(&sp, &f, false), &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prox_probes() {
        let prox = |_: f64, rho: f64, x: &Vector| x.map(|xi| xi.signum() * (xi.abs() - rho).max(0.0));
        let r = probe_prox_nonexpansive("phi", 3, &prox, &cfg());
        assert!(r.pass);
        let quad = |_: f64, rho: f64, x: &Vector| x / (1.0 + rho);
        let r = probe_prox_consistency("q", 3, &quad, &|_, p| p.clone(), &cfg());
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn four_point_weighted_l1() {
        let sp = eucl(2);
        let th = DiscreteSpace::euclidean(SpaceLabel::X, 1).unwrap();
        // φ(θ, v) = (1 + 0.5 tanh θ)·|v|₁ has m_φ ≤ 0.5·sqrt(2)
        let val = |_: f64, p: &[Vector], v: &Vector| (1.0 + 0.5 * p[0][0].tanh()) * v.abs().sum();
        let r = probe_four_point("phi", &sp, &[&th], &val, 0.5 * 2f64.sqrt(), &cfg());
        assert!(r.pass, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn linear_modulus_matches_eigensolve(entries in proptest::collection::vec(-2f64..2.0, 16), diag in proptest::collection::vec(0.5f64..3.0, 4), seed in 0u64..1000) {
            let n = 4;
            let m = Matrix::from_row_slice(n, n, &entries) + Matrix::from_diagonal(&Vector::from_vec(diag));
            let gram = Matrix::from_row_slice(n, n, &[2.0, 0.2, 0.0, 0.0, 0.2, 1.5, 0.1, 0.0, 0.0, 0.1, 1.0, 0.3, 0.0, 0.0, 0.3, 2.5]);
            let sp = DiscreteSpace::new(SpaceLabel::V, gram.clone(), gram.clone()).unwrap();
            let mm = m.clone();
            let f = move |_: f64, _: &[Vector], v: &Vector| &mm * v;
            let c = SamplerConfig { seed, ..SamplerConfig::default() };
            let est = probe_monotone(&linear_target(&sp, &f, false), &c).unwrap()[0].estimated_constant;
            let sym = (&m + m.transpose()) * 0.5;
            let exact = linalg::generalized_eigenvalues(&sym, &gram).unwrap()[0];
            prop_assert!((est - exact).abs() <= 1e-8 * exact.abs().max(1.0), "{} vs {}", est, exact);
        }
    }
}
