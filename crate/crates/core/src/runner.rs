//! Scenario files, command dispatch and machine-readable run reports.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::benchmark::{
    coupled_benchmark, linear_decay, linear_estimate_instance, manufactured_exact, manufactured_linear, zero_data,
    BenchmarkParams,
};
use crate::contact::vtk::write_vtk;
use crate::contact::{assemble_problem, check_contact_smallness, solve_contact, ContactSetup};
use crate::dvhi::{build_system, check_inequality_residual, dvhi_benchmark, solve_dvhi, DvhiBenchmark};
use crate::error::Error;
use crate::operators::Ledger;
use crate::probes::{check_smallness, ProbeReport, SamplerConfig, SmallnessReport};
use crate::spaces::{parse_csv, TimeGrid, Trajectory};
use crate::system::{solve_system, SolveDiagnostics, SolveMode, SystemConfig, SystemProblem};

pub const SCHEMA_VERSION: u32 = 1;
/// Directions per node used when checking the solved inequality.
pub const INEQUALITY_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Abstract,
    Dvhi,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Check,
    Solve,
    Dvhi,
    Contact,
    Convergence,
}

impl std::str::FromStr for Command {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| RunError::new("argument", format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    #[serde(alias = "T")]
    pub horizon: f64,
    #[serde(alias = "N")]
    pub steps: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { horizon: 1.0, steps: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_picard: usize,
    pub bielecki_weight: Option<f64>,
    pub mode: SolveMode,
    pub step_tol: f64,
    pub max_inner: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let c = SystemConfig::default();
        Self {
            tol: c.tol,
            max_picard: c.max_picard,
            bielecki_weight: None,
            mode: c.mode,
            step_tol: c.step.tol,
            max_inner: c.step.max_inner,
        }
    }
}

impl SolverBlock {
    pub fn config(&self) -> SystemConfig {
        let mut c = SystemConfig {
            tol: self.tol,
            max_picard: self.max_picard,
            bielecki_weight: self.bielecki_weight,
            mode: self.mode,
            ..SystemConfig::default()
        };
        c.step.tol = self.step_tol;
        c.step.max_inner = self.max_inner;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Every how many time nodes a VTK file is written (the last node always is).
    pub vtk_stride: Option<usize>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json], vtk_stride: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub steps: Vec<usize>,
}

impl Default for ConvergenceBlock {
    fn default() -> Self {
        Self { steps: vec![32, 64, 128, 256] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum AbstractProblem {
    Coupled(BenchmarkParams),
    Linear(BenchmarkParams),
    LinearDecay,
    Manufactured,
    Zero { dim_v: usize, dim_e: usize },
    /// Only the smallness gate can be evaluated.
    Ledger { m_a: f64, m_j: f64, m_b: f64, m_g: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum DvhiBlock {
    Benchmark(DvhiBenchmark),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Abstract(AbstractProblem),
    Dvhi(DvhiBlock),
    Contact(Box<ContactSetup>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub version: u32,
    pub kind: ScenarioKind,
    pub grid: GridBlock,
    pub problem: ProblemSpec,
    pub solver: SolverBlock,
    pub outputs: OutputBlock,
    pub seed: Option<u64>,
    pub convergence: ConvergenceBlock,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario<'a> {
    version: u32,
    kind: ScenarioKind,
    #[serde(default)]
    grid: GridBlock,
    #[serde(borrow, default)]
    problem: Option<&'a RawValue>,
    #[serde(default)]
    solver: SolverBlock,
    #[serde(default)]
    outputs: OutputBlock,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    convergence: ConvergenceBlock,
}

/// 1-based line and column of a byte offset.
fn locate(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn offset_of(text: &str, line: usize, col: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    let rest = &text[start.min(text.len())..];
    start + rest.char_indices().nth(col.saturating_sub(1)).map_or(rest.len(), |(i, _)| i)
}

fn parse_error(e: &serde_json::Error, text: &str, base: usize) -> RunError {
    let (line, column) = if e.line() == 0 {
        (None, None)
    } else {
        let sub = &text[base..];
        let (l, c) = locate(text, base + offset_of(sub, e.line(), e.column()));
        (Some(l), Some(c))
    };
    let msg = e.to_string();
    let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    RunError { code: "config", message: msg, line, column, margins: None }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let raw: RawScenario<'_> = serde_json::from_str(text).map_err(|e| parse_error(&e, text, 0))?;
        if raw.version != SCHEMA_VERSION {
            return Err(RunError::new(
                "config",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.version),
            ));
        }
        let problem = match raw.problem {
            None => match raw.kind {
                ScenarioKind::Abstract => ProblemSpec::Abstract(AbstractProblem::Coupled(BenchmarkParams::default())),
                ScenarioKind::Dvhi => ProblemSpec::Dvhi(DvhiBlock::Benchmark(DvhiBenchmark::default())),
                ScenarioKind::Contact => ProblemSpec::Contact(Box::default()),
            },
            Some(p) => {
                let sub = p.get();
                let base = sub.as_ptr() as usize - text.as_ptr() as usize;
                let err = |e: serde_json::Error| parse_error(&e, text, base);
                match raw.kind {
                    ScenarioKind::Abstract => ProblemSpec::Abstract(serde_json::from_str(sub).map_err(err)?),
                    ScenarioKind::Dvhi => ProblemSpec::Dvhi(serde_json::from_str(sub).map_err(err)?),
                    ScenarioKind::Contact => ProblemSpec::Contact(serde_json::from_str(sub).map_err(err)?),
                }
            }
        };
        let cfg = Self {
            version: raw.version,
            kind: raw.kind,
            grid: raw.grid,
            problem,
            solver: raw.solver,
            outputs: raw.outputs,
            seed: raw.seed,
            convergence: raw.convergence,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let as_config = |e: Error| RunError::new("config", e.to_string());
        TimeGrid::new(self.grid.horizon, self.grid.steps).map_err(as_config)?;
        self.solver.config().validate().map_err(as_config)?;
        if self.convergence.steps.len() < 2 || self.convergence.steps.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
            return Err(RunError::new(
                "config",
                "convergence.steps needs at least two increasing entries, each dividing the next",
            ));
        }
        if self.outputs.vtk_stride == Some(0) {
            return Err(RunError::new("config", "outputs.vtk_stride must be positive"));
        }
        match &self.problem {
            ProblemSpec::Contact(c) => c.validate().map_err(as_config)?,
            ProblemSpec::Abstract(AbstractProblem::Coupled(p) | AbstractProblem::Linear(p))
                if p.dim_v == 0 || p.dim_e == 0 || p.dim_aux == 0 =>
            {
                return Err(RunError::new("config", "benchmark dimensions must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, opts: &RunOptions) -> Self {
        if let Some(s) = opts.seed {
            self.seed = Some(s);
        }
        if let Some(m) = opts.mode {
            self.solver.mode = m;
        }
        if let Some(seed) = self.seed {
            match &mut self.problem {
                ProblemSpec::Abstract(AbstractProblem::Coupled(p) | AbstractProblem::Linear(p)) => p.seed = seed,
                ProblemSpec::Dvhi(DvhiBlock::Benchmark(p)) => p.seed = seed,
                _ => {}
            }
        }
        self
    }

    /// SHA-256 of everything that determines the numbers (outputs excluded).
    pub fn digest(&self) -> String {
        let key = serde_json::json!({
            "version": self.version,
            "kind": self.kind,
            "grid": self.grid,
            "problem": self.problem,
            "solver": self.solver,
            "seed": self.seed,
            "convergence": self.convergence,
        });
        format!("{:x}", Sha256::digest(key.to_string().as_bytes()))
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed.unwrap_or(SamplerConfig::default().seed),
            horizon: self.grid.horizon,
            ..SamplerConfig::default()
        }
    }
}

/// Structured failure carried to the caller and serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins: Option<Vec<f64>>,
}

impl RunError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), line: None, column: None, margins: None }
    }

    /// 2 gate failure, 3 non-convergence, 4 configuration, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.code {
            "gate" => 2,
            "non_convergence" | "max_iterations" => 3,
            "config" | "argument" => 4,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " (line {l}, column {c})")?;
        }
        Ok(())
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let margins = match &e {
            Error::Gate { margins, .. } => Some(margins.clone()),
            _ => None,
        };
        Self { code: e.code(), message: e.to_string(), line: None, column: None, margins }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<SolveMode>,
    /// Worker threads for independent runs; 0 or 1 runs serially.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateResult {
    pub name: String,
    pub pass: bool,
    pub labels: Vec<String>,
    pub margins: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GateResult {
    fn from_report(name: &str, r: &SmallnessReport) -> Self {
        Self {
            name: name.to_string(),
            pass: r.pass,
            labels: r.labels.clone(),
            margins: r.margins.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    /// Absent for the report itself.
    pub bytes: Option<u64>,
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub dt: f64,
    /// Max coefficient difference to the next refinement on shared nodes.
    pub difference: Option<f64>,
    pub observed_order: Option<f64>,
    pub exact_error: Option<f64>,
    pub exact_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: Command,
    pub kind: ScenarioKind,
    pub scenario_digest: String,
    pub pass: bool,
    pub gates: Vec<GateResult>,
    pub probes: Vec<ProbeReport>,
    pub diagnostics: Option<SolveDiagnostics>,
    pub details: serde_json::Value,
    pub manifest: Vec<ManifestEntry>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

struct Writer {
    dir: Option<PathBuf>,
    formats: Vec<Format>,
    manifest: Vec<ManifestEntry>,
}

impl Writer {
    fn wants(&self, f: Format) -> bool {
        self.dir.is_some() && self.formats.contains(&f)
    }

    fn emit(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        std::fs::create_dir_all(dir)
            .map_err(|e| RunError::new("io", format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| RunError::new("io", format!("cannot write {}: {e}", path.display())))?;
        self.manifest.push(ManifestEntry {
            path: name.to_string(),
            bytes: Some(body.len() as u64),
            sha256: Some(format!("{:x}", Sha256::digest(body.as_bytes()))),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, t: &Trajectory) -> Result<(), RunError> {
        if self.wants(Format::Csv) {
            self.emit(name, &t.to_csv())?;
        }
        Ok(())
    }
}

struct Outcome {
    gates: Vec<GateResult>,
    probes: Vec<ProbeReport>,
    diagnostics: Option<SolveDiagnostics>,
    details: serde_json::Value,
}

impl Outcome {
    fn gates(gates: Vec<GateResult>) -> Self {
        Self { gates, probes: Vec::new(), diagnostics: None, details: serde_json::Value::Null }
    }
}

fn grid_of(cfg: &ScenarioConfig, steps: usize) -> Result<TimeGrid, RunError> {
    Ok(TimeGrid::new(cfg.grid.horizon, steps)?)
}

fn abstract_problem(p: &AbstractProblem, horizon: f64, steps: usize) -> Result<(SystemProblem, TimeGrid), RunError> {
    let with_grid = |b: &BenchmarkParams| BenchmarkParams { horizon, steps, ..*b };
    Ok(match p {
        AbstractProblem::Coupled(b) => coupled_benchmark(&with_grid(b))?,
        AbstractProblem::Linear(b) => linear_estimate_instance(&with_grid(b))?,
        AbstractProblem::LinearDecay => linear_decay(horizon, steps)?,
        AbstractProblem::Manufactured => manufactured_linear(horizon, steps)?,
        AbstractProblem::Zero { dim_v, dim_e } => zero_data(*dim_v, *dim_e, horizon, steps)?,
        AbstractProblem::Ledger { .. } => {
            return Err(RunError::new("config", "a bare ledger can only be checked, not solved"))
        }
    })
}

/// Exact `(w, θ)` when the builtin has a closed form.
fn exact_solution(p: &ProblemSpec, t: f64) -> Option<(f64, f64)> {
    match p {
        ProblemSpec::Abstract(AbstractProblem::LinearDecay) => Some(((-t).exp(), (-t).exp())),
        ProblemSpec::Abstract(AbstractProblem::Manufactured) => Some(manufactured_exact(t)),
        ProblemSpec::Abstract(AbstractProblem::Zero { .. }) => Some((0.0, 0.0)),
        _ => None,
    }
}

fn probes_gate(probes: &[ProbeReport]) -> GateResult {
    GateResult {
        name: "declared_constants".into(),
        pass: probes.iter().all(|r| r.pass),
        labels: probes.iter().map(|r| r.target.clone()).collect(),
        margins: probes
            .iter()
            .map(|r| {
                // strong moduli must not fall below the declared value; everything else must not exceed it
                if r.target.ends_with("strong_monotonicity") {
                    r.estimated_constant - r.declared_constant
                } else {
                    r.declared_constant - r.estimated_constant
                }
            })
            .collect(),
        warnings: Vec::new(),
    }
}

fn run_check(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let steps = cfg.grid.steps.min(16);
    let grid = grid_of(cfg, steps)?;
    let sampler = cfg.sampler();
    let (problem, mut gates, details) = match &cfg.problem {
        ProblemSpec::Abstract(AbstractProblem::Ledger { m_a, m_j, m_b, m_g }) => {
            let l = Ledger { m_a: *m_a, m_j: *m_j, m_b: *m_b, m_g: *m_g, ..Default::default() };
            let r = check_smallness(&l)?;
            return Ok(Outcome::gates(vec![GateResult::from_report("smallness", &r)]));
        }
        ProblemSpec::Abstract(p) => (abstract_problem(p, cfg.grid.horizon, steps)?.0, Vec::new(), serde_json::Value::Null),
        ProblemSpec::Dvhi(DvhiBlock::Benchmark(b)) => {
            let (p, mapping) = build_system(&dvhi_benchmark(b)?)?;
            (p, Vec::new(), serde_json::json!({ "mapping": mapping }))
        }
        ProblemSpec::Contact(setup) => {
            let asm = assemble_problem(setup)?;
            let r = check_contact_smallness(&asm.ledger)?;
            let p = asm.system_for(&grid)?;
            (p, vec![GateResult::from_report("contact_smallness", &r)], serde_json::json!({ "ledger": asm.ledger }))
        }
    };
    gates.push(GateResult::from_report("smallness", &problem.smallness()?));
    let probes = problem.probe(&grid, &sampler)?;
    gates.push(probes_gate(&probes));
    Ok(Outcome { gates, probes, diagnostics: None, details })
}

struct Solved {
    w: Trajectory,
    theta: Trajectory,
    diag: SolveDiagnostics,
    gates: Vec<GateResult>,
    details: serde_json::Value,
}

fn solve_at(cfg: &ScenarioConfig, steps: usize, w: &mut Writer, tag: &str) -> Result<Solved, RunError> {
    let grid = grid_of(cfg, steps)?;
    let solver = cfg.solver.config();
    match &cfg.problem {
        ProblemSpec::Abstract(p) => {
            let (problem, grid) = abstract_problem(p, cfg.grid.horizon, steps)?;
            let gate = problem.smallness()?;
            let sol = solve_system(&problem, &grid, &solver)?;
            let mut details = serde_json::json!({ "ledger": problem.ledger() });
            if let Some(err) = exact_error(&cfg.problem, &sol.w, &sol.theta) {
                details["exact_error"] = err.into();
            }
            Ok(Solved {
                w: sol.w,
                theta: sol.theta,
                diag: sol.diag,
                gates: vec![GateResult::from_report("smallness", &gate)],
                details,
            })
        }
        ProblemSpec::Dvhi(DvhiBlock::Benchmark(b)) => {
            let d = dvhi_benchmark(b)?;
            let sol = solve_dvhi(&d, &grid, &solver)?;
            let ineq = check_inequality_residual(&d, &sol.u, &sol.theta, &grid, INEQUALITY_DIRECTIONS)?;
            let gate = check_smallness(&sol.mapping.ledger)?;
            Ok(Solved {
                w: sol.u,
                theta: sol.theta,
                diag: sol.diag,
                gates: vec![GateResult::from_report("smallness", &gate)],
                details: serde_json::json!({ "mapping": sol.mapping, "inequality": ineq }),
            })
        }
        ProblemSpec::Contact(setup) => {
            let asm = assemble_problem(setup)?;
            let sol = solve_contact(&asm, &grid, &solver)?;
            w.csv(&format!("u{tag}.csv"), &sol.u)?;
            if w.wants(Format::Csv) {
                let mut s = String::from("t,triangle,sxx,syy,sxy\n");
                for (k, row) in sol.sigma.iter().enumerate() {
                    for (tri, sg) in row.iter().enumerate() {
                        s.push_str(&format!("{:.17e},{tri},{:.17e},{:.17e},{:.17e}\n", grid.node(k), sg[0], sg[1], sg[2]));
                    }
                }
                w.emit(&format!("stress{tag}.csv"), &s)?;
            }
            if w.wants(Format::Vtk) {
                let stride = cfg.outputs.vtk_stride.unwrap_or(steps);
                let mut nodes: Vec<usize> = (0..=steps).step_by(stride).collect();
                if nodes.last() != Some(&steps) {
                    nodes.push(steps);
                }
                for k in nodes {
                    w.emit(&format!("contact{tag}_{k:05}.vtk"), &write_vtk(&asm, &sol, k)?)?;
                }
            }
            Ok(Solved {
                gates: vec![GateResult::from_report("contact_smallness", &sol.smallness)],
                details: serde_json::json!({
                    "ledger": sol.ledger,
                    "max_normal_displacement": sol.max_normal_displacement,
                }),
                w: sol.w,
                theta: sol.theta,
                diag: sol.diag,
            })
        }
    }
}

fn exact_error(p: &ProblemSpec, w: &Trajectory, theta: &Trajectory) -> Option<f64> {
    let grid = w.grid();
    let mut err: f64 = 0.0;
    for k in 0..=grid.steps() {
        let (we, te) = exact_solution(p, grid.node(k))?;
        err = err.max(w.value(k).iter().map(|x| (x - we).abs()).fold(0.0, f64::max));
        err = err.max(theta.value(k).iter().map(|x| (x - te).abs()).fold(0.0, f64::max));
    }
    Some(err)
}

fn run_solve(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Outcome, RunError> {
    let s = solve_at(cfg, cfg.grid.steps, w, "")?;
    w.csv("w.csv", &s.w)?;
    w.csv("theta.csv", &s.theta)?;
    Ok(Outcome { gates: s.gates, probes: Vec::new(), diagnostics: Some(s.diag), details: s.details })
}

/// Convergence table recomputed from emitted CSV text only:
/// `(steps, w csv, θ csv)` sorted by increasing `steps`.
pub fn convergence_table(runs: &[(usize, String, String)], exact: Option<&dyn Fn(f64) -> (f64, f64)>) -> Result<Vec<ConvergenceRow>, RunError> {
    let mut parsed = Vec::new();
    for (n, wc, tc) in runs {
        let (times, w) = parse_csv(wc)?;
        let (_, th) = parse_csv(tc)?;
        if w.len() != n + 1 || th.len() != n + 1 {
            return Err(RunError::new("argument", format!("trajectory for N = {n} has the wrong length")));
        }
        parsed.push((*n, times, w, th));
    }
    let mut rows: Vec<ConvergenceRow> = parsed
        .iter()
        .map(|(n, times, w, th)| {
            let exact_error = exact.map(|f| {
                times
                    .iter()
                    .zip(w.iter().zip(th))
                    .map(|(t, (a, b))| {
                        let (we, te) = f(*t);
                        a.iter().map(|x| (x - we).abs()).chain(b.iter().map(|x| (x - te).abs())).fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            });
            ConvergenceRow {
                steps: *n,
                dt: times.last().copied().unwrap_or(0.0) / *n as f64,
                difference: None,
                observed_order: None,
                exact_error,
                exact_order: None,
            }
        })
        .collect();
    for i in 0..parsed.len().saturating_sub(1) {
        let (nc, _, wc, tc) = &parsed[i];
        let (nf, _, wf, tf) = &parsed[i + 1];
        let r = nf / nc;
        let mut d: f64 = 0.0;
        for k in 0..=*nc {
            d = d.max((&wc[k] - &wf[k * r]).amax()).max((&tc[k] - &tf[k * r]).amax());
        }
        rows[i].difference = Some(d);
    }
    for i in 0..rows.len().saturating_sub(1) {
        let ratio = (rows[i + 1].steps as f64 / rows[i].steps as f64).ln();
        let order = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / ratio),
            _ => None,
        };
        rows[i].observed_order = order(rows[i].difference, rows[i + 1].difference);
        rows[i].exact_order = order(rows[i].exact_error, rows[i + 1].exact_error);
    }
    Ok(rows)
}

fn run_convergence(cfg: &ScenarioConfig, w: &mut Writer, jobs: usize) -> Result<Outcome, RunError> {
    let steps = cfg.convergence.steps.clone();
    let results = parallel_map(&steps, jobs, |&n| {
        let mut local = Writer { dir: w.dir.clone(), formats: w.formats.clone(), manifest: Vec::new() };
        let s = solve_at(cfg, n, &mut local, &format!("_N{n}"))?;
        Ok::<_, RunError>((n, s, local.manifest))
    });
    let mut runs = Vec::new();
    let mut gates = Vec::new();
    let mut diag = None;
    for r in results {
        let (n, s, manifest) = r?;
        w.manifest.extend(manifest);
        let (wc, tc) = (s.w.to_csv(), s.theta.to_csv());
        if w.wants(Format::Csv) {
            w.emit(&format!("w_N{n}.csv"), &wc)?;
            w.emit(&format!("theta_N{n}.csv"), &tc)?;
        }
        gates = s.gates;
        diag = Some(s.diag);
        runs.push((n, wc, tc));
    }
    let exact = |t: f64| exact_solution(&cfg.problem, t).unwrap_or((f64::NAN, f64::NAN));
    let has_exact = exact_solution(&cfg.problem, 0.0).is_some();
    let table = convergence_table(&runs, if has_exact { Some(&exact) } else { None })?;
    if w.wants(Format::Csv) {
        let mut s = String::from("steps,dt,difference,observed_order,exact_error,exact_order\n");
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.17e}"));
        for r in &table {
            s.push_str(&format!(
                "{},{:.17e},{},{},{},{}\n",
                r.steps,
                r.dt,
                f(r.difference),
                f(r.observed_order),
                f(r.exact_error),
                f(r.exact_order)
            ));
        }
        w.emit("convergence.csv", &s)?;
    }
    Ok(Outcome { gates, probes: Vec::new(), diagnostics: diag, details: serde_json::json!({ "table": table }) })
}

/// Runs `f` on every item with at most `jobs` worker threads, keeping order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()) {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            s.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                if tx.send((i, f(item))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<(usize, R)> = rx.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

/// Executes one command on a parsed scenario.
pub fn run(cfg: &ScenarioConfig, command: Command, opts: &RunOptions) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let cfg = cfg.clone().with_overrides(opts);
    let needed = match command {
        Command::Dvhi => Some(ScenarioKind::Dvhi),
        Command::Contact => Some(ScenarioKind::Contact),
        _ => None,
    };
    if let Some(k) = needed {
        if cfg.kind != k {
            return Err(RunError::new(
                "config",
                format!("command `{}` needs a scenario of kind {k:?}, got {:?}", serde_name(&command), cfg.kind),
            ));
        }
    }
    let mut writer = Writer {
        dir: opts.out_dir.clone().or_else(|| cfg.outputs.directory.clone()),
        formats: cfg.outputs.formats.clone(),
        manifest: Vec::new(),
    };
    let outcome = match command {
        Command::Check => run_check(&cfg)?,
        Command::Solve | Command::Dvhi | Command::Contact => run_solve(&cfg, &mut writer)?,
        Command::Convergence => run_convergence(&cfg, &mut writer, opts.jobs)?,
    };
    let pass = outcome.gates.iter().all(|g| g.pass);
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command,
        kind: cfg.kind,
        scenario_digest: cfg.digest(),
        pass,
        gates: outcome.gates,
        probes: outcome.probes,
        diagnostics: outcome.diagnostics,
        details: outcome.details,
        manifest: writer.manifest.clone(),
        wall_clock_seconds: 0.0,
    };
    if writer.wants(Format::Json) {
        report.manifest.push(ManifestEntry { path: "report.json".into(), bytes: None, sha256: None });
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    if writer.wants(Format::Json) {
        let body = serde_json::to_string_pretty(&report).map_err(|e| RunError::new("io", e.to_string()))?;
        let mut w = Writer { dir: writer.dir.clone(), formats: writer.formats.clone(), manifest: Vec::new() };
        w.emit("report.json", &body)?;
    }
    Ok(report)
}

fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Runs several scenario files, each into its own subdirectory when more than
/// one is given.
pub fn run_many(paths: &[PathBuf], command: Command, opts: &RunOptions) -> Vec<Result<RunReport, RunError>> {
    let multi = paths.len() > 1;
    parallel_map(paths, opts.jobs, |path| {
        let cfg = ScenarioConfig::from_path(path)?;
        let mut o = opts.clone();
        if multi {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            o.out_dir = o.out_dir.map(|d| d.join(&stem));
        }
        // each scenario runs serially inside its worker
        o.jobs = if multi { 1 } else { opts.jobs };
        run(&cfg, command, &o)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScenarioConfig, RunError> {
        ScenarioConfig::from_json(s)
    }

    #[test]
    fn ledger_check_passes() {
        let cfg = parse(r#"{"version":1,"kind":"abstract","problem":{"builtin":"ledger","m_a":2,"m_j":1,"m_b":1,"m_g":0}}"#).unwrap();
        let r = run(&cfg, Command::Check, &RunOptions::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.gates[0].margins, vec![1.0, 1.0]);
    }

    #[test]
    fn zero_data_solves_in_one_pass() {
        let cfg = parse(r#"{"version":1,"kind":"abstract","grid":{"T":1,"N":16},"problem":{"builtin":"zero","dim_v":3,"dim_e":2}}"#)
            .unwrap();
        let r = run(&cfg, Command::Solve, &RunOptions::default()).unwrap();
        let d = r.diagnostics.unwrap();
        assert_eq!(d.picard_iters, 1);
        assert_eq!(r.details["exact_error"].as_f64(), Some(0.0));
    }

    #[test]
    fn parse_errors_carry_locations() {
        let text = "{\n  \"version\": 1,\n  \"kind\": \"contact\",\n  \"problem\": {\n    \"mesh\": {\"nx\": \"eight\"}\n  }\n}";
        let e = parse(text).unwrap_err();
        assert_eq!(e.code, "config");
        assert_eq!(e.line, Some(5));
        assert!(e.column.unwrap() > 10, "{e:?}");
        let e = parse("{\"version\": 1, \"kind\": \"abstract\", \"bogus\": 3}").unwrap_err();
        assert_eq!((e.code, e.line), ("config", Some(1)));
        assert_eq!(parse(r#"{"version":2,"kind":"abstract"}"#).unwrap_err().exit_code(), 4);
        let e = parse(r#"{"version":1,"kind":"abstract","problem":{"builtin":"nope"}}"#).unwrap_err();
        assert!(e.message.contains("nope"));
    }

    #[test]
    fn digest_ignores_outputs_and_tracks_numbers() {
        let a = parse(r#"{"version":1,"kind":"abstract"}"#).unwrap();
        let b = parse(r#"{"version":1,"kind":"abstract","outputs":{"directory":"x"}}"#).unwrap();
        let c = parse(r#"{"version":1,"kind":"abstract","grid":{"N":32}}"#).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn kind_mismatch_is_a_config_error() {
        let cfg = parse(r#"{"version":1,"kind":"abstract"}"#).unwrap();
        assert_eq!(run(&cfg, Command::Contact, &RunOptions::default()).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..20).collect();
        assert_eq!(parallel_map(&v, 4, |x| x * x), v.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}
