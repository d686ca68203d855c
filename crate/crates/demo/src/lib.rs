//! Browser bindings: each export returns a JSON string, with an `error`
//! field on failure.

use std::sync::Arc;

use hvi_core::benchmark::{coupled_benchmark, BenchmarkParams};
use hvi_core::contact::fem::sym_norm;
use hvi_core::contact::{assemble_problem, solve_contact, ContactSetup, MeshSpec};
use hvi_core::operators::{
    ClarkePotentialG, ClarkePotentialJ, ConstantsA, ConstantsB, ConstantsPhi, ConvexPotentialPhi, HistoryOperator,
    OperatorFamilyA, OperatorFamilyB, TimeFn,
};
use hvi_core::system::{constant_load, solve_system, SystemConfig, SystemParts, SystemProblem};
use hvi_core::{DiscreteSpace, SpaceLabel, TimeGrid, Vector};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn reply(r: hvi_core::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// `w' + w + μ∂|w| ∋ a·sin(2πt)` from `w₀ = 0`, next to the frictionless run.
fn friction_inclusion(friction: f64, amplitude: f64, steps: usize) -> hvi_core::Result<Value> {
    let grid = TimeGrid::new(2.0, steps)?;
    let solve = |mu: f64| -> hvi_core::Result<Vec<f64>> {
        let space = |l| DiscreteSpace::euclidean(l, 1).map(Arc::new);
        let phi = ConvexPotentialPhi::new(ConstantsPhi { c0: TimeFn::constant(mu), ..Default::default() }, move |_, _, _, rho, x| {
            x.map(|a| a.signum() * (a.abs() - rho * mu).max(0.0))
        })
        .with_value(move |_, _, _, v| mu * v[0].abs());
        let p = SystemProblem::new(SystemParts {
            v: space(SpaceLabel::V)?,
            e: space(SpaceLabel::E)?,
            y: space(SpaceLabel::Y)?,
            z: space(SpaceLabel::Z)?,
            q: space(SpaceLabel::Q)?,
            op_a: OperatorFamilyA::new(ConstantsA { m: 1.0, a2: 1.0, ..Default::default() }, |_, _, w| w.clone()),
            pot_j: ClarkePotentialJ::zero(1),
            pot_phi: phi,
            op_b: OperatorFamilyB::new(ConstantsB { m: 1.0, b3: 1.0, ..Default::default() }, |_, _, _, th| th.clone()),
            pot_g: ClarkePotentialG::zero(1),
            hist_r: HistoryOperator::zero(1),
            hist_r1: HistoryOperator::zero(1),
            hist_r2: HistoryOperator::zero(1),
            hist_s: HistoryOperator::zero(1),
            load1: Arc::new(move |t| Vector::from_element(1, amplitude * (std::f64::consts::TAU * t).sin())),
            load2: constant_load(Vector::zeros(1)),
            w0: Vector::zeros(1),
            theta0: Vector::zeros(1),
        })?;
        let sol = solve_system(&p, &grid, &SystemConfig::default())?;
        Ok(sol.w.values().iter().map(|v| v[0]).collect())
    };
    let t: Vec<f64> = (0..=steps).map(|k| grid.node(k)).collect();
    Ok(json!({ "t": t, "w": solve(friction)?, "free": solve(0.0)? }))
}

#[wasm_bindgen]
pub fn scalar_inclusion(friction: f64, amplitude: f64, steps: usize) -> String {
    reply(friction_inclusion(friction, amplitude, steps))
}

/// Coupled benchmark with `m_A = m_B = 1` and the given margin; reports the
/// gate and, when it passes, the solution norms and Picard increments.
#[wasm_bindgen]
pub fn coupled_system(margin: f64, seed: u32, steps: usize) -> String {
    reply((|| {
        let params = BenchmarkParams { steps, ..BenchmarkParams::with_margin(margin, seed.into()) };
        let (p, g) = coupled_benchmark(&params)?;
        let gate = p.smallness()?;
        if !gate.pass {
            return Ok(json!({ "gate": gate }));
        }
        let sol = solve_system(&p, &g, &SystemConfig::default())?;
        let norms = |tr: &hvi_core::Trajectory| tr.values().iter().map(|v| v.norm()).collect::<Vec<_>>();
        Ok(json!({
            "gate": gate,
            "t": (0..=steps).map(|k| g.node(k)).collect::<Vec<_>>(),
            "w": norms(&sol.w),
            "theta": norms(&sol.theta),
            "increments": sol.diag.increments,
            "picard_iters": sol.diag.picard_iters,
        }))
    })())
}

/// Thermoviscoelastic contact on an `nx × ny` strip; returns the deformed
/// mesh, nodal temperature and stress magnitude per triangle at `T`.
#[wasm_bindgen]
pub fn contact_field(nx: usize, ny: usize, friction: f64, steps: usize) -> String {
    reply((|| {
        let mut setup = ContactSetup { mesh: MeshSpec { nx, ny, ..MeshSpec::default() }, ..ContactSetup::default() };
        setup.contact.friction = friction;
        let asm = assemble_problem(&setup)?;
        let grid = TimeGrid::new(1.0, steps)?;
        let sol = solve_contact(&asm, &grid, &SystemConfig::default())?;
        let f = &asm.fem;
        Ok(json!({
            "nodes": f.mesh.nodes,
            "triangles": f.mesh.triangles,
            "displacement": f.expand_v(sol.u.value(steps)),
            "temperature": f.expand_e(sol.theta.value(steps)),
            "stress": sol.sigma[steps].iter().map(sym_norm).collect::<Vec<_>>(),
            "margins": sol.smallness.margins,
            "picard_iters": sol.diag.picard_iters,
        }))
    })())
}
