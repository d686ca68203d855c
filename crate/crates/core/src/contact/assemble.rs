//! Velocity–temperature formulation of the contact problem as a coupled
//! inclusion system, plus displacement and stress recovery.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fem::{sym_norm, FemSpaces, Sym};
use super::laws::{ContactInitial, ContactLaw, ContactLoads, MaterialLaw, Poly};
use super::mesh::{BoundaryTag, Mesh2D, MeshSpec};
use crate::error::{Error, Result};
use crate::operators::{
    ClarkePotentialG, ClarkePotentialJ, ConstantsA, ConstantsB, ConstantsG, ConstantsJ, ConstantsPhi,
    ConvexPotentialPhi, HistoryOperator, OperatorFamilyA, OperatorFamilyB, TimeFn,
};
use crate::probes::SmallnessReport;
use crate::spaces::{DiscreteSpace, SpaceLabel, TimeGrid, Trajectory};
use crate::system::{solve_system, SolveDiagnostics, SystemConfig, SystemParts, SystemProblem};
use crate::{Matrix, Vector};

/// Everything that defines a contact run apart from the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactSetup {
    pub mesh: MeshSpec,
    pub material: MaterialLaw,
    pub contact: ContactLaw,
    pub loads: ContactLoads,
    pub initial: ContactInitial,
    /// `false` freezes the temperature at zero in the mechanics and removes
    /// every heat source.
    pub thermal: bool,
}

impl Default for ContactSetup {
    fn default() -> Self {
        Self {
            mesh: MeshSpec::default(),
            material: MaterialLaw::default(),
            contact: ContactLaw::default(),
            loads: ContactLoads {
                body: [Poly { terms: vec![[0.5, 1.0, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0]] }, Poly::constant(-1.0)],
                traction: [Poly::default(), Poly { terms: vec![[0.2, 0.0, 0.0, 1.0]] }],
                heat: Poly { terms: vec![[1.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 1.0]] },
            },
            initial: ContactInitial {
                displacement: [Poly::default(), Poly { terms: vec![[-0.05, 0.0, 1.0, 0.0], [0.05, 0.0, 0.0, 0.0]] }],
                velocity: [Poly::default(), Poly::default()],
                temperature: Poly::default(),
            },
            thermal: true,
        }
    }
}

impl ContactSetup {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.contact.validate()?;
        self.loads.validate()?;
        self.initial.validate()
    }

    /// The same setup with every heat source switched off.
    pub fn without_heat_sources(&self) -> Self {
        let mut s = self.clone();
        s.material.heating = 0.0;
        s.contact.slip_heating = 0.0;
        s.contact.exchange = 0.0;
        s.contact.exchange_softening = 0.0;
        s.loads.heat = Poly::default();
        s.initial.temperature = Poly::default();
        s
    }
}

/// Constants entering the contact smallness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactLedger {
    pub m_visc: f64,
    pub beta: f64,
    pub damper_max: f64,
    pub trace_v: f64,
    pub m_conduct: f64,
    pub softening: f64,
    pub trace_e: f64,
    pub smoothing_norm: f64,
}

impl ContactLedger {
    pub fn m_j(&self) -> f64 {
        self.beta * self.damper_max * self.trace_v * self.trace_v
    }

    pub fn m_g(&self) -> f64 {
        self.softening * self.trace_e * self.trace_e
    }
}

/// `m_visc > β̄·k₂·‖γ‖²` and `m_conduct > m₀·‖γ_E‖²`.
pub fn check_contact_smallness(l: &ContactLedger) -> Result<SmallnessReport> {
    SmallnessReport::from_inequalities(&[
        ("m_visc > beta*k2*|trace|^2", l.m_visc, l.m_j()),
        ("m_conduct > m0*|trace_E|^2", l.m_conduct, l.m_g()),
    ])
}

/// Assembled contact problem.
pub struct ContactAssembly {
    pub setup: ContactSetup,
    pub fem: Arc<FemSpaces>,
    pub problem: SystemProblem,
    pub ledger: ContactLedger,
    pub u0: Vector,
}

fn triangle_loads(fem: &FemSpaces, t: f64, comps: &[&Poly], out: &mut [Vector], index: impl Fn(usize) -> Option<usize>, stride: usize) {
    for (tri, nodes) in fem.mesh.triangles.iter().enumerate() {
        let c = fem.mesh.barycenter(tri);
        let third = fem.areas[tri] / 3.0;
        for (d, p) in comps.iter().enumerate() {
            let val = p.eval(c, t) * third;
            for &n in nodes {
                if let Some(k) = index(n) {
                    out[0][stride * k + d] += val;
                }
            }
        }
    }
}

pub fn assemble_problem(setup: &ContactSetup) -> Result<ContactAssembly> {
    setup.validate()?;
    let mut eff = if setup.thermal { setup.clone() } else { setup.without_heat_sources() };
    eff.thermal = setup.thermal;
    let mesh = Mesh2D::rectangle(setup.mesh)?;
    let fem = Arc::new(FemSpaces::new(mesh)?);
    let (mat, law) = (eff.material, eff.contact);
    let (nv, ne, nc) = (fem.dim_v(), fem.dim_e(), fem.contact.len());
    let gamma_y = fem.gamma_space.clone();
    let gamma_z = Arc::new(DiscreteSpace::new(SpaceLabel::Z, gamma_y.gram_strong().clone(), gamma_y.gram_weak().clone())?);
    let contact_len: f64 = fem.contact.iter().map(|c| c.weight).sum();
    let (gv, ge, rn) = (fem.trace_v, fem.trace_e, fem.smoothing_norm.max(1.0));
    let thermal = setup.thermal;
    let freeze = move |th: &Vector| if thermal { th.clone() } else { Vector::zeros(th.len()) };

    let f = fem.clone();
    let op_a = OperatorFamilyA::new(
        ConstantsA {
            m: mat.m_visc(),
            mbar: mat.l_visc() + mat.l_thermal(),
            a0: TimeFn::constant(0.0),
            a1: mat.l_thermal(),
            a2: mat.growth_visc(),
        },
        move |_, th, v| {
            let th = freeze(th);
            let mut out = Vector::zeros(v.len());
            for tri in 0..f.areas.len() {
                let tm = f.mean_temperature(tri, &th);
                let e = f.strain(tri, v);
                let (s, c) = (mat.visc(tm, &e), mat.thermal(tm));
                f.add_stress(tri, &std::array::from_fn(|i| s[i] + c[i]), &mut out);
            }
            out
        },
    );

    let m_j = law.beta() * law.damper_max * gv * gv;
    let f = fem.clone();
    let pot_j = ClarkePotentialJ::new(
        ConstantsJ {
            c0: TimeFn::constant(law.damper_max * law.normal_bound * gv * contact_len.sqrt()),
            c1: 0.0,
            c2: 0.0,
            c3: m_j,
            m: m_j,
            mbar: law.l_damper() * law.normal_bound * gv * rn,
        },
        move |_, th, z, v| {
            let reg = &f.smoothing * freeze(th);
            let mut out = Vector::zeros(v.len());
            for (r, c) in f.contact.iter().enumerate() {
                let s = c.weight * law.damper(reg[r], z[r]) * law.normal_selection(c.normal_part(v));
                out[2 * c.block] += s * c.normal[0];
                out[2 * c.block + 1] += s * c.normal[1];
            }
            out
        },
    );

    let (f, fv) = (fem.clone(), fem.clone());
    let pot_phi = ConvexPotentialPhi::new(
        ConstantsPhi {
            c0: TimeFn::constant(1.5 * law.friction * gv * contact_len.sqrt()),
            m: law.l_friction() * rn * gv,
            ..Default::default()
        },
        move |_, th, y, rho, x| {
            let reg = &f.smoothing * freeze(th);
            let mut out = x.clone();
            for (r, c) in f.contact.iter().enumerate() {
                let thresh = rho * c.weight * law.friction_bound(reg[r], y[r]);
                let (xn, xt) = (c.normal_part(x), c.tangent_part(x));
                let st = xt.signum() * (xt.abs() - thresh).max(0.0);
                out[2 * c.block] = xn * c.normal[0] + st * c.tangent[0];
                out[2 * c.block + 1] = xn * c.normal[1] + st * c.tangent[1];
            }
            out
        },
    )
    .with_value(move |_, th, y, v| {
        let reg = &fv.smoothing * freeze(th);
        fv.contact
            .iter()
            .enumerate()
            .map(|(r, c)| c.weight * law.friction_bound(reg[r], y[r]) * c.tangent_part(v).abs())
            .sum()
    });

    let f = fem.clone();
    let mbar_b = mat.l_heating() * fem.poincare + law.slip_heating * gv * ge;
    let op_b = OperatorFamilyB::new(
        ConstantsB {
            m: mat.m_conduct(),
            mbar: mbar_b,
            b0: TimeFn::constant(law.slip_heating * ge * contact_len.sqrt()),
            b1: mbar_b,
            b2: 0.0,
            b3: mat.growth_conduct(),
        },
        move |_, w, _, th| {
            let mut out = Vector::zeros(th.len());
            for (tri, nodes) in f.mesh.triangles.iter().enumerate() {
                let (g, area) = (&f.grads[tri], f.areas[tri]);
                let q = mat.conduct(f.temperature_gradient(tri, th));
                let e = f.strain(tri, w);
                let heat = mat.heating(e[0] + e[1]) * area / 3.0;
                for a in 0..3 {
                    if let Some(k) = f.e_index[nodes[a]] {
                        out[k] += area * (q[0] * g[a][0] + q[1] * g[a][1]) - heat;
                    }
                }
            }
            for c in &f.contact {
                if let Some(k) = f.e_index[c.mesh_node] {
                    out[k] -= c.weight * law.slip_heat(c.tangent_part(w).abs());
                }
            }
            out
        },
    );

    let f = fem.clone();
    let pot_g = ClarkePotentialG::new(
        ConstantsG {
            c0: TimeFn::constant(0.0),
            c1: 0.0,
            c2: (law.exchange + law.exchange_softening) * ge * ge,
            m: law.exchange_softening * ge * ge,
            mbar: 0.0,
        },
        move |_, _, th| {
            let mut out = Vector::zeros(th.len());
            for c in &f.contact {
                if let Some(k) = f.e_index[c.mesh_node] {
                    out[k] += c.weight * law.exchange_selection(th[k]);
                }
            }
            out
        },
    );

    let u0 = fem.interpolate_v(|p| [eff.initial.displacement[0].eval(p, 0.0), eff.initial.displacement[1].eval(p, 0.0)]);
    let w0 = fem.interpolate_v(|p| [eff.initial.velocity[0].eval(p, 0.0), eff.initial.velocity[1].eval(p, 0.0)]);
    let theta0 = fem.interpolate_e(|p| eff.initial.temperature.eval(p, 0.0));

    // accumulated slip
    let (f, u0c) = (fem.clone(), u0.clone());
    let hist_r = HistoryOperator::custom(nc, T_PLACEHOLDER, move |grid, past, k| {
        let dt = grid.dt();
        let mut disp: Vec<f64> = f.contact.iter().map(|c| c.tangent_part(&u0c)).collect();
        let mut acc = Vector::zeros(f.contact.len());
        for v in past.iter().take(k) {
            for (r, c) in f.contact.iter().enumerate() {
                acc[r] += dt * disp[r].abs();
                disp[r] += dt * c.tangent_part(v);
            }
        }
        acc
    })?;

    // elastic response of the displacement plus the relaxation memory
    let c_r1 = mat.l_elast() + mat.relax_coef;
    let hist_r1 = if c_r1 > 0.0 {
        let (f, u0c) = (fem.clone(), u0.clone());
        HistoryOperator::custom(nv, c_r1, move |grid, past, k| {
            let dt = grid.dt();
            let tk = grid.node(k);
            let mut u = u0c.clone();
            for v in past.iter().take(k) {
                u += v * dt;
            }
            let nt = f.areas.len();
            let mut memory: Vec<Sym> = vec![[0.0; 3]; nt];
            for (j, v) in past.iter().take(k).enumerate() {
                let c = dt * mat.relax(tk - grid.node(j));
                for (tri, m) in memory.iter_mut().enumerate() {
                    let e = f.strain(tri, v);
                    for i in 0..3 {
                        m[i] += c * e[i];
                    }
                }
            }
            let mut out = Vector::zeros(u.len());
            for (tri, m) in memory.iter().enumerate() {
                let s = mat.elast(&f.strain(tri, &u));
                f.add_stress(tri, &std::array::from_fn(|i| s[i] + m[i]), &mut out);
            }
            out
        })?
    } else {
        HistoryOperator::zero(nv)
    };

    // accumulated normal displacement
    let mut normal = Matrix::zeros(nc, nv);
    for (r, c) in fem.contact.iter().enumerate() {
        normal[(r, 2 * c.block)] = c.normal[0];
        normal[(r, 2 * c.block + 1)] = c.normal[1];
    }
    let u0n = &normal * &u0;
    let hist_s = HistoryOperator::volterra(nc, gv, move |_, _| normal.clone())?.with_offset(u0n)?;

    let f = fem.clone();
    let loads = eff.loads.clone();
    let load1 = Arc::new(move |t: f64| {
        let mut out = [Vector::zeros(f.dim_v())];
        triangle_loads(&f, t, &[&loads.body[0], &loads.body[1]], &mut out, |n| f.v_index[n], 2);
        let [mut out] = out;
        for e in f.mesh.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Neumann) {
            let half = 0.5 * f.mesh.edge_length(e);
            for &n in &e.nodes {
                if let Some(k) = f.v_index[n] {
                    let p = f.mesh.nodes[n];
                    out[2 * k] += half * loads.traction[0].eval(p, t);
                    out[2 * k + 1] += half * loads.traction[1].eval(p, t);
                }
            }
        }
        out
    });
    let f = fem.clone();
    let heat = eff.loads.heat.clone();
    let load2 = Arc::new(move |t: f64| {
        let mut out = [Vector::zeros(f.dim_e())];
        triangle_loads(&f, t, &[&heat], &mut out, |n| f.e_index[n], 1);
        let [out] = out;
        out
    });

    let problem = SystemProblem::new(SystemParts {
        v: fem.v_space.clone(),
        e: fem.e_space.clone(),
        y: gamma_y,
        z: gamma_z,
        q: Arc::new(DiscreteSpace::euclidean(SpaceLabel::Q, 1)?),
        op_a,
        pot_j,
        pot_phi,
        op_b,
        pot_g,
        hist_r,
        hist_r1,
        hist_r2: HistoryOperator::zero(1),
        hist_s,
        load1,
        load2,
        w0,
        theta0,
    })?;
    let ledger = ContactLedger {
        m_visc: mat.m_visc(),
        beta: law.beta(),
        damper_max: law.damper_max,
        trace_v: gv,
        m_conduct: mat.m_conduct(),
        softening: law.exchange_softening,
        trace_e: ge,
        smoothing_norm: fem.smoothing_norm,
    };
    let _ = ne;
    Ok(ContactAssembly { setup: eff, fem, problem, ledger, u0 })
}

/// Placeholder replaced once the horizon is known; see [`with_slip_constant`].
const T_PLACEHOLDER: f64 = 1.0;

/// The slip operator's Volterra constant is `T·‖γ‖`, which depends on the
/// horizon of the grid it will run on.
fn with_slip_constant(asm: &ContactAssembly, grid: &TimeGrid) -> Result<SystemProblem> {
    let mut p = asm.problem.clone();
    let kind = p.hist_r.kind().clone();
    p.hist_r = HistoryOperator::new(kind, p.hist_r.target_dim(), grid.horizon() * asm.fem.trace_v)?;
    Ok(p)
}

impl ContactAssembly {
    /// System ready to run on `grid`.
    pub fn system_for(&self, grid: &TimeGrid) -> Result<SystemProblem> {
        with_slip_constant(self, grid)
    }

    /// `u_k = u₀ + Σ_{j<k} dt·w_j`.
    pub fn displacement(&self, w: &Trajectory) -> Result<Trajectory> {
        let dt = w.grid().dt();
        let mut u = self.u0.clone();
        let mut values = Vec::with_capacity(w.values().len());
        for v in w.values() {
            values.push(u.clone());
            u += v * dt;
        }
        Trajectory::new(w.space().clone(), w.grid(), values)
    }

    /// Stress at triangle barycentres for every node.
    pub fn stress(&self, u: &Trajectory, w: &Trajectory, theta: &Trajectory) -> Vec<Vec<Sym>> {
        let (f, mat) = (&self.fem, &self.setup.material);
        let grid = w.grid();
        let dt = grid.dt();
        let nt = f.areas.len();
        let strains: Vec<Vec<Sym>> = w.values().iter().map(|v| (0..nt).map(|t| f.strain(t, v)).collect()).collect();
        (0..=grid.steps())
            .map(|k| {
                let tk = grid.node(k);
                let th = if self.setup.thermal { theta.value(k).clone() } else { Vector::zeros(theta.value(k).len()) };
                (0..nt)
                    .map(|tri| {
                        let tm = f.mean_temperature(tri, &th);
                        let a = mat.visc(tm, &strains[k][tri]);
                        let b = mat.elast(&f.strain(tri, u.value(k)));
                        let c = mat.thermal(tm);
                        let mut s: Sym = std::array::from_fn(|i| a[i] + b[i] + c[i]);
                        for (j, e) in strains.iter().enumerate().take(k) {
                            let r = dt * mat.relax(tk - grid.node(j));
                            for i in 0..3 {
                                s[i] += r * e[tri][i];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }
}

pub struct ContactSolution {
    pub u: Trajectory,
    pub w: Trajectory,
    pub theta: Trajectory,
    /// `sigma[k][tri]`.
    pub sigma: Vec<Vec<Sym>>,
    pub diag: SolveDiagnostics,
    pub ledger: ContactLedger,
    pub smallness: SmallnessReport,
    /// Largest outward normal displacement on the contact zone (reported only).
    pub max_normal_displacement: f64,
}

pub fn solve_contact(asm: &ContactAssembly, grid: &TimeGrid, cfg: &SystemConfig) -> Result<ContactSolution> {
    let smallness = check_contact_smallness(&asm.ledger)?;
    smallness.require()?;
    let problem = asm.system_for(grid)?;
    let sol = solve_system(&problem, grid, cfg)?;
    finish(asm, sol.w, sol.theta, sol.diag, smallness)
}

pub(crate) fn finish(
    asm: &ContactAssembly,
    w: Trajectory,
    theta: Trajectory,
    diag: SolveDiagnostics,
    smallness: SmallnessReport,
) -> Result<ContactSolution> {
    let u = asm.displacement(&w)?;
    let sigma = asm.stress(&u, &w, &theta);
    let max_normal_displacement = u
        .values()
        .iter()
        .flat_map(|v| asm.fem.contact.iter().map(move |c| c.normal_part(v)))
        .fold(f64::NEG_INFINITY, f64::max);
    if sigma.iter().flatten().any(|s| !sym_norm(s).is_finite()) {
        return Err(Error::arg("stress recovery produced non-finite values"));
    }
    Ok(ContactSolution { u, w, theta, sigma, diag, ledger: asm.ledger, smallness, max_normal_displacement })
}
