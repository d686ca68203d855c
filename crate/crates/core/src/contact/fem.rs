//! P1 spaces on a [`Mesh2D`]: vector velocity space with clamped nodes
//! removed, scalar temperature space vanishing on the clamped and loaded
//! sides, and nodal boundary quadrature on the contact zone.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Cholesky;

use super::mesh::{BoundaryTag, Mesh2D};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, power_iteration_max};
use crate::spaces::{DiscreteSpace, SpaceLabel};
use crate::{Matrix, Vector};

/// Symmetric 2×2 tensor stored as `(xx, yy, xy)`, with
/// `a : b = a_xx b_xx + a_yy b_yy + 2 a_xy b_xy`.
pub type Sym = [f64; 3];

pub fn sym_dot(a: &Sym, b: &Sym) -> f64 {
    a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]
}

pub fn sym_norm(a: &Sym) -> f64 {
    sym_dot(a, a).sqrt()
}

/// Relative tolerance and iteration cap of the trace-norm power iteration.
const TRACE_TOL: f64 = 1e-10;
const TRACE_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct FemSpaces {
    pub mesh: Arc<Mesh2D>,
    /// Mesh node of each velocity block (dofs `2k`, `2k+1`).
    pub v_nodes: Vec<usize>,
    pub v_index: Vec<Option<usize>>,
    /// Mesh node of each temperature dof.
    pub e_nodes: Vec<usize>,
    pub e_index: Vec<Option<usize>>,
    /// Velocity blocks on the contact zone, in perimeter order.
    pub contact: Vec<ContactNode>,
    /// Temperature dofs on the contact zone with their boundary weights.
    pub e_contact: Vec<(usize, f64)>,
    /// Gradients of the three hat functions on each triangle.
    pub grads: Vec<[[f64; 2]; 3]>,
    pub areas: Vec<f64>,
    /// Strain energy / mass.
    pub v_space: Arc<DiscreteSpace>,
    /// Dirichlet energy / mass.
    pub e_space: Arc<DiscreteSpace>,
    /// `L²(Γ_C)` with nodal weights on the contact velocity nodes.
    pub gamma_space: Arc<DiscreteSpace>,
    /// Boundary smoothing, temperature dofs → contact nodes.
    pub smoothing: Matrix,
    pub trace_v: f64,
    pub trace_e: f64,
    pub smoothing_norm: f64,
    /// Embedding constant of the temperature space into `L²(Ω)`.
    pub poincare: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactNode {
    pub mesh_node: usize,
    pub block: usize,
    pub weight: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl ContactNode {
    pub fn normal_part(&self, v: &Vector) -> f64 {
        v[2 * self.block] * self.normal[0] + v[2 * self.block + 1] * self.normal[1]
    }

    pub fn tangent_part(&self, v: &Vector) -> f64 {
        v[2 * self.block] * self.tangent[0] + v[2 * self.block + 1] * self.tangent[1]
    }
}

impl FemSpaces {
    pub fn new(mesh: Mesh2D) -> Result<Self> {
        let n = mesh.nodes.len();
        let clamped = mesh.nodes_with_tag(BoundaryTag::Dirichlet);
        let loaded = mesh.nodes_with_tag(BoundaryTag::Neumann);
        let mut v_index = vec![None; n];
        let mut v_nodes = Vec::new();
        let mut e_index = vec![None; n];
        let mut e_nodes = Vec::new();
        for i in 0..n {
            if !clamped[i] {
                v_index[i] = Some(v_nodes.len());
                v_nodes.push(i);
                if !loaded[i] {
                    e_index[i] = Some(e_nodes.len());
                    e_nodes.push(i);
                }
            }
        }
        if v_nodes.is_empty() || e_nodes.is_empty() {
            return Err(Error::config("mesh leaves no free velocity or temperature nodes"));
        }
        let (nv, ne) = (2 * v_nodes.len(), e_nodes.len());
        let nt = mesh.triangles.len();
        let mut grads = Vec::with_capacity(nt);
        let mut areas = Vec::with_capacity(nt);
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let area = mesh.area(ti);
            let p = t.map(|k| mesh.nodes[k]);
            let mut g = [[0.0; 2]; 3];
            for a in 0..3 {
                let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                g[a] = [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)];
            }
            grads.push(g);
            areas.push(area);
        }
        let mut k_v = Matrix::zeros(nv, nv);
        let mut m_v = Matrix::zeros(nv, nv);
        let mut k_e = Matrix::zeros(ne, ne);
        let mut m_e = Matrix::zeros(ne, ne);
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let (g, area) = (grads[ti], areas[ti]);
            for a in 0..3 {
                for b in 0..3 {
                    let mass = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    if let (Some(ia), Some(ib)) = (v_index[t[a]], v_index[t[b]]) {
                        for c in 0..2 {
                            for d in 0..2 {
                                let ea = unit_strain(&g[a], c);
                                let eb = unit_strain(&g[b], d);
                                k_v[(2 * ia + c, 2 * ib + d)] += area * sym_dot(&ea, &eb);
                            }
                            m_v[(2 * ia + c, 2 * ib + c)] += mass;
                        }
                    }
                    if let (Some(ia), Some(ib)) = (e_index[t[a]], e_index[t[b]]) {
                        k_e[(ia, ib)] += area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        m_e[(ia, ib)] += mass;
                    }
                }
            }
        }
        let symmetrize = |m: Matrix| (&m + m.transpose()) * 0.5;
        let v_space = Arc::new(DiscreteSpace::new(SpaceLabel::V, symmetrize(k_v), symmetrize(m_v))?);
        let e_space = Arc::new(DiscreteSpace::new(SpaceLabel::E, symmetrize(k_e), symmetrize(m_e))?);

        // nodal weights and normals on the contact zone
        let mut weight: HashMap<usize, f64> = HashMap::new();
        let mut normal: HashMap<usize, [f64; 2]> = HashMap::new();
        let perimeter: Vec<usize> = mesh.boundary_edges.iter().map(|e| e.nodes[0]).collect();
        for e in mesh.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Contact) {
            let half = 0.5 * mesh.edge_length(e);
            let nrm = e.side.outward_normal();
            for &k in &e.nodes {
                *weight.entry(k).or_default() += half;
                let acc = normal.entry(k).or_insert([0.0; 2]);
                acc[0] += nrm[0];
                acc[1] += nrm[1];
            }
        }
        let mut contact = Vec::new();
        for &k in &perimeter {
            if let (Some(&w), Some(block)) = (weight.get(&k), v_index[k]) {
                let nn = normal[&k];
                let len = nn[0].hypot(nn[1]);
                let nu = [nn[0] / len, nn[1] / len];
                contact.push(ContactNode { mesh_node: k, block, weight: w, normal: nu, tangent: [-nu[1], nu[0]] });
            }
        }
        let mut e_contact: Vec<(usize, f64)> = perimeter
            .iter()
            .filter_map(|k| Some((e_index[*k]?, *weight.get(k)?)))
            .collect();
        e_contact.dedup();
        if contact.is_empty() {
            return Err(Error::config("mesh has no free contact nodes"));
        }
        let gamma_gram = Matrix::from_diagonal(&Vector::from_iterator(contact.len(), contact.iter().map(|c| c.weight)));
        let gamma_space = Arc::new(DiscreteSpace::new(SpaceLabel::Y, gamma_gram.clone(), gamma_gram.clone())?);

        // (1/2, 1/4, 1/4) averaging with the perimeter neighbours
        let np = perimeter.len();
        let pos: HashMap<usize, usize> = perimeter.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut smoothing = Matrix::zeros(contact.len(), ne);
        for (r, c) in contact.iter().enumerate() {
            let i = pos[&c.mesh_node];
            for (k, w) in [(perimeter[i], 0.5), (perimeter[(i + np - 1) % np], 0.25), (perimeter[(i + 1) % np], 0.25)] {
                if let Some(col) = e_index[k] {
                    smoothing[(r, col)] += w;
                }
            }
        }

        let mut bv = Matrix::zeros(nv, nv);
        for c in &contact {
            bv[(2 * c.block, 2 * c.block)] = c.weight;
            bv[(2 * c.block + 1, 2 * c.block + 1)] = c.weight;
        }
        let mut be = Matrix::zeros(ne, ne);
        for &(i, w) in &e_contact {
            be[(i, i)] = w;
        }
        let trace_v = trace_norm_of(&bv, v_space.gram_strong())?;
        let trace_e = trace_norm_of(&be, e_space.gram_strong())?;
        let smoothing_norm = operator_norm(&smoothing, e_space.gram_weak(), &gamma_gram)?;
        let poincare = trace_norm_of(e_space.gram_weak(), e_space.gram_strong())?;
        Ok(Self {
            mesh: Arc::new(mesh),
            v_nodes,
            v_index,
            e_nodes,
            e_index,
            contact,
            e_contact,
            grads,
            areas,
            v_space,
            e_space,
            gamma_space,
            smoothing,
            trace_v,
            trace_e,
            smoothing_norm,
            poincare,
        })
    }

    pub fn dim_v(&self) -> usize {
        2 * self.v_nodes.len()
    }

    pub fn dim_e(&self) -> usize {
        self.e_nodes.len()
    }

    /// Constant strain of a velocity field on a triangle.
    pub fn strain(&self, tri: usize, v: &Vector) -> Sym {
        let t = self.mesh.triangles[tri];
        let g = &self.grads[tri];
        let mut e = [0.0; 3];
        for a in 0..3 {
            if let Some(k) = self.v_index[t[a]] {
                let (u1, u2) = (v[2 * k], v[2 * k + 1]);
                e[0] += u1 * g[a][0];
                e[1] += u2 * g[a][1];
                e[2] += 0.5 * (u1 * g[a][1] + u2 * g[a][0]);
            }
        }
        e
    }

    /// Adds `area · σ : ε(φ)` for every velocity dof of a triangle.
    pub fn add_stress(&self, tri: usize, sigma: &Sym, out: &mut Vector) {
        let t = self.mesh.triangles[tri];
        let (g, area) = (&self.grads[tri], self.areas[tri]);
        for a in 0..3 {
            if let Some(k) = self.v_index[t[a]] {
                out[2 * k] += area * (sigma[0] * g[a][0] + sigma[2] * g[a][1]);
                out[2 * k + 1] += area * (sigma[1] * g[a][1] + sigma[2] * g[a][0]);
            }
        }
    }

    /// Mean of a temperature field over a triangle (its barycentric value).
    pub fn mean_temperature(&self, tri: usize, th: &Vector) -> f64 {
        self.mesh.triangles[tri].iter().filter_map(|&n| self.e_index[n]).map(|k| th[k]).sum::<f64>() / 3.0
    }

    pub fn temperature_gradient(&self, tri: usize, th: &Vector) -> [f64; 2] {
        let t = self.mesh.triangles[tri];
        let g = &self.grads[tri];
        let mut out = [0.0; 2];
        for a in 0..3 {
            if let Some(k) = self.e_index[t[a]] {
                out[0] += th[k] * g[a][0];
                out[1] += th[k] * g[a][1];
            }
        }
        out
    }

    /// Velocity at every mesh node, zero on clamped nodes.
    pub fn expand_v(&self, v: &Vector) -> Vec<[f64; 2]> {
        self.v_index.iter().map(|i| i.map_or([0.0; 2], |k| [v[2 * k], v[2 * k + 1]])).collect()
    }

    pub fn expand_e(&self, th: &Vector) -> Vec<f64> {
        self.e_index.iter().map(|i| i.map_or(0.0, |k| th[k])).collect()
    }

    /// Nodal interpolation of a vector field.
    pub fn interpolate_v(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vector {
        let mut out = Vector::zeros(self.dim_v());
        for (k, &n) in self.v_nodes.iter().enumerate() {
            let val = f(self.mesh.nodes[n]);
            out[2 * k] = val[0];
            out[2 * k + 1] = val[1];
        }
        out
    }

    pub fn interpolate_e(&self, f: impl Fn([f64; 2]) -> f64) -> Vector {
        Vector::from_iterator(self.dim_e(), self.e_nodes.iter().map(|&n| f(self.mesh.nodes[n])))
    }

    /// Reflection about `x = lx/2` acting on velocity coefficients.
    pub fn mirror_v(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim_v());
        for (k, &n) in self.v_nodes.iter().enumerate() {
            if let Some(m) = self.v_index[self.mesh.mirror_node(n)] {
                out[2 * m] = -v[2 * k];
                out[2 * m + 1] = v[2 * k + 1];
            }
        }
        out
    }

    pub fn mirror_e(&self, th: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim_e());
        for (k, &n) in self.e_nodes.iter().enumerate() {
            if let Some(m) = self.e_index[self.mesh.mirror_node(n)] {
                out[m] = th[k];
            }
        }
        out
    }
}

/// Strain of the hat function times the unit vector `e_c`.
fn unit_strain(g: &[f64; 2], c: usize) -> Sym {
    if c == 0 {
        [g[0], 0.0, 0.5 * g[1]]
    } else {
        [0.0, g[1], 0.5 * g[0]]
    }
}

/// `sqrt(λ_max(b, k))` by power iteration.
fn trace_norm_of(b: &Matrix, k: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(k.clone()).ok_or_else(|| Error::config("strong Gram matrix is not SPD"))?;
    power_iteration_max(b, &chol, TRACE_TOL, TRACE_MAX_ITER)
        .map(f64::sqrt)
        .map_err(|e| e.annotate("trace norm"))
}

/// Norm of the velocity trace onto `L²(Γ_C)`.
pub fn trace_norm(fem: &FemSpaces) -> f64 {
    fem.trace_v
}
