use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl Default for SideTags {
    fn default() -> Self {
        Self {
            bottom: BoundaryTag::Contact,
            right: BoundaryTag::Neumann,
            top: BoundaryTag::Dirichlet,
            left: BoundaryTag::Neumann,
        }
    }
}

impl SideTags {
    pub fn tag(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }
}

/// Rectangle `[0, lx] × [0, ly]` split into `nx × ny` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub tags: SideTags,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { lx: 2.0, ly: 1.0, nx: 8, ny: 4, tags: SideTags::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: BoundaryTag,
}

/// Structured triangulation whose diagonals are mirrored about `x = lx/2`,
/// so the mesh is symmetric under the reflection when `nx` is even.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub spec: MeshSpec,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise triangles.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl Mesh2D {
    pub fn rectangle(spec: MeshSpec) -> Result<Self> {
        if !(spec.lx > 0.0 && spec.ly > 0.0 && spec.lx.is_finite() && spec.ly.is_finite()) {
            return Err(Error::config("mesh: side lengths must be positive and finite"));
        }
        if spec.nx == 0 || spec.ny == 0 {
            return Err(Error::config("mesh: cell counts must be positive"));
        }
        let (nx, ny) = (spec.nx, spec.ny);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([spec.lx * i as f64 / nx as f64, spec.ly * j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if 2 * i < nx {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        let mut boundary_edges = Vec::new();
        let mut push = |nodes: [usize; 2], side: Side| {
            boundary_edges.push(BoundaryEdge { nodes, side, tag: spec.tags.tag(side) })
        };
        // counter-clockwise walk around the perimeter
        for i in 0..nx {
            push([id(i, 0), id(i + 1, 0)], Side::Bottom);
        }
        for j in 0..ny {
            push([id(nx, j), id(nx, j + 1)], Side::Right);
        }
        for i in (0..nx).rev() {
            push([id(i + 1, ny), id(i, ny)], Side::Top);
        }
        for j in (0..ny).rev() {
            push([id(0, j + 1), id(0, j)], Side::Left);
        }
        let mesh = Self { spec, nodes, triangles, boundary_edges };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::config("mesh: triangle with non-positive orientation"));
            }
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.nodes;
            *boundary.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        for (edge, n) in &count {
            let tagged = boundary.get(edge).copied().unwrap_or(0);
            let ok = match n {
                1 => tagged == 1,
                2 => tagged == 0,
                _ => false,
            };
            if !ok {
                return Err(Error::config(format!("mesh: edge {edge:?} is not conforming or not tagged once")));
            }
        }
        if boundary.len() != self.boundary_edges.len() || boundary.keys().any(|k| !count.contains_key(k)) {
            return Err(Error::config("mesh: boundary edge list is inconsistent"));
        }
        if self.tagged_length(BoundaryTag::Dirichlet) <= 0.0 {
            return Err(Error::config("mesh: the clamped boundary must have positive length"));
        }
        Ok(())
    }

    fn signed_area(&self, t: &[usize; 3]) -> f64 {
        let [p, q, r] = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn area(&self, tri: usize) -> f64 {
        self.signed_area(&self.triangles[tri])
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let [p, q] = [self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]];
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn tagged_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges.iter().filter(|e| e.tag == tag).map(|e| self.edge_length(e)).sum()
    }

    /// Index of the node reflected about `x = lx/2`.
    pub fn mirror_node(&self, n: usize) -> usize {
        let nx = self.spec.nx;
        let (i, j) = (n % (nx + 1), n / (nx + 1));
        j * (nx + 1) + (nx - i)
    }

    /// Nodes lying on an edge with the given tag.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut on = vec![false; self.nodes.len()];
        for e in self.boundary_edges.iter().filter(|e| e.tag == tag) {
            on[e.nodes[0]] = true;
            on[e.nodes[1]] = true;
        }
        on
    }

    pub fn barycenter(&self, tri: usize) -> [f64; 2] {
        let t = self.triangles[tri];
        let mut c = [0.0; 2];
        for &n in &t {
            c[0] += self.nodes[n][0] / 3.0;
            c[1] += self.nodes[n][1] / 3.0;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_is_valid_and_symmetric() {
        let m = Mesh2D::rectangle(MeshSpec::default()).unwrap();
        assert_eq!(m.nodes.len(), 45);
        assert_eq!(m.triangles.len(), 64);
        let total: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        assert!((total - 2.0).abs() < 1e-12);
        let mut mirrored: Vec<[usize; 3]> = m
            .triangles
            .iter()
            .map(|t| {
                let mut s = t.map(|n| m.mirror_node(n));
                s.sort();
                s
            })
            .collect();
        let mut orig: Vec<[usize; 3]> = m.triangles.iter().map(|t| { let mut s = *t; s.sort(); s }).collect();
        mirrored.sort();
        orig.sort();
        assert_eq!(mirrored, orig);
    }

    #[test]
    fn rejects_bad_specs() {
        let no_clamp = MeshSpec {
            tags: SideTags { top: BoundaryTag::Neumann, ..SideTags::default() },
            ..MeshSpec::default()
        };
        assert!(matches!(Mesh2D::rectangle(no_clamp), Err(Error::Config(_))));
        assert!(Mesh2D::rectangle(MeshSpec { nx: 0, ..MeshSpec::default() }).is_err());
        assert!(Mesh2D::rectangle(MeshSpec { lx: -1.0, ..MeshSpec::default() }).is_err());
    }
}
