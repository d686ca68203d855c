//! Legacy ASCII VTK output for a single time node of a contact run.

use std::fmt::Write;

use super::assemble::{ContactAssembly, ContactSolution};
use crate::error::{Error, Result};

pub fn write_vtk(asm: &ContactAssembly, sol: &ContactSolution, k: usize) -> Result<String> {
    let grid = sol.w.grid();
    if k > grid.steps() {
        return Err(Error::arg(format!("time node {k} is past the last node {}", grid.steps())));
    }
    let mesh = &asm.fem.mesh;
    let mut s = String::new();
    let nn = mesh.nodes.len();
    let nt = mesh.triangles.len();
    // writing into a String cannot fail
    let _ = writeln!(s, "# vtk DataFile Version 3.0\ncontact t={}\nASCII\nDATASET UNSTRUCTURED_GRID", grid.node(k));
    let _ = writeln!(s, "POINTS {nn} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "POINT_DATA {nn}");
    for (name, field) in [("displacement", sol.u.value(k)), ("velocity", sol.w.value(k))] {
        let _ = writeln!(s, "VECTORS {name} double");
        for v in asm.fem.expand_v(field) {
            let _ = writeln!(s, "{} {} 0", v[0], v[1]);
        }
    }
    let _ = writeln!(s, "SCALARS temperature double 1\nLOOKUP_TABLE default");
    for th in asm.fem.expand_e(sol.theta.value(k)) {
        let _ = writeln!(s, "{th}");
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nTENSORS stress double");
    for sg in &sol.sigma[k] {
        let _ = writeln!(s, "{} {} 0\n{} {} 0\n0 0 0", sg[0], sg[2], sg[2], sg[1]);
    }
    Ok(s)
}
