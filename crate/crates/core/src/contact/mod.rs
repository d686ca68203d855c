//! Dynamic thermoviscoelastic frictional contact on a 2D rectangle,
//! discretised with P1 finite elements.

pub mod assemble;
pub mod fem;
pub mod laws;
pub mod mesh;
pub mod vtk;

pub use assemble::{
    assemble_problem, check_contact_smallness, solve_contact, ContactAssembly, ContactLedger, ContactSetup,
    ContactSolution,
};
pub use fem::{FemSpaces, Sym};
pub use laws::{ContactInitial, ContactLaw, ContactLoads, MaterialLaw, Poly};
pub use mesh::{BoundaryTag, Mesh2D, MeshSpec, Side, SideTags};
