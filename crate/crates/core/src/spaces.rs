//! Degree-of-freedom maps for the four discrete spaces and boundary data.
//!
//! * Stokes velocity: continuous P1 enriched with a per-triangle bubble,
//!   two components each (MINI element, fluid region only).
//! * Stokes pressure: continuous P1 on the fluid region.
//! * Darcy velocity: RT0 with one flux dof per porous edge.
//! * Darcy pressure: one constant per porous triangle.
//!
//! Numbering is deterministic: entities are enumerated in ascending global
//! index order.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Region, TriMesh};

/// MINI velocity space on the fluid region: per-vertex dofs `(2v, 2v+1)`
/// followed by per-triangle bubble dofs.
#[derive(Debug, Clone)]
pub struct StokesVelocitySpace {
    /// Global vertex ids of fluid vertices, ascending.
    pub vertices: Vec<usize>,
    /// Global triangle ids of fluid triangles, ascending.
    pub triangles: Vec<usize>,
    /// Map global vertex id -> local fluid vertex index.
    vertex_local: Vec<Option<usize>>,
    /// Map global triangle id -> local fluid triangle index.
    tri_local: Vec<Option<usize>>,
    /// Vertex dofs (both components) on the velocity Dirichlet boundary.
    pub dirichlet_dofs: Vec<usize>,
}

impl StokesVelocitySpace {
    pub fn ndofs(&self) -> usize {
        2 * self.vertices.len() + 2 * self.triangles.len()
    }

    pub fn vertex_dof(&self, global_vertex: usize, component: usize) -> usize {
        2 * self.vertex_local[global_vertex].expect("not a fluid vertex") + component
    }

    pub fn bubble_dof(&self, global_tri: usize, component: usize) -> usize {
        2 * self.vertices.len() + 2 * self.tri_local[global_tri].expect("not a fluid triangle")
            + component
    }

    pub fn is_fluid_vertex(&self, global_vertex: usize) -> bool {
        self.vertex_local[global_vertex].is_some()
    }
}

/// Continuous P1 pressure on the fluid region, one dof per fluid vertex.
/// No zero-mean constraint: the interface coupling fixes the level.
#[derive(Debug, Clone)]
pub struct StokesPressureSpace {
    pub vertices: Vec<usize>,
    vertex_local: Vec<Option<usize>>,
}

impl StokesPressureSpace {
    pub fn ndofs(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_dof(&self, global_vertex: usize) -> usize {
        self.vertex_local[global_vertex].expect("not a fluid vertex")
    }
}

/// RT0 flux space on the porous region, one dof per porous edge. The dof is
/// the integrated flux through the edge with respect to the global edge
/// normal. Edges on the flux boundary are essential.
#[derive(Debug, Clone)]
pub struct DarcyVelocitySpace {
    /// Global edge ids of porous edges (including interface edges), ascending.
    pub edges: Vec<usize>,
    edge_local: Vec<Option<usize>>,
    /// Edge dofs on the normal-flux boundary.
    pub essential_dofs: Vec<usize>,
}

impl DarcyVelocitySpace {
    pub fn ndofs(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_dof(&self, global_edge: usize) -> usize {
        self.edge_local[global_edge].expect("not a porous edge")
    }
}

/// Piecewise-constant pressure on the porous region, one dof per triangle.
/// The pressure Dirichlet condition is natural in the mixed form and never
/// constrains these dofs.
#[derive(Debug, Clone)]
pub struct DarcyPressureSpace {
    pub triangles: Vec<usize>,
    tri_local: Vec<Option<usize>>,
}

impl DarcyPressureSpace {
    pub fn ndofs(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_dof(&self, global_tri: usize) -> usize {
        self.tri_local[global_tri].expect("not a porous triangle")
    }
}

/// The four discrete spaces over one mesh.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub stokes_vel: StokesVelocitySpace,
    pub stokes_pr: StokesPressureSpace,
    pub darcy_vel: DarcyVelocitySpace,
    pub darcy_pr: DarcyPressureSpace,
}

/// Build all four spaces from a tagged mesh.
pub fn build_spaces(mesh: &TriMesh) -> Result<Spaces> {
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary() && edge.boundary_tag.is_none() {
            return Err(Error::Mesh(format!("boundary edge {e} is untagged")));
        }
    }

    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();

    let mut fluid_vertex = vec![false; nv];
    let mut fluid_tris = Vec::new();
    let mut porous_tris = Vec::new();
    for t in 0..nt {
        match mesh.triangle_region[t] {
            Region::Fluid => {
                fluid_tris.push(t);
                for &v in &mesh.triangles[t] {
                    fluid_vertex[v] = true;
                }
            }
            Region::Porous => porous_tris.push(t),
        }
    }
    let fluid_vertices: Vec<usize> = (0..nv).filter(|&v| fluid_vertex[v]).collect();

    let mut vertex_local = vec![None; nv];
    for (i, &v) in fluid_vertices.iter().enumerate() {
        vertex_local[v] = Some(i);
    }
    let mut tri_local_f = vec![None; nt];
    for (i, &t) in fluid_tris.iter().enumerate() {
        tri_local_f[t] = Some(i);
    }
    let mut tri_local_p = vec![None; nt];
    for (i, &t) in porous_tris.iter().enumerate() {
        tri_local_p[t] = Some(i);
    }

    // Velocity Dirichlet dofs: vertices incident to a GammaF edge. Interface
    // vertices stay free unless they also touch GammaF (the corners).
    let mut dirichlet_vertex = vec![false; nv];
    for edge in &mesh.edges {
        if edge.boundary_tag == Some(BoundaryTag::GammaF) {
            dirichlet_vertex[edge.vertices[0]] = true;
            dirichlet_vertex[edge.vertices[1]] = true;
        }
    }
    let mut dirichlet_dofs = Vec::new();
    for (i, &v) in fluid_vertices.iter().enumerate() {
        if dirichlet_vertex[v] {
            dirichlet_dofs.push(2 * i);
            dirichlet_dofs.push(2 * i + 1);
        }
    }

    let stokes_vel = StokesVelocitySpace {
        vertices: fluid_vertices.clone(),
        triangles: fluid_tris,
        vertex_local: vertex_local.clone(),
        tri_local: tri_local_f,
        dirichlet_dofs,
    };
    let stokes_pr = StokesPressureSpace {
        vertices: fluid_vertices,
        vertex_local,
    };

    // Porous edges: edges adjacent to at least one porous triangle.
    let mut porous_edges = Vec::new();
    let mut edge_local = vec![None; mesh.edges.len()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let adjacent_porous = {
            let first = mesh.triangle_region[edge.tris.0] == Region::Porous;
            let second = edge
                .tris
                .1
                .map(|t| mesh.triangle_region[t] == Region::Porous)
                .unwrap_or(false);
            first || second
        };
        if adjacent_porous {
            edge_local[e] = Some(porous_edges.len());
            porous_edges.push(e);
        }
    }
    let essential_dofs: Vec<usize> = porous_edges
        .iter()
        .enumerate()
        .filter(|&(_, &e)| mesh.edges[e].boundary_tag == Some(BoundaryTag::GammaP))
        .map(|(i, _)| i)
        .collect();

    let darcy_vel = DarcyVelocitySpace {
        edges: porous_edges,
        edge_local,
        essential_dofs,
    };
    let darcy_pr = DarcyPressureSpace {
        triangles: porous_tris,
        tri_local: tri_local_p,
    };

    Ok(Spaces {
        stokes_vel,
        stokes_pr,
        darcy_vel,
        darcy_pr,
    })
}

/// Time-dependent boundary trace data: velocity Dirichlet values on the
/// fluid boundary, normal flux on the porous flux boundary and pressure
/// trace on the porous Dirichlet side.
pub struct BoundaryData {
    /// `u_f` on the fluid Dirichlet boundary, `(x, t) -> vector`.
    pub velocity: Box<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>,
    /// Normal flux `u_p . n_p` on the porous flux boundary; receives the
    /// outward normal so vector-valued data can be projected.
    pub flux: Box<dyn Fn([f64; 2], f64, [f64; 2]) -> f64 + Send + Sync>,
    /// Pressure trace on the porous Dirichlet side.
    pub pressure: Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>,
}

impl BoundaryData {
    pub fn homogeneous() -> Self {
        BoundaryData {
            velocity: Box::new(|_, _| [0.0, 0.0]),
            flux: Box::new(|_, _, _| 0.0),
            pressure: Box::new(|_, _| 0.0),
        }
    }
}

/// Values for the Stokes velocity Dirichlet dofs at time `t` (nodal
/// interpolation of the trace data).
pub fn stokes_dirichlet_values(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    data: &BoundaryData,
    t: f64,
) -> Vec<f64> {
    space
        .dirichlet_dofs
        .iter()
        .map(|&dof| {
            let local = dof / 2;
            let component = dof % 2;
            let x = mesh.vertices[space.vertices[local]];
            (data.velocity)(x, t)[component]
        })
        .collect()
}

/// Values for the essential Darcy flux dofs at time `t`: the integrated
/// flux through each boundary edge, oriented by the global edge normal.
pub fn darcy_essential_values(
    mesh: &TriMesh,
    space: &DarcyVelocitySpace,
    data: &BoundaryData,
    t: f64,
    equad: &crate::fem::EdgeQuadrature,
) -> Vec<f64> {
    space
        .essential_dofs
        .iter()
        .map(|&dof| {
            let e = space.edges[dof];
            let edge = &mesh.edges[e];
            let (a, b) = (mesh.vertices[edge.vertices[0]], mesh.vertices[edge.vertices[1]]);
            let len = mesh.edge_length(e);
            let n_e = mesh.edge_normal(e);
            // A boundary edge of the porous region has exactly one adjacent
            // (porous) triangle; its stored sign orients the global normal
            // outward.
            let tri = edge.tris.0;
            let local = mesh.tri_edges[tri].iter().position(|&x| x == e).unwrap();
            let orient = mesh.tri_edge_signs[tri][local] as f64;
            let n_out = [orient * n_e[0], orient * n_e[1]];
            let mut flux = 0.0;
            for (s, w) in equad.points.iter().zip(&equad.weights) {
                let x = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
                flux += w * (data.flux)(x, t, n_out) * len;
            }
            orient * flux
        })
        .collect()
}
