//! Assembly of the bilinear forms and load vectors of the penalized weak
//! formulation: fluid stress with the slip term, Darcy mass and divergence
//! forms, interface pressure coupling and the normal-jump penalty blocks.
//!
//! Element contributions are accumulated in triplet buffers in a fixed
//! element order, so identical inputs produce bit-identical matrices.

use crate::error::{Error, Result};
use crate::fem::{
    bubble_value, p1_values, rt0_eval, EdgeQuadrature, TriangleGeometry, TriangleQuadrature,
};
use crate::mesh::{BoundaryTag, Region, TriMesh};
use crate::spaces::{
    BoundaryData, DarcyPressureSpace, DarcyVelocitySpace, Spaces, StokesPressureSpace,
    StokesVelocitySpace,
};
use crate::sparse::{CsrMatrix, Triplets};
use crate::verification::ManufacturedSolution;

/// Physical and penalty constants of the coupled model.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Diagonal hydraulic conductivity `(k1, k2)`.
    pub k: [f64; 2],
    /// Gravitational acceleration.
    pub g0: f64,
    /// Slip-condition constant.
    pub alpha: f64,
    /// Mass storativity.
    pub s0: f64,
    /// Interface penalty constant (mesh-independent).
    pub gamma: f64,
}

impl ModelParams {
    /// The verification-case parameter set: unit viscosity, identity
    /// conductivity, unit gravity, slip constant and storativity, penalty 1.
    pub fn unit() -> Self {
        ModelParams {
            nu: 1.0,
            k: [1.0, 1.0],
            g0: 1.0,
            alpha: 1.0,
            s0: 1.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("k1", self.k[0]),
            ("k2", self.k[1]),
            ("g0", self.g0),
            ("gamma", self.gamma),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(self.s0 >= 0.0) || !self.s0.is_finite() {
            return Err(Error::InvalidParam(format!("s0 must be >= 0, got {}", self.s0)));
        }
        if !(self.alpha > 0.0) && self.alpha != 0.0 {
            return Err(Error::InvalidParam(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `trace(Pi)` with `Pi = K nu / g0`.
    pub fn trace_pi(&self) -> f64 {
        self.nu * (self.k[0] + self.k[1]) / self.g0
    }

    /// Slip coefficient `alpha nu sqrt(d) / sqrt(trace(Pi))`, recomputed on
    /// demand so it never goes stale.
    pub fn bjs_coeff(&self) -> f64 {
        self.alpha * self.nu * (2.0f64).sqrt() / self.trace_pi().sqrt()
    }
}

const P1_DOFS: usize = 3;
/// Scalar basis functions per fluid triangle: three vertices plus a bubble.
const MINI_DOFS: usize = 4;

/// Scalar MINI basis values and physical gradients at a reference point.
fn mini_basis(geom: &TriangleGeometry, p: [f64; 2]) -> ([f64; MINI_DOFS], [[f64; 2]; MINI_DOFS]) {
    let l = p1_values(p);
    let gl = geom.p1_gradients();
    let values = [l[0], l[1], l[2], bubble_value(p)];
    let gb = geom.bubble_gradient(p);
    let grads = [gl[0], gl[1], gl[2], gb];
    (values, grads)
}

/// Global Stokes velocity dofs of one fluid triangle: vertex dofs for the
/// three scalar P1 functions and the two bubble components.
fn stokes_tri_dofs(mesh: &TriMesh, space: &StokesVelocitySpace, t: usize) -> [[usize; 2]; MINI_DOFS] {
    let tri = mesh.triangles[t];
    [
        [space.vertex_dof(tri[0], 0), space.vertex_dof(tri[0], 1)],
        [space.vertex_dof(tri[1], 0), space.vertex_dof(tri[1], 1)],
        [space.vertex_dof(tri[2], 0), space.vertex_dof(tri[2], 1)],
        [space.bubble_dof(t, 0), space.bubble_dof(t, 1)],
    ]
}

fn fluid_triangles(mesh: &TriMesh) -> impl Iterator<Item = usize> + '_ {
    (0..mesh.n_triangles()).filter(|&t| mesh.triangle_region[t] == Region::Fluid)
}

fn porous_triangles(mesh: &TriMesh) -> impl Iterator<Item = usize> + '_ {
    (0..mesh.n_triangles()).filter(|&t| mesh.triangle_region[t] == Region::Porous)
}

/// Signed orientation of the global edge normal against the interface
/// normal `n_f`.
fn interface_orientation(mesh: &TriMesh, ie: &crate::mesh::InterfaceEdge) -> f64 {
    let n_e = mesh.edge_normal(ie.edge);
    let dot = n_e[0] * ie.n_f[0] + n_e[1] * ie.n_f[1];
    if dot > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Endpoint vertices of an interface edge with the P1 edge mass matrix
/// `|e| [[1/3, 1/6], [1/6, 1/3]]`.
fn edge_mass(mesh: &TriMesh, e: usize) -> ([usize; 2], [[f64; 2]; 2]) {
    let verts = mesh.edges[e].vertices;
    let len = mesh.edge_length(e);
    let m = [
        [len / 3.0, len / 6.0],
        [len / 6.0, len / 3.0],
    ];
    (verts, m)
}

/// Fluid stress form: `2 nu (D(u), D(v))` over the fluid region plus the
/// tangential slip term on the interface.
pub fn assemble_a_f(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    params: &ModelParams,
    quad: &TriangleQuadrature,
) -> Result<CsrMatrix> {
    let n = space.ndofs();
    let mut trip = Triplets::new(n, n);
    for t in fluid_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t))?;
        let dofs = stokes_tri_dofs(mesh, space, t);
        let mut local = [[0.0; 2 * MINI_DOFS]; 2 * MINI_DOFS];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let (_, grads) = mini_basis(&geom, *p);
            let jw = 2.0 * geom.area * w;
            for i in 0..MINI_DOFS {
                for j in 0..MINI_DOFS {
                    let dot = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                    for k in 0..2 {
                        for l in 0..2 {
                            let mut v = grads[j][k] * grads[i][l];
                            if k == l {
                                v += dot;
                            }
                            local[2 * i + k][2 * j + l] += params.nu * jw * v;
                        }
                    }
                }
            }
        }
        for i in 0..MINI_DOFS {
            for k in 0..2 {
                for j in 0..MINI_DOFS {
                    for l in 0..2 {
                        trip.push(dofs[i][k], dofs[j][l], local[2 * i + k][2 * j + l]);
                    }
                }
            }
        }
    }

    // Tangential slip term on the interface; the bubble vanishes on edges so
    // only vertex dofs couple.
    let coeff = params.bjs_coeff();
    if coeff != 0.0 {
        for ie in &mesh.interface_edges {
            let (verts, m) = edge_mass(mesh, ie.edge);
            let tau = ie.tangent();
            for (a, &va) in verts.iter().enumerate() {
                for (b, &vb) in verts.iter().enumerate() {
                    for k in 0..2 {
                        for l in 0..2 {
                            trip.push(
                                space.vertex_dof(va, k),
                                space.vertex_dof(vb, l),
                                coeff * tau[k] * tau[l] * m[a][b],
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(trip.to_csr())
}

/// Velocity mass matrix `(u, v)` over the fluid region.
pub fn assemble_mass_f(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    quad: &TriangleQuadrature,
) -> Result<CsrMatrix> {
    let n = space.ndofs();
    let mut trip = Triplets::new(n, n);
    for t in fluid_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t))?;
        let dofs = stokes_tri_dofs(mesh, space, t);
        let mut local = [[0.0; MINI_DOFS]; MINI_DOFS];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let (values, _) = mini_basis(&geom, *p);
            let jw = 2.0 * geom.area * w;
            for i in 0..MINI_DOFS {
                for j in 0..MINI_DOFS {
                    local[i][j] += jw * values[i] * values[j];
                }
            }
        }
        for i in 0..MINI_DOFS {
            for j in 0..MINI_DOFS {
                for k in 0..2 {
                    trip.push(dofs[i][k], dofs[j][k], local[i][j]);
                }
            }
        }
    }
    Ok(trip.to_csr())
}

/// Divergence coupling `(q, div v)` on the fluid region; rows are pressure
/// dofs, columns velocity dofs.
pub fn assemble_b_f(
    mesh: &TriMesh,
    vel: &StokesVelocitySpace,
    pr: &StokesPressureSpace,
    quad: &TriangleQuadrature,
) -> Result<CsrMatrix> {
    let mut trip = Triplets::new(pr.ndofs(), vel.ndofs());
    for t in fluid_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t))?;
        let vdofs = stokes_tri_dofs(mesh, vel, t);
        let tri = mesh.triangles[t];
        let pdofs = [
            pr.vertex_dof(tri[0]),
            pr.vertex_dof(tri[1]),
            pr.vertex_dof(tri[2]),
        ];
        let mut local = [[0.0; 2 * MINI_DOFS]; P1_DOFS];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let (values, grads) = mini_basis(&geom, *p);
            let jw = 2.0 * geom.area * w;
            for i in 0..P1_DOFS {
                for j in 0..MINI_DOFS {
                    for l in 0..2 {
                        local[i][2 * j + l] += jw * values[i] * grads[j][l];
                    }
                }
            }
        }
        for i in 0..P1_DOFS {
            for j in 0..MINI_DOFS {
                for l in 0..2 {
                    trip.push(pdofs[i], vdofs[j][l], local[i][2 * j + l]);
                }
            }
        }
    }
    Ok(trip.to_csr())
}

/// Darcy velocity mass form `g0 (K^{-1} u, v)` on the porous region.
pub fn assemble_a_p(
    mesh: &TriMesh,
    space: &DarcyVelocitySpace,
    params: &ModelParams,
    quad: &TriangleQuadrature,
) -> Result<CsrMatrix> {
    let n = space.ndofs();
    let mut trip = Triplets::new(n, n);
    let winv = [params.g0 / params.k[0], params.g0 / params.k[1]];
    for t in porous_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t))?;
        let signs = mesh.tri_edge_signs[t];
        let dofs = [
            space.edge_dof(mesh.tri_edges[t][0]),
            space.edge_dof(mesh.tri_edges[t][1]),
            space.edge_dof(mesh.tri_edges[t][2]),
        ];
        let mut local = [[0.0; 3]; 3];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let (psi, _) = rt0_eval(&geom, signs, x);
            let jw = 2.0 * geom.area * w;
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] +=
                        jw * (winv[0] * psi[i][0] * psi[j][0] + winv[1] * psi[i][1] * psi[j][1]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                trip.push(dofs[i], dofs[j], local[i][j]);
            }
        }
    }
    Ok(trip.to_csr())
}

/// Darcy divergence coupling `g0 (q, div v)`; rows are cell dofs, columns
/// edge dofs. Exact: the divergence of a flux-normalized RT0 function is
/// `sign / |K|`, so each entry is `g0 * sign`.
pub fn assemble_b_p(
    mesh: &TriMesh,
    vel: &DarcyVelocitySpace,
    pr: &DarcyPressureSpace,
    params: &ModelParams,
) -> CsrMatrix {
    let mut trip = Triplets::new(pr.ndofs(), vel.ndofs());
    for t in porous_triangles(mesh) {
        let row = pr.tri_dof(t);
        for i in 0..3 {
            let e = mesh.tri_edges[t][i];
            trip.push(
                row,
                vel.edge_dof(e),
                params.g0 * mesh.tri_edge_signs[t][i] as f64,
            );
        }
    }
    trip.to_csr()
}

/// Piecewise-constant pressure mass matrix (diagonal of cell areas).
pub fn assemble_mass_p(mesh: &TriMesh, pr: &DarcyPressureSpace) -> CsrMatrix {
    let mut trip = Triplets::new(pr.ndofs(), pr.ndofs());
    for t in porous_triangles(mesh) {
        let d = pr.tri_dof(t);
        trip.push(d, d, mesh.triangle_area(t));
    }
    trip.to_csr()
}

/// Which velocity trace couples to the porous pressure on the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceSide {
    Fluid,
    Porous,
}

/// Interface pressure coupling `g0 <phi, v . n_f>` for the chosen velocity
/// trace; rows are velocity dofs, columns porous cell dofs. The porous side
/// enters the jump forms with the opposite sign, applied by the caller.
pub fn assemble_a_gamma(
    mesh: &TriMesh,
    pr: &DarcyPressureSpace,
    side: InterfaceSide,
    spaces: &Spaces,
    params: &ModelParams,
) -> CsrMatrix {
    match side {
        InterfaceSide::Fluid => {
            let vel = &spaces.stokes_vel;
            let mut trip = Triplets::new(vel.ndofs(), pr.ndofs());
            for ie in &mesh.interface_edges {
                let col = pr.tri_dof(ie.porous_tri);
                let (verts, _) = edge_mass(mesh, ie.edge);
                let len = mesh.edge_length(ie.edge);
                for &v in &verts {
                    for k in 0..2 {
                        // integral of the P1 hat over the edge is |e| / 2
                        trip.push(
                            vel.vertex_dof(v, k),
                            col,
                            params.g0 * ie.n_f[k] * 0.5 * len,
                        );
                    }
                }
            }
            trip.to_csr()
        }
        InterfaceSide::Porous => {
            let vel = &spaces.darcy_vel;
            let mut trip = Triplets::new(vel.ndofs(), pr.ndofs());
            for ie in &mesh.interface_edges {
                let col = pr.tri_dof(ie.porous_tri);
                let orient = interface_orientation(mesh, ie);
                // Normal trace of the edge's own basis function is
                // orient / |e|; the edge integral of a constant cancels |e|.
                trip.push(vel.edge_dof(ie.edge), col, params.g0 * orient);
            }
            trip.to_csr()
        }
    }
}

/// Normal-jump penalty blocks `gamma <u . n_f, v . n_f>` on the interface
/// for the requested (test, trial) trace pair.
pub fn assemble_penalty(
    mesh: &TriMesh,
    test: InterfaceSide,
    trial: InterfaceSide,
    spaces: &Spaces,
    params: &ModelParams,
) -> CsrMatrix {
    let gamma = params.gamma;
    let sv = &spaces.stokes_vel;
    let dv = &spaces.darcy_vel;
    match (test, trial) {
        (InterfaceSide::Fluid, InterfaceSide::Fluid) => {
            let mut trip = Triplets::new(sv.ndofs(), sv.ndofs());
            for ie in &mesh.interface_edges {
                let (verts, m) = edge_mass(mesh, ie.edge);
                for (a, &va) in verts.iter().enumerate() {
                    for (b, &vb) in verts.iter().enumerate() {
                        for k in 0..2 {
                            for l in 0..2 {
                                trip.push(
                                    sv.vertex_dof(va, k),
                                    sv.vertex_dof(vb, l),
                                    gamma * ie.n_f[k] * ie.n_f[l] * m[a][b],
                                );
                            }
                        }
                    }
                }
            }
            trip.to_csr()
        }
        (InterfaceSide::Porous, InterfaceSide::Porous) => {
            let mut trip = Triplets::new(dv.ndofs(), dv.ndofs());
            for ie in &mesh.interface_edges {
                let len = mesh.edge_length(ie.edge);
                let dof = dv.edge_dof(ie.edge);
                // constant traces orient/|e| against each other over |e|
                trip.push(dof, dof, gamma / len);
            }
            trip.to_csr()
        }
        (InterfaceSide::Fluid, InterfaceSide::Porous) => {
            let mut trip = Triplets::new(sv.ndofs(), dv.ndofs());
            for ie in &mesh.interface_edges {
                let (verts, _) = edge_mass(mesh, ie.edge);
                let orient = interface_orientation(mesh, ie);
                let col = dv.edge_dof(ie.edge);
                for &v in &verts {
                    for k in 0..2 {
                        trip.push(sv.vertex_dof(v, k), col, gamma * orient * ie.n_f[k] * 0.5);
                    }
                }
            }
            trip.to_csr()
        }
        (InterfaceSide::Porous, InterfaceSide::Fluid) => {
            let mut trip = Triplets::new(dv.ndofs(), sv.ndofs());
            for ie in &mesh.interface_edges {
                let (verts, _) = edge_mass(mesh, ie.edge);
                let orient = interface_orientation(mesh, ie);
                let row = dv.edge_dof(ie.edge);
                for &v in &verts {
                    for k in 0..2 {
                        trip.push(row, sv.vertex_dof(v, k), gamma * orient * ie.n_f[k] * 0.5);
                    }
                }
            }
            trip.to_csr()
        }
    }
}

/// Assembled load vectors of one time level.
#[derive(Debug, Clone)]
pub struct Loads {
    /// Fluid momentum load, including the interface consistency terms of
    /// the manufactured case.
    pub fluid: Vec<f64>,
    /// Darcy momentum load (pressure trace data on the Dirichlet side).
    pub darcy_momentum: Vec<f64>,
    /// Darcy mass load `g0 (f_p, q)`.
    pub darcy_mass: Vec<f64>,
}

/// Assemble all load vectors at time `t`.
///
/// Besides the body forces, the fluid load carries the interface stress
/// residuals of the manufactured fields: the exact solution of the
/// verification case satisfies mass conservation and the normal stress
/// balance on the interface but not the tangential slip law, so the
/// mismatch enters the momentum equation as boundary data on the interface.
pub fn assemble_loads(
    mesh: &TriMesh,
    spaces: &Spaces,
    params: &ModelParams,
    case: &dyn ManufacturedSolution,
    data: &BoundaryData,
    t: f64,
    quad: &TriangleQuadrature,
    equad: &EdgeQuadrature,
) -> Result<Loads> {
    let mut fluid = vec![0.0; spaces.stokes_vel.ndofs()];
    for tr in fluid_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(tr))?;
        let dofs = stokes_tri_dofs(mesh, &spaces.stokes_vel, tr);
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let f = case.f_f(x, t);
            let (values, _) = mini_basis(&geom, *p);
            let jw = 2.0 * geom.area * w;
            for i in 0..MINI_DOFS {
                for k in 0..2 {
                    fluid[dofs[i][k]] += jw * values[i] * f[k];
                }
            }
        }
    }
    add_interface_consistency(mesh, &spaces.stokes_vel, params, case, t, equad, &mut fluid);

    let mut darcy_momentum = vec![0.0; spaces.darcy_vel.ndofs()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.boundary_tag != Some(BoundaryTag::GammaPD) {
            continue;
        }
        let dof = spaces.darcy_vel.edge_dof(e);
        let tri = edge.tris.0;
        let local = mesh.tri_edges[tri].iter().position(|&x| x == e).unwrap();
        let sign = mesh.tri_edge_signs[tri][local] as f64;
        let (a, b) = (
            mesh.vertices[edge.vertices[0]],
            mesh.vertices[edge.vertices[1]],
        );
        // -g0 <phi_D, v . n_p>: the basis trace against the outward normal
        // is sign / |e|, so the length cancels.
        let mut acc = 0.0;
        for (s, w) in equad.points.iter().zip(&equad.weights) {
            let x = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
            acc += w * (data.pressure)(x, t);
        }
        darcy_momentum[dof] -= params.g0 * sign * acc;
    }

    let mut darcy_mass = vec![0.0; spaces.darcy_pr.ndofs()];
    for tr in porous_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(tr))?;
        let dof = spaces.darcy_pr.tri_dof(tr);
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            darcy_mass[dof] += params.g0 * 2.0 * geom.area * w * case.f_p(x, t);
        }
    }

    Ok(Loads {
        fluid,
        darcy_momentum,
        darcy_mass,
    })
}

/// Interface stress residuals of the exact fields, tested against the
/// fluid velocity trace: `<r_n, v . n_f> + <r_tau, v . tau>` with
/// `r_n = n.T.n + g0 phi = 2 nu n.D(u).n - p + g0 phi` and
/// `r_tau = tau.T.n + c_bjs u.tau = 2 nu tau.D(u).n + c_bjs u.tau`.
/// Both vanish when the exact fields satisfy the interface conditions.
fn add_interface_consistency(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    params: &ModelParams,
    case: &dyn ManufacturedSolution,
    t: f64,
    equad: &EdgeQuadrature,
    fluid: &mut [f64],
) {
    let coeff = params.bjs_coeff();
    for ie in &mesh.interface_edges {
        let edge = &mesh.edges[ie.edge];
        let (a, b) = (
            mesh.vertices[edge.vertices[0]],
            mesh.vertices[edge.vertices[1]],
        );
        let len = mesh.edge_length(ie.edge);
        let n = ie.n_f;
        let tau = ie.tangent();
        for (s, w) in equad.points.iter().zip(&equad.weights) {
            let x = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
            let g = case.grad_u_f(x, t);
            let u = case.u_f(x, t);
            let d = [
                [g[0][0], 0.5 * (g[0][1] + g[1][0])],
                [0.5 * (g[0][1] + g[1][0]), g[1][1]],
            ];
            let dn = [
                d[0][0] * n[0] + d[0][1] * n[1],
                d[1][0] * n[0] + d[1][1] * n[1],
            ];
            let ndn = n[0] * dn[0] + n[1] * dn[1];
            let tdn = tau[0] * dn[0] + tau[1] * dn[1];
            let r_n = 2.0 * params.nu * ndn - case.p_f(x, t) + params.g0 * case.phi_p(x, t);
            let r_tau = 2.0 * params.nu * tdn + coeff * (u[0] * tau[0] + u[1] * tau[1]);
            // P1 hats along the edge
            let hats = [1.0 - s, *s];
            for (hat, &v) in hats.iter().zip(&edge.vertices) {
                for k in 0..2 {
                    fluid[space.vertex_dof(v, k)] +=
                        w * len * hat * (r_n * n[k] + r_tau * tau[k]);
                }
            }
        }
    }
}

/// Right-hand side of the steady coupled projection: the model forms applied
/// to the given exact fields, laid out as `[u_f; p_f; u_p; phi_p]`.
pub fn assemble_ritz_rhs(
    mesh: &TriMesh,
    spaces: &Spaces,
    params: &ModelParams,
    case: &dyn ManufacturedSolution,
    t: f64,
    quad: &TriangleQuadrature,
    equad: &EdgeQuadrature,
) -> Result<Vec<f64>> {
    let (nv, np) = (spaces.stokes_vel.ndofs(), spaces.stokes_pr.ndofs());
    let (ne, nc) = (spaces.darcy_vel.ndofs(), spaces.darcy_pr.ndofs());
    let mut rhs = vec![0.0; nv + np + ne + nc];
    let (off_uf, off_pf, off_up, off_phi) = (0, nv, nv + np, nv + np + ne);

    for tr in fluid_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(tr))?;
        let vdofs = stokes_tri_dofs(mesh, &spaces.stokes_vel, tr);
        let tri = mesh.triangles[tr];
        let pdofs = [
            spaces.stokes_pr.vertex_dof(tri[0]),
            spaces.stokes_pr.vertex_dof(tri[1]),
            spaces.stokes_pr.vertex_dof(tri[2]),
        ];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let jw = 2.0 * geom.area * w;
            let g = case.grad_u_f(x, t);
            let pf = case.p_f(x, t);
            let div_u = g[0][0] + g[1][1];
            let d = [
                [g[0][0], 0.5 * (g[0][1] + g[1][0])],
                [0.5 * (g[0][1] + g[1][0]), g[1][1]],
            ];
            let (values, grads) = mini_basis(&geom, *p);
            for i in 0..MINI_DOFS {
                // 2 nu D(u) : D(phi_i e_k) = 2 nu (D grad(phi_i))_k
                let dg = [
                    d[0][0] * grads[i][0] + d[0][1] * grads[i][1],
                    d[1][0] * grads[i][0] + d[1][1] * grads[i][1],
                ];
                for k in 0..2 {
                    rhs[off_uf + vdofs[i][k]] +=
                        jw * (2.0 * params.nu * dg[k] - pf * grads[i][k]);
                }
            }
            for i in 0..P1_DOFS {
                rhs[off_pf + pdofs[i]] += jw * values[i] * div_u;
            }
        }
    }

    for tr in porous_triangles(mesh) {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(tr))?;
        let signs = mesh.tri_edge_signs[tr];
        let edofs = [
            spaces.darcy_vel.edge_dof(mesh.tri_edges[tr][0]),
            spaces.darcy_vel.edge_dof(mesh.tri_edges[tr][1]),
            spaces.darcy_vel.edge_dof(mesh.tri_edges[tr][2]),
        ];
        let cdof = spaces.darcy_pr.tri_dof(tr);
        let winv = [params.g0 / params.k[0], params.g0 / params.k[1]];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let jw = 2.0 * geom.area * w;
            let up = case.u_p(x, t);
            let phi = case.phi_p(x, t);
            let (psi, divs) = rt0_eval(&geom, signs, x);
            for i in 0..3 {
                rhs[off_up + edofs[i]] += jw
                    * (winv[0] * up[0] * psi[i][0] + winv[1] * up[1] * psi[i][1]
                        - params.g0 * phi * divs[i]);
            }
            rhs[off_phi + cdof] += jw * params.g0 * case.div_u_p(x, t);
        }
    }

    // Interface terms: the slip form and pressure coupling applied to the
    // exact fields (the exact jump is zero for a compatible case).
    let coeff = params.bjs_coeff();
    for ie in &mesh.interface_edges {
        let edge = &mesh.edges[ie.edge];
        let (a, b) = (
            mesh.vertices[edge.vertices[0]],
            mesh.vertices[edge.vertices[1]],
        );
        let len = mesh.edge_length(ie.edge);
        let n = ie.n_f;
        let tau = ie.tangent();
        let orient = interface_orientation(mesh, ie);
        let up_dof = spaces.darcy_vel.edge_dof(ie.edge);
        for (s, w) in equad.points.iter().zip(&equad.weights) {
            let x = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
            let u = case.u_f(x, t);
            let phi = case.phi_p(x, t);
            let u_tau = u[0] * tau[0] + u[1] * tau[1];
            let hats = [1.0 - s, *s];
            for (hat, &v) in hats.iter().zip(&edge.vertices) {
                for k in 0..2 {
                    rhs[off_uf + spaces.stokes_vel.vertex_dof(v, k)] +=
                        w * len * hat * (coeff * u_tau * tau[k] + params.g0 * phi * n[k]);
                }
            }
            // porous test trace: -g0 <phi, v_p . n_f>
            rhs[off_up + up_dof] -= w * params.g0 * phi * orient;
        }
    }

    Ok(rhs)
}
