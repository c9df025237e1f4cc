//! Time stepping and linear solves: the decoupled backward-Euler scheme
//! (porous step with the lagged fluid trace, then the fluid step with the
//! fresh porous solution), the monolithic steady projection used for
//! initialization and rate checks, and the sparse direct-solve contract.
//!
//! All system matrices are time-independent, so each is factored once per
//! mesh and only right-hand sides are rebuilt per step.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::{
    assemble_a_f, assemble_a_gamma, assemble_a_p, assemble_b_f, assemble_b_p, assemble_loads,
    assemble_mass_f, assemble_mass_p, assemble_penalty, assemble_ritz_rhs, InterfaceSide, Loads,
    ModelParams,
};
use crate::error::{Error, Result};
use crate::fem::{quad_edge, quad_triangle, EdgeQuadrature, TriangleQuadrature};
use crate::mesh::TriMesh;
use crate::spaces::{
    darcy_essential_values, stokes_dirichlet_values, BoundaryData, Spaces,
};
use crate::sparse::{
    apply_dirichlet_rhs, constrain_matrix, BlockLayout, CsrMatrix, SparseSystem, Triplets,
};
use crate::verification::ManufacturedSolution;

/// Solver residual contract: relative residual of every accepted solution.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Coefficient vectors of the four fields at one time level.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub u_f: Vec<f64>,
    pub p_f: Vec<f64>,
    pub u_p: Vec<f64>,
    pub phi_p: Vec<f64>,
}

/// Uniform partition of the time interval.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn end_time(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParam(format!(
                "time step must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

fn seq_parallelism() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    // Sequential kernels keep factorizations and solves bit-reproducible.
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Sparse LU factorization with partial pivoting, reusable across
/// right-hand sides.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        seq_parallelism();
        if matrix.nrows != matrix.ncols {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix",
                matrix.nrows, matrix.ncols
            )));
        }
        let mut triplets = Vec::with_capacity(matrix.nnz());
        for r in 0..matrix.nrows {
            for (c, v) in matrix.row(r) {
                triplets.push(Triplet::new(r, c, v));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(
            matrix.nrows,
            matrix.ncols,
            &triplets,
        )
        .map_err(|e| Error::Solver(format!("building sparse matrix failed: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| {
            Error::Solver(format!(
                "LU factorization failed for {}x{} system (nnz {}): {e:?}",
                matrix.nrows,
                matrix.ncols,
                matrix.nnz()
            ))
        })?;
        Ok(SparseLu {
            lu,
            n: matrix.nrows,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        seq_parallelism();
        let mut x = rhs.to_vec();
        let mat = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        self.lu.solve_in_place(mat);
        x
    }
}

/// Direct solve of an assembled system with a residual guarantee.
pub fn sparse_solve(system: &SparseSystem) -> Result<Vec<f64>> {
    let lu = SparseLu::factor(&system.matrix)?;
    let x = lu.solve(&system.rhs);
    check_residual(&system.matrix, &x, &system.rhs)?;
    Ok(x)
}

fn check_residual(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> Result<()> {
    let mut ax = matrix.matvec(x);
    for (a, b) in ax.iter_mut().zip(rhs) {
        *a -= b;
    }
    let res = norm(&ax);
    let scale = norm(rhs).max(f64::MIN_POSITIVE);
    if !res.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver(format!(
            "solution is not finite for a {}x{} system (zero pivot or singular matrix)",
            matrix.nrows, matrix.ncols
        )));
    }
    if res > SOLVE_TOLERANCE * scale && res > 1e-13 {
        return Err(Error::Solver(format!(
            "relative residual {:.3e} exceeds {:.1e} for a {}x{} system (pivot breakdown or singular matrix)",
            res / scale,
            SOLVE_TOLERANCE,
            matrix.nrows,
            matrix.ncols
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembled, factored and boundary-ready operators of the decoupled
/// scheme for one mesh and time step.
pub struct SchemeOperators {
    pub tau: f64,
    /// Fluid system `[(1/tau) M + a_f + penalty, -B^T; B, 0]`, unconstrained.
    pub stokes_full: CsrMatrix,
    /// Constrained fluid matrix (factored form alongside).
    pub stokes_constrained: CsrMatrix,
    stokes_lu: SparseLu,
    pub stokes_layout: BlockLayout,
    pub stokes_bc_dofs: Vec<usize>,
    /// Porous system `[a_p + penalty, -(B_p^T + G); B_p + G^T, (g0 S0/tau) M_p]`.
    pub darcy_full: CsrMatrix,
    pub darcy_constrained: CsrMatrix,
    darcy_lu: SparseLu,
    pub darcy_layout: BlockLayout,
    pub darcy_bc_dofs: Vec<usize>,
    /// Fluid velocity mass matrix.
    pub mass_f: CsrMatrix,
    /// Porous pressure mass matrix (cell areas).
    pub mass_p: CsrMatrix,
    /// `gamma <u_f . n_f, v_p . n_f>`: lagged fluid trace into the porous step.
    pub pen_pf: CsrMatrix,
    /// `gamma <u_p . n_f, v_f . n_f>`: fresh porous trace into the fluid step.
    pub pen_fp: CsrMatrix,
    /// `g0 <phi, v_f . n_f>`: porous pressure into the fluid momentum.
    pub agamma_f: CsrMatrix,
    /// `g0 <q, u_f . n_f>`: lagged fluid trace into the porous mass row.
    pub agamma_f_t: CsrMatrix,
    pub vol_quad: TriangleQuadrature,
    pub edge_quad: EdgeQuadrature,
}

/// Assemble and factor everything the transient scheme needs.
pub fn build_scheme(
    mesh: &TriMesh,
    spaces: &Spaces,
    params: &ModelParams,
    tau: f64,
    volume_degree: usize,
    edge_degree: usize,
) -> Result<SchemeOperators> {
    params.validate()?;
    // Bubble products are degree six; never assemble matrices below that.
    let mat_quad = quad_triangle(volume_degree.max(6))?;
    let vol_quad = quad_triangle(volume_degree)?;
    let edge_quad = quad_edge(edge_degree)?;

    let sv = &spaces.stokes_vel;
    let (nv, np) = (sv.ndofs(), spaces.stokes_pr.ndofs());
    let (ne, nc) = (spaces.darcy_vel.ndofs(), spaces.darcy_pr.ndofs());

    let a_f = assemble_a_f(mesh, sv, params, &mat_quad)?;
    let mass_f = assemble_mass_f(mesh, sv, &mat_quad)?;
    let b_f = assemble_b_f(mesh, sv, &spaces.stokes_pr, &mat_quad)?;
    let pen_ff = assemble_penalty(mesh, InterfaceSide::Fluid, InterfaceSide::Fluid, spaces, params);

    let stokes_layout = BlockLayout::new(&[("u_f", nv), ("p_f", np)]);
    let mut trip = Triplets::new(nv + np, nv + np);
    trip.add_block(0, 0, &a_f, 1.0);
    trip.add_block(0, 0, &mass_f, 1.0 / tau);
    trip.add_block(0, 0, &pen_ff, 1.0);
    trip.add_block(0, nv, &b_f.transpose(), -1.0);
    trip.add_block(nv, 0, &b_f, 1.0);
    let stokes_full = trip.to_csr();
    let stokes_bc_dofs = sv.dirichlet_dofs.clone();
    let stokes_constrained = constrain_matrix(&stokes_full, &stokes_bc_dofs);
    let stokes_lu = SparseLu::factor(&stokes_constrained)?;

    let a_p = assemble_a_p(mesh, &spaces.darcy_vel, params, &mat_quad)?;
    let b_p = assemble_b_p(mesh, &spaces.darcy_vel, &spaces.darcy_pr, params);
    let mass_p = assemble_mass_p(mesh, &spaces.darcy_pr);
    let pen_pp = assemble_penalty(mesh, InterfaceSide::Porous, InterfaceSide::Porous, spaces, params);
    let agamma_p = assemble_a_gamma(mesh, &spaces.darcy_pr, InterfaceSide::Porous, spaces, params);

    let darcy_layout = BlockLayout::new(&[("u_p", ne), ("phi_p", nc)]);
    let mut trip = Triplets::new(ne + nc, ne + nc);
    trip.add_block(0, 0, &a_p, 1.0);
    trip.add_block(0, 0, &pen_pp, 1.0);
    trip.add_block(0, ne, &b_p.transpose(), -1.0);
    trip.add_block(0, ne, &agamma_p, -1.0);
    trip.add_block(ne, 0, &b_p, 1.0);
    trip.add_block(ne, 0, &agamma_p.transpose(), 1.0);
    trip.add_block(ne, ne, &mass_p, params.g0 * params.s0 / tau);
    let darcy_full = trip.to_csr();
    let darcy_bc_dofs = spaces.darcy_vel.essential_dofs.clone();
    let darcy_constrained = constrain_matrix(&darcy_full, &darcy_bc_dofs);
    let darcy_lu = SparseLu::factor(&darcy_constrained).map_err(|e| {
        Error::Solver(format!(
            "porous step system is singular (gamma = {} with S0 = {} can be rank-deficient): {e}",
            params.gamma, params.s0
        ))
    })?;

    let pen_pf = assemble_penalty(mesh, InterfaceSide::Porous, InterfaceSide::Fluid, spaces, params);
    let pen_fp = assemble_penalty(mesh, InterfaceSide::Fluid, InterfaceSide::Porous, spaces, params);
    let agamma_f = assemble_a_gamma(mesh, &spaces.darcy_pr, InterfaceSide::Fluid, spaces, params);
    let agamma_f_t = agamma_f.transpose();

    Ok(SchemeOperators {
        tau,
        stokes_full,
        stokes_constrained,
        stokes_lu,
        stokes_layout,
        stokes_bc_dofs,
        darcy_full,
        darcy_constrained,
        darcy_lu,
        darcy_layout,
        darcy_bc_dofs,
        mass_f,
        mass_p,
        pen_pf,
        pen_fp,
        agamma_f,
        agamma_f_t,
        vol_quad,
        edge_quad,
    })
}

/// Raw (unconstrained) right-hand side of the porous step at `t_next`,
/// with every lagged interface term moved to the right side.
pub fn darcy_rhs(
    ops: &SchemeOperators,
    params: &ModelParams,
    state: &FieldState,
    loads: &Loads,
) -> Vec<f64> {
    let ne = ops.darcy_layout.range("u_p").len();
    let nc = ops.darcy_layout.range("phi_p").len();
    let mut rhs = vec![0.0; ne + nc];
    rhs[..ne].copy_from_slice(&loads.darcy_momentum);
    ops.pen_pf.matvec_add(&state.u_f, 1.0, &mut rhs[..ne]);
    rhs[ne..].copy_from_slice(&loads.darcy_mass);
    ops.mass_p
        .matvec_add(&state.phi_p, params.g0 * params.s0 / ops.tau, &mut rhs[ne..]);
    ops.agamma_f_t.matvec_add(&state.u_f, 1.0, &mut rhs[ne..]);
    rhs
}

/// Porous subproblem: solve for the new Darcy velocity and pressure using
/// the lagged fluid trace.
pub fn darcy_step(
    mesh: &TriMesh,
    spaces: &Spaces,
    ops: &SchemeOperators,
    params: &ModelParams,
    state: &FieldState,
    t_next: f64,
    loads: &Loads,
    data: &BoundaryData,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ne = ops.darcy_layout.range("u_p").len();
    let mut rhs = darcy_rhs(ops, params, state, loads);
    let values = darcy_essential_values(mesh, &spaces.darcy_vel, data, t_next, &ops.edge_quad);
    apply_dirichlet_rhs(&ops.darcy_full, &mut rhs, &ops.darcy_bc_dofs, &values);
    let x = ops.darcy_lu.solve(&rhs);
    check_residual(&ops.darcy_constrained, &x, &rhs)?;
    Ok((x[..ne].to_vec(), x[ne..].to_vec()))
}

/// Raw (unconstrained) right-hand side of the fluid step at `t_next` given
/// the fresh porous solution.
pub fn stokes_rhs(
    ops: &SchemeOperators,
    state: &FieldState,
    u_p_next: &[f64],
    phi_next: &[f64],
    loads: &Loads,
) -> Vec<f64> {
    let nv = ops.stokes_layout.range("u_f").len();
    let np = ops.stokes_layout.range("p_f").len();
    let mut rhs = vec![0.0; nv + np];
    rhs[..nv].copy_from_slice(&loads.fluid);
    ops.mass_f.matvec_add(&state.u_f, 1.0 / ops.tau, &mut rhs[..nv]);
    ops.agamma_f.matvec_add(phi_next, -1.0, &mut rhs[..nv]);
    ops.pen_fp.matvec_add(u_p_next, 1.0, &mut rhs[..nv]);
    rhs
}

/// Fluid subproblem: solve for the new Stokes velocity and pressure using
/// the fresh porous trace.
pub fn stokes_step(
    mesh: &TriMesh,
    spaces: &Spaces,
    ops: &SchemeOperators,
    state: &FieldState,
    u_p_next: &[f64],
    phi_next: &[f64],
    t_next: f64,
    loads: &Loads,
    data: &BoundaryData,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nv = ops.stokes_layout.range("u_f").len();
    if u_p_next.len() != ops.pen_fp.ncols || phi_next.len() != ops.agamma_f.ncols {
        return Err(Error::Dimension(
            "porous solution does not match the fluid step couplings".into(),
        ));
    }
    let mut rhs = stokes_rhs(ops, state, u_p_next, phi_next, loads);
    let values = stokes_dirichlet_values(mesh, &spaces.stokes_vel, data, t_next);
    apply_dirichlet_rhs(&ops.stokes_full, &mut rhs, &ops.stokes_bc_dofs, &values);
    let x = ops.stokes_lu.solve(&rhs);
    check_residual(&ops.stokes_constrained, &x, &rhs)?;
    Ok((x[..nv].to_vec(), x[nv..].to_vec()))
}

/// Monolithic steady coupled projection of given exact fields: the
/// four-field system whose right side applies the model forms to the exact
/// solution. Used to initialize the porous pressure and to verify
/// approximation orders.
pub fn ritz_projection(
    mesh: &TriMesh,
    spaces: &Spaces,
    params: &ModelParams,
    case: &dyn ManufacturedSolution,
    data: &BoundaryData,
    t: f64,
    volume_degree: usize,
    edge_degree: usize,
) -> Result<FieldState> {
    params.validate()?;
    let mat_quad = quad_triangle(volume_degree.max(6))?;
    let vol_quad = quad_triangle(volume_degree)?;
    let edge_quad = quad_edge(edge_degree)?;

    let sv = &spaces.stokes_vel;
    let (nv, np) = (sv.ndofs(), spaces.stokes_pr.ndofs());
    let (ne, nc) = (spaces.darcy_vel.ndofs(), spaces.darcy_pr.ndofs());
    let layout = BlockLayout::new(&[("u_f", nv), ("p_f", np), ("u_p", ne), ("phi_p", nc)]);
    let (off_uf, off_pf, off_up, off_phi) = (0, nv, nv + np, nv + np + ne);

    let a_f = assemble_a_f(mesh, sv, params, &mat_quad)?;
    let b_f = assemble_b_f(mesh, sv, &spaces.stokes_pr, &mat_quad)?;
    let a_p = assemble_a_p(mesh, &spaces.darcy_vel, params, &mat_quad)?;
    let b_p = assemble_b_p(mesh, &spaces.darcy_vel, &spaces.darcy_pr, params);
    let pen_ff = assemble_penalty(mesh, InterfaceSide::Fluid, InterfaceSide::Fluid, spaces, params);
    let pen_fp = assemble_penalty(mesh, InterfaceSide::Fluid, InterfaceSide::Porous, spaces, params);
    let pen_pf = assemble_penalty(mesh, InterfaceSide::Porous, InterfaceSide::Fluid, spaces, params);
    let pen_pp = assemble_penalty(mesh, InterfaceSide::Porous, InterfaceSide::Porous, spaces, params);
    let agamma_f = assemble_a_gamma(mesh, &spaces.darcy_pr, InterfaceSide::Fluid, spaces, params);
    let agamma_p = assemble_a_gamma(mesh, &spaces.darcy_pr, InterfaceSide::Porous, spaces, params);

    let n = layout.total();
    let mut trip = Triplets::new(n, n);
    trip.add_block(off_uf, off_uf, &a_f, 1.0);
    trip.add_block(off_uf, off_uf, &pen_ff, 1.0);
    trip.add_block(off_uf, off_up, &pen_fp, -1.0);
    trip.add_block(off_uf, off_pf, &b_f.transpose(), -1.0);
    trip.add_block(off_uf, off_phi, &agamma_f, 1.0);
    trip.add_block(off_pf, off_uf, &b_f, 1.0);
    trip.add_block(off_up, off_uf, &pen_pf, -1.0);
    trip.add_block(off_up, off_up, &a_p, 1.0);
    trip.add_block(off_up, off_up, &pen_pp, 1.0);
    trip.add_block(off_up, off_phi, &b_p.transpose(), -1.0);
    trip.add_block(off_up, off_phi, &agamma_p, -1.0);
    trip.add_block(off_phi, off_uf, &agamma_f.transpose(), -1.0);
    trip.add_block(off_phi, off_up, &b_p, 1.0);
    trip.add_block(off_phi, off_up, &agamma_p.transpose(), 1.0);
    let matrix = trip.to_csr();

    let mut rhs = assemble_ritz_rhs(mesh, spaces, params, case, t, &vol_quad, &edge_quad)?;

    let mut bc_dofs: Vec<usize> = sv.dirichlet_dofs.iter().map(|&d| off_uf + d).collect();
    let mut bc_values = stokes_dirichlet_values(mesh, sv, data, t);
    let darcy_values = darcy_essential_values(mesh, &spaces.darcy_vel, data, t, &edge_quad);
    bc_dofs.extend(spaces.darcy_vel.essential_dofs.iter().map(|&d| off_up + d));
    bc_values.extend(darcy_values);

    let constrained = constrain_matrix(&matrix, &bc_dofs);
    apply_dirichlet_rhs(&matrix, &mut rhs, &bc_dofs, &bc_values);
    let lu = SparseLu::factor(&constrained)
        .map_err(|e| Error::Solver(format!("steady projection system: {e}")))?;
    let x = lu.solve(&rhs);
    check_residual(&constrained, &x, &rhs)?;

    Ok(FieldState {
        t,
        u_f: x[layout.range("u_f")].to_vec(),
        p_f: x[layout.range("p_f")].to_vec(),
        u_p: x[layout.range("u_p")].to_vec(),
        phi_p: x[layout.range("phi_p")].to_vec(),
    })
}

/// Nodal interpolant of the exact initial velocity: vertex values of the
/// exact field, bubble coefficients zero.
pub fn interpolate_initial_velocity(
    mesh: &TriMesh,
    spaces: &Spaces,
    case: &dyn ManufacturedSolution,
    t: f64,
) -> Vec<f64> {
    let sv = &spaces.stokes_vel;
    let mut u = vec![0.0; sv.ndofs()];
    for (i, &v) in sv.vertices.iter().enumerate() {
        let value = case.u_f(mesh.vertices[v], t);
        u[2 * i] = value[0];
        u[2 * i + 1] = value[1];
    }
    u
}

/// Advance the decoupled scheme over the whole time grid. Each step solves
/// the porous problem with the lagged fluid trace and then the fluid
/// problem with the fresh porous solution. The per-step hook observes every
/// accepted state.
#[allow(clippy::too_many_arguments)]
pub fn run_transient(
    mesh: &TriMesh,
    spaces: &Spaces,
    params: &ModelParams,
    grid: &TimeGrid,
    case: &dyn ManufacturedSolution,
    data: &BoundaryData,
    volume_degree: usize,
    edge_degree: usize,
    mut hook: Option<&mut dyn FnMut(usize, &FieldState)>,
) -> Result<FieldState> {
    grid.validate()?;
    let init = ritz_projection(
        mesh,
        spaces,
        params,
        case,
        data,
        0.0,
        volume_degree,
        edge_degree,
    )?;
    let mut state = FieldState {
        t: 0.0,
        u_f: interpolate_initial_velocity(mesh, spaces, case, 0.0),
        p_f: init.p_f,
        u_p: init.u_p,
        phi_p: init.phi_p,
    };
    if let Some(hook) = hook.as_deref_mut() {
        hook(0, &state);
    }
    if grid.n_steps == 0 {
        return Ok(state);
    }

    let ops = build_scheme(mesh, spaces, params, grid.tau, volume_degree, edge_degree)?;
    for step in 0..grid.n_steps {
        let t_next = grid.tau * (step + 1) as f64;
        let loads = assemble_loads(
            mesh,
            spaces,
            params,
            case,
            data,
            t_next,
            &ops.vol_quad,
            &ops.edge_quad,
        )
        .map_err(|e| e.at_step(step + 1))?;
        let (u_p, phi_p) = darcy_step(mesh, spaces, &ops, params, &state, t_next, &loads, data)
            .map_err(|e| e.at_step(step + 1))?;
        let (u_f, p_f) = stokes_step(
            mesh, spaces, &ops, &state, &u_p, &phi_p, t_next, &loads, data,
        )
        .map_err(|e| e.at_step(step + 1))?;
        state = FieldState {
            t: t_next,
            u_f,
            p_f,
            u_p,
            phi_p,
        };
        if let Some(hook) = hook.as_deref_mut() {
            hook(step + 1, &state);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, DomainSpec};
    use crate::spaces::build_spaces;
    use crate::verification::{SmoothCase, ManufacturedSolution, ZeroSolution};

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid { tau: 0.0, n_steps: 1 }.validate().is_err());
        assert!(TimeGrid { tau: -0.1, n_steps: 1 }.validate().is_err());
        assert!(TimeGrid { tau: f64::NAN, n_steps: 1 }.validate().is_err());
        let grid = TimeGrid { tau: 0.25, n_steps: 4 };
        assert!(grid.validate().is_ok());
        assert_eq!(grid.end_time(), 1.0);
    }

    #[test]
    fn sparse_solve_identity_and_diagonal() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 2.0);
        t.push(1, 1, 4.0);
        let system = SparseSystem::new(
            t.to_csr(),
            vec![2.0, 8.0],
            BlockLayout::new(&[("x", 2)]),
        )
        .unwrap();
        let x = sparse_solve(&system).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);

        let mut id = Triplets::new(3, 3);
        for i in 0..3 {
            id.push(i, i, 1.0);
        }
        let system = SparseSystem::new(
            id.to_csr(),
            vec![3.0, -1.0, 0.5],
            BlockLayout::new(&[("x", 3)]),
        )
        .unwrap();
        let x = sparse_solve(&system).unwrap();
        assert_eq!(x, vec![3.0, -1.0, 0.5]);
    }

    #[test]
    fn singular_system_reports_failure() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 1.0);
        let system =
            SparseSystem::new(t.to_csr(), vec![1.0, 2.0], BlockLayout::new(&[("x", 2)])).unwrap();
        assert!(sparse_solve(&system).is_err());
    }

    #[test]
    fn zero_data_steps_produce_zero_solution() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let params = ModelParams::unit();
        let grid = TimeGrid {
            tau: 0.1,
            n_steps: 2,
        };
        let data = BoundaryData::homogeneous();
        let state = run_transient(
            &mesh, &spaces, &params, &grid, &ZeroSolution, &data, 6, 6, None,
        )
        .unwrap();
        assert!(state.u_f.iter().all(|v| v.abs() < 1e-12));
        assert!(state.u_p.iter().all(|v| v.abs() < 1e-12));
        assert!(state.phi_p.iter().all(|v| v.abs() < 1e-12));
        assert!(state.p_f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn transient_composition_matches_manual_steps() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let params = ModelParams::unit();
        let case = SmoothCase::new(params);
        let data = case.boundary_data();
        let tau = 0.05;

        let grid = TimeGrid { tau, n_steps: 1 };
        let auto = run_transient(&mesh, &spaces, &params, &grid, &case, &data, 6, 6, None).unwrap();

        let init = ritz_projection(&mesh, &spaces, &params, &case, &data, 0.0, 6, 6).unwrap();
        let state0 = FieldState {
            t: 0.0,
            u_f: interpolate_initial_velocity(&mesh, &spaces, &case, 0.0),
            p_f: init.p_f,
            u_p: init.u_p,
            phi_p: init.phi_p,
        };
        let ops = build_scheme(&mesh, &spaces, &params, tau, 6, 6).unwrap();
        let loads = assemble_loads(
            &mesh,
            &spaces,
            &params,
            &case,
            &data,
            tau,
            &ops.vol_quad,
            &ops.edge_quad,
        )
        .unwrap();
        let (u_p, phi_p) =
            darcy_step(&mesh, &spaces, &ops, &params, &state0, tau, &loads, &data).unwrap();
        let (u_f, p_f) =
            stokes_step(&mesh, &spaces, &ops, &state0, &u_p, &phi_p, tau, &loads, &data).unwrap();

        assert_eq!(auto.u_f, u_f);
        assert_eq!(auto.p_f, p_f);
        assert_eq!(auto.u_p, u_p);
        assert_eq!(auto.phi_p, phi_p);
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let params = ModelParams::unit();
        let case = SmoothCase::new(params);
        let data = case.boundary_data();
        let grid = TimeGrid {
            tau: 0.1,
            n_steps: 0,
        };
        let state = run_transient(&mesh, &spaces, &params, &grid, &case, &data, 6, 6, None).unwrap();
        assert_eq!(state.t, 0.0);
        let interp = interpolate_initial_velocity(&mesh, &spaces, &case, 0.0);
        assert_eq!(state.u_f, interp);
    }

    #[test]
    fn ritz_projection_reproduces_discrete_fields() {
        // u_f = (1, 0), p_f = 0, u_p = 0, phi_p = 2: all four lie in the
        // discrete spaces and have zero interface jump, so the projection
        // returns them exactly.
        #[derive(Clone, Copy)]
        struct Discrete;
        impl ManufacturedSolution for Discrete {
            fn u_f(&self, _: [f64; 2], _: f64) -> [f64; 2] {
                [1.0, 0.0]
            }
            fn grad_u_f(&self, _: [f64; 2], _: f64) -> [[f64; 2]; 2] {
                [[0.0; 2]; 2]
            }
            fn dt_u_f(&self, _: [f64; 2], _: f64) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn p_f(&self, _: [f64; 2], _: f64) -> f64 {
                0.0
            }
            fn u_p(&self, _: [f64; 2], _: f64) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn div_u_p(&self, _: [f64; 2], _: f64) -> f64 {
                0.0
            }
            fn phi_p(&self, _: [f64; 2], _: f64) -> f64 {
                2.0
            }
            fn grad_phi_p(&self, _: [f64; 2], _: f64) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn dt_phi_p(&self, _: [f64; 2], _: f64) -> f64 {
                0.0
            }
            fn f_f(&self, _: [f64; 2], _: f64) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn f_p(&self, _: [f64; 2], _: f64) -> f64 {
                0.0
            }
        }
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let params = ModelParams::unit();
        let case = Discrete;
        let data = case.boundary_data();
        let proj = ritz_projection(&mesh, &spaces, &params, &case, &data, 0.0, 6, 6).unwrap();
        for i in 0..spaces.stokes_vel.vertices.len() {
            assert!((proj.u_f[2 * i] - 1.0).abs() < 1e-10);
            assert!(proj.u_f[2 * i + 1].abs() < 1e-10);
        }
        for i in 0..spaces.stokes_vel.triangles.len() {
            let base = 2 * spaces.stokes_vel.vertices.len();
            assert!(proj.u_f[base + 2 * i].abs() < 1e-10);
            assert!(proj.u_f[base + 2 * i + 1].abs() < 1e-10);
        }
        assert!(proj.p_f.iter().all(|v| v.abs() < 1e-10));
        assert!(proj.u_p.iter().all(|v| v.abs() < 1e-10));
        assert!(proj.phi_p.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn cached_factorization_is_bit_stable() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let params = ModelParams::unit();
        let case = SmoothCase::new(params);
        let data = case.boundary_data();
        let ops = build_scheme(&mesh, &spaces, &params, 0.1, 6, 6).unwrap();
        let init = ritz_projection(&mesh, &spaces, &params, &case, &data, 0.0, 6, 6).unwrap();
        let state = FieldState {
            t: 0.0,
            u_f: interpolate_initial_velocity(&mesh, &spaces, &case, 0.0),
            p_f: init.p_f,
            u_p: init.u_p,
            phi_p: init.phi_p,
        };
        let loads = assemble_loads(
            &mesh, &spaces, &params, &case, &data, 0.1, &ops.vol_quad, &ops.edge_quad,
        )
        .unwrap();
        // same cached factorization twice
        let a = darcy_step(&mesh, &spaces, &ops, &params, &state, 0.1, &loads, &data).unwrap();
        let b = darcy_step(&mesh, &spaces, &ops, &params, &state, 0.1, &loads, &data).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        // a freshly factored operator set gives bit-identical results
        let ops2 = build_scheme(&mesh, &spaces, &params, 0.1, 6, 6).unwrap();
        let c = darcy_step(&mesh, &spaces, &ops2, &params, &state, 0.1, &loads, &data).unwrap();
        assert_eq!(a.0, c.0);
        assert_eq!(a.1, c.1);
    }
}
