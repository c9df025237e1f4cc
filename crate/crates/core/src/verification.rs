//! Manufactured verification case, error norms and convergence studies.

use std::f64::consts::PI;

use crate::assembly::ModelParams;
use crate::error::Result;
use crate::fem::{
    bubble_value, p1_values, rt0_eval, EdgeQuadrature, TriangleGeometry, TriangleQuadrature,
};
use crate::mesh::{DomainSpec, Region, TriMesh};
use crate::spaces::{BoundaryData, DarcyPressureSpace, DarcyVelocitySpace, Spaces, StokesVelocitySpace};

/// Exact fields, derivatives and forcings of a space-time solution used to
/// drive and verify a run.
pub trait ManufacturedSolution: Sync {
    fn u_f(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// `[i][j] = d u_i / d x_j`.
    fn grad_u_f(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    fn dt_u_f(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn p_f(&self, x: [f64; 2], t: f64) -> f64;
    fn u_p(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn div_u_p(&self, x: [f64; 2], t: f64) -> f64;
    fn phi_p(&self, x: [f64; 2], t: f64) -> f64;
    fn grad_phi_p(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn dt_phi_p(&self, x: [f64; 2], t: f64) -> f64;
    fn f_f(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn f_p(&self, x: [f64; 2], t: f64) -> f64;

    /// Boundary trace data induced by the exact fields.
    fn boundary_data(&self) -> BoundaryData
    where
        Self: Clone + Send + 'static,
    {
        let a = self.clone();
        let b = self.clone();
        let c = self.clone();
        BoundaryData {
            velocity: Box::new(move |x, t| a.u_f(x, t)),
            flux: Box::new(move |x, t, n_p| {
                let u = b.u_p(x, t);
                u[0] * n_p[0] + u[1] * n_p[1]
            }),
            pressure: Box::new(move |x, t| c.phi_p(x, t)),
        }
    }
}

/// The smooth artificial solution on the unit-square-over-unit-square
/// domain. Forcings are hand-derived closed forms for arbitrary positive
/// model constants; the fields themselves are fixed. The porous velocity
/// follows the conductivity through the Darcy law, so the interface mass
/// balance between the fields holds exactly only for unit vertical
/// conductivity (`k2 = 1`), the setting of the reference study.
#[derive(Debug, Clone, Copy)]
pub struct SmoothCase {
    nu: f64,
    k: [f64; 2],
    s0: f64,
}

impl SmoothCase {
    pub fn new(params: ModelParams) -> Self {
        SmoothCase {
            nu: params.nu,
            k: params.k,
            s0: params.s0,
        }
    }
}

impl ManufacturedSolution for SmoothCase {
    fn u_f(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        [
            (x * x * (y - 1.0).powi(2) + y) * c,
            (-2.0 / 3.0 * x * (y - 1.0).powi(3) + 2.0 - PI * (PI * x).sin()) * c,
        ]
    }

    fn grad_u_f(&self, [x, y]: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let c = t.cos();
        [
            [
                2.0 * x * (y - 1.0).powi(2) * c,
                (2.0 * x * x * (y - 1.0) + 1.0) * c,
            ],
            [
                (-2.0 / 3.0 * (y - 1.0).powi(3) - PI * PI * (PI * x).cos()) * c,
                -2.0 * x * (y - 1.0).powi(2) * c,
            ],
        ]
    }

    fn dt_u_f(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let s = t.sin();
        [
            -(x * x * (y - 1.0).powi(2) + y) * s,
            -(-2.0 / 3.0 * x * (y - 1.0).powi(3) + 2.0 - PI * (PI * x).sin()) * s,
        ]
    }

    fn p_f(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        (2.0 - PI * (PI * x).sin()) * (0.5 * PI * y).sin() * t.cos()
    }

    fn u_p(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        [
            self.k[0] * PI * PI * (PI * x).cos() * (1.0 - y - (PI * y).cos()) * c,
            self.k[1] * (2.0 - PI * (PI * x).sin()) * (1.0 - PI * (PI * y).sin()) * c,
        ]
    }

    fn div_u_p(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        let c = t.cos();
        (-self.k[0] * PI.powi(3) * (PI * x).sin() * (1.0 - y - (PI * y).cos())
            - self.k[1] * PI * PI * (2.0 - PI * (PI * x).sin()) * (PI * y).cos())
            * c
    }

    fn phi_p(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        (2.0 - PI * (PI * x).sin()) * (1.0 - y - (PI * y).cos()) * t.cos()
    }

    fn grad_phi_p(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let c = t.cos();
        [
            -PI * PI * (PI * x).cos() * (1.0 - y - (PI * y).cos()) * c,
            (2.0 - PI * (PI * x).sin()) * (-1.0 + PI * (PI * y).sin()) * c,
        ]
    }

    fn dt_phi_p(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        -(2.0 - PI * (PI * x).sin()) * (1.0 - y - (PI * y).cos()) * t.sin()
    }

    fn f_f(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let (s, c) = t.sin_cos();
        let lap_u1 = (2.0 * (y - 1.0).powi(2) + 2.0 * x * x) * c;
        let lap_u2 = (PI.powi(3) * (PI * x).sin() - 4.0 * x * (y - 1.0)) * c;
        let dp_dx = -PI * PI * (PI * x).cos() * (0.5 * PI * y).sin() * c;
        let dp_dy = 0.5 * PI * (2.0 - PI * (PI * x).sin()) * (0.5 * PI * y).cos() * c;
        [
            -(x * x * (y - 1.0).powi(2) + y) * s - self.nu * lap_u1 + dp_dx,
            -(-2.0 / 3.0 * x * (y - 1.0).powi(3) + 2.0 - PI * (PI * x).sin()) * s
                - self.nu * lap_u2
                + dp_dy,
        ]
    }

    fn f_p(&self, x: [f64; 2], t: f64) -> f64 {
        self.s0 * self.dt_phi_p(x, t) + self.div_u_p(x, t)
    }
}

/// All-zero solution, used for runs without manufactured data.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSolution;

impl ManufacturedSolution for ZeroSolution {
    fn u_f(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0, 0.0]
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
        0.0
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

/// Evaluate a MINI velocity field at a reference point of a fluid triangle.
pub fn eval_mini_velocity(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    coeffs: &[f64],
    tri: usize,
    p: [f64; 2],
) -> [f64; 2] {
    let l = p1_values(p);
    let b = bubble_value(p);
    let verts = mesh.triangles[tri];
    let mut out = [0.0, 0.0];
    for k in 0..2 {
        for i in 0..3 {
            out[k] += l[i] * coeffs[space.vertex_dof(verts[i], k)];
        }
        out[k] += b * coeffs[space.bubble_dof(tri, k)];
    }
    out
}

/// Evaluate an RT0 field at a physical point of a porous triangle.
pub fn eval_rt0_field(
    mesh: &TriMesh,
    space: &DarcyVelocitySpace,
    coeffs: &[f64],
    tri: usize,
    geom: &TriangleGeometry,
    x: [f64; 2],
) -> [f64; 2] {
    let (psi, _) = rt0_eval(geom, mesh.tri_edge_signs[tri], x);
    let mut out = [0.0, 0.0];
    for i in 0..3 {
        let u = coeffs[space.edge_dof(mesh.tri_edges[tri][i])];
        out[0] += u * psi[i][0];
        out[1] += u * psi[i][1];
    }
    out
}

/// Cell averages of an RT0 field (used for cell-based output).
pub fn rt0_cell_averages(
    mesh: &TriMesh,
    space: &DarcyVelocitySpace,
    coeffs: &[f64],
) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Region::Porous {
            continue;
        }
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        let centroid = geom.map([1.0 / 3.0, 1.0 / 3.0]);
        out.push(eval_rt0_field(mesh, space, coeffs, t, &geom, centroid));
    }
    out
}

/// L2 error of a MINI velocity field against an exact vector field over the
/// fluid region.
pub fn l2_error_stokes_velocity(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 2]) -> [f64; 2],
    quad: &TriangleQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for &t in &space.triangles {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let uh = eval_mini_velocity(mesh, space, coeffs, t, *p);
            let ue = exact(x);
            acc += 2.0 * geom.area * w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
        }
    }
    acc.sqrt()
}

/// L2 error of a continuous P1 scalar field over the fluid region.
pub fn l2_error_stokes_pressure(
    mesh: &TriMesh,
    space: &crate::spaces::StokesPressureSpace,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 2]) -> f64,
    quad: &TriangleQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Region::Fluid {
            continue;
        }
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        let verts = mesh.triangles[t];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let l = p1_values(*p);
            let ph: f64 = (0..3).map(|i| l[i] * coeffs[space.vertex_dof(verts[i])]).sum();
            acc += 2.0 * geom.area * w * (ph - exact(x)).powi(2);
        }
    }
    acc.sqrt()
}

/// L2 error of an RT0 velocity field over the porous region.
pub fn l2_error_darcy_velocity(
    mesh: &TriMesh,
    space: &DarcyVelocitySpace,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 2]) -> [f64; 2],
    quad: &TriangleQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Region::Porous {
            continue;
        }
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let uh = eval_rt0_field(mesh, space, coeffs, t, &geom, x);
            let ue = exact(x);
            acc += 2.0 * geom.area * w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
        }
    }
    acc.sqrt()
}

/// L2 error of a piecewise-constant field over the porous region.
pub fn l2_error_darcy_pressure(
    mesh: &TriMesh,
    space: &DarcyPressureSpace,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 2]) -> f64,
    quad: &TriangleQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for &t in &space.triangles {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        let value = coeffs[space.tri_dof(t)];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            acc += 2.0 * geom.area * w * (value - exact(x)).powi(2);
        }
    }
    acc.sqrt()
}

/// H1 seminorm error of a MINI velocity field against an exact gradient.
pub fn h1_seminorm_error_stokes(
    mesh: &TriMesh,
    space: &StokesVelocitySpace,
    coeffs: &[f64],
    exact_grad: &dyn Fn([f64; 2]) -> [[f64; 2]; 2],
    quad: &TriangleQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for &t in &space.triangles {
        let geom = TriangleGeometry::new(mesh.triangle_vertices(t)).unwrap();
        let verts = mesh.triangles[t];
        let gl = geom.p1_gradients();
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.map(*p);
            let gb = geom.bubble_gradient(*p);
            let ge = exact_grad(x);
            for k in 0..2 {
                let mut gh = [0.0, 0.0];
                for i in 0..3 {
                    let u = coeffs[space.vertex_dof(verts[i], k)];
                    gh[0] += u * gl[i][0];
                    gh[1] += u * gl[i][1];
                }
                let ub = coeffs[space.bubble_dof(t, k)];
                gh[0] += ub * gb[0];
                gh[1] += ub * gb[1];
                acc += 2.0
                    * geom.area
                    * w
                    * ((gh[0] - ge[k][0]).powi(2) + (gh[1] - ge[k][1]).powi(2));
            }
        }
    }
    acc.sqrt()
}

/// L2 norm of the normal velocity jump across the interface.
pub fn interface_jump_norm(
    mesh: &TriMesh,
    spaces: &Spaces,
    u_f: &[f64],
    u_p: &[f64],
    equad: &EdgeQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for ie in &mesh.interface_edges {
        let edge = &mesh.edges[ie.edge];
        let (a, b) = (
            mesh.vertices[edge.vertices[0]],
            mesh.vertices[edge.vertices[1]],
        );
        let len = mesh.edge_length(ie.edge);
        let n_e = mesh.edge_normal(ie.edge);
        let orient = if n_e[0] * ie.n_f[0] + n_e[1] * ie.n_f[1] > 0.0 {
            1.0
        } else {
            -1.0
        };
        // RT0 normal trace is constant on the edge
        let up_n = orient * u_p[spaces.darcy_vel.edge_dof(ie.edge)] / len;
        for (s, w) in equad.points.iter().zip(&equad.weights) {
            let _x = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
            let hats = [1.0 - s, *s];
            let mut uf_n = 0.0;
            for (hat, &v) in hats.iter().zip(&edge.vertices) {
                for k in 0..2 {
                    uf_n += hat * coeff_at(spaces, u_f, v, k) * ie.n_f[k];
                }
            }
            acc += w * len * (uf_n - up_n).powi(2);
        }
    }
    acc.sqrt()
}

fn coeff_at(spaces: &Spaces, u_f: &[f64], vertex: usize, component: usize) -> f64 {
    u_f[spaces.stokes_vel.vertex_dof(vertex, component)]
}

/// One row of a convergence study. Errors are absolute L2 norms; the
/// exact-field norms at the final time ride along so relative errors can
/// be formed without recomputation.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    /// Nominal grid spacing `1/n`.
    pub h: f64,
    pub tau: f64,
    pub err_uf: f64,
    pub err_up: f64,
    pub err_phi: f64,
    pub h1_uf: Option<f64>,
    pub jump: f64,
    pub norm_uf: f64,
    pub norm_up: f64,
    pub norm_phi: f64,
    pub wall_s: f64,
}

/// Per-mesh errors with estimated orders of convergence between adjacent
/// halving levels.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Orders for a column selector: `None` on the first row.
    pub fn eoc(&self, select: impl Fn(&ConvergenceRow) -> f64) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for pair in self.rows.windows(2) {
            let (e0, e1) = (select(&pair[0]), select(&pair[1]));
            out.push(Some((e0 / e1).log2()));
        }
        out
    }
}

/// Final-time errors of one field state against the exact solution,
/// together with the exact-field norms at that time.
pub struct FinalErrors {
    pub err_uf: f64,
    pub err_up: f64,
    pub err_phi: f64,
    pub h1_uf: f64,
    pub jump: f64,
    pub norm_uf: f64,
    pub norm_up: f64,
    pub norm_phi: f64,
}

pub fn final_errors(
    mesh: &TriMesh,
    spaces: &Spaces,
    state: &crate::solver::FieldState,
    case: &dyn ManufacturedSolution,
    quad: &TriangleQuadrature,
    equad: &EdgeQuadrature,
) -> FinalErrors {
    let t = state.t;
    let zero_v = vec![0.0; spaces.stokes_vel.ndofs()];
    let zero_e = vec![0.0; spaces.darcy_vel.ndofs()];
    let zero_c = vec![0.0; spaces.darcy_pr.ndofs()];
    FinalErrors {
        err_uf: l2_error_stokes_velocity(
            mesh,
            &spaces.stokes_vel,
            &state.u_f,
            &|x| case.u_f(x, t),
            quad,
        ),
        err_up: l2_error_darcy_velocity(
            mesh,
            &spaces.darcy_vel,
            &state.u_p,
            &|x| case.u_p(x, t),
            quad,
        ),
        err_phi: l2_error_darcy_pressure(
            mesh,
            &spaces.darcy_pr,
            &state.phi_p,
            &|x| case.phi_p(x, t),
            quad,
        ),
        h1_uf: h1_seminorm_error_stokes(
            mesh,
            &spaces.stokes_vel,
            &state.u_f,
            &|x| case.grad_u_f(x, t),
            quad,
        ),
        jump: interface_jump_norm(mesh, spaces, &state.u_f, &state.u_p, equad),
        norm_uf: l2_error_stokes_velocity(
            mesh,
            &spaces.stokes_vel,
            &zero_v,
            &|x| case.u_f(x, t),
            quad,
        ),
        norm_up: l2_error_darcy_velocity(
            mesh,
            &spaces.darcy_vel,
            &zero_e,
            &|x| case.u_p(x, t),
            quad,
        ),
        norm_phi: l2_error_darcy_pressure(
            mesh,
            &spaces.darcy_pr,
            &zero_c,
            &|x| case.phi_p(x, t),
            quad,
        ),
    }
}

/// Accumulated trajectory norms `tau * sum_n ||.||` over the steps of a
/// transient run: the H1 seminorm of the fluid velocity error and the L2
/// norm of the porous velocity error. Feed every accepted state (step > 0)
/// through [`TrajectoryNorms::observe`], e.g. from the transient hook.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrajectoryNorms {
    pub h1_uf: f64,
    pub l2_up: f64,
}

impl TrajectoryNorms {
    pub fn observe(
        &mut self,
        mesh: &TriMesh,
        spaces: &Spaces,
        case: &dyn ManufacturedSolution,
        state: &crate::solver::FieldState,
        tau: f64,
        quad: &TriangleQuadrature,
    ) {
        let t = state.t;
        self.h1_uf += tau
            * h1_seminorm_error_stokes(
                mesh,
                &spaces.stokes_vel,
                &state.u_f,
                &|x| case.grad_u_f(x, t),
                quad,
            );
        self.l2_up += tau
            * l2_error_darcy_velocity(
                mesh,
                &spaces.darcy_vel,
                &state.u_p,
                &|x| case.u_p(x, t),
                quad,
            );
    }
}

/// Time-step rule of a study or run.
#[derive(Debug, Clone, Copy)]
pub enum TimeRule {
    /// `tau = h^2` with `h` the nominal grid spacing.
    TauEqHSquared,
    /// Fixed step size.
    Explicit { tau: f64 },
}

/// Settings of a convergence study over a halving sequence of grid
/// spacings.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub domain: DomainSpec,
    pub params: ModelParams,
    /// Nominal grid spacings, strictly halving.
    pub h_list: Vec<f64>,
    pub time_rule: TimeRule,
    pub t_end: f64,
    pub volume_degree: usize,
    pub edge_degree: usize,
    /// Concurrent levels; 0 means one thread per level.
    pub jobs: usize,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.h_list.is_empty() {
            return Err(Error::InvalidParam("h_list must not be empty".into()));
        }
        for pair in self.h_list.windows(2) {
            if (pair[1] - 0.5 * pair[0]).abs() > 1e-12 {
                return Err(Error::InvalidParam(
                    "h_list must be a strictly halving sequence".into(),
                ));
            }
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParam("t_end must be positive".into()));
        }
        self.params.validate()
    }
}

/// Run every level of the study and return per-level outcomes in input
/// order. Levels execute concurrently on worker threads; each level owns
/// its mesh, spaces and factorizations.
pub fn run_convergence_levels(config: &StudyConfig) -> Result<Vec<(f64, Result<ConvergenceRow>)>> {
    config.validate()?;
    let case = SmoothCase::new(config.params);
    let jobs = if config.jobs == 0 {
        config.h_list.len()
    } else {
        config.jobs
    };

    let mut rows: Vec<Option<Result<ConvergenceRow>>> = Vec::new();
    rows.resize_with(config.h_list.len(), || None);
    let rows_ref = std::sync::Mutex::new(&mut rows);
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(config.h_list.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= config.h_list.len() {
                    break;
                }
                let row = run_level(config, &case, config.h_list[i]);
                rows_ref.lock().unwrap()[i] = Some(row);
            });
        }
    });

    Ok(config
        .h_list
        .iter()
        .copied()
        .zip(rows.into_iter().map(|r| r.expect("worker did not fill row")))
        .collect())
}

/// Run the transient scheme on every level and report errors at the final
/// time; fails on the first failing level, tagged with its grid spacing.
pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    let mut out = Vec::with_capacity(config.h_list.len());
    for (h, row) in run_convergence_levels(config)? {
        out.push(row.map_err(|e| e.at_level(h))?);
    }
    Ok(ConvergenceReport { rows: out })
}

fn run_level(
    config: &StudyConfig,
    case: &SmoothCase,
    h: f64,
) -> Result<ConvergenceRow> {
    use crate::error::Error;
    let start = std::time::Instant::now();
    let n = (1.0 / h).round();
    if (n - 1.0 / h).abs() > 1e-9 || n < 2.0 {
        return Err(Error::InvalidParam(format!("grid spacing {h} is not 1/n")));
    }
    let tau = match config.time_rule {
        TimeRule::TauEqHSquared => h * h,
        TimeRule::Explicit { tau } => tau,
    };
    let n_steps = (config.t_end / tau).round() as usize;
    if n_steps == 0 || (n_steps as f64 * tau - config.t_end).abs() > 1e-9 {
        return Err(Error::InvalidParam(format!(
            "step size {tau} does not divide the final time {}",
            config.t_end
        )));
    }

    let mesh = crate::mesh::build_structured_mesh(&config.domain, n as usize)?;
    let spaces = crate::spaces::build_spaces(&mesh)?;
    let quad = crate::fem::quad_triangle(config.volume_degree)?;
    let equad = crate::fem::quad_edge(config.edge_degree)?;
    let data = case.boundary_data();
    let grid = crate::solver::TimeGrid { tau, n_steps };
    let state = crate::solver::run_transient(
        &mesh,
        &spaces,
        &config.params,
        &grid,
        case,
        &data,
        config.volume_degree,
        config.edge_degree,
        None,
    )?;
    let errors = final_errors(&mesh, &spaces, &state, case, &quad, &equad);
    Ok(ConvergenceRow {
        h,
        tau,
        err_uf: errors.err_uf,
        err_up: errors.err_up,
        err_phi: errors.err_phi,
        h1_uf: Some(errors.h1_uf),
        jump: errors.jump,
        norm_uf: errors.norm_uf,
        norm_up: errors.norm_up,
        norm_phi: errors.norm_phi,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;
    use crate::spaces::build_spaces;

    #[test]
    fn pointwise_values_of_the_exact_fields() {
        let case = SmoothCase::new(ModelParams::unit());
        // phi_p(0, 1, 0) = (2 - 0)(1 - 1 - cos(pi)) = 2
        assert!((case.phi_p([0.0, 1.0], 0.0) - 2.0).abs() < 1e-14);
        let u0 = case.u_f([0.0, 0.0], 0.0);
        assert!(u0[0].abs() < 1e-14);
        assert!((u0[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interface_normal_velocities_match() {
        let case = SmoothCase::new(ModelParams::unit());
        for i in 0..24 {
            let x = (i as f64 + 0.5) / 24.0;
            for t in [0.0, 0.4, 1.0] {
                let uf = case.u_f([x, 1.0], t);
                let up = case.u_p([x, 1.0], t);
                assert!(
                    (uf[1] - up[1]).abs() < 1e-12,
                    "jump at x = {x}: {} vs {}",
                    uf[1],
                    up[1]
                );
            }
        }
    }

    #[test]
    fn darcy_law_holds_pointwise() {
        let params = ModelParams {
            k: [1.0, 1.0],
            ..ModelParams::unit()
        };
        let case = SmoothCase::new(params);
        let mut rng = 12345u64;
        for _ in 0..20 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = (rng >> 33) as f64 / (1u64 << 31) as f64;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let y = 1.0 + (rng >> 33) as f64 / (1u64 << 31) as f64;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t = (rng >> 33) as f64 / (1u64 << 31) as f64;
            let up = case.u_p([x, y], t);
            let gp = case.grad_phi_p([x, y], t);
            assert!((up[0] + params.k[0] * gp[0]).abs() < 1e-12);
            assert!((up[1] + params.k[1] * gp[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_error_trivial_values() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let quad = crate::fem::quad_triangle(6).unwrap();
        let zero = vec![0.0; spaces.darcy_pr.ndofs()];
        let e0 = l2_error_darcy_pressure(&mesh, &spaces.darcy_pr, &zero, &|_| 0.0, &quad);
        assert_eq!(e0, 0.0);
        let e1 = l2_error_darcy_pressure(&mesh, &spaces.darcy_pr, &zero, &|_| 1.0, &quad);
        assert!((e1 - 1.0).abs() < 1e-12); // sqrt(|Omega_p|) = 1
    }

    #[test]
    fn p1_interpolation_error_decays_at_second_order() {
        let spec = DomainSpec::unit_stacked();
        let quad = crate::fem::quad_triangle(6).unwrap();
        let field = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        let mut errors = Vec::new();
        for n in [4usize, 8, 16] {
            let mesh = build_structured_mesh(&spec, n).unwrap();
            let spaces = build_spaces(&mesh).unwrap();
            let coeffs: Vec<f64> = spaces
                .stokes_pr
                .vertices
                .iter()
                .map(|&v| field(mesh.vertices[v]))
                .collect();
            errors.push(l2_error_stokes_pressure(
                &mesh,
                &spaces.stokes_pr,
                &coeffs,
                &field,
                &quad,
            ));
        }
        let rate1 = (errors[0] / errors[1]).log2();
        let rate2 = (errors[1] / errors[2]).log2();
        assert!(rate1 > 1.8 && rate1 < 2.2, "rate {rate1}");
        assert!(rate2 > 1.9 && rate2 < 2.1, "rate {rate2}");
    }

    #[test]
    fn nodal_interpolation_reproduces_affine_fields() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let quad = crate::fem::quad_triangle(6).unwrap();
        let field = |x: [f64; 2]| [2.0 * x[0] - 3.0 * x[1] + 1.0, 0.5 * x[0] + x[1]];
        let mut coeffs = vec![0.0; spaces.stokes_vel.ndofs()];
        for (i, &v) in spaces.stokes_vel.vertices.iter().enumerate() {
            let u = field(mesh.vertices[v]);
            coeffs[2 * i] = u[0];
            coeffs[2 * i + 1] = u[1];
        }
        let err =
            l2_error_stokes_velocity(&mesh, &spaces.stokes_vel, &coeffs, &field, &quad);
        assert!(err < 1e-13, "affine field not reproduced: {err}");
    }

    #[test]
    fn mini_interpolant_h1_error_decays_at_first_order() {
        let spec = DomainSpec::unit_stacked();
        let quad = crate::fem::quad_triangle(6).unwrap();
        let field = |x: [f64; 2]| [(PI * x[0]).sin() * (PI * x[1]).sin(), x[0] * x[0] * x[1]];
        let grad = |x: [f64; 2]| {
            [
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ],
                [2.0 * x[0] * x[1], x[0] * x[0]],
            ]
        };
        let mut errors = Vec::new();
        for n in [4usize, 8, 16] {
            let mesh = build_structured_mesh(&spec, n).unwrap();
            let spaces = build_spaces(&mesh).unwrap();
            let mut coeffs = vec![0.0; spaces.stokes_vel.ndofs()];
            for (i, &v) in spaces.stokes_vel.vertices.iter().enumerate() {
                let u = field(mesh.vertices[v]);
                coeffs[2 * i] = u[0];
                coeffs[2 * i + 1] = u[1];
            }
            errors.push(h1_seminorm_error_stokes(
                &mesh,
                &spaces.stokes_vel,
                &coeffs,
                &grad,
                &quad,
            ));
        }
        let rate = (errors[1] / errors[2]).log2();
        assert!(rate > 0.9 && rate < 1.1, "rate {rate}");
    }

    #[test]
    fn jump_norm_of_constant_traces() {
        let mesh = build_structured_mesh(&DomainSpec::unit_stacked(), 4).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let equad = crate::fem::quad_edge(6).unwrap();
        // fluid trace a = 3, porous trace b = 1 on an interface of length 1
        let mut u_f = vec![0.0; spaces.stokes_vel.ndofs()];
        for i in 0..spaces.stokes_vel.vertices.len() {
            u_f[2 * i + 1] = 3.0;
        }
        let u_p: Vec<f64> = spaces
            .darcy_vel
            .edges
            .iter()
            .map(|&e| {
                let n = mesh.edge_normal(e);
                mesh.edge_length(e) * n[1]
            })
            .collect();
        let jump = interface_jump_norm(&mesh, &spaces, &u_f, &u_p, &equad);
        assert!((jump - 2.0).abs() < 1e-12);
        let zero_jump = interface_jump_norm(&mesh, &spaces, &u_f, &u_f_scaled(&mesh, &spaces, 3.0), &equad);
        assert!(zero_jump < 1e-12);
    }

    fn u_f_scaled(mesh: &TriMesh, spaces: &Spaces, scale: f64) -> Vec<f64> {
        spaces
            .darcy_vel
            .edges
            .iter()
            .map(|&e| {
                let n = mesh.edge_normal(e);
                mesh.edge_length(e) * n[1] * scale
            })
            .collect()
    }

    #[test]
    fn trajectory_norms_shrink_under_refinement() {
        let spec = DomainSpec::benchmark();
        let params = ModelParams::unit();
        let case = SmoothCase::new(params);
        let data = case.boundary_data();
        let quad = crate::fem::quad_triangle(6).unwrap();
        let mut totals = Vec::new();
        for n in [4usize, 8] {
            let mesh = build_structured_mesh(&spec, n).unwrap();
            let spaces = build_spaces(&mesh).unwrap();
            let tau = 1.0 / (n * n) as f64;
            let grid = crate::solver::TimeGrid {
                tau,
                n_steps: n * n / 4,
            };
            let mut traj = TrajectoryNorms::default();
            let mut hook = |step: usize, state: &crate::solver::FieldState| {
                if step > 0 {
                    traj.observe(&mesh, &spaces, &case, state, tau, &quad);
                }
            };
            crate::solver::run_transient(
                &mesh,
                &spaces,
                &params,
                &grid,
                &case,
                &data,
                6,
                6,
                Some(&mut hook),
            )
            .unwrap();
            assert!(traj.h1_uf.is_finite() && traj.h1_uf > 0.0);
            assert!(traj.l2_up.is_finite() && traj.l2_up > 0.0);
            totals.push(traj);
        }
        assert!(totals[1].h1_uf < totals[0].h1_uf);
        assert!(totals[1].l2_up < totals[0].l2_up);
    }

    #[test]
    fn eoc_layout() {
        let report = ConvergenceReport {
            rows: vec![
                ConvergenceRow {
                    h: 0.25,
                    tau: 0.0625,
                    err_uf: 4.0,
                    err_up: 2.0,
                    err_phi: 2.0,
                    h1_uf: None,
                    jump: 0.2,
                    norm_uf: 1.0,
                    norm_up: 1.0,
                    norm_phi: 1.0,
                    wall_s: 0.0,
                },
                ConvergenceRow {
                    h: 0.125,
                    tau: 0.015625,
                    err_uf: 1.0,
                    err_up: 1.0,
                    err_phi: 1.0,
                    h1_uf: None,
                    jump: 0.1,
                    norm_uf: 1.0,
                    norm_up: 1.0,
                    norm_phi: 1.0,
                    wall_s: 0.0,
                },
            ],
        };
        let eoc = report.eoc(|r| r.err_uf);
        assert_eq!(eoc.len(), 2);
        assert!(eoc[0].is_none());
        assert!((eoc[1].unwrap() - 2.0).abs() < 1e-14);
    }
}
